use thiserror::Error;

use super::path::CadlagPath;

#[derive(Debug, Error, PartialEq)]
pub enum M1Error {
    #[error("paths live on different domains: [{0}, {1}] vs [{2}, {3}]")]
    DomainMismatch(f64, f64, f64, f64),
    #[error("resolution {resolution} is below the number of graph vertices ({vertices})")]
    Resolution { resolution: usize, vertices: usize },
}

fn sample(vertices: &[(f64, f64)], extra: usize) -> Vec<(f64, f64)> {
    let seg_len = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0).abs() + (b.1 - a.1).abs();
    let total: f64 = vertices.windows(2).map(|w| seg_len(w[0], w[1])).sum();
    let mut out = Vec::with_capacity(vertices.len() + extra);
    let mut k = 1;
    let mut walked = 0.0;
    for w in vertices.windows(2) {
        out.push(w[0]);
        let len = seg_len(w[0], w[1]);
        while k < extra {
            let target = total * k as f64 / extra as f64;
            if target >= walked + len {
                break;
            }
            if len > 0.0 && target > walked {
                let f = (target - walked) / len;
                out.push((
                    w[0].0 + f * (w[1].0 - w[0].0),
                    w[0].1 + f * (w[1].1 - w[0].1),
                ));
            }
            k += 1;
        }
        walked += len;
    }
    out.push(*vertices.last().unwrap());
    out
}

/// Discrete Fréchet distance under the max norm on `(t, x)`.
pub fn discrete_frechet(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let d = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs().max((a.1 - b.1).abs());
    let mut prev = vec![f64::INFINITY; q.len()];
    let mut cur = vec![0.0; q.len()];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            let reach = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]),
            };
            cur[j] = d(a, b).max(reach);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len() - 1]
}

/// Upper bound on the M1 distance between two paths on a common domain.
///
/// Both completed graphs are sampled at their vertices plus `2^j` points
/// equally spaced in arc length, for every `2^j <= resolution`; the monotone
/// alignment of the samples with the smallest max-norm gap is found by
/// dynamic programming. Any such alignment extends to parametric
/// representations, so the result bounds `d_M1` from above, and adding levels
/// can only lower it.
pub fn m1_distance(h1: &CadlagPath, h2: &CadlagPath, resolution: usize) -> Result<f64, M1Error> {
    let tol = 1e-12 * (1.0 + h1.end().abs().max(h1.start().abs()));
    if (h1.start() - h2.start()).abs() > tol || (h1.end() - h2.end()).abs() > tol {
        return Err(M1Error::DomainMismatch(
            h1.start(),
            h1.end(),
            h2.start(),
            h2.end(),
        ));
    }
    let g1 = h1.graph_vertices();
    let g2 = h2.graph_vertices();
    let vertices = g1.len().max(g2.len());
    if resolution < vertices {
        return Err(M1Error::Resolution {
            resolution,
            vertices,
        });
    }
    let mut best = f64::INFINITY;
    let mut level = 1;
    while level <= resolution {
        best = best.min(discrete_frechet(&sample(&g1, level), &sample(&g2, level)));
        level *= 2;
    }
    Ok(best)
}
