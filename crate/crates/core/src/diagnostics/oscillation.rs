use serde::{Deserialize, Serialize};

use super::path::CadlagPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub w_sup: f64,
    pub v_start: f64,
    pub v_end: f64,
    pub u: f64,
    pub delta: f64,
}

fn clip(t: f64, delta: f64, window: (f64, f64)) -> (f64, f64) {
    assert!(delta > 0.0, "delta must be positive, got {delta}");
    let (s, e) = window;
    assert!(s <= t && t <= e, "t = {t} outside the window [{s}, {e}]");
    (s.max(t - delta), e.min(t + delta))
}

/// `max over i < j < k` of the distance from `v[j]` to the segment between
/// `v[i]` and `v[k]`, in linear time.
pub fn sequence_w(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut suf_max = vec![f64::NEG_INFINITY; n];
    let mut suf_min = vec![f64::INFINITY; n];
    for j in (0..n - 1).rev() {
        suf_max[j] = suf_max[j + 1].max(v[j + 1]);
        suf_min[j] = suf_min[j + 1].min(v[j + 1]);
    }
    let (mut pre_max, mut pre_min) = (v[0], v[0]);
    let mut best = 0.0_f64;
    for j in 1..n - 1 {
        let above = v[j] - pre_min.max(suf_min[j]);
        let below = pre_max.min(suf_max[j]) - v[j];
        best = best.max(above).max(below);
        pre_max = pre_max.max(v[j]);
        pre_min = pre_min.min(v[j]);
    }
    best
}

/// Sup over `t1 < t2 < t3` in `[S ∨ (t-δ), T ∧ (t+δ)]` of the distance from
/// `h(t2)` to the segment `[h(t1), h(t3)]`.
pub fn w_oscillation(h: &CadlagPath, t: f64, delta: f64, window: (f64, f64)) -> f64 {
    let (a, b) = clip(t, delta, window);
    sequence_w(&h.candidates(a, b))
}

/// Sup of `|h(t2) - h(t1)|` over the same clipped window.
pub fn v_oscillation(h: &CadlagPath, t: f64, delta: f64, window: (f64, f64)) -> f64 {
    let (a, b) = clip(t, delta, window);
    let c = h.candidates(a, b);
    let (lo, hi) = c
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// `u = v(S) ∨ v(T) ∨ sup_t w(t)`, with the sup over `t` bounded by the
/// windows of half-width `2δ` centred at `S + 2kδ`, which cover every window
/// of half-width `δ`.
pub fn u_oscillation(h: &CadlagPath, delta: f64, window: (f64, f64)) -> OscillationReport {
    let (s, e) = window;
    let v_start = v_oscillation(h, s, delta, window);
    let v_end = v_oscillation(h, e, delta, window);
    let pieces = ((e - s) / (2.0 * delta)).ceil() as usize;
    let w_sup = (0..=pieces)
        .map(|k| (s + 2.0 * delta * k as f64).min(e))
        .map(|c| w_oscillation(h, c, 2.0 * delta, window))
        .fold(0.0, f64::max);
    OscillationReport {
        w_sup,
        v_start,
        v_end,
        u: v_start.max(v_end).max(w_sup),
        delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_paths_have_zero_w() {
        let h = CadlagPath::step(
            vec![0.0, 0.2, 0.5, 0.7],
            vec![0.0, 0.3, 0.31, 2.0],
            0.0,
            1.0,
        )
        .unwrap();
        for t in [0.0, 0.3, 0.6, 1.0] {
            assert_eq!(w_oscillation(&h, t, 0.5, (0.0, 1.0)), 0.0);
        }
    }

    #[test]
    fn zigzag_peak() {
        let h = CadlagPath::linear(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(w_oscillation(&h, 0.5, 1.0, (0.0, 1.0)), 1.0);
        assert_eq!(v_oscillation(&h, 0.5, 1.0, (0.0, 1.0)), 1.0);
    }

    #[test]
    fn single_jump_v() {
        let h = CadlagPath::step(vec![0.0, 0.5], vec![1.0, 1.75], 1.0, 1.0).unwrap();
        assert_eq!(v_oscillation(&h, 0.5, 0.1, (0.0, 1.0)), 0.75);
        assert_eq!(v_oscillation(&h, 0.2, 0.1, (0.0, 1.0)), 0.0);
        assert_eq!(w_oscillation(&h, 0.5, 0.1, (0.0, 1.0)), 0.0);
    }

    #[test]
    fn constant_path_u_is_zero() {
        let h = CadlagPath::step(vec![0.0], vec![0.4], 0.4, 1.0).unwrap();
        let rep = u_oscillation(&h, 0.05, (0.0, 1.0));
        assert_eq!(rep.u, 0.0);
    }

    #[test]
    fn spike_is_seen_by_w() {
        let h = CadlagPath::step(vec![0.0, 0.4, 0.41], vec![0.0, 1.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(w_oscillation(&h, 0.4, 0.1, (0.0, 1.0)), 1.0);
        let rep = u_oscillation(&h, 0.05, (0.0, 1.0));
        assert_eq!(rep.w_sup, 1.0);
        assert_eq!(rep.v_start, 0.0);
    }

    #[test]
    fn sequence_w_examples() {
        assert_eq!(sequence_w(&[0.0, 1.0]), 0.0);
        assert_eq!(sequence_w(&[0.0, 2.0, 1.0]), 1.0);
        assert_eq!(sequence_w(&[1.0, 0.0, 3.0, 2.0]), 1.0);
    }

    #[test]
    #[should_panic(expected = "delta must be positive")]
    fn zero_delta_panics() {
        let h = CadlagPath::linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        w_oscillation(&h, 0.5, 0.0, (0.0, 1.0));
    }
}
