use crate::engine::SimulationResult;

/// Grid points where `L^r_t` differs from `sum_s K[r][s] D^s_t` computed from
/// the recorded default times, plus, for the two-phase matrix, points where
/// the common drift leaves `[-β, α]`. Empty for a consistent run.
pub fn representation_violations(result: &SimulationResult) -> Vec<String> {
    let k = &result.config.coupling;
    let n = result.config.particles;
    let m = result.default_times.len();
    let mut sorted: Vec<Vec<f64>> = result
        .default_times
        .iter()
        .map(|ts| ts.iter().flatten().copied().collect())
        .collect();
    for ts in &mut sorted {
        ts.sort_by(f64::total_cmp);
    }
    let bounds = k.as_two_phase();
    let mut out = Vec::new();
    for (idx, &t) in result.drift.times.iter().enumerate() {
        let counts: Vec<usize> = sorted
            .iter()
            .map(|ts| ts.partition_point(|&s| s <= t))
            .collect();
        for r in 0..m {
            let recorded = result.drift.values[r][idx];
            let expected = k.drift(r, &counts, n);
            if recorded.to_bits() != expected.to_bits() {
                out.push(format!(
                    "t = {t}, region {r}: drift {recorded} but defaulted fractions give {expected}"
                ));
            }
        }
        if let Some((alpha, beta)) = bounds {
            let l = result.drift.values[0][idx];
            if !(-beta..=alpha).contains(&l) {
                out.push(format!(
                    "t = {t}: common drift {l} outside [-{beta}, {alpha}]"
                ));
            }
        }
        if out.len() >= 20 {
            break;
        }
    }
    out
}
