use std::fs;
use std::path::Path;

use stefan_core::compare::{compare_runs, decoupled_config, ExpectedOrder};
use stefan_core::diagnostics::{
    physicality_audit, representation_violations, tightness_check, AuditReport,
};
use stefan_core::engine::{run_with_workers, SimulationResult};
use stefan_core::output::{fmt_f64, load_run, unix_now, write_run, StoredRun};

use crate::sweep::{
    convergence, jump_free_probes, run_grid, MACRO_JUMP_FRACTION, PROBE_MARGIN_FRACTION,
};
use crate::{find_runs, load_experiment, AuditArgs, CliError, DiagnoseArgs, RunArgs, SweepArgs};

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(|e| fail(&e))?;
    w.write_record(header).map_err(|e| fail(&e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| fail(&e))?;
    }
    w.flush().map_err(|e| fail(&e))
}

fn write_audit(dir: &Path, report: &AuditReport) -> Result<(), CliError> {
    write_csv(
        &dir.join("audit.csv"),
        &["jump_time", "region", "recorded", "recomputed", "pass"],
        report.rows.iter().map(|r| {
            vec![
                fmt_f64(r.jump_time),
                r.region.to_string(),
                fmt_f64(r.recorded),
                fmt_f64(r.recomputed),
                r.pass.to_string(),
            ]
        }),
    )
}

/// Representation identity, drift bounds and (when measures were stored) the
/// physicality audit for a finished run.
fn check_run(result: &SimulationResult, dir: &Path) -> Result<(), CliError> {
    let problems = representation_violations(result);
    if !problems.is_empty() {
        return Err(CliError::invariant(format!(
            "{}: drift does not match the defaulted fractions:\n  {}",
            dir.display(),
            problems.join("\n  ")
        )));
    }
    if result.config.store_jump_measures {
        let report = physicality_audit(result).map_err(|e| CliError::runtime(e.to_string()))?;
        write_audit(dir, &report)?;
        if !report.passed() {
            return Err(CliError::invariant(format!(
                "{}: {} jump(s) differ from the physical jump size (see audit.csv)",
                dir.display(),
                report.violations()
            )));
        }
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let exp = load_experiment(args)?;
    let started = unix_now();
    let result = run_with_workers(&exp.simulation, args.workers)?;
    let manifest = write_run(&result, &args.out, started)?;
    check_run(&result, &args.out)?;
    println!(
        "{}: {} grid points, {} jumps, defaults {:?}",
        args.out.display(),
        manifest.totals.grid_points,
        manifest.totals.jumps,
        manifest.totals.defaults
    );
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let exp = load_experiment(&args.run)?;
    let base = &exp.simulation;
    let mut n_list = match &args.n_list {
        Some(l) => l.clone(),
        None if !exp.n_list.is_empty() => exp.n_list.clone(),
        None => vec![base.particles],
    };
    if n_list.contains(&0) {
        return Err(CliError::config("population sizes must be positive"));
    }
    n_list.sort_unstable();
    if let Some(w) = n_list.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::config(format!(
            "duplicate population size {} in the sweep",
            w[0]
        )));
    }
    let seeds: Vec<u64> = match args.seeds {
        Some(0) => return Err(CliError::config("--seeds must be at least 1")),
        Some(count) => (0..count as u64).map(|i| base.seed + i).collect(),
        None if !exp.seeds.is_empty() => exp.seeds.clone(),
        None => vec![base.seed],
    };

    let started = unix_now();
    let results = run_grid(base, &n_list, &seeds, args.run.workers)?;
    for res in &results {
        let dir = args
            .run
            .out
            .join(format!("N{}", res.config.particles))
            .join(format!("seed{}", res.config.seed));
        write_run(res, &dir, started)?;
        check_run(res, &dir)?;
    }

    let names: Vec<String> = base.regions.iter().map(|r| r.name.clone()).collect();
    let groups: Vec<(usize, Vec<&SimulationResult>)> = n_list
        .iter()
        .map(|&n| {
            (
                n,
                results.iter().filter(|r| r.config.particles == n).collect(),
            )
        })
        .collect();
    let mass = (0..base.coupling.regions())
        .map(|r| base.coupling.row(r).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let drifts: Vec<_> = results.iter().map(|r| &r.drift).collect();
    let probes = jump_free_probes(
        &drifts,
        args.probes,
        MACRO_JUMP_FRACTION * mass,
        PROBE_MARGIN_FRACTION * base.horizon,
    );
    let (rows, probe_rows) = convergence(&groups, &names, &probes);
    write_csv(
        &args.run.out.join("convergence.csv"),
        &[
            "n_coarse",
            "n_fine",
            "region",
            "m1_distance",
            "probe_sup_distance",
        ],
        rows.iter().map(|r| {
            vec![
                r.n_coarse.to_string(),
                r.n_fine.to_string(),
                r.region.clone(),
                fmt_f64(r.m1_distance),
                fmt_f64(r.probe_sup_distance),
            ]
        }),
    )?;
    write_csv(
        &args.run.out.join("probes.csv"),
        &["t", "region", "n_coarse", "n_fine", "mean_abs_diff"],
        probe_rows.iter().map(|r| {
            vec![
                fmt_f64(r.t),
                r.region.clone(),
                r.n_coarse.to_string(),
                r.n_fine.to_string(),
                fmt_f64(r.mean_abs_diff),
            ]
        }),
    )?;
    println!(
        "{} runs, {} probe times, {} convergence rows",
        results.len(),
        probes.len(),
        rows.len()
    );
    Ok(())
}

pub fn cmd_compare(args: &RunArgs) -> Result<(), CliError> {
    let exp = load_experiment(args)?;
    let started = unix_now();
    let coupled = run_with_workers(&exp.simulation, args.workers)?;
    let decoupled = run_with_workers(&decoupled_config(&exp.simulation), args.workers)?;
    for (res, name) in [(&coupled, "coupled"), (&decoupled, "decoupled")] {
        let dir = args.out.join(name);
        write_run(res, &dir, started)?;
        check_run(res, &dir)?;
    }

    let names: Vec<&str> = exp
        .simulation
        .regions
        .iter()
        .map(|r| r.name.as_str())
        .collect();
    let opt = |t: Option<f64>| t.map(fmt_f64).unwrap_or_default();
    write_csv(
        &args.out.join("paired_defaults.csv"),
        &["region", "particle_id", "coupled_time", "decoupled_time"],
        coupled
            .default_times
            .iter()
            .zip(&decoupled.default_times)
            .enumerate()
            .flat_map(|(r, (c, d))| {
                let name = names[r];
                c.iter()
                    .zip(d)
                    .enumerate()
                    .filter(|(_, (a, b))| a.is_some() || b.is_some())
                    .map(move |(i, (&a, &b))| vec![name.to_string(), i.to_string(), opt(a), opt(b)])
            }),
    )?;
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().map(|n| format!("L_coupled_{n}")));
    header.extend(names.iter().map(|n| format!("L_decoupled_{n}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &args.out.join("drift_overlay.csv"),
        &header_refs,
        coupled.drift.times.iter().enumerate().map(|(k, &t)| {
            let mut row = vec![fmt_f64(t)];
            row.extend(coupled.drift.values.iter().map(|v| fmt_f64(v[k])));
            row.extend(decoupled.drift.values.iter().map(|v| fmt_f64(v[k])));
            row
        }),
    )?;

    let report = compare_runs(&coupled, &decoupled);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let path = args.out.join("comparison.json");
    fs::write(&path, json + "\n")
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    match report.expected {
        ExpectedOrder::Unordered => {
            println!(
                "coupling has mixed-sign cross terms or a negative diagonal; no ordering to check"
            );
            Ok(())
        }
        _ if report.violations() > 0 => Err(CliError::invariant(format!(
            "comparison ordering violated {} time(s):\n  {}",
            report.violations(),
            report.examples.join("\n  ")
        ))),
        _ => {
            println!(
                "ordering holds: {} particles and {} grid points checked",
                report.particles_checked, report.grid_points_checked
            );
            Ok(())
        }
    }
}

fn load_runs(root: &Path) -> Result<Vec<StoredRun>, CliError> {
    find_runs(root)?
        .iter()
        .map(|dir| load_run(dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display()))))
        .collect()
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<(), CliError> {
    let mut runs = load_runs(&args.runs)?;
    runs.sort_by(|a, b| {
        a.manifest
            .seed
            .cmp(&b.manifest.seed)
            .then(a.dir.cmp(&b.dir))
    });
    let first = &runs[0].manifest.config;
    let Some((alpha, beta)) = first.coupling.as_two_phase() else {
        return Err(CliError::config(
            "the oscillation bound applies to the two-phase common drift only",
        ));
    };
    let same = |c: &stefan_core::SimulationConfig| {
        let mut c = c.clone();
        c.seed = first.seed;
        c == *first
    };
    if let Some(odd) = runs.iter().find(|r| !same(&r.manifest.config)) {
        return Err(CliError::config(format!(
            "{} was run with a different config",
            odd.dir.display()
        )));
    }
    if args.r.iter().chain(&args.delta).any(|x| !(*x > 0.0)) {
        return Err(CliError::config("r and delta must be positive"));
    }
    if let Some(t) = args.t.iter().find(|t| !(0.0..=first.horizon).contains(*t)) {
        return Err(CliError::config(format!(
            "probe time {t} outside [0, {}]",
            first.horizon
        )));
    }

    let drifts: Vec<_> = runs.iter().map(|r| r.drift.clone()).collect();
    let mut cells = Vec::new();
    for &t in &args.t {
        for &delta in &args.delta {
            for &r in &args.r {
                cells.push(tightness_check(&drifts, r, delta, t, alpha, beta));
            }
        }
    }
    let out = args.out.clone().unwrap_or_else(|| args.runs.clone());
    fs::create_dir_all(&out).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    write_csv(
        &out.join("oscillations.csv"),
        &[
            "t",
            "delta",
            "r",
            "runs",
            "empirical_prob",
            "bound",
            "stderr",
        ],
        cells.iter().map(|c| {
            vec![
                fmt_f64(c.t),
                fmt_f64(c.delta),
                fmt_f64(c.r),
                c.runs.to_string(),
                fmt_f64(c.empirical_prob),
                fmt_f64(c.bound),
                fmt_f64(c.stderr),
            ]
        }),
    )?;
    let failing: Vec<String> = cells
        .iter()
        .filter(|c| !c.within(args.sigmas))
        .map(|c| {
            format!(
                "t={} delta={} r={}: {} > {} + {}*{}",
                c.t, c.delta, c.r, c.empirical_prob, c.bound, args.sigmas, c.stderr
            )
        })
        .collect();
    if !failing.is_empty() {
        return Err(CliError::invariant(format!(
            "oscillation bound exceeded:\n  {}",
            failing.join("\n  ")
        )));
    }
    println!(
        "{} runs, {} cells within the bound",
        runs.len(),
        cells.len()
    );
    Ok(())
}

pub fn cmd_audit(args: &AuditArgs) -> Result<(), CliError> {
    let runs = load_runs(&args.runs)?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for run in &runs {
        let result = SimulationResult {
            config: run.manifest.config.clone(),
            drift: run.drift.clone(),
            default_times: Vec::new(),
            snapshots: Vec::new(),
            paths: None,
        };
        let report = physicality_audit(&result)
            .map_err(|e| CliError::config(format!("{}: {e}", run.dir.display())))?;
        write_audit(&run.dir, &report)?;
        checked += report.rows.len();
        if !report.passed() {
            violations.push(format!(
                "{}: {} violation(s)",
                run.dir.display(),
                report.violations()
            ));
        }
    }
    if !violations.is_empty() {
        return Err(CliError::invariant(format!(
            "physicality audit failed:\n  {}",
            violations.join("\n  ")
        )));
    }
    println!(
        "{} runs, {checked} jumps audited, no violations",
        runs.len()
    );
    Ok(())
}
