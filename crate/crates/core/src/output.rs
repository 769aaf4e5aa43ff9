//! On-disk layout of a run directory.
//!
//! | file | columns |
//! |---|---|
//! | `lambda.csv` | `t`, `L_<region>`...; one row per grid time, preceded by a row holding the pre-jump values at every jump time |
//! | `defaults.csv` | `region`, `particle_id`, `default_time` (defaulted particles only) |
//! | `snapshots.csv` | `t`, `region`, `bin_lo`, `bin_hi`, `count` |
//! | `jumps.csv` | `time`, `grid_index`, `steps`, then `pre_`, `post_`, `jump_`, `triggers_`, `defaults_` per region |
//! | `jump_measures.csv` | `jump`, `region`, `position` (only with `store_jump_measures`) |
//! | `paths.csv` | `t`, `region`, `particle_id`, `x` (only with `record_paths`) |
//! | `manifest.json` | config echo, seed, scheme, wall times, totals, SHA-256 of every CSV |
//!
//! Floats are written with 17 significant digits, so values read back are
//! bit-identical to the ones written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{DriftPath, HitScheme, JumpRecord, SimulationConfig, SimulationResult};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: {message}")]
    Format { file: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bad(file: &str, message: impl Into<String>) -> OutputError {
    OutputError::Format {
        file: file.to_string(),
        message: message.into(),
    }
}

/// Float formatting used in every CSV.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn names(config: &SimulationConfig) -> Vec<&str> {
    config.regions.iter().map(|r| r.name.as_str()).collect()
}

pub fn lambda_csv(result: &SimulationResult) -> Vec<u8> {
    let regions = names(&result.config);
    let mut header = vec!["t".to_string()];
    header.extend(regions.iter().map(|n| format!("L_{n}")));
    let d = &result.drift;
    let mut rows = Vec::with_capacity(d.times.len() + d.jumps.len());
    let mut jumps = d.jumps.iter().peekable();
    for (k, &t) in d.times.iter().enumerate() {
        if let Some(j) = jumps.next_if(|j| j.grid_index == k) {
            let mut row = vec![fmt_f64(t)];
            row.extend(j.pre.iter().map(|&v| fmt_f64(v)));
            rows.push(row);
        }
        let mut row = vec![fmt_f64(t)];
        row.extend(d.values.iter().map(|v| fmt_f64(v[k])));
        rows.push(row);
    }
    csv_bytes(&header, rows)
}

pub fn defaults_csv(result: &SimulationResult) -> Vec<u8> {
    let regions = names(&result.config);
    let header = ["region", "particle_id", "default_time"].map(String::from);
    let rows = result.default_times.iter().enumerate().flat_map(|(r, ts)| {
        let name = regions[r];
        ts.iter()
            .enumerate()
            .filter_map(move |(i, t)| t.map(|t| vec![name.to_string(), i.to_string(), fmt_f64(t)]))
    });
    csv_bytes(&header, rows)
}

pub fn snapshots_csv(result: &SimulationResult) -> Vec<u8> {
    let regions = names(&result.config);
    let header = ["t", "region", "bin_lo", "bin_hi", "count"].map(String::from);
    let mut rows = Vec::new();
    for s in &result.snapshots {
        let (lo, hi) = s.range;
        for (r, counts) in s.counts.iter().enumerate() {
            let bins = counts.len();
            for (b, &c) in counts.iter().enumerate() {
                let b_lo = lo + (hi - lo) * b as f64 / bins as f64;
                let b_hi = if b + 1 == bins {
                    hi
                } else {
                    lo + (hi - lo) * (b + 1) as f64 / bins as f64
                };
                rows.push(vec![
                    fmt_f64(s.time),
                    regions[r].to_string(),
                    fmt_f64(b_lo),
                    fmt_f64(b_hi),
                    c.to_string(),
                ]);
            }
        }
    }
    csv_bytes(&header, rows)
}

pub fn jumps_csv(result: &SimulationResult) -> Vec<u8> {
    let regions = names(&result.config);
    let mut header: Vec<String> = ["time", "grid_index", "steps"].map(String::from).into();
    for field in ["pre", "post", "jump", "triggers", "defaults"] {
        header.extend(regions.iter().map(|n| format!("{field}_{n}")));
    }
    let rows = result.drift.jumps.iter().map(|j| {
        let mut row = vec![
            fmt_f64(j.time),
            j.grid_index.to_string(),
            j.steps.to_string(),
        ];
        row.extend(j.pre.iter().map(|&v| fmt_f64(v)));
        row.extend(j.post.iter().map(|&v| fmt_f64(v)));
        row.extend(j.jump.iter().map(|&v| fmt_f64(v)));
        row.extend(j.triggers.iter().map(usize::to_string));
        row.extend(j.defaults.iter().map(usize::to_string));
        row
    });
    csv_bytes(&header, rows)
}

pub fn jump_measures_csv(result: &SimulationResult) -> Vec<u8> {
    let regions = names(&result.config);
    let header = ["jump", "region", "position"].map(String::from);
    let mut rows = Vec::new();
    for (idx, j) in result.drift.jumps.iter().enumerate() {
        if let Some(m) = &j.measure {
            for (r, xs) in m.iter().enumerate() {
                rows.extend(
                    xs.iter()
                        .map(|&x| vec![idx.to_string(), regions[r].to_string(), fmt_f64(x)]),
                );
            }
        }
    }
    csv_bytes(&header, rows)
}

pub fn paths_csv(result: &SimulationResult) -> Option<Vec<u8>> {
    let regions = names(&result.config);
    let header = ["t", "region", "particle_id", "x"].map(String::from);
    result.paths.as_ref().map(|paths| {
        csv_bytes(
            &header,
            paths.iter().map(|p| {
                vec![
                    fmt_f64(p.time),
                    regions[p.region].to_string(),
                    p.particle.to_string(),
                    fmt_f64(p.position),
                ]
            }),
        )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub defaults: Vec<usize>,
    pub jumps: usize,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: SimulationConfig,
    pub seed: u64,
    pub scheme: HitScheme,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub totals: RunTotals,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes every output of `result` into `dir` (created if needed) and returns
/// the manifest that was written alongside.
pub fn write_run(
    result: &SimulationResult,
    dir: &Path,
    started_unix: f64,
) -> Result<RunManifest, OutputError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = vec![
        ("lambda.csv", lambda_csv(result)),
        ("defaults.csv", defaults_csv(result)),
        ("snapshots.csv", snapshots_csv(result)),
        ("jumps.csv", jumps_csv(result)),
    ];
    if result.config.store_jump_measures {
        files.push(("jump_measures.csv", jump_measures_csv(result)));
    }
    if let Some(p) = paths_csv(result) {
        files.push(("paths.csv", p));
    }
    let mut digests = Vec::with_capacity(files.len());
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        digests.push(FileDigest {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: result.config.clone(),
        seed: result.config.seed,
        scheme: result.config.scheme,
        started_unix,
        finished_unix: unix_now(),
        totals: RunTotals {
            defaults: (0..result.default_times.len())
                .map(|r| result.defaults(r))
                .collect(),
            jumps: result.drift.jumps.len(),
            grid_points: result.drift.times.len(),
        },
        files: digests,
    };
    let path = dir.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    serde_json::to_writer_pretty(&mut f, &manifest)
        .map_err(|e| bad("manifest.json", e.to_string()))?;
    f.write_all(b"\n").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn parse_manifest(text: &str) -> Result<RunManifest, OutputError> {
    let m: RunManifest =
        serde_json::from_str(text).map_err(|e| bad("manifest.json", e.to_string()))?;
    m.config
        .validate()
        .map_err(|e| bad("manifest.json", e.to_string()))?;
    Ok(m)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes())
}

fn header(file: &str, r: &mut csv::Reader<&[u8]>) -> Result<Vec<String>, OutputError> {
    Ok(r.headers()
        .map_err(|e| bad(file, e.to_string()))?
        .iter()
        .map(String::from)
        .collect())
}

fn float(file: &str, line: usize, field: &str, s: &str) -> Result<f64, OutputError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| {
            bad(
                file,
                format!("line {line}: `{field}` is not a finite number: `{s}`"),
            )
        })
}

fn count(file: &str, line: usize, field: &str, s: &str) -> Result<usize, OutputError> {
    s.trim().parse::<usize>().map_err(|_| {
        bad(
            file,
            format!("line {line}: `{field}` is not a count: `{s}`"),
        )
    })
}

fn records(
    file: &str,
    r: &mut csv::Reader<&[u8]>,
    width: usize,
) -> Result<Vec<(usize, Vec<String>)>, OutputError> {
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(file, e.to_string()))?;
        let line = i + 2;
        if rec.len() != width {
            return Err(bad(
                file,
                format!("line {line}: expected {width} fields, found {}", rec.len()),
            ));
        }
        out.push((line, rec.iter().map(String::from).collect()));
    }
    Ok(out)
}

/// Region names and drift on the grid from `lambda.csv`. Pre-jump rows are
/// dropped; the returned path has no jump records.
pub fn parse_lambda(text: &str) -> Result<(Vec<String>, DriftPath), OutputError> {
    const FILE: &str = "lambda.csv";
    let mut r = reader(text);
    let head = header(FILE, &mut r)?;
    if head.first().map(String::as_str) != Some("t") || head.len() < 2 {
        return Err(bad(FILE, "header must be `t,L_<region>,...`"));
    }
    let mut regions = Vec::with_capacity(head.len() - 1);
    for h in &head[1..] {
        match h.strip_prefix("L_") {
            Some(n) if !n.is_empty() => regions.push(n.to_string()),
            _ => {
                return Err(bad(
                    FILE,
                    format!("column `{h}` is not of the form `L_<region>`"),
                ))
            }
        }
    }
    let rows = records(FILE, &mut r, head.len())?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let t = float(FILE, *line, "t", &row[0])?;
        let vals = (1..row.len())
            .map(|c| float(FILE, *line, &head[c], &row[c]))
            .collect::<Result<Vec<_>, _>>()?;
        parsed.push((*line, t, vals));
    }
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); regions.len()];
    for i in 0..parsed.len() {
        let (line, t, ref vals) = parsed[i];
        if parsed.get(i + 1).is_some_and(|next| next.1 == t) {
            if i > 0 && parsed[i - 1].1 == t {
                return Err(bad(
                    FILE,
                    format!("line {line}: time {t} appears more than twice"),
                ));
            }
            continue;
        }
        if times.last().is_some_and(|&last| t <= last) {
            return Err(bad(FILE, format!("line {line}: times must increase")));
        }
        times.push(t);
        for (v, &x) in values.iter_mut().zip(vals) {
            v.push(x);
        }
    }
    if times.is_empty() {
        return Err(bad(FILE, "no rows"));
    }
    Ok((
        regions,
        DriftPath {
            times,
            values,
            jumps: Vec::new(),
        },
    ))
}

/// Jump records from `jumps.csv`, without measures.
pub fn parse_jumps(text: &str) -> Result<(Vec<String>, Vec<JumpRecord>), OutputError> {
    const FILE: &str = "jumps.csv";
    let mut r = reader(text);
    let head = header(FILE, &mut r)?;
    if head.len() < 8 || head[..3] != ["time", "grid_index", "steps"] || (head.len() - 3) % 5 != 0 {
        return Err(bad(
            FILE,
            "header must be `time,grid_index,steps` followed by five columns per region",
        ));
    }
    let m = (head.len() - 3) / 5;
    let regions: Vec<String> = head[3..3 + m]
        .iter()
        .map(|h| {
            h.strip_prefix("pre_")
                .map(String::from)
                .ok_or_else(|| bad(FILE, format!("unexpected column `{h}`")))
        })
        .collect::<Result<_, _>>()?;
    for (b, field) in ["pre", "post", "jump", "triggers", "defaults"]
        .iter()
        .enumerate()
    {
        for (r, name) in regions.iter().enumerate() {
            if head[3 + b * m + r] != format!("{field}_{name}") {
                return Err(bad(
                    FILE,
                    format!("column {} should be `{field}_{name}`", 4 + b * m + r),
                ));
            }
        }
    }
    let mut out = Vec::new();
    for (line, row) in records(FILE, &mut r, head.len())? {
        let fs = |b: usize| {
            (0..m)
                .map(|r| float(FILE, line, &head[3 + b * m + r], &row[3 + b * m + r]))
                .collect::<Result<Vec<_>, _>>()
        };
        let cs = |b: usize| {
            (0..m)
                .map(|r| count(FILE, line, &head[3 + b * m + r], &row[3 + b * m + r]))
                .collect::<Result<Vec<_>, _>>()
        };
        out.push(JumpRecord {
            time: float(FILE, line, "time", &row[0])?,
            grid_index: count(FILE, line, "grid_index", &row[1])?,
            steps: count(FILE, line, "steps", &row[2])?,
            pre: fs(0)?,
            post: fs(1)?,
            jump: fs(2)?,
            triggers: cs(3)?,
            defaults: cs(4)?,
            measure: None,
        });
    }
    Ok((regions, out))
}

/// Attaches the measures in `jump_measures.csv` to `jumps`.
pub fn attach_jump_measures(
    text: &str,
    regions: &[String],
    jumps: &mut [JumpRecord],
) -> Result<(), OutputError> {
    const FILE: &str = "jump_measures.csv";
    let mut r = reader(text);
    let head = header(FILE, &mut r)?;
    if head != ["jump", "region", "position"] {
        return Err(bad(FILE, "header must be `jump,region,position`"));
    }
    for j in jumps.iter_mut() {
        j.measure = Some(vec![Vec::new(); regions.len()]);
    }
    for (line, row) in records(FILE, &mut r, 3)? {
        let idx = count(FILE, line, "jump", &row[0])?;
        let reg = regions
            .iter()
            .position(|n| *n == row[1])
            .ok_or_else(|| bad(FILE, format!("line {line}: unknown region `{}`", row[1])))?;
        let x = float(FILE, line, "position", &row[2])?;
        let jump = jumps
            .get_mut(idx)
            .ok_or_else(|| bad(FILE, format!("line {line}: jump {idx} out of range")))?;
        let xs = &mut jump.measure.as_mut().unwrap()[reg];
        if xs.last().is_some_and(|&last| x < last) {
            return Err(bad(
                FILE,
                format!("line {line}: positions of a jump must be sorted"),
            ));
        }
        xs.push(x);
    }
    Ok(())
}

/// `(region, particle_id, default_time)` rows of `defaults.csv`.
pub fn parse_defaults(text: &str) -> Result<Vec<(String, usize, f64)>, OutputError> {
    const FILE: &str = "defaults.csv";
    let mut r = reader(text);
    if header(FILE, &mut r)? != ["region", "particle_id", "default_time"] {
        return Err(bad(
            FILE,
            "header must be `region,particle_id,default_time`",
        ));
    }
    records(FILE, &mut r, 3)?
        .into_iter()
        .map(|(line, row)| {
            Ok((
                row[0].clone(),
                count(FILE, line, "particle_id", &row[1])?,
                float(FILE, line, "default_time", &row[2])?,
            ))
        })
        .collect()
}

/// A stored run read back from its directory.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub drift: DriftPath,
}

fn read(path: &Path) -> Result<String, OutputError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Loads the manifest, drift and jump registry of a run directory. Jump
/// measures are attached when the file exists.
pub fn load_run(dir: &Path) -> Result<StoredRun, OutputError> {
    let manifest = parse_manifest(&read(&dir.join("manifest.json"))?)?;
    let (regions, mut drift) = parse_lambda(&read(&dir.join("lambda.csv"))?)?;
    let (jump_regions, mut jumps) = parse_jumps(&read(&dir.join("jumps.csv"))?)?;
    let expected: Vec<String> = manifest
        .config
        .regions
        .iter()
        .map(|r| r.name.clone())
        .collect();
    if regions != expected || jump_regions != expected {
        return Err(bad(
            "lambda.csv",
            "region columns do not match the manifest",
        ));
    }
    let measures = dir.join("jump_measures.csv");
    if measures.exists() {
        attach_jump_measures(&read(&measures)?, &regions, &mut jumps)?;
    }
    drift.jumps = jumps;
    Ok(StoredRun {
        dir: dir.to_path_buf(),
        manifest,
        drift,
    })
}

/// Recomputes the digests listed in a manifest; returns the mismatching files.
pub fn verify_digests(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>, OutputError> {
    let mut bad_files = Vec::new();
    for f in &manifest.files {
        let path = dir.join(&f.name);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != f.sha256 {
            bad_files.push(f.name.clone());
        }
    }
    Ok(bad_files)
}
