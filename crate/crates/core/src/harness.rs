//! Multi-replica scans over (n, p) cells, with the analysis passes that read
//! them back: extinction-time slope fits, critical-p brackets, and the
//! density-gap table.
//!
//! Scans are deterministic end to end: every replica derives its seeds from
//! (master_seed, n, p index, replica), cells run in parallel, and rows are
//! sorted before writing, so a re-run from the emitted manifest reproduces
//! results.csv byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{self, InitSpec, ProcessParams};
use crate::error::{Error, Result};
use crate::gen::{sample_simple_regular, GraphConfig};
use crate::rng::child_seed;

const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed-derivation tags; distinct per purpose so streams never collide.
const TAG_GRAPH: u64 = 1;
const TAG_COINS: u64 = 2;
const TAG_INIT: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub r: u32,
    pub n_list: Vec<u32>,
    pub p_grid: Vec<f64>,
    pub replicas: u32,
    pub t_max: u64,
    /// Survival classification threshold on the final density. Runs are never
    /// cut short by it; it only labels rows after the fact.
    pub stop_below: f64,
    /// Fraction of the trajectory discarded before averaging the plateau.
    pub burn_in: f64,
    pub init: InitSpec,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Reuse one graph and one coin field per (n, replica) across the whole
    /// p grid, enabling monotone comparisons in p. Default is a fresh graph
    /// per cell replica.
    pub quenched: bool,
    pub theta: u32,
    pub max_attempts: u64,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::invalid("n_list is empty"));
        }
        for &n in &self.n_list {
            GraphConfig::new(n, self.r, 0).validate()?;
        }
        if self.p_grid.is_empty() {
            return Err(Error::invalid("p_grid is empty"));
        }
        for &p in &self.p_grid {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::invalid(format!("p = {p} outside [0, 1]")));
            }
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be at least 1"));
        }
        if self.t_max == 0 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.stop_below) {
            return Err(Error::invalid(format!(
                "stop_below = {} outside [0, 1)",
                self.stop_below
            )));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::invalid(format!(
                "burn_in = {} outside [0, 1)",
                self.burn_in
            )));
        }
        if self.theta == 0 {
            return Err(Error::invalid("theta must be at least 1"));
        }
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be at least 1"));
        }
        Ok(())
    }

    /// Canonical key=value body; the manifest embeds this verbatim, so a
    /// manifest is itself a runnable config.
    pub fn to_text(&self) -> String {
        let n_list = self
            .n_list
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let p_grid = self
            .p_grid
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "r={}\nn_list={}\np_grid={}\nreplicas={}\nt_max={}\nstop_below={}\nburn_in={}\n\
             init={}\ntheta={}\nquenched={}\nmax_attempts={}\nmaster_seed={}\nout_dir={}\n",
            self.r,
            n_list,
            p_grid,
            self.replicas,
            self.t_max,
            self.stop_below,
            self.burn_in,
            self.init,
            self.theta,
            self.quenched,
            self.max_attempts,
            self.master_seed,
            self.out_dir.display(),
        )
    }

    pub fn parse(text: &str) -> Result<ScanConfig> {
        let mut seen: BTreeMap<&str, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key=value", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim().to_string();
            if seen.insert(key_name(key)?, (idx + 1, value)).is_some() {
                return Err(Error::invalid(format!(
                    "config line {}: duplicate key {key}",
                    idx + 1
                )));
            }
        }
        let mut take = |key: &str| seen.remove(key).map(|(_, v)| v);
        let required = |key: &str, v: Option<String>| {
            v.ok_or_else(|| Error::invalid(format!("config is missing required key {key}")))
        };

        let cfg = ScanConfig {
            r: parse_field("r", &required("r", take("r"))?)?,
            n_list: parse_list("n_list", &required("n_list", take("n_list"))?)?,
            p_grid: parse_list("p_grid", &required("p_grid", take("p_grid"))?)?,
            replicas: parse_field("replicas", &required("replicas", take("replicas"))?)?,
            t_max: parse_field("t_max", &required("t_max", take("t_max"))?)?,
            stop_below: match take("stop_below") {
                Some(v) => parse_field("stop_below", &v)?,
                None => 0.05,
            },
            burn_in: match take("burn_in") {
                Some(v) => parse_field("burn_in", &v)?,
                None => 0.5,
            },
            init: match take("init") {
                Some(v) => v.parse()?,
                None => InitSpec::Full,
            },
            master_seed: parse_field("master_seed", &required("master_seed", take("master_seed"))?)?,
            out_dir: PathBuf::from(required("out_dir", take("out_dir"))?),
            quenched: match take("quenched") {
                Some(v) => parse_field("quenched", &v)?,
                None => false,
            },
            theta: match take("theta") {
                Some(v) => parse_field("theta", &v)?,
                None => 2,
            },
            max_attempts: match take("max_attempts") {
                Some(v) => parse_field("max_attempts", &v)?,
                None => 1_000_000,
            },
        };
        if let Some((key, (line, _))) = seen.into_iter().next() {
            return Err(Error::invalid(format!(
                "config line {line}: unknown key {key}"
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read_path(path: &Path) -> Result<ScanConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        ScanConfig::parse(&text)
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(self.to_text().as_bytes())
    }
}

fn key_name(key: &str) -> Result<&'static str> {
    const KEYS: [&str; 13] = [
        "r", "n_list", "p_grid", "replicas", "t_max", "stop_below", "burn_in", "init",
        "master_seed", "out_dir", "quenched", "theta", "max_attempts",
    ];
    KEYS.iter()
        .find(|&&k| k == key)
        .copied()
        .ok_or_else(|| Error::invalid(format!("unknown config key {key}")))
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::invalid(format!("config key {key}: {e} (got {value:?})")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse_field(key, v.trim())).collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Outcome of one replica. Exactly one of extinction_time/plateau_density is
/// set on an ok row: extinction time when the process died, plateau average
/// when it reached t_max.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub n: u32,
    pub p: f64,
    pub replica_id: u32,
    pub graph_seed: u64,
    /// "ok", or the sanitized failure message of a replica that errored or
    /// panicked. Failures never abort the scan.
    pub status: String,
    pub survived: bool,
    pub extinction_time: Option<u64>,
    /// First step with density below stop_below, extinct or not.
    pub first_below: Option<u64>,
    pub plateau_density: Option<f64>,
}

impl CellResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const RESULTS_HEADER: &str =
    "n,p,replica_id,graph_seed,status,survived,extinction_time,first_below,plateau_density";

pub fn results_to_csv(rows: &[CellResult]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        let opt_u64 = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_f64 = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.n,
            row.p,
            row.replica_id,
            row.graph_seed,
            row.status,
            row.survived as u8,
            opt_u64(row.extinction_time),
            opt_u64(row.first_below),
            opt_f64(row.plateau_density),
        );
    }
    out
}

pub fn read_results_csv(path: &Path) -> Result<Vec<CellResult>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading results {}", path.display()), e))?;
    let mut rows = Vec::new();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != RESULTS_HEADER {
                return Err(parse_err(1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(parse_err(idx + 1, format!("expected 9 fields, got {}", fields.len())));
        }
        let num = |i: usize, what: &str| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("{what}: {e}")))
        };
        let opt = |i: usize, what: &str| -> Result<Option<u64>> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                num(i, what).map(Some)
            }
        };
        rows.push(CellResult {
            n: num(0, "n")? as u32,
            p: fields[1]
                .parse()
                .map_err(|e| parse_err(idx + 1, format!("p: {e}")))?,
            replica_id: num(2, "replica_id")? as u32,
            graph_seed: num(3, "graph_seed")?,
            status: fields[4].to_string(),
            survived: fields[5] == "1",
            extinction_time: opt(6, "extinction_time")?,
            first_below: opt(7, "first_below")?,
            plateau_density: if fields[8].is_empty() {
                None
            } else {
                Some(
                    fields[8]
                        .parse()
                        .map_err(|e| parse_err(idx + 1, format!("plateau_density: {e}")))?,
                )
            },
        });
    }
    Ok(rows)
}

#[derive(Debug)]
pub struct ScanOutput {
    pub rows: Vec<CellResult>,
    pub results_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Runs every (n, p, replica) cell, writes results.csv and manifest.txt under
/// cfg.out_dir, and returns the sorted rows. Replica failures (errors or
/// panics) become rows with a failure status; the scan itself never aborts.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &n in &cfg.n_list {
        for (p_idx, &p) in cfg.p_grid.iter().enumerate() {
            for replica in 0..cfg.replicas {
                cells.push((n, p_idx, p, replica));
            }
        }
    }
    let mut rows: Vec<CellResult> = cells
        .into_par_iter()
        .map(|(n, p_idx, p, replica)| run_replica(cfg, n, p_idx, p, replica))
        .collect();
    rows.sort_by_key(|r| (r.n, r.p.to_bits(), r.replica_id));
    debug_assert_eq!(
        rows.len(),
        cfg.n_list.len() * cfg.p_grid.len() * cfg.replicas as usize
    );

    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(format!("creating {}", cfg.out_dir.display()), e))?;
    let results_path = cfg.out_dir.join("results.csv");
    let manifest_path = cfg.out_dir.join("manifest.txt");
    std::fs::write(&results_path, results_to_csv(&rows))
        .map_err(|e| Error::io(format!("writing {}", results_path.display()), e))?;
    let manifest = format!(
        "# scan manifest: re-runnable config; comments record the producing build\n\
         # code_version = {CODE_VERSION}\n\
         # config_hash = {:016x}\n{}",
        cfg.config_hash(),
        cfg.to_text()
    );
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Error::io(format!("writing {}", manifest_path.display()), e))?;
    Ok(ScanOutput {
        rows,
        results_path,
        manifest_path,
    })
}

fn run_replica(cfg: &ScanConfig, n: u32, p_idx: usize, p: f64, replica: u32) -> CellResult {
    // quenched mode shares the graph, coins, and start across the p grid
    let stream_idx = if cfg.quenched { 0 } else { p_idx as u64 };
    let tags = |tag: u64| [tag, n as u64, stream_idx, replica as u64];
    let graph_seed = child_seed(cfg.master_seed, &tags(TAG_GRAPH));
    let coin_seed = child_seed(cfg.master_seed, &tags(TAG_COINS));
    let init_seed = child_seed(cfg.master_seed, &tags(TAG_INIT));

    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<CellResult> {
        let mut gcfg = GraphConfig::new(n, cfg.r, graph_seed);
        gcfg.max_attempts = cfg.max_attempts;
        let sampled = sample_simple_regular(&gcfg)?;
        let init = cfg.init.build(n, init_seed)?;
        let params = ProcessParams {
            p,
            theta: cfg.theta,
            seed: coin_seed,
            t_max: cfg.t_max,
            stop_below: None,
        };
        let record = dynamics::run(&sampled.graph, &init, &params)?;
        let reached_t_max = record.extinction_time.is_none();
        let first_below = record
            .counts
            .iter()
            .position(|&c| (c as f64) < cfg.stop_below * n as f64)
            .map(|t| t as u64);
        let plateau_density = if reached_t_max {
            Some(dynamics::plateau_density(&record, cfg.burn_in)?.density)
        } else {
            None
        };
        Ok(CellResult {
            n,
            p,
            replica_id: replica,
            graph_seed,
            status: "ok".into(),
            survived: reached_t_max && record.final_density() > cfg.stop_below,
            extinction_time: record.extinction_time,
            first_below,
            plateau_density,
        })
    }));

    let failure = |msg: String| CellResult {
        n,
        p,
        replica_id: replica,
        graph_seed,
        status: sanitize(&msg),
        survived: false,
        extinction_time: None,
        first_below: None,
        plateau_density: None,
    };
    match outcome {
        Ok(Ok(row)) => row,
        Ok(Err(e)) => failure(format!("failed: {e}")),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(|s| s.as_str())
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("panic");
            failure(format!("panicked: {msg}"))
        }
    }
}

fn sanitize(msg: &str) -> String {
    msg.chars()
        .map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c })
        .collect()
}

/// Ordinary least squares of y on x. Returns (slope, intercept).
pub fn fit_line(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "line fit needs at least 2 distinct x values".into(),
        ));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

#[derive(Debug, Clone)]
pub struct SlopeFit {
    pub p: f64,
    /// (n, median extinction time) per qualifying size.
    pub points: Vec<(u32, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    /// Standard error of the slope; 0 when the fit is exact.
    pub slope_stderr: f64,
}

impl SlopeFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,median_extinction_time,fitted,residual\n");
        for (i, &(n, median)) in self.points.iter().enumerate() {
            let fitted = self.intercept + self.slope * (n as f64).ln();
            let _ = writeln!(out, "{n},{median},{fitted},{}", self.residuals[i]);
        }
        let _ = writeln!(
            out,
            "# slope={} intercept={} slope_stderr={}",
            self.slope, self.intercept, self.slope_stderr
        );
        out
    }
}

/// Fits median extinction time against ln n at one p. Requires at least three
/// sizes where at least 90% of ok replicas went extinct.
pub fn fit_extinction_slope(rows: &[CellResult], p: f64) -> Result<SlopeFit> {
    let mut by_n: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    let mut fractions: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.p == p && r.is_ok()) {
        let entry = fractions.entry(row.n).or_default();
        entry.1 += 1;
        if let Some(t) = row.extinction_time {
            entry.0 += 1;
            by_n.entry(row.n).or_default().push(t);
        }
    }
    let mut points = Vec::new();
    for (&n, &(extinct, total)) in &fractions {
        if extinct as f64 >= 0.9 * total as f64 && extinct > 0 {
            points.push((n, median_u64(by_n.get_mut(&n).unwrap())));
        }
    }
    if points.len() < 3 {
        let detail: Vec<String> = fractions
            .iter()
            .map(|(n, (e, t))| format!("n={n}: {e}/{t} extinct"))
            .collect();
        return Err(Error::InsufficientData(format!(
            "slope fit at p={p} needs >=3 sizes with >=90% extinction, have {} ({})",
            points.len(),
            detail.join("; ")
        )));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, m)| ((n as f64).ln(), m))
        .collect();
    let (slope, intercept) = fit_line(&xy)?;
    let residuals: Vec<f64> = xy.iter().map(|&(x, y)| y - (intercept + slope * x)).collect();
    let k = xy.len() as f64;
    let mean_x = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_stderr = if xy.len() > 2 {
        (sse / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        p,
        points,
        slope,
        intercept,
        residuals,
        slope_stderr,
    })
}

fn median_u64(values: &mut [u64]) -> f64 {
    values.sort_unstable();
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2] as f64
    } else {
        (values[k / 2 - 1] as f64 + values[k / 2] as f64) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcBracket {
    pub n: u32,
    /// Largest grid p with survival fraction <= 1/2 below the crossing.
    pub p_lo: Option<f64>,
    /// Smallest grid p with survival fraction > 1/2.
    pub p_hi: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct PcReport {
    pub brackets: Vec<PcBracket>,
    /// Non-monotone survival fractions (drops larger than 0.1) per n.
    pub warnings: Vec<String>,
}

impl PcReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,p_lo,p_hi,note\n");
        for b in &self.brackets {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", b.n, fmt(b.p_lo), fmt(b.p_hi), b.note);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "# warning: {w}");
        }
        out
    }
}

/// Brackets the survival-probability crossing of 1/2 on the p grid, per n.
pub fn estimate_pc(rows: &[CellResult]) -> Result<PcReport> {
    let mut cells: BTreeMap<(u32, u64), (usize, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        let entry = cells.entry((row.n, row.p.to_bits())).or_default();
        entry.1 += 1;
        entry.0 += row.survived as usize;
    }
    if cells.is_empty() {
        return Err(Error::InsufficientData("no ok rows to bracket".into()));
    }
    let mut by_n: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for (&(n, p_bits), &(survived, total)) in &cells {
        by_n
            .entry(n)
            .or_default()
            .push((f64::from_bits(p_bits), survived as f64 / total as f64));
    }
    let mut brackets = Vec::new();
    let mut warnings = Vec::new();
    for (n, fracs) in by_n {
        for pair in fracs.windows(2) {
            if pair[1].1 < pair[0].1 - 0.1 {
                warnings.push(format!(
                    "n={n}: survival fraction drops from {:.3} at p={} to {:.3} at p={}",
                    pair[0].1, pair[0].0, pair[1].1, pair[1].0
                ));
            }
        }
        let crossing = fracs.iter().position(|&(_, f)| f > 0.5);
        let bracket = match crossing {
            None => PcBracket {
                n,
                p_lo: Some(fracs.last().unwrap().0),
                p_hi: None,
                note: "unbounded above: no grid p reaches survival > 1/2".into(),
            },
            Some(0) => PcBracket {
                n,
                p_lo: None,
                p_hi: Some(fracs[0].0),
                note: "unbounded below: already surviving at the smallest grid p".into(),
            },
            Some(i) => PcBracket {
                n,
                p_lo: Some(fracs[i - 1].0),
                p_hi: Some(fracs[i].0),
                note: String::new(),
            },
        };
        brackets.push(bracket);
    }
    Ok(PcReport { brackets, warnings })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCell {
    pub n: u32,
    pub p: f64,
    pub total: usize,
    pub failed: usize,
    pub extinct: usize,
    pub reached_t_max: usize,
    pub survived: usize,
    pub min_surviving_plateau: Option<f64>,
    pub max_plateau: Option<f64>,
    /// Largest empty density band among {0} and all plateau values.
    pub gap_lo: Option<f64>,
    pub gap_hi: Option<f64>,
    /// Set when fewer than two replicas carry usable densities.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub cells: Vec<GapCell>,
}

impl GapReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,p,total,failed,extinct,reached_t_max,survived,min_surviving_plateau,max_plateau,gap_lo,gap_hi,degenerate\n",
        );
        for c in &self.cells {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.n,
                c.p,
                c.total,
                c.failed,
                c.extinct,
                c.reached_t_max,
                c.survived,
                fmt(c.min_surviving_plateau),
                fmt(c.max_plateau),
                fmt(c.gap_lo),
                fmt(c.gap_hi),
                c.degenerate as u8,
            );
        }
        out
    }
}

/// Describes the empty density band per (n, p): extinct replicas sit at
/// density 0, survivors at their plateau average, and the gap is the widest
/// space between consecutive observed densities.
pub fn gap_report(rows: &[CellResult]) -> GapReport {
    let mut cells: BTreeMap<(u32, u64), Vec<&CellResult>> = BTreeMap::new();
    for row in rows {
        cells.entry((row.n, row.p.to_bits())).or_default().push(row);
    }
    let mut out = Vec::new();
    for ((n, p_bits), group) in cells {
        let failed = group.iter().filter(|r| !r.is_ok()).count();
        let extinct = group
            .iter()
            .filter(|r| r.is_ok() && r.extinction_time.is_some())
            .count();
        let reached: Vec<&&CellResult> = group
            .iter()
            .filter(|r| r.is_ok() && r.extinction_time.is_none())
            .collect();
        let survived = group.iter().filter(|r| r.survived).count();
        let min_surviving_plateau = group
            .iter()
            .filter(|r| r.survived)
            .filter_map(|r| r.plateau_density)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        let max_plateau = reached
            .iter()
            .filter_map(|r| r.plateau_density)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));

        // observed densities: one 0 per extinct replica, plateau per finisher
        let mut densities: Vec<f64> = reached.iter().filter_map(|r| r.plateau_density).collect();
        if extinct > 0 {
            densities.push(0.0);
        }
        densities.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let usable = extinct + reached.len();
        let degenerate = usable < 2;
        let (gap_lo, gap_hi) = if degenerate || densities.len() < 2 {
            (None, None)
        } else {
            let mut best = (0.0f64, densities[0], densities[0]);
            for w in densities.windows(2) {
                if w[1] - w[0] > best.0 {
                    best = (w[1] - w[0], w[0], w[1]);
                }
            }
            if best.0 > 0.0 {
                (Some(best.1), Some(best.2))
            } else {
                (None, None)
            }
        };
        out.push(GapCell {
            n,
            p: f64::from_bits(p_bits),
            total: group.len(),
            failed,
            extinct,
            reached_t_max: reached.len(),
            survived,
            min_surviving_plateau,
            max_plateau,
            gap_lo,
            gap_hi,
            degenerate,
        });
    }
    GapReport { cells: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn base_config(out_dir: PathBuf) -> ScanConfig {
        ScanConfig {
            r: 4,
            n_list: vec![8, 10],
            p_grid: vec![0.0, 1.0],
            replicas: 3,
            t_max: 20,
            stop_below: 0.05,
            burn_in: 0.5,
            init: InitSpec::Full,
            master_seed: 7,
            out_dir,
            quenched: false,
            theta: 2,
            max_attempts: 1_000_000,
        }
    }

    #[test]
    fn config_text_round_trips_with_defaults() {
        let cfg = base_config(PathBuf::from("/tmp/scan-out"));
        assert_eq!(ScanConfig::parse(&cfg.to_text()).unwrap(), cfg);

        let minimal = "r=4\nn_list=8,10\np_grid=0.25,0.5\nreplicas=2\nt_max=5\n\
                       master_seed=1\nout_dir=/tmp/x\n";
        let parsed = ScanConfig::parse(minimal).unwrap();
        assert_eq!(parsed.stop_below, 0.05);
        assert_eq!(parsed.burn_in, 0.5);
        assert_eq!(parsed.init, InitSpec::Full);
        assert_eq!(parsed.theta, 2);
        assert!(!parsed.quenched);
        assert_eq!(parsed.max_attempts, 1_000_000);

        // comments and blank lines are ignored, so a manifest parses as-is
        let with_comments = format!("# heading\n\n{minimal}# trailing\n");
        assert_eq!(ScanConfig::parse(&with_comments).unwrap(), parsed);

        for bad in [
            "r=4\n",                                        // missing keys
            &format!("{minimal}bogus_key=1\n"),             // unknown key
            &format!("{minimal}r=5\n"),                     // duplicate
            &minimal.replace("r=4", "r=1"),                 // degree too small
            &minimal.replace("p_grid=0.25,0.5", "p_grid=1.5"),
            &minimal.replace("replicas=2", "replicas=0"),
            &minimal.replace("t_max=5", "t_max=abc"),
            &minimal.replace("n_list=8,10", "n_list=4"),    // n < r+1
        ] {
            assert!(ScanConfig::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn scan_handles_trivial_p_endpoints() {
        let dir = tempdir().unwrap();
        let cfg = base_config(dir.path().to_path_buf());
        let out = run_scan(&cfg).unwrap();
        assert_eq!(out.rows.len(), 12);
        assert!(out.results_path.exists());
        assert!(out.manifest_path.exists());

        for row in &out.rows {
            assert!(row.is_ok());
            if row.p == 0.0 {
                // full start dies in one step when nothing can reoccupy
                assert_eq!(row.extinction_time, Some(1));
                assert_eq!(row.first_below, Some(1));
                assert_eq!(row.plateau_density, None);
                assert!(!row.survived);
            } else {
                // p=1 from full start keeps every vertex occupied forever
                assert_eq!(row.extinction_time, None);
                assert_eq!(row.first_below, None);
                assert_eq!(row.plateau_density, Some(1.0));
                assert!(row.survived);
            }
        }
        // sorted by (n, p, replica)
        let keys: Vec<_> = out
            .rows
            .iter()
            .map(|r| (r.n, r.p.to_bits(), r.replica_id))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);

        // round trip through the CSV
        let back = read_results_csv(&out.results_path).unwrap();
        assert_eq!(back, out.rows);
    }

    #[test]
    fn rerun_from_manifest_is_byte_identical() {
        let dir1 = tempdir().unwrap();
        let dir2 = tempdir().unwrap();
        let mut cfg = base_config(dir1.path().to_path_buf());
        cfg.p_grid = vec![0.3, 0.9];
        cfg.init = InitSpec::Random(0.5);
        let out1 = run_scan(&cfg).unwrap();
        let bytes1 = std::fs::read(&out1.results_path).unwrap();

        let mut replay = ScanConfig::read_path(&out1.manifest_path).unwrap();
        assert_eq!(replay, cfg);
        replay.out_dir = dir2.path().to_path_buf();
        let out2 = run_scan(&replay).unwrap();
        let bytes2 = std::fs::read(&out2.results_path).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn replica_failures_become_rows_not_aborts() {
        let dir = tempdir().unwrap();
        let mut cfg = base_config(dir.path().to_path_buf());
        cfg.r = 3;
        cfg.n_list = vec![200];
        cfg.p_grid = vec![0.5];
        cfg.replicas = 30;
        cfg.t_max = 5;
        cfg.max_attempts = 1; // rejection sampling almost always needs more
        let out = run_scan(&cfg).unwrap();
        assert_eq!(out.rows.len(), 30);
        let failed: Vec<_> = out.rows.iter().filter(|r| !r.is_ok()).collect();
        assert!(!failed.is_empty());
        for row in failed {
            assert!(row.status.starts_with("failed:"), "{}", row.status);
            assert!(!row.status.contains(','));
            assert!(!row.survived);
            assert_eq!(row.extinction_time, None);
            assert_eq!(row.plateau_density, None);
        }
        // failure rows survive the CSV round trip too
        let back = read_results_csv(&out.results_path).unwrap();
        assert_eq!(back, out.rows);
    }

    #[test]
    fn quenched_mode_couples_survival_across_p() {
        let dir = tempdir().unwrap();
        let mut cfg = base_config(dir.path().to_path_buf());
        cfg.n_list = vec![60];
        cfg.p_grid = vec![0.5, 0.8];
        cfg.replicas = 20;
        cfg.t_max = 60;
        cfg.quenched = true;
        let out = run_scan(&cfg).unwrap();
        for replica in 0..20 {
            let at = |p: f64| {
                out.rows
                    .iter()
                    .find(|r| r.p == p && r.replica_id == replica)
                    .unwrap()
            };
            let low = at(0.5);
            let high = at(0.8);
            assert_eq!(low.graph_seed, high.graph_seed);
            if low.survived {
                assert!(high.survived, "replica {replica} broke monotonicity");
            }
            if let (Some(te_low), Some(te_high)) = (low.extinction_time, high.extinction_time) {
                assert!(te_low <= te_high);
            }
            if high.extinction_time.is_some() {
                assert!(low.extinction_time.is_some());
            }
        }

        // annealed mode draws distinct graphs across the grid instead
        cfg.quenched = false;
        cfg.out_dir = tempdir().unwrap().path().to_path_buf();
        let annealed = run_scan(&cfg).unwrap();
        let g0 = annealed.rows.iter().find(|r| r.p == 0.5).unwrap().graph_seed;
        let g1 = annealed.rows.iter().find(|r| r.p == 0.8).unwrap().graph_seed;
        assert_ne!(g0, g1);
    }

    #[test]
    fn line_fit_is_exact_on_synthetic_points() {
        let points: Vec<(f64, f64)> = [100.0f64, 200.0, 400.0, 800.0]
            .iter()
            .map(|&n| (n.ln(), 3.0 * n.ln() + 7.0))
            .collect();
        let (slope, intercept) = fit_line(&points).unwrap();
        assert!((slope - 3.0).abs() < 1e-9);
        assert!((intercept - 7.0).abs() < 1e-9);

        let flat: Vec<(f64, f64)> = (1..=4).map(|i| ((i as f64).ln(), 5.0)).collect();
        assert!(fit_line(&flat).unwrap().0.abs() < 1e-12);

        assert!(fit_line(&[(1.0, 2.0)]).is_err());
        assert!(fit_line(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    fn ok_row(
        n: u32,
        p: f64,
        replica_id: u32,
        extinction_time: Option<u64>,
        plateau_density: Option<f64>,
        survived: bool,
    ) -> CellResult {
        CellResult {
            n,
            p,
            replica_id,
            graph_seed: 0,
            status: "ok".into(),
            survived,
            extinction_time,
            first_below: None,
            plateau_density,
        }
    }

    #[test]
    fn extinction_slope_uses_qualifying_sizes_only() {
        let mut rows = Vec::new();
        // constant median extinction time 12 across three sizes: slope 0
        for &n in &[100u32, 200, 400] {
            for (i, t) in [10u64, 11, 12, 13, 14].iter().enumerate() {
                rows.push(ok_row(n, 0.2, i as u32, Some(*t), None, false));
            }
        }
        let fit = fit_extinction_slope(&rows, 0.2).unwrap();
        assert!(fit.slope.abs() < 1e-9);
        assert_eq!(fit.points.iter().map(|&(n, _)| n).collect::<Vec<_>>(), vec![100, 200, 400]);
        assert!(fit.points.iter().all(|&(_, m)| m == 12.0));

        // a size with <90% extinction is excluded, dropping below 3 sizes
        let mut rows2 = rows.clone();
        for r in rows2.iter_mut().filter(|r| r.n == 400) {
            if r.replica_id < 2 {
                r.extinction_time = None;
                r.plateau_density = Some(0.5);
                r.survived = true;
            }
        }
        let err = fit_extinction_slope(&rows2, 0.2).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
        assert!(err.to_string().contains("n=400"));

        // medians growing linearly in ln n recover the exact slope
        let mut rows3 = Vec::new();
        for (i, &n) in [100u32, 200, 400].iter().enumerate() {
            for rep in 0..5u32 {
                rows3.push(ok_row(n, 0.2, rep, Some(20 + 10 * i as u64), None, false));
            }
        }
        let fit3 = fit_extinction_slope(&rows3, 0.2).unwrap();
        assert!((fit3.slope - 10.0 / std::f64::consts::LN_2).abs() < 1e-9);
        assert!(fit3.slope_stderr.abs() < 1e-9);
        assert!(fit3.to_csv().contains("slope="));
    }

    #[test]
    fn pc_brackets_cross_at_half() {
        let mut rows = Vec::new();
        for (p, alive) in [(0.1, 0u32), (0.2, 0), (0.3, 10), (0.4, 10)] {
            for rep in 0..10u32 {
                let survived = rep < alive;
                rows.push(ok_row(
                    500,
                    p,
                    rep,
                    if survived { None } else { Some(3) },
                    if survived { Some(0.8) } else { None },
                    survived,
                ));
            }
        }
        let report = estimate_pc(&rows).unwrap();
        assert_eq!(report.brackets.len(), 1);
        let b = &report.brackets[0];
        assert_eq!((b.p_lo, b.p_hi), (Some(0.2), Some(0.3)));
        assert!(report.warnings.is_empty());

        // all dead: unbounded above
        let dead: Vec<_> = rows
            .iter()
            .cloned()
            .map(|mut r| {
                r.survived = false;
                r.extinction_time = Some(2);
                r.plateau_density = None;
                r
            })
            .collect();
        let report = estimate_pc(&dead).unwrap();
        assert_eq!(report.brackets[0].p_hi, None);
        assert!(report.brackets[0].note.contains("unbounded above"));

        // all alive: unbounded below
        let alive: Vec<_> = rows
            .iter()
            .cloned()
            .map(|mut r| {
                r.survived = true;
                r.extinction_time = None;
                r.plateau_density = Some(0.9);
                r
            })
            .collect();
        let report = estimate_pc(&alive).unwrap();
        assert_eq!(report.brackets[0].p_lo, None);
        assert!(report.brackets[0].note.contains("unbounded below"));

        // a survival drop bigger than 0.1 draws a warning
        let mut wobbly = rows.clone();
        for r in wobbly.iter_mut().filter(|r| r.p == 0.2) {
            r.survived = true;
            r.extinction_time = None;
            r.plateau_density = Some(0.7);
        }
        for r in wobbly.iter_mut().filter(|r| r.p == 0.3) {
            r.survived = false;
            r.extinction_time = Some(4);
            r.plateau_density = None;
        }
        let report = estimate_pc(&wobbly).unwrap();
        assert!(!report.warnings.is_empty());
        assert!(estimate_pc(&[]).is_err());
    }

    #[test]
    fn gap_report_finds_empty_density_bands() {
        let mut rows = Vec::new();
        for rep in 0..5u32 {
            rows.push(ok_row(1000, 0.7, rep, Some(9), None, false));
        }
        for (i, plateau) in [0.6, 0.7, 1.0].iter().enumerate() {
            rows.push(ok_row(1000, 0.7, 5 + i as u32, None, Some(*plateau), true));
        }
        let report = gap_report(&rows);
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert_eq!((cell.extinct, cell.survived), (5, 3));
        assert_eq!((cell.gap_lo, cell.gap_hi), (Some(0.0), Some(0.6)));
        assert_eq!(cell.min_surviving_plateau, Some(0.6));
        assert!(!cell.degenerate);

        // a limping finisher narrows the band
        let mut with_limp = rows.clone();
        with_limp.push(ok_row(1000, 0.7, 9, None, Some(0.03), false));
        let cell = &gap_report(&with_limp).cells[0];
        assert_eq!((cell.gap_lo, cell.gap_hi), (Some(0.03), Some(0.6)));
        assert_eq!(cell.min_surviving_plateau, Some(0.6));
        assert_eq!(cell.max_plateau, Some(1.0));

        // single replica: degenerate, no band
        let single = vec![ok_row(10, 0.5, 0, None, Some(0.9), true)];
        let cell = &gap_report(&single).cells[0];
        assert!(cell.degenerate);
        assert_eq!(cell.gap_lo, None);

        // all extinct: plenty of replicas but nothing to band
        let extinct: Vec<_> = (0..10u32)
            .map(|rep| ok_row(10, 0.1, rep, Some(2), None, false))
            .collect();
        let cell = &gap_report(&extinct).cells[0];
        assert!(!cell.degenerate);
        assert_eq!((cell.gap_lo, cell.gap_hi), (None, None));
        assert!(gap_report(&extinct).to_csv().contains("n,p,total"));
    }
}
