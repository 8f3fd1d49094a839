//! Monte Carlo sweeps, `(k, delta)` estimates, replica-family batches and
//! exact-oracle reports, with deterministic per-trial seeds.
//!
//! Trial seeds are the first eight bytes (little endian) of
//!
//! ```text
//! SHA-256("hyperset-lab/v1" || master_seed as u64 LE || cell || trial as u64 LE)
//! ```
//!
//! where `cell` is the canonical cell string (see [`Cell::canonical`]). The
//! instance uses that seed directly; arrival order and replica resampling
//! use `derive_seed(seed, 1)` and `derive_seed(seed, 2)`.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::exact::{exact_balanced, exact_uniform};
use crate::gamma::GammaVector;
use crate::greedy_balanced::run_greedy_balanced;
use crate::greedy_uniform::{run_greedy_uniform, GreedyResult};
use crate::ogp::{build_greedy_family, family_statistics, FamilyRecord, StoppingConfig};
use crate::online::{ArrivalPolicy, SCHEMA_HEADER};
use crate::sampling::{derive_seed, Model, ModelSpec};
use crate::thresholds::{
    log_expected_z_balanced_any_assignment, log_expected_z_uniform, thresholds_balanced, thresholds_uniform,
    ThresholdReport,
};

const SEED_DOMAIN: &[u8] = b"hyperset-lab/v1";
const ARRIVAL_STREAM: u64 = 1;
const RESAMPLE_STREAM: u64 = 2;
/// Default epsilon used to pick balanced targets when none is given.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const SWEEP_HEADER: [&str; 14] = [
    "model", "r", "p", "n", "gamma", "target", "trial", "seed", "size", "success", "alpha_stat", "alpha_comp",
    "ratio", "runtime_ms",
];

/// Seed for trial `trial` of `cell` under `master_seed`.
pub fn trial_seed(master_seed: u64, cell: &str, trial: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(SEED_DOMAIN);
    h.update(master_seed.to_le_bytes());
    h.update(cell.as_bytes());
    h.update(trial.to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn arrival_seed(seed: u64) -> u64 {
    derive_seed(seed, ARRIVAL_STREAM)
}

pub fn resample_seed(seed: u64) -> u64 {
    derive_seed(seed, RESAMPLE_STREAM)
}

/// Runs `f` on a pool of `jobs` threads (0 = rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| LabError::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Wilson score interval for `hits` successes out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One parameter combination of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub model: Model,
    pub r: u32,
    pub p: f64,
    pub n: u32,
    pub gamma: Option<GammaVector>,
    /// Balanced target (partite); for uniform cells, the `(1 - eps)` size
    /// bar when an epsilon was given.
    pub target: Option<u64>,
}

impl Cell {
    /// `model=..;r=..;p=..;n=..;gamma=..;target=..` with floats in shortest
    /// round-trip form and empty fields for absent values.
    pub fn canonical(&self) -> String {
        format!(
            "model={};r={};p={};n={};gamma={};target={}",
            self.model,
            self.r,
            self.p,
            self.n,
            self.gamma.as_ref().map(ToString::to_string).unwrap_or_default(),
            self.target.map(|t| t.to_string()).unwrap_or_default()
        )
    }

    pub fn spec(&self, seed: u64) -> Result<ModelSpec> {
        ModelSpec::new(self.model, self.n, self.r, self.p, seed)
    }

    pub fn thresholds(&self) -> Result<ThresholdReport> {
        match (&self.model, &self.gamma) {
            (Model::Uniform, _) => thresholds_uniform(u64::from(self.n), self.r, self.p),
            (Model::Partite, Some(g)) => thresholds_balanced(u64::from(self.n), self.r, self.p, g),
            (Model::Partite, None) => Err(LabError::InvalidConfig("partite cells need --gamma".into())),
        }
    }

    fn validate_gamma(&self) -> Result<()> {
        self.spec(0)?;
        match (self.model, &self.gamma) {
            (Model::Uniform, Some(_)) => Err(LabError::InvalidConfig("--gamma only applies to the partite model".into())),
            (Model::Partite, None) => Err(LabError::InvalidConfig("partite cells need --gamma".into())),
            (Model::Partite, Some(g)) if g.r() != self.r as usize => {
                Err(LabError::InvalidGamma(format!("gamma has {} entries but r = {}", g.r(), self.r)))
            }
            _ => Ok(()),
        }
    }

    /// Runs one greedy trial on this cell.
    pub fn run_trial(&self, seed: u64) -> Result<GreedyResult> {
        let spec = self.spec(seed)?;
        let policy = ArrivalPolicy::uniform_random(arrival_seed(seed));
        match self.model {
            Model::Uniform => run_greedy_uniform(&spec, &policy),
            Model::Partite => {
                let gamma = self.gamma.as_ref().ok_or(LabError::InvalidConfig("partite cells need --gamma".into()))?;
                let target = self.target.ok_or(LabError::InvalidConfig("partite cells need a target".into()))?;
                run_greedy_balanced(&spec, gamma, target, &policy)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        self.validate_gamma()?;
        if let (Model::Partite, Some(g)) = (self.model, &self.gamma) {
            let target = self.target.unwrap_or(0);
            if target == 0 {
                return Err(LabError::InvalidConfig(format!("infeasible target 0 for cell {}", self.canonical())));
            }
            let caps = g.part_sizes(target)?;
            if caps.iter().any(|&c| c > u64::from(self.n)) {
                return Err(LabError::InvalidConfig(format!(
                    "infeasible target {target}: a part would need more than n = {} vertices",
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Balanced target for `epsilon`: `(1 - eps) * alpha_comp` rounded down to a
/// multiple of the common denominator of `gamma`.
pub fn balanced_target(report: &ThresholdReport, gamma: &GammaVector, epsilon: f64) -> u64 {
    gamma.round_down((1.0 - epsilon) * report.alpha_comp + 1e-9)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub model: Model,
    pub r: u32,
    pub p_grid: Vec<f64>,
    pub n_grid: Vec<u32>,
    pub gamma: Option<GammaVector>,
    pub eps_grid: Vec<f64>,
    /// Explicit balanced target; overrides the epsilon grid.
    pub target: Option<u64>,
    pub trials: u64,
    pub master_seed: u64,
    pub jobs: usize,
    /// Record wall-clock time per trial. Off by default so that output is
    /// byte-identical across runs.
    pub timing: bool,
}

impl SweepConfig {
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.p_grid.is_empty() || self.n_grid.is_empty() {
            return Err(LabError::InvalidConfig("p and n grids must be non-empty".into()));
        }
        if self.trials == 0 {
            return Err(LabError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.eps_grid.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(LabError::InvalidConfig("epsilon values must lie in (0, 1)".into()));
        }
        if self.model == Model::Uniform && self.gamma.is_some() {
            return Err(LabError::InvalidConfig("--gamma only applies to the partite model".into()));
        }
        let mut cells = Vec::new();
        for &p in &self.p_grid {
            for &n in &self.n_grid {
                let base = Cell { model: self.model, r: self.r, p, n, gamma: self.gamma.clone(), target: None };
                let report = base.thresholds()?;
                let targets: Vec<Option<u64>> = match (self.model, self.target) {
                    (_, Some(t)) => vec![Some(t)],
                    (Model::Uniform, None) if self.eps_grid.is_empty() => vec![None],
                    (Model::Uniform, None) => self
                        .eps_grid
                        .iter()
                        .map(|e| Some(((1.0 - e) * report.alpha_comp + 1e-9).floor() as u64))
                        .collect(),
                    (Model::Partite, None) => {
                        let g = self.gamma.as_ref().ok_or(LabError::InvalidConfig("partite sweeps need --gamma".into()))?;
                        let eps: &[f64] = if self.eps_grid.is_empty() { &[DEFAULT_EPSILON] } else { &self.eps_grid };
                        eps.iter().map(|&e| Some(balanced_target(&report, g, e))).collect()
                    }
                };
                for target in targets {
                    let cell = Cell { target, ..base.clone() };
                    cell.validate()?;
                    if !cells.contains(&cell) {
                        cells.push(cell);
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub model: Model,
    pub r: u32,
    pub p: f64,
    pub n: u32,
    pub gamma: String,
    pub target: Option<u64>,
    pub trial: u64,
    pub seed: u64,
    pub size: usize,
    pub success: bool,
    pub alpha_stat: f64,
    pub alpha_comp: f64,
    pub ratio: f64,
    pub runtime_ms: u64,
}

/// Runs every trial of every cell. Rows come back sorted by (cell, trial)
/// whatever the thread count.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<TrialRecord>> {
    let cells = config.cells()?;
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| (0..config.trials).map(move |t| (c, t))).collect();
    let reports: Vec<ThresholdReport> = cells.iter().map(Cell::thresholds).collect::<Result<_>>()?;
    let rows: Vec<Result<(usize, TrialRecord)>> = with_jobs(config.jobs, || {
        jobs.par_iter()
            .map(|&(c, trial)| {
                let cell = &cells[c];
                let report = &reports[c];
                let seed = trial_seed(config.master_seed, &cell.canonical(), trial);
                let start = Instant::now();
                let res = cell.run_trial(seed)?;
                let runtime_ms = if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
                log::debug!("cell {} trial {trial}: size {}", cell.canonical(), res.size);
                Ok((
                    c,
                    TrialRecord {
                        model: cell.model,
                        r: cell.r,
                        p: cell.p,
                        n: cell.n,
                        gamma: cell.gamma.as_ref().map(ToString::to_string).unwrap_or_default(),
                        target: cell.target,
                        trial,
                        seed,
                        size: res.size,
                        success: res.success,
                        alpha_stat: report.alpha_stat,
                        alpha_comp: report.alpha_comp,
                        ratio: res.size as f64 / report.alpha_comp,
                        runtime_ms,
                    },
                ))
            })
            .collect()
    })?;
    let mut rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|(c, rec)| (*c, rec.trial));
    Ok(rows.into_iter().map(|(_, rec)| rec).collect())
}

/// Writes the schema line, the fixed header and one row per record.
pub fn write_sweep_csv<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    writeln!(out, "{SCHEMA_HEADER}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for rec in records {
        w.write_record([
            rec.model.to_string(),
            rec.r.to_string(),
            rec.p.to_string(),
            rec.n.to_string(),
            rec.gamma.clone(),
            rec.target.map(|t| t.to_string()).unwrap_or_default(),
            rec.trial.to_string(),
            rec.seed.to_string(),
            rec.size.to_string(),
            rec.success.to_string(),
            rec.alpha_stat.to_string(),
            rec.alpha_comp.to_string(),
            rec.ratio.to_string(),
            rec.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Median of `ratio` over the rows of each `(p, n, target)` cell, in row order.
pub fn median_ratios(records: &[TrialRecord]) -> Vec<(f64, u32, Option<u64>, f64)> {
    let mut out: Vec<(f64, u32, Option<u64>, Vec<f64>)> = Vec::new();
    for rec in records {
        match out.iter_mut().find(|(p, n, t, _)| *p == rec.p && *n == rec.n && *t == rec.target) {
            Some(entry) => entry.3.push(rec.ratio),
            None => out.push((rec.p, rec.n, rec.target, vec![rec.ratio])),
        }
    }
    out.into_iter().map(|(p, n, t, v)| (p, n, t, median(v))).collect()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KDeltaEstimate {
    pub cell: String,
    pub k: u64,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Empirical `P[|A(G)| >= k]` over `trials` runs; failed balanced runs
/// count as size zero.
pub fn run_kdelta(cell: &Cell, k: u64, trials: u64, master_seed: u64, jobs: usize) -> Result<KDeltaEstimate> {
    if k == 0 {
        return Err(LabError::InvalidConfig("k must be positive".into()));
    }
    if trials == 0 {
        return Err(LabError::InvalidConfig("trials must be at least 1".into()));
    }
    cell.validate()?;
    let canonical = cell.canonical();
    let hits: Vec<Result<bool>> = with_jobs(jobs, || {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let res = cell.run_trial(trial_seed(master_seed, &canonical, t))?;
                Ok(res.effective_size() as u64 >= k)
            })
            .collect()
    })?;
    let hits = hits.into_iter().collect::<Result<Vec<_>>>()?.into_iter().filter(|&h| h).count() as u64;
    let (lo, hi) = wilson_interval(hits, trials, Z_95);
    Ok(KDeltaEstimate {
        cell: canonical,
        k,
        trials,
        hits,
        estimate: hits as f64 / trials as f64,
        wilson_low: lo,
        wilson_high: hi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OgpConfig {
    pub cell: Cell,
    pub epsilon: f64,
    pub mu: Option<f64>,
    /// Replica count; defaults to `min(64, ceil(c / eps^2))`.
    pub m: Option<usize>,
    pub c: f64,
    pub reps: u64,
    pub master_seed: u64,
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OgpLine {
    pub rep: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub record: FamilyRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OgpSummary {
    pub families: u64,
    pub forbidden: u64,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub truncated: u64,
}

impl OgpConfig {
    pub fn stopping(&self) -> Result<StoppingConfig> {
        let c = &self.cell;
        match c.model {
            Model::Uniform => StoppingConfig::uniform(c.n, c.r, c.p, self.epsilon, self.mu),
            Model::Partite => {
                let g = c.gamma.as_ref().ok_or(LabError::InvalidConfig("partite families need --gamma".into()))?;
                StoppingConfig::partite(c.n, c.r, c.p, g, self.epsilon, self.mu)
            }
        }
    }

    pub fn replicas(&self) -> usize {
        self.m.unwrap_or_else(|| crate::ogp::default_replica_count(self.c, self.epsilon))
    }
}

/// Builds `reps` families and returns one record per family, by rep index.
pub fn run_ogp(config: &OgpConfig) -> Result<(Vec<OgpLine>, OgpSummary)> {
    if config.reps == 0 {
        return Err(LabError::InvalidConfig("repetitions must be at least 1".into()));
    }
    let stopping = config.stopping()?;
    let m = config.replicas();
    if m == 0 {
        return Err(LabError::InvalidConfig("replica count must be at least 1".into()));
    }
    config.cell.validate_gamma()?;
    let canonical = format!("ogp;{};eps={};m={}", config.cell.canonical(), config.epsilon, m);
    let lines: Vec<Result<OgpLine>> = with_jobs(config.jobs, || {
        (0..config.reps)
            .into_par_iter()
            .map(|rep| {
                let seed = trial_seed(config.master_seed, &canonical, rep);
                let spec = config.cell.spec(seed)?;
                let policy = ArrivalPolicy::uniform_random(arrival_seed(seed));
                let family = build_greedy_family(&spec, config.cell.target, &policy, &stopping, m, resample_seed(seed))?;
                Ok(OgpLine { rep, seed, record: family_statistics(&family, &stopping) })
            })
            .collect()
    })?;
    let lines = lines.into_iter().collect::<Result<Vec<_>>>()?;
    let forbidden = lines.iter().filter(|l| l.record.forbidden).count() as u64;
    let truncated = lines.iter().filter(|l| l.record.truncated).count() as u64;
    let (lo, hi) = wilson_interval(forbidden, config.reps, Z_95);
    let summary = OgpSummary {
        families: config.reps,
        forbidden,
        frequency: forbidden as f64 / config.reps as f64,
        wilson_low: lo,
        wilson_high: hi,
        truncated,
    };
    Ok((lines, summary))
}

pub fn write_ogp_jsonl<W: Write>(lines: &[OgpLine], mut out: W) -> Result<()> {
    writeln!(out, "{SCHEMA_HEADER}")?;
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub alpha: usize,
    /// Fraction of sampled instances with `Z_alpha > 0`.
    pub observed_prob: f64,
    pub mean_z: f64,
    pub std_error: f64,
    /// `exp` of the first-moment formula.
    pub predicted_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub cell: String,
    pub samples: u64,
    /// Threshold markers; absent for `p` in `{0, 1}`.
    pub alpha_stat: Option<f64>,
    pub lower_marker: Option<f64>,
    pub upper_marker: Option<f64>,
    pub independence_numbers: Vec<usize>,
    pub rows: Vec<OracleRow>,
}

/// Exact counts over `samples` seeded instances of a small cell.
pub fn run_oracle(cell: &Cell, epsilon: f64, samples: u64, master_seed: u64, jobs: usize) -> Result<OracleReport> {
    if samples == 0 {
        return Err(LabError::InvalidConfig("samples must be at least 1".into()));
    }
    cell.validate_gamma()?;
    let alpha_stat = cell.thresholds().ok().map(|t| t.alpha_stat);
    let canonical = format!("oracle;{}", cell.canonical());
    let reports: Vec<Result<crate::exact::ExactReport>> = with_jobs(jobs, || {
        (0..samples)
            .into_par_iter()
            .map(|t| {
                let spec = cell.spec(trial_seed(master_seed, &canonical, t))?;
                match (&cell.model, &cell.gamma) {
                    (Model::Uniform, _) => exact_uniform(&spec),
                    (Model::Partite, Some(g)) => exact_balanced(&spec, g),
                    (Model::Partite, None) => Err(LabError::InvalidConfig("partite oracle needs --gamma".into())),
                }
            })
            .collect()
    })?;
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let horizon = cell.spec(0)?.horizon() as usize;
    let k = samples as f64;
    let mut rows = Vec::new();
    for alpha in 0..=horizon {
        if let (Model::Partite, Some(g)) = (cell.model, &cell.gamma) {
            if g.part_sizes(alpha as u64).is_err() {
                continue;
            }
        }
        let zs: Vec<f64> = reports.iter().map(|r| r.counts_by_size[alpha] as f64).collect();
        let mean = zs.iter().sum::<f64>() / k;
        let var = if samples > 1 { zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
        let predicted = match (&cell.model, &cell.gamma) {
            (Model::Partite, Some(g)) => {
                log_expected_z_balanced_any_assignment(u64::from(cell.n), cell.p, g, alpha as u64)?.exp()
            }
            _ => log_expected_z_uniform(u64::from(cell.n), cell.r, cell.p, alpha as u64)?.exp(),
        };
        rows.push(OracleRow {
            alpha,
            observed_prob: zs.iter().filter(|&&z| z > 0.0).count() as f64 / k,
            mean_z: mean,
            std_error: (var / k).sqrt(),
            predicted_mean: predicted,
        });
    }
    Ok(OracleReport {
        cell: cell.canonical(),
        samples,
        alpha_stat,
        lower_marker: alpha_stat.map(|a| (1.0 - epsilon) * a),
        upper_marker: alpha_stat.map(|a| (1.0 + epsilon) * a),
        independence_numbers: reports.iter().map(|r| r.independence_number).collect(),
        rows,
    })
}

/// Threshold reports for every `(p, n)` in the grids.
pub fn thresholds_table(
    model: Model,
    r: u32,
    p_grid: &[f64],
    n_grid: &[u64],
    gamma: Option<&GammaVector>,
) -> Result<Vec<ThresholdReport>> {
    let mut out = Vec::new();
    for &p in p_grid {
        for &n in n_grid {
            out.push(match (model, gamma) {
                (Model::Uniform, _) => thresholds_uniform(n, r, p)?,
                (Model::Partite, Some(g)) => thresholds_balanced(n, r, p, g)?,
                (Model::Partite, None) => {
                    return Err(LabError::InvalidConfig("partite thresholds need --gamma".into()))
                }
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_cell(n: u32, p: f64) -> Cell {
        Cell { model: Model::Uniform, r: 2, p, n, gamma: None, target: None }
    }

    #[test]
    fn seeds_depend_on_every_input() {
        let a = trial_seed(1, "x", 0);
        assert_eq!(a, trial_seed(1, "x", 0));
        assert_ne!(a, trial_seed(2, "x", 0));
        assert_ne!(a, trial_seed(1, "y", 0));
        assert_ne!(a, trial_seed(1, "x", 1));
    }

    #[test]
    fn canonical_cells() {
        let g: GammaVector = "1/2,1/2".parse().unwrap();
        let c = Cell { model: Model::Partite, r: 2, p: 0.5, n: 64, gamma: Some(g), target: Some(8) };
        assert_eq!(c.canonical(), "model=partite;r=2;p=0.5;n=64;gamma=1/2,1/2;target=8");
        assert_eq!(uniform_cell(10, 0.25).canonical(), "model=uniform;r=2;p=0.25;n=10;gamma=;target=");
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(0, 10, Z_95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-3);
        let (lo, hi) = wilson_interval(10, 10, Z_95);
        assert!((lo - 0.7225).abs() < 1e-3);
        assert!((hi - 1.0).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    fn small_sweep(jobs: usize) -> SweepConfig {
        SweepConfig {
            model: Model::Uniform,
            r: 3,
            p_grid: vec![0.5, 0.3],
            n_grid: vec![256, 128],
            gamma: None,
            eps_grid: vec![],
            target: None,
            trials: 5,
            master_seed: 42,
            jobs,
            timing: false,
        }
    }

    #[test]
    fn sweep_is_sorted_and_thread_independent() {
        let a = run_sweep(&small_sweep(1)).unwrap();
        let b = run_sweep(&small_sweep(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert_eq!((a[0].p, a[0].n, a[0].trial), (0.5, 256, 0));
        assert_eq!((a[19].p, a[19].n, a[19].trial), (0.3, 128, 4));
        let mut out = Vec::new();
        write_sweep_csv(&a, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SCHEMA_HEADER));
        assert_eq!(lines.next(), Some(SWEEP_HEADER.join(",").as_str()));
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            let size: f64 = f[8].parse().unwrap();
            let alpha: f64 = f[11].parse().unwrap();
            let ratio: f64 = f[12].parse().unwrap();
            assert!((ratio - size / alpha).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_validation() {
        let mut c = small_sweep(1);
        c.trials = 0;
        assert!(run_sweep(&c).is_err());
        let mut c = small_sweep(1);
        c.n_grid.clear();
        assert!(run_sweep(&c).is_err());
        let g: GammaVector = "1/2,1/2".parse().unwrap();
        let c = SweepConfig {
            model: Model::Partite,
            r: 2,
            p_grid: vec![0.5],
            n_grid: vec![16],
            gamma: Some(g),
            eps_grid: vec![],
            target: Some(40),
            trials: 1,
            master_seed: 0,
            jobs: 1,
            timing: false,
        };
        assert!(matches!(run_sweep(&c), Err(LabError::InvalidConfig(_))));
    }

    #[test]
    fn kdelta_trivial_cases() {
        let est = run_kdelta(&uniform_cell(50, 0.0), 50, 10, 1, 1).unwrap();
        assert_eq!(est.estimate, 1.0);
        let c = Cell { r: 3, ..uniform_cell(50, 1.0) };
        let est = run_kdelta(&c, 3, 10, 1, 1).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(run_kdelta(&c, 0, 10, 1, 1).is_err());
    }

    #[test]
    fn ogp_runs_are_reproducible() {
        let cfg = OgpConfig {
            cell: uniform_cell(2048, 0.5),
            epsilon: 0.2,
            mu: None,
            m: Some(3),
            c: 1.0,
            reps: 4,
            master_seed: 5,
            jobs: 1,
        };
        let (a, sa) = run_ogp(&cfg).unwrap();
        let (b, sb) = run_ogp(&OgpConfig { jobs: 2, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        let mut buf = Vec::new();
        write_ogp_jsonl(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().contains("\"overlaps\""));
    }

    #[test]
    fn oracle_on_empty_instances() {
        let c = Cell { r: 3, ..uniform_cell(8, 0.0) };
        let rep = run_oracle(&c, 0.1, 3, 0, 1).unwrap();
        assert_eq!(rep.rows[8].observed_prob, 1.0);
        assert_eq!(rep.rows[3].mean_z, 56.0);
        assert!((rep.rows[3].predicted_mean - 56.0).abs() < 1e-9);
    }
}
