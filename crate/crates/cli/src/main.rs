//! `hyperset-lab`: threshold tables, greedy sweeps, (k, delta) estimates,
//! correlated-family batches and small-instance oracle reports.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use hyperset_core::harness::{
    self, balanced_target, run_kdelta, run_ogp, run_oracle, run_sweep, thresholds_table, trial_seed,
    write_ogp_jsonl, write_sweep_csv, Cell, OgpConfig, SweepConfig, DEFAULT_EPSILON,
};
use hyperset_core::online::SCHEMA_HEADER;
use hyperset_core::{
    greedy_balanced, greedy_uniform, ArrivalPolicy, GammaVector, LabError, Model,
};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "hyperset-lab", version, about = "Online independent sets in random hypergraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Statistical and computational thresholds over a (p, n) grid.
    Thresholds(Params),
    /// Monte Carlo greedy sweep, one CSV row per trial.
    Sweep(Params),
    /// Empirical P[size >= k] with a 95% Wilson interval.
    Kdelta(Params),
    /// Correlated-family batches, one JSON line per family.
    Ogp(Params),
    /// Exact independence numbers and first-moment comparison on small instances.
    Oracle(Params),
    /// A single greedy run with its transcript.
    Greedy(Params),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Uniform,
    Partite,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Uniform => Model::Uniform,
            ModelArg::Partite => Model::Partite,
        }
    }
}

#[derive(Args, Debug)]
struct Params {
    #[arg(long, value_enum, default_value = "uniform")]
    model: ModelArg,
    /// Edge size; defaults to the length of --gamma, else 2.
    #[arg(long)]
    r: Option<u32>,
    /// Comma-separated edge probabilities.
    #[arg(long, default_value = "0.5")]
    p: String,
    /// Comma-separated part sizes; `2^k` is accepted.
    #[arg(long, default_value = "1024")]
    n: String,
    /// Comma-separated fractions, e.g. `1/6,1/3,1/2`.
    #[arg(long)]
    gamma: Option<String>,
    /// Comma-separated epsilon values.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    target: Option<u64>,
    /// Trials per cell (families for `ogp`, instances for `oracle`).
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Replicas per family.
    #[arg(long)]
    m: Option<usize>,
    /// Constant in the default replica count `ceil(c / eps^2)`.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, default_value_t = 0)]
    master_seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    /// Fill runtime_ms in sweep rows. Makes output run-dependent.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_VALIDATION,
            CliError::Lab(e) if e.is_validation() => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn parse_u64(s: &str) -> CliResult<u64> {
    let s = s.trim();
    let bad = || CliError::Usage(format!("cannot parse {s:?} as a non-negative integer"));
    match s.split_once('^') {
        Some((base, exp)) => {
            let base: u64 = base.trim().parse().map_err(|_| bad())?;
            let exp: u32 = exp.trim().parse().map_err(|_| bad())?;
            base.checked_pow(exp).ok_or_else(bad)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn parse_f64_grid(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("cannot parse {x:?} in --{what}"))))
        .collect()
}

fn parse_n_grid(s: &str) -> CliResult<Vec<u64>> {
    s.split(',').map(parse_u64).collect()
}

fn n_u32(n: u64) -> CliResult<u32> {
    u32::try_from(n).map_err(|_| CliError::Usage(format!("n = {n} does not fit in 32 bits")))
}

fn single<T: Copy>(grid: &[T], what: &str) -> CliResult<T> {
    match grid {
        [x] => Ok(*x),
        _ => Err(CliError::Usage(format!("--{what} takes a single value for this command"))),
    }
}

impl Params {
    fn gamma(&self) -> CliResult<Option<GammaVector>> {
        Ok(self.gamma.as_deref().map(str::parse).transpose()?)
    }

    fn r(&self, gamma: Option<&GammaVector>) -> u32 {
        self.r.unwrap_or_else(|| gamma.map_or(2, |g| g.r() as u32))
    }

    fn eps_grid(&self) -> CliResult<Vec<f64>> {
        self.eps.as_deref().map_or(Ok(Vec::new()), |s| parse_f64_grid(s, "eps"))
    }

    fn eps(&self) -> CliResult<f64> {
        let grid = self.eps_grid()?;
        if grid.is_empty() {
            Ok(DEFAULT_EPSILON)
        } else {
            single(&grid, "eps")
        }
    }

    /// The single cell named by the flags. Partite cells without --target
    /// get the balanced target for --eps.
    fn cell(&self) -> CliResult<Cell> {
        let gamma = self.gamma()?;
        let model = Model::from(self.model);
        let r = self.r(gamma.as_ref());
        let p = single(&parse_f64_grid(&self.p, "p")?, "p")?;
        let n = n_u32(single(&parse_n_grid(&self.n)?, "n")?)?;
        let mut cell = Cell { model, r, p, n, gamma, target: self.target };
        if model == Model::Partite && cell.target.is_none() {
            if let Some(g) = &cell.gamma {
                cell.target = Some(balanced_target(&cell.thresholds()?, g, self.eps()?));
            }
        }
        Ok(cell)
    }
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_thresholds(a: &Params) -> CliResult<()> {
    let gamma = a.gamma()?;
    let model = Model::from(a.model);
    let rows = thresholds_table(model, a.r(gamma.as_ref()), &parse_f64_grid(&a.p, "p")?, &parse_n_grid(&a.n)?, gamma.as_ref())?;
    let mut out = output(&a.out)?;
    if a.json {
        for row in &rows {
            serde_json::to_writer(&mut out, row).map_err(LabError::from)?;
            writeln!(out)?;
        }
    } else {
        writeln!(out, "{:<8} {:>3} {:>8} {:>12} {:>12} {:>12} {:>8}", "model", "r", "p", "n", "alpha_stat", "alpha_comp", "gap")?;
        for t in &rows {
            writeln!(
                out,
                "{:<8} {:>3} {:>8} {:>12} {:>12.4} {:>12.4} {:>8.4}",
                t.model, t.r, t.p, t.n, t.alpha_stat, t.alpha_comp, t.gap
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep(a: &Params) -> CliResult<()> {
    let gamma = a.gamma()?;
    let n_grid = parse_n_grid(&a.n)?.into_iter().map(n_u32).collect::<CliResult<Vec<_>>>()?;
    let config = SweepConfig {
        model: a.model.into(),
        r: a.r(gamma.as_ref()),
        p_grid: parse_f64_grid(&a.p, "p")?,
        n_grid,
        gamma,
        eps_grid: a.eps_grid()?,
        target: a.target,
        trials: a.trials,
        master_seed: a.master_seed,
        jobs: a.jobs,
        timing: a.timing,
    };
    let records = run_sweep(&config)?;
    info!("sweep finished: {} rows", records.len());
    let mut out = output(&a.out)?;
    write_sweep_csv(&records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cmd_kdelta(a: &Params) -> CliResult<()> {
    let cell = a.cell()?;
    let k = a.k.ok_or_else(|| CliError::Usage("kdelta needs --k".into()))?;
    let est = run_kdelta(&cell, k, a.trials, a.master_seed, a.jobs)?;
    let mut out = output(&a.out)?;
    if a.json {
        serde_json::to_writer(&mut out, &est).map_err(LabError::from)?;
        writeln!(out)?;
    } else {
        writeln!(
            out,
            "{}  k={}  P[size>=k] = {:.4}  ({}/{})  95% CI [{:.4}, {:.4}]",
            est.cell, est.k, est.estimate, est.hits, est.trials, est.wilson_low, est.wilson_high
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_ogp(a: &Params) -> CliResult<()> {
    let mut cell = a.cell()?;
    if cell.model == Model::Uniform {
        cell.target = a.target;
    }
    let config = OgpConfig {
        cell,
        epsilon: a.eps()?,
        mu: a.mu,
        m: a.m,
        c: a.c,
        reps: a.trials,
        master_seed: a.master_seed,
        jobs: a.jobs,
    };
    let (lines, summary) = run_ogp(&config)?;
    let mut out = output(&a.out)?;
    write_ogp_jsonl(&lines, &mut out)?;
    out.flush()?;
    info!(
        "forbidden {}/{} = {:.4} (95% CI [{:.4}, {:.4}]), truncated {}",
        summary.forbidden, summary.families, summary.frequency, summary.wilson_low, summary.wilson_high, summary.truncated
    );
    Ok(())
}

fn cmd_oracle(a: &Params) -> CliResult<()> {
    let cell = a.cell()?;
    let report = run_oracle(&cell, a.eps()?, a.trials, a.master_seed, a.jobs)?;
    let mut out = output(&a.out)?;
    if a.json {
        serde_json::to_writer(&mut out, &report).map_err(LabError::from)?;
        writeln!(out)?;
    } else {
        writeln!(out, "{}  samples={}", report.cell, report.samples)?;
        if let (Some(s), Some(lo), Some(hi)) = (report.alpha_stat, report.lower_marker, report.upper_marker) {
            writeln!(out, "alpha_stat={s:.4}  markers [{lo:.4}, {hi:.4}]")?;
        }
        writeln!(out, "{:>5} {:>10} {:>14} {:>12} {:>14}", "alpha", "P[Z>0]", "mean Z", "SE", "predicted")?;
        for row in &report.rows {
            writeln!(
                out,
                "{:>5} {:>10.4} {:>14.4} {:>12.4} {:>14.4}",
                row.alpha, row.observed_prob, row.mean_z, row.std_error, row.predicted_mean
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_greedy(a: &Params) -> CliResult<()> {
    let cell = a.cell()?;
    let seed = trial_seed(a.master_seed, &cell.canonical(), 0);
    let spec = cell.spec(seed)?;
    let policy = ArrivalPolicy::uniform_random(harness::arrival_seed(seed));
    let (result, transcript) = match cell.model {
        Model::Uniform => greedy_uniform::run_greedy_uniform_traced(&spec, &policy)?,
        Model::Partite => {
            let gamma = cell.gamma.as_ref().ok_or_else(|| CliError::Usage("partite runs need --gamma".into()))?;
            let target = cell.target.ok_or_else(|| CliError::Usage("partite runs need --target".into()))?;
            greedy_balanced::run_greedy_balanced_traced(&spec, gamma, target, &policy)?
        }
    };
    info!("size {} success {} queries {}", result.size, result.success, result.queries);
    if !result.success {
        let report = greedy_balanced::failure_postmortem(&result)?;
        warn!("failure post-mortem: {}", serde_json::to_string(&report).map_err(LabError::from)?);
    }
    let mut out = output(&a.out)?;
    if a.json {
        writeln!(out, "{SCHEMA_HEADER}")?;
        serde_json::to_writer(&mut out, &result).map_err(LabError::from)?;
        writeln!(out)?;
    } else {
        transcript.write_jsonl(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Thresholds(a) => cmd_thresholds(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Kdelta(a) => cmd_kdelta(a),
        Command::Ogp(a) => cmd_ogp(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Greedy(a) => cmd_greedy(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYPERSET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
