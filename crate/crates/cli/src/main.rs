//! `quickllt`: exact laws, simulations, density estimates and numerical
//! checks for the QuickSort comparison count.
//!
//! Exit codes: 0 pass, 1 a check failed, 2 usage or configuration error.

mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use quickllt::constants::Constants;
use quickllt::density::{
    estimate_density_fixed_point, estimate_density_mc, kolmogorov_distance, llt_deviation,
    DensityEstimate, Grid, DEFAULT_BANDWIDTH, DEFAULT_GRID,
};
use quickllt::execution_tree::{
    ensemble_seeds, run_ensemble, sample_binomial_decomposition, sample_decomposition,
    sample_truncated_decomposition, write_ensemble_csv, EnsembleRow, TruncatedParams,
    TruncationTable,
};
use quickllt::quicksort::{brute_force_pmf, exact_pmf, mean_recurrence, QnTable, BRUTE_FORCE_MAX};
use quickllt::smoothing::{schedule, soft_schedule, write_schedule_csv, write_soft_schedule_csv};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "quickllt",
    version,
    about = "QuickSort comparison-count laws and local limit diagnostics"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Fitted-constants JSON; the checked-in file when omitted.
    #[arg(long, global = true)]
    constants: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact law of Q_n.
    Exact {
        #[arg(long)]
        n: usize,
        /// Also compare with the brute-force permutation oracle.
        #[arg(long)]
        oracle: bool,
    },
    /// Ensemble of decomposition samples.
    Simulate {
        #[arg(long, value_enum, default_value_t = Kind::Plain)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        r: usize,
        /// Number of runs.
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Size-3 fraction for the binomial kind.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Estimate of the limiting density.
    Density {
        #[arg(long, value_enum, default_value_t = Method::FixedPoint)]
        method: Method,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_BANDWIDTH)]
        bandwidth: f64,
        #[arg(long, default_value_t = 30)]
        iterations: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Checks a bound or identity and reports measured against bound.
    Verify(verify::VerifyArgs),
    /// Sup deviation of n P(Q_n = x) from the density over a list of n.
    Llt {
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256])]
        n_list: Vec<usize>,
        /// `fixed-point`, `mc` or a path to an `x,density` CSV.
        #[arg(long, default_value = "fixed-point")]
        density: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Also report the round parameters for each n.
        #[arg(long)]
        schedule: bool,
    },
    /// Multi-round parameter schedule.
    Schedule {
        #[arg(long)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        c_start: f64,
        #[arg(long)]
        c_hat: Option<f64>,
        /// Use the soft schedule starting at this omega.
        #[arg(long)]
        omega0: Option<f64>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Plain,
    Truncated,
    Binomial,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Mc,
    FixedPoint,
}

#[derive(Args, Debug, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = DEFAULT_GRID.lo)]
    grid_lo: f64,
    #[arg(long, default_value_t = DEFAULT_GRID.hi())]
    grid_hi: f64,
    #[arg(long, default_value_t = DEFAULT_GRID.step)]
    grid_step: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.grid_lo, self.grid_hi, self.grid_step)?)
    }
}

/// Exit status of a successful invocation.
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

pub fn require_seed(seed: Option<u64>, command: &str) -> Result<u64> {
    seed.with_context(|| format!("{command} is statistical and needs an explicit --seed"))
}

pub fn load_constants(g: &Global) -> Result<Constants> {
    match &g.constants {
        Some(p) => Constants::from_path(p)
            .with_context(|| format!("loading constants from {}", p.display())),
        None => Ok(Constants::pinned()),
    }
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(g: &Global, value: &T) -> Result<()> {
    let mut out = open_output(g.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn cmd_exact(g: &Global, n: usize, oracle: bool) -> Result<Status> {
    let pmf = exact_pmf(n)?;
    let q_n = mean_recurrence(n)[n];
    let mut oracle_diff = None;
    if oracle {
        if n > BRUTE_FORCE_MAX {
            bail!("--oracle needs n <= {BRUTE_FORCE_MAX}");
        }
        oracle_diff = Some(pmf.max_abs_diff(&brute_force_pmf(n)?));
    }
    let pass = oracle_diff.is_none_or(|d| d <= 1e-12);
    let summary = json!({
        "n": n,
        "q_n": q_n,
        "mean": pmf.mean(),
        "variance": pmf.variance(),
        "min_support": pmf.min_support(),
        "max_support": pmf.max_support(),
        "oracle_max_diff": oracle_diff,
    });
    match g.format {
        Format::Csv => {
            let mut out = open_output(g.output.as_deref())?;
            pmf.write_csv(&mut out)?;
            out.flush()?;
            eprintln!("{summary}");
        }
        Format::Json => {
            let points: Vec<[f64; 2]> = pmf.iter().map(|(x, p)| [x as f64, p]).collect();
            write_json(
                g,
                &json!({ "schema_version": SCHEMA_VERSION, "summary": summary, "pmf": points }),
            )?;
        }
    }
    Ok(Status::from_pass(pass))
}

fn cmd_simulate(
    g: &Global,
    kind: Kind,
    n: usize,
    r: usize,
    seeds: usize,
    seed: Option<u64>,
    c: Option<f64>,
) -> Result<Status> {
    let seed = require_seed(seed, "simulate")?;
    let consts = load_constants(g)?;
    let seed_list = ensemble_seeds(seed, seeds);
    let rows: Vec<EnsembleRow> = match kind {
        Kind::Plain => run_ensemble(&seed_list, |s| {
            Ok(EnsembleRow::from_sample(
                s,
                r,
                &sample_decomposition(n, r, s)?,
            ))
        })?,
        Kind::Truncated => {
            let table = QnTable::build(r)?;
            let trunc = TruncationTable::new(&table, r)?;
            let params = TruncatedParams::new(n, r, consts.c1);
            run_ensemble(&seed_list, |s| {
                Ok(EnsembleRow::from_sample(
                    s,
                    r,
                    &sample_truncated_decomposition(&params, &trunc, s)?,
                ))
            })?
        }
        Kind::Binomial => {
            let c = c.unwrap_or(consts.binomial_c);
            run_ensemble(&seed_list, |s| {
                Ok(EnsembleRow::from_sample(
                    s,
                    3,
                    &sample_binomial_decomposition(n, c, s)?,
                ))
            })?
        }
    };
    match g.format {
        Format::Csv => {
            let mut out = open_output(g.output.as_deref())?;
            write_ensemble_csv(&rows, &mut out)?;
            out.flush()?;
        }
        Format::Json => write_json(
            g,
            &json!({ "schema_version": SCHEMA_VERSION, "rows": rows }),
        )?,
    }
    Ok(Status::Pass)
}

fn density_from_source(
    source: &str,
    seed: Option<u64>,
    samples: usize,
    consts: &Constants,
) -> Result<DensityEstimate> {
    Ok(match source {
        "fixed-point" => {
            estimate_density_fixed_point(DEFAULT_GRID, consts.density.fixed_point_iterations, 0)?
        }
        "mc" => estimate_density_mc(
            10_000,
            samples,
            DEFAULT_BANDWIDTH,
            DEFAULT_GRID,
            require_seed(seed, "llt --density mc")?,
        )?,
        path => {
            let f = File::open(path).with_context(|| format!("opening density file {path}"))?;
            let d = DensityEstimate::read_csv(f)?;
            d.validate()?;
            d
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_density(
    g: &Global,
    method: Method,
    n: usize,
    samples: usize,
    bandwidth: f64,
    iterations: usize,
    seed: Option<u64>,
    grid: GridArgs,
) -> Result<Status> {
    let seed = require_seed(seed, "density")?;
    let grid = grid.grid()?;
    let d = match method {
        Method::Mc => estimate_density_mc(n, samples, bandwidth, grid, seed)?,
        Method::FixedPoint => estimate_density_fixed_point(grid, iterations, seed)?,
    };
    match g.format {
        Format::Csv => {
            let mut out = open_output(g.output.as_deref())?;
            d.write_csv(&mut out)?;
            out.flush()?;
            let sidecar = d.sidecar_json()?;
            match &g.output {
                Some(p) => std::fs::write(p.with_extension("json"), sidecar + "\n")?,
                None => eprintln!("{sidecar}"),
            }
        }
        Format::Json => {
            let meta: serde_json::Value = serde_json::from_str(&d.sidecar_json()?)?;
            let xs: Vec<f64> = d.grid.points().collect();
            write_json(
                g,
                &json!({ "schema_version": SCHEMA_VERSION, "sidecar": meta, "x": xs, "density": d.values }),
            )?;
        }
    }
    Ok(Status::Pass)
}

/// Smallest n included in the monotonicity verdict.
const LLT_MIN_N: usize = 64;

#[derive(Serialize)]
struct LltRow {
    n: usize,
    sup_deviation: f64,
    kolmogorov: f64,
}

fn cmd_llt(
    g: &Global,
    n_list: &[usize],
    source: &str,
    seed: Option<u64>,
    samples: usize,
    with_schedule: bool,
) -> Result<Status> {
    if n_list.is_empty() {
        bail!("--n-list is empty");
    }
    let consts = load_constants(g)?;
    let d = density_from_source(source, seed, samples, &consts)?;
    let table = QnTable::build(*n_list.iter().max().unwrap())?;
    let mut rows = Vec::new();
    for &n in n_list {
        let pmf = table.pmf(n)?;
        let q = table.mean(n);
        rows.push(LltRow {
            n,
            sup_deviation: llt_deviation(pmf, q, n, &d)?,
            kolmogorov: kolmogorov_distance(pmf, q, n, &d),
        });
    }
    let slack = consts.regression.slack;
    let counted: Vec<&LltRow> = rows.iter().filter(|r| r.n >= LLT_MIN_N).collect();
    let mut sorted = counted.clone();
    sorted.sort_by_key(|r| r.n);
    let non_increasing = sorted
        .windows(2)
        .all(|w| w[1].sup_deviation <= w[0].sup_deviation * (1.0 + slack));
    match g.format {
        Format::Csv => {
            let mut out = open_output(g.output.as_deref())?;
            let mut w = csv::Writer::from_writer(&mut out);
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            drop(w);
            out.flush()?;
            eprintln!("non_increasing (n >= {LLT_MIN_N}, slack {slack}): {non_increasing}");
        }
        Format::Json => {
            let schedules: Option<Vec<_>> = with_schedule.then(|| {
                n_list
                    .iter()
                    .map(|&n| schedule(n as f64, 1.0, consts.c_hat).ok())
                    .collect()
            });
            write_json(
                g,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "density": source,
                    "rows": rows,
                    "min_n_checked": LLT_MIN_N,
                    "slack": slack,
                    "non_increasing": non_increasing,
                    "schedules": schedules,
                }),
            )?;
        }
    }
    if with_schedule && g.format == Format::Csv {
        for &n in n_list {
            if let Ok(s) = schedule(n as f64, 1.0, consts.c_hat) {
                eprintln!("schedule n = {n}: {}", serde_json::to_string(&s)?);
            }
        }
    }
    Ok(Status::from_pass(non_increasing))
}

fn cmd_schedule(
    g: &Global,
    n: f64,
    c_start: f64,
    c_hat: Option<f64>,
    omega0: Option<f64>,
) -> Result<Status> {
    let consts = load_constants(g)?;
    let mut out = open_output(g.output.as_deref())?;
    match omega0 {
        Some(w) => {
            let rounds = soft_schedule(n, w)?;
            match g.format {
                Format::Csv => write_soft_schedule_csv(&rounds, &mut out)?,
                Format::Json => {
                    serde_json::to_writer_pretty(
                        &mut out,
                        &json!({ "schema_version": SCHEMA_VERSION, "n": n, "omega0": w, "rounds": rounds }),
                    )?;
                    writeln!(out)?;
                }
            }
        }
        None => {
            let params = schedule(n, c_start, c_hat.unwrap_or(consts.c_hat))?;
            match g.format {
                Format::Csv => write_schedule_csv(&params, &mut out)?,
                Format::Json => {
                    serde_json::to_writer_pretty(
                        &mut out,
                        &json!({ "schema_version": SCHEMA_VERSION, "schedule": params }),
                    )?;
                    writeln!(out)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(Status::Pass)
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Exact { n, oracle } => cmd_exact(g, n, oracle),
        Command::Simulate {
            kind,
            n,
            r,
            seeds,
            seed,
            c,
        } => cmd_simulate(g, kind, n, r, seeds, seed, c),
        Command::Density {
            method,
            n,
            samples,
            bandwidth,
            iterations,
            seed,
            grid,
        } => cmd_density(g, method, n, samples, bandwidth, iterations, seed, grid),
        Command::Verify(args) => verify::cmd_verify(g, &args),
        Command::Llt {
            n_list,
            density,
            seed,
            samples,
            schedule,
        } => cmd_llt(g, &n_list, &density, seed, samples, schedule),
        Command::Schedule {
            n,
            c_start,
            c_hat,
            omega0,
        } => cmd_schedule(g, n, c_start, c_hat, omega0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Pass) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
