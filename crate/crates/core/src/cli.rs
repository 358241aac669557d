//! Command-line front end: single runs, convergence tables and plot data.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::locator::{
    convergence_study, level_steps, locate, ErrorMetric, EventResult, LocateOptions, Rate,
    StudyOptions,
};
use crate::method::{DEFAULT_FP_MAX_ITER, DEFAULT_FP_TOL};
use crate::poisson::PoissonSystem;
use crate::problems::{builtin, EventProblem};
use crate::surface::{self, SurfaceBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Successive,
    Reference,
}

impl From<MetricArg> for ErrorMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Successive => ErrorMetric::Successive,
            MetricArg::Reference => ErrorMetric::Reference,
        }
    }
}

/// Direct one-sided event location with EPHBVM(k, s) methods.
#[derive(Debug, Parser)]
#[command(name = "ephbvm", version)]
pub struct RunConfig {
    /// Registry problem: example1, example2 or example3.
    #[arg(long)]
    pub problem: Option<String>,

    /// Basis sizes, comma separated.
    #[arg(long = "s", value_delimiter = ',', default_value = "1")]
    pub s: Vec<usize>,

    /// Gauss node counts (one value, or one per s; defaults to k = s).
    #[arg(long = "k", value_delimiter = ',')]
    pub k: Vec<usize>,

    /// Number of uniform steps on [0, H̄] (default 10, or 1000 for example3).
    #[arg(long, conflicts_with = "level")]
    pub steps: Option<usize>,

    /// Study level n, i.e. 10·2ⁿ steps.
    #[arg(long)]
    pub level: Option<usize>,

    /// Number of levels (n = 0..levels-1) in a convergence table.
    #[arg(long, default_value_t = 6)]
    pub levels: usize,

    #[arg(long, default_value_t = DEFAULT_FP_TOL)]
    pub fp_tol: f64,

    #[arg(long, default_value_t = DEFAULT_FP_MAX_ITER)]
    pub fp_max_iter: usize,

    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    pub format: OutputFormat,

    /// Write results here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Convergence table on h_n = H̄ / (10·2ⁿ) for every requested s.
    #[arg(long, conflicts_with_all = ["table2", "example3"])]
    pub table1: bool,

    /// Residuals of EPHBVM(s, s) and EPHBVM(4, s) with h = H̄ / 10.
    #[arg(long, conflicts_with = "example3")]
    pub table2: bool,

    /// EPHBVM(11, 3) against EPHBVM(3, 3) on example3 with h = H̄ / 1000.
    #[arg(long)]
    pub example3: bool,

    /// Error estimate used by --table1.
    #[arg(long, value_enum, default_value_t = MetricArg::Successive)]
    pub metric: MetricArg,

    /// Write step endpoints (t, ω, x, g, H) as CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "trajectory.csv")]
    pub dump_trajectory: Option<PathBuf>,

    /// Also write stage values next to the trajectory (`<file>.stages.csv`).
    #[arg(long, requires = "dump_trajectory")]
    pub dense: bool,

    /// Write samples of the event set of a 3-dimensional problem as CSV.
    /// No integration runs unless --steps, --level or --table1 is also given.
    #[arg(long)]
    pub surface: Option<PathBuf>,

    /// Sampling box for --surface, as lo,hi on every axis.
    #[arg(long, value_delimiter = ',', default_values_t = [-4.0, 4.0], allow_hyphen_values = true)]
    pub bounds: Vec<f64>,

    /// Lattice points per axis for --surface.
    #[arg(long, default_value_t = 40)]
    pub resolution: usize,

    /// Add wall-clock seconds to each record.
    #[arg(long)]
    pub timing: bool,
}

/// One record per run; every acceptance quantity is recoverable from these.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub s: usize,
    pub k: usize,
    #[serde(rename = "N")]
    pub steps: usize,
    pub level: Option<usize>,
    pub g_residual: f64,
    pub error: Option<f64>,
    pub rate: Rate,
    pub alpha_max: f64,
    pub energy_residual_max: f64,
    pub omega_residual_max: f64,
    pub iterations_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl RunRecord {
    fn from_result(problem: &str, s: usize, k: usize, r: &EventResult) -> Self {
        Self {
            problem: problem.to_string(),
            s,
            k,
            steps: r.steps,
            level: None,
            g_residual: r.g_residual,
            error: None,
            rate: Rate::Missing,
            alpha_max: r.alpha_max(),
            energy_residual_max: r.energy_residual_max(),
            omega_residual_max: r.omega_residual_max(),
            iterations_max: r.iterations_max(),
            wall_time: None,
        }
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "problem",
    "s",
    "k",
    "N",
    "level",
    "g_residual",
    "error",
    "rate",
    "alpha_max",
    "energy_residual_max",
    "omega_residual_max",
    "iterations_max",
    "wall_time",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_records(
    records: &[RunRecord],
    format: OutputFormat,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    match format {
        OutputFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut *out, r)?;
                writeln!(out)?;
            }
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(CSV_HEADER)?;
            for r in records {
                let rate = match r.rate {
                    Rate::Missing => String::new(),
                    other => other.to_string(),
                };
                w.write_record([
                    r.problem.clone(),
                    r.s.to_string(),
                    r.k.to_string(),
                    r.steps.to_string(),
                    opt(r.level),
                    format!("{:e}", r.g_residual),
                    opt(r.error.map(|e| format!("{e:e}"))),
                    rate,
                    format!("{:e}", r.alpha_max),
                    format!("{:e}", r.energy_residual_max),
                    format!("{:e}", r.omega_residual_max),
                    r.iterations_max.to_string(),
                    opt(r.wall_time),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Table => {
            writeln!(
                out,
                "{:<10} {:>3} {:>3} {:>6} {:>12} {:>10} {:>5} {:>9} {:>9} {:>9} {:>5}",
                "problem",
                "s",
                "k",
                "N",
                "g(x*)",
                "error",
                "rate",
                "|alpha|",
                "|H|",
                "|dw|",
                "iter"
            )?;
            for r in records {
                writeln!(
                    out,
                    "{:<10} {:>3} {:>3} {:>6} {:>12.4e} {:>10} {:>5} {:>9.2e} {:>9.2e} {:>9.2e} {:>5}",
                    r.problem,
                    r.s,
                    r.k,
                    r.steps,
                    r.g_residual,
                    opt(r.error.map(|e| format!("{e:.2e}"))),
                    r.rate.to_string(),
                    r.alpha_max,
                    r.energy_residual_max,
                    r.omega_residual_max,
                    r.iterations_max
                )?;
            }
        }
    }
    Ok(())
}

/// Convergence table: one line per level, `g(x_n*)`, `e_n*` and rate for each s.
fn write_convergence_table(
    records: &[RunRecord],
    s_values: &[usize],
    levels: usize,
    out: &mut dyn Write,
) -> io::Result<()> {
    write!(out, "{:>3}", "n")?;
    for s in s_values {
        write!(out, " | {:^31}", format!("s = {s}"))?;
    }
    writeln!(out)?;
    write!(out, "{:>3}", "")?;
    for _ in s_values {
        write!(out, " | {:>10} {:>10} {:>9}", "g(x_n*)", "e_n*", "rate")?;
    }
    writeln!(out)?;
    for n in 0..levels {
        write!(out, "{n:>3}")?;
        for &s in s_values {
            match records.iter().find(|r| r.s == s && r.level == Some(n)) {
                Some(r) => write!(
                    out,
                    " | {:>10.2e} {:>10} {:>9}",
                    r.g_residual,
                    r.error
                        .map(|e| format!("{e:.2e}"))
                        .unwrap_or_else(|| "---".into()),
                    r.rate.to_string()
                )?,
                None => write!(out, " | {:>31}", "")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

fn write_trajectory(
    problem: &EventProblem,
    hbar: f64,
    result: &EventResult,
    path: &Path,
    dense: bool,
) -> anyhow::Result<()> {
    let sys = PoissonSystem::lift(problem.clone(), hbar);
    let n = problem.dim();
    let mut header = vec!["t".to_string(), "omega".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(["g".to_string(), "H".to_string()]);

    let row = |t: f64, st: &crate::poisson::AugmentedState| {
        let mut rec = vec![t, st.omega];
        rec.extend(st.x.iter().copied());
        rec.push(problem.event(&st.x));
        rec.push(sys.energy(&st.to_vector()));
        rec
    };

    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(&header)?;
    for p in &result.trajectory {
        w.serialize(row(p.t, &p.state))?;
    }
    w.flush()?;

    if dense {
        if let Some(stages) = &result.dense_stages {
            let mut stage_path = path.as_os_str().to_owned();
            stage_path.push(".stages.csv");
            let mut w = csv::Writer::from_path(&stage_path)?;
            w.write_record(&header)?;
            for step in stages {
                for st in step {
                    w.serialize(row(st.omega, st))?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn k_values(cfg: &RunConfig) -> anyhow::Result<Vec<usize>> {
    match cfg.k.len() {
        0 => Ok(cfg.s.clone()),
        1 => Ok(vec![cfg.k[0]; cfg.s.len()]),
        n if n == cfg.s.len() => Ok(cfg.k.clone()),
        n => bail!("--k has {n} values but --s has {}", cfg.s.len()),
    }
}

fn check_method(k: usize, s: usize) -> anyhow::Result<()> {
    if s == 0 || k < s {
        bail!("invalid method EPHBVM({k}, {s}): need k >= s >= 1");
    }
    Ok(())
}

fn timed<T>(on: bool, f: impl FnOnce() -> T) -> (T, Option<f64>) {
    let start = Instant::now();
    let v = f();
    (v, on.then(|| start.elapsed().as_secs_f64()))
}

/// Executes the requested study and writes its output.
pub fn run(cfg: &RunConfig) -> anyhow::Result<()> {
    let default_problem = if cfg.table2 {
        "example2"
    } else if cfg.example3 {
        "example3"
    } else {
        "example1"
    };
    let name = cfg.problem.as_deref().unwrap_or(default_problem);
    let problem = builtin(name)?;
    let hbar = problem.validate()?.hbar;
    let k_list = k_values(cfg)?;
    for (&k, &s) in k_list.iter().zip(&cfg.s) {
        check_method(k, s)?;
    }
    if cfg.fp_max_iter == 0 || !(cfg.fp_tol > 0.0) {
        bail!("--fp-tol and --fp-max-iter must be positive");
    }
    let with_fp = |lo: LocateOptions| LocateOptions {
        fp_tol: cfg.fp_tol,
        fp_max_iter: cfg.fp_max_iter,
        ..lo
    };

    let mut sink: Box<dyn Write> = match &cfg.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };

    if let Some(path) = &cfg.surface {
        let &[lo, hi] = cfg.bounds.as_slice() else {
            bail!("--bounds takes exactly two values, lo,hi");
        };
        if !(lo < hi) {
            bail!("--bounds needs lo < hi");
        }
        let samples =
            surface::emit_surface_samples(&problem, SurfaceBounds::cube(lo, hi), cfg.resolution)?;
        surface::write_csv(&samples, File::create(path)?)?;
        let run_requested = cfg.steps.is_some() || cfg.level.is_some() || cfg.table1;
        if !run_requested {
            return Ok(());
        }
    }

    let mut records = Vec::new();
    if cfg.table1 {
        if cfg.levels < 2 {
            bail!("--levels must be at least 2");
        }
        for (&k, &s) in k_list.iter().zip(&cfg.s) {
            let opts = StudyOptions {
                fp_tol: cfg.fp_tol,
                fp_max_iter: cfg.fp_max_iter,
                ..StudyOptions::new(k, s, cfg.levels - 1).metric(cfg.metric.into())
            };
            let (rows, wall) = timed(cfg.timing, || convergence_study(&problem, &opts));
            for row in rows? {
                let mut rec = RunRecord::from_result(name, s, k, &row.result);
                rec.level = Some(row.n);
                rec.error = row.error;
                rec.rate = row.rate;
                rec.wall_time = wall;
                records.push(rec);
            }
        }
        if cfg.format == OutputFormat::Table {
            write_convergence_table(&records, &cfg.s, cfg.levels, &mut sink)?;
            sink.flush()?;
            return Ok(());
        }
    } else if cfg.table2 {
        let steps = cfg.steps.unwrap_or(10);
        for &s in &cfg.s {
            for k in [s, 4.max(s)] {
                let (r, wall) = timed(cfg.timing, || {
                    locate(&problem, &with_fp(LocateOptions::new(k, s, steps)))
                });
                let mut rec = RunRecord::from_result(name, s, k, &r?);
                rec.wall_time = wall;
                records.push(rec);
            }
        }
    } else if cfg.example3 {
        let steps = cfg.steps.unwrap_or(1000);
        let (exact, w1) = timed(cfg.timing, || {
            locate(&problem, &with_fp(LocateOptions::new(11, 3, steps)))
        });
        let exact = exact?;
        let (gauss, w2) = timed(cfg.timing, || {
            locate(&problem, &with_fp(LocateOptions::new(3, 3, steps)))
        });
        let gauss = gauss?;
        let mut a = RunRecord::from_result(name, 3, 11, &exact);
        a.wall_time = w1;
        let mut b = RunRecord::from_result(name, 3, 3, &gauss);
        b.error = Some((&gauss.x_star - &exact.x_star).norm());
        b.wall_time = w2;
        records.extend([a, b]);
    } else {
        let steps = match (cfg.steps, cfg.level) {
            (Some(n), _) => n,
            (None, Some(l)) => level_steps(l),
            (None, None) if name == "example3" => 1000,
            (None, None) => 10,
        };
        if steps == 0 {
            bail!("--steps must be at least 1");
        }
        for (&k, &s) in k_list.iter().zip(&cfg.s) {
            let dense = cfg.dense && cfg.dump_trajectory.is_some();
            let (r, wall) = timed(cfg.timing, || {
                locate(
                    &problem,
                    &with_fp(LocateOptions::new(k, s, steps).dense(dense)),
                )
            });
            let r = r?;
            if let Some(path) = &cfg.dump_trajectory {
                let path = if cfg.s.len() > 1 {
                    path.with_extension(format!("s{s}.k{k}.csv"))
                } else {
                    path.clone()
                };
                write_trajectory(&problem, hbar, &r, &path, cfg.dense)?;
            }
            let mut rec = RunRecord::from_result(name, s, k, &r);
            rec.level = cfg.level;
            rec.wall_time = wall;
            records.push(rec);
        }
    }

    write_records(&records, cfg.format, &mut sink)?;
    sink.flush()?;
    Ok(())
}
