//! Command-line front end: scenario loading, the run pipeline and artifact
//! emission.
//!
//! Artifacts written by `run` into the output directory:
//!
//! | file            | content                                             |
//! |-----------------|-----------------------------------------------------|
//! | `matrices.json` | synthesized observer, filter and regulator matrices |
//! | `trace.csv`     | recorded signals, see [`trace_header`]              |
//! | `metrics.json`  | settling time and terminal norms                    |
//! | `plot.gp`       | four-panel gnuplot script over `trace.csv`          |

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::batch::gain_sweep;
use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, to_rows, Matrix};
use crate::scenario::load_scenario;
use crate::sim::{simulate, synthesize_scenario, Algorithm, Metrics, ScenarioConfig, Synthesis, Trace};

pub const SEED_ENV: &str = "DISTCOMP_SEED";

#[derive(Debug, Parser)]
#[command(name = "distcomp", version, about = "Adaptive compensation of multiharmonic disturbances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize and simulate a scenario.
    Run(RunArgs),
    /// Write a gnuplot script for an existing trace CSV.
    Plot {
        trace: PathBuf,
    },
    /// Run a scenario for several adaptation gains in parallel.
    Sweep {
        scenario: String,
        #[arg(long, value_delimiter = ',', required = true)]
        gains: Vec<f64>,
        #[arg(long, value_enum)]
        algo: Option<Algorithm>,
        #[arg(long)]
        duration: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file path or bundled scenario name.
    pub scenario: String,
    /// Override the scenario's adaptation law.
    #[arg(long, value_enum)]
    pub algo: Option<Algorithm>,
    /// Adaptation gain. With --algo and no --gain, 5 for gradient and 25 for mre.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Time constant of the memory filter (mre only).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Fixed RK4 step in seconds, at most 0.01.
    #[arg(long)]
    pub step: Option<f64>,
    /// Simulated time in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Record every N-th integration step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Synthesize and dump matrices without simulating.
    #[arg(long)]
    pub check_only: bool,
}

/// Synthesized matrices, stored row-major as nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub n: Vec<Vec<f64>>,
    pub t: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub k1: Vec<Vec<f64>>,
    pub k2: Vec<Vec<f64>>,
    pub q_sigma: Vec<Vec<f64>>,
    pub q_blocks: Vec<Vec<Vec<f64>>>,
    pub theta: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
}

impl MatrixDump {
    pub fn from_synthesis(syn: &Synthesis) -> Self {
        let g = &syn.gains;
        MatrixDump {
            n: to_rows(&g.n),
            t: to_rows(&g.t),
            m: to_rows(&g.m),
            k: to_rows(&g.k),
            k1: to_rows(&g.k1),
            k2: to_rows(&g.k2),
            q_sigma: to_rows(syn.bank.q_sigma()),
            q_blocks: (0..syn.bank.pairs().len()).map(|i| to_rows(&syn.bank.q_block(i))).collect(),
            theta: to_rows(&syn.theta.theta),
            psi: to_rows(&syn.francis.psi),
            pi: to_rows(&syn.francis.pi),
        }
    }
}

/// Re-checks the structural identities of a synthesis before it is reported.
pub fn verify_synthesis(cfg: &ScenarioConfig, syn: &Synthesis) -> Result<()> {
    const TOL: f64 = 1e-8;
    let plant = &cfg.plant;
    let g = &syn.gains;
    let n = plant.n();
    let checks: [(&str, f64); 4] = [
        ("(NC - I)E", ((&g.n * plant.c() - Matrix::identity(n, n)) * plant.e()).amax()),
        ("T - (I - NC)", (&g.t - (Matrix::identity(n, n) - &g.n * plant.c())).amax()),
        ("K2 - MN", (&g.k2 - &g.m * &g.n).amax()),
        ("Q_sigma E - L_sigma", (syn.bank.q_sigma() * plant.e() - syn.bank.l_sigma()).amax()),
    ];
    for (what, r) in checks {
        if r > TOL {
            return Err(Error::Structure(format!("{what} has residual {r:.3e}")));
        }
    }
    let max_re = eigenvalues(&g.m)?.max_real();
    if max_re >= 0.0 {
        return Err(Error::NotHurwitz { what: "observer matrix M", max_re });
    }
    let (r1, r2) = syn.francis.residuals(plant, &syn.bank, &syn.theta);
    if r1.max(r2) > TOL {
        return Err(Error::Structure(format!("regulator equation residuals {r1:.3e}, {r2:.3e}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub matrices: MatrixDump,
    pub metrics: Option<Metrics>,
    pub files: Vec<PathBuf>,
}

/// `DISTCOMP_SEED`, if set, overrides the scenario seed.
pub fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

pub fn apply_overrides(cfg: &mut ScenarioConfig, args: &RunArgs) -> Result<()> {
    if let Some(a) = args.algo {
        cfg.algorithm = a;
        if args.gain.is_none() {
            // Keep a sensible gain when switching law without an explicit one.
            match a {
                Algorithm::Gradient => cfg.adapt_gain = 5.0,
                Algorithm::Mre => cfg.adapt_gain = 25.0,
                _ => {}
            }
        }
    }
    if let Some(g) = args.gain {
        cfg.adapt_gain = g;
    }
    if let Some(t) = args.tau {
        cfg.tau = t;
    }
    if let Some(h) = args.step {
        cfg.step = h;
    }
    if let Some(d) = args.duration {
        cfg.duration = d;
    }
    if let Some(s) = args.stride {
        cfg.stride = s;
    }
    if let Some(seed) = seed_from_env()? {
        cfg.seed = seed;
    }
    cfg.validate()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Full `run` pipeline. Writes artifacts even when the simulation diverges
/// (the partial trace), then returns the divergence error.
pub fn run(args: &RunArgs) -> Result<RunReport> {
    let mut cfg = load_scenario(&args.scenario).map_err(|e| e.at("scenario"))?;
    apply_overrides(&mut cfg, args).map_err(|e| e.at("flags"))?;
    let syn = synthesize_scenario(&cfg).map_err(|e| e.at("synthesis"))?;
    verify_synthesis(&cfg, &syn).map_err(|e| e.at("synthesis"))?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let matrices = MatrixDump::from_synthesis(&syn);
    let matrices_path = args.out.join("matrices.json");
    write_json(&matrices_path, &matrices)?;
    let mut report =
        RunReport { scenario: cfg.name.clone(), algorithm: cfg.algorithm, matrices, metrics: None, files: vec![matrices_path] };
    if args.check_only {
        return Ok(report);
    }

    let trace_path = args.out.join("trace.csv");
    let trace = match simulate(&cfg, &syn) {
        Ok(t) => t,
        Err(Error::Diverged { t, limit, partial }) => {
            write_trace_csv(&trace_path, &partial)?;
            return Err(Error::Diverged { t, limit, partial }.at("simulation"));
        }
        Err(e) => return Err(e.at("simulation")),
    };
    write_trace_csv(&trace_path, &trace)?;
    let metrics = Metrics::from_trace(&trace, cfg.settle_eps);
    let metrics_path = args.out.join("metrics.json");
    write_json(&metrics_path, &metrics)?;
    let plot_path = emit_plots(&trace_path)?;
    report.metrics = Some(metrics);
    report.files.extend([trace_path, metrics_path, plot_path]);
    Ok(report)
}

/// Column names of the trace CSV, in order:
/// `t, x1..xn, xhat1..xhatn, y1..y{n_out}, u1..u{n_in}, f1..f{n_dist},
/// fhat1..fhat{n_dist}, ex_norm, ybar_norm, psi1..psi{n_in·q}`.
/// `psi` stacks the rows of `Ψ̂`.
pub fn trace_header(n: usize, n_out: usize, n_in: usize, n_dist: usize, n_psi: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let mut push = |prefix: &str, k: usize| h.extend((1..=k).map(|i| format!("{prefix}{i}")));
    push("x", n);
    push("xhat", n);
    push("y", n_out);
    push("u", n_in);
    push("f", n_dist);
    push("fhat", n_dist);
    h.push("ex_norm".into());
    h.push("ybar_norm".into());
    h.extend((1..=n_psi).map(|i| format!("psi{i}")));
    h
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let first = trace.samples.first().ok_or_else(|| Error::Config("cannot write an empty trace".into()))?;
    let header = trace_header(first.x.len(), first.y.len(), first.u.len(), first.f.len(), first.psi_hat.len());
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for s in &trace.samples {
            let mut row = vec![s.t];
            for v in [&s.x, &s.x_hat, &s.y, &s.u, &s.f, &s.f_hat] {
                row.extend(v.iter());
            }
            row.push(s.ex_norm);
            row.push(s.ybar_norm);
            row.extend(s.psi_hat.iter());
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        w.flush()
    };
    write(&mut w).map_err(io_err(path))
}

/// Reads a trace CSV back as its header and rows.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(io_err(path))?.split(',').map(str::to_string).collect(),
        None => return Err(Error::Parse(format!("{}: empty trace", path.display()))),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), i + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Writes `plot.gp` next to the trace: output `y`, `‖e_x‖`, `Ψ̂` and `u`
/// in a 2×2 layout rendered to `plot.png`.
pub fn emit_plots(trace_path: &Path) -> Result<PathBuf> {
    let (header, rows) = read_trace_csv(trace_path)?;
    let expected = "t,x1..xn,xhat1..xhatn,y1..,u1..,f1..,fhat1..,ex_norm,ybar_norm,psi1..";
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: trace has no samples", trace_path.display())));
    }
    let cols = |prefix: &str| -> Vec<usize> {
        header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.strip_prefix(prefix).is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit())))
            .map(|(i, _)| i + 1)
            .collect()
    };
    let (ys, us, psis) = (cols("y"), cols("u"), cols("psi"));
    let ex = header.iter().position(|h| h == "ex_norm").map(|i| i + 1);
    let missing: Vec<&str> = [
        (header.first().map(String::as_str) != Some("t"), "t"),
        (ys.is_empty(), "y1"),
        (us.is_empty(), "u1"),
        (psis.is_empty(), "psi1"),
        (ex.is_none(), "ex_norm"),
    ]
    .into_iter()
    .filter_map(|(miss, name)| miss.then_some(name))
    .collect();
    if !missing.is_empty() {
        return Err(Error::Parse(format!(
            "{}: missing columns {missing:?}; expected header {expected}",
            trace_path.display()
        )));
    }

    let data = trace_path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let panel = |title: &str, columns: &[usize]| -> String {
        let series: Vec<String> = columns
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let src = if k == 0 { format!("'{data}'") } else { "''".to_string() };
                format!("{src} using 1:{c} with lines title '{}'", header[c - 1])
            })
            .collect();
        format!("set title '{title}'\nplot {}\n", series.join(", \\\n     "))
    };
    let mut script = String::new();
    script.push_str("# generated by distcomp; run with: gnuplot plot.gp\n");
    script.push_str("set datafile separator ','\n");
    script.push_str("set terminal pngcairo size 1400,1000\n");
    script.push_str("set output 'plot.png'\n");
    script.push_str("set xlabel 't, s'\nset grid\n");
    script.push_str("set multiplot layout 2,2\n");
    script.push_str(&panel("(a) output y", &ys));
    script.push_str(&panel("(b) state estimation error norm", &[ex.expect("checked above")]));
    script.push_str(&panel("(c) feedback parameter estimates", &psis));
    script.push_str(&panel("(d) control u", &us));
    script.push_str("unset multiplot\n");

    let out = trace_path.with_file_name("plot.gp");
    fs::write(&out, script).map_err(io_err(&out))?;
    Ok(out)
}

fn print_report(report: &RunReport) {
    println!("scenario: {} ({:?})", report.scenario, report.algorithm);
    println!("K = {:?}", report.matrices.k);
    if let Some(m) = &report.metrics {
        match m.settling_time {
            Some(ts) => println!("settling time (eps = {}): {ts:.3} s", m.settle_eps),
            None => println!("settling time (eps = {}): not settled", m.settle_eps),
        }
        println!("terminal |y| = {:.3e}, terminal |e_x| = {:.3e}, peak |u| = {:.3}", m.terminal_y_norm, m.terminal_ex_norm, m.peak_u_norm);
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
}

/// Dispatches a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => run(&args).map(|r| print_report(&r)),
        Command::Plot { trace } => emit_plots(&trace).map(|p| println!("wrote {}", p.display())),
        Command::Sweep { scenario, gains, algo, duration } => sweep(&scenario, &gains, algo, duration),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn sweep(scenario: &str, gains: &[f64], algo: Option<Algorithm>, duration: Option<f64>) -> Result<()> {
    let mut cfg = load_scenario(scenario)?;
    if let Some(a) = algo {
        cfg.algorithm = a;
    }
    if let Some(d) = duration {
        cfg.duration = d;
    }
    if let Some(seed) = seed_from_env()? {
        cfg.seed = seed;
    }
    cfg.validate()?;
    for (g, res) in gains.iter().zip(gain_sweep(&cfg, gains)) {
        match res {
            Ok(m) => println!("{}", serde_json::json!({ "gain": g, "metrics": m })),
            Err(e) => println!("{}", serde_json::json!({ "gain": g, "error": e.to_string() })),
        }
    }
    Ok(())
}
