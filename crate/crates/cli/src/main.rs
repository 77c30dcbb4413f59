use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use pileup_core::bounds::{discrepancy_alpha, evaluate_bounds, BoundInputs, BoundReport};
use pileup_core::estimation::{run_pipeline, RateReport};
use pileup_core::experiment::{emit_report, run_experiment, simulate_run, ExperimentConfig};
use pileup_core::io::{self, fmt_real, Ingested};
use pileup_core::signal::optimal_index_set;
use pileup_core::solver::{nnlasso, select_r, SparseRegressor};
use pileup_core::{Dictionary, Error};

#[derive(Parser)]
#[command(
    name = "pileup-rate",
    version,
    about = "Counting-rate estimation for pileup-distorted pulse trains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write records.csv, summary.csv and scatter_lambda_opt.csv.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate one signal and write it with its sidecar and ground truth.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Signal CSV path; the sidecar goes next to it with a .json extension.
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the counting rate of a signal file.
    Estimate {
        #[command(flatten)]
        input: SignalArgs,
        /// Ground truth CSV; adds the reference rates to the report.
        #[arg(long, requires = "lambda_true")]
        truth: Option<PathBuf>,
        #[arg(long)]
        lambda_true: Option<f64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the non-negative LASSO and print the coefficients.
    Solve {
        #[command(flatten)]
        input: SignalArgs,
        /// Fixed sparsity parameter; when absent r is matched to the noise level.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the confidence bounds for a signal with known ground truth.
    Bounds {
        #[command(flatten)]
        input: SignalArgs,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        lambda_true: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dictionary inspection.
    Dict {
        #[command(subcommand)]
        action: DictAction,
    },
}

#[derive(Subcommand)]
enum DictAction {
    /// Write the block shapes and the correlation profile of a dictionary.
    Dump {
        #[arg(long)]
        config: PathBuf,
        /// Number of samples of the grid the dictionary is built on.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct SignalArgs {
    /// Experiment config supplying the shape grid, energy model and pipeline settings.
    #[arg(long)]
    config: PathBuf,
    /// `index,value` CSV.
    #[arg(long)]
    signal: PathBuf,
    /// Sampling period; defaults to the sidecar value.
    #[arg(long)]
    dt: Option<f64>,
    /// Noise level; defaults to the sidecar value, then to the config.
    #[arg(long)]
    sigma: Option<f64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

/// Library errors raised while handling data files and numerics.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Parse { .. } | Error::Format(_) | Error::Json(_) => 3,
            Error::NonConvergence { .. } | Error::PathExhausted { .. } | Error::Oracle(_) => 4,
            Error::InvalidParameter(_)
            | Error::DegenerateShape { .. }
            | Error::InfeasibleBounds { .. }
            | Error::UndefinedRate(_) => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(path: &Path, seed: Option<u64>) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })?;
    let mut cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

struct Loaded {
    cfg: ExperimentConfig,
    input: Ingested,
    sigma: f64,
    dict: Dictionary,
}

fn load_signal(args: &SignalArgs) -> CliResult<Loaded> {
    let cfg = load_config(&args.config, None)?;
    let meta = io::read_meta(&io::sidecar_path(&args.signal)).ok();
    let dt = args.dt.or(meta.map(|m| m.dt)).unwrap_or(cfg.dt);
    let sigma = args.sigma.or(meta.map(|m| m.sigma)).unwrap_or(cfg.sigma);
    let input = io::ingest_signal(&args.signal, dt, sigma)?;
    if input.padded {
        eprintln!("note: odd sample count {}, padded with one zero", input.original_len);
    }
    let shape_grid = cfg.shape_grid.to_grid().map_err(|e| Failure::config(e.to_string()))?;
    let dict = Dictionary::new(shape_grid, input.signal.grid())?;
    Ok(Loaded {
        cfg,
        input,
        sigma,
        dict,
    })
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => io::write_json(path, value)?,
        None => {
            let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other.map_err(Error::from)?,
            }
        }
    }
    Ok(())
}

fn sim(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let results = run_experiment(&cfg)?;
    emit_report(&results, out)?;
    io::write_json(&out.join("config.json"), &cfg)?;
    let flagged = results.records.iter().filter(|r| !r.flags.is_empty()).count();
    eprintln!(
        "{} runs written to {} ({flagged} flagged)",
        results.records.len(),
        out.display()
    );
    Ok(())
}

fn synth(config: &Path, lambda: f64, signal: &Path, truth: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let shape_grid = cfg.shape_grid.to_grid().map_err(|e| Failure::config(e.to_string()))?;
    let sim = simulate_run(&cfg, &shape_grid, lambda, cfg.seed)?;
    io::write_signal(signal, &sim.signal)?;
    io::write_truth(truth, &sim.truth)?;
    Ok(())
}

fn estimate(input: &SignalArgs, truth: Option<&Path>, lambda_true: Option<f64>, out: Option<&Path>) -> CliResult<()> {
    let l = load_signal(input)?;
    let truth = match (truth, lambda_true) {
        (Some(p), Some(lt)) => Some(io::read_truth(p, lt)?),
        _ => None,
    };
    let output = run_pipeline(&l.dict, &l.input.signal, l.sigma, &l.cfg.pipeline)?;
    emit_json(&RateReport::new(&output, &l.input.signal, truth.as_ref()), out)
}

#[derive(Serialize)]
struct SolveOutput {
    r: f64,
    objective: f64,
    kkt_violation: f64,
    sweeps: usize,
    /// `(column, block, shape, value)` for every non-zero coefficient.
    coefficients: Vec<(usize, usize, usize, f64)>,
}

fn solve(input: &SignalArgs, r: Option<f64>, out: Option<&Path>) -> CliResult<()> {
    let l = load_signal(input)?;
    let opts = l.cfg.pipeline.solver;
    let beta: SparseRegressor = match r {
        Some(r) => nnlasso(&l.dict, &l.input.signal, r, opts)?,
        None => select_r(&l.dict, &l.input.signal, l.sigma, l.cfg.pipeline.path_factor, opts)?.beta,
    };
    let p = l.dict.p();
    let coefficients = beta.entries().iter().map(|(&n, &v)| (n, n / p, n % p, v)).collect();
    emit_json(
        &SolveOutput {
            r: beta.r(),
            objective: beta.objective(),
            kkt_violation: beta.kkt_violation(),
            sweeps: beta.sweeps(),
            coefficients,
        },
        out,
    )
}

#[derive(Serialize)]
struct BoundsOutput {
    rate: RateReport,
    bounds: BoundReport,
}

fn bounds(input: &SignalArgs, truth: &Path, lambda_true: f64, out: Option<&Path>) -> CliResult<()> {
    let l = load_signal(input)?;
    let truth = io::read_truth(truth, lambda_true)?;
    let output = run_pipeline(&l.dict, &l.input.signal, l.sigma, &l.cfg.pipeline)?;
    let (e_min, e_max) = l.cfg.energy.resolved_bounds();
    let alpha = discrepancy_alpha(&truth, &l.dict, e_min, e_max)?;
    let profile = l.dict.correlation_profile()?;
    let grid = l.dict.grid();
    let inputs = BoundInputs {
        e_min,
        e_max,
        sigma: l.sigma,
        alpha,
        g_min: l.dict.gram_min(),
        g_mass: profile.g_mass(),
        tau: l.dict.tau(),
        p: l.dict.p(),
        n: grid.n_samples(),
        r: output.events.r,
        eta: output.events.eta,
        dt: grid.dt(),
    };
    let p0 = optimal_index_set(truth.arrivals(), grid)?;
    let report = evaluate_bounds(
        &profile,
        inputs,
        &output.events,
        output.beta.l0(),
        lambda_true,
        p0.len(),
    )?;
    emit_json(
        &BoundsOutput {
            rate: RateReport::new(&output, &l.input.signal, Some(&truth)),
            bounds: report,
        },
        out,
    )
}

#[derive(Serialize)]
struct DictSummary {
    p: usize,
    tau: usize,
    n_samples: usize,
    g_min: f64,
    g_mass: f64,
}

fn dict_dump(config: &Path, samples: usize, out: &Path) -> CliResult<()> {
    let cfg = load_config(config, None)?;
    let shape_grid = cfg.shape_grid.to_grid().map_err(|e| Failure::config(e.to_string()))?;
    let grid = pileup_core::SamplingGrid::new(samples, cfg.dt).map_err(|e| Failure::config(e.to_string()))?;
    let dict = Dictionary::new(shape_grid, grid).map_err(|e| Failure::config(e.to_string()))?;
    let profile = dict.correlation_profile()?;
    std::fs::create_dir_all(out).map_err(Error::from)?;

    let mut shapes = String::from("shape,theta1,theta2,offset,value\n");
    for (s, g) in dict.shapes().iter().enumerate() {
        for (i, v) in g.samples().iter().enumerate() {
            shapes.push_str(&format!(
                "{s},{},{},{},{}\n",
                fmt_real(g.theta1()),
                fmt_real(g.theta2()),
                i + 1,
                fmt_real(*v)
            ));
        }
    }
    std::fs::write(out.join("shapes.csv"), shapes).map_err(Error::from)?;

    let mut prof = String::from("offset,max_corr\n");
    let tau = profile.tau() as i64;
    for (i, m) in profile.values().iter().enumerate() {
        prof.push_str(&format!("{},{}\n", i as i64 - tau, fmt_real(*m)));
    }
    std::fs::write(out.join("profile.csv"), prof).map_err(Error::from)?;

    emit_json(
        &DictSummary {
            p: dict.p(),
            tau: dict.tau(),
            n_samples: samples,
            g_min: dict.gram_min(),
            g_mass: profile.g_mass(),
        },
        Some(&out.join("dictionary.json")),
    )
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sim { config, out, seed } => sim(&config, &out, seed),
        Command::Synth {
            config,
            lambda,
            signal,
            truth,
            seed,
        } => synth(&config, lambda, &signal, &truth, seed),
        Command::Estimate {
            input,
            truth,
            lambda_true,
            out,
        } => estimate(&input, truth.as_deref(), lambda_true, out.as_deref()),
        Command::Solve { input, r, out } => solve(&input, r, out.as_deref()),
        Command::Bounds {
            input,
            truth,
            lambda_true,
            out,
        } => bounds(&input, &truth, lambda_true, out.as_deref()),
        Command::Dict {
            action: DictAction::Dump { config, samples, out },
        } => dict_dump(&config, samples, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
