use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gylab::models::HopfAnsatz;

mod commands;
mod config;

use config::{GlobalOverrides, ModelOverrides, Operation, SweepConfig};

/// Curvature of Gauduchon connections, Gauduchon–Yamabe solves and CYT checks on model
/// Hermitian manifolds.
///
/// Values come from built-in defaults, then the --config file, then flags. Set GYLAB_THREADS
/// to cap the number of worker threads. Exit codes: 2 configuration error, 3 contract
/// violation (for example a non-Gauduchon metric given to `degree`), 4 solver failure.
#[derive(Parser)]
#[command(name = "gylab", version)]
struct Cli {
    /// TOML file with keys seed, tol, out, t, a [model] table and a [sweep] table
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: gylab-out]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random model data [default: 20240917]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance the verdicts are judged against [default: 1e-8; 1e-6 for cyt and hopf-sweep]
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curvature tensor, Ricci form and scalar curvatures per t [default t: -1,0,1]
    Curvature(ModelArgs),
    /// Gauduchon degree of the conformal class per t [default t: -2,-1,0,1,2]
    Degree(ModelArgs),
    /// Constant ∇^t-scalar-curvature metric in the conformal class [default t: -1]
    Yamabe(ModelArgs),
    /// Bismut Ricci flatness: toric structure equations, or Ric^+ of a metric model
    Cyt(ModelArgs),
    /// Pairwise curvature differences, torsion norms and flatness identities [default t: -1,0,1]
    Relations(ModelArgs),
    /// ‖Ric^+‖ of Hopf metrics over β/α ratios centred on (2-n)/(n-1)
    HopfSweep(SweepArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// flat-torus, conformal-torus, kahler-torus, pluriclosed-torus, fubini-study, hopf or calabi-eckmann
    #[arg(long)]
    model: Option<String>,
    /// Complex dimension (base dimension n for calabi-eckmann)
    #[arg(long)]
    n: Option<usize>,
    /// Second factor dimension for calabi-eckmann
    #[arg(long)]
    m: Option<usize>,
    /// Grid points per real axis for torus models, comma separated
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    /// Perturbation size: sup of φ for conformal-torus [0.5], ε for kahler-torus [0.05] and pluriclosed-torus [0.3]
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    /// Hopf α [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Hopf β [default: 0]
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Chart samples for fubini-study and calabi-eckmann [default: 20]
    #[arg(long)]
    samples: Option<usize>,
    /// Hopf metric family: homogeneous or unscaled [default: homogeneous]
    #[arg(long, value_parser = parse_ansatz)]
    ansatz: Option<HopfAnsatz>,
    /// Connection parameters, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    /// Complex dimension, at least 2 [default: 2]
    #[arg(long)]
    n: Option<usize>,
    /// Number of ratios [default: 21]
    #[arg(long)]
    count: Option<usize>,
    /// Spacing of the ratios [default: 0.1]
    #[arg(long)]
    step: Option<f64>,
    /// Hopf metric family: homogeneous or unscaled [default: homogeneous]
    #[arg(long, value_parser = parse_ansatz)]
    ansatz: Option<HopfAnsatz>,
}

fn parse_ansatz(s: &str) -> Result<HopfAnsatz, String> {
    match s {
        "homogeneous" => Ok(HopfAnsatz::Homogeneous),
        "unscaled" => Ok(HopfAnsatz::Unscaled),
        _ => Err(format!("unknown ansatz {s}; use homogeneous or unscaled")),
    }
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("GYLAB_THREADS") {
        let k: usize = v
            .parse()
            .map_err(|_| format!("GYLAB_THREADS must be a positive integer, got {v:?}"))?;
        if k == 0 {
            return Err("GYLAB_THREADS must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("configuration error: {e}");
        return ExitCode::from(2);
    }
    let mut global = GlobalOverrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        tol: cli.tol,
        t: None,
    };
    let mut model = ModelOverrides::default();
    let mut sweep = SweepConfig::default();
    let (op, args) = match cli.command {
        Command::HopfSweep(a) => {
            sweep = SweepConfig {
                n: a.n,
                count: a.count,
                step: a.step,
                ansatz: a.ansatz,
            };
            (Operation::HopfSweep, None)
        }
        Command::Curvature(a) => (Operation::Curvature, Some(a)),
        Command::Degree(a) => (Operation::Degree, Some(a)),
        Command::Yamabe(a) => (Operation::Yamabe, Some(a)),
        Command::Cyt(a) => (Operation::Cyt, Some(a)),
        Command::Relations(a) => (Operation::Relations, Some(a)),
    };
    if let Some(a) = args {
        global.t = a.t;
        model = ModelOverrides {
            kind: a.model,
            n: a.n,
            m: a.m,
            counts: a.counts,
            amplitude: a.amplitude,
            alpha: a.alpha,
            beta: a.beta,
            samples: a.samples,
            ansatz: a.ansatz,
        };
    }
    let cfg = match config::resolve(op, &global, &model, &sweep) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cfg) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
