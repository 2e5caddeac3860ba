//! `nonauto`: command line experiments for non-autonomous polynomial dynamics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonauto_cli::config::{ExperimentConfig, Task};
use nonauto_cli::report::{self, ErrorReport};
use nonauto_cli::{execute, figures, Failure, EXIT_CONFIG, EXIT_NUMERIC};

#[derive(Parser)]
#[command(name = "nonauto", version, about = "Julia sets, potentials, external rays and hyperbolicity for sequences of polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Clone)]
struct Global {
    /// Experiment configuration (TOML, or JSON as written to resolved configs).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the perturbation rule.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Escape-time image of a filled Julia set.
    Render,
    /// Green's function at the configured points.
    Green,
    /// Böttcher coordinate at the configured points.
    Bottcher,
    /// Trace external rays and write CSV traces.
    TraceRay,
    /// Hyperbolicity certificate.
    Certify,
    /// Co-landing check across seeded perturbations.
    Rigidity,
    /// Shadowing versus ray-landing motion along a path.
    Motion,
    /// Hausdorff distance between two Julia set samples.
    Hausdorff,
    /// Conjugate to a monic sequence.
    ConjugateMonic,
    /// Run the task named in the config.
    Run,
    /// Run the bundled figure configs.
    ReproduceFigures {
        /// Perturbation radius for the second figure.
        #[arg(long)]
        radius: Option<f64>,
    },
}

impl Command {
    fn task(&self) -> Option<Task> {
        Some(match self {
            Command::Render => Task::Render,
            Command::Green => Task::Green,
            Command::Bottcher => Task::Bottcher,
            Command::TraceRay => Task::TraceRay,
            Command::Certify => Task::Certify,
            Command::Rigidity => Task::Rigidity,
            Command::Motion => Task::Motion,
            Command::Hausdorff => Task::Hausdorff,
            Command::ConjugateMonic => Task::ConjugateMonic,
            Command::Run | Command::ReproduceFigures { .. } => return None,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    let out = cli.global.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let result = match &cli.command {
        Command::ReproduceFigures { radius } => figures::reproduce(&out, cli.global.seed, *radius),
        cmd => run_configured(cmd.task(), &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, rep) = match f {
                Failure::Config(message) => {
                    (EXIT_CONFIG, ErrorReport { error: "ConfigError".into(), message, exit_code: EXIT_CONFIG as i32 })
                }
                Failure::Numeric { name, message } => {
                    (EXIT_NUMERIC, ErrorReport { error: name, message, exit_code: EXIT_NUMERIC as i32 })
                }
            };
            eprintln!("{}", serde_json::to_string(&rep).expect("error serializes"));
            let _ = report::write_error(&out, &rep);
            ExitCode::from(code)
        }
    }
}

fn run_configured(task: Option<Task>, g: &Global) -> Result<(), Failure> {
    let path = g.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(t) = task {
        cfg.task = t;
    }
    if let Some(s) = g.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    execute(cfg.resolve()?)
}
