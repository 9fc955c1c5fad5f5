use clap::{Parser, Subcommand, ValueEnum};
use mobman_cli::commands::{self, CliError, Context, Mode, MotorMapArgs};
use mobman_cli::document::Document;
use mobman_nlp::Options;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "mobman", version, about = "Integrated motion planning and motor co-design for mobile manipulators")]
struct Cli {
    /// TOML configuration; the built-in desk task when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver optimality tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 1500)]
    max_iter: usize,
    /// Print solver iterations.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Integrated,
    Sequential,
    TimeOptimal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Integrated => Mode::Integrated,
            ModeArg::Sequential => Mode::Sequential,
            ModeArg::TimeOptimal => Mode::TimeOptimal,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forward/inverse dynamics round trip on random samples.
    ValidateDynamics {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Per-channel percentage error allowed.
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
    },
    /// Operation map of one motor against its analytical envelope.
    MotorMap {
        /// Arm joint (0-based).
        #[arg(long, default_value_t = 0)]
        joint: usize,
        /// Map the built-in reference motor instead.
        #[arg(long)]
        reference: bool,
        /// Override the phase current limit (A).
        #[arg(long)]
        i_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        /// Upper rotor speed of the map (rad/s).
        #[arg(long)]
        omega_max: Option<f64>,
        /// Upper torque of the map (N·m).
        #[arg(long)]
        tau_max: Option<f64>,
    },
    /// Plan the reach task and track it in closed loop.
    Plan {
        #[arg(long, value_enum, default_value = "integrated")]
        mode: ModeArg,
    },
    /// Optimize motor designs together with the trajectory.
    Codesign,
    /// Plan, then track with measurement noise.
    Simulate {
        #[arg(long, value_enum, default_value = "integrated")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let doc = match &cli.config {
        Some(p) => Document::load(p)?,
        None => Document::desk(),
    };
    if !(cli.tol > 0.0) || cli.max_iter == 0 {
        return Err(CliError::Usage("--tol must be positive and --max-iter at least 1".into()));
    }
    let opts = Options { tol: cli.tol, max_iter: cli.max_iter, verbose: cli.verbose, ..Options::default() };
    let ctx = Context { doc, out_dir: cli.out_dir, seed: cli.seed, opts };
    match cli.command {
        Command::ValidateDynamics { samples, threshold } => commands::validate_dynamics(&ctx, samples, threshold).map(|r| r.1),
        Command::MotorMap { joint, reference, i_max, grid, omega_max, tau_max } => {
            commands::motor_map(&ctx, &MotorMapArgs { joint, reference, i_max_a: i_max, n_omega: grid, n_tau: grid, omega_max, tau_max })
        }
        Command::Plan { mode } => commands::plan_command(&ctx, mode.into()),
        Command::Codesign => commands::codesign_command(&ctx),
        Command::Simulate { mode, trials } => commands::simulate_command(&ctx, mode.into(), trials),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
