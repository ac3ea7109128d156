use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alcs::config::parse_config;
use alcs::control::run_simulation;
use alcs::output::write_run;
use alcs::plant::ProcessLut;
use alcs::signals::D8bv;
use alcs::tinynet::gradient_check;
use alcs::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

/// Neural daylight lighting control simulator.
#[derive(Parser)]
#[command(name = "alcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write trajectory, summary and plots.
    Simulate(Box<SimulateArgs>),
    /// Compare backprop gradients against finite differences on random nets.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Generate or inspect a plant lookup table.
    #[command(subcommand)]
    Lut(LutCommand),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    /// `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of loop steps (default 2000).
    #[arg(long)]
    steps: Option<String>,
    /// Setpoint in lx_d8bv (default 100).
    #[arg(long)]
    e_desired: Option<String>,
    /// Controller learning rate (default 0.15).
    #[arg(long)]
    gamma_controller: Option<String>,
    /// Inverse-model learning rate (default 0.15).
    #[arg(long)]
    gamma_inverse: Option<String>,
    /// Hidden units of the controller (default 3).
    #[arg(long)]
    hidden_controller: Option<String>,
    /// Hidden units of the inverse model (default 3).
    #[arg(long)]
    hidden_inverse: Option<String>,
    /// Initialization seed of the controller (default 1).
    #[arg(long)]
    seed_controller: Option<String>,
    /// Initialization seed of the inverse model (default 2).
    #[arg(long)]
    seed_inverse: Option<String>,
    /// Seed of the randomized daylight series (default 2007).
    #[arg(long)]
    seed_daylight: Option<String>,
    /// `synthetic[:E_MAX:SHAPE:KNOTS]` or a CSV path.
    #[arg(long)]
    lut: Option<String>,
    /// `constant:C`, `step:C0:C1:K`, `ramp:C0:C1`, `fast[:BASE:AMP:PROB:JUMP]` or a CSV path.
    #[arg(long)]
    daylight: Option<String>,
    /// Steps excluded from the steady-state statistics (default 200).
    #[arg(long)]
    warmup: Option<String>,
    /// `independent` or `shared255`.
    #[arg(long)]
    error_scaling: Option<String>,
    /// 0 pairs U(k) with E_measured(k); 1 pairs U(k-1).
    #[arg(long)]
    inverse_target_lag: Option<String>,
    /// Steps between a command and its effect on the measurement (0 or 1).
    #[arg(long)]
    plant_delay: Option<String>,
    /// `quantized` or `continuous`.
    #[arg(long)]
    training_targets: Option<String>,
    /// Build both networks without bias terms.
    #[arg(long)]
    no_bias: bool,
    /// Directory for the output files (default `out`).
    #[arg(long)]
    out_dir: Option<String>,
}

impl SimulateArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let flags = [
            ("steps", &self.steps),
            ("e_desired", &self.e_desired),
            ("gamma_controller", &self.gamma_controller),
            ("gamma_inverse", &self.gamma_inverse),
            ("hidden_controller", &self.hidden_controller),
            ("hidden_inverse", &self.hidden_inverse),
            ("seed_controller", &self.seed_controller),
            ("seed_inverse", &self.seed_inverse),
            ("seed_daylight", &self.seed_daylight),
            ("lut", &self.lut),
            ("daylight", &self.daylight),
            ("warmup", &self.warmup),
            ("error_scaling", &self.error_scaling),
            ("inverse_target_lag", &self.inverse_target_lag),
            ("plant_delay", &self.plant_delay),
            ("training_targets", &self.training_targets),
            ("out_dir", &self.out_dir),
        ];
        let mut out: Vec<_> = flags
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if self.no_bias {
            out.push(("use_bias", "false".to_string()));
        }
        out
    }
}

#[derive(Subcommand)]
enum LutCommand {
    /// Write a synthetic power-law table as CSV.
    Generate {
        #[arg(long, default_value_t = 180)]
        e_max: u8,
        #[arg(long, default_value_t = 1.3)]
        shape: f64,
        #[arg(long, default_value_t = 32)]
        knots: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the knots, the monotonicity verdict and the inverse of an illuminance.
    Inspect {
        /// Table to inspect; the default synthetic table when absent.
        path: Option<PathBuf>,
        /// Illuminance whose best command is looked up.
        #[arg(long, default_value_t = 100)]
        query: u8,
    },
}

fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

fn simulate(args: &SimulateArgs) -> Result<u8, Error> {
    let config = parse_config(args.config.as_deref(), &args.overrides())?;
    let run = run_simulation(&config)?;
    let (files, report) = write_run(&config.out_dir, &config, &run)?;
    println!(
        "{} steps: frac_in_wide={:.3} frac_in_narrow={:.3} mean_abs_eps={:.2} ({})",
        run.records.len(),
        report.frac_in_wide,
        report.frac_in_narrow,
        report.mean_abs_eps,
        report.flag.as_str()
    );
    println!("wrote {}", files.trajectory.display());
    println!("wrote {}", files.summary.display());
    for p in &files.plots {
        println!("wrote {}", p.display());
    }
    Ok(0)
}

fn gradcheck(seed: u64, trials: usize) -> Result<u8, Error> {
    let check = gradient_check(seed, trials)?;
    println!(
        "max relative error over {} nets: {:e}",
        check.trials, check.max_relative_error
    );
    if check.max_relative_error < 1e-5 {
        Ok(0)
    } else {
        eprintln!("gradient check failed: threshold 1e-5");
        Ok(EXIT_CHECK_FAILED)
    }
}

fn lut(cmd: &LutCommand) -> Result<u8, Error> {
    match cmd {
        LutCommand::Generate {
            e_max,
            shape,
            knots,
            out,
        } => {
            let table = ProcessLut::synthetic(*e_max, *shape, *knots)?;
            match out {
                Some(path) => table.save_csv(path)?,
                None => print!("{}", table.to_csv()),
            }
        }
        LutCommand::Inspect { path, query } => {
            let table = match path {
                Some(p) => ProcessLut::load_csv(p)?,
                None => ProcessLut::default_synthetic(),
            };
            println!("{:>5} {:>5}", "u", "e");
            for k in table.knots() {
                println!("{:>5} {:>5}", k.u, k.e);
            }
            println!("monotone: {}", table.is_monotone());
            let e = D8bv::new(*query);
            let u = table.inverse(e);
            println!("u*({e}) = {u} (lut({u}) = {})", table.eval(u));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Gradcheck { seed, trials } => gradcheck(*seed, *trials),
        Command::Lut(cmd) => lut(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
