mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbstab::acceptance::{criteria, run_suite, CheckConfig};
use fbstab::Error;

use settings::{Common, Settings};

#[derive(Parser)]
#[command(name = "fbstab", version, about = "Stability analysis of the radial nonnecrotic tumor model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary radius and profiles; writes stationary.csv and stationary.json.
    Stationary(Common),
    /// Per-mode table, gamma_star, c0 and the stability verdict.
    Spectrum(Common),
    /// lambda_{k,gamma}(c) for every mode in `modes` and every c in `c_list`.
    Eigen(Common),
    /// Time integration of the radial problem or of one linearized mode.
    Simulate {
        #[command(subcommand)]
        target: SimTarget,
    },
    /// Translate a boundary graph by `shift`.
    Translate(Common),
    /// Finite-dimensional limit-identification demo.
    CmDemo(Common),
    /// Run the acceptance suite.
    Check(CheckArgs),
}

#[derive(Subcommand)]
enum SimTarget {
    Radial(Common),
    Mode(Common),
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Print the criteria without running them.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    stationary_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated criterion ids.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

const EXIT_USAGE: u8 = 1;
const EXIT_MODEL: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_model_error() {
        EXIT_MODEL
    } else {
        match e {
            Error::Config(_) | Error::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FBSTAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("FBSTAB_THREADS = `{v}` is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn check(args: &CheckArgs) -> ExitCode {
    if args.list {
        for c in criteria() {
            println!("{:2}  {} (budget {} s)", c.id, c.title, c.budget.as_secs());
        }
        return ExitCode::SUCCESS;
    }
    let d = CheckConfig::default();
    let cfg = CheckConfig {
        grid_n: args.grid_n.unwrap_or(d.grid_n),
        stationary_steps: args.stationary_steps.unwrap_or(d.stationary_steps),
        seed: args.seed.unwrap_or(d.seed),
    };
    if !(64..=8192).contains(&cfg.grid_n) || !cfg.grid_n.is_power_of_two() {
        eprintln!("error: grid_n = {} must be a power of two between 64 and 8192", cfg.grid_n);
        return ExitCode::from(EXIT_USAGE);
    }
    let known: Vec<usize> = criteria().iter().map(|c| c.id).collect();
    if let Some(bad) = args.only.iter().find(|id| !known.contains(id)) {
        eprintln!("error: no criterion {bad}");
        return ExitCode::from(EXIT_USAGE);
    }
    let results = run_suite(cfg, &args.only, |r| println!("{r}"));
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria passed", results.len());
    match results.iter().find(|r| !r.pass) {
        Some(first) => {
            eprintln!("error: criterion {} ({}) failed", first.id, first.title);
            ExitCode::from(EXIT_CHECK)
        }
        None => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    let (common, run): (&Common, fn(&Settings) -> fbstab::Result<commands::Written>) = match &cli.command {
        Command::Check(args) => return check(args),
        Command::Stationary(c) => (c, commands::stationary),
        Command::Spectrum(c) => (c, commands::spectrum),
        Command::Eigen(c) => (c, commands::eigen),
        Command::Simulate { target: SimTarget::Radial(c) } => (c, commands::simulate_radial),
        Command::Simulate { target: SimTarget::Mode(c) } => (c, commands::simulate_mode),
        Command::Translate(c) => (c, commands::translate),
        Command::CmDemo(c) => (c, commands::cm),
    };
    match Settings::load(common).and_then(|s| run(&s)) {
        Ok(written) => {
            written.report();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
