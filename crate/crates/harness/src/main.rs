use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nelson_harness::experiments::run_many;
use nelson_harness::{emit_report, Group, HarnessError, RunConfig, REGISTRY};

#[derive(Parser)]
#[command(name = "nelson-lab", about = "Classical and quantum experiments for the lattice Nelson model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical solver checks: charge, splitting order, Picard oracle.
    Classical(Common),
    /// Fock-space structure: commutation relations and exact zeros.
    Quantum(Common),
    /// Coupling sweeps of field averages.
    Rates(Common),
    /// Fluctuation dynamics: one-particle sector, weighted norms, strong limit.
    Fluct(Common),
    /// Product states and the phase-averaged classical prediction.
    Theta(Common),
    /// Every registered experiment, followed by summary.json.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Run a single experiment of the group.
    #[arg(long)]
    experiment: Option<String>,
    /// Worker threads for parameter sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

fn run(group: Option<Group>, args: &Common) -> Result<bool, HarnessError> {
    let config = match &args.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = args.jobs {
        if n == 0 {
            return Err(HarnessError::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let members: Vec<&'static str> = REGISTRY.iter().filter(|e| group.is_none_or(|g| e.group == g)).map(|e| e.name).collect();
    let names = match &args.experiment {
        Some(name) => match members.iter().find(|&&m| m == name) {
            Some(&m) => vec![m],
            None => return Err(HarnessError::UnknownExperiment(name.clone())),
        },
        None => members,
    };
    let outcomes = run_many(&names, &config, &args.out)?;
    for o in &outcomes {
        match &o.result {
            Ok(r) => println!("{:<18} {}  ({:.1} s)", o.name, if r.passed() { "PASS" } else { "FAIL" }, r.runtime_seconds),
            Err(e) => println!("{:<18} ERROR {e}", o.name),
        }
    }
    if group.is_none() {
        let path = emit_report(&outcomes, &config, &args.out)?;
        println!("summary written to {}", path.display());
    }
    Ok(outcomes.iter().all(|o| o.passed()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (group, args) = match &cli.command {
        Command::Classical(a) => (Some(Group::Classical), a),
        Command::Quantum(a) => (Some(Group::Quantum), a),
        Command::Rates(a) => (Some(Group::Rates), a),
        Command::Fluct(a) => (Some(Group::Fluct), a),
        Command::Theta(a) => (Some(Group::Theta), a),
        Command::Report(a) => (None, a),
    };
    match run(group, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
