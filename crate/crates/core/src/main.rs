use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gravclock::dephasing::Convention;
use gravclock::run::{run, Command};
use gravclock::scenario::Scenario;

/// Gravitational dephasing and stability calculator for optical lattice clocks.
#[derive(Parser, Debug)]
#[command(name = "gravclock", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decoherence-limited lattice size and tau_max.
    Threshold(Args),
    /// Dephasing ratio and contrast against time.
    DephaseCurve(Args),
    /// Best 1 s stability against ensemble size.
    StabilitySweep(Args),
    /// Differential systematic shift budget.
    Budget(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to `output.dir` from the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario convention.
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// Exit 0 even when some points are flagged.
    #[arg(long)]
    allow_flags: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ConventionArg {
    Physical,
    PaperFigure,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Physical => Convention::Physical,
            ConventionArg::PaperFigure => Convention::PaperFigure,
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("GRAVCLOCK_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                eprintln!("warning: GRAVCLOCK_THREADS ignored: {e}");
            }
        }
        _ => eprintln!("warning: GRAVCLOCK_THREADS={v} is not a positive integer; ignored"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Threshold(a) => (Command::Threshold, a),
        Cmd::DephaseCurve(a) => (Command::DephaseCurve, a),
        Cmd::StabilitySweep(a) => (Command::StabilitySweep, a),
        Cmd::Budget(a) => (Command::Budget, a),
    };
    configure_threads();

    let text = match std::fs::read_to_string(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(2);
        }
    };
    if let Some(c) = args.convention {
        scenario.convention = c.into();
    }
    let out = args
        .out
        .unwrap_or_else(|| PathBuf::from(&scenario.output_dir));

    match run(command, &scenario, &out) {
        Ok(record) => {
            print!("{}", record.summary);
            if record.flagged > 0 {
                eprintln!(
                    "{} point(s) flagged non-bracketable{}",
                    record.flagged,
                    if args.allow_flags {
                        ""
                    } else {
                        "; pass --allow-flags to accept"
                    }
                );
            }
            eprintln!(
                "wrote {} file(s) to {}",
                record.files.len() + 1,
                out.display()
            );
            ExitCode::from(record.exit_code(args.allow_flags) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
