use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use polrot::cli::{error_line, run};
use polrot::config::{apply_overrides, parse_document, parse_table};
use polrot::{Error, Result};

/// Polarization-rotation spectra of a probe in coupling-dressed 87Rb vapor.
#[derive(Parser, Debug)]
#[command(name = "polrot", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Dotted override, e.g. `coupling.power_mw=6`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for detuning sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// More log output; repeat for more.
    #[arg(short, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn execute(args: &Args) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut doc = parse_table(&text)?;
    apply_overrides(&mut doc, &args.set)?;
    let mut spec = parse_document(doc)?;
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
        spec.resolved.output_dir = Some(out.clone());
    }

    let level = match args.verbose.max(spec.verbosity) {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }

    log::info!("running {:?} for {}", spec.scenario, spec.config.scheme);
    let report = run(&spec)?;
    for line in &report.summary {
        println!("{line}");
    }
    for f in &report.files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
