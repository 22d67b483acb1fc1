use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hlmetro_cli::{parse_config, run, EXIT_CONFIG, EXIT_NUMERIC};

/// Run a configured analysis and write CSV.
#[derive(Debug, Parser)]
#[command(name = "hlmetro", version)]
struct Args {
    /// Path to a `key = value` configuration file.
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo repetitions.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    ExitCode::from(real_main(args) as u8)
}

fn real_main(args: Args) -> i32 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let parsed = match parse_config(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", args.config.display());
    }
    let mut config = parsed.config;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already configured: {e}");
        }
    }

    let mut buf = Vec::new();
    if let Err(e) = run(&config, &mut buf) {
        eprintln!("error: {e}");
        return EXIT_NUMERIC;
    }
    let written = match &args.output {
        Some(path) => fs::write(path, &buf),
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            w.write_all(&buf).and_then(|_| w.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return EXIT_NUMERIC;
    }
    0
}
