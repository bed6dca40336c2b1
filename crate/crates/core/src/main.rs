use clap::Parser;
use dispersive_rbffd::config::{load_config, preset, RunConfig, PRESET_NAMES};
use dispersive_rbffd::runner::{execute, RunOutcome};
use dispersive_rbffd::{Error, Result};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Solve KdV/BBM-type dispersive wave problems with local multiquadric
/// RBF-FD stencils and RK4 time stepping; emits plot-ready CSV/JSON.
#[derive(Parser)]
#[command(name = "dispersive-rbffd", version)]
struct Cli {
    /// Bundled preset names (table1, fig1 .. fig10) or paths to JSON configs.
    #[arg(required_unless_present = "batch")]
    runs: Vec<String>,

    /// Output directory. With several runs each gets a subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the assembled differentiation matrices as COO text files.
    #[arg(long)]
    dump_operators: bool,

    /// Run in parallel; without positional arguments, runs every preset.
    #[arg(long)]
    batch: bool,
}

fn resolve(arg: &str) -> Result<(String, RunConfig)> {
    if let Some(cfg) = preset(arg) {
        return Ok((arg.to_string(), cfg));
    }
    let path = Path::new(arg);
    if path.exists() {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("run")
            .to_string();
        return Ok((name, load_config(path)?));
    }
    Err(Error::Config(format!(
        "`{arg}` is neither a bundled preset nor an existing config file \
         (presets: {})",
        PRESET_NAMES.join(", ")
    )))
}

fn out_dir_for(cfg: &RunConfig, name: &str, cli_out: &Option<PathBuf>, multi: bool) -> PathBuf {
    match (cli_out, multi) {
        (Some(base), true) => base.join(name),
        (Some(base), false) => base.clone(),
        (None, _) => cfg
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(name)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let names: Vec<String> = if cli.runs.is_empty() {
        PRESET_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        cli.runs.clone()
    };

    let mut jobs: Vec<(String, RunConfig, PathBuf)> = Vec::new();
    for arg in &names {
        match resolve(arg) {
            Ok((name, cfg)) => {
                let dir = out_dir_for(&cfg, &name, &cli.out, names.len() > 1);
                jobs.push((name, cfg, dir));
            }
            Err(e) => {
                eprintln!("{arg}: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        }
    }

    let run_one = |(name, cfg, dir): &(String, RunConfig, PathBuf)| {
        (name.clone(), execute(name, cfg, dir, cli.dump_operators))
    };
    let results: Vec<(String, Result<RunOutcome>)> = if cli.batch {
        jobs.par_iter().map(run_one).collect()
    } else {
        jobs.iter().map(run_one).collect()
    };

    let mut code = 0u8;
    for (name, res) in results {
        match res {
            Ok(outcome) => println!(
                "{name}: wrote {} file(s) to {}",
                outcome.files.len(),
                outcome.out_dir.display()
            ),
            Err(e) => {
                eprintln!("{name}: error: {e}");
                if code == 0 {
                    code = e.exit_code() as u8;
                }
            }
        }
    }
    ExitCode::from(code)
}
