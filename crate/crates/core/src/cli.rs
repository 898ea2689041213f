//! Command-line front end. Exit codes: 0 success, 1 I/O, 2 usage, 3 invalid scenario, 4 run failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::scenarios::{
    builtin, compute_metrics, export_csv, run_scenario_partial, Scenario, ScenarioError, BUILTIN_NAMES,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "heol", version, about = "Homeostat-based closed-loop simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run scenarios and write `<name>.csv` and `<name>.metrics.txt` for each.
    Run {
        /// Scenario file or built-in name; repeat to run several concurrently.
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[arg(long, env = "HEOL_OUT_DIR", default_value = "out")]
        out: PathBuf,
    },
    /// Check scenarios without running them.
    Validate {
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
    },
    /// List the built-in scenarios.
    List,
    /// Print a built-in scenario as JSON.
    Show { name: String },
}

/// Loads a scenario from a path, falling back to the built-in of that name.
pub fn load_scenario(spec: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(spec);
    if path.exists() {
        Scenario::from_file(path)
    } else {
        builtin(spec)
    }
}

pub fn exit_code(e: &ScenarioError) -> i32 {
    match e {
        ScenarioError::Io(_) | ScenarioError::Csv(_) => EXIT_IO,
        ScenarioError::Invalid(_) | ScenarioError::Parse(_) | ScenarioError::UnknownBuiltin(_) => EXIT_INVALID,
        ScenarioError::Runtime { .. } | ScenarioError::EmptyLog => EXIT_RUNTIME,
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs one scenario and writes its outputs; returns the summary line.
fn run_one(spec: &str, out: &Path) -> Result<String, ScenarioError> {
    let scenario = load_scenario(spec)?;
    let stem = file_stem(&scenario.name);
    let run = run_scenario_partial(&scenario)?;
    if let Some(e) = run.error {
        // the samples before the failure are kept for diagnosis
        if !run.log.is_empty() {
            export_csv(&run.log, &out.join(format!("{stem}.partial.csv")))?;
        }
        return Err(e);
    }
    let log = run.log;
    let metrics = compute_metrics(&log, scenario.tracking_tolerance)?;
    export_csv(&log, &out.join(format!("{stem}.csv")))?;
    std::fs::write(out.join(format!("{stem}.metrics.txt")), metrics.to_text())?;
    let rms: Vec<String> = metrics.rms_tail.iter().map(|r| format!("{r:.3e}")).collect();
    let verdict = match metrics.all_tracking_ok() {
        Some(true) => " tracking ok",
        Some(false) => " tracking out of tolerance",
        None => "",
    };
    Ok(format!(
        "{}: {} samples, tail rms [{}]{verdict}",
        scenario.name,
        metrics.samples,
        rms.join(", ")
    ))
}

/// Parses `args` (program name first) and runs the command.
pub fn cli_main<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match cli.command {
        Command::List => {
            for name in BUILTIN_NAMES {
                let s = builtin(name).expect("built-in exists");
                let _ = writeln!(stdout, "{name}\t{}", s.description);
            }
            0
        }
        Command::Show { name } => match builtin(&name) {
            Ok(s) => {
                let _ = writeln!(stdout, "{}", s.to_json());
                0
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                exit_code(&e)
            }
        },
        Command::Validate { configs } => {
            let mut code = 0;
            for spec in &configs {
                match load_scenario(spec).and_then(|s| s.validate().map(|_| s)) {
                    Ok(s) => {
                        let _ = writeln!(stdout, "{spec}: ok ({})", s.name);
                    }
                    Err(e) => {
                        let _ = writeln!(stderr, "{spec}: {e}");
                        if code == 0 {
                            code = exit_code(&e);
                        }
                    }
                }
            }
            code
        }
        Command::Run { configs, out } => {
            if let Err(e) = std::fs::create_dir_all(&out) {
                let _ = writeln!(stderr, "error: cannot create {}: {e}", out.display());
                return EXIT_IO;
            }
            let results: Vec<Result<String, ScenarioError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = configs
                    .iter()
                    .map(|spec| {
                        let out = out.as_path();
                        scope.spawn(move || run_one(spec, out))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scenario thread panicked"))
                    .collect()
            });
            let mut code = 0;
            for (spec, r) in configs.iter().zip(results) {
                match r {
                    Ok(line) => {
                        let _ = writeln!(stdout, "{line}");
                    }
                    Err(e) => {
                        let _ = writeln!(stderr, "{spec}: {e}");
                        if code == 0 {
                            code = exit_code(&e);
                        }
                    }
                }
            }
            code
        }
    }
}
