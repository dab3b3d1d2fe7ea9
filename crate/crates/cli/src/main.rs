//! `mobflow` command-line driver.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 runtime. Failures print
//! one line `error: <kind>: <reason>` on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mobflow::io::{self, format_real, ConfigError, RunError};
use mobflow::nanowire::{integrate_profile, CapModel, WireParams};
use mobflow::scenarios::{circle_oracle, flat_oracle, junction_oracle, CircleSetup, JunctionSetup, ScenarioError};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "MOBFLOW_THREADS";

#[derive(Parser)]
#[command(name = "mobflow", version, about = "Mobility-aware multiphase Allen-Cahn solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a configuration and write frames, contours and diagnostics.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a configuration without running it.
    Validate { config: PathBuf },
    /// Export the sharp-interface nanowire profile as `alpha,r,h` CSV.
    Profile {
        /// sigma_VL / sigma_SV.
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        /// sigma_LS / sigma_SV.
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// Initial droplet base radius.
        #[arg(long = "R0", allow_hyphen_values = true)]
        r0: f64,
        #[arg(long, value_enum, default_value_t = Cap::Paper)]
        cap_model: Cap,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the reference experiments and report the measured error.
    Oracle {
        #[arg(value_enum)]
        which: Oracle,
        /// Grid samples per axis (default: 256 circle, 1024 flat, 128 junction).
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Cap {
    Paper,
    Geometric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Circle,
    Flat,
    Junction,
}

enum Failure {
    Usage(String),
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn report(self) -> ExitCode {
        let (kind, code, msg) = match self {
            Failure::Usage(m) => ("usage", 1, m),
            Failure::Validation(m) => ("validation", 2, m),
            Failure::Runtime(m) => ("runtime", 3, m),
        };
        let one_line = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        eprintln!("error: {kind}: {one_line}");
        ExitCode::from(code)
    }
}

fn read_config(path: &PathBuf) -> Result<io::RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    io::parse_config(&text).map_err(|e| match e {
        ConfigError::Parse(p) => Failure::Validation(format!("{}: {p}", path.display())),
        ConfigError::Validation(v) => Failure::Validation(format!("{}: {v}", path.display())),
    })
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::BadShape(_) | ScenarioError::BadSetup(_) | ScenarioError::BadPartition(_) => {
            Failure::Validation(e.to_string())
        }
        _ => Failure::Runtime(e.to_string()),
    }
}

/// Writes to stdout, ignoring a closed pipe (e.g. `| head`).
fn say(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_pairs(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        say(&format!("{k} = {v}\n"));
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => {
            let cfg = read_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let summary = io::execute(&cfg, &dir).map_err(|e| match e {
                RunError::Validation(v) => Failure::Validation(v.to_string()),
                RunError::Scenario(s) => scenario_failure(s),
                RunError::Io(e) => Failure::Runtime(e.to_string()),
            })?;
            print_pairs(&summary.entries);
            print_pairs(&[
                ("output_dir".into(), dir.display().to_string()),
                ("files".into(), summary.files.len().to_string()),
            ]);
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = read_config(&config)?;
            print_pairs(&[
                ("ok".into(), config.display().to_string()),
                ("phases".into(), cfg.names.join(", ")),
                ("scenario".into(), cfg.scenario.name().into()),
                (
                    "steps".into(),
                    mobflow::solver::step_count(cfg.t_end, cfg.solver.dt).to_string(),
                ),
            ]);
            Ok(())
        }
        Command::Profile {
            a,
            b,
            r0,
            cap_model,
            samples,
            out,
        } => {
            let model = match cap_model {
                Cap::Paper => CapModel::PaperF,
                Cap::Geometric => CapModel::GeometricF,
            };
            let w = WireParams::new(a, b, r0)
                .map_err(|e| Failure::Validation(e.to_string()))?
                .with_cap_model(model);
            let p = integrate_profile(&w, samples).map_err(|e| Failure::Validation(e.to_string()))?;
            let comments = vec![
                format!("mobflow {}", env!("CARGO_PKG_VERSION")),
                format!("a = {}", format_real(a)),
                format!("b = {}", format_real(b)),
                format!("R0 = {}", format_real(r0)),
                format!("cap_model = {}", model.name()),
                format!("samples = {samples}"),
                format!("alpha_max = {}", format_real(p.alpha_max)),
                format!("alpha_stop = {}", format_real(p.alpha_stop)),
                format!("stationary = {}", p.stationary),
                "columns: alpha = droplet rotation (rad), r = wire radius, h = height".into(),
            ];
            let csv = io::profile_csv(&p, &comments);
            match out {
                Some(path) => {
                    std::fs::write(&path, csv).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?
                }
                None => say(&csv),
            }
            Ok(())
        }
        Command::Oracle { which, samples } => {
            let mut pairs = Vec::new();
            let mut kv = |k: &str, v: String| pairs.push((k.to_string(), v));
            match which {
                Oracle::Circle => {
                    let setup = CircleSetup::new(samples.unwrap_or(256));
                    let o = circle_oracle(&setup).map_err(scenario_failure)?;
                    kv("oracle", "circle".into());
                    kv("samples", setup.samples.to_string());
                    kv("slope", format_real(o.slope));
                    kv("expected_slope", format_real(o.expected_slope));
                    kv("relative_error", format_real(o.slope_error()));
                    kv("pass", (o.slope_error() <= 0.05).to_string());
                }
                Oracle::Flat => {
                    let k = samples.unwrap_or(1024);
                    let o = flat_oracle(k, 1.0 / 64.0, 1.0).map_err(scenario_failure)?;
                    kv("oracle", "flat".into());
                    kv("samples", k.to_string());
                    kv("energy", format_real(o.energy));
                    kv("expected", format_real(o.expected));
                    kv("relative_error", format_real(o.relative_error()));
                    kv("pass", (o.relative_error() <= 0.01).to_string());
                }
                Oracle::Junction => {
                    let setup = JunctionSetup::new(samples.unwrap_or(128));
                    let o = junction_oracle(&setup).map_err(scenario_failure)?;
                    kv("oracle", "junction".into());
                    kv("samples", setup.samples.to_string());
                    kv("junctions", o.junctions.len().to_string());
                    kv("max_error_deg", format_real(o.max_error().to_degrees()));
                    kv("pass", (o.max_error() <= 5f64.to_radians()).to_string());
                }
            }
            print_pairs(&pairs);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                say(&e.to_string());
                return ExitCode::SUCCESS;
            }
            // Keep clap's message, drop its usage block.
            let text = e.to_string();
            let reason: Vec<&str> = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            return Failure::Usage(reason.join(" ").trim_start_matches("error: ").to_string()).report();
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = mobflow::par::set_threads(n) {
                    return Failure::Runtime(e).report();
                }
            }
            _ => return Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")).report(),
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
