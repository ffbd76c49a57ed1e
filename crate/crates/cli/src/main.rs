use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use photofeedback::analysis::calibrate::{calibrate, CalibrationSpec};
use photofeedback::analysis::{classify_response, compute_barrier, enumerate_states, spectrum, switching_threshold, Window};
use photofeedback::dynamics::chain::ChainConfig;
use photofeedback::dynamics::integrate::{integrate, Trace};
use photofeedback::dynamics::sweep;
use photofeedback::model::validate;
use photofeedback::scenarios::calibration::{run_shipped_calibration, SHIPPED_BUDGET};
use photofeedback::scenarios::overrides::split_assignment;
use photofeedback::scenarios::run::resolve_seed;
use photofeedback::scenarios::{list_scenarios, SEED_ENV, run_scenario_with, OutputFormat, RunOptions};
use photofeedback::{Error, ScenarioConfig};

const EXIT_PROPERTY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INVALID: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "photofeedback", version, about = "Photothermal soft actuator simulator")]
struct Cli {
    /// Random seed for gusts; overrides PHOTOFEEDBACK_SEED (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for traces, panels and summaries.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Format of trace and panel files.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a config and write its trace.
    Simulate { config: PathBuf },
    /// Steady-state continuation over fuel intensities.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value = "intensity")]
        param: String,
        /// Fuel intensities, mW/cm².
        #[arg(long, num_args = 2.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Energy barriers between the two stable states.
    Barrier {
        config: PathBuf,
        /// Fuel intensities, mW/cm².
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        intensity: Vec<f64>,
    },
    /// Spectrum of one column of a trace CSV.
    Spectrum {
        trace: PathBuf,
        #[arg(long, default_value = "d_m")]
        column: String,
        #[arg(long, default_value = "hann")]
        window: String,
    },
    /// Stable configurations of a multi-unit chain.
    Enumerate {
        chain: PathBuf,
        /// Fuel intensity, mW/cm²; defaults to the config's.
        #[arg(long)]
        intensity: Option<f64>,
    },
    /// Minimal switching trigger intensity.
    Threshold {
        config: PathBuf,
        #[arg(long)]
        fuel: f64,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 2000.0)]
        cap: f64,
    },
    /// Fit parameters to targets; `--shipped` reruns the in-repo calibration.
    Calibrate {
        #[arg(required_unless_present = "shipped")]
        spec: Option<PathBuf>,
        #[arg(long, conflicts_with = "spec")]
        shipped: bool,
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Run a registered scenario.
    Scenario {
        #[arg(required_unless_present = "all")]
        name: Option<String>,
        /// Dotted-path override, e.g. `material.heat_loss=2e-4`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Run every registered scenario.
        #[arg(long, conflicts_with = "name")]
        all: bool,
    },
    /// Print the scenario registry.
    List,
}

enum Failure {
    Error(Error),
    Properties,
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Error(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownScenario(_) | Error::InvalidOverride(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_INVALID,
    }
}

fn read_config(path: &Path) -> Result<ScenarioConfig, Error> {
    let cfg = ScenarioConfig::from_json(&std::fs::read_to_string(path)?)?;
    validate(&cfg)
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json serializes"));
}

/// Writes `value` as `<out>/<name>.json` when `--out` is set, else prints it.
fn emit(cli: &Cli, name: &str, value: Value) -> Result<(), Error> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&value)?)?;
        }
        None => print_json(&value),
    }
    Ok(())
}

fn write_trace(cli: &Cli, trace: &Trace) -> Result<(), Error> {
    let body = match cli.format {
        Format::Csv => trace.to_csv(),
        Format::Json => {
            let cols: serde_json::Map<String, Value> = trace.columns().into_iter().map(|(k, v)| (k, json!(v))).collect();
            serde_json::to_string(&cols)?
        }
    };
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let ext = if matches!(cli.format, Format::Csv) { "csv" } else { "json" };
            std::fs::write(dir.join(format!("trace.{ext}")), body)?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

/// `t_s` and `column` from a trace CSV.
fn read_columns(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let bad = |m: String| {
        Error::Validation(vec![photofeedback::FieldError {
            path: path.display().to_string(),
            message: m,
        }])
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (ti, xi) = (find("t_s")?, find(column)?);
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            record
                .get(i)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: not a number", row + 1)))
        };
        t.push(num(ti)?);
        x.push(num(xi)?);
    }
    Ok((t, x))
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::List => {
            for d in list_scenarios() {
                let ops: Vec<&str> = d.pipeline.iter().map(|p| p.name()).collect();
                println!("{:<18} {:<24} {}", d.name, ops.join(","), d.description);
            }
        }
        Command::Simulate { config } => {
            let mut cfg = read_config(config)?;
            if cli.seed.is_some() || std::env::var_os(SEED_ENV).is_some() {
                cfg.seed = resolve_seed(cli.seed)?;
            }
            write_trace(cli, &integrate(&cfg, None)?)?;
        }
        Command::Sweep { config, param, values } => {
            if param != "intensity" {
                return Err(Error::InvalidOverride(format!("--param {param}: only `intensity` is supported")).into());
            }
            let cfg = read_config(config)?;
            let curve = sweep(&cfg, values)?;
            let class = classify_response(&curve.intensity, &curve.delta_alpha).ok();
            emit(cli, "sweep", json!({"curve": curve, "classification": class}))?;
        }
        Command::Barrier { config, intensity } => {
            let cfg = read_config(config)?;
            let results = intensity
                .iter()
                .map(|i| compute_barrier(&cfg, *i))
                .collect::<Result<Vec<_>, _>>()?;
            emit(cli, "barrier", json!(results))?;
        }
        Command::Spectrum { trace, column, window } => {
            let window = match window.as_str() {
                "hann" => Window::Hann,
                "none" | "rectangular" => Window::None,
                other => return Err(Error::InvalidOverride(format!("--window {other}")).into()),
            };
            let (t, x) = read_columns(trace, column)?;
            let s = spectrum(&t, &x, window)?;
            emit(cli, "spectrum", json!(s))?;
        }
        Command::Enumerate { chain, intensity } => {
            let chain = ChainConfig::from_json(&std::fs::read_to_string(chain)?)?;
            chain.system()?;
            let fuel = intensity.unwrap_or_else(|| {
                chain
                    .units
                    .iter()
                    .map(|u| u.fuel_intensity_mw_cm2())
                    .chain(chain.shared_lights.iter().map(|l| l.intensity_mw_cm2))
                    .fold(0.0, f64::max)
            });
            emit(cli, "enumerate", json!(enumerate_states(&chain, fuel)?))?;
        }
        Command::Threshold {
            config,
            fuel,
            duration,
            cap,
        } => {
            let cfg = read_config(config)?;
            emit(cli, "threshold", json!(switching_threshold(&cfg, *fuel, *duration, *cap)?))?;
        }
        Command::Calibrate { spec, shipped, max_evals } => {
            if *shipped {
                let r = run_shipped_calibration(max_evals.unwrap_or(SHIPPED_BUDGET))?;
                match &cli.out {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        std::fs::write(dir.join("calibrated.json"), serde_json::to_string_pretty(&r)?)?;
                    }
                    None => print_json(&json!(r)),
                }
            } else {
                let path = spec.as_ref().expect("clap requires spec");
                let spec: CalibrationSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                let r = calibrate(&spec.free, &spec.targets, max_evals.unwrap_or(spec.max_evaluations))?;
                emit(cli, "calibration", json!(r))?;
            }
        }
        Command::Scenario { name, set, all } => {
            let overrides = set
                .iter()
                .map(|s| split_assignment(s))
                .collect::<Result<Vec<_>, _>>()?;
            let options = RunOptions {
                seed: cli.seed,
                format: cli.format.into(),
            };
            let names: Vec<String> = if *all {
                list_scenarios().into_iter().map(|d| d.name).collect()
            } else {
                vec![name.clone().expect("clap requires name")]
            };
            let mut ok = true;
            for n in &names {
                let summary = run_scenario_with(n, &overrides, cli.out.as_deref(), &options)?;
                if cli.out.is_none() || !*all {
                    print_json(&json!(summary));
                }
                for p in summary.properties.iter().filter(|p| !p.passed) {
                    eprintln!("{n}: property failed: {} (observed {})", p.metric, p.observed);
                }
                if *all {
                    eprintln!("{n}: {}", if summary.passed { "pass" } else { "FAIL" });
                }
                ok &= summary.passed;
            }
            if !ok {
                return Err(Failure::Properties);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Properties) => ExitCode::from(EXIT_PROPERTY),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
