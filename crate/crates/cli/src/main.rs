//! `blendsim`: validate scenarios, run them, and run Monte Carlo bands.

use std::fs;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blendsim::engine::{run_scenario, Table};
use blendsim::scenario::{config_hash, ConfigError, RunMode, Scenario};
use blendsim::uncertainty::{run_mc, McSpec, GENERATOR};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

const PRESETS: &[(&str, &str, &str)] = &[
    (
        "paper-default",
        "replication mode, rescaled shares, 45V band not enforced",
        include_str!("../../../scenarios/paper-default.toml"),
    ),
    (
        "strict",
        "formula CIs, 45V band enforced, strict share budget",
        include_str!("../../../scenarios/strict.toml"),
    ),
    (
        "national-gasoline",
        "forecast-driven national demand from the bundled fixture",
        include_str!("../../../scenarios/national-gasoline.toml"),
    ),
];

#[derive(Parser)]
#[command(name = "blendsim", version, about = "Ethanol-blend decarbonization scenario engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one scenario and write its result tables.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Recorded in the manifest; a single run draws nothing.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo and write percentile-band tables.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Worker thread cap.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Bundled scenario presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Replication,
    StrictBand,
    FormulaCi,
}

impl From<Mode> for RunMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Replication => RunMode::Replication,
            Mode::StrictBand => RunMode::StrictBand,
            Mode::FormulaCi => RunMode::FormulaCi,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

struct Paint {
    on: bool,
}

impl Paint {
    fn detect() -> Self {
        Self {
            on: std::env::var_os("BLENDSIM_NO_COLOR").is_none() && std::io::stderr().is_terminal(),
        }
    }

    fn red(&self, s: &str) -> String {
        if self.on {
            format!("\x1b[31m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }

    fn green(&self, s: &str) -> String {
        if self.on {
            format!("\x1b[32m{s}\x1b[0m")
        } else {
            s.to_string()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let paint = Paint::detect();
    match dispatch(cli.command, &paint) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{} {msg}", paint.red("config error:"));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("{} {msg}", paint.red("error:"));
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command, paint: &Paint) -> Result<(), Failure> {
    match cmd {
        Command::Validate { config } => {
            let loaded = load(&config)?;
            loaded.scenario.check(Some(&loaded.text))?;
            println!("{}", paint.green("OK"));
            Ok(())
        }
        Command::Run {
            config,
            out,
            mode,
            seed,
        } => {
            let loaded = load(&config)?;
            let mut sc = loaded.scenario;
            apply_mode(&mut sc, mode);
            sc.check(Some(&loaded.text))?;
            let result = run_scenario(&sc).map_err(|e| Failure::Runtime(e.to_string()))?;
            prepare_out(&out)?;
            for t in &result.tables {
                write_table(&out, t)?;
            }
            let seed = seed.or(sc.mc.as_ref().map(|m| m.seed)).unwrap_or(0);
            let manifest = json!({
                "command": "run",
                "scenario": sc.name,
                "config_hash": config_hash(&loaded.text)?,
                "seed": seed,
                "mode": mode.map(|m| RunMode::from(m).as_str()),
                "modes": result.modes,
                "msw_potential_million_gallons": result.msw_potential,
                "rescaled_years": result.rescaled_years,
                "adoption": result.adoption,
                "units": units(&result.tables),
                "version": env!("CARGO_PKG_VERSION"),
                "generator": GENERATOR,
                "timestamp": chrono::Utc::now().to_rfc3339(),
            });
            write_manifest(&out, &manifest)?;
            println!("wrote {} tables to {}", result.tables.len(), out.display());
            Ok(())
        }
        Command::Mc {
            config,
            out,
            mode,
            seed,
            runs,
            jobs,
        } => {
            let loaded = load(&config)?;
            let mut sc = loaded.scenario;
            apply_mode(&mut sc, mode);
            sc.check(Some(&loaded.text))?;
            let mut spec: McSpec = sc.mc.clone().unwrap_or_default();
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(n) = runs {
                spec.n_runs = n;
            }
            if spec.n_runs == 0 {
                return Err(Failure::Config("--runs must be at least 1".into()));
            }
            if jobs == Some(0) {
                return Err(Failure::Config("--jobs must be at least 1".into()));
            }
            let result = run_mc(&sc, &spec, jobs).map_err(|e| Failure::Runtime(e.to_string()))?;
            prepare_out(&out)?;
            for t in &result.bands {
                write_table(&out, t)?;
            }
            let manifest = json!({
                "command": "mc",
                "scenario": sc.name,
                "config_hash": config_hash(&loaded.text)?,
                "seed": result.seed,
                "n_runs": result.n_runs,
                "percentiles": result.percentiles,
                "distributions": result.distributions,
                "mode": mode.map(|m| RunMode::from(m).as_str()),
                "modes": sc.mode_flags(),
                "units": units(&result.bands),
                "version": env!("CARGO_PKG_VERSION"),
                "generator": GENERATOR,
                "timestamp": chrono::Utc::now().to_rfc3339(),
            });
            write_manifest(&out, &manifest)?;
            println!("wrote {} band tables ({} runs) to {}", result.bands.len(), result.n_runs, out.display());
            Ok(())
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, about, _) in PRESETS {
                println!("{name:<20} {about}");
            }
            Ok(())
        }
    }
}

struct Loaded {
    scenario: Scenario,
    text: String,
}

/// The path itself, then with `.toml` appended, then a bundled preset named
/// by the file stem.
fn load(path: &Path) -> Result<Loaded, Failure> {
    let with_ext = PathBuf::from(format!("{}.toml", path.display()));
    for candidate in [path, with_ext.as_path()] {
        if candidate.is_file() {
            let text = fs::read_to_string(candidate).map_err(|source| ConfigError::Io {
                path: candidate.to_path_buf(),
                source,
            })?;
            let mut scenario = Scenario::from_toml_str(&text)?;
            scenario.base_dir = candidate.parent().map(Path::to_path_buf);
            return Ok(Loaded { scenario, text });
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    match PRESETS.iter().find(|(name, _, _)| *name == stem) {
        Some((_, _, text)) => Ok(Loaded {
            scenario: Scenario::from_toml_str(text)?,
            text: text.to_string(),
        }),
        None => Err(ConfigError::MissingFile(path.to_path_buf()).into()),
    }
}

fn apply_mode(sc: &mut Scenario, mode: Option<Mode>) {
    if let Some(m) = mode {
        sc.apply_mode(m.into());
    }
}

fn units(tables: &[Table]) -> serde_json::Value {
    tables
        .iter()
        .map(|t| (t.name.clone(), json!(t.units())))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_table(dir: &Path, t: &Table) -> Result<(), Failure> {
    let path = dir.join(format!("{}.csv", t.name));
    fs::write(&path, t.to_csv()).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_manifest(dir: &Path, manifest: &serde_json::Value) -> Result<(), Failure> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}
