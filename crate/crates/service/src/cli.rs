//! The `fts` command line: `generate`, `run` and `serve`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad or missing flags) |
//! | 3 | invalid weights |
//! | 4 | cohort error (missing column, duplicate id, ...) |
//! | 5 | invalid synthetic spec |
//! | 6 | file system error |
//! | 7 | simulation failed |
//! | 8 | port already in use |
//! | 9 | invalid config, policy or train file |

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fts_core::cohort::{generate_synthetic_cohort, load_cohort, CohortError, SyntheticSpec, TestDirectionConfig};
use fts_core::engine::{run_simulation_with, EngineError, RunOptions, SimulationResult};
use fts_core::kv::parse_kv;
use fts_core::svm::TrainConfig;
use fts_core::target::TargetError;
use fts_core::{Attribute, LabelingPolicy, Rate, SessionConfig, WeightVector};
use serde_json::json;

use crate::api::{router, AppState, ServiceConfig};
use crate::catalog::Catalog;

pub const LOG_ENV: &str = "FTS_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "fts", version, about = "Target-variable simulator for algorithmic hiring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort file.
    Generate(GenerateArgs),
    /// Run an A/B simulation and write the result document.
    Run(RunArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of candidates; overrides the spec file.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Synthetic spec as JSON; the built-in default when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat key=value file with any of the keys below; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Test orientation file (test_name=higher|lower).
    #[arg(long)]
    pub directions: Option<PathBuf>,
    /// Five comma-separated weights in trait order: memory,
    /// information_processing_speed, reasoning, attention, behavioral_restraint.
    #[arg(long, allow_hyphen_values = true)]
    pub weights_a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub weights_b: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub policy_file: Option<PathBuf>,
    #[arg(long)]
    pub train_file: Option<PathBuf>,
    /// Run the A and B pipelines one after the other.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Extra cohort files to preload, named by file stem.
    #[arg(long)]
    pub cohort: Vec<PathBuf>,
    /// Simulation worker count; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seconds an idle session is kept.
    #[arg(long, default_value_t = 3600)]
    pub session_ttl: u64,
    /// Seconds to wait for running sessions on shutdown.
    #[arg(long, default_value_t = 30)]
    pub shutdown_grace: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{flag}: {source}")]
    InvalidWeights {
        flag: &'static str,
        #[source]
        source: TargetError,
    },
    #[error(transparent)]
    Cohort(CohortError),
    #[error("{0}")]
    InvalidSpec(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot bind {addr}: address already in use")]
    PortInUse { addr: String },
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::InvalidWeights { .. } => 3,
            CliError::Cohort(_) => 4,
            CliError::InvalidSpec(_) => 5,
            CliError::Io { .. } => 6,
            CliError::Engine(_) => 7,
            CliError::PortInUse { .. } => 8,
            CliError::Config(_) => 9,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::InvalidWeights { .. } => "InvalidWeights",
            CliError::Cohort(_) => "CohortError",
            CliError::InvalidSpec(_) => "InvalidSpec",
            CliError::Io { .. } => "IoError",
            CliError::Engine(_) => "EngineError",
            CliError::PortInUse { .. } => "PortInUse",
            CliError::Config(_) => "ConfigError",
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        match e {
            CohortError::InvalidSpec(m) => CliError::InvalidSpec(m),
            CohortError::Io { path, message } => CliError::Io { path, message },
            other => CliError::Cohort(other),
        }
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let report = json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() } });
            eprintln!("{report}");
            e.exit_code()
        }
    }
}

fn init_logging() {
    let level = std::env::var(LOG_ENV).unwrap_or_else(|_| "info".into());
    let filter = tracing_subscriber::EnvFilter::try_new(&level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(args) => generate(&args),
        Command::Run(args) => {
            let settings = RunSettings::resolve(args)?;
            let result = run(&settings)?;
            print!("{}", summary_table(&result));
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<SyntheticSpec>(&text)
                .map_err(|e| CliError::InvalidSpec(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(size) = args.size {
        spec.size = size;
    }
    let cohort = generate_synthetic_cohort(&spec, args.seed)?;
    cohort.write_csv(&args.out)?;
    tracing::info!(size = cohort.len(), path = %args.out.display(), "cohort written");
    Ok(())
}

/// Effective `run` settings after merging the config file and flags.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub cohort: PathBuf,
    pub directions: Option<PathBuf>,
    pub out: PathBuf,
    pub config: SessionConfig,
    pub sequential: bool,
}

const RUN_KEYS: [&str; 8] = [
    "cohort",
    "directions",
    "weights_a",
    "weights_b",
    "seed",
    "out",
    "policy_file",
    "train_file",
];

fn read_kv(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_kv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_value<T: std::str::FromStr>(file: &Path, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {key}={value:?}: {e}", file.display())))
}

/// Reads a labeling policy override file; absent keys keep their defaults.
pub fn load_policy(path: &Path) -> Result<LabelingPolicy, CliError> {
    let mut policy = LabelingPolicy::default();
    for (key, value) in read_kv(path)? {
        match key.as_str() {
            "percentile_cut" => policy.percentile_cut = parse_value(path, &key, &value)?,
            "positive_count" => policy.positive_count = parse_value(path, &key, &value)?,
            "weight_high" => policy.weight_high = parse_value(path, &key, &value)?,
            "weight_low" => policy.weight_low = parse_value(path, &key, &value)?,
            "weight_span" => policy.weight_span = parse_value(path, &key, &value)?,
            _ => return Err(CliError::Config(format!("{}: unknown policy key {key:?}", path.display()))),
        }
    }
    policy
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(policy)
}

/// Reads a training override file; absent keys keep their defaults. The
/// split seed always comes from the master seed and cannot be set here.
pub fn load_train(path: &Path) -> Result<TrainConfig, CliError> {
    let mut train = TrainConfig::default();
    for (key, value) in read_kv(path)? {
        match key.as_str() {
            "c" => train.c = parse_value(path, &key, &value)?,
            "class_balance" => train.class_balance = parse_value(path, &key, &value)?,
            "tolerance" => train.tolerance = parse_value(path, &key, &value)?,
            "max_iterations" => train.max_iterations = parse_value(path, &key, &value)?,
            "split_fraction" => train.split_fraction = parse_value(path, &key, &value)?,
            _ => return Err(CliError::Config(format!("{}: unknown train key {key:?}", path.display()))),
        }
    }
    train
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(train)
}

impl RunSettings {
    pub fn resolve(args: RunArgs) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        let mut base = PathBuf::new();
        if let Some(path) = &args.config {
            file = read_kv(path)?;
            if let Some(key) = file.keys().find(|k| !RUN_KEYS.contains(&k.as_str())) {
                return Err(CliError::Config(format!("{}: unknown key {key:?}", path.display())));
            }
            base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        }
        // paths in the config file are relative to the file itself
        let file_path = |key: &str| file.get(key).map(|v| base.join(v));
        let missing = |what: &str| CliError::Usage(format!("missing --{what} (or `{}` in --config)", what.replace('-', "_")));

        let cohort = args.cohort.or_else(|| file_path("cohort")).ok_or_else(|| missing("cohort"))?;
        let out = args.out.or_else(|| file_path("out")).ok_or_else(|| missing("out"))?;
        let directions = args.directions.or_else(|| file_path("directions"));
        let weights = |flag: &'static str, given: Option<String>, key: &str| -> Result<WeightVector, CliError> {
            let text = given.or_else(|| file.get(key).cloned()).ok_or_else(|| missing(flag))?;
            text.parse().map_err(|source| CliError::InvalidWeights { flag, source })
        };
        let weights_a = weights("weights-a", args.weights_a, "weights_a")?;
        let weights_b = weights("weights-b", args.weights_b, "weights_b")?;
        let seed = match (args.seed, file.get("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => parse_value(args.config.as_deref().unwrap_or(Path::new("config")), "seed", v)?,
            (None, None) => 0,
        };
        let policy = match args.policy_file.or_else(|| file_path("policy_file")) {
            Some(p) => load_policy(&p)?,
            None => LabelingPolicy::default(),
        };
        let train = match args.train_file.or_else(|| file_path("train_file")) {
            Some(p) => load_train(&p)?,
            None => TrainConfig::default(),
        };
        Ok(RunSettings {
            cohort,
            directions,
            out,
            config: SessionConfig {
                weights_a,
                weights_b,
                policy,
                train,
                master_seed: seed,
            },
            sequential: args.sequential,
        })
    }
}

/// Loads the cohort, runs the simulation and writes the result document.
pub fn run(settings: &RunSettings) -> Result<SimulationResult, CliError> {
    let directions = match &settings.directions {
        Some(path) => TestDirectionConfig::load(path)?,
        None => TestDirectionConfig::default(),
    };
    let cohort = load_cohort(&settings.cohort, &directions)?;
    tracing::info!(candidates = cohort.len(), path = %settings.cohort.display(), "cohort loaded");
    let progress = |model: Option<fts_core::engine::Variant>, stage| match model {
        Some(m) => tracing::info!("model {m}: {stage}"),
        None => tracing::info!("{stage}"),
    };
    let options = RunOptions {
        concurrent: !settings.sequential,
        progress: Some(&progress),
    };
    let result = run_simulation_with(&cohort, &settings.config, options)?;
    for warning in &result.warnings {
        tracing::warn!("{warning}");
    }
    write_atomically(&settings.out, result.to_json().as_bytes())?;
    tracing::info!(path = %settings.out.display(), "result written");
    Ok(result)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn cell(rate: Rate) -> String {
    let s = format!("{rate:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Per-group selection rates for both models and their difference.
pub fn summary_table(result: &SimulationResult) -> String {
    let report = &result.report;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<24} {:>7} {:>7} {:>7}\n",
        "attribute", "group", "A", "B", "delta"
    ));
    out.push_str(&format!(
        "{:<16} {:<24} {:>7} {:>7} {:>7}\n",
        "accuracy",
        "(held-out)",
        cell(report.model_a.accuracy),
        cell(report.model_b.accuracy),
        cell(report.deltas.accuracy)
    ));
    for attribute in Attribute::ALL {
        for delta in &report.deltas.groups[&attribute] {
            let rate = |m: &fts_core::metrics::ModelReport| {
                m.selection[&attribute]
                    .iter()
                    .find(|g| g.group == delta.group)
                    .map(|g| g.selection_rate)
                    .unwrap_or(Rate::UNDEFINED)
            };
            out.push_str(&format!(
                "{:<16} {:<24} {:>7} {:>7} {:>7}\n",
                attribute.name(),
                delta.group,
                cell(rate(&report.model_a)),
                cell(rate(&report.model_b)),
                cell(delta.selection_rate)
            ));
        }
    }
    out
}

pub fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut catalog = Catalog::builtin();
    for path in &args.cohort {
        let name = catalog.load_file(path, &TestDirectionConfig::default())?;
        tracing::info!(cohort = %name, "cohort preloaded");
    }
    let mut config = ServiceConfig {
        session_ttl: Duration::from_secs(args.session_ttl),
        ..ServiceConfig::default()
    };
    if let Some(w) = args.workers {
        config.workers = w.max(1);
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Config(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                CliError::PortInUse { addr: addr.clone() }
            } else {
                CliError::io(Path::new(&addr), e)
            }
        })?;
        let bound: SocketAddr = listener.local_addr().map_err(|e| CliError::io(Path::new(&addr), e))?;
        let state = AppState::new(catalog, &config);
        state.spawn_sweeper();
        tracing::info!("listening on http://{bound}");
        axum::serve(listener, router(state.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(|e| CliError::io(Path::new(&addr), e))?;
        tracing::info!("shutting down; waiting for running sessions");
        if !state.drain(Duration::from_secs(args.shutdown_grace)).await {
            tracing::warn!("grace period over with sessions still running");
        }
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let errors = [
            CliError::Usage(String::new()),
            CliError::InvalidWeights {
                flag: "weights-a",
                source: TargetError::ZeroWeightVector,
            },
            CliError::Cohort(CohortError::EmptyCohort),
            CliError::InvalidSpec(String::new()),
            CliError::Io {
                path: String::new(),
                message: String::new(),
            },
            CliError::PortInUse { addr: String::new() },
            CliError::Config(String::new()),
        ];
        let mut codes: Vec<i32> = errors.iter().map(CliError::exit_code).collect();
        codes.push(7);
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 8);
        assert!(!codes.contains(&0));
    }

    #[test]
    fn cohort_io_and_spec_errors_get_their_own_codes() {
        assert_eq!(CliError::from(CohortError::InvalidSpec("x".into())).exit_code(), 5);
        let io = CohortError::Io {
            path: "p".into(),
            message: "m".into(),
        };
        assert_eq!(CliError::from(io).exit_code(), 6);
        assert_eq!(CliError::from(CohortError::MissingColumn("go_no_go".into())).exit_code(), 4);
    }

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.conf");
        std::fs::write(
            &config,
            "cohort = cohort.csv\nweights_a = 1,1,1,1,1\nweights_b = 0,0,1,0,0\nseed = 5\nout = result.json\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(config.clone()),
            seed: Some(9),
            weights_b: Some("0,0,0,1,0".into()),
            ..RunArgs::default()
        };
        let s = RunSettings::resolve(args).unwrap();
        assert_eq!(s.cohort, dir.path().join("cohort.csv"));
        assert_eq!(s.out, dir.path().join("result.json"));
        assert_eq!(s.config.master_seed, 9);
        assert_eq!(s.config.weights_a, WeightVector::equal());
        assert_eq!(s.config.weights_b, WeightVector::only(fts_core::Trait::Attention));
    }

    #[test]
    fn config_file_problems_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("run.conf");
        std::fs::write(&config, "colour = blue\n").unwrap();
        let args = RunArgs {
            config: Some(config),
            ..RunArgs::default()
        };
        assert_eq!(RunSettings::resolve(args).unwrap_err().exit_code(), 9);

        let policy = dir.path().join("policy.kv");
        std::fs::write(&policy, "percentile_cut = 1.5\n").unwrap();
        assert_eq!(load_policy(&policy).unwrap_err().exit_code(), 9);
        std::fs::write(&policy, "positive_count = 40\n").unwrap();
        assert_eq!(load_policy(&policy).unwrap().positive_count, 40);

        let train = dir.path().join("train.kv");
        std::fs::write(&train, "split_seed = 3\n").unwrap();
        assert_eq!(load_train(&train).unwrap_err().exit_code(), 9);
        std::fs::write(&train, "c = 2.5\nclass_balance = false\n").unwrap();
        let t = load_train(&train).unwrap();
        assert_eq!((t.c, t.class_balance), (2.5, false));
    }

    #[test]
    fn missing_required_settings_are_usage_errors() {
        let args = RunArgs {
            weights_a: Some("1,1,1,1,1".into()),
            ..RunArgs::default()
        };
        let e = RunSettings::resolve(args).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--cohort"));
    }

    #[test]
    fn zero_weights_are_rejected_with_their_code() {
        let args = RunArgs {
            cohort: Some("c.csv".into()),
            out: Some("o.json".into()),
            weights_a: Some("0,0,0,0,0".into()),
            weights_b: Some("1,1,1,1,1".into()),
            ..RunArgs::default()
        };
        let e = RunSettings::resolve(args).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().starts_with("weights-a"));
    }
}
