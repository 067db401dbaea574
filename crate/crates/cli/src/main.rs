//! `dp-planner`: ingest cohorts, sweep ε, finalize releases, serve the API.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dp_planner::laplace::Sensitivity;
use dp_planner::plan::{render_table, sweep, OutputFormat, SweepSpec};
use dp_planner::query::{ingest_csv, Dataset, QuerySpec, Schema};
use dp_planner::release::BudgetMutation;
use dp_planner::rng::RandomSeed;
use dp_planner::synth::synthetic_cohort;
use dp_planner::SCHEMA_VERSION;
use dp_planner_service::{CreateSession, Store, StoreError};
use serde::{Deserialize, Serialize};

const DEFAULT_DATA_DIR: &str = ".dp-planner";

#[derive(Debug, Parser)]
#[command(name = "dp-planner", version, about = "Plan and release differentially private COUNT queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct DataDir {
    /// Store directory. DP_PLANNER_DATA_DIR takes precedence when set.
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    data: PathBuf,
}

impl DataDir {
    fn resolve(&self) -> PathBuf {
        match std::env::var_os("DP_PLANNER_DATA_DIR") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.data.clone(),
        }
    }

    fn open(&self) -> Result<Store, CliError> {
        Store::open(self.resolve()).map_err(CliError::from)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a CSV against a schema and add it to the store.
    Ingest {
        /// CSV file with a header row.
        csv: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Data source label shown in query metadata. Defaults to the file name.
        #[arg(long)]
        source: Option<String>,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Tabulate risk, error bound and CI widths over an ε grid.
    Plan {
        /// Dataset id from `ingest`.
        #[arg(long, conflicts_with = "csv", required_unless_present = "csv")]
        dataset: Option<String>,
        /// Plan directly against a CSV instead of a stored dataset.
        #[arg(long, requires = "schema")]
        csv: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// JSON array of query specs.
        #[arg(long)]
        queries: PathBuf,
        /// Comma-separated ε values in [0.001, 2].
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon_grid: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Create a session from a session file, apply its ε values and finalize.
    Release {
        /// JSON: {dataset_id, queries, total_budget, epsilons, seed?, mode?}.
        spec: PathBuf,
        /// Overrides the seed in the session file.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[command(flatten)]
        dir: DataDir,
    },
    /// Write a seeded synthetic patient cohort with its ground-truth counts.
    Generate {
        #[arg(long, default_value_t = 10_000)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for cohort.csv, schema.json and truth.json.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<dp_planner::Error> for CliError {
    fn from(e: dp_planner::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(_) | StoreError::Corrupt { .. } => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("payload types serialize")
}

fn ingest(csv: &Path, schema: &Path, source: Option<String>, dir: &DataDir) -> Result<(), CliError> {
    let bytes = read(csv)?;
    let schema_text = String::from_utf8(read(schema)?).map_err(|e| CliError::Data(e.to_string()))?;
    let source = source.unwrap_or_else(|| {
        csv.file_name()
            .map_or_else(|| csv.display().to_string(), |n| n.to_string_lossy().into_owned())
    });
    let record = dir.open()?.ingest(&bytes, &schema_text, &source)?;
    println!("dataset {}", record.id);
    println!("n = {}", record.n);
    for (name, col) in &record.schema.columns {
        let mut flags = Vec::new();
        if col.is_phi {
            flags.push("phi");
        }
        if col.is_identifier {
            flags.push("identifier");
        }
        println!("  {name}: {}{}", col.kind, if flags.is_empty() { String::new() } else { format!(" ({})", flags.join(", ")) });
    }
    Ok(())
}

#[derive(Serialize)]
struct PlanReport {
    schema_version: u32,
    dataset_n: u64,
    rows: Vec<dp_planner::plan::PlanRow>,
}

#[allow(clippy::too_many_arguments)]
fn plan(
    dataset: Option<String>,
    csv: Option<PathBuf>,
    schema: Option<PathBuf>,
    queries: &Path,
    grid: Vec<f64>,
    seed: u64,
    format: Format,
    dir: &DataDir,
) -> Result<(), CliError> {
    let spec = SweepSpec {
        grid,
        queries: read_json::<Vec<QuerySpec>>(queries)?,
        format: match format {
            Format::Table => OutputFormat::Table,
            Format::Json => OutputFormat::Json,
        },
    };
    spec.validate().map_err(|e| CliError::Usage(format!("--epsilon-grid: {e}")))?;
    let ds: Arc<Dataset> = match (dataset, csv, schema) {
        (Some(id), _, _) => dir.open()?.dataset(&id)?,
        (None, Some(csv), Some(schema)) => {
            let schema = Schema::from_json(&String::from_utf8_lossy(&read(&schema)?)).map_err(dp_planner::Error::from)?;
            Arc::new(ingest_csv(&read(&csv)?, &schema, &csv.display().to_string()).map_err(dp_planner::Error::from)?)
        }
        _ => return Err(CliError::Usage("pass --dataset or --csv with --schema".into())),
    };
    let rows = sweep(&ds, &spec, Sensitivity::COUNT, RandomSeed(seed))?;
    match spec.format {
        OutputFormat::Table => print!("{}", render_table(&rows)),
        OutputFormat::Json => println!(
            "{}",
            to_json(&PlanReport {
                schema_version: SCHEMA_VERSION,
                dataset_n: ds.len() as u64,
                rows,
            })
        ),
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ReleaseSpec {
    #[serde(flatten)]
    session: CreateSession,
    /// Query name → ε. Unlisted queries stay at the slider minimum.
    #[serde(default)]
    epsilons: BTreeMap<String, f64>,
}

fn release(spec_path: &Path, seed: Option<u64>, out: Option<PathBuf>, dir: &DataDir) -> Result<(), CliError> {
    let mut spec: ReleaseSpec = read_json(spec_path)?;
    if seed.is_some() {
        spec.session.seed = seed;
    }
    let store = dir.open()?;
    let view = store.create_session(spec.session)?;
    for (query, value) in spec.epsilons {
        let update = store.update_budget(&view.id, &BudgetMutation::SetEpsilon { query, value })?;
        if let Some(n) = update.notice {
            eprintln!("note: {} requested ε={} clamped to {}", n.query, n.requested, n.applied);
        }
    }
    let out_doc = store.finalize(&view.id)?;
    let text = to_json(&out_doc.document);
    eprintln!("session {}", view.id);
    match out {
        Some(path) => {
            write_out(&path, text.as_bytes())?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn serve(host: &str, port: u16, dir: &DataDir) -> Result<(), CliError> {
    let store = Arc::new(dir.open()?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::Internal(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        println!("listening on http://{addr}");
        std::io::stdout().flush().ok();
        dp_planner_service::serve(listener, store)
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}

fn generate(rows: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if rows == 0 {
        return Err(CliError::Usage("--rows must be at least 1".into()));
    }
    let cohort = synthetic_cohort(rows, RandomSeed(seed));
    fs::create_dir_all(out).map_err(|e| CliError::Internal(format!("{}: {e}", out.display())))?;
    write_out(&out.join("cohort.csv"), cohort.csv.as_bytes())?;
    write_out(&out.join("schema.json"), cohort.schema_json().as_bytes())?;
    write_out(&out.join("truth.json"), to_json(&cohort.truth).as_bytes())?;
    println!("wrote {rows} rows to {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { csv, schema, source, dir } => ingest(&csv, &schema, source, &dir),
        Command::Plan {
            dataset,
            csv,
            schema,
            queries,
            epsilon_grid,
            seed,
            format,
            dir,
        } => plan(dataset, csv, schema, &queries, epsilon_grid, seed, format, &dir),
        Command::Release { spec, seed, out, dir } => release(&spec, seed, out, &dir),
        Command::Serve { port, host, dir } => serve(&host, port, &dir),
        Command::Generate { rows, seed, out } => generate(rows, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
