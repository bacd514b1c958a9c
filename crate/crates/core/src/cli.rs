//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error (including missing files),
//! 2 authentication failure, 3 transport failure, 4 at least one file failed
//! to revise.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analyzer::{AnalysisProvider, AnalyzerError, MockAnalyzer, SonarAnalyzer};
use crate::config::CliConfig;
use crate::diff::{diff_texts, render_html, render_terminal, DiffOptions};
use crate::issues::{read_csv, write_csv, IssueRecord, IssueType};
use crate::orchestrator::{
    ledger_path, manifest_path, rescan_resolution, revised_root_path, Manifest, Orchestrator, OrchestratorError,
    RevisionStatus, RunOutput,
};
use crate::report::{emit_report, CostLedger, ReportFormat, Strategy};
use crate::sonar::{FetchError, ServerConfig, SonarClient};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_AUTH: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;
pub const EXIT_FAILED_FILES: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "wall", version, about = "Static-analysis issue extraction and LLM-driven revision")]
pub struct Cli {
    /// Optional TOML config file.
    #[arg(long, global = true, env = "WALL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Serve completions from a mock fixture (overrides the config file).
    #[arg(long, global = true)]
    pub mock_provider: Option<PathBuf>,
    /// Concurrent file revisions.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fetch open issues from the analysis server into a CSV file.
    Extract(ExtractArgs),
    /// Revise every file listed in an issues CSV with one model.
    ReviseAll(ReviseAllArgs),
    /// Cheap model first, rescan, advanced model on what is left.
    Hybrid(HybridArgs),
    /// Line diff and precision/recall/F1 between two files.
    Compare(CompareArgs),
    /// Render one or more cost ledgers as a comparison table.
    Report(ReportArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Run a local stand-in for the analysis server's issue search API.
    MockServer(MockServerArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub server_url: String,
    /// Environment variable holding the API token.
    #[arg(long, default_value = "SONAR_TOKEN")]
    pub token_env: String,
    #[arg(long)]
    pub project_key: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub page_size: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OutFormat {
    Text,
    Structured,
    Html,
}

impl From<OutFormat> for ReportFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Text => ReportFormat::Text,
            OutFormat::Structured => ReportFormat::StructuredRows,
            OutFormat::Html => ReportFormat::Html,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LedgerStrategy {
    CheapOnly,
    AdvancedOnly,
}

#[derive(Debug, Args)]
pub struct AnalyzerArgs {
    /// `mock:FIXTURE.toml` or `sonar:URL`.
    #[arg(long)]
    pub analyzer: Option<String>,
    /// Project key for a `sonar:` analyzer.
    #[arg(long)]
    pub project_key: Option<String>,
    #[arg(long, default_value = "SONAR_TOKEN")]
    pub token_env: String,
}

#[derive(Debug, Args)]
pub struct ReviseAllArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub model: String,
    /// Output directory; defaults to `<root>.Revised` beside the root.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ledger column the run is recorded under.
    #[arg(long, value_enum, default_value = "cheap-only")]
    pub strategy: LedgerStrategy,
    #[command(flatten)]
    pub analyzer: AnalyzerArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutFormat,
}

#[derive(Debug, Args)]
pub struct HybridArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub cheap: String,
    #[arg(long)]
    pub advanced: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub analyzer: AnalyzerArgs,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CompareFormat {
    Tty,
    Html,
    Structured,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub revised: PathBuf,
    #[arg(long, value_enum, default_value = "tty")]
    pub format: CompareFormat,
    /// ANSI colors in tty output.
    #[arg(long)]
    pub color: bool,
    #[arg(long)]
    pub ignore_trailing_whitespace: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Ledger file; repeat to merge several.
    #[arg(long, required = true)]
    pub ledger: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: OutFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Project root used when an upload does not name one.
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Directory of static UI files served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockServerArgs {
    /// JSON fixture: `{"project_key", "token", "issues": [...]}`.
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long, default_value_t = 9000)]
    pub port: u16,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match &e {
            OrchestratorError::Analyzer(a) => analyzer_error(a),
            _ => CliError::input(e.to_string()),
        }
    }
}

fn analyzer_error(e: &AnalyzerError) -> CliError {
    match e {
        AnalyzerError::Fetch(f) => fetch_error(f),
        AnalyzerError::AnalyzerUnavailable(_) => CliError::new(EXIT_TRANSPORT, e.to_string()),
        _ => CliError::input(e.to_string()),
    }
}

fn fetch_error(e: &FetchError) -> CliError {
    let code = match e {
        FetchError::AuthError(_) => EXIT_AUTH,
        FetchError::ProjectNotFound(_) => EXIT_INPUT,
        FetchError::TransportError(_) | FetchError::SchemaError(_) => EXIT_TRANSPORT,
    };
    CliError::new(code, e.to_string())
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    init_tracing(cli.verbose);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match rt.block_on(run(cli, &mut out)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn init_tracing(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("WALL_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn load_config(cli: &Cli) -> Result<CliConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => CliConfig::load(p).map_err(|e| CliError::input(e.to_string()))?,
        None => CliConfig::default(),
    };
    if let Some(m) = &cli.mock_provider {
        cfg.mock_provider = Some(m.clone());
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(cfg)
}

/// Runs a parsed command, writing machine output to `out`.
pub async fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Extract(a) => extract(a, out).await,
        Command::ReviseAll(a) => {
            let orch = load_config(&cli)?.orchestrator().map_err(|e| CliError::input(e.to_string()))?;
            revise_all(&orch, a, out).await
        }
        Command::Hybrid(a) => {
            let orch = load_config(&cli)?.orchestrator().map_err(|e| CliError::input(e.to_string()))?;
            hybrid(&orch, a, out).await
        }
        Command::Compare(a) => compare(a, out),
        Command::Report(a) => report(a, out),
        Command::Serve(a) => {
            let orch = load_config(&cli)?.orchestrator().map_err(|e| CliError::input(e.to_string()))?;
            let state = crate::service::AppState::new(Arc::new(orch), a.root.clone());
            let addr: SocketAddr = format!("{}:{}", a.host, a.port)
                .parse()
                .map_err(|e| CliError::input(format!("bad listen address: {e}")))?;
            crate::service::serve(state, a.static_dir.as_deref(), addr)
                .await
                .map_err(|e| CliError::new(EXIT_TRANSPORT, e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::MockServer(a) => {
            let text = read_file(&a.fixture)?;
            let project: crate::sonar::mock::MockProject =
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", a.fixture.display())))?;
            let addr: SocketAddr = ([127, 0, 0, 1], a.port).into();
            let server = crate::sonar::mock::MockSonarServer::bind(project, addr)
                .await
                .map_err(|e| CliError::new(EXIT_TRANSPORT, e.to_string()))?;
            eprintln!("mock analysis server on {}", server.url());
            server.join().await;
            Ok(EXIT_OK)
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::input(format!("cannot write output: {e}")))
}

fn print_counts(issues: &[IssueRecord]) {
    for (ty, n) in crate::sonar::count_by_type(issues) {
        eprintln!("{ty}: {n}");
    }
}

async fn extract(a: &ExtractArgs, _out: &mut dyn Write) -> Result<i32, CliError> {
    let token = std::env::var(&a.token_env)
        .map_err(|_| CliError::new(EXIT_AUTH, format!("environment variable {} is not set", a.token_env)))?;
    let config = ServerConfig::new(&a.server_url, token, &a.project_key).map_err(|e| CliError::input(e.to_string()))?;
    let client = SonarClient::new(config).map_err(|e| fetch_error(&e))?;
    let extraction = client.fetch_issues(a.page_size).await.map_err(|e| fetch_error(&e))?;
    let file = std::fs::File::create(&a.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", a.out.display())))?;
    write_csv(&extraction.issues, std::io::BufWriter::new(file)).map_err(|e| CliError::input(e.to_string()))?;
    print_counts(&extraction.issues);
    if extraction.skipped_unknown_type > 0 {
        eprintln!("skipped {} issue(s) of other types", extraction.skipped_unknown_type);
    }
    eprintln!("wrote {} issue(s) to {}", extraction.issues.len(), a.out.display());
    Ok(EXIT_OK)
}

fn load_issues(csv: &Path, root: &Path) -> Result<Vec<IssueRecord>, CliError> {
    let file = std::fs::File::open(csv).map_err(|e| CliError::input(format!("cannot read {}: {e}", csv.display())))?;
    let issues = read_csv(file).map_err(|e| CliError::input(format!("{}: {e}", csv.display())))?;
    if !root.is_dir() {
        return Err(CliError::input(format!("project root {} is not a directory", root.display())));
    }
    Ok(issues)
}

fn build_analyzer(a: &AnalyzerArgs) -> Result<Option<Box<dyn AnalysisProvider>>, CliError> {
    let Some(spec) = &a.analyzer else {
        return Ok(None);
    };
    if let Some(path) = spec.strip_prefix("mock:") {
        let m = MockAnalyzer::load(Path::new(path)).map_err(|e| CliError::input(e.to_string()))?;
        return Ok(Some(Box::new(m)));
    }
    if let Some(url) = spec.strip_prefix("sonar:") {
        let key = a
            .project_key
            .as_deref()
            .ok_or_else(|| CliError::input("--project-key is required with a sonar: analyzer"))?;
        let token = std::env::var(&a.token_env)
            .map_err(|_| CliError::new(EXIT_AUTH, format!("environment variable {} is not set", a.token_env)))?;
        let cfg = ServerConfig::new(url, token, key).map_err(|e| CliError::input(e.to_string()))?;
        return Ok(Some(Box::new(SonarAnalyzer::new(cfg).with_wait(Duration::from_secs(600)))));
    }
    Err(CliError::input(format!("analyzer must be `mock:FILE` or `sonar:URL`, got `{spec}`")))
}

fn output_root(root: &Path, out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    match out {
        Some(o) => Ok(o.clone()),
        None => revised_root_path(root).map_err(CliError::from),
    }
}

fn run_summary(label: &str, run: &RunOutput) {
    eprintln!(
        "{label} [{}]: revised {}/{} files ({} unchanged, {} failed, {} missing), cost ${}",
        run.model_id,
        run.count(RevisionStatus::Revised),
        run.results.len() + run.missing.len(),
        run.count(RevisionStatus::Unchanged),
        run.count(RevisionStatus::Failed),
        run.missing.len(),
        crate::report::format_usd(run.total_cost()).trim_start_matches('$'),
    );
    for r in run.results.iter().filter(|r| r.status == RevisionStatus::Failed) {
        eprintln!("  failed: {}: {}", r.file_location, r.diagnostic.as_deref().unwrap_or(""));
    }
    for m in &run.missing {
        eprintln!("  missing: {}: {}", m.file_location, m.reason);
    }
}

fn write_artifacts(out_root: &Path, manifest: &Manifest, ledger: &CostLedger) -> Result<(), CliError> {
    if let Some(parent) = out_root.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::input(e.to_string()))?;
        }
    }
    manifest.write(&manifest_path(out_root))?;
    let lp = ledger_path(out_root);
    std::fs::write(&lp, ledger.to_file_string())
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", lp.display())))?;
    Ok(())
}

fn exit_for(runs: &[&RunOutput]) -> i32 {
    if runs.iter().any(|r| r.any_failed()) {
        EXIT_FAILED_FILES
    } else {
        EXIT_OK
    }
}

async fn revise_all(orch: &Orchestrator, a: &ReviseAllArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let issues = load_issues(&a.csv, &a.root)?;
    if issues.is_empty() {
        eprintln!("nothing to do");
        return Ok(EXIT_OK);
    }
    let analyzer = build_analyzer(&a.analyzer)?;
    let out_root = output_root(&a.root, &a.out)?;
    let run = orch.revise_all(&issues, &a.root, &out_root, &a.model).await?;
    run_summary("revise-all", &run);

    let missing: Vec<&str> = run.missing.iter().map(|m| m.file_location.as_str()).collect();
    let baseline: Vec<IssueRecord> = issues
        .iter()
        .filter(|i| !missing.contains(&i.file_location.as_str()))
        .cloned()
        .collect();
    let resolved: Vec<IssueRecord> = match &analyzer {
        Some(an) => rescan_resolution(&baseline, &a.root, &run, an.as_ref()).await?.0,
        // Without a rescan, issues in files that came back changed count as revised.
        None => run
            .results
            .iter()
            .filter(|r| r.status == RevisionStatus::Revised)
            .flat_map(|r| r.issues_targeted.iter().cloned())
            .collect(),
    };
    let mut ledger = CostLedger::new();
    let strategy = match a.strategy {
        LedgerStrategy::CheapOnly => {
            ledger.cheap_model = Some(a.model.clone());
            Strategy::CheapOnly
        }
        LedgerStrategy::AdvancedOnly => {
            ledger.advanced_model = Some(a.model.clone());
            Strategy::AdvancedOnly
        }
    };
    let costs = crate::orchestrator::cost_by_type(&run.results);
    for ty in IssueType::ALL {
        let total = baseline.iter().filter(|i| i.issue_type == ty).count() as u64;
        if total == 0 {
            continue;
        }
        let done = resolved.iter().filter(|i| i.issue_type == ty).count() as u64;
        ledger.record(ty, strategy, total, done, costs.get(&ty).copied().unwrap_or_default());
    }
    let mut manifest = Manifest::new(&a.root, &out_root);
    manifest.push("revise", &run);
    write_artifacts(&out_root, &manifest, &ledger)?;
    let table = emit_report(&ledger, a.format.into()).map_err(|e| CliError::input(e.to_string()))?;
    write_out(out, &table)?;
    Ok(exit_for(&[&run]))
}

async fn hybrid(orch: &Orchestrator, a: &HybridArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let issues = load_issues(&a.csv, &a.root)?;
    if issues.is_empty() {
        eprintln!("nothing to do");
        return Ok(EXIT_OK);
    }
    let analyzer = build_analyzer(&a.analyzer)?
        .ok_or_else(|| CliError::input("hybrid needs --analyzer mock:FILE or sonar:URL"))?;
    let out_root = output_root(&a.root, &a.out)?;
    let h = orch
        .hybrid_pipeline(&issues, &a.root, &out_root, &a.cheap, &a.advanced, analyzer.as_ref())
        .await?;
    run_summary("stage 1", &h.stage1);
    run_summary("stage 2", &h.stage2);
    for (ty, t) in &h.per_type {
        eprintln!(
            "{ty}: total {} resolved by {} {} resolved by {} {} unresolved {}",
            t.total, a.cheap, t.resolved_stage1, a.advanced, t.resolved_stage2, t.unresolved
        );
    }
    let mut manifest = Manifest::new(&a.root, &out_root);
    manifest.push("cheap", &h.stage1);
    manifest.push("advanced", &h.stage2);
    write_artifacts(&out_root, &manifest, &h.ledger)?;
    let table = emit_report(&h.ledger, a.format.into()).map_err(|e| CliError::input(e.to_string()))?;
    write_out(out, &table)?;
    Ok(exit_for(&[&h.stage1, &h.stage2]))
}

fn compare(a: &CompareArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let original = read_file(&a.original)?;
    let revised = read_file(&a.revised)?;
    let report = diff_texts(
        &original,
        &revised,
        DiffOptions {
            trim_trailing_whitespace: a.ignore_trailing_whitespace,
        },
    );
    let summary = report.metrics.summary();
    match a.format {
        CompareFormat::Tty => {
            let mut text = render_terminal(&report.rows, a.color);
            text.push_str(&summary);
            text.push('\n');
            write_out(out, &text)?;
        }
        CompareFormat::Html => {
            let labels = (
                a.original.display().to_string(),
                a.revised.display().to_string(),
            );
            write_out(
                out,
                &render_html(&report.rows, Some((&labels.0, &labels.1)), Some(&report.metrics)),
            )?;
            eprintln!("{summary}");
        }
        CompareFormat::Structured => {
            let mut text = serde_json::to_string_pretty(&report).expect("diff report serializes");
            text.push('\n');
            write_out(out, &text)?;
            eprintln!("{summary}");
        }
    }
    Ok(EXIT_OK)
}

/// Merges ledgers; a cell present in more than one is an error.
pub fn merge_ledgers(ledgers: Vec<CostLedger>) -> Result<CostLedger, String> {
    let mut merged = CostLedger::default();
    for l in ledgers {
        merged.cheap_model = merged.cheap_model.or(l.cheap_model.clone());
        merged.advanced_model = merged.advanced_model.or(l.advanced_model.clone());
        for (ty, st, e) in l.iter() {
            if merged.get(ty, st).is_some() {
                return Err(format!("cell {ty}/{st} appears in more than one ledger"));
            }
            merged.set(ty, st, *e);
        }
    }
    Ok(merged)
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut ledgers = Vec::new();
    for p in &a.ledger {
        if !p.is_file() {
            return Err(CliError::input(format!("ledger {} does not exist", p.display())));
        }
        ledgers.push(CostLedger::load(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?);
    }
    let ledger = merge_ledgers(ledgers).map_err(CliError::input)?;
    let table = emit_report(&ledger, a.format.into()).map_err(|e| CliError::input(e.to_string()))?;
    write_out(out, &table)?;
    Ok(EXIT_OK)
}
