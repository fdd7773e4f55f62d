//! `afpmt`: run metamorphic test campaigns against protein function predictors.
//!
//! Exit status: 0 on success, 1 on configuration or input errors, 2 when any
//! verdict is a Fail (unless `--allow-fail`).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use afpmt_core::campaign::{self, CheckOutput};
use afpmt_core::mockbench::MockSpec;
use afpmt_core::predictions::{load_predictions, write_predictions};
use afpmt_core::report::TestReport;
use afpmt_core::runner::CampaignRun;
use afpmt_core::{mock_predict, parse_fasta, CampaignConfig, MockBehavior, Namespace, Outcome, PredictionFormat};

const EXIT_CONFIG: u8 = 1;
const EXIT_FAIL: u8 = 2;

#[derive(Parser)]
#[command(name = "afpmt", version, about = "Metamorphic testing for protein function prediction tools")]
struct Cli {
    /// More logging (repeat for debug output). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build test case pairs and write one FASTA per sequence.
    Generate(ConfigArg),
    /// Run (or ingest) every tool on every sequence.
    Run(RunArgs),
    /// Evaluate the metamorphic relation over stored run results.
    Check(CheckArgs),
    /// Aggregate stored verdicts into report.{json,csv,md}.
    Report(ReportArgs),
    /// generate, run, check and report in one go.
    Campaign(CampaignArgs),
    #[command(hide = true)]
    MockPredict(MockArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Campaign configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Ignore cached prediction artifacts.
    #[arg(long)]
    no_cache: bool,
    /// Override the worker count.
    #[arg(long)]
    max_parallel: Option<usize>,
}

#[derive(Args)]
struct Gate {
    /// Exit 0 even when some verdicts are Fail.
    #[arg(long)]
    allow_fail: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    gate: Gate,
}

#[derive(Args)]
struct ReportOpts {
    /// Relabel tools A, B, C… in configuration order.
    #[arg(long)]
    anonymize: bool,
    /// Timestamp recorded in the report; defaults to SOURCE_DATE_EPOCH, then the current time.
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    opts: ReportOpts,
    #[command(flatten)]
    gate: Gate,
}

#[derive(Args)]
struct CampaignArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    opts: ReportOpts,
    #[command(flatten)]
    gate: Gate,
}

#[derive(Args)]
struct MockArgs {
    #[arg(long)]
    behavior: String,
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long = "canonical")]
    canonicals: Vec<PathBuf>,
    input: PathBuf,
    output: PathBuf,
}

const CONFIG_ERROR: &str = "configuration error";

fn load_config(arg: &ConfigArg) -> Result<CampaignConfig> {
    CampaignConfig::load(&arg.config).context(CONFIG_ERROR)
}

fn load_run_config(args: &RunArgs) -> Result<CampaignConfig> {
    let mut config = load_config(&args.config)?;
    if args.no_cache {
        config.cache = false;
    }
    if let Some(n) = args.max_parallel {
        if n == 0 {
            return Err(anyhow::anyhow!("--max-parallel must be at least 1")).context(CONFIG_ERROR);
        }
        config.max_parallel = Some(n);
    }
    Ok(config)
}

fn timestamp(explicit: Option<&str>) -> Result<String> {
    if let Some(t) = explicit {
        return Ok(t.to_string());
    }
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        let secs: i64 = epoch.trim().parse().context("SOURCE_DATE_EPOCH is not an integer")?;
        let t = chrono::DateTime::from_timestamp(secs, 0).context("SOURCE_DATE_EPOCH out of range")?;
        return Ok(t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    }
    Ok(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn gated(any_fail: bool, gate: &Gate) -> u8 {
    if any_fail && !gate.allow_fail {
        EXIT_FAIL
    } else {
        0
    }
}

fn do_run(config: &CampaignConfig) -> Result<CampaignRun> {
    let exe = std::env::current_exe().context("cannot locate the afpmt executable")?;
    let adapters = config.adapters(&exe).context(CONFIG_ERROR)?;
    let pairs = campaign::generate(config).context(CONFIG_ERROR)?;
    let run = campaign::run(config, &pairs, &adapters)?;
    let failed = run.results.values().filter(|r| !r.status.is_ok()).count();
    println!(
        "ran {} tool(s) on {} pair(s): {} result(s), {} executed, {} cached, {} without output",
        adapters.len(),
        pairs.len(),
        run.results.len(),
        run.executions,
        run.cache_hits,
        failed
    );
    Ok(run)
}

fn do_check(config: &CampaignConfig) -> Result<CheckOutput> {
    let (_, pairs) = campaign::load_pairs(config).context(CONFIG_ERROR)?;
    let onto = campaign::load_ontology(config).context(CONFIG_ERROR)?;
    let runs = campaign::load_runs(&config.out_dir).context("no run results; run `afpmt run` first")?;
    let out = campaign::check(config, &pairs, &runs, &onto)?;
    for w in &out.warnings {
        tracing::warn!("{w}");
    }
    print_verdict_summary(&out, &config.namespaces);
    Ok(out)
}

fn print_verdict_summary(out: &CheckOutput, namespaces: &[Namespace]) {
    let mut tools: Vec<&str> = out.verdicts.iter().map(|v| v.tool_id.as_str()).collect();
    tools.sort();
    tools.dedup();
    for tool in tools {
        for &ns in namespaces {
            let (mut pass, mut fail, mut inconclusive) = (0, 0, 0);
            for v in out.verdicts.iter().filter(|v| v.tool_id == tool && v.namespace == ns) {
                match v.outcome {
                    Outcome::Pass => pass += 1,
                    Outcome::Fail => fail += 1,
                    Outcome::Inconclusive(_) => inconclusive += 1,
                }
            }
            println!("{tool}\t{}\tpass {pass}\tfail {fail}\tinconclusive {inconclusive}", ns.short());
        }
    }
}

fn do_report(config: &CampaignConfig, opts: &ReportOpts) -> Result<TestReport> {
    let (_, pairs) = campaign::load_pairs(config).context(CONFIG_ERROR)?;
    let onto = afpmt_core::load_obo(&config.ontology).context(CONFIG_ERROR)?;
    let verdicts = campaign::load_verdicts(&config.out_dir).context("no verdicts; run `afpmt check` first")?;
    let metadata = campaign::report_metadata(config, &onto, &timestamp(opts.timestamp.as_deref())?);
    let report = campaign::report(config, &pairs, &verdicts, metadata, opts.anonymize)?;
    println!("wrote {}", config.out_dir.join(campaign::REPORT_MD).display());
    Ok(report)
}

fn report_has_fail(report: &TestReport) -> bool {
    report.tool_totals.values().flat_map(|m| m.values()).any(|c| c.fail > 0)
}

fn mock(args: &MockArgs) -> Result<()> {
    let behavior: MockBehavior = args.behavior.parse()?;
    let onto = afpmt_core::load_obo(&args.ontology)?;
    let base = match &args.base {
        Some(p) => load_predictions(p, PredictionFormat::PlainTsv)?.predictions,
        None => Vec::new(),
    };
    let mut canonicals = Vec::new();
    for path in &args.canonicals {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        canonicals.extend(parse_fasta(&text)?);
    }
    let (spec, _) = MockSpec::from_predictions(behavior, &base, &onto, &canonicals, args.seed)?;
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mut preds = Vec::new();
    for record in parse_fasta(&text)? {
        preds.extend(mock_predict(&spec, &record)?);
    }
    write_atomically(&args.output, &write_predictions(&preds))
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate(arg) => {
            let config = load_config(&arg)?;
            let pairs = campaign::generate(&config).context(CONFIG_ERROR)?;
            println!("wrote {} pair(s) to {}", pairs.len(), config.out_dir.display());
            Ok(0)
        }
        Command::Run(args) => {
            let config = load_run_config(&args)?;
            do_run(&config)?;
            Ok(0)
        }
        Command::Check(args) => {
            let config = load_config(&args.config)?;
            let out = do_check(&config)?;
            Ok(gated(out.any_fail(), &args.gate))
        }
        Command::Report(args) => {
            let config = load_config(&args.config)?;
            let report = do_report(&config, &args.opts)?;
            Ok(gated(report_has_fail(&report), &args.gate))
        }
        Command::Campaign(args) => {
            let config = load_run_config(&args.run)?;
            do_run(&config)?;
            let out = do_check(&config)?;
            do_report(&config, &args.opts)?;
            Ok(gated(out.any_fail(), &args.gate))
        }
        Command::MockPredict(args) => {
            mock(&args)?;
            Ok(0)
        }
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
