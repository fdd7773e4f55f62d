//! Running tools on test cases: subprocess execution or offline ingestion.
//!
//! Subprocess artifacts are cached under `<out_dir>/predictions/<tool_id>/`
//! with the input sequence digest in the file name, so a rerun with the same
//! sequences performs no executions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::predictions::{load_manifest, load_predictions, PredictionFormat};
use crate::sequence::{write_fasta, ProteinRecord};
use crate::variants::TestCasePair;

pub const INPUT_PLACEHOLDER: &str = "{input_fasta}";
pub const OUTPUT_PLACEHOLDER: &str = "{output_file}";

/// Cap on captured stdout/stderr kept in a [`RunStatus::ToolError`].
pub const DIAGNOSTICS_BUDGET: usize = 16 * 1024;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("tool {tool_id}: {message}")]
    InvalidAdapter { tool_id: String, message: String },
    #[error("duplicate tool id {0}")]
    DuplicateTool(String),
    #[error("record id {0} is used for two different sequences")]
    ConflictingRecord(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AdapterMode {
    Subprocess {
        command_template: String,
        #[serde(with = "secs")]
        timeout: Duration,
        working_dir: PathBuf,
    },
    Offline {
        manifest_path: PathBuf,
    },
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolAdapter {
    pub tool_id: String,
    pub mode: AdapterMode,
    pub prediction_format: PredictionFormat,
    /// Environment variables passed through to subprocesses; everything else is cleared.
    #[serde(default)]
    pub env_allowlist: Vec<String>,
}

impl ToolAdapter {
    pub fn subprocess(tool_id: impl Into<String>, command_template: impl Into<String>, timeout: Duration) -> Self {
        Self {
            tool_id: tool_id.into(),
            mode: AdapterMode::Subprocess {
                command_template: command_template.into(),
                timeout,
                working_dir: PathBuf::from("."),
            },
            prediction_format: PredictionFormat::PlainTsv,
            env_allowlist: Vec::new(),
        }
    }

    pub fn offline(tool_id: impl Into<String>, manifest_path: impl Into<PathBuf>, format: PredictionFormat) -> Self {
        Self {
            tool_id: tool_id.into(),
            mode: AdapterMode::Offline { manifest_path: manifest_path.into() },
            prediction_format: format,
            env_allowlist: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let invalid = |message: String| RunnerError::InvalidAdapter { tool_id: self.tool_id.clone(), message };
        if self.tool_id.is_empty() || self.tool_id.contains(['/', '\\']) || self.tool_id.chars().any(char::is_whitespace) {
            return Err(invalid("tool id must be non-empty without whitespace or path separators".into()));
        }
        if let AdapterMode::Subprocess { command_template, timeout, .. } = &self.mode {
            for ph in [INPUT_PLACEHOLDER, OUTPUT_PLACEHOLDER] {
                let n = command_template.matches(ph).count();
                if n != 1 {
                    return Err(invalid(format!("command template must contain {ph} exactly once (found {n})")));
                }
            }
            if timeout.is_zero() {
                return Err(invalid("timeout must be positive".into()));
            }
            let argv = shell_words::split(command_template).map_err(|e| invalid(format!("command template: {e}")))?;
            if argv.is_empty() {
                return Err(invalid("empty command template".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunStatus {
    Ok { prediction_path: PathBuf },
    ToolError { exit_code: Option<i32>, diagnostics: String },
    Timeout,
}

impl RunStatus {
    pub fn missing_output(detail: &str) -> Self {
        RunStatus::ToolError {
            exit_code: None,
            diagnostics: if detail.is_empty() {
                crate::mr::REASON_MISSING_OUTPUT.to_string()
            } else {
                format!("{}: {detail}", crate::mr::REASON_MISSING_OUTPUT)
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub tool_id: String,
    pub record_id: String,
    #[serde(flatten)]
    pub status: RunStatus,
}

/// How a result was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Executed,
    Cached,
    Offline,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub max_parallel: usize,
    pub use_cache: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            max_parallel: thread::available_parallelism().map_or(1, |n| n.get()),
            use_cache: true,
        }
    }
}

/// Hex SHA-256 of a record's sequence.
pub fn sequence_digest(record: &ProteinRecord) -> String {
    hex::encode(Sha256::digest(record.sequence.as_str().as_bytes()))
}

/// File-system safe stem for a record id.
pub fn artifact_stem(record_id: &str) -> String {
    record_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Where the cached prediction artifact for (tool, record) lives.
pub fn artifact_path(out_dir: &Path, tool_id: &str, record: &ProteinRecord) -> PathBuf {
    out_dir
        .join("predictions")
        .join(tool_id)
        .join(format!("{}.{}.tsv", artifact_stem(&record.id), &sequence_digest(record)[..16]))
}

fn truncate_diagnostics(mut bytes: Vec<u8>) -> String {
    let truncated = bytes.len() > DIAGNOSTICS_BUDGET;
    bytes.truncate(DIAGNOSTICS_BUDGET);
    let mut s = String::from_utf8_lossy(&bytes).into_owned();
    if truncated {
        s.push_str("\n[truncated]");
    }
    s
}

/// Reads a pipe to the end, keeping at most the diagnostics budget.
fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let Some(mut pipe) = pipe else { return kept };
        let mut buf = [0u8; 8192];
        loop {
            match pipe.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = (DIAGNOSTICS_BUDGET + 1).saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        kept
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // the child leads its own process group; take down anything it spawned too
    unsafe {
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

fn execute(
    adapter: &ToolAdapter,
    command_template: &str,
    timeout: Duration,
    working_dir: &Path,
    record: &ProteinRecord,
    final_path: &Path,
    out_dir: &Path,
) -> RunStatus {
    let tool_error = |diagnostics: String| RunStatus::ToolError { exit_code: None, diagnostics };

    let work_root = out_dir.join("work");
    if let Err(e) = fs::create_dir_all(&work_root) {
        return tool_error(format!("cannot create {}: {e}", work_root.display()));
    }
    let work = match tempfile::Builder::new().prefix(&format!("{}-", adapter.tool_id)).tempdir_in(&work_root) {
        Ok(w) => w,
        Err(e) => return tool_error(format!("cannot create work dir: {e}")),
    };
    let input = work.path().join(format!("{}.fasta", artifact_stem(&record.id)));
    let output = work.path().join("predictions.out");
    if let Err(e) = fs::write(&input, write_fasta(std::slice::from_ref(record))) {
        return tool_error(format!("cannot write {}: {e}", input.display()));
    }

    let argv: Vec<String> = match shell_words::split(command_template) {
        Ok(a) if !a.is_empty() => a
            .into_iter()
            .map(|arg| {
                arg.replace(INPUT_PLACEHOLDER, &input.to_string_lossy())
                    .replace(OUTPUT_PLACEHOLDER, &output.to_string_lossy())
            })
            .collect(),
        _ => return tool_error("invalid command template".into()),
    };

    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(working_dir)
        .env_clear()
        .envs(adapter.env_allowlist.iter().filter_map(|k| std::env::var_os(k).map(|v| (k, v))))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }

    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return tool_error(format!("failed to start {}: {e}", argv[0])),
    };
    let out_reader = drain(child.stdout.take());
    let err_reader = drain(child.stderr.take());

    let exit = match child.wait_timeout(timeout) {
        Ok(Some(status)) => Some(status),
        Ok(None) => None,
        Err(e) => {
            kill_tree(&mut child);
            let _ = child.wait();
            return tool_error(format!("wait failed: {e}"));
        }
    };
    let Some(status) = exit else {
        kill_tree(&mut child);
        let _ = child.wait();
        let _ = (out_reader.join(), err_reader.join());
        tracing::warn!(tool = %adapter.tool_id, record = %record.id, "timed out after {:?}", timeout);
        return RunStatus::Timeout;
    };

    let mut diagnostics = err_reader.join().unwrap_or_default();
    let stdout = out_reader.join().unwrap_or_default();
    if !stdout.is_empty() {
        if !diagnostics.is_empty() {
            diagnostics.push(b'\n');
        }
        diagnostics.extend(stdout);
    }

    if !status.success() {
        return RunStatus::ToolError { exit_code: status.code(), diagnostics: truncate_diagnostics(diagnostics) };
    }
    if !output.exists() {
        return RunStatus::missing_output("tool exited successfully without writing its output file");
    }
    if let Err(e) = load_predictions(&output, adapter.prediction_format) {
        return RunStatus::ToolError { exit_code: status.code(), diagnostics: format!("unparseable output: {e}") };
    }
    if let Some(parent) = final_path.parent() {
        if let Err(e) = fs::create_dir_all(parent) {
            return tool_error(format!("cannot create {}: {e}", parent.display()));
        }
    }
    // copy then rename so a partially written artifact never looks cached
    let staging = final_path.with_extension("partial");
    if let Err(e) = fs::copy(&output, &staging).and_then(|_| fs::rename(&staging, final_path)) {
        return tool_error(format!("cannot store {}: {e}", final_path.display()));
    }
    RunStatus::Ok { prediction_path: final_path.to_path_buf() }
}

fn run_offline(adapter: &ToolAdapter, manifest: &BTreeMap<String, PathBuf>, record: &ProteinRecord) -> RunStatus {
    let Some(path) = manifest.get(&record.id) else {
        return RunStatus::missing_output("");
    };
    match load_predictions(path, adapter.prediction_format) {
        Ok(_) => RunStatus::Ok { prediction_path: path.clone() },
        Err(e) => RunStatus::ToolError { exit_code: None, diagnostics: format!("unreadable prediction file: {e}") },
    }
}

/// Runs (or looks up) one tool on one record.
pub fn run_tool_with(adapter: &ToolAdapter, record: &ProteinRecord, options: &RunOptions) -> (RunResult, Provenance) {
    let result = |status| RunResult { tool_id: adapter.tool_id.clone(), record_id: record.id.clone(), status };
    if let Err(e) = adapter.validate() {
        return (result(RunStatus::ToolError { exit_code: None, diagnostics: e.to_string() }), Provenance::Executed);
    }
    match &adapter.mode {
        AdapterMode::Offline { manifest_path } => {
            let status = match load_manifest(manifest_path) {
                Ok(m) => run_offline(adapter, &m, record),
                Err(e) => RunStatus::ToolError { exit_code: None, diagnostics: format!("manifest: {e}") },
            };
            (result(status), Provenance::Offline)
        }
        AdapterMode::Subprocess { command_template, timeout, working_dir } => {
            let final_path = artifact_path(&options.out_dir, &adapter.tool_id, record);
            if options.use_cache
                && final_path.is_file()
                && load_predictions(&final_path, adapter.prediction_format).is_ok()
            {
                return (result(RunStatus::Ok { prediction_path: final_path }), Provenance::Cached);
            }
            let status =
                execute(adapter, command_template, *timeout, working_dir, record, &final_path, &options.out_dir);
            (result(status), Provenance::Executed)
        }
    }
}

/// Runs one tool on one record with default options and caching enabled.
pub fn run_tool(adapter: &ToolAdapter, record: &ProteinRecord, out_dir: &Path) -> RunResult {
    run_tool_with(adapter, record, &RunOptions::new(out_dir)).0
}

#[derive(Debug, Clone, Default)]
pub struct CampaignRun {
    pub results: BTreeMap<(String, String), RunResult>,
    /// Subprocess executions actually performed.
    pub executions: usize,
    pub cache_hits: usize,
}

impl CampaignRun {
    pub fn get(&self, tool_id: &str, record_id: &str) -> Option<&RunResult> {
        self.results.get(&(tool_id.to_string(), record_id.to_string()))
    }

    pub fn into_list(self) -> Vec<RunResult> {
        self.results.into_values().collect()
    }
}

/// Distinct records of a pair list: sources deduplicated by id, in id order.
pub fn distinct_records(pairs: &[TestCasePair]) -> Result<Vec<ProteinRecord>, RunnerError> {
    let mut records: BTreeMap<&str, &ProteinRecord> = BTreeMap::new();
    for r in pairs.iter().flat_map(|p| [&p.source, &p.follow_up]) {
        match records.get(r.id.as_str()) {
            Some(existing) if existing.sequence != r.sequence => {
                return Err(RunnerError::ConflictingRecord(r.id.clone()));
            }
            Some(_) => {}
            None => {
                records.insert(&r.id, r);
            }
        }
    }
    Ok(records.into_values().cloned().collect())
}

/// Runs every tool on every distinct record with a bounded worker pool.
/// Individual tool failures are recorded in the results, never raised.
pub fn execute_campaign(
    pairs: &[TestCasePair],
    adapters: &[ToolAdapter],
    options: &RunOptions,
) -> Result<CampaignRun, RunnerError> {
    let mut seen = BTreeSet::new();
    for a in adapters {
        a.validate()?;
        if !seen.insert(a.tool_id.as_str()) {
            return Err(RunnerError::DuplicateTool(a.tool_id.clone()));
        }
    }
    let records = distinct_records(pairs)?;

    let mut manifests: BTreeMap<&str, Result<BTreeMap<String, PathBuf>, String>> = BTreeMap::new();
    for a in adapters {
        if let AdapterMode::Offline { manifest_path } = &a.mode {
            manifests.insert(&a.tool_id, load_manifest(manifest_path).map_err(|e| e.to_string()));
        }
    }

    let tasks: Vec<(&ToolAdapter, &ProteinRecord)> =
        adapters.iter().flat_map(|a| records.iter().map(move |r| (a, r))).collect();
    let next = AtomicUsize::new(0);
    let executions = AtomicUsize::new(0);
    let cache_hits = AtomicUsize::new(0);
    let collected: Mutex<Vec<RunResult>> = Mutex::new(Vec::with_capacity(tasks.len()));
    let workers = options.max_parallel.max(1).min(tasks.len().max(1));

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(adapter, record)) = tasks.get(i) else { break };
                let result = match manifests.get(adapter.tool_id.as_str()) {
                    Some(Ok(m)) => RunResult {
                        tool_id: adapter.tool_id.clone(),
                        record_id: record.id.clone(),
                        status: run_offline(adapter, m, record),
                    },
                    Some(Err(e)) => RunResult {
                        tool_id: adapter.tool_id.clone(),
                        record_id: record.id.clone(),
                        status: RunStatus::ToolError { exit_code: None, diagnostics: format!("manifest: {e}") },
                    },
                    None => {
                        let (result, provenance) = run_tool_with(adapter, record, options);
                        match provenance {
                            Provenance::Executed => executions.fetch_add(1, Ordering::Relaxed),
                            Provenance::Cached => cache_hits.fetch_add(1, Ordering::Relaxed),
                            Provenance::Offline => 0,
                        };
                        result
                    }
                };
                collected.lock().expect("collector poisoned").push(result);
            });
        }
    });

    let results = collected
        .into_inner()
        .expect("collector poisoned")
        .into_iter()
        .map(|r| ((r.tool_id.clone(), r.record_id.clone()), r))
        .collect();
    Ok(CampaignRun {
        results,
        executions: executions.into_inner(),
        cache_hits: cache_hits.into_inner(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_validation() {
        let ok = ToolAdapter::subprocess("t", "tool --in {input_fasta} --out {output_file}", Duration::from_secs(1));
        ok.validate().unwrap();

        let missing = ToolAdapter::subprocess("t", "tool {input_fasta}", Duration::from_secs(1));
        assert!(missing.validate().is_err());
        let twice = ToolAdapter::subprocess("t", "tool {input_fasta} {input_fasta} {output_file}", Duration::from_secs(1));
        assert!(twice.validate().is_err());
        let zero = ToolAdapter::subprocess("t", "tool {input_fasta} {output_file}", Duration::ZERO);
        assert!(zero.validate().is_err());
        let bad_id = ToolAdapter::subprocess("a/b", "tool {input_fasta} {output_file}", Duration::from_secs(1));
        assert!(bad_id.validate().is_err());
    }

    #[test]
    fn stems_are_path_safe() {
        assert_eq!(artifact_stem("P14679|VAR_007652"), "P14679_VAR_007652");
        assert_eq!(artifact_stem("O00206-2"), "O00206-2");
    }

    #[test]
    fn diagnostics_truncated() {
        let s = truncate_diagnostics(vec![b'x'; DIAGNOSTICS_BUDGET + 10]);
        assert!(s.ends_with("[truncated]"));
        assert_eq!(s.len(), DIAGNOSTICS_BUDGET + "\n[truncated]".len());
        assert_eq!(truncate_diagnostics(b"short".to_vec()), "short");
    }

    #[test]
    fn status_json() {
        let r = RunResult { tool_id: "t".into(), record_id: "P".into(), status: RunStatus::Timeout };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"tool_id":"t","record_id":"P","status":"timeout"}"#);
        assert_eq!(serde_json::from_str::<RunResult>(&json).unwrap(), r);
    }
}
