//! Aggregation of verdicts into per-tool, per-protein and per-variant views,
//! and their JSON, CSV and Markdown renderings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mr::{canonical_order, MrVerdict, Outcome, DEFAULT_NAMESPACES, VARIANT_CHANGE_MR};
use crate::ontology::Namespace;
use crate::variants::{TestCasePair, VariantCategory};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("duplicate verdict for pair {pair_id}, tool {tool_id}, namespace {namespace}")]
    DuplicateVerdict { pair_id: String, tool_id: String, namespace: Namespace },
    #[error("verdict refers to unknown pair {0}")]
    UnknownPair(String),
    #[error("duplicate pair {0}")]
    DuplicatePair(String),
    #[error("unknown variant {0}")]
    UnknownVariant(String),
    #[error("malformed report JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub inconclusive: usize,
}

impl Counts {
    pub fn record(&mut self, outcome: &Outcome) {
        match outcome {
            Outcome::Pass => self.pass += 1,
            Outcome::Fail => self.fail += 1,
            Outcome::Inconclusive(_) => self.inconclusive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.pass + self.fail + self.inconclusive
    }

    /// Pass share of decided outcomes in tenths of a percent, rounded half up.
    pub fn pass_tenths(&self) -> Option<u64> {
        let decided = (self.pass + self.fail) as u64;
        (decided > 0).then(|| (2000 * self.pass as u64 + decided) / (2 * decided))
    }

    pub fn pass_percentage(&self) -> Option<f64> {
        self.pass_tenths().map(|t| t as f64 / 10.0)
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Self) {
        self.pass += rhs.pass;
        self.fail += rhs.fail;
        self.inconclusive += rhs.inconclusive;
    }
}

/// Renders a percentage with one decimal, or `n/a`.
pub fn format_percentage(pct: Option<f64>) -> String {
    match pct {
        Some(p) => {
            let tenths = (p * 10.0).round() as u64;
            format!("{}.{}", tenths / 10, tenths % 10)
        }
        None => "n/a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub relation: String,
    pub ontology_checksum: String,
    pub ontology_version: Option<String>,
    pub threshold: f64,
    pub namespaces: Vec<Namespace>,
    pub timestamp: String,
    /// Tool ids in presentation order.
    pub tools: Vec<String>,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        Self {
            relation: VARIANT_CHANGE_MR.to_string(),
            ontology_checksum: String::new(),
            ontology_version: None,
            threshold: 0.0,
            namespaces: DEFAULT_NAMESPACES.to_vec(),
            timestamp: String::new(),
            tools: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSummary {
    pub pair_id: String,
    pub protein_id: String,
    pub variant_id: String,
    pub category: VariantCategory,
    pub change: String,
}

impl PairSummary {
    pub fn of(pair: &TestCasePair) -> Self {
        Self {
            pair_id: pair.pair_id().to_string(),
            protein_id: pair.protein_id().to_string(),
            variant_id: pair.variant.variant_id.clone(),
            category: pair.variant.category,
            change: pair.variant.change_label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub metadata: ReportMetadata,
    /// Pairs in (protein, variant) order.
    pub pairs: Vec<PairSummary>,
    /// Verdicts in (pair, tool, namespace) order.
    pub verdicts: Vec<MrVerdict>,
    /// tool → namespace → counts
    pub tool_totals: BTreeMap<String, BTreeMap<Namespace, Counts>>,
    /// tool → protein → namespace → counts
    pub protein_totals: BTreeMap<String, BTreeMap<String, BTreeMap<Namespace, Counts>>>,
    /// variant → namespace → counts over tools
    pub variant_totals: BTreeMap<String, BTreeMap<Namespace, Counts>>,
    /// variant → namespace → pass percentage over tools, `None` when no tool decided
    pub variant_pass_pct: BTreeMap<String, BTreeMap<Namespace, Option<f64>>>,
}

/// Aggregates with default metadata and tools listed in id order.
pub fn aggregate(verdicts: &[MrVerdict], pairs: &[TestCasePair]) -> Result<TestReport, ReportError> {
    aggregate_with(verdicts, pairs, ReportMetadata::default())
}

/// Aggregates verdicts. Tools seen in verdicts but missing from
/// `metadata.tools` are appended in id order.
pub fn aggregate_with(
    verdicts: &[MrVerdict],
    pairs: &[TestCasePair],
    mut metadata: ReportMetadata,
) -> Result<TestReport, ReportError> {
    let mut summaries: BTreeMap<&str, PairSummary> = BTreeMap::new();
    let mut variant_ids = BTreeSet::new();
    for pair in pairs {
        let summary = PairSummary::of(pair);
        if !variant_ids.insert(summary.variant_id.clone()) || summaries.contains_key(pair.pair_id()) {
            return Err(ReportError::DuplicatePair(pair.pair_id().to_string()));
        }
        summaries.insert(pair.pair_id(), summary);
    }

    let mut verdicts = verdicts.to_vec();
    canonical_order(&mut verdicts);
    for w in verdicts.windows(2) {
        if w[0].key() == w[1].key() {
            return Err(ReportError::DuplicateVerdict {
                pair_id: w[0].pair_id.clone(),
                tool_id: w[0].tool_id.clone(),
                namespace: w[0].namespace,
            });
        }
    }

    let mut tool_totals: BTreeMap<String, BTreeMap<Namespace, Counts>> = BTreeMap::new();
    let mut protein_totals: BTreeMap<String, BTreeMap<String, BTreeMap<Namespace, Counts>>> = BTreeMap::new();
    let mut variant_totals: BTreeMap<String, BTreeMap<Namespace, Counts>> = BTreeMap::new();
    for v in &verdicts {
        let pair = summaries.get(v.pair_id.as_str()).ok_or_else(|| ReportError::UnknownPair(v.pair_id.clone()))?;
        tool_totals.entry(v.tool_id.clone()).or_default().entry(v.namespace).or_default().record(&v.outcome);
        protein_totals
            .entry(v.tool_id.clone())
            .or_default()
            .entry(pair.protein_id.clone())
            .or_default()
            .entry(v.namespace)
            .or_default()
            .record(&v.outcome);
        variant_totals
            .entry(pair.variant_id.clone())
            .or_default()
            .entry(v.namespace)
            .or_default()
            .record(&v.outcome);
    }
    let variant_pass_pct = variant_totals
        .iter()
        .map(|(variant, by_ns)| (variant.clone(), by_ns.iter().map(|(&ns, c)| (ns, c.pass_percentage())).collect()))
        .collect();

    let listed: BTreeSet<String> = metadata.tools.iter().cloned().collect();
    metadata.tools.extend(tool_totals.keys().filter(|t| !listed.contains(*t)).cloned());

    let mut pairs: Vec<PairSummary> = summaries.into_values().collect();
    pairs.sort_by(|a, b| (&a.protein_id, &a.variant_id).cmp(&(&b.protein_id, &b.variant_id)));
    Ok(TestReport { metadata, pairs, verdicts, tool_totals, protein_totals, variant_totals, variant_pass_pct })
}

/// Pass percentage of one variant over tools, `Ok(None)` when every tool was inconclusive.
pub fn pass_percentage(report: &TestReport, variant_id: &str, namespace: Namespace) -> Result<Option<f64>, ReportError> {
    let known = report.pairs.iter().any(|p| p.variant_id == variant_id) || report.variant_totals.contains_key(variant_id);
    if !known {
        return Err(ReportError::UnknownVariant(variant_id.to_string()));
    }
    Ok(report.variant_pass_pct.get(variant_id).and_then(|m| m.get(&namespace)).copied().flatten())
}

/// Letter label for the `index`-th tool: A..Z, then AA, AB, ...
pub fn anonymous_label(mut index: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Relabels tools A, B, C… in `metadata.tools` order.
pub fn anonymize(report: &TestReport) -> TestReport {
    let labels: BTreeMap<&str, String> = report
        .metadata
        .tools
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), anonymous_label(i)))
        .collect();
    let relabel = |t: &String| labels.get(t.as_str()).cloned().unwrap_or_else(|| t.clone());

    let mut out = report.clone();
    out.metadata.tools = report.metadata.tools.iter().map(relabel).collect();
    for v in &mut out.verdicts {
        v.tool_id = relabel(&v.tool_id);
    }
    canonical_order(&mut out.verdicts);
    out.tool_totals = report.tool_totals.iter().map(|(t, m)| (relabel(t), m.clone())).collect();
    out.protein_totals = report.protein_totals.iter().map(|(t, m)| (relabel(t), m.clone())).collect();
    out
}

pub fn to_json(report: &TestReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<TestReport, ReportError> {
    Ok(serde_json::from_str(text)?)
}

fn csv_row(w: &mut csv::Writer<Vec<u8>>, fields: &[&str]) {
    w.write_record(fields).expect("writing to memory");
}

/// Sectioned CSV: every row starts with its section name, each section has its own header row.
pub fn to_csv(report: &TestReport) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let pairs: BTreeMap<&str, &PairSummary> = report.pairs.iter().map(|p| (p.pair_id.as_str(), p)).collect();

    csv_row(&mut w, &["section", "pair_id", "protein_id", "variant_id", "tool_id", "namespace", "outcome", "reason"]);
    for v in &report.verdicts {
        let (protein, variant) = pairs
            .get(v.pair_id.as_str())
            .map_or(("", ""), |p| (p.protein_id.as_str(), p.variant_id.as_str()));
        csv_row(
            &mut w,
            &["verdict", &v.pair_id, protein, variant, &v.tool_id, v.namespace.short(), v.outcome.label(), v.outcome.reason().unwrap_or("")],
        );
    }

    let counts = |c: &Counts| [c.pass.to_string(), c.fail.to_string(), c.inconclusive.to_string()];
    csv_row(&mut w, &["section", "tool_id", "namespace", "pass", "fail", "inconclusive"]);
    for tool in ordered_tools(report) {
        for (ns, c) in report.tool_totals.get(tool).into_iter().flatten() {
            let [p, f, i] = counts(c);
            csv_row(&mut w, &["tool_total", tool, ns.short(), &p, &f, &i]);
        }
    }

    csv_row(&mut w, &["section", "tool_id", "protein_id", "namespace", "pass", "fail", "inconclusive"]);
    for tool in ordered_tools(report) {
        for (protein, by_ns) in report.protein_totals.get(tool).into_iter().flatten() {
            for (ns, c) in by_ns {
                let [p, f, i] = counts(c);
                csv_row(&mut w, &["protein_total", tool, protein, ns.short(), &p, &f, &i]);
            }
        }
    }

    csv_row(&mut w, &["section", "variant_id", "protein_id", "namespace", "pass", "fail", "inconclusive", "pass_pct"]);
    for pair in &report.pairs {
        for (ns, c) in report.variant_totals.get(&pair.variant_id).into_iter().flatten() {
            let [p, f, i] = counts(c);
            let pct = format_percentage(c.pass_percentage());
            csv_row(&mut w, &["variant_pass_pct", &pair.variant_id, &pair.protein_id, ns.short(), &p, &f, &i, &pct]);
        }
    }

    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

fn ordered_tools(report: &TestReport) -> Vec<&str> {
    let mut out: Vec<&str> = report.metadata.tools.iter().map(String::as_str).collect();
    let listed: BTreeSet<&str> = out.iter().copied().collect();
    out.extend(report.tool_totals.keys().map(String::as_str).filter(|t| !listed.contains(t)));
    out
}

fn namespace_title(ns: Namespace) -> &'static str {
    match ns {
        Namespace::MolecularFunction => "Molecular function",
        Namespace::BiologicalProcess => "Biological process",
        Namespace::CellularComponent => "Cellular component",
    }
}

fn report_namespaces(report: &TestReport) -> Vec<Namespace> {
    let mut ns: BTreeSet<Namespace> = report.metadata.namespaces.iter().copied().collect();
    ns.extend(report.tool_totals.values().flat_map(|m| m.keys().copied()));
    ns.into_iter().collect()
}

pub fn to_markdown(report: &TestReport) -> String {
    let m = &report.metadata;
    let namespaces = report_namespaces(report);
    let tools = ordered_tools(report);
    let mut out = String::new();

    out.push_str("# Metamorphic test report\n\n");
    let _ = writeln!(out, "- Relation: `{}`", m.relation);
    let _ = writeln!(
        out,
        "- Ontology: {} (sha256 `{}`)",
        m.ontology_version.as_deref().unwrap_or("unversioned"),
        if m.ontology_checksum.is_empty() { "n/a" } else { &m.ontology_checksum }
    );
    let _ = writeln!(out, "- Score threshold: {}", m.threshold);
    let ns_list: Vec<&str> = namespaces.iter().map(|n| n.short()).collect();
    let _ = writeln!(out, "- Namespaces: {}", ns_list.join(", "));
    let _ = writeln!(out, "- Pairs: {}, tools: {}, verdicts: {}", report.pairs.len(), tools.len(), report.verdicts.len());
    if !m.timestamp.is_empty() {
        let _ = writeln!(out, "- Generated: {}", m.timestamp);
    }

    out.push_str("\n## Overall results\n");
    for &ns in &namespaces {
        let _ = writeln!(out, "\n### {}\n", namespace_title(ns));
        out.push_str("| Tool | Pass | Fail | Inconclusive |\n|---|---:|---:|---:|\n");
        for tool in &tools {
            let c = report.tool_totals.get(*tool).and_then(|x| x.get(&ns)).copied().unwrap_or_default();
            let _ = writeln!(out, "| {tool} | {} | {} | {} |", c.pass, c.fail, c.inconclusive);
        }
    }

    out.push_str("\n## Results per protein\n");
    for &ns in &namespaces {
        let _ = writeln!(out, "\n### {}\n", namespace_title(ns));
        out.push_str("| Tool | Protein | Pass | Fail | Inconclusive |\n|---|---|---:|---:|---:|\n");
        for tool in &tools {
            for (protein, by_ns) in report.protein_totals.get(*tool).into_iter().flatten() {
                let c = by_ns.get(&ns).copied().unwrap_or_default();
                let _ = writeln!(out, "| {tool} | {protein} | {} | {} | {} |", c.pass, c.fail, c.inconclusive);
            }
        }
    }

    out.push_str("\n## Percentage of tools passing per test case pair\n\n");
    out.push_str("| Protein | Variant | Change | Category |");
    for ns in &namespaces {
        let _ = write!(out, " {} |", ns.short());
    }
    out.push_str("\n|---|---|---|---|");
    for _ in &namespaces {
        out.push_str("---:|");
    }
    out.push('\n');
    for p in &report.pairs {
        let _ = write!(out, "| {} | {} | {} | {} |", p.protein_id, p.variant_id, p.change, p.category.as_str());
        for ns in &namespaces {
            let pct = report.variant_pass_pct.get(&p.variant_id).and_then(|x| x.get(ns)).copied().flatten();
            let _ = write!(out, " {} |", format_percentage(pct));
        }
        out.push('\n');
    }
    out
}
