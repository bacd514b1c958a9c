//! Cost ledgers and the per-type, per-strategy comparison tables.
//!
//! Money is kept as exact decimals. Rounding happens only when a value is
//! displayed: dollars to cents (half-up), success rates truncated to one
//! decimal, savings rounded half-up to one decimal.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::issues::IssueType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CheapOnly,
    AdvancedOnRemaining,
    AdvancedOnly,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::CheapOnly,
        Strategy::AdvancedOnRemaining,
        Strategy::AdvancedOnly,
        Strategy::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CheapOnly => "cheap_only",
            Strategy::AdvancedOnRemaining => "advanced_on_remaining",
            Strategy::AdvancedOnly => "advanced_only",
            Strategy::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub issues_total: u64,
    pub issues_resolved: u64,
    pub cost_usd: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("inconsistent ledger cell {cell}: {reason}")]
    ConsistencyError { cell: String, reason: String },
    #[error("advanced-only baseline cost is zero")]
    ZeroBaseline,
    #[error("ledger row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e.to_string())
    }
}

fn cell(ty: IssueType, st: Strategy) -> String {
    format!("{ty}/{st}")
}

/// Per issue-type × strategy tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    pub cheap_model: Option<String>,
    pub advanced_model: Option<String>,
    entries: BTreeMap<IssueType, BTreeMap<Strategy, LedgerEntry>>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_models(cheap: impl Into<String>, advanced: impl Into<String>) -> Self {
        CostLedger {
            cheap_model: Some(cheap.into()),
            advanced_model: Some(advanced.into()),
            entries: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, ty: IssueType, st: Strategy) -> Option<&LedgerEntry> {
        self.entries.get(&ty).and_then(|m| m.get(&st))
    }

    pub fn set(&mut self, ty: IssueType, st: Strategy, entry: LedgerEntry) {
        self.entries.entry(ty).or_default().insert(st, entry);
    }

    /// Adds to a cell, creating it if needed.
    pub fn record(&mut self, ty: IssueType, st: Strategy, total: u64, resolved: u64, cost: Decimal) {
        let e = self.entries.entry(ty).or_default().entry(st).or_default();
        e.issues_total += total;
        e.issues_resolved += resolved;
        e.cost_usd += cost;
    }

    pub fn types(&self) -> impl Iterator<Item = IssueType> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IssueType, Strategy, &LedgerEntry)> {
        self.entries
            .iter()
            .flat_map(|(ty, m)| m.iter().map(move |(st, e)| (*ty, *st, e)))
    }

    /// Fills in missing hybrid cells from the cheap and remaining-stage cells.
    pub fn derive_hybrid(&mut self) {
        for m in self.entries.values_mut() {
            if m.contains_key(&Strategy::Hybrid) {
                continue;
            }
            let (Some(cheap), Some(rest)) = (
                m.get(&Strategy::CheapOnly).copied(),
                m.get(&Strategy::AdvancedOnRemaining).copied(),
            ) else {
                continue;
            };
            m.insert(
                Strategy::Hybrid,
                LedgerEntry {
                    issues_total: cheap.issues_total,
                    issues_resolved: cheap.issues_resolved + rest.issues_resolved,
                    cost_usd: hybrid_cost(cheap.cost_usd, rest.cost_usd),
                },
            );
        }
    }

    /// Sum of a strategy's cost across all types.
    pub fn total_cost(&self, st: Strategy) -> Option<Decimal> {
        let costs: Vec<Decimal> = self
            .entries
            .values()
            .filter_map(|m| m.get(&st).map(|e| e.cost_usd))
            .collect();
        if costs.is_empty() {
            None
        } else {
            Some(costs.into_iter().sum())
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let err = |ty, st, reason: String| ReportError::ConsistencyError {
            cell: cell(ty, st),
            reason,
        };
        for (ty, st, e) in self.iter() {
            if e.issues_resolved > e.issues_total {
                return Err(err(
                    ty,
                    st,
                    format!("resolved {} > total {}", e.issues_resolved, e.issues_total),
                ));
            }
            if e.cost_usd.is_sign_negative() && !e.cost_usd.is_zero() {
                return Err(err(ty, st, format!("negative cost {}", e.cost_usd)));
            }
        }
        for (ty, m) in &self.entries {
            let ty = *ty;
            let cheap = m.get(&Strategy::CheapOnly);
            let rest = m.get(&Strategy::AdvancedOnRemaining);
            if let (Some(c), Some(r)) = (cheap, rest) {
                let remaining = c.issues_total - c.issues_resolved;
                if r.issues_total != remaining {
                    return Err(err(
                        ty,
                        Strategy::AdvancedOnRemaining,
                        format!("total {} but {} issues remained after the cheap stage", r.issues_total, remaining),
                    ));
                }
            }
            if let (Some(c), Some(r), Some(h)) = (cheap, rest, m.get(&Strategy::Hybrid)) {
                if h.cost_usd != c.cost_usd + r.cost_usd {
                    return Err(err(
                        ty,
                        Strategy::Hybrid,
                        format!("cost {} != {} + {}", h.cost_usd, c.cost_usd, r.cost_usd),
                    ));
                }
                if h.issues_resolved != c.issues_resolved + r.issues_resolved {
                    return Err(err(
                        ty,
                        Strategy::Hybrid,
                        format!(
                            "resolved {} != {} + {}",
                            h.issues_resolved, c.issues_resolved, r.issues_resolved
                        ),
                    ));
                }
                if h.issues_total != c.issues_total {
                    return Err(err(
                        ty,
                        Strategy::Hybrid,
                        format!("total {} != cheap-stage total {}", h.issues_total, c.issues_total),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Writes `issue_type,strategy,total,resolved,cost` rows, preceded by
    /// `# cheap_model=` / `# advanced_model=` comments when known.
    pub fn write<W: Write>(&self, mut sink: W) -> Result<(), ReportError> {
        if let Some(m) = &self.cheap_model {
            writeln!(sink, "# cheap_model={m}")?;
        }
        if let Some(m) = &self.advanced_model {
            writeln!(sink, "# advanced_model={m}")?;
        }
        writeln!(sink, "issue_type,strategy,total,resolved,cost")?;
        for (ty, st, e) in self.iter() {
            writeln!(
                sink,
                "{ty},{st},{},{},{}",
                e.issues_total,
                e.issues_resolved,
                e.cost_usd.normalize()
            )?;
        }
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ledger is UTF-8")
    }

    pub fn read<R: Read>(mut source: R) -> Result<Self, ReportError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let mut ledger = CostLedger::default();
        let mut body = String::new();
        for line in text.lines() {
            let t = line.trim();
            if let Some(meta) = t.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    match k.trim() {
                        "cheap_model" => ledger.cheap_model = Some(v.trim().to_string()),
                        "advanced_model" => ledger.advanced_model = Some(v.trim().to_string()),
                        _ => {}
                    }
                }
                continue;
            }
            body.push_str(line);
            body.push('\n');
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| ReportError::BadRow { row: 0, reason: e.to_string() })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["issue_type", "strategy", "total", "resolved", "cost"] {
            return Err(ReportError::BadRow {
                row: 0,
                reason: format!("unexpected header `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        for (i, row) in reader.records().enumerate() {
            let row_no = i + 1;
            let bad = |reason: String| ReportError::BadRow { row: row_no, reason };
            let row = row.map_err(|e| bad(e.to_string()))?;
            if row.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", row.len())));
            }
            let ty: IssueType = row[0].parse().map_err(|e: crate::issues::UnknownIssueType| bad(e.to_string()))?;
            let st: Strategy = row[1].parse().map_err(bad)?;
            let total: u64 = row[2].parse().map_err(|_| bad(format!("bad total `{}`", &row[2])))?;
            let resolved: u64 = row[3].parse().map_err(|_| bad(format!("bad resolved `{}`", &row[3])))?;
            let cost = Decimal::from_str(&row[4]).map_err(|_| bad(format!("bad cost `{}`", &row[4])))?;
            if ledger.get(ty, st).is_some() {
                return Err(bad(format!("duplicate cell {}", cell(ty, st))));
            }
            ledger.set(
                ty,
                st,
                LedgerEntry {
                    issues_total: total,
                    issues_resolved: resolved,
                    cost_usd: cost,
                },
            );
        }
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        Self::read(std::fs::File::open(path)?)
    }
}

/// Success rate with its fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub resolved: u64,
    pub total: u64,
    /// `None` when `total` is zero.
    pub percent: Option<Decimal>,
}

impl fmt::Display for SuccessRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.percent {
            None => f.write_str("n/a"),
            Some(p) => write!(f, "{p:.1}% ({}/{})", self.resolved, self.total),
        }
    }
}

/// `100 * resolved / total`, truncated to one decimal place.
pub fn success_rate(resolved: u64, total: u64) -> Result<SuccessRate, ReportError> {
    if resolved > total {
        return Err(ReportError::ConsistencyError {
            cell: "success_rate".into(),
            reason: format!("resolved {resolved} > total {total}"),
        });
    }
    let percent = (total > 0).then(|| {
        (Decimal::from(resolved) * Decimal::from(100) / Decimal::from(total))
            .round_dp_with_strategy(1, RoundingStrategy::ToZero)
    });
    Ok(SuccessRate {
        resolved,
        total,
        percent,
    })
}

/// Exact sum of stage costs.
pub fn hybrid_cost(stage1: Decimal, stage2: Decimal) -> Decimal {
    stage1 + stage2
}

/// Dollars rounded half-up to cents, e.g. `$4.76`.
pub fn format_usd(amount: Decimal) -> String {
    let r = amount.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
    format!("${r:.2}")
}

/// Percentage saved by the hybrid route relative to advanced-only, rounded half-up to 0.1.
pub fn savings_vs_advanced(hybrid_total: Decimal, advanced_only_total: Decimal) -> Result<Decimal, ReportError> {
    if advanced_only_total <= Decimal::ZERO {
        return Err(ReportError::ZeroBaseline);
    }
    Ok(
        (Decimal::from(100) * (advanced_only_total - hybrid_total) / advanced_only_total)
            .round_dp_with_strategy(1, RoundingStrategy::MidpointAwayFromZero),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    StructuredRows,
    Html,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "tty" => Ok(ReportFormat::Text),
            "structured" | "json" => Ok(ReportFormat::StructuredRows),
            "html" => Ok(ReportFormat::Html),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub issue_type: IssueType,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_usd: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percent: Option<Decimal>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub key: String,
    pub label: String,
    pub cells: Vec<ReportCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub columns: Vec<IssueType>,
    pub rows: Vec<ReportRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hybrid_total_usd: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub advanced_only_total_usd: Option<Decimal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub savings_pct: Option<Decimal>,
}

fn column_label(ty: IssueType) -> &'static str {
    match ty {
        IssueType::Bug => "Bugs",
        IssueType::Vulnerability => "Vulnerability",
        IssueType::CodeSmell => "Code Smell",
    }
}

/// Builds the comparison table. Row order: issue totals, cheap-only,
/// advanced on remaining, advanced-only, hybrid, cheap success rate,
/// advanced success rate, hybrid success rate.
pub fn build_table(ledger: &CostLedger) -> Result<ReportTable, ReportError> {
    ledger.validate()?;
    let columns = IssueType::ALL.to_vec();
    if ledger.is_empty() {
        return Ok(ReportTable {
            columns,
            rows: Vec::new(),
            hybrid_total_usd: None,
            advanced_only_total_usd: None,
            savings_pct: None,
        });
    }
    let cheap = ledger.cheap_model.as_deref().unwrap_or("Cheap model");
    let adv = ledger.advanced_model.as_deref().unwrap_or("Advanced model");

    let missing = |ty| ReportCell {
        issue_type: ty,
        count: None,
        total: None,
        cost_usd: None,
        percent: None,
        text: "-".into(),
    };

    let mut rows = Vec::new();
    rows.push(ReportRow {
        key: "issues".into(),
        label: "# Issues".into(),
        cells: columns
            .iter()
            .map(|&ty| {
                let total = Strategy::ALL
                    .iter()
                    .filter(|s| **s != Strategy::AdvancedOnRemaining)
                    .find_map(|s| ledger.get(ty, *s))
                    .map(|e| e.issues_total);
                match total {
                    Some(t) => ReportCell {
                        issue_type: ty,
                        count: Some(t),
                        total: Some(t),
                        cost_usd: None,
                        percent: None,
                        text: t.to_string(),
                    },
                    None => missing(ty),
                }
            })
            .collect(),
    });

    let count_rows = [
        (Strategy::CheapOnly, format!("{cheap} only (# Revised / Cost)")),
        (Strategy::AdvancedOnRemaining, format!("{adv} for remaining (# Issues / Cost)")),
        (Strategy::AdvancedOnly, format!("{adv} only (# Revised / Cost)")),
        (Strategy::Hybrid, format!("{cheap} + {adv} (# Revised / Cost)")),
    ];
    for (st, label) in count_rows {
        rows.push(ReportRow {
            key: st.as_str().into(),
            label,
            cells: columns
                .iter()
                .map(|&ty| match ledger.get(ty, st) {
                    Some(e) => ReportCell {
                        issue_type: ty,
                        count: Some(e.issues_resolved),
                        total: Some(e.issues_total),
                        cost_usd: Some(e.cost_usd),
                        percent: None,
                        text: format!("{} / {}", e.issues_resolved, format_usd(e.cost_usd)),
                    },
                    None => missing(ty),
                })
                .collect(),
        });
    }

    let rate_rows = [
        (Strategy::CheapOnly, "cheap_success_rate", format!("{cheap} success rate (# Revised / Total)")),
        (Strategy::AdvancedOnly, "advanced_success_rate", format!("{adv} success rate (# Revised / Total)")),
        (Strategy::Hybrid, "hybrid_success_rate", format!("{cheap} + {adv} success rate (# Revised / Total)")),
    ];
    for (st, key, label) in rate_rows {
        let mut cells = Vec::new();
        for &ty in &columns {
            cells.push(match ledger.get(ty, st) {
                Some(e) => {
                    let rate = success_rate(e.issues_resolved, e.issues_total)?;
                    ReportCell {
                        issue_type: ty,
                        count: Some(e.issues_resolved),
                        total: Some(e.issues_total),
                        cost_usd: None,
                        percent: rate.percent,
                        text: rate.to_string(),
                    }
                }
                None => missing(ty),
            });
        }
        rows.push(ReportRow {
            key: key.into(),
            label,
            cells,
        });
    }

    let hybrid_total = ledger.total_cost(Strategy::Hybrid);
    let advanced_total = ledger.total_cost(Strategy::AdvancedOnly);
    let savings_pct = match (hybrid_total, advanced_total) {
        (Some(h), Some(a)) => savings_vs_advanced(h, a).ok(),
        _ => None,
    };
    Ok(ReportTable {
        columns,
        rows,
        hybrid_total_usd: hybrid_total,
        advanced_only_total_usd: advanced_total,
        savings_pct,
    })
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_report(ledger: &CostLedger, format: ReportFormat) -> Result<String, ReportError> {
    let table = build_table(ledger)?;
    Ok(match format {
        ReportFormat::StructuredRows => serde_json::to_string_pretty(&table).expect("table serializes"),
        ReportFormat::Text => render_text(&table),
        ReportFormat::Html => render_html(&table),
    })
}

fn render_text(table: &ReportTable) -> String {
    let header: Vec<String> = std::iter::once("Metric \\ Type".to_string())
        .chain(table.columns.iter().map(|t| column_label(*t).to_string()))
        .collect();
    let body: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            std::iter::once(r.label.clone())
                .chain(r.cells.iter().map(|c| c.text.clone()))
                .collect()
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (i, c) in row.iter().enumerate() {
            widths[i] = widths[i].max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<w$}", c, w = widths[i]))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    out.push_str(&line(&header));
    out.push('\n');
    out.push_str(
        &widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-"),
    );
    out.push('\n');
    for row in &body {
        out.push_str(&line(row));
        out.push('\n');
    }
    if let (Some(h), Some(a)) = (table.hybrid_total_usd, table.advanced_only_total_usd) {
        out.push_str(&format!(
            "Total cost: hybrid {} vs advanced-only {}",
            format_usd(h),
            format_usd(a)
        ));
        if let Some(s) = table.savings_pct {
            out.push_str(&format!(" (savings {s:.1}%)"));
        }
        out.push('\n');
    }
    out
}

fn render_html(table: &ReportTable) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>wall report</title></head>\n<body>\n<table class=\"wall-report\">\n<thead><tr><th>Metric \\ Type</th>",
    );
    for c in &table.columns {
        out.push_str(&format!("<th>{}</th>", column_label(*c)));
    }
    out.push_str("</tr></thead>\n<tbody>\n");
    for r in &table.rows {
        out.push_str(&format!("<tr data-key=\"{}\"><th>{}</th>", r.key, html_escape(&r.label)));
        for c in &r.cells {
            out.push_str(&format!("<td>{}</td>", html_escape(&c.text)));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</tbody>\n</table>\n");
    if let Some(s) = table.savings_pct {
        out.push_str(&format!("<p class=\"wall-savings\">Savings vs advanced-only: {s:.1}%</p>\n"));
    }
    out.push_str("</body>\n</html>\n");
    out
}
