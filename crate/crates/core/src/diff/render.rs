use std::fmt::Write as _;

use super::{DiffLine, DiffMetrics, LineKind};

pub const REMOVED_CLASS: &str = "wall-removed";
pub const ADDED_CLASS: &str = "wall-added";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    SideBySideHtml,
    /// Plain unified listing; `color` adds ANSI yellow/green.
    Terminal { color: bool },
    Structured,
}

pub fn render_diff(diff: &[DiffLine], format: RenderFormat) -> String {
    match format {
        RenderFormat::SideBySideHtml => render_html(diff, None, None),
        RenderFormat::Terminal { color } => render_terminal(diff, color),
        RenderFormat::Structured => render_structured(diff),
    }
}

pub fn render_terminal(diff: &[DiffLine], color: bool) -> String {
    let mut out = String::new();
    for l in diff {
        let (mark, ansi) = match l.kind {
            LineKind::Unchanged => (' ', None),
            LineKind::Removed => ('-', Some("33")),
            LineKind::Added => ('+', Some("32")),
        };
        match (color, ansi) {
            (true, Some(code)) => {
                let _ = writeln!(out, "\x1b[{code}m{mark} {}\x1b[0m", l.text);
            }
            _ => {
                let _ = writeln!(out, "{mark} {}", l.text);
            }
        }
    }
    out
}

/// Machine-readable rows: `[{"kind","original_no","revised_no","text"}, ...]`.
pub fn render_structured(diff: &[DiffLine]) -> String {
    serde_json::to_string_pretty(diff).expect("diff rows serialize")
}

pub fn parse_structured(text: &str) -> Result<Vec<DiffLine>, serde_json::Error> {
    serde_json::from_str(text)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn num(n: Option<usize>) -> String {
    n.map(|n| n.to_string()).unwrap_or_default()
}

/// Self-contained side-by-side document. Removed rows are yellow, added rows green.
pub fn render_html(diff: &[DiffLine], labels: Option<(&str, &str)>, metrics: Option<&DiffMetrics>) -> String {
    let (left, right) = labels.unwrap_or(("Original", "Revised"));
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>wall diff</title>\n<style>\n");
    out.push_str("table.wall-diff{border-collapse:collapse;font-family:monospace;width:100%}\n");
    out.push_str("table.wall-diff td{padding:0 6px;white-space:pre;vertical-align:top}\n");
    out.push_str("td.ln{color:#888;text-align:right;width:1%}\n");
    let _ = writeln!(out, "tr.{REMOVED_CLASS} td.old{{background:#fff59d}}");
    let _ = writeln!(out, "tr.{ADDED_CLASS} td.new{{background:#c8e6c9}}");
    out.push_str("</style>\n</head>\n<body>\n");
    if let Some(m) = metrics {
        let _ = writeln!(out, "<p class=\"wall-metrics\">{}</p>", escape(&m.summary()));
    }
    let _ = writeln!(
        out,
        "<table class=\"wall-diff\">\n<thead><tr><th colspan=\"2\">{}</th><th colspan=\"2\">{}</th></tr></thead>\n<tbody>",
        escape(left),
        escape(right)
    );
    for l in diff {
        let text = escape(&l.text);
        match l.kind {
            LineKind::Unchanged => {
                let _ = writeln!(
                    out,
                    "<tr><td class=\"ln\">{}</td><td class=\"old\">{text}</td><td class=\"ln\">{}</td><td class=\"new\">{text}</td></tr>",
                    num(l.original_line_no),
                    num(l.revised_line_no)
                );
            }
            LineKind::Removed => {
                let _ = writeln!(
                    out,
                    "<tr class=\"{REMOVED_CLASS}\"><td class=\"ln\">{}</td><td class=\"old\">{text}</td><td class=\"ln\"></td><td class=\"new\"></td></tr>",
                    num(l.original_line_no)
                );
            }
            LineKind::Added => {
                let _ = writeln!(
                    out,
                    "<tr class=\"{ADDED_CLASS}\"><td class=\"ln\"></td><td class=\"old\"></td><td class=\"ln\">{}</td><td class=\"new\">{text}</td></tr>",
                    num(l.revised_line_no)
                );
            }
        }
    }
    out.push_str("</tbody>\n</table>\n</body>\n</html>\n");
    out
}
