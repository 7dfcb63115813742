use std::collections::BTreeMap;
use std::fmt::Write;

use super::{populated_kinds, EvalReport, FoldSummary, Prf};

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn prf_cells(p: &Prf) -> String {
    format!("{:>7} {:>7} {:>7}", pct(p.precision), pct(p.recall), pct(p.f1))
}

/// Main/sub-argument EM_F1 and Token_F1 summary followed by a per-kind
/// breakdown. Values are percentages with two decimals.
pub fn render_report(label: &str, report: &EvalReport) -> String {
    let mut s = String::new();
    let w = label.len().max(8);
    writeln!(s, "{:w$}  {:^17}  {:^17}  {:^17}", "", "Main-arguments", "Sub-arguments", "Overall").unwrap();
    writeln!(s, "{:w$}  {:>8} {:>8}  {:>8} {:>8}  {:>8} {:>8}", "", "EM_F1", "Token_F1", "EM_F1", "Token_F1", "EM_F1", "Token_F1")
        .unwrap();
    writeln!(
        s,
        "{label:w$}  {:>8} {:>8}  {:>8} {:>8}  {:>8} {:>8}",
        pct(report.em.main.f1),
        pct(report.token.main.f1),
        pct(report.em.sub.f1),
        pct(report.token.sub.f1),
        pct(report.em.overall.f1),
        pct(report.token.overall.f1),
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(
        s,
        "{:20} {:>7} {:>7} {:>7}  {:>7} {:>7} {:>7}  {:>6} {:>6}",
        "argument", "EM_P", "EM_R", "EM_F1", "Tok_P", "Tok_R", "Tok_F1", "gold", "pred"
    )
    .unwrap();
    let mut kinds = populated_kinds(&report.em);
    kinds.sort_by_key(|k| (!k.is_main(), k.order()));
    for kind in kinds {
        let em = report.em.kind(kind);
        let name = if kind.is_main() { kind.name().to_string() } else { format!("  {}", kind.name()) };
        writeln!(
            s,
            "{name:20} {}  {}  {:>6} {:>6}",
            prf_cells(&em),
            prf_cells(&report.token.kind(kind)),
            em.gold,
            em.predicted
        )
        .unwrap();
    }
    writeln!(
        s,
        "instances: {}  matching: {:?}/{:?}",
        report.instances, report.options.semantics, report.options.averaging
    )
    .unwrap();
    s
}

/// Values for one row: a cross-run summary, or the metrics of a single run.
pub enum RowValues<'a> {
    Folds(&'a FoldSummary),
    Single(&'a BTreeMap<String, f64>),
}

pub struct FoldRow<'a> {
    pub label: &'a str,
    pub values: RowValues<'a>,
    /// Average number of training cases, when known.
    pub cases: Option<f64>,
}

impl FoldRow<'_> {
    fn runs(&self) -> usize {
        match self.values {
            RowValues::Folds(s) => s.n_runs,
            RowValues::Single(_) => 1,
        }
    }

    fn cell(&self, metric: &str) -> String {
        match self.values {
            RowValues::Folds(s) => match s.get(metric) {
                Some(m) => format!("{}±{}", pct(m.mean), pct(m.std)),
                None => "-".into(),
            },
            RowValues::Single(m) => m.get(metric).map(|v| pct(*v)).unwrap_or_else(|| "-".into()),
        }
    }
}

/// Cross-run table: mean±std per row for main, sub and overall arguments.
pub fn render_fold_table(rows: &[FoldRow<'_>]) -> String {
    let w = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(8);
    let mut s = String::new();
    writeln!(
        s,
        "{:w$}  {:>13} {:>13}  {:>13} {:>13}  {:>13} {:>13}  {:>9} {:>4}",
        "", "Main EM_F1", "Main Tok_F1", "Sub EM_F1", "Sub Tok_F1", "EM_F1", "Token_F1", "Avg.Cases", "runs"
    )
    .unwrap();
    for r in rows {
        let cases = r.cases.map(|c| format!("{c:.0}")).unwrap_or_else(|| "-".into());
        writeln!(
            s,
            "{:w$}  {:>13} {:>13}  {:>13} {:>13}  {:>13} {:>13}  {:>9} {:>4}",
            r.label,
            r.cell("main.em_f1"),
            r.cell("main.token_f1"),
            r.cell("sub.em_f1"),
            r.cell("sub.token_f1"),
            r.cell("overall.em_f1"),
            r.cell("overall.token_f1"),
            cases,
            r.runs()
        )
        .unwrap();
    }
    s
}
