use std::fmt::Write;

use serde::Serialize;

use super::EvalReport;
use crate::rewrite::RewriteType;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedReport<F> {
    pub model: String,
    pub report: EvalReport<F>,
}

fn num<F: Scalar>(x: F) -> String {
    format!("{:.2}", x.to_f64().unwrap_or(f64::NAN))
}

fn breakdown<F: Scalar>(overall: F, cols: impl Iterator<Item = Option<F>>) -> String {
    let parts: Vec<String> = cols.map(|c| c.map_or_else(|| "-".into(), num)).collect();
    format!("{} ({})", num(overall), parts.join(", "))
}

/// Renders the rewrite-type frequency table and the metric table, one row
/// per model. The gold-type row is taken from the first report.
pub fn render_tables<F: Scalar>(reports: &[NamedReport<F>]) -> String {
    let mut out = String::new();
    let name_w = reports
        .iter()
        .map(|r| r.model.chars().count())
        .chain([9])
        .max()
        .unwrap();

    out.push_str("Rewrite type frequency (%)\n");
    let _ = write!(out, "{:<name_w$}", "");
    for t in RewriteType::ALL {
        let _ = write!(out, " {:>9}", t.name());
    }
    out.push('\n');
    let mut row = |label: &str, h: &crate::rewrite::TypeHistogram<F>| {
        let _ = write!(out, "{label:<name_w$}");
        for t in RewriteType::ALL {
            let _ = write!(out, " {:>9}", num(h.percentage(t)));
        }
        out.push('\n');
    };
    if let Some(first) = reports.first() {
        row("Test Data", &first.report.gold_types);
    }
    for r in reports {
        row(&r.model, &r.report.prediction_types);
    }

    let abbrevs: Vec<&str> = RewriteType::BREAKDOWN.iter().map(|t| t.abbrev()).collect();
    let rec_head = format!("rec. ({})", abbrevs.join(", "));
    let pre_head = format!("pre. ({})", abbrevs.join(", "));
    let cells: Vec<[String; 9]> = reports
        .iter()
        .map(|r| {
            let rep = &r.report;
            let cols = rep.breakdown_columns();
            [
                r.model.clone(),
                num(rep.cov),
                breakdown(rep.rec, cols.iter().map(|c| c.map(|s| s.rec))),
                breakdown(rep.pre, cols.iter().map(|c| c.map(|s| s.pre))),
                num(rep.bleu),
                num(rep.rouge_l),
                num(rep.rats),
                num(rep.rtfw_rec),
                num(rep.rtfw_pre),
            ]
        })
        .collect();
    let head = [
        String::new(),
        "cov.".into(),
        rec_head,
        pre_head,
        "bleu".into(),
        "rougeL".into(),
        "rats".into(),
        "rtfw_rec.".into(),
        "rtfw_pre.".into(),
    ];
    let widths: Vec<usize> = (0..9)
        .map(|c| {
            cells
                .iter()
                .map(|r| r[c].chars().count())
                .chain([head[c].chars().count()])
                .max()
                .unwrap()
        })
        .collect();
    out.push_str("\nEvaluation\n");
    for line in std::iter::once(&head).chain(cells.iter()) {
        for (c, cell) in line.iter().enumerate() {
            let w = widths[c];
            match c {
                0 => {
                    let _ = write!(out, "{cell:<w$}");
                }
                6 => {
                    let _ = write!(out, " | {cell:>w$}");
                }
                _ => {
                    let _ = write!(out, " {cell:>w$}");
                }
            }
        }
        out.push('\n');
    }
    out
}
