use std::fmt::Write;

use super::{ApMode, EvalReport};

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

/// One column per class plus mAP, values as percentages, followed by counts.
pub fn render_table(report: &EvalReport) -> String {
    let mut headers: Vec<String> = report.classes.iter().map(|c| c.class.clone()).collect();
    headers.push("mAP".into());
    let mut values: Vec<String> = report.classes.iter().map(|c| pct(c.ap)).collect();
    values.push(pct(report.map));
    let widths: Vec<usize> = headers.iter().zip(&values).map(|(h, v)| h.len().max(v.len())).collect();

    let mode = match report.ap_mode {
        ApMode::AllPoints => "all-points",
        ApMode::ElevenPoint => "11-point",
    };
    let mut out = String::new();
    writeln!(out, "Identification results (IoU >= {:.2}, {mode} AP)", report.iou_thresh).unwrap();
    let row = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    writeln!(out, "{}", row(&headers)).unwrap();
    writeln!(out, "{}", row(&values)).unwrap();
    writeln!(out).unwrap();

    let name_w = report.classes.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:<name_w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}", "class", "gt", "tp", "fp", "fn", "AP").unwrap();
    for c in &report.classes {
        writeln!(
            out,
            "{:<name_w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}",
            c.class,
            c.gt_count,
            c.tp,
            c.fp,
            c.fn_,
            pct(c.ap)
        )
        .unwrap();
    }
    out
}

/// Two-column method/mAP comparison across runs.
pub fn render_ablation(runs: &[(String, EvalReport)]) -> String {
    let name_w = runs.iter().map(|(n, _)| n.len()).max().unwrap_or(7).max("Methods".len());
    let mut out = String::new();
    writeln!(out, "{:<name_w$}  {:>6}", "Methods", "mAP").unwrap();
    for (name, r) in runs {
        writeln!(out, "{:<name_w$}  {:>6}", name, pct(r.map)).unwrap();
    }
    out
}
