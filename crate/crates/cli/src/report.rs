//! Evaluation output files: ROC curves, per-method reports, comparisons.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use tracelm_core::eval::{compare, EvalReport, RocCurve};

pub const ROC_HEADER: &str = "# threshold\tfar\tdr";

/// Renders a ROC curve as TSV, one operating point per line. Infinite
/// thresholds print as `inf` / `-inf`.
#[must_use]
pub fn roc_tsv(curve: &RocCurve) -> String {
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    for p in curve.points() {
        let _ = writeln!(out, "{}\t{}\t{}", p.threshold, p.far, p.dr);
    }
    out
}

pub fn write_roc_tsv(path: &Path, curve: &RocCurve) -> Result<()> {
    fs::write(path, roc_tsv(curve))
        .with_context(|| format!("writing ROC table {}", path.display()))
}

/// Renders one method's evaluation as `key = value` lines.
#[must_use]
pub fn report_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "method = {}", report.name);
    let _ = writeln!(out, "auc = {}", report.auc);
    for &(target, far) in &report.far_at {
        let _ = writeln!(out, "far_at_dr_{target} = {far}");
    }
    let _ = writeln!(out, "normal_count = {}", report.normal_count);
    let _ = writeln!(out, "attack_count = {}", report.attack_count);
    out
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    fs::write(path, report_text(report))
        .with_context(|| format!("writing report {}", path.display()))
}

/// Renders a ranking of several methods (best area under the curve first)
/// as TSV. The detection-rate targets of the first report name the
/// false-alarm columns; every report is expected to carry the same targets.
#[must_use]
pub fn comparison_tsv(reports: &[EvalReport]) -> String {
    let ranked = compare(reports);
    let mut out = String::from("method\tauc");
    if let Some(first) = ranked.first() {
        for &(target, _) in &first.far_at {
            let _ = write!(out, "\tfar_at_dr_{target}");
        }
    }
    out.push('\n');
    for r in &ranked {
        let _ = write!(out, "{}\t{}", r.name, r.auc);
        for &(_, far) in &r.far_at {
            let _ = write!(out, "\t{far}");
        }
        out.push('\n');
    }
    out
}

pub fn write_comparison(path: &Path, reports: &[EvalReport]) -> Result<()> {
    fs::write(path, comparison_tsv(reports))
        .with_context(|| format!("writing comparison table {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tracelm_core::eval::roc;

    #[test]
    fn roc_tsv_lists_every_point_with_infinities() {
        let curve = roc(&[1.0, 2.0], &[3.0]).unwrap();
        let text = roc_tsv(&curve);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], ROC_HEADER);
        assert_eq!(lines.len(), 1 + curve.points().len());
        assert!(lines[1].starts_with("inf\t0\t0"), "{}", lines[1]);
        assert!(lines.last().unwrap().starts_with("-inf\t1\t1"));
    }

    #[test]
    fn report_text_is_keyed_and_ordered() {
        let report = EvalReport {
            name: "lm-nll".into(),
            auc: 0.9375,
            far_at: vec![(0.9, 0.125), (1.0, 0.5)],
            normal_count: 8,
            attack_count: 4,
        };
        let text = report_text(&report);
        assert_eq!(
            text,
            "method = lm-nll\nauc = 0.9375\nfar_at_dr_0.9 = 0.125\n\
             far_at_dr_1 = 0.5\nnormal_count = 8\nattack_count = 4\n"
        );
    }

    #[test]
    fn comparison_ranks_by_auc_then_name() {
        let mk = |name: &str, auc: f64| EvalReport {
            name: name.into(),
            auc,
            far_at: vec![(1.0, 0.25)],
            normal_count: 1,
            attack_count: 1,
        };
        let text = comparison_tsv(&[mk("b", 0.5), mk("a", 0.5), mk("c", 0.75)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method\tauc\tfar_at_dr_1");
        assert!(lines[1].starts_with("c\t0.75\t"));
        assert!(lines[2].starts_with("a\t0.5\t"));
        assert!(lines[3].starts_with("b\t0.5\t"));
    }
}
