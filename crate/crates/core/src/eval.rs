//! ROC curves, AUC, and operating-point queries.
//!
//! Scores follow the "higher is more anomalous" convention and a trace is
//! flagged abnormal when its score exceeds the threshold (the boundary
//! itself classifies as normal). Sweeping the threshold over every observed
//! score — plus the two infinities — yields the complete, exact ROC
//! staircase: the false-alarm rate (FAR) is measured over normal-validation
//! scores and the detection rate (DR) over attack scores.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One operating point: flag scores strictly above `threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    /// Fraction of normal-validation traces flagged (false alarms).
    pub far: f64,
    /// Fraction of attack traces flagged (detections).
    pub dr: f64,
}

/// An ROC staircase: points with non-decreasing FAR and DR, starting at
/// `(0, 0)` and ending at `(1, 1)`, deduplicated, one per distinct
/// achievable operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    points: Vec<RocPoint>,
}

impl RocCurve {
    /// Normalizes raw operating points into a curve: sorts by `(far, dr)`
    /// (stably, so among duplicates the first — largest-threshold — point
    /// wins), drops repeated `(far, dr)` pairs, and appends the trivial
    /// endpoints if the sweep did not produce them.
    #[must_use]
    pub fn from_points(mut points: Vec<RocPoint>) -> Self {
        points.sort_by(|p, q| {
            p.far
                .partial_cmp(&q.far)
                .expect("FAR is finite")
                .then(p.dr.partial_cmp(&q.dr).expect("DR is finite"))
        });
        let mut dedup: Vec<RocPoint> = Vec::with_capacity(points.len() + 2);
        for p in points {
            if dedup.last().map_or(true, |l| l.far != p.far || l.dr != p.dr) {
                dedup.push(p);
            }
        }
        if dedup.first().map_or(true, |p| p.far != 0.0 || p.dr != 0.0) {
            dedup.insert(
                0,
                RocPoint {
                    threshold: f64::INFINITY,
                    far: 0.0,
                    dr: 0.0,
                },
            );
        }
        if dedup.last().map_or(true, |p| p.far != 1.0 || p.dr != 1.0) {
            dedup.push(RocPoint {
                threshold: f64::NEG_INFINITY,
                far: 1.0,
                dr: 1.0,
            });
        }
        debug_assert!(
            dedup.windows(2).all(|w| w[0].dr <= w[1].dr),
            "a threshold sweep always yields a DR monotone in FAR"
        );
        RocCurve { points: dedup }
    }

    #[must_use]
    pub fn points(&self) -> &[RocPoint] {
        &self.points
    }
}

fn check_scores(scores: &[f64], what: &'static str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty(what));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Builds the exact ROC curve for the given score sets by sweeping a
/// threshold over every distinct observed score (descending) plus the two
/// infinite endpoints. Ties — within and across the two sides — are handled
/// by construction: all equal scores cross the threshold together.
pub fn roc(normal: &[f64], attack: &[f64]) -> Result<RocCurve> {
    check_scores(normal, "normal-validation scores")?;
    check_scores(attack, "attack scores")?;

    let mut ns = normal.to_vec();
    let mut at = attack.to_vec();
    ns.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    at.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let n = ns.len() as f64;
    let a = at.len() as f64;

    let mut points = Vec::with_capacity(ns.len() + at.len() + 2);
    points.push(RocPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        dr: 0.0,
    });
    let (mut i, mut j) = (0usize, 0usize);
    while i < ns.len() || j < at.len() {
        // Next distinct threshold: the largest score not yet consumed. At
        // this moment i and j count exactly the scores strictly above it.
        let v = match (ns.get(i), at.get(j)) {
            (Some(&x), Some(&y)) => {
                if x >= y {
                    x
                } else {
                    y
                }
            }
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        points.push(RocPoint {
            threshold: v,
            far: i as f64 / n,
            dr: j as f64 / a,
        });
        while i < ns.len() && ns[i] == v {
            i += 1;
        }
        while j < at.len() && at[j] == v {
            j += 1;
        }
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        far: 1.0,
        dr: 1.0,
    });
    Ok(RocCurve::from_points(points))
}

/// Area under the curve by the trapezoid rule, in `f64`. Equals the
/// Mann-Whitney statistic P(attack > normal) + P(tie)/2 because the sweep
/// enumerates every distinct score.
#[must_use]
pub fn auc(curve: &RocCurve) -> f64 {
    let pts = curve.points();
    let mut area = 0.0f64;
    for w in pts.windows(2) {
        area += (w[1].far - w[0].far) * (w[0].dr + w[1].dr) / 2.0;
    }
    area
}

/// Smallest achievable FAR among operating points reaching at least the
/// target detection rate. The target must lie in `(0, 1]`; the curve always
/// ends at `(1, 1)`, so some point qualifies.
pub fn far_at_dr(curve: &RocCurve, target_dr: f64) -> Result<f64> {
    if !(target_dr > 0.0 && target_dr <= 1.0) {
        return Err(Error::BadDetectionRate(target_dr));
    }
    // Points are sorted by FAR, so the first match minimizes it.
    curve
        .points()
        .iter()
        .find(|p| p.dr >= target_dr)
        .map(|p| p.far)
        .ok_or(Error::BadDetectionRate(target_dr))
}

/// Summary of one scorer's evaluation on a labeled score set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Which scorer produced the table (e.g. `proposed`, `averaging`).
    pub name: String,
    pub auc: f64,
    /// `(target detection rate, smallest FAR reaching it)` pairs.
    pub far_at: Vec<(f64, f64)>,
    pub normal_count: usize,
    pub attack_count: usize,
}

/// Orders reports best-first: descending AUC, ties broken by name so the
/// output is stable.
#[must_use]
pub fn compare(reports: &[EvalReport]) -> Vec<EvalReport> {
    let mut sorted = reports.to_vec();
    sorted.sort_by(|a, b| {
        b.auc
            .partial_cmp(&a.auc)
            .expect("AUC is finite")
            .then_with(|| a.name.cmp(&b.name))
    });
    sorted
}
