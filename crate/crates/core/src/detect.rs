//! Detectors over per-trace anomaly scores and learned representations.
//!
//! The primary detector is an ensemble of thresholding classifiers: member
//! `i` contributes `leaky_relu(f_i - b_i)` and the ensemble score is the
//! weighted sum. Biases come from each member's median score on
//! normal-training traces and weights are uniform, so a trace scoring below
//! every member's typical-normal level lands strictly negative while a
//! single confident member can push a suspicious trace far positive — the
//! leak keeps sub-bias evidence from vetoing it. A majority-voting
//! combination and distance baselines (k-th-nearest-neighbor and k-means
//! vector quantization over learned representations) round out the module.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

// f64's sqrt/ceil come from this trait in the std-free build graph; test
// builds pull std in through dev-dependencies and its inherent methods
// make the import redundant there, so the lint is silenced rather than
// conditioned on cfg(test).
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{RocCurve, RocPoint};
use crate::seed;

/// Default leak for sub-bias member scores: small enough that a member far
/// below its bias cannot veto another member's strong alarm, non-zero so
/// uniformly sub-bias traces stay strictly negative.
pub const LEAKY_SLOPE: f64 = 0.001;

/// Iteration cap for one Lloyd run; assignment fixpoints arrive far sooner
/// on the data sizes this crate targets.
const KMEANS_MAX_ITERS: usize = 300;

/// Seed-stream tag for k-means restarts (offset by the restart number).
const KMEANS_STREAM_BASE: u64 = 0x6b6d_6331;

/// Verdict of a thresholding classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Normal,
    Abnormal,
}

impl Decision {
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Normal => "normal",
            Decision::Abnormal => "abnormal",
        }
    }
}

/// `max(x, slope * x)` for `0 < slope < 1`: identity above zero, attenuated
/// below.
#[must_use]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x < 0.0 {
        slope * x
    } else {
        x
    }
}

/// Flags a trace abnormal when its anomaly score exceeds the threshold;
/// the boundary itself classifies as normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdClassifier {
    /// Name of the score function the threshold applies to.
    pub score_source: String,
    pub threshold: f64,
}

impl ThresholdClassifier {
    #[must_use]
    pub fn new(score_source: &str, threshold: f64) -> Self {
        ThresholdClassifier {
            score_source: score_source.to_string(),
            threshold,
        }
    }

    pub fn classify(&self, score: f64) -> Result<Decision> {
        if !score.is_finite() {
            return Err(Error::NonFinite("anomaly score"));
        }
        Ok(if score <= self.threshold {
            Decision::Normal
        } else {
            Decision::Abnormal
        })
    }
}

/// Median of the values; an even count averages the two middle values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median input"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("median input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// A fitted ensemble of thresholding classifiers: per-member weights and
/// biases plus the shared leak slope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub member_names: Vec<String>,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub slope: f64,
}

impl EnsembleSpec {
    /// Number of members.
    #[must_use]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Empty("ensemble members"));
        }
        if self.biases.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                what: "ensemble bias count",
                expected: self.weights.len(),
                got: self.biases.len(),
            });
        }
        if self.member_names.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                what: "ensemble member-name count",
                expected: self.weights.len(),
                got: self.member_names.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite())
            || self.biases.iter().any(|b| !b.is_finite())
        {
            return Err(Error::NonFinite("ensemble parameters"));
        }
        let weight_sum: f64 = self.weights.iter().sum();
        if (weight_sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "ensemble weights must sum to 1, got {weight_sum}"
            )));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "leak slope must lie strictly between 0 and 1, got {}",
                self.slope
            )));
        }
        Ok(())
    }
}

/// Fits an ensemble from each member's scores on normal-training traces:
/// uniform weights `1/m`, biases at the member medians.
pub fn build_ensemble(members: &[(&str, &[f64])], slope: f64) -> Result<EnsembleSpec> {
    if members.is_empty() {
        return Err(Error::Empty("ensemble members"));
    }
    let mut names = Vec::with_capacity(members.len());
    let mut biases = Vec::with_capacity(members.len());
    for (name, scores) in members {
        if scores.is_empty() {
            return Err(Error::Empty("normal-training scores"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("normal-training scores"));
        }
        names.push(name.to_string());
        biases.push(median(scores)?);
    }
    let weight = 1.0 / members.len() as f64;
    let spec = EnsembleSpec {
        member_names: names,
        weights: vec![weight; members.len()],
        biases,
        slope,
    };
    spec.validate()?;
    Ok(spec)
}

/// Ensemble score for one trace given its per-member scores (in member
/// order): `sum_i w_i * leaky_relu(f_i - b_i)`.
pub fn ensemble_score(spec: &EnsembleSpec, member_scores: &[f64]) -> Result<f64> {
    if member_scores.len() != spec.len() {
        return Err(Error::LengthMismatch {
            what: "ensemble member scores",
            expected: spec.len(),
            got: member_scores.len(),
        });
    }
    if member_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("member scores"));
    }
    let mut total = 0.0f64;
    for ((&f, &w), &b) in member_scores
        .iter()
        .zip(spec.weights.iter())
        .zip(spec.biases.iter())
    {
        total += w * leaky_relu(f - b, spec.slope);
    }
    Ok(total)
}

/// Plain mean of the per-member scores — the unbiased combination the
/// ensemble is compared against.
pub fn average_score(member_scores: &[f64]) -> Result<f64> {
    if member_scores.is_empty() {
        return Err(Error::Empty("member scores"));
    }
    if member_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("member scores"));
    }
    Ok(member_scores.iter().sum::<f64>() / member_scores.len() as f64)
}

/// Nearest-rank quantile of an ascending-sorted slice.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(n - 1)]
}

/// ROC curve of the majority-voting combination. `normal[i]` and
/// `attack[i]` hold member `i`'s scores for the normal-validation and
/// attack traces, aligned by trace across members. At each quantile `q` in
/// the grid every member thresholds at the `q`-quantile of its own
/// normal-validation scores, and a trace is flagged when a strict majority
/// of members vote abnormal (ties stay normal). The returned points carry
/// the quantile as their threshold.
pub fn vote_curve(
    normal: &[Vec<f64>],
    attack: &[Vec<f64>],
    quantiles: &[f64],
) -> Result<RocCurve> {
    let m = normal.len();
    if m == 0 {
        return Err(Error::Empty("ensemble members"));
    }
    if attack.len() != m {
        return Err(Error::LengthMismatch {
            what: "vote member count",
            expected: m,
            got: attack.len(),
        });
    }
    let n = normal[0].len();
    let a = attack[0].len();
    if n == 0 {
        return Err(Error::Empty("normal-validation scores"));
    }
    if a == 0 {
        return Err(Error::Empty("attack scores"));
    }
    for member in normal {
        if member.len() != n {
            return Err(Error::LengthMismatch {
                what: "normal-validation score count",
                expected: n,
                got: member.len(),
            });
        }
        if member.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("normal-validation scores"));
        }
    }
    for member in attack {
        if member.len() != a {
            return Err(Error::LengthMismatch {
                what: "attack score count",
                expected: a,
                got: member.len(),
            });
        }
        if member.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("attack scores"));
        }
    }
    if quantiles.is_empty() {
        return Err(Error::Empty("quantile grid"));
    }
    for &q in quantiles {
        if !(q.is_finite() && (0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidConfig(format!(
                "quantile {q} lies outside [0, 1]"
            )));
        }
    }

    let sorted: Vec<Vec<f64>> = normal
        .iter()
        .map(|member| {
            let mut v = member.clone();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            v
        })
        .collect();

    let majority = |table: &[Vec<f64>], count: usize, thresholds: &[f64]| -> f64 {
        let mut flagged = 0usize;
        for t in 0..count {
            let votes = table
                .iter()
                .zip(thresholds.iter())
                .filter(|(member, &thr)| member[t] > thr)
                .count();
            if 2 * votes > m {
                flagged += 1;
            }
        }
        flagged as f64 / count as f64
    };

    let mut points = Vec::with_capacity(quantiles.len());
    for &q in quantiles {
        let thresholds: Vec<f64> = sorted.iter().map(|s| nearest_rank(s, q)).collect();
        points.push(RocPoint {
            threshold: q,
            far: majority(normal, n, &thresholds),
            dr: majority(attack, a, &thresholds),
        });
    }
    Ok(RocCurve::from_points(points))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn check_points(points: &[Vec<f64>], what: &'static str) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::Empty(what));
    }
    let dim = points[0].len();
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "representations must have at least one dimension".to_string(),
        ));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::LengthMismatch {
                what: "representation width",
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(what));
        }
    }
    Ok(dim)
}

fn check_query(query: &[f64], dim: usize) -> Result<()> {
    if query.len() != dim {
        return Err(Error::LengthMismatch {
            what: "query representation width",
            expected: dim,
            got: query.len(),
        });
    }
    if query.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("query representation"));
    }
    Ok(())
}

/// Exact k-th-nearest-neighbor scorer over a reference set of
/// representations: the anomaly score of a query is its Euclidean distance
/// to the k-th closest reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    points: Vec<Vec<f64>>,
    k: usize,
    dim: usize,
}

impl KnnIndex {
    pub fn new(points: Vec<Vec<f64>>, k: usize) -> Result<Self> {
        let dim = check_points(&points, "reference representations")?;
        if k == 0 {
            return Err(Error::InvalidConfig(
                "neighbor count must be at least 1".to_string(),
            ));
        }
        if k > points.len() {
            return Err(Error::KTooLarge {
                k,
                points: points.len(),
            });
        }
        Ok(KnnIndex { points, k, dim })
    }

    #[must_use]
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of reference points.
    #[must_use]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean distance from the query to its k-th nearest reference
    /// point.
    pub fn score(&self, query: &[f64]) -> Result<f64> {
        check_query(query, self.dim)?;
        let mut dists: Vec<f64> = self
            .points
            .iter()
            .map(|p| squared_distance(query, p))
            .collect();
        let (_, kth, _) = dists
            .select_nth_unstable_by(self.k - 1, |a, b| a.partial_cmp(b).expect("finite"));
        Ok(kth.sqrt())
    }

    /// Fraction-based variant: one minus the fraction of reference points
    /// within `radius` (boundary inclusive) of the query.
    pub fn count_score(&self, query: &[f64], radius: f64) -> Result<f64> {
        check_query(query, self.dim)?;
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "radius must be finite and non-negative, got {radius}"
            )));
        }
        let r2 = radius * radius;
        let within = self
            .points
            .iter()
            .filter(|p| squared_distance(query, p) <= r2)
            .count();
        Ok(1.0 - within as f64 / self.points.len() as f64)
    }
}

/// K-means vector-quantization scorer: anomaly score of a query is its
/// Euclidean distance to the nearest codebook center.
#[derive(Debug, Clone, PartialEq)]
pub struct KmcModel {
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances of the training points to their assigned
    /// centers at convergence.
    pub inertia: f64,
}

impl KmcModel {
    pub fn score(&self, query: &[f64]) -> Result<f64> {
        let dim = check_points(&self.centers, "codebook centers")?;
        check_query(query, dim)?;
        let best = self
            .centers
            .iter()
            .map(|c| squared_distance(query, c))
            .fold(f64::INFINITY, f64::min);
        Ok(best.sqrt())
    }
}

/// One Lloyd run from the given initial centers (point indices). Returns
/// the centers and the per-assignment-pass inertia trace; the last entry is
/// the converged inertia. An emptied cluster is reseeded onto the point
/// farthest from its stale center, which never increases inertia.
fn lloyd(points: &[Vec<f64>], init: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = points.len();
    let k = init.len();
    let dim = points[0].len();
    let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let mut assign = vec![usize::MAX; n];
    let mut trace = Vec::new();

    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        let mut inertia = 0.0f64;
        for (p, slot) in points.iter().zip(assign.iter_mut()) {
            let mut best = 0usize;
            let mut best_d = squared_distance(p, &centers[0]);
            for (c, center) in centers.iter().enumerate().skip(1) {
                let d = squared_distance(p, center);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            inertia += best_d;
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(assign.iter()) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|i| !reseeded.contains(i))
                    .max_by(|&i, &j| {
                        squared_distance(&points[i], &centers[c])
                            .partial_cmp(&squared_distance(&points[j], &centers[c]))
                            .expect("finite")
                    })
                    .expect("there are at least as many points as clusters");
                reseeded.push(far);
                centers[c] = points[far].clone();
            } else {
                for (slot, s) in centers[c].iter_mut().zip(sums[c].iter()) {
                    *slot = s / counts[c] as f64;
                }
            }
        }
    }
    (centers, trace)
}

/// Fits a k-means codebook by Lloyd's algorithm with seeded restarts:
/// each restart draws `k` distinct points as initial centers from its own
/// deterministic stream and the lowest-inertia run wins. Identical inputs
/// produce identical codebooks.
pub fn kmeans_fit(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<KmcModel> {
    check_points(points, "clustering representations")?;
    if k == 0 {
        return Err(Error::InvalidConfig(
            "cluster count must be at least 1".to_string(),
        ));
    }
    if k > points.len() {
        return Err(Error::KTooLarge {
            k,
            points: points.len(),
        });
    }
    if restarts == 0 {
        return Err(Error::InvalidConfig(
            "restart count must be at least 1".to_string(),
        ));
    }

    let mut best: Option<KmcModel> = None;
    for r in 0..restarts {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seed::derive(seed, KMEANS_STREAM_BASE + r as u64));
        let init = rand::seq::index::sample(&mut rng, points.len(), k).into_vec();
        let (centers, trace) = lloyd(points, &init);
        let inertia = *trace.last().expect("at least one assignment pass");
        if best.as_ref().map_or(true, |b| inertia < b.inertia) {
            best = Some(KmcModel { centers, inertia });
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval;

    fn pts(curve: &RocCurve) -> Vec<(f64, f64)> {
        curve.points().iter().map(|p| (p.far, p.dr)).collect()
    }

    #[test]
    fn leaky_relu_is_identity_above_zero_and_attenuated_below() {
        assert_eq!(leaky_relu(2.0, LEAKY_SLOPE), 2.0);
        assert_eq!(leaky_relu(0.0, LEAKY_SLOPE), 0.0);
        assert_eq!(leaky_relu(-4.0, LEAKY_SLOPE), 0.001 * -4.0);
        assert_eq!(leaky_relu(-1.0, 0.25), -0.25);
        assert_eq!(LEAKY_SLOPE, 0.001);
    }

    #[test]
    fn threshold_boundary_classifies_as_normal() {
        let clf = ThresholdClassifier::new("lm", 2.0);
        assert_eq!(clf.score_source, "lm");
        assert_eq!(clf.classify(1.0).unwrap(), Decision::Normal);
        assert_eq!(clf.classify(2.0).unwrap(), Decision::Normal);
        assert_eq!(clf.classify(2.1).unwrap(), Decision::Abnormal);
        assert_eq!(
            clf.classify(f64::NAN),
            Err(Error::NonFinite("anomaly score"))
        );
        assert!(clf.classify(f64::INFINITY).is_err());
        assert_eq!(Decision::Normal.as_str(), "normal");
        assert_eq!(Decision::Abnormal.as_str(), "abnormal");
    }

    #[test]
    fn median_handles_odd_even_and_unsorted_input() {
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
        assert_eq!(median(&[6.0, 2.0, 4.0, 1.0, 3.0, 5.0]).unwrap(), 3.5);
        assert_eq!(median(&[]), Err(Error::Empty("median input")));
        assert_eq!(
            median(&[1.0, f64::NAN]),
            Err(Error::NonFinite("median input"))
        );
    }

    #[test]
    fn ensemble_fit_takes_median_biases_and_uniform_weights() {
        let spec = build_ensemble(
            &[
                ("a", &[1.0, 2.0, 3.0][..]),
                ("b", &[10.0, 20.0, 30.0, 40.0][..]),
                ("c", &[5.0][..]),
            ],
            LEAKY_SLOPE,
        )
        .unwrap();
        assert_eq!(spec.len(), 3);
        assert_eq!(spec.biases, vec![2.0, 25.0, 5.0]);
        assert_eq!(spec.member_names, vec!["a", "b", "c"]);
        assert_eq!(spec.slope, LEAKY_SLOPE);
        for &w in &spec.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((spec.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(build_ensemble(&[], LEAKY_SLOPE).is_err());
        assert!(build_ensemble(&[("a", &[][..])], LEAKY_SLOPE).is_err());
        assert!(build_ensemble(&[("a", &[f64::NAN][..])], LEAKY_SLOPE).is_err());
        assert!(build_ensemble(&[("a", &[1.0][..])], 0.0).is_err());
        assert!(build_ensemble(&[("a", &[1.0][..])], 1.0).is_err());
    }

    #[test]
    fn hand_computed_two_member_ensemble_score() {
        let spec = EnsembleSpec {
            member_names: vec!["a".to_string(), "b".to_string()],
            weights: vec![0.5, 0.5],
            biases: vec![2.0, 2.0],
            slope: 0.001,
        };
        spec.validate().unwrap();
        // 0.5 * leaky(1 - 2) + 0.5 * leaky(4 - 2) = -0.0005 + 1 = 0.9995.
        let got = ensemble_score(&spec, &[1.0, 4.0]).unwrap();
        assert!((got - 0.9995).abs() < 1e-15, "got {got}");
        // Scores exactly at the biases contribute nothing.
        assert_eq!(ensemble_score(&spec, &[2.0, 2.0]).unwrap(), 0.0);
        // Member-count and finiteness guards.
        assert!(ensemble_score(&spec, &[1.0]).is_err());
        assert!(ensemble_score(&spec, &[1.0, f64::NAN]).is_err());
        // A weight vector that does not sum to 1 fails validation.
        let skewed = EnsembleSpec {
            weights: vec![0.5, 0.6],
            ..spec
        };
        assert!(skewed.validate().is_err());
    }

    #[test]
    fn single_member_ensemble_is_the_leak_of_the_centered_score() {
        let spec = EnsembleSpec {
            member_names: vec!["only".to_string()],
            weights: vec![1.0],
            biases: vec![0.0],
            slope: 0.001,
        };
        spec.validate().unwrap();
        assert_eq!(ensemble_score(&spec, &[5.0]).unwrap(), 5.0);
        assert_eq!(ensemble_score(&spec, &[-5.0]).unwrap(), 0.001 * -5.0);
    }

    #[test]
    fn uniformly_sub_bias_traces_score_strictly_negative() {
        for case in 0..100u32 {
            let m = 1 + (case as usize % 7);
            let biases: Vec<f64> = (0..m).map(|i| f64::from(case) * 0.37 + i as f64).collect();
            let scores: Vec<f64> = biases
                .iter()
                .enumerate()
                .map(|(i, &b)| b - 0.01 - (i as f64) * 0.5 - f64::from(case % 13) * 0.1)
                .collect();
            let spec = EnsembleSpec {
                member_names: (0..m).map(|i| format!("m{i}")).collect(),
                weights: vec![1.0 / m as f64; m],
                biases,
                slope: LEAKY_SLOPE,
            };
            let got = ensemble_score(&spec, &scores).unwrap();
            assert!(got < 0.0, "case {case}: expected negative, got {got}");
        }
    }

    #[test]
    fn one_confident_member_outvotes_a_far_sub_bias_member() {
        // Member 1 sits 999 below its bias, member 2 just 1 above; the leak
        // keeps the deficit from vetoing the alarm.
        let spec = EnsembleSpec {
            member_names: vec!["a".to_string(), "b".to_string()],
            weights: vec![0.5, 0.5],
            biases: vec![0.0, 0.0],
            slope: 0.001,
        };
        let got = ensemble_score(&spec, &[-999.0, 1.0]).unwrap();
        assert!((got - 0.0005).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn average_score_is_the_plain_mean() {
        assert_eq!(average_score(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!(average_score(&[]).is_err());
        assert!(average_score(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn vote_majority_overrides_an_inverted_member() {
        // Members 1 and 2 separate perfectly; member 3 is inverted. Two
        // sound votes out of three carry every quantile.
        let normal = vec![vec![0.0; 4], vec![0.0; 4], vec![1.0; 4]];
        let attack = vec![vec![1.0; 3], vec![1.0; 3], vec![0.0; 3]];
        let grid: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
        let curve = vote_curve(&normal, &attack, &grid).unwrap();
        assert!(pts(&curve).contains(&(0.0, 1.0)));
        assert!((eval::auc(&curve) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vote_ties_stay_normal() {
        // Two members, one alarms on attacks and one never does: a 1-of-2
        // vote is not a strict majority, so nothing is flagged.
        let normal = vec![vec![0.0; 3], vec![0.0; 3]];
        let attack = vec![vec![1.0, 1.0], vec![0.0, 0.0]];
        let curve = vote_curve(&normal, &attack, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(pts(&curve), vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!((eval::auc(&curve) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_member_vote_points_lie_on_the_threshold_sweep() {
        let normal_scores = vec![1.0, 2.0, 3.0, 4.0];
        let attack_scores = vec![2.5, 5.0];
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let curve = vote_curve(
            core::slice::from_ref(&normal_scores),
            core::slice::from_ref(&attack_scores),
            &grid,
        )
        .unwrap();
        assert!((eval::auc(&curve) - 0.8125).abs() < 1e-15);
        // Every vote operating point is an operating point of the full
        // threshold sweep: with one member, voting is plain thresholding
        // at a member quantile.
        let full = eval::roc(&normal_scores, &attack_scores).unwrap();
        let full_pts = pts(&full);
        for p in pts(&curve) {
            assert!(full_pts.contains(&p), "{p:?} not on the threshold sweep");
        }
    }

    #[test]
    fn vote_curve_rejects_malformed_inputs() {
        let ok = vec![vec![1.0, 2.0]];
        let attacks = vec![vec![3.0]];
        assert!(vote_curve(&[], &[], &[0.5]).is_err());
        assert!(vote_curve(&ok, &[], &[0.5]).is_err());
        assert!(vote_curve(&ok, &attacks, &[]).is_err());
        assert!(vote_curve(&ok, &attacks, &[1.5]).is_err());
        assert!(vote_curve(&ok, &attacks, &[f64::NAN]).is_err());
        // Ragged member lengths.
        let ragged = vec![vec![1.0, 2.0], vec![1.0]];
        let attacks2 = vec![vec![3.0], vec![3.0]];
        assert!(vote_curve(&ragged, &attacks2, &[0.5]).is_err());
        // NaN scores.
        let nan = vec![vec![f64::NAN, 1.0]];
        assert!(vote_curve(&nan, &attacks, &[0.5]).is_err());
    }

    #[test]
    fn knn_scores_are_hand_checkable_distances() {
        let points = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]];
        let query = [0.0, 0.0];
        assert_eq!(
            KnnIndex::new(points.clone(), 1).unwrap().score(&query).unwrap(),
            0.0
        );
        assert_eq!(
            KnnIndex::new(points.clone(), 2).unwrap().score(&query).unwrap(),
            3.0
        );
        assert_eq!(
            KnnIndex::new(points.clone(), 3).unwrap().score(&query).unwrap(),
            4.0
        );
        // Count variant: two of three points lie within radius 3.
        let idx = KnnIndex::new(points, 2).unwrap();
        let got = idx.count_score(&query, 3.0).unwrap();
        assert!((got - (1.0 - 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(idx.count_score(&query, 100.0).unwrap(), 0.0);
        assert!(idx.count_score(&query, -1.0).is_err());
        assert!(idx.count_score(&query, f64::NAN).is_err());
    }

    #[test]
    fn one_dimensional_neighbor_distances_sort_by_hand() {
        let line = vec![vec![0.0], vec![1.0], vec![3.0]];
        let idx = KnnIndex::new(line, 2).unwrap();
        assert_eq!(idx.score(&[0.0]).unwrap(), 1.0);
        // With radius 1, points {0, 1} are covered: 1 - 2/3.
        let got = idx.count_score(&[0.0], 1.0).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-15);
        // Radius 0 around a query off the reference set covers nothing.
        assert_eq!(idx.count_score(&[0.5], 0.0).unwrap(), 1.0);
    }

    #[test]
    fn knn_construction_and_queries_are_validated() {
        let points = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert!(KnnIndex::new(vec![], 1).is_err());
        assert!(KnnIndex::new(points.clone(), 0).is_err());
        assert_eq!(
            KnnIndex::new(points.clone(), 3),
            Err(Error::KTooLarge { k: 3, points: 2 })
        );
        assert!(KnnIndex::new(vec![vec![1.0], vec![1.0, 2.0]], 1).is_err());
        assert!(KnnIndex::new(vec![vec![f64::NAN]], 1).is_err());
        let idx = KnnIndex::new(points, 2).unwrap();
        assert_eq!(idx.k(), 2);
        assert_eq!(idx.len(), 2);
        assert!(!idx.is_empty());
        assert!(idx.score(&[1.0]).is_err());
        assert!(idx.score(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn first_neighbor_matches_a_codebook_of_the_points_themselves() {
        let points: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![f64::from(i % 4), f64::from(i / 4) * 1.5])
            .collect();
        let knn = KnnIndex::new(points.clone(), 1).unwrap();
        let kmc = KmcModel {
            centers: points,
            inertia: 0.0,
        };
        for q in [[0.3, 0.7], [2.9, 2.0], [-1.0, 5.0]] {
            let a = knn.score(&q).unwrap();
            let b = kmc.score(&q).unwrap();
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn kmeans_recovers_two_separated_blobs() {
        let mut points = Vec::new();
        for i in 0..8 {
            let jitter = f64::from(i) * 0.01;
            points.push(vec![jitter, -jitter]);
            points.push(vec![10.0 + jitter, 10.0 - jitter]);
        }
        let model = kmeans_fit(&points, 2, 4, 7).unwrap();
        let mut xs: Vec<f64> = model.centers.iter().map(|c| c[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Blob means: x = 0.035 and 10.035.
        assert!((xs[0] - 0.035).abs() < 1e-12, "{xs:?}");
        assert!((xs[1] - 10.035).abs() < 1e-12, "{xs:?}");
        // Inertia equals the hand sum of squared deviations from the means.
        let hand: f64 = points
            .iter()
            .map(|p| {
                let mean = if p[0] < 5.0 { [0.035, -0.035] } else { [10.035, 9.965] };
                squared_distance(p, &mean)
            })
            .sum();
        assert!((model.inertia - hand).abs() < 1e-9, "{} vs {hand}", model.inertia);
        // Scoring: a point near a blob center scores near zero, a far one
        // scores its distance to the closer mean.
        assert!(model.score(&[0.035, -0.035]).unwrap() < 1e-9);
        let far = model.score(&[20.0, 10.0]).unwrap();
        assert!((far - squared_distance(&[20.0, 10.0], &[10.035, 9.965]).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn single_cluster_center_is_the_mean() {
        let points = vec![vec![1.0, 0.0], vec![3.0, 4.0], vec![5.0, 2.0]];
        let model = kmeans_fit(&points, 1, 1, 0).unwrap();
        assert_eq!(model.centers.len(), 1);
        assert!((model.centers[0][0] - 3.0).abs() < 1e-12);
        assert!((model.centers[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn center_distances_are_euclidean() {
        let model = KmcModel {
            centers: vec![vec![0.0, 0.0]],
            inertia: 0.0,
        };
        assert_eq!(model.score(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(model.score(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(model.score(&[1.0]).is_err());
    }

    #[test]
    fn lloyd_inertia_never_increases_across_iterations() {
        let points: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let x = f64::from((i * 37) % 17);
                let y = f64::from((i * 53) % 23);
                vec![x, y * 0.7]
            })
            .collect();
        let (_, trace) = lloyd(&points, &[0, 1, 2]);
        assert!(trace.len() >= 2, "expected several passes, got {trace:?}");
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12) + 1e-12,
                "inertia rose: {trace:?}"
            );
        }
    }

    #[test]
    fn emptied_clusters_are_reseeded_onto_far_points() {
        // Three identical points plus one outlier, initialized on two of
        // the duplicates: the second cluster empties immediately and must
        // be reseeded onto the outlier, reaching zero inertia.
        let points = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![10.0, 10.0],
        ];
        let (centers, trace) = lloyd(&points, &[0, 1]);
        assert_eq!(*trace.last().unwrap(), 0.0, "trace {trace:?}");
        let mut xs: Vec<f64> = centers.iter().map(|c| c[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(xs, vec![0.0, 10.0]);
    }

    #[test]
    fn kmeans_is_deterministic_and_restarts_never_hurt() {
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![f64::from((i * 13) % 11), f64::from((i * 7) % 5)])
            .collect();
        let a = kmeans_fit(&points, 4, 3, 42).unwrap();
        let b = kmeans_fit(&points, 4, 3, 42).unwrap();
        assert_eq!(a, b);
        let single = kmeans_fit(&points, 4, 1, 42).unwrap();
        assert!(a.inertia <= single.inertia);
        let other_seed = kmeans_fit(&points, 4, 3, 43).unwrap();
        // A different seed is allowed to find a different local optimum,
        // but both must be valid codebooks of the requested size.
        assert_eq!(other_seed.centers.len(), 4);
    }

    #[test]
    fn one_cluster_per_point_reaches_zero_inertia() {
        let points: Vec<Vec<f64>> = (0..5).map(|i| vec![f64::from(i) * 2.0, 1.0]).collect();
        let model = kmeans_fit(&points, 5, 2, 9).unwrap();
        assert_eq!(model.inertia, 0.0);
    }

    #[test]
    fn kmeans_rejects_malformed_inputs() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(kmeans_fit(&[], 1, 1, 0).is_err());
        assert!(kmeans_fit(&points, 0, 1, 0).is_err());
        assert_eq!(
            kmeans_fit(&points, 3, 1, 0),
            Err(Error::KTooLarge { k: 3, points: 2 })
        );
        assert!(kmeans_fit(&points, 1, 0, 0).is_err());
        assert!(kmeans_fit(&[vec![]], 1, 1, 0).is_err());
        assert!(kmeans_fit(&[vec![1.0], vec![1.0, 2.0]], 1, 1, 0).is_err());
        assert!(kmeans_fit(&[vec![f64::NAN]], 1, 1, 0).is_err());
    }
}
