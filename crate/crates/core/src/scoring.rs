//! Anomaly scores, cross-entropy labeling, and detection metrics.
//!
//! The combined score is `S_t = λ·r̂_t + (1-λ)·(1 - D(x_t))`, where `r̂_t` is
//! the min-max normalized residual and `D(x_t)` the discriminator's
//! probability of "real". Larger `S_t` means more anomalous.
//!
//! Labeling works on "normality" values `v ∈ (0,1)` (near 1 = confidently
//! normal): a timestep is flagged when the cross entropy `H(v, 1) = -ln v`
//! exceeds `τ`. Anomaly scores are converted with `v = 1 - S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pca::PcaModel;

/// Values are clamped into `(ε, 1-ε)` before taking logarithms.
pub const LABEL_EPS: f64 = 1e-7;

/// Min and max of residuals over a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRange {
    pub min: f64,
    pub max: f64,
}

impl ResidualRange {
    pub fn fit(residuals: &[f64]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::invalid("cannot fit a residual range on no values"));
        }
        let min = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(ResidualRange { min, max })
    }

    /// Maps into `[0, 1]`; values outside the fitted range saturate.
    pub fn normalize(&self, r: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            ((r - self.min) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScoreSeries {
    pub residual: Vec<f64>,
    pub residual_normalized: Vec<f64>,
    /// `1 - D(x_t)`, the discriminator's probability of "fake".
    pub discrimination: Vec<f64>,
    pub combined: Vec<f64>,
    pub lambda: f64,
}

/// Combines residuals and discriminator outputs, normalizing the residuals
/// over this series.
pub fn anomaly_score(res: &[f64], disc_scores: &[f64], lambda: f64) -> Result<AnomalyScoreSeries> {
    let range = ResidualRange::fit(res)?;
    anomaly_score_with_range(res, disc_scores, lambda, &range)
}

/// Like [`anomaly_score`] but normalizes residuals with a given range, so
/// that scores from different runs share a scale.
pub fn anomaly_score_with_range(
    res: &[f64],
    disc_scores: &[f64],
    lambda: f64,
    range: &ResidualRange,
) -> Result<AnomalyScoreSeries> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if res.len() != disc_scores.len() {
        return Err(Error::dims(format!("{} residuals vs {} discriminator scores", res.len(), disc_scores.len())));
    }
    let residual_normalized: Vec<f64> = res.iter().map(|&r| range.normalize(r)).collect();
    let discrimination: Vec<f64> = disc_scores.iter().map(|d| 1.0 - d).collect();
    let combined = residual_normalized
        .iter()
        .zip(&discrimination)
        .map(|(r, d)| lambda * r + (1.0 - lambda) * d)
        .collect();
    Ok(AnomalyScoreSeries {
        residual: res.to_vec(),
        residual_normalized,
        discrimination,
        combined,
        lambda,
    })
}

impl AnomalyScoreSeries {
    pub fn len(&self) -> usize {
        self.combined.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.is_empty()
    }

    /// `1 - S_t`.
    pub fn normality(&self) -> Vec<f64> {
        self.combined.iter().map(|s| 1.0 - s).collect()
    }

    pub fn labels(&self, tau: f64) -> Vec<u8> {
        flag_anomalies(&self.combined, tau)
    }
}

/// `H(v, 1) = -ln v` with `v` clamped into `(ε, 1-ε)`.
pub fn cross_entropy_to_one(v: f64) -> f64 {
    -v.clamp(LABEL_EPS, 1.0 - LABEL_EPS).ln()
}

/// Flags `t` when `H(v_t, 1) > τ`, i.e. `v_t < e^{-τ}`.
pub fn assign_labels(values: &[f64], tau: f64) -> Vec<u8> {
    values.iter().map(|&v| u8::from(cross_entropy_to_one(v) > tau)).collect()
}

/// Labels anomaly scores `S` (large = anomalous) through `v = 1 - S`.
pub fn flag_anomalies(scores: &[f64], tau: f64) -> Vec<u8> {
    let normality: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    assign_labels(&normality, tau)
}

/// Smallest threshold `θ` drawn from `values` such that at most
/// `floor(target_fpr · N)` values strictly exceed it.
pub fn threshold_for_fpr(values: &[f64], target_fpr: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("threshold selection needs at least one value"));
    }
    if !(0.0..=1.0).contains(&target_fpr) {
        return Err(Error::invalid(format!("target FPR must lie in [0, 1], got {target_fpr}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let allowed = (target_fpr * values.len() as f64).floor() as usize;
    Ok(sorted[allowed.min(sorted.len() - 1)])
}

/// `τ` for [`flag_anomalies`] so that at most the target fraction of the
/// given (normal) scores is flagged.
pub fn tau_for_target_fpr(normal_scores: &[f64], target_fpr: f64) -> Result<f64> {
    let h: Vec<f64> = normal_scores.iter().map(|s| cross_entropy_to_one(1.0 - s)).collect();
    threshold_for_fpr(&h, target_fpr)
}

/// Confusion counts and the derived ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    /// Names of ratios whose denominator was zero (reported as 0).
    pub undefined: Vec<String>,
}

pub fn metrics(pred: &[u8], truth: &[u8]) -> Result<DetectionReport> {
    if pred.len() != truth.len() {
        return Err(Error::dims(format!("{} predictions vs {} labels", pred.len(), truth.len())));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(DetectionReport::from_counts(tp, fp, tn, fn_))
}

impl DetectionReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let mut undefined = Vec::new();
        let mut ratio = |name: &str, num: usize, den: usize| {
            if den == 0 {
                undefined.push(name.to_string());
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio("accuracy", tp + tn, tp + tn + fp + fn_);
        let precision = ratio("precision", tp, tp + fp);
        let recall = ratio("recall", tp, tp + fn_);
        let fpr = ratio("fpr", fp, fp + tn);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            undefined.push("f1".into());
            0.0
        };
        DetectionReport { tp, fp, tn, fn_, accuracy, precision, recall, f1, fpr, undefined }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Attributes per-component anomaly scores back to the original variables
/// and labels each variable.
///
/// `component_scores` is `N × n` (scores in `[0, 1]` per principal
/// component). Variable `j` receives `Σ_k |P_kj| · s_tk`, clipped to
/// `[0, 1]`, and is labeled with [`flag_anomalies`].
pub fn per_variable_labels(component_scores: &Matrix, pca: &PcaModel, tau: f64) -> Result<Vec<Vec<u8>>> {
    let attr = attribute_to_variables(component_scores, pca)?;
    Ok(attr.row_iter().map(|row| flag_anomalies(row, tau)).collect())
}

/// The `N × m` attribution used by [`per_variable_labels`].
pub fn attribute_to_variables(component_scores: &Matrix, pca: &PcaModel) -> Result<Matrix> {
    let n = pca.n_components();
    if component_scores.cols() != n {
        return Err(Error::dims(format!("{} score columns for {n} components", component_scores.cols())));
    }
    let abs_loadings = pca.loadings.map(f64::abs);
    let attr = component_scores.matmul(&abs_loadings)?;
    Ok(attr.map(|v| v.clamp(0.0, 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn score_endpoints_and_example() {
        let res = [0.0, 2.0];
        let d = [0.9, 0.1];
        let s1 = anomaly_score(&res, &d, 1.0).unwrap();
        assert_eq!(s1.combined, vec![0.0, 1.0]);
        let s0 = anomaly_score(&res, &d, 0.0).unwrap();
        for (s, di) in s0.combined.iter().zip(d) {
            assert_eq!(*s, 1.0 - di);
        }
        let s = anomaly_score(&res, &d, 0.5).unwrap();
        assert!((s.combined[0] - 0.05).abs() < 1e-15);
        assert!((s.combined[1] - 0.95).abs() < 1e-15);
        assert!(anomaly_score(&res, &d, 1.5).is_err());
        assert!(anomaly_score(&res, &[0.5], 0.5).is_err());
    }

    #[test]
    fn labeling_cases() {
        assert_eq!(assign_labels(&[0.3, 0.999, 0.5], 0.0), vec![1, 1, 1]);
        assert_eq!(assign_labels(&[1.0 - LABEL_EPS], 2.0 * LABEL_EPS), vec![0]);
        assert_eq!(assign_labels(&[0.9, 0.2], 0.5), vec![0, 1]);
        // anomaly scores go through 1 - S
        assert_eq!(flag_anomalies(&[0.1, 0.8], 0.5), vec![0, 1]);
    }

    #[test]
    fn metrics_from_counts() {
        let r = DetectionReport::from_counts(2, 1, 6, 1);
        assert!((r.accuracy - 0.8).abs() < 1e-15);
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.fpr - 1.0 / 7.0).abs() < 1e-15);
        assert!(r.undefined.is_empty());
    }

    #[test]
    fn perfect_and_all_positive_detectors() {
        let truth = [0, 1, 1, 0, 0, 1, 0];
        let r = metrics(&truth, &truth).unwrap();
        assert_eq!((r.accuracy, r.fpr), (1.0, 0.0));
        let r = metrics(&[1; 7], &truth).unwrap();
        assert_eq!((r.recall, r.fpr), (1.0, 1.0));
        let r = metrics(&[0; 3], &[0; 3]).unwrap();
        assert!(r.undefined.contains(&"precision".to_string()));
        assert_eq!(r.precision, 0.0);
        assert!(metrics(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn threshold_selection() {
        let v: Vec<f64> = (0..100).map(f64::from).collect();
        let th = threshold_for_fpr(&v, 0.01).unwrap();
        assert_eq!(v.iter().filter(|x| **x > th).count(), 1);
        let th = threshold_for_fpr(&v, 0.0).unwrap();
        assert_eq!(v.iter().filter(|x| **x > th).count(), 0);

        let scores: Vec<f64> = (0..200).map(|k| k as f64 / 200.0).collect();
        let tau = tau_for_target_fpr(&scores, 0.05).unwrap();
        let flagged = flag_anomalies(&scores, tau).iter().filter(|&&a| a == 1).count();
        assert!(flagged <= 10);
    }

    fn pca_with_loadings(loadings: Matrix) -> PcaModel {
        let m = loadings.cols();
        let n = loadings.rows();
        PcaModel { mean: vec![0.0; m], loadings, eigenvalues: vec![1.0; n], total_variance: n as f64 }
    }

    #[test]
    fn per_variable_reductions() {
        let scores = Matrix::from_vec(4, 1, vec![0.1, 0.9, 0.4, 0.95]).unwrap();
        let pca = pca_with_loadings(Matrix::identity(1));
        let labels = per_variable_labels(&scores, &pca, 1.0).unwrap();
        let flat: Vec<u8> = labels.iter().map(|r| r[0]).collect();
        assert_eq!(flat, flag_anomalies(scores.as_slice(), 1.0));

        let s3 = Matrix::from_rows(&[[0.1, 0.5, 0.7], [0.0, 1.0, 0.2]]).unwrap();
        let attr = attribute_to_variables(&s3, &pca_with_loadings(Matrix::identity(3))).unwrap();
        assert_eq!(attr, s3);
        assert!(per_variable_labels(&s3, &pca, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn raising_tau_never_adds_flags(vals in proptest::collection::vec(0.0f64..1.0, 1..50), t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
            let a = assign_labels(&vals, t1);
            let b = assign_labels(&vals, t1 + dt);
            prop_assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
        }

        #[test]
        fn scores_stay_in_unit_interval(
            res in proptest::collection::vec(0.0f64..100.0, 1..30),
            lambda in 0.0f64..=1.0,
            seed in 0u64..1000,
        ) {
            let d: Vec<f64> = (0..res.len()).map(|k| ((k as u64 * 7919 + seed) % 997) as f64 / 997.0 * 0.98 + 0.01).collect();
            let s = anomaly_score(&res, &d, lambda).unwrap();
            prop_assert!(s.combined.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
