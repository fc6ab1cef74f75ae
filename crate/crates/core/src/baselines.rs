//! Classical detectors used for comparison: tabular CUSUM per variable and
//! PCA squared prediction error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pca::PcaModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CusumConfig {
    /// In-control mean `μ0`.
    pub target_mean: f64,
    /// Allowance `k`.
    pub slack: f64,
    /// Decision interval `h`.
    pub threshold: f64,
    /// Also track downward shifts.
    #[serde(default = "yes")]
    pub two_sided: bool,
}

fn yes() -> bool {
    true
}

impl CusumConfig {
    /// Mean from normal data, `k = k_sigma·σ`, `h = h_sigma·σ`.
    pub fn from_normal(train: &[f64], k_sigma: f64, h_sigma: f64) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::invalid("CUSUM calibration needs at least 2 values"));
        }
        let n = train.len() as f64;
        let mean = train.iter().sum::<f64>() / n;
        let var = train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        Ok(CusumConfig { target_mean: mean, slack: k_sigma * sd, threshold: h_sigma * sd, two_sided: true })
    }

    fn validate(&self) -> Result<()> {
        if !(self.slack >= 0.0 && self.threshold > 0.0 && self.target_mean.is_finite()) {
            return Err(Error::invalid(format!(
                "CUSUM needs a finite mean, k >= 0 and h > 0 (got k={}, h={})",
                self.slack, self.threshold
            )));
        }
        Ok(())
    }
}

/// Cumulative sums and alarms over one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumTrace {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub alarms: Vec<u8>,
}

/// `C⁺_t = max(0, x_t - (μ0 + k) + C⁺_{t-1})` (and the mirrored `C⁻`);
/// alarm when a sum strictly exceeds `h`, after which both sums restart
/// from zero.
pub fn cusum_trace(x: &[f64], cfg: &CusumConfig) -> Result<CusumTrace> {
    cfg.validate()?;
    if let Some(t) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("CUSUM input at index {t}")));
    }
    let mut upper = Vec::with_capacity(x.len());
    let mut lower = Vec::with_capacity(x.len());
    let mut alarms = Vec::with_capacity(x.len());
    let (mut cp, mut cm) = (0.0_f64, 0.0_f64);
    for &v in x {
        cp = (cp + v - (cfg.target_mean + cfg.slack)).max(0.0);
        if cfg.two_sided {
            cm = (cm + (cfg.target_mean - cfg.slack) - v).max(0.0);
        }
        upper.push(cp);
        lower.push(cm);
        let alarm = cp > cfg.threshold || cm > cfg.threshold;
        alarms.push(u8::from(alarm));
        if alarm {
            cp = 0.0;
            cm = 0.0;
        }
    }
    Ok(CusumTrace { upper, lower, alarms })
}

pub fn cusum_detect(x: &[f64], cfg: &CusumConfig) -> Result<Vec<u8>> {
    Ok(cusum_trace(x, cfg)?.alarms)
}

/// Alarm rate on `x`.
fn alarm_rate(x: &[f64], cfg: &CusumConfig) -> Result<f64> {
    let a = cusum_detect(x, cfg)?;
    Ok(a.iter().filter(|&&v| v == 1).count() as f64 / a.len().max(1) as f64)
}

/// Smallest decision interval (to within bisection tolerance) whose alarm
/// rate on normal data is at most `target_fpr`.
pub fn calibrate_threshold(normal: &[f64], base: &CusumConfig, target_fpr: f64) -> Result<CusumConfig> {
    let mut hi = base.threshold.max(1e-12);
    let mut cfg = *base;
    cfg.threshold = hi;
    cfg.validate()?;
    let mut tries = 0;
    while alarm_rate(normal, &cfg)? > target_fpr {
        hi *= 2.0;
        cfg.threshold = hi;
        tries += 1;
        if tries > 200 {
            return Err(Error::invalid("CUSUM threshold calibration did not converge"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        cfg.threshold = mid;
        if alarm_rate(normal, &cfg)? > target_fpr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    cfg.threshold = hi;
    Ok(cfg)
}

/// Per-variable CUSUM alarms for a `N × m` matrix; the row is flagged when
/// any variable alarms.
pub fn cusum_detect_any(x: &Matrix, configs: &[CusumConfig]) -> Result<Vec<u8>> {
    if configs.len() != x.cols() {
        return Err(Error::dims(format!("{} CUSUM configs for {} variables", configs.len(), x.cols())));
    }
    let mut out = vec![0u8; x.rows()];
    for (j, cfg) in configs.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(cusum_detect(&x.column(j), cfg)?) {
            *o |= a;
        }
    }
    Ok(out)
}

/// Rows whose SPE strictly exceeds `threshold`.
pub fn spe_detect(model: &PcaModel, x: &Matrix, threshold: f64) -> Result<Vec<u8>> {
    Ok(model.spe(x)?.into_iter().map(|q| u8::from(q > threshold)).collect())
}
