//! End-to-end detection: preprocessing, model-space mapping, GAN training,
//! calibrated scoring, and the CUSUM/SPE comparison.
//!
//! Normal data is split into a training part and a held-out calibration
//! tail. Thresholds for every method are set on the calibration tail at the
//! same target false-positive rate, then applied to the test run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::{calibrate_threshold, cusum_detect, spe_detect, CusumConfig};
use crate::error::{Error, Result};
use crate::gan::{run_training, CheckpointPolicy, GanModel, TrainingConfig};
use crate::inversion::{invert_all, residual, InversionConfig};
use crate::matrix::Matrix;
use crate::pca::{fit_pca, PcaModel};
use crate::scoring::{
    anomaly_score_with_range, flag_anomalies, metrics, tau_for_target_fpr, threshold_for_fpr,
    DetectionReport, ResidualRange,
};
use crate::series::{
    downsample_median, fit_normalizer_matrix, trim_startup, window, NormalizationStats, RawSeries, WindowSet,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Raw rows per window (`T`).
    pub window_length: usize,
    pub train_shift: usize,
    pub test_shift: usize,
    pub downsample_factor: usize,
    /// Rows dropped from the start of the normal run.
    pub trim_rows: usize,
    /// Fraction of the (trimmed) normal run held out for threshold selection.
    pub calibration_fraction: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            window_length: 120,
            train_shift: 10,
            test_shift: 120,
            downsample_factor: 10,
            trim_rows: 0,
            calibration_fraction: 0.2,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 || self.train_shift == 0 || self.test_shift == 0 || self.downsample_factor == 0 {
            return Err(Error::invalid("window_length, shifts and downsample_factor must be at least 1"));
        }
        if self.window_length % self.downsample_factor != 0 {
            return Err(Error::invalid(format!(
                "window_length {} is not divisible by downsample_factor {}",
                self.window_length, self.downsample_factor
            )));
        }
        if !(0.0..1.0).contains(&self.calibration_fraction) {
            return Err(Error::invalid("calibration_fraction must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn sequence_length(&self) -> usize {
        self.window_length / self.downsample_factor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaConfig {
    /// Principal components fed to the GAN and kept by SPE; 0 feeds the
    /// normalized variables directly (SPE then needs `spe_components`).
    pub components: usize,
    /// Model-space columns share one scale chosen so the widest spans
    /// `[-range, range]` on training data (the generator emits tanh).
    pub range: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig { components: 5, range: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    pub lambda: f64,
    pub target_fpr: f64,
    /// Fixed `τ`; when absent it is chosen on calibration data.
    #[serde(default)]
    pub tau: Option<f64>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig { lambda: 0.5, target_fpr: 0.01, tau: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub cusum: bool,
    pub spe: bool,
    pub cusum_k_sigma: f64,
    /// Starting decision interval in standard deviations; calibration on
    /// held-out normal data moves it to meet the target FPR.
    pub cusum_h_sigma: f64,
    /// Components retained by SPE.
    pub spe_components: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { cusum: true, spe: true, cusum_k_sigma: 0.5, cusum_h_sigma: 5.0, spe_components: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub pca: PcaConfig,
    pub gan: TrainingConfig,
    pub inversion: InversionConfig,
    pub scoring: ScoringConfig,
    pub baselines: BaselineConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        self.gan.validate()?;
        self.inversion.validate()?;
        if self.gan.sequence_length != self.preprocess.sequence_length() {
            return Err(Error::Config(format!(
                "gan.sequence_length {} differs from window_length / downsample_factor = {}",
                self.gan.sequence_length,
                self.preprocess.sequence_length()
            )));
        }
        if !(self.pca.range > 0.0 && self.pca.range < 1.0) {
            return Err(Error::invalid("pca.range must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.scoring.lambda) {
            return Err(Error::invalid("scoring.lambda must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.scoring.target_fpr) {
            return Err(Error::invalid("scoring.target_fpr must lie in [0, 1)"));
        }
        if !(self.baselines.cusum_k_sigma >= 0.0 && self.baselines.cusum_h_sigma > 0.0) {
            return Err(Error::invalid("CUSUM needs k_sigma >= 0 and h_sigma > 0"));
        }
        Ok(())
    }
}

/// Everything fitted on normal training data that maps raw rows into the
/// generator's space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub config: PreprocessConfig,
    pub column_names: Vec<String>,
    pub normalizer: NormalizationStats,
    /// PCA of normalized rows used for the model space (if any).
    pub pca: Option<PcaModel>,
    /// PCA used by the SPE baseline.
    pub spe_pca: Option<PcaModel>,
    pub scaler: ModelScaler,
    /// Per-variable CUSUM settings from training moments, before
    /// threshold calibration.
    pub cusum_base: Vec<CusumConfig>,
}

/// Centers each model-space column on its training mid-range and applies
/// one common scale, so the widest column spans `[-range, range]` and the
/// relative spread of columns is preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScaler {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl ModelScaler {
    pub fn fit(bounds: &NormalizationStats, range: f64) -> Self {
        let center: Vec<f64> = bounds.min.iter().zip(&bounds.max).map(|(a, b)| 0.5 * (a + b)).collect();
        let half = bounds.min.iter().zip(&bounds.max).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max);
        let scale = if half > 0.0 { range / half } else { 1.0 };
        ModelScaler { center, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (v, c) in out.row_mut(i).iter_mut().zip(&self.center) {
                *v = (*v - c) * self.scale;
            }
        }
        out
    }

    pub fn invert(&self, y: &Matrix) -> Matrix {
        let mut out = y.clone();
        for i in 0..out.rows() {
            for (v, c) in out.row_mut(i).iter_mut().zip(&self.center) {
                *v = *v / self.scale + c;
            }
        }
        out
    }
}

/// Normal run split into training and calibration rows.
pub fn split_normal(normal: &RawSeries, cfg: &PreprocessConfig) -> Result<(RawSeries, RawSeries)> {
    let trimmed = if cfg.trim_rows > 0 { trim_startup(normal, cfg.trim_rows)? } else { normal.clone() };
    let n = trimmed.len();
    let n_calib = (n as f64 * cfg.calibration_fraction).round() as usize;
    let n_train = n - n_calib;
    if n_train < cfg.window_length || (n_calib > 0 && n_calib < cfg.window_length) {
        return Err(Error::invalid(format!(
            "{n} normal rows cannot supply both splits with windows of {} rows",
            cfg.window_length
        )));
    }
    Ok((trimmed.slice(0, n_train), trimmed.slice(n_train, n)))
}

impl Preprocessor {
    pub fn fit(train: &RawSeries, cfg: &PipelineConfig) -> Result<Self> {
        let pre = &cfg.preprocess;
        pre.validate()?;
        let normalizer = fit_normalizer_matrix(&train.values)?;
        let normalized = RawSeries { values: normalizer.apply_matrix(&train.values)?, ..train.clone() };
        let windows = downsample_median(&window(&normalized, pre.window_length, pre.train_shift)?, pre.downsample_factor)?;
        let rows = windows.stacked()?;
        let m = rows.cols();

        let pca = match cfg.pca.components {
            0 => None,
            n if n <= m => Some(fit_pca(&rows, n)?),
            n => return Err(Error::Config(format!("pca.components {n} exceeds {m} variables"))),
        };
        let spe_pca = if cfg.baselines.spe {
            let n = cfg.baselines.spe_components;
            if n == 0 || n > m {
                return Err(Error::Config(format!("baselines.spe_components must lie in 1..={m}")));
            }
            Some(match &pca {
                Some(p) if p.n_components() == n => p.clone(),
                _ => fit_pca(&rows, n)?,
            })
        } else {
            None
        };
        let cusum_base = if cfg.baselines.cusum {
            (0..m)
                .map(|j| CusumConfig::from_normal(&rows.column(j), cfg.baselines.cusum_k_sigma, cfg.baselines.cusum_h_sigma))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let projected = match &pca {
            Some(p) => p.project(&rows)?,
            None => rows,
        };
        let scaler = ModelScaler::fit(&fit_normalizer_matrix(&projected)?, cfg.pca.range);
        Ok(Preprocessor {
            config: pre.clone(),
            column_names: train.column_names.clone(),
            normalizer,
            pca,
            spe_pca,
            scaler,
            cusum_base,
        })
    }

    /// Normalized, windowed and downsampled rows (variable space).
    pub fn windows(&self, series: &RawSeries, shift: usize) -> Result<WindowSet> {
        if series.column_names != self.column_names {
            return Err(Error::dims(format!(
                "series columns {:?} differ from training columns {:?}",
                series.column_names, self.column_names
            )));
        }
        let normalized = RawSeries { values: self.normalizer.apply_matrix(&series.values)?, ..series.clone() };
        downsample_median(&window(&normalized, self.config.window_length, shift)?, self.config.downsample_factor)
    }

    /// Maps variable-space rows into the generator's space.
    pub fn to_model_space(&self, x: &Matrix) -> Result<Matrix> {
        let projected = match &self.pca {
            Some(p) => p.project(x)?,
            None => x.clone(),
        };
        Ok(self.scaler.apply(&projected))
    }

    pub fn model_windows(&self, set: &WindowSet) -> Result<WindowSet> {
        set.map_windows(|w| self.to_model_space(w))
    }

    /// Inverse of [`Preprocessor::to_model_space`] up to the discarded
    /// components, returning normalized variable-space rows.
    pub fn from_model_space(&self, y: &Matrix) -> Result<Matrix> {
        let out = self.scaler.invert(y);
        match &self.pca {
            Some(p) => p.reconstruct(&out),
            None => Ok(out),
        }
    }

    pub fn model_dim(&self) -> usize {
        self.scaler.center.len()
    }
}

/// Fits the preprocessor on the training split and trains a GAN on the
/// resulting model-space windows.
pub fn train_pipeline(
    train: &RawSeries,
    cfg: &PipelineConfig,
    policy: &CheckpointPolicy,
) -> Result<(Preprocessor, GanModel)> {
    cfg.validate()?;
    let pre = Preprocessor::fit(train, cfg)?;
    let windows = pre.model_windows(&pre.windows(train, cfg.preprocess.train_shift)?)?;
    let mut model = GanModel::init(cfg.gan.clone(), pre.model_dim())?;
    run_training(&mut model, &windows, policy)?;
    Ok((pre, model))
}

/// Raw per-timestep evidence for a set of windows.
#[derive(Debug, Clone, PartialEq)]
struct Evidence {
    residual: Vec<f64>,
    realness: Vec<f64>,
}

fn gan_evidence(pre: &Preprocessor, model: &GanModel, set: &WindowSet, inv: &InversionConfig) -> Result<Evidence> {
    let model_windows = pre.model_windows(set)?;
    let results = invert_all(&model.generator, &model_windows.windows, inv)?;
    let mut res = Vec::new();
    let mut realness = Vec::new();
    for (w, r) in model_windows.windows.iter().zip(&results) {
        res.extend(residual(w, &r.reconstruction)?);
        realness.extend(model.discriminator.scores(w)?);
    }
    Ok(Evidence { residual: res, realness })
}

/// One test timestep (a downsampled row) with every method's evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestepScore {
    pub window: usize,
    pub step: usize,
    /// First raw row covered by this timestep.
    pub offset: usize,
    pub truth: Option<u8>,
    pub residual: f64,
    pub residual_normalized: f64,
    pub discrimination: f64,
    pub score: f64,
    pub gan_ad: u8,
    pub spe: Option<f64>,
    pub spe_flag: Option<u8>,
    /// Per-variable CUSUM alarms (empty when disabled).
    pub cusum: Vec<u8>,
}

/// Thresholds chosen on calibration data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lambda: f64,
    pub tau: f64,
    pub target_fpr: f64,
    pub residual_range: ResidualRange,
    pub spe_threshold: Option<f64>,
    pub cusum: Vec<CusumConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRun {
    pub column_names: Vec<String>,
    pub calibration: Calibration,
    pub timesteps: Vec<TimestepScore>,
}

/// Scores `test` with every method, choosing all thresholds on `calib`.
pub fn detect(
    pre: &Preprocessor,
    model: &GanModel,
    calib: &RawSeries,
    test: &RawSeries,
    cfg: &PipelineConfig,
) -> Result<DetectionRun> {
    let shift = cfg.preprocess.test_shift;
    if calib.len() < cfg.preprocess.window_length {
        return Err(Error::invalid("calibration split is shorter than one window"));
    }
    let calib_set = pre.windows(calib, shift)?;
    let test_set = pre.windows(test, shift)?;
    let sc = &cfg.scoring;

    let cal = gan_evidence(pre, model, &calib_set, &cfg.inversion)?;
    let range = ResidualRange::fit(&cal.residual)?;
    let cal_scores = anomaly_score_with_range(&cal.residual, &cal.realness, sc.lambda, &range)?;
    let tau = match sc.tau {
        Some(t) => t,
        None => tau_for_target_fpr(&cal_scores.combined, sc.target_fpr)?,
    };

    let ev = gan_evidence(pre, model, &test_set, &cfg.inversion)?;
    let scores = anomaly_score_with_range(&ev.residual, &ev.realness, sc.lambda, &range)?;
    let flags = flag_anomalies(&scores.combined, tau);

    let calib_rows = calib_set.stacked()?;
    let test_rows = test_set.stacked()?;

    let (spe_threshold, spe_values) = match &pre.spe_pca {
        Some(p) => {
            let th = threshold_for_fpr(&p.spe(&calib_rows)?, sc.target_fpr)?;
            (Some(th), Some(p.spe(&test_rows)?))
        }
        None => (None, None),
    };
    let spe_flags = match (&pre.spe_pca, spe_threshold) {
        (Some(p), Some(th)) => Some(spe_detect(p, &test_rows, th)?),
        _ => None,
    };

    let mut cusum_cfgs = Vec::new();
    let mut cusum_alarms: Vec<Vec<u8>> = Vec::new();
    for (j, base) in pre.cusum_base.iter().enumerate() {
        let c = calibrate_threshold(&calib_rows.column(j), base, sc.target_fpr)?;
        cusum_alarms.push(cusum_detect(&test_rows.column(j), &c)?);
        cusum_cfgs.push(c);
    }

    let truth = test_set.flat_labels();
    let l = test_set.sequence_length;
    let factor = test_set.downsample_factor;
    let timesteps = (0..scores.len())
        .map(|i| {
            let (k, s) = (i / l, i % l);
            TimestepScore {
                window: k,
                step: s,
                offset: test_set.source_offsets[k] + s * factor,
                truth: truth.as_ref().map(|t| t[i]),
                residual: scores.residual[i],
                residual_normalized: scores.residual_normalized[i],
                discrimination: scores.discrimination[i],
                score: scores.combined[i],
                gan_ad: flags[i],
                spe: spe_values.as_ref().map(|v| v[i]),
                spe_flag: spe_flags.as_ref().map(|v| v[i]),
                cusum: cusum_alarms.iter().map(|a| a[i]).collect(),
            }
        })
        .collect();

    Ok(DetectionRun {
        column_names: pre.column_names.clone(),
        calibration: Calibration {
            lambda: sc.lambda,
            tau,
            target_fpr: sc.target_fpr,
            residual_range: range,
            spe_threshold,
            cusum: cusum_cfgs,
        },
        timesteps,
    })
}

const SCORE_COLUMNS: [&str; 11] = [
    "window",
    "step",
    "offset",
    "truth",
    "residual",
    "residual_normalized",
    "discrimination",
    "score",
    "gan_ad",
    "spe",
    "spe_flag",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

impl DetectionRun {
    /// One row per test timestep; CUSUM alarms follow as `cusum_<variable>`
    /// columns.
    pub fn scores_csv(&self) -> String {
        let mut s = SCORE_COLUMNS.join(",");
        let n_cusum = self.timesteps.first().map_or(0, |t| t.cusum.len());
        for name in self.column_names.iter().take(n_cusum) {
            let _ = write!(s, ",cusum_{name}");
        }
        s.push('\n');
        for t in &self.timesteps {
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                t.window,
                t.step,
                t.offset,
                opt(&t.truth),
                t.residual,
                t.residual_normalized,
                t.discrimination,
                t.score,
                t.gan_ad,
                opt(&t.spe),
                opt(&t.spe_flag)
            );
            for a in &t.cusum {
                let _ = write!(s, ",{a}");
            }
            s.push('\n');
        }
        s
    }

    pub fn evaluate(&self, config_hash: Option<&str>) -> Result<EvaluationReport> {
        evaluate_timesteps(&self.timesteps, &self.column_names, config_hash)
    }
}

/// Parses the output of [`DetectionRun::scores_csv`].
pub fn read_scores_csv(text: &str) -> Result<(Vec<String>, Vec<TimestepScore>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < SCORE_COLUMNS.len() || header[..SCORE_COLUMNS.len()] != SCORE_COLUMNS {
        return Err(Error::invalid(format!("not a scores file; header starts {:?}", &header[..header.len().min(3)])));
    }
    let names: Vec<String> = header[SCORE_COLUMNS.len()..]
        .iter()
        .map(|h| h.strip_prefix("cusum_").unwrap_or(h).to_string())
        .collect();
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            cell(j).parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row + 2,
                column: header[j].clone(),
                value: cell(j).to_string(),
            })
        };
        let int = |j: usize| -> Result<usize> {
            cell(j).parse::<usize>().map_err(|_| Error::NonNumeric {
                row: row + 2,
                column: header[j].clone(),
                value: cell(j).to_string(),
            })
        };
        let opt_flag = |j: usize| -> Result<Option<u8>> {
            if cell(j).is_empty() {
                Ok(None)
            } else {
                Ok(Some(int(j)? as u8))
            }
        };
        out.push(TimestepScore {
            window: int(0)?,
            step: int(1)?,
            offset: int(2)?,
            truth: opt_flag(3)?,
            residual: num(4)?,
            residual_normalized: num(5)?,
            discrimination: num(6)?,
            score: num(7)?,
            gan_ad: int(8)? as u8,
            spe: if cell(9).is_empty() { None } else { Some(num(9)?) },
            spe_flag: opt_flag(10)?,
            cusum: (SCORE_COLUMNS.len()..header.len()).map(|j| int(j).map(|v| v as u8)).collect::<Result<_>>()?,
        });
    }
    Ok((names, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableReport {
    pub variable: String,
    pub report: DetectionReport,
}

/// Side-by-side detection quality of every method on one test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: Option<String>,
    pub n_timesteps: usize,
    pub n_anomalous: usize,
    pub gan_ad: DetectionReport,
    pub spe: Option<DetectionReport>,
    pub cusum: Vec<VariableReport>,
    /// The per-variable CUSUM with the highest F1.
    pub cusum_best: Option<VariableReport>,
}

pub fn evaluate_timesteps(
    steps: &[TimestepScore],
    column_names: &[String],
    config_hash: Option<&str>,
) -> Result<EvaluationReport> {
    let truth: Vec<u8> = steps
        .iter()
        .map(|t| t.truth.ok_or_else(|| Error::invalid("evaluation needs ground-truth labels")))
        .collect::<Result<_>>()?;
    let gan: Vec<u8> = steps.iter().map(|t| t.gan_ad).collect();
    let spe = match steps.first().and_then(|t| t.spe_flag) {
        Some(_) => {
            let p: Vec<u8> = steps.iter().map(|t| t.spe_flag.unwrap_or(0)).collect();
            Some(metrics(&p, &truth)?)
        }
        None => None,
    };
    let n_cusum = steps.first().map_or(0, |t| t.cusum.len());
    let cusum = (0..n_cusum)
        .map(|j| {
            let p: Vec<u8> = steps.iter().map(|t| t.cusum[j]).collect();
            Ok(VariableReport {
                variable: column_names.get(j).cloned().unwrap_or_else(|| format!("x{j}")),
                report: metrics(&p, &truth)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cusum_best = cusum
        .iter()
        .fold(None::<&VariableReport>, |best, r| match best {
            Some(b) if b.report.f1 >= r.report.f1 => Some(b),
            _ => Some(r),
        })
        .cloned();
    Ok(EvaluationReport {
        config_hash: config_hash.map(str::to_string),
        n_timesteps: steps.len(),
        n_anomalous: truth.iter().filter(|&&t| t == 1).count(),
        gan_ad: metrics(&gan, &truth)?,
        spe,
        cusum,
        cusum_best,
    })
}

/// Everything produced by [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub preprocessor: Preprocessor,
    pub model: GanModel,
    pub detection: DetectionRun,
    pub report: EvaluationReport,
}

/// Split, train, calibrate, detect and evaluate in one call.
pub fn run_pipeline(
    normal: &RawSeries,
    test: &RawSeries,
    cfg: &PipelineConfig,
    policy: &CheckpointPolicy,
    config_hash: Option<&str>,
) -> Result<PipelineOutput> {
    let (train, calib) = split_normal(normal, &cfg.preprocess)?;
    if calib.is_empty() {
        return Err(Error::Config("preprocess.calibration_fraction must be positive to select thresholds".into()));
    }
    let (preprocessor, model) = train_pipeline(&train, cfg, policy)?;
    let detection = detect(&preprocessor, &model, &calib, test, cfg)?;
    let report = detection.evaluate(config_hash)?;
    Ok(PipelineOutput { preprocessor, model, detection, report })
}
