//! Run configuration: one TOML file covering paths, preprocessing, models,
//! scoring and baselines, validated with line-precise messages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gan::TrainingConfig;
use crate::inversion::InversionConfig;
use crate::pipeline::{BaselineConfig, PcaConfig, PipelineConfig, PreprocessConfig, ScoringConfig};
use crate::series::ColumnSchema;
use crate::synthetic::ScenarioSpec;

/// Environment variables that override `[paths]` entries.
pub const ENV_NORMAL: &str = "GANAD_NORMAL";
pub const ENV_TEST: &str = "GANAD_TEST";
pub const ENV_OUT: &str = "GANAD_OUT";
pub const ENV_CHECKPOINTS: &str = "GANAD_CHECKPOINTS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Attack-free run used for training and calibration.
    pub normal: Option<PathBuf>,
    /// Run to score.
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    /// Save a checkpoint every this many epochs (0 = final only).
    pub checkpoint_every: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { checkpoint_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateOptions {
    pub samples: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { samples: 64 }
    }
}

/// Scenario used by `synth`; both runs default to the bundled benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub normal: Option<ScenarioSpec>,
    pub test: Option<ScenarioSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Overrides the `gan`, `inversion` and synthetic seeds when set.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub schema: ColumnSchema,
    pub preprocess: PreprocessConfig,
    pub pca: PcaConfig,
    pub gan: TrainingConfig,
    pub inversion: InversionConfig,
    pub scoring: ScoringConfig,
    pub baselines: BaselineConfig,
    pub train: TrainOptions,
    pub generate: GenerateOptions,
    pub synth: SynthOptions,
}

/// A problem tied to a dotted key such as `scoring.lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub key: String,
    pub message: String,
}

fn issue(key: &str, message: impl Into<String>) -> Issue {
    Issue { key: key.to_string(), message: message.into() }
}

impl RunConfig {
    /// Parses TOML; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start));
            let msg = e.message().trim().to_string();
            match line {
                Some(l) => Error::Config(format!("{origin}:{l}: {msg}")),
                None => Error::Config(format!("{origin}: {msg}")),
            }
        })?;
        let issues = cfg.issues();
        if !issues.is_empty() {
            let msgs: Vec<String> = issues
                .iter()
                .map(|i| match locate_key(text, &i.key) {
                    Some(l) => format!("{origin}:{l}: {}: {}", i.key, i.message),
                    None => format!("{origin}: {}: {}", i.key, i.message),
                })
                .collect();
            return Err(Error::Config(msgs.join("\n")));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Every range or consistency problem, in declaration order.
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            preprocess: self.preprocess.clone(),
            pca: self.pca.clone(),
            gan: self.gan.clone(),
            inversion: self.inversion.clone(),
            scoring: self.scoring.clone(),
            baselines: self.baselines.clone(),
        }
    }

    pub fn issues(&self) -> Vec<Issue> {
        let p = self;
        let mut out = Vec::new();
        let pre = &p.preprocess;
        for (key, v) in [
            ("preprocess.window_length", pre.window_length),
            ("preprocess.train_shift", pre.train_shift),
            ("preprocess.test_shift", pre.test_shift),
            ("preprocess.downsample_factor", pre.downsample_factor),
        ] {
            if v == 0 {
                out.push(issue(key, "must be at least 1"));
            }
        }
        if pre.downsample_factor > 0 && pre.window_length % pre.downsample_factor != 0 {
            out.push(issue(
                "preprocess.downsample_factor",
                format!("must divide window_length {}", pre.window_length),
            ));
        }
        if !(0.0..1.0).contains(&pre.calibration_fraction) {
            out.push(issue("preprocess.calibration_fraction", "must lie in [0, 1)"));
        }
        if !(p.pca.range > 0.0 && p.pca.range < 1.0) {
            out.push(issue("pca.range", "must lie in (0, 1)"));
        }

        let g = &p.gan;
        for (key, v) in [
            ("gan.batch_size", g.batch_size),
            ("gan.d_steps", g.d_steps),
            ("gan.g_steps", g.g_steps),
            ("gan.latent_dim", g.latent_dim),
            ("gan.sequence_length", g.sequence_length),
            ("gan.generator.hidden_size", g.generator.hidden_size),
            ("gan.generator.depth", g.generator.depth),
            ("gan.discriminator.hidden_size", g.discriminator.hidden_size),
            ("gan.discriminator.depth", g.discriminator.depth),
        ] {
            if v == 0 {
                out.push(issue(key, "must be at least 1"));
            }
        }
        if pre.downsample_factor > 0 && g.sequence_length != pre.sequence_length() {
            out.push(issue(
                "gan.sequence_length",
                format!(
                    "must equal window_length / downsample_factor = {}",
                    pre.sequence_length()
                ),
            ));
        }
        for (key, o) in [("gan.d_optimizer.learning_rate", &g.d_optimizer), ("gan.g_optimizer.learning_rate", &g.g_optimizer)]
        {
            if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
                out.push(issue(key, "must be positive"));
            }
        }
        if !(g.clip_norm > 0.0) {
            out.push(issue("gan.clip_norm", "must be positive"));
        }
        if g.max_batches_per_epoch == Some(0) {
            out.push(issue("gan.max_batches_per_epoch", "must be at least 1"));
        }
        if g.mmd_samples == 1 {
            out.push(issue("gan.mmd_samples", "must be 0 or at least 2"));
        }

        let inv = &p.inversion;
        if inv.restarts == 0 {
            out.push(issue("inversion.restarts", "must be at least 1"));
        }
        if !(inv.learning_rate > 0.0 && inv.learning_rate.is_finite()) {
            out.push(issue("inversion.learning_rate", "must be positive"));
        }
        if !(inv.tolerance >= 0.0) {
            out.push(issue("inversion.tolerance", "must be non-negative"));
        }

        let sc = &p.scoring;
        if !(0.0..=1.0).contains(&sc.lambda) {
            out.push(issue("scoring.lambda", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&sc.target_fpr) {
            out.push(issue("scoring.target_fpr", "must lie in [0, 1)"));
        }
        if sc.tau.is_some_and(|t| !(t >= 0.0)) {
            out.push(issue("scoring.tau", "must be non-negative"));
        }

        let b = &p.baselines;
        if !(b.cusum_k_sigma >= 0.0) {
            out.push(issue("baselines.cusum_k_sigma", "must be non-negative"));
        }
        if !(b.cusum_h_sigma > 0.0) {
            out.push(issue("baselines.cusum_h_sigma", "must be positive"));
        }
        if b.spe && b.spe_components == 0 {
            out.push(issue("baselines.spe_components", "must be at least 1"));
        }
        if self.generate.samples == 0 {
            out.push(issue("generate.samples", "must be at least 1"));
        }
        out
    }

    /// Applies the top-level seed (if any) to every seeded component.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        if let Some(s) = c.seed {
            c.gan.seed = s;
            c.inversion.seed = s;
            for spec in [&mut c.synth.normal, &mut c.synth.test].into_iter().flatten() {
                spec.seed = s;
            }
        }
        c
    }

    /// SHA-256 over everything that influences results; paths are left out
    /// so relocating data does not change it.
    pub fn hash(&self) -> String {
        let r = self.resolved();
        let key = serde_json::json!({
            "seed": r.seed,
            "schema": r.schema,
            "pipeline": r.pipeline(),
            "train": r.train,
            "generate": r.generate,
            "synth": r.synth,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }

    pub fn out_dir(&self) -> PathBuf {
        env_path(ENV_OUT).or_else(|| self.paths.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn normal_path(&self) -> PathBuf {
        env_path(ENV_NORMAL)
            .or_else(|| self.paths.normal.clone())
            .unwrap_or_else(|| self.out_dir().join("normal.csv"))
    }

    pub fn test_path(&self) -> PathBuf {
        env_path(ENV_TEST).or_else(|| self.paths.test.clone()).unwrap_or_else(|| self.out_dir().join("test.csv"))
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        env_path(ENV_CHECKPOINTS)
            .or_else(|| self.paths.checkpoints.clone())
            .unwrap_or_else(|| self.out_dir().join("checkpoints"))
    }

    /// The configuration with every default spelled out, as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// 1-based line containing byte `offset`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Line on which dotted `key` is assigned, following `[table]` headers and
/// dotted keys.
pub fn locate_key(text: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            table = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs: String = lhs.split('.').map(|p| p.trim().trim_matches('"')).collect::<Vec<_>>().join(".");
        let full = if table.is_empty() { lhs } else { format!("{table}.{lhs}") };
        if full == key {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("", "cfg").unwrap();
        assert_eq!(c.preprocess.window_length, 120);
        assert_eq!(c.preprocess.downsample_factor, 10);
        assert_eq!(c.gan.latent_dim, 15);
        assert_eq!(c.gan.generator.depth, 3);
        assert_eq!(c.gan.discriminator.hidden_size, 100);
        assert!(c.issues().is_empty());
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text, "cfg").unwrap(), c);
    }

    #[test]
    fn range_errors_point_at_the_line() {
        let text = "seed = 3\n\n[scoring]\ntarget_fpr = 0.01\nlambda = 1.5\n";
        let err = RunConfig::from_toml(text, "run.toml").unwrap_err().to_string();
        assert!(err.contains("run.toml:5: scoring.lambda"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_types_point_at_the_line() {
        let err = RunConfig::from_toml("[gan]\nepochs = 3\nhiden = 4\n", "c").unwrap_err().to_string();
        assert!(err.contains("c:"), "{err}");
        assert!(err.contains("hiden"), "{err}");
        let err = RunConfig::from_toml("[preprocess]\nwindow_length = \"long\"\n", "c").unwrap_err().to_string();
        assert!(err.contains("c:2"), "{err}");
    }

    #[test]
    fn sequence_length_must_match_preprocessing() {
        let text = "[preprocess]\nwindow_length = 60\n";
        let err = RunConfig::from_toml(text, "c").unwrap_err().to_string();
        assert!(err.contains("gan.sequence_length"), "{err}");
        let ok = "[preprocess]\nwindow_length = 60\n[gan]\nsequence_length = 6\n";
        assert!(RunConfig::from_toml(ok, "c").is_ok());
    }

    #[test]
    fn locating_dotted_keys() {
        let text = "[gan]\nepochs = 1\ngenerator.depth = 0\n[gan.discriminator]\nhidden_size = 2 # note\n";
        assert_eq!(locate_key(text, "gan.epochs"), Some(2));
        assert_eq!(locate_key(text, "gan.generator.depth"), Some(3));
        assert_eq!(locate_key(text, "gan.discriminator.hidden_size"), Some(5));
        assert_eq!(locate_key(text, "gan.batch_size"), None);
    }

    #[test]
    fn seed_override_and_hash() {
        let mut c = RunConfig::default();
        let h0 = c.hash();
        c.paths.out = Some("elsewhere".into());
        assert_eq!(c.hash(), h0);
        c.seed = Some(9);
        let r = c.resolved();
        assert_eq!((r.gan.seed, r.inversion.seed), (9, 9));
        assert_ne!(c.hash(), h0);
        assert_eq!(c.hash().len(), 64);
    }
}
