//! Adversarial training of an LSTM generator against an LSTM discriminator.
//!
//! Each training iteration draws a minibatch of real windows, takes
//! `d_steps` discriminator updates on
//! `(1/m) Σ [-ln D(x_i) - ln(1 - D(G(z_i)))]` and then `g_steps` generator
//! updates on the non-saturating loss `(1/m) Σ -ln D(G(z_i))`. The
//! discriminator scores every timestep; a sequence's score is the mean of
//! its per-timestep scores.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lstm::{Activation, GradientSet, LstmShape, StackedLstm};
use crate::matrix::Matrix;
use crate::mmd::{flatten, median_heuristic, mmd_unbiased, KernelConfig};
use crate::optim::{OptimizerConfig, OptimizerState};
use crate::series::WindowSet;

/// Scores are clamped to `[SCORE_FLOOR, 1 - SCORE_FLOOR]` inside training.
const SCORE_FLOOR: f64 = 1e-12;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSize {
    pub hidden_size: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub d_steps: usize,
    pub g_steps: usize,
    pub d_optimizer: OptimizerConfig,
    pub g_optimizer: OptimizerConfig,
    pub seed: u64,
    pub latent_dim: usize,
    pub sequence_length: usize,
    pub generator: NetworkSize,
    pub discriminator: NetworkSize,
    /// Global-norm gradient clip applied before every update.
    pub clip_norm: f64,
    /// Caps minibatches per epoch; `None` uses every window once.
    #[serde(default)]
    pub max_batches_per_epoch: Option<usize>,
    /// Generated/reference sequences used for the per-epoch MMD; 0 disables it.
    #[serde(default)]
    pub mmd_samples: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            batch_size: 32,
            d_steps: 1,
            g_steps: 3,
            d_optimizer: OptimizerConfig::adam(1e-3),
            g_optimizer: OptimizerConfig::adam(1e-3),
            seed: 0,
            latent_dim: 15,
            sequence_length: 12,
            generator: NetworkSize { hidden_size: 100, depth: 3 },
            discriminator: NetworkSize { hidden_size: 100, depth: 1 },
            clip_norm: 5.0,
            max_batches_per_epoch: None,
            mmd_samples: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("d_steps", self.d_steps),
            ("g_steps", self.g_steps),
            ("latent_dim", self.latent_dim),
            ("sequence_length", self.sequence_length),
            ("generator.hidden_size", self.generator.hidden_size),
            ("generator.depth", self.generator.depth),
            ("discriminator.hidden_size", self.discriminator.hidden_size),
            ("discriminator.depth", self.discriminator.depth),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.max_batches_per_epoch == Some(0) {
            return Err(Error::invalid("max_batches_per_epoch must be at least 1"));
        }
        if self.mmd_samples == 1 {
            return Err(Error::invalid("mmd_samples must be 0 or at least 2"));
        }
        for (name, o) in [("d_optimizer", &self.d_optimizer), ("g_optimizer", &self.g_optimizer)] {
            if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
                return Err(Error::invalid(format!("{name}.learning_rate must be positive")));
            }
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip_norm must be positive"));
        }
        Ok(())
    }
}

/// Maps latent sequences (`L × latent_dim`) to feature sequences (`L × n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub net: StackedLstm,
}

/// Scores each timestep of a sequence with the probability of being real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub net: StackedLstm,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(latent_dim: usize, n_features: usize, size: NetworkSize, rng: &mut R) -> Result<Self> {
        let shape = LstmShape {
            input_size: latent_dim,
            hidden_size: size.hidden_size,
            depth: size.depth,
            output_size: n_features,
            output_activation: Activation::Tanh,
        };
        Ok(Generator { net: StackedLstm::random(shape, rng)? })
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_size()
    }

    pub fn n_features(&self) -> usize {
        self.net.output_size
    }

    pub fn generate_one(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.latent_dim() {
            return Err(Error::dims(format!(
                "latent input has {} columns, generator expects {}",
                z.cols(),
                self.latent_dim()
            )));
        }
        self.net.predict(z)
    }

    /// Deterministic forward pass for each latent sequence.
    pub fn generate(&self, latent: &[Matrix]) -> Result<Vec<Matrix>> {
        latent.par_iter().map(|z| self.generate_one(z)).collect()
    }
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(n_features: usize, size: NetworkSize, rng: &mut R) -> Result<Self> {
        let shape = LstmShape {
            input_size: n_features,
            hidden_size: size.hidden_size,
            depth: size.depth,
            output_size: 1,
            output_activation: Activation::Sigmoid,
        };
        Ok(Discriminator { net: StackedLstm::random(shape, rng)? })
    }

    /// Per-timestep probabilities of being real.
    pub fn scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.net.predict(x)?.into_vec())
    }
}

/// Standard-normal latent sequences, one `length × dim` matrix per element.
pub fn sample_latent<R: Rng + ?Sized>(count: usize, length: usize, dim: usize, rng: &mut R) -> Vec<Matrix> {
    (0..count)
        .map(|_| {
            let data = (0..length * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            Matrix::from_vec(length, dim, data).expect("sized by construction")
        })
        .collect()
}

/// Mean of per-timestep scores.
pub fn sequence_score(per_timestep: &[f64]) -> f64 {
    per_timestep.iter().sum::<f64>() / per_timestep.len() as f64
}

fn check_scores(name: &str, scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if let Some(s) = scores.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(Error::invalid(format!("{name} contains {s}, outside (0, 1)")));
    }
    Ok(())
}

/// `(1/m) Σ [-ln d_real_i - ln(1 - d_fake_i)]` over sequence scores.
pub fn d_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    check_scores("d_real", d_real)?;
    check_scores("d_fake", d_fake)?;
    if d_real.len() != d_fake.len() {
        return Err(Error::dims(format!("{} real vs {} fake scores", d_real.len(), d_fake.len())));
    }
    let m = d_real.len() as f64;
    Ok(d_real.iter().zip(d_fake).map(|(r, f)| -r.ln() - (1.0 - f).ln()).sum::<f64>() / m)
}

/// Non-saturating generator loss `(1/m) Σ -ln d_fake_i`.
pub fn g_loss(d_fake: &[f64]) -> Result<f64> {
    check_scores("d_fake", d_fake)?;
    Ok(d_fake.iter().map(|f| -f.ln()).sum::<f64>() / d_fake.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub d_loss: f64,
    pub g_loss: f64,
}

/// Generator, discriminator, their optimizer states and training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanModel {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub config: TrainingConfig,
    pub d_state: OptimizerState,
    pub g_state: OptimizerState,
    pub loss_history: Vec<EpochLosses>,
    pub mmd_history: Vec<f64>,
    pub epochs_completed: usize,
}

/// Independent deterministic random streams derived from one seed.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_MMD: u64 = 3;

impl GanModel {
    /// Freshly initialized networks for `n_features`-dimensional data.
    pub fn init(config: TrainingConfig, n_features: usize) -> Result<Self> {
        config.validate()?;
        if n_features == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        let mut rng = stream(config.seed, STREAM_INIT);
        let generator = Generator::new(config.latent_dim, n_features, config.generator, &mut rng)?;
        let discriminator = Discriminator::new(n_features, config.discriminator, &mut rng)?;
        let d_state = OptimizerState::for_network(config.d_optimizer, &discriminator.net);
        let g_state = OptimizerState::for_network(config.g_optimizer, &generator.net);
        Ok(GanModel {
            generator,
            discriminator,
            config,
            d_state,
            g_state,
            loss_history: Vec::new(),
            mmd_history: Vec::new(),
            epochs_completed: 0,
        })
    }

    pub fn n_features(&self) -> usize {
        self.generator.n_features()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.save_stamped(path, None)
    }

    /// Like [`GanModel::save`], recording the hash of the producing config.
    pub fn save_stamped(&self, path: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let ckpt = CheckpointRef { version: CHECKPOINT_VERSION, config_hash, model: self };
        fs::write(path, serde_json::to_string(&ckpt)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint version {}", ckpt.version)));
        }
        Ok(ckpt.model)
    }

    /// `epoch,d_loss,g_loss,mmd` rows; `mmd` is empty when not tracked.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,d_loss,g_loss,mmd\n");
        for (e, l) in self.loss_history.iter().enumerate() {
            let mmd = self.mmd_history.get(e).map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", e + 1, l.d_loss, l.g_loss, mmd));
        }
        s
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    model: &'a GanModel,
}

#[derive(Deserialize)]
struct Checkpoint {
    version: u32,
    model: GanModel,
}

/// Where and how often to persist checkpoints during training.
#[derive(Debug, Clone, Default)]
pub struct CheckpointPolicy {
    pub dir: Option<PathBuf>,
    /// Save after every `every` epochs (0 = only the final model).
    pub every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointManifest {
    version: u32,
    latest: String,
    epochs_completed: usize,
    files: Vec<String>,
}

impl CheckpointPolicy {
    fn save(&self, model: &GanModel, files: &mut Vec<String>) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = format!("epoch_{:05}.json", model.epochs_completed);
        model.save(dir.join(&name))?;
        if !files.contains(&name) {
            files.push(name.clone());
        }
        let manifest = CheckpointManifest {
            version: CHECKPOINT_VERSION,
            latest: name,
            epochs_completed: model.epochs_completed,
            files: files.clone(),
        };
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&p, e))
    }
}

/// Loads the newest checkpoint listed in `dir/manifest.json`.
pub fn load_latest_checkpoint(dir: impl AsRef<Path>) -> Result<GanModel> {
    let dir = dir.as_ref();
    let p = dir.join("manifest.json");
    if !p.exists() {
        return Err(Error::MissingFile(p));
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)?;
    GanModel::load(dir.join(manifest.latest))
}

/// Trains a new model on `data` for `config.epochs` epochs.
pub fn train(config: TrainingConfig, data: &WindowSet) -> Result<GanModel> {
    let mut model = GanModel::init(config, data.n_features())?;
    run_training(&mut model, data, &CheckpointPolicy::default())?;
    Ok(model)
}

/// Continues training `model` until `config.epochs` epochs are complete.
///
/// A non-finite loss or gradient rolls `model` back to the last completed
/// epoch (persisting it when a checkpoint directory is set) and returns
/// [`Error::Diverged`].
pub fn run_training(model: &mut GanModel, data: &WindowSet, policy: &CheckpointPolicy) -> Result<()> {
    let cfg = model.config.clone();
    if data.is_empty() {
        return Err(Error::invalid("no training windows"));
    }
    if data.n_features() != model.n_features() {
        return Err(Error::dims(format!(
            "windows have {} features, generator emits {}",
            data.n_features(),
            model.n_features()
        )));
    }
    if let Some(w) = data.windows.iter().find(|w| w.rows() != cfg.sequence_length) {
        return Err(Error::dims(format!(
            "window of {} rows, configured sequence length {}",
            w.rows(),
            cfg.sequence_length
        )));
    }

    let mmd_probe = (cfg.mmd_samples >= 2).then(|| MmdProbe::new(&cfg, data)).transpose()?;
    let mut files = Vec::new();
    let mut rng = stream(cfg.seed, STREAM_TRAIN);
    // skip the draws consumed by already-completed epochs
    for _ in 0..model.epochs_completed {
        rng = ChaCha8Rng::seed_from_u64(rng.random());
    }
    policy.save(model, &mut files)?;

    while model.epochs_completed < cfg.epochs {
        let snapshot = model.clone();
        let epoch_rng_seed: u64 = rng.random();
        let mut epoch_rng = ChaCha8Rng::seed_from_u64(epoch_rng_seed);
        rng = ChaCha8Rng::seed_from_u64(epoch_rng_seed);
        match train_epoch(model, data, &mut epoch_rng) {
            Ok(losses) => {
                model.loss_history.push(losses);
                if let Some(p) = &mmd_probe {
                    let v = p.measure(&model.generator)?;
                    if !v.is_finite() {
                        *model = snapshot;
                        return diverged(model, policy, &mut files, "non-finite MMD");
                    }
                    model.mmd_history.push(v);
                }
                model.epochs_completed += 1;
                log::debug!(
                    "epoch {} d_loss {:.4} g_loss {:.4}",
                    model.epochs_completed,
                    losses.d_loss,
                    losses.g_loss
                );
                if policy.every > 0 && model.epochs_completed % policy.every == 0 {
                    policy.save(model, &mut files)?;
                }
            }
            Err(Error::Diverged(msg)) => {
                *model = snapshot;
                return diverged(model, policy, &mut files, &msg);
            }
            Err(e) => return Err(e),
        }
    }
    policy.save(model, &mut files)?;
    Ok(())
}

fn diverged(model: &GanModel, policy: &CheckpointPolicy, files: &mut Vec<String>, msg: &str) -> Result<()> {
    policy.save(model, files)?;
    Err(Error::Diverged(format!(
        "{msg} during epoch {}; model restored to epoch {}",
        model.epochs_completed + 1,
        model.epochs_completed
    )))
}

/// Fixed latent batch and reference windows so that MMD values are
/// comparable across epochs.
struct MmdProbe {
    latent: Vec<Matrix>,
    reference: Vec<Matrix>,
    kernel: KernelConfig,
}

impl MmdProbe {
    fn new(cfg: &TrainingConfig, data: &WindowSet) -> Result<Self> {
        let mut rng = stream(cfg.seed, STREAM_MMD);
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.shuffle(&mut rng);
        let reference: Vec<Matrix> =
            idx.iter().take(cfg.mmd_samples).map(|&i| data.windows[i].clone()).collect();
        if reference.len() < 2 {
            return Err(Error::invalid("MMD tracking needs at least 2 training windows"));
        }
        let latent = sample_latent(cfg.mmd_samples, cfg.sequence_length, cfg.latent_dim, &mut rng);
        let sigma = median_heuristic(&flatten(&reference))?;
        Ok(MmdProbe { latent, reference, kernel: KernelConfig::fixed(sigma) })
    }

    fn measure(&self, g: &Generator) -> Result<f64> {
        let fake = g.generate(&self.latent)?;
        mmd_unbiased(&flatten(&fake), &flatten(&self.reference), &self.kernel)
    }
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_FLOOR, 1.0 - SCORE_FLOOR)
}

fn sum_gradients(net: &StackedLstm, parts: Vec<GradientSet>) -> GradientSet {
    let mut total = GradientSet::zeros_like(net);
    for g in &parts {
        total.add_assign(g);
    }
    total
}

/// Discriminator loss and gradient over one batch of real and fake sequences.
pub fn discriminator_step_grads(
    d: &Discriminator,
    real: &[&Matrix],
    fake: &[Matrix],
) -> Result<(f64, GradientSet)> {
    let m = real.len() as f64;
    let eval = |x: &Matrix, is_real: bool| -> Result<(f64, GradientSet)> {
        let (out, cache) = d.net.forward(x)?;
        let len = out.rows() as f64;
        let s = clamp_score(sequence_score(out.as_slice()));
        let (loss, ds) = if is_real { (-s.ln(), -1.0 / s) } else { (-(1.0 - s).ln(), 1.0 / (1.0 - s)) };
        let dout = Matrix::filled(out.rows(), 1, ds / (m * len));
        let (g, _) = d.net.backward(&cache, &dout)?;
        Ok((loss / m, g))
    };
    let parts: Vec<(f64, GradientSet)> = real
        .par_iter()
        .map(|x| eval(x, true))
        .chain(fake.par_iter().map(|x| eval(x, false)))
        .collect::<Result<_>>()?;
    let loss = parts.iter().map(|p| p.0).sum();
    Ok((loss, sum_gradients(&d.net, parts.into_iter().map(|p| p.1).collect())))
}

/// Generator loss and gradient, backpropagated through the frozen
/// discriminator.
pub fn generator_step_grads(g: &Generator, d: &Discriminator, latent: &[Matrix]) -> Result<(f64, GradientSet)> {
    let m = latent.len() as f64;
    let parts: Vec<(f64, GradientSet)> = latent
        .par_iter()
        .map(|z| -> Result<(f64, GradientSet)> {
            let (fake, gcache) = g.net.forward(z)?;
            let (out, dcache) = d.net.forward(&fake)?;
            let len = out.rows() as f64;
            let s = clamp_score(sequence_score(out.as_slice()));
            let dout = Matrix::filled(out.rows(), 1, -1.0 / (s * m * len));
            let (_, dfake) = d.net.backward(&dcache, &dout)?;
            let (grads, _) = g.net.backward(&gcache, &dfake)?;
            Ok((-s.ln() / m, grads))
        })
        .collect::<Result<_>>()?;
    let loss = parts.iter().map(|p| p.0).sum();
    Ok((loss, sum_gradients(&g.net, parts.into_iter().map(|p| p.1).collect())))
}

fn apply_update(
    net: &mut StackedLstm,
    state: &mut OptimizerState,
    mut grads: GradientSet,
    clip: f64,
    what: &str,
) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Diverged(format!("non-finite {what} gradient")));
    }
    grads.clip_global_norm(clip);
    state.step_network(net, &grads)?;
    if !net.is_finite() {
        return Err(Error::Diverged(format!("non-finite {what} parameters")));
    }
    Ok(())
}

fn train_epoch(model: &mut GanModel, data: &WindowSet, rng: &mut ChaCha8Rng) -> Result<EpochLosses> {
    let cfg = model.config.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let batch = cfg.batch_size.min(order.len());
    let mut n_batches = order.len() / batch;
    if let Some(cap) = cfg.max_batches_per_epoch {
        n_batches = n_batches.min(cap);
    }

    let (mut d_total, mut g_total) = (0.0, 0.0);
    for b in 0..n_batches {
        let real: Vec<&Matrix> = order[b * batch..(b + 1) * batch].iter().map(|&i| &data.windows[i]).collect();
        let mut d_sum = 0.0;
        for _ in 0..cfg.d_steps {
            let z = sample_latent(batch, cfg.sequence_length, cfg.latent_dim, rng);
            let fake = model.generator.generate(&z)?;
            let (loss, grads) = discriminator_step_grads(&model.discriminator, &real, &fake)?;
            if !loss.is_finite() {
                return Err(Error::Diverged("non-finite discriminator loss".into()));
            }
            d_sum += loss;
            apply_update(&mut model.discriminator.net, &mut model.d_state, grads, cfg.clip_norm, "discriminator")?;
        }
        let mut g_sum = 0.0;
        for _ in 0..cfg.g_steps {
            let z = sample_latent(batch, cfg.sequence_length, cfg.latent_dim, rng);
            let (loss, grads) = generator_step_grads(&model.generator, &model.discriminator, &z)?;
            if !loss.is_finite() {
                return Err(Error::Diverged("non-finite generator loss".into()));
            }
            g_sum += loss;
            apply_update(&mut model.generator.net, &mut model.g_state, grads, cfg.clip_norm, "generator")?;
        }
        d_total += d_sum / cfg.d_steps as f64;
        g_total += g_sum / cfg.g_steps as f64;
    }
    Ok(EpochLosses { d_loss: d_total / n_batches as f64, g_loss: g_total / n_batches as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> TrainingConfig {
        TrainingConfig {
            epochs: 2,
            batch_size: 4,
            d_steps: 1,
            g_steps: 1,
            latent_dim: 3,
            sequence_length: 5,
            generator: NetworkSize { hidden_size: 4, depth: 1 },
            discriminator: NetworkSize { hidden_size: 4, depth: 1 },
            ..TrainingConfig::default()
        }
    }

    fn toy_windows(n: usize, len: usize, feats: usize) -> WindowSet {
        let windows = (0..n)
            .map(|k| {
                let mut m = Matrix::zeros(len, feats);
                for t in 0..len {
                    for j in 0..feats {
                        m[(t, j)] = 0.5 * ((t + k) as f64 * 0.7 + j as f64).sin();
                    }
                }
                m
            })
            .collect();
        WindowSet {
            windows,
            window_length: len,
            sequence_length: len,
            shift: 1,
            downsample_factor: 1,
            source_offsets: (0..n).collect(),
            labels: None,
        }
    }

    #[test]
    fn latent_sampling_is_seeded() {
        let a = sample_latent(3, 12, 15, &mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_latent(3, 12, 15, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!(a.iter().all(|m| m.shape() == (12, 15)));
    }

    #[test]
    fn loss_values() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(d_loss(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 2.0 * ln2);
        assert_eq!(g_loss(&[0.5, 0.5, 0.5]).unwrap(), ln2);
        assert!(d_loss(&[1.0 - 1e-15], &[1e-15]).unwrap() < 1e-14);
        assert!(g_loss(&[1.0 - 1e-15]).unwrap() < 1e-14);
        assert!(d_loss(&[0.5], &[1.0]).is_err());
        assert!(d_loss(&[0.5, 0.5], &[0.5]).is_err());
        assert!(g_loss(&[]).is_err());
        assert!(g_loss(&[0.0]).is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = TrainingConfig { epochs: 0, ..small_config() };
        let data = toy_windows(8, 5, 2);
        let model = train(cfg.clone(), &data).unwrap();
        assert_eq!(model, GanModel::init(cfg, 2).unwrap());
        assert!(model.loss_history.is_empty() && model.mmd_history.is_empty());
    }

    #[test]
    fn training_is_reproducible_and_records_history() {
        let cfg = TrainingConfig { mmd_samples: 4, ..small_config() };
        let data = toy_windows(8, 5, 2);
        let a = train(cfg.clone(), &data).unwrap();
        let b = train(cfg, &data).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss_history.len(), 2);
        assert_eq!(a.mmd_history.len(), 2);
        assert_eq!(a.history_csv().lines().count(), 3);
    }

    #[test]
    fn rejects_mismatched_windows() {
        let data = toy_windows(8, 6, 2);
        assert!(train(small_config(), &data).is_err());
        let mut model = GanModel::init(small_config(), 3).unwrap();
        let data = toy_windows(8, 5, 2);
        assert!(run_training(&mut model, &data, &CheckpointPolicy::default()).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_windows(8, 5, 2);
        let mut model = GanModel::init(small_config(), 2).unwrap();
        let policy = CheckpointPolicy { dir: Some(dir.path().to_path_buf()), every: 1 };
        run_training(&mut model, &data, &policy).unwrap();
        let back = load_latest_checkpoint(dir.path()).unwrap();
        assert_eq!(back, model);
        assert!(dir.path().join("epoch_00001.json").exists());
        assert!(matches!(
            load_latest_checkpoint(dir.path().join("nope")),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn generator_outputs_bounded_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = Generator::new(3, 2, NetworkSize { hidden_size: 5, depth: 2 }, &mut rng).unwrap();
        let z = sample_latent(4, 6, 3, &mut rng);
        let a = g.generate(&z).unwrap();
        assert_eq!(a, g.generate(&z).unwrap());
        assert!(a.iter().flat_map(|m| m.as_slice()).all(|v| v.abs() < 1.0));
        assert!(g.generate(&sample_latent(1, 6, 4, &mut rng)).is_err());
    }

    #[test]
    fn zero_generator_with_identity_output_is_silent() {
        let shape = LstmShape {
            input_size: 3,
            hidden_size: 4,
            depth: 2,
            output_size: 2,
            output_activation: Activation::Identity,
        };
        let g = Generator { net: StackedLstm::zeros(shape).unwrap() };
        let out = g.generate(&sample_latent(2, 5, 3, &mut ChaCha8Rng::seed_from_u64(0))).unwrap();
        assert!(out.iter().flat_map(|m| m.as_slice()).all(|&v| v == 0.0));
    }
}
