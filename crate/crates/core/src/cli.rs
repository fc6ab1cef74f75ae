//! Command-line front end. Each subcommand reads the run configuration,
//! consumes artifacts from the output directory and writes new ones there.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gan::{load_latest_checkpoint, run_training, sample_latent, CheckpointPolicy, GanModel};
use crate::pipeline::{detect, evaluate_timesteps, read_scores_csv, split_normal, EvaluationReport, Preprocessor};
use crate::plot::line_chart;
use crate::series::{fit_normalizer_matrix, load_csv, save_bundle, trim_startup, RawSeries};
use crate::synthetic::{default_benchmark, generate_scenario};

pub const MODEL_FILE: &str = "model.json";
pub const PREPROCESSOR_FILE: &str = "preprocessor.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Parser)]
#[command(name = "ganad", version, about = "GAN-based anomaly detection for multivariate time series")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, env = "GANAD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Window the normal (and test) runs and write dataset bundles.
    Ingest,
    /// Write a synthetic normal run and an attacked test run.
    Synth,
    /// Fit preprocessing on the normal run and train the GAN.
    Train,
    /// Sample sequences from the trained generator.
    Generate,
    /// Score the test run with GAN-AD, CUSUM and SPE.
    Detect,
    /// Compare methods against ground truth.
    Evaluate,
    /// Print the effective configuration as TOML.
    Config,
}

/// Process exit status for an error: 1 for invalid configuration or
/// arguments, 2 for failures while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) if !p.exists() => return Err(Error::Config(format!("config file {} not found", p.display()))),
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = Some(out.clone());
    }
    Ok(cfg.resolved())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {} workers: {e}", cli.workers)))?;
    pool.install(|| match cli.command {
        Command::Ingest => cmd_ingest(&cfg),
        Command::Synth => cmd_synth(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Generate => cmd_generate(&cfg),
        Command::Detect => cmd_detect(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg).map(|_| ()),
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn stamped_csv(hash: &str, body: &str) -> String {
    format!("# config_hash: {hash}\n{body}")
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, hash: &str, body: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Stamped { config_hash: hash, body })?;
    text.push('\n');
    write(path, text)
}

fn load_series(cfg: &RunConfig, path: &Path) -> Result<RawSeries> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    load_csv(path, &cfg.schema)
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let pre = &cfg.preprocess;
    let hash = cfg.hash();
    let out = cfg.out_dir().join("dataset");
    let normal = load_series(cfg, &cfg.normal_path())?;
    let normal = if pre.trim_rows > 0 { trim_startup(&normal, pre.trim_rows)? } else { normal };
    let stats = fit_normalizer_matrix(&normal.values)?;
    let windows_of = |s: &RawSeries, shift: usize| -> Result<_> {
        let n = RawSeries { values: stats.apply_matrix(&s.values)?, ..s.clone() };
        crate::series::downsample_median(&crate::series::window(&n, pre.window_length, shift)?, pre.downsample_factor)
    };
    let train = windows_of(&normal, pre.train_shift)?;
    let m = save_bundle(&train, &normal.column_names, Some(&stats), Some(&hash), &out, "train")?;
    println!("train: {} windows of {} x {} ({} raw rows)", m.n_windows, m.sequence_length, m.n_features, normal.len());
    let test_path = cfg.test_path();
    if test_path.exists() {
        let test = load_series(cfg, &test_path)?;
        let set = windows_of(&test, pre.test_shift)?;
        let m = save_bundle(&set, &test.column_names, Some(&stats), Some(&hash), &out, "test")?;
        println!("test: {} windows of {} x {} ({} raw rows)", m.n_windows, m.sequence_length, m.n_features, test.len());
    }
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let bench = default_benchmark(cfg.seed.unwrap_or(0));
    let normal_spec = cfg.synth.normal.clone().unwrap_or(bench.normal);
    let test_spec = cfg.synth.test.clone().unwrap_or(bench.test);
    for (spec, path) in [(normal_spec, cfg.normal_path()), (test_spec, cfg.test_path())] {
        let s = generate_scenario(&spec)?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        crate::series::write_csv(&s.series, &path)?;
        let attacked = s.series.labels.as_ref().map_or(0, |l| l.iter().filter(|&&v| v == 1).count());
        println!("{}: {} rows, {} attacked", path.display(), s.series.len(), attacked);
    }
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let pc = cfg.pipeline();
    pc.validate()?;
    let hash = cfg.hash();
    let out = cfg.out_dir();
    let normal = load_series(cfg, &cfg.normal_path())?;
    let (train, _) = split_normal(&normal, &pc.preprocess)?;
    let pre = Preprocessor::fit(&train, &pc)?;
    let windows = pre.model_windows(&pre.windows(&train, pc.preprocess.train_shift)?)?;
    log::info!("training on {} windows of {} x {}", windows.len(), windows.sequence_length, windows.n_features());

    let policy = CheckpointPolicy { dir: Some(cfg.checkpoint_dir()), every: cfg.train.checkpoint_every };
    let mut model = GanModel::init(pc.gan.clone(), pre.model_dim())?;
    let result = run_training(&mut model, &windows, &policy);
    write_json(&out.join(PREPROCESSOR_FILE), &hash, &pre)?;
    write_history(&out, &hash, &model)?;
    result?;
    model.save_stamped(out.join(MODEL_FILE), Some(&hash))?;
    println!("trained {} epochs on {} windows", model.epochs_completed, windows.len());
    Ok(())
}

fn write_history(out: &Path, hash: &str, model: &GanModel) -> Result<()> {
    write(&out.join(HISTORY_FILE), stamped_csv(hash, &model.history_csv()))?;
    let d: Vec<f64> = model.loss_history.iter().map(|l| l.d_loss).collect();
    let g: Vec<f64> = model.loss_history.iter().map(|l| l.g_loss).collect();
    write(&out.join("history.svg"), line_chart("training losses", &[("d_loss", &d), ("g_loss", &g)], 640, 320))?;
    if !model.mmd_history.is_empty() {
        write(&out.join("mmd.svg"), line_chart("MMD per epoch", &[("mmd", &model.mmd_history)], 640, 320))?;
    }
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<(Preprocessor, GanModel)> {
    let out = cfg.out_dir();
    let pre: Preprocessor = serde_json::from_str(&read(&out.join(PREPROCESSOR_FILE))?)?;
    let model_path = out.join(MODEL_FILE);
    let model = if model_path.exists() {
        GanModel::load(model_path)?
    } else {
        // a run interrupted after some epochs still leaves checkpoints
        load_latest_checkpoint(cfg.checkpoint_dir()).map_err(|_| Error::MissingFile(model_path))?
    };
    Ok((pre, model))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let (pre, model) = load_model(cfg)?;
    let hash = cfg.hash();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(model.config.seed));
    let z = sample_latent(cfg.generate.samples, model.config.sequence_length, model.config.latent_dim, &mut rng);
    let samples = model.generator.generate(&z)?;

    let dims: Vec<String> = (0..pre.model_dim()).map(|k| format!("m{}", k + 1)).collect();
    let mut s = format!("sample,step,{},{}\n", dims.join(","), pre.column_names.join(","));
    for (k, y) in samples.iter().enumerate() {
        let x = pre.from_model_space(y)?;
        for t in 0..y.rows() {
            let model_vals: Vec<String> = y.row(t).iter().map(f64::to_string).collect();
            let vars: Vec<String> = x.row(t).iter().map(f64::to_string).collect();
            s.push_str(&format!("{k},{t},{},{}\n", model_vals.join(","), vars.join(",")));
        }
    }
    let path = cfg.out_dir().join(SAMPLES_FILE);
    write(&path, stamped_csv(&hash, &s))?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}

pub fn cmd_detect(cfg: &RunConfig) -> Result<()> {
    let pc = cfg.pipeline();
    pc.validate()?;
    let hash = cfg.hash();
    let (pre, model) = load_model(cfg)?;
    let normal = load_series(cfg, &cfg.normal_path())?;
    let (_, calib) = split_normal(&normal, &pc.preprocess)?;
    let test = load_series(cfg, &cfg.test_path())?;
    let run = detect(&pre, &model, &calib, &test, &pc)?;

    let out = cfg.out_dir();
    write(&out.join(SCORES_FILE), stamped_csv(&hash, &run.scores_csv()))?;
    write_json(&out.join(CALIBRATION_FILE), &hash, &run.calibration)?;
    let score: Vec<f64> = run.timesteps.iter().map(|t| t.score).collect();
    let truth: Vec<f64> = run.timesteps.iter().filter_map(|t| t.truth.map(f64::from)).collect();
    write(&out.join("scores.svg"), line_chart("anomaly score", &[("score", &score), ("truth", &truth)], 900, 300))?;
    let flagged = run.timesteps.iter().filter(|t| t.gan_ad == 1).count();
    println!("scored {} timesteps, {} flagged (tau {:.4})", run.timesteps.len(), flagged, run.calibration.tau);
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluationReport> {
    let out = cfg.out_dir();
    let (names, steps) = read_scores_csv(&read(&out.join(SCORES_FILE))?)?;
    let hash = cfg.hash();
    let report = evaluate_timesteps(&steps, &names, Some(&hash))?;
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write(&out.join(METRICS_FILE), text)?;

    println!("{:<22} {:>7} {:>7} {:>7} {:>7} {:>7}", "method", "Accu", "Pre", "Rec", "F1", "FPR");
    let row = |name: &str, r: &crate::scoring::DetectionReport| {
        println!(
            "{:<22} {:>7.2} {:>7.2} {:>7.2} {:>7.2} {:>7.2}",
            name,
            100.0 * r.accuracy,
            100.0 * r.precision,
            100.0 * r.recall,
            r.f1,
            100.0 * r.fpr
        )
    };
    row("GAN-AD", &report.gan_ad);
    if let Some(s) = &report.spe {
        row("SPE", s);
    }
    for c in &report.cusum {
        row(&format!("CUSUM {}", c.variable), &c.report);
    }
    Ok(report)
}
