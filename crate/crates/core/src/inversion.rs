//! Mapping test windows back into the generator's latent space.
//!
//! The search minimizes `Er(Z) = 1 - similarity(X, G(Z))` by gradient descent
//! on `Z` with the generator frozen. Gradients flow through the generator by
//! BPTT. Steps follow Adam-scaled gradients, falling back to the plain
//! gradient when the scaled direction stops making progress. Each iteration
//! backtracks (halving) until the error decreases, so accepted steps never
//! increase `Er`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{sample_latent, Generator};
use crate::matrix::Matrix;

/// Columns with a centered norm below this are treated as constant.
const FLAT_NORM: f64 = 1e-12;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub restarts: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            max_iterations: 200,
            learning_rate: 0.4,
            restarts: 3,
            tolerance: 1e-3,
            max_halvings: 10,
            seed: 0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::invalid("inversion restarts must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("inversion learning_rate must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::invalid("inversion tolerance must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub latent: Matrix,
    pub error: f64,
    pub iterations: usize,
    pub reconstruction: Matrix,
    /// Index of the restart that produced this result.
    pub restart: usize,
    /// Error after each accepted step of the winning restart, starting with
    /// the initial error.
    pub trace: Vec<f64>,
}

fn check_shapes(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::dims(format!("shapes {:?} and {:?} differ", x.shape(), y.shape())));
    }
    Ok(())
}

/// Mean over columns of the Pearson correlation between `x` and `y`; a
/// constant column in either contributes 0.
pub fn similarity(x: &Matrix, y: &Matrix) -> Result<f64> {
    check_shapes(x, y)?;
    if x.rows() < 2 {
        return Err(Error::invalid("similarity needs at least 2 timesteps"));
    }
    Ok(similarity_and_grad(x, y, false).0)
}

/// Similarity and, when requested, its gradient with respect to `y`.
fn similarity_and_grad(x: &Matrix, y: &Matrix, want_grad: bool) -> (f64, Matrix) {
    let (rows, cols) = x.shape();
    let mut grad = Matrix::zeros(if want_grad { rows } else { 0 }, cols);
    let mut total = 0.0;
    let mut a = vec![0.0; rows];
    let mut b = vec![0.0; rows];
    for j in 0..cols {
        let (mut mx, mut my) = (0.0, 0.0);
        for t in 0..rows {
            mx += x[(t, j)];
            my += y[(t, j)];
        }
        mx /= rows as f64;
        my /= rows as f64;
        for t in 0..rows {
            a[t] = x[(t, j)] - mx;
            b[t] = y[(t, j)] - my;
        }
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na < FLAT_NORM || nb < FLAT_NORM {
            continue;
        }
        let r = (a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
        total += r;
        if want_grad {
            // ∂r/∂y_t = a_t/(‖a‖‖b‖) - r·b_t/‖b‖²; both vectors are centered,
            // so the mean-removal Jacobian leaves them unchanged.
            for t in 0..rows {
                grad[(t, j)] = (a[t] / (na * nb) - r * b[t] / (nb * nb)) / cols as f64;
            }
        }
    }
    (total / cols as f64, grad)
}

/// `Er = 1 - similarity`, in `[0, 2]`.
pub fn inversion_error(x: &Matrix, y: &Matrix) -> Result<f64> {
    Ok(1.0 - similarity(x, y)?)
}

/// Per-timestep `Σ_i |x_{t,i} - recon_{t,i}|`.
pub fn residual(x: &Matrix, reconstruction: &Matrix) -> Result<Vec<f64>> {
    check_shapes(x, reconstruction)?;
    Ok(x.row_iter()
        .zip(reconstruction.row_iter())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum())
        .collect())
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

/// Best-of-restarts latent search for one window.
pub fn invert(gen: &Generator, x: &Matrix, config: &InversionConfig) -> Result<InversionResult> {
    config.validate()?;
    if x.cols() != gen.n_features() {
        return Err(Error::dims(format!(
            "window has {} features, generator emits {}",
            x.cols(),
            gen.n_features()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::invalid("inversion needs windows of at least 2 timesteps"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("inversion target".into()));
    }

    let mut best: Option<InversionResult> = None;
    for restart in 0..config.restarts {
        let mut rng = restart_rng(config.seed, restart);
        let z0 = sample_latent(1, x.rows(), gen.latent_dim(), &mut rng).remove(0);
        match descend(gen, x, z0, config) {
            Ok(mut r) => {
                r.restart = restart;
                if best.as_ref().is_none_or(|b| r.error < b.error) {
                    best = Some(r);
                }
                if best.as_ref().is_some_and(|b| b.error <= config.tolerance) {
                    break;
                }
            }
            Err(Error::NonFinite(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::Diverged("every inversion restart diverged".into()))
}

fn descend(gen: &Generator, x: &Matrix, mut z: Matrix, cfg: &InversionConfig) -> Result<InversionResult> {
    let eval = |z: &Matrix| -> Result<(f64, Matrix)> {
        let y = gen.generate_one(z)?;
        let e = 1.0 - similarity_and_grad(x, &y, false).0;
        Ok((e, y))
    };
    let (mut err, mut recon) = eval(&z)?;
    if !err.is_finite() {
        return Err(Error::NonFinite("initial inversion error".into()));
    }
    let mut trace = vec![err];
    let mut step = cfg.learning_rate;
    let mut iterations = 0;
    let (mut m1, mut m2) = (vec![0.0; z.as_slice().len()], vec![0.0; z.as_slice().len()]);
    let mut t = 0;

    while iterations < cfg.max_iterations && err > cfg.tolerance {
        iterations += 1;
        let (y, cache) = gen.net.forward(&z)?;
        let (_, dsim) = similarity_and_grad(x, &y, true);
        // ∂Er/∂y = -∂sim/∂y
        let dy = dsim.map(|v| -v);
        let (_, dz) = gen.net.backward(&cache, &dy)?;
        if !dz.is_finite() {
            return Err(Error::NonFinite("latent gradient".into()));
        }
        if dz.as_slice().iter().all(|&v| v == 0.0) {
            break;
        }

        // per-coordinate scaling from running gradient moments
        t += 1;
        for ((m, v), &g) in m1.iter_mut().zip(m2.iter_mut()).zip(dz.as_slice()) {
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        }
        let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
        let dir: Vec<f64> = m1.iter().zip(&m2).map(|(m, v)| (m / c1) / ((v / c2).sqrt() + 1e-8)).collect();

        // when the scaled direction fails, retry along the plain gradient
        let gmax = dz.as_slice().iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let plain: Vec<f64> = dz.as_slice().iter().map(|g| g / gmax).collect();
        let mut accepted = false;
        for d in [&dir, &plain] {
            let mut trial = step;
            for _ in 0..=cfg.max_halvings {
                let mut cand = z.clone();
                for (c, d) in cand.as_mut_slice().iter_mut().zip(d) {
                    *c -= trial * d;
                }
                let (e, y_new) = eval(&cand)?;
                if e.is_finite() && e < err {
                    z = cand;
                    err = e;
                    recon = y_new;
                    trace.push(err);
                    accepted = true;
                    break;
                }
                trial *= 0.5;
            }
            if accepted {
                step = trial;
                break;
            }
            m1.fill(0.0);
            m2.fill(0.0);
            t = 0;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(cfg.learning_rate);
    }
    Ok(InversionResult { latent: z, error: err, iterations, reconstruction: recon, restart: 0, trace })
}

/// Inverts each window independently; window `k` uses seed `config.seed + k`.
pub fn invert_all(gen: &Generator, windows: &[Matrix], config: &InversionConfig) -> Result<Vec<InversionResult>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let cfg = InversionConfig { seed: config.seed.wrapping_add(k as u64), ..config.clone() };
            invert(gen, w, &cfg)
        })
        .collect()
}

/// `window,restart,iterations,error` rows.
pub fn diagnostics_csv(results: &[InversionResult]) -> String {
    let mut s = String::from("window,restart,iterations,error\n");
    for (k, r) in results.iter().enumerate() {
        s.push_str(&format!("{k},{},{},{}\n", r.restart, r.iterations, r.error));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::NetworkSize;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn similarity_cases() {
        let x = Matrix::from_rows(&[[1.0, 0.3], [2.0, -0.1], [4.0, 0.8]]).unwrap();
        assert!((similarity(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((similarity(&x, &x.map(|v| -v)).unwrap() + 1.0).abs() < 1e-15);
        assert!((similarity(&col(&[1.0, 2.0, 3.0]), &col(&[2.0, 4.0, 6.0])).unwrap() - 1.0).abs() < 1e-15);
        // constant column contributes 0
        assert_eq!(similarity(&col(&[1.0, 1.0, 1.0]), &col(&[1.0, 2.0, 3.0])).unwrap(), 0.0);
        assert!(similarity(&col(&[1.0]), &col(&[1.0])).is_err());
        assert!(similarity(&x, &col(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn similarity_gradient_matches_finite_differences() {
        let x = Matrix::from_rows(&[[0.1, 1.0], [0.7, -0.4], [-0.3, 0.2], [0.9, 0.5]]).unwrap();
        let y = Matrix::from_rows(&[[0.3, 0.1], [-0.2, 0.6], [0.4, -0.8], [0.0, 0.25]]).unwrap();
        let (_, g) = similarity_and_grad(&x, &y, true);
        let h = 1e-6;
        for i in 0..y.as_slice().len() {
            let mut p = y.clone();
            p.as_mut_slice()[i] += h;
            let mut m = y.clone();
            m.as_mut_slice()[i] -= h;
            let num = (similarity(&x, &p).unwrap() - similarity(&x, &m).unwrap()) / (2.0 * h);
            assert!((num - g.as_slice()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_cases() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        assert_eq!(residual(&x, &x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(residual(&col(&[1.0, 2.0]), &col(&[0.0, 0.0])).unwrap(), vec![1.0, 2.0]);
        let r = Matrix::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(residual(&x, &r).unwrap(), vec![1.0, 2.0]);
        assert!(residual(&x, &col(&[0.0, 0.0])).is_err());
    }

    fn toy_generator(seed: u64) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Generator::new(3, 2, NetworkSize { hidden_size: 8, depth: 1 }, &mut rng).unwrap();
        // wider weights than the init range so outputs vary with Z
        for a in g.net.param_arrays_mut() {
            for v in a.iter_mut() {
                *v *= 10.0;
            }
        }
        g
    }

    #[test]
    fn zero_budget_returns_initial_sample() {
        let g = toy_generator(1);
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.0], [0.5, -0.2], [0.2, 0.1]]).unwrap();
        let cfg = InversionConfig { max_iterations: 0, restarts: 1, ..InversionConfig::default() };
        let r = invert(&g, &x, &cfg).unwrap();
        let z0 = sample_latent(1, 4, 3, &mut restart_rng(cfg.seed, 0)).remove(0);
        assert_eq!(r.latent, z0);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.reconstruction, g.generate_one(&z0).unwrap());
        assert_eq!(r.error, inversion_error(&x, &r.reconstruction).unwrap());
    }

    #[test]
    fn recovers_planted_latent() {
        let g = toy_generator(2);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let z_star = sample_latent(1, 8, 3, &mut rng).remove(0);
        let x = g.generate_one(&z_star).unwrap();
        let r = invert(&g, &x, &InversionConfig::default()).unwrap();
        assert!(r.error < 0.05, "error {}", r.error);
        assert!(r.iterations <= 200);
        assert_eq!(r.reconstruction, g.generate_one(&r.latent).unwrap());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = toy_generator(3);
        let x = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.0], [0.5, -0.2], [0.2, 0.1]]).unwrap();
        let cfg = InversionConfig { max_iterations: 20, ..InversionConfig::default() };
        assert_eq!(invert(&g, &x, &cfg).unwrap(), invert(&g, &x, &cfg).unwrap());
        assert!(invert(&g, &col(&[1.0, 2.0]), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn accepted_steps_never_increase_error(seed in 0u64..1000) {
            let g = toy_generator(seed % 7);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = sample_latent(1, 6, 2, &mut rng).remove(0);
            let cfg = InversionConfig { max_iterations: 30, restarts: 2, seed, ..InversionConfig::default() };
            let r = invert(&g, &target, &cfg).unwrap();
            prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!((0.0..=2.0).contains(&r.error));
            prop_assert!(residual(&target, &r.reconstruction).unwrap().iter().all(|v| *v >= 0.0));
        }
    }
}
