//! Central finite-difference verification of BPTT gradients.

use crate::error::{Error, Result};
use crate::lstm::StackedLstm;
use crate::matrix::Matrix;

/// A scalar loss over network outputs, returning the loss and `∂loss/∂outputs`.
pub trait OutputLoss {
    fn eval(&self, outputs: &Matrix) -> (f64, Matrix);
}

impl<F: Fn(&Matrix) -> (f64, Matrix)> OutputLoss for F {
    fn eval(&self, outputs: &Matrix) -> (f64, Matrix) {
        self(outputs)
    }
}

/// Smallest denominator used by [`grad_check`]: `|a - n| / max(|a|, |n|, 1e-8)`.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Summary of one finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Worst `|a - n| / max(|a|, |n|, floor)`.
    pub max_relative: f64,
    /// Worst `|a - n|`.
    pub max_absolute: f64,
    pub checked: usize,
    /// Entries whose magnitude was below the floor.
    pub below_floor: usize,
}

impl GradCheck {
    fn new() -> Self {
        GradCheck { max_relative: 0.0, max_absolute: 0.0, checked: 0, below_floor: 0 }
    }

    fn record(&mut self, analytic: f64, numeric: f64, floor: f64) {
        let scale = analytic.abs().max(numeric.abs());
        self.max_relative = self.max_relative.max((analytic - numeric).abs() / scale.max(floor));
        self.max_absolute = self.max_absolute.max((analytic - numeric).abs());
        self.checked += 1;
        if scale < floor {
            self.below_floor += 1;
        }
    }

    pub fn merge(self, other: GradCheck) -> GradCheck {
        GradCheck {
            max_relative: self.max_relative.max(other.max_relative),
            max_absolute: self.max_absolute.max(other.max_absolute),
            checked: self.checked + other.checked,
            below_floor: self.below_floor + other.below_floor,
        }
    }
}

fn check_step(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {eps}")));
    }
    Ok(())
}

/// Worst relative disagreement between BPTT and central differences over
/// every parameter.
pub fn grad_check(net: &StackedLstm, input: &Matrix, loss: &dyn OutputLoss, eps: f64) -> Result<f64> {
    let all: Vec<usize> = (0..net.param_arrays().len()).collect();
    grad_check_arrays(net, input, loss, eps, &all)
}

/// Like [`grad_check`] but only over the listed parameter arrays (indices in
/// [`StackedLstm::param_arrays`] order).
pub fn grad_check_arrays(
    net: &StackedLstm,
    input: &Matrix,
    loss: &dyn OutputLoss,
    eps: f64,
    arrays: &[usize],
) -> Result<f64> {
    Ok(check_params(net, input, loss, eps, arrays, DEFAULT_FLOOR)?.max_relative)
}

/// Parameter check with an explicit denominator floor. Central differences
/// carry roundoff of roughly `ε_mach·|loss| / eps`, so gradients near that
/// size cannot be compared in relative terms; a floor well above it keeps
/// the relative figure meaningful while `max_absolute` covers the rest.
pub fn check_params(
    net: &StackedLstm,
    input: &Matrix,
    loss: &dyn OutputLoss,
    eps: f64,
    arrays: &[usize],
    floor: f64,
) -> Result<GradCheck> {
    check_step(eps)?;
    let (out, cache) = net.forward(input)?;
    let (_, dout) = loss.eval(&out);
    let (grads, _) = net.backward(&cache, &dout)?;
    let analytic = grads.arrays();

    let mut probe = net.clone();
    let mut report = GradCheck::new();
    for &a in arrays {
        let len = analytic
            .get(a)
            .ok_or_else(|| Error::invalid(format!("no parameter array {a}")))?
            .len();
        for i in 0..len {
            let orig = probe.param_arrays()[a][i];
            probe.param_arrays_mut()[a][i] = orig + eps;
            let plus = loss.eval(&probe.predict(input)?).0;
            probe.param_arrays_mut()[a][i] = orig - eps;
            let minus = loss.eval(&probe.predict(input)?).0;
            probe.param_arrays_mut()[a][i] = orig;
            report.record(analytic[a][i], (plus - minus) / (2.0 * eps), floor);
        }
    }
    Ok(report)
}

/// Worst relative disagreement for the input gradient `∂loss/∂input`.
pub fn grad_check_input(net: &StackedLstm, input: &Matrix, loss: &dyn OutputLoss, eps: f64) -> Result<f64> {
    Ok(check_input(net, input, loss, eps, DEFAULT_FLOOR)?.max_relative)
}

pub fn check_input(net: &StackedLstm, input: &Matrix, loss: &dyn OutputLoss, eps: f64, floor: f64) -> Result<GradCheck> {
    check_step(eps)?;
    let (out, cache) = net.forward(input)?;
    let (_, dout) = loss.eval(&out);
    let (_, dx) = net.backward(&cache, &dout)?;
    let mut x = input.clone();
    let mut report = GradCheck::new();
    for i in 0..x.as_slice().len() {
        let orig = x.as_slice()[i];
        x.as_mut_slice()[i] = orig + eps;
        let plus = loss.eval(&net.predict(&x)?).0;
        x.as_mut_slice()[i] = orig - eps;
        let minus = loss.eval(&net.predict(&x)?).0;
        x.as_mut_slice()[i] = orig;
        report.record(dx.as_slice()[i], (plus - minus) / (2.0 * eps), floor);
    }
    Ok(report)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DEFAULT_FLOOR)
}

/// `Σ w ⊙ outputs`, a linear loss with fixed weights.
pub fn weighted_sum_loss(weights: Matrix) -> impl Fn(&Matrix) -> (f64, Matrix) {
    move |out: &Matrix| {
        let l = out.as_slice().iter().zip(weights.as_slice()).map(|(o, w)| o * w).sum();
        (l, weights.clone())
    }
}

/// `½ Σ (outputs - target)²`.
pub fn squared_error_loss(target: Matrix) -> impl Fn(&Matrix) -> (f64, Matrix) {
    move |out: &Matrix| {
        let mut grad = out.clone();
        let mut l = 0.0;
        for (g, t) in grad.as_mut_slice().iter_mut().zip(target.as_slice()) {
            *g -= t;
            l += 0.5 * *g * *g;
        }
        (l, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{Activation, LstmShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn projection_only_linear_case_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shape = LstmShape {
            input_size: 2,
            hidden_size: 3,
            depth: 1,
            output_size: 2,
            output_activation: Activation::Identity,
        };
        let net = StackedLstm::random(shape, &mut rng).unwrap();
        let x = random_matrix(&mut rng, 4, 2);
        let loss = weighted_sum_loss(random_matrix(&mut rng, 4, 2));
        // output weights and output bias are the last two arrays
        let err = grad_check_arrays(&net, &x, &loss, 1e-5, &[3, 4]).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn seeded_small_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let shape = LstmShape {
            input_size: 2,
            hidden_size: 4,
            depth: 1,
            output_size: 1,
            output_activation: Activation::Tanh,
        };
        let mut net = StackedLstm::random(shape, &mut rng).unwrap();
        // larger weights than the init range exercise the nonlinearities
        for a in net.param_arrays_mut() {
            a.iter_mut().for_each(|v| *v = rng.random_range(-0.8..0.8));
        }
        let x = random_matrix(&mut rng, 3, 2);
        let loss = squared_error_loss(random_matrix(&mut rng, 3, 1));
        let err = grad_check(&net, &x, &loss, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
        let err_in = grad_check_input(&net, &x, &loss, 1e-5).unwrap();
        assert!(err_in < 1e-4, "{err_in}");
    }

    #[test]
    fn floor_bounds_relative_error_of_tiny_gradients() {
        let mut r = GradCheck::new();
        r.record(2e-9, 2e-9 + 4e-12, 1e-6);
        r.record(1.0, 1.0 + 1e-13, 1e-6);
        assert!(r.max_relative < 1e-5);
        assert!((r.max_absolute - 4e-12).abs() < 1e-14);
        assert_eq!((r.checked, r.below_floor), (2, 1));
    }

    #[test]
    fn zero_step_rejected() {
        let shape = LstmShape {
            input_size: 1,
            hidden_size: 1,
            depth: 1,
            output_size: 1,
            output_activation: Activation::Tanh,
        };
        let net = StackedLstm::zeros(shape).unwrap();
        let loss = weighted_sum_loss(Matrix::filled(2, 1, 1.0));
        assert!(grad_check(&net, &Matrix::zeros(2, 1), &loss, 0.0).is_err());
    }
}
