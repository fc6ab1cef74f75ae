//! Unbiased maximum mean discrepancy between two sample sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// RBF bandwidth choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    MedianHeuristic,
}

/// Kernel `exp(-‖a - b‖² / (2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { bandwidth: Bandwidth::MedianHeuristic }
    }
}

impl KernelConfig {
    pub fn fixed(sigma: f64) -> Self {
        KernelConfig { bandwidth: Bandwidth::Fixed(sigma) }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median pairwise Euclidean distance over `samples`, ignoring zero
/// distances; `1.0` when every distance is zero.
pub fn median_heuristic(samples: &[&[f64]]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 samples"));
    }
    let mut d = Vec::with_capacity(samples.len() * (samples.len() - 1) / 2);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let v = sq_dist(samples[i], samples[j]).sqrt();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return Ok(1.0);
    }
    Ok(crate::series::median(&mut d))
}

/// Flattens `L × n` sequences row-major into vectors.
pub fn flatten(seqs: &[Matrix]) -> Vec<&[f64]> {
    seqs.iter().map(Matrix::as_slice).collect()
}

/// Three-term unbiased estimate
/// `mean_{i≠j} K(g_i,g_j) - 2·mean_{i,j} K(g_i,r_j) + mean_{i≠j} K(r_i,r_j)`.
pub fn mmd_unbiased(generated: &[&[f64]], reference: &[&[f64]], kernel: &KernelConfig) -> Result<f64> {
    let sigma = match kernel.bandwidth {
        Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
        Bandwidth::Fixed(s) => return Err(Error::invalid(format!("bandwidth must be positive, got {s}"))),
        Bandwidth::MedianHeuristic => {
            let all: Vec<&[f64]> = generated.iter().chain(reference).copied().collect();
            median_heuristic(&all)?
        }
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    mmd_with_kernel(generated, reference, |a, b| (-gamma * sq_dist(a, b)).exp())
}

/// The same estimator with an arbitrary kernel function.
pub fn mmd_with_kernel(
    generated: &[&[f64]],
    reference: &[&[f64]],
    k: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<f64> {
    let n = generated.len();
    let m = reference.len();
    if n < 2 || m < 2 {
        return Err(Error::invalid(format!("MMD needs at least 2 samples per set, got {n} and {m}")));
    }
    let dim = generated[0].len();
    if generated.iter().chain(reference).any(|s| s.len() != dim) {
        return Err(Error::dims("MMD samples differ in length"));
    }

    let within = |set: &[&[f64]]| -> f64 {
        let mut s = 0.0;
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                s += k(set[i], set[j]);
            }
        }
        // symmetric kernel: off-diagonal sum is twice the upper triangle
        2.0 * s / (set.len() * (set.len() - 1)) as f64
    };
    let mut cross = 0.0;
    for g in generated {
        for r in reference {
            cross += k(g, r);
        }
    }
    Ok(within(generated) - 2.0 * cross / (n * m) as f64 + within(reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_heuristic_cases() {
        assert_eq!(median_heuristic(&[&[0.0], &[2.0]]).unwrap(), 2.0);
        assert_eq!(median_heuristic(&[&[1.0], &[1.0], &[1.0]]).unwrap(), 1.0);
        assert_eq!(median_heuristic(&[&[0.0], &[1.0], &[3.0]]).unwrap(), 2.0);
        assert!(median_heuristic(&[&[0.0]]).is_err());
    }

    #[test]
    fn constant_kernel_gives_zero() {
        let a: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![5.0]];
        let b: Vec<Vec<f64>> = vec![vec![2.0], vec![-3.0]];
        let ar: Vec<&[f64]> = a.iter().map(|v| v.as_slice()).collect();
        let br: Vec<&[f64]> = b.iter().map(|v| v.as_slice()).collect();
        let v = mmd_with_kernel(&ar, &br, |_, _| 0.7).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let one: Vec<&[f64]> = vec![&[0.0]];
        let two: Vec<&[f64]> = vec![&[0.0], &[1.0]];
        assert!(mmd_unbiased(&one, &two, &KernelConfig::default()).is_err());
        let mismatched: Vec<&[f64]> = vec![&[0.0, 1.0], &[1.0, 1.0]];
        assert!(mmd_unbiased(&two, &mismatched, &KernelConfig::default()).is_err());
        assert!(mmd_unbiased(&two, &two, &KernelConfig::fixed(0.0)).is_err());
    }
}
