//! Principal component analysis and squared prediction error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::{dot, Matrix};

/// Leading principal directions of normal data.
///
/// `loadings` is `n × m`: each row is a unit-norm direction in the original
/// variable space, so projecting a centered row `x` is `x · loadingsᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub loadings: Matrix,
    pub eigenvalues: Vec<f64>,
    pub total_variance: f64,
}

/// Fits the model from the sample covariance (denominator `N - 1`).
///
/// Each component is sign-normalized so that its largest-magnitude entry is
/// positive.
pub fn fit_pca(data: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (rows, m) = data.shape();
    if rows < 2 {
        return Err(Error::invalid(format!("PCA needs at least 2 rows, got {rows}")));
    }
    if n_components > m {
        return Err(Error::invalid(format!("{n_components} components requested from {m} variables")));
    }

    let mut mean = vec![0.0; m];
    for row in data.row_iter() {
        for (mu, v) in mean.iter_mut().zip(row) {
            *mu += v;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= rows as f64);

    let mut cov = Matrix::zeros(m, m);
    let mut centered = vec![0.0; m];
    for row in data.row_iter() {
        for j in 0..m {
            centered[j] = row[j] - mean[j];
        }
        for i in 0..m {
            let ci = centered[i];
            for j in i..m {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (rows - 1) as f64;
    for i in 0..m {
        for j in i..m {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total_variance: f64 = (0..m).map(|i| cov[(i, i)]).sum();

    let eig = symmetric_eigen(&cov);
    let mut loadings = Matrix::zeros(n_components, m);
    for k in 0..n_components {
        let v = eig.vectors.row(k);
        let pivot = v.iter().cloned().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, &src) in loadings.row_mut(k).iter_mut().zip(v) {
            *dst = sign * src;
        }
    }
    // round-off can leave tiny negative eigenvalues on rank-deficient data
    let eigenvalues = eig.values[..n_components].iter().map(|&l| l.max(0.0)).collect();
    Ok(PcaModel { mean, loadings, eigenvalues, total_variance })
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.loadings.rows()
    }

    pub fn n_variables(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_variables() {
            return Err(Error::dims(format!(
                "model has {} variables, data has {}",
                self.n_variables(),
                x.cols()
            )));
        }
        Ok(())
    }

    /// `(X - mean) · loadingsᵀ`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let n = self.n_components();
        let mut out = Matrix::zeros(x.rows(), n);
        let mut centered = vec![0.0; self.n_variables()];
        for i in 0..x.rows() {
            for (c, (v, mu)) in centered.iter_mut().zip(x.row(i).iter().zip(&self.mean)) {
                *c = v - mu;
            }
            for k in 0..n {
                out[(i, k)] = dot(&centered, self.loadings.row(k));
            }
        }
        Ok(out)
    }

    /// Maps PC scores back to the original space (adds the mean back).
    pub fn reconstruct(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.cols() != self.n_components() {
            return Err(Error::dims(format!(
                "{} scores for {} components",
                scores.cols(),
                self.n_components()
            )));
        }
        let mut out = scores.matmul(&self.loadings)?;
        for i in 0..out.rows() {
            for (v, mu) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *v += mu;
            }
        }
        Ok(out)
    }

    /// Fraction of total variance carried by each retained component.
    pub fn variance_ratios(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|l| l / self.total_variance).collect()
    }

    /// Squared distance of each centered row from the retained subspace.
    pub fn spe(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check(x)?;
        let m = self.n_variables();
        let mut centered = vec![0.0; m];
        let mut recon = vec![0.0; m];
        Ok((0..x.rows())
            .map(|i| {
                for (c, (v, mu)) in centered.iter_mut().zip(x.row(i).iter().zip(&self.mean)) {
                    *c = v - mu;
                }
                recon.iter_mut().for_each(|r| *r = 0.0);
                for k in 0..self.n_components() {
                    let p = self.loadings.row(k);
                    let score = dot(&centered, p);
                    for (r, pk) in recon.iter_mut().zip(p) {
                        *r += score * pk;
                    }
                }
                centered.iter().zip(&recon).map(|(c, r)| (c - r) * (c - r)).sum()
            })
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_variation() {
        let data = Matrix::from_rows(&[[0.0, 3.0], [1.0, 3.0], [2.0, 3.0], [5.0, 3.0]]).unwrap();
        let model = fit_pca(&data, 2).unwrap();
        assert!((model.loadings[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(model.loadings[(0, 1)].abs() < 1e-12);
        assert!((model.variance_ratios()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfectly_correlated_columns() {
        let data = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap();
        let model = fit_pca(&data, 2).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((model.loadings[(0, 0)] - r).abs() < 1e-12);
        assert!((model.loadings[(0, 1)] - r).abs() < 1e-12);
        assert!(model.eigenvalues[1].abs() < 1e-12);
        assert_eq!(fit_pca(&data, 1).unwrap().variance_ratios().len(), 1);
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let data = Matrix::from_rows(&[[1.0, 2.0, 0.0], [3.0, 0.0, 1.0], [2.0, 5.0, 4.0]]).unwrap();
        let model = fit_pca(&data, 2).unwrap();
        let means = Matrix::from_rows(&[model.mean.clone(), model.mean.clone()]).unwrap();
        let p = model.project(&means).unwrap();
        assert!(p.as_slice().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn ratios_from_eigenvalues() {
        let model = PcaModel {
            mean: vec![0.0, 0.0],
            loadings: Matrix::identity(2),
            eigenvalues: vec![3.0, 1.0],
            total_variance: 4.0,
        };
        assert_eq!(model.variance_ratios(), vec![0.75, 0.25]);
        let flat = PcaModel { eigenvalues: vec![0.0, 0.0], total_variance: 0.0, ..model };
        assert_eq!(flat.variance_ratios(), vec![0.0, 0.0]);
    }

    #[test]
    fn spe_vanishes_with_complete_basis_or_in_span() {
        let data =
            Matrix::from_rows(&[[1.0, 2.0, 0.0], [3.0, 0.0, 1.0], [2.0, 5.0, 4.0], [0.0, 1.0, 1.0]]).unwrap();
        let full = fit_pca(&data, 3).unwrap();
        assert!(full.spe(&data).unwrap().iter().all(|v| v.abs() < 1e-20));

        let one = fit_pca(&data, 1).unwrap();
        let in_span: Vec<f64> = one.mean.iter().zip(one.loadings.row(0)).map(|(m, p)| m + 2.5 * p).collect();
        let spe = one.spe(&Matrix::from_rows(&[in_span]).unwrap()).unwrap();
        assert!(spe[0] < 1e-20);
    }

    #[test]
    fn errors() {
        assert!(fit_pca(&Matrix::zeros(1, 2), 1).is_err());
        assert!(fit_pca(&Matrix::zeros(3, 2), 3).is_err());
        // zero-variance data is not an error
        let z = fit_pca(&Matrix::zeros(3, 2), 2).unwrap();
        assert_eq!(z.eigenvalues, vec![0.0, 0.0]);
        assert!(z.project(&Matrix::zeros(1, 3)).is_err());
        assert!(z.spe(&Matrix::zeros(1, 1)).is_err());
    }
}
