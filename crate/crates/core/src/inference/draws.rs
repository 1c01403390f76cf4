use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Eigenvalues below this are treated as a non-PSD input rather than noise.
pub const PSD_SLACK: f64 = 1e-10;

/// Centered Gaussian sampler built from a symmetric eigendecomposition.
///
/// Draw `b` under seed `s` is generated from ChaCha8 stream `b` of key `s`, so
/// the `b`-th draw is the same however many draws are requested and however
/// the work is split across threads.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    /// `V · diag(sqrt(λ⁺))`.
    factor: DMatrix<f64>,
    /// Columns of `factor` that are not identically zero.
    support: Vec<usize>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        if cov.ncols() != d {
            return Err(Error::param("cov", "covariance must be square"));
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < -PSD_SLACK) {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: bad });
        }
        // Round-off eigenvalues of a rank-deficient matrix are dropped so that
        // draws stay exactly inside its column space.
        let cutoff = max * (d.max(1) as f64) * f64::EPSILON * 16.0;
        let mut factor = eig.eigenvectors.clone();
        let mut support = Vec::new();
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            let s = if l > cutoff { l.sqrt() } else { 0.0 };
            if s > 0.0 {
                support.push(k);
            }
            factor.column_mut(k).scale_mut(s);
        }
        Ok(Self { factor, support })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// The `index`-th draw under `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> DVector<f64> {
        let d = self.dim();
        let mut rng = stream_rng(seed, index);
        let mut z = DVector::zeros(d);
        for k in 0..d {
            let xi: f64 = StandardNormal.sample(&mut rng);
            if self.support.contains(&k) {
                z.axpy(xi, &self.factor.column(k), 1.0);
            }
        }
        z
    }
}

/// `count` independent draws from `N(0, cov)`.
pub fn gaussian_draws(cov: &DMatrix<f64>, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let sampler = GaussianSampler::new(cov)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|b| sampler.draw(seed, b))
        .collect())
}
