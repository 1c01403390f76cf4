use nalgebra::DMatrix;

use super::ThetaEstimate;
use crate::error::{Error, Result};
use crate::theta::{Block, ThetaLayout};

/// Estimated finite-sample covariance of the standard theta estimator.
///
/// The experimental components are independent binomial proportions
/// conditioned on the realized arm sizes; the observational components are
/// multinomial proportions; the two blocks are independent. The matrix is on
/// the finite-sample scale: the normalized covariance used for Gaussian
/// perturbations is [`omega`](Self::omega) `= n · cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub cov: DMatrix<f64>,
    pub experimental: Vec<usize>,
    pub observational: Vec<usize>,
    /// Experimental sample size `m`.
    pub m: u64,
    /// Observational sample size `n`.
    pub n: u64,
}

impl CovarianceEstimate {
    pub fn omega(&self) -> DMatrix<f64> {
        &self.cov * self.n as f64
    }

    /// `r = m / n`.
    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// `gᵀ · cov · g`.
    pub fn quadratic_form(&self, g: &[f64]) -> f64 {
        quadratic_form(&self.cov, g)
    }
}

pub(crate) fn quadratic_form(cov: &DMatrix<f64>, g: &[f64]) -> f64 {
    let d = g.len();
    let mut acc = 0.0;
    for i in 0..d {
        if g[i] == 0.0 {
            continue;
        }
        for j in 0..d {
            acc += g[i] * cov[(i, j)] * g[j];
        }
    }
    acc
}

/// Covariance of the standard theta estimator at probabilities `values` for
/// the given (possibly fractional) treated, control and observational sizes.
pub fn structural_covariance(values: &[f64], treated: f64, control: f64, n: f64) -> DMatrix<f64> {
    let mut cov = DMatrix::zeros(6, 6);
    cov[(0, 0)] = values[0] * (1.0 - values[0]) / treated;
    cov[(1, 1)] = values[1] * (1.0 - values[1]) / control;
    for i in 0..4 {
        for j in 0..4 {
            let pi = values[2 + i];
            let pj = values[2 + j];
            let diag = if i == j { pi } else { 0.0 };
            cov[(2 + i, 2 + j)] = (diag - pi * pj) / n;
        }
    }
    cov
}

pub fn estimate_covariance(est: &ThetaEstimate) -> Result<CovarianceEstimate> {
    let exp = est.experimental();
    let (m1, m0, n) = (exp.treated(), exp.control(), est.n());
    if m1 == 0 || m0 == 0 || n == 0 {
        return Err(Error::InsufficientData(
            "an arm or the observational sample is empty".into(),
        ));
    }
    let layout = ThetaLayout::standard();
    Ok(CovarianceEstimate {
        cov: structural_covariance(est.theta().values(), m1 as f64, m0 as f64, n as f64),
        experimental: layout.block_indices(Block::Experimental),
        observational: layout.block_indices(Block::Observational),
        m: est.m(),
        n,
    })
}
