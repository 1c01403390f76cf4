use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::enumerate::MediatorTables;
use super::{f_x, f_y, ScmSpec, COVARIATES};
use crate::error::{Error, Result};
use crate::inference::{ExperimentalCounts, ObservationalCounts, ThetaEstimate};
use crate::rng::{bernoulli, derive_seed, stream_rng};

/// Draws per RNG stream.
const CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchKind {
    Experimental,
    Observational,
}

impl BatchKind {
    fn tag(self) -> u64 {
        match self {
            BatchKind::Experimental => 1,
            BatchKind::Observational => 2,
        }
    }
}

/// Cell counts of a sample, indexed `(X, Y)` as `[11, 10, 01, 00]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub kind: BatchKind,
    pub counts: [u64; 4],
    pub seed: u64,
    pub size: u64,
}

impl SampleBatch {
    pub fn experimental_counts(&self) -> Result<ExperimentalCounts> {
        if self.kind != BatchKind::Experimental {
            return Err(Error::param("exp", "batch is not experimental"));
        }
        let [m11, m10, m01, m00] = self.counts;
        Ok(ExperimentalCounts { m11, m10, m01, m00 })
    }

    pub fn observational_counts(&self) -> Result<ObservationalCounts> {
        if self.kind != BatchKind::Observational {
            return Err(Error::param("obs", "batch is not observational"));
        }
        let [n11, n10, n01, n00] = self.counts;
        Ok(ObservationalCounts { n11, n10, n01, n00 })
    }
}

fn cell(x: bool, y: bool) -> usize {
    match (x, y) {
        (true, true) => 0,
        (true, false) => 1,
        (false, true) => 2,
        (false, false) => 3,
    }
}

fn draw(spec: &ScmSpec, size: u64, seed: u64, kind: BatchKind) -> Result<SampleBatch> {
    if size == 0 {
        return Err(Error::param("size", "sample size must be at least 1"));
    }
    let tables = MediatorTables::new(spec);
    let base = derive_seed(seed, &[kind.tag()]);
    let chunks = size.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(base, k);
            let len = CHUNK.min(size - k * CHUNK);
            let mut counts = [0u64; 4];
            for _ in 0..len {
                let mut z = 0u32;
                for i in 0..COVARIATES {
                    if bernoulli(&mut rng, spec.uz_probs[i]) {
                        z |= 1 << i;
                    }
                }
                let uy = bernoulli(&mut rng, spec.uy_prob);
                let (mx, my) = tables.mediators(z);
                let x = match kind {
                    BatchKind::Experimental => bernoulli(&mut rng, 0.5),
                    BatchKind::Observational => f_x(mx, bernoulli(&mut rng, spec.ux_prob)),
                };
                counts[cell(x, f_y(x, my, uy, spec.c))] += 1;
            }
            counts
        })
        .reduce(
            || [0u64; 4],
            |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]],
        );
    Ok(SampleBatch {
        kind,
        counts,
        seed,
        size,
    })
}

/// `m` units with a fair-coin treatment independent of the exogenous
/// variables.
pub fn draw_experimental(spec: &ScmSpec, m: u64, seed: u64) -> Result<SampleBatch> {
    draw(spec, m, seed, BatchKind::Experimental)
}

/// `n` units with the treatment set by the model.
pub fn draw_observational(spec: &ScmSpec, n: u64, seed: u64) -> Result<SampleBatch> {
    draw(spec, n, seed, BatchKind::Observational)
}

pub fn estimate_theta(exp: &SampleBatch, obs: &SampleBatch) -> Result<ThetaEstimate> {
    ThetaEstimate::from_counts(exp.experimental_counts()?, obs.observational_counts()?)
}
