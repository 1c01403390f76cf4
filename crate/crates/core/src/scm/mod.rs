//! A family of binary treatment/outcome structural models with 20 binary
//! covariates.
//!
//! ```text
//! Z_i = U_{Z_i}                     i = 1..20
//! M_X = Σ a_i Z_i,  M_Y = Σ b_i Z_i
//! X   = 1{M_X + U_X > 0.5}
//! Y   = 1{0 < C·X + M_Y + U_Y < 1  or  1 < C·X + M_Y + U_Y < 2}
//! ```
//!
//! All exogenous variables are independent Bernoulli, so population
//! quantities can be computed exactly by enumeration
//! ([`enumerate_population`]) and finite samples drawn with
//! [`draw_experimental`] and [`draw_observational`].

mod enumerate;
mod exact;
mod sample;

pub use enumerate::{enumerate_population, enumerate_population_full, PopulationRecord, PopulationSummary};
pub use exact::ExactSum;
pub use sample::{draw_experimental, draw_observational, estimate_theta, BatchKind, SampleBatch};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Number of binary covariates.
pub const COVARIATES: usize = 20;

const MODEL1: &str = include_str!("../../data/model1.toml");
const MODEL2: &str = include_str!("../../data/model2.toml");

/// Treatment assignment; strict inequality.
#[inline]
pub fn f_x(m_x: f64, u_x: bool) -> bool {
    m_x + f64::from(u_x as u8) > 0.5
}

/// Outcome; strict inequalities, so a sum of exactly 0, 1 or 2 gives `Y = 0`.
#[inline]
pub fn f_y(x: bool, m_y: f64, u_y: bool, c: f64) -> bool {
    let s = c * f64::from(x as u8) + m_y + f64::from(u_y as u8);
    (0.0 < s && s < 1.0) || (1.0 < s && s < 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpec {
    pub uz_probs: Vec<f64>,
    pub ux_prob: f64,
    pub uy_prob: f64,
    pub beta_x: Vec<f64>,
    pub beta_y: Vec<f64>,
    pub c: f64,
}

impl ScmSpec {
    pub fn model1() -> Self {
        Self::from_toml(MODEL1).expect("bundled model 1 is valid")
    }

    pub fn model2() -> Self {
        Self::from_toml(MODEL2).expect("bundled model 2 is valid")
    }

    /// Text of the bundled model file (`1` or `2`).
    pub fn bundled_source(model: u8) -> Option<&'static str> {
        match model {
            1 => Some(MODEL1),
            2 => Some(MODEL2),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScmSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("specs always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &'static str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::param(name, format!("{p} is not a probability")))
            }
        };
        for (name, v) in [
            ("uz_probs", &self.uz_probs),
            ("beta_x", &self.beta_x),
            ("beta_y", &self.beta_y),
        ] {
            if v.len() != COVARIATES {
                return Err(Error::param(
                    name,
                    format!("expected {COVARIATES} values, got {}", v.len()),
                ));
            }
        }
        for &p in &self.uz_probs {
            prob("uz_probs", p)?;
        }
        prob("ux_prob", self.ux_prob)?;
        prob("uy_prob", self.uy_prob)?;
        if !self.c.is_finite() || self.beta_x.iter().chain(&self.beta_y).any(|b| !b.is_finite()) {
            return Err(Error::param("c", "coefficients must be finite"));
        }
        Ok(())
    }

    /// `(M_X, M_Y)` for covariates packed as bits (bit `i` is `Z_{i+1}`).
    pub fn mediators(&self, z: u32) -> (f64, f64) {
        let mut mx = 0.0;
        let mut my = 0.0;
        for i in 0..COVARIATES {
            if z >> i & 1 == 1 {
                mx += self.beta_x[i];
                my += self.beta_y[i];
            }
        }
        (mx, my)
    }
}

/// A model with every Bernoulli parameter drawn from `U(0,1)` and every
/// coefficient (including `C`) from `U(-1,1)`.
pub fn random_spec(seed: u64) -> ScmSpec {
    let mut rng = stream_rng(derive_seed(seed, &[0x5c_u64]), 0);
    let uz_probs = (0..COVARIATES).map(|_| rng.random::<f64>()).collect();
    let ux_prob = rng.random::<f64>();
    let uy_prob = rng.random::<f64>();
    let mut coef = || rng.random_range(-1.0..1.0);
    let beta_x = (0..COVARIATES).map(|_| coef()).collect();
    let beta_y = (0..COVARIATES).map(|_| coef()).collect();
    let c = coef();
    ScmSpec {
        uz_probs,
        ux_prob,
        uy_prob,
        beta_x,
        beta_y,
        c,
    }
}
