use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theta::Theta;

/// Experimental cell counts `m_ab` (X = a assigned, Y = b observed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentalCounts {
    pub m11: u64,
    pub m10: u64,
    pub m01: u64,
    pub m00: u64,
}

impl ExperimentalCounts {
    pub fn treated(&self) -> u64 {
        self.m11 + self.m10
    }

    pub fn control(&self) -> u64 {
        self.m01 + self.m00
    }

    pub fn total(&self) -> u64 {
        self.treated() + self.control()
    }
}

/// Observational cell counts `n_ab` (X = a, Y = b).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationalCounts {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl ObservationalCounts {
    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }
}

/// Plug-in estimate of the standard six-component theta together with the
/// counts it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    theta: Theta,
    experimental: ExperimentalCounts,
    observational: ObservationalCounts,
}

impl ThetaEstimate {
    pub fn from_counts(experimental: ExperimentalCounts, observational: ObservationalCounts) -> Result<Self> {
        let m1 = experimental.treated();
        let m0 = experimental.control();
        let n = observational.total();
        if m1 == 0 {
            return Err(Error::InsufficientData("treated arm is empty".into()));
        }
        if m0 == 0 {
            return Err(Error::InsufficientData("control arm is empty".into()));
        }
        if n == 0 {
            return Err(Error::InsufficientData("observational sample is empty".into()));
        }
        let (m1, m0, nf) = (m1 as f64, m0 as f64, n as f64);
        let o = &observational;
        let theta = Theta::standard([
            experimental.m11 as f64 / m1,
            experimental.m01 as f64 / m0,
            o.n11 as f64 / nf,
            o.n10 as f64 / nf,
            o.n01 as f64 / nf,
            o.n00 as f64 / nf,
        ])?;
        Ok(Self {
            theta,
            experimental,
            observational,
        })
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn experimental(&self) -> &ExperimentalCounts {
        &self.experimental
    }

    pub fn observational(&self) -> &ObservationalCounts {
        &self.observational
    }

    /// Experimental sample size `m`.
    pub fn m(&self) -> u64 {
        self.experimental.total()
    }

    /// Observational sample size `n`.
    pub fn n(&self) -> u64 {
        self.observational.total()
    }
}
