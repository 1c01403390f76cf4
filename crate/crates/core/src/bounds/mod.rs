//! Sharp bounds as finite minima and maxima of affine functions over a common
//! denominator.
//!
//! Every endpoint handled here has the shape
//!
//! ```text
//! upper(θ) = min_j (a_j·θ + b_j) / h(θ)
//! lower(θ) = max_k (c_k·θ + d_k) / h(θ)
//! ```
//!
//! where `h` is either the constant one or a single component of `θ`. The
//! built-in forms cover PNS, PN and PS; any other quantity with bounds of this
//! shape can be loaded from a [`FormDocument`].

mod document;
mod form;

pub use document::{FormDocument, TermDocument};
pub use form::{
    ActiveSetReport, AffineBoundForm, AffineTerm, BoundPair, Denominator, GeneralizedGradient, PocQuantity,
};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default tolerance for declaring two affine terms tied.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

/// Component denominators at or below this value are rejected.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Upper,
    Lower,
}

impl Endpoint {
    pub const BOTH: [Endpoint; 2] = [Endpoint::Upper, Endpoint::Lower];

    pub fn as_str(self) -> &'static str {
        match self {
            Endpoint::Upper => "upper",
            Endpoint::Lower => "lower",
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
