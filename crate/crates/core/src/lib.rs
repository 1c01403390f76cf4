//! Sharp bounds on probabilities of causation from combined experimental and
//! observational data, with confidence intervals and sample-size planning.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod inference;
pub mod oracle;
pub mod rng;
pub mod sample_size;
pub mod scm;
pub mod theta;

pub use bounds::{AffineBoundForm, BoundPair, Endpoint, PocQuantity};
pub use error::{Error, Result};
pub use theta::{Theta, ThetaLayout};
