//! Probability vectors addressed by symbol name.
//!
//! A [`ThetaLayout`] is an ordered list of probability symbols split into an
//! experimental block (interventional probabilities such as `P(y_x)`) and an
//! observational block (joint probabilities such as `P(x,y)`). A [`Theta`]
//! pairs a layout with concrete values.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbol names used by the built-in layout.
pub mod symbols {
    /// `P(y_x)`: outcome under treatment.
    pub const Y_X: &str = "y_x";
    /// `P(y_{x'})`: outcome under control.
    pub const Y_XP: &str = "y_xp";
    /// `P(x,y)`.
    pub const X_Y: &str = "x_y";
    /// `P(x,y')`.
    pub const X_YP: &str = "x_yp";
    /// `P(x',y)`.
    pub const XP_Y: &str = "xp_y";
    /// `P(x',y')`.
    pub const XP_YP: &str = "xp_yp";

    /// The four observational joint cells in canonical order.
    pub const JOINT: [&str; 4] = [X_Y, X_YP, XP_Y, XP_YP];
    /// The full built-in layout in canonical order.
    pub const STANDARD: [&str; 6] = [Y_X, Y_XP, X_Y, X_YP, XP_Y, XP_YP];
}

/// Tolerance on the sum of a complete observational joint.
pub const JOINT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Experimental,
    Observational,
}

impl Block {
    /// Interventional symbols are written `<outcome>_<treatment>` with the
    /// outcome being `y` or `yp` (e.g. `y_x`, `yp_xp`); everything else is
    /// observational.
    pub fn classify(symbol: &str) -> Block {
        if symbol.starts_with("y_") || symbol.starts_with("yp_") {
            Block::Experimental
        } else {
            Block::Observational
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThetaLayout {
    symbols: Vec<String>,
    blocks: Vec<Block>,
    joint: Option<[usize; 4]>,
}

impl ThetaLayout {
    /// Builds a layout from ordered symbol names, classifying each symbol
    /// with [`Block::classify`].
    pub fn new<S: AsRef<str>>(symbols: &[S]) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Layout("layout has no symbols".into()));
        }
        let symbols: Vec<String> = symbols.iter().map(|s| s.as_ref().to_owned()).collect();
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Layout(format!("symbol {i} is empty")));
            }
            if symbols[..i].contains(s) {
                return Err(Error::Layout(format!("duplicate symbol `{s}`")));
            }
        }
        let blocks = symbols.iter().map(|s| Block::classify(s)).collect();
        let joint = {
            let pos: Vec<Option<usize>> = symbols::JOINT
                .iter()
                .map(|j| symbols.iter().position(|s| s == j))
                .collect();
            match pos.as_slice() {
                [Some(a), Some(b), Some(c), Some(d)] => Some([*a, *b, *c, *d]),
                _ => None,
            }
        };
        Ok(Self { symbols, blocks, joint })
    }

    /// The shared six-symbol layout `(y_x, y_xp, x_y, x_yp, xp_y, xp_yp)`.
    pub fn standard() -> Arc<ThetaLayout> {
        static STANDARD: OnceLock<Arc<ThetaLayout>> = OnceLock::new();
        STANDARD
            .get_or_init(|| Arc::new(ThetaLayout::new(&symbols::STANDARD).expect("valid layout")))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn block(&self, index: usize) -> Block {
        self.blocks[index]
    }

    pub fn position(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Like [`position`](Self::position) but reports a layout error.
    pub fn require(&self, symbol: &str) -> Result<usize> {
        self.position(symbol)
            .ok_or_else(|| Error::Layout(format!("layout lacks symbol `{symbol}`")))
    }

    /// Indices of the given block, in layout order.
    pub fn block_indices(&self, block: Block) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.blocks[i] == block).collect()
    }

    /// Positions of `x_y, x_yp, xp_y, xp_yp` when the layout holds the whole
    /// observational joint.
    pub fn complete_joint(&self) -> Option<[usize; 4]> {
        self.joint
    }

    pub fn is_standard(&self) -> bool {
        self.symbols.iter().map(String::as_str).eq(symbols::STANDARD)
    }
}

impl fmt::Display for ThetaLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.symbols.join(", "))
    }
}

/// A probability vector over a [`ThetaLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    layout: Arc<ThetaLayout>,
    values: Vec<f64>,
}

impl Theta {
    pub fn new(layout: Arc<ThetaLayout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::InvalidTheta(format!(
                "expected {} values for layout {layout}, got {}",
                layout.dim(),
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidTheta(format!(
                    "P({}) = {v} is outside [0, 1]",
                    layout.symbol(i)
                )));
            }
        }
        if let Some(joint) = layout.complete_joint() {
            let sum: f64 = joint.iter().map(|&i| values[i]).sum();
            if (sum - 1.0).abs() > JOINT_SUM_TOLERANCE {
                return Err(Error::InvalidTheta(format!("observational joint sums to {sum}, not 1")));
            }
        }
        Ok(Self { layout, values })
    }

    /// Builds a vector over the standard layout from
    /// `[y_x, y_xp, x_y, x_yp, xp_y, xp_yp]`.
    pub fn standard(values: [f64; 6]) -> Result<Self> {
        Self::new(ThetaLayout::standard(), values.to_vec())
    }

    pub fn layout(&self) -> &Arc<ThetaLayout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, symbol: &str) -> Option<f64> {
        self.layout.position(symbol).map(|i| self.values[i])
    }

    fn require(&self, symbol: &str) -> Result<f64> {
        Ok(self.values[self.layout.require(symbol)?])
    }

    /// `P(y) = P(x,y) + P(x',y)`.
    pub fn p_y(&self) -> Result<f64> {
        Ok(self.require(symbols::X_Y)? + self.require(symbols::XP_Y)?)
    }

    /// `P(x) = P(x,y) + P(x,y')`.
    pub fn p_x(&self) -> Result<f64> {
        Ok(self.require(symbols::X_Y)? + self.require(symbols::X_YP)?)
    }

    /// Largest violation of the consistency constraints
    /// `P(x,y) <= P(y_x) <= 1 - P(x,y')` and
    /// `P(x',y) <= P(y_x') <= 1 - P(x',y')`; zero or negative when consistent.
    pub fn consistency_violation(&self) -> Result<f64> {
        let y_x = self.require(symbols::Y_X)?;
        let y_xp = self.require(symbols::Y_XP)?;
        let x_y = self.require(symbols::X_Y)?;
        let x_yp = self.require(symbols::X_YP)?;
        let xp_y = self.require(symbols::XP_Y)?;
        let xp_yp = self.require(symbols::XP_YP)?;
        Ok([x_y - y_x, y_x - (1.0 - x_yp), xp_y - y_xp, y_xp - (1.0 - xp_yp)]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_layout_partitions_blocks() {
        let layout = ThetaLayout::standard();
        assert!(layout.is_standard());
        assert_eq!(layout.block_indices(Block::Experimental), vec![0, 1]);
        assert_eq!(layout.block_indices(Block::Observational), vec![2, 3, 4, 5]);
        assert_eq!(layout.complete_joint(), Some([2, 3, 4, 5]));
    }

    #[test]
    fn rejects_out_of_range_and_bad_joint() {
        assert!(Theta::standard([1.2, 0.3, 0.25, 0.25, 0.25, 0.25]).is_err());
        assert!(Theta::standard([0.5, 0.3, 0.25, 0.25, 0.25, 0.3]).is_err());
        assert!(Theta::standard([0.5, 0.3, 0.25, 0.25, 0.25, 0.25]).is_ok());
    }

    #[test]
    fn duplicate_symbols_rejected() {
        assert!(ThetaLayout::new(&["y_x", "y_x"]).is_err());
        assert!(ThetaLayout::new::<&str>(&[]).is_err());
    }

    #[test]
    fn derived_marginals() {
        let t = Theta::standard([0.55, 0.35, 0.30, 0.20, 0.10, 0.40]).unwrap();
        assert!((t.p_y().unwrap() - 0.40).abs() < 1e-15);
        assert!((t.p_x().unwrap() - 0.50).abs() < 1e-15);
        assert!(t.consistency_violation().unwrap() <= 0.0);
    }

    #[test]
    fn custom_layout_without_joint() {
        let layout = Arc::new(ThetaLayout::new(&["y_x", "x_y", "benefit"]).unwrap());
        assert_eq!(layout.complete_joint(), None);
        assert_eq!(layout.block(2), Block::Observational);
        let t = Theta::new(layout, vec![0.2, 0.9, 0.9]).unwrap();
        assert!(t.p_y().is_err());
    }
}
