use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{random_spec, ScmSpec};

/// Where a model comes from. Written as `model1`, `model2`, `random:<seed>`
/// or `file:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpecSource {
    Model1,
    Model2,
    Random(u64),
    File(PathBuf),
}

impl SpecSource {
    pub fn resolve(&self) -> Result<ScmSpec> {
        match self {
            SpecSource::Model1 => Ok(ScmSpec::model1()),
            SpecSource::Model2 => Ok(ScmSpec::model2()),
            SpecSource::Random(seed) => Ok(random_spec(*seed)),
            SpecSource::File(path) => ScmSpec::load(path),
        }
    }
}

impl fmt::Display for SpecSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecSource::Model1 => f.write_str("model1"),
            SpecSource::Model2 => f.write_str("model2"),
            SpecSource::Random(seed) => write!(f, "random:{seed}"),
            SpecSource::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for SpecSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model1" => return Ok(SpecSource::Model1),
            "model2" => return Ok(SpecSource::Model2),
            _ => {}
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(SpecSource::Random)
                .map_err(|_| Error::param("specs", format!("bad seed in `{s}`")));
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(SpecSource::File(PathBuf::from(path)));
        }
        Err(Error::param("specs", format!("unknown spec source `{s}`")))
    }
}

impl TryFrom<String> for SpecSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpecSource> for String {
    fn from(s: SpecSource) -> String {
        s.to_string()
    }
}

fn default_sizes() -> Vec<u64> {
    vec![120, 481, 1921]
}
fn default_replications() -> usize {
    1000
}
fn default_ratio() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_tolerance() -> f64 {
    0.05
}
fn default_draws() -> usize {
    1000
}
fn default_true() -> bool {
    true
}

/// Settings for a batch of simulated replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub specs: Vec<SpecSource>,
    /// Observational sample sizes `n`.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// `r = m / n`; the experimental size is `ceil(r·n)`.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Error threshold used for the "within tolerance" shares.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Whether to compute confidence intervals for each replication.
    #[serde(default = "default_true")]
    pub intervals: bool,
    /// Draws for numerical delta intervals at near-tied endpoints.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ReplicationConfig {
    pub fn new(specs: Vec<SpecSource>) -> Self {
        Self {
            specs,
            sizes: default_sizes(),
            replications: default_replications(),
            ratio: default_ratio(),
            alpha: default_alpha(),
            seed: 0,
            tolerance: default_tolerance(),
            intervals: true,
            draws: default_draws(),
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() {
            return Err(Error::param("specs", "at least one spec is required"));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::param(
                "sizes",
                "sizes must be a non-empty list of positive integers",
            ));
        }
        if self.replications == 0 {
            return Err(Error::param("replications", "at least one replication is required"));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::param("ratio", format!("{} must be positive", self.ratio)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("{} is not in (0, 1)", self.alpha)));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::param("tolerance", "must be positive"));
        }
        if self.draws < 2 {
            return Err(Error::param("draws", "at least two draws are required"));
        }
        Ok(())
    }

    /// Experimental size for observational size `n`; `m = n` when `r = 1`.
    pub fn experimental_size(&self, n: u64) -> u64 {
        if self.ratio == 1.0 {
            n
        } else {
            (self.ratio * n as f64).ceil().max(1.0) as u64
        }
    }
}
