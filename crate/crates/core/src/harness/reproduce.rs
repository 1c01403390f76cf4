use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ReplicationConfig, SpecSource};
use super::replicate::{crossing, error_curve, run_replications, write_csv, ReplicationReport};
use crate::bounds::Endpoint;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::sample_size::{worst_case_plan, SampleSizePlan, REFERENCE_SAMPLE_SIZE};

/// Label of the pooled random-model curve.
pub const RANDOM_SET: &str = "random";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub replications: usize,
    /// Sizes for the scatter runs.
    pub scatter_sizes: Vec<u64>,
    /// Size grid for the error curves.
    pub curve_sizes: Vec<u64>,
    /// Number of random models for the pooled curve.
    pub random_specs: usize,
    /// Draws for numerical delta intervals.
    pub draws: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl ReproduceOptions {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            out_dir: out_dir.into(),
            seed,
            replications: 1000,
            scatter_sizes: vec![120, 481, 1921],
            curve_sizes: (1..=10).map(|k| 100 * k).collect(),
            random_specs: 20,
            draws: 1000,
            epsilon: 0.05,
            alpha: 0.05,
        }
    }
}

/// Pass/fail of one reproduced claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStability {
    pub spec: String,
    pub n: u64,
    pub mean_abs_err_lower: f64,
    pub mean_abs_err_upper: f64,
    pub within_lower: f64,
    pub within_upper: f64,
    pub smooth_coverage_lower: Option<f64>,
    pub smooth_coverage_upper: Option<f64>,
    pub coverage_lower: Option<f64>,
    pub coverage_upper: Option<f64>,
    pub smooth_tags: usize,
    pub numerical_tags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub spec_set: String,
    /// Smallest grid size with both mean absolute errors at most ε.
    pub n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceSummary {
    pub seed: u64,
    pub replications: usize,
    pub plan: SampleSizePlan,
    pub reference_size: u64,
    pub reference_ratio: f64,
    pub stability: Vec<ModelStability>,
    pub crossings: Vec<Crossing>,
    pub insufficient_replications: usize,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
}

impl ReproduceSummary {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn crossing(&self, spec_set: &str) -> Option<u64> {
        self.crossings.iter().find(|c| c.spec_set == spec_set).and_then(|c| c.n)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    complete: bool,
    files: &'a [String],
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct PlanRow {
    method: String,
    epsilon: f64,
    alpha: f64,
    ratio: f64,
    z: f64,
    base_factor: f64,
    m: u64,
    n: u64,
    reference_m: u64,
    ratio_to_reference: f64,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        write_csv(&self.dir.join(name), rows)?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn manifest(&self, error: Option<String>) -> Result<()> {
        let m = Manifest {
            complete: error.is_none(),
            files: &self.files,
            error,
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |c| format!("{c:.3}"))
}

/// Seed of the `i`-th random model in the pooled curve.
pub fn random_spec_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, &[0xf5, i as u64])
}

/// Runs the full simulation study and writes its tables to `opts.out_dir`:
///
/// * `sample_size.csv`: worst-case plan next to the reference size,
/// * `scatter_model1.csv`, `scatter_model2.csv`: per-replication estimates
///   and intervals at the scatter sizes,
/// * `aggregates.csv`: per-cell summaries of the scatter runs,
/// * `error_curve_models.csv`, `error_curve_random.csv`: mean errors over
///   the size grid,
/// * `summary.json`: headline numbers and pass/fail checks,
/// * `manifest.json`: files written, and the error if a step failed.
pub fn reproduce_study(opts: &ReproduceOptions) -> Result<ReproduceSummary> {
    let dir = opts.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer { dir, files: Vec::new() };
    match run_pipeline(opts, &mut w) {
        Ok(summary) => {
            w.manifest(None)?;
            Ok(summary)
        }
        Err(e) => {
            w.manifest(Some(e.to_string()))?;
            Err(e)
        }
    }
}

fn run_pipeline(opts: &ReproduceOptions, w: &mut Writer) -> Result<ReproduceSummary> {
    let eps = opts.epsilon;
    let plan = worst_case_plan(eps, opts.alpha, 1.0)?;
    w.csv(
        "sample_size.csv",
        &[PlanRow {
            method: plan.method.to_string(),
            epsilon: plan.epsilon,
            alpha: plan.alpha,
            ratio: plan.ratio,
            z: plan.z,
            base_factor: plan.base_factor,
            m: plan.m,
            n: plan.n,
            reference_m: REFERENCE_SAMPLE_SIZE,
            ratio_to_reference: plan.reference_ratio(),
        }],
    )?;

    let models = vec![SpecSource::Model1, SpecSource::Model2];
    let base = |specs: Vec<SpecSource>, sizes: &[u64], intervals: bool| {
        let mut cfg = ReplicationConfig::new(specs);
        cfg.sizes = sizes.to_vec();
        cfg.replications = opts.replications;
        cfg.seed = opts.seed;
        cfg.alpha = opts.alpha;
        cfg.tolerance = eps;
        cfg.draws = opts.draws;
        cfg.intervals = intervals;
        cfg
    };

    let scatter = run_replications(&base(models.clone(), &opts.scatter_sizes, true))?;
    for (i, source) in models.iter().enumerate() {
        let label = source.to_string();
        let rows: Vec<_> = scatter.rows.iter().filter(|r| r.spec == label).cloned().collect();
        w.csv(&format!("scatter_model{}.csv", i + 1), &rows)?;
    }
    w.csv("aggregates.csv", &scatter.aggregates)?;

    let curves = run_replications(&base(models.clone(), &opts.curve_sizes, false))?;
    let model_curve = error_curve(&curves, None);
    w.csv("error_curve_models.csv", &model_curve)?;

    let random_sources: Vec<SpecSource> = (0..opts.random_specs)
        .map(|i| SpecSource::Random(random_spec_seed(opts.seed, i)))
        .collect();
    let (random_curve, random_report) = if random_sources.is_empty() {
        (Vec::new(), None)
    } else {
        let report = run_replications(&base(random_sources, &opts.curve_sizes, false))?;
        let mut curve = error_curve(&report, Some(RANDOM_SET));
        curve.extend(error_curve(&report, None));
        (curve, Some(report))
    };
    w.csv("error_curve_random.csv", &random_curve)?;

    let stability = stability(&scatter, &models, plan.n);
    let mut crossings: Vec<Crossing> = models
        .iter()
        .map(|s| Crossing {
            spec_set: s.to_string(),
            n: crossing(&model_curve, &s.to_string(), eps),
        })
        .collect();
    if random_report.is_some() {
        crossings.push(Crossing {
            spec_set: RANDOM_SET.to_owned(),
            n: crossing(&random_curve, RANDOM_SET, eps),
        });
    }
    let insufficient = scatter.insufficient()
        + curves.insufficient()
        + random_report.as_ref().map_or(0, ReplicationReport::insufficient);
    let checks = checks(&plan, &stability, &crossings, eps);
    w.files.push("summary.json".to_owned());
    let summary = ReproduceSummary {
        seed: opts.seed,
        replications: opts.replications,
        plan,
        reference_size: REFERENCE_SAMPLE_SIZE,
        reference_ratio: plan.reference_ratio(),
        stability,
        crossings,
        insufficient_replications: insufficient,
        files: w.files.clone(),
        checks,
    };
    w.files.pop();
    w.json("summary.json", &summary)?;
    Ok(summary)
}

fn stability(report: &ReplicationReport, models: &[SpecSource], n: u64) -> Vec<ModelStability> {
    models
        .iter()
        .filter_map(|s| report.aggregate(&s.to_string(), n))
        .map(|a| ModelStability {
            spec: a.spec.clone(),
            n: a.n,
            mean_abs_err_lower: a.mean_abs_err_lower,
            mean_abs_err_upper: a.mean_abs_err_upper,
            within_lower: a.within_lower,
            within_upper: a.within_upper,
            smooth_coverage_lower: a.smooth_coverage_lower,
            smooth_coverage_upper: a.smooth_coverage_upper,
            coverage_lower: a.coverage_lower,
            coverage_upper: a.coverage_upper,
            smooth_tags: a.smooth_tags,
            numerical_tags: a.numerical_tags,
        })
        .collect()
}

fn checks(plan: &SampleSizePlan, stability: &[ModelStability], crossings: &[Crossing], eps: f64) -> Vec<Check> {
    let mut out = vec![Check {
        name: "sample_size".into(),
        passed: plan.m == 1921
            && plan.n == 1921
            && plan.base_factor.round() == 1537.0
            && plan.reference_ratio() <= 0.32,
        detail: format!(
            "m = {}, n = {}, base factor {:.2}, m / {} = {:.4}",
            plan.m,
            plan.n,
            plan.base_factor,
            REFERENCE_SAMPLE_SIZE,
            plan.reference_ratio()
        ),
    }];
    for s in stability {
        let mean_ok = Endpoint::BOTH.iter().all(|&e| {
            let v = match e {
                Endpoint::Lower => s.mean_abs_err_lower,
                Endpoint::Upper => s.mean_abs_err_upper,
            };
            v <= eps
        });
        let share_ok = s.within_lower >= 0.90 && s.within_upper >= 0.90;
        out.push(Check {
            name: format!("stability_{}", s.spec),
            passed: mean_ok && share_ok,
            detail: format!(
                "n = {}: mean |err| lower {:.4}, upper {:.4}; share within {eps}: lower {:.3}, upper {:.3}",
                s.n, s.mean_abs_err_lower, s.mean_abs_err_upper, s.within_lower, s.within_upper
            ),
        });
    }
    if let Some(s) = stability.iter().find(|s| s.spec == "model1") {
        let (lo, hi) = (s.smooth_coverage_lower, s.smooth_coverage_upper);
        out.push(Check {
            name: "coverage_model1".into(),
            passed: lo.is_some_and(|c| c >= 0.93) && hi.is_some_and(|c| c >= 0.93),
            detail: format!(
                "smooth 95% coverage at n = {}: lower {}, upper {}",
                s.n,
                show(lo),
                show(hi)
            ),
        });
    }
    for c in crossings {
        out.push(Check {
            name: format!("error_curve_{}", c.spec_set),
            passed: c.n.is_some_and(|n| n <= 500),
            detail: match c.n {
                Some(n) => format!(
                    "mean |err| <= {eps} for both endpoints from n = {n} (target 300: {})",
                    if n <= 300 { "met" } else { "missed" }
                ),
                None => format!("mean |err| never reaches {eps} on the grid"),
            },
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bundle_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested").join("bundle");
        let mut opts = ReproduceOptions::new(&out, 7);
        opts.replications = 4;
        opts.scatter_sizes = vec![120, 1921];
        opts.curve_sizes = vec![100, 200];
        opts.random_specs = 2;
        opts.draws = 100;
        let s = reproduce_study(&opts).unwrap();
        assert_eq!(s.plan.m, 1921);
        assert!((s.reference_ratio - 0.3125).abs() < 1e-3);
        assert!(s.check("sample_size").unwrap().passed);
        for f in &s.files {
            assert!(out.join(f).exists(), "{f}");
        }
        assert!(out.join("manifest.json").exists());
        let scatter = std::fs::read_to_string(out.join("scatter_model1.csv")).unwrap();
        assert_eq!(scatter.lines().count(), 1 + 2 * 4);
        let random = std::fs::read_to_string(out.join("error_curve_random.csv")).unwrap();
        assert_eq!(random.lines().count(), 1 + 2 + 2 * 2);
    }
}
