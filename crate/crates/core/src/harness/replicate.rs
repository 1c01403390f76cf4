use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ReplicationConfig;
use crate::bounds::{AffineBoundForm, Endpoint, PocQuantity};
use crate::error::{Error, Result};
use crate::inference::{
    confidence_intervals, smooth_ci, CiMethod, IntervalEstimate, MethodChoice, NumericalDeltaConfig, ThetaEstimate,
};
use crate::rng::derive_seed;
use crate::scm::{
    draw_experimental, draw_observational, enumerate_population, estimate_theta, PopulationSummary, ScmSpec,
};
use crate::theta::ThetaLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// An experimental arm or the observational sample was empty.
    InsufficientData,
}

/// One simulated replication. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub spec: String,
    pub n: u64,
    pub m: u64,
    pub rep: usize,
    pub seed: u64,
    pub status: RowStatus,
    pub y_x: Option<f64>,
    pub y_xp: Option<f64>,
    pub x_y: Option<f64>,
    pub x_yp: Option<f64>,
    pub xp_y: Option<f64>,
    pub xp_yp: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub true_lower: f64,
    pub true_upper: f64,
    pub err_lower: Option<f64>,
    pub err_upper: Option<f64>,
    /// Delta-method intervals; empty when the estimate has an exact tie.
    pub smooth_lower_lo: Option<f64>,
    pub smooth_lower_hi: Option<f64>,
    pub smooth_upper_lo: Option<f64>,
    pub smooth_upper_hi: Option<f64>,
    pub smooth_cover_lower: Option<bool>,
    pub smooth_cover_upper: Option<bool>,
    /// Intervals from the near-tie rule: smooth unless the endpoint is
    /// near-tied, in which case numerical delta.
    pub method_lower: Option<CiMethod>,
    pub method_upper: Option<CiMethod>,
    pub ci_lower_lo: Option<f64>,
    pub ci_lower_hi: Option<f64>,
    pub ci_upper_lo: Option<f64>,
    pub ci_upper_hi: Option<f64>,
    pub cover_lower: Option<bool>,
    pub cover_upper: Option<bool>,
}

impl ReplicationRow {
    pub fn error(&self, endpoint: Endpoint) -> Option<f64> {
        match endpoint {
            Endpoint::Lower => self.err_lower,
            Endpoint::Upper => self.err_upper,
        }
    }
}

/// Summary over the replications of one `(spec, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub spec: String,
    pub n: u64,
    pub m: u64,
    pub replications: usize,
    pub ok: usize,
    pub insufficient: usize,
    pub mean_err_lower: f64,
    pub mean_err_upper: f64,
    pub mean_abs_err_lower: f64,
    pub mean_abs_err_upper: f64,
    /// Share of replications with `|error| <= tolerance`.
    pub within_lower: f64,
    pub within_upper: f64,
    pub tolerance: f64,
    pub smooth_coverage_lower: Option<f64>,
    pub smooth_coverage_upper: Option<f64>,
    pub coverage_lower: Option<f64>,
    pub coverage_upper: Option<f64>,
    /// Endpoint intervals computed by each method.
    pub smooth_tags: usize,
    pub numerical_tags: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

fn rate(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let (hit, count) = flags
        .flatten()
        .fold((0usize, 0usize), |(h, c), f| (h + f as usize, c + 1));
    (count > 0).then(|| hit as f64 / count as f64)
}

impl Aggregate {
    /// Aggregates rows of a single cell in row order.
    pub fn from_rows(rows: &[ReplicationRow], tolerance: f64) -> Self {
        let first = &rows[0];
        let ok: Vec<&ReplicationRow> = rows.iter().filter(|r| r.status == RowStatus::Ok).collect();
        let errs = |e: Endpoint| ok.iter().filter_map(move |r| r.error(e));
        let within = |e: Endpoint| mean(errs(e).map(|x| if x.abs() <= tolerance { 1.0 } else { 0.0 }));
        let tags = |method: CiMethod| {
            ok.iter()
                .map(|r| (r.method_lower == Some(method)) as usize + (r.method_upper == Some(method)) as usize)
                .sum()
        };
        Self {
            spec: first.spec.clone(),
            n: first.n,
            m: first.m,
            replications: rows.len(),
            ok: ok.len(),
            insufficient: rows.len() - ok.len(),
            mean_err_lower: mean(errs(Endpoint::Lower)),
            mean_err_upper: mean(errs(Endpoint::Upper)),
            mean_abs_err_lower: mean(errs(Endpoint::Lower).map(f64::abs)),
            mean_abs_err_upper: mean(errs(Endpoint::Upper).map(f64::abs)),
            within_lower: within(Endpoint::Lower),
            within_upper: within(Endpoint::Upper),
            tolerance,
            smooth_coverage_lower: rate(ok.iter().map(|r| r.smooth_cover_lower)),
            smooth_coverage_upper: rate(ok.iter().map(|r| r.smooth_cover_upper)),
            coverage_lower: rate(ok.iter().map(|r| r.cover_lower)),
            coverage_upper: rate(ok.iter().map(|r| r.cover_upper)),
            smooth_tags: tags(CiMethod::SmoothDelta),
            numerical_tags: tags(CiMethod::NumericalDelta),
        }
    }

    pub fn mean_abs_err(&self, endpoint: Endpoint) -> f64 {
        match endpoint {
            Endpoint::Lower => self.mean_abs_err_lower,
            Endpoint::Upper => self.mean_abs_err_upper,
        }
    }

    pub fn within(&self, endpoint: Endpoint) -> f64 {
        match endpoint {
            Endpoint::Lower => self.within_lower,
            Endpoint::Upper => self.within_upper,
        }
    }
}

/// A model together with its exact population summary.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub label: String,
    pub spec: ScmSpec,
    pub population: PopulationSummary,
}

#[derive(Debug, Clone)]
pub struct ReplicationReport {
    pub specs: Vec<ResolvedSpec>,
    /// Ordered by spec, then size, then replication.
    pub rows: Vec<ReplicationRow>,
    /// One per `(spec, size)`, in the same order.
    pub aggregates: Vec<Aggregate>,
}

impl ReplicationReport {
    pub fn aggregate(&self, spec: &str, n: u64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.spec == spec && a.n == n)
    }

    pub fn insufficient(&self) -> usize {
        self.aggregates.iter().map(|a| a.insufficient).sum()
    }

    pub fn write_rows(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.rows)
    }

    pub fn write_aggregates(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.aggregates)
    }
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes rows to any writer (CSV with a header row).
pub fn rows_to_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Seed for one replication, keyed on the spec position, the observational
/// size and the replication index.
pub fn replication_seed(master: u64, spec_index: usize, n: u64, rep: usize) -> u64 {
    derive_seed(master, &[spec_index as u64, n, rep as u64])
}

struct Context<'a> {
    cfg: &'a ReplicationConfig,
    form: AffineBoundForm,
}

fn pick(pair: &(IntervalEstimate, IntervalEstimate), endpoint: Endpoint) -> &IntervalEstimate {
    match endpoint {
        Endpoint::Upper => &pair.0,
        Endpoint::Lower => &pair.1,
    }
}

fn replicate(ctx: &Context, resolved: &ResolvedSpec, spec_index: usize, n: u64, rep: usize) -> Result<ReplicationRow> {
    let cfg = ctx.cfg;
    let m = cfg.experimental_size(n);
    let seed = replication_seed(cfg.seed, spec_index, n, rep);
    let truth = resolved.population.pns_bounds;
    let exp = draw_experimental(&resolved.spec, m, seed)?;
    let obs = draw_observational(&resolved.spec, n, seed)?;
    let mut row = ReplicationRow {
        spec: resolved.label.clone(),
        n,
        m,
        rep,
        seed,
        status: RowStatus::Ok,
        y_x: None,
        y_xp: None,
        x_y: None,
        x_yp: None,
        xp_y: None,
        xp_yp: None,
        lower: None,
        upper: None,
        true_lower: truth.lower,
        true_upper: truth.upper,
        err_lower: None,
        err_upper: None,
        smooth_lower_lo: None,
        smooth_lower_hi: None,
        smooth_upper_lo: None,
        smooth_upper_hi: None,
        smooth_cover_lower: None,
        smooth_cover_upper: None,
        method_lower: None,
        method_upper: None,
        ci_lower_lo: None,
        ci_lower_hi: None,
        ci_upper_lo: None,
        ci_upper_hi: None,
        cover_lower: None,
        cover_upper: None,
    };
    let est: ThetaEstimate = match estimate_theta(&exp, &obs) {
        Ok(est) => est,
        Err(Error::InsufficientData(_)) => {
            row.status = RowStatus::InsufficientData;
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let v = est.theta().values();
    (row.y_x, row.y_xp, row.x_y, row.x_yp, row.xp_y, row.xp_yp) =
        (Some(v[0]), Some(v[1]), Some(v[2]), Some(v[3]), Some(v[4]), Some(v[5]));
    let b = ctx.form.evaluate_raw(v)?;
    row.lower = Some(b.lower);
    row.upper = Some(b.upper);
    row.err_lower = Some(b.lower - truth.lower);
    row.err_upper = Some(b.upper - truth.upper);

    if cfg.intervals {
        match smooth_ci(&ctx.form, &est, cfg.alpha) {
            Ok(pair) => {
                let (l, u) = (pick(&pair, Endpoint::Lower), pick(&pair, Endpoint::Upper));
                row.smooth_lower_lo = Some(l.ci_low);
                row.smooth_lower_hi = Some(l.ci_high);
                row.smooth_upper_lo = Some(u.ci_low);
                row.smooth_upper_hi = Some(u.ci_high);
                row.smooth_cover_lower = Some(l.contains(truth.lower));
                row.smooth_cover_upper = Some(u.contains(truth.upper));
            }
            Err(Error::NonSmoothEndpoint { .. }) => {}
            Err(e) => return Err(e),
        }
        let nd = NumericalDeltaConfig {
            epsilon_n: None,
            draws: cfg.draws,
            seed: derive_seed(seed, &[0xc1]),
        };
        let pair = confidence_intervals(&ctx.form, &est, cfg.alpha, MethodChoice::Auto, &nd)?;
        let (l, u) = (pick(&pair, Endpoint::Lower), pick(&pair, Endpoint::Upper));
        row.method_lower = Some(l.method);
        row.method_upper = Some(u.method);
        row.ci_lower_lo = Some(l.ci_low);
        row.ci_lower_hi = Some(l.ci_high);
        row.ci_upper_lo = Some(u.ci_low);
        row.ci_upper_hi = Some(u.ci_high);
        row.cover_lower = Some(l.contains(truth.lower));
        row.cover_upper = Some(u.contains(truth.upper));
    }
    Ok(row)
}

/// Resolves every spec source and enumerates its population.
pub fn resolve_specs(cfg: &ReplicationConfig) -> Result<Vec<ResolvedSpec>> {
    cfg.specs
        .iter()
        .map(|source| {
            let spec = source.resolve()?;
            let population = enumerate_population(&spec);
            Ok(ResolvedSpec {
                label: source.to_string(),
                spec,
                population,
            })
        })
        .collect()
}

/// Simulates PNS bound estimates for every spec, size and replication.
/// Output depends only on the configuration, not on the thread count.
pub fn run_replications(cfg: &ReplicationConfig) -> Result<ReplicationReport> {
    cfg.validate()?;
    let specs = resolve_specs(cfg)?;
    run_resolved(cfg, specs)
}

pub(crate) fn run_resolved(cfg: &ReplicationConfig, specs: Vec<ResolvedSpec>) -> Result<ReplicationReport> {
    let ctx = Context {
        cfg,
        form: PocQuantity::Pns.form(&ThetaLayout::standard())?,
    };
    let mut rows = Vec::with_capacity(specs.len() * cfg.sizes.len() * cfg.replications);
    let mut aggregates = Vec::with_capacity(specs.len() * cfg.sizes.len());
    for (s, resolved) in specs.iter().enumerate() {
        for &n in &cfg.sizes {
            let cell: Vec<ReplicationRow> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| replicate(&ctx, resolved, s, n, rep))
                .collect::<Result<_>>()?;
            aggregates.push(Aggregate::from_rows(&cell, cfg.tolerance));
            rows.extend(cell);
        }
    }
    Ok(ReplicationReport {
        specs,
        rows,
        aggregates,
    })
}

/// One point of an error-versus-sample-size curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub spec_set: String,
    pub n: u64,
    pub mean_err_lower: f64,
    pub mean_err_upper: f64,
    pub mean_abs_err_lower: f64,
    pub mean_abs_err_upper: f64,
}

impl CurvePoint {
    pub fn mean_abs_err(&self, endpoint: Endpoint) -> f64 {
        match endpoint {
            Endpoint::Lower => self.mean_abs_err_lower,
            Endpoint::Upper => self.mean_abs_err_upper,
        }
    }
}

/// Error curve per spec (`pooled = None`) or averaged pointwise over all
/// specs under the given label.
pub fn error_curve(report: &ReplicationReport, pooled: Option<&str>) -> Vec<CurvePoint> {
    let per_spec: Vec<CurvePoint> = report
        .aggregates
        .iter()
        .map(|a| CurvePoint {
            spec_set: a.spec.clone(),
            n: a.n,
            mean_err_lower: a.mean_err_lower,
            mean_err_upper: a.mean_err_upper,
            mean_abs_err_lower: a.mean_abs_err_lower,
            mean_abs_err_upper: a.mean_abs_err_upper,
        })
        .collect();
    let Some(label) = pooled else {
        return per_spec;
    };
    let mut sizes: Vec<u64> = per_spec.iter().map(|p| p.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let at: Vec<&CurvePoint> = per_spec.iter().filter(|p| p.n == n).collect();
            CurvePoint {
                spec_set: label.to_owned(),
                n,
                mean_err_lower: mean(at.iter().map(|p| p.mean_err_lower)),
                mean_err_upper: mean(at.iter().map(|p| p.mean_err_upper)),
                mean_abs_err_lower: mean(at.iter().map(|p| p.mean_abs_err_lower)),
                mean_abs_err_upper: mean(at.iter().map(|p| p.mean_abs_err_upper)),
            }
        })
        .collect()
}

/// Smallest `n` of a curve at which both endpoints' mean absolute error is
/// at most `threshold`.
pub fn crossing(curve: &[CurvePoint], spec_set: &str, threshold: f64) -> Option<u64> {
    curve
        .iter()
        .filter(|p| p.spec_set == spec_set)
        .filter(|p| Endpoint::BOTH.iter().all(|&e| p.mean_abs_err(e) <= threshold))
        .map(|p| p.n)
        .min()
}
