use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use pocsize_core::bounds::ActiveSetReport;
use pocsize_core::harness::{reproduce_study, run_replications, ReplicationConfig, ReproduceOptions};
use pocsize_core::inference::{
    confidence_intervals, ExperimentalCounts, MethodChoice, NumericalDeltaConfig, ObservationalCounts, ThetaEstimate,
};
use pocsize_core::sample_size::{variance_based_plan, worst_case_plan, CovarianceModel};
use pocsize_core::scm::{enumerate_population, ScmSpec};
use pocsize_core::{AffineBoundForm, PocQuantity, Theta, ThetaLayout};

use crate::args::{
    BoundsArgs, CiArgs, CiMethodArg, Cli, Command, EnumerateArgs, FormArgs, PlanArgs, PlanMethodArg, Quantity,
    ReproduceArgs, SimulateArgs,
};
use crate::output::emit;

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Bounds(a) => bounds(cli, a),
        Command::Ci(a) => ci(cli, a),
        Command::Plan(a) => plan(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Reproduce(a) => reproduce(cli, a),
        Command::Enumerate(a) => enumerate(cli, a),
    }
}

fn load_form(args: &FormArgs) -> Result<AffineBoundForm> {
    if let Some(path) = &args.form {
        return Ok(AffineBoundForm::load(path)?);
    }
    let q = match args.quantity {
        Quantity::Pns => PocQuantity::Pns,
        Quantity::Pn => PocQuantity::Pn,
        Quantity::Ps => PocQuantity::Ps,
    };
    Ok(q.form(&ThetaLayout::standard())?)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow!("bad {what} value `{}`: {e}", s.trim()))
        })
        .collect()
}

fn parse_counts(text: &str, what: &str) -> Result<[u64; 4]> {
    let v: Vec<u64> = parse_list(text, what)?;
    v.try_into().map_err(|_| anyhow!("{what} needs exactly four counts"))
}

fn read_theta_file(path: &Path, layout: &std::sync::Arc<ThetaLayout>) -> Result<Theta> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let map: BTreeMap<String, f64> = if path.extension().is_some_and(|e| e == "toml") {
        toml_map(&text)?
    } else {
        serde_json::from_str(&text).with_context(|| format!("{} is not a symbol-to-value map", path.display()))?
    };
    let values = layout
        .symbols()
        .iter()
        .map(|s| {
            map.get(s)
                .copied()
                .ok_or_else(|| anyhow!("{} lacks symbol `{s}`", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Theta::new(layout.clone(), values)?)
}

fn toml_map(text: &str) -> Result<BTreeMap<String, f64>> {
    toml::from_str(text).context("theta file is not a symbol-to-value map")
}

#[derive(Serialize)]
struct BoundsOutput<'a> {
    layout: &'a [String],
    theta: Vec<f64>,
    lower: f64,
    upper: f64,
    active_sets: ActiveSetReport,
}

#[derive(Serialize)]
struct BoundsRow {
    lower: f64,
    upper: f64,
    lower_active: String,
    upper_active: String,
    lower_gap: f64,
    upper_gap: f64,
}

fn join(ix: &[usize]) -> String {
    ix.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

fn bounds(cli: &Cli, a: &BoundsArgs) -> Result<()> {
    let form = load_form(&a.form)?;
    let theta = match (&a.theta, &a.theta_file) {
        (Some(text), _) => Theta::new(form.layout().clone(), parse_list(text, "theta")?)?,
        (None, Some(path)) => read_theta_file(path, form.layout())?,
        (None, None) => bail!("pass --theta or --theta-file"),
    };
    let b = form.evaluate(&theta)?;
    let active = form.active_sets(&theta, a.tie_tolerance)?;
    let row = BoundsRow {
        lower: b.lower,
        upper: b.upper,
        lower_active: join(&active.lower_active),
        upper_active: join(&active.upper_active),
        lower_gap: active.lower_gap,
        upper_gap: active.upper_gap,
    };
    let out = BoundsOutput {
        layout: form.layout().symbols(),
        theta: theta.values().to_vec(),
        lower: b.lower,
        upper: b.upper,
        active_sets: active,
    };
    emit(cli.format, cli.out.as_deref(), &out, &[row])
}

fn ci(cli: &Cli, a: &CiArgs) -> Result<()> {
    let form = load_form(&a.form)?;
    let [m11, m10, m01, m00] = parse_counts(&a.exp, "--exp")?;
    let [n11, n10, n01, n00] = parse_counts(&a.obs, "--obs")?;
    let est = ThetaEstimate::from_counts(
        ExperimentalCounts { m11, m10, m01, m00 },
        ObservationalCounts { n11, n10, n01, n00 },
    )?;
    let choice = match a.method {
        CiMethodArg::Smooth => MethodChoice::Smooth,
        CiMethodArg::Numdelta => MethodChoice::NumericalDelta,
        CiMethodArg::Auto => MethodChoice::Auto,
    };
    let cfg = NumericalDeltaConfig {
        epsilon_n: a.epsilon_n,
        draws: a.draws,
        seed: cli.seed.unwrap_or(0),
    };
    let (upper, lower) = confidence_intervals(&form, &est, a.alpha, choice, &cfg)?;
    let both = [upper, lower];
    emit(cli.format, cli.out.as_deref(), &both, &both)
}

fn plan(cli: &Cli, a: &PlanArgs) -> Result<()> {
    let plan = match a.method {
        PlanMethodArg::Worstcase => worst_case_plan(a.epsilon, a.alpha, a.ratio)?,
        PlanMethodArg::Variance => {
            let form = load_form(&a.form)?;
            let text = a.pilot.as_deref().ok_or_else(|| anyhow!("--pilot is required"))?;
            let pilot = Theta::new(form.layout().clone(), parse_list(text, "pilot")?)?;
            let model = CovarianceModel {
                arm_fraction: a.arm_fraction,
            };
            variance_based_plan(&form, &pilot, model, a.epsilon, a.alpha, a.ratio)?
        }
    };
    emit(cli.format, cli.out.as_deref(), &plan, &[plan])
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<()> {
    let mut cfg = ReplicationConfig::load(&a.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("simulate-out"));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let report = run_replications(&cfg)?;
    report.write_rows(&dir.join("replications.csv"))?;
    report.write_aggregates(&dir.join("aggregates.csv"))?;
    emit(cli.format, None, &report.aggregates, &report.aggregates)
}

fn reproduce(cli: &Cli, a: &ReproduceArgs) -> Result<()> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("reproduce-out"));
    let mut opts = ReproduceOptions::new(dir, cli.seed.unwrap_or(0));
    opts.replications = a.replications;
    opts.random_specs = a.random_specs;
    opts.draws = a.draws;
    let summary = reproduce_study(&opts)?;
    emit(cli.format, None, &summary, &summary.checks)
}

fn enumerate(cli: &Cli, a: &EnumerateArgs) -> Result<()> {
    let spec = match a.spec.as_str() {
        "model1" => ScmSpec::model1(),
        "model2" => ScmSpec::model2(),
        path => ScmSpec::load(path)?,
    };
    let record = enumerate_population(&spec).record();
    emit(cli.format, cli.out.as_deref(), &record, &[&record])
}
