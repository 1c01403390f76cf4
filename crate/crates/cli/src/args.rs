use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pocsize",
    version,
    about = "Bounds, intervals and sample sizes for probabilities of causation"
)]
pub struct Cli {
    /// Master seed for every random draw [default: 0, or the config's seed].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file (or directory for `simulate` and `reproduce`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate bound endpoints and their active terms at θ.
    Bounds(BoundsArgs),
    /// Confidence intervals for both endpoints from cell counts.
    Ci(CiArgs),
    /// Experimental and observational sample sizes for a margin of error.
    Plan(PlanArgs),
    /// Run simulated replications described by a config file.
    Simulate(SimulateArgs),
    /// Run the whole simulation study and write every table.
    Reproduce(ReproduceArgs),
    /// Exact population quantities of a structural model.
    Enumerate(EnumerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Pns,
    Pn,
    Ps,
}

#[derive(Debug, Args)]
pub struct FormArgs {
    /// Built-in quantity.
    #[arg(long, value_enum, default_value_t = Quantity::Pns, conflicts_with = "form")]
    pub quantity: Quantity,

    /// Bound form file (JSON or TOML).
    #[arg(long)]
    pub form: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub form: FormArgs,

    /// Comma-separated θ in the form's layout order
    /// (`y_x,y_xp,x_y,x_yp,xp_y,xp_yp` for built-in quantities).
    #[arg(
        long,
        allow_hyphen_values = true,
        required_unless_present = "theta_file",
        conflicts_with = "theta_file"
    )]
    pub theta: Option<String>,

    /// File mapping symbol names to values (JSON or TOML).
    #[arg(long)]
    pub theta_file: Option<PathBuf>,

    /// Terms within this distance of the optimum count as active.
    #[arg(long, default_value_t = 1e-9)]
    pub tie_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CiMethodArg {
    Smooth,
    Numdelta,
    Auto,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub form: FormArgs,

    /// Experimental counts `m11,m10,m01,m00` (X, Y).
    #[arg(long)]
    pub exp: String,

    /// Observational counts `n11,n10,n01,n00` (X, Y).
    #[arg(long)]
    pub obs: String,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, value_enum, default_value_t = CiMethodArg::Auto)]
    pub method: CiMethodArg,

    /// Gaussian draws for the numerical delta method.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,

    /// Finite-difference step; defaults to `n^(-1/4)`.
    #[arg(long)]
    pub epsilon_n: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanMethodArg {
    Worstcase,
    Variance,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Target margin of error.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Ratio `r = m / n`.
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,

    #[arg(long, value_enum, default_value_t = PlanMethodArg::Worstcase)]
    pub method: PlanMethodArg,

    #[command(flatten)]
    pub form: FormArgs,

    /// Pilot θ for the variance-based plan, comma-separated.
    #[arg(long, required_if_eq("method", "variance"))]
    pub pilot: Option<String>,

    /// Share of the experimental sample in the treated arm.
    #[arg(long, default_value_t = 0.5)]
    pub arm_fraction: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Replication config (TOML).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 1000)]
    pub replications: usize,

    /// Number of random models for the pooled error curve.
    #[arg(long, default_value_t = 20)]
    pub random_specs: usize,

    /// Gaussian draws for numerical delta intervals.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    /// Model file (TOML), or `model1` / `model2` for the bundled models.
    #[arg(long)]
    pub spec: String,
}
