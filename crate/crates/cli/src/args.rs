use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "hetcr", version, about = "Latent-class competing-risks survival analysis")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel restarts.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Let the censoring risk depend on class and covariates (sanity check:
    /// its fitted regression coefficients should come out near zero).
    #[arg(long, global = true)]
    pub free_censoring: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic cohort: writes cohort.csv, truth.csv, simulation.json.
    Simulate {
        /// two-class-a, two-class-b, two-class-c, three-class or frailty-offset.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Class separation of the three-class preset.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Fit one model: writes model.json and fit_report.json.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Fit the Gaussian-frailty model instead of latent classes.
        #[arg(long)]
        gaussian: bool,
        #[arg(long)]
        no_error_bars: bool,
    },
    /// Score a grid of (L, K): writes selection.json and model.json of the best cell.
    Select {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        warm_start: bool,
    },
    /// Emit survival, hazard and incidence curves as CSV.
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Cohort for empirical or cohort-average curves.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        risk: Option<usize>,
        /// Raw covariate values, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Option<Vec<f64>>,
        /// LQ, UQ or IQ band of `--covariate`.
        #[arg(long)]
        band: Option<String>,
        /// 1-based covariate for `--band`.
        #[arg(long)]
        covariate: Option<usize>,
        #[arg(long)]
        empirical: bool,
        #[arg(long)]
        cohort_average: bool,
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Posterior class probabilities: writes posterior.csv and classification.json.
    Classify {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// truth.csv from `simulate`; adds the classification fraction.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Kaplan-Meier and Cox (optionally gamma frailty) for one risk.
    Baseline {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        risk: Option<usize>,
        #[arg(long)]
        gamma_frailty_k: Option<usize>,
    },
}
