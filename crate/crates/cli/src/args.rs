use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use peakload::empirics::Family;
use peakload::{ArrivalModel, Error, Result, ServiceModel};

#[derive(Parser, Debug)]
#[command(
    name = "peakload",
    version,
    about = "Offered load, peak timing and flattening for Mt/G/inf queues"
)]
pub struct Cli {
    /// key=value file of default flags; flags on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,

    /// Write to PATH instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Arrival rate λ(t) on a grid
    #[command(args_override_self = true)]
    Rate {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Mean offered load q(t) on a grid
    #[command(args_override_self = true)]
    Load {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        service: ServiceArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Peak time, peak load, lag and bounds
    #[command(args_override_self = true)]
    Peak {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        service: ServiceArgs,
    },
    /// Lag of the load peak behind the arrival peak (Gaussian arrivals)
    #[command(args_override_self = true)]
    Lag {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        service: ServiceArgs,
    },
    /// Spread needed to keep the peak load under a capacity
    #[command(args_override_self = true)]
    Flatten {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        service: ServiceArgs,
        #[arg(long)]
        capacity: f64,
    },
    /// Monte-Carlo simulation of the number in system
    #[command(args_override_self = true)]
    Simulate {
        #[command(flatten)]
        arrival: ArrivalArgs,
        #[command(flatten)]
        service: ServiceArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start of the arrival horizon (default: mode − 8 spreads)
        #[arg(long)]
        t0: Option<f64>,
        /// End of the arrival horizon (default: mode + 8 spreads)
        #[arg(long)]
        t1: Option<f64>,
    },
    /// Least-squares fit of a rate family to a `date,count` CSV
    #[command(args_override_self = true)]
    Fit {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "gaussian")]
        family: FamilyArg,
    },
    /// Lag between arrival and death cdfs by quantile
    #[command(args_override_self = true)]
    Lagtable {
        #[arg(long, value_name = "PATH")]
        arrivals: PathBuf,
        #[arg(long, value_name = "PATH")]
        deaths: PathBuf,
        /// Comma-separated quantiles (default 0.1,…,0.9)
        #[arg(long, value_delimiter = ',')]
        quantiles: Option<Vec<f64>>,
    },
    /// Scenario Tables 1–5 as one CSV
    #[command(args_override_self = true)]
    Tables,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyArg {
    Gaussian,
    Gamma,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Gamma => Family::Gamma,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ArrivalArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long = "lambda-star", default_value_t = 100.0)]
    pub lambda_star: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

fn need(v: Option<f64>, flag: &str, family: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParameter(format!("--{flag} is required for {family}")))
}

impl ArrivalArgs {
    pub fn model(&self) -> Result<ArrivalModel> {
        match self.family {
            FamilyArg::Gaussian => ArrivalModel::gaussian(
                self.lambda_star,
                need(self.tau, "tau", "gaussian arrivals")?,
                need(self.sigma, "sigma", "gaussian arrivals")?,
            ),
            FamilyArg::Gamma => ArrivalModel::gamma(
                self.lambda_star,
                need(self.alpha, "alpha", "gamma arrivals")?,
                need(self.beta, "beta", "gamma arrivals")?,
            ),
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceKind {
    Exponential,
    Deterministic,
    Discrete,
    Hyperexp,
    Tabulated,
}

#[derive(Args, Debug, Clone)]
pub struct ServiceArgs {
    #[arg(long, value_enum, default_value = "exponential")]
    pub service: ServiceKind,
    /// Exponential rate
    #[arg(long)]
    pub mu: Option<f64>,
    /// Exponential mean, as an alternative to --mu
    #[arg(long = "mean-service")]
    pub mean_service: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Discrete atoms as p:duration pairs, e.g. 0.5:1,0.5:3
    #[arg(long)]
    pub atoms: Option<String>,
    /// Hyper-exponential branches as p:rate pairs, e.g. 0.5:1,0.5:0.25
    #[arg(long)]
    pub branches: Option<String>,
    /// `t,survival` CSV for a tabulated service law
    #[arg(long = "survival-csv", value_name = "PATH")]
    pub survival_csv: Option<PathBuf>,
}

fn pairs(text: &str, flag: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("--{flag}: expected p:value, got `{item}`")))?;
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("--{flag}: bad number `{s}`")))
            };
            Ok((num(a)?, num(b)?))
        })
        .collect()
}

impl ServiceArgs {
    pub fn model(&self) -> Result<ServiceModel> {
        let missing = |flag: &str| Error::InvalidParameter(format!("--{flag} is required for this service law"));
        match self.service {
            ServiceKind::Exponential => match (self.mu, self.mean_service) {
                (Some(mu), _) => ServiceModel::exponential(mu),
                (None, Some(m)) => ServiceModel::exponential(1.0 / m),
                (None, None) => Err(missing("mu")),
            },
            ServiceKind::Deterministic => ServiceModel::deterministic(self.delta.ok_or_else(|| missing("delta"))?),
            ServiceKind::Discrete => {
                ServiceModel::discrete(pairs(self.atoms.as_deref().ok_or_else(|| missing("atoms"))?, "atoms")?)
            }
            ServiceKind::Hyperexp => ServiceModel::hyper_exponential(pairs(
                self.branches.as_deref().ok_or_else(|| missing("branches"))?,
                "branches",
            )?),
            ServiceKind::Tabulated => {
                let path = self.survival_csv.as_deref().ok_or_else(|| missing("survival-csv"))?;
                peakload::service::Tabulated::from_csv_path(path).map(ServiceModel::Tabulated)
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: f64,
    #[arg(long)]
    pub step: f64,
}

impl GridArgs {
    /// start, start + step, … up to stop (inclusive within 1e-9 steps).
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "--step must be positive, got {}",
                self.step
            )));
        }
        if !(self.stop >= self.start) {
            return Err(Error::InvalidParameter("--stop must not be below --start".into()));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if n > 10_000_000 {
            return Err(Error::InvalidParameter(format!("grid of {n} points is too large")));
        }
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}
