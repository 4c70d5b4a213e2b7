//! Mean offered load q(t) = E[λ(t − S_e)]·E[S] and the Poisson marginal of
//! the infinite-server count.
//!
//! The generic path integrates against the stationary-excess law of any
//! service model. Gaussian arrivals additionally have closed forms for
//! exponential, deterministic, discrete and hyper-exponential service;
//! [`load_at`] prefers those and tags the result with its provenance.

use rayon::prelude::*;
use serde::Serialize;

use crate::arrival::{ArrivalModel, GammaRate, GaussianRate};
use crate::error::{Error, Result};
use crate::service::{Atom, Branch, ServiceModel};
use crate::special::{ln_gamma, ln_norm_cdf, norm_interval, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::Quadrature => "quadrature",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl LoadCurve {
    /// Largest sampled value and its grid time.
    pub fn max(&self) -> Option<(f64, f64)> {
        self.grid
            .iter()
            .zip(&self.values)
            .map(|(&t, &q)| (t, q))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `t,q` CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse(format!("writing load csv: {e}"));
        w.write_record(["t", "q"]).map_err(io)?;
        for (t, q) in self.grid.iter().zip(&self.values) {
            w.write_record([crate::format::sig(*t), crate::format::sig(*q)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(format!("writing load csv: {e}")))?;
        Ok(())
    }
}

/// Points in S_e-space where u ↦ λ(t − u) has its peak, cutoff or shoulders.
pub(crate) fn integrand_breaks(a: &ArrivalModel, t: f64) -> Vec<f64> {
    let centre = t - a.mode_time();
    let spread = a.spread();
    let mut pts: Vec<f64> = [-12.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 12.0]
        .iter()
        .map(|k| centre + k * spread)
        .collect();
    if let Some(origin) = a.support_start() {
        let cut = t - origin;
        pts.push(cut);
        pts.retain(|&u| u <= cut);
    }
    pts.retain(|&u| u > 0.0);
    pts.sort_by(f64::total_cmp);
    pts
}

/// q(t) through the stationary-excess expectation, valid for every service law.
pub fn mean_load(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<f64> {
    if let Some(origin) = a.support_start() {
        if t <= origin {
            return Ok(0.0);
        }
    }
    let breaks = integrand_breaks(a, t);
    let e = s.excess().expect(|u| a.rate_at(t - u), &breaks)?;
    Ok(e * s.mean())
}

/// Gaussian arrivals with exponential(μ) service:
/// λ*·exp(−μ(t−τ) + μ²σ²/2)·Φ((t−τ)/σ − μσ), evaluated in log space.
pub fn load_gauss_exp(g: &GaussianRate, mu: f64, t: f64) -> f64 {
    let sigma = g.sigma();
    let d = t - g.tau();
    let ms = mu * sigma;
    let ln_q = g.lambda_star().ln() - mu * d + 0.5 * ms * ms + ln_norm_cdf(d / sigma - ms);
    ln_q.exp()
}

/// Gaussian arrivals with deterministic service Δ: λ*·[Φ((t−τ)/σ) − Φ((t−τ−Δ)/σ)].
pub fn load_gauss_det(g: &GaussianRate, delta: f64, t: f64) -> f64 {
    let hi = (t - g.tau()) / g.sigma();
    let lo = (t - g.tau() - delta) / g.sigma();
    g.lambda_star() * norm_interval(lo, hi)
}

pub fn load_gauss_discrete(g: &GaussianRate, atoms: &[Atom], t: f64) -> f64 {
    atoms.iter().map(|a| a.p * load_gauss_det(g, a.delta, t)).sum()
}

pub fn load_gauss_hyperexp(g: &GaussianRate, branches: &[Branch], t: f64) -> f64 {
    branches.iter().map(|b| b.p * load_gauss_exp(g, b.mu, t)).sum()
}

/// Closed form when one exists for this pairing.
pub fn closed_form_load(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Option<f64> {
    let ArrivalModel::Gaussian(g) = a else {
        return None;
    };
    match s {
        ServiceModel::Exponential { mu } => Some(load_gauss_exp(g, *mu, t)),
        ServiceModel::Deterministic { delta } => Some(load_gauss_det(g, *delta, t)),
        ServiceModel::Discrete { atoms } => Some(load_gauss_discrete(g, atoms, t)),
        ServiceModel::HyperExponential { branches } => Some(load_gauss_hyperexp(g, branches, t)),
        ServiceModel::Tabulated(_) => None,
    }
}

pub fn provenance(a: &ArrivalModel, s: &ServiceModel) -> Provenance {
    match (a, s) {
        (ArrivalModel::Gaussian(_), ServiceModel::Tabulated(_)) | (ArrivalModel::Gamma(_), _) => Provenance::Quadrature,
        _ => Provenance::ClosedForm,
    }
}

/// q(t), from a closed form when available.
pub fn load_at(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<(f64, Provenance)> {
    match closed_form_load(a, s, t) {
        Some(q) => Ok((q, Provenance::ClosedForm)),
        None => mean_load(a, s, t).map(|q| (q, Provenance::Quadrature)),
    }
}

/// Samples q on a caller-supplied grid; grid points are evaluated in parallel.
pub fn load_curve(a: &ArrivalModel, s: &ServiceModel, grid: &[f64]) -> Result<LoadCurve> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("load grid must be strictly increasing"));
    }
    let values = grid
        .par_iter()
        .map(|&t| load_at(a, s, t).map(|(q, _)| q))
        .collect::<Result<Vec<f64>>>()?;
    Ok(LoadCurve {
        grid: grid.to_vec(),
        values,
        provenance: provenance(a, s),
    })
}

/// Poisson law of the number in system at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonMarginal {
    pub mean: f64,
}

impl PoissonMarginal {
    pub fn variance(&self) -> f64 {
        self.mean
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if self.mean == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        let kf = k as f64;
        (kf * self.mean.ln() - self.mean - ln_gamma(kf + 1.0)).exp()
    }

    pub fn cdf(&self, k: u64) -> f64 {
        (0..=k).map(|j| self.pmf(j)).sum::<f64>().min(1.0)
    }

    /// Smallest k with P(N ≤ k) ≥ p.
    pub fn quantile(&self, p: f64) -> u64 {
        let mut acc = 0.0;
        let mut k = 0;
        loop {
            acc += self.pmf(k);
            if acc >= p || k > 10 + (self.mean + 40.0 * self.mean.sqrt()) as u64 {
                return k;
            }
            k += 1;
        }
    }
}

pub fn marginal_at(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<PoissonMarginal> {
    load_at(a, s, t).map(|(mean, _)| PoissonMarginal { mean })
}

/// λ(t) − μq − dq/dt for exponential service, with dq/dt a central
/// difference of the load (step 1e-5·max(1, |t|)).
pub fn ode_residual(a: &ArrivalModel, s: &ServiceModel, t: f64, q: f64) -> Result<f64> {
    let ServiceModel::Exponential { mu } = s else {
        return Err(Error::invalid(
            "the offered-load ODE residual needs exponential service",
        ));
    };
    let h = 1e-5 * t.abs().max(1.0);
    let ahead = load_at(a, s, t + h)?.0;
    let behind = load_at(a, s, t - h)?.0;
    let slope = (ahead - behind) / (2.0 * h);
    Ok(a.rate_at(t) - mu * q - slope)
}

/// dq/dt for Gaussian arrivals written as the Hermite-weighted excess
/// expectation −(λ*/σ²)·E[z·φ(z)]·E[S], z = (t − τ − S_e)/σ.
pub fn gaussian_load_derivative(g: &GaussianRate, s: &ServiceModel, t: f64) -> Result<f64> {
    let sigma = g.sigma();
    let a = ArrivalModel::Gaussian(*g);
    let breaks = integrand_breaks(&a, t);
    let e = s.excess().expect(
        |u| {
            let z = (t - g.tau() - u) / sigma;
            z * norm_pdf(z)
        },
        &breaks,
    )?;
    Ok(-g.lambda_star() / (sigma * sigma) * e * s.mean())
}

/// dq/dt for Gamma arrivals in the form
/// (λ*β^α/Γ(α))·E[(α − 1 − β(t − S_e))(t − S_e)^{α−2}e^{−β(t − S_e)}]·E[S].
pub fn gamma_load_derivative(g: &GammaRate, s: &ServiceModel, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let (alpha, beta) = (g.alpha(), g.beta());
    let ln_norm = g.lambda_star().ln() + alpha * beta.ln() - ln_gamma(alpha);
    let a = ArrivalModel::Gamma(*g);
    let breaks = integrand_breaks(&a, t);
    let e = s.excess().expect(
        |u| {
            let x = t - u;
            if x <= 0.0 {
                return 0.0;
            }
            (alpha - 1.0 - beta * x) * ((alpha - 2.0) * x.ln() - beta * x + ln_norm).exp()
        },
        &breaks,
    )?;
    Ok(e * s.mean())
}

/// q'(t) = λ(t) − E[λ(t − S)], the arrivals minus the departures of
/// customers who arrived one service time ago. Finite for every α ≥ 1.
pub fn load_derivative(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<f64> {
    let breaks = integrand_breaks(a, t);
    let departures = s.service_expectation(|u| a.rate_at(t - u), &breaks)?;
    Ok(a.rate_at(t) - departures)
}
