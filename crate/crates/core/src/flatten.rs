//! Capacity flattening: the smallest spread that keeps the peak load under
//! a capacity C, and peak-reduction percentages between two scenarios.

use serde::Serialize;

use crate::arrival::{ArrivalModel, GaussianRate};
use crate::error::{Error, Result};
use crate::peak::{peak_time, PeakReport};
use crate::service::ServiceModel;
use crate::special::{ln_gamma, SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlattenSolution {
    pub sigma_star: f64,
    /// λ*E[S]/(σ*√(2π)), the load ceiling at σ*.
    pub implied_bound: f64,
    pub capacity: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// σ* = λ*E[S]/(C√(2π)). Any service law with mean E[S] then keeps
/// q(t) ≤ C for Gaussian arrivals with spread σ*.
pub fn sigma_star(lambda_star: f64, mean_service: f64, capacity: f64) -> Result<FlattenSolution> {
    positive("lambda_star", lambda_star)?;
    positive("mean service time", mean_service)?;
    positive("capacity", capacity)?;
    let sigma_star = lambda_star * mean_service / (capacity * SQRT_2PI);
    Ok(FlattenSolution {
        sigma_star,
        implied_bound: lambda_star * mean_service / (sigma_star * SQRT_2PI),
        capacity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSpreadSolution {
    pub beta: f64,
    pub implied_bound: f64,
    pub capacity: f64,
}

/// Largest rate β with λ*β(α−1)^{α−1}e^{−(α−1)}E[S]/Γ(α) ≤ C, i.e.
/// β = C·Γ(α)·e^{α−1}/(λ*E[S](α−1)^{α−1}). At α = 1 the supremum sits at
/// t = 0 and the formula reduces to β = C/(λ*E[S]).
pub fn gamma_capacity_spread(
    lambda_star: f64,
    alpha: f64,
    mean_service: f64,
    capacity: f64,
) -> Result<GammaSpreadSolution> {
    positive("lambda_star", lambda_star)?;
    positive("mean service time", mean_service)?;
    positive("capacity", capacity)?;
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("gamma shape must be at least 1, got {alpha}")));
    }
    let m = alpha - 1.0;
    let shape_term = if m == 0.0 { 0.0 } else { m * m.ln() };
    let ln_peak_per_beta = shape_term - m - ln_gamma(alpha);
    let beta = capacity / (lambda_star * mean_service * ln_peak_per_beta.exp());
    Ok(GammaSpreadSolution {
        beta,
        implied_bound: lambda_star * beta * mean_service * ln_peak_per_beta.exp(),
        capacity,
    })
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionReport {
    pub arrival_base: f64,
    pub arrival_flat: f64,
    pub arrival_reduction_pct: i64,
    pub queue_base: f64,
    pub queue_flat: f64,
    pub queue_reduction_pct: i64,
}

/// Percentage drop of the arrival and queue peaks from `base` to `flat`,
/// rounded half-up to whole percent.
pub fn reduction_report(base: &PeakReport, flat: &PeakReport) -> ReductionReport {
    let pct = |b: f64, f: f64| round_half_up(100.0 * (1.0 - f / b));
    ReductionReport {
        arrival_base: base.arrival_peak,
        arrival_flat: flat.arrival_peak,
        arrival_reduction_pct: pct(base.arrival_peak, flat.arrival_peak),
        queue_base: base.q_star,
        queue_flat: flat.q_star,
        queue_reduction_pct: pct(base.q_star, flat.q_star),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakCheck {
    pub t_star: f64,
    pub q_star: f64,
    pub within_capacity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlattenReport {
    pub sigma_star: f64,
    pub capacity: f64,
    pub peak_check: PeakCheck,
    pub reductions: ReductionReport,
}

/// Flattens `base` to σ* for capacity C (same λ* and τ), solves the new
/// peak and compares it with the original.
pub fn flatten_report(base: &GaussianRate, s: &ServiceModel, capacity: f64) -> Result<FlattenReport> {
    let sol = sigma_star(base.lambda_star(), s.mean(), capacity)?;
    let flat = ArrivalModel::Gaussian(base.with_sigma(sol.sigma_star)?);
    let before = peak_time(&ArrivalModel::Gaussian(*base), s)?;
    let after = peak_time(&flat, s)?;
    Ok(FlattenReport {
        sigma_star: sol.sigma_star,
        capacity,
        peak_check: PeakCheck {
            t_star: after.t_star,
            q_star: after.q_star,
            within_capacity: after.q_star <= capacity,
        },
        reductions: reduction_report(&before, &after),
    })
}
