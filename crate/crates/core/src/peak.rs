//! Peak time and value of the offered load, the lag behind the arrival
//! peak, and the inverse-Mills machinery behind the exact exponential lag.

use serde::Serialize;

use crate::arrival::{ArrivalModel, GammaRate, GaussianRate};
use crate::error::{Error, Result};
use crate::load::{integrand_breaks, load_at, load_derivative, load_gauss_exp, load_gauss_hyperexp};
use crate::optimize::{brent_root, golden_section_max};
use crate::service::{excess_mixture_weights, Branch, ServiceModel};
use crate::special::{inv_mills, inv_mills_excess, ln_inv_mills, ln_norm_cdf, norm_pdf, SQRT_2PI};

const DAMPING: f64 = 0.5;
const FIXED_POINT_STEPS: usize = 200;
const FIXED_POINT_TOL: f64 = 1e-10;
const ROOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakMethod {
    FixedPoint,
    GoldenSection,
    ClosedForm,
}

impl PeakMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PeakMethod::FixedPoint => "fixed_point",
            PeakMethod::GoldenSection => "golden_section",
            PeakMethod::ClosedForm => "closed_form",
        }
    }
}

/// How [`peak_time_with`] should locate the peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakStrategy {
    /// Closed form when one exists, else the fixed point with a
    /// golden-section fallback.
    Auto,
    /// Damped fixed point only; fails rather than falling back.
    FixedPoint,
    /// Golden-section argmax polished by a root of dq/dt.
    GoldenSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub t_star: f64,
    pub q_star: f64,
    pub lag: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub method: PeakMethod,
    /// Peak of the arrival rate itself, λ(mode).
    pub arrival_peak: f64,
    pub iterations: usize,
    /// dq/dt at `t_star`.
    pub residual: f64,
}

/// dq/dt, through closed forms where the load has one.
pub fn load_slope(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<f64> {
    if let ArrivalModel::Gaussian(g) = a {
        let lam = g.rate_at(t);
        match s {
            ServiceModel::Exponential { mu } => return Ok(lam - mu * load_gauss_exp(g, *mu, t)),
            ServiceModel::Deterministic { delta } => return Ok(lam - g.rate_at(t - delta)),
            ServiceModel::Discrete { atoms } => {
                return Ok(lam - atoms.iter().map(|x| x.p * g.rate_at(t - x.delta)).sum::<f64>())
            }
            ServiceModel::HyperExponential { branches } => return Ok(hyperexp_slope(g, branches, t)),
            ServiceModel::Tabulated(_) => {}
        }
    }
    load_derivative(a, s, t)
}

fn hyperexp_slope(g: &GaussianRate, branches: &[Branch], t: f64) -> f64 {
    g.rate_at(t)
        - branches
            .iter()
            .map(|b| b.p * b.mu * load_gauss_exp(g, b.mu, t))
            .sum::<f64>()
}

/// Right end of the search bracket: mode + 4(E[S_e] + σ̂).
fn search_end(a: &ArrivalModel, s: &ServiceModel) -> f64 {
    let excess_mean = s.second_moment() / (2.0 * s.mean());
    a.mode_time() + 4.0 * (excess_mean + a.spread())
}

pub fn peak_time(a: &ArrivalModel, s: &ServiceModel) -> Result<PeakReport> {
    peak_time_with(a, s, PeakStrategy::Auto)
}

pub fn peak_time_with(a: &ArrivalModel, s: &ServiceModel, strategy: PeakStrategy) -> Result<PeakReport> {
    let lo = a.mode_time();
    let hi = search_end(a, s);

    let closed = match (a, s) {
        (ArrivalModel::Gaussian(g), ServiceModel::Exponential { mu }) => Some(exact_lag_gauss_exp(g, *mu)),
        (ArrivalModel::Gaussian(_), ServiceModel::Deterministic { delta }) => Some(lag_det(*delta)),
        _ => None,
    };

    let (t_star, method, iterations) = match (strategy, closed) {
        (PeakStrategy::Auto, Some(lag)) => (lo + lag, PeakMethod::ClosedForm, 0),
        (PeakStrategy::GoldenSection, _) => {
            let (t, n) = golden_peak(a, s, lo, hi)?;
            (t, PeakMethod::GoldenSection, n)
        }
        (PeakStrategy::FixedPoint, _) => {
            let (t, n) = fixed_point_peak(a, s, lo, hi)?;
            (t, PeakMethod::FixedPoint, n)
        }
        (PeakStrategy::Auto, None) => match fixed_point_peak(a, s, lo, hi) {
            Ok((t, n)) => (t, PeakMethod::FixedPoint, n),
            Err(e) if e.is_numeric() || matches!(e, Error::InvalidParameter(_)) => {
                log::debug!("fixed point unavailable ({e}); using golden-section search");
                let (t, n) = golden_peak(a, s, lo, hi)?;
                (t, PeakMethod::GoldenSection, n)
            }
            Err(e) => return Err(e),
        },
    };

    let q_star = load_at(a, s, t_star)?.0;
    let (lower_bound, upper_bound) = match a {
        ArrivalModel::Gaussian(g) => peak_time_bounds_at(g, s, t_star)?,
        ArrivalModel::Gamma(_) => (lo, hi),
    };
    Ok(PeakReport {
        t_star,
        q_star,
        lag: t_star - lo,
        lower_bound,
        upper_bound,
        method,
        arrival_peak: a.peak_rate_bound(),
        iterations,
        residual: load_slope(a, s, t_star)?,
    })
}

/// Right-hand side of the peak fixed point, t ↦ mode + E[S_e·w]/E[w].
fn fixed_point_map(a: &ArrivalModel, s: &ServiceModel, t: f64) -> Result<f64> {
    let law = s.excess();
    let breaks = integrand_breaks(a, t);
    let (num, den) = match a {
        ArrivalModel::Gaussian(g) => {
            let w = |u: f64| norm_pdf((t - g.tau() - u) / g.sigma());
            (law.expect(|u| u * w(u), &breaks)?, law.expect(w, &breaks)?)
        }
        ArrivalModel::Gamma(g) => {
            let w = gamma_weight(g);
            (
                law.expect(|u| u * w(t - u), &breaks)?,
                law.expect(|u| w(t - u), &breaks)?,
            )
        }
    };
    if !(den > 0.0) || !num.is_finite() {
        return Err(Error::NonConvergence {
            what: "peak fixed point",
            iterations: 0,
            last: t,
            residual: f64::NAN,
            lo: a.mode_time(),
            hi: t,
        });
    }
    Ok(a.mode_time() + num / den)
}

/// x ↦ x^{α−2}e^{−βx} on x > 0, scaled by its maximum so the ratio of
/// expectations never underflows.
fn gamma_weight(g: &GammaRate) -> impl Fn(f64) -> f64 {
    let (alpha, beta) = (g.alpha(), g.beta());
    let top = if alpha > 2.0 {
        let x = (alpha - 2.0) / beta;
        (alpha - 2.0) * x.ln() - beta * x
    } else {
        0.0
    };
    move |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let ln_w = if alpha == 2.0 {
            -beta * x
        } else {
            (alpha - 2.0) * x.ln() - beta * x
        };
        (ln_w - top).exp()
    }
}

fn fixed_point_peak(a: &ArrivalModel, s: &ServiceModel, lo: f64, hi: f64) -> Result<(f64, usize)> {
    if let ArrivalModel::Gamma(g) = a {
        if g.alpha() < 2.0 {
            return Err(Error::invalid("the Gamma peak fixed point needs alpha >= 2"));
        }
    }
    let mut t = lo;
    let mut prev_step: Option<f64> = None;
    for k in 1..=FIXED_POINT_STEPS {
        let step = DAMPING * (fixed_point_map(a, s, t)? - t);
        t = (t + step).clamp(lo, hi);
        // geometric tail of the remaining steps
        let remaining = match prev_step {
            Some(p) if p != 0.0 => {
                let r = (step / p).abs();
                if r < 1.0 {
                    step.abs() * r / (1.0 - r)
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        };
        if step.abs() <= 1e-14 * t.abs().max(1.0) || remaining <= FIXED_POINT_TOL {
            return Ok((t, k));
        }
        prev_step = Some(step);
    }
    Err(Error::NonConvergence {
        what: "peak fixed point",
        iterations: FIXED_POINT_STEPS,
        last: t,
        residual: prev_step.unwrap_or(f64::NAN).abs(),
        lo,
        hi,
    })
}

fn golden_peak(a: &ArrivalModel, s: &ServiceModel, lo: f64, hi: f64) -> Result<(f64, usize)> {
    let found = golden_section_max(
        |t| load_at(a, s, t).map(|(q, _)| q).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        1e-7 * (hi - lo).max(1.0),
        400,
    )?;
    let polished = polish_on_slope(|t| load_slope(a, s, t), found.x, lo, hi);
    Ok((polished.unwrap_or(found.x), found.iterations))
}

/// Root of a decreasing-through-zero slope near `x`, if a sign change can
/// be bracketed inside [lo, hi].
fn polish_on_slope<F: Fn(f64) -> Result<f64>>(slope: F, x: f64, lo: f64, hi: f64) -> Option<f64> {
    let mut delta = 1e-6 * (hi - lo).max(1.0);
    for _ in 0..30 {
        let (a, b) = ((x - delta).max(lo), (x + delta).min(hi));
        let (fa, fb) = (slope(a).ok()?, slope(b).ok()?);
        if fa >= 0.0 && fb <= 0.0 {
            return brent_root(|t| slope(t).unwrap_or(f64::NAN), a, b, ROOT_TOL, 200).ok();
        }
        if a == lo && b == hi {
            return None;
        }
        delta *= 4.0;
    }
    None
}

/// τ ≤ t* ≤ τ + E[S²]/(√(8π)·E[S]·E[φ((t* − τ − S_e)/σ)]), evaluated at a
/// converged peak time. The numerator bound is E[S_e·φ] ≤ E[S_e]/√(2π).
pub fn peak_time_bounds_at(g: &GaussianRate, s: &ServiceModel, t_star: f64) -> Result<(f64, f64)> {
    let a = ArrivalModel::Gaussian(*g);
    let breaks = integrand_breaks(&a, t_star);
    let e_phi = s
        .excess()
        .expect(|u| norm_pdf((t_star - g.tau() - u) / g.sigma()), &breaks)?;
    let offset = s.second_moment() / ((8.0 * std::f64::consts::PI).sqrt() * s.mean() * e_phi);
    Ok((g.tau(), g.tau() + offset))
}

/// Bounds on the Gaussian peak time, solving for t* first.
pub fn peak_time_bounds(g: &GaussianRate, s: &ServiceModel) -> Result<(f64, f64)> {
    let report = peak_time(&ArrivalModel::Gaussian(*g), s)?;
    Ok((report.lower_bound, report.upper_bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiValue {
    pub x: f64,
    pub psi_x: f64,
}

/// ψ(x): the y with φ(y)/Φ(y) = x. Newton on ln h(y) − ln x, whose
/// derivative is −(y + h(y)), kept inside the bracket [−x − 10, 10/x].
pub fn psi(x: f64) -> Result<PsiValue> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("psi needs a positive argument, got {x}")));
    }
    let target = x.ln();
    let g = |y: f64| ln_inv_mills(y) - target;
    let (mut lo, mut hi) = (-x - 10.0, 10.0 / x);
    let mut y = if x > 1.0 { -x + 1.0 / x } else { 0.0 }.clamp(lo, hi);
    for _ in 0..200 {
        let gy = g(y);
        if gy == 0.0 {
            break;
        }
        // g is decreasing
        if gy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y + gy / inv_mills_excess(y);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            y = next;
            break;
        }
        y = next;
    }
    Ok(PsiValue { x, psi_x: y })
}

/// ℓ = σ(μσ + ψ(μσ)). At the root μσ = h(ψ), so μσ + ψ = ψ + h(ψ), which is
/// evaluated without cancellation.
pub fn exact_lag_gauss_exp(g: &GaussianRate, mu: f64) -> f64 {
    let x = mu * g.sigma();
    let y = psi(x).expect("μσ > 0 for validated models").psi_x;
    g.sigma() * inv_mills_excess(y)
}

/// 1/μ − 1/(μ³σ² + μ) ≤ ℓ ≤ 1/μ.
pub fn lag_bounds_exp(mu: f64, sigma: f64) -> (f64, f64) {
    (1.0 / mu - 1.0 / (mu * mu * mu * sigma * sigma + mu), 1.0 / mu)
}

pub fn lag_det(delta: f64) -> f64 {
    0.5 * delta
}

/// Lag of Gaussian arrivals with hyper-exponential service: the root of
/// λ(t) − Σ p_j μ_j q_j(t) on [τ, τ + max 1/μ_j], which every branch's own
/// lag respects.
pub fn lag_hyperexp(g: &GaussianRate, branches: &[Branch]) -> Result<f64> {
    let longest = branches.iter().map(|b| 1.0 / b.mu).fold(0.0, f64::max);
    let tau = g.tau();
    let t = brent_root(
        |t| hyperexp_slope(g, branches, t),
        tau,
        tau + longest * (1.0 + 1e-9),
        ROOT_TOL,
        500,
    )?;
    Ok(t - tau)
}

/// Golden-section argmax of the hyper-exponential mixture load, used as an
/// independent check on [`lag_hyperexp`].
pub fn lag_hyperexp_argmax(g: &GaussianRate, branches: &[Branch]) -> Result<f64> {
    let longest = branches.iter().map(|b| 1.0 / b.mu).fold(0.0, f64::max);
    let tau = g.tau();
    let found = golden_section_max(|t| load_gauss_hyperexp(g, branches, t), tau, tau + longest, 1e-10, 400)?;
    Ok(found.x - tau)
}

/// The lag ratio Σ α_j E[(X/μ_j)φ_j] / Σ α_j E[φ_j] with excess weights
/// α_j ∝ p_j/μ_j. A lag is exact when this returns it unchanged.
pub fn hyperexp_lag_ratio(sigma: f64, branches: &[Branch], ell: f64) -> f64 {
    let weights = excess_mixture_weights(branches);
    let (mut num, mut den) = (0.0, 0.0);
    for (w, b) in weights.iter().zip(branches) {
        let (e1, e2) = stein_expectations(b.mu, sigma, ell);
        num += w * e2;
        den += w * e1;
    }
    num / den
}

/// (E[φ((ℓ − X/μ)/σ)], E[(X/μ)·φ((ℓ − X/μ)/σ)]) for X a unit exponential.
/// The first is μσ·exp(−μℓ + μ²σ²/2)·Φ(c) with c = ℓ/σ − μσ, formed in log
/// space; the second is the first times σ(c + φ(c)/Φ(c)).
pub fn stein_expectations(mu: f64, sigma: f64, ell: f64) -> (f64, f64) {
    let ms = mu * sigma;
    let c = ell / sigma - ms;
    let e1 = ((ms).ln() - mu * ell + 0.5 * ms * ms + ln_norm_cdf(c)).exp();
    let e2 = e1 * sigma * inv_mills_excess(c);
    (e1, e2)
}

/// Inverse Mills ratio, re-exported for reports that print ψ⁻¹.
pub fn psi_inverse(y: f64) -> f64 {
    inv_mills(y)
}

/// Peak-load ceiling λ*·E[S]/(σ√(2π)) for Gaussian arrivals.
pub fn gaussian_load_ceiling(g: &GaussianRate, mean_service: f64) -> f64 {
    g.lambda_star() * mean_service / (g.sigma() * SQRT_2PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_to_infinity, Tolerance};
    use proptest::prelude::*;

    fn gauss(l: f64, tau: f64, sigma: f64) -> ArrivalModel {
        ArrivalModel::gaussian(l, tau, sigma).unwrap()
    }

    fn exp(mu: f64) -> ServiceModel {
        ServiceModel::exponential(mu).unwrap()
    }

    #[test]
    fn table_peaks() {
        let r = peak_time(&gauss(100.0, 10.0, 2.0), &exp(1.0)).unwrap();
        assert!(
            (r.t_star - 10.86).abs() < 0.01 && (r.q_star - 18.20).abs() < 0.01,
            "{r:?}"
        );
        assert_eq!(r.method, PeakMethod::ClosedForm);
        let r = peak_time(&gauss(100.0, 20.0, 4.0), &exp(0.1)).unwrap();
        assert!(
            (r.t_star - 24.51).abs() < 0.01 && (r.q_star - 52.90).abs() < 0.02,
            "{r:?}"
        );
        let r = peak_time(&ArrivalModel::gamma(100.0, 10.0, 0.5).unwrap(), &exp(1.0)).unwrap();
        assert!(
            (r.t_star - 19.03).abs() < 0.01 && (r.q_star - 6.50).abs() < 0.01,
            "{r:?}"
        );
        assert!(r.lower_bound <= r.t_star && r.t_star <= r.upper_bound);
    }

    #[test]
    fn fixed_point_and_golden_agree() {
        let cases = [
            (gauss(100.0, 10.0, 2.0), exp(1.0)),
            (gauss(100.0, 10.0, 2.0), ServiceModel::deterministic(3.0).unwrap()),
            (
                gauss(50.0, 0.0, 1.5),
                ServiceModel::hyper_exponential([(0.5, 1.0), (0.5, 0.25)]).unwrap(),
            ),
            (
                gauss(80.0, 5.0, 3.0),
                ServiceModel::discrete([(0.3, 1.0), (0.7, 4.0)]).unwrap(),
            ),
            (ArrivalModel::gamma(100.0, 5.0, 0.5).unwrap(), exp(1.0)),
            (ArrivalModel::gamma(100.0, 10.0, 0.5).unwrap(), exp(0.1)),
        ];
        for (a, s) in &cases {
            let golden = peak_time_with(a, s, PeakStrategy::GoldenSection).unwrap();
            if let Ok(fp) = peak_time_with(a, s, PeakStrategy::FixedPoint) {
                assert!(
                    (fp.t_star - golden.t_star).abs() < 1e-6,
                    "{}: {} vs {}",
                    s.label(),
                    fp.t_star,
                    golden.t_star
                );
            }
            let auto = peak_time(a, s).unwrap();
            assert!((auto.t_star - golden.t_star).abs() < 1e-6);
            assert!(auto.lag >= 0.0);
        }
    }

    #[test]
    fn gamma_below_two_uses_search() {
        let a = ArrivalModel::gamma(100.0, 1.5, 0.5).unwrap();
        assert!(peak_time_with(&a, &exp(1.0), PeakStrategy::FixedPoint).is_err());
        let r = peak_time(&a, &exp(1.0)).unwrap();
        assert_eq!(r.method, PeakMethod::GoldenSection);
        let unit = ArrivalModel::gamma(100.0, 1.0, 1.0).unwrap();
        let r = peak_time(&unit, &exp(1.0)).unwrap();
        // λ = 100e^{−t}, q = 100·t·e^{−t} peaks at t = 1
        assert!((r.t_star - 1.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn deterministic_peak_is_half_window() {
        let a = gauss(100.0, 10.0, 2.0);
        let s = ServiceModel::deterministic(3.0).unwrap();
        let r = peak_time(&a, &s).unwrap();
        assert_eq!(r.t_star, 11.5);
        let g = peak_time_with(&a, &s, PeakStrategy::GoldenSection).unwrap();
        assert!((g.t_star - 11.5).abs() < 1e-6);
        assert!(r.lower_bound <= 11.5 && 11.5 <= r.upper_bound);
        assert_eq!(lag_det(2.0), 1.0);
        assert_eq!(lag_det(10.0), 5.0);
    }

    #[test]
    fn upper_bound_offset_shrinks_with_sigma() {
        let s = exp(0.5);
        let mut prev = f64::INFINITY;
        for sigma in [2.0, 8.0, 32.0, 128.0] {
            let g = GaussianRate::new(100.0, 0.0, sigma).unwrap();
            let (lo, hi) = peak_time_bounds(&g, &s).unwrap();
            assert_eq!(lo, 0.0);
            assert!(hi < prev, "sigma={sigma}: {hi}");
            prev = hi;
        }
    }

    #[test]
    fn psi_values() {
        let zero = psi(2.0 / SQRT_2PI).unwrap();
        assert!(zero.psi_x.abs() < 1e-14);
        let two = psi(2.0).unwrap().psi_x;
        assert!((2.0 * (2.0 + two) - 0.86).abs() < 0.01);
        for x in [0.1, 1.0, 10.0] {
            let y = psi(x).unwrap().psi_x;
            assert!(((inv_mills(y) - x) / x).abs() < 1e-12);
            let shifted = y + x;
            assert!(shifted >= 1.0 / x - 1.0 / (x * x * x + x) - 1e-12 && shifted <= 1.0 / x + 1e-12);
        }
        assert!(psi(0.0).is_err());
        assert!(psi(-1.0).is_err());
    }

    #[test]
    fn psi_extremes() {
        for x in [1e-6, 1e-3, 50.0, 1e3] {
            let y = psi(x).unwrap().psi_x;
            assert!(((inv_mills(y) - x) / x).abs() < 1e-12, "x={x}, y={y}");
        }
    }

    #[test]
    fn exact_lag_table_values() {
        let lag =
            |mu: f64, tau: f64, sigma: f64| exact_lag_gauss_exp(&GaussianRate::new(100.0, tau, sigma).unwrap(), mu);
        assert!((lag(1.0, 10.0, 2.0) - 0.86).abs() < 0.01);
        assert!((lag(0.5, 20.0, 4.0) - 1.71).abs() < 0.01);
        assert!((lag(0.1, 10.0, 2.0) - 2.93).abs() < 0.01);
        let (lo, hi) = lag_bounds_exp(1.0, 2.0);
        assert!((lo - 0.8).abs() < 1e-15 && hi == 1.0);
        let (lo, hi) = lag_bounds_exp(0.1, 2.0);
        assert!((lo - (10.0 - 1.0 / 0.104)).abs() < 1e-12 && (hi - 10.0).abs() < 1e-12);
        assert!((lag_bounds_exp(0.5, 1e4).0 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn exact_lag_matches_slope_root() {
        let g = GaussianRate::new(100.0, 10.0, 2.0).unwrap();
        for mu in [0.05, 0.3, 1.0, 4.0] {
            let a = ArrivalModel::Gaussian(g);
            let s = exp(mu);
            let numeric = peak_time_with(&a, &s, PeakStrategy::GoldenSection).unwrap().lag;
            assert!((numeric - exact_lag_gauss_exp(&g, mu)).abs() < 1e-6, "mu={mu}");
        }
    }

    #[test]
    fn lag_grows_with_mean_service() {
        let g = GaussianRate::new(1.0, 0.0, 3.0).unwrap();
        let mut prev = 0.0;
        for k in 1..40 {
            let mu = 5.0 / k as f64;
            let lag = exact_lag_gauss_exp(&g, mu);
            assert!(lag > prev);
            prev = lag;
        }
    }

    #[test]
    fn hyperexp_lag() {
        let g = GaussianRate::new(100.0, 10.0, 2.0).unwrap();
        let single = [Branch { p: 1.0, mu: 0.7 }];
        assert!((lag_hyperexp(&g, &single).unwrap() - exact_lag_gauss_exp(&g, 0.7)).abs() < 1e-10);
        let equal = [Branch { p: 0.4, mu: 0.7 }, Branch { p: 0.6, mu: 0.7 }];
        assert!((lag_hyperexp(&g, &equal).unwrap() - exact_lag_gauss_exp(&g, 0.7)).abs() < 1e-10);

        let mixed = [Branch { p: 0.5, mu: 1.0 }, Branch { p: 0.5, mu: 0.25 }];
        let root = lag_hyperexp(&g, &mixed).unwrap();
        let argmax = lag_hyperexp_argmax(&g, &mixed).unwrap();
        assert!((root - argmax).abs() < 1e-6, "{root} vs {argmax}");
        assert!((hyperexp_lag_ratio(2.0, &mixed, root) - root).abs() < 1e-9);
        let generic = peak_time_with(
            &ArrivalModel::Gaussian(g),
            &ServiceModel::HyperExponential {
                branches: mixed.to_vec(),
            },
            PeakStrategy::GoldenSection,
        )
        .unwrap();
        assert!((generic.lag - root).abs() < 1e-8);
    }

    fn stein_by_quadrature(mu: f64, sigma: f64, ell: f64) -> (f64, f64) {
        let w = |x: f64| (-x).exp() * norm_pdf((ell - x / mu) / sigma);
        let centre = mu * ell;
        let breaks: Vec<f64> = [-8.0, -4.0, -1.0, 0.0, 1.0, 4.0, 8.0]
            .iter()
            .map(|k| centre + k * mu * sigma)
            .collect();
        let tol = Tolerance::default();
        let e1 = integrate_to_infinity(w, 0.0, 1.0, &breaks, tol).unwrap();
        let e2 = integrate_to_infinity(|x| x / mu * w(x), 0.0, 1.0, &breaks, tol).unwrap();
        (e1, e2)
    }

    #[test]
    fn stein_limits_and_fixed_point() {
        let (e1, e2) = stein_expectations(1.0, 2.0, -200.0);
        assert!(e1 < 1e-300 && e2 < 1e-300);
        let g = GaussianRate::new(1.0, 0.0, 2.0).unwrap();
        let ell = exact_lag_gauss_exp(&g, 0.3);
        let (e1, e2) = stein_expectations(0.3, 2.0, ell);
        assert!((e2 / e1 - ell).abs() < 1e-12);
        // no overflow at μσ = 50
        let (e1, e2) = stein_expectations(25.0, 2.0, 0.04);
        assert!(e1.is_finite() && e2.is_finite() && e1 > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stein_matches_quadrature(mu in 0.05f64..5.0, sigma in 0.2f64..6.0, ell in -5.0f64..15.0) {
            let (a1, a2) = stein_expectations(mu, sigma, ell);
            let (b1, b2) = stein_by_quadrature(mu, sigma, ell);
            prop_assert!((a1 - b1).abs() < 1e-9, "{a1} vs {b1}");
            prop_assert!((a2 - b2).abs() < 1e-9, "{a2} vs {b2}");
        }

        #[test]
        fn psi_is_decreasing(x in 0.01f64..30.0, bump in 1e-3f64..1.0) {
            prop_assert!(psi(x + bump).unwrap().psi_x < psi(x).unwrap().psi_x);
        }

        #[test]
        fn peak_follows_arrival_mode(sigma in 0.5f64..6.0, mean in 0.2f64..12.0) {
            let a = gauss(100.0, 10.0, sigma);
            for s in [exp(1.0 / mean), ServiceModel::deterministic(mean).unwrap()] {
                let r = peak_time(&a, &s).unwrap();
                prop_assert!(r.t_star >= a.mode_time());
                prop_assert!(r.t_star <= r.upper_bound + 1e-9);
            }
        }
    }
}
