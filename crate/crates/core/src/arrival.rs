//! Unimodal arrival-rate families: a scaled Gaussian density and a scaled
//! Gamma density, each carrying λ* expected arrivals in total.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::special::{ln_gamma, norm_cdf, norm_pdf, norm_sf, INV_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianRate {
    lambda_star: f64,
    tau: f64,
    sigma: f64,
}

impl GaussianRate {
    pub fn new(lambda_star: f64, tau: f64, sigma: f64) -> Result<Self> {
        if !(lambda_star > 0.0 && lambda_star.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_star must be positive, got {lambda_star}"
            )));
        }
        if !tau.is_finite() {
            return Err(Error::invalid("tau must be finite"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianRate {
            lambda_star,
            tau,
            sigma,
        })
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.lambda_star / self.sigma * norm_pdf((t - self.tau) / self.sigma)
    }

    /// λ*/(σ√(2π)), attained at t = τ.
    pub fn peak_rate_bound(&self) -> f64 {
        self.lambda_star * INV_SQRT_2PI / self.sigma
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        GaussianRate::new(self.lambda_star, self.tau, sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRate {
    lambda_star: f64,
    alpha: f64,
    beta: f64,
}

impl GammaRate {
    /// Shape `alpha` must be at least 1 so the rate stays bounded; `beta`
    /// is a rate (inverse time).
    pub fn new(lambda_star: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(lambda_star > 0.0 && lambda_star.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda_star must be positive, got {lambda_star}"
            )));
        }
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma shape must be >= 1 for a bounded rate, got {alpha}"
            )));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("gamma rate beta must be positive, got {beta}")));
        }
        Ok(GammaRate {
            lambda_star,
            alpha,
            beta,
        })
    }

    pub fn lambda_star(&self) -> f64 {
        self.lambda_star
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn ln_norm(&self) -> f64 {
        self.lambda_star.ln() + self.alpha * self.beta.ln() - ln_gamma(self.alpha)
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if self.alpha == 1.0 {
            return self.lambda_star * self.beta * (-self.beta * t).exp();
        }
        if t == 0.0 {
            return 0.0;
        }
        (self.ln_norm() + (self.alpha - 1.0) * t.ln() - self.beta * t).exp()
    }

    /// λ*β(α−1)^{α−1}e^{−(α−1)}/Γ(α), the value at the mode (α−1)/β.
    pub fn peak_rate_bound(&self) -> f64 {
        let k = self.alpha - 1.0;
        let ln_pow = if k == 0.0 { 0.0 } else { k * k.ln() };
        (self.lambda_star.ln() + self.beta.ln() + ln_pow - k - ln_gamma(self.alpha)).exp()
    }

    pub fn mode(&self) -> f64 {
        (self.alpha - 1.0) / self.beta
    }

    /// Standard deviation of the normalized rate, √α/β.
    pub fn std_dev(&self) -> f64 {
        self.alpha.sqrt() / self.beta
    }

    pub fn mean_time(&self) -> f64 {
        self.alpha / self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ArrivalModel {
    Gaussian(GaussianRate),
    Gamma(GammaRate),
}

impl From<GaussianRate> for ArrivalModel {
    fn from(g: GaussianRate) -> Self {
        ArrivalModel::Gaussian(g)
    }
}

impl From<GammaRate> for ArrivalModel {
    fn from(g: GammaRate) -> Self {
        ArrivalModel::Gamma(g)
    }
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum RawArrival {
    Gaussian { lambda_star: f64, tau: f64, sigma: f64 },
    Gamma { lambda_star: f64, alpha: f64, beta: f64 },
}

impl<'de> Deserialize<'de> for ArrivalModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawArrival::deserialize(d)?;
        let model = match raw {
            RawArrival::Gaussian {
                lambda_star,
                tau,
                sigma,
            } => GaussianRate::new(lambda_star, tau, sigma).map(ArrivalModel::Gaussian),
            RawArrival::Gamma {
                lambda_star,
                alpha,
                beta,
            } => GammaRate::new(lambda_star, alpha, beta).map(ArrivalModel::Gamma),
        };
        model.map_err(serde::de::Error::custom)
    }
}

impl ArrivalModel {
    pub fn gaussian(lambda_star: f64, tau: f64, sigma: f64) -> Result<Self> {
        GaussianRate::new(lambda_star, tau, sigma).map(Into::into)
    }

    pub fn gamma(lambda_star: f64, alpha: f64, beta: f64) -> Result<Self> {
        GammaRate::new(lambda_star, alpha, beta).map(Into::into)
    }

    /// λ(t); zero before the origin for the Gamma family.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => g.rate_at(t),
            ArrivalModel::Gamma(g) => g.rate_at(t),
        }
    }

    /// Argmax of the rate: τ, or (α−1)/β.
    pub fn mode_time(&self) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => g.tau,
            ArrivalModel::Gamma(g) => g.mode(),
        }
    }

    pub fn peak_rate_bound(&self) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => g.peak_rate_bound(),
            ArrivalModel::Gamma(g) => g.peak_rate_bound(),
        }
    }

    pub fn lambda_star(&self) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => g.lambda_star,
            ArrivalModel::Gamma(g) => g.lambda_star,
        }
    }

    /// Spread of the normalized rate: σ, or √α/β.
    pub fn spread(&self) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => g.sigma,
            ArrivalModel::Gamma(g) => g.std_dev(),
        }
    }

    /// Left end of the support, if any.
    pub fn support_start(&self) -> Option<f64> {
        match self {
            ArrivalModel::Gaussian(_) => None,
            ArrivalModel::Gamma(_) => Some(0.0),
        }
    }

    /// Expected arrivals in (t0, t1).
    pub fn mass_between(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        match self {
            ArrivalModel::Gaussian(g) => {
                let a = (t0 - g.tau) / g.sigma;
                let b = (t1 - g.tau) / g.sigma;
                g.lambda_star * crate::special::norm_interval(a, b)
            }
            ArrivalModel::Gamma(g) => {
                let lo = gamma_lr(g.alpha, g.beta * t0.max(0.0));
                let hi = gamma_lr(g.alpha, g.beta * t1.max(0.0));
                g.lambda_star * (hi - lo)
            }
        }
    }

    /// Expected arrivals falling outside [t0, t1].
    pub fn mass_outside(&self, t0: f64, t1: f64) -> f64 {
        match self {
            ArrivalModel::Gaussian(g) => {
                let left = norm_cdf((t0 - g.tau) / g.sigma);
                let right = norm_sf((t1 - g.tau) / g.sigma);
                g.lambda_star * (left + right)
            }
            ArrivalModel::Gamma(g) => {
                let left = if t0 > 0.0 { gamma_lr(g.alpha, g.beta * t0) } else { 0.0 };
                let right = if t1 > 0.0 { gamma_ur(g.alpha, g.beta * t1) } else { 1.0 };
                g.lambda_star * (left + right)
            }
        }
    }

    /// Same shape with λ* multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        match self {
            ArrivalModel::Gaussian(g) => ArrivalModel::gaussian(g.lambda_star * factor, g.tau, g.sigma),
            ArrivalModel::Gamma(g) => ArrivalModel::gamma(g.lambda_star * factor, g.alpha, g.beta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_pieces, integrate_to_infinity, Tolerance};

    fn table_gaussian() -> ArrivalModel {
        ArrivalModel::gaussian(100.0, 10.0, 2.0).unwrap()
    }

    #[test]
    fn gaussian_peak_matches_table_value() {
        assert!((table_gaussian().rate_at(10.0) - 19.95).abs() < 0.005);
    }

    #[test]
    fn gamma_rate_at_mode_matches_table_value() {
        let g = ArrivalModel::gamma(100.0, 5.0, 0.5).unwrap();
        assert!((g.rate_at(8.0) - 9.77).abs() < 0.005);
        assert_eq!(g.mode_time(), 8.0);
        assert_eq!(g.rate_at(-1.0), 0.0);
        assert_eq!(g.rate_at(0.0), 0.0);
    }

    #[test]
    fn tails_vanish() {
        let g = table_gaussian();
        assert!(g.rate_at(1e3) == 0.0 && g.rate_at(-1e3) == 0.0);
    }

    #[test]
    fn modes() {
        assert_eq!(ArrivalModel::gaussian(100.0, 20.0, 4.0).unwrap().mode_time(), 20.0);
        assert_eq!(ArrivalModel::gamma(1.0, 1.0, 1.0).unwrap().mode_time(), 0.0);
    }

    #[test]
    fn peak_bounds() {
        // 100/(2√(2π)) = 19.947114020071634
        let b = table_gaussian().peak_rate_bound();
        assert!((b - 19.947_114_020_071_634).abs() < 1e-12);
        let flat = ArrivalModel::gaussian(100.0, 20.0, 4.0).unwrap();
        assert!((flat.peak_rate_bound() - 9.97).abs() < 0.005);
        // 100·0.5·4⁴e⁻⁴/4! = 1600·e⁻⁴/24... evaluated directly
        let direct = 100.0 * 0.5 * 4f64.powi(4) * (-4f64).exp() / 24.0;
        let g = ArrivalModel::gamma(100.0, 5.0, 0.5).unwrap();
        assert!((g.peak_rate_bound() - direct).abs() < 1e-12);
        assert!((direct - 9.768).abs() < 5e-4);
        assert!((g.peak_rate_bound() - g.rate_at(g.mode_time())).abs() < 1e-12);
    }

    #[test]
    fn exponential_shaped_gamma_peaks_at_origin() {
        let g = ArrivalModel::gamma(10.0, 1.0, 2.0).unwrap();
        assert_eq!(g.rate_at(0.0), 20.0);
        assert!((g.peak_rate_bound() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn shape_below_one_rejected() {
        assert!(ArrivalModel::gamma(10.0, 0.5, 1.0).is_err());
        assert!(ArrivalModel::gaussian(10.0, 0.0, 0.0).is_err());
        assert!(ArrivalModel::gaussian(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn mass_integrates_to_lambda_star() {
        let g = ArrivalModel::gaussian(314_101.0, 23.0, 8.28).unwrap();
        let pts: Vec<f64> = (-12..=12).map(|k| 23.0 + 8.28 * k as f64).collect();
        let m = integrate_pieces(|t| g.rate_at(t), &pts, Tolerance::default()).unwrap();
        assert!((m / 314_101.0 - 1.0).abs() < 1e-8);

        let h = ArrivalModel::gamma(1_768_739.0, 17.0, 0.2).unwrap();
        let m = integrate_to_infinity(|t| h.rate_at(t), 0.0, 80.0, &[40.0, 80.0, 120.0], Tolerance::default()).unwrap();
        assert!((m / 1_768_739.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn doubling_sigma_halves_bound() {
        for &s in &[0.3, 1.0, 2.0, 7.5] {
            let a = ArrivalModel::gaussian(123.0, 1.0, s).unwrap().peak_rate_bound();
            let b = ArrivalModel::gaussian(123.0, 1.0, 2.0 * s).unwrap().peak_rate_bound();
            assert!((a - 2.0 * b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn mass_outside_complements_between() {
        let g = ArrivalModel::gamma(50.0, 3.0, 0.7).unwrap();
        let inside = g.mass_between(1.0, 9.0);
        let outside = g.mass_outside(1.0, 9.0);
        assert!((inside + outside - 50.0).abs() < 1e-10);
    }

    #[test]
    fn serde_validates() {
        let ok: ArrivalModel =
            serde_json::from_str(r#"{"family":"gamma","lambda_star":100,"alpha":5,"beta":0.5}"#).unwrap();
        assert_eq!(ok.mode_time(), 8.0);
        let bad = serde_json::from_str::<ArrivalModel>(r#"{"family":"gaussian","lambda_star":1,"tau":0,"sigma":-1}"#);
        assert!(bad.is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mode_dominates(
                lambda in 1.0f64..1e4,
                loc in -50.0f64..50.0,
                spread in 0.1f64..20.0,
                alpha in 1.0f64..20.0,
                beta in 0.05f64..3.0,
                u in proptest::collection::vec(-10.0f64..10.0, 50),
            ) {
                let models = [
                    ArrivalModel::gaussian(lambda, loc, spread).unwrap(),
                    ArrivalModel::gamma(lambda, alpha, beta).unwrap(),
                ];
                for m in models {
                    let peak = m.rate_at(m.mode_time());
                    for &k in &u {
                        let t = m.mode_time() + k * m.spread();
                        prop_assert!(m.rate_at(t) <= peak * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}
