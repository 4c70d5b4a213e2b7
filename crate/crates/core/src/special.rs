//! Normal-distribution helpers evaluated without catastrophic cancellation
//! or overflow in the far tails.
//!
//! `erfc` and `lgamma` come from `libm`; everything built on top of them
//! (log-cdf, Mills-ratio forms) lives here.

use libm::erfc;

/// ln Γ(x) for x > 0.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the left tail switches to the continued fraction.
const CF_SWITCH: f64 = -5.0;
const CF_TERMS: usize = 400;

/// Standard normal density φ(x).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal cdf Φ(x).
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate for large positive x.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Φ(b) − Φ(a) for a ≤ b, subtracting upper tails when both arguments sit in
/// the right tail.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        norm_sf(a) - norm_sf(b)
    } else {
        norm_cdf(b) - norm_cdf(a)
    }
}

/// Tail of the Laplace continued fraction for the Mills ratio at z ≥ 0:
/// returns K with Φ(−z)/φ(z) = 1/(z + K).
fn mills_tail(z: f64) -> f64 {
    let mut t = 0.0;
    for k in (1..=CF_TERMS).rev() {
        t = k as f64 / (z + t);
    }
    t
}

/// ln Φ(x), finite for every finite x.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x < CF_SWITCH {
        let z = -x;
        ln_norm_pdf(x) - (z + mills_tail(z)).ln()
    } else if x > 0.0 {
        (-norm_sf(x)).ln_1p()
    } else {
        norm_cdf(x).ln()
    }
}

/// Inverse Mills ratio h(x) = φ(x)/Φ(x).
pub fn inv_mills(x: f64) -> f64 {
    if x < CF_SWITCH {
        let z = -x;
        z + mills_tail(z)
    } else {
        (ln_norm_pdf(x) - ln_norm_cdf(x)).exp()
    }
}

/// ln(φ(x)/Φ(x)), without forming the two large logs in the left tail.
pub fn ln_inv_mills(x: f64) -> f64 {
    if x < CF_SWITCH {
        let z = -x;
        (z + mills_tail(z)).ln()
    } else {
        ln_norm_pdf(x) - ln_norm_cdf(x)
    }
}

/// x + φ(x)/Φ(x), which is −E[Z | Z < x] shifted by x and stays positive.
/// The left tail uses the continued fraction directly, so no cancellation.
pub fn inv_mills_excess(x: f64) -> f64 {
    if x < CF_SWITCH {
        mills_tail(-x)
    } else {
        x + inv_mills(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        // Φ(−10) = 7.6198530241605269e-24
        assert!((norm_cdf(-10.0) / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn continued_fraction_matches_direct_at_switch() {
        for &x in &[-5.0, -5.5, -6.0, -8.0] {
            let direct = norm_cdf(x).ln();
            let cf = ln_norm_pdf(x) - (-x + mills_tail(-x)).ln();
            assert!((direct - cf).abs() < 1e-13, "x={x}: {direct} vs {cf}");
        }
        // continuity across the switch point
        let below = ln_norm_cdf(CF_SWITCH - 1e-12);
        let above = ln_norm_cdf(CF_SWITCH + 1e-12);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn ln_cdf_far_tail_is_asymptotic() {
        // ln Φ(−x) ≈ −x²/2 − ln x − ln√(2π) − 1/x² for large x
        let x = 200.0_f64;
        let approx = -0.5 * x * x - x.ln() - LN_SQRT_2PI - 1.0 / (x * x);
        assert!((ln_norm_cdf(-x) - approx).abs() < 1e-8);
        assert!(ln_norm_cdf(40.0).abs() < 1e-300);
    }

    #[test]
    fn inverse_mills_at_zero() {
        assert!((inv_mills(0.0) - 2.0 * INV_SQRT_2PI).abs() < 1e-15);
    }

    #[test]
    fn excess_is_positive_and_smooth() {
        // derivative is Var(Z | Z < x) > 0, so strictly increasing
        let mut prev = 0.0;
        let mut x = -60.0;
        while x < 10.0 {
            let v = inv_mills_excess(x);
            assert!(v > prev, "x={x}");
            prev = v;
            x += 0.37;
        }
        let z = 1000.0;
        assert!((inv_mills_excess(-z) * z - 1.0).abs() < 1e-5);
    }

    #[test]
    fn interval_right_tail() {
        let v = norm_interval(9.0, 10.0);
        let expected = norm_sf(9.0) - norm_sf(10.0);
        assert!(v > 0.0);
        assert!((v - expected).abs() < 1e-30);
        assert!((norm_interval(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_integers() {
        assert!((ln_gamma(5.0) - 24.0_f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(1.0)).abs() < 1e-14);
    }
}
