//! Number formatting shared by every CSV and JSON writer.

/// Significant digits carried by all printed floats.
pub const SIG_DIGITS: usize = 12;

/// `x` with [`SIG_DIGITS`] significant digits, fixed notation for
/// moderate magnitudes and scientific otherwise.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (SIG_DIGITS as i32 - 1 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new leading digit (9.99… → 10.0…)
        if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > SIG_DIGITS && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.prec$e}", prec = SIG_DIGITS - 1)
    }
}

/// `x` rounded to [`SIG_DIGITS`] significant digits, as a number. JSON
/// output goes through this so it carries the same digits as CSV.
pub fn round_sig(x: f64) -> f64 {
    sig(x).parse().unwrap_or(x)
}

/// Fixed two-decimal rendering for side-by-side table comparison.
pub fn two_dp(x: f64) -> String {
    format!("{x:.2}")
}
