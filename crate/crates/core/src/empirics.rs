//! Daily count series: reading, least-squares fits of the two rate
//! families, and the lag between two cumulative curves by quantile.

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, SimplexOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailySeries {
    pub label: String,
    /// Day indices, strictly increasing.
    pub days: Vec<i64>,
    pub counts: Vec<f64>,
    /// Calendar date of day 0 when the series was read from ISO dates.
    pub origin: Option<NaiveDate>,
}

impl DailySeries {
    pub fn new(label: impl Into<String>, days: Vec<i64>, counts: Vec<f64>) -> Result<Self> {
        if days.is_empty() || days.len() != counts.len() {
            return Err(Error::invalid(
                "a daily series needs matching, nonempty days and counts",
            ));
        }
        if days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("series days must be strictly increasing"));
        }
        if counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid("series counts must be finite and nonnegative"));
        }
        Ok(DailySeries {
            label: label.into(),
            days,
            counts,
            origin: None,
        })
    }

    /// Consecutive days starting at `start`.
    pub fn from_counts(label: impl Into<String>, start: i64, counts: Vec<f64>) -> Result<Self> {
        let days = (start..start + counts.len() as i64).collect();
        DailySeries::new(label, days, counts)
    }

    /// Reads `date,count` rows. Dates are ISO `YYYY-MM-DD` (mapped to days
    /// since the first row) or integer day indices (kept as given).
    /// Negative counts are clamped to zero with a warning.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, label: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse(format!("missing `{name}` column")))
        };
        let (date_col, count_col) = (col("date")?, col("count")?);

        let mut origin: Option<NaiveDate> = None;
        let mut uses_dates: Option<bool> = None;
        let (mut days, mut counts) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let row = line + 2;
            let raw_date = rec.get(date_col).unwrap_or("");
            let raw_count = rec.get(count_col).unwrap_or("");
            let day = match (raw_date.parse::<i64>(), uses_dates) {
                (Ok(d), None | Some(false)) => {
                    uses_dates = Some(false);
                    d
                }
                (Err(_), None | Some(true)) => {
                    let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
                        .map_err(|_| Error::Parse(format!("row {row}: bad date `{raw_date}`")))?;
                    uses_dates = Some(true);
                    let first = *origin.get_or_insert(date);
                    (date - first).num_days()
                }
                _ => return Err(Error::Parse(format!("row {row}: mixes ISO dates and day indices"))),
            };
            let mut count: f64 = raw_count
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad count `{raw_count}`")))?;
            if !count.is_finite() {
                return Err(Error::Parse(format!("row {row}: count is not finite")));
            }
            if count < 0.0 {
                log::warn!("row {row}: negative count {count} clamped to 0");
                count = 0.0;
            }
            days.push(day);
            counts.push(count);
        }
        let mut series = DailySeries::new(label, days, counts)?;
        series.origin = origin;
        Ok(series)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
        DailySeries::from_csv_reader(file, label)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn shifted(&self, by: i64) -> DailySeries {
        DailySeries {
            days: self.days.iter().map(|d| d + by).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, factor: f64) -> DailySeries {
        DailySeries {
            counts: self.counts.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }
}

/// Counts divided by their maximum.
pub fn normalize_peak(series: &DailySeries) -> Result<DailySeries> {
    let max = series.counts.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::invalid("cannot normalize a series whose maximum is zero"));
    }
    Ok(DailySeries {
        counts: series.counts.iter().map(|c| c / max).collect(),
        ..series.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ArrivalModel,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Shape of the rate with λ* = 1 for the free parameters `theta`.
fn unit_model(family: Family, theta: &[f64]) -> Option<ArrivalModel> {
    match family {
        Family::Gaussian => ArrivalModel::gaussian(1.0, theta[0], theta[1].exp()).ok(),
        Family::Gamma => ArrivalModel::gamma(1.0, 1.0 + theta[0].exp(), theta[1].exp()).ok(),
    }
}

/// Least-squares λ* for a fixed shape and the resulting SSE. λ* enters
/// linearly, so it is solved exactly rather than searched.
fn profile(series: &DailySeries, unit: &ArrivalModel) -> (f64, f64) {
    let (mut cf, mut ff, mut cc) = (0.0, 0.0, 0.0);
    for (&d, &c) in series.days.iter().zip(&series.counts) {
        let f = unit.rate_at(d as f64 + 0.5);
        cf += c * f;
        ff += f * f;
        cc += c * c;
    }
    if !(ff > 0.0) {
        return (0.0, cc);
    }
    let lambda = (cf / ff).max(0.0);
    let sse = (cc - 2.0 * lambda * cf + lambda * lambda * ff).max(0.0);
    (lambda, sse)
}

/// Count-weighted mean and variance of the day midpoints.
fn weighted_moments(series: &DailySeries) -> (f64, f64) {
    let total = series.total();
    let mean = series
        .days
        .iter()
        .zip(&series.counts)
        .map(|(&d, &c)| c * (d as f64 + 0.5))
        .sum::<f64>()
        / total;
    let var = series
        .days
        .iter()
        .zip(&series.counts)
        .map(|(&d, &c)| c * (d as f64 + 0.5 - mean).powi(2))
        .sum::<f64>()
        / total;
    (mean, var)
}

fn starts(series: &DailySeries, family: Family) -> Vec<[f64; 2]> {
    let peak_day = series
        .days
        .iter()
        .zip(&series.counts)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&d, _)| d as f64 + 0.5)
        .expect("nonempty");
    let (mean, var) = weighted_moments(series);
    let jitter = [0.7, 1.0, 1.3];
    let mut out = Vec::with_capacity(9);
    match family {
        Family::Gaussian => {
            let sigma = var.sqrt().max(0.5);
            for a in jitter {
                for b in jitter {
                    // the centre moves by ±0.3σ so the starts shift with the data
                    out.push([peak_day + (a - 1.0) * sigma, (b * sigma).ln()]);
                }
            }
        }
        Family::Gamma => {
            let (mean, var) = (mean.max(0.5), var.max(0.25));
            let alpha = (mean * mean / var).max(1.0 + 1e-3);
            let beta = mean / var;
            for a in jitter {
                for b in jitter {
                    out.push([((a * alpha - 1.0).max(1e-3)).ln(), (b * beta).ln()]);
                }
            }
        }
    }
    out
}

/// Least-squares fit of λ(d + 0.5) to the count of day d, best of nine
/// starts. Non-convergence is flagged on the result, not raised.
pub fn fit(series: &DailySeries, family: Family) -> Result<FitResult> {
    if series.counts.len() < 5 {
        return Err(Error::invalid("fitting needs at least 5 daily counts"));
    }
    let scale = series.counts.iter().map(|c| c * c).sum::<f64>();
    if !(series.total() > 0.0) {
        return Err(Error::invalid("cannot fit a series with zero total count"));
    }
    let objective = |theta: &[f64]| match unit_model(family, theta) {
        Some(unit) => profile(series, &unit).1 / scale,
        None => f64::INFINITY,
    };
    let opts = SimplexOptions {
        ftol: 1e-15,
        xtol: 1e-10,
        max_iter: 20_000,
    };
    let runs: Vec<_> = starts(series, family)
        .into_par_iter()
        .map(|x0| {
            let step = [0.1 * x0[0].abs().max(1.0), 0.1];
            let first = nelder_mead(objective, &x0, &step, opts);
            // restart from the optimum to shake off a collapsed simplex
            let second = nelder_mead(objective, &first.x, &[0.01 * first.x[0].abs().max(1.0), 0.01], opts);
            let iterations = first.iterations + second.iterations;
            (second, iterations)
        })
        .collect();
    let (best, iterations) = runs
        .into_iter()
        .reduce(|a, b| if b.0.value < a.0.value { b } else { a })
        .expect("nine starts");
    let unit = unit_model(family, &best.x).ok_or_else(|| Error::invalid("fit left the parameter domain"))?;
    let (lambda, sse) = profile(series, &unit);
    let model = unit
        .scaled(lambda)
        .map_err(|_| Error::invalid("fitted total arrivals is zero"))?;
    Ok(FitResult {
        model,
        sse,
        iterations,
        converged: best.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagTable {
    pub quantiles: Vec<f64>,
    pub lags: Vec<i64>,
}

impl LagTable {
    /// `quantile,lag_days` CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(format!("writing lag table: {e}"));
        w.write_record(["quantile", "lag_days"]).map_err(err)?;
        for (q, l) in self.quantiles.iter().zip(&self.lags) {
            w.write_record([crate::format::sig(*q), l.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(format!("writing lag table: {e}")))
    }
}

/// 0.1, 0.2, …, 0.9.
pub fn default_quantiles() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// First day on which the cumulative share reaches `q`. A relative slack of
/// 1e-12 keeps exact ties (a cdf landing on q) stable under rescaling.
fn first_crossing(series: &DailySeries, total: f64, q: f64) -> i64 {
    let mut cum = 0.0;
    for (&d, &c) in series.days.iter().zip(&series.counts) {
        cum += c;
        if cum / total >= q - 1e-12 {
            return d;
        }
    }
    *series.days.last().expect("nonempty")
}

/// Days between the arrival and death cdfs reaching each quantile.
/// Series read from ISO dates are aligned on the calendar.
pub fn cdf_lag_table(arrivals: &DailySeries, deaths: &DailySeries, quantiles: &[f64]) -> Result<LagTable> {
    let (ta, td) = (arrivals.total(), deaths.total());
    if !(ta > 0.0 && td > 0.0) {
        return Err(Error::invalid("both series need a positive total"));
    }
    if quantiles.windows(2).any(|w| w[1] <= w[0]) || quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
        return Err(Error::invalid("quantiles must be strictly increasing inside (0, 1)"));
    }
    let offset = match (arrivals.origin, deaths.origin) {
        (Some(a), Some(d)) => (d - a).num_days(),
        _ => 0,
    };
    let lags = quantiles
        .iter()
        .map(|&q| first_crossing(deaths, td, q) + offset - first_crossing(arrivals, ta, q))
        .collect();
    Ok(LagTable {
        quantiles: quantiles.to_vec(),
        lags,
    })
}
