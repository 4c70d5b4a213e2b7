//! Monte-Carlo oracle for the Mt/G/∞ queue: arrivals by thinning a
//! constant-rate Poisson stream, one service draw per arrival, and the
//! number in system recorded at fixed observation times.
//!
//! Replication r draws from ChaCha8 seeded with `seed` on stream r, and all
//! accumulators are integers, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::load::PoissonMarginal;
use crate::service::ServiceModel;

const CHUNK: u64 = 512;
const TRUNCATION_WARN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub arrival: ArrivalModel,
    pub service: ServiceModel,
    pub horizon: (f64, f64),
    pub grid: Vec<f64>,
    pub replications: u64,
    pub seed: u64,
    /// Multiplier on λ(t); 1 simulates the model as given.
    pub arrival_scale: f64,
}

impl SimConfig {
    pub fn new(
        arrival: ArrivalModel,
        service: ServiceModel,
        horizon: (f64, f64),
        grid: Vec<f64>,
        replications: u64,
        seed: u64,
    ) -> Self {
        SimConfig {
            arrival,
            service,
            horizon,
            grid,
            replications,
            seed,
            arrival_scale: 1.0,
        }
    }

    /// Checks the configuration and returns any warnings about the horizon.
    pub fn validate(&self) -> Result<Vec<String>> {
        let (t0, t1) = self.horizon;
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::invalid(format!(
                "horizon must satisfy t0 < t1, got ({t0}, {t1})"
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::invalid("observation grid is empty"));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("observation grid must be strictly increasing"));
        }
        if self.grid[0] < t0 || self.grid[self.grid.len() - 1] > t1 {
            return Err(Error::invalid("observation grid must lie inside the horizon"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        if !(self.arrival_scale >= 0.0 && self.arrival_scale.is_finite()) {
            return Err(Error::invalid("arrival scale must be nonnegative"));
        }
        let mut warnings = Vec::new();
        let a = &self.arrival;
        let reach = 8.0 * a.spread();
        let left_needed = match a.support_start() {
            Some(origin) => (a.mode_time() - reach).max(origin),
            None => a.mode_time() - reach,
        };
        if t0 > left_needed || t1 < a.mode_time() + reach {
            warnings.push(format!(
                "horizon [{t0}, {t1}] does not cover 8 spreads on each side of the rate mode {}",
                a.mode_time()
            ));
        }
        let lost = a.mass_outside(t0, t1);
        if lost > TRUNCATION_WARN * a.lambda_star() {
            warnings.push(format!(
                "horizon truncates {lost:.3e} expected arrivals ({:.3e} of lambda_star)",
                lost / a.lambda_star()
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub seed: u64,
    pub replications: u64,
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    /// Unbiased sample variance (zero for a single replication).
    pub variance: Vec<f64>,
    /// `histograms[i][k]` replications with k customers at `grid[i]`.
    pub histograms: Vec<Vec<u64>>,
    /// Accepted arrivals summed over all replications.
    pub arrival_total: u64,
    pub warnings: Vec<String>,
}

impl SimResult {
    /// `t,mean,variance` CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse(format!("writing simulation csv: {e}"));
        w.write_record(["t", "mean", "variance"]).map_err(err)?;
        for i in 0..self.grid.len() {
            w.write_record([
                crate::format::sig(self.grid[i]),
                crate::format::sig(self.mean[i]),
                crate::format::sig(self.variance[i]),
            ])
            .map_err(err)?;
        }
        w.flush()
            .map_err(|e| Error::Parse(format!("writing simulation csv: {e}")))
    }

    pub fn mean_arrivals(&self) -> f64 {
        self.arrival_total as f64 / self.replications as f64
    }
}

#[derive(Default)]
struct Tally {
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
    hist: Vec<Vec<u64>>,
    arrivals: u64,
}

impl Tally {
    fn with_len(n: usize) -> Self {
        Tally {
            sum: vec![0; n],
            sum_sq: vec![0; n],
            hist: vec![Vec::new(); n],
            arrivals: 0,
        }
    }

    fn record(&mut self, counts: &[i64]) {
        for (i, &c) in counts.iter().enumerate() {
            let c = c as u64;
            self.sum[i] += c;
            self.sum_sq[i] += (c as u128) * (c as u128);
            let h = &mut self.hist[i];
            if h.len() <= c as usize {
                h.resize(c as usize + 1, 0);
            }
            h[c as usize] += 1;
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        if self.sum.is_empty() {
            return other;
        }
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
            let h = &mut self.hist[i];
            if h.len() < other.hist[i].len() {
                h.resize(other.hist[i].len(), 0);
            }
            for (k, v) in other.hist[i].iter().enumerate() {
                h[k] += v;
            }
        }
        self.arrivals += other.arrivals;
        self
    }
}

/// One replication: thinned arrivals on the horizon, each adding +1 to the
/// grid points in [arrival, arrival + service) through a difference array.
fn replicate(cfg: &SimConfig, rate_max: f64, rep: u64, diff: &mut [i64]) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(rep);
    diff.iter_mut().for_each(|d| *d = 0);
    let (t0, t1) = cfg.horizon;
    let mut accepted = 0;
    if rate_max <= 0.0 {
        return 0;
    }
    let mut t = t0;
    loop {
        let u: f64 = rng.random();
        t += -(-u).ln_1p() / rate_max;
        if t > t1 {
            break;
        }
        let v: f64 = rng.random();
        if v * rate_max >= cfg.arrival_scale * cfg.arrival.rate_at(t) {
            continue;
        }
        accepted += 1;
        let w: f64 = rng.random();
        let leave = t + cfg.service.sample(w);
        let first = cfg.grid.partition_point(|&g| g < t);
        let past = cfg.grid.partition_point(|&g| g < leave);
        if first < past {
            diff[first] += 1;
            diff[past] -= 1;
        }
    }
    accepted
}

pub fn simulate(cfg: &SimConfig) -> Result<SimResult> {
    let warnings = cfg.validate()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let rate_max = cfg.arrival_scale * cfg.arrival.peak_rate_bound();
    let n = cfg.grid.len();
    let chunks = cfg.replications.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::with_len(n);
            let mut diff = vec![0i64; n + 1];
            let mut counts = vec![0i64; n];
            let end = ((c + 1) * CHUNK).min(cfg.replications);
            for rep in c * CHUNK..end {
                tally.arrivals += replicate(cfg, rate_max, rep, &mut diff);
                let mut running = 0;
                for i in 0..n {
                    running += diff[i];
                    counts[i] = running;
                }
                tally.record(&counts);
            }
            tally
        })
        .reduce(Tally::default, Tally::merge);

    let reps = cfg.replications as u128;
    let mean = tally.sum.iter().map(|&s| s as f64 / reps as f64).collect();
    let variance = tally
        .sum
        .iter()
        .zip(&tally.sum_sq)
        .map(|(&s, &ss)| {
            if reps < 2 {
                return 0.0;
            }
            // (n·Σc² − (Σc)²) / (n(n − 1)), exact in integers up to the division
            let centred = reps * ss - (s as u128) * (s as u128);
            centred as f64 / (reps * (reps - 1)) as f64
        })
        .collect();
    Ok(SimResult {
        seed: cfg.seed,
        replications: cfg.replications,
        grid: cfg.grid.clone(),
        mean,
        variance,
        histograms: tally.hist,
        arrival_total: tally.arrivals,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of a count histogram against Poisson(mean).
/// Adjacent counts are pooled until each bin expects at least 5; the last
/// bin takes the whole upper tail.
pub fn chi_square_poisson(hist: &[u64], mean: f64) -> Result<ChiSquareTest> {
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return Err(Error::invalid("empty histogram"));
    }
    let law = PoissonMarginal { mean };
    let nf = n as f64;
    let observed = |k: usize| hist.get(k).copied().unwrap_or(0) as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut cdf) = (0.0, 0.0, 0.0);
    let mut k = 0usize;
    loop {
        let p = law.pmf(k as u64);
        obs += observed(k);
        exp += nf * p;
        cdf += p;
        k += 1;
        let tail = nf * (1.0 - cdf).max(0.0);
        if exp >= 5.0 && tail >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        } else if tail < 5.0 {
            let rest: f64 = (k..hist.len()).map(observed).sum();
            bins.push((obs + rest, exp + tail));
            break;
        }
    }
    if bins.len() < 2 {
        return Err(Error::invalid("too few expected counts for a chi-square test"));
    }
    let statistic = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let law = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: law.sf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::load::load_at;

    fn table1(grid: Vec<f64>, reps: u64, seed: u64) -> SimConfig {
        SimConfig::new(
            ArrivalModel::gaussian(100.0, 10.0, 2.0).unwrap(),
            ServiceModel::exponential(1.0).unwrap(),
            (-6.0, 26.0),
            grid,
            reps,
            seed,
        )
    }

    #[test]
    fn zero_rate_gives_empty_system() {
        let mut cfg = table1(vec![5.0, 10.0, 15.0], 200, 3);
        cfg.arrival_scale = 0.0;
        let r = simulate(&cfg).unwrap();
        assert!(r.mean.iter().all(|&m| m == 0.0));
        assert_eq!(r.arrival_total, 0);
        assert!(r.histograms.iter().all(|h| h == &vec![200]));
    }

    #[test]
    fn same_seed_same_result() {
        let a = simulate(&table1(vec![9.0, 10.86, 12.0], 3000, 42)).unwrap();
        let b = simulate(&table1(vec![9.0, 10.86, 12.0], 3000, 42)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&table1(vec![9.0, 10.86, 12.0], 3000, 43)).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = table1(vec![10.86], 2000, 9);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&cfg).unwrap());
        assert_eq!(single, simulate(&cfg).unwrap());
    }

    #[test]
    fn histograms_sum_to_replications() {
        let r = simulate(&table1(vec![8.0, 10.0, 14.0], 1500, 1)).unwrap();
        for h in &r.histograms {
            assert_eq!(h.iter().sum::<u64>(), 1500);
        }
        // every arrival on the horizon is counted; λ* = 100
        assert!((r.mean_arrivals() - 100.0).abs() < 4.0 * (100.0f64 / 1500.0).sqrt());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(simulate(&table1(vec![30.0], 10, 0)).is_err());
        assert!(simulate(&table1(vec![1.0, 1.0], 10, 0)).is_err());
        assert!(simulate(&table1(vec![1.0], 0, 0)).is_err());
        let mut short = table1(vec![10.0], 10, 0);
        short.horizon = (5.0, 12.0);
        assert_eq!(short.validate().unwrap().len(), 2);
    }

    #[test]
    fn chi_square_accepts_poisson_and_rejects_shifted() {
        let n = 100_000u64;
        let law = PoissonMarginal { mean: 6.0 };
        let hist: Vec<u64> = (0..40).map(|k| (n as f64 * law.pmf(k)).round() as u64).collect();
        let ok = chi_square_poisson(&hist, 6.0).unwrap();
        assert!(ok.p_value > 0.99, "{ok:?}");
        let bad = chi_square_poisson(&hist, 6.3).unwrap();
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn mean_and_dispersion_track_the_load() {
        let grid = vec![8.0, 10.86, 13.0];
        let r = simulate(&table1(grid.clone(), 40_000, 7)).unwrap();
        let a = ArrivalModel::gaussian(100.0, 10.0, 2.0).unwrap();
        let s = ServiceModel::exponential(1.0).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let q = load_at(&a, &s, t).unwrap().0;
            let se = (q / 40_000.0).sqrt();
            assert!((r.mean[i] - q).abs() < 4.0 * se, "t={t}: {} vs {q}", r.mean[i]);
            let dispersion = r.variance[i] / r.mean[i];
            assert!((0.95..1.05).contains(&dispersion));
            assert!(chi_square_poisson(&r.histograms[i], q).unwrap().p_value > 0.001);
        }
    }

    #[test]
    fn empirical_peak_near_analytic_peak() {
        let grid: Vec<f64> = (0..=120).map(|k| 8.0 + 0.05 * k as f64).collect();
        let r = simulate(&table1(grid.clone(), 100_000, 11)).unwrap();
        let best = (0..grid.len())
            .max_by(|&i, &j| r.mean[i].total_cmp(&r.mean[j]))
            .unwrap();
        let t_star = crate::peak::peak_time(
            &ArrivalModel::gaussian(100.0, 10.0, 2.0).unwrap(),
            &ServiceModel::exponential(1.0).unwrap(),
        )
        .unwrap()
        .t_star;
        assert!(
            (grid[best] - t_star).abs() <= 0.05 + 1e-12,
            "{} vs {t_star}",
            grid[best]
        );
    }
}
