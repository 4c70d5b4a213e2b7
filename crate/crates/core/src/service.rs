//! Service-time laws and their stationary-excess (equilibrium residual
//! lifetime) distributions.
//!
//! Every load formula reduces to an expectation E[f(S_e)], where S_e has
//! density Ḡ(t)/E[S]. [`ExcessLaw`] carries a representation of S_e per
//! service variant and evaluates such expectations by quadrature against
//! its density.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, integrate_pieces, integrate_to_infinity, Tolerance};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const SIMPSON_ABS_TOL: f64 = 1e-9;
const SIMPSON_MAX_PANELS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub p: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub p: f64,
    pub mu: f64,
}

/// Piecewise-linear survival function on a finite grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tabulated {
    grid: Vec<f64>,
    survival: Vec<f64>,
    mean: f64,
}

impl Tabulated {
    pub fn new(grid: Vec<f64>, survival: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != survival.len() {
            return Err(Error::invalid(
                "tabulated survival needs matching grid and survival columns with at least two rows",
            ));
        }
        if grid[0] != 0.0 {
            return Err(Error::invalid("tabulated grid must start at t = 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("tabulated grid must be strictly increasing and finite"));
        }
        if survival[0] != 1.0 || *survival.last().expect("nonempty") != 0.0 {
            return Err(Error::invalid("tabulated survival must start at 1 and end at 0"));
        }
        if survival.iter().any(|s| !(0.0..=1.0).contains(s)) || survival.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("tabulated survival must be nonincreasing within [0, 1]"));
        }
        let mean = grid
            .windows(2)
            .zip(survival.windows(2))
            .map(|(t, s)| 0.5 * (s[0] + s[1]) * (t[1] - t[0]))
            .sum();
        Ok(Tabulated { grid, survival, mean })
    }

    /// Reads a two-column `t,survival` CSV with a header row.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut grid = Vec::new();
        let mut survival = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("survival csv row {}: {e}", i + 2)))?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!(
                    "survival csv row {} has fewer than two fields",
                    i + 2
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("survival csv row {}: {s:?}: {e}", i + 2)))
            };
            grid.push(parse(&rec[0])?);
            survival.push(parse(&rec[1])?);
        }
        Tabulated::new(grid, survival)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
    pub fn survival_values(&self) -> &[f64] {
        &self.survival
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let last = *self.grid.last().expect("nonempty");
        if t >= last {
            return 0.0;
        }
        let j = self.grid.partition_point(|&g| g <= t);
        let (t0, t1) = (self.grid[j - 1], self.grid[j]);
        let (s0, s1) = (self.survival[j - 1], self.survival[j]);
        s0 + (s1 - s0) * (t - t0) / (t1 - t0)
    }

    fn second_moment(&self) -> f64 {
        // 2∫ t Ḡ(t) dt; Simpson is exact on each linear segment
        2.0 * self
            .grid
            .windows(2)
            .zip(self.survival.windows(2))
            .map(|(t, s)| {
                let m = 0.5 * (t[0] + t[1]);
                let sm = 0.5 * (s[0] + s[1]);
                (t[1] - t[0]) / 6.0 * (t[0] * s[0] + 4.0 * m * sm + t[1] * s[1])
            })
            .sum::<f64>()
    }

    /// ∫₀ᵗ Ḡ(u) du, exact for the piecewise-linear survival.
    fn integrated_survival(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (w, s) in self.grid.windows(2).zip(self.survival.windows(2)) {
            if t <= w[0] {
                break;
            }
            let hi = t.min(w[1]);
            let s_hi = s[0] + (s[1] - s[0]) * (hi - w[0]) / (w[1] - w[0]);
            acc += 0.5 * (s[0] + s_hi) * (hi - w[0]);
        }
        acc
    }

    fn inverse_survival(&self, level: f64) -> f64 {
        let j = self.survival.partition_point(|&s| s > level);
        if j == 0 {
            return 0.0;
        }
        if j >= self.grid.len() {
            return *self.grid.last().expect("nonempty");
        }
        let (s0, s1) = (self.survival[j - 1], self.survival[j]);
        let (t0, t1) = (self.grid[j - 1], self.grid[j]);
        if s0 == s1 {
            return t0;
        }
        t0 + (s0 - level) / (s0 - s1) * (t1 - t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum ServiceModel {
    Exponential { mu: f64 },
    Deterministic { delta: f64 },
    Discrete { atoms: Vec<Atom> },
    HyperExponential { branches: Vec<Branch> },
    Tabulated(Tabulated),
}

fn check_weights(ps: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in ps {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid(format!("mixture weight {p} outside (0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::invalid(format!("mixture weights sum to {sum}, expected 1")));
    }
    Ok(())
}

impl ServiceModel {
    pub fn exponential(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("exponential rate must be positive, got {mu}")));
        }
        Ok(ServiceModel::Exponential { mu })
    }

    pub fn deterministic(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!(
                "deterministic duration must be positive, got {delta}"
            )));
        }
        Ok(ServiceModel::Deterministic { delta })
    }

    /// Atoms with equal durations are merged by summing their weights.
    pub fn discrete(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut merged: Vec<Atom> = Vec::new();
        let raw: Vec<(f64, f64)> = atoms.into_iter().collect();
        check_weights(raw.iter().map(|a| a.0))?;
        for (p, delta) in raw {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::invalid(format!(
                    "discrete duration must be positive, got {delta}"
                )));
            }
            match merged.iter_mut().find(|a| a.delta == delta) {
                Some(a) => a.p += p,
                None => merged.push(Atom { p, delta }),
            }
        }
        merged.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        Ok(ServiceModel::Discrete { atoms: merged })
    }

    pub fn hyper_exponential(branches: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let raw: Vec<(f64, f64)> = branches.into_iter().collect();
        check_weights(raw.iter().map(|b| b.0))?;
        if raw.iter().any(|b| !(b.1 > 0.0 && b.1.is_finite())) {
            return Err(Error::invalid("hyper-exponential rates must be positive"));
        }
        Ok(ServiceModel::HyperExponential {
            branches: raw.into_iter().map(|(p, mu)| Branch { p, mu }).collect(),
        })
    }

    pub fn tabulated(grid: Vec<f64>, survival: Vec<f64>) -> Result<Self> {
        Tabulated::new(grid, survival).map(ServiceModel::Tabulated)
    }

    /// E[S].
    pub fn mean(&self) -> f64 {
        match self {
            ServiceModel::Exponential { mu } => 1.0 / mu,
            ServiceModel::Deterministic { delta } => *delta,
            ServiceModel::Discrete { atoms } => atoms.iter().map(|a| a.p * a.delta).sum(),
            ServiceModel::HyperExponential { branches } => branches.iter().map(|b| b.p / b.mu).sum(),
            ServiceModel::Tabulated(t) => t.mean,
        }
    }

    /// E[S²].
    pub fn second_moment(&self) -> f64 {
        match self {
            ServiceModel::Exponential { mu } => 2.0 / (mu * mu),
            ServiceModel::Deterministic { delta } => delta * delta,
            ServiceModel::Discrete { atoms } => atoms.iter().map(|a| a.p * a.delta * a.delta).sum(),
            ServiceModel::HyperExponential { branches } => branches.iter().map(|b| 2.0 * b.p / (b.mu * b.mu)).sum(),
            ServiceModel::Tabulated(t) => t.second_moment(),
        }
    }

    /// Ḡ(t) = P(S > t).
    pub fn survival(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        match self {
            ServiceModel::Exponential { mu } => (-mu * t).exp(),
            ServiceModel::Deterministic { delta } => {
                if t < *delta {
                    1.0
                } else {
                    0.0
                }
            }
            ServiceModel::Discrete { atoms } => atoms.iter().filter(|a| a.delta > t).map(|a| a.p).sum(),
            ServiceModel::HyperExponential { branches } => branches.iter().map(|b| b.p * (-b.mu * t).exp()).sum(),
            ServiceModel::Tabulated(tab) => tab.survival(t),
        }
    }

    pub fn excess(&self) -> ExcessLaw<'_> {
        let mean = self.mean();
        match self {
            ServiceModel::Exponential { mu } => ExcessLaw::Exponential { mu: *mu },
            ServiceModel::Deterministic { delta } => ExcessLaw::Uniform { width: *delta },
            ServiceModel::Discrete { atoms } => ExcessLaw::UniformMixture {
                components: atoms.iter().map(|a| (a.p * a.delta / mean, a.delta)).collect(),
            },
            ServiceModel::HyperExponential { branches } => ExcessLaw::ExponentialMixture {
                components: excess_mixture_weights(branches)
                    .into_iter()
                    .zip(branches)
                    .map(|(w, b)| (w, b.mu))
                    .collect(),
            },
            ServiceModel::Tabulated(table) => ExcessLaw::Density { table, mean },
        }
    }

    /// E[f(S_e)].
    pub fn excess_expectation<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.excess().expect(f, &[])
    }

    /// E[f(S)] for the service time itself. `breaks` mark kinks or narrow
    /// features of `f`.
    pub fn service_expectation<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        let tol = Tolerance::default();
        match self {
            ServiceModel::Exponential { mu } => exponential_expectation(&f, *mu, breaks, tol),
            ServiceModel::Deterministic { delta } => Ok(f(*delta)),
            ServiceModel::Discrete { atoms } => Ok(atoms.iter().map(|a| a.p * f(a.delta)).sum()),
            ServiceModel::HyperExponential { branches } => branches
                .iter()
                .map(|b| exponential_expectation(&f, b.mu, breaks, tol).map(|v| b.p * v))
                .sum(),
            ServiceModel::Tabulated(tab) => {
                // density −Ḡ' is constant on each segment
                let last = *tab.grid.last().expect("nonempty");
                let mut points = tab.grid.clone();
                points.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < last));
                points.sort_by(f64::total_cmp);
                points.dedup();
                let density = |u: f64| {
                    let j = tab.grid.partition_point(|&g| g <= u).clamp(1, tab.grid.len() - 1);
                    (tab.survival[j - 1] - tab.survival[j]) / (tab.grid[j] - tab.grid[j - 1])
                };
                integrate_pieces(|u| f(u) * density(u), &points, tol)
            }
        }
    }

    /// Inverse-cdf draw from a uniform `u` in (0, 1). Mixtures pick the
    /// component from `u` and reuse the rescaled remainder within it.
    pub fn sample(&self, u: f64) -> f64 {
        match self {
            ServiceModel::Exponential { mu } => -(-u).ln_1p() / mu,
            ServiceModel::Deterministic { delta } => *delta,
            ServiceModel::Discrete { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.p;
                    if u < acc {
                        return a.delta;
                    }
                }
                atoms.last().expect("nonempty").delta
            }
            ServiceModel::HyperExponential { branches } => {
                let mut acc = 0.0;
                for b in branches {
                    if u < acc + b.p {
                        let v = ((u - acc) / b.p).clamp(0.0, 1.0 - f64::EPSILON);
                        return -(-v).ln_1p() / b.mu;
                    }
                    acc += b.p;
                }
                let b = branches.last().expect("nonempty");
                let v = ((u - (acc - b.p)) / b.p).clamp(0.0, 1.0 - f64::EPSILON);
                -(-v).ln_1p() / b.mu
            }
            ServiceModel::Tabulated(tab) => tab.inverse_survival(1.0 - u),
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            ServiceModel::Exponential { .. } => "exponential",
            ServiceModel::Deterministic { .. } => "deterministic",
            ServiceModel::Discrete { .. } => "discrete",
            ServiceModel::HyperExponential { .. } => "hyperexponential",
            ServiceModel::Tabulated(_) => "tabulated",
        }
    }
}

fn exponential_expectation<F: Fn(f64) -> f64>(f: &F, mu: f64, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    integrate_to_infinity(
        |u| {
            let w = (-mu * u).exp();
            if w == 0.0 {
                0.0
            } else {
                mu * w * f(u)
            }
        },
        0.0,
        1.0 / mu,
        breaks,
        tol,
    )
}

/// Stationary-excess mixture weights of a hyper-exponential law:
/// S_e is again hyper-exponential with the same rates and weights ∝ p_j/μ_j.
pub fn excess_mixture_weights(branches: &[Branch]) -> Vec<f64> {
    let raw: Vec<f64> = branches.iter().map(|b| b.p / b.mu).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// The same weights written as products of the other branches' rates,
/// α_j = p_j ∏_{i≠j} μ_i / Σ_k p_k ∏_{i≠k} μ_i. Kept for cross-checking;
/// it overflows for many fast branches.
pub fn excess_mixture_weights_product_form(branches: &[Branch]) -> Vec<f64> {
    let others = |j: usize| -> f64 {
        branches
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, b)| b.mu)
            .product()
    };
    let numer: Vec<f64> = branches.iter().enumerate().map(|(j, b)| b.p * others(j)).collect();
    let denom: f64 = numer.iter().sum();
    numer.into_iter().map(|n| n / denom).collect()
}

/// Law of the stationary excess S_e with cdf (1/E[S])∫₀ᵗ Ḡ(u)du.
#[derive(Debug, Clone)]
pub enum ExcessLaw<'a> {
    Exponential {
        mu: f64,
    },
    Uniform {
        width: f64,
    },
    /// (weight, width) pairs.
    UniformMixture {
        components: Vec<(f64, f64)>,
    },
    /// (weight, rate) pairs.
    ExponentialMixture {
        components: Vec<(f64, f64)>,
    },
    Density {
        table: &'a Tabulated,
        mean: f64,
    },
}

impl ExcessLaw<'_> {
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ExcessLaw::Exponential { mu } => -(-mu * t).exp_m1(),
            ExcessLaw::Uniform { width } => (t / width).min(1.0),
            ExcessLaw::UniformMixture { components } => components.iter().map(|(w, d)| w * (t / d).min(1.0)).sum(),
            ExcessLaw::ExponentialMixture { components } => {
                components.iter().map(|(w, mu)| -w * (-mu * t).exp_m1()).sum()
            }
            ExcessLaw::Density { table, mean } => (table.integrated_survival(t) / mean).min(1.0),
        }
    }

    /// E[S_e].
    pub fn mean(&self) -> f64 {
        match self {
            ExcessLaw::Exponential { mu } => 1.0 / mu,
            ExcessLaw::Uniform { width } => 0.5 * width,
            ExcessLaw::UniformMixture { components } => components.iter().map(|(w, d)| 0.5 * w * d).sum(),
            ExcessLaw::ExponentialMixture { components } => components.iter().map(|(w, mu)| w / mu).sum(),
            ExcessLaw::Density { table, mean } => table.second_moment() / (2.0 * mean),
        }
    }

    /// Upper end of the support, if finite.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            ExcessLaw::Exponential { .. } | ExcessLaw::ExponentialMixture { .. } => None,
            ExcessLaw::Uniform { width } => Some(*width),
            ExcessLaw::UniformMixture { components } => components.iter().map(|c| c.1).reduce(f64::max),
            ExcessLaw::Density { table, .. } => table.grid.last().copied(),
        }
    }

    /// E[f(S_e)]. `breaks` mark points where `f` has a kink, a cutoff or a
    /// narrow peak, so the adaptive rules start with them as panel edges.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, breaks: &[f64]) -> Result<f64> {
        let tol = Tolerance::default();
        let within = |hi: f64| -> Vec<f64> {
            let mut pts = vec![0.0];
            pts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < hi));
            pts.push(hi);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts
        };
        match self {
            ExcessLaw::Exponential { mu } => exponential_expectation(&f, *mu, breaks, tol),
            ExcessLaw::Uniform { width } => Ok(integrate_pieces(&f, &within(*width), tol)? / width),
            ExcessLaw::UniformMixture { components } => components
                .iter()
                .map(|(w, d)| integrate_pieces(&f, &within(*d), tol).map(|v| w * v / d))
                .sum(),
            ExcessLaw::ExponentialMixture { components } => components
                .iter()
                .map(|(w, mu)| exponential_expectation(&f, *mu, breaks, tol).map(|v| w * v))
                .sum(),
            ExcessLaw::Density { table, mean } => {
                let pts = within(*table.grid.last().expect("nonempty"));
                let span = pts[pts.len() - 1] - pts[0];
                let mut total = 0.0;
                for w in pts.windows(2) {
                    let share = SIMPSON_ABS_TOL * (w[1] - w[0]) / span;
                    total += adaptive_simpson(
                        |u| f(u) * table.survival(u),
                        w[0],
                        w[1],
                        share * mean,
                        SIMPSON_MAX_PANELS,
                    )?;
                }
                Ok(total / mean)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper() -> ServiceModel {
        ServiceModel::hyper_exponential([(0.5, 1.0), (0.5, 0.25)]).unwrap()
    }

    fn exp_table(mu: f64, step: f64, end: f64) -> ServiceModel {
        let n = (end / step).round() as usize;
        let grid: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
        let mut surv: Vec<f64> = grid.iter().map(|t| (-mu * t).exp()).collect();
        *surv.last_mut().unwrap() = 0.0;
        ServiceModel::tabulated(grid, surv).unwrap()
    }

    fn all_variants() -> Vec<ServiceModel> {
        vec![
            ServiceModel::exponential(0.7).unwrap(),
            ServiceModel::deterministic(3.0).unwrap(),
            ServiceModel::discrete([(0.2, 1.0), (0.5, 2.5), (0.3, 4.0)]).unwrap(),
            hyper(),
            ServiceModel::tabulated(vec![0.0, 1.0, 2.0, 5.0], vec![1.0, 0.6, 0.5, 0.0]).unwrap(),
        ]
    }

    #[test]
    fn means() {
        assert_eq!(ServiceModel::exponential(0.1).unwrap().mean(), 10.0);
        assert_eq!(ServiceModel::deterministic(2.0).unwrap().mean(), 2.0);
        assert!((hyper().mean() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn second_moments() {
        assert_eq!(ServiceModel::exponential(1.0).unwrap().second_moment(), 2.0);
        assert_eq!(ServiceModel::deterministic(3.0).unwrap().second_moment(), 9.0);
        let d = ServiceModel::discrete([(0.5, 1.0), (0.5, 3.0)]).unwrap();
        assert!((d.second_moment() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn tabulated_moments_match_quadrature_of_survival() {
        let s = ServiceModel::tabulated(vec![0.0, 1.0, 2.0, 5.0], vec![1.0, 0.6, 0.5, 0.0]).unwrap();
        // trapezoid: 0.8 + 0.55 + 0.75
        assert!((s.mean() - 2.1).abs() < 1e-14);
        let m2 = crate::quadrature::integrate_pieces(
            |t| 2.0 * t * s.survival(t),
            &[0.0, 1.0, 2.0, 5.0],
            Tolerance::default(),
        )
        .unwrap();
        assert!((s.second_moment() - m2).abs() < 1e-12);
    }

    #[test]
    fn excess_examples() {
        let e = ServiceModel::exponential(2.0).unwrap();
        assert!((e.excess_expectation(|u| u).unwrap() - 0.5).abs() < 1e-12);
        let d = ServiceModel::deterministic(4.0).unwrap();
        assert!((d.excess_expectation(|u| u).unwrap() - 2.0).abs() < 1e-12);
        let h = hyper();
        let closed = h.second_moment() / (2.0 * h.mean());
        assert!((h.excess_expectation(|u| u).unwrap() - closed).abs() < 1e-10);
        assert!((h.excess().mean() - closed).abs() < 1e-14);
    }

    #[test]
    fn normalization_and_first_moment_for_every_variant() {
        for s in all_variants() {
            let one = s.excess_expectation(|_| 1.0).unwrap();
            assert!((one - 1.0).abs() < 1e-10, "{}: {one}", s.label());
            let m = s.excess_expectation(|u| u).unwrap();
            let closed = s.second_moment() / (2.0 * s.mean());
            assert!((m - closed).abs() < 1e-9, "{}: {m} vs {closed}", s.label());
            assert!((s.excess().mean() - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn excess_cdf_is_a_distribution() {
        for s in all_variants() {
            let law = s.excess();
            let mut prev = 0.0;
            for k in 0..400 {
                let c = law.cdf(k as f64 * 0.25);
                assert!(c >= prev - 1e-15 && c <= 1.0 + 1e-15);
                prev = c;
            }
            assert!(law.cdf(1e4) > 1.0 - 1e-12, "{}", s.label());
        }
    }

    #[test]
    fn mixture_weights() {
        let one = excess_mixture_weights(&[Branch { p: 1.0, mu: 3.0 }]);
        assert_eq!(one, vec![1.0]);
        let sym = excess_mixture_weights(&[Branch { p: 0.5, mu: 1.0 }, Branch { p: 0.5, mu: 1.0 }]);
        assert_eq!(sym, vec![0.5, 0.5]);
        let w = excess_mixture_weights(&[Branch { p: 0.5, mu: 1.0 }, Branch { p: 0.5, mu: 0.25 }]);
        assert!((w[0] - 0.2).abs() < 1e-15 && (w[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn discrete_merges_duplicate_atoms() {
        let d = ServiceModel::discrete([(0.25, 2.0), (0.5, 1.0), (0.25, 2.0)]).unwrap();
        match d {
            ServiceModel::Discrete { atoms } => {
                assert_eq!(atoms.len(), 2);
                assert_eq!(atoms[1], Atom { p: 0.5, delta: 2.0 });
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ServiceModel::discrete([(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(ServiceModel::hyper_exponential([(1.0, 0.0)]).is_err());
        assert!(ServiceModel::tabulated(vec![0.0, 1.0], vec![1.0, 0.2]).is_err());
        assert!(ServiceModel::tabulated(vec![0.0, 1.0, 1.0], vec![1.0, 0.5, 0.0]).is_err());
        assert!(ServiceModel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 0.4, 0.5]).is_err());
        assert!(ServiceModel::exponential(-1.0).is_err());
    }

    #[test]
    fn samplers() {
        assert_eq!(ServiceModel::deterministic(2.5).unwrap().sample(0.123), 2.5);
        let e = ServiceModel::exponential(1.0).unwrap();
        let u = 1.0 - (-2.0f64).exp();
        assert!((e.sample(u) - 2.0).abs() < 1e-12);
        let d = ServiceModel::discrete([(0.5, 1.0), (0.5, 3.0)]).unwrap();
        assert_eq!(d.sample(0.49), 1.0);
        assert_eq!(d.sample(0.51), 3.0);
        let t = ServiceModel::tabulated(vec![0.0, 2.0], vec![1.0, 0.0]).unwrap();
        assert!((t.sample(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hyperexponential_sampler_moment() {
        use rand::{Rng, SeedableRng};
        let h = hyper();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = h.sample(rng.random::<f64>());
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - h.mean()).abs() < 4.0 * se, "{mean} vs {}", h.mean());
    }

    #[test]
    fn exponential_table_tracks_closed_form() {
        let mu = 0.8;
        let exact = ServiceModel::exponential(mu).unwrap();
        let table = exp_table(mu, 0.002, 40.0);
        assert!((table.mean() - exact.mean()).abs() < 1e-5);
        assert!((table.second_moment() - exact.second_moment()).abs() < 1e-5);
        for &t in &[0.1, 0.9, 3.3, 10.0] {
            assert!((table.survival(t) - exact.survival(t)).abs() < 1e-5);
            assert!((table.excess().cdf(t) - exact.excess().cdf(t)).abs() < 1e-5);
        }
        let f = |u: f64| (u - 1.0).powi(2) * (-(u - 2.0).powi(2)).exp();
        let a = table.excess_expectation(f).unwrap();
        let b = exact.excess_expectation(f).unwrap();
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        let c = table.service_expectation(f, &[]).unwrap();
        let d = exact.service_expectation(f, &[]).unwrap();
        assert!((c - d).abs() < 1e-5, "{c} vs {d}");
        let u = 0.37;
        assert!((table.sample(u) - exact.sample(u)).abs() < 1e-5);
    }

    #[test]
    fn survival_csv_round_trip() {
        let csv = "t,survival\n0,1\n1,0.5\n3,0\n";
        let t = Tabulated::from_csv_reader(csv.as_bytes()).unwrap();
        assert!((t.mean - 1.25).abs() < 1e-15);
        assert!(Tabulated::from_csv_reader("t,survival\n0,1\n1,abc\n".as_bytes()).is_err());
    }

    mod props {
        use super::super::*;
        use crate::quadrature::{integrate_to_infinity, Tolerance};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(20))]

            // Exponential service is memoryless: S_e has the law of S.
            #[test]
            fn exponential_excess_is_memoryless(
                mu in 0.05f64..5.0,
                c in proptest::collection::vec(-2.0f64..2.0, 3),
                centre in 0.0f64..20.0,
                width in 0.2f64..10.0,
            ) {
                let s = ServiceModel::exponential(mu).unwrap();
                let f = |u: f64| (c[0] + c[1] * u + c[2] * u * u) * (-((u - centre) / width).powi(2)).exp();
                let via_excess = s.excess().expect(f, &[centre]).unwrap();
                let plain = integrate_to_infinity(|u| f(u) * mu * (-mu * u).exp(), 0.0, 1.0 / mu, &[centre], Tolerance::default()).unwrap();
                prop_assert!((via_excess - plain).abs() < 1e-10 * (1.0 + plain.abs()));
            }

            #[test]
            fn product_form_weights_agree(
                branches in proptest::collection::vec((0.05f64..1.0, 0.05f64..5.0), 1..6),
            ) {
                let total: f64 = branches.iter().map(|b| b.0).sum();
                let bs: Vec<Branch> = branches.iter().map(|&(p, mu)| Branch { p: p / total, mu }).collect();
                let a = excess_mixture_weights(&bs);
                let b = excess_mixture_weights_product_form(&bs);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
                prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
