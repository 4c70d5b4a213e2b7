//! The five scenario tables: a base and a flattened arrival curve, with
//! exponential service, and the peaks of their offered loads.

use serde::Serialize;

use crate::arrival::ArrivalModel;
use crate::error::{Error, Result};
use crate::flatten::{reduction_report, ReductionReport};
use crate::format::{sig, two_dp};
use crate::peak::peak_time;
use crate::service::ServiceModel;

pub const LAMBDA_STAR: f64 = 100.0;
/// Gamma rate used for the Gamma tables (scale 2).
pub const GAMMA_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub table: u8,
    pub base: ArrivalModel,
    pub flat: ArrivalModel,
    pub mean_service: f64,
}

pub fn scenarios() -> Vec<Scenario> {
    let gauss = |tau, sigma| ArrivalModel::gaussian(LAMBDA_STAR, tau, sigma).expect("valid");
    let gamma = |alpha| ArrivalModel::gamma(LAMBDA_STAR, alpha, GAMMA_RATE).expect("valid");
    let mut out: Vec<Scenario> = [1.0, 2.0, 10.0]
        .iter()
        .enumerate()
        .map(|(i, &m)| Scenario {
            table: i as u8 + 1,
            base: gauss(10.0, 2.0),
            flat: gauss(20.0, 4.0),
            mean_service: m,
        })
        .collect();
    out.extend([1.0, 10.0].iter().enumerate().map(|(i, &m)| Scenario {
        table: i as u8 + 4,
        base: gamma(5.0),
        flat: gamma(10.0),
        mean_service: m,
    }));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub table: u8,
    pub curve: &'static str,
    pub family: &'static str,
    /// τ for Gaussian rows, α for Gamma rows.
    pub tau_or_alpha: f64,
    /// σ for Gaussian rows, β for Gamma rows.
    pub sigma_or_beta: f64,
    pub mean_service: f64,
    pub peak_time: f64,
    pub peak_value: f64,
    /// Peak drop against the matching base row, whole percent.
    pub reduction_pct: Option<i64>,
}

fn params(a: &ArrivalModel) -> (&'static str, f64, f64) {
    match a {
        ArrivalModel::Gaussian(g) => ("gaussian", g.tau(), g.sigma()),
        ArrivalModel::Gamma(g) => ("gamma", g.alpha(), g.beta()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub rows: Vec<TableRow>,
    pub reductions: ReductionReport,
}

pub fn solve(sc: &Scenario) -> Result<ScenarioResult> {
    let s = ServiceModel::exponential(1.0 / sc.mean_service)?;
    let base = peak_time(&sc.base, &s)?;
    let flat = peak_time(&sc.flat, &s)?;
    let reductions = reduction_report(&base, &flat);
    let row = |curve, a: &ArrivalModel, t, v, pct| {
        let (family, p1, p2) = params(a);
        TableRow {
            table: sc.table,
            curve,
            family,
            tau_or_alpha: p1,
            sigma_or_beta: p2,
            mean_service: sc.mean_service,
            peak_time: t,
            peak_value: v,
            reduction_pct: pct,
        }
    };
    let rows = vec![
        row("arrival", &sc.base, sc.base.mode_time(), base.arrival_peak, None),
        row(
            "flattened_arrival",
            &sc.flat,
            sc.flat.mode_time(),
            flat.arrival_peak,
            Some(reductions.arrival_reduction_pct),
        ),
        row("queue", &sc.base, base.t_star, base.q_star, None),
        row(
            "flattened_queue",
            &sc.flat,
            flat.t_star,
            flat.q_star,
            Some(reductions.queue_reduction_pct),
        ),
    ];
    Ok(ScenarioResult {
        scenario: *sc,
        rows,
        reductions,
    })
}

pub fn all_tables() -> Result<Vec<ScenarioResult>> {
    scenarios().iter().map(solve).collect()
}

pub const CSV_HEADER: [&str; 11] = [
    "table",
    "curve",
    "family",
    "tau_or_alpha",
    "sigma_or_beta",
    "mean_service",
    "peak_time",
    "peak_value",
    "peak_time_2dp",
    "peak_value_2dp",
    "reduction_pct",
];

pub fn write_csv<W: std::io::Write>(results: &[ScenarioResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(format!("writing tables: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in results.iter().flat_map(|r| &r.rows) {
        w.write_record([
            r.table.to_string(),
            r.curve.to_string(),
            r.family.to_string(),
            sig(r.tau_or_alpha),
            sig(r.sigma_or_beta),
            sig(r.mean_service),
            sig(r.peak_time),
            sig(r.peak_value),
            two_dp(r.peak_time),
            two_dp(r.peak_value),
            r.reduction_pct.map(|p| p.to_string()).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("writing tables: {e}")))
}
