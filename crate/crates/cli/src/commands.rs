use peakload::empirics::{cdf_lag_table, default_quantiles, fit, DailySeries};
use peakload::flatten::{flatten_report, gamma_capacity_spread, PeakCheck};
use peakload::format::sig;
use peakload::load::load_curve;
use peakload::peak::{exact_lag_gauss_exp, lag_bounds_exp, lag_det, lag_hyperexp, peak_time, psi};
use peakload::sim::{simulate, SimConfig};
use peakload::tables;
use peakload::{ArrivalModel, Error, Result, ServiceModel};
use serde_json::json;

use crate::args::Command;
use crate::output::{to_value, Report};

fn column_report(header: &[&str], columns: &[&[f64]], json: serde_json::Value) -> Report {
    let n = columns.first().map_or(0, |c| c.len());
    Report {
        header: header.iter().map(|h| h.to_string()).collect(),
        rows: (0..n).map(|i| columns.iter().map(|c| sig(c[i])).collect()).collect(),
        json,
    }
}

pub fn run(command: &Command) -> Result<Report> {
    match command {
        Command::Rate { arrival, grid } => {
            let a = arrival.model()?;
            let t = grid.points()?;
            let rate: Vec<f64> = t.iter().map(|&x| a.rate_at(x)).collect();
            let json = json!({ "arrival": to_value(&a), "grid": t, "values": rate });
            Ok(column_report(&["t", "rate"], &[&t, &rate], json))
        }
        Command::Load { arrival, service, grid } => {
            let (a, s) = (arrival.model()?, service.model()?);
            let curve = load_curve(&a, &s, &grid.points()?)?;
            let tag = curve.provenance.as_str();
            let json = to_value(&curve);
            let mut report = column_report(&["t", "q"], &[&curve.grid, &curve.values], json);
            report.header.push("provenance".into());
            report.rows.iter_mut().for_each(|r| r.push(tag.into()));
            Ok(report)
        }
        Command::Peak { arrival, service } => {
            let report = peak_time(&arrival.model()?, &service.model()?)?;
            Ok(Report::single(to_value(&report)))
        }
        Command::Lag { arrival, service } => lag(&arrival.model()?, &service.model()?),
        Command::Flatten {
            arrival,
            service,
            capacity,
        } => {
            let s = service.model()?;
            match arrival.model()? {
                ArrivalModel::Gaussian(g) => Ok(Report::single(to_value(&flatten_report(&g, &s, *capacity)?))),
                ArrivalModel::Gamma(g) => {
                    let sol = gamma_capacity_spread(g.lambda_star(), g.alpha(), s.mean(), *capacity)?;
                    let flat = ArrivalModel::gamma(g.lambda_star(), g.alpha(), sol.beta)?;
                    let p = peak_time(&flat, &s)?;
                    let check = PeakCheck {
                        t_star: p.t_star,
                        q_star: p.q_star,
                        within_capacity: p.q_star <= *capacity,
                    };
                    Ok(Report::single(json!({
                        "beta": sol.beta,
                        "capacity": sol.capacity,
                        "implied_bound": sol.implied_bound,
                        "peak_check": to_value(&check),
                    })))
                }
            }
        }
        Command::Simulate {
            arrival,
            service,
            grid,
            reps,
            seed,
            t0,
            t1,
        } => {
            let (a, s) = (arrival.model()?, service.model()?);
            let points = grid.points()?;
            let reach = 8.0 * a.spread();
            let left = match a.support_start() {
                Some(origin) => (a.mode_time() - reach).max(origin),
                None => a.mode_time() - reach,
            };
            let horizon = (
                t0.unwrap_or(left.min(points[0])),
                t1.unwrap_or((a.mode_time() + reach).max(points[points.len() - 1])),
            );
            let result = simulate(&SimConfig::new(a, s, horizon, points, *reps, *seed))?;
            eprintln!("seed {}", result.seed);
            let json = to_value(&result);
            Ok(column_report(
                &["t", "mean", "variance"],
                &[&result.grid, &result.mean, &result.variance],
                json,
            ))
        }
        Command::Fit { input, family } => {
            let series = DailySeries::from_csv_path(input)?;
            let result = fit(&series, (*family).into())?;
            if !result.converged {
                log::warn!("fit did not meet its tolerance; reporting the best iterate");
            }
            Ok(Report::single(to_value(&result)))
        }
        Command::Lagtable {
            arrivals,
            deaths,
            quantiles,
        } => {
            let a = DailySeries::from_csv_path(arrivals)?;
            let d = DailySeries::from_csv_path(deaths)?;
            let q = quantiles.clone().unwrap_or_else(default_quantiles);
            let table = cdf_lag_table(&a, &d, &q)?;
            Ok(Report {
                header: vec!["quantile".into(), "lag_days".into()],
                rows: table
                    .quantiles
                    .iter()
                    .zip(&table.lags)
                    .map(|(q, l)| vec![sig(*q), l.to_string()])
                    .collect(),
                json: to_value(&table),
            })
        }
        Command::Tables => {
            let results = tables::all_tables()?;
            let mut buf = Vec::new();
            tables::write_csv(&results, &mut buf)?;
            let mut rdr = csv::Reader::from_reader(buf.as_slice());
            let header = rdr
                .headers()
                .map_err(|e| Error::Parse(e.to_string()))?
                .iter()
                .map(String::from)
                .collect();
            let rows = rdr
                .records()
                .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            let json = json!({
                "rows": results.iter().flat_map(|r| r.rows.iter().map(to_value)).collect::<Vec<_>>(),
                "reductions": results
                    .iter()
                    .map(|r| json!({ "table": r.scenario.table, "reductions": to_value(&r.reductions) }))
                    .collect::<Vec<_>>(),
            });
            Ok(Report { header, rows, json })
        }
    }
}

fn lag(a: &ArrivalModel, s: &ServiceModel) -> Result<Report> {
    let ArrivalModel::Gaussian(g) = a else {
        return Err(Error::InvalidParameter("lag needs gaussian arrivals".into()));
    };
    let json = match s {
        ServiceModel::Exponential { mu } => {
            let (lower, upper) = lag_bounds_exp(*mu, g.sigma());
            json!({
                "service": s.label(),
                "lag": exact_lag_gauss_exp(g, *mu),
                "lower_bound": lower,
                "upper_bound": upper,
                "psi": psi(mu * g.sigma())?.psi_x,
            })
        }
        ServiceModel::Deterministic { delta } => json!({
            "service": s.label(),
            "lag": lag_det(*delta),
            "lower_bound": null,
            "upper_bound": null,
            "psi": null,
        }),
        ServiceModel::HyperExponential { branches } => json!({
            "service": s.label(),
            "lag": lag_hyperexp(g, branches)?,
            "lower_bound": null,
            "upper_bound": null,
            "psi": null,
        }),
        _ => {
            let report = peak_time(a, s)?;
            json!({
                "service": s.label(),
                "lag": report.lag,
                "lower_bound": 0.0,
                "upper_bound": report.upper_bound - g.tau(),
                "psi": null,
            })
        }
    };
    Ok(Report::single(json))
}
