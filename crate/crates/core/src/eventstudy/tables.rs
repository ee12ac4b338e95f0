use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{
    abnormal_log_volume, build_benchmark, clipped_window_dates, compute_car, event_day_index, fit_market_model,
    window_dates, MarketModelFit, Window,
};
use super::panel::PricePanel;
use super::{EventSpec, FirmRecord, Group};
use crate::error::{Error, Result};
use crate::metrics::{ols_fit, OlsResult};
use crate::scalar::{mean, Scalar};

/// One firm's abnormal performance over one event window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CarRow<T: Scalar> {
    pub ticker: String,
    pub event_id: String,
    pub window: Window,
    pub car: T,
    pub abvol: T,
}

/// Everything the pipeline produced, plus the firms it had to leave out.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStudyOutput<T: Scalar> {
    pub car_rows: Vec<CarRow<T>>,
    pub fits: Vec<(String, MarketModelFit<T>)>,
    /// `(event_id, ticker, reason)` for firms dropped from an event.
    pub skipped: Vec<(String, String, String)>,
    /// Event id → trading date used as day 0.
    pub day0: BTreeMap<String, chrono::NaiveDate>,
}

/// Market-model CARs and abnormal log volume for every firm, event and
/// window. Day 0 is the first benchmark trading date on or after the event
/// date. A firm with fewer than the minimum estimation observations, or with
/// a gap inside an event window, is dropped from that event with a warning.
pub fn run_event_study<T: Scalar>(
    panel: &PricePanel<T>,
    firms: &[FirmRecord<T>],
    events: &[EventSpec],
) -> Result<EventStudyOutput<T>> {
    for e in events {
        e.validate()?;
    }
    for f in firms {
        panel.firm(&f.ticker)?;
    }
    let benchmark = build_benchmark(panel, firms)?;
    let calendar = &benchmark.dates;
    let mut out = EventStudyOutput {
        car_rows: Vec::new(),
        fits: Vec::new(),
        skipped: Vec::new(),
        day0: BTreeMap::new(),
    };
    for event in events {
        let day0 = event_day_index(calendar, event.date)?;
        out.day0.insert(event.event_id.clone(), calendar[day0]);
        let est_dates = clipped_window_dates(calendar, day0, event.estimation);
        let nominal = event.estimation.days();
        let windows: Vec<(Window, Vec<chrono::NaiveDate>)> = event
            .windows
            .iter()
            .map(|&w| Ok((w, window_dates(calendar, day0, w)?)))
            .collect::<Result<_>>()
            .map_err(|e| Error::Data(format!("event {}: {e}", event.event_id)))?;

        for firm in firms {
            let series = panel.firm(&firm.ticker)?;
            let returns = series.returns();
            let volumes = series.volume_series();
            let per_firm = || -> Result<(MarketModelFit<T>, Vec<CarRow<T>>)> {
                let fit = fit_market_model(&firm.ticker, &returns, &benchmark, &est_dates)?;
                if fit.n_estimation < nominal {
                    log::warn!(
                        "{} {}: estimation window has {} of {nominal} observations",
                        event.event_id,
                        firm.ticker,
                        fit.n_estimation
                    );
                }
                let rows = windows
                    .iter()
                    .map(|(w, dates)| {
                        Ok(CarRow {
                            ticker: firm.ticker.clone(),
                            event_id: event.event_id.clone(),
                            window: *w,
                            car: compute_car(&fit, &returns, &benchmark, dates)?,
                            abvol: abnormal_log_volume(&firm.ticker, &volumes, &est_dates, dates)?,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok((fit, rows))
            };
            match per_firm() {
                Ok((fit, rows)) => {
                    out.fits.push((event.event_id.clone(), fit));
                    out.car_rows.extend(rows);
                }
                Err(Error::Data(reason)) => {
                    log::warn!("{} {}: skipped: {reason}", event.event_id, firm.ticker);
                    out.skipped.push((event.event_id.clone(), firm.ticker.clone(), reason));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// One row of the group table. Means are `None` for an empty group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroupRow<T: Scalar> {
    pub event_id: String,
    pub group: Group,
    pub n: usize,
    pub mean_car: Option<T>,
    pub mean_abvol: Option<T>,
}

/// Group means of the `window` CAR and AbVol, event-major in `events` order,
/// then vendor, financial, control.
pub fn group_event_table<T: Scalar>(
    car_rows: &[CarRow<T>],
    firms: &[FirmRecord<T>],
    events: &[EventSpec],
    window: Window,
) -> Result<Vec<GroupRow<T>>> {
    let group_of: BTreeMap<&str, Group> = firms.iter().map(|f| (f.ticker.as_str(), f.group)).collect();
    // (CARs, AbVols) per (event, group)
    type Samples<T> = (Vec<T>, Vec<T>);
    let mut cells: BTreeMap<(&str, Group), Samples<T>> = BTreeMap::new();
    for r in car_rows {
        let group = *group_of
            .get(r.ticker.as_str())
            .ok_or_else(|| Error::Data(format!("ticker `{}` has no firm record", r.ticker)))?;
        if r.window == window {
            let cell = cells.entry((r.event_id.as_str(), group)).or_default();
            cell.0.push(r.car);
            cell.1.push(r.abvol);
        }
    }
    let mut rows = Vec::new();
    for e in events {
        for g in Group::ALL {
            let (cars, abvols) = cells.remove(&(e.event_id.as_str(), g)).unwrap_or_default();
            rows.push(GroupRow {
                event_id: e.event_id.clone(),
                group: g,
                n: cars.len(),
                mean_car: mean(&cars),
                mean_abvol: mean(&abvols),
            });
        }
    }
    Ok(rows)
}

/// Regression terms in report order; the intercept is estimated but not
/// reported.
pub const REGRESSION_TERMS: [&str; 3] = ["exposure", "vendor", "financial"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegressionTable<T: Scalar> {
    pub fit: OlsResult<T>,
    /// Tickers in row order of the fit.
    pub tickers: Vec<String>,
}

impl<T: Scalar> RegressionTable<T> {
    /// `(term, coefficient, t)` for the reported terms.
    pub fn terms(&self) -> Vec<(&'static str, T, T)> {
        REGRESSION_TERMS
            .iter()
            .enumerate()
            .map(|(j, &t)| (t, self.fit.coefficients[j + 1], self.fit.t_stats[j + 1]))
            .collect()
    }

    /// Coefficient of a reported term.
    pub fn coefficient(&self, term: &str) -> Option<T> {
        self.terms().into_iter().find(|t| t.0 == term).map(|t| t.1)
    }
}

/// OLS of per-firm CAR on an intercept, exposure, a vendor dummy and a
/// financial dummy; control firms are the omitted category.
pub fn cross_section_regression<T: Scalar>(
    car_by_firm: &BTreeMap<String, T>,
    firms: &[FirmRecord<T>],
) -> Result<RegressionTable<T>> {
    let by_ticker: BTreeMap<&str, &FirmRecord<T>> = firms.iter().map(|f| (f.ticker.as_str(), f)).collect();
    let mut y = Vec::new();
    let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut tickers = Vec::new();
    for (ticker, &car) in car_by_firm {
        let f = by_ticker
            .get(ticker.as_str())
            .ok_or_else(|| Error::Data(format!("ticker `{ticker}` has no firm record")))?;
        y.push(car);
        cols[0].push(f.exposure);
        cols[1].push(if f.group == Group::Vendor { T::one() } else { T::zero() });
        cols[2].push(if f.group == Group::Financial { T::one() } else { T::zero() });
        tickers.push(ticker.clone());
    }
    if y.len() < 5 {
        return Err(Error::Contract(format!("cross-section regression needs at least 5 firms, got {}", y.len())));
    }
    let fit = ols_fit(&y, &cols, true)?;
    Ok(RegressionTable { fit, tickers })
}

/// Headline CAR per ticker for one event.
pub fn car_by_firm<T: Scalar>(car_rows: &[CarRow<T>], event_id: &str, window: Window) -> BTreeMap<String, T> {
    car_rows
        .iter()
        .filter(|r| r.event_id == event_id && r.window == window)
        .map(|r| (r.ticker.clone(), r.car))
        .collect()
}

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const EVENT_TABLE_COLUMNS: [&str; 5] = ["event_id", "group", "n", "mean_car", "mean_abvol"];

pub fn write_event_table_csv<T: Scalar, W: std::io::Write>(rows: &[GroupRow<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_TABLE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.event_id.clone(),
            r.group.as_str().to_owned(),
            r.n.to_string(),
            fmt_opt(r.mean_car),
            fmt_opt(r.mean_abvol),
        ])?;
    }
    w.flush().map_err(|e| Error::io("event_table.csv", e))?;
    Ok(())
}

/// Reads `event_table.csv`.
pub fn read_event_table_csv<R: std::io::Read>(reader: R) -> Result<Vec<GroupRow<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != EVENT_TABLE_COLUMNS {
        return Err(Error::Data(format!("event table header must be `{}`", EVENT_TABLE_COLUMNS.join(","))));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Data(format!("event table line {}: {e}", i + 2))))
        .collect()
}

pub const REGRESSION_COLUMNS: [&str; 3] = ["term", "coefficient", "t_stat"];

/// Term rows, then `r_squared` and `n` footer rows with an empty t column.
pub fn write_regression_csv<T: Scalar, W: std::io::Write>(table: &RegressionTable<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGRESSION_COLUMNS)?;
    for (term, c, t) in table.terms() {
        w.write_record([term.to_owned(), c.to_string(), t.to_string()])?;
    }
    w.write_record(["r_squared".to_owned(), table.fit.r_squared.to_string(), String::new()])?;
    w.write_record(["n".to_owned(), table.fit.n_obs.to_string(), String::new()])?;
    w.flush().map_err(|e| Error::io("regression.csv", e))?;
    Ok(())
}

pub const CAR_COLUMNS: [&str; 5] = ["event_id", "ticker", "window", "car", "abvol"];

/// Per-firm rows sorted by event, ticker and window.
pub fn write_car_rows_csv<T: Scalar, W: std::io::Write>(rows: &[CarRow<T>], out: W) -> Result<()> {
    let mut sorted: Vec<&CarRow<T>> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.event_id, &a.ticker, a.window).cmp(&(&b.event_id, &b.ticker, b.window)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CAR_COLUMNS)?;
    for r in sorted {
        w.write_record([r.event_id.clone(), r.ticker.clone(), r.window.label(), r.car.to_string(), r.abvol.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("car.csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventstudy::default_events;
    use approx::assert_abs_diff_eq;

    fn rec(t: &str, g: Group, e: f64) -> FirmRecord<f64> {
        FirmRecord {
            ticker: t.into(),
            group: g,
            exposure: e,
        }
    }

    fn row(t: &str, ev: &str, car: f64) -> CarRow<f64> {
        CarRow {
            ticker: t.into(),
            event_id: ev.into(),
            window: Window::new(-1, 1),
            car,
            abvol: 2.0 * car,
        }
    }

    #[test]
    fn group_means() {
        let firms = [rec("V1", Group::Vendor, 0.0), rec("V2", Group::Vendor, 0.0), rec("F1", Group::Financial, 0.0)];
        let rows = [row("V1", "E3", -0.01), row("V2", "E3", -0.03), row("F1", "E3", 0.004)];
        let t = group_event_table(&rows, &firms, &default_events(), Window::new(-1, 1)).unwrap();
        assert_eq!(t.len(), 9);
        let e3: Vec<_> = t.iter().filter(|r| r.event_id == "E3").collect();
        assert_eq!(e3.iter().map(|r| r.group).collect::<Vec<_>>(), Group::ALL);
        assert_eq!(e3[0].n, 2);
        assert_abs_diff_eq!(e3[0].mean_car.unwrap(), -0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(e3[1].mean_car.unwrap(), 0.004, epsilon = 1e-15);
        assert_eq!((e3[2].n, e3[2].mean_car), (0, None));
        assert_eq!(t[0].event_id, "E1");

        let unknown = group_event_table(&[row("ZZ", "E3", 0.0)], &firms, &default_events(), Window::new(-1, 1));
        assert!(matches!(unknown, Err(Error::Data(_))));
    }

    #[test]
    fn planted_vendor_effect_is_exact() {
        let firms: Vec<_> = (0..9)
            .map(|i| {
                let g = Group::ALL[i % 3];
                rec(&format!("T{i}"), g, i as f64 * 0.7 % 2.0)
            })
            .collect();
        let cars: BTreeMap<String, f64> = firms
            .iter()
            .map(|f| (f.ticker.clone(), 0.01 - if f.group == Group::Vendor { 0.05 } else { 0.0 }))
            .collect();
        let reg = cross_section_regression(&cars, &firms).unwrap();
        assert_abs_diff_eq!(reg.coefficient("vendor").unwrap(), -0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(reg.fit.r_squared, 1.0, epsilon = 1e-12);
        assert_eq!(reg.terms().iter().map(|t| t.0).collect::<Vec<_>>(), REGRESSION_TERMS);
    }

    #[test]
    fn regression_contracts() {
        let firms: Vec<_> = (0..6).map(|i| rec(&format!("T{i}"), Group::Vendor, i as f64)).collect();
        let cars: BTreeMap<String, f64> = firms.iter().map(|f| (f.ticker.clone(), f.exposure * 0.1)).collect();
        assert!(matches!(cross_section_regression(&cars, &firms), Err(Error::Numerical(_))));
        let few: BTreeMap<String, f64> = cars.into_iter().take(4).collect();
        assert!(matches!(cross_section_regression(&few, &firms), Err(Error::Contract(_))));
    }

    #[test]
    fn csv_layouts() {
        let firms = [rec("V1", Group::Vendor, 0.0)];
        let t = group_event_table(&[row("V1", "E1", -0.5)], &firms, &default_events()[..1], Window::new(-1, 1)).unwrap();
        let mut buf = Vec::new();
        write_event_table_csv(&t, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "event_id,group,n,mean_car,mean_abvol\nE1,vendor,1,-0.5,-1\nE1,financial,0,,\nE1,control,0,,\n"
        );
        assert_eq!(read_event_table_csv(buf.as_slice()).unwrap(), t);
    }
}
