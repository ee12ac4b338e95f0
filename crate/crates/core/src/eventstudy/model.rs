use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::panel::{DatedSeries, PricePanel};
use super::{FirmRecord, Group};
use crate::error::{Error, Result};
use crate::metrics::ols_fit;
use crate::scalar::{mean, Scalar};

/// Inclusive window of trading-day offsets relative to event day 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: i32,
    pub end: i32,
}

impl Window {
    pub const fn new(start: i32, end: i32) -> Self {
        Self { start, end }
    }

    pub fn days(&self) -> usize {
        (self.end - self.start + 1).max(0) as usize
    }

    /// `[a,b]` with explicit signs, e.g. `[-1,+1]`.
    pub fn label(&self) -> String {
        format!("[{:+},{:+}]", self.start, self.end).replace("+0", "0")
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Minimum overlapping estimation observations for a market-model fit.
pub const MIN_ESTIMATION_OBS: usize = 30;

/// Equal-weighted return of the control firms on the dates where every
/// control has a return.
pub fn build_benchmark<T: Scalar>(panel: &PricePanel<T>, firms: &[FirmRecord<T>]) -> Result<DatedSeries<T>> {
    let controls: Vec<DatedSeries<T>> = firms
        .iter()
        .filter(|f| f.group == Group::Control)
        .map(|f| panel.firm(&f.ticker).map(|s| s.returns()))
        .collect::<Result<_>>()?;
    let Some(first) = controls.first() else {
        return Err(Error::Contract("benchmark needs at least one control firm".into()));
    };
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, &d) in first.dates.iter().enumerate() {
        let mut acc = first.values[i];
        let mut all = true;
        for c in &controls[1..] {
            match c.get(d) {
                Some(r) => acc = acc + r,
                None => {
                    all = false;
                    break;
                }
            }
        }
        if all {
            dates.push(d);
            values.push(acc / T::of_usize(controls.len()));
        }
    }
    DatedSeries::new(dates, values)
}

/// Index of event day 0 in `calendar`: the first trading date on or after
/// `event_date`.
pub fn event_day_index(calendar: &[NaiveDate], event_date: NaiveDate) -> Result<usize> {
    let i = calendar.partition_point(|&d| d < event_date);
    if i == calendar.len() {
        return Err(Error::Data(format!("no trading date on or after event date {event_date}")));
    }
    Ok(i)
}

/// Trading dates covered by `window` around day 0 of `calendar`.
pub fn window_dates(calendar: &[NaiveDate], day0: usize, window: Window) -> Result<Vec<NaiveDate>> {
    let lo = day0 as i64 + window.start as i64;
    let hi = day0 as i64 + window.end as i64;
    if lo < 0 || hi >= calendar.len() as i64 || lo > hi {
        return Err(Error::Data(format!(
            "window {window} around {} falls outside the trading calendar ({} .. {})",
            calendar[day0],
            calendar.first().map_or_else(String::new, |d| d.to_string()),
            calendar.last().map_or_else(String::new, |d| d.to_string()),
        )));
    }
    Ok(calendar[lo as usize..=hi as usize].to_vec())
}

/// Like [`window_dates`] but clipped to the calendar; used for the
/// estimation window, whose start may precede the data.
pub fn clipped_window_dates(calendar: &[NaiveDate], day0: usize, window: Window) -> Vec<NaiveDate> {
    let lo = (day0 as i64 + window.start as i64).max(0);
    let hi = (day0 as i64 + window.end as i64).min(calendar.len() as i64 - 1);
    if lo > hi {
        return Vec::new();
    }
    calendar[lo as usize..=hi as usize].to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MarketModelFit<T: Scalar> {
    pub ticker: String,
    pub alpha: T,
    pub beta: T,
    /// Residual standard deviation (divides by n − 2).
    pub residual_std: T,
    pub n_estimation: usize,
}

impl<T: Scalar> MarketModelFit<T> {
    pub fn abnormal(&self, firm_return: T, benchmark_return: T) -> T {
        firm_return - self.alpha - self.beta * benchmark_return
    }
}

/// OLS of firm returns on an intercept and the benchmark over the
/// estimation dates where both are observed.
pub fn fit_market_model<T: Scalar>(
    ticker: &str,
    firm: &DatedSeries<T>,
    benchmark: &DatedSeries<T>,
    estimation_dates: &[NaiveDate],
) -> Result<MarketModelFit<T>> {
    let (y, x): (Vec<T>, Vec<T>) = estimation_dates
        .iter()
        .filter_map(|&d| Some((firm.get(d)?, benchmark.get(d)?)))
        .unzip();
    if y.len() < MIN_ESTIMATION_OBS {
        return Err(Error::Data(format!(
            "{ticker}: {} estimation observations, need at least {MIN_ESTIMATION_OBS}",
            y.len()
        )));
    }
    let fit = ols_fit(&y, &[x], true).map_err(|e| match e {
        Error::Numerical(m) => Error::Numerical(format!("{ticker}: market model: {m}")),
        other => other,
    })?;
    let ssr: T = fit.residuals.iter().map(|&r| r * r).sum();
    Ok(MarketModelFit {
        ticker: ticker.to_owned(),
        alpha: fit.coefficients[0],
        beta: fit.coefficients[1],
        residual_std: (ssr / T::of_usize(y.len() - 2)).sqrt(),
        n_estimation: y.len(),
    })
}

/// Abnormal returns on `dates`; every date must be observed for both series.
pub fn abnormal_returns<T: Scalar>(
    fit: &MarketModelFit<T>,
    firm: &DatedSeries<T>,
    benchmark: &DatedSeries<T>,
    dates: &[NaiveDate],
) -> Result<Vec<T>> {
    dates
        .iter()
        .map(|&d| {
            let r = firm.require(d, &fit.ticker)?;
            let m = benchmark.require(d, "benchmark")?;
            Ok(fit.abnormal(r, m))
        })
        .collect()
}

/// Cumulative abnormal return over the window dates.
pub fn compute_car<T: Scalar>(
    fit: &MarketModelFit<T>,
    firm: &DatedSeries<T>,
    benchmark: &DatedSeries<T>,
    window_dates: &[NaiveDate],
) -> Result<T> {
    Ok(abnormal_returns(fit, firm, benchmark, window_dates)?.into_iter().sum())
}

/// Event-window sum of `log(1 + volume)` in excess of its estimation-window
/// mean.
pub fn abnormal_log_volume<T: Scalar>(
    ticker: &str,
    volumes: &DatedSeries<T>,
    estimation_dates: &[NaiveDate],
    event_dates: &[NaiveDate],
) -> Result<T> {
    let log_vol = |d: NaiveDate| -> Result<T> {
        let v = volumes.require(d, ticker)?;
        if v < T::zero() {
            return Err(Error::Data(format!("{ticker}: negative volume on {d}")));
        }
        Ok(v.ln_1p())
    };
    let est: Vec<T> = estimation_dates
        .iter()
        .filter(|&&d| volumes.get(d).is_some())
        .map(|&d| log_vol(d))
        .collect::<Result<_>>()?;
    let baseline = mean(&est).ok_or_else(|| Error::Data(format!("{ticker}: no estimation-window volume")))?;
    event_dates
        .iter()
        .map(|&d| Ok(log_vol(d)? - baseline))
        .sum::<Result<T>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventstudy::panel::FirmSeries;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn dates(n: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2025, 6, 2).unwrap();
        (0..n as u64).map(|i| d0 + chrono::Days::new(i)).collect()
    }

    fn series(values: Vec<f64>) -> DatedSeries<f64> {
        DatedSeries::new(dates(values.len()), values).unwrap()
    }

    fn wiggle(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.01 * ((i * 7 % 11) as f64 - 5.0) / 5.0).collect()
    }

    fn firm(ticker: &str, group: Group) -> FirmRecord<f64> {
        FirmRecord {
            ticker: ticker.into(),
            group,
            exposure: 0.0,
        }
    }

    fn panel_from_returns(rets: &[(&str, Vec<f64>)]) -> PricePanel<f64> {
        let mut firms = BTreeMap::new();
        for (t, r) in rets {
            let mut closes = vec![100.0];
            for x in r {
                closes.push(closes.last().unwrap() * (1.0 + x));
            }
            firms.insert(
                t.to_string(),
                FirmSeries {
                    ticker: t.to_string(),
                    dates: dates(closes.len()),
                    volumes: vec![1.0; closes.len()],
                    closes,
                },
            );
        }
        PricePanel {
            firms,
            dropped_missing: BTreeMap::new(),
        }
    }

    #[test]
    fn benchmark_examples() {
        let p = panel_from_returns(&[("C1", vec![0.02, 0.01]), ("C2", vec![0.0, -0.01]), ("V", vec![0.5, 0.5])]);
        let one = build_benchmark(&p, &[firm("C1", Group::Control), firm("V", Group::Vendor)]).unwrap();
        assert_abs_diff_eq!(one.values[0], 0.02, epsilon = 1e-12);
        let two = build_benchmark(&p, &[firm("C1", Group::Control), firm("C2", Group::Control)]).unwrap();
        assert_abs_diff_eq!(two.values[0], 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(two.values[1], 0.0, epsilon = 1e-12);
        assert!(matches!(build_benchmark(&p, &[firm("V", Group::Vendor)]), Err(Error::Contract(_))));
    }

    #[test]
    fn market_model_recovers_exact_lines() {
        let m = series(wiggle(60));
        let f = series(m.values.iter().map(|x| 0.001 + 1.5 * x).collect());
        let fit = fit_market_model("F", &f, &m, &m.dates).unwrap();
        assert_abs_diff_eq!(fit.alpha, 0.001, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta, 1.5, epsilon = 1e-12);
        let id = fit_market_model("I", &m, &m, &m.dates).unwrap();
        assert_abs_diff_eq!(id.alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(id.beta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn market_model_errors() {
        let m = series(wiggle(60));
        assert!(matches!(fit_market_model("F", &m, &m, &m.dates[..29]), Err(Error::Data(_))));
        let flat = series(vec![0.01; 60]);
        assert!(matches!(fit_market_model("F", &m, &flat, &flat.dates), Err(Error::Numerical(_))));
    }

    #[test]
    fn car_examples() {
        let fit = MarketModelFit {
            ticker: "F".into(),
            alpha: 0.0,
            beta: 0.0,
            residual_std: 0.0,
            n_estimation: 30,
        };
        let f = series(vec![0.01, -0.02, 0.005]);
        let m = series(vec![0.0; 3]);
        assert_abs_diff_eq!(compute_car(&fit, &f, &m, &f.dates).unwrap(), -0.005, epsilon = 1e-15);

        let online = series(vec![0.003, 0.004]);
        let fit2 = MarketModelFit {
            alpha: 0.001,
            beta: 2.0,
            ..fit.clone()
        };
        let mk = series(vec![0.001, 0.0015]);
        assert_abs_diff_eq!(compute_car(&fit2, &online, &mk, &online.dates).unwrap(), 0.0, epsilon = 1e-15);

        let later = dates(5)[4];
        let err = compute_car(&fit, &f, &m, &[later]).unwrap_err();
        assert!(matches!(err, Error::Data(ref msg) if msg.contains(&later.to_string())));
    }

    #[test]
    fn abnormal_volume_examples() {
        let e = std::f64::consts::E;
        let mut v = vec![e - 1.0; 10];
        v.push(e * e - 1.0);
        let vol = series(v);
        let ab = abnormal_log_volume("F", &vol, &vol.dates[..10], &vol.dates[10..]).unwrap();
        assert_abs_diff_eq!(ab, 1.0, epsilon = 1e-12);

        let same = series(vec![5.0; 4]);
        assert_abs_diff_eq!(
            abnormal_log_volume("F", &same, &same.dates[..3], &same.dates[3..]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        let zero = series(vec![0.0; 4]);
        assert_eq!(abnormal_log_volume("F", &zero, &zero.dates[..3], &zero.dates[1..]).unwrap(), 0.0);
        let neg = series(vec![1.0, 1.0, -1.0]);
        assert!(matches!(abnormal_log_volume("F", &neg, &neg.dates[..2], &neg.dates[2..]), Err(Error::Data(_))));
    }

    #[test]
    fn event_alignment_rolls_forward() {
        let cal = vec![
            NaiveDate::from_ymd_opt(2026, 2, 20).unwrap(),
            NaiveDate::from_ymd_opt(2026, 2, 23).unwrap(),
            NaiveDate::from_ymd_opt(2026, 2, 24).unwrap(),
        ];
        let sat = NaiveDate::from_ymd_opt(2026, 2, 21).unwrap();
        assert_eq!(event_day_index(&cal, sat).unwrap(), 1);
        assert_eq!(event_day_index(&cal, cal[2]).unwrap(), 2);
        assert!(event_day_index(&cal, NaiveDate::from_ymd_opt(2026, 3, 1).unwrap()).is_err());
        assert_eq!(window_dates(&cal, 1, Window::new(-1, 1)).unwrap(), cal);
        assert!(window_dates(&cal, 1, Window::new(-2, 0)).is_err());
        assert_eq!(clipped_window_dates(&cal, 2, Window::new(-120, -1)), cal[..2].to_vec());
    }

    #[test]
    fn window_labels() {
        assert_eq!(Window::new(-1, 1).label(), "[-1,+1]");
        assert_eq!(Window::new(0, 1).label(), "[0,+1]");
        assert_eq!(Window::new(-3, 3).days(), 7);
    }
}
