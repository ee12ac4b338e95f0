//! Synthetic price panels with planted market-model parameters and event
//! effects, for recovery tests and demonstrations.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use rand_distr::{Distribution, StandardNormal};

use super::panel::{FirmSeries, PricePanel};
use super::{EventSpec, FirmRecord, Group};
use crate::seeding::rng_from_seed;

/// Planted parameters for one firm. Control firms ignore `alpha`, `beta`
/// and `delta`: their return is the market factor plus noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFirm {
    pub ticker: String,
    pub group: Group,
    pub exposure: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Abnormal return added on event day 0.
    pub delta: f64,
    /// Added to `log(1 + volume)` on event day 0.
    pub volume_shock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    /// Trading days (weekdays) in the panel.
    pub n_days: usize,
    /// Index of event day 0 in the trading calendar.
    pub event_index: usize,
    pub firms: Vec<PlantedFirm>,
    /// Standard deviation of the daily market factor.
    pub market_sigma: f64,
    /// Standard deviation of idiosyncratic daily returns.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `n_vendor` vendors with event effect `vendor_delta`, `n_financial`
    /// financial users with no effect, `n_control` controls; betas spread
    /// over [0.6, 1.4], small alphas, exposures spread over [0, 3].
    pub fn standard(
        n_vendor: usize,
        n_financial: usize,
        n_control: usize,
        vendor_delta: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Self {
        let mut firms = Vec::new();
        let groups = [(Group::Vendor, n_vendor, "V"), (Group::Financial, n_financial, "F"), (Group::Control, n_control, "C")];
        let total = (n_vendor + n_financial + n_control).max(2) as f64;
        for (group, n, prefix) in groups {
            for i in 0..n {
                let k = firms.len() as f64;
                firms.push(PlantedFirm {
                    ticker: format!("{prefix}{:02}", i + 1),
                    group,
                    exposure: 3.0 * ((k * 0.618_033_988_75) % 1.0),
                    alpha: 0.0004 * (k / (total - 1.0) - 0.5),
                    beta: 0.6 + 0.8 * k / (total - 1.0),
                    delta: if group == Group::Vendor { vendor_delta } else { 0.0 },
                    volume_shock: if group == Group::Vendor { 0.5 } else { 0.0 },
                });
            }
        }
        Self {
            start: NaiveDate::from_ymd_opt(2025, 6, 2).expect("valid date"),
            n_days: 200,
            event_index: 170,
            firms,
            market_sigma: 0.01,
            noise_sigma,
            seed,
        }
    }

    pub fn calendar(&self) -> Vec<NaiveDate> {
        self.start
            .iter_days()
            .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
            .take(self.n_days)
            .collect()
    }

    pub fn event_date(&self) -> NaiveDate {
        self.calendar()[self.event_index]
    }

    pub fn event(&self) -> EventSpec {
        EventSpec::new("S1", self.event_date(), "synthetic")
    }

    pub fn firm_records(&self) -> Vec<FirmRecord<f64>> {
        self.firms
            .iter()
            .map(|f| FirmRecord {
                ticker: f.ticker.clone(),
                group: f.group,
                exposure: f.exposure,
            })
            .collect()
    }

    /// Draws the panel. Treated returns load on the realised equal-weighted
    /// control return, so with zero noise the market model is exact.
    pub fn generate(&self) -> PricePanel<f64> {
        let calendar = self.calendar();
        let mut rng = rng_from_seed(self.seed);
        let mut draw = |s: f64| -> f64 {
            let z: f64 = StandardNormal.sample(&mut rng);
            s * z
        };
        let n = calendar.len();
        let market: Vec<f64> = (0..n).map(|_| draw(self.market_sigma)).collect();
        let mut returns: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let controls: Vec<&PlantedFirm> = self.firms.iter().filter(|f| f.group == Group::Control).collect();
        for f in &controls {
            returns.insert(&f.ticker, market.iter().map(|m| m + draw(self.noise_sigma)).collect());
        }
        let bench: Vec<f64> = (0..n)
            .map(|t| controls.iter().map(|f| returns[f.ticker.as_str()][t]).sum::<f64>() / controls.len().max(1) as f64)
            .collect();
        for f in self.firms.iter().filter(|f| f.group != Group::Control) {
            let r = (0..n)
                .map(|t| {
                    let event = if t == self.event_index { f.delta } else { 0.0 };
                    f.alpha + f.beta * bench[t] + event + draw(self.noise_sigma)
                })
                .collect();
            returns.insert(&f.ticker, r);
        }

        let mut firms = BTreeMap::new();
        for f in &self.firms {
            let r = &returns[f.ticker.as_str()];
            let mut closes = Vec::with_capacity(n);
            let mut c = 50.0;
            closes.push(c);
            for x in &r[1..] {
                c *= 1.0 + x;
                closes.push(c);
            }
            let volumes = (0..n)
                .map(|t| {
                    let base = 1.0e6f64.ln_1p();
                    let shock = if t == self.event_index { f.volume_shock } else { 0.0 };
                    (base + shock).exp_m1()
                })
                .collect();
            firms.insert(
                f.ticker.clone(),
                FirmSeries {
                    ticker: f.ticker.clone(),
                    dates: calendar.clone(),
                    closes,
                    volumes,
                },
            );
        }
        PricePanel {
            firms,
            dropped_missing: BTreeMap::new(),
        }
    }
}
