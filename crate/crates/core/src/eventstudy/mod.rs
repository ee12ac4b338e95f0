//! Event study of capability announcements: price-panel ingestion, an
//! equal-weighted control benchmark, market-model abnormal returns, abnormal
//! log volume, filing-based exposure scores, group tables and a reduced-form
//! cross-sectional regression.

pub mod exposure;
pub mod model;
pub mod panel;
pub mod synthetic;
pub mod tables;

use std::collections::BTreeMap;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use exposure::{default_keywords, score_documents, score_filings, Keyword, ScoreMode};
pub use model::{
    abnormal_log_volume, build_benchmark, compute_car, fit_market_model, MarketModelFit, Window, MIN_ESTIMATION_OBS,
};
pub use panel::{load_price_panel, DatedSeries, FirmSeries, PricePanel};
pub use tables::{
    cross_section_regression, group_event_table, run_event_study, CarRow, EventStudyOutput, GroupRow,
    RegressionTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Vendor,
    Financial,
    Control,
}

impl Group {
    /// Table order.
    pub const ALL: [Group; 3] = [Group::Vendor, Group::Financial, Group::Control];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Vendor => "vendor",
            Group::Financial => "financial",
            Group::Control => "control",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vendor" => Ok(Group::Vendor),
            "financial" => Ok(Group::Financial),
            "control" => Ok(Group::Control),
            _ => Err(Error::Data(format!("unknown group `{s}` (vendor | financial | control)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FirmRecord<T: Scalar> {
    pub ticker: String,
    pub group: Group,
    /// Non-negative exposure score.
    pub exposure: T,
}

/// Event windows used when an events file gives only dates.
pub const DEFAULT_WINDOWS: [Window; 3] = [Window::new(0, 1), Window::new(-1, 1), Window::new(-3, 3)];
/// Window reported in the group table and used as the regression response.
pub const HEADLINE_WINDOW: Window = Window::new(-1, 1);
pub const DEFAULT_ESTIMATION: Window = Window::new(-120, -20);
/// Event whose headline CARs feed the cross-sectional regression.
pub const DEFAULT_REGRESSION_EVENT: &str = "E3";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub event_id: String,
    pub date: NaiveDate,
    pub label: String,
    pub windows: Vec<Window>,
    pub estimation: Window,
}

impl EventSpec {
    pub fn new(event_id: &str, date: NaiveDate, label: &str) -> Self {
        Self {
            event_id: event_id.into(),
            date,
            label: label.into(),
            windows: DEFAULT_WINDOWS.to_vec(),
            estimation: DEFAULT_ESTIMATION,
        }
    }

    /// Windows non-empty, the estimation window ends before every event
    /// window starts.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.windows.iter().map(|w| w.start).min() else {
            return Err(Error::Config(format!("event {}: no event windows", self.event_id)));
        };
        if let Some(w) = self.windows.iter().chain([&self.estimation]).find(|w| w.start > w.end) {
            return Err(Error::Config(format!("event {}: empty window {w}", self.event_id)));
        }
        if self.estimation.end >= first {
            return Err(Error::Config(format!(
                "event {}: estimation window {} must end before {first}",
                self.event_id, self.estimation
            )));
        }
        Ok(())
    }
}

/// The three headline announcement dates.
pub fn default_events() -> Vec<EventSpec> {
    let d = |m, day| NaiveDate::from_ymd_opt(2026, m, day).expect("valid date");
    vec![
        EventSpec::new("E1", d(1, 27), "service-delivery signal"),
        EventSpec::new("E3", d(2, 24), "market-validation event"),
        EventSpec::new("E4", d(3, 5), "labour-market report"),
    ]
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if got != expected {
        return Err(Error::Data(format!(
            "{what} header must be `{}`, got `{}`",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub const FIRM_COLUMNS: [&str; 2] = ["ticker", "group"];

/// Reads `firms.csv` into ticker → group.
pub fn read_firms<R: Read>(reader: R) -> Result<BTreeMap<String, Group>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &FIRM_COLUMNS, "firms")?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("firms line {line}: {e}")))?;
        let ticker = rec[0].to_owned();
        if ticker.is_empty() {
            return Err(Error::Data(format!("firms line {line}: empty ticker")));
        }
        let group: Group = rec[1].parse().map_err(|e| Error::Data(format!("firms line {line}: {e}")))?;
        if out.insert(ticker.clone(), group).is_some() {
            return Err(Error::Data(format!("firms line {line}: duplicate ticker `{ticker}`")));
        }
    }
    Ok(out)
}

/// Joins groups with exposure scores; a firm absent from `exposure` scores 0.
pub fn firm_records<T: Scalar>(groups: &BTreeMap<String, Group>, exposure: &BTreeMap<String, f64>) -> Result<Vec<FirmRecord<T>>> {
    groups
        .iter()
        .map(|(ticker, &group)| {
            let e = match exposure.get(ticker) {
                Some(&e) if e >= 0.0 && e.is_finite() => e,
                Some(&e) => return Err(Error::Data(format!("{ticker}: exposure must be finite and >= 0, got {e}"))),
                None => {
                    log::warn!("{ticker}: no exposure score, using 0");
                    0.0
                }
            };
            Ok(FirmRecord {
                ticker: ticker.clone(),
                group,
                exposure: T::of(e),
            })
        })
        .collect()
}

pub const EVENT_COLUMNS: [&str; 3] = ["event_id", "date", "label"];

/// Reads `events.csv`; every event gets the default windows.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventSpec>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &EVENT_COLUMNS, "events")?;
    let mut out: Vec<EventSpec> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::Data(format!("events line {line}: {e}")))?;
        let date = panel::parse_date(&rec[1], line).map_err(|e| Error::Data(format!("events {e}")))?;
        if rec[0].is_empty() {
            return Err(Error::Data(format!("events line {line}: empty event_id")));
        }
        if out.iter().any(|e| e.event_id == rec[0]) {
            return Err(Error::Data(format!("events line {line}: duplicate event_id `{}`", &rec[0])));
        }
        out.push(EventSpec::new(&rec[0], date, &rec[2]));
    }
    if out.is_empty() {
        return Err(Error::Data("events file lists no events".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn firms_file() {
        let g = read_firms("ticker,group\nAAA,vendor\nBBB,control\n".as_bytes()).unwrap();
        assert_eq!(g["AAA"], Group::Vendor);
        assert!(matches!(read_firms("ticker,group\nAAA,bank\n".as_bytes()), Err(Error::Data(m)) if m.contains("line 2")));
        assert!(read_firms("ticker,group\nAAA,vendor\nAAA,control\n".as_bytes()).is_err());
        assert!(read_firms("ticker,kind\n".as_bytes()).is_err());
    }

    #[test]
    fn events_file_and_defaults() {
        let ev = read_events("event_id,date,label\nE3,2026-02-24,validation\n".as_bytes()).unwrap();
        assert_eq!(ev[0].windows, DEFAULT_WINDOWS);
        assert_eq!(ev[0].estimation, Window::new(-120, -20));
        ev[0].validate().unwrap();
        assert!(read_events("event_id,date,label\nE3,24/02/2026,x\n".as_bytes()).is_err());
        let ids: Vec<_> = default_events().into_iter().map(|e| (e.event_id, e.date.to_string())).collect();
        assert_eq!(
            ids,
            [("E1".into(), "2026-01-27".into()), ("E3".into(), "2026-02-24".into()), ("E4".into(), "2026-03-05".into())]
        );
    }

    #[test]
    fn overlapping_estimation_window_rejected() {
        let mut e = default_events().remove(0);
        e.estimation = Window::new(-20, -1);
        assert!(matches!(e.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_exposure_is_zero() {
        let groups = read_firms("ticker,group\nAAA,vendor\n".as_bytes()).unwrap();
        let recs: Vec<FirmRecord<f64>> = firm_records(&groups, &BTreeMap::new()).unwrap();
        assert_eq!(recs[0].exposure, 0.0);
        let bad = BTreeMap::from([("AAA".to_string(), -1.0)]);
        assert!(firm_records::<f64>(&groups, &bad).is_err());
    }
}
