#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use afmm::eventstudy::exposure::write_exposure_csv;
use afmm::eventstudy::synthetic::SyntheticSpec;
use afmm::eventstudy::ScoreMode;
use chrono::NaiveDate;

pub fn afmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afmm"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn afmm_ok(args: &[&str]) -> Output {
    let out = afmm(args);
    assert!(
        out.status.success(),
        "afmm {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Configuration small enough for per-test simulation and sweeps.
pub fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("fast.json");
    let text = r#"{
  "seed": 3,
  "population": { "n_agents": 20 },
  "simulation": { "horizon": 300, "burn_in": 30 },
  "sweep": {
    "parameters": [
      { "name": "C", "values": [0.1, 0.5, 0.9] },
      { "name": "H", "values": [0.3, 0.7] }
    ],
    "seeds_per_cell": 2
  }
}
"#;
    fs::write(&path, text).unwrap();
    path
}

pub struct EventFixture {
    pub prices: PathBuf,
    pub firms: PathBuf,
    pub events: PathBuf,
    pub exposure: PathBuf,
}

impl EventFixture {
    pub fn args<'a>(&'a self, out: &'a Path) -> Vec<&'a str> {
        vec![
            "event-study",
            "--prices",
            s(&self.prices),
            "--firms",
            s(&self.firms),
            "--events",
            s(&self.events),
            "--exposure",
            s(&self.exposure),
            "--out",
            s(out),
        ]
    }
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// 31-firm synthetic panel (8 vendors, 15 financial users, 8 controls) over
/// weekdays from June 2025 to mid-March 2026, with a −0.05 vendor effect
/// planted on the 2026-02-24 event date and residual noise 0.002.
pub fn synthetic_event_spec() -> SyntheticSpec {
    let mut spec = SyntheticSpec::standard(8, 15, 8, -0.05, 0.002, 2026);
    spec.n_days = 250;
    let end = date(2026, 3, 13);
    spec.n_days = spec.calendar().iter().take_while(|d| **d <= end).count();
    spec.event_index = spec.calendar().iter().position(|d| *d == date(2026, 2, 24)).unwrap();
    spec
}

pub fn event_fixture(dir: &Path) -> EventFixture {
    let spec = synthetic_event_spec();
    let panel = spec.generate();
    let prices = dir.join("prices.csv");
    panel.write_csv(fs::File::create(&prices).unwrap()).unwrap();

    let firms = dir.join("firms.csv");
    let mut text = String::from("ticker,group\n");
    for f in &spec.firms {
        text.push_str(&format!("{},{}\n", f.ticker, f.group));
    }
    fs::write(&firms, text).unwrap();

    let events = dir.join("events.csv");
    fs::write(
        &events,
        "event_id,date,label\n\
         E1,2026-01-27,service-delivery signal\n\
         E3,2026-02-24,market-validation event\n\
         E4,2026-03-05,labour-market report\n",
    )
    .unwrap();

    let exposure = dir.join("exposure.csv");
    let scores: BTreeMap<String, f64> = spec.firms.iter().map(|f| (f.ticker.clone(), f.exposure)).collect();
    write_exposure_csv(&scores, ScoreMode::Raw, fs::File::create(&exposure).unwrap()).unwrap();
    EventFixture {
        prices,
        firms,
        events,
        exposure,
    }
}

/// Two filings and a keyword file with hand-countable scores: AAA scores
/// 2·1 + 1·2 = 4, BBB matches "technical debt" once.
pub fn filings_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let filings = dir.join("filings");
    fs::create_dir_all(&filings).unwrap();
    fs::write(filings.join("AAA_10-K_2025-02-01.txt"), "COBOL cobol mainframe").unwrap();
    fs::write(filings.join("BBB_10-K_2025-03-01.txt"), "technical debt is technical").unwrap();
    let keywords = dir.join("keywords.csv");
    fs::write(
        &keywords,
        "phrase,weight,category\n\
         cobol,1,legacy_stack\n\
         mainframe,2,legacy_stack\n\
         technical debt,1,modernization\n",
    )
    .unwrap();
    (filings, keywords)
}

/// Compares two CSV texts: identical header and row count, string cells
/// equal, numeric cells within `tol` (absolute, or relative for large
/// magnitudes).
pub fn assert_csv_close(actual: &str, expected: &str, tol: f64) {
    let rows = |t: &str| -> Vec<Vec<String>> {
        csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(t.as_bytes())
            .records()
            .map(|r| r.unwrap().iter().map(str::to_owned).collect())
            .collect()
    };
    let (a, e) = (rows(actual), rows(expected));
    assert_eq!(a.first(), e.first(), "header differs");
    assert_eq!(a.len(), e.len(), "row count differs");
    for (i, (ra, re)) in a.iter().zip(&e).enumerate() {
        assert_eq!(ra.len(), re.len(), "row {i} width differs");
        for (x, y) in ra.iter().zip(re) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(u), Ok(v)) => assert!(
                    (u - v).abs() <= tol * v.abs().max(1.0),
                    "row {i}: {u} vs golden {v}"
                ),
                _ => assert_eq!(x, y, "row {i}"),
            }
        }
    }
}
