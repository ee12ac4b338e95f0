use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dated values, strictly increasing in date.
#[derive(Debug, Clone, PartialEq)]
pub struct DatedSeries<T> {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<T>,
}

impl<T: Scalar> DatedSeries<T> {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<T>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::Contract(format!(
                "series has {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("dates not strictly increasing at {}", w[1])));
        }
        Ok(Self { dates, values })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<T> {
        self.dates.binary_search(&date).ok().map(|i| self.values[i])
    }

    /// Value on `date`, or a data error naming the series and the date.
    pub fn require(&self, date: NaiveDate, what: &str) -> Result<T> {
        self.get(date)
            .ok_or_else(|| Error::Data(format!("{what}: no observation on {date}")))
    }
}

/// One firm's daily history.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmSeries<T> {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<T>,
    pub volumes: Vec<T>,
}

impl<T: Scalar> FirmSeries<T> {
    /// Simple returns `close_t / close_{t-1} - 1`, dated at `t`.
    pub fn returns(&self) -> DatedSeries<T> {
        DatedSeries {
            dates: self.dates.iter().skip(1).copied().collect(),
            values: self.closes.windows(2).map(|w| w[1] / w[0] - T::one()).collect(),
        }
    }

    pub fn volume_series(&self) -> DatedSeries<T> {
        DatedSeries {
            dates: self.dates.clone(),
            values: self.volumes.clone(),
        }
    }
}

/// Validated price panel keyed by ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel<T> {
    pub firms: BTreeMap<String, FirmSeries<T>>,
    /// Rows skipped because the close was missing, per ticker.
    pub dropped_missing: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    adj_close: String,
    volume: String,
}

/// Header of `prices.csv`.
pub const PRICE_COLUMNS: [&str; 4] = ["date", "ticker", "adj_close", "volume"];

pub(crate) fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|_| Error::Data(format!("line {line}: invalid date `{s}` (expected YYYY-MM-DD)")))
}

fn parse_number(s: &str, field: &str, line: u64) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: invalid {field} `{s}`")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("line {line}: {field} must be finite")));
    }
    Ok(v)
}

impl<T: Scalar> PricePanel<T> {
    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.firms.keys().map(String::as_str)
    }

    pub fn firm(&self, ticker: &str) -> Result<&FirmSeries<T>> {
        self.firms
            .get(ticker)
            .ok_or_else(|| Error::Data(format!("ticker `{ticker}` not in price panel")))
    }

    /// Parses `prices.csv` content. Line numbers in errors count the header
    /// as line 1.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != PRICE_COLUMNS {
            return Err(Error::Data(format!(
                "prices header must be `{}`, got `{}`",
                PRICE_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut raw: BTreeMap<String, Vec<(NaiveDate, f64, f64)>> = BTreeMap::new();
        let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<PriceRow>().enumerate() {
            let line = i as u64 + 2;
            let row = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
            if row.ticker.is_empty() {
                return Err(Error::Data(format!("line {line}: empty ticker")));
            }
            let date = parse_date(&row.date, line)?;
            if row.adj_close.trim().is_empty() {
                *dropped.entry(row.ticker).or_default() += 1;
                continue;
            }
            let close = parse_number(&row.adj_close, "adj_close", line)?;
            if close <= 0.0 {
                return Err(Error::Data(format!("line {line}: adj_close must be positive, got {close}")));
            }
            let volume = parse_number(&row.volume, "volume", line)?;
            if volume < 0.0 {
                return Err(Error::Data(format!("line {line}: volume must be >= 0, got {volume}")));
            }
            raw.entry(row.ticker).or_default().push((date, close, volume));
        }

        let mut firms = BTreeMap::new();
        for (ticker, mut rows) in raw {
            rows.sort_by_key(|r| r.0);
            if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Data(format!("duplicate row for ({ticker}, {})", w[0].0)));
            }
            firms.insert(
                ticker.clone(),
                FirmSeries {
                    ticker,
                    dates: rows.iter().map(|r| r.0).collect(),
                    closes: rows.iter().map(|r| T::of(r.1)).collect(),
                    volumes: rows.iter().map(|r| T::of(r.2)).collect(),
                },
            );
        }
        for (ticker, n) in &dropped {
            log::warn!("{ticker}: dropped {n} row(s) with missing adj_close");
        }
        Ok(Self {
            firms,
            dropped_missing: dropped,
        })
    }

    /// Writes the panel back in `prices.csv` layout, date-major.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut rows: Vec<(NaiveDate, &str, T, T)> = Vec::new();
        for f in self.firms.values() {
            for i in 0..f.dates.len() {
                rows.push((f.dates[i], &f.ticker, f.closes[i], f.volumes[i]));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PRICE_COLUMNS)?;
        for (d, t, c, v) in rows {
            w.write_record([d.to_string(), t.to_owned(), c.to_string(), v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("prices.csv", e))?;
        Ok(())
    }
}

/// Loads and validates `prices.csv`.
pub fn load_price_panel<T: Scalar>(path: &Path) -> Result<PricePanel<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    PricePanel::from_reader(file).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(text: &str) -> Result<PricePanel<f64>> {
        PricePanel::from_reader(text.as_bytes())
    }

    #[test]
    fn two_firms_three_days() {
        let p = panel(
            "date,ticker,adj_close,volume\n\
             2026-01-02,AAA,10,100\n2026-01-02,BBB,20,5\n\
             2026-01-05,AAA,11,100\n2026-01-05,BBB,19,5\n\
             2026-01-06,AAA,12.1,100\n2026-01-06,BBB,19,0\n",
        )
        .unwrap();
        assert_eq!(p.firms.len(), 2);
        let r = p.firm("AAA").unwrap().returns();
        assert_eq!(r.len(), 2);
        assert!((r.values[0] - 0.1).abs() < 1e-12 && (r.values[1] - 0.1).abs() < 1e-12);
        assert_eq!(p.firm("BBB").unwrap().returns().len(), 2);
    }

    #[test]
    fn rejects_duplicates_nonpositive_and_malformed() {
        let dup = panel("date,ticker,adj_close,volume\n2026-01-02,AAA,10,1\n2026-01-02,AAA,11,1\n");
        assert!(matches!(dup, Err(Error::Data(m)) if m.contains("duplicate")));
        let zero = panel("date,ticker,adj_close,volume\n2026-01-02,AAA,0,1\n");
        assert!(matches!(zero, Err(Error::Data(m)) if m.contains("line 2")));
        let bad = panel("date,ticker,adj_close,volume\n2026-01-02,AAA,10,1\n2026-13-02,AAA,10,1\n");
        assert!(matches!(bad, Err(Error::Data(m)) if m.contains("line 3")));
        let neg = panel("date,ticker,adj_close,volume\n2026-01-02,AAA,10,-1\n");
        assert!(matches!(neg, Err(Error::Data(_))));
        let header = panel("date,ticker,close,volume\n");
        assert!(matches!(header, Err(Error::Data(_))));
    }

    #[test]
    fn missing_closes_are_dropped_and_counted() {
        let p = panel(
            "date,ticker,adj_close,volume\n2026-01-02,AAA,10,1\n2026-01-05,AAA,,1\n2026-01-06,AAA,12,1\n",
        )
        .unwrap();
        assert_eq!(p.firm("AAA").unwrap().dates.len(), 2);
        assert_eq!(p.dropped_missing["AAA"], 1);
    }

    #[test]
    fn unsorted_rows_are_ordered_and_round_trip() {
        let text = "date,ticker,adj_close,volume\n2026-01-05,AAA,11,2\n2026-01-02,AAA,10,1\n";
        let p = panel(text).unwrap();
        assert!(p.firm("AAA").unwrap().dates.windows(2).all(|w| w[0] < w[1]));
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(panel(std::str::from_utf8(&buf).unwrap()).unwrap(), p);
    }
}
