use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub phrase: String,
    pub weight: f64,
    pub category: String,
}

impl Keyword {
    pub fn new(phrase: &str, weight: f64, category: &str) -> Self {
        Self {
            phrase: phrase.into(),
            weight,
            category: category.into(),
        }
    }
}

/// Default keyword set, unit weights, in three categories.
pub fn default_keywords() -> Vec<Keyword> {
    let groups: [(&str, &[&str]); 3] = [
        ("legacy_stack", &["COBOL", "mainframe", "z/OS", "DB2", "CICS"]),
        (
            "modernization",
            &["application modernization", "cloud migration", "replatforming", "technical debt"],
        ),
        ("financial_context", &["core banking", "payment processing", "policy administration"]),
    ];
    groups
        .iter()
        .flat_map(|(cat, phrases)| phrases.iter().map(move |p| Keyword::new(p, 1.0, cat)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Weighted raw match counts.
    #[default]
    Raw,
    /// Each document's counts divided by its token count / 10 000.
    Per10k,
}

impl ScoreMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreMode::Raw => "raw",
            ScoreMode::Per10k => "per10k",
        }
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScoreMode::Raw),
            "per10k" => Ok(ScoreMode::Per10k),
            _ => Err(Error::Config(format!("unknown score mode `{s}` (raw | per10k)"))),
        }
    }
}

/// Lower-cased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Occurrences of the token sequence `phrase` in `tokens`, counting every
/// start position.
pub fn count_phrase(tokens: &[String], phrase: &[String]) -> usize {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return 0;
    }
    tokens.windows(phrase.len()).filter(|w| *w == phrase).count()
}

fn validate_keywords(keywords: &[Keyword]) -> Result<Vec<Vec<String>>> {
    if keywords.is_empty() {
        return Err(Error::Contract("keyword list is empty".into()));
    }
    keywords
        .iter()
        .map(|k| {
            if !(k.weight >= 0.0) || !k.weight.is_finite() {
                return Err(Error::Contract(format!("keyword `{}` has invalid weight {}", k.phrase, k.weight)));
            }
            let toks = tokenize(&k.phrase);
            if toks.is_empty() {
                return Err(Error::Contract(format!("keyword `{}` has no tokens", k.phrase)));
            }
            Ok(toks)
        })
        .collect()
}

/// Exposure score of one firm's documents.
pub fn score_documents<S: AsRef<str>>(documents: &[S], keywords: &[Keyword], mode: ScoreMode) -> Result<f64> {
    let phrases = validate_keywords(keywords)?;
    let mut score = 0.0;
    for doc in documents {
        let tokens = tokenize(doc.as_ref());
        if tokens.is_empty() {
            continue;
        }
        let raw: f64 = keywords
            .iter()
            .zip(&phrases)
            .map(|(k, p)| k.weight * count_phrase(&tokens, p) as f64)
            .sum();
        score += match mode {
            ScoreMode::Raw => raw,
            ScoreMode::Per10k => raw / (tokens.len() as f64 / 10_000.0),
        };
    }
    Ok(score)
}

/// Scores per ticker, from `(ticker, document)` pairs.
pub fn score_filings<S: AsRef<str>>(
    documents: &[(String, S)],
    keywords: &[Keyword],
    mode: ScoreMode,
) -> Result<BTreeMap<String, f64>> {
    validate_keywords(keywords)?;
    let mut by_firm: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for (ticker, doc) in documents {
        by_firm.entry(ticker.clone()).or_default().push(doc.as_ref());
    }
    by_firm
        .into_iter()
        .map(|(t, docs)| Ok((t, score_documents(&docs, keywords, mode)?)))
        .collect()
}

/// Ticker, form and date parsed from a `{TICKER}_{FORM}_{YYYY-MM-DD}.txt`
/// file name.
pub fn parse_filing_name(name: &str) -> Option<(String, String, chrono::NaiveDate)> {
    let stem = name.strip_suffix(".txt")?;
    let mut parts = stem.rsplitn(3, '_');
    let date = chrono::NaiveDate::parse_from_str(parts.next()?, "%Y-%m-%d").ok()?;
    let form = parts.next()?.to_owned();
    let ticker = parts.next()?.to_owned();
    if ticker.is_empty() || form.is_empty() {
        return None;
    }
    Some((ticker, form, date))
}

/// Reads every filing in `dir`, sorted by file name. Files not matching the
/// naming scheme are skipped with a warning.
pub fn read_filings_dir(dir: &Path) -> Result<Vec<(String, String)>> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_type().map_err(|e| Error::io(entry.path(), e))?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    let mut docs = Vec::new();
    for name in names {
        let Some((ticker, _, _)) = parse_filing_name(&name) else {
            log::warn!("skipping {name}: not named TICKER_FORM_YYYY-MM-DD.txt");
            continue;
        };
        let path = dir.join(&name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        docs.push((ticker, String::from_utf8_lossy(&bytes).into_owned()));
    }
    Ok(docs)
}

pub const KEYWORD_COLUMNS: [&str; 3] = ["phrase", "weight", "category"];

pub fn read_keywords<R: Read>(reader: R) -> Result<Vec<Keyword>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != KEYWORD_COLUMNS {
        return Err(Error::Data(format!("keywords header must be `{}`", KEYWORD_COLUMNS.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<Keyword>().enumerate() {
        let k = rec.map_err(|e| Error::Data(format!("keywords line {}: {e}", i + 2)))?;
        if !(k.weight >= 0.0) || !k.weight.is_finite() {
            return Err(Error::Data(format!("keywords line {}: weight must be >= 0", i + 2)));
        }
        out.push(k);
    }
    Ok(out)
}

pub const EXPOSURE_COLUMNS: [&str; 3] = ["ticker", "score", "mode"];

pub fn write_exposure_csv<W: std::io::Write>(scores: &BTreeMap<String, f64>, mode: ScoreMode, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPOSURE_COLUMNS)?;
    for (t, s) in scores {
        w.write_record([t.as_str(), &s.to_string(), mode.as_str()])?;
    }
    w.flush().map_err(|e| Error::io("exposure.csv", e))?;
    Ok(())
}

/// Reads `exposure.csv` into ticker → score.
pub fn read_exposure_csv<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    #[derive(Deserialize)]
    struct Row {
        ticker: String,
        score: f64,
        #[allow(dead_code)]
        mode: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let r = rec.map_err(|e| Error::Data(format!("exposure line {}: {e}", i + 2)))?;
        if out.insert(r.ticker.clone(), r.score).is_some() {
            return Err(Error::Data(format!("exposure: duplicate ticker `{}`", r.ticker)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counts() {
        let kw = [Keyword::new("cobol", 1.0, "a"), Keyword::new("mainframe", 2.0, "a")];
        assert_eq!(score_documents(&["COBOL cobol mainframe"], &kw, ScoreMode::Raw).unwrap(), 4.0);
        let none: [&str; 0] = [];
        assert_eq!(score_documents(&none, &kw, ScoreMode::Raw).unwrap(), 0.0);

        let phrase = [Keyword::new("technical debt", 1.0, "m")];
        assert_eq!(score_documents(&["technical debt is technical"], &phrase, ScoreMode::Raw).unwrap(), 1.0);
    }

    #[test]
    fn tokens_split_on_punctuation() {
        assert_eq!(tokenize("Runs z/OS; DB2-backed (CICS)."), ["runs", "z", "os", "db2", "backed", "cics"]);
        let kw = [Keyword::new("z/OS", 1.0, "a")];
        assert_eq!(score_documents(&["z/os, Z/OS and zos"], &kw, ScoreMode::Raw).unwrap(), 2.0);
        // whole tokens only
        let c = [Keyword::new("cics", 1.0, "a")];
        assert_eq!(score_documents(&["cicsplex"], &c, ScoreMode::Raw).unwrap(), 0.0);
    }

    #[test]
    fn per10k_normalises_each_document() {
        let kw = [Keyword::new("cobol", 1.0, "a")];
        // 1 hit in 4 tokens -> 2500 per 10k; 0 hits elsewhere
        let s = score_documents(&["cobol a b c", "x y"], &kw, ScoreMode::Per10k).unwrap();
        assert!((s - 2500.0).abs() < 1e-9);
    }

    #[test]
    fn keyword_contracts() {
        assert!(matches!(score_documents(&["x"], &[], ScoreMode::Raw), Err(Error::Contract(_))));
        let neg = [Keyword::new("x", -1.0, "a")];
        assert!(matches!(score_documents(&["x"], &neg, ScoreMode::Raw), Err(Error::Contract(_))));
    }

    #[test]
    fn filing_names() {
        let (t, f, d) = parse_filing_name("BRK_B_10-K_2025-02-01.txt").unwrap();
        assert_eq!((t.as_str(), f.as_str(), d.to_string().as_str()), ("BRK_B", "10-K", "2025-02-01"));
        assert!(parse_filing_name("notes.txt").is_none());
        assert!(parse_filing_name("AAA_10-K_2025-02-30.txt").is_none());
    }

    #[test]
    fn keyword_and_exposure_csv_round_trip() {
        let text = "phrase,weight,category\ncore banking,1.5,financial_context\nCOBOL,1,legacy_stack\n";
        let kws = read_keywords(text.as_bytes()).unwrap();
        assert_eq!(kws[0], Keyword::new("core banking", 1.5, "financial_context"));
        let scores = score_filings(
            &[("AAA".to_string(), "core banking on COBOL"), ("BBB".to_string(), "none")],
            &kws,
            ScoreMode::Raw,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_exposure_csv(&scores, ScoreMode::Raw, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "ticker,score,mode\nAAA,2.5,raw\nBBB,0,raw\n");
        assert_eq!(read_exposure_csv(buf.as_slice()).unwrap(), scores);
    }

    #[test]
    fn default_set_has_unit_weights() {
        let kw = default_keywords();
        assert_eq!(kw.len(), 12);
        assert!(kw.iter().all(|k| k.weight == 1.0));
    }

    proptest! {
        #[test]
        fn inserting_an_occurrence_outside_a_match_never_lowers_the_score(
            words in proptest::collection::vec(prop_oneof!["cobol", "mainframe", "debt", "technical", "x"], 0..30),
            pos in 0usize..31,
            pick in 0usize..3,
        ) {
            let kw = [
                Keyword::new("cobol", 1.0, "a"),
                Keyword::new("mainframe", 0.5, "a"),
                Keyword::new("technical debt", 2.0, "m"),
            ];
            let insert = ["cobol", "mainframe", "technical debt"][pick];
            // an insertion between the tokens of a phrase match breaks that match
            let at = pos.min(words.len());
            prop_assume!(!(at > 0 && at < words.len() && words[at - 1] == "technical" && words[at] == "debt"));
            let before = words.join(" ");
            let mut after_words: Vec<&str> = words.iter().map(String::as_str).collect();
            after_words.insert(at, insert);
            let after = after_words.join(" ");
            let s0 = score_documents(&[before], &kw, ScoreMode::Raw).unwrap();
            let s1 = score_documents(&[after], &kw, ScoreMode::Raw).unwrap();
            prop_assert!(s1 >= s0);
        }
    }
}
