//! Verdicts for the three qualitative propositions and the reduced-form
//! similarity regression, computed from sweep tables.
//!
//! * heterogeneity: Spearman of the H grid against cell-mean pricing error;
//! * coupling: Spearman of the C grid against volatility, similarity and
//!   liquidity;
//! * autonomy × concentration: discrete supermodularity gap of cell-mean
//!   expected shortfall at low observability, plus the high-vs-low
//!   observability comparison at the (hi, hi) corner;
//! * similarity: OLS of cell-mean ρ on C̄, 1−H̄ and V̄.

use serde::{Deserialize, Serialize};

use super::{CellSummary, SweepParameter, SweepTable};
use crate::error::{Error, Result};
use crate::metrics::{ols_fit, spearman, OlsResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Supported,
    NotSupported,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Supported => "supported",
            Verdict::NotSupported => "not_supported",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Decision thresholds. These are configuration, not constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Spearman(H, pricing error) at or below this supports heterogeneity.
    pub p1_supported: f64,
    /// Spearman(H, pricing error) at or below this (but above
    /// `p1_supported`) is inconclusive.
    pub p1_inconclusive: f64,
    pub p2_volatility: f64,
    pub p2_rho: f64,
    /// Spearman(C, liquidity) must be at or below this.
    pub p2_liquidity: f64,
    /// Minimum t-statistic of every slope in the similarity regression.
    pub psi_t: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p1_supported: -0.8,
            p1_inconclusive: -0.3,
            p2_volatility: 0.8,
            p2_rho: 0.8,
            p2_liquidity: -0.3,
            psi_t: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    /// `None` when undefined (e.g. Spearman of a flat series).
    pub value: Option<f64>,
    pub threshold: String,
}

impl Statistic {
    fn new(name: &str, value: Option<f64>, threshold: impl Into<String>) -> Self {
        Self {
            name: name.to_owned(),
            value,
            threshold: threshold.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub id: String,
    pub statistics: Vec<Statistic>,
    pub verdict: Verdict,
}

fn single_axis<T: Scalar>(table: &SweepTable<T>, expected: SweepParameter) -> Result<Vec<CellSummary<T>>> {
    if table.parameters != [expected] {
        return Err(Error::Contract(format!(
            "expected a sweep over `{expected}` only, got {:?}",
            table.parameters.iter().map(|p| p.name()).collect::<Vec<_>>()
        )));
    }
    let cells = table.cell_summaries();
    if cells.len() < 3 {
        return Err(Error::Contract(format!(
            "need at least 3 grid points over `{expected}`, got {}",
            cells.len()
        )));
    }
    Ok(cells)
}

/// Spearman as an optional value: undefined statistics become `None`, other
/// errors propagate.
fn rank_corr<T: Scalar>(xs: &[T], ys: &[T]) -> Result<Option<f64>> {
    match spearman(xs, ys) {
        Ok(r) => Ok(Some(r.as_f64())),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Heterogeneity improves price discovery.
pub fn test_proposition1<T: Scalar>(table: &SweepTable<T>, thresholds: &Thresholds) -> Result<PropositionReport> {
    let cells = single_axis(table, SweepParameter::Heterogeneity)?;
    let grid: Vec<T> = cells.iter().map(|c| c.params[0]).collect();
    let errors: Vec<T> = cells.iter().map(|c| c.pricing_error_rmse).collect();
    let rho = rank_corr(&grid, &errors)?;
    let verdict = match rho {
        Some(r) if r <= thresholds.p1_supported => Verdict::Supported,
        Some(r) if r <= thresholds.p1_inconclusive => Verdict::Inconclusive,
        Some(_) => Verdict::NotSupported,
        None => Verdict::Inconclusive,
    };
    Ok(PropositionReport {
        id: "P1".into(),
        statistics: vec![Statistic::new(
            "spearman_H_pricing_error",
            rho,
            format!("<={} supported; <={} inconclusive", thresholds.p1_supported, thresholds.p1_inconclusive),
        )],
        verdict,
    })
}

/// Coupling produces herding, liquidity withdrawal and volatility.
pub fn test_proposition2<T: Scalar>(table: &SweepTable<T>, thresholds: &Thresholds) -> Result<PropositionReport> {
    let cells = single_axis(table, SweepParameter::Coupling)?;
    let grid: Vec<T> = cells.iter().map(|c| c.params[0]).collect();
    let vol: Vec<T> = cells.iter().map(|c| c.volatility).collect();
    let liq: Vec<T> = cells.iter().map(|c| c.liquidity_level).collect();
    let s_vol = rank_corr(&grid, &vol)?;
    let s_liq = rank_corr(&grid, &liq)?;
    // Cells without any valid similarity window make the statistic undefined.
    let s_rho = match cells.iter().map(|c| c.mean_rho).collect::<Option<Vec<T>>>() {
        Some(rho) => rank_corr(&grid, &rho)?,
        None => None,
    };

    let checks = [
        s_vol.map(|v| v >= thresholds.p2_volatility),
        s_rho.map(|v| v >= thresholds.p2_rho),
        s_liq.map(|v| v <= thresholds.p2_liquidity),
    ];
    let verdict = if checks.iter().all(|c| *c == Some(true)) {
        Verdict::Supported
    } else if checks.iter().all(|c| *c == Some(false)) {
        Verdict::NotSupported
    } else {
        Verdict::Inconclusive
    };
    Ok(PropositionReport {
        id: "P2".into(),
        statistics: vec![
            Statistic::new("spearman_C_volatility", s_vol, format!(">={}", thresholds.p2_volatility)),
            Statistic::new("spearman_C_mean_rho", s_rho, format!(">={}", thresholds.p2_rho)),
            Statistic::new("spearman_C_liquidity", s_liq, format!("<={}", thresholds.p2_liquidity)),
        ],
        verdict,
    })
}

fn axis_extremes<T: Scalar>(table: &SweepTable<T>, p: SweepParameter) -> Result<(usize, T, T)> {
    let k = table
        .axis_index(p)
        .ok_or_else(|| Error::Contract(format!("sweep does not vary `{p}`")))?;
    let values = table.rows.iter().map(|r| r.params[k]);
    let lo = values.clone().fold(T::infinity(), T::min);
    let hi = values.fold(T::neg_infinity(), T::max);
    if !(lo < hi) {
        return Err(Error::Contract(format!("`{p}` needs two distinct levels")));
    }
    Ok((k, lo, hi))
}

/// Systemic risk is supermodular in autonomy and concentration, and
/// observability dampens it.
pub fn test_proposition3<T: Scalar>(table: &SweepTable<T>) -> Result<PropositionReport> {
    let (ka, a_lo, a_hi) = axis_extremes(table, SweepParameter::Autonomy)?;
    let (kv, v_lo, v_hi) = axis_extremes(table, SweepParameter::VendorSkew)?;
    let (ks, s_lo, s_hi) = axis_extremes(table, SweepParameter::Observability)?;
    if table.parameters.len() != 3 {
        return Err(Error::Contract("sweep must vary exactly A, vendor_skew and S".into()));
    }
    let cells = table.cell_summaries();
    let es = |a: T, v: T, s: T| -> Result<f64> {
        cells
            .iter()
            .find(|c| c.params[ka] == a && c.params[kv] == v && c.params[ks] == s)
            .map(|c| c.expected_shortfall.as_f64())
            .ok_or_else(|| Error::Contract(format!("missing cell A={a}, vendor_skew={v}, S={s}")))
    };
    let gap = |s: T| -> Result<f64> { Ok(es(a_hi, v_hi, s)? - es(a_hi, v_lo, s)? - es(a_lo, v_hi, s)? + es(a_lo, v_lo, s)?) };
    let gap_low = gap(s_lo)?;
    let gap_high = gap(s_hi)?;
    let hh_low = es(a_hi, v_hi, s_lo)?;
    let hh_high = es(a_hi, v_hi, s_hi)?;
    let verdict = if gap_low > 0.0 && hh_high < hh_low {
        Verdict::Supported
    } else {
        Verdict::NotSupported
    };
    Ok(PropositionReport {
        id: "P3".into(),
        statistics: vec![
            Statistic::new("supermodularity_gap_S_low", Some(gap_low), ">0"),
            Statistic::new("supermodularity_gap_S_high", Some(gap_high), "reported"),
            Statistic::new("es_hi_hi_S_low", Some(hh_low), "reported"),
            Statistic::new("es_hi_hi_S_high", Some(hh_high), "<es_hi_hi_S_low"),
        ],
        verdict,
    })
}

/// Regressor names of the similarity regression, after the intercept.
pub const PSI_TERMS: [&str; 3] = ["C_bar", "one_minus_H_bar", "V_bar"];

/// OLS of cell-mean similarity on intercept, C̄, 1−H̄ and V̄ (realised cell
/// means). Cells where the similarity was never defined are skipped.
pub fn fit_rho_reduced_form<T: Scalar>(table: &SweepTable<T>) -> Result<OlsResult<T>> {
    let cells: Vec<_> = table
        .cell_summaries()
        .into_iter()
        .filter(|c| c.mean_rho.is_some())
        .collect();
    let y: Vec<T> = cells.iter().filter_map(|c| c.mean_rho).collect();
    let coupling = cells.iter().map(|c| c.aggregates.coupling).collect();
    let homogeneity = cells.iter().map(|c| T::one() - c.aggregates.heterogeneity).collect();
    let concentration = cells.iter().map(|c| c.aggregates.concentration).collect();
    ols_fit(&y, &[coupling, homogeneity, concentration], true)
}

/// Verdict on the similarity regression: every slope positive with t above
/// the threshold.
pub fn psi_report<T: Scalar>(fit: &OlsResult<T>, thresholds: &Thresholds) -> PropositionReport {
    let mut statistics = Vec::new();
    let mut all_pass = true;
    for (j, term) in PSI_TERMS.iter().enumerate() {
        let b = fit.coefficients[j + 1].as_f64();
        let t = fit.t_stats[j + 1].as_f64();
        all_pass &= b > 0.0 && t > thresholds.psi_t;
        statistics.push(Statistic::new(&format!("coef_{term}"), Some(b), ">0"));
        statistics.push(Statistic::new(&format!("t_{term}"), Some(t).filter(|t| !t.is_nan()), format!(">{}", thresholds.psi_t)));
    }
    statistics.push(Statistic::new("r_squared", Some(fit.r_squared.as_f64()), "reported"));
    PropositionReport {
        id: "H3".into(),
        statistics,
        verdict: if all_pass { Verdict::Supported } else { Verdict::NotSupported },
    }
}

/// Header of `propositions.csv`.
pub const PROPOSITION_COLUMNS: [&str; 5] = ["proposition", "statistic", "value", "threshold", "verdict"];

pub fn write_propositions_csv<W: std::io::Write>(reports: &[PropositionReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROPOSITION_COLUMNS)?;
    for rep in reports {
        for st in &rep.statistics {
            w.write_record([
                rep.id.as_str(),
                st.name.as_str(),
                &st.value.map(|v| v.to_string()).unwrap_or_default(),
                st.threshold.as_str(),
                rep.verdict.as_str(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("propositions.csv", e))?;
    Ok(())
}

/// Reads `propositions.csv` back into reports, in file order.
pub fn read_propositions_csv<R: std::io::Read>(reader: R) -> Result<Vec<PropositionReport>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != PROPOSITION_COLUMNS {
        return Err(Error::Data(format!("propositions header must be `{}`", PROPOSITION_COLUMNS.join(","))));
    }
    let mut out: Vec<PropositionReport> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("propositions line {line}: {e}")))?;
        let value = match &rec[2] {
            "" => None,
            v => Some(v.parse().map_err(|_| Error::Data(format!("propositions line {line}: bad value `{v}`")))?),
        };
        let verdict = match &rec[4] {
            "supported" => Verdict::Supported,
            "not_supported" => Verdict::NotSupported,
            "inconclusive" => Verdict::Inconclusive,
            v => return Err(Error::Data(format!("propositions line {line}: unknown verdict `{v}`"))),
        };
        let stat = Statistic {
            name: rec[1].to_owned(),
            value,
            threshold: rec[3].to_owned(),
        };
        match out.last_mut() {
            Some(rep) if rep.id == rec[0] => {
                if rep.verdict != verdict {
                    return Err(Error::Data(format!("propositions line {line}: verdict differs within {}", rep.id)));
                }
                rep.statistics.push(stat);
            }
            _ => out.push(PropositionReport {
                id: rec[0].to_owned(),
                statistics: vec![stat],
                verdict,
            }),
        }
    }
    Ok(out)
}
