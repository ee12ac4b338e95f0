//! Parameter sweeps over population means and simulation settings.
//!
//! A sweep is the cartesian product of one or more parameter grids (first
//! parameter varies slowest) times `seeds_per_cell` replicates. Replicate `r`
//! of cell `c` runs with seed [`sweep_seed`]`(base_seed, c, r)`. Runs execute
//! in parallel; the table is always assembled in `(cell, replicate)` order.

pub mod config;
pub mod propositions;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, PropositionOutcome, PropositionPlan, SweepSection, DEFAULT_SEED};
pub use propositions::{
    fit_rho_reduced_form, read_propositions_csv, write_propositions_csv, psi_report, test_proposition1, test_proposition2, test_proposition3, PropositionReport,
    Statistic, Thresholds, Verdict,
};

use crate::error::{Error, Result};
use crate::market::{simulate_run, SimConfig};
use crate::metrics::MetricBundle;
use crate::population::{ParameterAggregates, PopulationConfig};
use crate::scalar::{mean, Scalar};
use crate::seeding::sweep_seed;

/// A sweepable setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParameter {
    /// Mean autonomy.
    #[serde(rename = "A")]
    Autonomy,
    /// Mean model heterogeneity.
    #[serde(rename = "H")]
    Heterogeneity,
    /// Mean execution coupling.
    #[serde(rename = "C")]
    Coupling,
    /// Mean supervisory observability.
    #[serde(rename = "S")]
    Observability,
    #[serde(rename = "vendor_skew")]
    VendorSkew,
    #[serde(rename = "outage_prob")]
    OutageProb,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 6] = [
        Self::Autonomy,
        Self::Heterogeneity,
        Self::Coupling,
        Self::Observability,
        Self::VendorSkew,
        Self::OutageProb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Autonomy => "A",
            Self::Heterogeneity => "H",
            Self::Coupling => "C",
            Self::Observability => "S",
            Self::VendorSkew => "vendor_skew",
            Self::OutageProb => "outage_prob",
        }
    }

    /// Writes `value` into the configurations.
    pub fn apply<T: Scalar>(self, value: T, sim: &mut SimConfig<T>, pop: &mut PopulationConfig<T>) {
        match self {
            Self::Autonomy => pop.autonomy.mean = value,
            Self::Heterogeneity => pop.heterogeneity.mean = value,
            Self::Coupling => pop.coupling.mean = value,
            Self::Observability => pop.observability.mean = value,
            Self::VendorSkew => pop.vendor_skew = value,
            Self::OutageProb => sim.outage_prob = value,
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct SweepAxis<T: Scalar> {
    pub name: SweepParameter,
    pub values: Vec<T>,
}

impl<T: Scalar> SweepAxis<T> {
    pub fn new(name: SweepParameter, values: Vec<T>) -> Self {
        Self { name, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SweepSpec<T: Scalar> {
    pub simulation: SimConfig<T>,
    pub population: PopulationConfig<T>,
    pub axes: Vec<SweepAxis<T>>,
    pub seeds_per_cell: u32,
    pub base_seed: u64,
}

impl<T: Scalar> SweepSpec<T> {
    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Parameter values of cell `index` (first axis varies slowest).
    pub fn cell_values(&self, mut index: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            let n = axis.values.len();
            *slot = axis.values[index % n];
            index /= n;
        }
        out
    }

    /// Configurations for cell `index`.
    pub fn cell_configs(&self, index: usize) -> (SimConfig<T>, PopulationConfig<T>) {
        let mut sim = self.simulation.clone();
        let mut pop = self.population.clone();
        for (axis, value) in self.axes.iter().zip(self.cell_values(index)) {
            axis.name.apply(value, &mut sim, &mut pop);
        }
        (sim, pop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("sweep: at least one parameter is required".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::Config("sweep.seeds_per_cell must be >= 1".into()));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(Error::Config(format!("sweep: grid for `{}` is empty", axis.name)));
            }
            if self.axes[..i].iter().any(|a| a.name == axis.name) {
                return Err(Error::Config(format!("sweep: `{}` listed twice", axis.name)));
            }
        }
        if u32::try_from(self.n_cells()).is_err() {
            return Err(Error::Config("sweep: too many cells".into()));
        }
        for cell in 0..self.n_cells() {
            let (sim, pop) = self.cell_configs(cell);
            sim.validate()?;
            pop.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub cell: usize,
    pub replicate: u32,
    /// Swept values, in axis order.
    pub params: Vec<T>,
    pub seed: u64,
    pub aggregates: ParameterAggregates<T>,
    pub metrics: MetricBundle<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable<T> {
    pub parameters: Vec<SweepParameter>,
    /// Sorted by `(cell, replicate)`.
    pub rows: Vec<SweepRow<T>>,
}

/// Seed-averaged outcome of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary<T> {
    pub cell: usize,
    pub params: Vec<T>,
    pub n: usize,
    pub aggregates: ParameterAggregates<T>,
    pub pricing_error_rmse: T,
    pub volatility: T,
    pub liquidity_level: T,
    pub expected_shortfall: T,
    /// Mean over replicates where the similarity was defined.
    pub mean_rho: Option<T>,
}

impl<T: Scalar> SweepTable<T> {
    pub fn axis_index(&self, p: SweepParameter) -> Option<usize> {
        self.parameters.iter().position(|&q| q == p)
    }

    pub fn cell_summaries(&self) -> Vec<CellSummary<T>> {
        let mut out: Vec<CellSummary<T>> = Vec::new();
        let mut start = 0;
        while start < self.rows.len() {
            let cell = self.rows[start].cell;
            let end = start + self.rows[start..].iter().take_while(|r| r.cell == cell).count();
            out.push(summarise(&self.rows[start..end]));
            start = end;
        }
        out
    }
}

fn summarise<T: Scalar>(rows: &[SweepRow<T>]) -> CellSummary<T> {
    let avg = |f: &dyn Fn(&SweepRow<T>) -> T| mean(&rows.iter().map(f).collect::<Vec<_>>()).expect("nonempty cell");
    let rhos: Vec<T> = rows.iter().filter_map(|r| r.metrics.mean_rho).collect();
    CellSummary {
        cell: rows[0].cell,
        params: rows[0].params.clone(),
        n: rows.len(),
        aggregates: ParameterAggregates {
            autonomy: avg(&|r| r.aggregates.autonomy),
            heterogeneity: avg(&|r| r.aggregates.heterogeneity),
            coupling: avg(&|r| r.aggregates.coupling),
            observability: avg(&|r| r.aggregates.observability),
            concentration: avg(&|r| r.aggregates.concentration),
        },
        pricing_error_rmse: avg(&|r| r.metrics.pricing_error_rmse),
        volatility: avg(&|r| r.metrics.volatility),
        liquidity_level: avg(&|r| r.metrics.liquidity_level),
        expected_shortfall: avg(&|r| r.metrics.expected_shortfall),
        mean_rho: mean(&rhos),
    }
}

/// Runs every `(cell, replicate)` of the sweep.
pub fn run_sweep<T: Scalar>(spec: &SweepSpec<T>) -> Result<SweepTable<T>> {
    spec.validate()?;
    let jobs: Vec<(usize, u32)> = (0..spec.n_cells())
        .flat_map(|c| (0..spec.seeds_per_cell).map(move |r| (c, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(cell, replicate)| {
            let (sim, pop) = spec.cell_configs(cell);
            let seed = sweep_seed(spec.base_seed, cell as u32, replicate);
            let result = simulate_run(&sim, &pop, seed)?;
            Ok(SweepRow {
                cell,
                replicate,
                params: spec.cell_values(cell),
                seed,
                aggregates: result.aggregates,
                metrics: result.metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameters: spec.axes.iter().map(|a| a.name).collect(),
        rows,
    })
}

const AGGREGATE_COLUMNS: [&str; 5] = ["A_bar", "H_bar", "C_bar", "V_bar", "S_bar"];
const METRIC_COLUMNS: [&str; 5] = [
    "pricing_error_rmse",
    "volatility",
    "liquidity_level",
    "expected_shortfall",
    "mean_rho",
];

/// Header of `sweep.csv` for the given swept parameters.
pub fn sweep_header(parameters: &[SweepParameter]) -> Vec<String> {
    parameters
        .iter()
        .map(|p| p.name().to_owned())
        .chain(std::iter::once("seed".to_owned()))
        .chain(AGGREGATE_COLUMNS.iter().map(|s| s.to_string()))
        .chain(METRIC_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

/// Writes `sweep.csv`. Floats use the shortest representation that parses
/// back to the same value.
pub fn write_sweep_csv<T: Scalar, W: Write>(table: &SweepTable<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(&table.parameters))?;
    for row in &table.rows {
        let a = &row.aggregates;
        let m = &row.metrics;
        let mut rec: Vec<String> = row.params.iter().map(|v| v.to_string()).collect();
        rec.push(row.seed.to_string());
        rec.extend(
            [a.autonomy, a.heterogeneity, a.coupling, a.concentration, a.observability]
                .iter()
                .map(|v| v.to_string()),
        );
        rec.extend(
            [m.pricing_error_rmse, m.volatility, m.liquidity_level, m.expected_shortfall]
                .iter()
                .map(|v| v.to_string()),
        );
        rec.push(m.mean_rho.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("sweep.csv", e))?;
    Ok(())
}

/// Reads `sweep.csv`. Consecutive rows with identical swept values form one
/// cell; replicates are numbered by position within the cell.
pub fn read_sweep_csv<T: Scalar>(path: &Path) -> Result<SweepTable<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let seed_col = header
        .iter()
        .position(|h| h == "seed")
        .ok_or_else(|| Error::Data(format!("{}: missing `seed` column", path.display())))?;
    let parameters = header[..seed_col]
        .iter()
        .map(|h| h.parse::<SweepParameter>().map_err(|_| Error::Data(format!("unknown sweep column `{h}`"))))
        .collect::<Result<Vec<_>>>()?;
    if header != sweep_header(&parameters) {
        return Err(Error::Data(format!("{}: unexpected header {:?}", path.display(), header)));
    }

    let num = |s: &str, line: usize| -> Result<T> {
        s.parse::<f64>()
            .map(T::of)
            .map_err(|_| Error::Data(format!("{}: line {line}: bad number `{s}`", path.display())))
    };
    let mut rows: Vec<SweepRow<T>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let params = (0..seed_col).map(|k| num(field(k), line)).collect::<Result<Vec<_>>>()?;
        let seed = field(seed_col)
            .parse::<u64>()
            .map_err(|_| Error::Data(format!("{}: line {line}: bad seed", path.display())))?;
        let g = |k: usize| num(field(seed_col + 1 + k), line);
        let aggregates = ParameterAggregates {
            autonomy: g(0)?,
            heterogeneity: g(1)?,
            coupling: g(2)?,
            concentration: g(3)?,
            observability: g(4)?,
        };
        let rho_field = field(seed_col + 10);
        let metrics = MetricBundle {
            pricing_error_rmse: g(5)?,
            volatility: g(6)?,
            liquidity_level: g(7)?,
            expected_shortfall: g(8)?,
            mean_rho: if rho_field.is_empty() { None } else { Some(num(rho_field, line)?) },
        };
        let (cell, replicate) = match rows.last() {
            Some(prev) if prev.params == params => (prev.cell, prev.replicate + 1),
            Some(prev) => (prev.cell + 1, 0),
            None => (0, 0),
        };
        rows.push(SweepRow {
            cell,
            replicate,
            params,
            seed,
            aggregates,
            metrics,
        });
    }
    Ok(SweepTable { parameters, rows })
}
