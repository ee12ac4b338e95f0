use std::path::Path;

use serde::{Deserialize, Serialize};

use super::propositions::{
    fit_rho_reduced_form, psi_report, test_proposition1, test_proposition2, test_proposition3, PropositionReport,
    Thresholds,
};
use super::{run_sweep, SweepAxis, SweepParameter, SweepSpec, SweepTable};
use crate::error::{Error, Result};
use crate::market::SimConfig;
use crate::metrics::OlsResult;
use crate::population::PopulationConfig;
use crate::scalar::Scalar;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct SweepSection<T: Scalar> {
    pub parameters: Vec<SweepAxis<T>>,
    pub seeds_per_cell: u32,
}

impl<T: Scalar> Default for SweepSection<T> {
    fn default() -> Self {
        Self {
            parameters: vec![SweepAxis::new(SweepParameter::Coupling, desk_grid())],
            seeds_per_cell: 20,
        }
    }
}

fn desk_grid<T: Scalar>() -> Vec<T> {
    [0.1, 0.3, 0.5, 0.7, 0.9].into_iter().map(T::of).collect()
}

fn of<T: Scalar>(xs: &[f64]) -> Vec<T> {
    xs.iter().copied().map(T::of).collect()
}

/// Grids of the proposition sweeps. Every other mean stays at the
/// population defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct PropositionPlan<T: Scalar> {
    pub seeds_per_cell: u32,
    /// Heterogeneity grid for the price-discovery test.
    pub heterogeneity: Vec<T>,
    /// Coupling grid for the herding test.
    pub coupling: Vec<T>,
    /// Low and high autonomy for the systemic-risk test.
    pub autonomy_levels: [T; 2],
    /// Low and high vendor skew for the systemic-risk test.
    pub vendor_skew_levels: [T; 2],
    /// Low and high observability for the systemic-risk test.
    pub observability_levels: [T; 2],
    pub psi_coupling: Vec<T>,
    pub psi_heterogeneity: Vec<T>,
    pub psi_vendor_skew: Vec<T>,
    pub psi_seeds_per_cell: u32,
}

impl<T: Scalar> Default for PropositionPlan<T> {
    fn default() -> Self {
        Self {
            seeds_per_cell: 20,
            heterogeneity: desk_grid(),
            coupling: desk_grid(),
            autonomy_levels: [T::of(0.2), T::of(0.8)],
            vendor_skew_levels: [T::zero(), T::of(3.0)],
            observability_levels: [T::of(0.1), T::of(0.9)],
            psi_coupling: of(&[0.3, 0.5, 0.7]),
            psi_heterogeneity: of(&[0.3, 0.5, 0.7]),
            psi_vendor_skew: of(&[0.0, 2.0, 4.0]),
            psi_seeds_per_cell: 10,
        }
    }
}

/// Complete configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct ExperimentConfig<T: Scalar> {
    /// Seed of `simulate` and base seed of every sweep.
    pub seed: u64,
    pub population: PopulationConfig<T>,
    pub simulation: SimConfig<T>,
    pub sweep: SweepSection<T>,
    pub thresholds: Thresholds,
    pub propositions: PropositionPlan<T>,
}

impl<T: Scalar> Default for ExperimentConfig<T> {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            population: PopulationConfig::default(),
            simulation: SimConfig::default(),
            sweep: SweepSection::default(),
            thresholds: Thresholds::default(),
            propositions: PropositionPlan::default(),
        }
    }
}

/// The three proposition sweeps, the ψ sweep, and their reports.
#[derive(Debug, Clone, PartialEq)]
pub struct PropositionOutcome<T: Scalar> {
    pub tables: Vec<(&'static str, SweepTable<T>)>,
    pub reports: Vec<PropositionReport>,
    pub psi_fit: OlsResult<T>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; also returns its raw bytes.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Config(format!("{}: not valid UTF-8", path.display())))?;
        let cfg = Self::from_json(text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.simulation.validate()?;
        self.sweep_spec().validate()?;
        let p = &self.propositions;
        if p.heterogeneity.len() < 3 || p.coupling.len() < 3 {
            return Err(Error::Config("propositions: single-parameter grids need at least 3 points".into()));
        }
        for (name, [lo, hi]) in [
            ("autonomy_levels", p.autonomy_levels),
            ("vendor_skew_levels", p.vendor_skew_levels),
            ("observability_levels", p.observability_levels),
        ] {
            if !(lo < hi) {
                return Err(Error::Config(format!("propositions.{name}: low must be < high")));
            }
        }
        for spec in self.proposition_specs() {
            spec.validate()?;
        }
        Ok(())
    }

    fn spec(&self, axes: Vec<SweepAxis<T>>, seeds_per_cell: u32) -> SweepSpec<T> {
        SweepSpec {
            simulation: self.simulation.clone(),
            population: self.population.clone(),
            axes,
            seeds_per_cell,
            base_seed: self.seed,
        }
    }

    /// The `sweep` subcommand's grid.
    pub fn sweep_spec(&self) -> SweepSpec<T> {
        self.spec(self.sweep.parameters.clone(), self.sweep.seeds_per_cell)
    }

    /// Sweeps for P1, P2, P3 and ψ, in that order.
    pub fn proposition_specs(&self) -> [SweepSpec<T>; 4] {
        let p = &self.propositions;
        let n = p.seeds_per_cell;
        [
            self.spec(vec![SweepAxis::new(SweepParameter::Heterogeneity, p.heterogeneity.clone())], n),
            self.spec(vec![SweepAxis::new(SweepParameter::Coupling, p.coupling.clone())], n),
            self.spec(
                vec![
                    SweepAxis::new(SweepParameter::Autonomy, p.autonomy_levels.to_vec()),
                    SweepAxis::new(SweepParameter::VendorSkew, p.vendor_skew_levels.to_vec()),
                    SweepAxis::new(SweepParameter::Observability, p.observability_levels.to_vec()),
                ],
                n,
            ),
            self.spec(
                vec![
                    SweepAxis::new(SweepParameter::Coupling, p.psi_coupling.clone()),
                    SweepAxis::new(SweepParameter::Heterogeneity, p.psi_heterogeneity.clone()),
                    SweepAxis::new(SweepParameter::VendorSkew, p.psi_vendor_skew.clone()),
                ],
                p.psi_seeds_per_cell,
            ),
        ]
    }

    /// Runs the four sweeps and scores them.
    pub fn run_propositions(&self) -> Result<PropositionOutcome<T>> {
        let [s1, s2, s3, s4] = self.proposition_specs();
        let t1 = run_sweep(&s1)?;
        let t2 = run_sweep(&s2)?;
        let t3 = run_sweep(&s3)?;
        let t4 = run_sweep(&s4)?;
        let psi_fit = fit_rho_reduced_form(&t4)?;
        let reports = vec![
            test_proposition1(&t1, &self.thresholds)?,
            test_proposition2(&t2, &self.thresholds)?,
            test_proposition3(&t3)?,
            psi_report(&psi_fit, &self.thresholds),
        ];
        Ok(PropositionOutcome {
            tables: vec![("p1", t1), ("p2", t2), ("p3", t3), ("psi", t4)],
            reports,
            psi_fit,
        })
    }
}
