use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Environment and market-mechanism parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct SimConfig<T: Scalar> {
    /// Number of steps.
    pub horizon: usize,
    /// Leading steps excluded from the metrics.
    pub burn_in: usize,
    pub p0: T,
    pub v0: T,
    /// Per-step volatility of the fundamental.
    pub sigma_v: T,
    /// Per-step probability of a news jump in the fundamental.
    pub jump_prob: T,
    pub sigma_jump: T,
    /// Noise of the public signal around the fundamental.
    pub sigma_s: T,
    /// Scale of model error (shared and idiosyncratic parts).
    pub sigma_m: T,
    /// Units traded per price unit of perceived mispricing.
    pub kappa: T,
    /// Mispricing of the public signal that fires the coupled trigger.
    pub theta: T,
    /// Baseline depth (units per price unit).
    pub depth0: T,
    /// Sensitivity of depth to stress.
    pub gamma: T,
    pub depth_floor: T,
    /// Price changes entering the realised-volatility stress measure.
    pub stress_window: usize,
    /// Stress level above which supervisory checks fire.
    pub stress_threshold: T,
    /// Fraction of a position flattened by a supervisory check.
    pub flatten_fraction: T,
    pub pause_steps: u32,
    /// Per-vendor per-step outage probability.
    pub outage_prob: T,
    pub outage_duration: u32,
    /// Fraction of the position unwound per step by agents caught in an outage.
    pub unwind_rate: T,
    pub rho_window: usize,
    pub rho_pairs: usize,
    /// Tail fraction for expected shortfall.
    pub es_tail: T,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            horizon: 2000,
            burn_in: 200,
            p0: T::of(100.0),
            v0: T::of(100.0),
            sigma_v: T::of(0.01),
            jump_prob: T::of(0.002),
            sigma_jump: T::of(0.3),
            sigma_s: T::of(1.2),
            sigma_m: T::of(1.0),
            kappa: T::of(0.2),
            theta: T::of(0.3),
            depth0: T::of(1.0),
            gamma: T::of(4.0),
            depth_floor: T::of(0.2),
            stress_window: 20,
            stress_threshold: T::of(1.0),
            flatten_fraction: T::of(0.0),
            pause_steps: 20,
            outage_prob: T::of(0.005),
            outage_duration: 20,
            unwind_rate: T::of(1.0),
            rho_window: 20,
            rho_pairs: 200,
            es_tail: T::of(0.01),
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("simulation.{msg}")));
        if self.horizon == 0 {
            return fail("horizon must be positive".into());
        }
        if self.burn_in >= self.horizon {
            return fail(format!("burn_in ({}) must be < horizon ({})", self.burn_in, self.horizon));
        }
        if self.horizon - self.burn_in < 2 {
            return fail("at least 2 post-burn-in steps are required".into());
        }
        for (name, v) in [("p0", self.p0), ("v0", self.v0)] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        for (name, v) in [
            ("sigma_v", self.sigma_v),
            ("sigma_jump", self.sigma_jump),
            ("sigma_s", self.sigma_s),
            ("sigma_m", self.sigma_m),
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("gamma", self.gamma),
            ("stress_threshold", self.stress_threshold),
        ] {
            if !(v >= T::zero()) || !v.is_finite() {
                return fail(format!("{name} must be finite and >= 0"));
            }
        }
        for (name, v) in [
            ("jump_prob", self.jump_prob),
            ("outage_prob", self.outage_prob),
            ("flatten_fraction", self.flatten_fraction),
            ("unwind_rate", self.unwind_rate),
        ] {
            if !(T::zero()..=T::one()).contains(&v) {
                return fail(format!("{name} must lie in [0,1]"));
            }
        }
        if !(self.depth_floor > T::zero()) || !self.depth_floor.is_finite() {
            return fail("depth_floor must be positive".into());
        }
        if !(self.depth0 > T::zero()) || !self.depth0.is_finite() {
            return fail("depth0 must be positive".into());
        }
        if self.stress_window == 0 {
            return fail("stress_window must be positive".into());
        }
        if self.rho_window < 2 {
            return fail("rho_window must be >= 2".into());
        }
        if !(self.es_tail > T::zero() && self.es_tail <= T::half()) {
            return fail("es_tail must lie in (0, 0.5]".into());
        }
        Ok(())
    }
}
