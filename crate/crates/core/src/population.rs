//! Heterogeneous agent population.
//!
//! Each agent carries its design parameters (autonomy, model heterogeneity,
//! execution coupling, supervisory observability), a vendor assignment and a
//! market weight. Vendor shares follow a Zipf-like law `rank^-skew`, and an
//! agent's vendor exposure is the weight share of the vendor it is assigned to.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding::rng_from_seed;

/// Design parameters of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec<T> {
    pub id: usize,
    /// Share of decisions that reach the market without human approval.
    pub autonomy: T,
    /// Weight of idiosyncratic (vs. shared) model error.
    pub heterogeneity: T,
    /// Weight of the common-signal trigger in the decision rule.
    pub coupling: T,
    /// Probability of effective supervisory intervention.
    pub observability: T,
    pub vendor_id: usize,
    /// Market share of the agent's vendor.
    pub vendor_exposure: T,
    pub weight: T,
    pub position_limit: T,
}

/// Mean and half-width of a uniformly sampled design parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ParamRange<T: Scalar> {
    pub mean: T,
    #[serde(default = "zero")]
    pub half_width: T,
}

fn zero<T: Scalar>() -> T {
    T::zero()
}

impl<T: Scalar> ParamRange<T> {
    pub fn new(mean: T, half_width: T) -> Self {
        Self { mean, half_width }
    }

    pub fn fixed(mean: T) -> Self {
        Self::new(mean, T::zero())
    }

    /// Support of the sampling law after clipping to `[0, 1]`.
    pub fn bounds(&self) -> (T, T) {
        let lo = (self.mean - self.half_width).max(T::zero());
        let hi = (self.mean + self.half_width).min(T::one());
        (lo, hi)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let unit = T::zero()..=T::one();
        if !unit.contains(&self.mean) {
            return Err(Error::Config(format!("{name}.mean must lie in [0,1], got {}", self.mean)));
        }
        if !(self.half_width >= T::zero()) {
            return Err(Error::Config(format!("{name}.half_width must be >= 0")));
        }
        Ok(())
    }

    fn sample(&self, u: T) -> T {
        let (lo, hi) = self.bounds();
        lo + u * (hi - lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_i = 1/N`.
    #[default]
    Equal,
    /// Independent uniforms normalised to sum to one.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound = "T: Scalar")]
pub struct PopulationConfig<T: Scalar> {
    pub n_agents: usize,
    pub autonomy: ParamRange<T>,
    pub heterogeneity: ParamRange<T>,
    pub coupling: ParamRange<T>,
    pub observability: ParamRange<T>,
    pub n_vendors: usize,
    pub vendor_skew: T,
    pub weight_mode: WeightMode,
    pub position_limit: T,
}

impl<T: Scalar> Default for PopulationConfig<T> {
    fn default() -> Self {
        let mid = ParamRange::new(T::half(), T::of(0.2));
        Self {
            n_agents: 100,
            autonomy: mid,
            heterogeneity: mid,
            coupling: mid,
            observability: mid,
            n_vendors: 5,
            vendor_skew: T::one(),
            weight_mode: WeightMode::Equal,
            position_limit: T::of(10.0),
        }
    }
}

impl<T: Scalar> PopulationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("population.n_agents must be positive".into()));
        }
        if self.n_vendors == 0 {
            return Err(Error::Config("population.n_vendors must be positive".into()));
        }
        self.autonomy.validate("population.autonomy")?;
        self.heterogeneity.validate("population.heterogeneity")?;
        self.coupling.validate("population.coupling")?;
        self.observability.validate("population.observability")?;
        if !(self.vendor_skew >= T::zero()) || !self.vendor_skew.is_finite() {
            return Err(Error::Config("population.vendor_skew must be finite and >= 0".into()));
        }
        if !(self.position_limit > T::zero()) {
            return Err(Error::Config("population.position_limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPopulation<T> {
    pub agents: Vec<AgentSpec<T>>,
    /// Weight share of each vendor; sums to one.
    pub vendor_shares: Vec<T>,
}

/// Weight-weighted means of the design parameters plus vendor concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterAggregates<T> {
    pub autonomy: T,
    pub heterogeneity: T,
    pub coupling: T,
    pub observability: T,
    /// Herfindahl index of vendor shares.
    pub concentration: T,
}

impl<T: Scalar> AgentPopulation<T> {
    /// Assembles a population from explicit agents. Vendor shares and every
    /// agent's `vendor_exposure` are recomputed from the weights.
    pub fn from_agents(mut agents: Vec<AgentSpec<T>>, n_vendors: usize) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Config("population must contain at least one agent".into()));
        }
        if n_vendors == 0 {
            return Err(Error::Config("n_vendors must be positive".into()));
        }
        let mut shares = vec![T::zero(); n_vendors];
        for a in &agents {
            if a.vendor_id >= n_vendors {
                return Err(Error::Config(format!(
                    "agent {} has vendor {} outside [0,{n_vendors})",
                    a.id, a.vendor_id
                )));
            }
            if !(a.weight >= T::zero()) {
                return Err(Error::Config(format!("agent {} has negative weight", a.id)));
            }
            if !(a.position_limit > T::zero()) {
                return Err(Error::Config(format!("agent {} has nonpositive position limit", a.id)));
            }
            shares[a.vendor_id] = shares[a.vendor_id] + a.weight;
        }
        let total: T = shares.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Config("agent weights must not all be zero".into()));
        }
        for s in &mut shares {
            *s = *s / total;
        }
        for a in &mut agents {
            a.vendor_exposure = shares[a.vendor_id];
        }
        Ok(Self {
            agents,
            vendor_shares: shares,
        })
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn weights(&self) -> Vec<T> {
        self.agents.iter().map(|a| a.weight).collect()
    }
}

/// Zipf-like target shares `rank^-skew`, normalised.
pub fn zipf_shares<T: Scalar>(n_vendors: usize, skew: T) -> Vec<T> {
    let raw: Vec<T> = (1..=n_vendors).map(|r| T::of_usize(r).powf(-skew)).collect();
    let total: T = raw.iter().copied().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Largest-remainder apportionment of `n` seats to `shares`; ties go to the
/// lower rank.
fn apportion<T: Scalar>(n: usize, shares: &[T]) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|s| s.as_f64() * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Samples a population. Deterministic in `(config, seed)`.
///
/// Draw order: four uniforms per agent (autonomy, heterogeneity, coupling,
/// observability) in id order, then one uniform per agent when weights are
/// random, then a Fisher-Yates shuffle of the vendor seat list. The shuffle
/// consumes the same draws for every skew, so changing only the skew moves
/// seats between vendors without reshuffling agents.
pub fn build_population<T: Scalar>(config: &PopulationConfig<T>, seed: u64) -> Result<AgentPopulation<T>> {
    config.validate()?;
    let n = config.n_agents;
    let mut rng = rng_from_seed(seed);

    let mut agents: Vec<AgentSpec<T>> = (0..n)
        .map(|id| {
            let mut u = || T::of(rng.random::<f64>());
            AgentSpec {
                id,
                autonomy: config.autonomy.sample(u()),
                heterogeneity: config.heterogeneity.sample(u()),
                coupling: config.coupling.sample(u()),
                observability: config.observability.sample(u()),
                vendor_id: 0,
                vendor_exposure: T::one(),
                weight: T::one() / T::of_usize(n),
                position_limit: config.position_limit,
            }
        })
        .collect();

    if config.weight_mode == WeightMode::Random {
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            for (a, w) in agents.iter_mut().zip(raw) {
                a.weight = T::of(w / total);
            }
        }
    }

    let counts = apportion(n, &zipf_shares(config.n_vendors, config.vendor_skew));
    let mut seats: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(k, &c)| std::iter::repeat_n(k, c))
        .collect();
    seats.shuffle(&mut rng);
    for (a, k) in agents.iter_mut().zip(seats) {
        a.vendor_id = k;
    }

    AgentPopulation::from_agents(agents, config.n_vendors)
}

/// Herfindahl index of vendor shares, in `[1/K, 1]`.
pub fn vendor_concentration<T: Scalar>(pop: &AgentPopulation<T>) -> T {
    pop.vendor_shares.iter().map(|&s| s * s).sum()
}

pub fn population_summary<T: Scalar>(pop: &AgentPopulation<T>) -> ParameterAggregates<T> {
    let total: T = pop.agents.iter().map(|a| a.weight).sum();
    let wmean = |f: fn(&AgentSpec<T>) -> T| -> T {
        pop.agents.iter().map(|a| a.weight * f(a)).sum::<T>() / total
    };
    ParameterAggregates {
        autonomy: wmean(|a| a.autonomy),
        heterogeneity: wmean(|a| a.heterogeneity),
        coupling: wmean(|a| a.coupling),
        observability: wmean(|a| a.observability),
        concentration: vendor_concentration(pop),
    }
}
