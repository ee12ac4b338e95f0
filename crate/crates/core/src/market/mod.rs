//! The market loop: environment, beliefs, decisions, controls, aggregation,
//! price impact and state transition.
//!
//! A run is strictly sequential. All randomness comes from a single
//! `ChaCha8Rng` stream consumed in a fixed order per step: the environment
//! draws (see [`env::Environment::advance`]), then for each agent in id order
//! one standard normal (idiosyncratic model error) and three uniforms
//! (outage, supervision, approval). Every agent consumes its four draws
//! whatever branch the control map takes, so the stream stays aligned across
//! parameter changes.

pub mod agent;
pub mod config;
pub mod env;

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use agent::{
    aggregate_actions, apply_controls, decide, form_belief, update_price, ActionStatus, AgentBook, ControlDraws,
    ControlParams, DecisionObject, RealizedAction,
};
pub use config::SimConfig;
pub use env::EnvSnapshot;

use crate::error::{Error, Result};
use crate::metrics::{self, MetricBundle};
use crate::population::{build_population, population_summary, AgentPopulation, ParameterAggregates, PopulationConfig};
use crate::scalar::{mean, Scalar};
use crate::seeding::{child_seed, rng_from_seed, Rng};

const POPULATION_STREAM: u64 = 1;
const MARKET_STREAM: u64 = 2;
const PAIR_STREAM: u64 = 3;

/// Number of agents in each control outcome at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub executed: usize,
    pub delayed: usize,
    pub paused: usize,
    pub frozen: usize,
    pub unwind: usize,
}

impl StatusCounts {
    fn add(&mut self, status: ActionStatus) {
        match status {
            ActionStatus::Executed => self.executed += 1,
            ActionStatus::Delayed => self.delayed += 1,
            ActionStatus::Paused => self.paused += 1,
            ActionStatus::FrozenSafe => self.frozen += 1,
            ActionStatus::ForcedUnwind => self.unwind += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<T> {
    pub t: usize,
    /// Price after this step's flow has been absorbed.
    pub p: T,
    pub v: T,
    pub s: T,
    /// Aggregate weighted flow.
    pub q_total: T,
    pub depth: T,
    pub stress: T,
    pub news: T,
    /// Realised trade of every agent, in id order.
    pub actions: Vec<T>,
    pub counts: StatusCounts,
}

/// Seed and configuration digest identifying a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult<T> {
    /// Records for `t` in `[burn_in, horizon)`.
    pub records: Vec<StepRecord<T>>,
    pub metrics: MetricBundle<T>,
    /// Realised population aggregates.
    pub aggregates: ParameterAggregates<T>,
    pub run: RunInfo,
}

/// Full state of a running simulation.
#[derive(Debug, Clone)]
pub struct SimState<T: Scalar> {
    config: SimConfig<T>,
    population: AgentPopulation<T>,
    weights: Vec<T>,
    t: usize,
    price: T,
    books: Vec<AgentBook<T>>,
    env: env::Environment<T>,
    rng: Rng,
}

impl<T: Scalar> SimState<T> {
    pub fn config(&self) -> &SimConfig<T> {
        &self.config
    }

    pub fn population(&self) -> &AgentPopulation<T> {
        &self.population
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn price(&self) -> T {
        self.price
    }

    pub fn fundamental(&self) -> T {
        self.env.v
    }

    pub fn books(&self) -> &[AgentBook<T>] {
        &self.books
    }

    pub fn outage_timers(&self) -> &[u32] {
        &self.env.outage_timers
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.horizon
    }

    fn control_params(&self) -> ControlParams<T> {
        ControlParams {
            stress_threshold: self.config.stress_threshold,
            flatten_fraction: self.config.flatten_fraction,
            pause_steps: self.config.pause_steps,
            unwind_rate: self.config.unwind_rate,
        }
    }
}

impl<T: Scalar> PartialEq for SimState<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.population == other.population
            && self.t == other.t
            && self.price == other.price
            && self.books == other.books
            && self.env == other.env
            && self.rng == other.rng
    }
}

pub fn init_sim<T: Scalar>(config: &SimConfig<T>, population: AgentPopulation<T>, seed: u64) -> Result<SimState<T>> {
    config.validate()?;
    if population.is_empty() {
        return Err(Error::Config("population is empty".into()));
    }
    let n_vendors = population.vendor_shares.len();
    Ok(SimState {
        config: config.clone(),
        weights: population.weights(),
        books: vec![AgentBook::default(); population.len()],
        population,
        t: 0,
        price: config.p0,
        env: env::Environment::new(config, n_vendors),
        rng: rng_from_seed(child_seed(seed, MARKET_STREAM)),
    })
}

/// Draws this step's exogenous environment.
pub fn advance_environment<T: Scalar>(state: &mut SimState<T>) -> Result<EnvSnapshot<T>> {
    if state.is_finished() {
        return Err(Error::Contract("advance_environment: horizon reached".into()));
    }
    Ok(state.env.advance(&state.config, state.t, &mut state.rng))
}

/// One application of the transition: environment, per-agent pipeline,
/// aggregation, price impact, bookkeeping.
pub fn step<T: Scalar>(state: &mut SimState<T>) -> Result<StepRecord<T>> {
    let snapshot = advance_environment(state)?;
    let params = state.control_params();
    let (kappa, theta, sigma_m) = (state.config.kappa, state.config.theta, state.config.sigma_m);

    let mut realized = Vec::with_capacity(state.books.len());
    let mut counts = StatusCounts::default();
    for (agent, book) in state.population.agents.iter().zip(state.books.iter_mut()) {
        let idio = T::of(state.rng.sample::<f64, _>(StandardNormal));
        let draws = ControlDraws {
            outage: T::of(state.rng.random::<f64>()),
            supervision: T::of(state.rng.random::<f64>()),
            approval: T::of(state.rng.random::<f64>()),
        };
        let belief = form_belief(agent, &snapshot, sigma_m, idio);
        let decision = decide(agent, belief, &snapshot, state.price, kappa, theta);
        let action = apply_controls(agent, &decision, book, &snapshot, &params, draws);
        // re-clamped because `clamp_to_limit` round-trips through a subtraction
        let limit = agent.position_limit;
        book.position = (book.position + action.q).max(-limit).min(limit);
        debug_assert!(book.position.abs() <= agent.position_limit);
        counts.add(action.status);
        realized.push(action);
    }

    let flow = aggregate_actions(&realized, &state.weights)?;
    let new_price = update_price(state.price, flow, snapshot.depth)?;
    state
        .env
        .record_price_change(new_price - state.price, state.config.stress_window);
    state.price = new_price;
    state.t += 1;

    Ok(StepRecord {
        t: snapshot.t,
        p: new_price,
        v: snapshot.v,
        s: snapshot.s,
        q_total: flow,
        depth: snapshot.depth,
        stress: snapshot.stress,
        news: snapshot.news,
        actions: realized.iter().map(|a| a.q).collect(),
        counts,
    })
}

/// SHA-256 of the canonical JSON encoding of both configurations.
pub fn config_digest<T: Scalar>(config: &SimConfig<T>, population: &PopulationConfig<T>) -> String {
    let bytes = serde_json::to_vec(&(config, population)).expect("configs serialise");
    hex_digest(&bytes)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Agent pairs `(i, j)`, `i < j`, used for the similarity measure: all pairs
/// when there are at most `count`, otherwise a uniform sample without
/// replacement, sorted.
pub fn sample_pairs(n_agents: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n_agents * n_agents.saturating_sub(1) / 2;
    let decode = |mut k: usize| {
        let mut i = 0;
        let mut row = n_agents - 1;
        while k >= row {
            k -= row;
            i += 1;
            row -= 1;
        }
        (i, i + 1 + k)
    };
    if total <= count {
        return (0..total).map(decode).collect();
    }
    let mut rng = rng_from_seed(seed);
    let mut picks = index::sample(&mut rng, total, count).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(decode).collect()
}

/// Metric bundle from post-burn-in records.
pub fn compute_metrics<T: Scalar>(
    records: &[StepRecord<T>],
    config: &SimConfig<T>,
    pairs: &[(usize, usize)],
) -> Result<MetricBundle<T>> {
    let prices: Vec<T> = records.iter().map(|r| r.p).collect();
    let values: Vec<T> = records.iter().map(|r| r.v).collect();
    let depths: Vec<T> = records.iter().map(|r| r.depth).collect();
    let returns: Vec<T> = prices.windows(2).map(|w| w[1] - w[0]).collect();

    let n_agents = records.first().map_or(0, |r| r.actions.len());
    let actions: Vec<Vec<T>> = (0..n_agents)
        .map(|i| records.iter().map(|r| r.actions[i]).collect())
        .collect();
    let rho = metrics::action_similarity(&actions, config.rho_window, pairs)?;
    let rhos: Vec<T> = rho.iter().map(|p| p.rho).collect();

    Ok(MetricBundle {
        pricing_error_rmse: metrics::pricing_error(&prices, &values)?,
        volatility: metrics::realized_volatility(&returns)?,
        liquidity_level: metrics::liquidity_level(&depths, config.depth0)?,
        expected_shortfall: metrics::expected_shortfall(&returns, config.es_tail)?,
        mean_rho: mean(&rhos),
    })
}

/// Runs a full simulation: population from a sub-seed, `horizon` steps,
/// metrics over the post-burn-in records.
pub fn simulate_run<T: Scalar>(
    config: &SimConfig<T>,
    population_config: &PopulationConfig<T>,
    seed: u64,
) -> Result<SimResult<T>> {
    config.validate()?;
    population_config.validate()?;
    let population = build_population(population_config, child_seed(seed, POPULATION_STREAM))?;
    let aggregates = population_summary(&population);
    let pairs = sample_pairs(population.len(), config.rho_pairs, child_seed(seed, PAIR_STREAM));
    let mut state = init_sim(config, population, seed)?;

    let mut records = Vec::with_capacity(config.horizon - config.burn_in);
    while !state.is_finished() {
        let record = step(&mut state)?;
        if record.t >= config.burn_in {
            records.push(record);
        }
    }
    let metrics = compute_metrics(&records, config, &pairs)?;
    Ok(SimResult {
        records,
        metrics,
        aggregates,
        run: RunInfo {
            seed,
            config_digest: config_digest(config, population_config),
        },
    })
}

/// Header of `series.csv`.
pub const SERIES_COLUMNS: [&str; 13] = [
    "t", "p", "v", "s", "Q", "D", "Z", "news", "n_executed", "n_delayed", "n_paused", "n_frozen", "n_unwind",
];

/// One parsed row of `series.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: usize,
    pub p: f64,
    pub v: f64,
    pub s: f64,
    #[serde(rename = "Q")]
    pub q_total: f64,
    #[serde(rename = "D")]
    pub depth: f64,
    #[serde(rename = "Z")]
    pub stress: f64,
    pub news: f64,
    pub n_executed: usize,
    pub n_delayed: usize,
    pub n_paused: usize,
    pub n_frozen: usize,
    pub n_unwind: usize,
}

impl<T: Scalar> From<&StepRecord<T>> for SeriesRow {
    fn from(r: &StepRecord<T>) -> Self {
        SeriesRow {
            t: r.t,
            p: r.p.as_f64(),
            v: r.v.as_f64(),
            s: r.s.as_f64(),
            q_total: r.q_total.as_f64(),
            depth: r.depth.as_f64(),
            stress: r.stress.as_f64(),
            news: r.news.as_f64(),
            n_executed: r.counts.executed,
            n_delayed: r.counts.delayed,
            n_paused: r.counts.paused,
            n_frozen: r.counts.frozen,
            n_unwind: r.counts.unwind,
        }
    }
}

pub fn write_series<T: Scalar, W: Write>(records: &[StepRecord<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(SeriesRow::from(r))?;
    }
    w.flush().map_err(|e| Error::io("series.csv", e))?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != SERIES_COLUMNS {
        return Err(Error::Data(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
