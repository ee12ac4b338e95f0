//! Agent-based market simulation with AI-agent design parameters, market
//! outcome metrics, parameter sweeps with monotonicity and interaction checks,
//! and an event-study pipeline for capability announcements.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the command-line tool
//! uses.

// negated comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eventstudy;
pub mod experiments;
pub mod market;
pub mod metrics;
pub mod population;
pub mod scalar;
pub mod seeding;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type AgentSpec = population::AgentSpec<f64>;
pub type AgentPopulation = population::AgentPopulation<f64>;
pub type PopulationConfig = population::PopulationConfig<f64>;
pub type SimConfig = market::SimConfig<f64>;
pub type SimState = market::SimState<f64>;
pub type SimResult = market::SimResult<f64>;
pub type StepRecord = market::StepRecord<f64>;
pub type MetricBundle = metrics::MetricBundle<f64>;
pub type OlsResult = metrics::OlsResult<f64>;
pub type PricePanel = eventstudy::PricePanel<f64>;
pub type FirmRecord = eventstudy::FirmRecord<f64>;
pub type MarketModelFit = eventstudy::MarketModelFit<f64>;
pub type CarRow = eventstudy::CarRow<f64>;
pub use eventstudy::EventSpec;
