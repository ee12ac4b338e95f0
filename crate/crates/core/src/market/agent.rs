//! Per-agent pipeline: belief formation, decision rule, and the control map
//! that turns a decision into a realised trade.

use serde::{Deserialize, Serialize};

use super::env::EnvSnapshot;
use crate::error::{Error, Result};
use crate::population::AgentSpec;
use crate::scalar::Scalar;

/// Proposed trade before institutional controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionObject<T> {
    pub agent_id: usize,
    /// Desired signed trade in units.
    pub desired_trade: T,
    /// Whether the common-signal trigger fired.
    pub trigger_active: bool,
    pub belief: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    Executed,
    /// Awaiting approval; the raw trade is queued for the next step.
    Delayed,
    Paused,
    /// Vendor outage contained by supervision.
    FrozenSafe,
    /// Position reduction forced by an uncontained outage or a supervisory
    /// flatten.
    ForcedUnwind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedAction<T> {
    pub agent_id: usize,
    pub q: T,
    pub status: ActionStatus,
}

/// Mutable per-agent book kept by the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentBook<T> {
    pub position: T,
    /// Raw trade awaiting approval (zero when the slot is empty).
    pub pending: T,
    pub pause_left: u32,
}

/// Uniform draws consumed by [`apply_controls`], one set per agent per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDraws<T> {
    /// Outage containment: frozen when `< observability`.
    pub outage: T,
    /// Stress check: flatten when `< observability`.
    pub supervision: T,
    /// Approval: delayed when `< 1 - autonomy`.
    pub approval: T,
}

/// Mechanism parameters read by [`apply_controls`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams<T> {
    pub stress_threshold: T,
    pub flatten_fraction: T,
    pub pause_steps: u32,
    pub unwind_rate: T,
}

/// `b = v + sqrt(1-H)·m + sqrt(H)·σ_m·idio`. The belief-error variance is
/// `σ_m²` for every `H`; only its split between shared and private parts moves.
pub fn form_belief<T: Scalar>(agent: &AgentSpec<T>, env: &EnvSnapshot<T>, sigma_m: T, idio: T) -> T {
    let h = agent.heterogeneity;
    env.v + (T::one() - h).sqrt() * env.m + h.sqrt() * sigma_m * idio
}

/// Linear mispricing demand blended with a thresholded common-signal trigger:
/// `d = (1-C)·κ·(b-p) + C·κ·(s-p)·1{|s-p| >= θ}`.
pub fn decide<T: Scalar>(
    agent: &AgentSpec<T>,
    belief: T,
    env: &EnvSnapshot<T>,
    price: T,
    kappa: T,
    theta: T,
) -> DecisionObject<T> {
    let c = agent.coupling;
    let gap = env.s - price;
    let trigger_active = gap.abs() >= theta;
    let own = (T::one() - c) * kappa * (belief - price);
    let coupled = if trigger_active { c * kappa * gap } else { T::zero() };
    DecisionObject {
        agent_id: agent.id,
        desired_trade: own + coupled,
        trigger_active,
        belief,
    }
}

fn clamp_to_limit<T: Scalar>(position: T, q: T, limit: T) -> T {
    (position + q).max(-limit).min(limit) - position
}

/// Control map from decision to realised trade, evaluated in order:
///
/// 1. vendor outage: frozen with probability `S`, otherwise unwind `μ` of the
///    position (pending trade dropped);
/// 2. supervision: a paused agent does nothing; under stress `Z > z*` the agent
///    is checked with probability `S`, flattening `φ` of its position and
///    pausing for `pause_steps`;
/// 3. approval: `raw = A·(d + pending)`, queued with probability `1-A`,
///    otherwise executed and clamped to the position limit.
///
/// Updates `book.pending` and `book.pause_left`; the caller applies `q` to the
/// position.
pub fn apply_controls<T: Scalar>(
    agent: &AgentSpec<T>,
    decision: &DecisionObject<T>,
    book: &mut AgentBook<T>,
    env: &EnvSnapshot<T>,
    params: &ControlParams<T>,
    draws: ControlDraws<T>,
) -> RealizedAction<T> {
    let act = |q: T, status| RealizedAction {
        agent_id: agent.id,
        q,
        status,
    };
    let s = agent.observability;
    let limit = agent.position_limit;

    if env.is_failed(agent.vendor_id) {
        if draws.outage < s {
            return act(T::zero(), ActionStatus::FrozenSafe);
        }
        book.pending = T::zero();
        let q = clamp_to_limit(book.position, -params.unwind_rate * book.position, limit);
        return act(q, ActionStatus::ForcedUnwind);
    }

    if book.pause_left > 0 {
        book.pause_left -= 1;
        return act(T::zero(), ActionStatus::Paused);
    }
    if env.stress > params.stress_threshold && draws.supervision < s {
        book.pending = T::zero();
        book.pause_left = params.pause_steps;
        let q = clamp_to_limit(book.position, -params.flatten_fraction * book.position, limit);
        return act(q, ActionStatus::ForcedUnwind);
    }

    let a = agent.autonomy;
    let raw = a * (decision.desired_trade + book.pending);
    book.pending = T::zero();
    if draws.approval < T::one() - a {
        book.pending = raw;
        return act(T::zero(), ActionStatus::Delayed);
    }
    act(clamp_to_limit(book.position, raw, limit), ActionStatus::Executed)
}

/// `Q = Σ w_i q_i`.
pub fn aggregate_actions<T: Scalar>(actions: &[RealizedAction<T>], weights: &[T]) -> Result<T> {
    if actions.len() != weights.len() {
        return Err(Error::Contract(format!(
            "aggregate_actions: {} actions vs {} weights",
            actions.len(),
            weights.len()
        )));
    }
    Ok(actions.iter().zip(weights).map(|(a, &w)| w * a.q).sum())
}

/// Linear impact `p + Q/D`.
pub fn update_price<T: Scalar>(price: T, flow: T, depth: T) -> Result<T> {
    if !(depth > T::zero()) {
        return Err(Error::Contract(format!("update_price: depth must be positive, got {depth}")));
    }
    Ok(price + flow / depth)
}
