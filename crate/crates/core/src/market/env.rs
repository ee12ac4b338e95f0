//! Exogenous environment: fundamental with news jumps, public signal, common
//! model error, vendor outages, realised-volatility stress and depth.

use std::collections::VecDeque;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::SimConfig;
use crate::scalar::{population_std, Scalar};
use crate::seeding::Rng;

/// What every agent observes at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot<T> {
    pub t: usize,
    /// Fundamental value.
    pub v: T,
    /// Public signal, `v` plus common noise.
    pub s: T,
    /// Common model error shared (in part) by every agent's belief.
    pub m: T,
    /// Jump in the fundamental this step, zero when none.
    pub news: T,
    /// Realised volatility of recent price changes.
    pub stress: T,
    pub depth: T,
    /// Outage flag per vendor.
    pub vendor_failed: Vec<bool>,
}

impl<T> EnvSnapshot<T> {
    pub fn is_failed(&self, vendor: usize) -> bool {
        self.vendor_failed.get(vendor).copied().unwrap_or(false)
    }

    pub fn failed_vendors(&self) -> impl Iterator<Item = usize> + '_ {
        self.vendor_failed
            .iter()
            .enumerate()
            .filter_map(|(k, &f)| f.then_some(k))
    }
}

/// Evolving exogenous state.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Environment<T> {
    pub v: T,
    /// Remaining outage steps per vendor.
    pub outage_timers: Vec<u32>,
    /// Most recent price changes, at most `stress_window` of them.
    pub price_changes: VecDeque<T>,
}

impl<T: Scalar> Environment<T> {
    pub fn new(config: &SimConfig<T>, n_vendors: usize) -> Self {
        Self {
            v: config.v0,
            outage_timers: vec![0; n_vendors],
            price_changes: VecDeque::with_capacity(config.stress_window),
        }
    }

    pub fn stress(&self) -> T {
        if self.price_changes.len() < 2 {
            return T::zero();
        }
        let changes: Vec<T> = self.price_changes.iter().copied().collect();
        population_std(&changes).unwrap_or(T::zero())
    }

    pub fn depth(config: &SimConfig<T>, stress: T) -> T {
        (config.depth0 * (-config.gamma * stress).exp()).max(config.depth_floor)
    }

    pub fn record_price_change(&mut self, change: T, window: usize) {
        if self.price_changes.len() == window {
            self.price_changes.pop_front();
        }
        self.price_changes.push_back(change);
    }

    /// Advances one step. Draw order: fundamental normal, jump uniform, jump
    /// normal, signal normal, model-error normal, then one uniform per vendor.
    pub fn advance(&mut self, config: &SimConfig<T>, t: usize, rng: &mut Rng) -> EnvSnapshot<T> {
        let zeta = T::of(rng.sample::<f64, _>(StandardNormal));
        let jump_u = T::of(rng.random::<f64>());
        let jump_z = T::of(rng.sample::<f64, _>(StandardNormal));
        let eta = T::of(rng.sample::<f64, _>(StandardNormal));
        let xi = T::of(rng.sample::<f64, _>(StandardNormal));

        let news = if jump_u < config.jump_prob {
            config.sigma_jump * jump_z
        } else {
            T::zero()
        };
        self.v = self.v + config.sigma_v * zeta + news;
        let s = self.v + config.sigma_s * eta;
        let m = config.sigma_m * xi;

        let mut vendor_failed = Vec::with_capacity(self.outage_timers.len());
        for timer in &mut self.outage_timers {
            let u = T::of(rng.random::<f64>());
            if *timer == 0 && u < config.outage_prob {
                *timer = config.outage_duration;
            }
            let failed = *timer > 0;
            if failed {
                *timer -= 1;
            }
            vendor_failed.push(failed);
        }

        let stress = self.stress();
        EnvSnapshot {
            t,
            v: self.v,
            s,
            m,
            news,
            stress,
            depth: Self::depth(config, stress),
            vendor_failed,
        }
    }
}
