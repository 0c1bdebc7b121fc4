//! Independent scenario runs fanned out over worker threads.
//!
//! Each run owns its state, so the parallel and sequential paths produce
//! identical results. Without the `parallel` feature both entry points run
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;
use crate::sim::{run_scenario, Metrics, ScenarioConfig};

/// Runs every configuration, in parallel when the `parallel` feature is on.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<Metrics>> {
    #[cfg(feature = "parallel")]
    {
        configs.par_iter().map(run_metrics).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(configs)
    }
}

pub fn run_batch_sequential(configs: &[ScenarioConfig]) -> Vec<Result<Metrics>> {
    configs.iter().map(run_metrics).collect()
}

/// Copies of `base` with the adaptation gain replaced by each entry of `gains`.
pub fn gain_sweep_configs(base: &ScenarioConfig, gains: &[f64]) -> Vec<ScenarioConfig> {
    gains
        .iter()
        .map(|&g| {
            let mut cfg = base.clone();
            cfg.adapt_gain = g;
            cfg.name = format!("{}@gain={g}", base.name);
            cfg
        })
        .collect()
}

pub fn gain_sweep(base: &ScenarioConfig, gains: &[f64]) -> Vec<Result<Metrics>> {
    run_batch(&gain_sweep_configs(base, gains))
}

fn run_metrics(cfg: &ScenarioConfig) -> Result<Metrics> {
    run_scenario(cfg).map(|(_, m)| m)
}
