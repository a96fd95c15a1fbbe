//! Scenarios shared by the benchmarks.

use gw2i_core::{Law, ScenarioSpec};

/// INAR(2) with Bernoulli offspring and immigration, started from `(1, 1)`.
pub fn inar2(horizon: u32) -> ScenarioSpec {
    ScenarioSpec::new(
        Law::bernoulli(0.6).unwrap(),
        Law::bernoulli(0.3).unwrap(),
        Law::bernoulli(0.2).unwrap(),
        Law::deterministic(1),
        Law::deterministic(1),
        horizon,
    )
}

/// Light offspring with power-law immigration of index 2.5.
pub fn heavy_immigration(horizon: u32) -> ScenarioSpec {
    ScenarioSpec::new(
        Law::bernoulli(0.4).unwrap(),
        Law::bernoulli(0.2).unwrap(),
        Law::discrete_pareto(2.5).unwrap(),
        Law::deterministic(1),
        Law::deterministic(1),
        horizon,
    )
}

/// Power-law offspring of index 2.5 with Poisson immigration.
pub fn heavy_offspring(horizon: u32) -> ScenarioSpec {
    ScenarioSpec::new(
        Law::discrete_pareto(2.5).unwrap(),
        Law::discrete_pareto(2.5).unwrap(),
        Law::poisson(1.0).unwrap(),
        Law::deterministic(1),
        Law::deterministic(1),
        horizon,
    )
}
