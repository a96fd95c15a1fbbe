//! Simulation, exact distributions and tail asymptotics for second-order
//! Galton-Watson processes with immigration,
//! `X_n = sum_{i <= X_{n-1}} xi + sum_{j <= X_{n-2}} eta + eps_n`.

pub mod asymptotics;
pub mod laws;
pub mod process;
pub mod stream;
pub mod tailstats;

pub use asymptotics::{
    mean_forecast, mk, moment_bound, predict_tail, random_sum_prediction, Base, HeavyProfile,
    ImmigrationVariant, MeanMatrix, PredictError, RandomSumCase, TailPrediction,
};
pub use laws::{Law, LawError, LawKind, TailClass};
pub use process::{
    exact_distribution, simulate_ensemble, EnsembleSummary, ExactDistribution, ScenarioSpec, SimError,
};
pub use tailstats::{
    check_random_sum, empirical_survival, hill_estimate, ratio_diagnostic, two_sample_chi2, RatioDiagnostic,
    StatsError, SurvivalEstimate, WindowOptions,
};
