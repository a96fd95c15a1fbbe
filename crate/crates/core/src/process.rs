//! Simulation of the second-order Galton-Watson process with immigration
//!
//! ```text
//! X_n = sum_{i <= X_{n-1}} xi_{n,i} + sum_{j <= X_{n-2}} eta_{n,j} + eps_n
//! ```
//!
//! three ways: the direct recursion, the clan decomposition (one
//! immigration-free sub-process per initial generation and per immigration
//! cohort), and an exact dynamic-programming oracle over the pair chain
//! `(X_n, X_{n-1})`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::laws::Law;
use crate::stream::{run_replicates, Merge, ReplicateStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("population count overflowed u64 in replicate {replicate}")]
    Overflow { replicate: u64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Thresholds `10 * 2^j`, `j = 0..=14`.
pub fn default_thresholds() -> Vec<f64> {
    (0..15).map(|j| 10.0 * f64::from(1u32 << j)).collect()
}

fn default_replicates() -> u64 {
    1_000_000
}

/// The five primitive laws plus horizon and ensemble controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Offspring at age 1.
    #[serde(rename = "law_xi")]
    pub xi: Law,
    /// Offspring at age 2.
    #[serde(rename = "law_eta")]
    pub eta: Law,
    /// Immigration.
    #[serde(rename = "law_eps")]
    pub eps: Law,
    /// Initial generation `X_0`.
    #[serde(rename = "law_x0")]
    pub x0: Law,
    /// Initial generation `X_{-1}`.
    #[serde(rename = "law_xm1")]
    pub xm1: Law,
    pub horizon: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: u64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
}

impl ScenarioSpec {
    pub fn new(xi: Law, eta: Law, eps: Law, x0: Law, xm1: Law, horizon: u32) -> Self {
        Self {
            xi,
            eta,
            eps,
            x0,
            xm1,
            horizon,
            master_seed: 0,
            replicates: default_replicates(),
            thresholds: default_thresholds(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_replicates(mut self, n: u64) -> Self {
        self.replicates = n;
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn with_horizon(mut self, n: u32) -> Self {
        self.horizon = n;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon < 1 {
            return Err(SimError::InvalidScenario("horizon must be >= 1".into()));
        }
        if self.replicates < 1 {
            return Err(SimError::InvalidScenario("replicates must be >= 1".into()));
        }
        if self.thresholds.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidScenario("thresholds must be finite".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::InvalidScenario(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Short content hash of the serialized scenario.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let hash = Sha256::digest(&json);
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `(X_k, X_{k-1})` at time `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathState {
    pub current: u64,
    pub previous: u64,
    pub time: u32,
}

impl PathState {
    pub fn new(current: u64, previous: u64) -> Self {
        Self {
            current,
            previous,
            time: 0,
        }
    }
}

/// One generation of reproduction; `None` on overflow.
fn next_generation(
    current: u64,
    previous: u64,
    xi: &Law,
    eta: &Law,
    eps: Option<&Law>,
    rng: &mut ReplicateStream,
) -> Option<u64> {
    let young = xi.sample_sum(current, rng)?;
    let old = eta.sample_sum(previous, rng)?;
    let immigrants = match eps {
        Some(law) => law.try_sample(rng)?,
        None => 0,
    };
    young.checked_add(old)?.checked_add(immigrants)
}

/// Advances the pair chain by one generation.
pub fn step(
    state: PathState,
    scenario: &ScenarioSpec,
    rng: &mut ReplicateStream,
) -> Result<PathState, SimError> {
    let replicate = rng.replicate();
    let next = next_generation(
        state.current,
        state.previous,
        &scenario.xi,
        &scenario.eta,
        Some(&scenario.eps),
        rng,
    )
    .ok_or(SimError::Overflow { replicate })?;
    Ok(PathState {
        current: next,
        previous: state.current,
        time: state.time + 1,
    })
}

fn initial_state(scenario: &ScenarioSpec, rng: &mut ReplicateStream) -> Result<PathState, SimError> {
    let replicate = rng.replicate();
    let x0 = scenario.x0.try_sample(rng);
    let xm1 = scenario.xm1.try_sample(rng);
    match (x0, xm1) {
        (Some(a), Some(b)) => Ok(PathState::new(a, b)),
        _ => Err(SimError::Overflow { replicate }),
    }
}

/// Runs `steps` generations from `state`.
pub fn simulate_from(
    mut state: PathState,
    steps: u32,
    scenario: &ScenarioSpec,
    rng: &mut ReplicateStream,
) -> Result<PathState, SimError> {
    for _ in 0..steps {
        state = step(state, scenario, rng)?;
    }
    Ok(state)
}

/// `X_0, ..., X_n` for one replicate.
pub fn simulate_path(scenario: &ScenarioSpec, rng: &mut ReplicateStream) -> Result<Vec<u64>, SimError> {
    let mut state = initial_state(scenario, rng)?;
    let mut path = Vec::with_capacity(scenario.horizon as usize + 1);
    path.push(state.current);
    for _ in 0..scenario.horizon {
        state = step(state, scenario, rng)?;
        path.push(state.current);
    }
    Ok(path)
}

/// `X_n` by direct recursion.
pub fn simulate_terminal(scenario: &ScenarioSpec, rng: &mut ReplicateStream) -> Result<u64, SimError> {
    let start = initial_state(scenario, rng)?;
    simulate_from(start, scenario.horizon, scenario, rng).map(|s| s.current)
}

/// Immigration-free evolution of a clan from `(current, previous)`.
fn evolve_clan(
    mut current: u64,
    mut previous: u64,
    steps: u32,
    xi: &Law,
    eta: &Law,
    rng: &mut ReplicateStream,
) -> Result<u64, SimError> {
    let replicate = rng.replicate();
    for _ in 0..steps {
        let next = next_generation(current, previous, xi, eta, None, rng)
            .ok_or(SimError::Overflow { replicate })?;
        previous = current;
        current = next;
    }
    Ok(current)
}

/// `X_n` as the sum of independent clans: the one founded by
/// `(X_0, X_{-1})` evolved `n` steps, and for each `i` in `1..=n` the one
/// founded by `(eps_i, 0)` evolved `n - i` steps.
pub fn simulate_decomposed(scenario: &ScenarioSpec, rng: &mut ReplicateStream) -> Result<u64, SimError> {
    let replicate = rng.replicate();
    let overflow = SimError::Overflow { replicate };
    let start = initial_state(scenario, rng)?;
    let n = scenario.horizon;
    let mut total = evolve_clan(start.current, start.previous, n, &scenario.xi, &scenario.eta, rng)?;
    for i in 1..=n {
        let cohort = scenario.eps.try_sample(rng).ok_or_else(|| overflow.clone())?;
        let clan = evolve_clan(cohort, 0, n - i, &scenario.xi, &scenario.eta, rng)?;
        total = total.checked_add(clan).ok_or_else(|| overflow.clone())?;
    }
    Ok(total)
}

/// Founding pair of an immigration-free clan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClanKind {
    /// `V_{0,0} = 1`, `V_{-1,0} = 0`: one individual of age 0.
    V0,
    /// `V_{0,-1} = 0`, `V_{-1,-1} = 1`: one individual of age 1.
    Vm1,
}

/// `V_{n,0}` or `V_{n,-1}` for `n >= -1`.
pub fn simulate_clan(
    kind: ClanKind,
    n: i32,
    xi: &Law,
    eta: &Law,
    rng: &mut ReplicateStream,
) -> Result<u64, SimError> {
    let (current, previous) = match kind {
        ClanKind::V0 => (1, 0),
        ClanKind::Vm1 => (0, 1),
    };
    match n {
        i32::MIN..=-2 => Err(SimError::InvalidArgument(format!("clan time {n} < -1"))),
        -1 => Ok(previous),
        _ => evolve_clan(current, previous, n as u32, xi, eta, rng),
    }
}

/// Per-threshold exceedance counts and moments of a simulated quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCounts {
    pub thresholds: Vec<f64>,
    pub counts: Vec<u64>,
    pub replicates: u64,
    /// Replicates whose value overflowed `u64`; counted above every threshold.
    pub overflowed: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

struct TailAccumulator<'a> {
    thresholds: &'a [f64],
    // exceed[j] = replicates exceeding exactly the first j thresholds
    exceed: Vec<u64>,
    replicates: u64,
    overflowed: u64,
    sum: f64,
    sum_sq: f64,
}

impl<'a> TailAccumulator<'a> {
    fn new(thresholds: &'a [f64]) -> Self {
        Self {
            thresholds,
            exceed: vec![0; thresholds.len() + 1],
            replicates: 0,
            overflowed: 0,
            sum: 0.0,
            sum_sq: 0.0,
        }
    }

    fn push(&mut self, value: Option<u64>) {
        self.replicates += 1;
        match value {
            Some(v) => {
                let vf = v as f64;
                let j = self.thresholds.partition_point(|&x| x < vf);
                self.exceed[j] += 1;
                self.sum += vf;
                self.sum_sq += vf * vf;
            }
            None => {
                self.exceed[self.thresholds.len()] += 1;
                self.overflowed += 1;
            }
        }
    }

    fn finish(self) -> TailCounts {
        let mut counts = vec![0; self.thresholds.len()];
        let mut running = 0;
        for j in (0..self.thresholds.len()).rev() {
            running += self.exceed[j + 1];
            counts[j] = running;
        }
        TailCounts {
            thresholds: self.thresholds.to_vec(),
            counts,
            replicates: self.replicates,
            overflowed: self.overflowed,
            sum: self.sum,
            sum_sq: self.sum_sq,
        }
    }
}

impl Merge for TailAccumulator<'_> {
    fn merge(&mut self, later: Self) {
        for (a, b) in self.exceed.iter_mut().zip(later.exceed) {
            *a += b;
        }
        self.replicates += later.replicates;
        self.overflowed += later.overflowed;
        self.sum += later.sum;
        self.sum_sq += later.sum_sq;
    }
}

/// Exceedance counts of `sample` over `replicates` deterministic streams.
///
/// An overflowing replicate is recorded above every threshold when the
/// largest threshold is below `u64::MAX`; otherwise the run aborts.
pub fn tail_counts<F>(
    master_seed: u64,
    replicates: u64,
    thresholds: &[f64],
    workers: Option<usize>,
    sample: F,
) -> Result<TailCounts, SimError>
where
    F: Fn(&mut ReplicateStream) -> Result<u64, SimError> + Sync,
{
    let overflow_is_exceedance = thresholds.last().is_none_or(|&x| x < u64::MAX as f64);
    let acc = run_replicates(
        master_seed,
        replicates,
        workers,
        || TailAccumulator::new(thresholds),
        |acc, rng| {
            match sample(rng) {
                Ok(v) => acc.push(Some(v)),
                Err(SimError::Overflow { .. }) if overflow_is_exceedance => acc.push(None),
                Err(e) => return Err(e),
            }
            Ok(())
        },
    )?;
    Ok(acc.finish())
}

/// Result of a simulated ensemble for `X_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub replicates: u64,
    pub thresholds: Vec<f64>,
    /// `counts[j]` = number of replicates with `X_n > thresholds[j]`.
    pub counts: Vec<u64>,
    /// Sample mean of `X_n`; infinite if any replicate overflowed.
    pub mean: f64,
    pub second_moment: f64,
    pub overflowed: u64,
    pub master_seed: u64,
    pub digest: String,
}

impl EnsembleSummary {
    pub fn from_counts(tc: TailCounts, master_seed: u64, digest: String) -> Self {
        let n = tc.replicates as f64;
        let (mean, second_moment) = if tc.overflowed > 0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (tc.sum / n, tc.sum_sq / n)
        };
        Self {
            replicates: tc.replicates,
            thresholds: tc.thresholds,
            counts: tc.counts,
            mean,
            second_moment,
            overflowed: tc.overflowed,
            master_seed,
            digest,
        }
    }

    /// Standard error of the sample mean.
    pub fn standard_error(&self) -> f64 {
        let n = self.replicates as f64;
        let var = (self.second_moment - self.mean * self.mean).max(0.0) * n / (n - 1.0).max(1.0);
        (var / n).sqrt()
    }
}

/// Simulates `scenario.replicates` independent copies of `X_n`.
///
/// Replicate `i` uses the stream `(master_seed, i)`; `workers` only affects speed.
pub fn simulate_ensemble(scenario: &ScenarioSpec, workers: Option<usize>) -> Result<EnsembleSummary, SimError> {
    scenario.validate()?;
    let tc = tail_counts(
        scenario.master_seed,
        scenario.replicates,
        &scenario.thresholds,
        workers,
        |rng| simulate_terminal(scenario, rng),
    )?;
    Ok(EnsembleSummary::from_counts(tc, scenario.master_seed, scenario.digest()))
}

struct Collected(Vec<u64>);

impl Merge for Collected {
    fn merge(&mut self, later: Self) {
        self.0.extend(later.0);
    }
}

/// How `X_n` is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Direct,
    Decomposed,
}

/// `X_n` for every replicate, in replicate order. Overflowing replicates
/// are reported as `u64::MAX`.
pub fn terminal_values(
    scenario: &ScenarioSpec,
    route: Route,
    workers: Option<usize>,
) -> Result<Vec<u64>, SimError> {
    scenario.validate()?;
    let values = run_replicates(
        scenario.master_seed,
        scenario.replicates,
        workers,
        || Collected(Vec::new()),
        |acc, rng| {
            let v = match route {
                Route::Direct => simulate_terminal(scenario, rng),
                Route::Decomposed => simulate_decomposed(scenario, rng),
            };
            match v {
                Ok(v) => acc.0.push(v),
                Err(SimError::Overflow { .. }) => acc.0.push(u64::MAX),
                Err(e) => return Err(e),
            }
            Ok(())
        },
    )?;
    Ok(values.0)
}

/// Joint pmf of `(X_n, X_{n-1})` restricted to `[0, T]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub time: u32,
    pub truncation: u64,
    masses: BTreeMap<(u64, u64), f64>,
    /// Probability that some value along the way exceeded `T`.
    pub mass_deficit: f64,
}

impl ExactDistribution {
    pub fn mass(&self, current: u64, previous: u64) -> f64 {
        self.masses.get(&(current, previous)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u64, u64), f64)> + '_ {
        self.masses.iter().map(|(k, v)| (*k, *v))
    }

    pub fn retained_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Marginal pmf of `X_n` on `0..=T`.
    pub fn marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.truncation as usize + 1];
        for (&(a, _), &m) in &self.masses {
            out[a as usize] += m;
        }
        out
    }

    /// Retained `P(X_n > x)`; the true value lies within `mass_deficit` above it.
    pub fn survival(&self, x: f64) -> f64 {
        self.marginal()
            .iter()
            .enumerate()
            .filter(|(k, _)| *k as f64 > x)
            .map(|(_, m)| m)
            .sum()
    }

    /// `E(X_n^r)` over the retained mass.
    pub fn moment(&self, r: f64) -> f64 {
        self.marginal()
            .iter()
            .enumerate()
            .map(|(k, m)| m * (k as f64).powf(r))
            .sum()
    }

    pub fn deficit_exceeds(&self, tolerance: f64) -> bool {
        self.mass_deficit > tolerance
    }
}

/// Sub-probability vector on `0..=T` plus the mass lost above `T`.
#[derive(Debug, Clone)]
struct Truncated {
    p: Vec<f64>,
    lost: f64,
}

impl Truncated {
    fn point_mass_at_zero() -> Self {
        Self {
            p: vec![1.0],
            lost: 0.0,
        }
    }
}

/// A law's pmf and survival tabulated on `0..=T`.
struct Tabulated {
    pmf: Vec<f64>,
    survival: Vec<f64>,
}

impl Tabulated {
    fn new(law: &Law, t: u64) -> Self {
        let mut pmf: Vec<f64> = (0..=t).map(|k| law.pmf(k)).collect();
        let keep = pmf.iter().rposition(|p| *p > 0.0).map_or(1, |i| i + 1);
        pmf.truncate(keep);
        let survival = (0..=t).map(|k| law.survival(k as f64)).collect();
        Self { pmf, survival }
    }

    /// `a` convolved with this law, truncated at `t`.
    fn convolve(&self, a: &Truncated, t: usize) -> Truncated {
        let len = (a.p.len() + self.pmf.len() - 1).min(t + 1);
        let mut p = vec![0.0; len];
        let mut lost = a.lost;
        for (i, &ai) in a.p.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &lj) in self.pmf.iter().enumerate().take(t + 1 - i) {
                p[i + j] += ai * lj;
            }
            lost += ai * self.survival[t - i];
        }
        Truncated { p, lost }
    }
}

/// Truncated convolution of two independent truncated laws.
fn convolve_truncated(a: &Truncated, b: &Truncated, t: usize) -> Truncated {
    let len = (a.p.len() + b.p.len() - 1).min(t + 1);
    let mut p = vec![0.0; len];
    // suffix[m] = sum_{j >= m} b[j]
    let mut suffix = vec![0.0; b.p.len() + 1];
    for j in (0..b.p.len()).rev() {
        suffix[j] = suffix[j + 1] + b.p[j];
    }
    let mut spill = 0.0;
    for (i, &ai) in a.p.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.p.iter().enumerate().take(t + 1 - i) {
            p[i + j] += ai * bj;
        }
        let first_over = t + 1 - i;
        if first_over < b.p.len() {
            spill += ai * suffix[first_over];
        }
    }
    Truncated {
        p,
        lost: a.lost + b.lost - a.lost * b.lost + spill,
    }
}

/// Exact joint law of `(X_n, X_{n-1})` by forward recursion over pair states.
///
/// For a retained state `(a, b)` the next value is distributed as the
/// `a`-fold convolution of the `xi` pmf, convolved with the `b`-fold
/// convolution of the `eta` pmf and with the `eps` pmf. Mass above the
/// truncation bound `T` is accumulated in `mass_deficit`.
pub fn exact_distribution(scenario: &ScenarioSpec, truncation: u64) -> Result<ExactDistribution, SimError> {
    if truncation < 1 {
        return Err(SimError::InvalidArgument("truncation must be >= 1".into()));
    }
    let t = truncation as usize;
    let xi = Tabulated::new(&scenario.xi, truncation);
    let eta = Tabulated::new(&scenario.eta, truncation);
    let eps = Tabulated::new(&scenario.eps, truncation);
    let x0 = Tabulated::new(&scenario.x0, truncation);
    let xm1 = Tabulated::new(&scenario.xm1, truncation);

    let mut states: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    for (a, &pa) in x0.pmf.iter().enumerate() {
        for (b, &pb) in xm1.pmf.iter().enumerate() {
            if pa * pb > 0.0 {
                states.insert((a as u64, b as u64), pa * pb);
            }
        }
    }
    let (s0, s1) = (x0.survival[t], xm1.survival[t]);
    let mut deficit = s0 + s1 - s0 * s1;

    let mut xi_powers = vec![Truncated::point_mass_at_zero()];
    let mut eta_powers = vec![Truncated::point_mass_at_zero()];
    let power = |powers: &mut Vec<Truncated>, law: &Tabulated, k: usize| {
        while powers.len() <= k {
            let next = law.convolve(powers.last().expect("non-empty"), t);
            powers.push(next);
        }
    };

    for _ in 0..scenario.horizon {
        let mut next: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (&(a, b), &w) in &states {
            power(&mut xi_powers, &xi, a as usize);
            power(&mut eta_powers, &eta, b as usize);
            let offspring = convolve_truncated(&xi_powers[a as usize], &eta_powers[b as usize], t);
            let law = eps.convolve(&offspring, t);
            deficit += w * law.lost;
            for (c, &pc) in law.p.iter().enumerate() {
                if pc > 0.0 {
                    *next.entry((c as u64, a)).or_insert(0.0) += w * pc;
                }
            }
        }
        states = next;
    }
    Ok(ExactDistribution {
        time: scenario.horizon,
        truncation,
        masses: states,
        mass_deficit: deficit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(c: u64) -> Law {
        Law::deterministic(c)
    }

    fn bern(p: f64) -> Law {
        Law::bernoulli(p).unwrap()
    }

    fn scenario(xi: Law, eta: Law, eps: Law, x0: Law, xm1: Law, n: u32) -> ScenarioSpec {
        ScenarioSpec::new(xi, eta, eps, x0, xm1, n)
    }

    #[test]
    fn step_examples() {
        let mut rng = ReplicateStream::new(0, 0);
        let zero = scenario(det(0), det(0), det(0), det(0), det(0), 1);
        let s = step(PathState::new(2, 1), &zero, &mut rng).unwrap();
        assert_eq!((s.current, s.previous, s.time), (0, 2, 1));

        let fib = scenario(det(1), det(1), det(0), det(1), det(0), 5);
        let mut s = PathState::new(1, 0);
        let mut seen = vec![];
        for _ in 0..5 {
            s = step(s, &fib, &mut rng).unwrap();
            seen.push(s.current);
        }
        assert_eq!(seen, vec![1, 2, 3, 5, 8]);

        let imm = scenario(det(0), det(0), det(7), det(0), det(0), 1);
        let s = step(PathState::new(0, 0), &imm, &mut rng).unwrap();
        assert_eq!((s.current, s.previous), (7, 0));
    }

    #[test]
    fn path_examples() {
        let mut rng = ReplicateStream::new(0, 0);
        let zero = scenario(det(0), det(0), det(0), det(0), det(0), 6);
        assert_eq!(simulate_path(&zero, &mut rng).unwrap(), vec![0; 7]);
        let counter = scenario(det(1), det(0), det(1), det(0), det(0), 6);
        assert_eq!(simulate_path(&counter, &mut rng).unwrap(), (0..=6).collect::<Vec<_>>());
        let fib = scenario(det(1), det(1), det(0), det(1), det(1), 5);
        assert_eq!(simulate_path(&fib, &mut rng).unwrap(), vec![1, 2, 3, 5, 8, 13]);
    }

    #[test]
    fn overflow_carries_replicate() {
        let big = scenario(det(u64::MAX / 2), det(0), det(0), det(3), det(0), 1);
        let mut rng = ReplicateStream::new(0, 42);
        assert_eq!(
            simulate_path(&big, &mut rng),
            Err(SimError::Overflow { replicate: 42 })
        );
        let tc = tail_counts(0, 10, &[5.0, 10.0], Some(2), |rng| simulate_terminal(&big, rng)).unwrap();
        assert_eq!(tc.counts, vec![10, 10]);
        assert_eq!(tc.overflowed, 10);
        let err = tail_counts(0, 10, &[1.0e20], None, |rng| simulate_terminal(&big, rng));
        assert!(matches!(err, Err(SimError::Overflow { .. })));
    }

    #[test]
    fn clan_examples() {
        let mut rng = ReplicateStream::new(3, 0);
        let xi = bern(0.5);
        let eta = det(2);
        assert_eq!(simulate_clan(ClanKind::V0, 0, &xi, &eta, &mut rng).unwrap(), 1);
        assert_eq!(simulate_clan(ClanKind::Vm1, 0, &xi, &eta, &mut rng).unwrap(), 0);
        assert_eq!(simulate_clan(ClanKind::V0, -1, &xi, &eta, &mut rng).unwrap(), 0);
        assert_eq!(simulate_clan(ClanKind::Vm1, -1, &xi, &eta, &mut rng).unwrap(), 1);
        // one step: V_{1,-1} = eta draw
        assert_eq!(simulate_clan(ClanKind::Vm1, 1, &xi, &eta, &mut rng).unwrap(), 2);
        assert!(simulate_clan(ClanKind::V0, -2, &xi, &eta, &mut rng).is_err());
    }

    #[test]
    fn decomposition_collapses_without_immigration() {
        // eps = 0, X_{-1} = 0, X_0 = 1: decomposed X_n is a V0 clan, on the same stream
        let s = scenario(bern(0.7), bern(0.4), det(0), det(1), det(0), 4);
        for rep in 0..200 {
            let mut a = ReplicateStream::new(5, rep);
            let mut b = ReplicateStream::new(5, rep);
            let dec = simulate_decomposed(&s, &mut a).unwrap();
            // initial draws of deterministic laws consume nothing
            let clan = simulate_clan(ClanKind::V0, 4, &s.xi, &s.eta, &mut b).unwrap();
            assert_eq!(dec, clan);
        }
    }

    #[test]
    fn exact_one_and_two_steps() {
        let s = scenario(bern(0.5), bern(0.5), det(0), det(1), det(0), 1);
        let d = exact_distribution(&s, 8).unwrap();
        let m = d.marginal();
        assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
        let d = exact_distribution(&s.clone().with_horizon(2), 8).unwrap();
        let m = d.marginal();
        // enumerate the eight equally likely Bernoulli outcomes
        let mut brute = [0.0; 3];
        for bits in 0..8u32 {
            let x1 = bits & 1;
            let from_x1 = if x1 == 1 { (bits >> 1) & 1 } else { 0 };
            let from_x0 = (bits >> 2) & 1;
            brute[(from_x1 + from_x0) as usize] += 1.0 / 8.0;
        }
        assert_eq!(brute, [0.375, 0.5, 0.125]);
        for k in 0..3 {
            assert!((m[k] - brute[k]).abs() < 1e-15);
        }
        assert_eq!(d.mass_deficit, 0.0);
    }

    #[test]
    fn exact_deficit_matches_closed_form() {
        let t = 10_000u64;
        let s = scenario(bern(0.5), bern(0.5), Law::discrete_pareto(2.5).unwrap(), det(0), det(0), 1);
        let d = exact_distribution(&s, t).unwrap();
        let expected = (t as f64 + 1.0).powf(-2.5);
        assert!((d.mass_deficit - expected).abs() <= 1e-12 * expected);
        assert!((d.retained_mass() + d.mass_deficit - 1.0).abs() < 1e-12);
        assert!(d.deficit_exceeds(1e-11));
        assert!(!d.deficit_exceeds(1e-9));
    }

    #[test]
    fn exact_mass_balance_with_truncation() {
        let s = scenario(
            Law::poisson(1.2).unwrap(),
            Law::geometric(0.5).unwrap(),
            Law::poisson(0.5).unwrap(),
            det(2),
            det(1),
            3,
        );
        for t in [4u64, 12, 40] {
            let d = exact_distribution(&s, t).unwrap();
            assert!((d.retained_mass() + d.mass_deficit - 1.0).abs() < 1e-12, "T={t}");
            assert!(d.iter().all(|(_, m)| m >= 0.0));
        }
        assert!(exact_distribution(&s, 0).is_err());
    }

    #[test]
    fn scenario_validation() {
        let s = scenario(det(0), det(0), det(0), det(0), det(0), 0);
        assert!(s.validate().is_err());
        let s = s.with_horizon(2).with_thresholds(vec![1.0, 1.0]);
        assert!(s.validate().is_err());
        let s = s.with_thresholds(vec![1.0, 2.0]).with_replicates(0);
        assert!(s.validate().is_err());
    }
}
