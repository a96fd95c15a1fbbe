//! Empirical tail estimation and prediction-vs-simulation diagnostics.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{random_sum_prediction, LawSource, PredictError, RandomSumCase, RandomSumLaws, TailPrediction};
use crate::laws::Law;
use crate::process::{tail_counts, EnsembleSummary, SimError, TailCounts};

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cannot pool bins to an expected count of {floor} per cell")]
    Pooling { floor: f64 },
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Wilson score interval for `count` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(count: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && count <= n, "wilson interval needs 0 <= count <= n, n > 0");
    let nf = n as f64;
    let p = count as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if count == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if count == n { 1.0 } else { (centre + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

/// `P(X > x)` estimated from `count` exceedances among `replicates`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub threshold: f64,
    pub count: u64,
    pub replicates: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl SurvivalEstimate {
    pub fn new(threshold: f64, count: u64, replicates: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(count, replicates, Z99);
        Self {
            threshold,
            count,
            replicates,
            estimate: count as f64 / replicates as f64,
            ci_lo,
            ci_hi,
        }
    }
}

pub fn survival_estimates(thresholds: &[f64], counts: &[u64], replicates: u64) -> Vec<SurvivalEstimate> {
    thresholds
        .iter()
        .zip(counts)
        .map(|(&x, &c)| SurvivalEstimate::new(x, c, replicates))
        .collect()
}

/// One estimate per threshold of the ensemble, with 99% Wilson intervals.
pub fn empirical_survival(summary: &EnsembleSummary) -> Vec<SurvivalEstimate> {
    survival_estimates(&summary.thresholds, &summary.counts, summary.replicates)
}

fn counts_survival(tc: &TailCounts) -> Vec<SurvivalEstimate> {
    survival_estimates(&tc.thresholds, &tc.counts, tc.replicates)
}

/// Which thresholds enter the verdict and how far ratios may stray from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowOptions {
    pub min_exceedances: u64,
    pub calibration_floor: f64,
    pub tolerance: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            min_exceedances: 50,
            calibration_floor: 0.0,
            tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticFlag {
    /// No threshold qualifies for the verdict window.
    InsufficientData,
    /// The prediction is zero at a threshold with enough exceedances.
    ZeroPrediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub estimate: SurvivalEstimate,
    pub predicted: f64,
    /// `None` where the prediction is zero.
    pub ratio: Option<f64>,
    pub ratio_lo: Option<f64>,
    pub ratio_hi: Option<f64>,
    pub in_window: bool,
}

/// Empirical over predicted survival at each threshold, with a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioDiagnostic {
    pub rows: Vec<RatioRow>,
    pub options: WindowOptions,
    pub flags: Vec<DiagnosticFlag>,
}

impl RatioDiagnostic {
    fn windowed(&self) -> impl Iterator<Item = &RatioRow> {
        self.rows.iter().filter(|r| r.in_window)
    }

    /// `[x_lo, x_hi]` of the verdict window.
    pub fn window(&self) -> Option<(f64, f64)> {
        let lo = self.windowed().next()?.estimate.threshold;
        let hi = self.windowed().last()?.estimate.threshold;
        Some((lo, hi))
    }

    /// `max |ratio - 1|` over the window.
    pub fn max_deviation(&self) -> Option<f64> {
        self.windowed()
            .filter_map(|r| r.ratio)
            .map(|q| (q - 1.0).abs())
            .reduce(f64::max)
    }

    pub fn insufficient_data(&self) -> bool {
        self.flags.contains(&DiagnosticFlag::InsufficientData)
    }

    pub fn verdict(&self) -> Verdict {
        match self.max_deviation() {
            Some(d) if !self.insufficient_data() && d <= self.options.tolerance => Verdict::Pass,
            _ => Verdict::Fail,
        }
    }

    /// `PASS window=[x_lo,x_hi] max|ratio-1|=d`.
    pub fn verdict_line(&self) -> String {
        let verdict = self.verdict();
        match (self.window(), self.max_deviation()) {
            (Some((lo, hi)), Some(d)) => format!("{verdict} window=[{lo},{hi}] max|ratio-1|={d}"),
            _ => format!("{verdict} window=[] max|ratio-1|=NA insufficient-data"),
        }
    }

    /// Report CSV: `x,empirical,ci_lo,ci_hi,predicted,ratio,in_window`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,empirical,ci_lo,ci_hi,predicted,ratio,in_window\n");
        for r in &self.rows {
            let e = &r.estimate;
            let ratio = r.ratio.map(|q| q.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.threshold, e.estimate, e.ci_lo, e.ci_hi, r.predicted, ratio, r.in_window
            )
            .expect("write to string");
        }
        out
    }
}

/// Compares estimates with `prediction` evaluated on the exact survival
/// functions of `laws`.
///
/// A threshold is in the verdict window when it has at least
/// `min_exceedances` exceedances, lies at or above the calibration floor and
/// the prediction there is positive.
pub fn ratio_diagnostic(
    estimates: &[SurvivalEstimate],
    prediction: &TailPrediction,
    laws: &impl LawSource,
    options: WindowOptions,
) -> Result<RatioDiagnostic, StatsError> {
    let mut flags = Vec::new();
    let mut rows = Vec::with_capacity(estimates.len());
    for e in estimates {
        let predicted = prediction.evaluate(laws, e.threshold).ok_or_else(|| {
            StatsError::InvalidArgument("prediction refers to a base with no law".into())
        })?;
        let enough = e.count >= options.min_exceedances && e.threshold >= options.calibration_floor;
        let (ratio, ratio_lo, ratio_hi) = if predicted > 0.0 {
            (
                Some(e.estimate / predicted),
                Some(e.ci_lo / predicted),
                Some(e.ci_hi / predicted),
            )
        } else {
            if enough && !flags.contains(&DiagnosticFlag::ZeroPrediction) {
                flags.push(DiagnosticFlag::ZeroPrediction);
            }
            (None, None, None)
        };
        rows.push(RatioRow {
            estimate: *e,
            predicted,
            ratio,
            ratio_lo,
            ratio_hi,
            in_window: enough && ratio.is_some(),
        });
    }
    if !rows.iter().any(|r| r.in_window) {
        flags.push(DiagnosticFlag::InsufficientData);
    }
    Ok(RatioDiagnostic { rows, options, flags })
}

/// Hill estimator of the tail index from the top `k` order statistics:
/// `1 / ((1/k) sum_{i=1}^k ln(X_(i) / X_(k+1)))`.
pub fn hill_estimate(sample: &[u64], k: usize) -> Result<f64, StatsError> {
    if k == 0 || k >= sample.len() {
        return Err(StatsError::InvalidArgument(format!(
            "k = {k} must satisfy 0 < k < {}",
            sample.len()
        )));
    }
    let mut sorted = sample.to_vec();
    let (top, pivot, _) = sorted.select_nth_unstable_by(k, |a, b| b.cmp(a));
    let pivot = *pivot;
    if pivot == 0 {
        return Err(StatsError::InvalidArgument(
            "order statistic X_(k+1) must be positive".into(),
        ));
    }
    let base = pivot as f64;
    let mean_log = top.iter().map(|&v| (v as f64 / base).ln()).sum::<f64>() / k as f64;
    if mean_log <= 0.0 {
        return Err(StatsError::InvalidArgument(
            "top order statistics are all equal".into(),
        ));
    }
    Ok(1.0 / mean_log)
}

/// Simulation settings for [`check_random_sum`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSumRun {
    pub master_seed: u64,
    pub replicates: u64,
    pub thresholds: Vec<f64>,
    pub workers: Option<usize>,
}

/// Simulates `S = sum_{i <= tau} zeta_i` and compares its survival with
/// the prediction for `case`.
///
/// A count law concentrated at zero makes `S` identically zero; the result
/// is then an empty prediction flagged as insufficient data.
pub fn check_random_sum(
    tau: &Law,
    zeta: &Law,
    case: RandomSumCase,
    run: &RandomSumRun,
    options: WindowOptions,
) -> Result<RatioDiagnostic, StatsError> {
    let prediction = if tau.prob_zero() >= 1.0 {
        TailPrediction {
            provenance: format!("random-sum/{}/degenerate", case.name()),
            terms: Vec::new(),
        }
    } else {
        random_sum_prediction(tau, zeta, case)?
    };
    let tc = tail_counts(run.master_seed, run.replicates, &run.thresholds, run.workers, |rng| {
        let overflow = SimError::Overflow {
            replicate: rng.replicate(),
        };
        let count = tau.try_sample(rng).ok_or(overflow.clone())?;
        zeta.sample_sum(count, rng).ok_or(overflow)
    })?;
    let laws = RandomSumLaws {
        tau: tau.clone(),
        zeta: zeta.clone(),
    };
    ratio_diagnostic(&counts_survival(&tc), &prediction, &laws, options)
}

/// Counts of non-negative integer observations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    bins: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values(values: &[u64]) -> Self {
        let mut h = Self::new();
        for &v in values {
            h.add(v, 1);
        }
        h
    }

    pub fn add(&mut self, value: u64, count: u64) {
        *self.bins.entry(value).or_default() += count;
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    pub fn count(&self, value: u64) -> u64 {
        self.bins.get(&value).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.bins.iter().map(|(&v, &c)| (v, c))
    }
}

/// Minimum expected count per cell after pooling.
pub const CHI2_MIN_EXPECTED: f64 = 5.0;

/// Two-sample chi-square homogeneity test; returns the p-value.
///
/// Adjacent values are pooled, in increasing order, until every expected
/// cell count is at least 5. A remainder below the floor joins the last
/// pooled bin.
pub fn two_sample_chi2(a: &Histogram, b: &Histogram) -> Result<f64, StatsError> {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(StatsError::InvalidArgument("histograms must be non-empty".into()));
    }
    let grand = na + nb;
    let min_share = na.min(nb) / grand;
    let mut values: Vec<u64> = a.bins.keys().chain(b.bins.keys()).copied().collect();
    values.sort_unstable();
    values.dedup();

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for v in values {
        pending.0 += a.count(v) as f64;
        pending.1 += b.count(v) as f64;
        if (pending.0 + pending.1) * min_share >= CHI2_MIN_EXPECTED {
            pooled.push(pending);
            pending = (0.0, 0.0);
        }
    }
    match pooled.last_mut() {
        Some(last) => {
            last.0 += pending.0;
            last.1 += pending.1;
        }
        None => return Err(StatsError::Pooling { floor: CHI2_MIN_EXPECTED }),
    }
    if pooled.len() == 1 {
        return Ok(1.0);
    }
    let statistic: f64 = pooled
        .iter()
        .map(|&(oa, ob)| {
            let col = oa + ob;
            let (ea, eb) = (col * na / grand, col * nb / grand);
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    let df = (pooled.len() - 1) as f64;
    if statistic <= 0.0 {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_ur(df / 2.0, statistic / 2.0))
}
