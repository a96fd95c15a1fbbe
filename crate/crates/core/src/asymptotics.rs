//! Closed-form analytics: mean matrix, the `m_k` sequence, expectation
//! forecasts, `r`-th moment bounds and tail-asymptotic predictors.
//!
//! Every predictor returns a [`TailPrediction`], a non-negative linear
//! combination of primitive survival functions `P(base > x)`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::laws::{Law, TailClass};
use crate::process::ScenarioSpec;

/// Indices are compared with this absolute tolerance.
const INDEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PredictError {
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("unsupported profile: {0}")]
    UnsupportedProfile(String),
    #[error("mean of {0} is infinite")]
    InfiniteMean(Base),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Primitive random variables whose survival functions appear in predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    Xi,
    Eta,
    Eps,
    X0,
    Xm1,
    /// Number of summands of a random sum.
    Tau,
    /// Summand of a random sum.
    Zeta,
}

impl Base {
    pub const PROCESS: [Base; 5] = [Base::Xi, Base::Eta, Base::Eps, Base::X0, Base::Xm1];

    pub fn name(self) -> &'static str {
        match self {
            Base::Xi => "xi",
            Base::Eta => "eta",
            Base::Eps => "eps",
            Base::X0 => "x0",
            Base::Xm1 => "xm1",
            Base::Tau => "tau",
            Base::Zeta => "zeta",
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Resolves prediction bases to laws.
pub trait LawSource {
    fn law(&self, base: Base) -> Option<&Law>;
}

impl LawSource for ScenarioSpec {
    fn law(&self, base: Base) -> Option<&Law> {
        match base {
            Base::Xi => Some(&self.xi),
            Base::Eta => Some(&self.eta),
            Base::Eps => Some(&self.eps),
            Base::X0 => Some(&self.x0),
            Base::Xm1 => Some(&self.xm1),
            Base::Tau | Base::Zeta => None,
        }
    }
}

/// The two laws of a random sum `sum_{i <= tau} zeta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSumLaws {
    pub tau: Law,
    pub zeta: Law,
}

impl LawSource for RandomSumLaws {
    fn law(&self, base: Base) -> Option<&Law> {
        match base {
            Base::Tau => Some(&self.tau),
            Base::Zeta => Some(&self.zeta),
            _ => None,
        }
    }
}

/// 2x2 real matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn transpose(self) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn scale(self, s: f64) -> Mat2 {
        let m = self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// `[[m_xi, m_eta], [1, 0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMatrix {
    m_xi: f64,
    m_eta: f64,
}

impl MeanMatrix {
    pub fn new(m_xi: f64, m_eta: f64) -> Result<Self, PredictError> {
        for (name, v) in [("m_xi", m_xi), ("m_eta", m_eta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PredictError::InvalidArgument(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(Self { m_xi, m_eta })
    }

    pub fn m_xi(&self) -> f64 {
        self.m_xi
    }

    pub fn m_eta(&self) -> f64 {
        self.m_eta
    }

    pub fn entries(&self) -> Mat2 {
        Mat2([[self.m_xi, self.m_eta], [1.0, 0.0]])
    }

    /// `(lambda_+, lambda_-)`, roots of `lambda^2 = m_xi lambda + m_eta`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let disc = (self.m_xi * self.m_xi + 4.0 * self.m_eta).sqrt();
        ((self.m_xi + disc) / 2.0, (self.m_xi - disc) / 2.0)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues().0
    }
}

pub fn mean_matrix(m_xi: f64, m_eta: f64) -> Result<MeanMatrix, PredictError> {
    MeanMatrix::new(m_xi, m_eta)
}

/// `M^ell` by repeated multiplication.
pub fn matrix_power(m: &MeanMatrix, ell: u32) -> Mat2 {
    let base = m.entries();
    (0..ell).fold(Mat2::IDENTITY, |acc, _| acc * base)
}

/// `m_0 = 1`, `m_k = m_xi m_{k-1} + m_eta m_{k-2}` with `m_{-1} = 0`:
/// the mean size at time `k` of a clan founded by one newborn.
#[derive(Debug, Clone, PartialEq)]
pub struct MkSequence {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    values: Vec<f64>,
}

impl MkSequence {
    /// `m_k` for `-1 <= k <= K`.
    pub fn get(&self, k: i64) -> f64 {
        match k {
            -1 => 0.0,
            k if k >= 0 => self.values[k as usize],
            _ => panic!("m_k undefined for k = {k}"),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    /// `(lambda_+^{k+1} - lambda_-^{k+1}) / (lambda_+ - lambda_-)`, when the eigenvalues differ.
    pub fn closed_form(&self, k: u32) -> Option<f64> {
        let (lp, lm) = (self.lambda_plus, self.lambda_minus);
        if lp == lm {
            return None;
        }
        Some((lp.powi(k as i32 + 1) - lm.powi(k as i32 + 1)) / (lp - lm))
    }
}

pub fn mk(m_xi: f64, m_eta: f64, max_index: usize) -> Result<MkSequence, PredictError> {
    let m = MeanMatrix::new(m_xi, m_eta)?;
    let (lambda_plus, lambda_minus) = m.eigenvalues();
    let mut values = Vec::with_capacity(max_index + 1);
    let (mut prev, mut cur) = (0.0, 1.0);
    values.push(cur);
    for _ in 0..max_index {
        let next = m_xi * cur + m_eta * prev;
        prev = cur;
        cur = next;
        values.push(cur);
    }
    Ok(MkSequence {
        lambda_plus,
        lambda_minus,
        values,
    })
}

fn finite_mean(law: &Law, base: Base) -> Result<f64, PredictError> {
    let m = law.mean();
    if m.is_finite() {
        Ok(m)
    } else {
        Err(PredictError::InfiniteMean(base))
    }
}

/// `(E X_n, E X_{n-1}) = M^n (E X_0, E X_{-1}) + sum_{k=1}^n M^{n-k} (m_eps, 0)`.
pub fn mean_forecast(scenario: &ScenarioSpec, n: u32) -> Result<(f64, f64), PredictError> {
    let mut means = [0.0; 5];
    for (slot, base) in means.iter_mut().zip(Base::PROCESS) {
        *slot = finite_mean(scenario.law(base).expect("process base"), base)?;
    }
    let [m_xi, m_eta, m_eps, ex0, exm1] = means;
    let m = MeanMatrix::new(m_xi, m_eta)?;
    let mut out = matrix_power(&m, n).apply([ex0, exm1]);
    for k in 1..=n {
        let v = matrix_power(&m, n - k).apply([m_eps, 0.0]);
        out[0] += v[0];
        out[1] += v[1];
    }
    Ok((out[0], out[1]))
}

/// `r`-th moments of the primitive laws entering [`moment_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RthMoments {
    pub xi: f64,
    pub eta: f64,
    pub x0: f64,
    pub xm1: f64,
    /// Zero when there is no immigration.
    pub eps: f64,
}

impl RthMoments {
    pub fn of(scenario: &ScenarioSpec, r: f64) -> Result<Self, PredictError> {
        let get = |law: &Law| {
            law.moment(r)
                .map_err(|e| PredictError::InvalidArgument(e.to_string()))
        };
        Ok(Self {
            xi: get(&scenario.xi)?,
            eta: get(&scenario.eta)?,
            x0: get(&scenario.x0)?,
            xm1: get(&scenario.xm1)?,
            eps: get(&scenario.eps)?,
        })
    }
}

/// Upper bound on `E(X_n^r)` from the power-mean inequality:
/// `B_k = 2^{r-1} (B_{k-1} E xi^r + B_{k-2} E eta^r)`, and with immigration
/// `B_k = 3^{r-1} (B_{k-1} E xi^r + B_{k-2} E eta^r + E eps^r)`.
pub fn moment_bound(moments: &RthMoments, r: f64, n: u32) -> Result<f64, PredictError> {
    if !r.is_finite() || r <= 1.0 {
        return Err(PredictError::InvalidArgument(format!("r = {r} must be > 1")));
    }
    let RthMoments { xi, eta, x0, xm1, eps } = *moments;
    if [xi, eta, x0, xm1, eps].iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(PredictError::InvalidArgument(
            "moments must be finite and non-negative".into(),
        ));
    }
    let split = if eps > 0.0 { 3f64 } else { 2f64 }.powf(r - 1.0);
    let (mut older, mut newer) = (xm1, x0);
    for _ in 0..n {
        let next = split * (newer * xi + older * eta + eps);
        older = newer;
        newer = next;
    }
    Ok(newer)
}

/// One `coefficient * P(base > x)` summand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub base: Base,
    pub coefficient: f64,
}

/// `sum_b c_b P(base_b > x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPrediction {
    pub provenance: String,
    pub terms: Vec<Term>,
}

impl TailPrediction {
    fn new(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            terms: Vec::new(),
        }
    }

    fn push(&mut self, base: Base, coefficient: f64) {
        debug_assert!(coefficient.is_finite() && coefficient >= 0.0);
        if coefficient > 0.0 {
            self.terms.push(Term { base, coefficient });
        }
    }

    fn extend(&mut self, other: TailPrediction) {
        self.terms.extend(other.terms);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total coefficient on `base`.
    pub fn coefficient(&self, base: Base) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.base == base)
            .map(|t| t.coefficient)
            .sum()
    }

    /// One term per base, in base order.
    pub fn collapsed(&self) -> TailPrediction {
        let bases: BTreeSet<Base> = self.terms.iter().map(|t| t.base).collect();
        TailPrediction {
            provenance: self.provenance.clone(),
            terms: bases
                .into_iter()
                .map(|base| Term {
                    base,
                    coefficient: self.coefficient(base),
                })
                .collect(),
        }
    }

    /// Evaluates the prediction at `x`; `None` if a base cannot be resolved.
    pub fn evaluate(&self, laws: &impl LawSource, x: f64) -> Option<f64> {
        self.terms.iter().try_fold(0.0, |acc, t| {
            laws.law(t.base).map(|law| acc + t.coefficient * law.survival(x))
        })
    }
}

/// Which primitives are regularly varying, with their shared index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavyProfile {
    pub heavy: BTreeSet<Base>,
    pub index: f64,
    /// `r`: every light primitive must have a finite `r`-th moment.
    pub light_moment_order: f64,
}

impl HeavyProfile {
    pub fn new(heavy: impl IntoIterator<Item = Base>, index: f64, light_moment_order: f64) -> Self {
        Self {
            heavy: heavy.into_iter().collect(),
            index,
            light_moment_order,
        }
    }

    pub fn is_heavy(&self, base: Base) -> bool {
        self.heavy.contains(&base)
    }

    fn offspring_heavy(&self) -> bool {
        self.is_heavy(Base::Xi) || self.is_heavy(Base::Eta)
    }

    fn label(&self) -> String {
        let names: Vec<&str> = self.heavy.iter().map(|b| b.name()).collect();
        format!("regularly-varying[{}]", names.join("+"))
    }
}

/// Immigration-clan exponent convention in the heavy-offspring predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImmigrationVariant {
    /// Cohort `i` contributes the first row of the `V_{n-i,0}` clan tail,
    /// i.e. matrix exponent `n - i - j - 1`.
    #[default]
    Consistent,
    /// Matrix exponent `n - j - 1` inside the cohort sum, as sometimes printed.
    Verbatim,
}

impl fmt::Display for ImmigrationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImmigrationVariant::Consistent => "consistent",
            ImmigrationVariant::Verbatim => "verbatim",
        })
    }
}

/// `C_n = sum_{k=0}^{n-1} m_k^alpha (M^{n-k-1})^T`; row 0 gives the clan tail
/// of `V_{n,0}`, row 1 that of `V_{n,-1}`, over the bases `(xi, eta)`.
fn clan_coefficients(n: u32, alpha: f64, mk: &MkSequence, m: &MeanMatrix) -> Mat2 {
    (0..n).fold(Mat2([[0.0; 2]; 2]), |acc, k| {
        let weight = mk.get(i64::from(k)).powf(alpha);
        acc + matrix_power(m, n - k - 1).transpose().scale(weight)
    })
}

/// Printed cohort sum `sum_{j=0}^{n-i-1} m_j^alpha (M^{n-j-1})^T`.
fn verbatim_cohort_coefficients(n: u32, i: u32, alpha: f64, mk: &MkSequence, m: &MeanMatrix) -> Mat2 {
    (0..n - i).fold(Mat2([[0.0; 2]; 2]), |acc, j| {
        let weight = mk.get(i64::from(j)).powf(alpha);
        acc.add(matrix_power(m, n - j - 1).transpose().scale(weight))
    })
}

/// Offspring-base mask: a light offspring law contributes a zero base.
fn offspring_mask(profile: &HeavyProfile) -> [f64; 2] {
    [
        f64::from(u8::from(profile.is_heavy(Base::Xi))),
        f64::from(u8::from(profile.is_heavy(Base::Eta))),
    ]
}

/// Tail predictions for `(V_{n,0}, V_{n,-1})` over the bases `xi`, `eta`.
pub fn clan_tail(
    n: u32,
    profile: &HeavyProfile,
    mk: &MkSequence,
    m: &MeanMatrix,
) -> Result<(TailPrediction, TailPrediction), PredictError> {
    if n == 0 {
        return Err(PredictError::InvalidArgument(
            "clan tail at n = 0 is deterministic".into(),
        ));
    }
    if !profile.offspring_heavy() {
        return Err(PredictError::UnsupportedProfile(
            "clan tails need a regularly varying offspring law".into(),
        ));
    }
    if mk.max_index() + 1 < n as usize {
        return Err(PredictError::InvalidArgument(format!(
            "m_k sequence too short for n = {n}"
        )));
    }
    let c = clan_coefficients(n, profile.index, mk, m).0;
    let mask = offspring_mask(profile);
    let mut out = [
        TailPrediction::new(format!("clan V(n,0) n={n}")),
        TailPrediction::new(format!("clan V(n,-1) n={n}")),
    ];
    for (row, pred) in out.iter_mut().enumerate() {
        pred.push(Base::Xi, c[row][0] * mask[0]);
        pred.push(Base::Eta, c[row][1] * mask[1]);
    }
    let [a, b] = out;
    Ok((a, b))
}

fn law_of(scenario: &ScenarioSpec, base: Base) -> &Law {
    scenario.law(base).expect("process base")
}

/// Checks the tail and moment conditions shared by all predictors and
/// returns warnings for conditions taken on trust.
fn validate_profile(scenario: &ScenarioSpec, profile: &HeavyProfile) -> Result<Vec<String>, PredictError> {
    let alpha = profile.index;
    let r = profile.light_moment_order;
    if profile.heavy.is_empty() {
        return Err(PredictError::UnsupportedProfile(
            "no primitive is flagged regularly varying".into(),
        ));
    }
    if let Some(b) = profile.heavy.iter().find(|b| matches!(b, Base::Tau | Base::Zeta)) {
        return Err(PredictError::UnsupportedProfile(format!(
            "`{b}` is not a process primitive"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(PredictError::InvalidArgument(format!("index {alpha} must be > 0")));
    }
    if !(r.is_finite() && r > alpha.max(1.0)) {
        return Err(PredictError::HypothesisViolation(format!(
            "light_moment_order r = {r} must exceed max(1, index) = {}",
            alpha.max(1.0)
        )));
    }
    let mut warnings = Vec::new();
    for base in Base::PROCESS {
        let law = law_of(scenario, base);
        if profile.is_heavy(base) {
            match law.tail_class() {
                TailClass::RegularlyVarying { index } if (index - alpha).abs() <= INDEX_TOL => {
                    if let Law::Table(_) = law {
                        warnings.push(format!(
                            "{base}: tail class of a TableLaw is taken as asserted; \
                             comparability conditions are not checked"
                        ));
                    }
                }
                TailClass::RegularlyVarying { index } => {
                    return Err(PredictError::UnsupportedProfile(format!(
                        "{base} has tail index {index}, profile index is {alpha}; \
                         distinct indices are not covered"
                    )))
                }
                TailClass::LightTail { .. } => {
                    return Err(PredictError::HypothesisViolation(format!(
                        "{base} is flagged heavy but its law is light-tailed"
                    )))
                }
            }
        } else {
            let moment = law.moment(r).expect("r > 1");
            if !moment.is_finite() {
                return Err(PredictError::HypothesisViolation(format!(
                    "E({base}^r) must be finite for r = {r}"
                )));
            }
        }
    }
    Ok(warnings)
}

/// A validated tail prediction plus warnings about trusted assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub tail: TailPrediction,
    pub warnings: Vec<String>,
}

/// Predicts `P(X_n > x)` as `x -> infinity` for the heavy-tail profile.
///
/// The prediction is assembled from up to three groups of terms:
///
/// * offspring: `E(X_0), E(X_{-1})`-weighted clan tails of `V_{n,0}`,
///   `V_{n,-1}` plus the `m_eps`-weighted clan tails of immigration cohorts
///   `1..n-1`;
/// * initial: `m_n^a P(X_0 > x) + m_{n-1}^a m_eta^a P(X_{-1} > x)`;
/// * immigration: `sum_{i=1}^n m_{n-i}^a P(eps > x)`.
///
/// Light primitives drop out of their group. Hypotheses are validated and
/// a violation is reported rather than a prediction.
pub fn predict_tail(
    scenario: &ScenarioSpec,
    profile: &HeavyProfile,
    n: u32,
    variant: ImmigrationVariant,
) -> Result<Prediction, PredictError> {
    if n == 0 {
        return Err(PredictError::InvalidArgument("n must be >= 1".into()));
    }
    let warnings = validate_profile(scenario, profile)?;
    let alpha = profile.index;
    let offspring = profile.offspring_heavy();
    let initial = profile.is_heavy(Base::X0) || profile.is_heavy(Base::Xm1);
    let immigration = profile.is_heavy(Base::Eps);

    if offspring && alpha < 1.0 {
        return Err(PredictError::HypothesisViolation(format!(
            "offspring tail index {alpha} must be >= 1"
        )));
    }
    let mut means = [0.0; 5];
    for (slot, base) in means.iter_mut().zip(Base::PROCESS) {
        // Light laws have a finite r-th moment with r > 1, hence a finite mean.
        *slot = finite_mean(law_of(scenario, base), base)?;
    }
    let [m_xi, m_eta, m_eps, ex0, exm1] = means;
    let m = MeanMatrix::new(m_xi, m_eta)?;
    let seq = mk(m_xi, m_eta, n as usize)?;

    let nondegenerate_offspring = scenario.xi.prob_zero() < 1.0 || scenario.eta.prob_zero() < 1.0;
    if offspring {
        if scenario.x0.prob_zero() == 1.0
            && scenario.xm1.prob_zero() == 1.0
            && scenario.eps.prob_zero() == 1.0
        {
            return Err(PredictError::HypothesisViolation(
                "one of P(X_0 = 0), P(X_-1 = 0), P(eps = 0) must be < 1".into(),
            ));
        }
    } else if initial != immigration && !nondegenerate_offspring {
        return Err(PredictError::HypothesisViolation(
            "P(xi = 0) < 1 or P(eta = 0) < 1 is required".into(),
        ));
    }

    let mut tail = TailPrediction::new(format!("{}/{variant} n={n}", profile.label()));
    if offspring {
        tail.extend(offspring_group(n, profile, &seq, &m, [ex0, exm1], m_eps, variant));
    }
    if initial {
        tail.extend(initial_group(n, profile, &seq, m_eta));
    }
    if immigration {
        tail.extend(immigration_group(n, alpha, &seq));
    }
    Ok(Prediction { tail, warnings })
}

/// Offspring group: initial-generation clans and immigration-cohort clans.
pub fn offspring_group(
    n: u32,
    profile: &HeavyProfile,
    seq: &MkSequence,
    m: &MeanMatrix,
    initial_means: [f64; 2],
    m_eps: f64,
    variant: ImmigrationVariant,
) -> TailPrediction {
    let alpha = profile.index;
    let mask = offspring_mask(profile);
    let c = clan_coefficients(n, alpha, seq, m).0;
    let [ex0, exm1] = initial_means;
    let mut group = TailPrediction::new("offspring");
    for (col, base) in [Base::Xi, Base::Eta].into_iter().enumerate() {
        group.push(base, (ex0 * c[0][col] + exm1 * c[1][col]) * mask[col]);
    }
    let mut cohort = [0.0; 2];
    for i in 1..n {
        let row = match variant {
            ImmigrationVariant::Consistent => clan_coefficients(n - i, alpha, seq, m).0[0],
            ImmigrationVariant::Verbatim => verbatim_cohort_coefficients(n, i, alpha, seq, m).0[0],
        };
        cohort[0] += m_eps * row[0];
        cohort[1] += m_eps * row[1];
    }
    group.push(Base::Xi, cohort[0] * mask[0]);
    group.push(Base::Eta, cohort[1] * mask[1]);
    group
}

/// Initial group: `m_n^a P(X_0 > x) + m_{n-1}^a m_eta^a P(X_{-1} > x)`.
pub fn initial_group(n: u32, profile: &HeavyProfile, seq: &MkSequence, m_eta: f64) -> TailPrediction {
    let a = profile.index;
    let n = i64::from(n);
    let mut group = TailPrediction::new("initial");
    if profile.is_heavy(Base::X0) {
        group.push(Base::X0, seq.get(n).powf(a));
    }
    if profile.is_heavy(Base::Xm1) {
        group.push(Base::Xm1, seq.get(n - 1).powf(a) * m_eta.powf(a));
    }
    group
}

/// Immigration group: `sum_{i=1}^n m_{n-i}^a P(eps > x)`.
pub fn immigration_group(n: u32, index: f64, seq: &MkSequence) -> TailPrediction {
    let coefficient = (1..=n).map(|i| seq.get(i64::from(n - i)).powf(index)).sum();
    let mut group = TailPrediction::new("immigration");
    group.push(Base::Eps, coefficient);
    group
}

/// Tail regime of a random sum `S = sum_{i <= tau} zeta_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomSumCase {
    /// `tau` regularly varying with index `b`: `P(S > x) ~ (E zeta)^b P(tau > x)`.
    HeavyCount,
    /// `zeta` regularly varying: `P(S > x) ~ E(tau) P(zeta > x)`.
    HeavySummand,
    /// Both with index `b`: `P(S > x) ~ E(tau) P(zeta > x) + (E zeta)^b P(tau > x)`.
    BothHeavy,
}

impl RandomSumCase {
    pub fn name(self) -> &'static str {
        match self {
            RandomSumCase::HeavyCount => "heavy-count",
            RandomSumCase::HeavySummand => "heavy-summand",
            RandomSumCase::BothHeavy => "both-heavy",
        }
    }
}

fn rv_index(law: &Law, base: Base) -> Result<f64, PredictError> {
    law.tail_class().index().ok_or_else(|| {
        PredictError::HypothesisViolation(format!("{base} must be regularly varying"))
    })
}

/// Some `r > index` with `E(law^r) < infinity` exists.
fn has_moment_beyond(law: &Law, index: f64) -> bool {
    match law.tail_class() {
        TailClass::LightTail { moment_order } => moment_order > index,
        TailClass::RegularlyVarying { index: own } => own > index,
    }
}

fn positive_finite_mean(law: &Law, base: Base) -> Result<f64, PredictError> {
    let m = law.mean();
    if m.is_finite() && m > 0.0 {
        Ok(m)
    } else {
        Err(PredictError::HypothesisViolation(format!(
            "E({base}) = {m} must be finite and positive"
        )))
    }
}

/// Tail prediction for a random sum under the hypotheses of `case`.
pub fn random_sum_prediction(
    tau: &Law,
    zeta: &Law,
    case: RandomSumCase,
) -> Result<TailPrediction, PredictError> {
    let mut pred = TailPrediction::new(format!("random-sum/{}", case.name()));
    match case {
        RandomSumCase::HeavyCount => {
            let beta = rv_index(tau, Base::Tau)?;
            let m_zeta = positive_finite_mean(zeta, Base::Zeta)?;
            if beta >= 1.0 && !has_moment_beyond(zeta, beta) {
                return Err(PredictError::HypothesisViolation(format!(
                    "E(zeta^r) must be finite for some r > {beta}"
                )));
            }
            pred.push(Base::Tau, m_zeta.powf(beta));
        }
        RandomSumCase::HeavySummand => {
            let alpha = rv_index(zeta, Base::Zeta)?;
            if alpha < 1.0 {
                return Err(PredictError::HypothesisViolation(format!(
                    "summand index {alpha} must be >= 1"
                )));
            }
            if tau.prob_zero() >= 1.0 {
                return Err(PredictError::HypothesisViolation("P(tau = 0) must be < 1".into()));
            }
            if !has_moment_beyond(tau, alpha) {
                return Err(PredictError::HypothesisViolation(format!(
                    "E(tau^r) must be finite for some r > {alpha}"
                )));
            }
            if alpha == 1.0 {
                positive_finite_mean(zeta, Base::Zeta)?;
            }
            pred.push(Base::Zeta, finite_mean(tau, Base::Tau)?);
        }
        RandomSumCase::BothHeavy => {
            let beta = rv_index(tau, Base::Tau)?;
            let alpha = rv_index(zeta, Base::Zeta)?;
            if (alpha - beta).abs() > INDEX_TOL {
                return Err(PredictError::HypothesisViolation(format!(
                    "tau and zeta need a common index, got {beta} and {alpha}"
                )));
            }
            if beta < 1.0 {
                return Err(PredictError::HypothesisViolation(format!(
                    "index {beta} must be >= 1"
                )));
            }
            let m_tau = positive_finite_mean(tau, Base::Tau)?;
            let m_zeta = positive_finite_mean(zeta, Base::Zeta)?;
            pred.push(Base::Zeta, m_tau);
            pred.push(Base::Tau, m_zeta.powf(beta));
        }
    }
    Ok(pred)
}
