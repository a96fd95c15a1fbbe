//! Discrete laws on the non-negative integers.
//!
//! Every law exposes an exact survival function `P(Z > x)`, its pmf,
//! moments (as extended reals: `f64::INFINITY` marks a divergent moment),
//! its tail classification and a sampler driven by an explicit RNG.
//!
//! The heavy-tailed laws are pure power laws, so their survival functions
//! are available in closed form:
//!
//! * `DiscretePareto(alpha)`: `P(Z > k) = (k + 1)^{-alpha}` on `{1, 2, ...}`,
//!   sampled by inversion `Z = floor(U^{-1/alpha})`.
//! * `Zeta(alpha)`: `P(Z = k) = k^{-(alpha + 1)} / zeta(alpha + 1)` on `{1, 2, ...}`.
//! * `TableLaw`: an explicit finite pmf, optionally continued by a power tail
//!   `P(Z > k) = scale * (k + 1)^{-index}` past the end of the table.

mod zeta;

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

pub use zeta::{hurwitz_zeta, riemann_zeta, zeta_minus_one};

/// Tolerance on the total mass of user-supplied tables.
const TABLE_MASS_TOL: f64 = 1e-12;

/// Largest integer exactly representable in an `f64`.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LawError {
    #[error("{kind}: missing parameter `{name}`")]
    MissingParam { kind: LawKind, name: &'static str },
    #[error("{kind}: unknown parameter `{name}`")]
    UnknownParam { kind: LawKind, name: String },
    #[error("{kind}: parameter `{name}` = {value} out of range ({expected})")]
    OutOfRange {
        kind: LawKind,
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("TableLaw: {0}")]
    Table(String),
    #[error("moment order must be positive, got {0}")]
    MomentOrder(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LawKind {
    Deterministic,
    Bernoulli,
    Poisson,
    Geometric,
    DiscretePareto,
    Zeta,
    TableLaw,
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Serialized law descriptor: `{"kind": ..., "params": {name: number}}`.
///
/// `TableLaw` additionally carries its pmf in `table`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub kind: LawKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
}

/// Tail classification of a law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    /// `P(Z > x) = x^{-index} L(x)`; moments of order below `index` are finite.
    RegularlyVarying { index: f64 },
    /// Moments up to `moment_order` are finite (`INFINITY`: all orders).
    LightTail { moment_order: f64 },
}

impl TailClass {
    pub fn index(&self) -> Option<f64> {
        match *self {
            TailClass::RegularlyVarying { index } => Some(index),
            TailClass::LightTail { .. } => None,
        }
    }
}

/// Power-law continuation `P(Z > k) = scale * (k + 1)^{-index}` beyond a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTail {
    pub index: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZetaLaw {
    alpha: f64,
    norm: f64,
}

impl ZetaLaw {
    pub fn new(alpha: f64) -> Result<Self, LawError> {
        check_positive(LawKind::Zeta, "alpha", alpha)?;
        Ok(Self {
            alpha,
            norm: riemann_zeta(alpha + 1.0),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableLaw {
    pmf: Vec<f64>,
    tail: Option<PowerTail>,
    /// `above[k] = P(Z > k)` for `k < pmf.len()`.
    above: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TableLaw {
    /// Builds a table law. With a tail, `scale` may be omitted and is then
    /// derived from the missing table mass; if given it must agree with it.
    pub fn new(pmf: Vec<f64>, tail: Option<(f64, Option<f64>)>) -> Result<Self, LawError> {
        if pmf.is_empty() {
            return Err(LawError::Table("table must not be empty".into()));
        }
        if let Some((k, p)) = pmf
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(LawError::Table(format!("entry {k} = {p} is not a probability")));
        }
        let mass: f64 = pmf.iter().sum();
        let len = pmf.len() as f64;
        let tail = match tail {
            None => {
                if (mass - 1.0).abs() > TABLE_MASS_TOL {
                    return Err(LawError::Table(format!(
                        "table mass {mass} differs from 1 and no tail is given"
                    )));
                }
                None
            }
            Some((index, scale)) => {
                check_positive(LawKind::TableLaw, "tail_index", index)?;
                let missing = 1.0 - mass;
                if missing <= 0.0 {
                    return Err(LawError::Table(format!(
                        "table mass {mass} leaves nothing for the tail"
                    )));
                }
                let derived = missing * len.powf(index);
                let scale = match scale {
                    None => derived,
                    Some(s) => {
                        if (s * len.powf(-index) - missing).abs() > TABLE_MASS_TOL {
                            return Err(LawError::Table(format!(
                                "tail_scale {s} implies tail mass {} but the table leaves {missing}",
                                s * len.powf(-index)
                            )));
                        }
                        s
                    }
                };
                Some(PowerTail { index, scale })
            }
        };
        let tail_mass = tail.map_or(0.0, |t| t.scale * len.powf(-t.index));
        let mut above = vec![0.0; pmf.len()];
        let mut acc = tail_mass;
        for k in (0..pmf.len()).rev() {
            above[k] = acc;
            acc += pmf[k];
        }
        let mut cumulative = Vec::with_capacity(pmf.len());
        let mut c = 0.0;
        for p in &pmf {
            c += p;
            cumulative.push(c);
        }
        Ok(Self {
            pmf,
            tail,
            above,
            cumulative,
        })
    }

    pub fn table(&self) -> &[f64] {
        &self.pmf
    }

    pub fn tail(&self) -> Option<PowerTail> {
        self.tail
    }
}

/// A validated law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum Law {
    Deterministic(u64),
    Bernoulli(f64),
    Poisson(f64),
    /// Number of failures before the first success, support `{0, 1, ...}`.
    Geometric(f64),
    DiscretePareto(f64),
    Zeta(ZetaLaw),
    Table(TableLaw),
}

fn check_positive(kind: LawKind, name: &'static str, value: f64) -> Result<(), LawError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(LawError::OutOfRange {
            kind,
            name,
            value,
            expected: "finite and > 0",
        })
    }
}

fn check_unit(kind: LawKind, name: &'static str, value: f64, open_zero: bool) -> Result<(), LawError> {
    let ok = if open_zero {
        value > 0.0 && value <= 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok {
        Ok(())
    } else {
        Err(LawError::OutOfRange {
            kind,
            name,
            value,
            expected: if open_zero { "in (0, 1]" } else { "in [0, 1]" },
        })
    }
}

impl Law {
    pub fn deterministic(value: u64) -> Self {
        Law::Deterministic(value)
    }

    pub fn bernoulli(p: f64) -> Result<Self, LawError> {
        check_unit(LawKind::Bernoulli, "p", p, false)?;
        Ok(Law::Bernoulli(p))
    }

    pub fn poisson(lambda: f64) -> Result<Self, LawError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(LawError::OutOfRange {
                kind: LawKind::Poisson,
                name: "lambda",
                value: lambda,
                expected: "finite and >= 0",
            });
        }
        Ok(Law::Poisson(lambda))
    }

    pub fn geometric(p: f64) -> Result<Self, LawError> {
        check_unit(LawKind::Geometric, "p", p, true)?;
        Ok(Law::Geometric(p))
    }

    pub fn discrete_pareto(alpha: f64) -> Result<Self, LawError> {
        check_positive(LawKind::DiscretePareto, "alpha", alpha)?;
        Ok(Law::DiscretePareto(alpha))
    }

    pub fn zeta(alpha: f64) -> Result<Self, LawError> {
        Ok(Law::Zeta(ZetaLaw::new(alpha)?))
    }

    pub fn kind(&self) -> LawKind {
        match self {
            Law::Deterministic(_) => LawKind::Deterministic,
            Law::Bernoulli(_) => LawKind::Bernoulli,
            Law::Poisson(_) => LawKind::Poisson,
            Law::Geometric(_) => LawKind::Geometric,
            Law::DiscretePareto(_) => LawKind::DiscretePareto,
            Law::Zeta(_) => LawKind::Zeta,
            Law::Table(_) => LawKind::TableLaw,
        }
    }

    pub fn tail_class(&self) -> TailClass {
        let light = TailClass::LightTail {
            moment_order: f64::INFINITY,
        };
        match self {
            Law::DiscretePareto(alpha) => TailClass::RegularlyVarying { index: *alpha },
            Law::Zeta(z) => TailClass::RegularlyVarying { index: z.alpha },
            Law::Table(t) => t
                .tail
                .map_or(light, |tail| TailClass::RegularlyVarying { index: tail.index }),
            _ => light,
        }
    }

    /// `E(Z)`; `INFINITY` when the mean diverges.
    pub fn mean(&self) -> f64 {
        match self {
            Law::Deterministic(c) => *c as f64,
            Law::Bernoulli(p) => *p,
            Law::Poisson(lambda) => *lambda,
            Law::Geometric(p) => (1.0 - p) / p,
            Law::DiscretePareto(alpha) => {
                if *alpha <= 1.0 {
                    f64::INFINITY
                } else {
                    riemann_zeta(*alpha)
                }
            }
            Law::Zeta(z) => {
                if z.alpha <= 1.0 {
                    f64::INFINITY
                } else {
                    riemann_zeta(z.alpha) / z.norm
                }
            }
            Law::Table(_) => self.moment(1.0).expect("order 1 is positive"),
        }
    }

    /// `E(Z^q)` for `q > 0`. Pure power laws report `INFINITY` for `q >= index`.
    pub fn moment(&self, q: f64) -> Result<f64, LawError> {
        if q.is_nan() || q <= 0.0 {
            return Err(LawError::MomentOrder(q));
        }
        let value = match self {
            Law::Deterministic(c) => (*c as f64).powf(q),
            Law::Bernoulli(p) => *p,
            Law::Poisson(lambda) => poisson_moment(*lambda, q),
            Law::Geometric(p) => geometric_moment(*p, q),
            Law::DiscretePareto(alpha) => discrete_pareto_moment(*alpha, q),
            Law::Zeta(z) => {
                if q >= z.alpha {
                    f64::INFINITY
                } else {
                    riemann_zeta(z.alpha + 1.0 - q) / z.norm
                }
            }
            Law::Table(t) => table_moment(t, q),
        };
        Ok(value)
    }

    /// Exact `P(Z > x)` with floor semantics on real thresholds.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        let k = x.floor();
        match self {
            Law::Deterministic(c) => {
                if (*c as f64) > k {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Bernoulli(p) => {
                if k < 1.0 {
                    *p
                } else {
                    0.0
                }
            }
            Law::Poisson(lambda) => {
                if *lambda == 0.0 {
                    0.0
                } else {
                    gamma_lr(k + 1.0, *lambda)
                }
            }
            Law::Geometric(p) => (1.0 - p).powf(k + 1.0),
            Law::DiscretePareto(alpha) => (k + 1.0).powf(-alpha),
            Law::Zeta(z) => hurwitz_zeta(z.alpha + 1.0, k + 1.0) / z.norm,
            Law::Table(t) => {
                let len = t.pmf.len() as f64;
                if k < len {
                    t.above[k as usize]
                } else {
                    t.tail.map_or(0.0, |tail| tail.scale * (k + 1.0).powf(-tail.index))
                }
            }
        }
    }

    /// `P(Z = k)`.
    pub fn pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Law::Deterministic(c) => f64::from(u8::from(*c == k)),
            Law::Bernoulli(p) => match k {
                0 => 1.0 - p,
                1 => *p,
                _ => 0.0,
            },
            Law::Poisson(lambda) => {
                if *lambda == 0.0 {
                    f64::from(u8::from(k == 0))
                } else {
                    (-lambda + kf * lambda.ln() - ln_gamma(kf + 1.0)).exp()
                }
            }
            Law::Geometric(p) => p * (1.0 - p).powf(kf),
            Law::DiscretePareto(alpha) => {
                if k == 0 {
                    0.0
                } else {
                    discrete_pareto_pmf(*alpha, kf)
                }
            }
            Law::Zeta(z) => {
                if k == 0 {
                    0.0
                } else {
                    kf.powf(-(z.alpha + 1.0)) / z.norm
                }
            }
            Law::Table(t) => match t.pmf.get(k as usize) {
                Some(p) => *p,
                None => t
                    .tail
                    .map_or(0.0, |tail| tail.scale * discrete_pareto_pmf(tail.index, kf)),
            },
        }
    }

    /// Draws one value; `None` when it does not fit in a `u64`.
    pub fn try_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<u64> {
        match self {
            Law::Deterministic(c) => Some(*c),
            Law::Bernoulli(p) => Some(u64::from(rng.random_bool(*p))),
            Law::Poisson(lambda) => sample_poisson(*lambda, rng),
            Law::Geometric(p) => {
                if *p == 1.0 {
                    Some(0)
                } else {
                    let g = rand_distr::Geometric::new(*p).expect("validated p");
                    Some(g.sample(rng))
                }
            }
            Law::DiscretePareto(alpha) => {
                let u = 1.0 - rng.random::<f64>();
                to_count(discrete_pareto_inverse(*alpha, u))
            }
            Law::Zeta(z) => {
                let d = rand_distr::Zeta::new(z.alpha + 1.0).expect("validated alpha");
                to_count(d.sample(rng))
            }
            Law::Table(t) => {
                let u = rng.random::<f64>();
                let k = t.cumulative.partition_point(|&c| c <= u);
                if k < t.pmf.len() {
                    return Some(k as u64);
                }
                match t.tail {
                    // Conditional on Z >= L: P(Z >= k) = (k / L)^{-index}.
                    Some(tail) => {
                        let v = 1.0 - rng.random::<f64>();
                        to_count((t.pmf.len() as f64 * v.powf(-1.0 / tail.index)).floor())
                    }
                    // Rounding left u above the table's cumulative mass.
                    None => Some(last_positive(&t.pmf) as u64),
                }
            }
        }
    }

    /// Draws one value, saturating at `u64::MAX`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.try_sample(rng).unwrap_or(u64::MAX)
    }

    /// Sum of `count` independent draws; `None` on `u64` overflow.
    ///
    /// Draws are taken one by one except for `Deterministic` (multiplied)
    /// and `Poisson` (a single `Poisson(count * lambda)` draw).
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> Option<u64> {
        if count == 0 {
            return Some(0);
        }
        match self {
            Law::Deterministic(c) => c.checked_mul(count),
            Law::Poisson(lambda) => sample_poisson(*lambda * count as f64, rng),
            _ => {
                let mut total = 0u64;
                for _ in 0..count {
                    total = total.checked_add(self.try_sample(rng)?)?;
                }
                Some(total)
            }
        }
    }

    /// `P(Z = 0)`.
    pub fn prob_zero(&self) -> f64 {
        self.pmf(0)
    }
}

impl TryFrom<LawSpec> for Law {
    type Error = LawError;

    fn try_from(spec: LawSpec) -> Result<Self, Self::Error> {
        let kind = spec.kind;
        let allowed: &[&'static str] = match kind {
            LawKind::Deterministic => &["value"],
            LawKind::Bernoulli | LawKind::Geometric => &["p"],
            LawKind::Poisson => &["lambda"],
            LawKind::DiscretePareto | LawKind::Zeta => &["alpha"],
            LawKind::TableLaw => &["tail_index", "tail_scale"],
        };
        if let Some(name) = spec.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(LawError::UnknownParam {
                kind,
                name: name.clone(),
            });
        }
        if kind != LawKind::TableLaw && spec.table.is_some() {
            return Err(LawError::UnknownParam {
                kind,
                name: "table".into(),
            });
        }
        let get = |name: &'static str| {
            spec.params
                .get(name)
                .copied()
                .ok_or(LawError::MissingParam { kind, name })
        };
        match kind {
            LawKind::Deterministic => {
                let v = get("value")?;
                if !(v >= 0.0 && v.fract() == 0.0 && v <= MAX_EXACT_INT) {
                    return Err(LawError::OutOfRange {
                        kind,
                        name: "value",
                        value: v,
                        expected: "a non-negative integer",
                    });
                }
                Ok(Law::Deterministic(v as u64))
            }
            LawKind::Bernoulli => Law::bernoulli(get("p")?),
            LawKind::Poisson => Law::poisson(get("lambda")?),
            LawKind::Geometric => Law::geometric(get("p")?),
            LawKind::DiscretePareto => Law::discrete_pareto(get("alpha")?),
            LawKind::Zeta => Law::zeta(get("alpha")?),
            LawKind::TableLaw => {
                let table = spec
                    .table
                    .ok_or_else(|| LawError::Table("missing `table`".into()))?;
                let tail = match (spec.params.get("tail_index"), spec.params.get("tail_scale")) {
                    (None, None) => None,
                    (Some(i), s) => Some((*i, s.copied())),
                    (None, Some(_)) => {
                        return Err(LawError::MissingParam {
                            kind,
                            name: "tail_index",
                        })
                    }
                };
                Ok(Law::Table(TableLaw::new(table, tail)?))
            }
        }
    }
}

impl From<Law> for LawSpec {
    fn from(law: Law) -> Self {
        let kind = law.kind();
        let mut params = BTreeMap::new();
        let mut table = None;
        match law {
            Law::Deterministic(c) => {
                params.insert("value".into(), c as f64);
            }
            Law::Bernoulli(p) | Law::Geometric(p) => {
                params.insert("p".into(), p);
            }
            Law::Poisson(lambda) => {
                params.insert("lambda".into(), lambda);
            }
            Law::DiscretePareto(alpha) => {
                params.insert("alpha".into(), alpha);
            }
            Law::Zeta(z) => {
                params.insert("alpha".into(), z.alpha);
            }
            Law::Table(t) => {
                if let Some(tail) = t.tail {
                    params.insert("tail_index".into(), tail.index);
                    params.insert("tail_scale".into(), tail.scale);
                }
                table = Some(t.pmf);
            }
        }
        LawSpec {
            kind,
            params,
            table,
        }
    }
}

/// Inversion map of the discrete Pareto law: `floor(u^{-1/alpha})` for `u` in `(0, 1]`.
pub fn discrete_pareto_inverse(alpha: f64, u: f64) -> f64 {
    u.powf(-1.0 / alpha).floor()
}

fn to_count(value: f64) -> Option<u64> {
    // 2^64 as f64; anything at or above does not fit.
    if value < 18_446_744_073_709_551_616.0 {
        Some(value as u64)
    } else {
        None
    }
}

fn last_positive(pmf: &[f64]) -> usize {
    pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Option<u64> {
    if lambda == 0.0 {
        return Some(0);
    }
    if !lambda.is_finite() || lambda > 1.0e18 {
        return None;
    }
    let d = rand_distr::Poisson::new(lambda).expect("positive finite rate");
    to_count(d.sample(rng))
}

/// `k^{-alpha} - (k+1)^{-alpha}` without cancellation for large `k`.
fn discrete_pareto_pmf(alpha: f64, k: f64) -> f64 {
    k.powf(-alpha) * -(-alpha * (1.0 / k).ln_1p()).exp_m1()
}

/// `E(Z^q)` for `Z ~ DiscretePareto(alpha)`.
///
/// Summation by parts gives `E Z^q = sum_k (k^q - (k-1)^q) k^{-alpha}`;
/// expanding `1 - (1 - 1/k)^q` binomially turns the `k >= 2` part into
/// `sum_j (-1)^{j+1} C(q, j) (zeta(alpha + j - q) - 1)`.
pub(crate) fn discrete_pareto_moment(alpha: f64, q: f64) -> f64 {
    if q >= alpha {
        return f64::INFINITY;
    }
    let mut total = 1.0;
    let mut binom = 1.0;
    for j in 1..=400u32 {
        let jf = f64::from(j);
        binom *= (q - jf + 1.0) / jf;
        if binom == 0.0 {
            break;
        }
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * binom * zeta_minus_one(alpha + jf - q);
        total += term;
        if jf > q + 1.0 && term.abs() < 1e-17 * total.abs() {
            break;
        }
    }
    total
}

fn poisson_moment(lambda: f64, q: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let ln_lambda = lambda.ln();
    let mut total = 0.0;
    let mut k = 1.0_f64;
    loop {
        let term = (-lambda + k * ln_lambda - ln_gamma(k + 1.0) + q * k.ln()).exp();
        total += term;
        if k > lambda && term < 1e-18 * total {
            break;
        }
        k += 1.0;
    }
    total
}

fn geometric_moment(p: f64, q: f64) -> f64 {
    if p == 1.0 {
        return 0.0;
    }
    let ln_fail = (1.0 - p).ln();
    let mut total = 0.0;
    let mut k = 1.0_f64;
    let mode = q / -ln_fail;
    loop {
        let term = (p.ln() + k * ln_fail + q * k.ln()).exp();
        total += term;
        if k > mode && term < 1e-18 * total {
            break;
        }
        k += 1.0;
    }
    total
}

fn table_moment(t: &TableLaw, q: f64) -> f64 {
    let head: f64 = t
        .pmf
        .iter()
        .enumerate()
        .map(|(k, p)| p * (k as f64).powf(q))
        .sum();
    match t.tail {
        None => head,
        Some(tail) => {
            if q >= tail.index {
                return f64::INFINITY;
            }
            // Pareto-shaped mass on k >= L, scaled.
            let below: f64 = (1..t.pmf.len())
                .map(|k| {
                    let kf = k as f64;
                    kf.powf(q) * discrete_pareto_pmf(tail.index, kf)
                })
                .sum();
            head + tail.scale * (discrete_pareto_moment(tail.index, q) - below)
        }
    }
}
