//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use gw2i_cli::{run, ExperimentConfig, Mode, RandomSumSpec};
use gw2i_core::asymptotics::{mean_forecast, mk, moment_bound, HeavyProfile, ImmigrationVariant, RandomSumCase, RthMoments};
use gw2i_core::process::{exact_distribution, simulate_clan, simulate_ensemble, terminal_values, ClanKind, Route};
use gw2i_core::stream::ReplicateStream;
use gw2i_core::tailstats::{hill_estimate, two_sample_chi2, Histogram, Verdict, WindowOptions};
use gw2i_core::{Base, Law, ScenarioSpec};

/// Ratio tolerance for every tail-equivalence check.
const DELTA: f64 = 0.2;
/// Minimum exceedances per windowed threshold. At 200 the relative standard
/// error of a ratio is about 0.07, so DELTA sits near 2.8 standard errors.
const MIN_EXCEEDANCES: u64 = 200;
/// Default calibration floor. Floors come from pilot runs with master seed 0,
/// which no criterion below reuses.
const FLOOR: f64 = 40.0;
/// Pilot ratios at x = 80 were 1.26 (heavy offspring) and 1.16 (heavy summand).
const FLOOR_HEAVY_OFFSPRING: f64 = 160.0;
const FLOOR_HEAVY_SUMMAND: f64 = 160.0;
const TV_BOUND: f64 = 0.005;
const MEAN_SE_BOUND: f64 = 4.0;
const CHI2_LEVEL: f64 = 0.01;
const HILL_BAND: (f64, f64) = (2.0, 3.0);
const HILL_K: usize = 2000;
const BIG_N: u64 = 10_000_000;

fn bern(p: f64) -> Law {
    Law::bernoulli(p).unwrap()
}

fn dp(alpha: f64) -> Law {
    Law::discrete_pareto(alpha).unwrap()
}

fn one() -> Law {
    Law::deterministic(1)
}

fn inar2() -> ScenarioSpec {
    ScenarioSpec::new(bern(0.6), bern(0.3), bern(0.2), one(), one(), 4)
}

fn heavy_immigration() -> ScenarioSpec {
    ScenarioSpec::new(bern(0.4), bern(0.2), dp(2.5), one(), one(), 3)
}

fn heavy_initial() -> ScenarioSpec {
    ScenarioSpec::new(bern(0.4), bern(0.2), bern(0.2), dp(2.0), dp(2.0), 2)
}

fn heavy_offspring() -> ScenarioSpec {
    ScenarioSpec::new(dp(2.5), dp(2.5), Law::poisson(1.0).unwrap(), one(), one(), 2)
}

fn window(floor: f64) -> WindowOptions {
    WindowOptions {
        min_exceedances: MIN_EXCEEDANCES,
        calibration_floor: floor,
        tolerance: DELTA,
    }
}

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check {
        pass,
        detail: detail.into(),
    }
}

fn exact_oracle(seed: u64) -> Check {
    let s = inar2().with_replicates(1_000_000).with_seed(seed);
    let start = Instant::now();
    let exact = exact_distribution(&s, 64).unwrap();
    let values = terminal_values(&s, Route::Direct, Some(1)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let marginal = exact.marginal();
    let mut freq = vec![0.0; marginal.len()];
    for v in values {
        freq[v as usize] += 1.0;
    }
    let tv = marginal
        .iter()
        .zip(&freq)
        .map(|(p, c)| (p - c / s.replicates as f64).abs())
        .sum::<f64>()
        / 2.0;
    check(
        tv < TV_BOUND && elapsed < 60.0 && exact.mass_deficit == 0.0,
        format!("tv={tv:.5} (< {TV_BOUND}), deficit={}, {elapsed:.1}s single worker", exact.mass_deficit),
    )
}

fn mk_identities(seed: u64) -> Check {
    let fib = mk(1.0, 1.0, 40).unwrap();
    let (mut a, mut b) = (1u64, 1u64);
    let mut fib_ok = true;
    for k in 0..=40 {
        fib_ok &= fib.get(k) == a as f64;
        (a, b) = (b, a + b);
    }
    let mut worst = 0.0f64;
    for i in 1..=20 {
        for j in 1..=20 {
            let seq = mk(f64::from(i) / 10.0, f64::from(j) / 10.0, 50).unwrap();
            for k in 0..=50u32 {
                let closed = seq.closed_form(k).unwrap();
                worst = worst.max(((seq.get(i64::from(k)) - closed) / closed).abs());
            }
        }
    }
    let (xi, eta) = (bern(0.7), bern(0.5));
    let seq = mk(0.7, 0.5, 6).unwrap();
    let n = 100_000u64;
    let mut worst_z = 0.0f64;
    for k in 0..=6 {
        let draws: Vec<f64> = (0..n)
            .map(|i| simulate_clan(ClanKind::V0, k, &xi, &eta, &mut ReplicateStream::new(seed, i)).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let diff = mean - seq.get(i64::from(k));
        let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z.abs());
    }
    check(
        fib_ok && worst < 1e-9 && worst_z < MEAN_SE_BOUND,
        format!("fibonacci exact={fib_ok}, max rel err={worst:.2e}, max clan |z|={worst_z:.2}"),
    )
}

fn mean_matrix_scenarios() -> Vec<(&'static str, ScenarioSpec)> {
    vec![
        ("inar2", inar2()),
        ("heavy-immigration", heavy_immigration()),
        ("heavy-initial", heavy_initial()),
        ("heavy-offspring", heavy_offspring()),
        (
            "poisson-geometric",
            ScenarioSpec::new(
                Law::poisson(0.8).unwrap(),
                Law::geometric(0.7).unwrap(),
                Law::poisson(2.0).unwrap(),
                Law::poisson(3.0).unwrap(),
                Law::deterministic(0),
                1,
            ),
        ),
    ]
}

fn mean_forecasts(seed: u64) -> Check {
    let mut worst = (0.0f64, String::new());
    let mut all_finite = true;
    for (name, s) in mean_matrix_scenarios() {
        for n in 1..=5 {
            let run = s.clone().with_horizon(n).with_replicates(1_000_000).with_seed(seed + u64::from(n));
            let summary = simulate_ensemble(&run, None).unwrap();
            all_finite &= summary.overflowed == 0;
            let expected = mean_forecast(&run, n).unwrap().0;
            let z = ((summary.mean - expected) / summary.standard_error()).abs();
            if z > worst.0 || z.is_nan() {
                worst = (z, format!("{name} n={n}"));
            }
        }
    }
    check(
        all_finite && worst.0 < MEAN_SE_BOUND,
        format!("max |z|={:.2} at {} over 5 scenarios, n<=5", worst.0, worst.1),
    )
}

fn additive_property(seed: u64) -> Check {
    let scenarios = [
        ScenarioSpec::new(bern(0.6), bern(0.3), bern(0.2), one(), one(), 3),
        ScenarioSpec::new(
            Law::poisson(0.7).unwrap(),
            Law::geometric(0.6).unwrap(),
            Law::poisson(1.5).unwrap(),
            Law::poisson(2.0).unwrap(),
            one(),
            3,
        ),
        ScenarioSpec::new(Law::geometric(0.5).unwrap(), bern(0.4), dp(2.5), one(), Law::geometric(0.5).unwrap(), 3),
    ];
    let mut summary = Vec::new();
    let mut pass = true;
    for (i, s) in scenarios.iter().enumerate() {
        let mut passes = 0;
        for rep in 0..5u64 {
            let base = seed + 100 * i as u64 + 10 * rep;
            let direct = terminal_values(&s.clone().with_seed(base).with_replicates(100_000), Route::Direct, None).unwrap();
            let split =
                terminal_values(&s.clone().with_seed(base + 1).with_replicates(100_000), Route::Decomposed, None).unwrap();
            let p = two_sample_chi2(&Histogram::from_values(&direct), &Histogram::from_values(&split)).unwrap();
            if p > CHI2_LEVEL {
                passes += 1;
            }
        }
        pass &= passes >= 4;
        summary.push(format!("{passes}/5"));
    }
    check(pass, format!("seeds with p > {CHI2_LEVEL}: {}", summary.join(" ")))
}

fn verify_config(scenario: ScenarioSpec, profile: HeavyProfile, floor: f64, dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        scenario,
        profile: Some(profile),
        mode: Mode::Verify,
        output_dir: dir.to_path_buf(),
        rveps_variant: ImmigrationVariant::Consistent,
        truncation: None,
        window: window(floor),
        random_sums: Vec::new(),
    }
}

fn verify(config: &ExperimentConfig, workers: Option<usize>) -> (Check, Vec<String>) {
    let start = Instant::now();
    let outcome = run(config, workers).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = outcome.verdict == Some(Verdict::Pass) && elapsed < 600.0;
    (check(pass, format!("{} ({elapsed:.1}s)", outcome.lines[0])), outcome.lines)
}

fn heavy_immigration_tail(seed: u64, dir: &Path) -> Check {
    let s = heavy_immigration().with_replicates(BIG_N).with_seed(seed);
    let profile = HeavyProfile::new([Base::Eps], 2.5, 3.0);
    verify(&verify_config(s, profile, FLOOR, dir), Some(8)).0
}

fn heavy_initial_tail(seed: u64, dir: &Path) -> Check {
    let s = heavy_initial().with_replicates(BIG_N).with_seed(seed);
    let profile = HeavyProfile::new([Base::X0, Base::Xm1], 2.0, 3.0);
    verify(&verify_config(s, profile, FLOOR, dir), Some(8)).0
}

fn heavy_offspring_tail(seed: u64, dir: &Path) -> Check {
    let s = heavy_offspring().with_replicates(BIG_N).with_seed(seed);
    let profile = HeavyProfile::new([Base::Xi, Base::Eta], 2.5, 3.0);
    let (mut c, lines) = verify(&verify_config(s, profile, FLOOR_HEAVY_OFFSPRING, dir), Some(8));
    let verbatim = lines.iter().find(|l| l.starts_with("verbatim:"));
    c.pass &= verbatim.is_some() && dir.join("report_verbatim.csv").exists();
    c.detail = format!("{}; {}", c.detail, verbatim.map_or("verbatim report missing", |l| l.as_str()));
    c
}

fn random_sums(seed: u64, dir: &Path) -> Check {
    let specs = vec![
        RandomSumSpec {
            case: RandomSumCase::HeavyCount,
            tau: dp(2.5),
            zeta: Law::poisson(2.0).unwrap(),
            window: None,
        },
        RandomSumSpec {
            case: RandomSumCase::HeavySummand,
            tau: Law::poisson(3.0).unwrap(),
            zeta: dp(1.5),
            window: Some(window(FLOOR_HEAVY_SUMMAND)),
        },
        RandomSumSpec {
            case: RandomSumCase::BothHeavy,
            tau: dp(2.5),
            zeta: dp(2.5),
            window: None,
        },
    ];
    let config = ExperimentConfig {
        scenario: heavy_immigration().with_replicates(BIG_N).with_seed(seed),
        profile: None,
        mode: Mode::CheckAppendix,
        output_dir: dir.to_path_buf(),
        rveps_variant: ImmigrationVariant::Consistent,
        truncation: None,
        window: window(FLOOR),
        random_sums: specs,
    };
    let outcome = run(&config, None).unwrap();
    check(outcome.verdict == Some(Verdict::Pass), outcome.lines.join("; "))
}

fn moment_dominance() -> Check {
    let mut worst_margin = f64::INFINITY;
    let mut detail = Vec::new();
    for n in 1..=4 {
        let s = inar2().with_horizon(n);
        let exact = exact_distribution(&s, 64).unwrap();
        let second = exact.moment(2.0);
        let bound = moment_bound(&RthMoments::of(&s, 2.0).unwrap(), 2.0, n).unwrap();
        worst_margin = worst_margin.min(bound - second);
        detail.push(format!("n={n}: {second:.4}<={bound:.4}"));
    }
    check(worst_margin >= 0.0, detail.join(", "))
}

fn hill(seed: u64) -> Check {
    let s = heavy_immigration().with_replicates(BIG_N).with_seed(seed);
    let sample = terminal_values(&s, Route::Direct, None).unwrap();
    let h = hill_estimate(&sample, HILL_K).unwrap();
    check(
        (HILL_BAND.0..=HILL_BAND.1).contains(&h),
        format!("hill(k={HILL_K})={h:.3}, band [{}, {}]", HILL_BAND.0, HILL_BAND.1),
    )
}

fn determinism(seed: u64, dir: &Path) -> Check {
    let mut files = BTreeMap::new();
    for workers in [1usize, 8] {
        let out = dir.join(format!("workers-{workers}"));
        let config = ExperimentConfig {
            scenario: heavy_immigration().with_replicates(BIG_N).with_seed(seed),
            profile: None,
            mode: Mode::Simulate,
            output_dir: out.clone(),
            rveps_variant: ImmigrationVariant::Consistent,
            truncation: None,
            window: WindowOptions::default(),
            random_sums: Vec::new(),
        };
        run(&config, Some(workers)).unwrap();
        files.insert(workers, std::fs::read(out.join("ensemble.csv")).unwrap());
    }
    let same = files[&1] == files[&8];
    check(same, format!("ensemble.csv identical for workers 1 and 8: {same} ({} bytes)", files[&1].len()))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        std::fs::create_dir_all(&p).unwrap();
        p
    };
    type Criterion<'a> = (&'a str, Box<dyn FnOnce() -> Check + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("exact-oracle equivalence", Box::new(|| exact_oracle(101))),
        ("m_k identities", Box::new(|| mk_identities(102))),
        ("mean forecast", Box::new(|| mean_forecasts(103))),
        ("additive property", Box::new(|| additive_property(104))),
        ("heavy immigration tail", Box::new(|| heavy_immigration_tail(105, &sub("c5")))),
        ("heavy initial tail", Box::new(|| heavy_initial_tail(106, &sub("c6")))),
        ("heavy offspring tail", Box::new(|| heavy_offspring_tail(107, &sub("c7")))),
        ("random sums", Box::new(|| random_sums(108, &sub("c8")))),
        ("moment bound dominance", Box::new(moment_dominance)),
        ("hill sanity", Box::new(|| hill(110))),
        ("determinism", Box::new(|| determinism(111, &sub("c11")))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let c = f();
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {verdict} {name}: {}", i + 1, c.detail);
        failed += usize::from(!c.pass);
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
