use std::collections::BTreeMap;

use gw2i_core::asymptotics::{clan_tail, mean_forecast, mk, mean_matrix, Base, HeavyProfile};
use gw2i_core::process::{
    exact_distribution, simulate_clan, simulate_ensemble, simulate_from, simulate_path, terminal_values, ClanKind,
    PathState, Route, ScenarioSpec,
};
use gw2i_core::stream::ReplicateStream;
use gw2i_core::tailstats::{two_sample_chi2, Histogram};
use gw2i_core::Law;

fn bern(p: f64) -> Law {
    Law::bernoulli(p).unwrap()
}

fn scenario(xi: Law, eta: Law, eps: Law, x0: Law, xm1: Law, n: u32) -> ScenarioSpec {
    ScenarioSpec::new(xi, eta, eps, x0, xm1, n)
}

fn histogram_of(scenario: &ScenarioSpec, route: Route) -> Histogram {
    Histogram::from_values(&terminal_values(scenario, route, None).unwrap())
}

#[test]
fn additive_decomposition_matches_direct_recursion() {
    let cases = [
        scenario(bern(0.6), bern(0.3), bern(0.2), Law::deterministic(2), Law::deterministic(1), 3),
        scenario(
            Law::poisson(0.7).unwrap(),
            Law::geometric(0.6).unwrap(),
            Law::poisson(1.5).unwrap(),
            Law::poisson(2.0).unwrap(),
            Law::deterministic(1),
            4,
        ),
        scenario(
            Law::geometric(0.5).unwrap(),
            bern(0.4),
            Law::discrete_pareto(2.5).unwrap(),
            Law::deterministic(1),
            Law::geometric(0.5).unwrap(),
            3,
        ),
    ];
    for (i, s) in cases.into_iter().enumerate() {
        let direct = histogram_of(&s.clone().with_seed(100 + i as u64).with_replicates(100_000), Route::Direct);
        let split = histogram_of(&s.with_seed(200 + i as u64).with_replicates(100_000), Route::Decomposed);
        let p = two_sample_chi2(&direct, &split).unwrap();
        assert!(p > 0.01, "scenario {i}: p = {p}");
    }
}

#[test]
fn restarted_paths_reproduce_conditional_law() {
    let s = scenario(bern(0.6), bern(0.3), bern(0.2), Law::deterministic(1), Law::deterministic(1), 4);
    let paths: Vec<Vec<u64>> = (0..300_000)
        .map(|i| simulate_path(&s, &mut ReplicateStream::new(7, i)).unwrap())
        .collect();
    let mut states: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for p in &paths {
        *states.entry((p[2], p[1])).or_default() += 1;
    }
    let (&(a, b), _) = states.iter().max_by_key(|(_, c)| **c).unwrap();
    let conditional: Vec<u64> = paths.iter().filter(|p| (p[2], p[1]) == (a, b)).map(|p| p[4]).collect();
    assert!(conditional.len() > 50_000);
    let restarted: Vec<u64> = (0..100_000)
        .map(|i| {
            let start = PathState { current: a, previous: b, time: 2 };
            simulate_from(start, 2, &s, &mut ReplicateStream::new(8, i)).unwrap().current
        })
        .collect();
    let p = two_sample_chi2(&Histogram::from_values(&conditional), &Histogram::from_values(&restarted)).unwrap();
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn exact_marginal_matches_simulation() {
    let s = scenario(
        bern(0.5),
        Law::deterministic(1),
        bern(0.3),
        Law::deterministic(2),
        Law::deterministic(1),
        3,
    )
    .with_replicates(1_000_000)
    .with_seed(3);
    let exact = exact_distribution(&s, 64).unwrap();
    assert!(exact.mass_deficit < 1e-15);
    let values = terminal_values(&s, Route::Direct, None).unwrap();
    let mut freq = vec![0.0; exact.marginal().len()];
    for v in values {
        freq[v as usize] += 1.0 / 1e6;
    }
    let tv: f64 = exact.marginal().iter().zip(&freq).map(|(p, q)| (p - q).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.005, "tv = {tv}");
}

#[test]
fn ensemble_mean_matches_forecast() {
    let cases = [
        scenario(bern(0.6), bern(0.3), bern(0.2), Law::deterministic(1), Law::deterministic(1), 5),
        scenario(
            Law::poisson(0.8).unwrap(),
            Law::poisson(0.4).unwrap(),
            Law::geometric(0.5).unwrap(),
            Law::poisson(3.0).unwrap(),
            Law::deterministic(0),
            5,
        ),
    ];
    for s in cases {
        for n in 1..=5 {
            let run = s.clone().with_horizon(n).with_replicates(1_000_000).with_seed(u64::from(n));
            let summary = simulate_ensemble(&run, None).unwrap();
            let (expected, _) = mean_forecast(&run, n).unwrap();
            let z = (summary.mean - expected) / summary.standard_error();
            assert!(z.abs() < 4.0, "n = {n}: mean {} vs {expected}, z = {z}", summary.mean);
        }
    }
}

#[test]
fn clan_means_follow_mk() {
    let (xi, eta) = (bern(0.7), bern(0.5));
    let seq = mk(0.7, 0.5, 6).unwrap();
    for k in 0..=6 {
        let n = 100_000u64;
        let draws: Vec<f64> = (0..n)
            .map(|i| simulate_clan(ClanKind::V0, k, &xi, &eta, &mut ReplicateStream::new(5, i)).unwrap() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let expected = seq.get(i64::from(k));
        if se == 0.0 {
            assert_eq!(mean, expected);
        } else {
            assert!(((mean - expected) / se).abs() < 4.0, "k = {k}: {mean} vs {expected}");
        }
    }
}

#[test]
fn clan_tail_prediction_tracks_simulation() {
    let law = Law::discrete_pareto(2.5).unwrap();
    let m = law.mean();
    let profile = HeavyProfile::new([Base::Xi, Base::Eta], 2.5, 3.0);
    let seq = mk(m, m, 2).unwrap();
    let (v0, _) = clan_tail(2, &profile, &seq, &mean_matrix(m, m).unwrap()).unwrap();
    let n = 1_000_000u64;
    let draws: Vec<u64> = (0..n)
        .map(|i| simulate_clan(ClanKind::V0, 2, &law, &law, &mut ReplicateStream::new(21, i)).unwrap())
        .collect();
    let laws = ScenarioSpec::new(law.clone(), law, Law::deterministic(0), Law::deterministic(1), Law::deterministic(0), 2);
    // ratios at 10 and 20 are still 1.5 and 1.3; the window starts at 40
    let mut windowed = 0;
    for x in [40.0, 80.0, 160.0, 320.0] {
        let count = draws.iter().filter(|&&v| v as f64 > x).count();
        if count < 50 {
            continue;
        }
        windowed += 1;
        let ratio = count as f64 / n as f64 / v0.evaluate(&laws, x).unwrap();
        assert!((0.7..=1.3).contains(&ratio), "x = {x}: ratio {ratio}");
    }
    assert!(windowed >= 2);
}
