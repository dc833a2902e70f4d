//! Nonce-search trial counts follow a geometric law with the level's
//! per-hash success probability.

use tbict_core::consensus::{mine, DifficultyLevel};
use tbict_core::identity::NodeId;
use tbict_core::ledger::Chain;

/// Upper 0.1% point of chi-square with 7 degrees of freedom.
const CHI2_7DF_999: f64 = 24.322;

fn trials(level: DifficultyLevel, n: u64) -> Vec<u64> {
    let chain = Chain::new();
    (0..n)
        .map(|ts| {
            let t = chain.next_template(0, vec![], NodeId::default(), ts);
            mine(chain.blocks(), t, level, 0, None).unwrap().trials
        })
        .collect()
}

#[test]
fn easy_trials_are_geometric() {
    let p = DifficultyLevel::Easy.success_probability();
    let samples = trials(DifficultyLevel::Easy, 4_000);
    // Bins of trial counts: [1,4], [5,8], [9,12], [13,16], [17,24], [25,32], [33,48], [49,inf).
    let edges = [0u64, 4, 8, 12, 16, 24, 32, 48, u64::MAX];
    let cdf = |k: u64| if k == u64::MAX { 1.0 } else { 1.0 - (1.0 - p).powi(k as i32) };
    let n = samples.len() as f64;
    let mut chi2 = 0.0;
    for w in edges.windows(2) {
        let observed = samples.iter().filter(|&&t| t > w[0] && t <= w[1]).count() as f64;
        let expected = n * (cdf(w[1]) - cdf(w[0]));
        chi2 += (observed - expected).powi(2) / expected;
    }
    assert!(chi2 < CHI2_7DF_999, "chi-square {chi2:.2}");

    let mean = samples.iter().sum::<u64>() as f64 / n;
    // Geometric mean 16, standard error sqrt(240 / 4000) ~ 0.25.
    assert!((mean - 1.0 / p).abs() < 1.0, "mean {mean}");
}

#[test]
fn hard_level_mean_is_near_65536() {
    let samples = trials(DifficultyLevel::Hard, 40);
    let mean = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
    // 40 geometric draws: relative standard error ~ 16%.
    assert!((mean / 65_536.0 - 1.0).abs() < 0.6, "mean {mean}");
}
