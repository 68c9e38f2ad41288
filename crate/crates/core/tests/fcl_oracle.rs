use factorlab::factor::QuantileBand;
use factorlab::panel::IndicatorId;
use factorlab::pipeline::{build_standard_factor, estimate, BuiltFactor, MarketData, Periods};
use factorlab::riskmetrics::interfactor_correlation;
use factorlab::synth::{generate_market, planted_fcl_oracle, LoadingProfile, PlantedFactor, SyntheticMarket, SynthConfig};

const ID: IndicatorId = IndicatorId::Remuneration;

/// Weak market and no sector shocks: the only common mode left after beta
/// neutralization is the planted factor.
fn market(factor_vol: f64, seed: u64) -> SyntheticMarket {
    let cfg = SynthConfig {
        n_assets: 300,
        n_days: 3000,
        market_vol: 0.05,
        sector_vol: 0.0,
        planted: vec![PlantedFactor::new(ID, LoadingProfile::decaying(1.0), factor_vol)],
        seed,
        ..SynthConfig::default()
    };
    generate_market(&cfg).unwrap()
}

fn build(m: &SyntheticMarket, id: IndicatorId, band: QuantileBand, noise_seed: Option<u64>) -> BuiltFactor {
    let data = MarketData::from_synthetic(m);
    let periods = Periods::default();
    let est = estimate(&data.panel, &periods);
    build_standard_factor(&data, &est, id, band, &periods, noise_seed).unwrap()
}

fn measured(m: &SyntheticMarket, band: QuantileBand) -> f64 {
    build(m, ID, band, None).fcl.settled_mean().unwrap()
}

#[test]
fn measured_fcl_tracks_the_oracle() {
    for vol in [0.01, 0.02, 0.04] {
        for seed in 0..3 {
            let m = market(vol, seed);
            let got = measured(&m, QuantileBand::Q1);
            let want = planted_fcl_oracle(&m, ID, QuantileBand::Q1).unwrap();
            assert!((got / want - 1.0).abs() < 0.1, "vol {vol} seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn zero_loading_gives_unit_fcl_and_strength_orders_fcl() {
    let mut previous = 0.0;
    for vol in [0.0, 0.01, 0.02, 0.04] {
        let mut v: Vec<f64> = (0..3).map(|s| measured(&market(vol, s), QuantileBand::Q1)).collect();
        v.sort_by(f64::total_cmp);
        let median = v[1];
        if vol == 0.0 {
            assert!((median - 1.0).abs() < 0.1, "{v:?}");
        }
        assert!(median > previous, "vol {vol}: {median} after {previous}");
        previous = median;
    }
}

#[test]
fn noise_factor_sits_at_one() {
    for seed in 0..10 {
        let m = market(0.03, 100 + seed);
        let f = build(&m, IndicatorId::Noise, QuantileBand::Q1, Some(seed)).fcl.settled_mean().unwrap();
        assert!((f - 1.0).abs() < 0.1, "seed {seed}: {f}");
    }
}

#[test]
fn extreme_quantiles_are_the_most_sensitive() {
    for seed in 0..3 {
        let m = market(0.04, 200 + seed);
        let q: Vec<BuiltFactor> = [QuantileBand::Q1, QuantileBand::Q2, QuantileBand::Q3]
            .into_iter()
            .map(|b| build(&m, ID, b, None))
            .collect();
        let f: Vec<f64> = q.iter().map(|b| b.fcl.settled_mean().unwrap()).collect();
        assert!(f[0] > f[1] && f[1] > f[2], "seed {seed}: {f:?}");
        let corr = interfactor_correlation(&[q[0].returns.clone(), q[1].returns.clone(), q[2].returns.clone()], 20).unwrap();
        let ids: Vec<String> = q.iter().map(|b| b.returns.id()).collect();
        let c12 = corr.get(&ids[0], &ids[1]).unwrap();
        let c13 = corr.get(&ids[0], &ids[2]).unwrap();
        assert!(c12 > c13, "seed {seed}: corr(Q1,Q2) {c12} vs corr(Q1,Q3) {c13}");
    }
}

/// The middle band carries no planted loading, so its FCL cannot be told
/// apart from the noise factor's.
#[test]
fn middle_band_is_indistinguishable_from_noise() {
    let seeds = 10;
    let mut diffs = Vec::new();
    for seed in 0..seeds {
        let m = market(0.04, 300 + seed);
        let q3 = build(&m, ID, QuantileBand::Q3, None).fcl.settled_mean().unwrap();
        let noise = build(&m, IndicatorId::Noise, QuantileBand::Q3, Some(seed)).fcl.settled_mean().unwrap();
        diffs.push(q3 - noise);
    }
    let k = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / k;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    let t = mean / (sd / k.sqrt());
    assert!(t.abs() < 3.0, "mean difference {mean}, t {t}, {diffs:?}");
}
