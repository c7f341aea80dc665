use std::sync::Arc;

use aoi_sched::info_metrics::{freshness_curve, ChainModel, LossFunction, TimeSeriesDataset};
use aoi_sched::penalty::{PenaltyCurve, ServiceTimeDistribution};
use aoi_sched::policy::{PolicyRegistry, PolicySpec, SourceModel, System};
use aoi_sched::simulator::{replicate, SimConfig};
use aoi_sched::single_source::SingleSource;

fn delayed_series(len: usize, delay: usize) -> String {
    let mut v = vec![0u8];
    let mut s = 7u64;
    for _ in 1..len + delay {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
        let flip = (s >> 40) % 100 < 10;
        v.push(v.last().unwrap() ^ flip as u8);
    }
    let mut text = String::from("t,y,v1\n");
    for t in 0..len {
        text.push_str(&format!("{t},{},{}\n", v[t], v[t + delay]));
    }
    text
}

#[test]
fn data_to_schedule() {
    let data = TimeSeriesDataset::from_csv_reader(delayed_series(20_000, 3).as_bytes(), "series.csv", 1).unwrap();
    let curve = freshness_curve(&data, LossFunction::Log, 30).unwrap();
    assert_eq!(curve.at(3), 0.0);
    let penalty = PenaltyCurve::from_inference_curve(&curve).unwrap();
    assert!(!penalty.is_nondecreasing());

    let model = SingleSource::new(penalty, ServiceTimeDistribution::constant(1).unwrap());
    let sel = model.optimal_buffer_offset(5).unwrap();
    // the stale feature at offset 2 makes the delivered AoI equal the delay
    assert_eq!(sel.offset, 2);
    assert!(sel.beta < sel.roots[0]);

    let system = System::single(model, 5).unwrap();
    let policy = PolicyRegistry::with_defaults()
        .build(&system, &PolicySpec::named("selection_from_buffer"))
        .unwrap();
    let config = SimConfig {
        horizon: 20_000,
        ..SimConfig::default()
    };
    let agg = replicate(&system, policy.as_ref(), &config).unwrap();
    assert!((agg.average_error.mean - sel.beta).abs() < 1e-9);
}

#[test]
fn analytic_chain_matches_sampled_series() {
    let chain = ChainModel::symmetric_binary(0.1, 3).unwrap();
    let exact = freshness_curve(&chain, LossFunction::Brier, 6).unwrap();
    let data = TimeSeriesDataset::from_csv_reader(delayed_series(200_000, 3).as_bytes(), "series.csv", 1).unwrap();
    let sampled = freshness_curve(&data, LossFunction::Brier, 6).unwrap();
    for t in 0..=6 {
        assert!((exact.at(t) - sampled.at(t)).abs() < 0.02, "θ={t}");
    }
}

fn linear_source(service: ServiceTimeDistribution) -> SourceModel {
    SourceModel {
        model: Arc::new(SingleSource::new(PenaltyCurve::from_fn(80, |d| d as f64).unwrap(), service)),
        weight: 1.0,
        buffer: 1,
    }
}

#[test]
fn maf_and_whittle_agree_on_identical_linear_sources() {
    let unit = ServiceTimeDistribution::constant(1).unwrap();
    let system = System::new(vec![linear_source(unit.clone()), linear_source(unit)]).unwrap();
    let registry = PolicyRegistry::with_defaults();
    let config = SimConfig {
        horizon: 50_000,
        replications: 4,
        ..SimConfig::default()
    };
    let run = |name: &str| {
        let p = registry.build(&system, &PolicySpec::named(name)).unwrap();
        replicate(&system, p.as_ref(), &config).unwrap().average_error
    };
    let (maf, gaw) = (run("maf"), run("whittle_gaw"));
    assert!((maf.mean - gaw.mean).abs() <= 3.0 * (maf.stderr + gaw.stderr) + 1e-9);
}

#[test]
fn stderr_shrinks_with_horizon() {
    let system = System::new(vec![linear_source(ServiceTimeDistribution::geometric(0.3, 40).unwrap())]).unwrap();
    let policy = PolicyRegistry::with_defaults()
        .build(&system, &PolicySpec::named("zero_wait"))
        .unwrap();
    let mut config = SimConfig {
        horizon: 40_000,
        replications: 40,
        seed: 11,
        ..SimConfig::default()
    };
    let short = replicate(&system, policy.as_ref(), &config).unwrap().average_error;
    config.horizon = 2 * (40_000 - config.resolved_warmup(&system)) + config.resolved_warmup(&system);
    let long = replicate(&system, policy.as_ref(), &config).unwrap().average_error;
    let ratio = long.stderr / short.stderr;
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.3 * 0.5f64.sqrt(), "ratio {ratio}");
}
