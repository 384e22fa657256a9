mod common;

use common::*;
use elastic_imaging::pipeline::*;
use elastic_imaging::rng::CounterRng;

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
    }
    assert!("wtr+magic".parse::<Method>().is_err());
}

#[test]
fn partial_configs_fill_defaults() {
    let cfg: PipelineConfig = serde_json::from_str(r#"{"grid": {"n_x": 64}, "method": "wtr+tv"}"#).unwrap();
    assert_eq!(cfg.grid.n_x, 64);
    assert_eq!(cfg.grid.beta, GridConfig::default().beta);
    assert_eq!(cfg.detectors, 64);
    assert_eq!(cfg.method, Method::WtrTv);
    assert!(serde_json::from_str::<PipelineConfig>(r#"{"detector": 3}"#).is_err());

    let seeded = PipelineConfig::default().with_seed(7);
    assert_eq!((seeded.phantom.seed, seeded.noise_seed), (7, 8));
}

#[test]
fn framelet_filter_keeps_low_rank_signals() {
    let mut rng = CounterRng::new(11);
    for r in [1, 2, 3, 4] {
        let f = real_low_rank(64, r, &mut rng);
        let cfg = FrameletConfig { pencil: 8, rank: r, ..Default::default() };
        let out = framelet_filter(&f, &cfg).unwrap();
        assert!(rel_err(&out, &f) < 1e-10, "rank {r}");
    }
    // one filter cannot hold two cosines
    let f = real_low_rank(64, 4, &mut rng);
    let out = framelet_filter(&f, &FrameletConfig { pencil: 8, rank: 1, ..Default::default() }).unwrap();
    assert!(rel_err(&out, &f) > 0.1);
}

#[test]
fn framelet_filter_rejects_long_pencils() {
    assert!(framelet_filter(&[1.0; 8], &FrameletConfig { pencil: 8, rank: 2, ..Default::default() }).is_err());
}

#[test]
fn small_pipeline_is_reproducible() {
    let cfg = PipelineConfig {
        grid: GridConfig { n_x: 64, pml_width: 8, ..Default::default() },
        detectors: 16,
        times: 32,
        snr_db: Some(20.0),
        ..Default::default()
    }
    .with_seed(4);
    let a = run_pipeline(&cfg).unwrap();
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.reconstruction[0].data, b.reconstruction[0].data);
    assert!(a.report.ncc > 0.5, "ncc {}", a.report.ncc);
    for f in a.reconstruction.iter().chain([&a.truth]) {
        assert!(f.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
