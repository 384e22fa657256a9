mod common;

use common::*;
use elastic_imaging::elastic::{DetectorArray, MeasurementSet};
use elastic_imaging::phantoms::*;

#[test]
fn supports_stay_inside_the_disc() {
    let g = small_grid();
    let r = support_radius(&g);
    let n = g.n_x;
    let (mut zeros, mut ones) = (0usize, 0usize);
    for seed in 0..1000 {
        let p = random_phantom(seed, &g).unwrap();
        for (i, &v) in p.image.data.iter().enumerate() {
            if v != 0.0 {
                assert!(g.coord(i % n).hypot(g.coord(i / n)) <= r, "seed {seed}");
            }
            zeros += (v == 0.0) as usize;
            ones += (v == 1.0) as usize;
        }
        assert!(p.ellipses.iter().all(|e| e.reach() <= r));
    }
    assert!(zeros > 0 && ones >= 1000);
}

#[test]
fn seeds_give_different_phantoms() {
    let g = small_grid();
    let a = random_phantom(5, &g).unwrap();
    let b = random_phantom(6, &g).unwrap();
    assert_ne!(a.image, b.image);
    assert_eq!(a, random_phantom(5, &g).unwrap());
}

#[test]
fn shepp_logan_levels_by_region() {
    // raw levels already span [0, 1]: skull 1, brain 0.2, ventricles 0, bright blob 0.3
    let g = reference_grid();
    let p = shepp_logan(&g, 0.9).unwrap();
    let n = g.n_x;
    let at = |x: f64, y: f64| {
        let j = |c: f64| ((c + 0.5 * g.beta) / g.h_x).round() as usize;
        p.image.data[j(y) * n + j(x)]
    };
    let cases = [((0.0, 0.0), 0.2), ((0.0, 0.8125), 1.0), ((0.0, 0.3125), 0.3), ((-0.1875, 0.0), 0.0), ((0.0, 0.9), 0.0)];
    for ((x, y), want) in cases {
        assert!((at(x, y) - want).abs() < 1e-12, "({x}, {y}): {} vs {want}", at(x, y));
    }
    assert!(shepp_logan(&g, 1.2).is_err());
}

#[test]
fn noise_reaches_the_requested_snr() {
    let g = reference_grid();
    let det = DetectorArray::uniform(128, 64, &g).unwrap();
    let traces: Vec<f64> = (0..2 * 128 * 64).map(|i| (0.01 * i as f64).sin() + 0.3).collect();
    let clean = MeasurementSet::new(det, traces).unwrap();
    assert!(clean.traces.len() >= 10_000);
    let power = clean.traces.iter().map(|v| v * v).sum::<f64>() / clean.traces.len() as f64;
    for snr in [0.0, 10.0, 20.0, 30.0] {
        let noisy = add_noise(&clean, snr, 3).unwrap();
        let noise: f64 =
            noisy.traces.iter().zip(&clean.traces).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / clean.traces.len() as f64;
        let measured = 10.0 * (power / noise).log10();
        assert!((measured - snr).abs() <= 0.2, "{snr} dB requested, {measured} measured");
    }
    assert_eq!(add_noise(&clean, f64::INFINITY, 3).unwrap(), clean);
    assert!(add_noise(&MeasurementSet::zeros(clean.detectors.clone()), 10.0, 1).is_err());
}
