use elastic_imaging::grid::ScalarField;
use elastic_imaging::metrics::*;
use elastic_imaging::rng::CounterRng;
use proptest::prelude::*;

fn ramp(n: usize) -> ScalarField {
    let data = (0..n * n).map(|i| ((i / n) + (i % n)) as f64 / (2 * (n - 1)) as f64).collect();
    ScalarField::new(n, n, data).unwrap()
}

#[test]
fn printed_psnr_by_hand() {
    // unit-peak reconstruction, truth offset by 0.1 everywhere:
    // ||diff||_2 = sqrt(256 * 0.01) = 1.6, so PSNR = 20 log10(256 / 1.6)
    let rec = ramp(16);
    let truth = ScalarField::new(16, 16, rec.data.iter().map(|v| v + 0.1).collect()).unwrap();
    let expected = 20.0 * 160f64.log10();
    let got = psnr(&rec, &truth).unwrap();
    assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    // conventional: peak 1.1, mse 0.01
    let conv = psnr_conventional(&rec, &truth).unwrap();
    assert!((conv - 10.0 * (1.21f64 / 0.01).log10()).abs() <= 1e-12 * conv);
}

#[test]
fn psnr_falls_as_noise_grows() {
    let truth = ramp(32);
    let mut last = f64::INFINITY;
    for sigma in [0.01, 0.03, 0.1, 0.3] {
        let mut rng = CounterRng::new(5);
        let noisy = ScalarField::new(32, 32, truth.data.iter().map(|v| v + sigma * rng.normal()).collect()).unwrap();
        let p = psnr_conventional(&noisy, &truth).unwrap();
        assert!(p < last);
        last = p;
    }
}

#[test]
fn identical_and_mismatched_images_are_errors() {
    let a = ramp(8);
    assert!(psnr(&a, &a).is_err());
    assert!(psnr(&a, &ramp(9)).is_err());
    assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn ncc_is_affine_invariant() {
    let a = ramp(10);
    let b: Vec<f64> = a.data.iter().map(|v| 3.0 * v - 2.0).collect();
    assert!((ncc(&a.data, &b) - 1.0).abs() < 1e-12);
    let c: Vec<f64> = a.data.iter().map(|v| -v).collect();
    assert!((ncc(&a.data, &c) + 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn ssim_is_symmetric(a in prop::collection::vec(0.0f64..1.0, 36), b in prop::collection::vec(0.0f64..1.0, 36)) {
        let fa = ScalarField::new(6, 6, a).unwrap();
        let fb = ScalarField::new(6, 6, b).unwrap();
        let (s1, s2) = (ssim(&fa, &fb, 1.0).unwrap(), ssim(&fb, &fa, 1.0).unwrap());
        prop_assert!((s1 - s2).abs() < 1e-14);
        prop_assert!(s1 <= 1.0 + 1e-12);
    }

    #[test]
    fn normalized_values_span_unit_interval(v in prop::collection::vec(-50.0f64..50.0, 2..50)) {
        let u = normalize_unit(&v);
        prop_assert!(u.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
