mod common;

use common::*;
use elastic_imaging::pooling::*;
use elastic_imaging::rng::CounterRng;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn dual_frame_inverts_on_random_lengths() {
    let mut rng = CounterRng::new(1);
    for _ in 0..1000 {
        let q = 2 * rng.range_inclusive(2, 128) as usize;
        let x = normals(q, &mut rng);
        let (skip, coeff) = unet_analysis(&x).unwrap();
        let back = dual_frame_synthesis(&skip, &coeff).unwrap();
        let err: Vec<f64> = back.iter().zip(&x).map(|(a, b)| a - b).collect();
        assert!(max_abs(&err) <= 1e-12 * max_abs(&x), "q={q}");
    }
}

#[test]
fn self_dual_unet_doubles_constants() {
    for q in [4, 16, 64] {
        let x = vec![0.37; q];
        let (skip, coeff) = unet_analysis(&x).unwrap();
        let out = unet_synthesis(&skip, &coeff).unwrap();
        for v in out {
            assert!((v - 0.74).abs() < 1e-15);
        }
    }
}

#[test]
fn pooled_signal_matches_pair_averages() {
    let x = [1.0, 3.0, -2.0, 4.0];
    let y = avg_pool(&x).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!((y[0] - 4.0 * s).abs() < 1e-15 && (y[1] - 2.0 * s).abs() < 1e-15);
    assert!(avg_pool(&[1.0, 2.0, 3.0]).is_err());
}

/// `Phi_dual Phi^T` checked entry by entry against the identity.
fn explicit_defect(frame: &PoolingFrame) -> f64 {
    let (phi, dual) = frame.matrices();
    let prod = &dual * phi.transpose();
    (prod - DMatrix::identity(frame.q, frame.q)).amax()
}

#[test]
fn frame_conditions_by_kind() {
    for q in [8, 32, 64] {
        let id = PoolingFrame::new(PoolingKind::Identity, q, 0).unwrap();
        let unet = PoolingFrame::new(PoolingKind::Unet, q, 1).unwrap();
        let dual = PoolingFrame::new(PoolingKind::DualFrame, q, 1).unwrap();
        assert_eq!(frame_defect(&id), 0.0);
        assert!(frame_defect(&dual) <= 1e-12);
        assert!(explicit_defect(&dual) <= 1e-12);
        // the self-dual U-Net doubles the lowpass band
        assert!((frame_defect(&unet) - 1.0).abs() <= 1e-12);
        assert!(explicit_defect(&unet) >= 0.1);
    }
}

#[test]
fn nested_dual_frames_stay_exact() {
    let mut rng = CounterRng::new(2);
    for depth in 1..=4 {
        let frame = PoolingFrame::new(PoolingKind::DualFrame, 64, depth).unwrap();
        assert_eq!(frame.coeff_len(), 64 + (1..=depth).map(|d| 64 >> d).sum::<usize>());
        assert!(explicit_defect(&frame) <= 1e-12, "depth {depth}");
        let x = normals(64, &mut rng);
        let back = frame.inverse(&frame.forward(&x).unwrap()).unwrap();
        assert!(rel_err(&back, &x) <= 1e-13);
        let nested_unet = PoolingFrame::new(PoolingKind::Unet, 64, depth).unwrap();
        assert!(explicit_defect(&nested_unet) >= 0.1);
    }
}

#[test]
fn frame_construction_errors() {
    assert!(PoolingFrame::new(PoolingKind::Unet, 12, 3).is_err());
    assert!(PoolingFrame::new(PoolingKind::DualFrame, 16, 0).is_err());
    let f = PoolingFrame::new(PoolingKind::DualFrame, 16, 1).unwrap();
    assert!(f.forward(&[0.0; 8]).is_err());
    assert!(f.inverse(&[0.0; 16]).is_err());
}

proptest! {
    #[test]
    fn unpool_is_adjoint_of_pool(x in prop::collection::vec(-5.0f64..5.0, 16), y in prop::collection::vec(-5.0f64..5.0, 8)) {
        let lhs: f64 = avg_pool(&x).unwrap().iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(avg_unpool(&y)).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn dual_frame_perfect_reconstruction(x in prop::collection::vec(-1e3f64..1e3, 32)) {
        let frame = PoolingFrame::new(PoolingKind::DualFrame, 32, 2).unwrap();
        let back = frame.inverse(&frame.forward(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-12 * 1e3);
        }
    }
}
