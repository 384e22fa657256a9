mod common;

use common::*;
use elastic_imaging::framelets::*;
use elastic_imaging::hankel::{lift, unlift};
use elastic_imaging::pooling::{PoolingFrame, PoolingKind};
use elastic_imaging::rng::CounterRng;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, rng: &mut CounterRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn orthogonal(n: usize, rng: &mut CounterRng) -> DMatrix<f64> {
    random_matrix(n, n, rng).qr().q()
}

#[test]
fn perfect_reconstruction_with_svd_bases() {
    let mut rng = CounterRng::new(1);
    for trial in 0..100 {
        let r = 1 + trial % 5;
        let f = real_low_rank(64, r, &mut rng);
        let b = FrameletBasis::from_svd(&f, 8, r).unwrap();
        let back = reconstruct(&coefficients(&f, &b).unwrap(), &b).unwrap();
        assert!(rel_err(&back, &f) <= 1e-9, "trial {trial}");
    }
}

#[test]
fn outside_the_budget_reconstruction_is_a_projection() {
    let mut rng = CounterRng::new(2);
    let f = normals(32, &mut rng);
    let low = real_low_rank(32, 2, &mut rng);
    let b = FrameletBasis::from_svd(&low, 6, 2).unwrap();
    let out = reconstruct(&coefficients(&f, &b).unwrap(), &b).unwrap();
    let proj = &b.psi * b.psi.transpose();
    let oracle = unlift(&(lift(&f, 6).unwrap().matrix * proj));
    assert!(rel_err(&out, &oracle) <= 1e-12);
    assert!(rel_err(&out, &f) > 0.1);
}

#[test]
fn zero_coefficients_give_zero() {
    let mut rng = CounterRng::new(3);
    let b = FrameletBasis::from_svd(&normals(16, &mut rng), 4, 2).unwrap();
    let c = FrameletCoefficients { values: DMatrix::zeros(16, 2) };
    assert!(reconstruct(&c, &b).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn lifted_and_unlifted_paths_agree() {
    let mut rng = CounterRng::new(4);
    for _ in 0..100 {
        let q = 8 + rng.range_inclusive(0, 24) as usize;
        let p = 1 + rng.range_inclusive(0, (q - 2) as u64) as usize;
        let r = 1 + rng.range_inclusive(0, p as u64 - 1) as usize;
        let g = normals(q, &mut rng);
        let b = FrameletBasis::new_unchecked(
            random_matrix(q, q, &mut rng),
            random_matrix(q, q, &mut rng),
            random_matrix(p, r, &mut rng),
            random_matrix(p, r, &mut rng),
        )
        .unwrap();
        let a = coefficients(&g, &b).unwrap().values;
        let c = coefficients_unlifted(&g, &b).unwrap().values;
        assert!((&a - &c).amax() <= 1e-12 * a.amax().max(1.0));
        let x = reconstruct(&FrameletCoefficients { values: a.clone() }, &b).unwrap();
        let y = reconstruct_unlifted(&FrameletCoefficients { values: a }, &b).unwrap();
        assert!(rel_err(&x, &y) <= 1e-12);
    }
}

#[test]
fn basis_matrices_expand_the_lifting() {
    let mut rng = CounterRng::new(5);
    let (q, p) = (12, 4);
    let phi = orthogonal(q, &mut rng);
    let psi = orthogonal(p, &mut rng);
    let b = FrameletBasis::new(phi.clone(), phi, psi.clone(), psi).unwrap();
    let f = normals(q, &mut rng);
    let c = coefficients(&f, &b).unwrap().values;
    let mut sum = DMatrix::zeros(q, p);
    for k in 0..q {
        for l in 0..p {
            let bkl = basis_matrices(&b, k, l).unwrap();
            assert!((bkl.norm() - 1.0).abs() < 1e-12);
            let sv = bkl.singular_values();
            assert_eq!(sv.iter().filter(|&&s| s > 1e-12).count(), 1);
            // with orthonormal bases the coefficient is the Frobenius pairing
            let pairing = bkl.dot(&lift(&f, p).unwrap().matrix);
            assert!((pairing - c[(k, l)]).abs() < 1e-12);
            sum += bkl * c[(k, l)];
        }
    }
    assert!((sum - lift(&f, p).unwrap().matrix).amax() <= 1e-10);
}

#[test]
fn relu_algebra() {
    let mut rng = CounterRng::new(6);
    let g = normals(20, &mut rng);
    let b = FrameletBasis::new_unchecked(
        DMatrix::identity(20, 20),
        DMatrix::identity(20, 20),
        random_matrix(5, 3, &mut rng),
        random_matrix(5, 3, &mut rng),
    )
    .unwrap();
    let c = coefficients(&g, &b).unwrap().values;
    let pos = relu_coefficients(&g, &b).unwrap().values;
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let neg = relu_coefficients(&neg_g, &b).unwrap().values;
    assert!(pos.iter().all(|&v| v >= 0.0));
    assert!((&pos + &neg - c.abs()).amax() < 1e-12);
    assert!(pos.norm() <= c.norm());
    // nonnegative signal, nonnegative filters: ReLU is inactive
    let gp: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let bp = FrameletBasis { psi: b.psi.abs(), ..b.clone() };
    assert_eq!(relu_coefficients(&gp, &bp).unwrap(), coefficients(&gp, &bp).unwrap());
}

#[test]
fn self_dual_unet_frame_breaks_reconstruction() {
    let mut rng = CounterRng::new(7);
    let q = 16;
    let (phi, _) = PoolingFrame::new(PoolingKind::Unet, q, 1).unwrap().matrices();
    let eye = DMatrix::identity(4, 4);
    let b = FrameletBasis::new_unchecked(phi.clone(), phi, eye.clone(), eye).unwrap();
    for _ in 0..10 {
        let f = normals(q, &mut rng);
        let back = reconstruct(&coefficients(&f, &b).unwrap(), &b).unwrap();
        assert!(rel_err(&back, &f) >= 0.1);
    }
    let (phi, phi_dual) = PoolingFrame::new(PoolingKind::DualFrame, q, 1).unwrap().matrices();
    let eye = DMatrix::identity(4, 4);
    let b = FrameletBasis::new(phi, phi_dual, eye.clone(), eye).unwrap();
    let f = normals(q, &mut rng);
    assert!(rel_err(&reconstruct(&coefficients(&f, &b).unwrap(), &b).unwrap(), &f) <= 1e-12);
}

#[test]
fn one_layer_network_is_the_framelet_pair() {
    let mut rng = CounterRng::new(8);
    let q = 24;
    let g = normals(q, &mut rng);
    let b = FrameletBasis::new_unchecked(
        DMatrix::identity(q, q),
        DMatrix::identity(q, q),
        random_matrix(5, 3, &mut rng),
        random_matrix(5, 3, &mut rng),
    )
    .unwrap();
    let layer = LayerSpec::from_basis(&b);
    let pool = [Pooling::identity(q)];
    let net = multilayer_forward(&g, std::slice::from_ref(&layer), &pool, true).unwrap();
    let direct = reconstruct(&relu_coefficients(&g, &b).unwrap(), &b).unwrap();
    assert!(rel_err(&net, &direct) <= 1e-12);
    let zero = multilayer_forward(&vec![0.0; q], &[layer], &pool, true).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
}

#[test]
fn two_layer_nested_svd_round_trip() {
    let mut rng = CounterRng::new(9);
    let (q, p0, p1, r) = (32, 6, 4, 4);
    let f = real_low_rank(q, r, &mut rng);
    let b0 = FrameletBasis::from_svd(&f, p0, r).unwrap();
    let l0 = LayerSpec::from_basis(&b0);
    // the first-layer channels are filtered copies of f and share its rank
    let c0 = lift(&f, p0).unwrap().matrix * &b0.psi;
    let mut stacked = DMatrix::zeros(q, p1 * r);
    for c in 0..r {
        let ch: Vec<f64> = c0.column(c).iter().cloned().collect();
        stacked.view_mut((0, c * p1), (q, p1)).copy_from(&lift(&ch, p1).unwrap().matrix);
    }
    let v1 = right_singular_vectors(&stacked, r);
    let l1 = LayerSpec::from_stacked(&v1, &v1, r);
    let out = multilayer_forward(&f, &[l0, l1], &[Pooling::identity(q), Pooling::identity(q)], false).unwrap();
    assert!(rel_err(&out, &f) <= 1e-8, "{}", rel_err(&out, &f));
}

#[test]
fn linear_cascade_equals_single_layer() {
    let mut rng = CounterRng::new(10);
    let q = 40;
    let mk = |cin: usize, cout: usize, p: usize, rng: &mut CounterRng| {
        LayerSpec::new(
            (0..p).map(|_| random_matrix(cin, cout, rng)).collect(),
            (0..p).map(|_| random_matrix(cout, cin, rng)).collect(),
        )
        .unwrap()
    };
    let layers = vec![mk(1, 3, 4, &mut rng), mk(3, 2, 3, &mut rng), mk(2, 2, 5, &mut rng)];
    let g = normals(q, &mut rng);
    let pools: Vec<Pooling> = (0..3).map(|_| Pooling::identity(q)).collect();
    let net = multilayer_forward(&g, &layers, &pools, false).unwrap();
    let cas = cascade_filters(&layers).unwrap();
    assert_eq!(cas.encoder.len(), 4 + 3 + 5 - 2);
    let single = cas.apply(&g).unwrap();
    assert!(rel_err(&single, &net) <= 1e-10);
}

#[test]
fn cascade_of_scalar_layers_is_polynomial_product() {
    let a = [1.0, 2.0, -1.0];
    let bt = [0.5, 0.0, 3.0, 1.0];
    let layer = |t: &[f64]| {
        LayerSpec::new(t.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(), t.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect())
            .unwrap()
    };
    let cas = cascade_filters(&[layer(&a), layer(&bt)]).unwrap();
    let taps: Vec<f64> = cas.encoder.iter().map(|m| m[(0, 0)]).collect();
    // hand-expanded (1 + 2z - z^2)(0.5 + 3z^2 + z^3)
    assert_eq!(taps, vec![0.5, 1.0, 2.5, 7.0, -1.0, -1.0]);
    let delta = cascade_filters(&[layer(&[1.0]), layer(&bt)]).unwrap();
    assert_eq!(delta.encoder.iter().map(|m| m[(0, 0)]).collect::<Vec<_>>(), bt.to_vec());
    let single = cascade_filters(&[layer(&a)]).unwrap();
    assert_eq!(single.encoder.iter().map(|m| m[(0, 0)]).collect::<Vec<_>>(), a.to_vec());
}

#[test]
fn broken_channel_chain_rejected() {
    let a = LayerSpec::new(vec![DMatrix::zeros(1, 2); 2], vec![DMatrix::zeros(2, 1); 2]).unwrap();
    let b = LayerSpec::new(vec![DMatrix::zeros(3, 1); 2], vec![DMatrix::zeros(1, 3); 2]).unwrap();
    let pools = [Pooling::identity(8), Pooling::identity(8)];
    assert!(matches!(
        multilayer_forward(&[0.0; 8], &[a, b], &pools, false),
        Err(elastic_imaging::Error::ChannelMismatch(_))
    ));
}

proptest! {
    #[test]
    fn relu_output_is_nonnegative(g in prop::collection::vec(-5.0f64..5.0, 16), seed in 0u64..1000) {
        let mut rng = CounterRng::new(seed);
        let b = FrameletBasis::new_unchecked(
            DMatrix::identity(16, 16), DMatrix::identity(16, 16),
            random_matrix(4, 2, &mut rng), random_matrix(4, 2, &mut rng)).unwrap();
        prop_assert!(relu_coefficients(&g, &b).unwrap().values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn basis_json_round_trip(seed in 0u64..1000) {
        let mut rng = CounterRng::new(seed);
        let f = normals(12, &mut rng);
        let b = FrameletBasis::from_svd(&f, 4, 3).unwrap();
        prop_assert_eq!(FrameletBasis::from_json(&b.to_json().unwrap()).unwrap(), b);
    }
}
