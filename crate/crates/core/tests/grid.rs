use elastic_imaging::grid::*;
use proptest::prelude::*;

#[test]
fn grid_json_round_trips() {
    let g = make_grid(4.0, 128, 2.0, 64, 1.0, 1.0, 16).unwrap();
    assert_eq!(GridSpec::from_json(&g.to_json().unwrap()).unwrap(), g);
    assert_eq!(g.q(), g.crop().len * g.crop().len);
}

#[test]
fn field_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_grid(4.0, 32, 2.0, 32, 1.0, 1.0, 4).unwrap();
    let f = ScalarField::from_fn(&g, |x, y| x * y.sin());
    let path = dir.path().join("f.efd");
    write_field(&f, &path).unwrap();
    assert_eq!(read_field(&path).unwrap(), f);
}

#[test]
fn truncated_bytes_are_rejected() {
    let f = ScalarField::zeros(4, 5);
    let bytes = encode_field(&f);
    assert!(decode_field(&bytes[..bytes.len() - 3]).is_err());
}

proptest! {
    #[test]
    fn encode_decode_is_lossless(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = elastic_imaging::rng::CounterRng::new(seed);
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.normal() * 1e3).collect();
        let f = ScalarField::new(rows, cols, data).unwrap();
        let back = decode_field(&encode_field(&f)).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn crop_round_trips(exp in 3u32..=7, beta in 2.5f64..6.0) {
        let n = 1usize << exp;
        let g = make_grid(beta, n, 2.0, 64, 1.0, 1.0, 1).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x + 10.0 * y);
        let img = field_to_image(&f, &g).unwrap();
        prop_assert_eq!(img.len(), g.q());
        let embedded = image_to_field(&img, &g).unwrap();
        prop_assert_eq!(field_to_image(&embedded, &g).unwrap(), img);
        // embedding keeps the window and zeroes the rest
        let c = g.crop();
        for (i, (e, v)) in embedded.data.iter().zip(&f.data).enumerate() {
            let (r, col) = (i / n, i % n);
            let inside = (c.row0..c.row0 + c.len).contains(&r) && (c.col0..c.col0 + c.len).contains(&col);
            prop_assert_eq!(*e, if inside { *v } else { 0.0 });
        }
    }
}
