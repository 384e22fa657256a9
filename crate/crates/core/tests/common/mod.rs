//! Builders shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use elastic_imaging::grid::{make_grid, GridSpec, ScalarField};
use elastic_imaging::learning::{Init, TrainConfig, TrainingPair};
use elastic_imaging::rng::CounterRng;
use elastic_imaging::sensing::{null_space_probe, SensingMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn reference_grid() -> GridSpec {
    make_grid(4.0, 128, 2.0, 64, 1.0, 1.0, 16).unwrap()
}

pub fn small_grid() -> GridSpec {
    make_grid(4.0, 64, 2.0, 64, 1.0, 1.0, 8).unwrap()
}

/// Gaussian bump cut off before the edge of the admissible support.
pub fn bump(grid: &GridSpec, cx: f64, cy: f64, sigma: f64, amp: f64) -> ScalarField {
    let cut = 1.0 - 2.0 * grid.h_x;
    ScalarField::from_fn(grid, |x, y| {
        if x.hypot(y) >= cut {
            0.0
        } else {
            amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
        }
    })
}

pub fn normals(n: usize, rng: &mut CounterRng) -> Vec<f64> {
    (0..n).map(|_| rng.normal()).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

/// `r` distinct frequencies on `[0, 2 pi)` at least `gap` apart, with unit-modulus
/// random-phase coefficients.
pub fn random_exponentials(r: usize, gap: f64, rng: &mut CounterRng) -> (Vec<f64>, Vec<Complex64>) {
    let mut freqs: Vec<f64> = Vec::with_capacity(r);
    while freqs.len() < r {
        let w = rng.uniform(0.0, 2.0 * PI);
        let circ = |a: f64, b: f64| {
            let d = (a - b).abs();
            d.min(2.0 * PI - d)
        };
        if freqs.iter().all(|&v| circ(v, w) >= gap) {
            freqs.push(w);
        }
    }
    let coeffs = (0..r).map(|_| Complex64::from_polar(rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * PI))).collect();
    (freqs, coeffs)
}

/// Real periodic signal of exact wrap-around Hankel rank `r`: cosines on
/// distinct DFT bins (rank 2 each) plus, for odd `r`, one of the real bins
/// `0` or `Q/2` (rank 1).
pub fn real_low_rank(q: usize, r: usize, rng: &mut CounterRng) -> Vec<f64> {
    let mut f = vec![0.0; q];
    if r % 2 == 1 {
        let bin = if rng.next_f64() < 0.5 { 0 } else { q / 2 };
        let a = rng.uniform(0.5, 1.5);
        for (n, v) in f.iter_mut().enumerate() {
            *v += if bin == 0 || n % 2 == 0 { a } else { -a };
        }
    }
    let mut bins: Vec<usize> = Vec::new();
    while bins.len() < r / 2 {
        let b = rng.range_inclusive(1, q as u64 / 2 - 1) as usize;
        if !bins.contains(&b) {
            bins.push(b);
        }
    }
    for &b in &bins {
        let (a, ph) = (rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * PI));
        for (n, v) in f.iter_mut().enumerate() {
            *v += a * (2.0 * PI * (b * n) as f64 / q as f64 + ph).cos();
        }
    }
    f
}

/// Sensing matrix that only sees the DFT bins `0..=cutoff`.
pub fn low_pass_sensing(q: usize, cutoff: usize) -> SensingMatrix {
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0; q]];
    for k in 1..=cutoff {
        let w = 2.0 * PI * k as f64 / q as f64;
        rows.push((0..q).map(|n| (w * n as f64).cos()).collect());
        rows.push((0..q).map(|n| (w * n as f64).sin()).collect());
    }
    let m = DMatrix::from_fn(rows.len(), q, |i, j| rows[i][j]);
    SensingMatrix::from_dense(m).unwrap()
}

pub struct ContaminatedTask {
    pub pairs: Vec<TrainingPair>,
    pub null_vectors: Vec<Vec<f64>>,
    pub q: usize,
    pub pencil: usize,
    pub rank: usize,
}

/// Targets are two low cosines (Hankel rank 4); inputs add high-frequency
/// null-space components of a low-pass sensing matrix.
pub fn contaminated_task(seed: u64) -> ContaminatedTask {
    let (q, pencil, rank) = (64, 16, 4);
    let l = low_pass_sensing(q, 6);
    let null_vectors = null_space_probe(&l, 8, seed).unwrap();
    let mut rng = CounterRng::with_stream(seed, 7);
    let pairs = (0..12)
        .map(|_| {
            let (a, b) = (rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5));
            let (pa, pb) = (rng.uniform(0.0, 2.0 * PI), rng.uniform(0.0, 2.0 * PI));
            let target: Vec<f64> = (0..q)
                .map(|n| {
                    let w = 2.0 * PI * n as f64 / q as f64;
                    a * (w + pa).cos() + b * (2.0 * w + pb).cos()
                })
                .collect();
            let mut input = target.clone();
            for v in &null_vectors {
                let c = 2.0 * rng.normal();
                input.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
            }
            TrainingPair::new(input, target).unwrap()
        })
        .collect();
    ContaminatedTask { pairs, null_vectors, q, pencil, rank }
}

/// Annihilation score of a filter bank divided by its spectral norm, so that a
/// rescaled bank scores the same.
pub fn normalized_score(filters: &DMatrix<f64>, null_vectors: &[Vec<f64>]) -> f64 {
    let s = filters.singular_values().max();
    elastic_imaging::sensing::annihilation_score(filters, null_vectors).unwrap() / s
}

/// Training setup for [`contaminated_task`]: small random start, so that the
/// filters owe their shape to the data rather than to the initial draw.
pub fn contaminated_config(task: &ContaminatedTask, seed: u64) -> TrainConfig {
    TrainConfig {
        pencil: task.pencil,
        rank: task.rank,
        steps: 500,
        init: Init::Random,
        init_scale: 0.3,
        seed,
        ..Default::default()
    }
}
