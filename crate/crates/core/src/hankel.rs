//! Wrap-around Hankel lifting, annihilating filters and numerical rank.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `matrix[q][j] = f[(q + j) mod Q]`, a `Q x p` wrap-around Hankel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelLift<T: ComplexField> {
    pub source_len: usize,
    pub pencil: usize,
    pub matrix: DMatrix<T>,
}

pub fn lift<T: ComplexField + Copy>(f: &[T], p: usize) -> Result<HankelLift<T>> {
    let q = f.len();
    if p == 0 || p >= q {
        return Err(Error::BadPencil { pencil: p, len: q });
    }
    Ok(HankelLift { source_len: q, pencil: p, matrix: lift_matrix(f, p) })
}

/// Unchecked lifting used by the framelet and learning code.
pub(crate) fn lift_matrix<T: ComplexField + Copy>(f: &[T], p: usize) -> DMatrix<T> {
    let q = f.len();
    DMatrix::from_fn(q, p, |r, j| f[(r + j) % q])
}

/// Adjoint of the lifting followed by averaging over each wrap-around
/// anti-diagonal: `f[n] = (1/p) sum_j X[(n - j) mod Q][j]`.
pub fn unlift<T: ComplexField + Copy>(x: &DMatrix<T>) -> Vec<T> {
    let (q, p) = x.shape();
    let scale: T = nalgebra::convert(1.0 / p as f64);
    (0..q)
        .map(|n| {
            let mut acc = T::zero();
            for j in 0..p {
                acc += x[((n + q - j % q) % q, j)];
            }
            acc * scale
        })
        .collect()
}

/// Number of singular values above `tol * sigma_max`.
pub fn numerical_rank<T: ComplexField + Copy>(h: &HankelLift<T>, tol: f64) -> usize {
    matrix_rank(&h.matrix, tol)
}

pub fn matrix_rank<T: ComplexField + Copy>(m: &DMatrix<T>, tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let sv: Vec<f64> = sv.iter().map(|s| nalgebra::try_convert::<T::RealField, f64>(s.clone()).unwrap_or(0.0)).collect();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// Block-diagonal lifting of a multi-component signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHankelLift<T: ComplexField> {
    pub blocks: Vec<HankelLift<T>>,
}

impl<T: ComplexField + Copy> BlockHankelLift<T> {
    pub fn new(components: &[&[T]], pencils: &[usize]) -> Result<Self> {
        if components.len() != pencils.len() {
            return Err(Error::DimMismatch("one pencil per component".into()));
        }
        let blocks = components.iter().zip(pencils).map(|(f, &p)| lift(f, p)).collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn total_pencil(&self) -> usize {
        self.blocks.iter().map(|b| b.pencil).sum()
    }

    pub fn assemble(&self) -> DMatrix<T> {
        let rows: usize = self.blocks.iter().map(|b| b.source_len).sum();
        let mut out = DMatrix::zeros(rows, self.total_pencil());
        let (mut r0, mut c0) = (0, 0);
        for b in &self.blocks {
            out.view_mut((r0, c0), (b.source_len, b.pencil)).copy_from(&b.matrix);
            r0 += b.source_len;
            c0 += b.pencil;
        }
        out
    }
}

/// Minimal filter annihilating `sum_j c_j exp(-i k omega_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilatingFilter {
    pub taps: Vec<Complex64>,
    pub roots: Vec<Complex64>,
}

impl AnnihilatingFilter {
    /// Taps in reverse order, the null vector of `H_{r+1}(f)`.
    pub fn flipped(&self) -> Vec<Complex64> {
        self.taps.iter().rev().cloned().collect()
    }
}

/// Coefficients of `prod_j (1 - exp(-i omega_j) z^{-1})` in powers of `z^{-1}`.
pub fn build_annihilator(frequencies: &[f64]) -> Result<AnnihilatingFilter> {
    for (i, &w) in frequencies.iter().enumerate() {
        if !(0.0..2.0 * std::f64::consts::PI).contains(&w) {
            return Err(Error::InvalidParameter(format!("frequency {w} outside [0, 2 pi)")));
        }
        if frequencies[..i].iter().any(|&v| (v - w).abs() < 1e-12) {
            return Err(Error::DuplicateFrequency(w));
        }
    }
    let roots: Vec<Complex64> = frequencies.iter().map(|&w| Complex64::from_polar(1.0, -w)).collect();
    let mut taps = vec![Complex64::new(1.0, 0.0)];
    for &r in &roots {
        let mut next = taps.clone();
        next.push(Complex64::default());
        for (k, &t) in taps.iter().enumerate() {
            next[k + 1] -= r * t;
        }
        taps = next;
    }
    Ok(AnnihilatingFilter { taps, roots })
}

/// `f_k = sum_j c_j exp(-i k omega_j)`, `k = 0..len`.
pub fn exponential_sum(frequencies: &[f64], coeffs: &[Complex64], len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|k| {
            frequencies
                .iter()
                .zip(coeffs)
                .map(|(&w, &c)| c * Complex64::from_polar(1.0, -(k as f64) * w))
                .sum()
        })
        .collect()
}

/// Circular convolution `(f * h)[k] = sum_l h[l] f[(k - l) mod Q]`.
pub fn circular_convolve(f: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let q = f.len();
    (0..q)
        .map(|k| h.iter().enumerate().map(|(l, &hl)| hl * f[(k + q * (l / q + 1) - l) % q]).sum())
        .collect()
}

/// `|| f circ-conv h ||_inf`.
pub fn annihilation_residual(f: &[Complex64], h: &AnnihilatingFilter) -> f64 {
    circular_convolve(f, &h.taps).iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn small_lifts() {
        let h = lift(&[1.0, 1.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(h.matrix, DMatrix::from_element(4, 2, 1.0));
        assert_eq!(numerical_rank(&h, 1e-8), 1);
        let h = lift(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(h.matrix, DMatrix::from_row_slice(4, 2, &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0, 1.0]));
        assert_eq!(unlift(&h.matrix), vec![1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(lift(&[1.0, 2.0], 2), Err(Error::BadPencil { .. })));
        assert!(matches!(lift(&[1.0, 2.0], 0), Err(Error::BadPencil { .. })));
    }

    #[test]
    fn annihilator_taps() {
        let c = |re: f64| Complex64::new(re, 0.0);
        assert_eq!(build_annihilator(&[]).unwrap().taps, vec![c(1.0)]);
        assert_eq!(build_annihilator(&[0.0]).unwrap().taps, vec![c(1.0), c(-1.0)]);
        let t = build_annihilator(&[0.0, PI]).unwrap().taps;
        let expect = [c(1.0), c(0.0), c(-1.0)];
        for (a, b) in t.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(matches!(build_annihilator(&[1.0, 1.0]), Err(Error::DuplicateFrequency(_))));
    }

    #[test]
    fn block_lift_is_block_diagonal() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0];
        let blk = BlockHankelLift::new(&[&a, &b], &[2, 1]).unwrap();
        let m = blk.assemble();
        assert_eq!(m.shape(), (7, 3));
        for r in 0..4 {
            assert_eq!(m[(r, 2)], 0.0);
        }
        for r in 4..7 {
            assert_eq!(m[(r, 0)], 0.0);
            assert_eq!(m[(r, 1)], 0.0);
            assert_eq!(m[(r, 2)], b[r - 4]);
        }
    }
}
