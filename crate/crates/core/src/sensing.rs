//! Dense sensing matrix from the Green's kernel, ridge right pseudo-inverse and
//! null-space probes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::elastic::{DetectorArray, TimeKernel};
use crate::error::{Error, Result};
use crate::grid::{crop_to_image, image_into_crop, GridSpec, ImageVector, ScalarField, VectorField2};
use crate::hankel::lift_matrix;
use crate::rng::CounterRng;

/// Largest number of dense entries we agree to allocate.
pub const MAX_ENTRIES: usize = 1 << 26;

/// Rows `i*N*M + n*M + m`, columns `j*Q + q` with `q` the row-major crop pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    pub entries: DMatrix<f64>,
    pub grid: Option<GridSpec>,
    pub detectors: Option<DetectorArray>,
}

impl SensingMatrix {
    /// Wraps an arbitrary matrix, e.g. for synthetic tasks.
    pub fn from_dense(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { entries, grid: None, detectors: None })
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.entries.ncols() {
            return Err(Error::DimMismatch(format!("vector {} vs {} columns", f.len(), self.entries.ncols())));
        }
        Ok((&self.entries * DVector::from_column_slice(f)).as_slice().to_vec())
    }

    pub fn apply_transpose(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.entries.nrows() {
            return Err(Error::DimMismatch(format!("vector {} vs {} rows", g.len(), self.entries.nrows())));
        }
        Ok((self.entries.tr_mul(&DVector::from_column_slice(g))).as_slice().to_vec())
    }

    pub fn spectral_norm(&self) -> f64 {
        self.entries.singular_values().max()
    }
}

/// Crop of both components, `x` block first.
pub fn vectorize(f: &VectorField2, grid: &GridSpec) -> Result<Vec<f64>> {
    let crop = grid.crop();
    let mut v = crop_to_image(&f.comp_x, crop)?.values;
    v.extend(crop_to_image(&f.comp_y, crop)?.values);
    Ok(v)
}

/// Inverse of [`vectorize`], zero outside the crop.
pub fn devectorize(v: &[f64], grid: &GridSpec) -> Result<VectorField2> {
    let crop = grid.crop();
    let q = crop.len * crop.len;
    if v.len() != 2 * q {
        return Err(Error::DimMismatch(format!("vector {} vs 2Q = {}", v.len(), 2 * q)));
    }
    let mut out = VectorField2::zeros(grid.n_x, grid.n_x);
    for (j, comp) in [&mut out.comp_x, &mut out.comp_y].into_iter().enumerate() {
        let img = ImageVector { values: v[j * q..(j + 1) * q].to_vec(), side: crop.len };
        image_into_crop(&img, comp, crop)?;
    }
    Ok(out)
}

/// `h_x^2 [d/dt G(y_m - z_q, t_n)]_ij` with pixel-indicator ansatz functions.
/// Pixels outside the unit disc carry no source and get zero columns.
pub fn assemble_sensing(grid: &GridSpec, detectors: &DetectorArray) -> Result<SensingMatrix> {
    detectors.validate(grid)?;
    let crop = grid.crop();
    let q = crop.len * crop.len;
    let (m_count, n_count) = (detectors.m(), detectors.n());
    let rows = 2 * m_count * n_count;
    let cols = 2 * q;
    if rows.saturating_mul(cols) > MAX_ENTRIES {
        return Err(Error::TooLarge { entries: rows.saturating_mul(cols) });
    }
    let kernel = TimeKernel::new(grid);
    let phases = kernel.phases(&detectors.times);
    let h2 = grid.h_x * grid.h_x;
    let pixels: Vec<(usize, [f64; 2])> = (0..q)
        .map(|k| (k, [grid.coord(crop.col0 + k % crop.len), grid.coord(crop.row0 + k / crop.len)]))
        .filter(|(_, z)| z[0].hypot(z[1]) < 1.0)
        .collect();

    // per detector: for each interior pixel, N kernel matrices
    let blocks: Vec<Vec<Vec<[[f64; 2]; 2]>>> = detectors
        .positions
        .par_iter()
        .map(|y| {
            pixels
                .iter()
                .map(|(_, z)| Ok(kernel.eval_with(&kernel.spectrum([y[0] - z[0], y[1] - z[1]])?, &phases)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut entries = DMatrix::zeros(rows, cols);
    for (m, block) in blocks.iter().enumerate() {
        for ((k, _), vals) in pixels.iter().zip(block) {
            for (n, g) in vals.iter().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        entries[(i * n_count * m_count + n * m_count + m, j * q + k)] = h2 * g[i][j];
                    }
                }
            }
        }
    }
    Ok(SensingMatrix { entries, grid: Some(*grid), detectors: Some(detectors.clone()) })
}

/// `Lambda^T (Lambda Lambda^T + eps I)^{-1}` kept in factored form.
pub struct PseudoInverse {
    pub epsilon: f64,
    factor: Cholesky<f64, Dyn>,
    lambda_t: DMatrix<f64>,
}

pub fn right_pseudo_inverse(l: &SensingMatrix, epsilon: f64) -> Result<PseudoInverse> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon}")));
    }
    let rows = l.entries.nrows();
    let gram = &l.entries * l.entries.transpose() + DMatrix::identity(rows, rows) * epsilon;
    let factor = Cholesky::new(gram).ok_or(Error::FactorizationFailure)?;
    Ok(PseudoInverse { epsilon, factor, lambda_t: l.entries.transpose() })
}

impl PseudoInverse {
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.lambda_t.ncols() {
            return Err(Error::DimMismatch(format!("data {} vs {} rows", g.len(), self.lambda_t.ncols())));
        }
        let y = self.factor.solve(&DVector::from_column_slice(g));
        Ok((&self.lambda_t * y).as_slice().to_vec())
    }

    /// The explicit `cols x rows` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let inv = self.factor.inverse();
        &self.lambda_t * inv
    }
}

/// `k` orthonormal vectors annihilated by `Lambda`: seeded random vectors with
/// the row space projected out, then orthonormalized.
pub fn null_space_probe(l: &SensingMatrix, k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let (rows, cols) = l.entries.shape();
    let svd = l.entries.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::FactorizationFailure)?;
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-13 * smax).collect();
    let available = cols - keep.len();
    if k > available {
        return Err(Error::NullSpaceTooSmall { requested: k, available });
    }
    let row_space: Vec<DVector<f64>> = keep.iter().map(|&i| v_t.row(i).transpose()).collect();
    let mut rng = CounterRng::with_stream(seed, rows as u64);
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while out.len() < k {
        attempts += 1;
        if attempts > 4 * k + 16 {
            return Err(Error::NullSpaceTooSmall { requested: k, available: out.len() });
        }
        let mut v = DVector::from_fn(cols, |_, _| rng.normal());
        // two passes of classical Gram-Schmidt keep the projection accurate
        for _ in 0..2 {
            for b in row_space.iter().chain(out.iter()) {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-6 {
            out.push(v / n);
        }
    }
    Ok(out.into_iter().map(|v| v.as_slice().to_vec()).collect())
}

/// `max_v ||v conv Psi'|| / ||v||` over the given vectors, with `filters` the
/// `p x r` encoder bank.
pub fn annihilation_score(filters: &DMatrix<f64>, null_vectors: &[Vec<f64>]) -> Result<f64> {
    let p = filters.nrows();
    let mut best = 0.0f64;
    for v in null_vectors {
        if p == 0 || p >= v.len() {
            return Err(Error::DimMismatch(format!("filter length {p} vs vector {}", v.len())));
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 {
            continue;
        }
        best = best.max((lift_matrix(v, p) * filters).norm() / nv);
    }
    Ok(best)
}

/// Image of the pseudo-inverse as a field pair, for display.
pub fn pseudo_inverse_image(pinv: &PseudoInverse, g: &[f64], grid: &GridSpec) -> Result<VectorField2> {
    devectorize(&pinv.apply(g)?, grid)
}

/// Magnitude image `|f|` of a vectorized source, for display.
pub fn magnitude(v: &VectorField2) -> ScalarField {
    let data = v.comp_x.data.iter().zip(&v.comp_y.data).map(|(a, b)| a.hypot(*b)).collect();
    ScalarField { data, ..v.comp_x }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_orthogonal_closed_form() {
        let s = 3.0;
        let mut e = DMatrix::zeros(2, 4);
        e[(0, 1)] = s;
        e[(1, 3)] = s;
        let l = SensingMatrix::from_dense(e.clone()).unwrap();
        let eps = 0.5;
        let pinv = right_pseudo_inverse(&l, eps).unwrap().matrix();
        let expect = e.transpose() / (s * s + eps);
        assert!((pinv - expect).norm() < 1e-14);
    }

    #[test]
    fn filter_score_limits() {
        let v = vec![vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.0]];
        assert_eq!(annihilation_score(&DMatrix::zeros(2, 1), &v).unwrap(), 0.0);
        let mut delta = DMatrix::zeros(2, 1);
        delta[(0, 0)] = 1.0;
        assert!((annihilation_score(&delta, &v).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn null_space_too_small() {
        let l = SensingMatrix::from_dense(DMatrix::identity(3, 4)).unwrap();
        assert_eq!(null_space_probe(&l, 1, 0).unwrap().len(), 1);
        assert!(matches!(null_space_probe(&l, 2, 0), Err(Error::NullSpaceTooSmall { available: 1, .. })));
    }
}
