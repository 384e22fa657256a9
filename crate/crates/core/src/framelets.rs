//! Deep convolutional framelets: coefficients, reconstruction, the equivalent
//! encoder-decoder convolutions and multi-layer composition.
//!
//! Signals are circular. Encoder filters correlate (`H_p(g) Psi`), decoder
//! filters convolve and carry the `1/p` factor.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hankel::{lift_matrix, unlift};

const FRAME_TOL: f64 = 1e-12;
const PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameletBasis {
    /// `Q x S`
    pub phi: DMatrix<f64>,
    /// `Q x S`
    pub phi_dual: DMatrix<f64>,
    /// `p x r`
    pub psi: DMatrix<f64>,
    /// `p x r`
    pub psi_dual: DMatrix<f64>,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

impl FrameletBasis {
    /// Checks the frame condition and that `Psi Psi_tilde^T` is a projection.
    pub fn new(phi: DMatrix<f64>, phi_dual: DMatrix<f64>, psi: DMatrix<f64>, psi_dual: DMatrix<f64>) -> Result<Self> {
        let b = Self::new_unchecked(phi, phi_dual, psi, psi_dual)?;
        let q = b.q();
        let defect = max_abs(&(&b.phi_dual * b.phi.transpose() - DMatrix::identity(q, q)));
        if defect > FRAME_TOL {
            return Err(Error::InvalidParameter(format!("frame condition violated by {defect:e}")));
        }
        let proj = &b.psi * b.psi_dual.transpose();
        let idem = max_abs(&(&proj * &proj - &proj));
        if idem > PROJECTION_TOL {
            return Err(Error::InvalidParameter(format!("Psi Psi_tilde^T not idempotent ({idem:e})")));
        }
        Ok(b)
    }

    /// Shape checks only. Used to demonstrate what breaks without the frame
    /// condition.
    pub fn new_unchecked(
        phi: DMatrix<f64>,
        phi_dual: DMatrix<f64>,
        psi: DMatrix<f64>,
        psi_dual: DMatrix<f64>,
    ) -> Result<Self> {
        if phi.shape() != phi_dual.shape() || psi.shape() != psi_dual.shape() {
            return Err(Error::DimMismatch("primal and dual shapes differ".into()));
        }
        if psi.nrows() == 0 || psi.nrows() >= phi.nrows() {
            return Err(Error::BadPencil { pencil: psi.nrows(), len: phi.nrows() });
        }
        Ok(Self { phi, phi_dual, psi, psi_dual })
    }

    /// `Phi = Phi_tilde = I_Q`, `Psi = Psi_tilde = V_r` from the SVD of `H_p(f)`.
    pub fn from_svd(f: &[f64], p: usize, r: usize) -> Result<Self> {
        let q = f.len();
        if p == 0 || p >= q {
            return Err(Error::BadPencil { pencil: p, len: q });
        }
        if r == 0 || r > p {
            return Err(Error::InvalidParameter(format!("rank budget {r} with pencil {p}")));
        }
        let v = right_singular_vectors(&lift_matrix(f, p), r);
        Self::new(DMatrix::identity(q, q), DMatrix::identity(q, q), v.clone(), v)
    }

    pub fn q(&self) -> usize {
        self.phi.nrows()
    }
    pub fn s(&self) -> usize {
        self.phi.ncols()
    }
    pub fn pencil(&self) -> usize {
        self.psi.nrows()
    }
    pub fn rank_budget(&self) -> usize {
        self.psi.ncols()
    }

    fn check_signal(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.q() {
            return Err(Error::DimMismatch(format!("signal {} vs basis {}", g.len(), self.q())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let j = BasisJson {
            pencil: self.pencil(),
            rank_budget: self.rank_budget(),
            phi: MatrixJson::from(&self.phi),
            phi_dual: MatrixJson::from(&self.phi_dual),
            psi: MatrixJson::from(&self.psi),
            psi_dual: MatrixJson::from(&self.psi_dual),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    /// Parses and re-validates a basis written by [`FrameletBasis::to_json`].
    pub fn from_json(s: &str) -> Result<Self> {
        let b = Self::from_json_unchecked(s)?;
        Self::new(b.phi, b.phi_dual, b.psi, b.psi_dual)
    }

    /// Parses a basis without the frame checks, e.g. learned filters.
    pub fn from_json_unchecked(s: &str) -> Result<Self> {
        let j: BasisJson = serde_json::from_str(s)?;
        let b = Self::new_unchecked(j.phi.into_matrix()?, j.phi_dual.into_matrix()?, j.psi.into_matrix()?, j.psi_dual.into_matrix()?)?;
        if b.pencil() != j.pencil || b.rank_budget() != j.rank_budget {
            return Err(Error::DimMismatch("pencil or rank budget disagrees with matrices".into()));
        }
        Ok(b)
    }
}

/// Row-major matrix wrapper used in basis files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        Self { rows: m.nrows(), cols: m.ncols(), data: m.transpose().as_slice().to_vec() }
    }
}

impl MatrixJson {
    pub fn into_matrix(self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimMismatch(format!("{}x{} matrix with {} entries", self.rows, self.cols, self.data.len())));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct BasisJson {
    pencil: usize,
    rank_budget: usize,
    phi: MatrixJson,
    phi_dual: MatrixJson,
    psi: MatrixJson,
    psi_dual: MatrixJson,
}

/// Leading `r` right singular vectors as a `p x r` matrix.
pub fn right_singular_vectors(m: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(m.ncols(), r);
    for (c, &i) in order.iter().take(r).enumerate() {
        out.set_column(c, &v_t.row(i).transpose());
    }
    out
}

/// `S x r` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameletCoefficients {
    pub values: DMatrix<f64>,
}

/// `C = Phi^T H_p(g) Psi`.
pub fn coefficients(g: &[f64], basis: &FrameletBasis) -> Result<FrameletCoefficients> {
    basis.check_signal(g)?;
    let h = lift_matrix(g, basis.pencil());
    Ok(FrameletCoefficients { values: basis.phi.transpose() * h * &basis.psi })
}

/// Same coefficients through the encoder convolution `Phi^T (g conv Psi')`,
/// with `Psi'` the flipped filters.
pub fn coefficients_unlifted(g: &[f64], basis: &FrameletBasis) -> Result<FrameletCoefficients> {
    basis.check_signal(g)?;
    let (q, p, r) = (basis.q(), basis.pencil(), basis.rank_budget());
    let mut filtered = DMatrix::zeros(q, r);
    for l in 0..r {
        let flipped: Vec<f64> = (0..p).map(|k| basis.psi[(p - 1 - k, l)]).collect();
        let y = circular_conv(g, &flipped);
        // (g conv psi')[n] = (H_p(g) psi)[n - p + 1]
        for n in 0..q {
            filtered[(n, l)] = y[(n + p - 1) % q];
        }
    }
    Ok(FrameletCoefficients { values: basis.phi.transpose() * filtered })
}

fn check_coefficients(c: &FrameletCoefficients, basis: &FrameletBasis) -> Result<()> {
    if c.values.shape() != (basis.s(), basis.rank_budget()) {
        return Err(Error::DimMismatch(format!(
            "coefficients {:?} vs basis ({}, {})",
            c.values.shape(),
            basis.s(),
            basis.rank_budget()
        )));
    }
    Ok(())
}

/// `unlift(Phi_tilde C Psi_tilde^T)`.
pub fn reconstruct(c: &FrameletCoefficients, basis: &FrameletBasis) -> Result<Vec<f64>> {
    check_coefficients(c, basis)?;
    Ok(unlift(&(&basis.phi_dual * &c.values * basis.psi_dual.transpose())))
}

/// Decoder form `(1/p) sum_l (Phi_tilde C)_l conv psi_tilde_l`.
pub fn reconstruct_unlifted(c: &FrameletCoefficients, basis: &FrameletBasis) -> Result<Vec<f64>> {
    check_coefficients(c, basis)?;
    let x = &basis.phi_dual * &c.values;
    let p = basis.pencil();
    let mut out = vec![0.0; basis.q()];
    for l in 0..basis.rank_budget() {
        let col: Vec<f64> = x.column(l).iter().cloned().collect();
        let taps: Vec<f64> = basis.psi_dual.column(l).iter().cloned().collect();
        for (o, v) in out.iter_mut().zip(circular_conv(&col, &taps)) {
            *o += v / p as f64;
        }
    }
    Ok(out)
}

/// `B_kl = phi_tilde_k psi_tilde_l^T` (zero-based indices).
pub fn basis_matrices(basis: &FrameletBasis, k: usize, l: usize) -> Result<DMatrix<f64>> {
    if k >= basis.s() || l >= basis.rank_budget() {
        return Err(Error::IndexOutOfRange { k, l });
    }
    Ok(basis.phi_dual.column(k) * basis.psi_dual.column(l).transpose())
}

pub fn relu_coefficients(g: &[f64], basis: &FrameletBasis) -> Result<FrameletCoefficients> {
    let mut c = coefficients(g, basis)?;
    c.values.apply(|v| *v = v.max(0.0));
    Ok(c)
}

/// `(f conv h)[n] = sum_k h[k] f[(n - k) mod Q]`.
pub fn circular_conv(f: &[f64], h: &[f64]) -> Vec<f64> {
    let q = f.len();
    (0..q)
        .map(|n| h.iter().enumerate().map(|(k, &hk)| hk * f[(n + q - k % q) % q]).sum())
        .collect()
}

/// One encoder-decoder stage of a multi-layer network.
///
/// `encoder[k]` is the `in x out` matrix of tap `k`; `decoder[k]` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub encoder: Vec<DMatrix<f64>>,
    pub decoder: Vec<DMatrix<f64>>,
}

impl LayerSpec {
    pub fn new(encoder: Vec<DMatrix<f64>>, decoder: Vec<DMatrix<f64>>) -> Result<Self> {
        if encoder.is_empty() || encoder.len() != decoder.len() {
            return Err(Error::ChannelMismatch("encoder and decoder need the same nonzero length".into()));
        }
        let (cin, cout) = encoder[0].shape();
        if encoder.iter().any(|m| m.shape() != (cin, cout)) || decoder.iter().any(|m| m.shape() != (cout, cin)) {
            return Err(Error::ChannelMismatch("inconsistent filter shapes".into()));
        }
        Ok(Self { encoder, decoder })
    }

    /// Single-channel layer from `p x r` matrices.
    pub fn from_basis(basis: &FrameletBasis) -> Self {
        Self::from_stacked(&basis.psi, &basis.psi_dual, 1)
    }

    /// Layer from stacked `(in * p) x out` filters, row index `c * p + k`,
    /// the layout of the right singular vectors of `[H_p(a_1) ... H_p(a_in)]`.
    pub fn from_stacked(psi: &DMatrix<f64>, psi_dual: &DMatrix<f64>, in_channels: usize) -> Self {
        let p = psi.nrows() / in_channels;
        let cout = psi.ncols();
        let tap = |m: &DMatrix<f64>, k: usize| DMatrix::from_fn(in_channels, cout, |c, o| m[(c * p + k, o)]);
        Self {
            encoder: (0..p).map(|k| tap(psi, k)).collect(),
            decoder: (0..p).map(|k| tap(psi_dual, k).transpose()).collect(),
        }
    }

    pub fn filter_len(&self) -> usize {
        self.encoder.len()
    }
    pub fn in_channels(&self) -> usize {
        self.encoder[0].nrows()
    }
    pub fn out_channels(&self) -> usize {
        self.encoder[0].ncols()
    }

    /// `out[q, o] = sum_c sum_k a[(q + k) mod L, c] enc[k][c, o]`.
    pub fn encode(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let len = a.nrows();
        let mut out = DMatrix::zeros(len, self.out_channels());
        for (k, w) in self.encoder.iter().enumerate() {
            for q in 0..len {
                let row = a.row((q + k) % len);
                out.row_mut(q).iter_mut().zip((row * w).iter()).for_each(|(o, v)| *o += v);
            }
        }
        out
    }

    /// `out[n, c] = (1/p) sum_o sum_j x[(n - j) mod L, o] dec[j][o, c]`.
    pub fn decode(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let len = x.nrows();
        let p = self.filter_len();
        let mut out = DMatrix::zeros(len, self.in_channels());
        for (j, w) in self.decoder.iter().enumerate() {
            for n in 0..len {
                let row = x.row((n + len - j % len) % len);
                out.row_mut(n).iter_mut().zip((row * w).iter()).for_each(|(o, v)| *o += v / p as f64);
            }
        }
        out
    }
}

/// Non-local basis of one layer: `Phi`, `Phi_tilde`, both `L x S`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooling {
    pub phi: DMatrix<f64>,
    pub phi_dual: DMatrix<f64>,
}

impl Pooling {
    pub fn identity(len: usize) -> Self {
        Self { phi: DMatrix::identity(len, len), phi_dual: DMatrix::identity(len, len) }
    }
}

fn check_chain(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::ChannelMismatch("no layers".into()));
    }
    if layers[0].in_channels() != 1 {
        return Err(Error::ChannelMismatch("first layer must take one channel".into()));
    }
    for (j, w) in layers.windows(2).enumerate() {
        if w[0].out_channels() != w[1].in_channels() {
            return Err(Error::ChannelMismatch(format!(
                "layer {j} emits {} channels, layer {} takes {}",
                w[0].out_channels(),
                j + 1,
                w[1].in_channels()
            )));
        }
    }
    Ok(())
}

/// Encoder (convolution, pooling, optional ReLU) down the stack, then the
/// decoder (unpooling, convolution) back up.
pub fn multilayer_forward(g: &[f64], layers: &[LayerSpec], pooling: &[Pooling], relu: bool) -> Result<Vec<f64>> {
    check_chain(layers)?;
    if pooling.len() != layers.len() {
        return Err(Error::DimMismatch("one pooling per layer".into()));
    }
    let mut len = g.len();
    for (j, (layer, pool)) in layers.iter().zip(pooling).enumerate() {
        if pool.phi.nrows() != len || pool.phi_dual.shape() != pool.phi.shape() {
            return Err(Error::DimMismatch(format!("pooling of layer {j} expects length {}", pool.phi.nrows())));
        }
        if layer.filter_len() >= len {
            return Err(Error::BadPencil { pencil: layer.filter_len(), len });
        }
        len = pool.phi.ncols();
    }
    let mut act = DMatrix::from_column_slice(g.len(), 1, g);
    for (layer, pool) in layers.iter().zip(pooling) {
        act = pool.phi.transpose() * layer.encode(&act);
        if relu {
            act.apply(|v| *v = v.max(0.0));
        }
    }
    for (layer, pool) in layers.iter().zip(pooling).rev() {
        act = layer.decode(&(&pool.phi_dual * act));
    }
    Ok(act.column(0).iter().cloned().collect())
}

/// Effective single-layer filters of a linear cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedFilters {
    /// `1 x out` per tap.
    pub encoder: Vec<DMatrix<f64>>,
    /// `out x 1` per tap.
    pub decoder: Vec<DMatrix<f64>>,
    /// Product of the per-layer `1/p` factors.
    pub scale: f64,
}

fn chain_conv(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let (rows, cols) = (a[0].nrows(), b[0].ncols());
    let mut out = vec![DMatrix::zeros(rows, cols); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (k, y) in b.iter().enumerate() {
            out[i + k] += x * y;
        }
    }
    out
}

/// Linear (polynomial) convolution of the layer taps, channels chained.
pub fn cascade_filters(layers: &[LayerSpec]) -> Result<CascadedFilters> {
    check_chain(layers)?;
    let mut enc = layers[0].encoder.clone();
    let mut dec = layers[0].decoder.clone();
    let mut scale = 1.0 / layers[0].filter_len() as f64;
    for l in &layers[1..] {
        enc = chain_conv(&enc, &l.encoder);
        dec = chain_conv(&l.decoder, &dec);
        scale /= l.filter_len() as f64;
    }
    Ok(CascadedFilters { encoder: enc, decoder: dec, scale })
}

impl CascadedFilters {
    /// Correlate with the encoder, convolve with the decoder, multiply by `scale`.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let q = g.len();
        if self.encoder.len() > q {
            return Err(Error::BadPencil { pencil: self.encoder.len(), len: q });
        }
        let one = LayerSpec { encoder: self.encoder.clone(), decoder: self.decoder.clone() };
        let mid = one.encode(&DMatrix::from_column_slice(q, 1, g));
        let out = one.decode(&mid) * (self.scale * self.encoder.len() as f64);
        Ok(out.column(0).iter().cloned().collect())
    }
}
