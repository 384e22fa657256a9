//! Average pooling, the U-Net frame with skip connection and its dual frame.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y_k = (x_{2k} + x_{2k+1}) / sqrt 2`.
pub fn avg_pool(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() % 2 != 0 {
        return Err(Error::OddLength(x.len()));
    }
    Ok(x.chunks_exact(2).map(|c| (c[0] + c[1]) * FRAC_1_SQRT_2).collect())
}

/// Adjoint of [`avg_pool`].
pub fn avg_unpool(y: &[f64]) -> Vec<f64> {
    y.iter().flat_map(|&v| [v * FRAC_1_SQRT_2, v * FRAC_1_SQRT_2]).collect()
}

/// `Phi^T x = (x, avg_pool(x))`.
pub fn unet_analysis(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((x.to_vec(), avg_pool(x)?))
}

fn check_pair(skip: &[f64], coeff: &[f64]) -> Result<()> {
    if skip.len() != 2 * coeff.len() {
        return Err(Error::DimMismatch(format!("skip {} vs pooled {}", skip.len(), coeff.len())));
    }
    Ok(())
}

/// Plain U-Net synthesis `skip + avg_unpool(coeff)`; not a left inverse.
pub fn unet_synthesis(skip: &[f64], coeff: &[f64]) -> Result<Vec<f64>> {
    check_pair(skip, coeff)?;
    Ok(skip.iter().zip(avg_unpool(coeff)).map(|(a, b)| a + b).collect())
}

/// Dual-frame synthesis `skip - 1/2 avg_unpool(avg_pool(skip) - coeff)`.
pub fn dual_frame_synthesis(skip: &[f64], coeff: &[f64]) -> Result<Vec<f64>> {
    check_pair(skip, coeff)?;
    let pooled = avg_pool(skip)?;
    let resid: Vec<f64> = pooled.iter().zip(coeff).map(|(a, b)| a - b).collect();
    Ok(skip.iter().zip(avg_unpool(&resid)).map(|(s, r)| s - 0.5 * r).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingKind {
    Identity,
    Unet,
    DualFrame,
}

/// Non-local basis built from (possibly nested) pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolingFrame {
    pub kind: PoolingKind,
    pub q: usize,
    /// Number of nested pooling levels; ignored for `Identity`.
    pub depth: usize,
}

impl PoolingFrame {
    pub fn new(kind: PoolingKind, q: usize, depth: usize) -> Result<Self> {
        if kind != PoolingKind::Identity {
            if depth == 0 {
                return Err(Error::InvalidParameter("pooling depth must be >= 1".into()));
            }
            if q % (1 << depth) != 0 {
                return Err(Error::OddLength(q));
            }
        }
        Ok(Self { kind, q, depth })
    }

    /// Number of coefficients `S`.
    pub fn coeff_len(&self) -> usize {
        match self.kind {
            PoolingKind::Identity => self.q,
            _ => (0..=self.depth).map(|l| self.q >> l).sum(),
        }
    }

    /// Applies `Phi^T`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.q {
            return Err(Error::DimMismatch(format!("signal {} vs frame {}", x.len(), self.q)));
        }
        if self.kind == PoolingKind::Identity {
            return Ok(x.to_vec());
        }
        let mut out = x.to_vec();
        let mut cur = x.to_vec();
        for _ in 0..self.depth {
            cur = avg_pool(&cur)?;
            out.extend_from_slice(&cur);
        }
        Ok(out)
    }

    /// Applies the unpooling `Phi_tilde`.
    pub fn inverse(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.coeff_len() {
            return Err(Error::DimMismatch(format!("coefficients {} vs {}", c.len(), self.coeff_len())));
        }
        if self.kind == PoolingKind::Identity {
            return Ok(c.to_vec());
        }
        // split into levels x, y1, ..., yd; synthesize from the coarsest up
        let mut offsets = vec![0];
        for l in 0..=self.depth {
            offsets.push(offsets[l] + (self.q >> l));
        }
        let mut rec = c[offsets[self.depth]..offsets[self.depth + 1]].to_vec();
        for l in (0..self.depth).rev() {
            let skip = &c[offsets[l]..offsets[l + 1]];
            rec = match self.kind {
                PoolingKind::Unet => unet_synthesis(skip, &rec)?,
                _ => dual_frame_synthesis(skip, &rec)?,
            };
        }
        Ok(rec)
    }

    /// `(Phi, Phi_tilde)`, both `Q x S`, assembled column by column.
    pub fn matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (q, s) = (self.q, self.coeff_len());
        let mut phi_t = DMatrix::zeros(s, q);
        let mut e = vec![0.0; q];
        for i in 0..q {
            e[i] = 1.0;
            phi_t.set_column(i, &nalgebra::DVector::from_vec(self.forward(&e).unwrap()));
            e[i] = 0.0;
        }
        let mut phi_dual = DMatrix::zeros(q, s);
        let mut e = vec![0.0; s];
        for i in 0..s {
            e[i] = 1.0;
            phi_dual.set_column(i, &nalgebra::DVector::from_vec(self.inverse(&e).unwrap()));
            e[i] = 0.0;
        }
        (phi_t.transpose(), phi_dual)
    }
}

/// `|| Phi_tilde Phi^T - I ||_2` from the assembled matrices.
pub fn frame_defect(frame: &PoolingFrame) -> f64 {
    let (phi, phi_dual) = frame.matrices();
    let d = &phi_dual * phi.transpose() - DMatrix::identity(frame.q, frame.q);
    d.singular_values().max()
}
