//! Single-layer local basis learning `min sum_l ||f*_l - K[Psi, Psi_tilde](f_l)||^2`
//! with closed-form gradients and backtracking descent.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framelets::{right_singular_vectors, FrameletBasis};
use crate::hankel::{lift_matrix, unlift};
use crate::pooling::{PoolingFrame, PoolingKind};
use crate::rng::CounterRng;

/// Pre-activations closer to zero than this make a ReLU gradient check invalid.
pub const KINK_MARGIN: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

impl TrainingPair {
    pub fn new(input: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if input.len() != target.len() {
            return Err(Error::BadShape(format!("input {} vs target {}", input.len(), target.len())));
        }
        if input.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { input, target })
    }

    /// Image pair: the target must lie in `[0, 1]`; the input is mean-centred.
    pub fn from_images(input: &[f64], target: &[f64]) -> Result<Self> {
        if target.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("target intensities must lie in [0, 1]".into()));
        }
        let mean = input.iter().sum::<f64>() / input.len().max(1) as f64;
        Self::new(input.iter().map(|v| v - mean).collect(), target.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedBasis {
    /// `p x r` encoder filters.
    pub psi: DMatrix<f64>,
    /// `p x r` decoder filters.
    pub psi_dual: DMatrix<f64>,
    pub pooling: PoolingFrame,
    /// Loss after each accepted step, starting with the initial loss.
    pub trace: Vec<f64>,
}

impl LearnedBasis {
    pub fn new(psi: DMatrix<f64>, psi_dual: DMatrix<f64>, pooling: PoolingFrame) -> Result<Self> {
        if psi.shape() != psi_dual.shape() {
            return Err(Error::BadShape("encoder and decoder filters differ in shape".into()));
        }
        if psi.nrows() == 0 || psi.nrows() >= pooling.q {
            return Err(Error::BadPencil { pencil: psi.nrows(), len: pooling.q });
        }
        Ok(Self { psi, psi_dual, pooling, trace: Vec::new() })
    }

    /// SVD basis of one signal with identity pooling.
    pub fn from_signal_svd(f: &[f64], p: usize, r: usize) -> Result<Self> {
        let b = FrameletBasis::from_svd(f, p, r)?;
        Self::new(b.psi, b.psi_dual, PoolingFrame::new(PoolingKind::Identity, f.len(), 0)?)
    }

    pub fn pencil(&self) -> usize {
        self.psi.nrows()
    }

    pub fn to_framelet_basis(&self) -> Result<FrameletBasis> {
        let (phi, phi_dual) = self.pooling.matrices();
        FrameletBasis::new_unchecked(phi, phi_dual, self.psi.clone(), self.psi_dual.clone())
    }

    /// Writes `<stem>.json` in the framelet basis format and `<stem>_loss.csv`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::write(dir.join(format!("{stem}.json")), self.to_framelet_basis()?.to_json()?)?;
        let mut csv = String::from("step,loss\n");
        for (i, l) in self.trace.iter().enumerate() {
            csv.push_str(&format!("{i},{l:.16e}\n"));
        }
        std::fs::write(dir.join(format!("{stem}_loss.csv")), csv)?;
        Ok(())
    }
}

/// Cached quantities of one forward pass.
struct Forward {
    lifted: DMatrix<f64>,
    pre: DMatrix<f64>,
    act: DMatrix<f64>,
    output: Vec<f64>,
}

struct Frames {
    phi: DMatrix<f64>,
    phi_dual: DMatrix<f64>,
}

fn frames(pooling: &PoolingFrame) -> Frames {
    let (phi, phi_dual) = pooling.matrices();
    Frames { phi, phi_dual }
}

fn forward(f: &[f64], psi: &DMatrix<f64>, psi_dual: &DMatrix<f64>, fr: &Frames, relu: bool) -> Forward {
    let lifted = lift_matrix(f, psi.nrows());
    let pre = fr.phi.transpose() * &lifted * psi;
    let act = if relu { pre.map(|v| v.max(0.0)) } else { pre.clone() };
    let output = unlift(&(&fr.phi_dual * &act * psi_dual.transpose()));
    Forward { lifted, pre, act, output }
}

/// `unlift(Phi_tilde rho(Phi^T H_p(f) Psi) Psi_tilde^T)`.
pub fn apply_k(f: &[f64], basis: &LearnedBasis, relu: bool) -> Result<Vec<f64>> {
    if f.len() != basis.pooling.q {
        return Err(Error::DimMismatch(format!("signal {} vs basis {}", f.len(), basis.pooling.q)));
    }
    Ok(forward(f, &basis.psi, &basis.psi_dual, &frames(&basis.pooling), relu).output)
}

fn weight(w: Option<&[f64]>, n: usize) -> f64 {
    w.map_or(1.0, |w| w[n])
}

/// Loss and `(d/dPsi, d/dPsi_tilde)` for one pair.
fn pair_gradient(
    pair: &TrainingPair,
    psi: &DMatrix<f64>,
    psi_dual: &DMatrix<f64>,
    fr: &Frames,
    relu: bool,
    w: Option<&[f64]>,
) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let p = psi.nrows();
    let fw = forward(&pair.input, psi, psi_dual, fr, relu);
    let mut loss = 0.0;
    let mut g = vec![0.0; pair.target.len()];
    for (n, (o, t)) in fw.output.iter().zip(&pair.target).enumerate() {
        let e = o - t;
        loss += weight(w, n) * e * e;
        g[n] = 2.0 * weight(w, n) * e;
    }
    // adjoint of the anti-diagonal averaging
    let g_y = lift_matrix(&g, p) / p as f64;
    let phi_z = &fr.phi_dual * &fw.act;
    let d_psi_dual = g_y.transpose() * &phi_z;
    let mut d_z = fr.phi_dual.transpose() * &g_y * psi_dual;
    if relu {
        d_z.zip_apply(&fw.pre, |d, z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
    }
    let d_psi = fw.lifted.transpose() * (&fr.phi * d_z);
    (loss, d_psi, d_psi_dual)
}

fn check_pairs(pairs: &[TrainingPair], q: usize, weights: Option<&[f64]>) -> Result<()> {
    if let Some(bad) = pairs.iter().find(|pr| pr.input.len() != q || pr.target.len() != q) {
        return Err(Error::BadShape(format!("pair of length {} vs signal length {q}", bad.input.len())));
    }
    if let Some(w) = weights {
        if w.len() != q || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::BadShape("weights must be non-negative, one per pixel".into()));
        }
    }
    Ok(())
}

/// Total loss and gradients, reduced in pair order.
fn total_gradient(
    pairs: &[TrainingPair],
    psi: &DMatrix<f64>,
    psi_dual: &DMatrix<f64>,
    fr: &Frames,
    relu: bool,
    w: Option<&[f64]>,
) -> (f64, DMatrix<f64>, DMatrix<f64>) {
    let parts: Vec<_> = pairs.par_iter().map(|pr| pair_gradient(pr, psi, psi_dual, fr, relu, w)).collect();
    let mut loss = 0.0;
    let mut gp = DMatrix::zeros(psi.nrows(), psi.ncols());
    let mut gd = gp.clone();
    for (l, a, b) in parts {
        loss += l;
        gp += a;
        gd += b;
    }
    (loss, gp, gd)
}

fn total_loss(pairs: &[TrainingPair], psi: &DMatrix<f64>, psi_dual: &DMatrix<f64>, fr: &Frames, relu: bool, w: Option<&[f64]>) -> f64 {
    let parts: Vec<f64> = pairs
        .par_iter()
        .map(|pr| {
            let out = forward(&pr.input, psi, psi_dual, fr, relu).output;
            out.iter().zip(&pr.target).enumerate().map(|(n, (o, t))| weight(w, n) * (o - t).powi(2)).sum()
        })
        .collect();
    parts.iter().sum()
}

/// Loss of a basis on a set of pairs.
pub fn loss(pairs: &[TrainingPair], basis: &LearnedBasis, relu: bool, weights: Option<&[f64]>) -> Result<f64> {
    check_pairs(pairs, basis.pooling.q, weights)?;
    Ok(total_loss(pairs, &basis.psi, &basis.psi_dual, &frames(&basis.pooling), relu, weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Leading right singular vectors of the stacked lifted targets.
    SvdOfTargets,
    /// Seeded Gaussian entries scaled by `init_scale / sqrt(p)`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub pencil: usize,
    pub rank: usize,
    pub relu: bool,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub init: Init,
    pub pooling: PoolingKind,
    pub pooling_depth: usize,
    /// Standard deviation of random initial entries, times `1/sqrt(p)`.
    pub init_scale: f64,
    /// Per-pixel loss weights; uniform when absent.
    pub weights: Option<Vec<f64>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pencil: 8,
            rank: 4,
            relu: false,
            steps: 500,
            lr: 1e-2,
            seed: 0,
            init: Init::SvdOfTargets,
            pooling: PoolingKind::Identity,
            pooling_depth: 0,
            init_scale: 1.0,
            weights: None,
        }
    }
}

/// Initial `(Psi, Psi_tilde)` for a configuration.
pub fn initial_filters(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, r) = (cfg.pencil, cfg.rank);
    match cfg.init {
        Init::SvdOfTargets => {
            let q = pairs[0].target.len();
            let mut stacked = DMatrix::zeros(q * pairs.len(), p);
            for (i, pr) in pairs.iter().enumerate() {
                stacked.view_mut((i * q, 0), (q, p)).copy_from(&lift_matrix(&pr.target, p));
            }
            let v = right_singular_vectors(&stacked, r);
            Ok((v.clone(), v))
        }
        Init::Random => {
            let mut rng = CounterRng::with_stream(cfg.seed, 0x6c_6561_726e);
            let s = cfg.init_scale / (p as f64).sqrt();
            let psi = DMatrix::from_fn(p, r, |_, _| s * rng.normal());
            let psi_dual = DMatrix::from_fn(p, r, |_, _| s * rng.normal());
            Ok((psi, psi_dual))
        }
    }
}

/// Gradient descent with backtracking: a step that raises the loss is retried
/// at half the rate; after an accepted step the rate grows by 1.5x.
pub fn train(pairs: &[TrainingPair], cfg: &TrainConfig) -> Result<LearnedBasis> {
    if pairs.len() < 2 {
        return Err(Error::BadShape(format!("need at least two pairs, got {}", pairs.len())));
    }
    let q = pairs[0].input.len();
    if cfg.pencil == 0 || cfg.pencil >= q {
        return Err(Error::BadPencil { pencil: cfg.pencil, len: q });
    }
    if cfg.rank == 0 || cfg.rank > cfg.pencil {
        return Err(Error::BadShape(format!("rank {} with pencil {}", cfg.rank, cfg.pencil)));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate {}", cfg.lr)));
    }
    let w = cfg.weights.as_deref();
    check_pairs(pairs, q, w)?;
    let pooling = PoolingFrame::new(cfg.pooling, q, cfg.pooling_depth)?;
    let fr = frames(&pooling);
    let (mut psi, mut psi_dual) = initial_filters(pairs, cfg)?;

    let (mut cur, mut gp, mut gd) = total_gradient(pairs, &psi, &psi_dual, &fr, cfg.relu, w);
    let initial = cur;
    let mut trace = vec![cur];
    let mut lr = cfg.lr;
    for _ in 0..cfg.steps {
        let mut accepted = false;
        for _ in 0..60 {
            let cand_p = &psi - &gp * lr;
            let cand_d = &psi_dual - &gd * lr;
            let l = total_loss(pairs, &cand_p, &cand_d, &fr, cfg.relu, w);
            if !l.is_finite() || l > 1e6 * initial.max(f64::MIN_POSITIVE) {
                lr *= 0.5;
                continue;
            }
            if l <= cur {
                psi = cand_p;
                psi_dual = cand_d;
                accepted = true;
                lr *= 1.5;
                break;
            }
            lr *= 0.5;
        }
        if accepted {
            let next = total_gradient(pairs, &psi, &psi_dual, &fr, cfg.relu, w);
            cur = next.0;
            gp = next.1;
            gd = next.2;
        } else {
            lr = cfg.lr;
        }
        if !cur.is_finite() || cur > 1e6 * initial.max(f64::MIN_POSITIVE) {
            return Err(Error::Diverged { loss: cur, initial });
        }
        trace.push(cur);
    }
    Ok(LearnedBasis { psi, psi_dual, pooling, trace })
}

/// Largest gap between the analytic gradient and central differences, relative
/// to the largest analytic gradient entry.
pub fn finite_difference_check(basis: &LearnedBasis, pair: &TrainingPair, relu: bool) -> Result<f64> {
    let q = basis.pooling.q;
    check_pairs(std::slice::from_ref(pair), q, None)?;
    let fr = frames(&basis.pooling);
    if relu {
        let fw = forward(&pair.input, &basis.psi, &basis.psi_dual, &fr, true);
        let closest = fw.pre.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if closest < KINK_MARGIN {
            return Err(Error::NearKink { value: closest, margin: KINK_MARGIN });
        }
    }
    let pairs = std::slice::from_ref(pair);
    let (_, gp, gd) = total_gradient(pairs, &basis.psi, &basis.psi_dual, &fr, relu, None);
    let scale = gp.amax().max(gd.amax()).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for which in 0..2 {
        let analytic = if which == 0 { &gp } else { &gd };
        for idx in 0..analytic.len() {
            let eval = |delta: f64| {
                let mut p = basis.psi.clone();
                let mut d = basis.psi_dual.clone();
                if which == 0 {
                    p[idx] += delta;
                } else {
                    d[idx] += delta;
                }
                total_loss(pairs, &p, &d, &fr, relu, None)
            };
            let fd = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            worst = worst.max((fd - analytic[idx]).abs() / scale);
        }
    }
    Ok(worst)
}

/// Analytic gradients of the total loss, exposed for inspection.
pub fn gradients(pairs: &[TrainingPair], basis: &LearnedBasis, relu: bool) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    check_pairs(pairs, basis.pooling.q, None)?;
    Ok(total_gradient(pairs, &basis.psi, &basis.psi_dual, &frames(&basis.pooling), relu, None))
}
