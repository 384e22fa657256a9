//! Velocity-stress leapfrog for the Lamé system with pseudo-spectral spatial
//! derivatives and a split-field PML.
//!
//! The state at integer step `n` holds `u^n`, `v^{n-1/2}` and `sigma^n`, with
//! velocity and stress split by the axis of the derivative that feeds them.
//! Each split is damped by the PML profile of its own axis. One step is
//!
//! ```text
//! v     <- a (a v + dt Div sigma)
//! u     <- u + dt v
//! sigma <- a (a sigma + dt C grad v)
//! ```
//!
//! with `a = exp(-s dt / 2)`. The transpose of every stage is implemented
//! exactly, so time reversal is the discrete adjoint of the trace sampling.

use num_complex::Complex64;

use super::{bilinear_stencil, trace_weight, DetectorArray, MeasurementSet};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, VectorField2};
use crate::spectral::Derivatives;

/// Target reflection coefficient of the quadratic PML profile.
const PML_REFLECTION: f64 = 1e-4;

// Velocity splits.
const VX_X: usize = 0;
const VX_Y: usize = 1;
const VY_X: usize = 2;
const VY_Y: usize = 3;
// Stress splits.
const SXX_X: usize = 0;
const SXX_Y: usize = 1;
const SYY_X: usize = 2;
const SYY_Y: usize = 3;
const SXY_X: usize = 4;
const SXY_Y: usize = 5;

/// Whether a split is damped along x (true) or y (false).
const V_ALONG_X: [bool; 4] = [true, false, true, false];
const S_ALONG_X: [bool; 6] = [true, false, true, false, true, false];

/// Wavefield at an integer time step.
#[derive(Debug, Clone)]
pub struct ElasticState {
    pub step: usize,
    pub t: f64,
    u: [Vec<f64>; 2],
    v: [Vec<f64>; 4],
    s: [Vec<f64>; 6],
}

impl ElasticState {
    pub fn displacement(&self, n: usize) -> VectorField2 {
        VectorField2 {
            comp_x: ScalarField { n_rows: n, n_cols: n, data: self.u[0].clone() },
            comp_y: ScalarField { n_rows: n, n_cols: n, data: self.u[1].clone() },
        }
    }

    /// Velocity at the preceding half step (sum of the PML splits).
    pub fn velocity(&self, n: usize) -> VectorField2 {
        let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        VectorField2 {
            comp_x: ScalarField { n_rows: n, n_cols: n, data: sum(&self.v[VX_X], &self.v[VX_Y]) },
            comp_y: ScalarField { n_rows: n, n_cols: n, data: sum(&self.v[VY_X], &self.v[VY_Y]) },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.s).all(|c| c.iter().all(|x| x.is_finite()))
    }
}

pub struct ElasticSolver {
    pub grid: GridSpec,
    d: Derivatives,
    /// Damping factor per grid index along one axis.
    a: Vec<f64>,
    dt: f64,
}

fn pml_factors(grid: &GridSpec) -> Vec<f64> {
    let n = grid.n_x;
    let w = grid.pml_width;
    if w == 0 {
        return vec![1.0; n];
    }
    let width = w as f64 * grid.h_x;
    let sigma_max = 3.0 * grid.c_p() * (1.0 / PML_REFLECTION).ln() / (2.0 * width);
    (0..n)
        .map(|j| {
            let depth = if j < w {
                (w - j) as f64
            } else if j + w >= n {
                (j + w + 1 - n) as f64
            } else {
                0.0
            };
            let s = sigma_max * (depth / w as f64).powi(2);
            (-0.5 * s * grid.dt()).exp()
        })
        .collect()
}

fn zeros<const K: usize>(len: usize) -> [Vec<f64>; K] {
    std::array::from_fn(|_| vec![0.0; len])
}

impl ElasticSolver {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        Ok(Self { grid: *grid, d: Derivatives::new(grid.n_x, grid.h_x), a: pml_factors(grid), dt: grid.dt() })
    }

    fn len(&self) -> usize {
        self.grid.n_x * self.grid.n_x
    }

    fn damping(&self, idx: usize, along_x: bool) -> f64 {
        let n = self.grid.n_x;
        if along_x {
            self.a[idx % n]
        } else {
            self.a[idx / n]
        }
    }

    /// `sigma = C grad(w)` in split form, for velocity-like input `(wx, wy)`.
    fn grad_split(&self, wx: &[f64], wy: &[f64]) -> [Vec<f64>; 6] {
        let (l, m) = (self.grid.lambda, self.grid.mu);
        let fx = self.d.fft.forward(wx);
        let fy = self.d.fft.forward(wy);
        let dxx = self.d.dx_spec(&fx);
        let dyy = self.d.dy_spec(&fy);
        let dxy = self.d.dx_spec(&fy);
        let dyx = self.d.dy_spec(&fx);
        let sc = |v: &[f64], c: f64| v.iter().map(|x| c * x).collect::<Vec<f64>>();
        [
            sc(&dxx, l + 2.0 * m),
            sc(&dyy, l),
            sc(&dxx, l),
            sc(&dyy, l + 2.0 * m),
            sc(&dxy, m),
            sc(&dyx, m),
        ]
    }

    /// Transpose of [`Self::grad_split`] onto `(wx, wy)`.
    fn grad_split_t(&self, t: &[Vec<f64>; 6]) -> (Vec<f64>, Vec<f64>) {
        let (l, m) = (self.grid.lambda, self.grid.mu);
        let lin = |a: &[f64], ca: f64, b: &[f64], cb: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect()
        };
        // x: -(d/dx)[(l+2m) t_sxx_x + l t_syy_x] - m (d/dy) t_sxy_y
        let ax = self.d.fft.forward(&lin(&t[SXX_X], l + 2.0 * m, &t[SYY_X], l));
        let bx = self.d.fft.forward(&t[SXY_Y]);
        // y: -(d/dy)[l t_sxx_y + (l+2m) t_syy_y] - m (d/dx) t_sxy_x
        let ay = self.d.fft.forward(&lin(&t[SXX_Y], l, &t[SYY_Y], l + 2.0 * m));
        let by = self.d.fft.forward(&t[SXY_X]);
        let gx = self.combine_derivs(&ax, 1.0, 0.0, &bx, 0.0, m);
        let gy = self.combine_derivs(&ay, 0.0, 1.0, &by, m, 0.0);
        (gx.iter().map(|v| -v).collect(), gy.iter().map(|v| -v).collect())
    }

    /// Inverse transform of `(ca_x dx + ca_y dy) A + (cb_x dx + cb_y dy) B`.
    fn combine_derivs(
        &self,
        a: &[Complex64],
        ca_x: f64,
        ca_y: f64,
        b: &[Complex64],
        cb_x: f64,
        cb_y: f64,
    ) -> Vec<f64> {
        let n = self.grid.n_x;
        let kx = crate::spectral::derivative_wavenumbers(n, self.grid.h_x);
        let out = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (&pa, &pb))| {
                let (kxi, kyi) = (kx[i / n], kx[i % n]);
                let ia = Complex64::new(0.0, ca_x * kxi + ca_y * kyi);
                let ib = Complex64::new(0.0, cb_x * kxi + cb_y * kyi);
                ia * pa + ib * pb
            })
            .collect();
        self.d.fft.inverse(out)
    }

    /// Divergence of the (summed) stress, in velocity split form.
    fn div_split(&self, s: &[Vec<f64>; 6]) -> [Vec<f64>; 4] {
        let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
        let sxx = self.d.fft.forward(&sum(&s[SXX_X], &s[SXX_Y]));
        let syy = self.d.fft.forward(&sum(&s[SYY_X], &s[SYY_Y]));
        let sxy = self.d.fft.forward(&sum(&s[SXY_X], &s[SXY_Y]));
        [self.d.dx_spec(&sxx), self.d.dy_spec(&sxy), self.d.dx_spec(&sxy), self.d.dy_spec(&syy)]
    }

    /// Transpose of [`Self::div_split`].
    fn div_split_t(&self, w: &[Vec<f64>; 4]) -> [Vec<f64>; 6] {
        let f0 = self.d.fft.forward(&w[VX_X]);
        let f1 = self.d.fft.forward(&w[VX_Y]);
        let f2 = self.d.fft.forward(&w[VY_X]);
        let f3 = self.d.fft.forward(&w[VY_Y]);
        let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<f64>>();
        let xx = neg(self.d.dx_spec(&f0));
        let yy = neg(self.d.dy_spec(&f3));
        let xy = neg(self.combine_derivs(&f1, 0.0, 1.0, &f2, 1.0, 0.0));
        [xx.clone(), xx, yy.clone(), yy, xy.clone(), xy]
    }

    /// State at `t = 0` for the source `F d(delta)/dt`: `u = F`, `v(0) = 0`,
    /// `sigma = C eps(F)`.
    pub fn initial_state(&self, f: &VectorField2) -> Result<ElasticState> {
        f.check_grid(&self.grid)?;
        let s = self.grad_split(&f.comp_x.data, &f.comp_y.data);
        let div = self.div_split(&s);
        let v = div.map(|c| c.into_iter().map(|x| -0.5 * self.dt * x).collect());
        Ok(ElasticState { step: 0, t: 0.0, u: [f.comp_x.data.clone(), f.comp_y.data.clone()], v, s })
    }

    pub fn step(&self, st: &mut ElasticState) {
        let dt = self.dt;
        let div = self.div_split(&st.s);
        for (c, dc) in div.iter().enumerate() {
            for (i, (v, g)) in st.v[c].iter_mut().zip(dc).enumerate() {
                let a = self.damping(i, V_ALONG_X[c]);
                *v = a * (a * *v + dt * g);
            }
        }
        for i in 0..self.len() {
            st.u[0][i] += dt * (st.v[VX_X][i] + st.v[VX_Y][i]);
            st.u[1][i] += dt * (st.v[VY_X][i] + st.v[VY_Y][i]);
        }
        let vx: Vec<f64> = st.v[VX_X].iter().zip(&st.v[VX_Y]).map(|(a, b)| a + b).collect();
        let vy: Vec<f64> = st.v[VY_X].iter().zip(&st.v[VY_Y]).map(|(a, b)| a + b).collect();
        let g = self.grad_split(&vx, &vy);
        for (c, gc) in g.iter().enumerate() {
            for (i, (s, gv)) in st.s[c].iter_mut().zip(gc).enumerate() {
                let a = self.damping(i, S_ALONG_X[c]);
                *s = a * (a * *s + dt * gv);
            }
        }
        st.step += 1;
        st.t = st.step as f64 * dt;
    }

    /// Transpose of [`Self::step`] acting on a cotangent state.
    fn step_transpose(&self, st: &mut ElasticState) {
        let dt = self.dt;
        // stress stage
        let t: [Vec<f64>; 6] = std::array::from_fn(|c| {
            st.s[c].iter().enumerate().map(|(i, x)| self.damping(i, S_ALONG_X[c]) * x).collect()
        });
        let (gx, gy) = self.grad_split_t(&t);
        for i in 0..self.len() {
            st.v[VX_X][i] += dt * gx[i];
            st.v[VX_Y][i] += dt * gx[i];
            st.v[VY_X][i] += dt * gy[i];
            st.v[VY_Y][i] += dt * gy[i];
        }
        for c in 0..6 {
            for (i, x) in st.s[c].iter_mut().enumerate() {
                let a = self.damping(i, S_ALONG_X[c]);
                *x *= a * a;
            }
        }
        // displacement stage
        for i in 0..self.len() {
            st.v[VX_X][i] += dt * st.u[0][i];
            st.v[VX_Y][i] += dt * st.u[0][i];
            st.v[VY_X][i] += dt * st.u[1][i];
            st.v[VY_Y][i] += dt * st.u[1][i];
        }
        // velocity stage
        let w: [Vec<f64>; 4] = std::array::from_fn(|c| {
            st.v[c].iter().enumerate().map(|(i, x)| self.damping(i, V_ALONG_X[c]) * x).collect()
        });
        let ds = self.div_split_t(&w);
        for c in 0..6 {
            for (x, d) in st.s[c].iter_mut().zip(&ds[c]) {
                *x += dt * d;
            }
        }
        for c in 0..4 {
            for (i, x) in st.v[c].iter_mut().enumerate() {
                let a = self.damping(i, V_ALONG_X[c]);
                *x *= a * a;
            }
        }
    }

    /// Transpose of [`Self::initial_state`].
    fn initial_transpose(&self, st: &ElasticState) -> VectorField2 {
        let dv = self.div_split_t(&st.v);
        let s: [Vec<f64>; 6] =
            std::array::from_fn(|c| st.s[c].iter().zip(&dv[c]).map(|(x, d)| x - 0.5 * self.dt * d).collect());
        let (gx, gy) = self.grad_split_t(&s);
        let n = self.grid.n_x;
        let add = |u: &[f64], g: &[f64]| ScalarField {
            n_rows: n,
            n_cols: n,
            data: u.iter().zip(g).map(|(a, b)| a + b).collect(),
        };
        VectorField2 { comp_x: add(&st.u[0], &gx), comp_y: add(&st.u[1], &gy) }
    }

    fn zero_state(&self) -> ElasticState {
        let len = self.len();
        ElasticState { step: 0, t: 0.0, u: zeros(len), v: zeros(len), s: zeros(len) }
    }

    /// Solver steps at which each detector time is read.
    fn sample_steps(&self, det: &DetectorArray) -> Result<Vec<usize>> {
        Ok(det.time_indices(&self.grid)?.into_iter().map(|k| k * self.grid.substeps).collect())
    }

    /// Runs the forward problem and records displacement traces.
    pub fn simulate(&self, f: &VectorField2, det: &DetectorArray) -> Result<MeasurementSet> {
        det.validate(&self.grid)?;
        check_support(f, &self.grid)?;
        let steps = self.sample_steps(det)?;
        let stencils: Vec<_> = det.positions.iter().map(|&p| bilinear_stencil(p, &self.grid)).collect();
        let mut out = MeasurementSet::zeros(det.clone());
        let mut st = self.initial_state(f)?;
        for (n, &target) in steps.iter().enumerate() {
            while st.step < target {
                self.step(&mut st);
            }
            for (m, sten) in stencils.iter().enumerate() {
                for comp in 0..2 {
                    let val: f64 = sten.iter().map(|&(i, w)| w * st.u[comp][i]).sum();
                    let idx = out.index(comp, n, m);
                    out.traces[idx] = val;
                }
            }
        }
        if out.traces.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(out)
    }

    /// Exact transpose of the source-to-trace map, without quadrature weights.
    pub fn adjoint(&self, m: &MeasurementSet) -> Result<VectorField2> {
        let det = &m.detectors;
        det.validate(&self.grid)?;
        let steps = self.sample_steps(det)?;
        let stencils: Vec<_> = det.positions.iter().map(|&p| bilinear_stencil(p, &self.grid)).collect();
        let mut st = self.zero_state();
        for n in (0..steps.len()).rev() {
            for (mi, sten) in stencils.iter().enumerate() {
                for comp in 0..2 {
                    let val = m.get(comp, n, mi);
                    for &(i, w) in sten {
                        st.u[comp][i] += w * val;
                    }
                }
            }
            let prev = if n == 0 { 0 } else { steps[n - 1] };
            for _ in prev..steps[n] {
                self.step_transpose(&mut st);
            }
        }
        Ok(self.initial_transpose(&st))
    }

    /// Discrete energy `1/2 <v^{n-1/2}, v^{n+1/2}> + 1/2 <eps(u), C eps(u)>`,
    /// exactly conserved by the scheme when the PML is off.
    pub fn energy(&self, st: &ElasticState) -> f64 {
        let h2 = self.grid.h_x * self.grid.h_x;
        let div = self.div_split(&st.s);
        let mut kinetic = 0.0;
        for c in 0..4 {
            for i in 0..self.len() {
                let a = self.damping(i, V_ALONG_X[c]);
                let next = a * (a * st.v[c][i] + self.dt * div[c][i]);
                kinetic += st.v[c][i] * next;
            }
        }
        // cross terms between splits of the same component
        for (p, q) in [(VX_X, VX_Y), (VY_X, VY_Y)] {
            for i in 0..self.len() {
                let np = self.damping(i, V_ALONG_X[p]);
                let nq = self.damping(i, V_ALONG_X[q]);
                let next_p = np * (np * st.v[p][i] + self.dt * div[p][i]);
                let next_q = nq * (nq * st.v[q][i] + self.dt * div[q][i]);
                kinetic += st.v[p][i] * next_q + st.v[q][i] * next_p;
            }
        }
        let sig = self.grad_split(&st.u[0], &st.u[1]);
        let l = self.grid.lambda;
        let m = self.grid.mu;
        let mut elastic = 0.0;
        for i in 0..self.len() {
            let sxx = sig[SXX_X][i] + sig[SXX_Y][i];
            let syy = sig[SYY_X][i] + sig[SYY_Y][i];
            let sxy = sig[SXY_X][i] + sig[SXY_Y][i];
            // eps = C^{-1} sigma, recovered from the split parts
            let exx = sig[SXX_X][i] / (l + 2.0 * m);
            let eyy = sig[SYY_Y][i] / (l + 2.0 * m);
            let gxy = sxy / m;
            elastic += exx * sxx + eyy * syy + gxy * sxy;
        }
        0.5 * h2 * (kinetic + elastic)
    }
}

/// Rejects sources that reach closer than `2 h_x` to the detector circle.
pub fn check_support(f: &VectorField2, grid: &GridSpec) -> Result<()> {
    f.check_grid(grid)?;
    let peak = f.comp_x.data.iter().chain(&f.comp_y.data).fold(0.0f64, |a, v| a.max(v.abs()));
    if !peak.is_finite() {
        return Err(Error::NonFinite);
    }
    let limit = 1.0 - 2.0 * grid.h_x;
    let n = grid.n_x;
    for i in 0..n * n {
        let r = grid.coord(i % n).hypot(grid.coord(i / n));
        if r > limit && (f.comp_x.data[i].abs() > 1e-12 * peak || f.comp_y.data[i].abs() > 1e-12 * peak) {
            return Err(Error::SupportViolation { radius: r });
        }
    }
    Ok(())
}

/// Runs the forward solver for source `F` and records the detector traces.
pub fn simulate(f: &VectorField2, grid: &GridSpec, detectors: &DetectorArray) -> Result<MeasurementSet> {
    ElasticSolver::new(grid)?.simulate(f, detectors)
}

/// `L u = mu Lap u + (lambda + mu) grad div u`, evaluated spectrally as the
/// divergence of `C eps(u)`.
pub fn apply_lame_operator(u: &VectorField2, grid: &GridSpec) -> Result<VectorField2> {
    u.check_grid(grid)?;
    let solver = ElasticSolver::new(grid)?;
    let s = solver.grad_split(&u.comp_x.data, &u.comp_y.data);
    let d = solver.div_split(&s);
    let n = grid.n_x;
    let add = |a: &[f64], b: &[f64]| ScalarField { n_rows: n, n_cols: n, data: a.iter().zip(b).map(|(x, y)| x + y).collect() };
    Ok(VectorField2 { comp_x: add(&d[VX_X], &d[VX_Y]), comp_y: add(&d[VY_X], &d[VY_Y]) })
}

impl ElasticSolver {
    /// Weighted time-reversal back-propagation: the adjoint with respect to the
    /// trace quadrature and the `h_x^2` grid inner product.
    pub fn back_propagate(&self, m: &MeasurementSet) -> Result<VectorField2> {
        let raw = self.adjoint(m)?;
        let w = trace_weight(m, &self.grid) / (self.grid.h_x * self.grid.h_x);
        Ok(raw.scale(w))
    }
}
