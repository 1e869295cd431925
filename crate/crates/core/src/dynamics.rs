//! Time evolution of the full conservative system and of its reduced open
//! part, delayed-response kernels, and the no-gain quadratic form.
//!
//! The full system `V' = -i Omega V + F` is propagated spectrally. The
//! reduced system
//!
//! ```text
//! v1'(t) = -i Omega1 v1(t) - int_0^t a1(tau) v1(t - tau) dtau + f1(t),
//! a1(t)  = Gamma exp(-i Omega2 t) Gamma^H
//! ```
//!
//! assumes the hidden part starts at rest with no hidden forcing, and that
//! `v1` vanishes before `t = 0`, so the memory integral stops at `t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, eigh, op_norm, CMatrix, CVector};
use crate::system::{random_matrix, BlockSystem, FullOperator};

/// Which part's delayed response a kernel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSide {
    /// `a1(t) = Gamma exp(-i Omega2 t) Gamma^H`, acting on `H1`.
    Observable,
    /// `a2(t) = Gamma^H exp(-i Omega1 t) Gamma`, acting on `H2`.
    Hidden,
}

/// Spectral form `a(t) = M diag(exp(-i lambda t)) M^H` of a delayed response.
#[derive(Debug, Clone)]
pub struct ResponseKernel {
    pub side: KernelSide,
    pub eigvals: Vec<f64>,
    pub coupling_modes: CMatrix,
}

impl ResponseKernel {
    /// Dimension of the space the kernel acts on.
    pub fn dim(&self) -> usize {
        self.coupling_modes.nrows()
    }

    pub fn eval(&self, t: f64) -> CMatrix {
        let m = &self.coupling_modes;
        let mut scaled = m.clone();
        for (j, &lam) in self.eigvals.iter().enumerate() {
            let phase = c64(0.0, -lam * t).exp();
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * m.adjoint()
    }

    /// `||M||^2`, a bound on `||a(t)||` for every `t`.
    pub fn norm_bound(&self) -> f64 {
        let n = op_norm(&self.coupling_modes);
        n * n
    }

    /// Largest `|lambda|`; `||a^(j)(t)|| <= norm_bound * max_frequency^j`.
    pub fn max_frequency(&self) -> f64 {
        self.eigvals.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// CSV with header `time,a_0_0_re,a_0_0_im,...` (row-major entries).
    pub fn to_csv(&self, grid: &TimeGrid) -> String {
        let n = self.dim();
        let mut out = String::from("time");
        for i in 0..n {
            for j in 0..n {
                out.push_str(&format!(",a_{i}_{j}_re,a_{i}_{j}_im"));
            }
        }
        out.push('\n');
        for &t in grid.times() {
            let a = self.eval(t);
            out.push_str(&format!("{t:e}"));
            for i in 0..n {
                for j in 0..n {
                    out.push_str(&format!(",{:e},{:e}", a[(i, j)].re, a[(i, j)].im));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn make_kernel(sys: &BlockSystem, side: KernelSide) -> ResponseKernel {
    let (internal, coupling) = match side {
        KernelSide::Observable => (sys.omega2(), sys.gamma().clone()),
        KernelSide::Hidden => (sys.omega1(), sys.gamma().adjoint()),
    };
    let eig = eigh(internal);
    ResponseKernel {
        side,
        eigvals: eig.values,
        coupling_modes: coupling * eig.vectors,
    }
}

/// Uniform time grid `t_k = k h`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    step: f64,
}

impl TimeGrid {
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
        }
        if steps < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
        }
        let step = t_max / steps as f64;
        let times = (0..=steps).map(|k| k as f64 * step).collect();
        Ok(Self { times, step })
    }

    /// Accepts explicit sample times, which must start at 0 and be uniform.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 3 {
            return Err(Error::InvalidArgument("need at least 3 grid points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidArgument("grid must start at t = 0".into()));
        }
        let step = times[1] - times[0];
        if !(step > 0.0) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
        for (i, w) in times.windows(2).enumerate() {
            let deviation = ((w[1] - w[0]) - step).abs();
            if deviation > 1e-9 * step {
                return Err(Error::NonUniformGrid { index: i, deviation });
            }
        }
        Ok(Self { times, step })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    /// Same interval, half the step.
    pub fn refined(&self) -> Self {
        Self::uniform(self.t_max(), 2 * self.steps()).expect("refining a valid grid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub space_dim: usize,
}

impl Trajectory {
    /// Components `offset .. offset+len` of every state.
    pub fn project(&self, offset: usize, len: usize) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(|s| s.rows(offset, len).into_owned()).collect(),
            space_dim: len,
        }
    }

    /// `max_n ||x_n - y_n||` over a shared grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.times.len() != other.times.len() || self.space_dim != other.space_dim {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: other.times.len(),
                context: "trajectories on different grids or spaces",
            });
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV with header `time,re_0,im_0,re_1,im_1,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for i in 0..self.space_dim {
            out.push_str(&format!(",re_{i},im_{i}"));
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:e}"));
            for z in s.iter() {
                out.push_str(&format!(",{:e},{:e}", z.re, z.im));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForcingTarget {
    Full,
    Observable,
    Hidden,
}

/// Forcing sampled on the propagation grid, or identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSignal {
    pub target: ForcingTarget,
    samples: Option<Vec<CVector>>,
}

impl ForcingSignal {
    pub fn zero(target: ForcingTarget) -> Self {
        Self { target, samples: None }
    }

    pub fn sampled(target: ForcingTarget, samples: Vec<CVector>) -> Self {
        Self {
            target,
            samples: Some(samples),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.samples {
            None => true,
            Some(s) => s.iter().all(|v| v.iter().all(|z| z.norm() == 0.0)),
        }
    }

    fn check(&self, grid: &TimeGrid, len: usize) -> Result<()> {
        if let Some(s) = &self.samples {
            if s.len() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: s.len(),
                    context: "forcing samples vs grid points",
                });
            }
            if let Some(bad) = s.iter().find(|v| v.len() != len) {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: bad.len(),
                    context: "forcing sample length",
                });
            }
        }
        Ok(())
    }

    /// Samples lifted to the full space `C^(d1+d2)`.
    fn full_samples(&self, split: (usize, usize), grid: &TimeGrid) -> Result<Option<Vec<CVector>>> {
        let (d1, d2) = split;
        let (offset, len) = match self.target {
            ForcingTarget::Full => (0, d1 + d2),
            ForcingTarget::Observable => (0, d1),
            ForcingTarget::Hidden => (d1, d2),
        };
        self.check(grid, len)?;
        Ok(self.samples.as_ref().map(|s| {
            s.iter()
                .map(|v| {
                    let mut w = CVector::zeros(d1 + d2);
                    w.rows_mut(offset, len).copy_from(v);
                    w
                })
                .collect()
        }))
    }
}

/// Propagates `V' = -i Omega V + F` on `grid`.
///
/// The homogeneous part is exact, `U exp(-i Lambda t) U^H v0`. Forcing enters
/// through the Duhamel integral, evaluated in eigen-coordinates with the
/// trapezoidal rule on the grid.
pub fn propagate_full(
    omega: &FullOperator,
    v0: &CVector,
    forcing: &ForcingSignal,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let d = omega.omega.nrows();
    if v0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v0.len(),
            context: "initial state length",
        });
    }
    let forcing = forcing.full_samples(omega.split, grid)?;
    let eig = eigh(&omega.omega);
    let u = &eig.vectors;
    let y0 = u.ad_mul(v0);
    let h = grid.step();
    let step_phase: Vec<_> = eig.values.iter().map(|&l| c64(0.0, -l * h).exp()).collect();

    let g: Option<Vec<CVector>> = forcing.map(|f| f.iter().map(|v| u.ad_mul(v)).collect());
    let mut duhamel = CVector::zeros(d);
    let mut states = Vec::with_capacity(grid.len());
    for (n, &t) in grid.times().iter().enumerate() {
        if let Some(g) = &g {
            if n > 0 {
                for j in 0..d {
                    let p = step_phase[j];
                    duhamel[j] = p * duhamel[j] + (p * g[n - 1][j] + g[n][j]) * (0.5 * h);
                }
            }
        }
        let y = CVector::from_fn(d, |j, _| c64(0.0, -eig.values[j] * t).exp() * y0[j] + duhamel[j]);
        states.push(u * y);
    }
    Ok(Trajectory {
        times: grid.times().to_vec(),
        states,
        space_dim: d,
    })
}

/// Integrates the reduced observable dynamics with its memory term.
///
/// Heun's method (explicit trapezoid) in time; the convolution
/// `int_0^t a1(tau) v1(t - tau) dtau` uses the trapezoidal rule on the same
/// grid, with the `tau = 0` end taken from the stage value being corrected.
/// Both pieces are second order, so the scheme converges as `O(h^2)`.
pub fn propagate_reduced(
    sys: &BlockSystem,
    v1_0: &CVector,
    f1: &ForcingSignal,
    grid: &TimeGrid,
) -> Result<Trajectory> {
    let d1 = sys.d1();
    if v1_0.len() != d1 {
        return Err(Error::DimensionMismatch {
            expected: d1,
            found: v1_0.len(),
            context: "observable initial state length",
        });
    }
    match f1.target {
        ForcingTarget::Observable => f1.check(grid, d1)?,
        _ if f1.is_zero() => {}
        _ => {
            return Err(Error::InvalidArgument(
                "reduced dynamics needs forcing on the observable part only".into(),
            ))
        }
    }
    let forcing = match f1.target {
        ForcingTarget::Observable => f1.samples.as_ref(),
        _ => None,
    };
    let force = |n: usize| forcing.map(|f| f[n].clone()).unwrap_or_else(|| CVector::zeros(d1));

    let h = grid.step();
    let kernel = make_kernel(sys, KernelSide::Observable);
    let a: Vec<CMatrix> = grid.times().iter().map(|&t| kernel.eval(t)).collect();
    let minus_i_omega1 = sys.omega1().map(|z| z * c64(0.0, -1.0));
    let rhs = |v: &CVector, memory: &CVector, f: &CVector| &minus_i_omega1 * v - memory + f;

    let mut states: Vec<CVector> = Vec::with_capacity(grid.len());
    states.push(v1_0.clone());
    let mut memory = CVector::zeros(d1);
    for n in 0..grid.steps() {
        // Memory at t_{n+1} without its tau = 0 term.
        let mut history = CVector::zeros(d1);
        history.gemv(c64(0.5 * h, 0.0), &a[n + 1], &states[0], c64(0.0, 0.0));
        for k in 1..=n {
            history.gemv(c64(h, 0.0), &a[k], &states[n + 1 - k], c64(1.0, 0.0));
        }
        let vn = &states[n];
        let k1 = rhs(vn, &memory, &force(n));
        let predicted = vn + &k1 * c64(h, 0.0);
        let predicted_memory = &history + &a[0] * &predicted * c64(0.5 * h, 0.0);
        let k2 = rhs(&predicted, &predicted_memory, &force(n + 1));
        let next = vn + (k1 + k2) * c64(0.5 * h, 0.0);
        memory = history + &a[0] * &next * c64(0.5 * h, 0.0);
        states.push(next);
    }
    Ok(Trajectory {
        times: grid.times().to_vec(),
        states,
        space_dim: d1,
    })
}

/// `sup |phi'(s)|` for the bump `phi(s) = (1 - s^2)^4`, attained at `s^2 = 1/7`.
const BUMP_D1_SUP: f64 = 1.904_147_549_154_358; // 8 / sqrt(7) * (6/7)^3
/// `sup |phi''(s)|`, attained at `s = 0`.
const BUMP_D2_SUP: f64 = 8.0;

/// Compactly supported smooth test signal: a sum of `(1 - s^2)^4` bumps,
/// `s = (t - center) / radius`, each multiplying a fixed complex vector.
#[derive(Debug, Clone)]
pub struct BumpSignal {
    pub bumps: Vec<(f64, f64, CVector)>,
    pub dim: usize,
}

impl BumpSignal {
    /// Random signal supported in `[0, t_max]`, deterministic in `rng`.
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, t_max: f64) -> Self {
        let count = rng.random_range(1..=3);
        let bumps = (0..count)
            .map(|_| {
                let center = t_max * rng.random_range(0.25..0.75);
                let max_radius = center.min(t_max - center);
                let radius = rng.random_range(0.1 * t_max..=max_radius);
                let vector = random_matrix(rng, dim, 1).column(0).into_owned();
                (center, radius, vector)
            })
            .collect();
        Self { bumps, dim }
    }

    pub fn eval(&self, t: f64) -> CVector {
        let mut out = CVector::zeros(self.dim);
        for (center, radius, v) in &self.bumps {
            let s = (t - center) / radius;
            if s.abs() < 1.0 {
                let phi = (1.0 - s * s).powi(4);
                out += v * c64(phi, 0.0);
            }
        }
        out
    }

    /// Upper bounds on `sup ||v||`, `sup ||v'||`, `sup ||v''||`.
    pub fn derivative_bounds(&self) -> [f64; 3] {
        let mut b = [0.0; 3];
        for (_, r, v) in &self.bumps {
            let n = v.norm();
            b[0] += n;
            b[1] += n * BUMP_D1_SUP / r;
            b[2] += n * BUMP_D2_SUP / (r * r);
        }
        b
    }
}

/// Discretized no-gain form for one signal.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoGainTrial {
    pub value: f64,
    pub eps_quad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoGainReport {
    pub side: KernelSide,
    pub t_max: f64,
    pub steps: usize,
    pub trials: Vec<NoGainTrial>,
    pub min_value: f64,
    /// Largest quadrature-error bound over the trials.
    pub eps_quad: f64,
    /// Largest `max(0, -value)` over the trials.
    pub negative_excursion: f64,
    /// Every trial satisfies `value >= -eps_quad`.
    pub passed: bool,
}

/// Trapezoidal evaluation of `Re int int_{tau>=0} v(t)^H a(tau) v(t - tau)`.
fn no_gain_form(samples: &[CVector], a: &[CMatrix], h: f64) -> f64 {
    let mut total = 0.0;
    for n in 0..samples.len() {
        if samples[n].iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let mut inner = CVector::zeros(samples[n].len());
        for k in 0..=n {
            let w = if k == 0 { 0.5 } else { 1.0 };
            inner.gemv(c64(w, 0.0), &a[k], &samples[n - k], c64(1.0, 0.0));
        }
        total += samples[n].dotc(&inner).re;
    }
    total * h * h
}

/// Quadrature-error bound for [`no_gain_form`] on a support of length `t_max`.
///
/// With `A_j = ||M||^2 rho^j` bounding the kernel derivatives and `V_j` the
/// signal derivatives, the integrand `g(t, tau)` has
/// `|g_tautau| <= V0 (A2 V0 + 2 A1 V1 + A0 V2)` and
/// `|g_tt| <= 2 A0 (V0 V2 + V1^2)`. The iterated composite-trapezoid bound over
/// the triangle `0 <= tau <= t <= T` (the signal vanishes at both ends with its
/// derivatives) gives `h^2 / 12 * T^2 * (|g_tautau| / 2 + |g_tt|)`, to which a
/// floating-point accumulation term is added.
pub fn no_gain_quadrature_bound(kernel: &ResponseKernel, signal: &BumpSignal, t_max: f64, h: f64) -> f64 {
    let a0 = kernel.norm_bound();
    let rho = kernel.max_frequency();
    let (a1, a2) = (a0 * rho, a0 * rho * rho);
    let [v0, v1, v2] = signal.derivative_bounds();
    let g_tautau = v0 * (a2 * v0 + 2.0 * a1 * v1 + a0 * v2);
    let g_tt = 2.0 * a0 * (v0 * v2 + v1 * v1);
    let steps = (t_max / h).round();
    let truncation = h * h / 12.0 * t_max * t_max * (0.5 * g_tautau + g_tt);
    let roundoff = 16.0 * f64::EPSILON * steps * t_max * t_max * a0 * v0 * v0;
    truncation + roundoff
}

/// Exact value of the no-gain form for the spectral kernel,
/// `1/2 sum_j |int exp(i lambda_j t) (M^H v(t))_j dt|^2`, by fine quadrature.
///
/// Used as an independent check of [`no_gain_check`].
pub fn no_gain_exact(kernel: &ResponseKernel, signal: &BumpSignal, t_max: f64, samples: usize) -> f64 {
    let h = t_max / samples as f64;
    let modes = kernel.coupling_modes.ncols();
    let mut acc = CVector::zeros(modes);
    for n in 0..=samples {
        let t = n as f64 * h;
        let w = if n == 0 || n == samples { 0.5 } else { 1.0 };
        let proj = kernel.coupling_modes.ad_mul(&signal.eval(t));
        for j in 0..modes {
            acc[j] += c64(0.0, kernel.eigvals[j] * t).exp() * proj[j] * (w * h);
        }
    }
    0.5 * acc.norm_squared()
}

/// Minimum of the no-gain form over `trials` random compactly supported
/// signals living on `[0, t_max]` of `grid`.
pub fn no_gain_check(kernel: &ResponseKernel, trials: usize, grid: &TimeGrid, seed: u64) -> NoGainReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_max = grid.t_max();
    let h = grid.step();
    let a: Vec<CMatrix> = grid.times().iter().map(|&t| kernel.eval(t)).collect();
    let trials: Vec<NoGainTrial> = (0..trials)
        .map(|_| {
            let signal = BumpSignal::random(&mut rng, kernel.dim(), t_max);
            let samples: Vec<CVector> = grid.times().iter().map(|&t| signal.eval(t)).collect();
            NoGainTrial {
                value: no_gain_form(&samples, &a, h),
                eps_quad: no_gain_quadrature_bound(kernel, &signal, t_max, h),
            }
        })
        .collect();
    let min_value = trials.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    let min_value = if trials.is_empty() { 0.0 } else { min_value };
    let eps_quad = trials.iter().map(|t| t.eps_quad).fold(0.0, f64::max);
    let negative_excursion = trials.iter().map(|t| (-t.value).max(0.0)).fold(0.0, f64::max);
    let passed = trials.iter().all(|t| t.value >= -t.eps_quad);
    NoGainReport {
        side: kernel.side,
        t_max,
        steps: grid.steps(),
        trials,
        min_value,
        eps_quad,
        negative_excursion,
        passed,
    }
}
