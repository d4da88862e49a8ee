//! Perturbed metrics `g = exp(h)`: the single bump, the glued multi-bump
//! field, a finite-difference scalar curvature, the second-order curvature
//! expansion and the error term of the bubble in the perturbed metric.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{eval_u, eval_u_jet, BubbleParams};
use crate::certify::{ExactCheck, Relation};
use crate::error::{LabError, Result};
use crate::quad::{integrate_half_line, rule16};
use crate::rational::{int, rat, Rational};
use crate::sphere::{mc_sphere_integrals, sample_sphere, McEstimate, SphereLab};
use crate::weyl::{eval_f, eval_f_prime, eval_f_second, WeylForm};

/// Scale `lambda`, amplitude `mu` and inner radius `rho` of a single bump.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PerturbParams {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

impl PerturbParams {
    pub fn new(lambda: f64, mu: f64, rho: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(LabError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(LabError::InvalidParameter(format!("mu must lie in (0, 1], got {mu}")));
        }
        if !(rho >= lambda && rho <= 1.0) {
            return Err(LabError::InvalidParameter(format!("need lambda <= rho <= 1, got rho = {rho}")));
        }
        Ok(PerturbParams { lambda, mu, rho })
    }

    /// `h` vanishes for `|x| >= (1 + rho) / 2`.
    pub fn outer_radius(&self) -> f64 {
        0.5 * (1.0 + self.rho)
    }
}

/// `10 t^3 - 15 t^4 + 6 t^5` clamped to `[0, 1]`, with two derivatives.
pub fn smoothstep5(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        [0.0, 0.0, 0.0]
    } else if t >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let t2 = t * t;
        [
            t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
            30.0 * t2 * (1.0 - t) * (1.0 - t),
            60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        ]
    }
}

/// A `C^2` cutoff equal to 1 for `t <= start` and 0 for `t >= end`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Cutoff {
    pub start: f64,
    pub end: f64,
}

impl Cutoff {
    /// Value and first two derivatives.
    pub fn jet(&self, t: f64) -> [f64; 3] {
        let width = self.end - self.start;
        if width <= 0.0 {
            return [if t < self.start { 1.0 } else { 0.0 }, 0.0, 0.0];
        }
        let [s, d1, d2] = smoothstep5((t - self.start) / width);
        [1.0 - s, -d1 / width, -d2 / (width * width)]
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t)[0]
    }
}

/// End of the transition band of the glued cutoff.
pub const ETA_BAND_END: f64 = 1.5;

/// The glued cutoff: 1 for `t <= 1`, 0 for `t >= 3/2` (so also for `t >= 2`).
pub const ETA: Cutoff = Cutoff { start: 1.0, end: ETA_BAND_END };

pub fn eta(t: f64) -> f64 {
    ETA.eval(t)
}

// `c(sqrt(s))` and its `s`-derivatives from the `r`-jet of `c`.
fn radial_to_s(c: [f64; 3], r: f64) -> [f64; 3] {
    if c[1] == 0.0 && c[2] == 0.0 {
        return [c[0], 0.0, 0.0];
    }
    [c[0], c[1] / (2.0 * r), (c[2] - c[1] / r) / (4.0 * r * r)]
}

/// A radial modulation `psi(|y|^2)` of `H(y)`.
pub trait RadialProfile: Sync {
    /// `psi(s)`, `psi'(s)`, `psi''(s)`.
    fn jet(&self, s: f64) -> [f64; 3];
    /// `psi` vanishes for `s >= support^2`.
    fn support(&self) -> f64;
}

/// `mu lambda^6 f(s / lambda^2) chi(sqrt s)` with `chi` switching off
/// between `rho` and `(1 + rho) / 2`.
#[derive(Clone, Copy, Debug)]
pub struct SingleBumpProfile {
    pub tau: f64,
    pub params: PerturbParams,
    pub cutoff: bool,
}

impl SingleBumpProfile {
    pub fn new(tau: f64, params: PerturbParams) -> Self {
        SingleBumpProfile { tau, params, cutoff: true }
    }

    /// Profile without the outer cutoff (the formula used for `|x| <= rho`).
    pub fn uncut(tau: f64, params: PerturbParams) -> Self {
        SingleBumpProfile { tau, params, cutoff: false }
    }

    fn chi(&self) -> Cutoff {
        Cutoff { start: self.params.rho, end: self.params.outer_radius() }
    }
}

impl RadialProfile for SingleBumpProfile {
    fn jet(&self, s: f64) -> [f64; 3] {
        let PerturbParams { lambda, mu, .. } = self.params;
        let l2 = lambda * lambda;
        let t = s / l2;
        let amp = mu * l2 * l2 * l2;
        let f = [eval_f(self.tau, t), eval_f_prime(t) / l2, eval_f_second(t) / (l2 * l2)];
        let g = if self.cutoff {
            let r = s.sqrt();
            radial_to_s(self.chi().jet(r), r)
        } else {
            [1.0, 0.0, 0.0]
        };
        [
            amp * f[0] * g[0],
            amp * (f[1] * g[0] + f[0] * g[1]),
            amp * (f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2]),
        ]
    }

    fn support(&self) -> f64 {
        if self.cutoff {
            self.params.outer_radius()
        } else {
            f64::INFINITY
        }
    }
}

/// `2^(-4N) f(2^N s) eta(4 N^2 sqrt s)`, the `N`-th glued bump.
#[derive(Clone, Copy, Debug)]
pub struct GluedBumpProfile {
    pub tau: f64,
    pub index: u32,
    pub cutoff: Cutoff,
}

impl RadialProfile for GluedBumpProfile {
    fn jet(&self, s: f64) -> [f64; 3] {
        let nn = self.index as f64;
        let k = 4.0 * nn * nn;
        let r = s.sqrt();
        if k * r >= self.cutoff.end {
            return [0.0; 3];
        }
        let two_n = 2f64.powi(self.index as i32);
        let amp = 2f64.powi(-4 * self.index as i32);
        let t = two_n * s;
        let f = [eval_f(self.tau, t), two_n * eval_f_prime(t), two_n * two_n * eval_f_second(t)];
        let c = self.cutoff.jet(k * r);
        let g = radial_to_s([c[0], k * c[1], k * k * c[2]], r);
        [
            amp * f[0] * g[0],
            amp * (f[1] * g[0] + f[0] * g[1]),
            amp * (f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2]),
        ]
    }

    fn support(&self) -> f64 {
        let nn = self.index as f64;
        self.cutoff.end / (4.0 * nn * nn)
    }
}

/// `h`, `d_l h` (one matrix per `l`) and, optionally, `d_l d_m h`
/// (index `l n + m`).
#[derive(Clone, Debug)]
pub struct HJet {
    pub h: DMatrix<f64>,
    pub dh: Vec<DMatrix<f64>>,
    pub d2h: Vec<DMatrix<f64>>,
}

/// Terms of the second-order expansion of the scalar curvature.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpansionTerms {
    /// `d_i d_k h_ik - d_i (h_il d_k h_kl) + 1/2 |div h|^2 - 1/4 sum (d_l h_ik)^2`.
    pub full: f64,
    /// `-1/4 sum (d_l h_ik)^2`.
    pub reduced: f64,
    pub max_divergence: f64,
}

impl HJet {
    fn n(&self) -> usize {
        self.h.nrows()
    }

    /// `sum_i d_i h_ik` for each `k`.
    pub fn divergence(&self) -> Vec<f64> {
        let n = self.n();
        (0..n).map(|k| (0..n).map(|i| self.dh[i][(i, k)]).sum()).collect()
    }

    pub fn grad_sq(&self) -> f64 {
        self.dh.iter().map(|m| m.norm_squared()).sum()
    }

    /// Frobenius norms of `h`, `dh` and `d^2 h`.
    pub fn norms(&self) -> [f64; 3] {
        [self.h.norm(), self.grad_sq().sqrt(), self.d2h.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()]
    }

    pub fn expansion(&self) -> ExpansionTerms {
        let n = self.n();
        assert_eq!(self.d2h.len(), n * n, "second derivatives required");
        let div = self.divergence();
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        for i in 0..n {
            for k in 0..n {
                let d = &self.d2h[i * n + k];
                t1 += d[(i, k)];
                for l in 0..n {
                    t2 += self.h[(i, l)] * d[(k, l)];
                }
            }
        }
        let div_sq: f64 = div.iter().map(|v| v * v).sum();
        let reduced = -0.25 * self.grad_sq();
        ExpansionTerms {
            full: t1 - t2 - 0.5 * div_sq + reduced,
            reduced,
            max_divergence: div.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

/// `h(x) = psi(|x - c|^2) H(x - c)`.
pub struct Bump<'a, P: RadialProfile> {
    pub w: &'a WeylForm,
    pub center: Vec<f64>,
    pub profile: P,
}

impl<'a, P: RadialProfile> Bump<'a, P> {
    pub fn centered(w: &'a WeylForm, profile: P) -> Self {
        Bump { w, center: vec![0.0; w.n()], profile }
    }

    fn offset(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let s = y.iter().map(|v| v * v).sum();
        (y, s)
    }

    pub fn h(&self, x: &[f64]) -> DMatrix<f64> {
        let (y, s) = self.offset(x);
        let n = self.w.n();
        let sup = self.profile.support();
        if s >= sup * sup {
            return DMatrix::zeros(n, n);
        }
        self.w.h(&y) * self.profile.jet(s)[0]
    }

    /// Analytic derivatives of `h`; second derivatives only when asked.
    pub fn jet(&self, x: &[f64], second: bool) -> HJet {
        let n = self.w.n();
        let (y, s) = self.offset(x);
        let [psi, d1, d2] = self.profile.jet(s);
        let hy = self.w.h(&y);
        let dhy = self.w.dh(&y);
        let dphi: Vec<f64> = y.iter().map(|v| 2.0 * v * d1).collect();
        let dh: Vec<DMatrix<f64>> = (0..n).map(|l| &hy * dphi[l] + &dhy[l] * psi).collect();
        let mut d2h = Vec::new();
        if second {
            d2h.reserve(n * n);
            for l in 0..n {
                for m in 0..n {
                    let mut ddphi = 4.0 * y[l] * y[m] * d2;
                    if l == m {
                        ddphi += 2.0 * d1;
                    }
                    let mut mat = self.w.d2h(l, m) * psi;
                    mat += &hy * ddphi;
                    mat += &dhy[m] * dphi[l];
                    mat += &dhy[l] * dphi[m];
                    d2h.push(mat);
                }
            }
        }
        HJet { h: hy * psi, dh, d2h }
    }
}

/// The metric at a point.
#[derive(Clone, Debug)]
pub struct MetricAtPoint {
    pub x: Vec<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricAtPoint {
    pub fn new(x: &[f64], h: DMatrix<f64>) -> Result<Self> {
        let (g, g_inv) = matrix_exp(&h)?;
        Ok(MetricAtPoint { x: x.to_vec(), h, g, g_inv })
    }
}

fn asymmetry(h: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..h.nrows() {
        for k in 0..i {
            worst = worst.max((h[(i, k)] - h[(k, i)]).abs());
        }
    }
    worst
}

/// `exp(h) - I` by scaling and squaring of the Taylor series, kept in
/// deviation form so that rounding is relative to `|h|` rather than to 1.
pub fn exp_deviation(h: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let norm1 = (0..n).map(|j| h.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    while norm1 / 2f64.powi(squarings) > 0.125 {
        squarings += 1;
    }
    let a = h / 2f64.powi(squarings);
    // exp(a) - I = a (I + a/2 (I + a/3 (...)))
    let mut p = DMatrix::identity(n, n);
    for k in (2..=10).rev() {
        p = (&a * p) / k as f64;
        for i in 0..n {
            p[(i, i)] += 1.0;
        }
    }
    p = &a * p;
    for _ in 0..squarings {
        p = &p * 2.0 + &p * &p;
    }
    (&p + p.transpose()) * 0.5
}

/// `(exp(h), exp(-h))` for symmetric `h`.
pub fn matrix_exp(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_symmetric(h)?;
    let n = h.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    Ok((exp_deviation(h) + &id, exp_deviation(&-h) + id))
}

fn check_symmetric(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(LabError::InvalidParameter("matrix must be square".into()));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("matrix exponential input".into()));
    }
    let asym = asymmetry(h);
    if asym > 1e-12 * (1.0 + h.amax()) {
        return Err(LabError::NotSymmetric(asym));
    }
    Ok(())
}

/// `exp(h)` through the eigen-decomposition of `h`; accurate only when the
/// spectrum is well separated, kept as an independent cross-check.
pub fn matrix_exp_eigen(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(h)?;
    let eig = SymmetricEigen::new(h.clone());
    let mut vs = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        vs.column_mut(j).scale_mut(lam.exp());
    }
    Ok(&vs * eig.eigenvectors.transpose())
}

/// Scalar curvature with an error estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurvatureEstimate {
    pub value: f64,
    pub error: f64,
}

fn spd_inverse(g: &DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    Cholesky::new(g.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| LabError::InvalidParameter(format!("metric is not positive definite near {x:?}")))
}

type MetricFn<'a> = &'a (dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Sync);

// `metric` returns `g - base`, with `base` the identity or zero.
fn curvature_at_step(metric: MetricFn, base: f64, x: &[f64], d: f64) -> Result<f64> {
    let n = x.len();
    let eval = |shift: &[(usize, f64)]| -> Result<DMatrix<f64>> {
        let mut p = x.to_vec();
        for &(i, v) in shift {
            p[i] += v;
        }
        let dev = metric(&p)?;
        let g = &dev + DMatrix::<f64>::identity(n, n) * base;
        if Cholesky::new(g).is_none() {
            return Err(LabError::InvalidParameter(format!("metric is not positive definite at {p:?}")));
        }
        Ok(dev)
    };
    let g0 = eval(&[])?;
    let axis: Vec<(DMatrix<f64>, DMatrix<f64>)> =
        (0..n).into_par_iter().map(|i| Ok((eval(&[(i, d)])?, eval(&[(i, -d)])?))).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |k| (i, k))).collect();
    let mixed: Vec<DMatrix<f64>> = pairs
        .par_iter()
        .map(|&(i, k)| {
            let pp = eval(&[(i, d), (k, d)])?;
            let pm = eval(&[(i, d), (k, -d)])?;
            let mp = eval(&[(i, -d), (k, d)])?;
            let mm = eval(&[(i, -d), (k, -d)])?;
            Ok((pp - pm - mp + mm) / (4.0 * d * d))
        })
        .collect::<Result<_>>()?;

    let dg: Vec<DMatrix<f64>> = axis.iter().map(|(p, m)| (p - m) / (2.0 * d)).collect();
    let mut d2g = vec![DMatrix::zeros(n, n); n * n];
    for (i, (p, m)) in axis.iter().enumerate() {
        d2g[i * n + i] = (p - &g0 * 2.0 + m) / (d * d);
    }
    for (&(i, k), m) in pairs.iter().zip(mixed) {
        d2g[i * n + k] = m.clone();
        d2g[k * n + i] = m;
    }
    let gi = spd_inverse(&(&g0 + DMatrix::<f64>::identity(n, n) * base), x)?;
    let dgi: Vec<DMatrix<f64>> = dg.iter().map(|m| -(&gi * m * &gi)).collect();

    // Christoffel symbols of the first kind, gamma1[l][(i, j)].
    let gamma1: Vec<DMatrix<f64>> = (0..n)
        .map(|l| DMatrix::from_fn(n, n, |i, j| 0.5 * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)])))
        .collect();
    // Second kind, gamma2[k][(i, j)] = g^{kl} gamma1[l][(i, j)].
    let gamma2: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut m = DMatrix::zeros(n, n);
            for l in 0..n {
                m += &gamma1[l] * gi[(k, l)];
            }
            m
        })
        .collect();
    // d_m gamma1[l][(i, j)].
    let dgamma1 = |m: usize, l: usize, i: usize, j: usize| {
        0.5 * (d2g[m * n + i][(l, j)] + d2g[m * n + j][(l, i)] - d2g[m * n + l][(i, j)])
    };

    let mut ricci = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut v = 0.0;
            for k in 0..n {
                for l in 0..n {
                    // d_k Gamma^k_ij - d_j Gamma^k_ik
                    v += dgi[k][(k, l)] * gamma1[l][(i, j)] + gi[(k, l)] * dgamma1(k, l, i, j);
                    v -= dgi[j][(k, l)] * gamma1[l][(i, k)] + gi[(k, l)] * dgamma1(j, l, i, k);
                    v += gamma2[k][(k, l)] * gamma2[l][(i, j)] - gamma2[k][(j, l)] * gamma2[l][(i, k)];
                }
            }
            ricci[(i, j)] = v;
            ricci[(j, i)] = v;
        }
    }
    Ok(gi.component_mul(&ricci).sum())
}

/// Scalar curvature of `metric` at `x` from central differences with steps
/// `step` and `step / 2`, combined by Richardson extrapolation.
pub fn scalar_curvature(metric: MetricFn, x: &[f64], step: f64) -> Result<CurvatureEstimate> {
    richardson(metric, 0.0, x, step)
}

/// As [`scalar_curvature`] for a metric given by its deviation `g - I`,
/// which keeps the differences free of cancellation against the identity.
pub fn scalar_curvature_near_flat(deviation: MetricFn, x: &[f64], step: f64) -> Result<CurvatureEstimate> {
    richardson(deviation, 1.0, x, step)
}

fn richardson(metric: MetricFn, base: f64, x: &[f64], step: f64) -> Result<CurvatureEstimate> {
    if !(step > 0.0) {
        return Err(LabError::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let coarse = curvature_at_step(metric, base, x, step)?;
    let fine = curvature_at_step(metric, base, x, 0.5 * step)?;
    Ok(CurvatureEstimate { value: (4.0 * fine - coarse) / 3.0, error: (fine - coarse).abs() / 3.0 })
}

/// Default finite-difference step factor: `step = factor (lambda + |x|)`.
pub const FD_STEP_FACTOR: f64 = 1e-3;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One point of the curvature-expansion check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionPoint {
    pub x_norm: f64,
    pub r_numeric: f64,
    pub r_numeric_error: f64,
    pub r_expansion: f64,
    pub r_reduced: f64,
    pub remainder: f64,
    /// `|h|^2 |d^2 h| + |h| |dh|^2`.
    pub bound: f64,
    pub max_divergence: f64,
    pub dh_norm: f64,
}

/// Compares the finite-difference curvature of `exp(h)` with the analytic
/// second-order expansion at `x`.
pub fn curvature_expansion_check<P: RadialProfile>(bump: &Bump<P>, x: &[f64], step: f64) -> Result<ExpansionPoint> {
    let jet = bump.jet(x, true);
    let terms = jet.expansion();
    let [nh, ndh, nd2h] = jet.norms();
    let metric = |p: &[f64]| -> Result<DMatrix<f64>> { Ok(exp_deviation(&bump.h(p))) };
    let r = scalar_curvature_near_flat(&metric, x, step)?;
    Ok(ExpansionPoint {
        x_norm: norm(x),
        r_numeric: r.value,
        r_numeric_error: r.error,
        r_expansion: terms.full,
        r_reduced: terms.reduced,
        remainder: r.value - terms.full,
        bound: nh * nh * nd2h + nh * ndh * ndh,
        max_divergence: terms.max_divergence,
        dh_norm: ndh,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.abs().ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `max |H(w)|_F` over `samples` random unit directions.
pub fn sampled_direction_sup(w: &WeylForm, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; w.n()];
    let mut best = 0.0f64;
    for _ in 0..samples {
        sample_sphere(&mut rng, &mut u);
        best = best.max(w.h(&u).norm());
    }
    best
}

/// Factor `kappa` such that `kappa W` gives `sup_{|x| <= 2 lambda} |h| = 1/2`
/// at `mu = 1` (estimated over sampled directions).
pub fn unit_sup_scaling(w: &WeylForm, tau: f64, lambda: f64, seed: u64) -> f64 {
    let dir = sampled_direction_sup(w, 4096, seed);
    let radial = (0..=2000)
        .map(|k| {
            let t = 2.0 * k as f64 / 2000.0;
            t * t * eval_f(tau, t * t).abs()
        })
        .fold(0.0f64, f64::max);
    1.0 / (2.0 * lambda.powi(8) * dir * radial)
}

/// Uniform random point with `lo <= |x| <= hi`.
pub fn sample_shell(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut u = vec![0.0; n];
    sample_sphere(rng, &mut u);
    let r = lo + (hi - lo) * rng.gen::<f64>();
    u.iter().map(|v| v * r).collect()
}

/// Curvature expansion over a sample of points and amplitudes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionStudy {
    pub n: usize,
    pub lambda: f64,
    pub rho: f64,
    pub kappa: f64,
    pub mus: Vec<f64>,
    /// `points[j]` holds the points evaluated at `mus[j]`.
    pub points: Vec<Vec<ExpansionPoint>>,
    /// Root-mean-square remainder per amplitude.
    pub remainder_rms: Vec<f64>,
    pub mu_slope: f64,
    /// `max |remainder| / bound` per amplitude.
    pub fitted_c: Vec<f64>,
    pub max_reduction_error: f64,
}

impl ExpansionStudy {
    /// Points at which `|remainder| <= 2 C bound`, with `C` fitted at the
    /// largest amplitude.
    pub fn points_within_bound(&self) -> (usize, usize) {
        let c = self.fitted_c.first().copied().unwrap_or(0.0);
        let all = self.points.iter().flatten();
        let total = all.clone().count();
        let ok = all.filter(|p| p.remainder.abs() <= 2.0 * c * p.bound).count();
        (ok, total)
    }
}

/// Runs the expansion check for the single bump at `points` random points
/// with `0.2 lambda <= |x| <= 2 lambda`. `W` is rescaled by
/// [`unit_sup_scaling`] so that the curvature is resolvable.
pub fn expansion_study(
    w: &WeylForm,
    tau: f64,
    lambda: f64,
    rho: f64,
    mus: &[f64],
    points: usize,
    seed: u64,
    fd_factor: f64,
) -> Result<ExpansionStudy> {
    let n = w.n();
    let kappa = unit_sup_scaling(w, tau, lambda, seed);
    let wk = w.scaled(kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..points).map(|_| sample_shell(&mut rng, n, 0.2 * lambda, 2.0 * lambda)).collect();
    let mut all = Vec::with_capacity(mus.len());
    for &mu in mus {
        let params = PerturbParams::new(lambda, mu, rho)?;
        let bump = Bump::centered(&wk, SingleBumpProfile::new(tau, params));
        let pts: Vec<ExpansionPoint> = xs
            .iter()
            .map(|x| curvature_expansion_check(&bump, x, fd_factor * (lambda + norm(x))))
            .collect::<Result<_>>()?;
        all.push(pts);
    }
    let remainder_rms: Vec<f64> = all
        .iter()
        .map(|pts| (pts.iter().map(|p| p.remainder * p.remainder).sum::<f64>() / pts.len() as f64).sqrt())
        .collect();
    let fitted_c = all.iter().map(|pts| pts.iter().map(|p| p.remainder.abs() / p.bound).fold(0.0, f64::max)).collect();
    let max_reduction_error = all
        .iter()
        .flatten()
        .map(|p| (p.r_expansion - p.r_reduced).abs() / p.r_reduced.abs())
        .fold(0.0, f64::max);
    Ok(ExpansionStudy {
        n,
        lambda,
        rho,
        kappa,
        mus: mus.to_vec(),
        mu_slope: loglog_slope(mus, &remainder_rms),
        points: all,
        remainder_rms,
        fitted_c,
        max_reduction_error,
    })
}

/// `max |h|` over `|x| <= lambda` for a fixed set of sampled unit-ball points.
pub fn single_bump_sup(w: &WeylForm, tau: f64, params: PerturbParams, samples: usize, seed: u64) -> f64 {
    let n = w.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bump = Bump::centered(w, SingleBumpProfile::new(tau, params));
    (0..samples)
        .map(|_| {
            let y = sample_shell(&mut rng, n, 0.0, 1.0);
            let x: Vec<f64> = y.iter().map(|v| v * params.lambda).collect();
            bump.h(&x).norm()
        })
        .fold(0.0, f64::max)
}

/// `-(n-2)/(16(n-1)) int sum (d_l hbar_ik)^2 u_(0,eps)^2` for the uncut
/// profile at `lambda = mu = 1`, assembled from the sphere averages of
/// `|H|^2` and `x^T Q x` and a radial quadrature of the metric profile.
pub fn axis_energy_from_metric(w: &WeylForm, tau: f64, eps: f64) -> Result<f64> {
    let n = w.n();
    let nf = n as f64;
    if n < 20 {
        return Err(LabError::UnsupportedDimension { n: n as i64, reason: "radial integral diverges".into() });
    }
    let lab = SphereLab::new(w);
    let pc = lab.pieces(0, 0);
    let profile = SingleBumpProfile::uncut(tau, PerturbParams::new(1.0, 1.0, 1.0)?);
    let a = 0.5 * (nf - 2.0);
    let radial = integrate_half_line(
        |r| {
            let s = r * r;
            let [psi, d1, _] = profile.jet(s);
            let u2 = (eps / (eps * eps + s)).powf(2.0 * a);
            let grad = (4.0 * s * d1 * d1 + 8.0 * psi * d1) * s * s * pc.h_sq + psi * psi * s * pc.grad_sq;
            r.powi(n as i32 - 1) * u2 * grad
        },
        eps,
        nf - 17.0,
        1e-13,
    );
    Ok(-(nf - 2.0) / (16.0 * (nf - 1.0)) * radial.value)
}

// Per-direction data for the error term: |H(w)|^2, w^T Q w, xi^ H xi^,
// |H xi^|^2, sum H_il (U + T)_li and w . xi^, for a unit direction xi^.
#[derive(Clone, Copy, Debug, Default)]
struct DirectionData {
    h_sq: f64,
    q_form: f64,
    h_xx: f64,
    h_x_sq: f64,
    k: f64,
    cos: f64,
}

fn direction_data(w: &WeylForm, q: &DMatrix<f64>, z: &[f64], xi_hat: &[f64], om: &[f64], hm: &mut DMatrix<f64>) -> DirectionData {
    let n = w.n();
    w.h_into(om, hm);
    let h_sq = hm.norm_squared();
    let mut q_form = 0.0;
    for i in 0..n {
        let qi: f64 = (0..n).map(|k| q[(i, k)] * om[k]).sum();
        q_form += om[i] * qi;
    }
    let mut h_xx = 0.0;
    let mut h_x_sq = 0.0;
    for i in 0..n {
        let v: f64 = (0..n).map(|k| hm[(i, k)] * xi_hat[k]).sum();
        h_xx += xi_hat[i] * v;
        h_x_sq += v * v;
    }
    let mut k = 0.0;
    if !z.is_empty() {
        for l in 0..n {
            for i in 0..n {
                let hli = hm[(l, i)];
                if hli == 0.0 {
                    continue;
                }
                let base_u = (l * n + i) * n;
                let u: f64 = (0..n).map(|qq| z[base_u + qq] * om[qq]).sum();
                let t: f64 = (0..n).map(|qq| z[(l * n + qq) * n + i] * om[qq]).sum();
                k += hli * (u + t);
            }
        }
    }
    let cos = om.iter().zip(xi_hat).map(|(a, b)| a * b).sum();
    DirectionData { h_sq, q_form, h_xx, h_x_sq, k, cos }
}

/// One `(h, u)` configuration of the error term.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorTermConfig {
    pub params: PerturbParams,
    pub bubble: BubbleParams,
}

impl ErrorTermConfig {
    /// `xi = (lambda / 2) e_1`, `eps = lambda`.
    pub fn standard(n: usize, params: PerturbParams) -> Result<Self> {
        let mut xi = vec![0.0; n];
        xi[0] = 0.5 * params.lambda;
        Ok(ErrorTermConfig { params, bubble: BubbleParams::new(xi, params.lambda)? })
    }
}

/// `L^(2n/(n+2))` norm of the error term with its Monte Carlo error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorNorm {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub eps: f64,
    pub xi_norm: f64,
    pub value: f64,
    pub std_error: f64,
    /// Estimate of `int |E|^q`.
    pub integral: McEstimate,
}

// Error term at x = r w from the direction data, through second order in h.
fn error_from_direction(
    d: &DirectionData,
    profile: &SingleBumpProfile,
    n: usize,
    xi_norm: f64,
    eps: f64,
    r: f64,
) -> f64 {
    let nf = n as f64;
    let a = 0.5 * (nf - 2.0);
    let c = (nf - 2.0) / (4.0 * (nf - 1.0));
    let s = r * r;
    let [phi, d1, _] = profile.jet(s);
    if phi == 0.0 && d1 == 0.0 {
        return 0.0;
    }
    let y_sq = s - 2.0 * r * xi_norm * d.cos + xi_norm * xi_norm;
    let dd = eps * eps + y_sq;
    let u = (eps / dd).powf(a);
    let h_sq = s * s * d.h_sq;
    let h_xx = s * xi_norm * xi_norm * d.h_xx;
    let h_x_sq = s * s * xi_norm * xi_norm * d.h_x_sq;
    let k = s * r * xi_norm * d.k;
    let grad_sq = 4.0 * s * d1 * d1 * h_sq + 8.0 * phi * d1 * h_sq + phi * phi * s * d.q_form;
    let p2 = phi * phi;
    let div_part = a * u * p2 * (k + h_sq) / dd;
    let hess_part = -4.0 * a * (a + 1.0) * u * phi * h_xx / (dd * dd) - a * u * p2 * h_sq / dd
        + 2.0 * a * (a + 1.0) * u * p2 * h_x_sq / (dd * dd);
    div_part + hess_part + 0.25 * c * grad_sq * u
}

fn radial_breaks(cfg: &ErrorTermConfig) -> Vec<f64> {
    let p = cfg.params;
    let outer = p.outer_radius();
    let xi = norm(&cfg.bubble.xi);
    let base = 0.25 * cfg.bubble.eps.min(if xi > 0.0 { xi } else { f64::INFINITY }).min(p.lambda);
    let mut b = vec![0.0];
    let mut r = base;
    while r < outer {
        b.push(r);
        r *= 2.0;
    }
    b.push(p.rho);
    b.push(outer);
    b.sort_by(|a, c| a.partial_cmp(c).unwrap());
    b.dedup_by(|a, c| (*a - *c).abs() < 1e-15);
    b
}

/// Error-term norms for several configurations sharing one set of
/// Monte Carlo directions. All bubble centres must be parallel.
pub fn error_term_norms(
    w: &WeylForm,
    tau: f64,
    configs: &[ErrorTermConfig],
    samples: usize,
    seed: u64,
) -> Result<Vec<ErrorNorm>> {
    let n = w.n();
    let nf = n as f64;
    let q_exp = 2.0 * nf / (nf + 2.0);
    let mut xi_hat = vec![0.0; n];
    xi_hat[0] = 1.0;
    if let Some(c) = configs.iter().find(|c| norm(&c.bubble.xi) > 0.0) {
        let len = norm(&c.bubble.xi);
        xi_hat = c.bubble.xi.iter().map(|v| v / len).collect();
    }
    for c in configs {
        if c.bubble.n() != n {
            return Err(LabError::InvalidParameter("bubble dimension mismatch".into()));
        }
        let len = norm(&c.bubble.xi);
        let off = c.bubble.xi.iter().zip(&xi_hat).map(|(a, b)| (a - len * b).abs()).fold(0.0, f64::max);
        if off > 1e-12 * (1.0 + len) {
            return Err(LabError::InvalidParameter("bubble centres must be parallel".into()));
        }
    }
    let q = w.contractions().q;
    let z = w.contract_third(&xi_hat);
    let setups: Vec<(SingleBumpProfile, f64, Vec<f64>)> = configs
        .iter()
        .map(|c| (SingleBumpProfile::new(tau, c.params), norm(&c.bubble.xi), radial_breaks(c)))
        .collect();
    let rule = rule16();
    let est = mc_sphere_integrals(
        n,
        configs.len(),
        samples,
        seed,
        || DMatrix::zeros(n, n),
        |hm, om, out| {
            let d = direction_data(w, &q, &z, &xi_hat, om, hm);
            for ((cfg, (profile, xi_norm, breaks)), o) in configs.iter().zip(&setups).zip(out.iter_mut()) {
                let mut acc = 0.0;
                for pair in breaks.windows(2) {
                    let mid = 0.5 * (pair[0] + pair[1]);
                    for (lo, hi) in [(pair[0], mid), (mid, pair[1])] {
                        for (r, wt) in rule.mapped(lo, hi) {
                            let e = error_from_direction(&d, profile, n, *xi_norm, cfg.bubble.eps, r);
                            if e != 0.0 {
                                acc += wt * r.powi(n as i32 - 1) * e.abs().powf(q_exp);
                            }
                        }
                    }
                }
                *o = acc;
            }
        },
    )?;
    Ok(configs
        .iter()
        .zip(est)
        .map(|(c, e)| {
            let value = e.estimate.max(0.0).powf(1.0 / q_exp);
            let std_error = if e.estimate > 0.0 { value / (q_exp * e.estimate) * e.std_error } else { 0.0 };
            ErrorNorm {
                lambda: c.params.lambda,
                mu: c.params.mu,
                rho: c.params.rho,
                eps: c.bubble.eps,
                xi_norm: norm(&c.bubble.xi),
                value,
                std_error,
                integral: e,
            }
        })
        .collect())
}

pub fn error_term_norm(
    w: &WeylForm,
    tau: f64,
    params: PerturbParams,
    bubble: &BubbleParams,
    samples: usize,
    seed: u64,
) -> Result<ErrorNorm> {
    let cfg = ErrorTermConfig { params, bubble: bubble.clone() };
    Ok(error_term_norms(w, tau, &[cfg], samples, seed)?.remove(0))
}

/// Second-order error term at a point, evaluated directly from `H(x)`.
pub fn error_term_pointwise(w: &WeylForm, tau: f64, params: PerturbParams, bubble: &BubbleParams, x: &[f64]) -> f64 {
    let r = norm(x);
    if r == 0.0 {
        return 0.0;
    }
    let om: Vec<f64> = x.iter().map(|v| v / r).collect();
    let xi_norm = norm(&bubble.xi);
    let xi_hat: Vec<f64> = if xi_norm > 0.0 {
        bubble.xi.iter().map(|v| v / xi_norm).collect()
    } else {
        let mut e = vec![0.0; w.n()];
        e[0] = 1.0;
        e
    };
    let q = w.contractions().q;
    let z = w.contract_third(&xi_hat);
    let mut hm = DMatrix::zeros(w.n(), w.n());
    let d = direction_data(w, &q, &z, &xi_hat, &om, &mut hm);
    error_from_direction(&d, &SingleBumpProfile::new(tau, params), w.n(), xi_norm, bubble.eps, r)
}

/// `Delta_g u - c R_g u + n(n-2) u^((n+2)/(n-2))` evaluated with the exact
/// matrix exponential and finite differences (no expansion in `h`).
pub fn error_term_bruteforce(
    w: &WeylForm,
    tau: f64,
    params: PerturbParams,
    bubble: &BubbleParams,
    x: &[f64],
    step: f64,
) -> Result<f64> {
    let n = w.n();
    let nf = n as f64;
    let bump = Bump::centered(w, SingleBumpProfile::new(tau, params));
    // V_i = sum_k (g^ik - delta_ik) d_k u; Delta_g u - Delta u = div V since det g = 1.
    let flux = |p: &[f64]| -> Result<Vec<f64>> {
        let pi = exp_deviation(&-bump.h(p));
        let jet = eval_u_jet(bubble, p);
        Ok((0..n)
            .map(|i| (0..n).map(|k| pi[(i, k)] * jet.grad[k]).sum())
            .collect())
    };
    let div_at = |d: f64| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..n {
            let mut p = x.to_vec();
            p[i] += d;
            let plus = flux(&p)?[i];
            p[i] -= 2.0 * d;
            let minus = flux(&p)?[i];
            acc += (plus - minus) / (2.0 * d);
        }
        Ok(acc)
    };
    let div = (4.0 * div_at(0.5 * step)? - div_at(step)?) / 3.0;
    let metric = |p: &[f64]| -> Result<DMatrix<f64>> { Ok(exp_deviation(&bump.h(p))) };
    let r = scalar_curvature_near_flat(&metric, x, step)?;
    let u = eval_u(bubble, x);
    let jet = eval_u_jet(bubble, x);
    let flat = jet.laplacian() + nf * (nf - 2.0) * u.powf((nf + 2.0) / (nf - 2.0));
    Ok(flat + div - (nf - 2.0) / (4.0 * (nf - 1.0)) * r.value * u)
}

/// Truncated glued field `sum_{N0 <= N <= N_max} eta(4N^2|x - y_N|) 2^(-4N)
/// f(2^N |x - y_N|^2) H(x - y_N)` with `y_N = e_1 / N`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct GluedBumpSpec {
    pub n0: u32,
    pub n_max: u32,
    pub cutoff: Cutoff,
}

impl GluedBumpSpec {
    /// Spec with the default cutoff; fails if neighbouring supports meet.
    pub fn new(n0: u32, n_max: u32) -> Result<Self> {
        Self::with_cutoff(n0, n_max, ETA)
    }

    pub fn with_cutoff(n0: u32, n_max: u32, cutoff: Cutoff) -> Result<Self> {
        if n0 < 1 || n_max < n0 {
            return Err(LabError::InvalidParameter(format!("need 1 <= N0 <= N_max, got {n0}..{n_max}")));
        }
        if !(cutoff.start == 1.0 && cutoff.end > 1.0 && cutoff.end <= 2.0) {
            return Err(LabError::InvalidParameter("cutoff must switch off between t = 1 and t = 2".into()));
        }
        let spec = GluedBumpSpec { n0, n_max, cutoff };
        if let Some(c) = spec.disjointness_certificate().iter().find(|c| !c.holds()) {
            let idx = c.name.trim_start_matches("separation N=").parse().unwrap_or(n0);
            return Err(LabError::OverlappingSupports(idx));
        }
        Ok(spec)
    }

    fn band_end(&self) -> Rational {
        Rational::from_float(self.cutoff.end).unwrap_or_else(|| int(2))
    }

    /// Exact support radius `end / (4 N^2)`.
    pub fn support_radius(&self, index: u32) -> Rational {
        let nn = int(index as i64);
        self.band_end() / (int(4) * &nn * &nn)
    }

    pub fn center(&self, index: u32, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        y[0] = 1.0 / index as f64;
        y
    }

    /// `1/N - 1/(N+1) > r_N + r_(N+1)` for consecutive indices, exactly.
    pub fn disjointness_certificate(&self) -> Vec<ExactCheck> {
        (self.n0..self.n_max)
            .map(|nn| {
                let gap = rat(1, nn as i64) - rat(1, nn as i64 + 1);
                let reach = self.support_radius(nn) + self.support_radius(nn + 1);
                ExactCheck::new(format!("separation N={nn}"), gap, Relation::Greater, reach)
            })
            .collect()
    }

    /// `max_N (1/N + r_N) < 1/2`: the field vanishes for `|x| >= 1/2`.
    pub fn vanishing_certificate(&self) -> ExactCheck {
        let reach = (self.n0..=self.n_max)
            .map(|nn| rat(1, nn as i64) + self.support_radius(nn))
            .fold(Rational::zero(), |m, v| if v > m { v } else { m });
        ExactCheck::new("outer reach", reach, Relation::Less, Rational::one() / int(2))
    }

    pub fn profile(&self, tau: f64, index: u32) -> GluedBumpProfile {
        GluedBumpProfile { tau, index, cutoff: self.cutoff }
    }

    /// Indices whose supports contain `x`.
    pub fn active(&self, x: &[f64]) -> Vec<u32> {
        let rest: f64 = x[1..].iter().map(|v| v * v).sum();
        let approx = if x[0] > 0.0 { 1.0 / x[0] } else { f64::INFINITY };
        let lo = (approx.min(1e9) - 2.0).floor().max(self.n0 as f64) as u32;
        let hi = ((approx.min(1e9) + 2.0).ceil().min(self.n_max as f64)) as u32;
        (lo..=hi)
            .filter(|&nn| {
                let d0 = x[0] - 1.0 / nn as f64;
                let dist = (d0 * d0 + rest).sqrt();
                dist * 4.0 * (nn as f64).powi(2) < self.cutoff.end
            })
            .collect()
    }
}

/// The glued field at `x`.
pub fn glued_h(spec: &GluedBumpSpec, w: &WeylForm, tau: f64, x: &[f64]) -> DMatrix<f64> {
    let n = w.n();
    let mut h = DMatrix::zeros(n, n);
    for nn in spec.active(x) {
        let bump = Bump { w, center: spec.center(nn, n), profile: spec.profile(tau, nn) };
        h += bump.h(x);
    }
    h
}

/// The `N`-th summand at `y_N + offset`, evaluated from the offset so that
/// tiny neighbourhoods of the centre keep full precision.
pub fn glued_bump_local(spec: &GluedBumpSpec, w: &WeylForm, tau: f64, index: u32, offset: &[f64]) -> HJet {
    Bump::centered(w, spec.profile(tau, index)).jet(offset, true)
}

/// Sup-norms of one glued bump over sampled points.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BumpSup {
    pub index: u32,
    /// `max |h|` over `|x - y_N| <= 2^(-N/2)`.
    pub core: f64,
    /// `max (|h| + |dh| + |d^2 h|)` over the whole support.
    pub support_c2: f64,
}

/// Per-bump sup-norms for every index of `spec`: `core_samples` points for
/// `|h|` on the core ball, the first `c2_samples` of them for the `C^2` norm.
pub fn glued_bump_sups(
    spec: &GluedBumpSpec,
    w: &WeylForm,
    tau: f64,
    core_samples: usize,
    c2_samples: usize,
    seed: u64,
) -> Vec<BumpSup> {
    let n = w.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball: Vec<Vec<f64>> = (0..core_samples)
        .map(|_| {
            let mut u = vec![0.0; n];
            sample_sphere(&mut rng, &mut u);
            let r = rng.gen::<f64>().powf(1.0 / 3.0);
            u.iter().map(|v| v * r).collect()
        })
        .collect();
    (spec.n0..=spec.n_max)
        .into_par_iter()
        .map(|nn| {
            let core_r = 2f64.powf(-(nn as f64) / 2.0);
            let supp = spec.cutoff.end / (4.0 * (nn as f64).powi(2));
            let bump = Bump::centered(w, spec.profile(tau, nn));
            let mut core = 0.0f64;
            let mut c2 = 0.0f64;
            for (k, z) in ball.iter().enumerate() {
                let y: Vec<f64> = z.iter().map(|v| v * core_r).collect();
                core = core.max(bump.h(&y).norm());
                if k >= c2_samples {
                    continue;
                }
                let y: Vec<f64> = z.iter().map(|v| v * supp).collect();
                let [a, b, c] = bump.jet(&y, true).norms();
                c2 = c2.max(a + b + c);
            }
            BumpSup { index: nn, core, support_c2: c2 }
        })
        .collect()
}
