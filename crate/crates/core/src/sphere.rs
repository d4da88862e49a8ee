//! Polynomial integrals over round spheres and Monte Carlo cross-checks of
//! the sphere identities for `H` and `f(|x|^2) H`.
//!
//! A homogeneous polynomial of degree `2k` integrates over `S^(n-1)` to
//! `|S^(n-1)| E[P(g)] / (n (n+2) ... (n+2k-2))` with `g` standard normal, and
//! `E[P(g)]` is a sum over perfect matchings of the factors' slots (Wick).

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::profile_poly;
use crate::error::{LabError, Result};
use crate::quad::sphere_area;
use crate::rational::{int, SPoly, TauPoly};
use crate::weyl::{eval_f, eval_f_prime, Contractions, WeylForm};

/// One factor of a product polynomial: `a.x` or `x^T M x` (`M` symmetric).
#[derive(Clone, Copy)]
pub enum Factor<'a> {
    Linear(&'a [f64]),
    Quadratic(&'a DMatrix<f64>),
}

impl Factor<'_> {
    fn degree(&self) -> usize {
        match self {
            Factor::Linear(_) => 1,
            Factor::Quadratic(_) => 2,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Factor::Linear(a) => a.len(),
            Factor::Quadratic(m) => m.nrows(),
        }
    }
}

/// All perfect matchings of `0..m`, as partner arrays.
pub fn perfect_matchings(m: usize) -> Vec<Vec<usize>> {
    fn rec(partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some(first) = partner.iter().position(|&p| p == usize::MAX) else {
            out.push(partner.clone());
            return;
        };
        for j in first + 1..partner.len() {
            if partner[j] == usize::MAX {
                partner[first] = j;
                partner[j] = first;
                rec(partner, out);
                partner[first] = usize::MAX;
                partner[j] = usize::MAX;
            }
        }
    }
    let mut out = Vec::new();
    if m % 2 == 0 {
        rec(&mut vec![usize::MAX; m], &mut out);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        for (o, mk) in out.iter_mut().zip(m.column(k).iter()) {
            *o += mk * vk;
        }
    }
    out
}

fn cycle_trace(ms: &[&DMatrix<f64>]) -> f64 {
    match ms {
        [a] => a.trace(),
        [a, b] => a.iter().zip(b.iter()).map(|(x, y)| x * y).sum(),
        _ => {
            let mut p = ms[0].clone();
            for m in &ms[1..] {
                p = &p * *m;
            }
            p.trace()
        }
    }
}

/// `E[prod_f factor_f(g)]` for a standard normal vector `g`.
pub fn gaussian_moment(factors: &[Factor]) -> f64 {
    let mut slot_factor = Vec::new();
    let mut first_slot = Vec::new();
    for (f, fac) in factors.iter().enumerate() {
        first_slot.push(slot_factor.len());
        for _ in 0..fac.degree() {
            slot_factor.push(f);
        }
    }
    let other = |t: usize| {
        let f = slot_factor[t];
        match factors[f] {
            Factor::Linear(_) => t,
            Factor::Quadratic(_) => 2 * first_slot[f] + 1 - t,
        }
    };
    let mut total = 0.0;
    for partner in perfect_matchings(slot_factor.len()) {
        let mut used = vec![false; factors.len()];
        let mut prod = 1.0;
        for f in 0..factors.len() {
            let Factor::Linear(a) = factors[f] else { continue };
            if used[f] {
                continue;
            }
            used[f] = true;
            let mut v = a.to_vec();
            let mut t = partner[first_slot[f]];
            loop {
                let g = slot_factor[t];
                used[g] = true;
                match factors[g] {
                    Factor::Linear(b) => {
                        prod *= dot(&v, b);
                        break;
                    }
                    Factor::Quadratic(m) => {
                        v = matvec(m, &v);
                        t = partner[other(t)];
                    }
                }
            }
        }
        for f in 0..factors.len() {
            if used[f] {
                continue;
            }
            used[f] = true;
            let s0 = first_slot[f];
            let mut chain = Vec::new();
            if let Factor::Quadratic(m) = factors[f] {
                chain.push(m);
            }
            let mut t = partner[s0 + 1];
            while t != s0 {
                let g = slot_factor[t];
                used[g] = true;
                if let Factor::Quadratic(m) = factors[g] {
                    chain.push(m);
                }
                t = partner[other(t)];
            }
            prod *= cycle_trace(&chain);
        }
        total += prod;
    }
    total
}

/// `n (n+2) ... (n + degree - 2)`.
pub fn moment_denominator(n: usize, degree: usize) -> f64 {
    (0..degree / 2).map(|j| (n + 2 * j) as f64).product()
}

/// Integral of the product over the sphere of radius `r` (unnormalised
/// surface measure). The dimension is read off the factors, so an empty
/// product gives 0.
pub fn sphere_integral(factors: &[Factor], r: f64) -> f64 {
    let Some(n) = factors.first().map(Factor::dim) else {
        return 0.0;
    };
    let d: usize = factors.iter().map(Factor::degree).sum();
    if d % 2 == 1 {
        return 0.0;
    }
    sphere_area(n) * r.powi((n - 1 + d) as i32) * gaussian_moment(factors) / moment_denominator(n, d)
}

/// Closed-form low moments on the unit sphere `S^(n-1)`.
#[derive(Clone, Copy, Debug)]
pub struct SphereMomentTable {
    pub n: usize,
    pub area: f64,
}

impl SphereMomentTable {
    pub fn new(n: usize) -> Self {
        SphereMomentTable { n, area: sphere_area(n) }
    }

    /// `int x_p x_q = |S| delta_pq / n`.
    pub fn second(&self, p: usize, q: usize) -> f64 {
        if p == q {
            self.area / self.n as f64
        } else {
            0.0
        }
    }

    /// `int x_i x_j x_k x_m = |S| (d_ij d_km + d_ik d_jm + d_im d_jk) / (n (n+2))`.
    pub fn fourth(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        let d = |a: usize, b: usize| (a == b) as u32;
        let c = d(i, j) * d(k, m) + d(i, k) * d(j, m) + d(i, m) * d(j, k);
        self.area * c as f64 / moment_denominator(self.n, 4)
    }

    /// Any monomial `x_{idx[0]} ... x_{idx[d-1]}`, by counting matchings of
    /// equal indices.
    pub fn monomial(&self, idx: &[usize]) -> f64 {
        let count = perfect_matchings(idx.len())
            .iter()
            .filter(|p| p.iter().enumerate().all(|(a, &b)| idx[a] == idx[b]))
            .count();
        self.area * count as f64 / moment_denominator(self.n, idx.len())
    }
}

/// Unit-sphere integrals of the polynomial pieces that enter the identities,
/// from exact moment expansion over the entries of `W`. The `_pq` pieces
/// carry the weight `x_p x_q`; `euler` is `sum H_ik x_l d_l H_ik`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpherePieces {
    pub p: usize,
    pub q: usize,
    pub grad_sq: f64,
    pub h_sq: f64,
    pub euler: f64,
    pub grad_sq_pq: f64,
    pub h_sq_pq: f64,
    pub euler_pq: f64,
    pub pair_pq: f64,
}

/// Result of comparing the two sides of an identity, optionally with a
/// Monte Carlo estimate of the left side.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub r: f64,
    pub pq: Option<(usize, usize)>,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl IdentityCheck {
    fn new(name: &str, r: f64, pq: Option<(usize, usize)>, lhs: f64, rhs: f64) -> Self {
        IdentityCheck {
            name: name.to_string(),
            r,
            pq,
            lhs,
            rhs,
            rel_err: relative_error(lhs, rhs),
            mc_estimate: None,
            mc_stderr: None,
            samples: None,
            seed: None,
        }
    }

    /// Number of standard errors between the MC estimate and `rhs`.
    pub fn mc_sigmas(&self) -> Option<f64> {
        let (e, s) = (self.mc_estimate?, self.mc_stderr?);
        Some(if s > 0.0 { (e - self.rhs).abs() / s } else if e == self.rhs { 0.0 } else { f64::INFINITY })
    }

    fn attach(&mut self, mc: McEstimate, seed: u64) {
        self.mc_estimate = Some(mc.estimate);
        self.mc_stderr = Some(mc.std_error);
        self.samples = Some(mc.samples);
        self.seed = Some(seed);
    }
}

pub fn relative_error(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// A Weyl form together with its contractions, for the sphere identities.
pub struct SphereLab<'a> {
    pub w: &'a WeylForm,
    pub contractions: Contractions,
    pub area: f64,
}

impl<'a> SphereLab<'a> {
    pub fn new(w: &'a WeylForm) -> Self {
        SphereLab { w, contractions: w.contractions(), area: sphere_area(w.n()) }
    }

    fn n(&self) -> usize {
        self.w.n()
    }

    /// `(W_ipkq + W_iqkp) / 2`, the matrix of `H_ik`.
    fn h_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        let w = self.w;
        DMatrix::from_fn(self.n(), self.n(), |p, q| 0.5 * (w.get(i, p, k, q) + w.get(i, q, k, p)))
    }

    /// `W_ilkm + W_imkl`, the matrix of `x_l d_l H_ik`.
    fn euler_matrix(&self, i: usize, k: usize) -> DMatrix<f64> {
        let w = self.w;
        DMatrix::from_fn(self.n(), self.n(), |l, m| w.get(i, l, k, m) + w.get(i, m, k, l))
    }

    /// Exact unit-sphere integrals for the weight `x_p x_q`.
    pub fn pieces(&self, p: usize, q: usize) -> SpherePieces {
        let n = self.n();
        let mut ep = vec![0.0; n];
        let mut eq = vec![0.0; n];
        ep[p] = 1.0;
        eq[q] = 1.0;
        // H_ik and d_l H_ik are symmetric in (i, k): sum over i <= k with weights.
        let per_row: Vec<[f64; 6]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = [0.0; 6];
                for k in i..n {
                    let wt = if i == k { 1.0 } else { 2.0 };
                    let m = self.h_matrix(i, k);
                    let b = self.euler_matrix(i, k);
                    let (qm, qb) = (Factor::Quadratic(&m), Factor::Quadratic(&b));
                    let (lp, lq) = (Factor::Linear(&ep), Factor::Linear(&eq));
                    acc[0] += wt * sphere_integral(&[qm, qm], 1.0);
                    acc[1] += wt * sphere_integral(&[qm, qb], 1.0);
                    acc[2] += wt * sphere_integral(&[qm, qm, lp, lq], 1.0);
                    acc[3] += wt * sphere_integral(&[qm, qb, lp, lq], 1.0);
                    for l in 0..n {
                        let a: Vec<f64> =
                            (0..n).map(|mm| self.w.get(i, l, k, mm) + self.w.get(i, mm, k, l)).collect();
                        let la = Factor::Linear(&a);
                        acc[4] += wt * sphere_integral(&[la, la], 1.0);
                        acc[5] += wt * sphere_integral(&[la, la, lp, lq], 1.0);
                    }
                }
                acc
            })
            .collect();
        let mut tot = [0.0; 6];
        for row in &per_row {
            for (t, v) in tot.iter_mut().zip(row) {
                *t += v;
            }
        }
        let pair_pq: f64 = (0..n)
            .map(|l| {
                let a = self.h_matrix(p, l);
                let b = self.h_matrix(q, l);
                sphere_integral(&[Factor::Quadratic(&a), Factor::Quadratic(&b)], 1.0)
            })
            .sum();
        SpherePieces {
            p,
            q,
            h_sq: tot[0],
            euler: tot[1],
            h_sq_pq: tot[2],
            euler_pq: tot[3],
            grad_sq: tot[4],
            grad_sq_pq: tot[5],
            pair_pq,
        }
    }

    fn q_s(&self, pc: &SpherePieces) -> (f64, f64, f64) {
        let q = self.contractions.q[(pc.p, pc.q)];
        let delta = if pc.p == pc.q { 1.0 } else { 0.0 };
        (q, self.contractions.s, delta)
    }

    /// Both displays for `x_p x_q`-weighted integrals of `(dH)^2` and `H^2`.
    pub fn identity1(&self, pc: &SpherePieces, r: f64) -> [IdentityCheck; 2] {
        let nf = self.n() as f64;
        let (q, s, d) = self.q_s(pc);
        let pq = Some((pc.p, pc.q));
        let rn3 = r.powi(self.n() as i32 + 3);
        let rn5 = r.powi(self.n() as i32 + 5);
        let lhs1 = pc.grad_sq_pq * rn3;
        let rhs1 = self.area * rn3 * (2.0 * q + s * d) / (nf * (nf + 2.0));
        let lhs2 = pc.h_sq_pq * rn5;
        let rhs2 = self.area * rn5 * (2.0 * q + 0.5 * s * d) / (nf * (nf + 2.0) * (nf + 4.0));
        [
            IdentityCheck::new("weighted gradient square", r, pq, lhs1, rhs1),
            IdentityCheck::new("weighted H square", r, pq, lhs2, rhs2),
        ]
    }

    /// Weighted integral of `(d f(|x|^2) H)^2` for given values `f`, `f'` of the
    /// profile at `r^2`.
    pub fn identity2_with(&self, pc: &SpherePieces, r: f64, f: f64, fp: f64) -> IdentityCheck {
        let nf = self.n() as f64;
        let (q, s, d) = self.q_s(pc);
        let n = self.n() as i32;
        let r2 = r * r;
        let lhs = f * f * pc.grad_sq_pq * r.powi(n + 3)
            + 4.0 * f * fp * pc.euler_pq * r.powi(n + 5)
            + 4.0 * fp * fp * r2 * pc.h_sq_pq * r.powi(n + 5);
        let bq = (nf + 4.0) * f * f + 8.0 * r2 * f * fp + 4.0 * r2 * r2 * fp * fp;
        let bs = (nf + 4.0) * f * f + 4.0 * r2 * f * fp + 2.0 * r2 * r2 * fp * fp;
        let rhs = self.area * r.powi(n + 3) * (2.0 * q * bq + s * d * bs) / (nf * (nf + 2.0) * (nf + 4.0));
        IdentityCheck::new("weighted modulated gradient square", r, Some((pc.p, pc.q)), lhs, rhs)
    }

    pub fn identity2(&self, pc: &SpherePieces, tau: f64, r: f64) -> IdentityCheck {
        self.identity2_with(pc, r, eval_f(tau, r * r), eval_f_prime(r * r))
    }

    /// Unweighted integral of `(d f(|x|^2) H)^2`.
    pub fn identity3(&self, pc: &SpherePieces, tau: f64, r: f64) -> IdentityCheck {
        let nf = self.n() as f64;
        let n = self.n() as i32;
        let r2 = r * r;
        let (f, fp) = (eval_f(tau, r2), eval_f_prime(r2));
        let lhs = f * f * pc.grad_sq * r.powi(n + 1)
            + 4.0 * f * fp * pc.euler * r.powi(n + 3)
            + 4.0 * fp * fp * r2 * pc.h_sq * r.powi(n + 3);
        let b = (nf + 2.0) * f * f + 4.0 * r2 * f * fp + 2.0 * r2 * r2 * fp * fp;
        let rhs = self.area * self.contractions.s * r.powi(n + 1) * b / (nf * (nf + 2.0));
        IdentityCheck::new("modulated gradient square", r, None, lhs, rhs)
    }

    /// `int sum_l Hbar_pl Hbar_ql` over the sphere of radius `r`.
    pub fn hbar_pair(&self, pc: &SpherePieces, tau: f64, r: f64) -> IdentityCheck {
        let nf = self.n() as f64;
        let (q, _, _) = self.q_s(pc);
        let f = eval_f(tau, r * r);
        let rn3 = r.powi(self.n() as i32 + 3);
        let lhs = f * f * pc.pair_pq * rn3;
        let rhs = self.area * q * rn3 * f * f / (2.0 * nf * (nf + 2.0));
        IdentityCheck::new("modulated H pairing", r, Some((pc.p, pc.q)), lhs, rhs)
    }

    /// All identity checks for the weight pairs `pairs`, exact sides only.
    pub fn exact_suite(&self, tau: f64, r: f64, pairs: &[(usize, usize)]) -> Vec<IdentityCheck> {
        let mut out = Vec::new();
        for (k, &(p, q)) in pairs.iter().enumerate() {
            let pc = self.pieces(p, q);
            out.extend(self.identity1(&pc, r));
            out.push(self.identity2(&pc, tau, r));
            out.push(self.hbar_pair(&pc, tau, r));
            if k == 0 {
                out.push(self.identity3(&pc, tau, r));
            }
        }
        out
    }

    /// Monte Carlo estimates of the left sides of [`SphereLab::exact_suite`], in
    /// the same order. Small forms (`n <= 8`) evaluate `dH` directly; larger
    /// ones use `sum (d_l H_ik)^2 = x^T Q x` and Euler's relation.
    pub fn monte_carlo_suite(
        &self,
        tau: f64,
        r: f64,
        pairs: &[(usize, usize)],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<McEstimate>> {
        let n = self.n();
        let direct = n <= 8;
        let r2 = r * r;
        let (f, fp) = (eval_f(tau, r2), eval_f_prime(r2));
        let outs = 4 * pairs.len() + 1;
        let surface = r.powi(n as i32 - 1);
        let qm = &self.contractions.q;
        let est = mc_sphere_integrals(
            n,
            outs,
            samples,
            seed,
            || (DMatrix::zeros(n, n), vec![0.0; n]),
            |(h, x), u, out| {
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi = r * ui;
                }
                self.w.h_into(x, h);
                let h_sq: f64 = h.iter().map(|v| v * v).sum();
                let (grad_sq, euler) = if direct {
                    let dh = self.w.dh(x);
                    let g: f64 = dh.iter().map(|m| m.iter().map(|v| v * v).sum::<f64>()).sum();
                    let mut e = 0.0;
                    for (l, m) in dh.iter().enumerate() {
                        e += x[l] * h.iter().zip(m.iter()).map(|(a, b)| a * b).sum::<f64>();
                    }
                    (g, e)
                } else {
                    let mut g = 0.0;
                    for k in 0..n {
                        let col = qm.column(k);
                        g += x[k] * x.iter().zip(col.iter()).map(|(a, b)| a * b).sum::<f64>();
                    }
                    (g, 2.0 * h_sq)
                };
                let modulated = f * f * grad_sq + 4.0 * f * fp * euler + 4.0 * r2 * fp * fp * h_sq;
                for (j, &(p, q)) in pairs.iter().enumerate() {
                    let w = x[p] * x[q];
                    out[4 * j] = grad_sq * w * surface;
                    out[4 * j + 1] = h_sq * w * surface;
                    out[4 * j + 2] = modulated * w * surface;
                    let pair: f64 = (0..n).map(|l| h[(p, l)] * h[(q, l)]).sum();
                    out[4 * j + 3] = f * f * pair * surface;
                }
                out[outs - 1] = modulated * surface;
            },
        )?;
        let mut ordered = Vec::new();
        for j in 0..pairs.len() {
            ordered.extend_from_slice(&est[4 * j..4 * j + 4]);
            if j == 0 {
                ordered.push(est[outs - 1]);
            }
        }
        Ok(ordered)
    }

    /// Exact suite with Monte Carlo estimates attached (one seed).
    pub fn full_suite(
        &self,
        tau: f64,
        r: f64,
        pairs: &[(usize, usize)],
        samples: usize,
        seed: u64,
    ) -> Result<Vec<IdentityCheck>> {
        let mut checks = self.exact_suite(tau, r, pairs);
        let mc = self.monte_carlo_suite(tau, r, pairs, samples, seed)?;
        for (c, m) in checks.iter_mut().zip(mc) {
            c.attach(m, seed);
        }
        Ok(checks)
    }
}

/// `sum (d_l H_ik)^2 - x^T Q x` and `sum H_ik x_l d_l H_ik - 2 sum H_ik^2` at `x`,
/// both relative to the size of the terms (dense derivatives).
pub fn pointwise_residuals(w: &WeylForm, c: &Contractions, x: &[f64]) -> (f64, f64) {
    let h = w.h(x);
    let dh = w.dh(x);
    let g: f64 = dh.iter().map(|m| m.iter().map(|v| v * v).sum::<f64>()).sum();
    let xv = nalgebra::DVector::from_column_slice(x);
    let xqx = xv.dot(&(&c.q * &xv));
    let h_sq: f64 = h.iter().map(|v| v * v).sum();
    let e: f64 = dh
        .iter()
        .enumerate()
        .map(|(l, m)| x[l] * h.iter().zip(m.iter()).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    (relative_error(g, xqx), relative_error(e, 2.0 * h_sq))
}

/// `2 B_Q + n B_S - (n+4) B_12` in `Q[tau][s]`, where `B_Q`, `B_S` are the
/// brackets of the weighted identity and `B_12` the unweighted one. Tracing
/// the weighted identity reproduces the unweighted one iff this is zero.
pub fn trace_consistency_residual(n: i64) -> SPoly {
    let f = profile_poly();
    let fp = f.derivative();
    let s = SPoly::var();
    let c = |v: i64| TauPoly::constant(int(v));
    let ff = f.clone().pow(2);
    let sffp = s.clone() * f * fp.clone();
    let ssfp = s.pow(2) * fp.pow(2);
    let bq = ff.scale(&c(n + 4)) + sffp.scale(&c(8)) + ssfp.scale(&c(4));
    let bs = ff.scale(&c(n + 4)) + sffp.scale(&c(4)) + ssfp.scale(&c(2));
    let b12 = ff.scale(&c(n + 2)) + sffp.scale(&c(4)) + ssfp.scale(&c(2));
    bq.scale(&c(2)) + bs.scale(&c(n)) - b12.scale(&c(n + 4))
}

/// A Monte Carlo estimate of a sphere integral.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Samples per independent random stream.
pub const MC_CHUNK: usize = 4096;

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, o: Moments) -> Moments {
        if self.count == 0.0 {
            return o;
        }
        let count = self.count + o.count;
        let delta = o.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * o.count / count,
            m2: self.m2 + o.m2 + delta * delta * self.count * o.count / count,
        }
    }
}

/// Uniform point on `S^(n-1)` from a normalised Gaussian vector.
pub fn sample_sphere(rng: &mut ChaCha8Rng, u: &mut [f64]) {
    loop {
        for v in u.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            u.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// Integrates `k` functions over the unit sphere `S^(n-1)` at once.
/// `integrand(scratch, u, out)` writes the `k` values at `u`. Chunk `c` of
/// the samples uses stream `c` of a ChaCha generator seeded with `seed`, and
/// chunk statistics are merged in chunk order, so results do not depend on
/// the thread count.
pub fn mc_sphere_integrals<S, I, F>(
    n: usize,
    k: usize,
    samples: usize,
    seed: u64,
    init: I,
    integrand: F,
) -> Result<Vec<McEstimate>>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &[f64], &mut [f64]) + Sync,
{
    if samples < 1000 {
        return Err(LabError::InvalidParameter(format!("need at least 1000 samples, got {samples}")));
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let per_chunk: Vec<Result<Vec<Moments>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut scratch = init();
            let mut u = vec![0.0; n];
            let mut out = vec![0.0; k];
            let mut m = vec![Moments { count: 0.0, mean: 0.0, m2: 0.0 }; k];
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            for _ in 0..len {
                sample_sphere(&mut rng, &mut u);
                integrand(&mut scratch, &u, &mut out);
                for (j, (mj, &v)) in m.iter_mut().zip(&out).enumerate() {
                    if !v.is_finite() {
                        return Err(LabError::NonFinite(format!("integrand {j} = {v} at {u:?}")));
                    }
                    mj.count += 1.0;
                    let d = v - mj.mean;
                    mj.mean += d / mj.count;
                    mj.m2 += d * (v - mj.mean);
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = vec![Moments { count: 0.0, mean: 0.0, m2: 0.0 }; k];
    for chunk in per_chunk {
        for (t, m) in total.iter_mut().zip(chunk?) {
            *t = t.merge(m);
        }
    }
    let area = sphere_area(n);
    Ok(total
        .iter()
        .map(|m| McEstimate {
            estimate: area * m.mean,
            std_error: area * (m.m2 / (m.count - 1.0) / m.count).sqrt(),
            samples,
        })
        .collect())
}

/// Monte Carlo integral of one function over `S^(n-1)`.
pub fn mc_sphere_integral(
    integrand: impl Fn(&[f64]) -> f64 + Sync,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let v = mc_sphere_integrals(n, 1, samples, seed, || (), |_, u, out| out[0] = integrand(u))?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        assert_eq!(perfect_matchings(2).len(), 1);
        assert_eq!(perfect_matchings(4).len(), 3);
        assert_eq!(perfect_matchings(6).len(), 15);
        assert!(perfect_matchings(3).is_empty());
    }

    #[test]
    fn monomial_table() {
        let t = SphereMomentTable::new(5);
        assert!((t.monomial(&[0, 0]) - t.second(0, 0)).abs() < 1e-15);
        assert!((t.monomial(&[0, 0, 1, 1]) - t.fourth(0, 0, 1, 1)).abs() < 1e-15);
        assert!((t.monomial(&[2, 2, 2, 2]) - 3.0 * t.area / 35.0).abs() < 1e-14);
        assert!((t.monomial(&[0, 0, 0, 0, 0, 0]) - 15.0 * t.area / (5.0 * 7.0 * 9.0)).abs() < 1e-14);
        assert_eq!(t.monomial(&[0, 1]), 0.0);
    }

    #[test]
    fn wick_matches_monomials() {
        let n = 4;
        let t = SphereMomentTable::new(n);
        let mut m = DMatrix::zeros(n, n);
        m[(0, 1)] = 1.0;
        m[(1, 0)] = 1.0;
        m[(2, 2)] = 3.0;
        let e0 = [1.0, 0.0, 0.0, 0.0];
        // (2 x0 x1 + 3 x2^2) x0 x0 x1 x1 ... expand by hand for the x0^2 weight:
        // (2 x0 x1 + 3 x2^2)^2 x0^2 = 4 x0^4 x1^2 + 12 x0^3 x1 x2^2 + 9 x2^4 x0^2.
        let lhs = sphere_integral(&[Factor::Quadratic(&m), Factor::Quadratic(&m), Factor::Linear(&e0), Factor::Linear(&e0)], 1.0);
        let rhs = 4.0 * t.monomial(&[0, 0, 0, 0, 1, 1]) + 9.0 * t.monomial(&[2, 2, 2, 2, 0, 0]);
        assert!((lhs - rhs).abs() < 1e-14 * rhs);
    }

    #[test]
    fn trace_consistency_is_exact() {
        for n in [6, 25, 51] {
            assert!(trace_consistency_residual(n).degree().is_none());
        }
    }

    #[test]
    fn small_suite_exact() {
        let w = WeylForm::random_normalized(5, 3).unwrap();
        let lab = SphereLab::new(&w);
        for c in lab.exact_suite(-10.0, 0.7, &[(0, 0), (0, 1)]) {
            assert!(c.rel_err < 1e-11, "{c:?}");
        }
    }
}
