//! Weyl-type four-tensors and the quadratic matrix fields built from them.
//!
//! A [`WeylForm`] stores integer entries times a common floating-point unit.
//! Only canonical representatives (`i < j`, `k < l`, `(i,j) <= (k,l)`) are
//! stored, so antisymmetry and pair symmetry hold by construction; the
//! Bianchi identity and trace-freeness are produced by exact integer
//! projections and can be checked exactly.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Bits of the raw integer entries drawn by the generators.
const RAW_BITS: u32 = 20;
const FACTOR_BITS: u32 = 8;

/// `f(s) = tau + 5 s - s^2 + s^3 / 20`.
pub fn eval_f(tau: f64, s: f64) -> f64 {
    tau + s * (5.0 + s * (-1.0 + s / 20.0))
}

pub fn eval_f_prime(s: f64) -> f64 {
    5.0 + s * (-2.0 + 0.15 * s)
}

pub fn eval_f_second(s: f64) -> f64 {
    -2.0 + 0.3 * s
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

fn canon_index(np: usize, p1: usize, p2: usize) -> usize {
    debug_assert!(p1 <= p2);
    p1 * np - (p1 * p1 - p1) / 2 + (p2 - p1)
}

/// All pairs `(i, j)` with `i < j`, in canonical order.
fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            v.push((i, j));
        }
    }
    v
}

/// Canonical integer storage shared by the constructors.
#[derive(Clone, Debug)]
struct Canonical {
    n: usize,
    np: usize,
    vals: Vec<i64>,
}

impl Canonical {
    fn zeros(n: usize) -> Self {
        let np = pair_count(n);
        Canonical { n, np, vals: vec![0; np * (np + 1) / 2] }
    }

    fn slot(&self, i: usize, j: usize, k: usize, l: usize) -> Option<(usize, i64)> {
        if i == j || k == l {
            return None;
        }
        let mut sign = 1;
        let (a, b) = if i < j { (i, j) } else { sign = -sign; (j, i) };
        let (c, d) = if k < l { (k, l) } else { sign = -sign; (l, k) };
        let p1 = pair_index(self.n, a, b);
        let p2 = pair_index(self.n, c, d);
        let (p1, p2) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        Some((canon_index(self.np, p1, p2), sign))
    }

    fn get(&self, i: usize, j: usize, k: usize, l: usize) -> i64 {
        self.slot(i, j, k, l).map_or(0, |(s, sign)| sign * self.vals[s])
    }

    /// Fills every canonical slot from `g(i, j, k, l)`.
    fn from_fn(n: usize, mut g: impl FnMut(usize, usize, usize, usize) -> i64) -> Self {
        let mut c = Canonical::zeros(n);
        let ps = pairs(n);
        let mut idx = 0;
        for p1 in 0..ps.len() {
            for p2 in p1..ps.len() {
                let (i, j) = ps[p1];
                let (k, l) = ps[p2];
                c.vals[idx] = g(i, j, k, l);
                idx += 1;
            }
        }
        c
    }

    fn ricci(&self) -> Vec<i64> {
        let n = self.n;
        let mut r = vec![0i64; n * n];
        for j in 0..n {
            for l in 0..n {
                r[j * n + l] = (0..n).map(|i| self.get(i, j, i, l)).sum();
            }
        }
        r
    }
}

/// `(A o B)_ijkl = A_ik B_jl + A_jl B_ik - A_il B_jk - A_jk B_il`.
fn kulkarni_nomizu(a: &[i64], b: &[i64], n: usize, i: usize, j: usize, k: usize, l: usize) -> i64 {
    a[i * n + k] * b[j * n + l] + a[j * n + l] * b[i * n + k]
        - a[i * n + l] * b[j * n + k]
        - a[j * n + k] * b[i * n + l]
}

/// Removes the Ricci part of an algebraic curvature tensor with integer
/// entries. The result is `2 (n-1)(n-2)` times the Weyl part.
fn trace_project(r: &Canonical) -> Canonical {
    let n = r.n as i64;
    let ric = r.ricci();
    let scal: i64 = (0..r.n).map(|j| ric[j * r.n + j]).sum();
    let mut e = vec![0i64; r.n * r.n];
    let mut id = vec![0i64; r.n * r.n];
    for j in 0..r.n {
        for l in 0..r.n {
            e[j * r.n + l] = 2 * (n - 1) * ric[j * r.n + l];
        }
        e[j * r.n + j] -= scal;
        id[j * r.n + j] = 1;
    }
    let c = 2 * (n - 1) * (n - 2);
    Canonical::from_fn(r.n, |i, j, k, l| {
        c * r.get(i, j, k, l) - kulkarni_nomizu(&e, &id, r.n, i, j, k, l)
    })
}

/// Factored representation `W = c sum_r (a_r a_r^T) o (b_r b_r^T) + E o I`
/// (in integer units), for which `H(x)` is a sum of rank-one terms plus the
/// contribution of `E`.
#[derive(Clone, Debug)]
struct Factors {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    weight: f64,
    e: DMatrix<f64>,
}

/// A Weyl-type form. Values are `unit * integer`.
#[derive(Clone, Debug)]
pub struct WeylForm {
    n: usize,
    unit: f64,
    canon: Canonical,
    dense: Vec<f64>,
    factors: Option<Factors>,
}

/// Contractions `Q_pq = sum_{ikl} (W_ipkl + W_ilkp)(W_iqkl + W_ilkq)` and
/// `S = sum_{ijkl} (W_ijkl + W_ilkj)^2`.
#[derive(Clone, Debug)]
pub struct Contractions {
    pub q: DMatrix<f64>,
    pub s: f64,
}

/// Symmetry residuals of a form, in integer units (exact).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymmetryResiduals {
    pub antisymmetry: i64,
    pub pair_symmetry: i64,
    pub bianchi: i64,
    pub trace: i64,
}

impl SymmetryResiduals {
    pub fn all_zero(&self) -> bool {
        *self == SymmetryResiduals { antisymmetry: 0, pair_symmetry: 0, bianchi: 0, trace: 0 }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 4 {
        return Err(LabError::UnsupportedDimension {
            n: n as i64,
            reason: "Weyl-type forms vanish for n < 4".into(),
        });
    }
    Ok(())
}

impl WeylForm {
    fn build(n: usize, unit: f64, canon: Canonical, factors: Option<Factors>) -> Result<Self> {
        let mut dense = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        dense[((i * n + j) * n + k) * n + l] = canon.get(i, j, k, l) as f64 * unit;
                    }
                }
            }
        }
        let w = WeylForm { n, unit, canon, dense, factors };
        if w.s_exact() == 0 {
            return Err(LabError::DegenerateWeyl);
        }
        Ok(w)
    }

    /// Projects raw integer entries (one per canonical slot) to a Weyl-type
    /// form: Bianchi projection, then removal of the Ricci part. The value
    /// of one raw unit is `scale`.
    pub fn from_raw_entries(n: usize, raw: &[i64], scale: f64) -> Result<Self> {
        check_dimension(n)?;
        let mut r1 = Canonical::zeros(n);
        if raw.len() != r1.vals.len() {
            return Err(LabError::InvalidParameter(format!(
                "expected {} raw entries, got {}",
                r1.vals.len(),
                raw.len()
            )));
        }
        r1.vals.copy_from_slice(raw);
        let r2 = Canonical::from_fn(n, |i, j, k, l| {
            2 * r1.get(i, j, k, l) - r1.get(i, k, l, j) - r1.get(i, l, j, k)
        });
        let w = trace_project(&r2);
        let unit = scale / (6 * (n - 1) * (n - 2)) as f64;
        Self::build(n, unit, w, None)
    }

    /// Random form with dyadic raw entries uniform in `[-scale, scale]`.
    /// Degenerate draws (probability zero) are re-sampled.
    pub fn random(n: usize, seed: u64, scale: f64) -> Result<Self> {
        check_dimension(n)?;
        let len = Canonical::zeros(n).vals.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1i64 << RAW_BITS;
        loop {
            let raw: Vec<i64> = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
            match Self::from_raw_entries(n, &raw, scale / bound as f64) {
                Err(LabError::DegenerateWeyl) => continue,
                other => return other,
            }
        }
    }

    /// Random form normalised to `S = 1`.
    pub fn random_normalized(n: usize, seed: u64) -> Result<Self> {
        Ok(Self::random(n, seed, 1.0)?.normalized())
    }

    /// Random form `sum_r (a_r a_r^T) o (b_r b_r^T)` minus its Ricci part,
    /// with integer vectors `a_r`, `b_r`, normalised to `S = 1`. Such forms
    /// evaluate `H(x)` in `O(rank n^2)` without touching the dense entries.
    pub fn random_factored(n: usize, rank: usize, seed: u64) -> Result<Self> {
        check_dimension(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b6e_7061_6972);
        let bound = 1i64 << FACTOR_BITS;
        let mut vec = || (0..n).map(|_| rng.gen_range(-bound..=bound)).collect::<Vec<i64>>();
        let ab: Vec<(Vec<i64>, Vec<i64>)> = (0..rank.max(1)).map(|_| (vec(), vec())).collect();
        let outer = |v: &[i64]| -> Vec<i64> {
            let mut m = vec![0i64; n * n];
            for i in 0..n {
                for k in 0..n {
                    m[i * n + k] = v[i] * v[k];
                }
            }
            m
        };
        let mats: Vec<(Vec<i64>, Vec<i64>)> = ab.iter().map(|(a, b)| (outer(a), outer(b))).collect();
        let r = Canonical::from_fn(n, |i, j, k, l| {
            mats.iter().map(|(a, b)| kulkarni_nomizu(a, b, n, i, j, k, l)).sum()
        });
        let w = trace_project(&r);

        let ni = n as i64;
        let ric = r.ricci();
        let scal: i64 = (0..n).map(|j| ric[j * n + j]).sum();
        let mut e = DMatrix::from_fn(n, n, |i, k| -(2.0 * (ni - 1) as f64) * ric[i * n + k] as f64);
        for i in 0..n {
            e[(i, i)] += scal as f64;
        }
        let to_f = |v: &[i64]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let factors = Factors {
            a: ab.iter().map(|(a, _)| to_f(a)).collect(),
            b: ab.iter().map(|(_, b)| to_f(b)).collect(),
            weight: (2 * (ni - 1) * (ni - 2)) as f64,
            e,
        };
        Ok(Self::build(n, 1.0, w, Some(factors))?.normalized())
    }

    /// Same form with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut w = self.clone();
        w.unit *= factor;
        let n = w.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        w.dense[((i * n + j) * n + k) * n + l] = w.canon.get(i, j, k, l) as f64 * w.unit;
                    }
                }
            }
        }
        w
    }

    /// Rescaled so that `S = 1`.
    pub fn normalized(&self) -> Self {
        let s = self.s_exact() as f64 * self.unit * self.unit;
        self.scaled(1.0 / s.sqrt())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn is_factored(&self) -> bool {
        self.factors.is_some()
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.dense[((i * n + j) * n + k) * n + l]
    }

    /// Entry in integer units.
    pub fn get_int(&self, i: usize, j: usize, k: usize, l: usize) -> i64 {
        self.canon.get(i, j, k, l)
    }

    /// Maximal integer violation of each symmetry.
    pub fn symmetry_residuals(&self) -> SymmetryResiduals {
        let n = self.n;
        let g = |i, j, k, l| self.get_int(i, j, k, l);
        let mut res = SymmetryResiduals { antisymmetry: 0, pair_symmetry: 0, bianchi: 0, trace: 0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let w = g(i, j, k, l);
                        res.antisymmetry = res
                            .antisymmetry
                            .max((w + g(j, i, k, l)).abs())
                            .max((w + g(i, j, l, k)).abs());
                        res.pair_symmetry = res.pair_symmetry.max((w - g(k, l, i, j)).abs());
                        res.bianchi = res.bianchi.max((w + g(i, k, l, j) + g(i, l, j, k)).abs());
                    }
                }
            }
        }
        for j in 0..n {
            for l in 0..n {
                let t: i64 = (0..n).map(|i| g(i, j, i, l)).sum();
                res.trace = res.trace.max(t.abs());
            }
        }
        res
    }

    /// `S` in squared integer units, exact.
    pub fn s_exact(&self) -> i128 {
        let n = self.n;
        let mut s: i128 = 0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = (self.get_int(i, j, k, l) + self.get_int(i, l, k, j)) as i128;
                        s = s.checked_add(v * v).expect("S exceeds i128");
                    }
                }
            }
        }
        s
    }

    /// `trace Q` in squared integer units, accumulated from the diagonal of
    /// `Q` (exact).
    pub fn q_trace_exact(&self) -> i128 {
        let n = self.n;
        let mut t: i128 = 0;
        for p in 0..n {
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = (self.get_int(i, p, k, l) + self.get_int(i, l, k, p)) as i128;
                        t = t.checked_add(v * v).expect("trace Q exceeds i128");
                    }
                }
            }
        }
        t
    }

    /// `Q` and `S` in floating point.
    pub fn contractions(&self) -> Contractions {
        let n = self.n;
        let v = DMatrix::from_fn(n * n * n, n, |row, p| {
            let (i, k, l) = (row / (n * n), (row / n) % n, row % n);
            self.get(i, p, k, l) + self.get(i, l, k, p)
        });
        let q = v.transpose() * &v;
        let s = self.s_exact() as f64 * self.unit * self.unit;
        Contractions { q, s }
    }

    /// `H_ik(x) = sum_pq W_ipkq x_p x_q`.
    pub fn h(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        self.h_into(x, &mut out);
        out
    }

    /// `H(x)` written into `out` (which must be `n x n`).
    pub fn h_into(&self, x: &[f64], out: &mut DMatrix<f64>) {
        match &self.factors {
            Some(f) => self.h_factored(f, x, out),
            None => self.h_dense_into(x, out),
        }
    }

    /// `H(x)` from the dense entries regardless of any factorisation.
    pub fn h_dense(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        self.h_dense_into(x, &mut out);
        out
    }

    fn h_dense_into(&self, x: &[f64], h: &mut DMatrix<f64>) {
        let n = self.n;
        h.fill(0.0);
        for i in 0..n {
            for k in i..n {
                let mut acc = 0.0;
                for p in 0..n {
                    if x[p] == 0.0 {
                        continue;
                    }
                    let base = ((i * n + p) * n + k) * n;
                    let row = &self.dense[base..base + n];
                    let inner: f64 = row.iter().zip(x).map(|(w, xq)| w * xq).sum();
                    acc += x[p] * inner;
                }
                h[(i, k)] = acc;
                h[(k, i)] = acc;
            }
        }
    }

    // For rank-one factors `(a a^T) o (b b^T)` contributes `w w^T` with
    // `w = (b.x) a - (a.x) b`; `E o I` contributes
    // `|x|^2 E + (x.Ex) I - Ex x^T - x (Ex)^T`.
    fn h_factored(&self, f: &Factors, x: &[f64], h: &mut DMatrix<f64>) {
        let n = self.n;
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let ws: Vec<Vec<f64>> = f
            .a
            .iter()
            .zip(&f.b)
            .map(|(a, b)| {
                let (al, be) = (dot(a, x), dot(b, x));
                a.iter().zip(b).map(|(ai, bi)| be * ai - al * bi).collect()
            })
            .collect();
        let mut ex = vec![0.0; n];
        for k in 0..n {
            let col = f.e.column(k);
            let xk = x[k];
            for i in 0..n {
                ex[i] += col[i] * xk;
            }
        }
        let r2 = dot(x, x);
        let xex = dot(x, &ex);
        for k in 0..n {
            for i in 0..=k {
                let mut v = f.e[(i, k)] * r2 - ex[i] * x[k] - x[i] * ex[k];
                let mut low = 0.0;
                for w in &ws {
                    low += w[i] * w[k];
                }
                v += f.weight * low;
                if i == k {
                    v += xex;
                }
                v *= self.unit;
                h[(i, k)] = v;
                h[(k, i)] = v;
            }
        }
    }

    /// `d_l H_ik(x) = sum_q (W_ilkq + W_iqkl) x_q`, returned as one matrix per `l`.
    pub fn dh(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.n;
        (0..n)
            .map(|l| {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    for k in i..n {
                        let v: f64 = (0..n)
                            .map(|q| (self.get(i, l, k, q) + self.get(i, q, k, l)) * x[q])
                            .sum();
                        m[(i, k)] = v;
                        m[(k, i)] = v;
                    }
                }
                m
            })
            .collect()
    }

    /// `d_l d_m H_ik = W_ilkm + W_imkl` (constant).
    pub fn d2h(&self, l: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, k| self.get(i, l, k, m) + self.get(i, m, k, l))
    }

    /// `Z_acd = sum_b W_acbd v_b`, flattened as `(a n + c) n + d`.
    pub fn contract_third(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n * n * n];
        for a in 0..n {
            for c in 0..n {
                for b in 0..n {
                    if v[b] == 0.0 {
                        continue;
                    }
                    let base = ((a * n + c) * n + b) * n;
                    for d in 0..n {
                        z[(a * n + c) * n + d] += self.dense[base + d] * v[b];
                    }
                }
            }
        }
        z
    }

    pub fn to_json(&self) -> WeylFormJson {
        let mut entries = Vec::new();
        for (p1, &(i, j)) in pairs(self.n).iter().enumerate() {
            for &(k, l) in &pairs(self.n)[p1..] {
                let v = self.get_int(i, j, k, l);
                if v != 0 {
                    entries.push((i, j, k, l, v.to_string()));
                }
            }
        }
        WeylFormJson { n: self.n, unit: self.unit, entries }
    }

    /// Rebuilds a form from its serialized canonical entries; the
    /// symmetries are re-checked exactly.
    pub fn from_json(js: &WeylFormJson) -> Result<Self> {
        check_dimension(js.n)?;
        let mut c = Canonical::zeros(js.n);
        for (i, j, k, l, v) in &js.entries {
            let v: i64 = v
                .parse()
                .map_err(|_| LabError::InvalidParameter(format!("bad entry value {v}")))?;
            let (slot, sign) = c
                .slot(*i, *j, *k, *l)
                .ok_or_else(|| LabError::InvalidParameter(format!("diagonal entry ({i},{j},{k},{l})")))?;
            c.vals[slot] = sign * v;
        }
        let w = Self::build(js.n, js.unit, c, None)?;
        let res = w.symmetry_residuals();
        if !res.all_zero() {
            return Err(LabError::InvalidParameter(format!("entries violate Weyl symmetries: {res:?}")));
        }
        Ok(w)
    }
}

/// Serialized form: canonical entries in integer units and the unit value.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct WeylFormJson {
    pub n: usize,
    pub unit: f64,
    pub entries: Vec<(usize, usize, usize, usize, String)>,
}

/// The quadratic field `H` together with the profile parameter `tau`.
#[derive(Clone, Copy, Debug)]
pub struct TensorField<'a> {
    pub w: &'a WeylForm,
    pub tau: f64,
}

impl<'a> TensorField<'a> {
    pub fn new(w: &'a WeylForm, tau: f64) -> Self {
        TensorField { w, tau }
    }

    pub fn h(&self, x: &[f64]) -> DMatrix<f64> {
        self.w.h(x)
    }

    /// `mu lambda^6 f(|x|^2 / lambda^2) H(x)`; `(1, 1)` gives `f(|x|^2) H(x)`.
    pub fn hbar(&self, x: &[f64], lambda: f64, mu: f64) -> DMatrix<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.w.h(x) * (mu * lambda.powi(6) * eval_f(self.tau, r2 / (lambda * lambda)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_indexing_is_a_bijection() {
        for n in [4, 5, 7] {
            let np = pair_count(n);
            let mut seen = vec![false; np * (np + 1) / 2];
            for p1 in 0..np {
                for p2 in p1..np {
                    let s = canon_index(np, p1, p2);
                    assert!(!seen[s]);
                    seen[s] = true;
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    #[test]
    fn small_dimensions_rejected() {
        assert!(matches!(WeylForm::random(3, 1, 1.0), Err(LabError::UnsupportedDimension { .. })));
    }

    #[test]
    fn zero_raw_entries_are_degenerate() {
        let len = Canonical::zeros(4).vals.len();
        assert!(matches!(
            WeylForm::from_raw_entries(4, &vec![0; len], 1.0),
            Err(LabError::DegenerateWeyl)
        ));
    }

    #[test]
    fn generated_forms_are_exact() {
        for (n, seed) in [(4, 1), (5, 2), (7, 3)] {
            let w = WeylForm::random(n, seed, 1.0).unwrap();
            assert!(w.symmetry_residuals().all_zero());
            assert!(w.s_exact() > 0);
            assert_eq!(w.q_trace_exact(), w.s_exact());
        }
        let w = WeylForm::random_factored(6, 2, 9).unwrap();
        assert!(w.symmetry_residuals().all_zero());
    }

    #[test]
    fn factored_h_matches_dense() {
        let w = WeylForm::random_factored(7, 3, 4).unwrap();
        let x = [0.3, -1.2, 0.5, 0.8, -0.1, 0.0, 2.0];
        let d = w.h_dense(&x) - w.h(&x);
        assert!(d.amax() < 1e-13 * w.h_dense(&x).amax());
    }

    #[test]
    fn profile_values() {
        assert_eq!(eval_f(-7.0, 0.0), -7.0);
        assert!((eval_f(-7.0, 1.0) - (-7.0 + 81.0 / 20.0)).abs() < 1e-15);
        assert_eq!(eval_f_prime(0.0), 5.0);
    }

    #[test]
    fn json_round_trip() {
        let w = WeylForm::random_normalized(5, 11).unwrap();
        let js = w.to_json();
        let w2 = WeylForm::from_json(&js).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    for l in 0..5 {
                        assert_eq!(w.get(i, j, k, l), w2.get(i, j, k, l));
                    }
                }
            }
        }
    }
}
