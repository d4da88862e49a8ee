//! Radial moments `int_0^inf (1+r^2)^-p r^beta dr` and the axis model:
//! the energy `F(0, eps)`, its eps-derivatives and the Hessian in the
//! centre variables, each in closed form and by direct quadrature.

use nalgebra::DMatrix;
use num_traits::FromPrimitive;
use serde::{Deserialize, Serialize};

use crate::certify::{self, TauCertificate};
use crate::error::{LabError, Result};
use crate::quad::{beta_fn, integrate_half_line, sphere_area};
use crate::rational::{Coeff, Rational, SPoly, TauPoly};
use crate::weyl::{eval_f, eval_f_prime, Contractions, WeylForm};

/// `int_0^inf (1+r^2)^-p r^beta dr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialMoment {
    pub p: f64,
    pub beta: f64,
    pub value: f64,
    pub convergent: bool,
}

pub fn moment_converges(p: f64, beta: f64) -> bool {
    beta > -1.0 && 2.0 * p > beta + 1.0
}

/// Closed form `B((beta+1)/2, p - (beta+1)/2) / 2`.
pub fn radial_moment(p: f64, beta: f64) -> Result<RadialMoment> {
    if !moment_converges(p, beta) {
        return Err(LabError::Divergent { p, beta });
    }
    let a = 0.5 * (beta + 1.0);
    Ok(RadialMoment { p, beta, value: 0.5 * beta_fn(a, p - a), convergent: true })
}

/// The same moment by adaptive quadrature with an analytic tail bound.
pub fn radial_moment_quadrature(p: f64, beta: f64, rel_tol: f64) -> Result<f64> {
    if !moment_converges(p, beta) {
        return Err(LabError::Divergent { p, beta });
    }
    let h = integrate_half_line(
        |r| if r == 0.0 { 0.0 } else { (beta * r.ln() - p * (r * r).ln_1p()).exp() },
        1.0,
        2.0 * p - beta,
        rel_tol,
    );
    Ok(h.value)
}

/// `int_0^inf eps^(n-2) (eps^2+r^2)^-p r^beta dr = eps^(n-1+beta-2p) M(p, beta)`.
pub fn scaled_moment(n: usize, p: f64, beta: f64, eps: f64) -> Result<f64> {
    let m = radial_moment(p, beta)?;
    Ok(eps.powf(n as f64 - 1.0 + beta - 2.0 * p) * m.value)
}

/// `eps^(n-2) (eps^2+r^2)^-p r^beta` evaluated through logarithms.
fn weight(n: usize, p: f64, beta: f64, eps: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    ((n as f64 - 2.0) * eps.ln() - p * (eps * eps + r * r).ln() + beta * r.ln()).exp()
}

fn check_axis_dimension(n: usize) -> Result<()> {
    if n <= 18 {
        return Err(LabError::UnsupportedDimension {
            n: n as i64,
            reason: "the s^6 radial moment of the axis energy diverges for n <= 18".into(),
        });
    }
    Ok(())
}

/// Everything needed to evaluate the axis energy and centre Hessian for a
/// fixed dimension, profile parameter and Weyl form.
#[derive(Clone, Debug)]
pub struct AxisModel {
    pub n: usize,
    pub tau: f64,
    pub s_norm: f64,
    pub q: DMatrix<f64>,
    i_coeffs: Vec<f64>,
    j_coeffs: Vec<f64>,
    hess_bracket: Vec<f64>,
    fp_sq: Vec<f64>,
    area: f64,
}

fn eval_poly(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * s + v)
}

fn deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()
}

fn coeffs_at(p: &SPoly, tau: &Rational) -> Vec<f64> {
    p.at_tau(tau).coeffs().iter().map(crate::rational::to_f64).collect()
}

impl AxisModel {
    /// Model at an exactly given `tau`.
    pub fn with_exact_tau(n: usize, tau: &Rational, c: &Contractions) -> Result<Self> {
        check_axis_dimension(n)?;
        let ni = n as i64;
        let fp = certify::profile_poly().derivative();
        Ok(AxisModel {
            n,
            tau: crate::rational::to_f64(tau),
            s_norm: c.s,
            q: c.q.clone(),
            i_coeffs: coeffs_at(&certify::poly_i(ni)?, tau),
            j_coeffs: coeffs_at(&certify::poly_j(ni)?, tau),
            hess_bracket: coeffs_at(&certify::hessian_bracket(), tau),
            fp_sq: coeffs_at(&fp.pow(2), tau),
            area: sphere_area(n),
        })
    }

    pub fn new(n: usize, tau: f64, c: &Contractions) -> Result<Self> {
        let t = Rational::from_f64(tau).ok_or_else(|| LabError::NonFinite("tau".into()))?;
        Self::with_exact_tau(n, &t, c)
    }

    /// Model at the midpoint of a certified interval.
    pub fn from_certificate(cert: &TauCertificate, c: &Contractions) -> Result<Self> {
        Self::with_exact_tau(cert.n as usize, &cert.interval.midpoint(), c)
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `K = (n-2) / (16 n (n-1)(n+2)) |S^(n-1)| S M(n-2, n+7)`, so that
    /// `F(0, eps) = -K I(eps^2)`.
    pub fn prefactor(&self) -> f64 {
        let n = self.nf();
        let m = radial_moment(n - 2.0, n + 7.0).map(|m| m.value).unwrap_or(f64::NAN);
        (n - 2.0) / (16.0 * n * (n - 1.0) * (n + 2.0)) * self.area * self.s_norm * m
    }

    pub fn i_at(&self, s: f64) -> f64 {
        eval_poly(&self.i_coeffs, s)
    }

    pub fn i_prime(&self, s: f64) -> f64 {
        eval_poly(&deriv(&self.i_coeffs), s)
    }

    pub fn i_second(&self, s: f64) -> f64 {
        eval_poly(&deriv(&deriv(&self.i_coeffs)), s)
    }

    pub fn j_at(&self, s: f64) -> f64 {
        eval_poly(&self.j_coeffs, s)
    }

    pub fn f_axis(&self, eps: f64) -> f64 {
        -self.prefactor() * self.i_at(eps * eps)
    }

    pub fn df_deps(&self, eps: f64) -> f64 {
        -self.prefactor() * 2.0 * eps * self.i_prime(eps * eps)
    }

    pub fn d2f_deps2(&self, eps: f64) -> f64 {
        let s = eps * eps;
        -self.prefactor() * (4.0 * s * self.i_second(s) + 2.0 * self.i_prime(s))
    }

    /// `int eps^(n-2) (eps^2+r^2)^(2-n) r^(n+1) [(n+2) f^2 + 4 r^2 f f' + 2 r^4 f'^2] dr`
    /// by quadrature.
    pub fn axis_integral_quadrature(&self, eps: f64) -> f64 {
        let n = self.nf();
        let tau = self.tau;
        integrate_half_line(
            |r| {
                let s = r * r;
                let (f, fp) = (eval_f(tau, s), eval_f_prime(s));
                weight(self.n, n - 2.0, n + 1.0, eps, r) * ((n + 2.0) * f * f + 4.0 * s * f * fp + 2.0 * s * s * fp * fp)
            },
            eps,
            n - 17.0,
            1e-14,
        )
        .value
    }

    /// `F(0, eps)` from the defining radial integral rather than `I`.
    pub fn f_axis_quadrature(&self, eps: f64) -> f64 {
        let n = self.nf();
        -(n - 2.0) / (16.0 * n * (n - 1.0) * (n + 2.0)) * self.area * self.s_norm * self.axis_integral_quadrature(eps)
    }

    /// `int eps^(n-2) (eps^2+r^2)^-n r^(n+5) [2 f f' + r^2 f'^2] dr` from the
    /// expanded bracket and closed-form moments.
    pub fn hessian_factor_j(&self, eps: f64) -> f64 {
        let n = self.nf();
        self.hess_bracket
            .iter()
            .enumerate()
            .map(|(k, e)| e * eps.powi(4 + 2 * k as i32) * radial_moment(n, n + 5.0 + 2.0 * k as f64).map_or(f64::NAN, |m| m.value))
            .sum()
    }

    /// Same factor through `J(eps^2) M(n, n+9)`.
    pub fn hessian_factor_j_via_poly(&self, eps: f64) -> f64 {
        let n = self.nf();
        self.j_at(eps * eps) * radial_moment(n, n + 9.0).map_or(f64::NAN, |m| m.value)
    }

    /// `int eps^(n-2) (eps^2+r^2)^(1-n) r^(n+5) f'^2 dr` in closed form.
    pub fn hessian_factor_fp(&self, eps: f64) -> f64 {
        let n = self.nf();
        self.fp_sq
            .iter()
            .enumerate()
            .map(|(k, g)| g * eps.powi(6 + 2 * k as i32) * radial_moment(n - 1.0, n + 5.0 + 2.0 * k as f64).map_or(f64::NAN, |m| m.value))
            .sum()
    }

    /// Scalars `(a, b)` with Hessian `= a Q + b I`.
    pub fn hessian_decomposition(&self, eps: f64) -> (f64, f64) {
        let n = self.nf();
        let k1 = self.hessian_factor_j(eps);
        let k2 = self.hessian_factor_fp(eps);
        let nm2 = (n - 2.0) * (n - 2.0);
        let a = -2.0 * nm2 / (n * (n + 2.0) * (n + 4.0)) * self.area * k1;
        let b = self.area
            * self.s_norm
            * (-nm2 / (2.0 * n * (n + 2.0) * (n + 4.0)) * k1 + nm2 / (4.0 * n * (n - 1.0) * (n + 2.0)) * k2);
        (a, b)
    }

    /// Closed-form Hessian of `F` in the centre at `(0, eps)`.
    pub fn hessian_xixi(&self, eps: f64) -> DMatrix<f64> {
        let (a, b) = self.hessian_decomposition(eps);
        &self.q * a + DMatrix::identity(self.n, self.n) * b
    }

    /// The Hessian assembled from the three-integral formula, each radial
    /// integral done by quadrature.
    pub fn hessian_xixi_quadrature(&self, eps: f64) -> DMatrix<f64> {
        let n = self.nf();
        let tau = self.tau;
        let quad = |p: f64, beta: f64, decay: f64, br: &dyn Fn(f64, f64, f64) -> f64| {
            integrate_half_line(
                |r| {
                    let s = r * r;
                    weight(self.n, p, beta, eps, r) * br(s, eval_f(tau, s), eval_f_prime(s))
                },
                eps,
                decay,
                1e-14,
            )
            .value
        };
        let r1 = quad(n, n + 3.0, n - 15.0, &|_, f, _| f * f);
        let r2 = quad(n, n + 3.0, n - 15.0, &|s, f, fp| (n + 4.0) * f * f + 8.0 * s * f * fp + 4.0 * s * s * fp * fp);
        let r3 = quad(n, n + 3.0, n - 15.0, &|s, f, fp| (n + 4.0) * f * f + 4.0 * s * f * fp + 2.0 * s * s * fp * fp);
        let r4 = quad(n - 1.0, n + 1.0, n - 15.0, &|s, f, fp| (n + 2.0) * f * f + 4.0 * s * f * fp + 2.0 * s * s * fp * fp);
        let nm2 = (n - 2.0) * (n - 2.0);
        let c6 = n * (n + 2.0) * (n + 4.0);
        let qa = nm2 * self.area / (2.0 * n * (n + 2.0)) * r1 - nm2 / 4.0 * 2.0 * self.area / c6 * r2;
        let ib = -nm2 / 4.0 * self.area * self.s_norm / c6 * r3
            + nm2 / (8.0 * (n - 1.0)) * self.area * self.s_norm / (n * (n + 2.0)) * r4;
        &self.q * qa + DMatrix::identity(self.n, self.n) * ib
    }
}

/// `F(0, eps)` for a given form (builds the contractions).
pub fn f_axis(n: usize, tau: f64, w: &WeylForm, eps: f64) -> Result<f64> {
    Ok(AxisModel::new(n, tau, &w.contractions())?.f_axis(eps))
}

pub fn df_deps(n: usize, tau: f64, w: &WeylForm, eps: f64) -> Result<f64> {
    Ok(AxisModel::new(n, tau, &w.contractions())?.df_deps(eps))
}

pub fn d2f_deps2(n: usize, tau: f64, w: &WeylForm, eps: f64) -> Result<f64> {
    Ok(AxisModel::new(n, tau, &w.contractions())?.d2f_deps2(eps))
}

pub fn hessian_xixi(n: usize, tau: f64, w: &WeylForm, eps: f64) -> Result<DMatrix<f64>> {
    Ok(AxisModel::new(n, tau, &w.contractions())?.hessian_xixi(eps))
}

/// Pointwise residual of the total-derivative identity
/// `A^(1-n) r^(n+1) [(n+2) f^2 + 4 r^2 f f'] = 2(n-1) A^-n r^(n+3) f^2 + d/dr[A^(1-n) r^(n+2) f^2]`
/// with `A = eps^2 + r^2`, returned with the size of the largest term.
pub fn total_derivative_residual(n: usize, eps: f64, tau: f64, r: f64) -> (f64, f64) {
    let nf = n as f64;
    let a = eps * eps + r * r;
    let s = r * r;
    let (f, fp) = (eval_f(tau, s), eval_f_prime(s));
    let lhs = a.powf(1.0 - nf) * r.powf(nf + 1.0) * ((nf + 2.0) * f * f + 4.0 * s * f * fp);
    let t1 = 2.0 * (nf - 1.0) * a.powf(-nf) * r.powf(nf + 3.0) * f * f;
    // d/dr of A^(1-n) r^(n+2) f(r^2)^2, product rule term by term
    let d1 = (1.0 - nf) * 2.0 * r * a.powf(-nf) * r.powf(nf + 2.0) * f * f;
    let d2 = a.powf(1.0 - nf) * (nf + 2.0) * r.powf(nf + 1.0) * f * f;
    let d3 = a.powf(1.0 - nf) * r.powf(nf + 2.0) * 2.0 * f * fp * 2.0 * r;
    let res = lhs - t1 - (d1 + d2 + d3);
    let scale = [lhs, t1, d1, d2, d3].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (res, scale)
}

/// Largest relative residual of [`total_derivative_residual`] over `r_grid`.
pub fn total_derivative_identity_check(n: usize, eps: f64, tau: f64, r_grid: &[f64]) -> f64 {
    r_grid
        .iter()
        .map(|&r| {
            let (res, scale) = total_derivative_residual(n, eps, tau, r);
            if scale == 0.0 { res.abs() } else { res.abs() / scale }
        })
        .fold(0.0, f64::max)
}

/// Integrated form of the identity: `int A^(1-n) r^(n+1) [(n+2) f^2 + 4 r^2 f f']`
/// against `2(n-1) int A^-n r^(n+3) f^2` (the boundary terms vanish), both
/// times `eps^(n-2)` and in closed form from moments.
pub fn total_derivative_integrated(n: usize, eps: f64, tau: f64) -> Result<(f64, f64)> {
    let t = Rational::from_f64(tau).ok_or_else(|| LabError::NonFinite("tau".into()))?;
    let f = certify::profile_poly();
    let fp = f.derivative();
    let s = SPoly::var();
    let ni = n as i64;
    let lhs_br = f.clone().pow(2).scale(&TauPoly::from_int(ni + 2)) + (s * f.clone() * fp).scale(&TauPoly::from_int(4));
    let rhs_br = f.pow(2);
    let nf = n as f64;
    let lhs: f64 = coeffs_at(&lhs_br, &t)
        .iter()
        .enumerate()
        .map(|(k, c)| Ok(c * scaled_moment(n, nf - 1.0, nf + 1.0 + 2.0 * k as f64, eps)?))
        .sum::<Result<f64>>()?;
    let rhs: f64 = coeffs_at(&rhs_br, &t)
        .iter()
        .enumerate()
        .map(|(k, c)| Ok(2.0 * (nf - 1.0) * c * scaled_moment(n, nf, nf + 3.0 + 2.0 * k as f64, eps)?))
        .sum::<Result<f64>>()?;
    Ok((lhs, rhs))
}

/// Rigorous bound on `|dF/deps (0, 1)| / K` from the certified interval:
/// `2 max |I'(1)|` over the interval.
pub fn certified_slope_bound(cert: &TauCertificate) -> Result<f64> {
    let i = certify::poly_i(cert.n)?;
    let d1 = certify::at_one(&i.derivative());
    let enc = cert.interval.eval(&d1);
    Ok(2.0 * crate::rational::to_f64(&enc.max_abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_moments() {
        assert!((radial_moment(2.0, 1.0).unwrap().value - 0.5).abs() < 1e-15);
        assert!((radial_moment(4.0, 3.0).unwrap().value - 1.0 / 12.0).abs() < 1e-15);
        assert!(radial_moment(2.0, 3.0).is_err());
        assert!(radial_moment(5.0, -1.0).is_err());
    }

    #[test]
    fn recurrences() {
        let n = 25.0;
        let b = n + 7.0;
        let r = radial_moment(n - 2.0, b + 2.0).unwrap().value / radial_moment(n - 2.0, b).unwrap().value;
        assert!((r / ((b + 1.0) / (2.0 * n - b - 7.0)) - 1.0).abs() < 1e-13);
        let r = radial_moment(n, b + 2.0).unwrap().value / radial_moment(n, b).unwrap().value;
        assert!((r / ((b + 1.0) / (2.0 * n - b - 3.0)) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn quadrature_matches_beta() {
        for (p, b) in [(23.0, 26.0), (25.0, 34.0), (49.0, 60.0)] {
            let exact = radial_moment(p, b).unwrap().value;
            let q = radial_moment_quadrature(p, b, 1e-14).unwrap();
            assert!((q / exact - 1.0).abs() < 1e-10, "{p} {b}: {q} vs {exact}");
        }
    }

    #[test]
    fn total_derivative_at_origin() {
        assert_eq!(total_derivative_residual(25, 1.0, -7.0, 0.0).0, 0.0);
        let g: Vec<f64> = (1..50).map(|k| k as f64 * 0.1).collect();
        assert!(total_derivative_identity_check(25, 0.8, -7.04, &g) < 1e-12);
    }
}
