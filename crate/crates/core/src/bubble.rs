//! The standard bubble `u = (eps / (eps^2 + |x - xi|^2))^((n-2)/2)`, its
//! closed-form derivatives, the mass identity and the cokernel functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::{beta_fn, integrate_adaptive, integrate_half_line, integrate_half_line_tol, rule20, sphere_area, Tolerance};
use crate::sphere::SphereMomentTable;

/// Centre `xi` and scale `eps` of a bubble; the dimension is `xi.len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub xi: Vec<f64>,
    pub eps: f64,
}

impl BubbleParams {
    pub fn new(xi: Vec<f64>, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(LabError::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(BubbleParams { xi, eps })
    }

    pub fn centered(n: usize, eps: f64) -> Result<Self> {
        Self::new(vec![0.0; n], eps)
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }
}

/// The parameter set `{|xi| < 1, 1/2 < eps < 2}` scaled by `scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub scale: f64,
}

impl DomainBox {
    pub fn unit() -> Self {
        DomainBox { scale: 1.0 }
    }

    pub fn scaled(lambda: f64) -> Self {
        DomainBox { scale: lambda }
    }

    pub fn contains(&self, p: &BubbleParams) -> bool {
        let norm = p.xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        norm < self.scale && 0.5 * self.scale < p.eps && p.eps < 2.0 * self.scale
    }
}

/// `u`, its gradient and its Hessian at a point.
#[derive(Clone, Debug)]
pub struct BubbleJet {
    pub u: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl BubbleJet {
    pub fn laplacian(&self) -> f64 {
        self.hess.trace()
    }
}

fn offset(p: &BubbleParams, x: &[f64]) -> (Vec<f64>, f64) {
    let y: Vec<f64> = x.iter().zip(&p.xi).map(|(a, b)| a - b).collect();
    let r2 = y.iter().map(|v| v * v).sum();
    (y, r2)
}

/// `u(x)` alone.
pub fn eval_u(p: &BubbleParams, x: &[f64]) -> f64 {
    let (_, r2) = offset(p, x);
    let a = (p.n() as f64 - 2.0) / 2.0;
    (p.eps / (p.eps * p.eps + r2)).powf(a)
}

/// With `D = eps^2 + |y|^2`, `y = x - xi`, `a = (n-2)/2`:
/// `du = -2a u y / D`, `d^2 u = -2a u (I / D - 2(a+1) y y^T / D^2)`.
pub fn eval_u_jet(p: &BubbleParams, x: &[f64]) -> BubbleJet {
    let n = p.n();
    let (y, r2) = offset(p, x);
    let a = (n as f64 - 2.0) / 2.0;
    let d = p.eps * p.eps + r2;
    let u = (p.eps / d).powf(a);
    let yv = DVector::from_vec(y);
    let grad = &yv * (-2.0 * a * u / d);
    let mut hess = &yv * yv.transpose() * (4.0 * a * (a + 1.0) * u / (d * d));
    for i in 0..n {
        hess[(i, i)] -= 2.0 * a * u / d;
    }
    BubbleJet { u, grad, hess }
}

/// `Delta u + n(n-2) u^((n+2)/(n-2))` and the size of its two terms.
pub fn pde_residual(p: &BubbleParams, x: &[f64]) -> (f64, f64) {
    let nf = p.n() as f64;
    let jet = eval_u_jet(p, x);
    let lap = jet.laplacian();
    let source = nf * (nf - 2.0) * jet.u.powf((nf + 2.0) / (nf - 2.0));
    (lap + source, lap.abs() + source.abs())
}

/// `int u^(2n/(n-2)) = |S^(n-1)| B(n/2, n/2) / 2`.
pub fn bubble_mass(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(LabError::UnsupportedDimension { n: n as i64, reason: "bubble needs n >= 3".into() });
    }
    let h = n as f64 / 2.0;
    Ok(sphere_area(n) * 0.5 * beta_fn(h, h))
}

/// The sphere constant defined through the mass, `4 n (n-1) mass^(2/n)`, so
/// that `mass = (Y / (4 n (n-1)))^(n/2)`.
pub fn sphere_yamabe_constant(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok(4.0 * nf * (nf - 1.0) * bubble_mass(n)?.powf(2.0 / nf))
}

/// `int_{R^n} g` for `g` depending on `r = |x|` and `t = x_1 / |x|` only:
/// `|S^(n-2)| int_0^inf r^(n-1) int_{-1}^1 g(r, t) (1-t^2)^((n-3)/2) dt dr`.
/// `scale` is the length scale of `g` and `decay` the power-law decay of
/// the radial integrand. The angular integral at each radius is accurate
/// to `1e-13` of `int |g|`, so vanishing integrals terminate.
pub fn integrate_axisymmetric(
    n: usize,
    g: impl Fn(f64, f64) -> f64,
    scale: f64,
    decay: f64,
    tol: Tolerance,
) -> f64 {
    let w = (n as f64 - 3.0) / 2.0;
    let radial = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let weighted = |t: f64| g(r, t) * (1.0 - t * t).powf(w);
        let size = rule20().integrate(-1.0, 1.0, &mut |t| weighted(t).abs());
        let ang = integrate_adaptive(weighted, -1.0, 1.0, Tolerance { abs: 1e-13 * size, rel: 1e-13 });
        r.powi(n as i32 - 1) * ang
    };
    let area = sphere_area(n - 1);
    let outer = Tolerance { abs: tol.abs / area, rel: tol.rel };
    area * integrate_half_line_tol(radial, scale, decay, outer).value
}

/// `int u^(2n/(n-2))` by quadrature in polar coordinates about the origin
/// (not about `xi`), with `xi` along the first axis.
pub fn bubble_mass_quadrature(n: usize, xi_norm: f64, eps: f64) -> f64 {
    let g = |r: f64, t: f64| {
        let d2 = (r * r + xi_norm * xi_norm - 2.0 * r * xi_norm * t).max(0.0);
        (eps / (eps * eps + d2)).powi(n as i32)
    };
    integrate_axisymmetric(n, g, eps + xi_norm, n as f64 + 1.0, Tolerance { abs: 0.0, rel: 1e-11 })
}

/// `phi_0` and `phi_k` (`1 <= k <= n`).
pub fn eval_phi(p: &BubbleParams, k: usize, x: &[f64]) -> Result<f64> {
    let n = p.n();
    if k > n {
        return Err(LabError::IndexOutOfRange { index: k, n });
    }
    let (y, r2) = offset(p, x);
    let e2 = p.eps * p.eps;
    let d = e2 + r2;
    let base = (p.eps / d).powf((n as f64 + 2.0) / 2.0);
    Ok(if k == 0 { base * (e2 - r2) / d } else { base * 2.0 * p.eps * y[k - 1] / d })
}

/// `L^2` Gram matrix of `phi_0, ..., phi_n`. Each product is a radial
/// function times a monomial of degree at most two in `x - xi`, so entries
/// are a sphere moment times a one-dimensional radial quadrature.
pub fn phi_gram(n: usize, eps: f64) -> DMatrix<f64> {
    let table = SphereMomentTable::new(n);
    let e2 = eps * eps;
    let nf = n as f64;
    let base2 = |r: f64| (eps / (e2 + r * r)).powf(nf + 2.0);
    let rad = |f: &dyn Fn(f64) -> f64| integrate_half_line(f, eps, nf + 3.0, 1e-12).value;
    // phi_0^2 = base^2 (e^2 - r^2)^2 / D^2; phi_k phi_l = base^2 4 e^2 y_k y_l / D^2.
    let r00 = rad(&|r: f64| {
        let d = e2 + r * r;
        r.powi(n as i32 - 1) * base2(r) * ((e2 - r * r) / d).powi(2)
    });
    let rkk = rad(&|r: f64| {
        let d = e2 + r * r;
        r.powi(n as i32 + 1) * base2(r) * 4.0 * e2 / (d * d)
    });
    let r0k = rad(&|r: f64| {
        let d = e2 + r * r;
        r.powi(n as i32) * base2(r) * (e2 - r * r) * 2.0 * eps / (d * d)
    });
    DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, 0) => r00 * table.area,
        (0, k) | (k, 0) => r0k * table.monomial(&[k - 1]),
        (k, l) => rkk * table.monomial(&[k - 1, l - 1]),
    })
}

/// `int phi_0 phi_1` by quadrature about the centre, axis along `x_1`,
/// with absolute tolerance `abs_tol`.
pub fn phi01_overlap(n: usize, eps: f64, abs_tol: f64) -> f64 {
    let e2 = eps * eps;
    let g = |r: f64, t: f64| {
        let d = e2 + r * r;
        let base2 = (eps / d).powf(n as f64 + 2.0);
        base2 * (e2 - r * r) / d * 2.0 * eps * r * t / d
    };
    integrate_axisymmetric(n, g, eps, n as f64 + 3.0, Tolerance { abs: abs_tol, rel: 1e-10 })
}

/// `du du^T - c d^2(u^2) - (|du|^2 - c Delta(u^2)) I / n` with
/// `c = (n-2) / (4(n-1))`; vanishes identically.
pub fn tracefree_pointwise_identity(p: &BubbleParams, x: &[f64]) -> DMatrix<f64> {
    let n = p.n();
    let c = (n as f64 - 2.0) / (4.0 * (n as f64 - 1.0));
    let jet = eval_u_jet(p, x);
    let gg = &jet.grad * jet.grad.transpose();
    let hess_u2 = (&gg + &jet.hess * jet.u) * 2.0;
    let mut m = &gg - &hess_u2 * c;
    let t = (gg.trace() - c * hess_u2.trace()) / n as f64;
    for i in 0..n {
        m[(i, i)] -= t;
    }
    m
}

/// Size of the terms entering [`tracefree_pointwise_identity`], for relative
/// comparisons.
pub fn tracefree_scale(p: &BubbleParams, x: &[f64]) -> f64 {
    let jet = eval_u_jet(p, x);
    jet.grad.norm_squared() + jet.u * jet.hess.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn value_and_residual_at_centre() {
        let p = BubbleParams::centered(7, 1.0).unwrap();
        let x = vec![0.0; 7];
        assert_eq!(eval_u(&p, &x), 1.0);
        let (res, _) = pde_residual(&p, &x);
        assert!(res.abs() < 1e-13);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let p = BubbleParams::new(vec![0.1, -0.2, 0.3, 0.0, 0.05], 0.8).unwrap();
        let x = [0.4, 0.1, -0.3, 0.2, 0.7];
        let jet = eval_u_jet(&p, &x);
        let h = 1e-4;
        for i in 0..5 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (eval_u(&p, &xp) - eval_u(&p, &xm)) / (2.0 * h);
            assert!((fd - jet.grad[i]).abs() < 1e-7);
            let fd2 = (eval_u(&p, &xp) - 2.0 * jet.u + eval_u(&p, &xm)) / (h * h);
            assert!((fd2 - jet.hess[(i, i)]).abs() < 1e-5);
        }
    }

    #[test]
    fn mass_n4() {
        assert!((bubble_mass(4).unwrap() - PI * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn phi_values() {
        let p = BubbleParams::centered(5, 1.0).unwrap();
        let x = vec![0.0; 5];
        assert_eq!(eval_phi(&p, 0, &x).unwrap(), 1.0);
        assert_eq!(eval_phi(&p, 3, &x).unwrap(), 0.0);
        assert!(eval_phi(&p, 6, &x).is_err());
    }

    #[test]
    fn domain_membership_is_strict() {
        let d = DomainBox::scaled(0.1);
        assert!(d.contains(&BubbleParams::new(vec![0.05, 0.0], 0.1).unwrap()));
        assert!(!d.contains(&BubbleParams::new(vec![0.1, 0.0], 0.1).unwrap()));
        assert!(!d.contains(&BubbleParams::new(vec![0.0, 0.0], 0.05).unwrap()));
    }
}
