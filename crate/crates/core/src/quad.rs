//! One-dimensional quadrature and special functions.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use libm::{lgamma as ln_gamma, tgamma as gamma};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub struct GaussRule {
    pairs: Vec<(f64, f64)>,
}

impl GaussRule {
    fn new(order: usize) -> Self {
        let rule = GaussLegendre::new(order).expect("order >= 2");
        GaussRule { pairs: rule.as_node_weight_pairs().to_vec() }
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        self.pairs.iter().map(move |&(x, w)| (m + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Shared 20-point rule.
pub fn rule20() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(20))
}

/// Shared 16-point rule used for composite panels.
pub fn rule16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

fn adaptive_rec(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: Tolerance,
    depth: u32,
) -> f64 {
    let rule = rule20();
    let m = 0.5 * (a + b);
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= tol.abs.max(tol.rel * refined.abs()) {
        return refined;
    }
    let half = Tolerance { abs: 0.5 * tol.abs, rel: tol.rel };
    adaptive_rec(f, a, m, left, half, depth - 1) + adaptive_rec(f, m, b, right, half, depth - 1)
}

/// Absolute and relative tolerance; a panel is accepted when either holds.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

/// Adaptive Gauss-Legendre on `[a, b]`.
pub fn integrate_adaptive(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> f64 {
    let whole = rule20().integrate(a, b, &mut f);
    adaptive_rec(&mut f, a, b, whole, tol, 14)
}

/// Value of a half-line integral and the analytic bound on the neglected tail.
#[derive(Clone, Copy, Debug)]
pub struct HalfLine {
    pub value: f64,
    pub tail_bound: f64,
}

/// `int_0^inf f(r) dr` for an integrand with `|f(r)| <= |f(R)| (R / r)^decay`
/// beyond the last panel. Panels double in length starting from
/// `scale / 256`; integration stops once the tail bound
/// `|f(R)| R / (decay - 1)` is below `rel_tol` times the running value.
pub fn integrate_half_line(f: impl FnMut(f64) -> f64, scale: f64, decay: f64, rel_tol: f64) -> HalfLine {
    integrate_half_line_tol(f, scale, decay, Tolerance { abs: 0.0, rel: rel_tol })
}

/// As [`integrate_half_line`], also accepting an absolute tolerance (needed
/// when the integral may vanish).
pub fn integrate_half_line_tol(mut f: impl FnMut(f64) -> f64, scale: f64, decay: f64, tol: Tolerance) -> HalfLine {
    assert!(decay > 1.0, "integrand must decay faster than 1/r");
    let mut a = 0.0;
    let mut b = scale / 256.0;
    let mut total = 0.0f64;
    loop {
        let panel = Tolerance { abs: (1e-2 * tol.rel * total.abs()).max(1e-2 * tol.abs), rel: tol.rel.max(1e-15) };
        let piece = integrate_adaptive(&mut f, a, b, panel);
        total += piece;
        let tail = (f(b) * b).abs() / (decay - 1.0);
        if b > scale && (tail <= tol.abs.max(tol.rel * total.abs()) || b > 1e12 * scale) {
            return HalfLine { value: total, tail_bound: tail };
        }
        a = b;
        b *= 2.0;
    }
}

/// `Gamma(x)` for positive `x`.
pub fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

/// Euler Beta function.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    if a + b < 150.0 {
        gamma(a) / gamma(a + b) * gamma(b)
    } else {
        (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
    }
}

/// `|S^(n-1)| = 2 pi^(n/2) / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    if h < 150.0 {
        2.0 * std::f64::consts::PI.powf(h) / gamma(h)
    } else {
        (std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - ln_gamma(h)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn beta_small() {
        assert!((beta_fn(2.0, 2.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((beta_fn(0.5, 0.5) - PI).abs() < 1e-14);
    }

    #[test]
    fn adaptive_and_half_line() {
        let v = integrate_adaptive(|x| x.sin(), 0.0, PI, Tolerance { abs: 1e-14, rel: 1e-14 });
        assert!((v - 2.0).abs() < 1e-13);
        let h = integrate_half_line(|r| 1.0 / (1.0 + r * r), 1.0, 2.0, 1e-12);
        assert!((h.value - PI / 2.0).abs() < 1e-11);
    }
}
