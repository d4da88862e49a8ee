//! Exact certification of the profile parameter `tau`.
//!
//! The polynomials `I(s)` and `J(s)` (coefficients in `Q[tau]`) govern the
//! radial energy along the axis and the second variation in the centre.
//! For each dimension the quadratic `I'(1) = 0` is solved for its root below
//! `-7` by rational bisection, and the sign conditions that make `(0, 1)` a
//! strict local minimum are proven by exact comparison.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rational::{
    decimal_string, dyadic_unit, exact_decimal, fraction_string, int, rat, to_f64, Poly, Rational,
    SPoly, TauPoly,
};

/// Dimensions in which the construction is asserted.
pub const ASSERTED_RANGE: std::ops::RangeInclusive<i64> = 25..=51;

/// Number of bisection halvings below unit width; the final interval is
/// narrower than `2^-TAU_BITS`.
pub const TAU_BITS: u32 = 64;

fn tau() -> TauPoly {
    TauPoly::var()
}

fn c(r: Rational) -> TauPoly {
    TauPoly::constant(r)
}

fn s_poly(coeffs: Vec<TauPoly>) -> SPoly {
    SPoly::new(coeffs)
}

fn check_poles(n: i64, poles: &[i64]) -> Result<()> {
    if poles.contains(&n) {
        return Err(LabError::PoleDimension(n));
    }
    Ok(())
}

/// `I(s)` exactly as stated, degree 8 in `s`.
pub fn poly_i(n: i64) -> Result<SPoly> {
    check_poles(n, &[12, 14, 16, 18])?;
    let r1 = rat(n - 12, n + 6);
    let p1 = rat(n + 8, n - 14);
    let p2 = rat(n + 10, n - 16);
    let p3 = rat(n + 12, n - 18);
    let t = tau();
    let c2 = t.clone().pow(2).scale(&(r1.clone() * rat(n - 10, n + 4) * int(n - 8)));
    let c3 = t.scale(&(int(10) * r1.clone() * int(n - 10)));
    let c4 = c(int(25) * r1 * int(n + 8)) - t.scale(&int(2 * (n - 12)));
    let c5 = t.scale(&rat(n + 8, 10)) - c(int(10 * (n + 12)));
    let c6 = c(p1.clone() * rat(3 * n + 52, 2));
    let c7 = c(-(p1.clone() * p2.clone() * rat(n + 24, 10)));
    let c8 = c(p1 * p2 * p3 * rat(n + 32, 400));
    let z = TauPoly::zero();
    Ok(s_poly(vec![z.clone(), z, c2, c3, c4, c5, c6, c7, c8]))
}

/// `J(s)` exactly as stated, degree 7 in `s`.
pub fn poly_j(n: i64) -> Result<SPoly> {
    check_poles(n, &[12, 14, 16])?;
    let q1 = rat(n + 10, n - 12);
    let q2 = rat(n + 12, n - 14);
    let q3 = rat(n + 14, n - 16);
    let t = tau();
    let c2 = t.scale(&(int(10) * rat(n - 10, n + 8) * rat(n - 8, n + 6)));
    let c3 = (c(int(75)) - t.scale(&int(4))).scale(&rat(n - 10, n + 8));
    let c4 = t.scale(&rat(3, 10)) - c(int(50));
    let c5 = c(rat(23, 2) * q1.clone());
    let c6 = c(-(rat(11, 10) * q1.clone() * q2.clone()));
    let c7 = c(rat(3, 80) * q1 * q2 * q3);
    let z = TauPoly::zero();
    Ok(s_poly(vec![z.clone(), z, c2, c3, c4, c5, c6, c7]))
}

/// The profile `f(s) = tau + 5 s - s^2 + s^3 / 20` over `Q[tau]`.
pub fn profile_poly() -> SPoly {
    s_poly(vec![tau(), c(int(5)), c(int(-1)), c(rat(1, 20))])
}

/// `(n+2) f^2 + 4 s f f' + 2 s^2 f'^2`, computed from `f`.
pub fn axis_bracket(n: i64) -> SPoly {
    let f = profile_poly();
    let fp = f.derivative();
    let s = SPoly::var();
    f.clone().pow(2).scale(&TauPoly::constant(int(n + 2)))
        + (s.clone() * f * fp.clone()).scale(&TauPoly::constant(int(4)))
        + (s.pow(2) * fp.pow(2)).scale(&TauPoly::constant(int(2)))
}

/// `2 f f' + s f'^2`, computed from `f`.
pub fn hessian_bracket() -> SPoly {
    let f = profile_poly();
    let fp = f.derivative();
    (f * fp.clone()).scale(&TauPoly::constant(int(2))) + SPoly::var() * fp.pow(2)
}

/// The stated expansion of [`axis_bracket`].
pub fn axis_bracket_stated(n: i64) -> SPoly {
    let t = tau();
    s_poly(vec![
        t.clone().pow(2).scale(&int(n + 2)),
        t.scale(&int(10 * (n + 4))),
        c(int(25 * (n + 8))) - t.scale(&int(2 * (n + 6))),
        t.scale(&rat(n + 8, 10)) - c(int(10 * (n + 12))),
        c(rat(3 * n + 52, 2)),
        c(-rat(n + 24, 10)),
        c(rat(n + 32, 400)),
    ])
}

/// The stated expansion of [`hessian_bracket`].
pub fn hessian_bracket_stated() -> SPoly {
    let t = tau();
    s_poly(vec![
        t.scale(&int(10)),
        c(int(75)) - t.scale(&int(4)),
        t.scale(&rat(3, 10)) - c(int(50)),
        c(rat(23, 2)),
        c(-rat(11, 10)),
        c(rat(3, 80)),
    ])
}

/// Exact `M(p, beta) / M(p, beta0)` for `M(p, beta) = int_0^inf (1+r^2)^-p r^beta dr`,
/// with `beta - beta0` even. Errors if either moment diverges.
pub fn moment_ratio(p: i64, beta: i64, beta0: i64) -> Result<Rational> {
    if (beta - beta0) % 2 != 0 {
        return Err(LabError::InvalidParameter(format!(
            "moment ratio needs beta - beta0 even, got {beta} and {beta0}"
        )));
    }
    for b in [beta, beta0] {
        if b <= -1 || 2 * p - b - 1 <= 0 {
            return Err(LabError::Divergent { p: p as f64, beta: b as f64 });
        }
    }
    let (lo, hi, invert) = if beta >= beta0 {
        (beta0, beta, false)
    } else {
        (beta, beta0, true)
    };
    let mut r = Rational::one();
    let mut b = lo;
    while b < hi {
        r *= rat(b + 1, 2 * p - b - 3);
        b += 2;
    }
    Ok(if invert { r.recip() } else { r })
}

/// `I(s)` rebuilt from the bracket expansion and exact moment ratios.
pub fn poly_i_from_moments(n: i64) -> Result<SPoly> {
    let br = axis_bracket(n);
    let mut coeffs = vec![TauPoly::zero(), TauPoly::zero()];
    for k in 0..=br.degree().unwrap_or(0) {
        let ratio = moment_ratio(n - 2, n + 1 + 2 * k as i64, n + 7)?;
        coeffs.push(br.coeff(k).scale(&ratio));
    }
    Ok(SPoly::new(coeffs))
}

/// `J(s)` rebuilt from the bracket expansion and exact moment ratios.
pub fn poly_j_from_moments(n: i64) -> Result<SPoly> {
    let br = hessian_bracket();
    let mut coeffs = vec![TauPoly::zero(), TauPoly::zero()];
    for k in 0..=br.degree().unwrap_or(0) {
        let ratio = moment_ratio(n, n + 5 + 2 * k as i64, n + 9)?;
        coeffs.push(br.coeff(k).scale(&ratio));
    }
    Ok(SPoly::new(coeffs))
}

/// Value of an `s`-polynomial at `s = 1`.
pub fn at_one(p: &SPoly) -> TauPoly {
    p.eval(&TauPoly::one())
}

/// `sum_k k c_k`, the derivative at `s = 1` without differentiating.
pub fn derivative_at_one_by_coefficients(p: &SPoly) -> TauPoly {
    p.coeffs()
        .iter()
        .enumerate()
        .fold(TauPoly::zero(), |acc, (k, ck)| acc + ck.scale(&int(k as i64)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionCoefficients {
    pub n: i64,
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    pub gamma: Rational,
    pub delta: Rational,
}

/// The coefficients of the three linear/quadratic conditions, as stated.
pub fn dimension_coefficients(n: i64) -> Result<DimensionCoefficients> {
    if n < 19 {
        return Err(LabError::UnsupportedDimension {
            n,
            reason: "coefficients are only defined (and moments convergent) for n >= 19".into(),
        });
    }
    let r1 = rat(n - 12, n + 6);
    let p1 = rat(n + 8, n - 14);
    let p2 = rat(n + 10, n - 16);
    let p3 = rat(n + 12, n - 18);
    let q1 = rat(n + 10, n - 12);
    let q2 = rat(n + 12, n - 14);
    let q3 = rat(n + 14, n - 16);
    let a = int(2) * r1.clone() * rat(n - 10, n + 4) * int(n - 8);
    let b = int(30) * r1.clone() * int(n - 10) - int(8 * (n - 12)) + rat(n + 8, 2);
    let c = int(100) * r1.clone() * int(n + 8) - int(50 * (n + 12))
        + int(3) * p1.clone() * int(3 * n + 52)
        - int(7) * p1.clone() * p2.clone() * rat(n + 24, 10)
        + p1.clone() * p2.clone() * p3.clone() * rat(n + 32, 50);
    let alpha = int(30) * r1.clone() * int(n - 10) - int(16 * (n - 12)) + rat(3 * (n + 8), 2);
    let beta = int(200) * r1 * int(n + 8) - int(150 * (n + 12))
        + int(12) * p1.clone() * int(3 * n + 52)
        - int(35) * p1.clone() * p2.clone() * rat(n + 24, 10)
        + int(3) * p1 * p2 * p3 * rat(n + 32, 25);
    let gamma = int(10) * rat(n - 10, n + 8) * rat(n - 8, n + 6) - rat(4 * (n - 10), n + 8)
        + rat(3, 10);
    let delta = int(75) * rat(n - 10, n + 8) - int(50) + rat(23, 2) * q1.clone()
        - rat(11, 10) * q1.clone() * q2.clone()
        + rat(3, 80) * q1 * q2 * q3;
    Ok(DimensionCoefficients { n, a, b, c, alpha, beta, gamma, delta })
}

impl DimensionCoefficients {
    /// `a tau^2 + b tau + c`.
    pub fn quadratic(&self) -> TauPoly {
        TauPoly::new(vec![self.c.clone(), self.b.clone(), self.a.clone()])
    }

    pub fn second_order_line(&self) -> TauPoly {
        TauPoly::new(vec![self.beta.clone(), self.alpha.clone()])
    }

    pub fn hessian_line(&self) -> TauPoly {
        TauPoly::new(vec![self.delta.clone(), self.gamma.clone()])
    }
}

/// Result of one bridge identity: the stated polynomial minus the one
/// derived from `I` or `J`.
#[derive(Clone, Debug)]
pub struct BridgeIdentity {
    pub name: &'static str,
    pub derived: TauPoly,
    pub stated: TauPoly,
}

impl BridgeIdentity {
    pub fn holds(&self) -> bool {
        self.derived == self.stated
    }
}

/// The three exact identities linking `I`, `J` to the coefficient lists.
pub fn bridge_identities(n: i64) -> Result<Vec<BridgeIdentity>> {
    let dc = dimension_coefficients(n)?;
    let i = poly_i(n)?;
    let j = poly_j(n)?;
    let d1 = at_one(&i.derivative());
    let d2 = at_one(&i.derivative().derivative());
    Ok(vec![
        BridgeIdentity { name: "I'(1) = a tau^2 + b tau + c", derived: d1.clone(), stated: dc.quadratic() },
        BridgeIdentity {
            name: "I''(1) - I'(1) = alpha tau + beta",
            derived: d2 - d1,
            stated: dc.second_order_line(),
        },
        BridgeIdentity { name: "J(1) = gamma tau + delta", derived: at_one(&j), stated: dc.hessian_line() },
    ])
}

/// Closed rational interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalInterval {
    pub lo: Rational,
    pub hi: Rational,
}

impl RationalInterval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        RationalInterval { lo, hi }
    }

    pub fn point(v: Rational) -> Self {
        RationalInterval { lo: v.clone(), hi: v }
    }

    pub fn width(&self) -> Rational {
        self.hi.clone() - self.lo.clone()
    }

    pub fn midpoint(&self) -> Rational {
        (self.lo.clone() + self.hi.clone()) / int(2)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.lo.clone() + o.lo.clone(), self.hi.clone() + o.hi.clone())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let cands = [
            self.lo.clone() * o.lo.clone(),
            self.lo.clone() * o.hi.clone(),
            self.hi.clone() * o.lo.clone(),
            self.hi.clone() * o.hi.clone(),
        ];
        let lo = cands.iter().min().cloned().unwrap_or_else(Rational::zero);
        let hi = cands.iter().max().cloned().unwrap_or_else(Rational::zero);
        Self::new(lo, hi)
    }

    pub fn max_abs(&self) -> Rational {
        self.lo.abs().max(self.hi.abs())
    }

    /// Horner evaluation; the result encloses the range of `p` on `self`.
    pub fn eval(&self, p: &Poly<Rational>) -> Self {
        let mut acc = Self::point(Rational::zero());
        for ck in p.coeffs().iter().rev() {
            acc = acc.mul(self).add(&Self::point(ck.clone()));
        }
        acc
    }
}

/// Ordering asserted by a check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Less,
    #[serde(rename = ">")]
    Greater,
    #[serde(rename = "=")]
    Equal,
    #[serde(rename = "<=")]
    LessEq,
}

/// One exact comparison `lhs (relation) rhs`.
#[derive(Clone, Debug)]
pub struct ExactCheck {
    pub name: String,
    pub lhs: Rational,
    pub relation: Relation,
    pub rhs: Rational,
}

impl ExactCheck {
    pub fn new(name: impl Into<String>, lhs: Rational, relation: Relation, rhs: Rational) -> Self {
        ExactCheck { name: name.into(), lhs, relation, rhs }
    }

    pub fn holds(&self) -> bool {
        match self.relation {
            Relation::Less => self.lhs < self.rhs,
            Relation::Greater => self.lhs > self.rhs,
            Relation::Equal => self.lhs == self.rhs,
            Relation::LessEq => self.lhs <= self.rhs,
        }
    }
}

/// Exact certificate for one dimension.
#[derive(Clone, Debug)]
pub struct TauCertificate {
    pub n: i64,
    pub coefficients: DimensionCoefficients,
    pub interval: RationalInterval,
    pub checks: Vec<ExactCheck>,
    /// Number of bisection steps performed.
    pub bisection_steps: u32,
}

impl TauCertificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(ExactCheck::holds)
    }

    /// Whether the dimension lies in the range where success is asserted.
    pub fn asserted(&self) -> bool {
        ASSERTED_RANGE.contains(&self.n)
    }

    /// Nearest double to the certified root.
    pub fn tau_f64(&self) -> f64 {
        to_f64(&self.interval.midpoint())
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            n: self.n,
            tau_interval: [exact_decimal(&self.interval.lo), exact_decimal(&self.interval.hi)],
            tau_approx: self.tau_f64(),
            checks: self
                .checks
                .iter()
                .map(|c| CertificateCheckJson {
                    name: c.name.clone(),
                    verdict: if c.holds() { "PASS" } else { "FAIL" }.to_string(),
                    relation: c.relation,
                    lhs_str: fraction_string(&c.lhs),
                    rhs_str: fraction_string(&c.rhs),
                    lhs_decimal: decimal_string(&c.lhs, 24),
                    rhs_decimal: decimal_string(&c.rhs, 24),
                })
                .collect(),
        }
    }
}

/// Serialized form of a certificate. Interval endpoints are dyadic, so their
/// decimal strings are exact; check operands are given as exact `p/q`
/// strings with a truncated decimal alongside.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateJson {
    pub n: i64,
    pub tau_interval: [String; 2],
    pub tau_approx: f64,
    pub checks: Vec<CertificateCheckJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CertificateCheckJson {
    pub name: String,
    pub verdict: String,
    pub relation: Relation,
    pub lhs_str: String,
    pub rhs_str: String,
    pub lhs_decimal: String,
    pub rhs_decimal: String,
}

/// Root of `q` in `(lo, hi)` by bisection at dyadic midpoints, keeping
/// `q(lo) > 0 > q(hi)` at every step.
fn bisect_root(q: &TauPoly, mut lo: Rational, mut hi: Rational, bits: u32) -> (RationalInterval, u32, bool) {
    let target = dyadic_unit(bits);
    let mut steps = 0;
    let mut invariant = q.eval(&lo).is_positive() && q.eval(&hi).is_negative();
    while hi.clone() - lo.clone() > target {
        let mid = (lo.clone() + hi.clone()) / int(2);
        let v = q.eval(&mid);
        if v.is_zero() {
            return (RationalInterval::point(mid), steps, invariant);
        }
        if v.is_positive() {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
        invariant &= q.eval(&lo).is_positive() && q.eval(&hi).is_negative();
    }
    (RationalInterval::new(lo, hi), steps, invariant)
}

/// Certifies one dimension. Every inequality and identity is decided
/// exactly; any failure is reported as an error naming it.
pub fn certify_dimension(n: i64) -> Result<TauCertificate> {
    let cert = build_certificate(n)?;
    if let Some(bad) = cert.checks.iter().find(|c| !c.holds()) {
        return Err(LabError::CertificationFailed { n, check: bad.name.clone() });
    }
    Ok(cert)
}

/// As [`certify_dimension`], but returns the certificate with failing
/// checks instead of an error.
pub fn build_certificate(n: i64) -> Result<TauCertificate> {
    let dc = dimension_coefficients(n)?;
    let i = poly_i(n)?;
    let j = poly_j(n)?;
    let zero = Rational::zero();
    let minus7 = int(-7);
    let q = dc.quadratic();

    let mut checks = vec![
        ExactCheck::new("a_n > 0", dc.a.clone(), Relation::Greater, zero.clone()),
        ExactCheck::new("49 a_n - 7 b_n + c_n < 0", q.eval(&minus7), Relation::Less, zero.clone()),
        ExactCheck::new("7 alpha_n > beta_n", int(7) * dc.alpha.clone(), Relation::Greater, dc.beta.clone()),
        ExactCheck::new("beta_n > 0", dc.beta.clone(), Relation::Greater, zero.clone()),
        ExactCheck::new("7 gamma_n > delta_n", int(7) * dc.gamma.clone(), Relation::Greater, dc.delta.clone()),
        ExactCheck::new("delta_n > 0", dc.delta.clone(), Relation::Greater, zero.clone()),
    ];

    let one = Rational::one();
    let zero_or_one = |ok: bool| if ok { one.clone() } else { zero.clone() };
    for b in bridge_identities(n)? {
        checks.push(ExactCheck::new(format!("identity {}", b.name), zero_or_one(b.holds()), Relation::Equal, one.clone()));
    }
    let d_sym = at_one(&i.derivative());
    let d_coef = derivative_at_one_by_coefficients(&i);
    checks.push(ExactCheck::new(
        "identity I'(1) by differentiation = sum k c_k",
        zero_or_one(d_sym == d_coef),
        Relation::Equal,
        one.clone(),
    ));
    checks.push(ExactCheck::new(
        "identity I(s) = bracket expansion x moment ratios",
        zero_or_one(poly_i_from_moments(n)? == i),
        Relation::Equal,
        one.clone(),
    ));
    checks.push(ExactCheck::new(
        "identity J(s) = bracket expansion x moment ratios",
        zero_or_one(poly_j_from_moments(n)? == j),
        Relation::Equal,
        one.clone(),
    ));

    // Bracket the root from below: q is positive far to the left since a > 0.
    let mut lo = int(-8);
    while !q.eval(&lo).is_positive() && lo > int(-(1 << 40)) {
        lo *= int(2);
    }
    let (interval, steps, invariant) = bisect_root(&q, lo, minus7.clone(), TAU_BITS);

    checks.push(ExactCheck::new("q(tau_lo) > 0", q.eval(&interval.lo), Relation::Greater, zero.clone()));
    checks.push(ExactCheck::new("q(tau_hi) < 0", q.eval(&interval.hi), Relation::Less, zero.clone()));
    checks.push(ExactCheck::new(
        "sign change kept at every bisection step",
        zero_or_one(invariant),
        Relation::Equal,
        one.clone(),
    ));
    checks.push(ExactCheck::new("tau_hi < -7", interval.hi.clone(), Relation::Less, minus7));
    checks.push(ExactCheck::new("interval width <= 2^-40", interval.width(), Relation::LessEq, dyadic_unit(40)));

    let mid = RationalInterval::point(interval.midpoint());
    let slope = interval.eval(&q.derivative()).max_abs();
    checks.push(ExactCheck::new(
        "|q(tau_mid)| <= max|q'| width / 2",
        mid.eval(&q).max_abs(),
        Relation::LessEq,
        slope * interval.width() / int(2),
    ));

    let i2 = at_one(&i.derivative().derivative());
    checks.push(ExactCheck::new("I''(1) < 0 on interval", interval.eval(&i2).hi, Relation::Less, zero.clone()));
    checks.push(ExactCheck::new("J(1) < 0 on interval", interval.eval(&at_one(&j)).hi, Relation::Less, zero.clone()));
    checks.push(ExactCheck::new("I(1) > 0 on interval", interval.eval(&at_one(&i)).lo, Relation::Greater, zero));

    Ok(TauCertificate { n, coefficients: dc, interval, checks, bisection_steps: steps })
}

/// Certificates for every dimension in `n_min..=n_max`, computed in parallel.
pub fn sweep(n_min: i64, n_max: i64) -> Result<Vec<TauCertificate>> {
    use rayon::prelude::*;
    if n_min > n_max {
        return Err(LabError::EmptyRange { min: n_min, max: n_max });
    }
    (n_min..=n_max).into_par_iter().map(certify_dimension).collect()
}
