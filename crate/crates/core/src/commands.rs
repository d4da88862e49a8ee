//! Command implementations shared by the CLI and the acceptance tests. Each
//! returns a [`CheckReport`] and, where useful, a table for CSV output.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubble::{
    bubble_mass, bubble_mass_quadrature, eval_phi, integrate_axisymmetric, pde_residual, phi01_overlap, phi_gram,
    sphere_yamabe_constant, tracefree_pointwise_identity, tracefree_scale, BubbleParams,
};
use crate::certify::{build_certificate, ExactCheck, Relation, TauCertificate, ASSERTED_RANGE};
use crate::error::{LabError, Result};
use crate::metric::{
    axis_energy_from_metric, error_term_bruteforce, error_term_norms, expansion_study, exp_deviation, glued_bump_sups,
    glued_h, loglog_slope, matrix_exp, sample_shell, single_bump_sup, smoothstep5, unit_sup_scaling, Bump,
    ErrorNorm, ErrorTermConfig, ExpansionStudy, GluedBumpSpec, PerturbParams, SingleBumpProfile, FD_STEP_FACTOR,
};
use crate::quad::{sphere_area, Tolerance};
use crate::radial::{certified_slope_bound, AxisModel};
use crate::rational::int;
use crate::report::{rel_diff, Check, CheckReport, Method, Verdict};
use crate::sphere::{mc_sphere_integral, pointwise_residuals, sample_sphere, trace_consistency_residual, SphereLab};
use crate::weyl::WeylForm;

/// Rank of the random Weyl forms used by the commands.
pub const WEYL_RANK: usize = 4;

/// A rectangular table of strings with a header row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A report and its optional table.
#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub report: CheckReport,
    pub table: Option<Table>,
}

fn f(v: f64) -> String {
    format!("{v:e}")
}

/// Runs `body`, turning an error into a FAIL entry named `name`.
fn guarded(report: &mut CheckReport, name: &str, body: impl FnOnce(&mut Vec<Check>) -> Result<()>) {
    let mut checks = Vec::new();
    let res = body(&mut checks);
    report.extend(checks);
    if let Err(e) = res {
        report.push(Check::error(name, e.to_string()));
    }
}

// ---------------------------------------------------------------- certify

/// Exact certification of every dimension in `n_min..=n_max`. Dimensions
/// outside the asserted range are reported as INFO.
pub fn cmd_certify(n_min: i64, n_max: i64) -> Result<CommandOutput> {
    if n_min > n_max {
        return Err(LabError::EmptyRange { min: n_min, max: n_max });
    }
    let certs: Vec<TauCertificate> = (n_min..=n_max).into_par_iter().map(build_certificate).collect::<Result<_>>()?;
    let mut report = CheckReport::new("certify", None);
    report.param("n_min", n_min).param("n_max", n_max);
    let mut table = Table::new(&["n", "asserted", "tau_lo", "tau_hi", "tau", "bisection_steps", "all_checks_hold"]);
    for cert in &certs {
        for c in &cert.checks {
            let mut check = Check::exact(format!("n={}: {}", cert.n, c.name), c);
            if !cert.asserted() {
                check = check.informational();
            }
            report.push(check);
        }
        table.push(vec![
            cert.n.to_string(),
            cert.asserted().to_string(),
            crate::rational::exact_decimal(&cert.interval.lo),
            crate::rational::exact_decimal(&cert.interval.hi),
            f(cert.tau_f64()),
            cert.bisection_steps.to_string(),
            cert.passed().to_string(),
        ]);
    }
    report.data = Some(serde_json::to_value(certs.iter().map(TauCertificate::to_json).collect::<Vec<_>>())?);
    Ok(CommandOutput { report, table: Some(table) })
}

/// Certified `tau` for `n`, if the certificate exists and all checks hold.
pub fn certified_tau(n: usize) -> Option<TauCertificate> {
    build_certificate(n as i64).ok().filter(TauCertificate::passed)
}

// ---------------------------------------------------------------- profile

/// Smallest eigenvalue of a symmetric matrix and an estimate of its
/// numerical error (reconstruction residual plus rounding of the entries).
pub fn min_eigenvalue_with_error(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let recon = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
    let residual = (recon - m).norm();
    let rounding = n as f64 * f64::EPSILON * m.norm();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, residual + rounding)
}

/// Minimiser of `g` on `[a, b]` by golden-section search.
pub fn golden_section(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProfileConfig {
    pub n: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub steps: usize,
    pub seed: u64,
}

impl ProfileConfig {
    pub fn new(n: usize) -> Self {
        ProfileConfig { n, eps_min: 0.5, eps_max: 2.0, steps: 301, seed: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.steps < 3 {
            return Err(LabError::InvalidParameter(format!("need at least 3 steps, got {}", self.steps)));
        }
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max && self.eps_max.is_finite()) {
            return Err(LabError::InvalidParameter(format!(
                "need 0 < eps_min < eps_max, got {} and {}",
                self.eps_min, self.eps_max
            )));
        }
        Ok(())
    }
}

/// Critical-point checks of `F` at `(0, 1)` for one Weyl form.
pub fn critical_point_checks(cert: &TauCertificate, w: &WeylForm, label: &str) -> Result<Vec<Check>> {
    let model = AxisModel::from_certificate(cert, &w.contractions())?;
    let mut out = Vec::new();
    out.push(Check::less(format!("{label}F(0,1) < 0"), model.f_axis(1.0), 0.0, Method::ClosedForm));
    let bound = certified_slope_bound(cert)?;
    out.push(
        Check::at_most(format!("{label}|dF/deps(0,1)| / K interval bound <= 1e-12"), bound, 1e-12, Method::Exact)
            .with_note(format!("double evaluation |dF/deps| / K = {:e}", model.df_deps(1.0).abs() / model.prefactor())),
    );
    out.push(Check::greater(format!("{label}d2F/deps2(0,1) > 0"), model.d2f_deps2(1.0), 0.0, Method::ClosedForm));
    let (min_eig, err) = min_eigenvalue_with_error(&model.hessian_xixi(1.0));
    out.push(
        Check::greater(format!("{label}xi-Hessian min eigenvalue > 1e3 x error estimate"), min_eig, 1e3 * err, Method::ClosedForm)
            .with_note(format!("error estimate {err:e}")),
    );
    Ok(out)
}

/// Zero of `dF/deps` just right of `eps = 1` (the local maximum bounding the
/// basin), scanning `(1, 2]` and bisecting.
fn basin_right_edge(model: &AxisModel) -> Option<f64> {
    let step = 1e-4;
    let mut a = 1.0 + step;
    if model.df_deps(a) <= 0.0 {
        return None;
    }
    while a < 2.0 {
        let b = a + step;
        if model.df_deps(b) <= 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if model.df_deps(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        a = b;
    }
    None
}

/// Sweep of `F(0, eps)` with its derivatives and the smallest eigenvalue
/// of the centre Hessian; locates the interior minimum.
pub fn cmd_profile(cfg: &ProfileConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let n = cfg.n;
    let cert = build_certificate(n as i64)?;
    let w = WeylForm::random_factored(n, WEYL_RANK, cfg.seed)?;
    let model = AxisModel::from_certificate(&cert, &w.contractions())?;
    let mut report = CheckReport::new("profile", Some(cfg.seed));
    report
        .param("n", n)
        .param("eps_min", cfg.eps_min)
        .param("eps_max", cfg.eps_max)
        .param("steps", cfg.steps)
        .param("tau", cert.tau_f64());

    let spacing = (cfg.eps_max - cfg.eps_min) / (cfg.steps - 1) as f64;
    let grid: Vec<f64> = (0..cfg.steps).map(|k| cfg.eps_min + spacing * k as f64).collect();
    let rows: Vec<[f64; 5]> = grid
        .par_iter()
        .map(|&e| {
            let (min_eig, _) = min_eigenvalue_with_error(&model.hessian_xixi(e));
            [e, model.f_axis(e), model.df_deps(e), model.d2f_deps2(e), min_eig]
        })
        .collect();
    let mut table = Table::new(&["eps", "F", "dF_deps", "d2F_deps2", "hessian_min_eig"]);
    for r in &rows {
        table.push(r.iter().map(|v| f(*v)).collect());
    }

    let minima: Vec<usize> = (1..rows.len() - 1)
        .filter(|&k| rows[k][1] < rows[k - 1][1] && rows[k][1] <= rows[k + 1][1])
        .collect();
    let basin = basin_right_edge(&model);
    let mut minimum = Check::within("interior grid-local minima of F(0,eps)", minima.len() as f64, 1.0, 0.0, Method::ClosedForm);
    if minima.is_empty() && basin.is_some_and(|b| b - 1.0 < spacing) {
        minimum = minimum.with_note("grid spacing exceeds the width of the basin at eps = 1");
    }
    let mut checks = vec![minimum];
    if let Some(b) = basin {
        checks.push(Check::info("first critical point right of eps = 1", b, 1.0, Method::ClosedForm));
    }
    if let Some(&k) = minima.first() {
        let eps_star = grid[k];
        checks.push(Check::within("|eps* - 1| <= grid spacing", eps_star, 1.0, spacing * (1.0 + 1e-12), Method::ClosedForm));
        let refined = golden_section(|e| model.f_axis(e), grid[k - 1], grid[k + 1], 1e-10);
        checks.push(Check::info("refined minimiser (golden section)", refined, 1.0, Method::ClosedForm));
    }
    checks.extend(critical_point_checks(&cert, &w, "")?);
    let all_negative = rows.iter().all(|r| r[1] < 0.0);
    let max_f = rows.iter().map(|r| r[1]).fold(f64::NEG_INFINITY, f64::max);
    checks.push(
        Check::info("max F on sweep", max_f, 0.0, Method::ClosedForm)
            .with_note(if all_negative { "F negative on the whole sweep" } else { "F changes sign on the sweep" }),
    );
    if !ASSERTED_RANGE.contains(&(n as i64)) {
        checks = checks.into_iter().map(Check::informational).collect();
    }
    report.extend(checks);
    Ok(CommandOutput { report, table: Some(table) })
}

// ---------------------------------------------------------------- sphere

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SphereConfig {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub tau: f64,
    pub r: f64,
}

impl SphereConfig {
    pub fn new(n: usize, seed: u64, samples: usize) -> Self {
        SphereConfig { n, seed, samples, tau: -10.0, r: 0.7 }
    }
}

/// Identity checks for one seed: exact moments against the closed forms and
/// Monte Carlo estimates of the left sides.
pub fn sphere_identity_checks(cfg: &SphereConfig, w: &WeylForm) -> Result<Vec<Check>> {
    let lab = SphereLab::new(w);
    let pairs = [(0, 0), (0, 1)];
    let suite = lab.full_suite(cfg.tau, cfg.r, &pairs, cfg.samples, cfg.seed)?;
    let mut out = Vec::new();
    for ic in &suite {
        let label = match ic.pq {
            Some((p, q)) => format!("{} (p,q)=({},{})", ic.name, p + 1, q + 1),
            None => ic.name.clone(),
        };
        out.push(Check::close(format!("{label}: exact moments vs closed form"), ic.lhs, ic.rhs, 1e-9, Method::ClosedForm));
        if let (Some(est), Some(se), Some(sig)) = (ic.mc_estimate, ic.mc_stderr, ic.mc_sigmas()) {
            out.push(
                Check::at_most(format!("{label}: Monte Carlo standard errors from closed form"), sig, 5.0, Method::MonteCarlo)
                    .with_note(format!("estimate {est:e} +- {se:e}, seed {}", cfg.seed)),
            );
        }
    }
    Ok(out)
}

pub fn cmd_sphere_check(cfg: &SphereConfig) -> Result<CommandOutput> {
    if cfg.n < 4 {
        return Err(LabError::UnsupportedDimension { n: cfg.n as i64, reason: "sphere identities need n >= 4".into() });
    }
    if cfg.samples < 1000 {
        return Err(LabError::InvalidParameter(format!("need at least 1000 samples, got {}", cfg.samples)));
    }
    let n = cfg.n;
    let mut report = CheckReport::new("sphere-check", Some(cfg.seed));
    report
        .param("n", n)
        .param("samples", cfg.samples)
        .param("tau", cfg.tau)
        .param("r", cfg.r)
        .param("weyl_rank", WEYL_RANK);

    let w = match WeylForm::random_factored(n, WEYL_RANK, cfg.seed) {
        Ok(w) => w,
        Err(e) => {
            report.push(Check::error("Weyl form", e.to_string()));
            return Ok(CommandOutput { report, table: None });
        }
    };
    let res = w.symmetry_residuals();
    report.push(Check::within("Weyl symmetries (integer residuals)", if res.all_zero() { 0.0 } else { 1.0 }, 0.0, 0.0, Method::Exact));

    guarded(&mut report, "sphere identities", |out| {
        out.extend(sphere_identity_checks(cfg, &w)?);
        Ok(())
    });

    let residual = trace_consistency_residual(n as i64);
    let nonzero = residual.coeffs().iter().filter(|c| !c.coeffs().is_empty()).count() as i64;
    report.push(Check::exact(
        "trace consistency of the weighted and unweighted identities (nonzero coefficients)",
        &ExactCheck::new("trace", int(nonzero), Relation::Equal, int(0)),
    ));

    guarded(&mut report, "pointwise identities", |out| {
        let c = w.contractions();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
        let (mut g_max, mut e_max) = (0.0f64, 0.0f64);
        for _ in 0..4 {
            let x = sample_shell(&mut rng, n, 0.1, 2.0);
            let (g, e) = pointwise_residuals(&w, &c, &x);
            g_max = g_max.max(g);
            e_max = e_max.max(e);
        }
        out.push(Check::at_most("sum (d_l H_ik)^2 = x^T Q x (relative residual)", g_max, 1e-12, Method::ClosedForm));
        out.push(Check::at_most("Euler relation sum H x.dH = 2|H|^2 (relative residual)", e_max, 1e-12, Method::ClosedForm));
        Ok(())
    });

    guarded(&mut report, "sphere sampler", |out| {
        let area = sphere_area(n);
        let est = mc_sphere_integral(|u| u[0] * u[0], n, cfg.samples.min(200_000), cfg.seed)?;
        out.push(Check::at_most(
            "int x_1^2 over the sphere (standard errors)",
            (est.estimate - area / n as f64).abs() / est.std_error,
            5.0,
            Method::MonteCarlo,
        ));
        Ok(())
    });
    Ok(CommandOutput { report, table: None })
}

// ---------------------------------------------------------------- bubble

/// Random bubble parameters in the unit admissible set.
fn random_bubble(rng: &mut ChaCha8Rng, n: usize) -> BubbleParams {
    let xi = sample_shell(rng, n, 0.0, 0.95);
    let eps = 0.5 + 1.5 * rng.gen::<f64>();
    BubbleParams { xi, eps }
}

pub fn bubble_checks(n: usize, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<(BubbleParams, Vec<f64>)> = (0..100)
        .map(|_| {
            let p = random_bubble(&mut rng, n);
            let x = sample_shell(&mut rng, n, 0.0, 3.0);
            (p, x)
        })
        .collect();
    let pde = points.iter().map(|(p, x)| {
        let (res, scale) = pde_residual(p, x);
        res.abs() / scale
    });
    out.push(Check::less("PDE residual at 100 random points (relative)", pde.fold(0.0, f64::max), 1e-9, Method::ClosedForm));
    let tf = points.iter().map(|(p, x)| tracefree_pointwise_identity(p, x).norm() / tracefree_scale(p, x));
    out.push(Check::less("trace-free identity at 100 random points (relative)", tf.fold(0.0, f64::max), 1e-10, Method::ClosedForm));

    let mass = bubble_mass(n)?;
    let params = [(0.0, 1.0), (0.5, 0.7), (0.9, 1.8), (3.0, 0.25)];
    let quads: Vec<f64> = params.iter().map(|&(xi, eps)| bubble_mass_quadrature(n, xi, eps)).collect();
    for (&(xi, eps), q) in params.iter().zip(&quads) {
        out.push(Check::close(format!("mass at |xi|={xi}, eps={eps}: quadrature vs closed form"), *q, mass, 1e-8, Method::Quadrature));
    }
    let spread = quads.iter().map(|q| rel_diff(*q, quads[0])).fold(0.0, f64::max);
    out.push(Check::at_most("mass parameter independence (relative spread)", spread, 1e-8, Method::Quadrature));
    out.push(Check::info("sphere Yamabe constant", sphere_yamabe_constant(n)?, 0.0, Method::ClosedForm));

    let g1 = phi_gram(n, 1.0);
    let off = (0..=n)
        .flat_map(|a| (0..=n).map(move |b| (a, b)))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| g1[(a, b)].abs())
        .fold(0.0, f64::max);
    let diag_min = (0..=n).map(|a| g1[(a, a)]).fold(f64::INFINITY, f64::min);
    out.push(Check::within("Gram matrix off-diagonal entries", off, 0.0, 1e-12 * diag_min, Method::ClosedForm));
    out.push(Check::greater("Gram matrix smallest diagonal entry", diag_min, 0.0, Method::ClosedForm));
    let k_spread = (2..=n).map(|k| rel_diff(g1[(k, k)], g1[(1, 1)])).fold(0.0, f64::max);
    out.push(Check::at_most("Gram matrix isotropy in the translation directions", k_spread, 1e-12, Method::ClosedForm));
    for eps in [0.5, 2.0] {
        let g = phi_gram(n, eps);
        let scaled = (0..=n).map(|a| rel_diff(eps * eps * g[(a, a)], g1[(a, a)])).fold(0.0, f64::max);
        out.push(Check::at_most(format!("Gram matrix scaling eps^2 G(eps) = G(1) at eps={eps}"), scaled, 1e-10, Method::Quadrature));
    }
    let centre = BubbleParams::centered(n, 1.0)?;
    let q11 = integrate_axisymmetric(
        n,
        |r, t| {
            let mut x = vec![0.0; n];
            x[0] = r * t;
            x[1] = r * (1.0 - t * t).max(0.0).sqrt();
            eval_phi(&centre, 1, &x).map(|v| v * v).unwrap_or(f64::NAN)
        },
        1.0,
        n as f64 + 3.0,
        Tolerance { abs: 0.0, rel: 1e-11 },
    );
    out.push(Check::close("|phi_1|^2: moments vs direct quadrature", g1[(1, 1)], q11, 1e-8, Method::Quadrature));
    let overlap = phi01_overlap(n, 1.0, 1e-12 * (g1[(0, 0)] * g1[(1, 1)]).sqrt());
    out.push(Check::within(
        "int phi_0 phi_1 by quadrature",
        overlap,
        0.0,
        1e-10 * (g1[(0, 0)] * g1[(1, 1)]).sqrt(),
        Method::Quadrature,
    ));
    Ok(out)
}

pub fn cmd_bubble_check(n: usize, seed: u64) -> Result<CommandOutput> {
    if n < 3 {
        return Err(LabError::UnsupportedDimension { n: n as i64, reason: "bubble needs n >= 3".into() });
    }
    let mut report = CheckReport::new("bubble-check", Some(seed));
    report.param("n", n);
    guarded(&mut report, "bubble suite", |out| {
        out.extend(bubble_checks(n, seed)?);
        Ok(())
    });
    Ok(CommandOutput { report, table: None })
}

// ---------------------------------------------------------------- metric

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricConfig {
    pub n: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub seed: u64,
    /// Points per amplitude in the curvature-expansion study.
    pub points: usize,
    /// Monte Carlo directions for the error-term norm.
    pub samples: usize,
    pub fd_step_factor: f64,
}

impl MetricConfig {
    pub fn new(n: usize) -> Self {
        MetricConfig {
            n,
            lambda: 0.02,
            mu: 0.5,
            rho: 0.5,
            seed: 7,
            points: 100,
            samples: 100_000,
            fd_step_factor: FD_STEP_FACTOR,
        }
    }

    fn validate(&self) -> Result<PerturbParams> {
        if self.n < 4 {
            return Err(LabError::UnsupportedDimension { n: self.n as i64, reason: "metric checks need n >= 4".into() });
        }
        if self.points < 2 {
            return Err(LabError::InvalidParameter("need at least 2 sample points".into()));
        }
        if !(self.fd_step_factor > 0.0 && self.fd_step_factor < 0.1) {
            return Err(LabError::InvalidParameter(format!("fd step factor {} out of (0, 0.1)", self.fd_step_factor)));
        }
        if 2.0 * self.lambda > self.rho {
            return Err(LabError::InvalidParameter("the checks need rho >= 2 lambda".into()));
        }
        PerturbParams::new(self.lambda, self.mu, self.rho)
    }

    /// Amplitudes of the expansion study.
    pub fn amplitudes(&self) -> [f64; 3] {
        [self.mu / 5.0, self.mu / 10.0, self.mu / 20.0]
    }
}

/// `tau` from the certificate when one holds, else `-7` (recorded in the report).
pub fn tau_for(n: usize) -> (f64, bool) {
    match certified_tau(n) {
        Some(c) => (c.tau_f64(), true),
        None => (-7.0, false),
    }
}

/// Verdicts of a curvature-expansion study.
pub fn expansion_checks(study: &ExpansionStudy) -> Vec<Check> {
    let mut out = Vec::new();
    let mus = &study.mus;
    out.push(
        Check::within("remainder mu-exponent", study.mu_slope, 3.0, 0.2, Method::Fit)
            .with_note(format!("mu in {mus:?}, rms remainders {:?}", study.remainder_rms)),
    );
    out.push(Check::at_most(
        "expansion = -1/4 sum (d_l h_ik)^2 in the divergence-free region (relative)",
        study.max_reduction_error,
        1e-9,
        Method::ClosedForm,
    ));
    let max_div = study.points.iter().flatten().map(|p| p.max_divergence / p.dh_norm).fold(0.0, f64::max);
    out.push(Check::at_most("analytic divergence of h (relative to |dh|)", max_div, 1e-12, Method::ClosedForm));
    let (ok, total) = study.points_within_bound();
    out.push(
        Check::within("points with |R_numeric - R_expansion| <= 2 C bound", ok as f64, total as f64, 0.0, Method::FiniteDifference)
            .with_note(format!("C fitted at mu={} is {:e}", mus[0], study.fitted_c[0])),
    );
    let c0 = study.fitted_c[0];
    let c_ratio = study.fitted_c.iter().map(|c| (c / c0).max(c0 / c)).fold(1.0, f64::max);
    out.push(
        Check::at_most("fitted C agreement across amplitudes (max ratio)", c_ratio, 2.0, Method::Fit)
            .with_note(format!("fitted C per amplitude {:?}", study.fitted_c)),
    );
    let mut fd_ratios: Vec<f64> = study
        .points
        .last()
        .map(|pts| pts.iter().map(|p| p.r_numeric_error / p.remainder.abs().max(f64::MIN_POSITIVE)).collect())
        .unwrap_or_default();
    fd_ratios.sort_by(f64::total_cmp);
    let fd_median = fd_ratios.get(fd_ratios.len() / 2).copied().unwrap_or(0.0);
    out.push(Check::info(
        "finite-difference error / remainder at the smallest amplitude (median)",
        fd_median,
        0.0,
        Method::FiniteDifference,
    ));
    let decay: Vec<f64> = study
        .points
        .iter()
        .zip(mus)
        .map(|(pts, mu)| {
            pts.iter()
                .map(|p| p.r_numeric.abs() / (mu * mu * (study.lambda + p.x_norm).powi(14)))
                .fold(0.0, f64::max)
        })
        .collect();
    let spread = decay.iter().cloned().fold(0.0, f64::max) / decay.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(
        Check::info("|R_g| / (mu^2 (lambda+|x|)^14): max over points, spread across amplitudes", spread, 1.0, Method::FiniteDifference)
            .with_note(format!("per amplitude {decay:?} (W rescaled by {:e})", study.kappa)),
    );
    out
}

/// Exponent fits of the error-term norm over `lambdas` (at `mu`) and `mus`
/// (at `lambda`).
pub struct ErrorScaling {
    pub lambda_norms: Vec<ErrorNorm>,
    pub mu_norms: Vec<ErrorNorm>,
    pub lambda_slope: f64,
    pub mu_slope: f64,
}

pub fn error_scaling(
    w: &WeylForm,
    tau: f64,
    base: PerturbParams,
    lambdas: &[f64],
    mus: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ErrorScaling> {
    let n = w.n();
    let mut configs = Vec::new();
    for &l in lambdas {
        configs.push(ErrorTermConfig::standard(n, PerturbParams::new(l, base.mu, base.rho)?)?);
    }
    for &m in mus {
        configs.push(ErrorTermConfig::standard(n, PerturbParams::new(base.lambda, m, base.rho)?)?);
    }
    let mut norms = error_term_norms(w, tau, &configs, samples, seed)?;
    let mu_norms = norms.split_off(lambdas.len());
    let lambda_norms = norms;
    let val = |v: &[ErrorNorm]| v.iter().map(|e| e.value).collect::<Vec<_>>();
    Ok(ErrorScaling {
        lambda_slope: loglog_slope(lambdas, &val(&lambda_norms)),
        mu_slope: loglog_slope(mus, &val(&mu_norms)),
        lambda_norms,
        mu_norms,
    })
}

fn error_scaling_checks(s: &ErrorScaling, samples: usize) -> Vec<Check> {
    let rel_se = s
        .lambda_norms
        .iter()
        .chain(&s.mu_norms)
        .map(|e| e.std_error / e.value)
        .fold(0.0, f64::max);
    let fmt = |v: &[ErrorNorm], pick: fn(&ErrorNorm) -> f64| {
        v.iter().map(|e| format!("{:e}: {:e}", pick(e), e.value)).collect::<Vec<_>>().join(", ")
    };
    vec![
        Check::within("error-term norm lambda-exponent", s.lambda_slope, 8.0, 0.3, Method::Fit)
            .with_note(format!("{samples} directions; {}", fmt(&s.lambda_norms, |e| e.lambda))),
        Check::within("error-term norm mu-exponent", s.mu_slope, 1.0, 0.1, Method::Fit)
            .with_note(format!("{samples} directions; {}", fmt(&s.mu_norms, |e| e.mu))),
        Check::info("largest relative Monte Carlo error of a norm", rel_se, 0.0, Method::MonteCarlo),
    ]
}

/// Pointwise properties of `h` and `exp(h)` on sampled points.
fn pointwise_metric_checks(w: &WeylForm, tau: f64, params: PerturbParams, seed: u64) -> Result<Vec<Check>> {
    let n = w.n();
    let kappa = unit_sup_scaling(w, tau, params.lambda, seed);
    let wk = w.scaled(kappa);
    let bump = Bump::centered(&wk, SingleBumpProfile::new(tau, params));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3e7);
    let (mut trace, mut null, mut det, mut inv) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..32 {
        let x = sample_shell(&mut rng, n, 0.0, 2.0 * params.lambda);
        let h = bump.h(&x);
        let scale = h.norm().max(f64::MIN_POSITIVE);
        let xv = nalgebra::DVector::from_column_slice(&x);
        trace = trace.max(h.trace().abs() / scale);
        null = null.max((&h * &xv).norm() / (scale * xv.norm()));
        let (g, g_inv) = matrix_exp(&h)?;
        det = det.max((g.determinant() - 1.0).abs());
        inv = inv.max((&g * &g_inv - DMatrix::identity(n, n)).norm());
    }
    let mut series = 0.0f64;
    for _ in 0..32 {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        let sym = (&a + a.transpose()) * 0.5;
        let target = 0.5 * rng.gen::<f64>();
        let h = &sym * (target / sym.norm());
        let dev = exp_deviation(&h);
        let rem = (&dev - &h - &h * &h * 0.5).norm();
        series = series.max(rem / h.norm().powi(3));
    }
    Ok(vec![
        Check::at_most("tr h = 0 (relative)", trace, 1e-12, Method::ClosedForm),
        Check::at_most("h x = 0 (relative)", null, 1e-12, Method::ClosedForm),
        Check::at_most("|det exp(h) - 1|", det, 1e-13, Method::ClosedForm),
        Check::at_most("|exp(h) exp(-h) - I|", inv, 1e-13, Method::ClosedForm),
        Check::at_most("|exp(h) - I - h - h^2/2| / |h|^3 for |h| <= 1/2", series, 1.0, Method::ClosedForm),
    ])
}

/// Ratio of sampled sup-norms of `h` over `|x| <= lambda` at `lambda` and `lambda / 2`.
pub fn sup_norm_ratio(w: &WeylForm, tau: f64, params: PerturbParams, samples: usize, seed: u64) -> Result<f64> {
    let half = PerturbParams::new(0.5 * params.lambda, params.mu, params.rho)?;
    Ok(single_bump_sup(w, tau, params, samples, seed) / single_bump_sup(w, tau, half, samples, seed))
}

/// Second-order error-term formula against the exact matrix exponential.
fn bruteforce_checks(w: &WeylForm, tau: f64, params: PerturbParams, seed: u64) -> Result<Vec<Check>> {
    let n = w.n();
    let mu = 0.025f64.min(params.mu);
    let p = PerturbParams::new(params.lambda, mu, params.rho)?;
    let wk = w.scaled(unit_sup_scaling(w, tau, params.lambda, seed));
    let cfg = ErrorTermConfig::standard(n, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb7);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let x = sample_shell(&mut rng, n, 0.3 * p.lambda, 1.5 * p.lambda);
        let formula = crate::metric::error_term_pointwise(&wk, tau, p, &cfg.bubble, &x);
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let exact = error_term_bruteforce(&wk, tau, p, &cfg.bubble, &x, 1e-3 * (p.lambda + xn))?;
        worst = worst.max(rel_diff(formula, exact));
    }
    Ok(vec![Check::at_most(
        "second-order error term vs exact exp(h) evaluation (relative, 3 points)",
        worst,
        1e-2,
        Method::FiniteDifference,
    )
    .with_note(format!("|h| up to {:e}", mu / 2.0))])
}

/// Energy term of the metric against the closed-form auxiliary function.
fn connection_checks(w: &WeylForm, tau: f64) -> Result<Vec<Check>> {
    let model = AxisModel::new(w.n(), tau, &w.contractions())?;
    let mut out = Vec::new();
    for eps in [0.8, 1.0, 1.3] {
        out.push(Check::close(
            format!("metric energy term vs F(0,eps) at eps={eps}"),
            axis_energy_from_metric(w, tau, eps)?,
            model.f_axis(eps),
            1e-6,
            Method::Quadrature,
        ));
    }
    Ok(out)
}

pub fn cmd_metric_check(cfg: &MetricConfig) -> Result<CommandOutput> {
    let params = cfg.validate()?;
    let n = cfg.n;
    let (tau, certified) = tau_for(n);
    let mut report = CheckReport::new("metric-check", Some(cfg.seed));
    report
        .param("n", n)
        .param("lambda", cfg.lambda)
        .param("mu", cfg.mu)
        .param("rho", cfg.rho)
        .param("points", cfg.points)
        .param("samples", cfg.samples)
        .param("fd_step_factor", cfg.fd_step_factor)
        .param("tau", tau)
        .param("tau_certified", certified)
        .param("weyl_rank", WEYL_RANK);
    let w = match WeylForm::random_factored(n, WEYL_RANK, cfg.seed) {
        Ok(w) => w,
        Err(e) => {
            report.push(Check::error("Weyl form", e.to_string()));
            return Ok(CommandOutput { report, table: None });
        }
    };

    let mut table = Table::new(&["mu", "point", "x_norm", "R_numeric", "R_numeric_error", "R_expansion", "remainder", "bound"]);
    guarded(&mut report, "curvature expansion", |out| {
        let study = expansion_study(&w, tau, cfg.lambda, cfg.rho, &cfg.amplitudes(), cfg.points, cfg.seed, cfg.fd_step_factor)?;
        for (pts, mu) in study.points.iter().zip(&study.mus) {
            for (k, p) in pts.iter().enumerate() {
                table.push(vec![
                    f(*mu),
                    k.to_string(),
                    f(p.x_norm),
                    f(p.r_numeric),
                    f(p.r_numeric_error),
                    f(p.r_expansion),
                    f(p.remainder),
                    f(p.bound),
                ]);
            }
        }
        out.extend(expansion_checks(&study));
        Ok(())
    });
    guarded(&mut report, "pointwise metric properties", |out| {
        out.extend(pointwise_metric_checks(&w, tau, params, cfg.seed)?);
        Ok(())
    });
    guarded(&mut report, "sup-norm scaling", |out| {
        let ratio = sup_norm_ratio(&w, tau, params, 2000, cfg.seed)?;
        out.push(Check::close("sup |h| over |x| <= lambda at lambda vs lambda/2", ratio, 256.0, 1e-9, Method::ClosedForm));
        Ok(())
    });
    guarded(&mut report, "error-term scaling", |out| {
        let l = cfg.lambda;
        let s = error_scaling(&w, tau, params, &[2.0 * l, l, 0.5 * l], &[cfg.mu, cfg.mu / 2.0, cfg.mu / 4.0], cfg.samples, cfg.seed)?;
        out.extend(error_scaling_checks(&s, cfg.samples));
        Ok(())
    });
    guarded(&mut report, "error-term formula", |out| {
        out.extend(bruteforce_checks(&w, tau, params, cfg.seed)?);
        Ok(())
    });
    if n >= 20 {
        guarded(&mut report, "connection to F", |out| {
            out.extend(connection_checks(&w, tau)?);
            Ok(())
        });
    } else {
        report.push(Check::info("connection to F skipped (radial integral diverges for n < 20)", n as f64, 20.0, Method::Exact));
    }
    Ok(CommandOutput { report, table: Some(table) })
}

// ---------------------------------------------------------------- scaling

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScalingConfig {
    pub n: usize,
    /// Points per axis of the scaling grids.
    pub grid: usize,
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub seed: u64,
    pub samples: usize,
    pub n0: u32,
    pub n_max: u32,
}

impl ScalingConfig {
    pub fn new(n: usize) -> Self {
        ScalingConfig { n, grid: 3, lambda: 0.02, mu: 0.5, rho: 0.5, seed: 7, samples: 100_000, n0: 20, n_max: 60 }
    }

    /// `lambda 2^(1-k)` and `mu 2^(-k)` for `k < grid`.
    pub fn grids(&self) -> (Vec<f64>, Vec<f64>) {
        let l = (0..self.grid).map(|k| self.lambda * 2f64.powi(1 - k as i32)).collect();
        let m = (0..self.grid).map(|k| self.mu * 2f64.powi(-(k as i32))).collect();
        (l, m)
    }
}

/// Per-bump sup-norms of the glued field and its support certificates.
pub fn glued_checks(w: &WeylForm, tau: f64, n0: u32, n_max: u32, seed: u64) -> Result<(Vec<Check>, Table)> {
    let n = w.n();
    let spec = GluedBumpSpec::new(n0, n_max)?;
    let mut out: Vec<Check> = spec
        .disjointness_certificate()
        .iter()
        .map(|c| Check::exact(format!("support disjointness {}", c.name), c))
        .collect();
    let reach = spec.vanishing_certificate();
    out.push(Check::exact("h vanishes for |x| >= 1/2: max (1/N + r_N) < 1/2", &reach));

    let start = smoothstep5(0.0);
    let end = smoothstep5(1.0);
    let ends = [start[1], start[2], end[1], end[2]].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.push(Check::within("cutoff derivatives vanish at both band ends", ends, 0.0, 0.0, Method::ClosedForm));

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x61);
    let mut outside = 0.0f64;
    let mut u = vec![0.0; n];
    for _ in 0..200 {
        sample_sphere(&mut rng, &mut u);
        let r = 0.5 + rng.gen::<f64>();
        let x: Vec<f64> = u.iter().map(|v| v * r).collect();
        outside = outside.max(glued_h(&spec, w, tau, &x).norm());
    }
    out.push(Check::within("max |h| at sampled |x| >= 1/2", outside, 0.0, 0.0, Method::ClosedForm));
    let mut overlaps = 0usize;
    let mut at_centre = 0.0f64;
    for nn in n0..=n_max {
        let y = spec.center(nn, n);
        at_centre = at_centre.max(glued_h(&spec, w, tau, &y).norm());
        let rad = crate::rational::to_f64(&spec.support_radius(nn));
        for _ in 0..20 {
            let z = sample_shell(&mut rng, n, 0.0, 1.2 * rad);
            let x: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
            if spec.active(&x).len() > 1 {
                overlaps += 1;
            }
        }
    }
    out.push(Check::within("h at the centres y_N", at_centre, 0.0, 0.0, Method::ClosedForm));
    out.push(Check::within("sampled points lying in two supports", overlaps as f64, 0.0, 0.0, Method::ClosedForm));

    let sups = glued_bump_sups(&spec, w, tau, 400, 8, seed);
    let mut table = Table::new(&["index", "core_sup", "support_c2_sup"]);
    for s in &sups {
        table.push(vec![s.index.to_string(), f(s.core), f(s.support_c2)]);
    }
    let ratios: Vec<f64> = sups.windows(2).map(|p| p[0].core / p[1].core).collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(
        Check::at_most("per-bump sup-norm decay per index step (min ratio) >= 2^4", 16.0, min_ratio, Method::ClosedForm)
            .with_note("sup over |x - y_N| <= 2^(-N/2)"),
    );
    let c2_ratio = sups.windows(2).map(|p| p[0].support_c2 / p[1].support_c2).fold(f64::INFINITY, f64::min);
    out.push(Check::info("C^2 sup over the whole support: min ratio per index step", c2_ratio, 16.0, Method::ClosedForm));
    let global = sups.iter().map(|s| s.support_c2).fold(0.0, f64::max);
    out.push(Check::info(format!("global sup (|h| + |dh| + |d^2 h|) for N0={n0}"), global, 0.0, Method::ClosedForm));
    Ok((out, table))
}

pub fn cmd_scaling(cfg: &ScalingConfig) -> Result<CommandOutput> {
    if cfg.grid < 2 {
        return Err(LabError::InvalidParameter(format!("need at least 2 grid points, got {}", cfg.grid)));
    }
    let base = PerturbParams::new(cfg.lambda, cfg.mu, cfg.rho)?;
    let (lambdas, mus) = cfg.grids();
    for &l in &lambdas {
        PerturbParams::new(l, cfg.mu, cfg.rho)?;
    }
    let n = cfg.n;
    if n < 4 {
        return Err(LabError::UnsupportedDimension { n: n as i64, reason: "scaling checks need n >= 4".into() });
    }
    let (tau, certified) = tau_for(n);
    let mut report = CheckReport::new("scaling", Some(cfg.seed));
    report
        .param("n", n)
        .param("grid", cfg.grid)
        .param("lambda", cfg.lambda)
        .param("mu", cfg.mu)
        .param("rho", cfg.rho)
        .param("samples", cfg.samples)
        .param("n0", cfg.n0)
        .param("n_max", cfg.n_max)
        .param("tau", tau)
        .param("tau_certified", certified);
    let w = match WeylForm::random_factored(n, WEYL_RANK, cfg.seed) {
        Ok(w) => w,
        Err(e) => {
            report.push(Check::error("Weyl form", e.to_string()));
            return Ok(CommandOutput { report, table: None });
        }
    };
    let mut table = Table::new(&["kind", "lambda", "mu", "value", "std_error"]);
    guarded(&mut report, "error-term scaling", |out| {
        let s = error_scaling(&w, tau, base, &lambdas, &mus, cfg.samples, cfg.seed)?;
        for e in &s.lambda_norms {
            table.push(vec!["error_norm_lambda".into(), f(e.lambda), f(e.mu), f(e.value), f(e.std_error)]);
        }
        for e in &s.mu_norms {
            table.push(vec!["error_norm_mu".into(), f(e.lambda), f(e.mu), f(e.value), f(e.std_error)]);
        }
        out.extend(error_scaling_checks(&s, cfg.samples));
        Ok(())
    });
    guarded(&mut report, "sup-norm scaling", |out| {
        let sups: Vec<f64> = lambdas
            .iter()
            .map(|&l| Ok(single_bump_sup(&w, tau, PerturbParams::new(l, cfg.mu, cfg.rho)?, 2000, cfg.seed)))
            .collect::<Result<_>>()?;
        for (l, s) in lambdas.iter().zip(&sups) {
            table.push(vec!["sup_h".into(), f(*l), f(cfg.mu), f(*s), "0".into()]);
        }
        out.push(Check::within("sup |h| lambda-exponent", loglog_slope(&lambdas, &sups), 8.0, 1e-9, Method::Fit));
        Ok(())
    });
    guarded(&mut report, "glued construction", |out| {
        let (checks, glued) = glued_checks(&w, tau, cfg.n0, cfg.n_max, cfg.seed)?;
        out.extend(checks);
        for r in glued.rows {
            table.push(vec![format!("glued_core_N{}", r[0]), "-".into(), "-".into(), r[1].clone(), "0".into()]);
        }
        Ok(())
    });
    Ok(CommandOutput { report, table: Some(table) })
}

/// Exit status for a finished command: 0 if nothing failed, 1 otherwise.
pub fn exit_code(report: &CheckReport) -> i32 {
    if report.aggregate() == Verdict::Fail {
        1
    } else {
        0
    }
}
