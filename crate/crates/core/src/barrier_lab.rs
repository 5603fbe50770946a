//! Sign audits for the barrier families `r f -/+ eps r^beta g(phi)` with
//! `g = M - cos(phi)`, and the Hessian and subharmonicity inequalities for
//! homogeneous functions on the sphere.
//!
//! All audits are decisions over sampled grids. Angular grids are nested
//! (`phi_k = a + (b - a) k / n`) so doubling `n` only adds samples.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::cone_geometry::ConeParam;
use crate::elliptic_grid::{dirichlet_solve, AxisymField, AxisymGrid, Domain};
use crate::ode_engine::{symmetric_solution, SymmetricSolution};
use crate::{Error, Result};

pub const DEFAULT_BETA: f64 = -0.5;
/// Angular samples used by the certification audits.
pub const AUDIT_POINTS: usize = 10_000;
/// Dyadic offsets tried by the parameter search.
pub const M_CANDIDATES: [f64; 9] = [4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierConfig {
    pub c: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub epsilon: f64,
    pub phi2: f64,
}

impl BarrierConfig {
    /// Validated constructor: `M > 2`, `epsilon > 0`, `phi0(c) < phi2 < pi`.
    pub fn new(c: f64, beta: f64, m: f64, epsilon: f64, phi2: f64) -> Result<Self> {
        let cfg = Self::unchecked(c, beta, m, epsilon, phi2)?;
        if !(m > 2.0) {
            return Err(Error::InvalidParameter(format!("barrier offset M = {m} must exceed 2")));
        }
        let phi0 = symmetric_solution(c)?.phi0;
        if !(phi2 > phi0 && phi2 < PI) {
            return Err(Error::InvalidParameter(format!("pasting angle {phi2} not in (phi0 = {phi0}, pi)")));
        }
        Ok(cfg)
    }

    /// Only checks finiteness and `M > 1`, so audits can report failures for
    /// offsets outside the admissible range.
    pub fn unchecked(c: f64, beta: f64, m: f64, epsilon: f64, phi2: f64) -> Result<Self> {
        crate::error::check_c(c)?;
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!("M = {m} must be finite and > 1")));
        }
        if !(epsilon > 0.0) || !beta.is_finite() || !phi2.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be positive, beta and phi2 finite".into()));
        }
        Ok(Self { c, beta, m, epsilon, phi2 })
    }

    fn k(&self) -> f64 {
        1.0 / (1.0 + self.c * self.c)
    }

    fn g(&self, phi: f64) -> (f64, f64, f64) {
        (self.m - phi.cos(), phi.sin(), phi.cos())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignAudit {
    pub ok: bool,
    pub worst_phi: f64,
    pub worst_value: f64,
}

/// `r^(2-beta) Delta_c (r^beta g) = beta(beta+1)/(1+c^2) g + 2 cos(phi)`.
pub fn laplacian_bracket(cfg: &BarrierConfig, phi: f64) -> f64 {
    cfg.beta * (cfg.beta + 1.0) * cfg.k() * (cfg.m - phi.cos()) + 2.0 * phi.cos()
}

/// Sign of the bracket on `phi_k = pi k / n`, `k = 0..=n`.
pub fn laplacian_sign_audit(cfg: &BarrierConfig, n: usize) -> SignAudit {
    let (worst_phi, worst_value) = (0..=n)
        .map(|k| PI * k as f64 / n as f64)
        .map(|phi| (phi, laplacian_bracket(cfg, phi)))
        .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    SignAudit { ok: worst_value <= 0.0, worst_phi, worst_value }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecompositionRow {
    pub phi: f64,
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
    /// `|grad_c v|^2` on the zero set through this angle.
    pub e: f64,
}

impl DecompositionRow {
    pub fn sum(&self) -> f64 {
        self.i + self.ii + self.iii
    }
}

/// Terms of `dE/dphi = 2 (I + II + III)` from `f, f', g, g'` and the
/// `f`-equation `f'' = -cot f' - 2k f`.
pub fn decomposition_terms(cfg: &BarrierConfig, phi: f64, f: f64, fp: f64) -> DecompositionRow {
    let k = cfg.k();
    let (g, gp, _) = cfg.g(phi);
    let lg = gp / g;
    let l = (cfg.m * phi.cos() - 1.0) / (g * g);
    let d = fp - f * lg;
    let one_m_beta = (1.0 - cfg.beta).powi(2);
    DecompositionRow {
        phi,
        i: (one_m_beta * k - 2.0 * k - l) * f * fp,
        ii: f * f * lg * (2.0 * k + l),
        iii: d * (phi.cos() / phi.sin() + lg) * (-fp),
        e: one_m_beta * k * f * f + d * d,
    }
}

/// Rows at the given angles, using the normalized symmetric profile.
pub fn derivative_decomposition(cfg: &BarrierConfig, phis: &[f64]) -> Result<Vec<DecompositionRow>> {
    let sol = symmetric_solution(cfg.c)?;
    phis.iter()
        .map(|&phi| {
            let (f, fp) = sol.profile.eval(phi)?;
            Ok(decomposition_terms(cfg, phi, f, fp))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionAudit {
    /// Largest `I + II + III`; negative certifies strict decrease.
    pub min_margin: f64,
    pub worst_phi: f64,
    pub ok: bool,
    #[serde(skip)]
    pub rows: Vec<DecompositionRow>,
}

fn decomposition_audit_with(
    cfg: &BarrierConfig,
    sol: &SymmetricSolution,
    a: f64,
    b: f64,
    n: usize,
) -> Result<DecompositionAudit> {
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let phi = a + (b - a) * k as f64 / n as f64;
        let (f, fp) = sol.profile.eval(phi)?;
        rows.push(decomposition_terms(cfg, phi, f, fp));
    }
    let worst = rows.iter().max_by(|x, y| x.sum().total_cmp(&y.sum())).expect("n >= 1");
    Ok(DecompositionAudit { min_margin: worst.sum(), worst_phi: worst.phi, ok: worst.sum() < 0.0, rows })
}

/// `I + II + III` on `(0, phi0]`.
pub fn decomposition_audit(cfg: &BarrierConfig, n: usize) -> Result<DecompositionAudit> {
    let sol = symmetric_solution(cfg.c)?;
    decomposition_audit_with(cfg, &sol, 0.0, sol.phi0, n.max(1))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ZeroSetSample {
    pub r: f64,
    pub phi: f64,
    pub value: f64,
}

/// `|grad_c v|^2` along `{r f = eps r^beta g}` for `r = k / n`, `k = 1..=n`.
pub fn gradient_on_zero_set(cfg: &BarrierConfig, n: usize) -> Result<Vec<ZeroSetSample>> {
    let sol = symmetric_solution(cfg.c)?;
    let mut out = vec![];
    for k in 1..=n {
        let r = k as f64 / n as f64;
        let amp = cfg.epsilon * r.powf(cfg.beta - 1.0);
        let h = |phi: f64| -> Result<f64> { Ok(sol.profile.eval(phi)?.0 - amp * cfg.g(phi).0) };
        if h(0.0)? <= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (0.0, sol.phi0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if h(mid)? > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let phi = 0.5 * (lo + hi);
        let (f, fp) = sol.profile.eval(phi)?;
        out.push(ZeroSetSample { r, phi, value: decomposition_terms(cfg, phi, f, fp).e });
    }
    if out.is_empty() {
        return Err(Error::EmptyZeroSet);
    }
    Ok(out)
}

/// Largest sampled `phi2` in `(phi0 + 0.05, phi0 + 0.3)` with `III < 0` on all
/// samples of `(phi0, phi2]`.
pub fn phi2_window(cfg: &BarrierConfig, n: usize) -> Result<Option<f64>> {
    let sol = symmetric_solution(cfg.c)?;
    phi2_window_with(cfg, &sol, n)
}

fn phi2_window_with(cfg: &BarrierConfig, sol: &SymmetricSolution, n: usize) -> Result<Option<f64>> {
    let (a, width) = (sol.phi0, 0.3);
    let mut best = None;
    for k in 1..n {
        let phi = a + width * k as f64 / n as f64;
        if phi >= PI {
            break;
        }
        let (f, fp) = sol.profile.eval(phi)?;
        if decomposition_terms(cfg, phi, f, fp).iii >= 0.0 {
            break;
        }
        best = Some(phi);
    }
    Ok(best.filter(|&p| p > a + 0.05))
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftReport {
    pub epsilon: f64,
    /// `1 - max |grad_c v~|^2` on the flat part.
    pub gradient_margin: f64,
    pub worst_gradient_r: f64,
    /// `min (d v~/dr - d v_c/dr)` on the spherical part.
    pub flux_margin: f64,
    pub worst_flux_phi: f64,
    pub gradient_ok: bool,
    pub flux_ok: bool,
    /// `1 + cos(phi2)/(M - cos(phi2))` when `c = 0`.
    pub closed_form_gradient: Option<f64>,
    pub iterations: usize,
}

impl LiftReport {
    pub fn ok(&self) -> bool {
        self.gradient_ok && self.flux_ok
    }
}

/// Harmonic lift of `v_c = r f + eps r^beta g` from the unit sphere into
/// `{x3 > cos(phi2)}`, with `eps` fixed so that `v_c(1, phi2) = 0`
/// (the configured epsilon is not used here).
pub fn supersolution_lift_check(cfg: &BarrierConfig, grid: AxisymGrid) -> Result<LiftReport> {
    let sol = symmetric_solution(cfg.c)?;
    lift_check_with(cfg, &sol, grid)
}

fn lift_check_with(cfg: &BarrierConfig, sol: &SymmetricSolution, grid: AxisymGrid) -> Result<LiftReport> {
    let (f2, _) = sol.profile.eval(cfg.phi2)?;
    let eps = -f2 / cfg.g(cfg.phi2).0;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("profile is not negative at phi2 = {}", cfg.phi2)));
    }
    let data = |phi: f64| -> f64 {
        if phi >= cfg.phi2 {
            return 0.0;
        }
        sol.profile.eval(phi).map(|(f, _)| (f + eps * cfg.g(phi).0).max(0.0)).unwrap_or(0.0)
    };
    let field = AxisymField::from_fn(grid, cfg.c, |r, phi| if r >= 1.0 { data(phi) } else { 0.0 })?;
    let cos_cut = cfg.phi2.cos();
    let solved = dirichlet_solve(&field, &Domain::HalfSpaceCut { cos_cut })?;
    let u = &solved.field;
    let g = grid;
    let k = cfg.k();
    let inside = |i: usize, j: usize| solved.inside[g.idx(i, j)];

    // gradient on the flat part. Where the circle r = r_i crosses the plane
    // transversally (cut angle <= 3pi/4) fit a quadratic in phi through the cut
    // point and the two last inside nodes; nearer the axis fit along the ray
    // phi = phi_j instead. On the plane grad v~ is normal, so v~_phi / r = -v~_r tan
    // and |grad_c v~|^2 = v~_r^2 (k + tan^2).
    let quad_slope = |a: f64, b: f64, cc: f64, vb: f64, vc: f64| {
        vb * (a - cc) / ((b - a) * (b - cc)) + vc * (a - b) / ((cc - a) * (cc - b))
    };
    let split = 0.75 * PI;
    let mut worst_grad = (f64::NEG_INFINITY, 0.0);
    for i in 0..g.nr - 1 {
        let r = g.r(i);
        if r <= -cos_cut {
            continue;
        }
        let a = (cos_cut / r).acos();
        if a > split {
            continue;
        }
        let Some(mut jj) = (0..g.nphi).rev().find(|&j| inside(i, j)) else { continue };
        if a - g.phi(jj) < STEP_BACK * g.dphi() {
            jj = jj.saturating_sub(1);
        }
        if jj < 2 {
            continue;
        }
        let dphi = quad_slope(a, g.phi(jj), g.phi(jj - 1), u.at(i, jj), u.at(i, jj - 1));
        let vr = -dphi / (r * a.sin()) * a.cos();
        let grad2 = vr * vr * (k + a.tan().powi(2));
        if grad2 > worst_grad.0 {
            worst_grad = (grad2, r);
        }
    }
    for j in 0..g.nphi {
        let phi = g.phi(j);
        if phi <= split {
            continue;
        }
        let rc = cos_cut / phi.cos();
        if rc >= g.r(g.nr - 1) {
            continue;
        }
        let Some(mut ii) = (0..g.nr).rev().find(|&i| inside(i, j)) else { continue };
        if rc - g.r(ii) < STEP_BACK * g.dr() {
            ii = ii.saturating_sub(1);
        }
        if ii < 1 {
            continue;
        }
        let vr = quad_slope(rc, g.r(ii), g.r(ii - 1), u.at(ii, j), u.at(ii - 1, j));
        let grad2 = vr * vr * (k + phi.tan().powi(2));
        if grad2 > worst_grad.0 {
            worst_grad = (grad2, rc);
        }
    }
    if !worst_grad.0.is_finite() {
        return Err(Error::InvalidParameter("flat part not resolved by the lift grid".into()));
    }

    // flux on the sphere: one-sided second-order radial derivative
    let n = g.nr - 1;
    let mut worst_flux = (f64::INFINITY, 0.0);
    for j in 0..g.nphi {
        let phi = g.phi(j);
        if phi >= cfg.phi2 || !(inside(n - 1, j) && inside(n - 2, j)) {
            continue;
        }
        let vr = (3.0 * u.at(n, j) - 4.0 * u.at(n - 1, j) + u.at(n - 2, j)) / (2.0 * g.dr());
        let (f, _) = sol.profile.eval(phi)?;
        let flux = vr - (f + eps * cfg.beta * cfg.g(phi).0);
        if flux < worst_flux.0 {
            worst_flux = (flux, phi);
        }
    }
    let gradient_margin = 1.0 - worst_grad.0;
    Ok(LiftReport {
        epsilon: eps,
        gradient_margin,
        worst_gradient_r: worst_grad.1,
        flux_margin: worst_flux.0,
        worst_flux_phi: worst_flux.1,
        gradient_ok: gradient_margin > 0.0,
        flux_ok: worst_flux.0 > 0.0,
        closed_form_gradient: (cfg.c == 0.0).then(|| 1.0 + cos_cut / (cfg.m - cos_cut)),
        iterations: solved.stats.iterations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Checks {
    pub laplacian_sign: bool,
    pub decomposition: bool,
    pub phi2_window: bool,
    pub lift_gradient: bool,
    pub lift_flux: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Margins {
    pub laplacian: f64,
    pub decomposition: f64,
    pub lift_gradient: Option<f64>,
    pub lift_flux: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub c: f64,
    pub beta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub phi2: Option<f64>,
    pub checks: Checks,
    pub margins: Margins,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        let k = &self.checks;
        k.laplacian_sign && k.decomposition && k.phi2_window && k.lift_gradient && k.lift_flux
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

/// Full audit of one `(c, M)` pair. The lift is solved only when the cheaper
/// audits pass.
pub fn certify(c: f64, m: f64, n: usize, lift_grid: AxisymGrid) -> Result<Certificate> {
    let sol = symmetric_solution(c)?;
    let mut cfg = BarrierConfig::unchecked(c, DEFAULT_BETA, m, 1e-3, sol.phi0)?;
    let lap = laplacian_sign_audit(&cfg, n);
    let dec = decomposition_audit_with(&cfg, &sol, 0.0, sol.phi0, n)?;
    let phi2 = phi2_window_with(&cfg, &sol, n)?;
    let mut checks = Checks {
        laplacian_sign: lap.ok,
        decomposition: dec.ok,
        phi2_window: phi2.is_some(),
        lift_gradient: false,
        lift_flux: false,
    };
    let mut margins =
        Margins { laplacian: lap.worst_value, decomposition: dec.min_margin, lift_gradient: None, lift_flux: None };
    if let (true, true, Some(p2)) = (lap.ok, dec.ok, phi2) {
        cfg.phi2 = p2;
        let lift = lift_check_with(&cfg, &sol, lift_grid)?;
        checks.lift_gradient = lift.gradient_ok;
        checks.lift_flux = lift.flux_ok;
        margins.lift_gradient = Some(lift.gradient_margin);
        margins.lift_flux = Some(lift.flux_margin);
    }
    Ok(Certificate { c, beta: DEFAULT_BETA, m, phi2, checks, margins })
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    /// Largest certified `c` and its certificate.
    pub best: Option<Certificate>,
    /// First certificate per `c` (the certifying one if any, else the last tried).
    pub per_c: Vec<Certificate>,
}

/// For each `c`, try `M` in [`M_CANDIDATES`] until one certifies.
pub fn admissible_parameter_search(cs: &[f64], n: usize, lift_grid: AxisymGrid) -> Result<SearchResult> {
    let per_c: Vec<Certificate> = cs
        .par_iter()
        .map(|&c| -> Result<Certificate> {
            let mut last = None;
            for m in M_CANDIDATES {
                let cert = certify(c, m, n, lift_grid)?;
                if cert.certified() {
                    return Ok(cert);
                }
                last = Some(cert);
            }
            Ok(last.expect("candidate list is non-empty"))
        })
        .collect::<Result<_>>()?;
    let best = per_c.iter().filter(|c| c.certified()).max_by(|a, b| a.c.total_cmp(&b.c)).cloned();
    Ok(SearchResult { best, per_c })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HessianReport {
    /// `min (sum u_ij^2 - 2 |grad u|^2)` over the samples.
    pub min_residual: f64,
    pub worst_point: [f64; 3],
}

/// Fits skip an inside node closer to the cut than this many spacings.
const STEP_BACK: f64 = 1.0;
const FD_STEP: f64 = 1e-4;

fn fd_derivatives(u: &dyn Fn([f64; 3]) -> f64, x: [f64; 3], h: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let at = |d: [f64; 3]| u([x[0] + d[0], x[1] + d[1], x[2] + d[2]]);
    let e = |i: usize, s: f64| {
        let mut d = [0.0; 3];
        d[i] = s;
        d
    };
    let u0 = u(x);
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        let (p, m) = (at(e(i, h)), at(e(i, -h)));
        grad[i] = (p - m) / (2.0 * h);
        hess[i][i] = (p - 2.0 * u0 + m) / (h * h);
        for j in 0..i {
            let mut pp = e(i, h);
            pp[j] = h;
            let mut pm = e(i, h);
            pm[j] = -h;
            let mut mp = e(i, -h);
            mp[j] = h;
            let mut mm = e(i, -h);
            mm[j] = -h;
            let v = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (grad, hess)
}

/// Check `sum u_ij^2 >= 2 |grad u|^2` for `u(x) = f(x / |x|)` at points of the
/// unit sphere. Derivatives are central differences with step `1e-4`,
/// Richardson-extrapolated against step `2e-4`.
pub fn hessian_gradient_inequality(f: &dyn Fn([f64; 3]) -> f64, points: &[[f64; 3]]) -> HessianReport {
    let u = |x: [f64; 3]| {
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        f([x[0] / n, x[1] / n, x[2] / n])
    };
    let mut report = HessianReport { min_residual: f64::INFINITY, worst_point: [0.0; 3] };
    for &p in points {
        let (g1, h1) = fd_derivatives(&u, p, FD_STEP);
        let (g2, h2) = fd_derivatives(&u, p, 2.0 * FD_STEP);
        let rich = |a: f64, b: f64| (4.0 * a - b) / 3.0;
        let mut hh = 0.0;
        let mut gg = 0.0;
        for i in 0..3 {
            let gi = rich(g1[i], g2[i]);
            gg += gi * gi;
            for j in 0..3 {
                hh += rich(h1[i][j], h2[i][j]).powi(2);
            }
        }
        let res = hh - 2.0 * gg;
        if res < report.min_residual {
            report = HessianReport { min_residual: res, worst_point: p };
        }
    }
    report
}

/// Real combination of the 16 homogeneous harmonic polynomials of degree <= 3,
/// evaluated on the sphere.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HarmonicCombination {
    pub coeffs: [f64; 16],
}

impl HarmonicCombination {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        let [x, y, z] = p;
        let r2 = x * x + y * y;
        let basis = [
            1.0,
            x,
            y,
            z,
            x * y,
            y * z,
            x * z,
            x * x - y * y,
            2.0 * z * z - r2,
            x * (x * x - 3.0 * y * y),
            y * (3.0 * x * x - y * y),
            x * y * z,
            z * (x * x - y * y),
            x * (4.0 * z * z - r2),
            y * (4.0 * z * z - r2),
            z * (2.0 * z * z - 3.0 * r2),
        ];
        basis.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SubharmonicReport {
    pub min_margin: f64,
    pub worst_phi: f64,
    /// Angle of the largest sampled `|grad_theta f|^2`.
    pub max_gradient_phi: f64,
    pub max_at_boundary: bool,
}

/// `2 |D^2 v|^2 - 2 alpha(alpha+1) |grad v|^2` for the 0-homogeneous extension of
/// an axisymmetric `f` with `Delta_theta f = -alpha(alpha+1) f`, sampled on
/// `phi_k = phi_max k / n`. `profile` returns `(f, f', f'')`.
pub fn subharmonicity_margin(
    profile: &dyn Fn(f64) -> Result<(f64, f64, f64)>,
    alpha: f64,
    phi_max: f64,
    n: usize,
) -> Result<SubharmonicReport> {
    let mut worst = (f64::INFINITY, 0.0);
    let mut max_grad = (f64::NEG_INFINITY, 0.0);
    for k in 1..=n {
        let phi = phi_max * k as f64 / n as f64;
        let (_, fp, fpp) = profile(phi)?;
        let cot = phi.cos() / phi.sin();
        let hess = fpp * fpp + (2.0 + cot * cot) * fp * fp;
        let margin = 2.0 * hess - 2.0 * alpha * (alpha + 1.0) * fp * fp;
        if margin < worst.0 {
            worst = (margin, phi);
        }
        if fp * fp > max_grad.0 {
            max_grad = (fp * fp, phi);
        }
    }
    Ok(SubharmonicReport {
        min_margin: worst.0,
        worst_phi: worst.1,
        max_gradient_phi: max_grad.1,
        max_at_boundary: (phi_max - max_grad.1).abs() <= phi_max / n as f64,
    })
}

/// The audit on the cap `(0, phi0]` of the symmetric profile at slope `c`.
pub fn subharmonicity_for(c: f64, n: usize) -> Result<SubharmonicReport> {
    let sol = symmetric_solution(c)?;
    let param = ConeParam::new(c)?;
    let k = 1.0 / (1.0 + c * c);
    let profile = |phi: f64| -> Result<(f64, f64, f64)> {
        let (f, fp) = sol.profile.eval(phi)?;
        Ok((f, fp, -phi.cos() / phi.sin() * fp - 2.0 * k * f))
    };
    subharmonicity_margin(&profile, param.alpha, sol.phi0, n)
}
