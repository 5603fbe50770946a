//! Stability of the symmetric solution: the criterion `g'(phi0) >= H1 g(phi0)`
//! for the `beta = -1/2` profile `g`, the critical slope, radial instability
//! witnesses, a discrete Steklov quotient and the connectivity bound.

use serde::Serialize;
use std::f64::consts::PI;

use crate::cone_geometry::cap_geometry;
use crate::error::check_c;
use crate::numerics::{pcg, CsrMatrix, GaussRule};
use crate::ode_engine::{
    beta_half_profile_with_step, integrate_with_lambda, symmetric_solution_with_step, SymmetricSolution, DEFAULT_STEP,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub c: f64,
    pub phi0: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    pub g_at_phi0: f64,
    pub gp_at_phi0: f64,
    pub margin: f64,
    pub stable: bool,
    pub ratio: Option<f64>,
    pub steklov_lambda: Option<f64>,
}

pub fn stability_margin(c: f64) -> Result<StabilityReport> {
    stability_margin_with_step(c, DEFAULT_STEP)
}

pub fn stability_margin_with_step(c: f64, step: f64) -> Result<StabilityReport> {
    let sol = symmetric_solution_with_step(c, step)?;
    let g = beta_half_profile_with_step(c, step)?;
    let (gv, gp) = g.eval_co(sol.zero.co)?;
    if !(gv > 0.0) {
        return Err(Error::PropertyViolation(format!("g(phi0) = {gv} is not positive")));
    }
    let margin = gp - sol.h1 * gv;
    let ratio = (sol.t0.abs() > 1e-10).then(|| gp / (sol.h1 * gv));
    Ok(StabilityReport {
        c,
        phi0: sol.phi0,
        h1: sol.h1,
        g_at_phi0: gv,
        gp_at_phi0: gp,
        margin,
        stable: margin >= 0.0,
        ratio,
        steklov_lambda: None,
    })
}

/// Bisection for the slope where the stability margin changes sign.
pub fn find_critical_c0(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    find_critical_c0_with_step(lo, hi, tol, DEFAULT_STEP)
}

pub fn find_critical_c0_with_step(lo: f64, hi: f64, tol: f64, step: f64) -> Result<f64> {
    if !(tol > 0.0) || !(lo < hi) {
        return Err(Error::InvalidParameter(format!("need lo < hi and tol > 0, got ({lo}, {hi}), {tol}")));
    }
    let m = |c: f64| stability_margin_with_step(c, step).map(|r| r.margin);
    if !(m(lo)? > 0.0 && m(hi)? < 0.0) {
        return Err(Error::InvalidBracket { lo, hi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if m(mid)? > 0.0 {
            a = mid
        } else {
            b = mid
        }
    }
    Ok(0.5 * (a + b))
}

/// Smooth bump supported in `[a, b]`, normalized to peak value 1.
#[derive(Debug, Clone, Copy)]
pub struct RadialBump {
    pub a: f64,
    pub b: f64,
}

impl RadialBump {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn deriv(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.a || r >= self.b {
            return (0.0, 0.0);
        }
        let half = 0.5 * (self.b - self.a);
        let q = (r - self.a) * (self.b - r);
        let f = (1.0 / (half * half) - 1.0 / q).exp();
        (f, f * (self.a + self.b - 2.0 * r) / (q * q))
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessReport {
    pub c: f64,
    /// Boundary term `int H F^2` over the free boundary cone.
    pub lhs: f64,
    /// Dirichlet term `int g^ij F_i F_j` over the positivity cone.
    pub rhs: f64,
}

impl WitnessReport {
    pub fn ratio(&self) -> f64 {
        self.rhs / self.lhs
    }
}

fn composite(a: f64, b: f64, panels: usize, rule: &GaussRule, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|k| rule.integrate(a + h * k as f64, a + h * (k + 1) as f64, &mut f)).sum()
}

/// Both sides of the second variation for a radial `F` supported in `support`,
/// by quadrature in spherical coordinates of the projected space.
pub fn radial_instability_witness(
    c: f64,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    support: (f64, f64),
) -> Result<WitnessReport> {
    check_c(c)?;
    let (a, b) = support;
    if !(0.0 < a && a < b && b < 1.0) {
        return Err(Error::InvalidTestFunction(format!("support ({a}, {b}) must lie inside (0, 1)")));
    }
    if f(a).abs() > 1e-12 || f(b).abs() > 1e-12 {
        return Err(Error::InvalidTestFunction("F does not vanish at the ends of its support".into()));
    }
    let sol = symmetric_solution_with_step(c, DEFAULT_STEP)?;
    Ok(witness_for(&sol, f, df, support))
}

fn witness_for(
    sol: &SymmetricSolution,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    (a, b): (f64, f64),
) -> WitnessReport {
    let rule = GaussRule::new(10);
    let k = 1.0 / (1.0 + sol.c * sol.c);
    let sin0 = sol.zero.sin();
    // boundary: dsigma = r sin(phi0) dr dtheta, H = H1 / r
    let lhs = 2.0 * PI * composite(a, b, 64, &rule, |r| (sol.h1 / r) * f(r).powi(2) * r * sin0);
    // bulk: (F'^2 / (1 + c^2)) r^2 sin(phi) dr dphi dtheta over phi < phi0
    let radial = composite(a, b, 64, &rule, |r| k * df(r).powi(2) * r * r);
    let angular = composite(0.0, sol.phi0, 64, &rule, f64::sin);
    WitnessReport { c: sol.c, lhs, rhs: 2.0 * PI * radial * angular }
}

/// Axisymmetric test function returning `(F, F_r, F_phi)` at `(r, phi)`.
pub type AxisymTest<'a> = &'a dyn Fn(f64, f64) -> (f64, f64, f64);

/// `int g^ij F_i F_j - int H F^2` for `F` supported in the annulus `R1 < r < R2`.
pub fn second_variation_deficit(c: f64, f: AxisymTest, annulus: (f64, f64)) -> Result<f64> {
    let sol = symmetric_solution_with_step(c, DEFAULT_STEP)?;
    deficit_for(&sol, f, annulus)
}

pub fn deficit_for(sol: &SymmetricSolution, f: AxisymTest, (r1, r2): (f64, f64)) -> Result<f64> {
    if !(0.0 < r1 && r1 < r2) {
        return Err(Error::InvalidTestFunction(format!("annulus ({r1}, {r2}) is not valid")));
    }
    for k in 0..=16 {
        let phi = sol.phi0 * k as f64 / 16.0;
        if f(r1, phi).0.abs() > 1e-12 || f(r2, phi).0.abs() > 1e-12 {
            return Err(Error::InvalidTestFunction("F does not vanish on the ends of the annulus".into()));
        }
    }
    let rule = GaussRule::new(8);
    let kc = 1.0 / (1.0 + sol.c * sol.c);
    let bulk = composite(r1, r2, 32, &rule, |r| {
        composite(0.0, sol.phi0, 32, &rule, |phi| {
            let (_, fr, fp) = f(r, phi);
            (kc * fr * fr + fp * fp / (r * r)) * r * r * phi.sin()
        })
    });
    let sin0 = sol.zero.sin();
    let boundary = composite(r1, r2, 64, &rule, |r| sol.h1 * f(r, sol.phi0).0.powi(2) * sin0);
    Ok(2.0 * PI * (bulk - boundary))
}

/// Discrete Steklov problem on the truncated cone `1/R < r < R`, `phi < phi0`,
/// on a grid uniform in `s = ln r` and in `phi`.
#[derive(Debug, Clone)]
pub struct SteklovProblem {
    pub c: f64,
    pub r_scale: f64,
    pub ns: usize,
    pub nphi: usize,
    pub phi0: f64,
    pub h1: f64,
    a: CsrMatrix,
    b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SteklovResult {
    pub c: f64,
    #[serde(rename = "R")]
    pub r_scale: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// `(1/H1) g'(phi0) / g(phi0)`, the infimum over all scales.
    pub closed_form: f64,
}

impl SteklovProblem {
    pub fn new(c: f64, r_scale: f64, ns: usize, nphi: usize) -> Result<Self> {
        check_c(c)?;
        if !(c > 0.0) {
            return Err(Error::InvalidParameter("the Steklov quotient needs c > 0 (H1 > 0)".into()));
        }
        if !(r_scale >= 4.0) || ns < 4 || nphi < 4 {
            return Err(Error::InvalidParameter(format!("need R >= 4 and grids >= 4, got R={r_scale}, {ns}x{nphi}")));
        }
        let sol = symmetric_solution_with_step(c, DEFAULT_STEP)?;
        let (phi0, h1) = (sol.phi0, sol.h1);
        let l = r_scale.ln();
        let ds = 2.0 * l / ns as f64;
        let dphi = phi0 / nphi as f64;
        let s = |k: usize| -l + ds * k as f64;
        let phi = |j: usize| dphi * j as f64;
        let kc = 1.0 / (1.0 + c * c);
        // dual-cell integrals of sin(phi) dphi and e^s ds
        let sigma = |j: usize| {
            let lo = (phi(j) - 0.5 * dphi).max(0.0);
            let hi = (phi(j) + 0.5 * dphi).min(phi0);
            lo.cos() - hi.cos()
        };
        let tau = |k: usize| s(k).exp() * 2.0 * (0.5 * ds).sinh();
        let w = nphi + 1;
        let idx = |k: usize, j: usize| (k - 1) * w + j;
        let n = (ns - 1) * w;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let edge = |rows: &mut Vec<Vec<(usize, f64)>>, p: Option<usize>, q: Option<usize>, wt: f64| {
            if let Some(p) = p {
                rows[p].push((p, wt));
                if let Some(q) = q {
                    rows[p].push((q, -wt));
                }
            }
            if let Some(q) = q {
                rows[q].push((q, wt));
                if let Some(p) = p {
                    rows[q].push((p, -wt));
                }
            }
        };
        let node = |k: usize, j: usize| (k >= 1 && k < ns).then(|| idx(k, j));
        for k in 0..ns {
            let mid = (s(k) + 0.5 * ds).exp();
            for j in 0..=nphi {
                edge(&mut rows, node(k, j), node(k + 1, j), kc * sigma(j) * mid / ds);
            }
        }
        for k in 1..ns {
            for j in 0..nphi {
                let wt = tau(k) * (phi(j) + 0.5 * dphi).sin() / dphi;
                edge(&mut rows, node(k, j), node(k, j + 1), wt);
            }
        }
        let mut b = vec![0.0; n];
        let sin0 = sol.zero.sin();
        for k in 1..ns {
            b[idx(k, nphi)] = sin0 * h1 * tau(k);
        }
        Ok(Self { c, r_scale, ns, nphi, phi0, h1, a: CsrMatrix::from_rows(rows), b })
    }

    fn coords(&self, i: usize) -> (f64, f64) {
        let w = self.nphi + 1;
        let (k, j) = (i / w + 1, i % w);
        let l = self.r_scale.ln();
        let s = -l + 2.0 * l * k as f64 / self.ns as f64;
        (s.exp(), self.phi0 * j as f64 / self.nphi as f64)
    }

    /// Discrete Rayleigh quotient of a nodal function `F(r, phi)`.
    pub fn quotient_of(&self, f: &dyn Fn(f64, f64) -> f64) -> f64 {
        let x: Vec<f64> = (0..self.b.len())
            .map(|i| {
                let (r, p) = self.coords(i);
                f(r, p)
            })
            .collect();
        self.quotient(&x)
    }

    fn quotient(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.a.mul(x, &mut ax);
        let num: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
        let den: f64 = x.iter().zip(&self.b).map(|(a, b)| a * a * b).sum();
        num / den
    }

    /// Smallest generalized eigenvalue of `A x = lambda B x` by inverse iteration.
    pub fn min_quotient(&self, max_iter: usize) -> Result<(f64, usize)> {
        let n = self.b.len();
        let mut x = vec![1.0; n];
        let mut y = vec![0.0; n];
        let mut lam = self.quotient(&x);
        for it in 1..=max_iter {
            let bx: Vec<f64> = x.iter().zip(&self.b).map(|(a, b)| a * b).collect();
            pcg(&self.a, &bx, &mut y, 1e-13, 20 * n)?;
            let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            x.iter_mut().zip(&y).for_each(|(a, b)| *a = b / scale);
            y.iter_mut().for_each(|v| *v /= scale);
            let next = self.quotient(&x);
            if (next - lam).abs() <= 1e-12 * next.abs() {
                return Ok((next, it));
            }
            lam = next;
        }
        Err(Error::ConvergenceFailure(format!(
            "inverse iteration did not settle in {max_iter} steps (last quotient {lam})"
        )))
    }
}

pub fn steklov_min_quotient(c: f64, r_scale: f64, ns: usize, nphi: usize) -> Result<SteklovResult> {
    let problem = SteklovProblem::new(c, r_scale, ns, nphi)?;
    let (lambda, iterations) = problem.min_quotient(2000)?;
    let report = stability_margin(c)?;
    let closed_form = report.gp_at_phi0 / (report.h1 * report.g_at_phi0);
    Ok(SteklovResult { c, r_scale, lambda, iterations, closed_form })
}

/// Quotient of the lowest separated mode `r^(-1/2) sin(omega ln(rR)) h(phi)` with
/// `omega = pi / (2 ln R)`, from the angular equation alone. This is the exact
/// minimum of the continuous problem on the truncated cone.
pub fn separated_steklov_quotient(c: f64, r_scale: f64) -> Result<f64> {
    let sol = symmetric_solution_with_step(c, DEFAULT_STEP)?;
    let omega = PI / (2.0 * r_scale.ln());
    let lam = -(0.25 + omega * omega) / (1.0 + c * c);
    let h = integrate_with_lambda(lam, sol.phi0, DEFAULT_STEP)?;
    let (hv, hp) = h.eval(sol.phi0)?;
    Ok(hp / (sol.h1 * hv))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConnectivityReport {
    pub c: f64,
    pub phi0: f64,
    pub m: u32,
    /// `int kappa ds` over the free boundary trace.
    pub kappa_integral: f64,
    /// `|U| / (4 (1 + c^2))`.
    pub bound: f64,
    pub inequality_holds: bool,
    pub chain_lhs: f64,
    pub chain_rhs: f64,
    pub chain_holds: bool,
}

pub fn connectivity_bound_check(c: f64, phi0: f64, m: u32) -> Result<ConnectivityReport> {
    check_c(c)?;
    let cap = cap_geometry(phi0)?;
    let q = 1.0 + c * c;
    let kappa_integral = cap.kappa * cap.boundary_length;
    let bound = cap.area_u / (4.0 * q);
    let chain_lhs = (1.0 - 1.0 / (4.0 * q)) * cap.area_u;
    let chain_rhs = 4.0 * PI - 2.0 * m as f64 * PI;
    Ok(ConnectivityReport {
        c,
        phi0,
        m,
        kappa_integral,
        bound,
        inequality_holds: kappa_integral <= bound,
        chain_lhs,
        chain_rhs,
        chain_holds: 0.0 < chain_lhs && chain_lhs <= chain_rhs,
    })
}
