//! Discrete minimization of `J(v) = int |grad_c v|^2 + chi{v > 0}` over
//! axisymmetric fields with prescribed values on `r = 1`.
//!
//! Energies are evaluated exactly (up to quadrature roundoff) on a conforming
//! reconstruction of the nodal field: bilinear on each `(r, phi)` cell,
//! `(r / r_min) u(r_min, phi)` inside the innermost ball, and, when the exact
//! boundary trace is known, a correction `psi(r) e(phi)` in the outermost cell
//! row so that the reconstruction matches the trace on the whole sphere. Every
//! reported energy is therefore the energy of an admissible H^1 function.

use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::elliptic_grid::{AxisymField, AxisymGrid};
use crate::numerics::{pcg, CsrMatrix, GaussRule};
use crate::ode_engine::{symmetric_solution, SymmetricSolution};
use crate::{Error, Result};

/// Boundary data on the unit sphere: value and `phi`-derivative, plus the
/// angles where the derivative jumps.
#[derive(Clone)]
pub struct Trace {
    eval: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    pub kinks: Vec<f64>,
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Trace").field("kinks", &self.kinks).finish()
    }
}

impl Trace {
    pub fn new(eval: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static, kinks: Vec<f64>) -> Self {
        Self { eval: Arc::new(eval), kinks }
    }

    /// Trace of the symmetric solution, `f` clamped at zero beyond `phi0`.
    pub fn symmetric(sol: &SymmetricSolution) -> Self {
        let sol = sol.clone();
        let phi0 = sol.phi0;
        Self::new(move |phi| sol.eval_clamped(phi), vec![phi0])
    }

    /// `(cos phi)_+`, the trace of the flat half-space solution.
    pub fn clamped_cosine() -> Self {
        // cos(pi/2) rounds to a tiny positive number; keep the equator exactly zero
        Self::new(|phi: f64| if phi < PI / 2.0 - 1e-12 { (phi.cos(), -phi.sin()) } else { (0.0, 0.0) }, vec![PI / 2.0])
    }

    pub fn value(&self, phi: f64) -> f64 {
        (self.eval)(phi).0
    }

    fn deriv(&self, phi: f64) -> f64 {
        (self.eval)(phi).1
    }
}

/// Energy split into its Dirichlet and volume parts, both including the area
/// factor `2 pi sqrt(1 + c^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParts {
    pub dirichlet: f64,
    pub volume: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.dirichlet + self.volume
    }
}

/// Conforming reconstruction of a nodal field.
pub struct Reconstruction<'a> {
    field: &'a AxisymField,
    trace: Option<&'a Trace>,
    k: f64,
    area: f64,
    gauss_r: GaussRule,
    gauss_phi: GaussRule,
    gauss_chi: GaussRule,
}

impl<'a> Reconstruction<'a> {
    pub fn new(field: &'a AxisymField, trace: Option<&'a Trace>) -> Self {
        let c = field.c;
        Self {
            field,
            trace,
            k: 1.0 / (1.0 + c * c),
            area: 2.0 * PI * (1.0 + c * c).sqrt(),
            gauss_r: GaussRule::new(3),
            gauss_phi: GaussRule::new(6),
            gauss_chi: GaussRule::new(8),
        }
    }

    fn grid(&self) -> &AxisymGrid {
        &self.field.grid
    }

    fn corrected(&self, i: usize) -> bool {
        self.trace.is_some() && i == self.grid().nr - 2
    }

    /// `e(phi) = trace - linear interpolant of the outer ring`, and its derivative.
    fn trace_error(&self, j: usize, phi: f64) -> (f64, f64) {
        let Some(tr) = self.trace else { return (0.0, 0.0) };
        let g = self.grid();
        let i = g.nr - 1;
        let (u0, u1) = (self.field.at(i, j), self.field.at(i, j + 1));
        let p = (phi - g.phi(j)) / g.dphi();
        (tr.value(phi) - (u0 + (u1 - u0) * p), tr.deriv(phi) - (u1 - u0) / g.dphi())
    }

    /// Value and `(R_r, R_phi)` inside cell `(i, j)` at local `t`, angle `phi`.
    fn cell_eval(&self, i: usize, j: usize, t: f64, phi: f64) -> (f64, f64, f64) {
        let g = self.grid();
        let f = self.field;
        let p = (phi - g.phi(j)) / g.dphi();
        let (a, b, c, d) = (f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), f.at(i + 1, j + 1));
        let mut v = a * (1.0 - t) * (1.0 - p) + b * t * (1.0 - p) + c * (1.0 - t) * p + d * t * p;
        let mut vr = ((b - a) * (1.0 - p) + (d - c) * p) / g.dr();
        let mut vp = ((c - a) * (1.0 - t) + (d - b) * t) / g.dphi();
        if self.corrected(i) {
            let (e, ep) = self.trace_error(j, phi);
            v += t * e;
            vr += e / g.dr();
            vp += t * ep;
        }
        (v, vr, vp)
    }

    /// Angular sub-intervals of column `j`, split at trace kinks in the corrected row.
    fn phi_pieces(&self, i: usize, j: usize) -> Vec<(f64, f64)> {
        let g = self.grid();
        let (lo, hi) = (g.phi(j), g.phi(j + 1));
        let mut cuts = vec![lo];
        if self.corrected(i) {
            if let Some(tr) = self.trace {
                cuts.extend(tr.kinks.iter().copied().filter(|&k| k > lo && k < hi));
            }
        }
        cuts.push(hi);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Reconstructed value at `(r, phi)`.
    pub fn value(&self, r: f64, phi: f64) -> f64 {
        let g = self.grid();
        let j = ((phi / g.dphi()).floor() as usize).min(g.nphi - 2);
        if r <= g.r_min() {
            let p = (phi - g.phi(j)) / g.dphi();
            let l0 = self.field.at(0, j) * (1.0 - p) + self.field.at(0, j + 1) * p;
            return l0 * r / g.r_min();
        }
        let u = r * g.nr as f64 - 1.0;
        let i = (u.floor() as usize).min(g.nr - 2);
        self.cell_eval(i, j, u - i as f64, phi).0
    }

    /// Energy of the reconstruction over the ball `r < rmax`.
    pub fn energy_parts(&self, rmax: f64) -> EnergyParts {
        let g = *self.grid();
        let rmax = rmax.min(1.0);
        let mut dir = 0.0;
        let mut vol = 0.0;
        // innermost ball
        let r0 = g.r_min();
        let rm = rmax.min(r0);
        for j in 0..g.nphi - 1 {
            let (a, b) = (self.field.at(0, j), self.field.at(0, j + 1));
            let slope = (b - a) / g.dphi();
            let grad = self.gauss_phi.integrate(g.phi(j), g.phi(j + 1), |phi| {
                let l = a + slope * (phi - g.phi(j));
                (self.k * l * l + slope * slope) * phi.sin()
            });
            dir += grad * rm.powi(3) / (3.0 * r0 * r0);
            vol += positive_sin_measure_linear(g.phi(j), g.phi(j + 1), a, b) * rm.powi(3) / 3.0;
        }
        for i in 0..g.nr - 1 {
            let ri = g.r(i);
            if ri >= rmax {
                break;
            }
            let tmax = ((rmax - ri) / g.dr()).min(1.0);
            for j in 0..g.nphi - 1 {
                let (d, v) = self.cell_energy(i, j, tmax);
                dir += d;
                vol += v;
            }
        }
        EnergyParts { dirichlet: self.area * dir, volume: self.area * vol }
    }

    pub fn energy(&self) -> f64 {
        self.energy_parts(1.0).total()
    }

    fn cell_energy(&self, i: usize, j: usize, tmax: f64) -> (f64, f64) {
        let g = *self.grid();
        let dr = g.dr();
        let ri = g.r(i);
        let pieces = self.phi_pieces(i, j);
        let mut dir = 0.0;
        for &(a, b) in &pieces {
            for (t, wt) in self.gauss_r.on(0.0, tmax) {
                let r = ri + t * dr;
                let inner = self.gauss_phi.integrate(a, b, |phi| {
                    let (_, vr, vp) = self.cell_eval(i, j, t, phi);
                    (self.k * vr * vr * r * r + vp * vp) * phi.sin()
                });
                dir += wt * dr * inner;
            }
        }
        // positivity set: the reconstruction is linear in t along every ray, so
        // the kinks of the positive angular measure in t are roots at piece ends
        let corners: Vec<(f64, f64)> = {
            let ends: Vec<f64> = std::iter::once(pieces[0].0).chain(pieces.iter().map(|p| p.1)).collect();
            ends.iter().map(|&phi| (self.cell_eval(i, j, 0.0, phi).0, self.cell_eval(i, j, 1.0, phi).0)).collect()
        };
        if corners.iter().all(|&(v0, v1)| v0 <= 0.0 && v1 <= 0.0) && !self.corrected(i) {
            return (dir, 0.0);
        }
        let mut tcuts = vec![0.0];
        for &(v0, v1) in &corners {
            if (v0 > 0.0) != (v1 > 0.0) {
                let t = v0 / (v0 - v1);
                if t > 0.0 && t < tmax {
                    tcuts.push(t);
                }
            }
        }
        tcuts.push(tmax);
        tcuts.sort_by(f64::total_cmp);
        let mut vol = 0.0;
        for w in tcuts.windows(2) {
            if w[1] - w[0] <= 0.0 {
                continue;
            }
            for (t, wt) in self.gauss_chi.on(w[0], w[1]) {
                let r = ri + t * dr;
                let m: f64 = pieces.iter().map(|&(a, b)| self.positive_measure(i, j, t, a, b)).sum();
                vol += wt * dr * r * r * m;
            }
        }
        (dir, vol)
    }

    /// `int sin(phi) dphi` over the part of `[a, b]` where the reconstruction is positive.
    fn positive_measure(&self, i: usize, j: usize, t: f64, a: f64, b: f64) -> f64 {
        let va = self.cell_eval(i, j, t, a).0;
        let vb = self.cell_eval(i, j, t, b).0;
        if !self.corrected(i) {
            return positive_sin_measure_linear(a, b, va, vb);
        }
        match (va > 0.0, vb > 0.0) {
            (true, true) => a.cos() - b.cos(),
            (false, false) => 0.0,
            (pos_a, _) => {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if (self.cell_eval(i, j, t, mid).0 > 0.0) == pos_a {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                let root = 0.5 * (lo + hi);
                if pos_a {
                    a.cos() - root.cos()
                } else {
                    root.cos() - b.cos()
                }
            }
        }
    }

    /// `int_0^pi R(r, phi)^2 sin(phi) dphi` on the sphere of radius `r`.
    pub fn sphere_l2(&self, r: f64) -> f64 {
        let g = *self.grid();
        let mut total = 0.0;
        for j in 0..g.nphi - 1 {
            if r <= g.r_min() {
                let (a, b) = (self.field.at(0, j), self.field.at(0, j + 1));
                let s = r / g.r_min();
                total += self.gauss_phi.integrate(g.phi(j), g.phi(j + 1), |phi| {
                    let p = (phi - g.phi(j)) / g.dphi();
                    (s * (a + (b - a) * p)).powi(2) * phi.sin()
                });
                continue;
            }
            let u = r * g.nr as f64 - 1.0;
            let i = (u.floor() as usize).min(g.nr - 2);
            let t = u - i as f64;
            for (a, b) in self.phi_pieces(i, j) {
                total += self.gauss_phi.integrate(a, b, |phi| self.cell_eval(i, j, t, phi).0.powi(2) * phi.sin());
            }
        }
        total
    }
}

/// `int sin` over the positive part of a linear function on `[a, b]` with end values `va`, `vb`.
fn positive_sin_measure_linear(a: f64, b: f64, va: f64, vb: f64) -> f64 {
    match (va > 0.0, vb > 0.0) {
        (true, true) => a.cos() - b.cos(),
        (false, false) => 0.0,
        (true, false) => {
            let root = a + (b - a) * va / (va - vb);
            a.cos() - root.cos()
        }
        (false, true) => {
            let root = a + (b - a) * va / (va - vb);
            root.cos() - b.cos()
        }
    }
}

/// Exact energy of the reconstruction, without trace correction.
pub fn energy(field: &AxisymField) -> f64 {
    Reconstruction::new(field, None).energy()
}

/// Exact energy with the outer cell row corrected to match `trace` on `r = 1`.
pub fn energy_with_trace(field: &AxisymField, trace: &Trace) -> f64 {
    Reconstruction::new(field, Some(trace)).energy()
}

/// `J(Phi_c, B_1) = (2 pi sqrt(1+c^2) / 3) int_0^phi0 [f^2/(1+c^2) + f'^2 + 1] sin(phi) dphi`.
pub fn symmetric_energy(sol: &SymmetricSolution) -> f64 {
    let rule = GaussRule::new(10);
    let k = 1.0 / (1.0 + sol.c * sol.c);
    let panels = 400;
    let h = sol.phi0 / panels as f64;
    let integral: f64 = (0..panels)
        .map(|p| {
            rule.integrate(h * p as f64, h * (p + 1) as f64, |phi| {
                let (f, fp) = sol.profile.eval(phi).unwrap_or((0.0, 0.0));
                (k * f * f + fp * fp + 1.0) * phi.sin()
            })
        })
        .sum();
    2.0 * PI * (1.0 + sol.c * sol.c).sqrt() * integral / 3.0
}

/// Sample `r T(phi)` on the grid: the 1-homogeneous extension of the trace.
pub fn homogeneous_extension(grid: AxisymGrid, c: f64, trace: &Trace) -> Result<AxisymField> {
    AxisymField::from_fn(grid, c, |r, phi| r * trace.value(phi))
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeConfig {
    pub c: f64,
    pub nr: usize,
    pub nphi: usize,
    pub eps_schedule: Vec<f64>,
    /// Sweep limit per continuation stage.
    pub max_outer: usize,
    pub truncation_tol: f64,
}

impl MinimizeConfig {
    /// Schedule `8h, 4h, 2h, h` with `h` the larger grid spacing.
    pub fn new(c: f64, nr: usize, nphi: usize) -> Result<Self> {
        let h = AxisymGrid::new(nr, nphi)?.h();
        Ok(Self {
            c,
            nr,
            nphi,
            eps_schedule: vec![8.0 * h, 4.0 * h, 2.0 * h, h],
            max_outer: 4000,
            truncation_tol: 1e-3 * h,
        })
    }

    fn validate(&self) -> Result<AxisymGrid> {
        let grid = AxisymGrid::new(self.nr, self.nphi)?;
        let h = grid.h();
        let s = &self.eps_schedule;
        if s.is_empty() || s.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter("epsilon schedule must be strictly decreasing".into()));
        }
        if *s.last().unwrap() < h * (1.0 - 1e-12) {
            return Err(Error::InvalidParameter(format!("epsilon floor must be >= grid spacing {h}")));
        }
        if !(self.truncation_tol >= 0.0) || self.max_outer == 0 {
            return Err(Error::InvalidParameter("truncation tolerance and iteration limit must be positive".into()));
        }
        Ok(grid)
    }
}

/// Quadratic part of the reconstructed energy: `u^T K u + 2 b^T u + const`, plus
/// lumped volumes for the smoothed positivity penalty.
struct Discretization {
    k: CsrMatrix,
    b: Vec<f64>,
    mass: Vec<f64>,
}

fn assemble(grid: AxisymGrid, c: f64, trace: Option<&Trace>, ring: &[f64]) -> Discretization {
    let n = grid.len();
    let kc = 1.0 / (1.0 + c * c);
    let area = 2.0 * PI * (1.0 + c * c).sqrt();
    let (dr, dphi) = (grid.dr(), grid.dphi());
    let gr = GaussRule::new(3);
    let gp = GaussRule::new(6);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(9); n];
    let mut b = vec![0.0; n];
    let mut mass = vec![0.0; n];
    // innermost ball: R = (r / r0) L0(phi), contributes r0/3 (k L0^2 + L0'^2)
    let r0 = grid.r_min();
    for j in 0..grid.nphi - 1 {
        let ids = [grid.idx(0, j), grid.idx(0, j + 1)];
        for (phi, w) in gp.on(grid.phi(j), grid.phi(j + 1)) {
            let p = (phi - grid.phi(j)) / dphi;
            let nv = [1.0 - p, p];
            let nd = [-1.0 / dphi, 1.0 / dphi];
            let s = phi.sin() * w * area;
            for a in 0..2 {
                mass[ids[a]] += s * nv[a] * r0.powi(3) / 3.0;
                for bb in 0..2 {
                    rows[ids[a]].push((ids[bb], s * r0 / 3.0 * (kc * nv[a] * nv[bb] + nd[a] * nd[bb])));
                }
            }
        }
    }
    let last = grid.nr - 2;
    for i in 0..grid.nr - 1 {
        for j in 0..grid.nphi - 1 {
            let ids = [grid.idx(i, j), grid.idx(i + 1, j), grid.idx(i, j + 1), grid.idx(i + 1, j + 1)];
            let mut pieces = vec![grid.phi(j)];
            if let (Some(tr), true) = (trace, i == last) {
                pieces.extend(tr.kinks.iter().copied().filter(|&k| k > grid.phi(j) && k < grid.phi(j + 1)));
            }
            pieces.push(grid.phi(j + 1));
            for win in pieces.windows(2) {
                for (phi, wp) in gp.on(win[0], win[1]) {
                    let p = (phi - grid.phi(j)) / dphi;
                    let (e, ep) = match (trace, i == last) {
                        (Some(tr), true) => {
                            let (u0, u1) = (ring[j], ring[j + 1]);
                            (tr.value(phi) - (u0 + (u1 - u0) * p), tr.deriv(phi) - (u1 - u0) / dphi)
                        }
                        _ => (0.0, 0.0),
                    };
                    for (t, wt) in gr.on(0.0, 1.0) {
                        let r = grid.r(i) + t * dr;
                        let nv = [(1.0 - t) * (1.0 - p), t * (1.0 - p), (1.0 - t) * p, t * p];
                        let ndr = [-(1.0 - p) / dr, (1.0 - p) / dr, -p / dr, p / dr];
                        let ndp = [-(1.0 - t) / dphi, -t / dphi, (1.0 - t) / dphi, t / dphi];
                        let s = phi.sin() * wp * wt * dr * area;
                        let (cr, cp) = (e / dr, t * ep);
                        for a in 0..4 {
                            mass[ids[a]] += s * nv[a] * r * r;
                            b[ids[a]] += s * (kc * ndr[a] * cr * r * r + ndp[a] * cp);
                            for bb in 0..4 {
                                let v = s * (kc * ndr[a] * ndr[bb] * r * r + ndp[a] * ndp[bb]);
                                rows[ids[a]].push((ids[bb], v));
                            }
                        }
                    }
                }
            }
        }
    }
    Discretization { k: CsrMatrix::from_rows(rows), b, mass }
}

/// Smoothed positivity indicator: 0 at 0, concave ramp to 1 at `eps`.
fn ramp(t: f64, eps: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t < eps {
        let s = t / eps;
        s * (2.0 - s)
    } else {
        1.0
    }
}

/// Global minimizer over `t >= 0` of `K t^2 + 2 p t + m ramp(t, eps)`.
fn node_min(kdiag: f64, p: f64, m: f64, eps: f64) -> f64 {
    let q = |t: f64| kdiag * t * t + 2.0 * p * t + m * ramp(t, eps);
    let mut best = (0.0, 0.0);
    let mut consider = |t: f64| {
        if t >= 0.0 {
            let v = q(t);
            if v < best.1 {
                best = (t, v);
            }
        }
    };
    consider(eps);
    consider((-p / kdiag).max(eps));
    let a = kdiag - m / (eps * eps);
    if a > 0.0 {
        let t = -(p + m / eps) / a;
        if t > 0.0 && t < eps {
            consider(t);
        }
    }
    best.0
}

fn smoothed_energy(d: &Discretization, u: &[f64], eps: f64) -> f64 {
    let mut ku = vec![0.0; u.len()];
    d.k.mul(u, &mut ku);
    (0..u.len()).map(|n| u[n] * ku[n] + 2.0 * d.b[n] * u[n] + d.mass[n] * ramp(u[n], eps)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeBoundaryEstimate {
    /// `(r, phi_fb)` for every row with both signs present.
    pub per_radius: Vec<(f64, f64)>,
    /// Mean and spread over rows with `r` in `[0.2, 0.8]`.
    pub mean: Option<f64>,
    pub spread: Option<f64>,
}

/// Per-row free boundary angle: the zero of the secant through the last two
/// positive samples before the first zero, kept inside the bracketing cell.
pub fn free_boundary_angle(field: &AxisymField) -> FreeBoundaryEstimate {
    let g = field.grid;
    let mut per_radius = Vec::new();
    for i in 0..g.nr {
        let row: Vec<f64> = (0..g.nphi).map(|j| field.at(i, j)).collect();
        if row.iter().all(|&v| v > 0.0) || row.iter().all(|&v| v <= 0.0) {
            continue;
        }
        let Some(j) = (0..g.nphi - 1).find(|&j| row[j] > 0.0 && row[j + 1] <= 0.0) else { continue };
        let lin = g.phi(j) + g.dphi() * row[j] / (row[j] - row[j + 1]);
        let phi = if j >= 1 && row[j - 1] > row[j] {
            (g.phi(j) + g.dphi() * row[j] / (row[j - 1] - row[j])).min(lin)
        } else {
            lin
        };
        per_radius.push((g.r(i), phi));
    }
    let mid: Vec<f64> = per_radius.iter().filter(|(r, _)| (0.2..=0.8).contains(r)).map(|p| p.1).collect();
    let (mean, spread) = if mid.is_empty() {
        (None, None)
    } else {
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        let lo = mid.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = mid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (Some(mean), Some(hi - lo))
    };
    FreeBoundaryEstimate { per_radius, mean, spread }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub sup_distance: f64,
    pub energy_gap: f64,
    pub vertex_touch: bool,
    pub energy: f64,
    pub symmetric_energy: f64,
}

/// Distance and energy gap to `Phi_c` on the same grid.
pub fn compare_to_symmetric(field: &AxisymField, c: f64) -> Result<Comparison> {
    if field.c != c {
        return Err(Error::GridMismatch(format!("field has c = {}, comparison asked for c = {c}", field.c)));
    }
    let sol = symmetric_solution(c)?;
    compare_with(field, &sol)
}

fn compare_with(field: &AxisymField, sol: &SymmetricSolution) -> Result<Comparison> {
    let trace = Trace::symmetric(sol);
    let phi = homogeneous_extension(field.grid, field.c, &trace)?;
    let scale = phi.max();
    let sup = field.values.iter().zip(&phi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let energy = energy_with_trace(field, &trace);
    let symmetric_energy = symmetric_energy(sol);
    Ok(Comparison {
        sup_distance: if scale > 0.0 { sup / scale } else { sup },
        energy_gap: energy - symmetric_energy,
        vertex_touch: vertex_touch(field),
        energy,
        symmetric_energy,
    })
}

/// Whether the zero set reaches the innermost two rings next to positive values.
pub fn vertex_touch(field: &AxisymField) -> bool {
    let g = field.grid;
    for i in 0..2.min(g.nr) {
        for j in 0..g.nphi {
            if field.at(i, j) > 0.0 {
                continue;
            }
            let mut nbs = vec![];
            if j > 0 {
                nbs.push((i, j - 1));
            }
            if j + 1 < g.nphi {
                nbs.push((i, j + 1));
            }
            if i > 0 {
                nbs.push((i - 1, j));
            }
            nbs.push((i + 1, j));
            if nbs.into_iter().any(|(a, b)| field.at(a, b) > 0.0) {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeResult {
    #[serde(skip)]
    pub field: AxisymField,
    pub c: f64,
    pub energy: f64,
    pub initial_energy: f64,
    pub fb: FreeBoundaryEstimate,
    pub sup_distance_to_phi: f64,
    pub energy_gap: f64,
    pub vertex_touch: bool,
    /// Exact energy after each continuation stage and after sharpening.
    pub history: Vec<f64>,
    pub sweeps: usize,
    pub relaxation_halvings: usize,
}

/// Minimize with boundary data `trace` on `r = 1`.
///
/// Each continuation stage runs projected nonlinear SOR on the smoothed energy
/// (exact minimization per node, then over-relaxation); a sweep that raises the
/// smoothed energy is rejected and the over-relaxation halved. A sharpening
/// pass truncates tiny values and replaces the field by the discrete harmonic
/// function on its positivity set. The best iterate by exact energy is kept.
pub fn minimize(config: &MinimizeConfig, trace: &Trace) -> Result<MinimizeResult> {
    let grid = config.validate()?;
    let sol = symmetric_solution(config.c)?;
    minimize_against(config, grid, trace, &sol)
}

fn minimize_against(
    config: &MinimizeConfig,
    grid: AxisymGrid,
    trace: &Trace,
    sol: &SymmetricSolution,
) -> Result<MinimizeResult> {
    let mut field = homogeneous_extension(grid, config.c, trace)?;
    if !field.is_nonnegative() {
        return Err(Error::InvalidParameter("boundary data must be nonnegative".into()));
    }
    let ring: Vec<f64> = (0..grid.nphi).map(|j| field.at(grid.nr - 1, j)).collect();
    let disc = assemble(grid, config.c, Some(trace), &ring);
    let kdiag = disc.k.diagonal();
    let free: Vec<usize> = (0..grid.len()).filter(|&n| !field.dirichlet[n]).collect();
    let exact = |f: &AxisymField| energy_with_trace(f, trace);
    let initial_energy = exact(&field);
    let mut best = (initial_energy, field.values.clone());
    let mut history = vec![];
    let mut sweeps = 0;
    let mut halvings = 0;
    let k = &disc.k;
    for &eps in &config.eps_schedule {
        let mut omega: f64 = 1.8;
        let mut e_prev = smoothed_energy(&disc, &field.values, eps);
        let mut stage_sweeps = 0;
        while stage_sweeps < config.max_outer {
            let saved = field.values.clone();
            let mut change: f64 = 0.0;
            for &n in &free {
                let mut p = disc.b[n];
                for idx in k.row_ptr[n]..k.row_ptr[n + 1] {
                    let m = k.cols[idx];
                    if m != n {
                        p += k.vals[idx] * field.values[m];
                    }
                }
                let target = node_min(kdiag[n], p, disc.mass[n], eps);
                let old = field.values[n];
                let new = (old + omega * (target - old)).max(0.0);
                change = change.max((new - old).abs());
                field.values[n] = new;
            }
            stage_sweeps += 1;
            sweeps += 1;
            let e = smoothed_energy(&disc, &field.values, eps);
            if e > e_prev + 1e-13 * e_prev.abs().max(1.0) {
                field.values = saved;
                halvings += 1;
                if omega <= 1.0 + 1e-9 {
                    return Err(Error::ConvergenceFailure(format!(
                        "smoothed energy increased under exact node minimization at eps = {eps}"
                    )));
                }
                omega = 1.0 + 0.5 * (omega - 1.0);
                if omega < 1.0 + 1e-6 {
                    omega = 1.0;
                }
                continue;
            }
            e_prev = e;
            if change < 1e-11 {
                break;
            }
        }
        let j = exact(&field);
        history.push(j);
        if j < best.0 {
            best = (j, field.values.clone());
        }
    }
    sharpen(&mut field, &disc, &free, config.truncation_tol)?;
    let j = exact(&field);
    history.push(j);
    if j < best.0 {
        best = (j, field.values.clone());
    }
    field.values = best.1;
    let cmp = compare_with(&field, sol)?;
    Ok(MinimizeResult {
        c: config.c,
        energy: best.0,
        initial_energy,
        fb: free_boundary_angle(&field),
        sup_distance_to_phi: cmp.sup_distance,
        energy_gap: cmp.energy_gap,
        vertex_touch: cmp.vertex_touch,
        field,
        history,
        sweeps,
        relaxation_halvings: halvings,
    })
}

/// Truncate sub-tolerance values, solve the discrete Laplace equation on the
/// positivity set with the rest fixed, and clamp negatives.
fn sharpen(field: &mut AxisymField, disc: &Discretization, free: &[usize], tol: f64) -> Result<()> {
    for &n in free {
        if field.values[n] < tol {
            field.values[n] = 0.0;
        }
    }
    let positive: Vec<usize> = free.iter().copied().filter(|&n| field.values[n] > 0.0).collect();
    if positive.is_empty() {
        return Ok(());
    }
    let mut local = vec![usize::MAX; field.values.len()];
    for (l, &n) in positive.iter().enumerate() {
        local[n] = l;
    }
    let k = &disc.k;
    let mut rows = Vec::with_capacity(positive.len());
    let mut rhs = Vec::with_capacity(positive.len());
    for &n in &positive {
        let mut row = vec![];
        let mut r = -disc.b[n];
        for idx in k.row_ptr[n]..k.row_ptr[n + 1] {
            let m = k.cols[idx];
            if local[m] != usize::MAX {
                row.push((local[m], k.vals[idx]));
            } else {
                r -= k.vals[idx] * field.values[m];
            }
        }
        rows.push(row);
        rhs.push(r);
    }
    let a = CsrMatrix::from_rows(rows);
    let mut x: Vec<f64> = positive.iter().map(|&n| field.values[n]).collect();
    pcg(&a, &rhs, &mut x, 1e-12, 20 * positive.len().max(100))?;
    for (l, &n) in positive.iter().enumerate() {
        field.values[n] = x[l].max(0.0);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> AxisymGrid {
        AxisymGrid::new(n, n).unwrap()
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let f = AxisymField::zeros(grid(16), 0.3).unwrap();
        assert_eq!(energy(&f), 0.0);
    }

    #[test]
    fn half_space_energy() {
        // odd angular count puts the equator on a node
        let tr = Trace::clamped_cosine();
        let f = AxisymField::from_fn(AxisymGrid::new(64, 65).unwrap(), 0.0, |r, p| r * tr.value(p)).unwrap();
        let e = energy(&f);
        assert!((e - 4.0 * PI / 3.0).abs() < 5e-3, "{e}");
        let e2 = energy_with_trace(&f, &tr);
        assert!((e2 - 4.0 * PI / 3.0).abs() < 5e-3, "{e2}");
    }

    #[test]
    fn reconstruction_is_exact_on_bilinear_data() {
        // u = r (a + b phi) is bilinear on every cell and linear in r in the ball
        let f = AxisymField::from_fn(grid(12), 0.5, |r, p| r * (2.0 + 0.3 * p)).unwrap();
        let rec = Reconstruction::new(&f, None);
        let k = 1.0 / 1.25;
        let rule = GaussRule::new(20);
        let exact = 2.0 * PI * 1.25f64.sqrt() / 3.0
            * rule.integrate(0.0, PI, |p| (k * (2.0 + 0.3 * p).powi(2) + 0.09 + 1.0) * p.sin());
        assert!((rec.energy() - exact).abs() < 1e-12 * exact, "{} {exact}", rec.energy());
    }

    #[test]
    fn volume_term_is_exact_for_linear_zero_sets() {
        // signed data, zero set phi = pi/2 inside a cell on every ray
        let f = AxisymField::from_fn(grid(10), 0.2, |r, p| r * (PI / 2.0 - p)).unwrap();
        let parts = Reconstruction::new(&f, None).energy_parts(1.0);
        let exact = 2.0 * PI * 1.04f64.sqrt() / 3.0;
        assert!((parts.volume - exact).abs() < 1e-12, "{} {exact}", parts.volume);
        let half = Reconstruction::new(&f, None).energy_parts(0.55);
        assert!((half.volume - exact * 0.55f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn trace_correction_matches_boundary_exactly() {
        let sol = symmetric_solution(0.3).unwrap();
        let tr = Trace::symmetric(&sol);
        let f = homogeneous_extension(grid(16), 0.3, &tr).unwrap();
        let rec = Reconstruction::new(&f, Some(&tr));
        for k in 0..=100 {
            let phi = PI * k as f64 / 100.0;
            assert!((rec.value(1.0, phi) - tr.value(phi)).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolant_energy_converges_to_symmetric_energy() {
        let c = 0.3;
        let sol = symmetric_solution(c).unwrap();
        let tr = Trace::symmetric(&sol);
        let exact = symmetric_energy(&sol);
        let gap = |n: usize| {
            let f = homogeneous_extension(grid(n), c, &tr).unwrap();
            energy_with_trace(&f, &tr) - exact
        };
        let (a, b) = (gap(32), gap(64));
        assert!(a > 0.0 && b > 0.0 && a / b > 3.0, "{a} {b}");
    }

    #[test]
    fn node_minimizer_is_global() {
        for &(k, p, m, eps) in
            &[(2.0, -1.0, 0.1, 0.05), (2.0, 0.3, 0.1, 0.05), (1.0, -0.01, 1.0, 0.2), (5.0, -0.2, 0.01, 0.01)]
        {
            let t = node_min(k, p, m, eps);
            let q = |t: f64| k * t * t + 2.0 * p * t + m * ramp(t, eps);
            for s in 0..10000 {
                let x = s as f64 * 1e-4;
                assert!(q(t) <= q(x) + 1e-14);
            }
        }
    }

    #[test]
    fn flat_minimizer_recovers_half_space_solution() {
        let cfg = MinimizeConfig::new(0.0, 32, 32).unwrap();
        let res = minimize(&cfg, &Trace::clamped_cosine()).unwrap();
        assert!(res.energy <= res.initial_energy + 1e-12);
        assert!(res.sup_distance_to_phi < 0.1, "{}", res.sup_distance_to_phi);
        assert!(res.energy_gap > -1e-8);
        assert!(res.field.is_nonnegative());
    }

    #[test]
    fn free_boundary_of_sampled_solution() {
        let sol = symmetric_solution(0.4).unwrap();
        let tr = Trace::symmetric(&sol);
        let f = homogeneous_extension(grid(64), 0.4, &tr).unwrap();
        let fb = free_boundary_angle(&f);
        assert!(fb.spread.unwrap() <= f.grid.h());
        assert!((fb.mean.unwrap() - sol.phi0).abs() < f.grid.h());
        let positive = AxisymField::from_fn(grid(8), 0.0, |_, _| 1.0).unwrap();
        assert!(free_boundary_angle(&positive).per_radius.is_empty());
    }

    #[test]
    fn comparison_of_symmetric_solution_with_itself() {
        let sol = symmetric_solution(0.2).unwrap();
        let f = homogeneous_extension(grid(48), 0.2, &Trace::symmetric(&sol)).unwrap();
        let cmp = compare_to_symmetric(&f, 0.2).unwrap();
        assert_eq!(cmp.sup_distance, 0.0);
        assert!(cmp.energy_gap >= 0.0 && cmp.energy_gap < 1e-2);
        assert!(cmp.vertex_touch);
        assert!(matches!(compare_to_symmetric(&f, 0.3), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn config_validation() {
        let mut cfg = MinimizeConfig::new(0.1, 16, 16).unwrap();
        cfg.eps_schedule = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        cfg.eps_schedule = vec![1e-4];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn energy_scales_homogeneously() {
        // J(Phi, B_rho) = rho^3 J(Phi, B_1) for the 1-homogeneous interpolant
        let sol = symmetric_solution(0.2).unwrap();
        let tr = Trace::symmetric(&sol);
        let f = homogeneous_extension(grid(64), 0.2, &tr).unwrap();
        let rec = Reconstruction::new(&f, Some(&tr));
        let full = rec.energy_parts(1.0).total();
        let part = rec.energy_parts(0.5).total();
        assert!((part / 0.125 - full).abs() < 2.0 * f.grid.h() * full);
    }
}
