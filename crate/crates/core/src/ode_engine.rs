//! The separated equation `f'' + cot(phi) f' + lambda f = 0`, with
//! `lambda = beta (beta + 1) / (1 + c^2)`.
//!
//! Integration starts at `phi_eps = 10 * step` from a pole series and runs
//! RK4 in `phi` up to `3 pi / 4`. Beyond that the solution is continued in
//! `s = ln(pi - phi)`, where the equation reads
//! `f_ss + (psi cot psi - 1) f_s + lambda psi^2 f = 0` and is regular at the
//! south pole. Below `psi = 1e-7` the coefficients are negligible and the
//! solution is the straight line `a + b s`. This matters for large `c`, where
//! the first zero sits within `1e-11` of `pi` or closer.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::check_c;
use crate::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;
/// Co-angle `pi - phi` at which integration switches to the log variable.
const SWITCH_CO: f64 = PI / 4.0;
/// Co-angle below which the log-linear tail is used.
const TAIL_CO: f64 = 1e-7;
/// Step-halving agreement required of every profile.
const HALVING_TOL: f64 = 1e-9;

pub fn lambda(beta: f64, c: f64) -> f64 {
    beta * (beta + 1.0) / (1.0 + c * c)
}

/// Pole series coefficients of `f = 1 + a2 phi^2 + a4 phi^4 + a6 phi^6`.
fn series_coeffs(lam: f64) -> [f64; 3] {
    let a2 = -lam / 4.0;
    let a4 = a2 * (2.0 / 3.0 - lam) / 16.0;
    let a6 = ((4.0 / 3.0 - lam) * a4 + 2.0 / 45.0 * a2) / 36.0;
    [a2, a4, a6]
}

fn series(lam: f64, phi: f64) -> (f64, f64) {
    let [a2, a4, a6] = series_coeffs(lam);
    let p2 = phi * phi;
    (1.0 + p2 * (a2 + p2 * (a4 + p2 * a6)), phi * (2.0 * a2 + p2 * (4.0 * a4 + p2 * 6.0 * a6)))
}

/// `psi cot(psi) - 1` without cancellation for small `psi`.
fn psi_cot_minus_one(psi: f64) -> f64 {
    if psi < 1e-2 {
        let p2 = psi * psi;
        -p2 * (1.0 / 3.0 + p2 * (1.0 / 45.0 + p2 * 2.0 / 945.0))
    } else {
        psi * psi.cos() / psi.sin() - 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    /// Independent variable is `phi`.
    Phi,
    /// Independent variable is `s = ln(pi - phi)`, traversed downwards.
    LogCo,
}

/// Uniformly spaced RK4 nodes in one independent variable.
#[derive(Debug, Clone)]
struct Segment {
    var: Var,
    x0: f64,
    /// Signed step in the native variable.
    h: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl Segment {
    fn x(&self, k: usize) -> f64 {
        self.x0 + self.h * k as f64
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn last_x(&self) -> f64 {
        self.x(self.len() - 1)
    }

    /// Position of `x` as (interval index, local coordinate in [0,1]).
    fn locate(&self, x: f64) -> (usize, f64) {
        let u = (x - self.x0) / self.h;
        let k = (u.floor().max(0.0) as usize).min(self.len() - 2);
        (k, (u - k as f64).clamp(0.0, 1.0))
    }

    /// Quintic Hermite value and derivative in the native variable.
    fn hermite(&self, lam: f64, k: usize, t: f64) -> (f64, f64) {
        let h = self.h;
        let (x0, x1) = (self.x(k), self.x(k + 1));
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.dy[k], self.dy[k + 1]);
        let s0 = second(self.var, lam, x0, y0, d0);
        let s1 = second(self.var, lam, x1, y1, d1);
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let b = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ];
        let db = [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ];
        let coef = [y0, h * d0, h * h * s0, y1, h * d1, h * h * s1];
        let v = coef.iter().zip(&b).map(|(a, b)| a * b).sum();
        let dv: f64 = coef.iter().zip(&db).map(|(a, b)| a * b).sum();
        (v, dv / h)
    }
}

/// Second derivative in the native variable, from the equation itself.
fn second(var: Var, lam: f64, x: f64, y: f64, dy: f64) -> f64 {
    match var {
        Var::Phi => -lam * y - x.cos() / x.sin() * dy,
        Var::LogCo => {
            let psi = x.exp();
            -psi_cot_minus_one(psi) * dy - lam * psi * psi * y
        }
    }
}

fn rk4(var: Var, lam: f64, x: f64, y: f64, dy: f64, h: f64) -> (f64, f64) {
    let f = |x: f64, y: f64, d: f64| (d, second(var, lam, x, y, d));
    let (k1y, k1d) = f(x, y, dy);
    let (k2y, k2d) = f(x + 0.5 * h, y + 0.5 * h * k1y, dy + 0.5 * h * k1d);
    let (k3y, k3d) = f(x + 0.5 * h, y + 0.5 * h * k2y, dy + 0.5 * h * k2d);
    let (k4y, k4d) = f(x + h, y + h * k3y, dy + h * k3d);
    (y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y), dy + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d))
}

fn run_segment(var: Var, lam: f64, x0: f64, x1: f64, n: usize, y0: f64, d0: f64) -> Segment {
    let h = (x1 - x0) / n as f64;
    let mut seg = Segment { var, x0, h, y: Vec::with_capacity(n + 1), dy: Vec::with_capacity(n + 1) };
    let (mut y, mut d) = (y0, d0);
    seg.y.push(y);
    seg.dy.push(d);
    for k in 0..n {
        (y, d) = rk4(var, lam, x0 + h * k as f64, y, d, h);
        seg.y.push(y);
        seg.dy.push(d);
    }
    seg
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    Phi(f64),
    Pole,
}

/// A location on the sphere kept both as `phi` and as the co-angle `pi - phi`,
/// which is the accurate representation near the south pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Angle {
    pub phi: f64,
    pub co: f64,
}

impl Angle {
    pub fn from_phi(phi: f64) -> Self {
        Self { phi, co: PI - phi }
    }

    pub fn from_co(co: f64) -> Self {
        Self { phi: PI - co, co }
    }

    pub fn sin(&self) -> f64 {
        if self.phi <= PI / 2.0 {
            self.phi.sin()
        } else {
            self.co.sin()
        }
    }

    pub fn cos(&self) -> f64 {
        if self.phi <= PI / 2.0 {
            self.phi.cos()
        } else {
            -self.co.cos()
        }
    }
}

/// A sampled solution of the separated equation with dense output.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub beta: f64,
    pub c: f64,
    pub lambda: f64,
    pub step: f64,
    /// Pole value `f(0)`.
    pub f0: f64,
    pub normalized: bool,
    pub phi_eps: f64,
    north: Segment,
    south: Option<Segment>,
    /// `(s_t, a, b)`: `f = a + b (s - s_t)` for `s < s_t`.
    tail: Option<(f64, f64, f64)>,
}

fn raw_profile(beta: f64, c: f64, lam: f64, end: End, step: f64, refine: usize) -> RadialProfile {
    let phi_eps = 10.0 * step;
    let (y0, d0) = series(lam, phi_eps);
    let switch = PI - SWITCH_CO;
    let north_end = match end {
        End::Phi(p) if p <= switch => p,
        _ => switch,
    };
    let n = ((north_end - phi_eps) / step).ceil().max(2.0) as usize * refine;
    let north = run_segment(Var::Phi, lam, phi_eps, north_end, n, y0, d0);
    let s_end = match end {
        End::Phi(p) if p <= switch => None,
        End::Phi(p) => Some((PI - p).ln()),
        End::Pole => Some(TAIL_CO.ln()),
    };
    let south = s_end.map(|s_end| {
        let s0 = SWITCH_CO.ln();
        let n = ((s0 - s_end) / step).ceil().max(2.0) as usize * refine;
        let (y, d) = (*north.y.last().unwrap(), *north.dy.last().unwrap());
        run_segment(Var::LogCo, lam, s0, s_end, n, y, -SWITCH_CO * d)
    });
    let tail = match (end, &south) {
        (End::Pole, Some(seg)) => Some((seg.last_x(), *seg.y.last().unwrap(), *seg.dy.last().unwrap())),
        _ => None,
    };
    RadialProfile { beta, c, lambda: lam, step, f0: 1.0, normalized: false, phi_eps, north, south, tail }
}

fn check_halving(a: &RadialProfile, b: &RadialProfile) -> Result<()> {
    let cmp = |s1: &Segment, s2: &Segment| -> f64 {
        (0..s1.len())
            .map(|k| {
                let dy = (s1.y[k] - s2.y[2 * k]).abs() / s1.y[k].abs().max(1.0);
                let dd = (s1.dy[k] - s2.dy[2 * k]).abs() / s1.dy[k].abs().max(1.0);
                dy.max(dd)
            })
            .fold(0.0, f64::max)
    };
    let mut worst = cmp(&a.north, &b.north);
    if let (Some(s1), Some(s2)) = (&a.south, &b.south) {
        worst = worst.max(cmp(s1, s2));
    }
    if worst > HALVING_TOL {
        return Err(Error::ConvergenceFailure(format!(
            "step halving changes the profile by {worst:.3e} (beta={}, c={})",
            a.beta, a.c
        )));
    }
    Ok(())
}

fn build(beta: f64, c: f64, end: End, step: f64) -> Result<RadialProfile> {
    check_c(c)?;
    if !(-1.0..=2.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [-1, 2], got {beta}")));
    }
    build_lambda(beta, c, lambda(beta, c), end, step)
}

fn build_lambda(beta: f64, c: f64, lam: f64, end: End, step: f64) -> Result<RadialProfile> {
    if !lam.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be finite, got {lam}")));
    }
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::InvalidParameter(format!("step must lie in (0, 1e-3], got {step}")));
    }
    if let End::Phi(p) = end {
        if p >= PI {
            return Err(Error::PoleCollision(p));
        }
        if !(p > 10.0 * step) {
            return Err(Error::InvalidParameter(format!("phi_max = {p} is below the series start")));
        }
    }
    let coarse = raw_profile(beta, c, lam, end, step, 1);
    let fine = raw_profile(beta, c, lam, end, step, 2);
    check_halving(&coarse, &fine)?;
    Ok(coarse)
}

/// Integrate from the north pole up to `phi_max < pi`.
pub fn integrate_profile(beta: f64, c: f64, phi_max: f64, step: f64) -> Result<RadialProfile> {
    build(beta, c, End::Phi(phi_max), step)
}

/// Integrate over the whole open interval `(0, pi)`, including the log tail.
pub fn integrate_to_pole(beta: f64, c: f64, step: f64) -> Result<RadialProfile> {
    build(beta, c, End::Pole, step)
}

/// Solve `f'' + cot(phi) f' + lam f = 0` with `f(0) = 1` for a prescribed `lam`,
/// including values not of the form `beta (beta + 1) / (1 + c^2)` with real `beta`.
/// The returned profile has `beta = NaN`.
pub fn integrate_with_lambda(lam: f64, phi_max: f64, step: f64) -> Result<RadialProfile> {
    build_lambda(f64::NAN, f64::NAN, lam, End::Phi(phi_max), step)
}

impl RadialProfile {
    /// Largest angle covered by the profile (`pi` when it carries the pole tail).
    pub fn phi_max(&self) -> Angle {
        match (&self.south, self.tail) {
            (_, Some(_)) => Angle { phi: PI, co: 0.0 },
            (Some(s), None) => Angle::from_co(s.last_x().exp()),
            (None, _) => Angle::from_phi(self.north.last_x()),
        }
    }

    /// Value and `phi`-derivative at `phi`.
    pub fn eval(&self, phi: f64) -> Result<(f64, f64)> {
        if phi > PI - SWITCH_CO && self.south.is_some() {
            return self.eval_co(PI - phi);
        }
        self.eval_north(phi)
    }

    fn eval_north(&self, phi: f64) -> Result<(f64, f64)> {
        if !(phi >= 0.0) || phi > self.north.last_x() * (1.0 + 1e-14) {
            return Err(Error::InvalidParameter(format!("phi = {phi} outside the profile range")));
        }
        if phi < self.phi_eps {
            let (f, fp) = series(self.lambda, phi);
            return Ok((self.f0 * f, self.f0 * fp));
        }
        let (k, t) = self.north.locate(phi);
        Ok(self.north.hermite(self.lambda, k, t))
    }

    /// Value and `phi`-derivative at co-angle `co = pi - phi`.
    pub fn eval_co(&self, co: f64) -> Result<(f64, f64)> {
        let Some(south) = &self.south else {
            return self.eval_north(PI - co);
        };
        if co >= SWITCH_CO {
            return self.eval_north(PI - co);
        }
        if !(co > 0.0) {
            return Err(Error::InvalidParameter(format!("co-angle {co} must be positive")));
        }
        let s = co.ln();
        let (v, vs) = if s >= south.last_x() - 1e-12 * (1.0 + south.last_x().abs()) {
            let (k, t) = south.locate(s);
            south.hermite(self.lambda, k, t)
        } else if let Some((st, a, b)) = self.tail {
            (a + b * (s - st), b)
        } else {
            return Err(Error::InvalidParameter(format!("co-angle {co} outside the profile range")));
        };
        Ok((v, -vs / co))
    }

    /// All node angles, in increasing order.
    pub fn grid(&self) -> Vec<f64> {
        self.nodes().map(|(a, _, _)| a.phi).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.nodes().map(|(_, f, _)| f).collect()
    }

    pub fn derivs(&self) -> Vec<f64> {
        self.nodes().map(|(_, _, fp)| fp).collect()
    }

    /// Nodes as (angle, f, df/dphi).
    pub fn nodes(&self) -> impl Iterator<Item = (Angle, f64, f64)> + '_ {
        let north =
            (0..self.north.len()).map(|k| (Angle::from_phi(self.north.x(k)), self.north.y[k], self.north.dy[k]));
        let south = self.south.iter().flat_map(|s| {
            (1..s.len()).map(move |k| {
                let co = s.x(k).exp();
                (Angle::from_co(co), s.y[k], -s.dy[k] / co)
            })
        });
        north.chain(south)
    }

    /// Multiply the profile by `k`.
    pub fn scaled(&self, k: f64) -> RadialProfile {
        let mut p = self.clone();
        p.f0 *= k;
        for seg in std::iter::once(&mut p.north).chain(p.south.as_mut()) {
            seg.y.iter_mut().for_each(|v| *v *= k);
            seg.dy.iter_mut().for_each(|v| *v *= k);
        }
        if let Some((_, a, b)) = p.tail.as_mut() {
            *a *= k;
            *b *= k;
        }
        p
    }

    /// Largest residual of the equation at interior nodes, with the second
    /// derivative taken by 4th-order centered differences of the dense derivative.
    pub fn ode_residual_max(&self) -> f64 {
        let lam = self.lambda;
        let mut worst: f64 = 0.0;
        let seg = &self.north;
        let h = seg.h;
        let d = |x: f64| seg.hermite(lam, seg.locate(x).0, seg.locate(x).1).1;
        for k in 2..seg.len().saturating_sub(2) {
            let x = seg.x(k);
            let fpp = (-d(x + 2.0 * h) + 8.0 * d(x + h) - 8.0 * d(x - h) + d(x - 2.0 * h)) / (12.0 * h);
            let r = fpp + x.cos() / x.sin() * seg.dy[k] + lam * seg.y[k];
            worst = worst.max(r.abs() / self.f0.abs().max(1e-300));
        }
        if let Some(seg) = &self.south {
            let h = seg.h;
            let d = |x: f64| seg.hermite(lam, seg.locate(x).0, seg.locate(x).1).1;
            for k in 2..seg.len().saturating_sub(2) {
                let x = seg.x(k);
                let psi = x.exp();
                let fss = (-d(x + 2.0 * h) + 8.0 * d(x + h) - 8.0 * d(x - h) + d(x - 2.0 * h)) / (12.0 * h);
                let r = fss + psi_cot_minus_one(psi) * seg.dy[k] + lam * psi * psi * seg.y[k];
                worst = worst.max(r.abs() / self.f0.abs().max(1e-300));
            }
        }
        worst
    }

    /// Columnar text form: `beta=`, `c=`, `step=` header lines, then `phi,f,fp` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("beta={}\nc={}\nstep={}\nphi,f,fp\n", fmt17(self.beta), fmt17(self.c), fmt17(self.step));
        for (a, f, fp) in self.nodes() {
            out.push_str(&format!("{},{},{}\n", fmt17(a.phi), fmt17(f), fmt17(fp)));
        }
        out
    }
}

/// Full double precision, 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Root of the quintic interpolant on interval `k` of `seg`, given a sign change.
fn segment_root(seg: &Segment, lam: f64, k: usize) -> f64 {
    let val = |t: f64| seg.hermite(lam, k, t).0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let flo = val(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (val(mid) > 0.0) == (flo > 0.0) {
            lo = mid
        } else {
            hi = mid
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    seg.x(k) + seg.h * 0.5 * (lo + hi)
}

/// Smallest positive zero of the profile.
pub fn first_zero(profile: &RadialProfile) -> Result<Angle> {
    let lam = profile.lambda;
    let positive = profile.f0 > 0.0;
    let crosses = |seg: &Segment| (0..seg.len() - 1).find(|&k| (seg.y[k + 1] > 0.0) != positive);
    if let Some(k) = crosses(&profile.north) {
        return Ok(Angle::from_phi(segment_root(&profile.north, lam, k)));
    }
    if let Some(seg) = &profile.south {
        if let Some(k) = crosses(seg) {
            return Ok(Angle::from_co(segment_root(seg, lam, k).exp()));
        }
    }
    if let Some((st, a, b)) = profile.tail {
        if b != 0.0 && a / b > 0.0 {
            let co = (st - a / b).exp();
            if co > 0.0 {
                return Ok(Angle::from_co(co));
            }
        }
    }
    Err(Error::NoZero(profile.phi_max().phi))
}

/// The symmetric 1-homogeneous solution `r f(phi)` with `f'(phi0) = -1`.
#[derive(Debug, Clone)]
pub struct SymmetricSolution {
    pub c: f64,
    pub profile: RadialProfile,
    pub zero: Angle,
    pub phi0: f64,
    pub t0: f64,
    pub h1: f64,
    pub slope_at_zero: f64,
}

impl SymmetricSolution {
    /// `f` clamped at zero beyond the free boundary, with its derivative.
    pub fn eval_clamped(&self, phi: f64) -> (f64, f64) {
        if phi >= self.phi0 {
            return (0.0, 0.0);
        }
        self.profile.eval(phi).map(|(f, fp)| if f > 0.0 { (f, fp) } else { (0.0, 0.0) }).unwrap_or((0.0, 0.0))
    }
}

/// Rescale so that the profile crosses its first zero with slope -1.
pub fn normalize(profile: &RadialProfile) -> Result<RadialProfile> {
    let zero = first_zero(profile)?;
    let (_, slope) = profile.eval_co(zero.co)?;
    if !(slope < 0.0) {
        return Err(Error::PropertyViolation(format!("slope at the first zero is {slope}, expected < 0")));
    }
    let mut p = profile.scaled(-1.0 / slope);
    p.normalized = true;
    Ok(p)
}

pub fn symmetric_solution(c: f64) -> Result<SymmetricSolution> {
    symmetric_solution_with_step(c, DEFAULT_STEP)
}

pub fn symmetric_solution_with_step(c: f64, step: f64) -> Result<SymmetricSolution> {
    let raw = integrate_to_pole(1.0, c, step)?;
    let profile = normalize(&raw)?;
    let zero = first_zero(&profile)?;
    let (_, slope) = profile.eval_co(zero.co)?;
    let t0 = zero.cos();
    let h1 = -t0 / zero.sin();
    Ok(SymmetricSolution { c, profile, zero, phi0: zero.phi, t0, h1, slope_at_zero: slope })
}

/// The `beta = -1/2` comparison profile with `g(0) = 1`, checked for `g > 0`, `g' >= 0`.
pub fn beta_half_profile(c: f64) -> Result<RadialProfile> {
    beta_half_profile_with_step(c, DEFAULT_STEP)
}

pub fn beta_half_profile_with_step(c: f64, step: f64) -> Result<RadialProfile> {
    let g = integrate_to_pole(-0.5, c, step)?;
    for (a, v, d) in g.nodes() {
        if !(v > 0.0) || d < 0.0 {
            return Err(Error::PropertyViolation(format!("beta=-1/2 profile has g={v}, g'={d} at phi={}", a.phi)));
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    pub c1: f64,
    pub c2: f64,
    /// Minimum of `g1'/g1 - g2'/g2` over the compared nodes.
    pub min_margin: f64,
    pub worst_phi: f64,
    pub log_derivative_ordered: bool,
    pub values_ordered: bool,
}

/// Compare the log-derivatives of the `beta = -1/2` profiles at `c1 <= c2`.
pub fn log_derivative_ordering(c1: f64, c2: f64) -> Result<OrderingReport> {
    if c1 > c2 {
        return Err(Error::InvalidParameter(format!("need c1 <= c2, got {c1} > {c2}")));
    }
    let g1 = beta_half_profile(c1)?;
    let g2 = beta_half_profile(c2)?;
    let eps = g1.phi_eps;
    let mut min_margin = f64::INFINITY;
    let mut worst_phi = f64::NAN;
    let mut values_ordered = true;
    for ((a, v1, d1), (_, v2, d2)) in g1.nodes().zip(g2.nodes()) {
        if a.phi <= eps || a.co < eps {
            continue;
        }
        let m = d1 / v1 - d2 / v2;
        if m < min_margin {
            min_margin = m;
            worst_phi = a.phi;
        }
        values_ordered &= v1 >= v2;
    }
    Ok(OrderingReport { c1, c2, min_margin, worst_phi, log_derivative_ordered: min_margin >= -1e-8, values_ordered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Gauss hypergeometric 2F1(a, b; 1; z) by its power series, |z| < 1.
    fn hyp2f1_c1(a: f64, b: f64, z: f64) -> f64 {
        let (mut term, mut sum) = (1.0, 1.0);
        for n in 0..20_000 {
            let nf = n as f64;
            term *= (a + nf) * (b + nf) / ((nf + 1.0) * (nf + 1.0)) * z;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    }

    /// Legendre function P_nu(cos phi), an independent solution oracle.
    fn legendre_p(nu: f64, phi: f64) -> f64 {
        hyp2f1_c1(-nu, nu + 1.0, (1.0 - phi.cos()) / 2.0)
    }

    fn nu_for(beta: f64, c: f64) -> f64 {
        let lam = lambda(beta, c);
        // nu (nu + 1) = lam
        (-1.0 + (1.0 + 4.0 * lam).sqrt()) / 2.0
    }

    #[test]
    fn flat_profile_is_cosine() {
        let p = integrate_profile(1.0, 0.0, 0.9 * PI, DEFAULT_STEP).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=2000 {
            let phi = 0.9 * PI * i as f64 / 2000.0;
            let (f, fp) = p.eval(phi).unwrap();
            worst = worst.max((f - phi.cos()).abs()).max((fp + phi.sin()).abs());
        }
        assert!(worst < 1e-8, "{worst}");
        let z = first_zero(&p).unwrap();
        assert!((z.phi - PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn profiles_match_legendre_oracle() {
        for &(beta, c) in &[(1.0, 1.0), (1.0, 0.3), (-0.5, 0.0), (-0.5, 2.0), (2.0, 0.7), (-1.0, 0.4)] {
            let p = integrate_to_pole(beta, c, DEFAULT_STEP).unwrap();
            let nu = nu_for(beta, c);
            for i in 1..=90 {
                let phi = 0.9 * PI * i as f64 / 90.0;
                let (f, _) = p.eval(phi).unwrap();
                let exact = legendre_p(nu, phi);
                assert!((f - exact).abs() < 1e-9 * exact.abs().max(1.0), "beta={beta} c={c} phi={phi}: {f} vs {exact}");
            }
        }
    }

    #[test]
    fn beta_half_matches_pole_series_to_sixth_order() {
        let g = beta_half_profile(0.0).unwrap();
        let lam = -0.25;
        let [a2, a4, a6] = series_coeffs(lam);
        for &phi in &[0.02, 0.05, 0.1] {
            let (f, _) = g.eval(phi).unwrap();
            let s = 1.0 + a2 * phi.powi(2) + a4 * phi.powi(4) + a6 * phi.powi(6);
            assert!((f - s).abs() < 1e-10, "{phi}: {}", f - s);
        }
        // g'' + cot g' = g / 4
        assert!(g.ode_residual_max() < 1e-8);
        let (_, d) = g.eval(g.phi_eps).unwrap();
        assert!(d >= 0.0);
    }

    #[test]
    fn residual_small_for_sample_profiles() {
        let p = integrate_to_pole(1.0, 1.0, DEFAULT_STEP).unwrap();
        assert!(p.ode_residual_max() < 1e-8, "{}", p.ode_residual_max());
    }

    #[test]
    fn pole_collision_and_bad_step() {
        assert!(matches!(integrate_profile(1.0, 0.0, PI, 1e-3), Err(Error::PoleCollision(_))));
        assert!(integrate_profile(1.0, 0.0, 1.0, 2e-3).is_err());
        assert!(integrate_profile(3.0, 0.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn no_zero_when_range_too_short() {
        let p = integrate_profile(1.0, 1.0, 1.2, DEFAULT_STEP).unwrap();
        assert!(matches!(first_zero(&p), Err(Error::NoZero(_))));
    }

    #[test]
    fn first_zero_anchors() {
        // Oracle values from an independent high-precision shooting computation.
        for &(c, phi0) in
            &[(0.05, 1.57246145928572), (0.1, 1.57743853382097), (0.5, 1.72369766513671), (1.0, 2.0664612598766)]
        {
            let s = symmetric_solution(c).unwrap();
            assert!((s.phi0 - phi0).abs() < 1e-10, "c={c}: {} vs {phi0}", s.phi0);
        }
        // step halving agreement
        let a = symmetric_solution_with_step(1.0, 1e-3).unwrap().phi0;
        let b = symmetric_solution_with_step(1.0, 5e-4).unwrap().phi0;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn zero_moves_toward_south_pole_for_large_c() {
        let s = symmetric_solution(50.0).unwrap();
        assert!((s.t0 + 1.0).abs() < 0.05);
        assert!(s.zero.co > 0.0 && s.zero.co < 1e-100);
        let s = symmetric_solution(10.0).unwrap();
        assert!(s.zero.co < 1e-9);
    }

    #[test]
    fn symmetric_solution_invariants() {
        let s = symmetric_solution(0.0).unwrap();
        assert!((s.phi0 - PI / 2.0).abs() < 1e-8 && s.h1.abs() < 1e-8);
        for c in [0.5, 2.0] {
            let s = symmetric_solution(c).unwrap();
            assert!((s.slope_at_zero + 1.0).abs() < 1e-12);
            for (a, f, _) in s.profile.nodes() {
                if a.phi < s.phi0 {
                    assert!(f > 0.0);
                }
            }
            // |grad_c Phi_c|^2 = f^2/(1+c^2) + f'^2 = 1 at phi0
            let (f, fp) = s.profile.eval_co(s.zero.co).unwrap();
            assert!((f * f / (1.0 + c * c) + fp * fp - 1.0).abs() < 1e-10);
            assert!(s.phi0 > PI / 2.0);
            let t = s.t0;
            assert!((s.h1 - t.abs() / (1.0 - t * t).sqrt()).abs() < 1e-12);
        }
        assert!(symmetric_solution(2.0).unwrap().phi0 > symmetric_solution(0.5).unwrap().phi0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let s = symmetric_solution(0.7).unwrap();
        let again = normalize(&s.profile).unwrap();
        for (x, y) in s.profile.values().iter().zip(again.values()) {
            assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0));
        }
    }

    #[test]
    fn beta_half_positive_at_phi0() {
        let s = symmetric_solution(0.3).unwrap();
        let g = beta_half_profile(0.3).unwrap();
        assert!(g.eval_co(s.zero.co).unwrap().0 > 0.0);
    }

    #[test]
    fn log_derivative_ordering_examples() {
        let r = log_derivative_ordering(0.0, 0.5).unwrap();
        assert!(r.log_derivative_ordered && r.values_ordered);
        let r = log_derivative_ordering(0.1, 1.0).unwrap();
        assert!(r.log_derivative_ordered && r.min_margin > -1e-8);
        let r = log_derivative_ordering(0.4, 0.4).unwrap();
        assert_eq!(r.min_margin, 0.0);
        assert!(log_derivative_ordering(1.0, 0.5).is_err());
    }

    #[test]
    fn phi0_scan_is_monotone_on_sample_grid() {
        let phis: Vec<f64> = (0..=20).map(|i| symmetric_solution(i as f64 * 0.25).unwrap().phi0).collect();
        assert!(phis.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn text_format_has_header_and_rows() {
        let p = integrate_profile(1.0, 0.0, 0.5, DEFAULT_STEP).unwrap();
        let text = p.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("beta=") && lines[1].starts_with("c=") && lines[2].starts_with("step="));
        assert_eq!(lines.len(), 4 + p.grid().len());
        let first: Vec<f64> = lines[4].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], p.phi_eps);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn continuity_in_c(c in 0.0f64..10.0, beta in prop::sample::select(vec![-0.5, 1.0])) {
            let a = integrate_to_pole(beta, c, DEFAULT_STEP).unwrap();
            let b = integrate_to_pole(beta, c + 1e-4, DEFAULT_STEP).unwrap();
            let worst = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(worst <= 1e-2);
        }

        #[test]
        fn residual_and_series_start(c in 0.0f64..10.0, beta in -1.0f64..2.0) {
            let p = integrate_to_pole(beta, c, DEFAULT_STEP).unwrap();
            prop_assert!(p.ode_residual_max() <= 1e-8);
            let (f, _) = p.eval(p.phi_eps).unwrap();
            let lam = p.lambda;
            prop_assert!((f - (1.0 - lam * p.phi_eps.powi(2) / 4.0)).abs() < 1e-6 * lam.abs().max(1.0));
        }
    }
}
