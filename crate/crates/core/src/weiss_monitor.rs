//! Weiss monotonicity functional
//! `W(r) = r^-3 int_{C_r} |grad_c u|^2 + chi{u>0} - r^-4 int_{dC_r} u^2`
//! on discrete axisymmetric fields.
//!
//! The boundary integral uses the induced measure on the geodesic sphere
//! through projected radius `r`, so that `W` equals the intrinsic Weiss
//! functional of the cone divided by `(1+c^2)^(-3/2)`.

use serde::Serialize;
use std::f64::consts::PI;

use crate::elliptic_grid::AxisymField;
use crate::fbp_minimizer::Reconstruction;
use crate::{Error, Result};

/// `W(r, u)` for `r` in `(2 r_min, 1)`.
pub fn weiss(field: &AxisymField, r: f64) -> Result<f64> {
    let g = field.grid;
    if !(r > 2.0 * g.r_min() && r < 1.0) {
        return Err(Error::InvalidParameter(format!("radius {r} outside ({}, 1)", 2.0 * g.r_min())));
    }
    let rec = Reconstruction::new(field, None);
    Ok(weiss_with(&rec, field.c, r))
}

fn weiss_with(rec: &Reconstruction<'_>, c: f64, r: f64) -> f64 {
    let bulk = rec.energy_parts(r).total();
    let boundary = 2.0 * PI * r * r * rec.sphere_l2(r) / (1.0 + c * c).sqrt();
    bulk / r.powi(3) - boundary / r.powi(4)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeissTrace {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Most negative increment between consecutive radii, or 0.
    pub monotone_violation: f64,
    /// Whether `max W - min W <= 5h`.
    pub homogeneity_flag: bool,
    pub tolerance: f64,
}

impl WeissTrace {
    /// Monotone up to the homogeneity tolerance.
    pub fn is_monotone(&self) -> bool {
        self.monotone_violation >= -self.tolerance
    }

    pub fn variation(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,W\n");
        for (r, w) in self.radii.iter().zip(&self.values) {
            s.push_str(&format!("{r:.16e},{w:.16e}\n"));
        }
        s
    }
}

/// Log-spaced radii in `[max(0.1, 3 r_min), 0.9]`.
pub fn log_radii(field: &AxisymField, num_radii: usize) -> Vec<f64> {
    let lo = (3.0 * field.grid.r_min()).max(0.1).ln();
    let hi = 0.9f64.ln();
    (0..num_radii).map(|k| (lo + (hi - lo) * k as f64 / (num_radii - 1) as f64).exp()).collect()
}

pub fn weiss_trace(field: &AxisymField, num_radii: usize) -> Result<WeissTrace> {
    if num_radii < 4 {
        return Err(Error::InvalidParameter(format!("need at least 4 radii, got {num_radii}")));
    }
    let radii = log_radii(field, num_radii);
    let rec = Reconstruction::new(field, None);
    let values: Vec<f64> = radii.iter().map(|&r| weiss_with(&rec, field.c, r)).collect();
    let monotone_violation = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::min);
    let tolerance = 5.0 * field.grid.h();
    let mut trace = WeissTrace { radii, values, monotone_violation, homogeneity_flag: false, tolerance };
    trace.homogeneity_flag = trace.variation() <= tolerance;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic_grid::AxisymGrid;
    use crate::fbp_minimizer::{homogeneous_extension, Trace};
    use crate::ode_engine::symmetric_solution;

    fn grid() -> AxisymGrid {
        AxisymGrid::new(64, 65).unwrap()
    }

    #[test]
    fn zero_field() {
        let f = AxisymField::zeros(grid(), 0.4).unwrap();
        for r in [0.1, 0.5, 0.9] {
            assert_eq!(weiss(&f, r).unwrap(), 0.0);
        }
        assert!(weiss(&f, 1.0).is_err());
        assert!(weiss(&f, 0.01).is_err());
        assert!(weiss_trace(&f, 3).is_err());
    }

    #[test]
    fn half_space_value() {
        let tr = Trace::clamped_cosine();
        let f = homogeneous_extension(grid(), 0.0, &tr).unwrap();
        let t = weiss_trace(&f, 12).unwrap();
        assert!(t.homogeneity_flag);
        for w in &t.values {
            assert!((w - 2.0 * PI / 3.0).abs() < 5.0 * f.grid.h(), "{w}");
        }
    }

    #[test]
    fn symmetric_solution_is_homogeneous() {
        for c in [0.1, 0.5, 2.0] {
            let sol = symmetric_solution(c).unwrap();
            let f = homogeneous_extension(grid(), c, &Trace::symmetric(&sol)).unwrap();
            let t = weiss_trace(&f, 10).unwrap();
            assert!(t.homogeneity_flag, "c={c} variation {}", t.variation());
            assert!(t.radii.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn quadratic_perturbation_increases() {
        let c = 0.3;
        let sol = symmetric_solution(c).unwrap();
        let tr = Trace::symmetric(&sol);
        let f = AxisymField::from_fn(grid(), c, |r, phi| {
            let v = r * tr.value(phi);
            if v > 0.0 {
                v + 0.1 * r * r * phi.cos()
            } else {
                0.0
            }
        })
        .unwrap();
        let t = weiss_trace(&f, 10).unwrap();
        assert!(t.values.windows(2).all(|w| w[1] > w[0]), "{:?}", t.values);
    }

    #[test]
    fn bump_breaks_monotonicity() {
        let c = 0.3;
        let sol = symmetric_solution(c).unwrap();
        let tr = Trace::symmetric(&sol);
        let f = AxisymField::from_fn(grid(), c, |r, phi| {
            r * tr.value(phi) + 0.5 * (-((r - 0.5) / 0.05).powi(2)).exp() * tr.value(phi)
        })
        .unwrap();
        let t = weiss_trace(&f, 24).unwrap();
        assert!(!t.is_monotone(), "{}", t.monotone_violation);
    }

    #[test]
    fn rescaling_identity() {
        // W(rho s, u) = W(rho, u_s) with u_s(x) = u(s x) / s
        let c = 0.2;
        let f = AxisymField::from_fn(grid(), c, |r, phi| (r * phi.cos() + 0.3 * r * r).max(0.0)).unwrap();
        let s = 0.8;
        let us = AxisymField::from_fn(grid(), c, |r, phi| f.sample(s * r, phi) / s).unwrap();
        for rho in [0.3, 0.5, 0.7] {
            let a = weiss(&f, rho * s).unwrap();
            let b = weiss(&us, rho).unwrap();
            assert!((a - b).abs() < 5.0 * f.grid.h(), "{a} {b}");
        }
    }
}
