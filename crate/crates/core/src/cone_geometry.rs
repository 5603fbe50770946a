//! Exact geometry of the cone and of spherical caps on the unit sphere.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::check_c;
use crate::numerics::adaptive_simpson;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParam {
    pub c: f64,
    pub one_plus_c2: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl ConeParam {
    pub fn new(c: f64) -> Result<Self> {
        let alpha = homogeneity_exponent(c)?;
        let one_plus_c2 = 1.0 + c * c;
        Ok(Self { c, one_plus_c2, delta: 1.0 / one_plus_c2.sqrt(), alpha })
    }
}

/// Positive root of `alpha (alpha + 1) = 2 / (1 + c^2)`.
pub fn homogeneity_exponent(c: f64) -> Result<f64> {
    check_c(c)?;
    let q = 2.0 / (1.0 + c * c);
    // 2q / (1 + sqrt(1 + 4q)) is the cancellation-free form of (-1 + sqrt(1 + 4q)) / 2.
    Ok(2.0 * q / (1.0 + (1.0 + 4.0 * q).sqrt()))
}

/// Diagonal of the inverse metric in the order (g^rr, g^thth, g^phph).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalMetric {
    pub g_rr: f64,
    pub g_thth: f64,
    pub g_phph: f64,
    pub area_form: f64,
}

pub fn metric_spherical(param: &ConeParam, r: f64, phi: f64) -> Result<SphericalMetric> {
    if !(r > 0.0) {
        return Err(Error::VertexSingularity);
    }
    let s = phi.sin();
    if !(phi > 0.0 && phi < PI) || s <= 0.0 {
        return Err(Error::PoleDegeneracy(phi));
    }
    Ok(SphericalMetric {
        g_rr: 1.0 / param.one_plus_c2,
        g_thth: 1.0 / (r * r * s * s),
        g_phph: 1.0 / (r * r),
        area_form: r * r * s * param.one_plus_c2.sqrt(),
    })
}

/// Inverse metric of the cone pulled back to the projected coordinates x in R^3.
pub fn metric_cartesian(param: &ConeParam, x: [f64; 3]) -> Result<[[f64; 3]; 3]> {
    let r2 = x.iter().map(|v| v * v).sum::<f64>();
    if r2 == 0.0 {
        return Err(Error::VertexSingularity);
    }
    let c2 = param.c * param.c;
    let scale = 1.0 / (param.one_plus_c2 * r2);
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let diag = if i == j { r2 * param.one_plus_c2 } else { 0.0 };
            g[i][j] = scale * (diag - c2 * x[i] * x[j]);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapGeometry {
    pub phi0: f64,
    pub t0: f64,
    #[serde(rename = "H1")]
    pub h1: f64,
    pub kappa: f64,
    #[serde(rename = "areaU")]
    pub area_u: f64,
    #[serde(rename = "areaV")]
    pub area_v: f64,
    pub boundary_length: f64,
    /// Quadrature value of the cap area, kept as an audit of the closed form.
    #[serde(rename = "areaU_quadrature")]
    pub area_u_quadrature: f64,
}

impl CapGeometry {
    /// Gauss–Bonnet residual `areaV + kappa * length - 2 pi`.
    pub fn gauss_bonnet_residual(&self) -> f64 {
        self.area_v + self.kappa * self.boundary_length - 2.0 * PI
    }
}

pub fn cap_geometry(phi0: f64) -> Result<CapGeometry> {
    if !(phi0 > 0.0 && phi0 < PI) {
        return Err(Error::InvalidParameter(format!("cap angle must lie in (0, pi), got {phi0}")));
    }
    let (s, t0) = phi0.sin_cos();
    let area_u = 2.0 * PI * (1.0 - t0);
    let area_u_quadrature = 2.0 * PI * adaptive_simpson(&|p: f64| p.sin(), 0.0, phi0, 1e-13);
    let h1 = -t0 / s;
    Ok(CapGeometry {
        phi0,
        t0,
        h1,
        kappa: h1,
        area_u,
        area_v: 4.0 * PI - area_u,
        boundary_length: 2.0 * PI * s,
        area_u_quadrature,
    })
}

/// Largest slope for which a k-plane through the vertex is area minimizing.
pub fn morgan_threshold(k: u32) -> Result<Option<f64>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("plane dimension k must be >= 2, got {k}")));
    }
    if k == 2 {
        return Ok(None);
    }
    let kf = k as f64;
    Ok(Some((kf - 2.0) / (2.0 * (kf - 1.0).sqrt())))
}

pub fn is_minimizing(k: u32, c: f64) -> Result<bool> {
    check_c(c)?;
    Ok(morgan_threshold(k)?.is_some_and(|t| c <= t))
}
