//! Axisymmetric fields on the tensor grid `r_i = i / Nr` (i = 1..Nr), `phi_j`
//! uniform on `[0, pi]` including both poles, with a finite-volume
//! discretization of the Laplace–Beltrami operator of the cone.
//!
//! Radial faces carry the weight `r_i r_{i+1}`, which makes the stencil exact
//! on `r` and `r^2` and gives the innermost ring a zero-weight face towards the
//! vertex. Angular faces carry `sin(phi_{j +- 1/2})`, so the pole rows need no
//! special treatment.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::check_c;
use crate::numerics::{bicgstab, pcg, CsrMatrix, SolveStats};
use crate::ode_engine::fmt17;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisymGrid {
    pub nr: usize,
    pub nphi: usize,
}

impl AxisymGrid {
    pub fn new(nr: usize, nphi: usize) -> Result<Self> {
        if nr < 3 || nphi < 3 {
            return Err(Error::InvalidParameter(format!("grid must be at least 3x3, got {nr}x{nphi}")));
        }
        Ok(Self { nr, nphi })
    }

    pub fn dr(&self) -> f64 {
        1.0 / self.nr as f64
    }

    pub fn dphi(&self) -> f64 {
        PI / (self.nphi - 1) as f64
    }

    pub fn r_min(&self) -> f64 {
        self.dr()
    }

    pub fn r(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.nr as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        if j == self.nphi - 1 {
            PI
        } else {
            j as f64 * self.dphi()
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nphi + j
    }

    pub fn len(&self) -> usize {
        self.nr * self.nphi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Larger of the two spacings.
    pub fn h(&self) -> f64 {
        self.dr().max(self.dphi())
    }

    /// `int sin(phi) dphi` over the dual cell of column `j`.
    pub fn dual_sin(&self, j: usize) -> f64 {
        let h = 0.5 * self.dphi();
        let lo = (self.phi(j) - h).max(0.0);
        let hi = (self.phi(j) + h).min(PI);
        lo.cos() - hi.cos()
    }

    /// `sin(phi_{j+1/2})`.
    pub fn face_sin(&self, j: usize) -> f64 {
        ((j as f64 + 0.5) * self.dphi()).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisymField {
    pub grid: AxisymGrid,
    pub c: f64,
    /// Row-major: index `i * nphi + j`.
    pub values: Vec<f64>,
    pub dirichlet: Vec<bool>,
}

impl AxisymField {
    /// Sample `u(r, phi)`; the outer ring `r = 1` is marked Dirichlet.
    pub fn from_fn(grid: AxisymGrid, c: f64, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_c(c)?;
        let mut values = Vec::with_capacity(grid.len());
        let mut dirichlet = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.nphi {
                values.push(u(grid.r(i), grid.phi(j)));
                dirichlet.push(i == grid.nr - 1);
            }
        }
        Ok(Self { grid, c, values, dirichlet })
    }

    pub fn zeros(grid: AxisymGrid, c: f64) -> Result<Self> {
        Self::from_fn(grid, c, |_, _| 0.0)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation in `(r, phi)`; linear towards the vertex below `r_min`.
    pub fn sample(&self, r: f64, phi: f64) -> f64 {
        let g = &self.grid;
        let phi = phi.clamp(0.0, PI);
        let v = phi / g.dphi();
        let j = (v.floor() as usize).min(g.nphi - 2);
        let tp = v - j as f64;
        let col = |i: usize| self.at(i, j) * (1.0 - tp) + self.at(i, j + 1) * tp;
        if r <= g.r_min() {
            return col(0) * r / g.r_min();
        }
        let u = (r * g.nr as f64 - 1.0).min((g.nr - 1) as f64);
        let i = (u.floor() as usize).min(g.nr - 2);
        let tr = u - i as f64;
        col(i) * (1.0 - tr) + col(i + 1) * tr
    }

    /// Text snapshot: `Nr`, `Nphi`, `r_min`, `c` header lines, then row-major values.
    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut out = format!("Nr={}\nNphi={}\nr_min={}\nc={}\n", g.nr, g.nphi, fmt17(g.r_min()), fmt17(self.c));
        for i in 0..g.nr {
            let row: Vec<String> = (0..g.nphi).map(|j| fmt17(self.at(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidParameter(format!("field snapshot: {m}"));
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected {key}=")))
        };
        let nr: usize = header("Nr")?.parse().map_err(|_| bad("Nr"))?;
        let nphi: usize = header("Nphi")?.parse().map_err(|_| bad("Nphi"))?;
        let _r_min: f64 = header("r_min")?.parse().map_err(|_| bad("r_min"))?;
        let c: f64 = header("c")?.parse().map_err(|_| bad("c"))?;
        let grid = AxisymGrid::new(nr, nphi)?;
        let mut field = AxisymField::zeros(grid, c)?;
        let mut count = 0;
        for (i, line) in lines.filter(|l| !l.is_empty()).enumerate() {
            for (j, v) in line.split(',').enumerate() {
                if i >= nr || j >= nphi {
                    return Err(bad("too many values"));
                }
                field.values[grid.idx(i, j)] = v.trim().parse().map_err(|_| bad("value"))?;
                count += 1;
            }
        }
        if count != grid.len() {
            return Err(bad("wrong number of values"));
        }
        Ok(field)
    }

    /// CSV with columns `r,phi,u`.
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut out = String::from("r,phi,u\n");
        for i in 0..g.nr {
            for j in 0..g.nphi {
                out.push_str(&format!("{},{},{}\n", fmt17(g.r(i)), fmt17(g.phi(j)), fmt17(self.at(i, j))));
            }
        }
        out
    }
}

/// Discrete `Delta_c u` at every node; the outer ring `r = 1` carries 0.
pub fn apply_laplace_beltrami(field: &AxisymField) -> Vec<f64> {
    let g = &field.grid;
    let k = 1.0 / (1.0 + field.c * field.c);
    let (dr, dphi) = (g.dr(), g.dphi());
    let mut out = vec![0.0; g.len()];
    for i in 0..g.nr - 1 {
        let r = g.r(i);
        for j in 0..g.nphi {
            let u = field.at(i, j);
            let mut radial = g.r(i + 1) * r * (field.at(i + 1, j) - u);
            if i > 0 {
                radial -= g.r(i - 1) * r * (u - field.at(i - 1, j));
            }
            let mut ang = 0.0;
            if j + 1 < g.nphi {
                ang += g.face_sin(j) * (field.at(i, j + 1) - u);
            }
            if j > 0 {
                ang -= g.face_sin(j - 1) * (u - field.at(i, j - 1));
            }
            out[g.idx(i, j)] = k * radial / (r * r * dr * dr) + ang / (r * r * dphi * g.dual_sin(j));
        }
    }
    out
}

/// Region on which a Dirichlet problem is posed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Every grid node; the field's Dirichlet mask fixes the boundary.
    Grid,
    /// `{r cos(phi) > cos_cut}` inside the grid, with zero data on the plane
    /// `x3 = cos_cut`. Cut edges use boundary distances in the stencil.
    HalfSpaceCut { cos_cut: f64 },
}

impl Domain {
    fn contains(&self, r: f64, phi: f64) -> bool {
        match *self {
            Domain::Grid => true,
            Domain::HalfSpaceCut { cos_cut } => r * phi.cos() > cos_cut,
        }
    }
}

/// Result of a Dirichlet solve.
#[derive(Debug, Clone)]
pub struct DirichletSolution {
    pub field: AxisymField,
    /// Nodes inside the domain (outside nodes carry 0).
    pub inside: Vec<bool>,
    pub stats: SolveStats,
}

/// Solve `Delta_c u = 0` at the free nodes of `domain`, keeping Dirichlet nodes.
pub fn dirichlet_solve(field: &AxisymField, domain: &Domain) -> Result<DirichletSolution> {
    let g = field.grid;
    let k = 1.0 / (1.0 + field.c * field.c);
    let (dr, dphi) = (g.dr(), g.dphi());
    let inside: Vec<bool> = (0..g.len()).map(|n| domain.contains(g.r(n / g.nphi), g.phi(n % g.nphi))).collect();
    let mut values = field.values.clone();
    let mut dirichlet = field.dirichlet.clone();
    for n in 0..g.len() {
        if !inside[n] {
            values[n] = 0.0;
            dirichlet[n] = true;
        }
    }
    let mut unknown = vec![usize::MAX; g.len()];
    let mut count = 0;
    for n in 0..g.len() {
        if !dirichlet[n] {
            unknown[n] = count;
            count += 1;
        }
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
    let mut rhs = vec![0.0; count];
    for i in 0..g.nr {
        for j in 0..g.nphi {
            let n = g.idx(i, j);
            let row = unknown[n];
            if row == usize::MAX {
                continue;
            }
            let r = g.r(i);
            let mut diag = 0.0;
            let mut links: Vec<(usize, f64)> = Vec::with_capacity(4);
            // Each axis collects its two faces; a face cut by the plane links to
            // the boundary point (zero data) at fraction theta of the spacing, and
            // both faces of a cut axis are scaled by 2 / (theta_a + theta_b)
            // (Shortley-Weller).
            let axis = |faces: &[(Option<usize>, f64, f64)], links: &mut Vec<(usize, f64)>, diag: &mut f64| {
                let thetas: Vec<f64> = faces.iter().map(|f| f.2).collect();
                let scale = if faces.len() == 2 && thetas.iter().any(|&t| t < 1.0) {
                    2.0 / (thetas[0] + thetas[1])
                } else {
                    1.0
                };
                for &(nb, w, theta) in faces {
                    match nb {
                        Some(nb) => links.push((nb, scale * w)),
                        None => *diag += scale * w / theta,
                    }
                }
            };
            let cut = |nb: usize| !inside[nb];
            let mut radial = vec![];
            for (ii, rr) in [
                (i + 1, if i + 1 < g.nr { g.r(i + 1) } else { 0.0 }),
                (i.wrapping_sub(1), if i > 0 { g.r(i - 1) } else { 0.0 }),
            ] {
                if ii >= g.nr {
                    continue;
                }
                let nb = g.idx(ii, j);
                if !cut(nb) {
                    radial.push((Some(nb), k * r * rr / dr * g.dual_sin(j), 1.0));
                } else if let Domain::HalfSpaceCut { cos_cut } = domain {
                    // boundary point on the ray: r* cos(phi) = cos_cut
                    let rc = cos_cut / g.phi(j).cos();
                    let theta = ((rc - r) / (rr - r)).clamp(1e-3, 1.0);
                    radial.push((None, k * r * rc / dr * g.dual_sin(j), theta));
                }
            }
            axis(&radial, &mut links, &mut diag);
            let mut angular = vec![];
            for (jj, fs) in [(j + 1, j), (j.wrapping_sub(1), j.wrapping_sub(1))] {
                if jj >= g.nphi {
                    continue;
                }
                let nb = g.idx(i, jj);
                let base = dr * g.face_sin(fs) / dphi;
                if !cut(nb) {
                    angular.push((Some(nb), base, 1.0));
                } else if let Domain::HalfSpaceCut { cos_cut } = domain {
                    let pc = (cos_cut / r).clamp(-1.0, 1.0).acos();
                    let theta = ((pc - g.phi(j)) / (g.phi(jj) - g.phi(j))).clamp(1e-3, 1.0);
                    angular.push((None, base, theta));
                }
            }
            axis(&angular, &mut links, &mut diag);
            for (nb, w) in links {
                diag += w;
                if unknown[nb] == usize::MAX {
                    rhs[row] += w * values[nb];
                } else {
                    rows[row].push((unknown[nb], -w));
                }
            }
            rows[row].push((row, diag));
        }
    }
    let a = CsrMatrix::from_rows(rows);
    let mut x: Vec<f64> = (0..g.len()).filter(|&n| unknown[n] != usize::MAX).map(|n| values[n]).collect();
    let solver = match domain {
        Domain::Grid => pcg,
        Domain::HalfSpaceCut { .. } => bicgstab,
    };
    let stats = solver(&a, &rhs, &mut x, 1e-10, 50 * count.max(100))
        .map_err(|e| Error::ConvergenceFailure(format!("Dirichlet solve on {}x{} grid: {e}", g.nr, g.nphi)))?;
    for n in 0..g.len() {
        if unknown[n] != usize::MAX {
            values[n] = x[unknown[n]];
        }
    }
    Ok(DirichletSolution { field: AxisymField { grid: g, c: field.c, values, dirichlet }, inside, stats })
}

/// `|grad_c u|^2 = u_r^2 / (1 + c^2) + u_phi^2 / r^2` at a node, by second-order
/// differences. Next to a zero neighbour of a positive node the differences are
/// taken one-sided from the positive side.
pub fn gradient_c(field: &AxisymField, i: usize, j: usize) -> f64 {
    let g = &field.grid;
    let u = |i: usize, j: usize| field.at(i, j);
    let here = u(i, j);
    let usable = |v: f64| !(here > 0.0 && v <= 0.0);
    let d1 = |h: f64, prev: Option<(f64, f64)>, next: Option<(f64, f64)>| -> f64 {
        // prev = (u_{-1}, u_{-2}), next = (u_{+1}, u_{+2}); None when unavailable
        match (prev, next) {
            (Some((m1, _)), Some((p1, _))) if usable(m1) && usable(p1) => (p1 - m1) / (2.0 * h),
            (_, Some((p1, p2))) if usable(p1) && usable(p2) => (-3.0 * here + 4.0 * p1 - p2) / (2.0 * h),
            (Some((m1, m2)), _) if usable(m1) && usable(m2) => (3.0 * here - 4.0 * m1 + m2) / (2.0 * h),
            (_, Some((p1, _))) => (p1 - here) / h,
            (Some((m1, _)), _) => (here - m1) / h,
            _ => 0.0,
        }
    };
    let r = g.r(i);
    let prev_r = (i >= 2).then(|| (u(i - 1, j), u(i - 2, j)));
    // towards the vertex the field is extrapolated linearly: u(0) = 0
    let prev_r = prev_r.or_else(|| (i == 1).then(|| (u(0, j), 0.0)));
    let next_r = (i + 2 < g.nr).then(|| (u(i + 1, j), u(i + 2, j)));
    let next_r = next_r.or_else(|| (i + 1 < g.nr).then(|| (u(i + 1, j), 2.0 * u(i + 1, j) - here)));
    let ur = if i == 0 { d1(g.dr(), Some((0.0, -here)), next_r) } else { d1(g.dr(), prev_r, next_r) };
    let uphi = if j == 0 || j == g.nphi - 1 {
        0.0
    } else {
        let prev = (j >= 2).then(|| (u(i, j - 1), u(i, j - 2))).or(Some((u(i, j - 1), u(i, j))));
        let next = (j + 2 < g.nphi).then(|| (u(i, j + 1), u(i, j + 2))).or(Some((u(i, j + 1), u(i, j))));
        d1(g.dphi(), prev, next)
    };
    ur * ur / (1.0 + field.c * field.c) + uphi * uphi / (r * r)
}
