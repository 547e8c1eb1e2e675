//! Madelung decomposition ψ = R e^{iS} into density, velocity, current,
//! quantum potential and effective potential, plus flow diagnostics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Boundary, Grid, Grid1D};
use crate::io;
use crate::ops::{self, map_lines};
use crate::potential::Potential;

/// Relative density below which a node is treated as a node of ψ.
pub const EPS_NODE: f64 = 1e-12;

/// Discretization of ∇²R/R.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QStencil {
    /// Central differences of ln R built from neighbour ratios. Exact on
    /// Gaussians and invariant under ρ → cρ.
    #[default]
    LogRatio,
    /// Plain 3-point stencil (R₊ + R₋ − 2R)/(h²R), consistent with the
    /// finite-difference Hamiltonian.
    Amplitude,
}

#[derive(Clone, Debug)]
pub struct HydroFields {
    pub rho: RealField,
    pub velocity: Vec<RealField>,
    pub current: Vec<RealField>,
    pub q_potential: RealField,
    pub v_eff: RealField,
    pub node_mask: Vec<bool>,
    pub mass: f64,
    pub eps_node: f64,
}

impl HydroFields {
    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn mask_count(&self) -> usize {
        self.node_mask.iter().filter(|m| **m).count()
    }

    pub fn is_masked(&self, k: usize) -> bool {
        self.node_mask[k]
    }
}

pub fn node_mask(rho: &RealField, eps_node: f64) -> Vec<bool> {
    let cut = eps_node * rho.max();
    rho.values().iter().map(|r| !(*r >= cut) || *r <= 0.0).collect()
}

/// Probability current (1/m) Im(ψ* ∂ψ) along every axis.
pub fn current(psi: &ComplexField, mass: f64) -> Vec<RealField> {
    (0..psi.grid().dims())
        .map(|axis| {
            let d = ops::gradient(psi, axis).expect("axis < dims");
            psi.zip_map(&d, |p, dp| (p.conj() * dp).im / mass).expect("same grid")
        })
        .collect()
}

pub fn decompose(psi: &ComplexField, potential: &dyn Potential, t: f64, mass: f64) -> Result<HydroFields> {
    decompose_with(psi, potential, t, mass, QStencil::LogRatio, EPS_NODE)
}

pub fn decompose_with(
    psi: &ComplexField,
    potential: &dyn Potential,
    t: f64,
    mass: f64,
    stencil: QStencil,
    eps_node: f64,
) -> Result<HydroFields> {
    if !(mass > 0.0) {
        return Err(QfdError::param("mass", "must be positive"));
    }
    let grid = *psi.grid();
    let rho = psi.density();
    let mask = node_mask(&rho, eps_node);
    let current = current(psi, mass);
    let velocity = current
        .iter()
        .map(|j| {
            let mut v = j.zip_map(&rho, |j, r| j / r).expect("same grid");
            for (x, m) in v.values_mut().iter_mut().zip(&mask) {
                if *m {
                    *x = f64::NAN;
                }
            }
            v
        })
        .collect();
    let q_potential = quantum_potential_rho(&rho, mass, stencil, &mask);
    let v = potential.evaluate(&grid, t)?;
    let v_eff = v.zip_map(&q_potential, |a, b| a + b)?;
    Ok(HydroFields {
        rho,
        velocity,
        current,
        q_potential,
        v_eff,
        node_mask: mask,
        mass,
        eps_node,
    })
}

/// ∂²R/R along one line, as ∂² ln R + (∂ ln R)² from neighbour ratios.
/// Falls back to the plain amplitude stencil where a neighbour is zero.
fn curvature_line(g: &Grid1D, f: &[f64], out: &mut [f64], stencil: QStencil, input_is_rho: bool) {
    let n = f.len();
    let h = g.dx();
    let amp = |x: f64| if input_is_rho { x.max(0.0).sqrt() } else { x };
    // ln(R_a / R_b)
    let lr = |a: f64, b: f64| if input_is_rho { 0.5 * (a / b).ln() } else { (a / b).ln() };
    let plain = |l: f64, c: f64, r: f64| (amp(l) + amp(r) - 2.0 * amp(c)) / (h * h * amp(c));
    let central = |l: f64, c: f64, r: f64| {
        if c <= 0.0 {
            return f64::NAN;
        }
        if stencil == QStencil::Amplitude || l <= 0.0 || r <= 0.0 {
            return plain(l, c, r);
        }
        let lp = lr(r, c);
        let lm = lr(l, c);
        let d1 = (lp - lm) / (2.0 * h);
        (lp + lm) / (h * h) + d1 * d1
    };
    // one-sided at a wall: w = wall value, then the next three inward
    let edge = |w: f64, a: f64, b: f64, c: f64| {
        if w <= 0.0 {
            return f64::NAN;
        }
        if stencil == QStencil::Amplitude || a <= 0.0 || b <= 0.0 || c <= 0.0 {
            return (2.0 * amp(w) - 5.0 * amp(a) + 4.0 * amp(b) - amp(c)) / (h * h * amp(w));
        }
        let (l1, l2, l3) = (lr(a, w), lr(b, w), lr(c, w));
        let d1 = (4.0 * l1 - l2) / (2.0 * h);
        (-5.0 * l1 + 4.0 * l2 - l3) / (h * h) + d1 * d1
    };
    for i in 1..n - 1 {
        out[i] = central(f[i - 1], f[i], f[i + 1]);
    }
    match g.boundary() {
        Boundary::Periodic => {
            out[0] = central(f[n - 1], f[0], f[1]);
            out[n - 1] = central(f[n - 2], f[n - 1], f[0]);
        }
        Boundary::Dirichlet => {
            out[0] = edge(f[0], f[1], f[2], f[3]);
            out[n - 1] = edge(f[n - 1], f[n - 2], f[n - 3], f[n - 4]);
        }
    }
}

fn assemble_q(field: &RealField, mass: f64, stencil: QStencil, mask: &[bool], input_is_rho: bool) -> RealField {
    let dims = field.grid().dims();
    let mut acc = RealField::zeros(*field.grid());
    for axis in 0..dims {
        let c = map_lines(field, axis, |g, f, o| curvature_line(g, f, o, stencil, input_is_rho)).expect("axis < dims");
        for (a, b) in acc.values_mut().iter_mut().zip(c.values()) {
            *a += b;
        }
    }
    let scale = -0.5 / mass;
    for (q, m) in acc.values_mut().iter_mut().zip(mask) {
        *q = if *m { f64::NAN } else { scale * *q };
    }
    acc
}

/// Q = −(1/2m) ∇²R/R from the amplitude R.
pub fn quantum_potential_amplitude(r: &RealField, mass: f64, stencil: QStencil, mask: &[bool]) -> RealField {
    assemble_q(r, mass, stencil, mask, false)
}

/// Q = −(1/4m) [∇²ρ/ρ − ½ (∇ρ/ρ)²] = −(1/4m) [∇² ln ρ + ½ (∇ ln ρ)²] from the density.
pub fn quantum_potential_rho(rho: &RealField, mass: f64, stencil: QStencil, mask: &[bool]) -> RealField {
    assemble_q(rho, mass, stencil, mask, true)
}

/// ∂ρ/∂t + ∇·j at the middle snapshot.
#[derive(Clone, Debug)]
pub struct ContinuityResidual {
    pub field: RealField,
    pub max: f64,
    pub l2: f64,
    pub integral: f64,
}

pub fn continuity_residual(prev: &HydroFields, cur: &HydroFields, next: &HydroFields, dt: f64) -> Result<ContinuityResidual> {
    continuity_residual_fields(&prev.rho, &next.rho, &cur.current, dt, Some(&cur.node_mask))
}

/// Residual from densities at t ± dt and the current components at t.
/// Masked points (if a mask is given) are excluded from `max` and `l2`.
pub fn continuity_residual_fields(
    rho_prev: &RealField,
    rho_next: &RealField,
    current: &[RealField],
    dt: f64,
    mask: Option<&[bool]>,
) -> Result<ContinuityResidual> {
    if !(dt > 0.0) {
        return Err(QfdError::param("dt", "must be positive"));
    }
    let grid = *rho_prev.grid();
    grid.ensure_same(rho_next.grid())?;
    if current.len() != grid.dims() {
        return Err(QfdError::GridMismatch(format!("{} current components for a {}D grid", current.len(), grid.dims())));
    }
    let mut field = rho_next.zip_map(rho_prev, |a, b| (a - b) / (2.0 * dt))?;
    for (axis, j) in current.iter().enumerate() {
        grid.ensure_same(j.grid())?;
        let d = ops::gradient(j, axis)?;
        for (r, x) in field.values_mut().iter_mut().zip(d.values()) {
            *r += x;
        }
    }
    let integral = ops::integrate(&field);
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for (k, r) in field.values().iter().enumerate() {
        if mask.is_some_and(|m| m[k]) {
            continue;
        }
        max = max.max(r.abs());
        sq += r * r * grid.weight(k);
    }
    Ok(ContinuityResidual {
        field,
        max,
        l2: sq.sqrt(),
        integral,
    })
}

/// Closed loop of grid indices, counter-clockwise, along the rectangle
/// with corners (i0, j0) and (i1, j1).
pub fn rectangle_loop(i0: usize, j0: usize, i1: usize, j1: usize) -> Vec<(usize, usize)> {
    let mut pts = Vec::new();
    for i in i0..i1 {
        pts.push((i, j0));
    }
    for j in j0..j1 {
        pts.push((i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        pts.push((i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        pts.push((i0, j));
    }
    pts.push((i0, j0));
    pts
}

/// Polygon approximating a circle, counter-clockwise.
pub fn circle_loop(cx: f64, cy: f64, radius: f64, vertices: usize) -> Vec<(f64, f64)> {
    (0..vertices)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / vertices as f64;
            (cx + radius * a.cos(), cy + radius * a.sin())
        })
        .collect()
}

/// ∮ v·dl along a closed path of grid nodes where consecutive nodes are
/// neighbours along one axis (trapezoid rule per link).
pub fn circulation(hf: &HydroFields, path: &[(usize, usize)]) -> Result<f64> {
    let g = hf.grid().as_2d()?;
    if path.len() < 4 || path.first() != path.last() {
        return Err(QfdError::param("loop", "must be closed (first point repeated at the end)"));
    }
    for &(i, j) in path {
        if i >= g.gx.n_points() || j >= g.gy.n_points() {
            return Err(QfdError::param("loop", format!("point ({i}, {j}) outside the grid")));
        }
        if hf.node_mask[g.index(i, j)] {
            return Err(QfdError::MaskedLoopPoint { i, j });
        }
    }
    let mut total = 0.0;
    for w in path.windows(2) {
        let ((i0, j0), (i1, j1)) = (w[0], w[1]);
        let di = i1 as isize - i0 as isize;
        let dj = j1 as isize - j0 as isize;
        let (axis, step) = match (di, dj) {
            (d, 0) if d.abs() == 1 => (0, d as f64 * g.gx.dx()),
            (0, d) if d.abs() == 1 => (1, d as f64 * g.gy.dx()),
            _ => {
                return Err(QfdError::param(
                    "loop",
                    format!("({i0}, {j0}) -> ({i1}, {j1}) is not a single grid step"),
                ))
            }
        };
        let v = hf.velocity[axis].values();
        total += 0.5 * (v[g.index(i0, j0)] + v[g.index(i1, j1)]) * step;
    }
    Ok(total)
}

/// Bilinear interpolation of the velocity at (x, y).
fn velocity_at(hf: &HydroFields, x: f64, y: f64) -> Result<(f64, f64)> {
    let g = hf.grid().as_2d()?;
    let locate = |a: &Grid1D, p: f64| -> Result<(usize, f64)> {
        let s = (p - a.x_min()) / a.dx();
        let i = s.floor();
        if i < 0.0 || i as usize + 1 >= a.n_points() {
            return Err(QfdError::param("loop", format!("point {p} outside the grid")));
        }
        Ok((i as usize, s - i))
    };
    let (i, fx) = locate(&g.gx, x)?;
    let (j, fy) = locate(&g.gy, y)?;
    let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
    for &(a, b) in &corners {
        if hf.node_mask[g.index(a, b)] {
            return Err(QfdError::MaskedLoopPoint { i: a, j: b });
        }
    }
    let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
    let mut out = [0.0; 2];
    for (axis, o) in out.iter_mut().enumerate() {
        let v = hf.velocity[axis].values();
        *o = corners.iter().zip(&w).map(|(&(a, b), w)| w * v[g.index(a, b)]).sum();
    }
    Ok((out[0], out[1]))
}

/// ∮ v·dl around a closed polygon (last vertex joins the first), with the
/// velocity interpolated bilinearly and each edge integrated by composite
/// Simpson on sub-segments no longer than half a cell.
pub fn circulation_polygon(hf: &HydroFields, vertices: &[(f64, f64)]) -> Result<f64> {
    let g = hf.grid().as_2d()?;
    if vertices.len() < 3 {
        return Err(QfdError::param("loop", "polygon needs at least three vertices"));
    }
    let h = g.gx.dx().min(g.gy.dx());
    let mut total = 0.0;
    for k in 0..vertices.len() {
        let (ax, ay) = vertices[k];
        let (bx, by) = vertices[(k + 1) % vertices.len()];
        let (ex, ey) = (bx - ax, by - ay);
        let len = ex.hypot(ey);
        let segs = ((len / (0.5 * h)).ceil() as usize).max(1);
        let mut edge = 0.0;
        for s in 0..segs {
            let t0 = s as f64 / segs as f64;
            let t1 = (s + 1) as f64 / segs as f64;
            let f = |t: f64| -> Result<f64> {
                let (vx, vy) = velocity_at(hf, ax + t * ex, ay + t * ey)?;
                Ok(vx * ex + vy * ey)
            };
            edge += (t1 - t0) / 6.0 * (f(t0)? + 4.0 * f(0.5 * (t0 + t1))? + f(t1)?);
        }
        total += edge;
    }
    Ok(total)
}

/// Circulation in units of the quantum 2π/m.
pub fn winding_number(circulation: f64, mass: f64) -> f64 {
    circulation * mass / (2.0 * std::f64::consts::PI)
}

/// Gradient of a field that may hold NaN: central where both neighbours are
/// valid, otherwise one-sided from the valid side.
fn masked_d1_line(g: &Grid1D, f: &[f64], out: &mut [f64]) {
    let n = f.len() as isize;
    let h = g.dx();
    let at = |i: isize| -> Option<f64> {
        let k = match g.boundary() {
            Boundary::Periodic => i.rem_euclid(n),
            Boundary::Dirichlet if (0..n).contains(&i) => i,
            Boundary::Dirichlet => return None,
        };
        let v = f[k as usize];
        v.is_finite().then_some(v)
    };
    for i in 0..n {
        out[i as usize] = match (at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2)) {
            (_, _, None, _, _) => f64::NAN,
            (_, Some(l), _, Some(r), _) => (r - l) / (2.0 * h),
            (_, _, Some(c), Some(r), Some(rr)) => (-3.0 * c + 4.0 * r - rr) / (2.0 * h),
            (Some(ll), Some(l), Some(c), _, _) => (3.0 * c - 4.0 * l + ll) / (2.0 * h),
            (_, _, Some(c), Some(r), None) => (r - c) / h,
            (_, Some(l), Some(c), None, _) => (c - l) / h,
            _ => f64::NAN,
        };
    }
}

/// |∇V_eff| per node; NaN where masked.
pub fn effective_force(hf: &HydroFields) -> RealField {
    let dims = hf.grid().dims();
    let mut acc = RealField::zeros(*hf.grid());
    for axis in 0..dims {
        let d = map_lines(&hf.v_eff, axis, masked_d1_line).expect("axis < dims");
        for (a, b) in acc.values_mut().iter_mut().zip(d.values()) {
            *a += b * b;
        }
    }
    for (a, m) in acc.values_mut().iter_mut().zip(&hf.node_mask) {
        *a = if *m { f64::NAN } else { a.sqrt() };
    }
    acc
}

/// True where the local force |∇(V + Q)| is at most `threshold`; masked
/// nodes are false.
pub fn free_motion_criterion(hf: &HydroFields, threshold: f64) -> Vec<bool> {
    effective_force(hf).values().iter().map(|f| *f <= threshold).collect()
}

/// Writes every field as a binary file under `dir` plus `<prefix>_manifest.csv`
/// (columns field,file,eps_node,mask_count).
pub fn write_bundle(hf: &HydroFields, dir: impl AsRef<Path>, prefix: &str, time: f64) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let axes = ["x", "y"];
    let mut entries: Vec<(String, &RealField)> = vec![("rho".into(), &hf.rho)];
    for (k, v) in hf.velocity.iter().enumerate() {
        entries.push((format!("velocity_{}", axes[k]), v));
    }
    for (k, j) in hf.current.iter().enumerate() {
        entries.push((format!("current_{}", axes[k]), j));
    }
    entries.push(("q_potential".into(), &hf.q_potential));
    entries.push(("v_eff".into(), &hf.v_eff));
    let mask = RealField::new(*hf.grid(), hf.node_mask.iter().map(|m| if *m { 1.0 } else { 0.0 }).collect())?;
    entries.push(("node_mask".into(), &mask));

    let mut written = Vec::new();
    let manifest_path = dir.join(format!("{prefix}_manifest.csv"));
    let mut manifest = std::io::BufWriter::new(std::fs::File::create(&manifest_path)?);
    writeln!(manifest, "field,file,eps_node,mask_count")?;
    for (name, field) in entries {
        let file = format!("{prefix}_{name}.qfdf");
        io::write_real_file(dir.join(&file), field, time)?;
        writeln!(manifest, "{name},{file},{:e},{}", hf.eps_node, hf.mask_count())?;
        written.push(dir.join(file));
    }
    manifest.flush()?;
    written.push(manifest_path);
    Ok(written)
}

