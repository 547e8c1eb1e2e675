//! Reduced density matrix of one particle of a two-particle state, its
//! current and the trajectories driven by it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Grid, Grid1D};
use crate::hydro::{self, ContinuityResidual, EPS_NODE};
use crate::io::{self, Stored};
use crate::ops;
use crate::propagator::{Observer, Sample};
use crate::trajectories::{sample_initial, integrate, IntegrateConfig, Position, Sampling, SnapshotVelocity, TrajectorySet};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-8;
pub const PSD_TOL: f64 = 1e-8;

/// Dense ρ̃(x, x'), row-major in (x, x').
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensityMatrix {
    grid: Grid1D,
    values: Vec<Complex64>,
    time: f64,
}

impl ReducedDensityMatrix {
    pub fn new(grid: Grid1D, values: Vec<Complex64>, time: f64) -> Result<Self> {
        let n = grid.n_points();
        if values.len() != n * n {
            return Err(QfdError::GridMismatch(format!("{} matrix entries for {n} grid points", values.len())));
        }
        Ok(Self { grid, values, time })
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn n(&self) -> usize {
        self.grid.n_points()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n() + j]
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Σ ρ̃(x,x) w(x).
    pub fn trace(&self) -> Complex64 {
        (0..self.n()).map(|i| self.get(i, i) * self.grid.weight(i)).sum()
    }

    /// Re ρ̃(x, x).
    pub fn diagonal(&self) -> RealField {
        let d = (0..self.n()).map(|i| self.get(i, i).re).collect();
        RealField::new(self.grid, d).expect("diagonal matches grid")
    }

    /// Tr ρ̃² with the grid weights.
    pub fn purity(&self) -> f64 {
        let n = self.n();
        let w = self.grid.weights();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| (self.get(i, j) * self.get(j, i)).re * w[i] * w[j])
                    .sum::<f64>()
            })
            .collect();
        rows.iter().sum()
    }

    /// Eigenvalues of W^½ ρ̃ W^½ in ascending order. These are the occupation
    /// numbers of the weighted operator.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n();
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let z = self.get(i, j) * (sw[i] * sw[j]);
            nalgebra::Complex::new(z.re, z.im)
        });
        // average with the adjoint so the solver sees an exactly Hermitian matrix;
        // the defect itself is reported by `hermiticity_defect`
        let h = (&m + m.adjoint()) * nalgebra::Complex::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > HERMITICITY_TOL {
            return Err(QfdError::InvalidRdm(format!("hermiticity defect {h:e} at t = {}", self.time)));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(QfdError::InvalidRdm(format!("trace {tr} at t = {}", self.time)));
        }
        let lo = self.min_eigenvalue();
        if lo < -PSD_TOL {
            return Err(QfdError::InvalidRdm(format!("negative eigenvalue {lo:e} at t = {}", self.time)));
        }
        Ok(())
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        io::write_matrix(w, self.grid, &self.values, self.time)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match io::read_file(path)? {
            (h, Stored::Matrix { grid, values }) => Self::new(grid, values, h.time),
            _ => Err(QfdError::Format {
                path: path.to_path_buf(),
                reason: "expected a matrix file".into(),
            }),
        }
    }
}

/// Traces out particle 2 (axis 1).
pub fn reduce(psi: &ComplexField, time: f64) -> Result<ReducedDensityMatrix> {
    reduce_keeping(psi, 0, time)
}

/// Keeps particle `keep` (0 or 1) and traces over the other.
pub fn reduce_keeping(psi: &ComplexField, keep: usize, time: f64) -> Result<ReducedDensityMatrix> {
    let g = psi.grid().as_2d()?;
    if keep > 1 {
        return Err(QfdError::AxisOutOfRange { axis: keep, dims: 2 });
    }
    let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
    let (kept, traced) = if keep == 0 { (g.gx, g.gy) } else { (g.gy, g.gx) };
    let n = kept.n_points();
    let m = traced.n_points();
    let w = traced.weights();
    let v = psi.values();
    // rows[a][b] = ψ with the kept coordinate a and traced coordinate b
    let rows: Vec<Vec<Complex64>> = (0..n)
        .map(|a| {
            (0..m)
                .map(|b| if keep == 0 { v[a * ny + b] } else { v[b * ny + a] })
                .collect()
        })
        .collect();
    debug_assert_eq!(n * m, nx * ny);
    let mut values = vec![Complex64::default(); n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let ri = &rows[i];
        for (j, o) in out.iter_mut().enumerate() {
            let rj = &rows[j];
            let mut s = Complex64::default();
            for b in 0..m {
                s += ri[b] * rj[b].conj() * w[b];
            }
            *o = s;
        }
    });
    ReducedDensityMatrix::new(kept, values, time)
}

/// j̃(x) = Im ∂ₓρ̃(x, x')|ₓ'₌ₓ / m. The derivative runs along the first index
/// of the full matrix and is restricted to the diagonal afterwards.
pub fn reduced_current(rdm: &ReducedDensityMatrix, mass: f64) -> RealField {
    let n = rdm.n();
    let g = rdm.grid;
    let j: Vec<f64> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![Complex64::default(); n], vec![Complex64::default(); n]),
            |(col, d), c| {
                for (r, x) in col.iter_mut().enumerate() {
                    *x = rdm.get(r, c);
                }
                ops::d1_line(&g, col, d);
                d[c].im / mass
            },
        )
        .collect();
    RealField::new(g, j).expect("current matches grid")
}

/// j̃ / Re ρ̃ on the diagonal, NaN where the diagonal is below `eps_node`
/// times its maximum.
pub fn reduced_velocity(rdm: &ReducedDensityMatrix, mass: f64, eps_node: f64) -> RealField {
    let j = reduced_current(rdm, mass);
    let diag = rdm.diagonal();
    let mask = hydro::node_mask(&diag, eps_node);
    let v = j
        .values()
        .iter()
        .zip(diag.values())
        .zip(&mask)
        .map(|((j, r), m)| if *m { f64::NAN } else { j / r })
        .collect();
    RealField::new(rdm.grid, v).expect("velocity matches grid")
}

fn uniform_spacing(rdms: &[ReducedDensityMatrix]) -> Result<f64> {
    if rdms.len() < 2 {
        return Err(QfdError::param("rdm_series", "at least two snapshots required"));
    }
    let dt = rdms[1].time - rdms[0].time;
    if !(dt > 0.0) {
        return Err(QfdError::param("rdm_series", "times must increase"));
    }
    for w in rdms.windows(2) {
        if w[0].grid != w[1].grid {
            return Err(QfdError::GridMismatch("rdm series on different grids".into()));
        }
        let d = w[1].time - w[0].time;
        if (d - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(QfdError::param("rdm_series", format!("non-uniform stride: {d} vs {dt}")));
        }
    }
    Ok(dt)
}

/// Velocity snapshots from a uniformly spaced rdm series.
pub fn reduced_velocity_series(rdms: &[ReducedDensityMatrix], mass: f64, eps_node: f64) -> Result<SnapshotVelocity> {
    uniform_spacing(rdms)?;
    let mut snaps = SnapshotVelocity::new(Grid::One(rdms[0].grid));
    for r in rdms {
        snaps.push_fields(r.time, vec![reduced_velocity(r, mass, eps_node)])?;
    }
    Ok(snaps)
}

/// Reduced trajectories sampled from the diagonal of the first rdm.
pub fn reduced_trajectories(
    rdms: &[ReducedDensityMatrix],
    mass: f64,
    n: usize,
    seed: u64,
    cfg: &IntegrateConfig,
) -> Result<TrajectorySet> {
    let first = rdms.first().ok_or_else(|| QfdError::param("rdm_series", "empty"))?;
    let init = sample_initial(&first.diagonal(), n, seed)?;
    reduced_trajectories_from(rdms, mass, init, seed, Sampling::InverseCdf, cfg)
}

/// Reduced trajectories from given starting points.
pub fn reduced_trajectories_from(
    rdms: &[ReducedDensityMatrix],
    mass: f64,
    initial: Vec<Position>,
    seed: u64,
    sampling: Sampling,
    cfg: &IntegrateConfig,
) -> Result<TrajectorySet> {
    let snaps = reduced_velocity_series(rdms, mass, EPS_NODE)?;
    let t0 = rdms[0].time;
    let t1 = rdms[rdms.len() - 1].time;
    let ts = TrajectorySet::new(1, t0, initial, seed, sampling);
    integrate(&ts, &snaps, t1, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurityReport {
    pub t: f64,
    pub purity: f64,
}

pub fn purity_report(rdm: &ReducedDensityMatrix) -> PurityReport {
    PurityReport {
        t: rdm.time,
        purity: rdm.purity(),
    }
}

pub fn write_purity_csv(rows: &[PurityReport], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,purity")?;
    for r in rows {
        writeln!(w, "{:e},{:e}", r.t, r.purity)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityRow {
    pub t: f64,
    pub max: f64,
    pub l2: f64,
    pub integral: f64,
}

/// ∂ₜρ̃(x,x) + ∂ₓj̃ at every interior snapshot, central differences in time.
pub fn continuity_audit(rdms: &[ReducedDensityMatrix], mass: f64) -> Result<Vec<ContinuityRow>> {
    let dt = uniform_spacing(rdms)?;
    if rdms.len() < 3 {
        return Err(QfdError::param("rdm_series", "at least three snapshots required"));
    }
    rdms.windows(3)
        .map(|w| {
            let diag = w[1].diagonal();
            let mask = hydro::node_mask(&diag, EPS_NODE);
            let ContinuityResidual { max, l2, integral, .. } = hydro::continuity_residual_fields(
                &w[0].diagonal(),
                &w[2].diagonal(),
                &[reduced_current(&w[1], mass)],
                dt,
                Some(&mask),
            )?;
            Ok(ContinuityRow {
                t: w[1].time,
                max,
                l2,
                integral,
            })
        })
        .collect()
}

pub fn write_continuity_csv(rows: &[ContinuityRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,residual_max,residual_l2,residual_integral")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{:e},{:e}", r.t, r.max, r.l2, r.integral)?;
    }
    Ok(())
}

/// Observer reducing every emitted two-particle snapshot, validating each rdm.
#[derive(Default)]
pub struct RdmRecorder {
    pub rdms: Vec<ReducedDensityMatrix>,
    pub check: bool,
}

impl RdmRecorder {
    pub fn checked() -> Self {
        Self {
            rdms: Vec::new(),
            check: true,
        }
    }
}

impl Observer for RdmRecorder {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()> {
        let r = reduce(sample.psi, sample.t)?;
        if self.check {
            r.validate()?;
        }
        self.rdms.push(r);
        Ok(())
    }
}
