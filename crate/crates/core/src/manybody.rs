//! Two particles in one dimension each: full propagation on the (r₁, r₂)
//! configuration grid versus the Hartree product approximation.
//!
//! Axis 0 of the configuration grid is particle 1, axis 1 is particle 2.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Grid, Grid1D, Grid2D};
use crate::hydro::{self, QStencil, EPS_NODE};
use crate::potential::{Potential, PotentialSpec};
use crate::propagator::{propagate, Observer, Propagator, PropagatorConfig, RunRecord};
use crate::trajectories::{integrate, IntegrateConfig, Position, Sampling, SnapshotVelocity, TrajectorySet};

/// Pair interaction V_int(r₁ − r₂).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Interaction {
    None,
    /// λ / √((r₁ − r₂)² + a²)
    SoftCoulomb { strength: f64, softening: f64 },
}

impl Interaction {
    pub fn soft_coulomb(strength: f64) -> Self {
        Interaction::SoftCoulomb { strength, softening: 1.0 }
    }

    #[inline]
    pub fn kernel(&self, d: f64) -> f64 {
        match *self {
            Interaction::None => 0.0,
            Interaction::SoftCoulomb { strength, softening } => strength / (d * d + softening * softening).sqrt(),
        }
    }

    pub fn is_none(&self) -> bool {
        match *self {
            Interaction::None => true,
            Interaction::SoftCoulomb { strength, .. } => strength == 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Interaction::SoftCoulomb { strength, softening } if !(strength.is_finite() && softening > 0.0) => {
                Err(QfdError::param("interaction.softening", "must be positive with finite strength"))
            }
            _ => Ok(()),
        }
    }
}

/// Exchange symmetry of a two-particle state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    None,
    Symmetric,
    Antisymmetric,
}

/// V_ext(r₁) + V_ext(r₂) + V_int(r₁ − r₂) on the configuration grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoBodyPotential {
    pub external: PotentialSpec,
    pub interaction: Interaction,
}

impl Potential for TwoBodyPotential {
    fn eval_into(&self, grid: &Grid, t: f64, out: &mut [f64]) -> Result<()> {
        let g = grid.as_2d()?;
        let v1 = self.external.line_values(&g.gx, t)?;
        let v2 = self.external.line_values(&g.gy, t)?;
        let ny = g.gy.n_points();
        for (i, a) in v1.iter().enumerate() {
            let x1 = g.gx.x(i);
            for (j, b) in v2.iter().enumerate() {
                out[i * ny + j] = a + b + self.interaction.kernel(x1 - g.gy.x(j));
            }
        }
        Ok(())
    }

    fn is_time_dependent(&self) -> bool {
        self.external.is_time_dependent()
    }
}

fn ensure_square(g: &Grid2D) -> Result<()> {
    if g.gx != g.gy {
        return Err(QfdError::GridMismatch("both particles must share the same 1D grid".into()));
    }
    Ok(())
}

/// ψ(r₂, r₁).
pub fn swap(psi: &ComplexField) -> Result<ComplexField> {
    let g = psi.grid().as_2d()?;
    ensure_square(&g)?;
    let n = g.gx.n_points();
    let v = psi.values();
    let mut out = vec![Default::default(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = v[j * n + i];
        }
    }
    ComplexField::new(g, out)
}

/// max |ψ(r₁, r₂) ∓ ψ(r₂, r₁)| for the given symmetry (plain exchange
/// difference for `Symmetry::None`).
pub fn symmetry_defect(psi: &ComplexField, symmetry: Symmetry) -> Result<f64> {
    let s = swap(psi)?;
    let sign = if symmetry == Symmetry::Antisymmetric { -1.0 } else { 1.0 };
    Ok(psi
        .values()
        .iter()
        .zip(s.values())
        .map(|(a, b)| (a - b * sign).norm())
        .fold(0.0, f64::max))
}

fn project(psi: &ComplexField, sign: f64) -> Result<ComplexField> {
    let s = swap(psi)?;
    let p = psi.zip_map(&s, |a, b| (a + b * sign) * 0.5)?;
    if p.norm_sqr() < 1e-24 {
        return Err(QfdError::param("state", "projection onto the exchange subspace vanishes"));
    }
    p.normalized()
}

pub fn symmetrize(psi: &ComplexField) -> Result<ComplexField> {
    project(psi, 1.0)
}

pub fn antisymmetrize(psi: &ComplexField) -> Result<ComplexField> {
    project(psi, -1.0)
}

/// ψ₁(r₁) ψ₂(r₂) on the square configuration grid.
pub fn product(psi1: &ComplexField, psi2: &ComplexField) -> Result<ComplexField> {
    let g1 = psi1.grid().as_1d()?;
    let g2 = psi2.grid().as_1d()?;
    let g = Grid2D::new(g1, g2);
    ensure_square(&g)?;
    let (a, b) = (psi1.values(), psi2.values());
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    ComplexField::new(g, out)
}

#[derive(Clone, Debug)]
pub struct TwoBodyState {
    pub psi: ComplexField,
    pub potential: TwoBodyPotential,
    pub symmetry: Symmetry,
}

impl TwoBodyState {
    pub fn new(psi: ComplexField, potential: TwoBodyPotential, symmetry: Symmetry) -> Result<Self> {
        let g = psi.grid().as_2d()?;
        ensure_square(&g)?;
        potential.interaction.validate()?;
        let norm = psi.norm_sqr();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(QfdError::NotNormalized { integral: norm });
        }
        if symmetry != Symmetry::None {
            let d = symmetry_defect(&psi, symmetry)?;
            if d > 1e-10 {
                return Err(QfdError::param("symmetry", format!("state violates its exchange tag by {d:e}")));
            }
        }
        Ok(Self {
            psi,
            potential,
            symmetry,
        })
    }

    pub fn grid(&self) -> Grid2D {
        self.psi.grid().as_2d().expect("checked in new")
    }
}

/// Full configuration-space propagation; observers receive ψ(r₁, r₂, t).
pub fn propagate_full(
    state: &TwoBodyState,
    cfg: &PropagatorConfig,
    stride: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    propagate(&state.psi, &state.potential, cfg, stride, observers)
}

/// Q(r₁, r₂) = −(1/2m)(∇₁²R + ∇₂²R)/R, NaN at nodes.
pub fn q_full(psi: &ComplexField, mass: f64) -> RealField {
    let rho = psi.density();
    let mask = hydro::node_mask(&rho, EPS_NODE);
    hydro::quantum_potential_rho(&rho, mass, QStencil::LogRatio, &mask)
}

/// One-particle marginal densities ∫ρ dr₂ and ∫ρ dr₁.
pub fn marginals(psi: &ComplexField) -> Result<(RealField, RealField)> {
    let g = psi.grid().as_2d()?;
    let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
    let rho = psi.density();
    let v = rho.values();
    let m1 = (0..nx).map(|i| (0..ny).map(|j| v[i * ny + j] * g.gy.weight(j)).sum()).collect();
    let m2 = (0..ny).map(|j| (0..nx).map(|i| v[i * ny + j] * g.gx.weight(i)).sum()).collect();
    Ok((RealField::new(g.gx, m1)?, RealField::new(g.gy, m2)?))
}

/// Q_full − [Q(ρ₁)(r₁) + Q(ρ₂)(r₂)] with ρ₁, ρ₂ the marginals. Vanishes on
/// product states; its size measures nonseparability.
pub fn correlation_witness(psi: &ComplexField, mass: f64) -> Result<RealField> {
    let g = psi.grid().as_2d()?;
    let q = q_full(psi, mass);
    let (m1, m2) = marginals(psi)?;
    let q1 = hydro::quantum_potential_rho(&m1, mass, QStencil::LogRatio, &hydro::node_mask(&m1, EPS_NODE));
    let q2 = hydro::quantum_potential_rho(&m2, mass, QStencil::LogRatio, &hydro::node_mask(&m2, EPS_NODE));
    let ny = g.gy.n_points();
    let vals = q
        .values()
        .iter()
        .enumerate()
        .map(|(k, qf)| qf - q1.values()[k / ny] - q2.values()[k % ny])
        .collect();
    RealField::new(g, vals)
}

/// max |witness| over points where it is defined.
pub fn correlation_witness_max(psi: &ComplexField, mass: f64) -> Result<f64> {
    Ok(correlation_witness(psi, mass)?.max_abs())
}

#[derive(Clone, Debug)]
pub struct HartreeState {
    pub orbitals: [ComplexField; 2],
    pub external: PotentialSpec,
    pub interaction: Interaction,
}

impl HartreeState {
    pub fn new(orbitals: [ComplexField; 2], external: PotentialSpec, interaction: Interaction) -> Result<Self> {
        orbitals[0].grid().as_1d()?;
        orbitals[0].grid().ensure_same(orbitals[1].grid())?;
        interaction.validate()?;
        for (k, o) in orbitals.iter().enumerate() {
            let n = o.norm_sqr();
            if (n - 1.0).abs() > 1e-8 {
                return Err(QfdError::param(format!("orbital {}", k + 1), format!("norm {n} is not 1")));
            }
        }
        Ok(Self {
            orbitals,
            external,
            interaction,
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.orbitals[0].grid().as_1d().expect("checked in new")
    }
}

/// ∫ρ(r') V_int(r − r') dr' on the grid of `rho`.
pub fn mean_field(rho: &RealField, interaction: &Interaction) -> Result<Vec<f64>> {
    let g = rho.grid().as_1d()?;
    let n = g.n_points();
    if interaction.is_none() {
        return Ok(vec![0.0; n]);
    }
    let w: Vec<f64> = rho.values().iter().enumerate().map(|(k, r)| r * g.weight(k)).collect();
    Ok((0..n)
        .map(|i| {
            let x = g.x(i);
            w.iter().enumerate().map(|(k, wk)| wk * interaction.kernel(x - g.x(k))).sum()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HartreeConfig {
    pub propagator: PropagatorConfig,
    /// Re-take each step with the mean field averaged between the start
    /// and a predicted end of the step.
    pub predictor_corrector: bool,
}

#[derive(Clone, Debug)]
pub struct HartreeRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<[ComplexField; 2]>,
    pub final_orbitals: [ComplexField; 2],
    pub max_norm_deviation: f64,
}

/// Mean-field propagation of both orbitals in lockstep. Each orbital feels
/// V_ext plus the Hartree field of its partner, recomputed every step.
pub fn propagate_hartree(h: &HartreeState, cfg: &HartreeConfig, stride: usize) -> Result<HartreeRun> {
    if stride == 0 {
        return Err(QfdError::param("stride", "must be at least 1"));
    }
    let grid = h.grid();
    let pc = cfg.propagator;
    let mut props = [
        Propagator::without_potential(grid.into(), pc)?,
        Propagator::without_potential(grid.into(), pc)?,
    ];
    let mut orbs = h.orbitals.clone();
    let static_ext = if h.external.is_time_dependent() {
        None
    } else {
        Some(h.external.line_values(&grid, 0.0)?)
    };
    let ext_at = |t: f64| -> Result<Vec<f64>> {
        match &static_ext {
            Some(v) => Ok(v.clone()),
            None => h.external.line_values(&grid, t),
        }
    };
    let fields = |orbs: &[ComplexField; 2]| -> Result<[Vec<f64>; 2]> {
        Ok([
            mean_field(&orbs[1].density(), &h.interaction)?,
            mean_field(&orbs[0].density(), &h.interaction)?,
        ])
    };

    let mut run = HartreeRun {
        times: vec![0.0],
        snapshots: vec![orbs.clone()],
        final_orbitals: orbs.clone(),
        max_norm_deviation: 0.0,
    };
    let n_steps = pc.n_steps();
    for s in 0..n_steps {
        let t = s as f64 * pc.dt;
        let ext = ext_at(t + 0.5 * pc.dt)?;
        let vh0 = fields(&orbs)?;
        let vh = if cfg.predictor_corrector {
            let mut pred = orbs.clone();
            for k in 0..2 {
                let v: Vec<f64> = ext.iter().zip(&vh0[k]).map(|(a, b)| a + b).collect();
                props[k].step_with_values(&mut pred[k], &v, t, pc.dt)?;
            }
            let vh1 = fields(&pred)?;
            [0, 1].map(|k| vh0[k].iter().zip(&vh1[k]).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<f64>>())
        } else {
            vh0
        };
        for k in 0..2 {
            let v: Vec<f64> = ext.iter().zip(&vh[k]).map(|(a, b)| a + b).collect();
            props[k].step_with_values(&mut orbs[k], &v, t, pc.dt).map_err(|e| match e {
                QfdError::NonFinite { t, detail, .. } => QfdError::NonFinite { step: s + 1, t, detail },
                other => other,
            })?;
        }
        for o in &orbs {
            run.max_norm_deviation = run.max_norm_deviation.max((o.norm_sqr() - 1.0).abs());
        }
        if (s + 1) % stride == 0 {
            run.times.push((s + 1) as f64 * pc.dt);
            run.snapshots.push(orbs.clone());
        }
    }
    run.final_orbitals = orbs;
    Ok(run)
}

/// Splits 2D trajectories into one 1D set per particle.
pub fn project_particles(ts: &TrajectorySet) -> [TrajectorySet; 2] {
    [0, 1].map(|axis| TrajectorySet {
        dims: 1,
        times: ts.times.clone(),
        positions: ts
            .positions
            .iter()
            .map(|path| path.iter().map(|p| [p[axis], 0.0]).collect())
            .collect(),
        seed: ts.seed,
        sampling: ts.sampling,
        flags: ts.flags.clone(),
    })
}

/// Full case: integrate (r₁, r₂) in the configuration-space velocity field
/// and project per particle.
pub fn full_trajectories(
    times: &[f64],
    snapshots: &[ComplexField],
    mass: f64,
    initial: Vec<Position>,
    seed: u64,
    sampling: Sampling,
    icfg: &IntegrateConfig,
) -> Result<[TrajectorySet; 2]> {
    let field = SnapshotVelocity::from_psis(times, snapshots, mass)?;
    let ts = TrajectorySet::new(2, times[0], initial, seed, sampling);
    let out = integrate(&ts, &field, *times.last().unwrap(), icfg)?;
    Ok(project_particles(&out))
}

/// Hartree case: independent 1D integrations in each orbital's velocity field.
pub fn hartree_trajectories(
    run: &HartreeRun,
    mass: f64,
    initial: &[Position],
    seed: u64,
    sampling: Sampling,
    icfg: &IntegrateConfig,
) -> Result<[TrajectorySet; 2]> {
    let t1 = *run.times.last().unwrap();
    let mut out = Vec::with_capacity(2);
    for k in 0..2 {
        let psis: Vec<ComplexField> = run.snapshots.iter().map(|o| o[k].clone()).collect();
        let field = SnapshotVelocity::from_psis(&run.times, &psis, mass)?;
        let start = initial.iter().map(|p| [p[k], 0.0]).collect();
        let ts = TrajectorySet::new(1, run.times[0], start, seed, sampling);
        out.push(integrate(&ts, &field, t1, icfg)?);
    }
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    Ok([a, b])
}

/// max |x_a − x_b| over both particles, all shared stored times, and all
/// trajectories that are unflagged in both sets.
pub fn max_trajectory_deviation(a: &[TrajectorySet; 2], b: &[TrajectorySet; 2]) -> Result<f64> {
    let mut worst = 0.0f64;
    for k in 0..2 {
        let (x, y) = (&a[k], &b[k]);
        if x.n_traj() != y.n_traj() || x.times.len() != y.times.len() {
            return Err(QfdError::GridMismatch("trajectory sets differ in shape".into()));
        }
        for (n, (px, py)) in x.positions.iter().zip(&y.positions).enumerate() {
            if !(x.flags[n].is_ok() && y.flags[n].is_ok()) {
                continue;
            }
            for (p, q) in px.iter().zip(py) {
                worst = worst.max((p[0] - q[0]).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub full_vs_hartree_density_l2: f64,
    pub correlation_witness_max: f64,
    pub symmetry_defect: f64,
}

/// Compares full and Hartree snapshots taken at the same times.
pub fn compare(
    full: &[ComplexField],
    hartree: &HartreeRun,
    symmetry: Symmetry,
    mass: f64,
) -> Result<Vec<ComparisonRow>> {
    if full.len() != hartree.snapshots.len() {
        return Err(QfdError::param("snapshots", "full and Hartree runs emitted different numbers of snapshots"));
    }
    full.iter()
        .zip(&hartree.snapshots)
        .zip(&hartree.times)
        .map(|((psi, orbs), t)| {
            let (m1, m2) = marginals(psi)?;
            let mut sq = 0.0;
            for (m, o) in [(&m1, &orbs[0]), (&m2, &orbs[1])] {
                let g = m.grid().as_1d()?;
                let d = o.density();
                sq += m
                    .values()
                    .iter()
                    .zip(d.values())
                    .enumerate()
                    .map(|(k, (a, b))| (a - b).powi(2) * g.weight(k))
                    .sum::<f64>();
            }
            Ok(ComparisonRow {
                t: *t,
                full_vs_hartree_density_l2: sq.sqrt(),
                correlation_witness_max: correlation_witness_max(psi, mass)?,
                symmetry_defect: symmetry_defect(psi, symmetry)?,
            })
        })
        .collect()
}

pub fn write_comparison_csv(rows: &[ComparisonRow], w: impl Write) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "t,full_vs_hartree_density_L2,correlation_witness_max,symmetry_defect")?;
    for r in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e}",
            r.t, r.full_vs_hartree_density_l2, r.correlation_witness_max, r.symmetry_defect
        )?;
    }
    w.flush()?;
    Ok(())
}

/// ⟨r⟩ of a 1D density.
pub fn center(rho: &RealField) -> Result<f64> {
    let g = rho.grid().as_1d()?;
    let (mut m, mut z) = (0.0, 0.0);
    for (k, r) in rho.values().iter().enumerate() {
        m += r * g.x(k) * g.weight(k);
        z += r * g.weight(k);
    }
    Ok(m / z)
}
