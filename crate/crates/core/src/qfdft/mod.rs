//! Kohn–Sham orbitals in the hydrodynamic picture: effective potential,
//! self-consistent propagation, density and current, the kinetic functional,
//! per-orbital ε diagnostics and the stationary limit.

mod eigen;
pub mod xc;

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QfdError, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Boundary, Grid, Grid1D};
use crate::hydro::{self, QStencil, EPS_NODE};
use crate::manybody::Interaction;
use crate::ops;
use crate::potential::{Potential, PotentialSpec};
use crate::propagator::{fd_kinetic_energy, Propagator, PropagatorConfig};
use crate::reduced::ContinuityRow;

pub use xc::{LdaExchange1d, NoXc, XcFunctional, XcRegistry};

/// Orthonormality tolerance at construction.
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    External(PotentialSpec),
    Hartree(Interaction),
    /// Exchange-correlation plug-in by registry name.
    Xc(String),
}

/// Ordered list of potential terms. Exactly one external term is required.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalConfig {
    pub terms: Vec<Term>,
}

impl FunctionalConfig {
    pub fn external(v: PotentialSpec) -> Self {
        Self {
            terms: vec![Term::External(v)],
        }
    }

    pub fn with_hartree(mut self, interaction: Interaction) -> Self {
        self.terms.push(Term::Hartree(interaction));
        self
    }

    pub fn with_xc(mut self, name: impl Into<String>) -> Self {
        self.terms.push(Term::Xc(name.into()));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let externals = self.terms.iter().filter(|t| matches!(t, Term::External(_))).count();
        if externals != 1 {
            return Err(QfdError::param("functional.terms", format!("need exactly one external term, found {externals}")));
        }
        for t in &self.terms {
            match t {
                Term::External(v) => v.validate()?,
                Term::Hartree(i) => i.validate()?,
                Term::Xc(_) => {}
            }
        }
        Ok(())
    }
}

enum Resolved {
    External(PotentialSpec),
    Hartree(Interaction),
    Xc(Arc<dyn XcFunctional>),
}

/// A validated functional with its plug-ins resolved.
pub struct Functional {
    terms: Vec<Resolved>,
}

impl Functional {
    pub fn new(fc: &FunctionalConfig) -> Result<Self> {
        Self::with_registry(fc, &XcRegistry::builtin())
    }

    pub fn with_registry(fc: &FunctionalConfig, registry: &XcRegistry) -> Result<Self> {
        fc.validate()?;
        let terms = fc
            .terms
            .iter()
            .map(|t| {
                Ok(match t {
                    Term::External(v) => Resolved::External(v.clone()),
                    Term::Hartree(i) => Resolved::Hartree(*i),
                    Term::Xc(name) => Resolved::Xc(registry.get(name)?),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { terms })
    }

    pub fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|t| match t {
            Resolved::External(v) => v.is_time_dependent(),
            Resolved::Hartree(_) => false,
            Resolved::Xc(f) => f.is_time_dependent(),
        })
    }

    /// Sum of the enabled terms for density values `rho` at time `t`.
    pub fn potential_into(&self, g: Grid1D, rho: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; out.len()];
        for term in &self.terms {
            match term {
                Resolved::External(v) => v.eval_into(&Grid::One(g), t, &mut buf)?,
                Resolved::Hartree(i) => hartree_into(g, rho, i, &mut buf),
                Resolved::Xc(f) => f.potential(rho, t, &mut buf),
            }
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
        }
        Ok(())
    }

    pub fn potential(&self, rho: &RealField, t: f64) -> Result<RealField> {
        let g = rho.grid().as_1d()?;
        let mut out = vec![0.0; g.n_points()];
        self.potential_into(g, rho.values(), t, &mut out)?;
        RealField::new(g, out)
    }
}

/// v_eff[ρ](t) for a configuration, resolving plug-ins from the builtin registry.
pub fn effective_potential(rho: &RealField, fc: &FunctionalConfig, t: f64) -> Result<RealField> {
    Functional::new(fc)?.potential(rho, t)
}

/// ∫ρ(x') K(x − x') dx' on the grid.
fn hartree_into(g: Grid1D, rho: &[f64], interaction: &Interaction, out: &mut [f64]) {
    let n = g.n_points();
    if interaction.is_none() {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let w: Vec<f64> = rho.iter().enumerate().map(|(k, r)| r * g.weight(k)).collect();
    // kernel by index offset i − k, shifted by n − 1
    let table: Vec<f64> = (0..2 * n - 1)
        .map(|s| interaction.kernel((s as f64 - (n - 1) as f64) * g.dx()))
        .collect();
    out.par_iter_mut().enumerate().for_each(|(i, o)| {
        *o = w.iter().enumerate().map(|(k, wk)| wk * table[i + n - 1 - k]).sum();
    });
}

// ---------------------------------------------------------------------------
// Orbitals

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitalSet {
    orbitals: Vec<ComplexField>,
}

impl OrbitalSet {
    /// Requires orthonormal orbitals on one 1D grid.
    pub fn new(orbitals: Vec<ComplexField>) -> Result<Self> {
        let s = Self::unchecked(orbitals)?;
        let drift = s.max_overlap_defect();
        if drift > ORTHO_TOL {
            return Err(QfdError::param("orbitals", format!("not orthonormal: max |⟨φ_i|φ_j⟩ − δ_ij| = {drift:e}")));
        }
        Ok(s)
    }

    /// Modified Gram–Schmidt in the given order.
    pub fn orthonormalize(orbitals: Vec<ComplexField>) -> Result<Self> {
        let mut s = Self::unchecked(orbitals)?;
        for k in 0..s.orbitals.len() {
            let (done, rest) = s.orbitals.split_at_mut(k);
            let phi = &mut rest[0];
            for u in done.iter() {
                let p = u.inner(phi)?;
                for (x, y) in phi.values_mut().iter_mut().zip(u.values()) {
                    *x -= p * y;
                }
            }
            if phi.norm_sqr() < 1e-20 {
                return Err(QfdError::param("orbitals", format!("orbital {k} is linearly dependent on earlier ones")));
            }
            phi.normalize()?;
        }
        Ok(s)
    }

    fn unchecked(orbitals: Vec<ComplexField>) -> Result<Self> {
        let first = orbitals.first().ok_or_else(|| QfdError::param("orbitals", "at least one orbital required"))?;
        let g = *first.grid();
        g.as_1d()?;
        for o in &orbitals {
            g.ensure_same(o.grid())?;
        }
        Ok(Self { orbitals })
    }

    pub fn len(&self) -> usize {
        self.orbitals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbitals.is_empty()
    }

    pub fn orbitals(&self) -> &[ComplexField] {
        &self.orbitals
    }

    pub fn into_orbitals(self) -> Vec<ComplexField> {
        self.orbitals
    }

    pub fn grid(&self) -> Grid1D {
        self.orbitals[0].grid().as_1d().expect("checked at construction")
    }

    /// ⟨φ_i|φ_j⟩.
    pub fn overlap(&self) -> Vec<Vec<Complex64>> {
        self.orbitals
            .iter()
            .map(|a| self.orbitals.iter().map(|b| a.inner(b).expect("same grid")).collect())
            .collect()
    }

    fn max_overlap_defect(&self) -> f64 {
        let s = self.overlap();
        let mut worst = 0.0f64;
        for (i, row) in s.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((z - target).norm());
            }
        }
        worst
    }

    /// Frobenius norm of overlap − identity.
    pub fn orthonormality_drift(&self) -> f64 {
        let s = self.overlap();
        let mut sq = 0.0;
        for (i, row) in s.iter().enumerate() {
            for (j, z) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                sq += (z - target).norm_sqr();
            }
        }
        sq.sqrt()
    }
}

/// ρ = Σ_k |φ_k|².
pub fn density(os: &OrbitalSet) -> RealField {
    let mut rho = os.orbitals[0].density();
    for o in &os.orbitals[1..] {
        for (r, z) in rho.values_mut().iter_mut().zip(o.values()) {
            *r += z.norm_sqr();
        }
    }
    rho
}

/// j = Σ_k Im(φ_k* ∂φ_k) / m.
pub fn current(os: &OrbitalSet, mass: f64) -> RealField {
    let mut j = RealField::zeros(*os.orbitals[0].grid());
    for o in &os.orbitals {
        let jk = &hydro::current(o, mass)[0];
        for (a, b) in j.values_mut().iter_mut().zip(jk.values()) {
            *a += b;
        }
    }
    j
}

/// Columns x, ρ, j and j/ρ (NaN below the node threshold).
pub fn write_profile_csv(os: &OrbitalSet, mass: f64, mut w: impl Write) -> Result<()> {
    let g = os.grid();
    let rho = density(os);
    let j = current(os, mass);
    let mask = hydro::node_mask(&rho, EPS_NODE);
    writeln!(w, "x,rho,current,velocity")?;
    for i in 0..g.n_points() {
        let r = rho.values()[i];
        let c = j.values()[i];
        let v = if mask[i] { f64::NAN } else { c / r };
        writeln!(w, "{:e},{:e},{:e},{:e}", g.x(i), r, c, v)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kinetic functional

/// Two evaluations of ½ Σ_k ∫|∇φ_k|²/m that agree by summation by parts:
/// the stencil form −½ Σ ∫ Re(φ* ∇²φ)/m, and the polar link form built from
/// amplitude differences and phase differences between neighbouring nodes.
pub fn kinetic_forms(os: &OrbitalSet, mass: f64) -> (f64, f64) {
    let g = os.grid();
    let stencil: f64 = os.orbitals.iter().map(|o| fd_kinetic_energy(o, mass)).sum();
    let n = g.n_points();
    let links = if g.is_periodic() { n } else { n - 1 };
    let h = g.dx();
    let mut link = 0.0;
    for o in &os.orbitals {
        let v = o.values();
        for i in 0..links {
            let (a, b) = (v[i], v[(i + 1) % n]);
            let dr = b.norm() - a.norm();
            let ds = (b * a.conj()).arg();
            let s = (0.5 * ds).sin();
            link += dr * dr + 4.0 * a.norm() * b.norm() * s * s;
        }
    }
    (stencil, link / (2.0 * mass * h))
}

#[derive(Clone, Debug, PartialEq)]
pub struct KineticReport {
    /// Window average of the stencil form.
    pub stencil_form: f64,
    /// Window average of the link form.
    pub link_form: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl KineticReport {
    pub fn difference(&self) -> f64 {
        (self.stencil_form - self.link_form).abs()
    }
}

/// Trapezoid time average of both kinetic forms over a snapshot window.
pub fn kinetic_functional(times: &[f64], sets: &[OrbitalSet], mass: f64) -> Result<KineticReport> {
    if times.len() != sets.len() {
        return Err(QfdError::param("window", "one time per snapshot"));
    }
    if sets.len() < 2 {
        return Err(QfdError::param("window", "at least two snapshots required"));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(QfdError::param("window", "times must increase"));
    }
    let vals: Vec<(f64, f64)> = sets.iter().map(|s| kinetic_forms(s, mass)).collect();
    let mut a = 0.0;
    let mut b = 0.0;
    for k in 1..sets.len() {
        let dt = times[k] - times[k - 1];
        a += 0.5 * dt * (vals[k].0 + vals[k - 1].0);
        b += 0.5 * dt * (vals[k].1 + vals[k - 1].1);
    }
    Ok(KineticReport {
        stencil_form: a / span,
        link_form: b / span,
        window: (times[0], times[times.len() - 1]),
        samples: sets.len(),
    })
}

// ---------------------------------------------------------------------------
// ε diagnostics

#[derive(Clone, Debug)]
pub struct OrbitalReport {
    pub q: RealField,
    /// Q_k + v_eff, NaN at the orbital's nodes.
    pub epsilon: RealField,
    pub mean: f64,
    pub std: f64,
    pub masked: usize,
}

/// Q_k from the orbital amplitude with the 3-point stencil of the
/// Hamiltonian, and ε_k = Q_k + v_eff.
pub fn orbital_diagnostics(os: &OrbitalSet, functional: &Functional, t: f64, mass: f64) -> Result<Vec<OrbitalReport>> {
    let v = functional.potential(&density(os), t)?;
    Ok(os
        .orbitals
        .iter()
        .map(|o| {
            let rho = o.density();
            let mask = hydro::node_mask(&rho, EPS_NODE);
            let r = rho.map(f64::sqrt);
            let q = hydro::quantum_potential_amplitude(&r, mass, QStencil::Amplitude, &mask);
            let eps = q.zip_map(&v, |a, b| a + b).expect("same grid");
            let live: Vec<f64> = eps.values().iter().copied().filter(|x| x.is_finite()).collect();
            let n = live.len().max(1) as f64;
            let mean = live.iter().sum::<f64>() / n;
            let std = (live.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            OrbitalReport {
                q,
                epsilon: eps,
                mean,
                std,
                masked: mask.iter().filter(|m| **m).count(),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Propagation

#[derive(Clone, Debug, PartialEq)]
pub struct KsDiagnostics {
    pub t: f64,
    pub integral_rho: f64,
    pub kinetic: f64,
    /// Time average of `kinetic` over the emissions so far.
    pub kinetic_running: f64,
    pub eps_std: Vec<f64>,
    pub ortho_drift: f64,
}

#[derive(Clone, Debug)]
pub struct KsRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<OrbitalSet>,
    pub final_set: OrbitalSet,
    pub diagnostics: Vec<KsDiagnostics>,
    /// max over steps of |∫ρ − N|.
    pub max_particle_deviation: f64,
    /// max over steps and orbitals of |‖φ_k‖² − 1|.
    pub max_norm_deviation: f64,
    pub steps: usize,
}

/// Advances all orbitals in lockstep. Each step uses v_eff built from the
/// density at the start of the step, with explicit time terms at the midpoint.
pub fn propagate_ks(os: &OrbitalSet, functional: &Functional, cfg: &PropagatorConfig, stride: usize) -> Result<KsRun> {
    if stride == 0 {
        return Err(QfdError::param("stride", "must be at least 1"));
    }
    let g = os.grid();
    let grid = Grid::One(g);
    let n_orb = os.len() as f64;
    let mut props = (0..os.len())
        .map(|_| Propagator::without_potential(grid, *cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut orbs = os.orbitals.clone();
    let mut v = vec![0.0; g.n_points()];
    let dt = cfg.dt;
    let n_steps = cfg.n_steps();

    let mut run = KsRun {
        times: Vec::new(),
        snapshots: Vec::new(),
        final_set: os.clone(),
        diagnostics: Vec::new(),
        max_particle_deviation: 0.0,
        max_norm_deviation: 0.0,
        steps: n_steps,
    };
    let emit = |set: OrbitalSet, t: f64, run: &mut KsRun| -> Result<()> {
        let rho = density(&set);
        let (kinetic, _) = kinetic_forms(&set, cfg.mass);
        let reports = orbital_diagnostics(&set, functional, t, cfg.mass)?;
        let kinetic_running = match (run.times.last(), run.diagnostics.last()) {
            (Some(&tp), Some(prev)) if t > run.times[0] => {
                let t0 = run.times[0];
                let acc = prev.kinetic_running * (tp - t0) + 0.5 * (t - tp) * (kinetic + prev.kinetic);
                acc / (t - t0)
            }
            _ => kinetic,
        };
        run.diagnostics.push(KsDiagnostics {
            t,
            integral_rho: ops::integrate(&rho),
            kinetic,
            kinetic_running,
            eps_std: reports.iter().map(|r| r.std).collect(),
            ortho_drift: set.orthonormality_drift(),
        });
        run.times.push(t);
        run.snapshots.push(set);
        Ok(())
    };
    emit(os.clone(), 0.0, &mut run)?;
    for s in 0..n_steps {
        let t = s as f64 * dt;
        let rho: Vec<f64> = {
            let set = OrbitalSet { orbitals: orbs.clone() };
            density(&set).into_values()
        };
        functional.potential_into(g, &rho, t + 0.5 * dt, &mut v)?;
        props
            .par_iter_mut()
            .zip(orbs.par_iter_mut())
            .try_for_each(|(p, o)| p.step_with_values(o, &v, t, dt))
            .map_err(|e| match e {
                QfdError::NonFinite { t, detail, .. } => QfdError::NonFinite { step: s + 1, t, detail },
                other => other,
            })?;
        let mut total = 0.0;
        for o in &orbs {
            let nk = o.norm_sqr();
            run.max_norm_deviation = run.max_norm_deviation.max((nk - 1.0).abs());
            total += nk;
        }
        run.max_particle_deviation = run.max_particle_deviation.max((total - n_orb).abs());
        if (s + 1) % stride == 0 {
            emit(OrbitalSet { orbitals: orbs.clone() }, (s + 1) as f64 * dt, &mut run)?;
        }
    }
    run.final_set = OrbitalSet { orbitals: orbs };
    Ok(run)
}

pub fn write_diagnostics_csv(rows: &[KsDiagnostics], mut w: impl Write) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.eps_std.len());
    write!(w, "t,integral_rho,T_s,T_s_running")?;
    for k in 1..=n {
        write!(w, ",eps_std_{k}")?;
    }
    writeln!(w, ",ortho_drift")?;
    for r in rows {
        write!(w, "{:e},{:e},{:e},{:e}", r.t, r.integral_rho, r.kinetic, r.kinetic_running)?;
        for s in &r.eps_std {
            write!(w, ",{s:e}")?;
        }
        writeln!(w, ",{:e}", r.ortho_drift)?;
    }
    Ok(())
}

/// ∂ₜρ + ∂ₓj over a uniformly spaced snapshot series, central in time.
pub fn continuity_audit(times: &[f64], sets: &[OrbitalSet], mass: f64) -> Result<Vec<ContinuityRow>> {
    if times.len() != sets.len() || sets.len() < 3 {
        return Err(QfdError::param("snapshots", "at least three snapshots with times required"));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(QfdError::param("snapshots", "non-uniform spacing"));
        }
    }
    (1..sets.len() - 1)
        .map(|k| {
            let rho = density(&sets[k]);
            let mask = hydro::node_mask(&rho, EPS_NODE);
            let r = hydro::continuity_residual_fields(
                &density(&sets[k - 1]),
                &density(&sets[k + 1]),
                &[current(&sets[k], mass)],
                dt,
                Some(&mask),
            )?;
            Ok(ContinuityRow {
                t: times[k],
                max: r.max,
                l2: r.l2,
                integral: r.integral,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Stationary limit

/// Lowest `count` eigenpairs of −(1/2m)∂² + v with the 3-point stencil,
/// as real orbitals normalized on the grid. Dirichlet walls are held at zero.
/// The largest-magnitude component of each orbital is positive.
pub fn lowest_orbitals(g: Grid1D, v: &[f64], count: usize, mass: f64) -> Result<(Vec<f64>, Vec<ComplexField>)> {
    let n = g.n_points();
    if v.len() != n {
        return Err(QfdError::GridMismatch("potential length".into()));
    }
    let kin = 1.0 / (2.0 * mass * g.dx() * g.dx());
    let (values, vectors) = match g.boundary() {
        Boundary::Dirichlet => {
            let d: Vec<f64> = v[1..n - 1].iter().map(|x| 2.0 * kin + x).collect();
            let (vals, vecs) = eigen::lowest_tridiagonal(&d, -kin, count)?;
            let padded = vecs
                .into_iter()
                .map(|u| {
                    let mut p = vec![0.0; n];
                    p[1..n - 1].copy_from_slice(&u);
                    p
                })
                .collect();
            (vals, padded)
        }
        Boundary::Periodic => {
            let m = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    2.0 * kin + v[i]
                } else if (i + 1) % n == j || (j + 1) % n == i {
                    -kin
                } else {
                    0.0
                }
            });
            eigen::lowest_dense(m, count)?
        }
    };
    let scale = 1.0 / g.dx().sqrt();
    let orbitals = vectors
        .into_iter()
        .map(|u| {
            let big = u.iter().cloned().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let s = if big < 0.0 { -scale } else { scale };
            ComplexField::new(g, u.iter().map(|x| Complex64::new(x * s, 0.0)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((values, orbitals))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScfConfig {
    /// Linear density mixing factor.
    pub alpha: f64,
    /// Stop when max |ρ_out − ρ_in| ≤ tol.
    pub tol: f64,
    pub max_iter: usize,
    pub mass: f64,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            tol: 1e-8,
            max_iter: 1000,
            mass: 1.0,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(QfdError::param("scf.alpha", "must be in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(QfdError::param("scf.tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(QfdError::param("scf.max_iter", "must be at least 1"));
        }
        if !(self.mass > 0.0) {
            return Err(QfdError::param("scf.mass", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ScfIterate {
    /// Density of the occupied eigenorbitals of v_eff[ρ_in].
    pub output: RealField,
    /// ρ_in + α (ρ_out − ρ_in).
    pub mixed: RealField,
    pub eigenvalues: Vec<f64>,
    pub orbitals: Vec<ComplexField>,
    /// max |ρ_out − ρ_in|.
    pub change: f64,
}

/// One diagonalize-occupy-mix iteration.
pub fn scf_iteration(rho_in: &RealField, count: usize, functional: &Functional, mass: f64, alpha: f64) -> Result<ScfIterate> {
    let v = functional.potential(rho_in, 0.0)?;
    let g = rho_in.grid().as_1d()?;
    let (eigenvalues, orbitals) = lowest_orbitals(g, v.values(), count, mass)?;
    let set = OrbitalSet { orbitals };
    let output = density(&set);
    let change = output
        .values()
        .iter()
        .zip(rho_in.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mixed = rho_in.zip_map(&output, |a, b| a + alpha * (b - a))?;
    Ok(ScfIterate {
        output,
        mixed,
        eigenvalues,
        orbitals: set.orbitals,
        change,
    })
}

#[derive(Clone, Debug)]
pub struct StationaryResult {
    pub orbitals: OrbitalSet,
    pub eigenvalues: Vec<f64>,
    pub density: RealField,
    pub iterations: usize,
    /// Density change per iteration.
    pub history: Vec<f64>,
}

/// Self-consistent stationary orbitals by repeated diagonalization with
/// linear density mixing, starting from the density of `os`.
pub fn stationary_limit(os: &OrbitalSet, functional: &Functional, scf: &ScfConfig) -> Result<StationaryResult> {
    scf.validate()?;
    if functional.is_time_dependent() {
        return Err(QfdError::param("functional", "stationary limit needs a time-independent functional"));
    }
    let mut rho = density(os);
    let mut history = Vec::new();
    for it in 1..=scf.max_iter {
        let step = scf_iteration(&rho, os.len(), functional, scf.mass, scf.alpha)?;
        history.push(step.change);
        if step.change <= scf.tol {
            let orbitals = OrbitalSet { orbitals: step.orbitals };
            return Ok(StationaryResult {
                density: density(&orbitals),
                orbitals,
                eigenvalues: step.eigenvalues,
                iterations: it,
                history,
            });
        }
        rho = step.mixed;
    }
    Err(QfdError::NotConverged {
        iterations: scf.max_iter,
        last_change: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
