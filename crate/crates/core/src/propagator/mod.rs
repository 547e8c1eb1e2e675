//! Time evolution under i∂ψ/∂t = [−(1/2m)∇² + V(r, t)] ψ (atomic units).

mod crank_nicolson;
mod split_operator;
pub(crate) mod tridiag;

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use crank_nicolson::plane_wave_phase as cn_plane_wave_phase;
use crank_nicolson::CrankNicolson;
use split_operator::SplitOperator;

use crate::error::{QfdError, Result};
use crate::field::ComplexField;
use crate::grid::{Grid, Grid1D};
use crate::ops;
use crate::potential::Potential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SplitOperator,
    CrankNicolson,
}

/// Complex absorbing potential −iW with a quartic ramp over the outer
/// `fraction` of each axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingBoundary {
    pub strength: f64,
    pub fraction: f64,
}

impl Default for AbsorbingBoundary {
    fn default() -> Self {
        Self {
            strength: 1.0,
            fraction: 0.1,
        }
    }
}

impl AbsorbingBoundary {
    fn line(&self, g: &Grid1D) -> Vec<f64> {
        let n = g.n_points();
        let ramp = (self.fraction * n as f64).max(1.0);
        (0..n)
            .map(|i| {
                let from_edge = i.min(n - 1 - i) as f64;
                if from_edge >= ramp {
                    0.0
                } else {
                    let s = (ramp - from_edge) / ramp;
                    self.strength * s.powi(4)
                }
            })
            .collect()
    }

    pub fn profile(&self, grid: &Grid) -> Vec<f64> {
        match grid {
            Grid::One(g) => self.line(g),
            Grid::Two(g) => {
                let wx = self.line(&g.gx);
                let wy = self.line(&g.gy);
                wx.iter().flat_map(|a| wy.iter().map(move |b| a + b)).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub mass: f64,
    pub t_final: f64,
    pub absorbing: Option<AbsorbingBoundary>,
}

impl PropagatorConfig {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            scheme,
            mass: 1.0,
            t_final,
            absorbing: None,
        }
    }

    /// 0.01 · m · dx² (ħ = 1), using the finest axis.
    pub fn default_dt(grid: &Grid, mass: f64) -> f64 {
        let dx = match grid {
            Grid::One(g) => g.dx(),
            Grid::Two(g) => g.gx.dx().min(g.gy.dx()),
        };
        0.01 * mass * dx * dx
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_absorbing(mut self, cap: AbsorbingBoundary) -> Self {
        self.absorbing = Some(cap);
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(QfdError::param("propagator.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(QfdError::param("propagator.mass", format!("must be positive, got {}", self.mass)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(QfdError::param("propagator.t_final", format!("must be non-negative, got {}", self.t_final)));
        }
        if self.scheme == Scheme::SplitOperator && !grid.is_periodic() {
            return Err(QfdError::param("propagator.scheme", "split_operator requires a periodic grid"));
        }
        if let Some(cap) = self.absorbing {
            if !(cap.strength >= 0.0) || !(cap.fraction > 0.0 && cap.fraction < 0.5) {
                return Err(QfdError::param("propagator.absorbing", "strength ≥ 0 and 0 < fraction < 0.5"));
            }
        }
        Ok(())
    }
}

enum Engine {
    Split(SplitOperator),
    Cn(CrankNicolson),
}

/// A reusable stepper bound to one grid and configuration.
pub struct Propagator<'p> {
    grid: Grid,
    cfg: PropagatorConfig,
    engine: Engine,
    potential: Option<&'p dyn Potential>,
    static_v: Option<Vec<f64>>,
    absorb: Option<Vec<f64>>,
    vbuf: Vec<f64>,
}

impl<'p> Propagator<'p> {
    pub fn new(grid: Grid, potential: &'p dyn Potential, cfg: PropagatorConfig) -> Result<Self> {
        let mut p = Self::without_potential(grid, cfg)?;
        if !potential.is_time_dependent() {
            p.static_v = Some(potential.evaluate(&grid, 0.0)?.into_values());
        }
        p.potential = Some(potential);
        Ok(p)
    }

    /// Stepper whose potential values are supplied on every call
    /// (mean-field and Kohn–Sham drivers).
    pub fn without_potential(grid: Grid, cfg: PropagatorConfig) -> Result<Self> {
        cfg.validate(&grid)?;
        let engine = match cfg.scheme {
            Scheme::SplitOperator => Engine::Split(SplitOperator::new(grid, cfg.mass)?),
            Scheme::CrankNicolson => Engine::Cn(CrankNicolson::new(grid, cfg.mass)),
        };
        Ok(Self {
            grid,
            cfg,
            engine,
            potential: None,
            static_v: None,
            absorb: cfg.absorbing.map(|c| c.profile(&grid)),
            vbuf: vec![0.0; grid.len()],
        })
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Advances ψ(t) → ψ(t + dt) using the configured step.
    pub fn step(&mut self, psi: &mut ComplexField, t: f64) -> Result<()> {
        self.step_by(psi, t, self.cfg.dt)
    }

    /// Advances by a signed `dt`; the potential is sampled at the midpoint.
    pub fn step_by(&mut self, psi: &mut ComplexField, t: f64, dt: f64) -> Result<()> {
        let pot = self
            .potential
            .ok_or_else(|| QfdError::param("potential", "propagator built without a potential"))?;
        let mut v = std::mem::take(&mut self.vbuf);
        match &self.static_v {
            Some(sv) => v.copy_from_slice(sv),
            None => pot.eval_into(&self.grid, t + 0.5 * dt, &mut v)?,
        }
        let r = self.step_with_values(psi, &v, t, dt);
        self.vbuf = v;
        r
    }

    /// Advances by `dt` under explicitly supplied potential values.
    pub fn step_with_values(&mut self, psi: &mut ComplexField, v: &[f64], t: f64, dt: f64) -> Result<()> {
        self.grid.ensure_same(psi.grid())?;
        let absorb = self.absorb.as_deref();
        let values = psi.values_mut();
        match &mut self.engine {
            Engine::Split(e) => e.apply(values, v, absorb, dt),
            Engine::Cn(e) => e.apply(values, v, absorb, dt),
        }
        if !psi.all_finite() {
            return Err(QfdError::NonFinite {
                step: 0,
                t: t + dt,
                detail: "wavefunction became non-finite (dt too large or singular potential)".into(),
            });
        }
        Ok(())
    }

    /// Kinetic energy consistent with the scheme (spectral or 3-point stencil).
    pub fn kinetic_energy(&mut self, psi: &ComplexField) -> f64 {
        match &mut self.engine {
            Engine::Split(e) => e.kinetic_energy(psi.values()),
            Engine::Cn(_) => fd_kinetic_energy(psi, self.cfg.mass),
        }
    }

    /// ⟨ψ|H|ψ⟩ at time `t` (the absorbing term is excluded).
    pub fn energy(&mut self, psi: &ComplexField, t: f64) -> Result<f64> {
        let pot = self
            .potential
            .ok_or_else(|| QfdError::param("potential", "propagator built without a potential"))?;
        let v = match &self.static_v {
            Some(sv) => sv.clone(),
            None => pot.evaluate(&self.grid, t)?.into_values(),
        };
        Ok(self.energy_with_values(psi, &v))
    }

    pub fn energy_with_values(&mut self, psi: &ComplexField, v: &[f64]) -> f64 {
        let t = self.kinetic_energy(psi);
        let grid = *psi.grid();
        let pe: f64 = psi
            .values()
            .iter()
            .zip(v)
            .enumerate()
            .map(|(k, (p, vk))| p.norm_sqr() * vk * grid.weight(k))
            .sum();
        t + pe
    }
}

/// −(1/2m) ∫ Re(ψ* ∇²ψ) with the 3-point stencil.
pub fn fd_kinetic_energy(psi: &ComplexField, mass: f64) -> f64 {
    let lap = ops::laplacian(psi);
    let grid = *psi.grid();
    let s: f64 = psi
        .values()
        .iter()
        .zip(lap.values())
        .enumerate()
        .map(|(k, (p, l))| (p.conj() * l).re * grid.weight(k))
        .sum();
    -s / (2.0 * mass)
}

/// Single step as a pure function.
pub fn step(psi: &ComplexField, potential: &dyn Potential, cfg: &PropagatorConfig, t: f64) -> Result<ComplexField> {
    let mut p = Propagator::new(*psi.grid(), potential, *cfg)?;
    let mut out = psi.clone();
    p.step(&mut out, t)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Runs and observers

/// What an observer sees at each emission.
pub struct Sample<'a> {
    /// Ordinal of this emission (0 for t = 0).
    pub index: usize,
    pub step: usize,
    pub t: f64,
    pub psi: &'a ComplexField,
}

/// Read-only hook invoked at the configured stride.
pub trait Observer {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()>;
}

impl<F: FnMut(&Sample<'_>) -> Result<()>> Observer for F {
    fn observe(&mut self, sample: &Sample<'_>) -> Result<()> {
        self(sample)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
    pub absorbed_flux: f64,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub final_psi: ComplexField,
    pub log: Vec<LogRow>,
    pub steps: usize,
    pub emissions: usize,
}

impl RunRecord {
    pub fn max_norm_deviation(&self) -> f64 {
        self.log.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let e0 = self.log.first().map_or(0.0, |r| r.energy);
        self.log
            .iter()
            .map(|r| ((r.energy - e0) / e0.abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max)
    }

    /// CSV log: `t,norm,energy,absorbed_flux`.
    pub fn write_log_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "t,norm,energy,absorbed_flux")?;
        for r in &self.log {
            writeln!(w, "{:e},{:e},{:e},{:e}", r.t, r.norm, r.energy, r.absorbed_flux)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterates `step` from t = 0 to `cfg.t_final`, emitting to every observer at
/// step 0 and each multiple of `stride`.
pub fn propagate(
    psi0: &ComplexField,
    potential: &dyn Potential,
    cfg: &PropagatorConfig,
    stride: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<RunRecord> {
    if stride == 0 {
        return Err(QfdError::param("stride", "must be at least 1"));
    }
    let mut prop = Propagator::new(*psi0.grid(), potential, *cfg)?;
    let mut psi = psi0.clone();
    let n_steps = cfg.n_steps();
    let mut log = Vec::new();
    let mut emissions = 0;
    let absorbing = cfg.absorbing.is_some();
    let norm0 = psi.norm_sqr();

    let mut emit = |prop: &mut Propagator, psi: &ComplexField, step: usize, t: f64, log: &mut Vec<LogRow>| -> Result<()> {
        let norm = psi.norm_sqr();
        let energy = prop.energy(psi, t)?;
        log.push(LogRow {
            t,
            norm,
            energy,
            absorbed_flux: if absorbing { norm0 - norm } else { 0.0 },
        });
        let sample = Sample {
            index: emissions,
            step,
            t,
            psi,
        };
        for obs in observers.iter_mut() {
            obs.observe(&sample)?;
        }
        emissions += 1;
        Ok(())
    };

    emit(&mut prop, &psi, 0, 0.0, &mut log)?;
    for s in 0..n_steps {
        let t = s as f64 * cfg.dt;
        prop.step(&mut psi, t).map_err(|e| match e {
            QfdError::NonFinite { t, detail, .. } => QfdError::NonFinite { step: s + 1, t, detail },
            other => other,
        })?;
        if (s + 1) % stride == 0 {
            emit(&mut prop, &psi, s + 1, (s + 1) as f64 * cfg.dt, &mut log)?;
        }
    }
    Ok(RunRecord {
        final_psi: psi,
        log,
        steps: n_steps,
        emissions,
    })
}

/// Keeps every emitted wavefunction in memory.
#[derive(Default)]
pub struct SnapshotCollector {
    pub times: Vec<f64>,
    pub snapshots: Vec<ComplexField>,
}

impl Observer for SnapshotCollector {
    fn observe(&mut self, s: &Sample<'_>) -> Result<()> {
        self.times.push(s.t);
        self.snapshots.push(s.psi.clone());
        Ok(())
    }
}

/// Tracks max |‖ψ‖² − 1|.
#[derive(Default)]
pub struct NormMonitor {
    pub max_deviation: f64,
    pub samples: usize,
}

impl Observer for NormMonitor {
    fn observe(&mut self, s: &Sample<'_>) -> Result<()> {
        self.max_deviation = self.max_deviation.max((s.psi.norm_sqr() - 1.0).abs());
        self.samples += 1;
        Ok(())
    }
}

/// Writes each emission as `<dir>/<prefix>_<index>.qfdf`.
pub struct SnapshotWriter {
    dir: PathBuf,
    prefix: String,
    pub files: Vec<PathBuf>,
}

impl SnapshotWriter {
    pub fn new(dir: impl AsRef<Path>, prefix: impl Into<String>) -> Result<Self> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
            prefix: prefix.into(),
            files: Vec::new(),
        })
    }
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, s: &Sample<'_>) -> Result<()> {
        let path = self.dir.join(format!("{}_{:05}.qfdf", self.prefix, s.index));
        crate::io::write_complex_file(&path, s.psi, s.t).map_err(|e| QfdError::Observer(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

/// ψ(x) e^{iα}: convenience for gauge checks.
pub fn with_global_phase(psi: &ComplexField, alpha: f64) -> ComplexField {
    let mut out = psi.clone();
    out.scale(Complex64::from_polar(1.0, alpha));
    out
}
