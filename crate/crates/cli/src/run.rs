//! Pipelines behind `qfd run`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qfd_core::hydro::write_bundle;
use qfd_core::manybody::{
    antisymmetrize, compare, full_trajectories, hartree_trajectories, max_trajectory_deviation, product,
    propagate_full, propagate_hartree, symmetrize, symmetry_defect, write_comparison_csv, HartreeConfig, HartreeState,
    Symmetry, TwoBodyPotential, TwoBodyState,
};
use qfd_core::propagator::{propagate, Observer, Sample, SnapshotCollector, SnapshotWriter};
use qfd_core::qfdft::{
    continuity_audit as ks_continuity, density, kinetic_functional, propagate_ks, stationary_limit,
    write_diagnostics_csv, write_profile_csv, Functional, FunctionalConfig, OrbitalSet,
};
use qfd_core::reduced::{
    continuity_audit as rdm_continuity, purity_report, reduced_trajectories, write_continuity_csv, write_purity_csv,
    RdmRecorder,
};
use qfd_core::states::{harmonic_state, plane_wave, GaussianPacket};
use qfd_core::trajectories::{
    equivariance_check, integrate, sample_initial, IntegrateConfig, Sampling, TrajectorySet, VelocityRecorder,
    MIN_EQUIVARIANCE_TRAJ,
};
use qfd_core::{checks, decompose, io, ComplexField, Grid, Grid1D, PotentialSpec, PropagatorConfig, Result as CoreResult};

use crate::config::{Mode, ScenarioConfig, StateBlock, TrajectoryBlock};
use crate::error::CliError;

/// Numerical defaults filled in for omitted keys, and the seeds in use.
#[derive(Default, Debug)]
pub struct Applied {
    pub defaults: BTreeMap<String, serde_json::Value>,
    pub seeds: BTreeMap<String, u64>,
    /// Failing verdicts in check mode.
    pub failed_checks: usize,
}

impl Applied {
    fn default_value(&mut self, key: &str, v: impl Into<serde_json::Value>) {
        self.defaults.insert(key.to_string(), v.into());
    }
}

/// Output directories must be new or empty, so checksums cover one run only.
pub fn prepare_output(dir: &Path) -> std::result::Result<(), CliError> {
    if dir.exists() {
        let mut entries = std::fs::read_dir(dir).map_err(|e| CliError::Validation {
            field: "output_dir".into(),
            reason: format!("{}: {e}", dir.display()),
        })?;
        if entries.next().is_some() {
            return Err(CliError::Validation {
                field: "output_dir".into(),
                reason: format!("{} exists and is not empty", dir.display()),
            });
        }
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn execute(cfg: &ScenarioConfig, out: &Path) -> std::result::Result<Applied, CliError> {
    let mut applied = Applied::default();
    match cfg.mode {
        Mode::Check => run_check(cfg, out, &mut applied)?,
        Mode::Single => run_single(cfg, out, &mut applied)?,
        Mode::TwobodyFull | Mode::TwobodyHartree => run_twobody(cfg, out, &mut applied)?,
        Mode::Reduced => run_reduced(cfg, out, &mut applied)?,
        Mode::Qfdft => run_qfdft(cfg, out, &mut applied)?,
    }
    Ok(applied)
}

fn create(path: impl AsRef<Path>) -> CoreResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

enum Metric {
    Count(usize),
    Real(f64),
}

use Metric::{Count, Real};

fn write_summary(out: &Path, rows: &[(&str, Metric)]) -> CoreResult<()> {
    let mut w = create(out.join("summary.csv"))?;
    writeln!(w, "metric,value")?;
    for (k, v) in rows {
        match v {
            Count(n) => writeln!(w, "{k},{n}")?,
            Real(x) => writeln!(w, "{k},{x:e}")?,
        }
    }
    w.flush()?;
    Ok(())
}

fn run_check(cfg: &ScenarioConfig, out: &Path, applied: &mut Applied) -> std::result::Result<(), CliError> {
    let suite = &cfg.check.as_ref().expect("validated").suite;
    let verdicts = checks::run(suite)?;
    let mut w = create(out.join("verdicts.csv"))?;
    checks::write_verdicts_csv(&verdicts, &mut w)?;
    w.flush()?;
    applied.failed_checks = verdicts.iter().filter(|v| !v.pass).count();
    for v in &verdicts {
        eprintln!("{v}");
    }
    Ok(())
}

/// Time step and propagator settings with defaults resolved.
fn propagator_config(cfg: &ScenarioConfig, grid: &Grid, applied: &mut Applied) -> std::result::Result<(PropagatorConfig, usize), CliError> {
    let p = cfg.propagator.as_ref().expect("validated");
    let dt = match p.dt {
        Some(dt) => dt,
        None => {
            let dt = PropagatorConfig::default_dt(grid, p.mass);
            applied.default_value("propagator.dt", dt);
            dt
        }
    };
    let pc = PropagatorConfig::new(p.scheme.into(), dt, p.t_final).with_mass(p.mass);
    pc.validate(grid)?;
    Ok((pc, p.stride))
}

fn integrate_config(t: &TrajectoryBlock, snapshot_dt: f64, applied: &mut Applied) -> IntegrateConfig {
    let dt = t.dt.unwrap_or_else(|| {
        applied.default_value("trajectories.dt", snapshot_dt);
        snapshot_dt
    });
    let stride = t.stride.unwrap_or_else(|| {
        applied.default_value("trajectories.stride", 1);
        1
    });
    IntegrateConfig::new(dt, stride)
}

fn bins(t: &TrajectoryBlock, applied: &mut Applied) -> usize {
    t.bins.unwrap_or_else(|| {
        applied.default_value("trajectories.bins", 20);
        20
    })
}

/// Initial states on the scenario grid. Analytic states are renormalized on
/// the grid; stored ones must already be normalized.
fn initial_states(cfg: &ScenarioConfig, g: Grid1D) -> std::result::Result<Vec<ComplexField>, CliError> {
    cfg.state
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let psi = match s {
                StateBlock::Gaussian { center, sigma, k0 } => GaussianPacket::new(*center, *sigma, *k0).sample(g),
                StateBlock::Harmonic { level, omega } => {
                    harmonic_state(g, *level, *omega, cfg.propagator.as_ref().expect("validated").mass)
                }
                StateBlock::PlaneWave { k } => plane_wave(g, *k),
                StateBlock::File { path } => {
                    let (_, stored) = io::read_file(path)?;
                    let psi = stored.into_complex()?;
                    if *psi.grid() != Grid::from(g) {
                        return Err(CliError::Validation {
                            field: format!("state[{k}].path"),
                            reason: "stored field is not on the scenario grid".into(),
                        });
                    }
                    let n = psi.norm_sqr();
                    if (n - 1.0).abs() > 1e-8 {
                        return Err(CliError::Validation {
                            field: format!("state[{k}].path"),
                            reason: format!("stored field has norm² {n}, expected 1"),
                        });
                    }
                    return Ok(psi);
                }
            };
            psi.normalized().map_err(|e| CliError::Validation {
                field: format!("state[{k}]"),
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Hydro bundle of every emitted wavefunction under `dir`.
struct HydroWriter<'a> {
    dir: PathBuf,
    potential: &'a PotentialSpec,
    mass: f64,
}

impl Observer for HydroWriter<'_> {
    fn observe(&mut self, s: &Sample<'_>) -> CoreResult<()> {
        let hf = decompose(s.psi, self.potential, s.t, self.mass)?;
        write_bundle(&hf, &self.dir, &format!("t{:05}", s.index), s.t)?;
        Ok(())
    }
}

fn write_log(rec: &qfd_core::propagator::RunRecord, out: &Path) -> CoreResult<()> {
    rec.write_log_csv(create(out.join("log.csv"))?)
}

fn write_equivariance(out: &Path, name: &str, rep: &qfd_core::trajectories::EquivarianceReport) -> CoreResult<()> {
    let mut w = create(out.join(name))?;
    writeln!(w, "t,n,ks,ks_bound,chi2,chi2_bound,bins")?;
    writeln!(w, "{:e},{},{:e},{:e},{:e},{:e},{}", rep.t, rep.n, rep.ks, rep.ks_bound, rep.chi2, rep.chi2_bound, rep.bins)?;
    w.flush()?;
    Ok(())
}

fn run_single(cfg: &ScenarioConfig, out: &Path, applied: &mut Applied) -> std::result::Result<(), CliError> {
    let g = cfg.grid_1d()?;
    let v = cfg.potential_spec()?;
    let (pc, stride) = propagator_config(cfg, &g.into(), applied)?;
    let psi0 = initial_states(cfg, g)?.remove(0);

    let mut snaps = SnapshotWriter::new(out.join("snapshots"), "psi")?;
    let mut hydro = HydroWriter {
        dir: out.join("hydro"),
        potential: &v,
        mass: pc.mass,
    };
    let mut velocity = VelocityRecorder::new(pc.mass);
    let mut last = SnapshotCollector::default();
    let rec = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut snaps, &mut hydro];
        if cfg.trajectories.is_some() {
            observers.push(&mut velocity);
        }
        observers.push(&mut last);
        propagate(&psi0, &v, &pc, stride, &mut observers)?
    };
    write_log(&rec, out)?;
    let mut summary = vec![
        ("steps", Count(rec.steps)),
        ("max_norm_deviation", Real(rec.max_norm_deviation())),
        ("max_relative_energy_drift", Real(rec.max_relative_energy_drift())),
    ];

    if let Some(t) = &cfg.trajectories {
        applied.seeds.insert("trajectories.seed".into(), t.seed);
        let field = velocity.finish()?;
        let t1 = *last.times.last().expect("at least one emission");
        let icfg = integrate_config(t, stride as f64 * pc.dt, applied);
        let start = sample_initial(&psi0.density(), t.n, t.seed)?;
        let ts = TrajectorySet::new(1, 0.0, start, t.seed, Sampling::InverseCdf);
        let traj = integrate(&ts, &field, t1, &icfg)?;
        traj.write_files(out, "ensemble")?;
        let ok = traj.flags.iter().filter(|f| f.is_ok()).count();
        summary.push(("trajectories_ok", Count(ok)));
        if t.n >= MIN_EQUIVARIANCE_TRAJ {
            let rho_t = last.snapshots.last().expect("at least one emission").density();
            let rep = equivariance_check(&traj, &rho_t, t1, bins(t, applied))?;
            write_equivariance(out, "equivariance.csv", &rep)?;
        }
    }
    write_summary(out, &summary)?;
    Ok(())
}

fn two_body_start(cfg: &ScenarioConfig, g: Grid1D) -> std::result::Result<(ComplexField, ComplexField, ComplexField, Symmetry), CliError> {
    let mut states = initial_states(cfg, g)?;
    let b = states.pop().expect("two states");
    let a = states.pop().expect("two states");
    let symmetry = cfg.twobody.as_ref().expect("validated").symmetry;
    let prod = product(&a, &b)?;
    let psi = match symmetry {
        Symmetry::None => prod,
        Symmetry::Symmetric => symmetrize(&prod)?,
        Symmetry::Antisymmetric => antisymmetrize(&prod)?,
    };
    Ok((a, b, psi, symmetry))
}

fn run_twobody(cfg: &ScenarioConfig, out: &Path, applied: &mut Applied) -> std::result::Result<(), CliError> {
    let g = cfg.grid_1d()?;
    let ext = cfg.potential_spec()?;
    let interaction = cfg.interaction()?;
    let (a, b, psi, symmetry) = two_body_start(cfg, g)?;
    let g2 = qfd_core::Grid2D::square(g);
    let (pc, stride) = propagator_config(cfg, &g2.into(), applied)?;
    let pot = TwoBodyPotential {
        external: ext.clone(),
        interaction,
    };
    let state = TwoBodyState::new(psi, pot, symmetry)?;

    let mut writer = SnapshotWriter::new(out.join("snapshots"), "psi")?;
    let mut coll = SnapshotCollector::default();
    let rec = propagate_full(&state, &pc, stride, &mut [&mut writer, &mut coll])?;
    write_log(&rec, out)?;
    let mut summary = vec![
        ("steps", Count(rec.steps)),
        ("max_norm_deviation", Real(rec.max_norm_deviation())),
        ("max_relative_energy_drift", Real(rec.max_relative_energy_drift())),
    ];
    if symmetry != Symmetry::None {
        summary.push(("final_symmetry_defect", Real(symmetry_defect(&rec.final_psi, symmetry)?)));
    }

    let hartree = if cfg.mode == Mode::TwobodyHartree {
        let pcorr = cfg.twobody.as_ref().expect("validated").predictor_corrector.unwrap_or_else(|| {
            applied.default_value("twobody.predictor_corrector", false);
            false
        });
        let h = HartreeState::new([a, b], ext, interaction)?;
        let run = propagate_hartree(
            &h,
            &HartreeConfig {
                propagator: pc,
                predictor_corrector: pcorr,
            },
            stride,
        )?;
        std::fs::create_dir_all(out.join("orbitals"))?;
        for (s, (t, orbs)) in run.times.iter().zip(&run.snapshots).enumerate() {
            for (k, o) in orbs.iter().enumerate() {
                io::write_complex_file(out.join("orbitals").join(format!("orbital{}_{s:05}.qfdf", k + 1)), o, *t)?;
            }
        }
        let rows = compare(&coll.snapshots, &run, symmetry, pc.mass)?;
        let mut w = create(out.join("comparison.csv"))?;
        write_comparison_csv(&rows, &mut w)?;
        w.flush()?;
        summary.push(("hartree_max_norm_deviation", Real(run.max_norm_deviation)));
        Some(run)
    } else {
        None
    };

    if let Some(t) = &cfg.trajectories {
        applied.seeds.insert("trajectories.seed".into(), t.seed);
        let icfg = integrate_config(t, stride as f64 * pc.dt, applied);
        let init = sample_initial(&state.psi.density(), t.n, t.seed)?;
        let full = full_trajectories(&coll.times, &coll.snapshots, pc.mass, init.clone(), t.seed, Sampling::InverseCdf, &icfg)?;
        for (k, ts) in full.iter().enumerate() {
            ts.write_files(out, &format!("full_particle{}", k + 1))?;
        }
        if let Some(run) = &hartree {
            let hart = hartree_trajectories(run, pc.mass, &init, t.seed, Sampling::InverseCdf, &icfg)?;
            for (k, ts) in hart.iter().enumerate() {
                ts.write_files(out, &format!("hartree_particle{}", k + 1))?;
            }
            summary.push(("max_trajectory_deviation", Real(max_trajectory_deviation(&full, &hart)?)));
        }
    }
    write_summary(out, &summary)?;
    Ok(())
}

fn run_reduced(cfg: &ScenarioConfig, out: &Path, applied: &mut Applied) -> std::result::Result<(), CliError> {
    let g = cfg.grid_1d()?;
    let (_, _, psi, symmetry) = two_body_start(cfg, g)?;
    let g2 = qfd_core::Grid2D::square(g);
    let (pc, stride) = propagator_config(cfg, &g2.into(), applied)?;
    let pot = TwoBodyPotential {
        external: cfg.potential_spec()?,
        interaction: cfg.interaction()?,
    };
    let state = TwoBodyState::new(psi, pot, symmetry)?;
    let mut rec = RdmRecorder::checked();
    let run = propagate_full(&state, &pc, stride, &mut [&mut rec])?;
    let rdms = rec.rdms;

    std::fs::create_dir_all(out.join("rdm"))?;
    for (s, r) in rdms.iter().enumerate() {
        r.write_file(out.join("rdm").join(format!("rdm_{s:05}.qfdf")))?;
    }
    let mut w = create(out.join("purity.csv"))?;
    write_purity_csv(&rdms.iter().map(purity_report).collect::<Vec<_>>(), &mut w)?;
    w.flush()?;
    let mut summary = vec![("steps", Count(run.steps)), ("max_norm_deviation", Real(run.max_norm_deviation()))];
    if rdms.len() >= 3 {
        let rows = rdm_continuity(&rdms, pc.mass)?;
        let mut w = create(out.join("continuity.csv"))?;
        write_continuity_csv(&rows, &mut w)?;
        w.flush()?;
        summary.push(("max_continuity_residual", Real(rows.iter().map(|r| r.max).fold(0.0, f64::max))));
    }
    if let Some(t) = &cfg.trajectories {
        applied.seeds.insert("trajectories.seed".into(), t.seed);
        let icfg = integrate_config(t, stride as f64 * pc.dt, applied);
        let traj = reduced_trajectories(&rdms, pc.mass, t.n, t.seed, &icfg)?;
        traj.write_files(out, "reduced")?;
        if t.n >= MIN_EQUIVARIANCE_TRAJ {
            let last = rdms.last().expect("at least one emission");
            let rep = equivariance_check(&traj, &last.diagonal(), last.time(), bins(t, applied))?;
            write_equivariance(out, "equivariance.csv", &rep)?;
        }
    }
    write_summary(out, &summary)?;
    Ok(())
}

fn run_qfdft(cfg: &ScenarioConfig, out: &Path, applied: &mut Applied) -> std::result::Result<(), CliError> {
    let g = cfg.grid_1d()?;
    let (pc, stride) = propagator_config(cfg, &g.into(), applied)?;
    let fb = cfg.functional.as_ref().expect("validated");
    let mut fc = FunctionalConfig::external(cfg.potential_spec()?).with_xc(fb.xc.clone());
    if fb.hartree {
        fc = fc.with_hartree(cfg.interaction()?);
    }
    let functional = Functional::new(&fc)?;
    let mut set = OrbitalSet::orthonormalize(initial_states(cfg, g)?)?;
    let mut summary = Vec::new();

    if fb.stationary {
        let scf = cfg.scf_config()?;
        let given = cfg.scf.clone().unwrap_or(crate::config::ScfBlock {
            alpha: None,
            tol: None,
            max_iter: None,
        });
        if given.alpha.is_none() {
            applied.default_value("scf.alpha", scf.alpha);
        }
        if given.tol.is_none() {
            applied.default_value("scf.tol", scf.tol);
        }
        if given.max_iter.is_none() {
            applied.default_value("scf.max_iter", scf.max_iter);
        }
        let res = stationary_limit(&set, &functional, &scf)?;
        let mut w = create(out.join("scf_history.csv"))?;
        writeln!(w, "iteration,density_change")?;
        for (k, c) in res.history.iter().enumerate() {
            writeln!(w, "{},{c:e}", k + 1)?;
        }
        w.flush()?;
        let mut w = create(out.join("eigenvalues.csv"))?;
        writeln!(w, "orbital,eigenvalue")?;
        for (k, e) in res.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{e:e}", k + 1)?;
        }
        w.flush()?;
        summary.push(("scf_iterations", Count(res.iterations)));
        set = res.orbitals;
    }

    let run = propagate_ks(&set, &functional, &pc, stride)?;
    let mut w = create(out.join("diagnostics.csv"))?;
    write_diagnostics_csv(&run.diagnostics, &mut w)?;
    w.flush()?;
    std::fs::create_dir_all(out.join("orbitals"))?;
    std::fs::create_dir_all(out.join("profiles"))?;
    for (s, (t, snap)) in run.times.iter().zip(&run.snapshots).enumerate() {
        for (k, o) in snap.orbitals().iter().enumerate() {
            io::write_complex_file(out.join("orbitals").join(format!("orbital{}_{s:05}.qfdf", k + 1)), o, *t)?;
        }
        io::write_real_file(out.join("profiles").join(format!("density_{s:05}.qfdf")), &density(snap), *t)?;
        let mut w = create(out.join("profiles").join(format!("profile_{s:05}.csv")))?;
        write_profile_csv(snap, pc.mass, &mut w)?;
        w.flush()?;
    }
    if run.snapshots.len() >= 3 {
        let rows = ks_continuity(&run.times, &run.snapshots, pc.mass)?;
        let mut w = create(out.join("continuity.csv"))?;
        write_continuity_csv(&rows, &mut w)?;
        w.flush()?;
        summary.push(("max_continuity_residual", Real(rows.iter().map(|r| r.max).fold(0.0, f64::max))));
    }
    if run.snapshots.len() >= 2 {
        let k = kinetic_functional(&run.times, &run.snapshots, pc.mass)?;
        summary.push(("kinetic_stencil_form", Real(k.stencil_form)));
        summary.push(("kinetic_link_form", Real(k.link_form)));
        summary.push(("kinetic_form_difference", Real(k.difference())));
    }
    summary.push(("steps", Count(run.steps)));
    summary.push(("max_particle_deviation", Real(run.max_particle_deviation)));
    summary.push(("max_norm_deviation", Real(run.max_norm_deviation)));
    write_summary(out, &summary)?;
    Ok(())
}
