//! Single-particle suites.

use std::f64::consts::PI;

use super::{coupled, max_abs_diff_real, Relation, Sheet, Verdict};
use crate::error::Result;
use crate::hydro::{
    circle_loop, circulation, circulation_polygon, continuity_residual, node_mask, quantum_potential_rho,
    rectangle_loop, QStencil, EPS_NODE,
};
use crate::propagator::{propagate, with_global_phase, NormMonitor, SnapshotCollector};
use crate::qfdft::{lowest_orbitals, orbital_diagnostics, Functional, FunctionalConfig, OrbitalSet};
use crate::states::{harmonic_energy, harmonic_state, plane_wave, single_vortex, superpose, GaussianPacket};
use crate::trajectories::{
    equivariance_check, integrate, sample_initial, EquivarianceReport, IntegrateConfig, Sampling, TrajectorySet,
    VelocityRecorder,
};
use crate::{
    decompose, Complex64, ComplexField, Grid1D, Grid2D, HydroFields, PotentialSpec, Propagator, PropagatorConfig,
    RealField, Scheme,
};

const SEED_FREE: u64 = 2024;
const SEED_BARRIER: u64 = 99;

/// Largest |f| over unmasked finite entries.
fn max_unmasked(values: &[f64], mask: &[bool], f: impl Fn(usize, f64) -> f64) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(k, v)| !mask[*k] && v.is_finite())
        .map(|(k, v)| f(k, *v).abs())
        .fold(0.0, f64::max)
}

pub(super) fn conservation() -> Vec<Verdict> {
    let mut s = Sheet::new("conservation");
    for (scheme, tag) in [(Scheme::SplitOperator, "split_operator"), (Scheme::CrankNicolson, "crank_nicolson")] {
        s.group(
            [
                (&*format!("norm_drift_{tag}"), Relation::AtMost, 1e-8),
                (&*format!("energy_drift_{tag}"), Relation::AtMost, 1e-6),
            ],
            long_run(scheme),
        );
    }
    let ratio = |a: Result<f64>, b: Result<f64>| Ok(a? / b?);
    s.at_least("continuity_order_free_gaussian", 3.5, ratio(free_continuity(400), free_continuity(800)));
    s.at_least(
        "continuity_order_two_body",
        3.5,
        ratio(coupled::two_body_continuity(96, 0.0025), coupled::two_body_continuity(192, 0.00125)),
    );
    s.at_least(
        "continuity_order_kohn_sham",
        3.5,
        ratio(coupled::ks_continuity(201, 0.005), coupled::ks_continuity(401, 0.0025)),
    );
    s.finish()
}

/// 10⁴ steps of a packet hitting a barrier.
fn long_run(scheme: Scheme) -> Result<[f64; 2]> {
    let g = match scheme {
        Scheme::SplitOperator => Grid1D::periodic(-25.0, 50.0, 512)?,
        Scheme::CrankNicolson => Grid1D::dirichlet(-25.0, 25.0, 513)?,
    };
    let psi0 = GaussianPacket::new(-3.0, 1.0, 1.5).sample(g).normalized()?;
    let barrier = PotentialSpec::gaussian_barrier(1.0, 0.5, 3.0);
    let mut mon = NormMonitor::default();
    let rec = propagate(&psi0, &barrier, &PropagatorConfig::new(scheme, 5e-4, 5.0), 100, &mut [&mut mon])?;
    Ok([mon.max_deviation, rec.max_relative_energy_drift()])
}

/// Max continuity residual for a moving free packet, dt tied to dx.
fn free_continuity(n: usize) -> Result<f64> {
    let g = Grid1D::periodic(-20.0, 40.0, n)?;
    let dt = 0.1 * g.dx();
    let t = 0.5;
    let steps = (t / dt).round() as usize;
    let free = PotentialSpec::free();
    let mut p = Propagator::new(g.into(), &free, PropagatorConfig::new(Scheme::SplitOperator, dt, t))?;
    let mut psi = GaussianPacket::new(-2.0, 1.0, 1.0).sample(g);
    let mut snaps: Vec<HydroFields> = Vec::with_capacity(3);
    for s in 0..=steps + 1 {
        if s + 1 >= steps {
            snaps.push(decompose(&psi, &free, s as f64 * dt, 1.0)?);
        }
        if s <= steps {
            p.step(&mut psi, s as f64 * dt)?;
        }
    }
    Ok(continuity_residual(&snaps[0], &snaps[1], &snaps[2], dt)?.max)
}

fn density_width(rho: &RealField, g: &Grid1D) -> f64 {
    let w = |i: usize| g.weight(i);
    let mean: f64 = rho.values().iter().enumerate().map(|(i, r)| r * g.x(i) * w(i)).sum();
    let var: f64 = rho.values().iter().enumerate().map(|(i, r)| r * (g.x(i) - mean).powi(2) * w(i)).sum();
    var.sqrt()
}

pub(super) fn analytic() -> Vec<Verdict> {
    let mut s = Sheet::new("analytic");
    s.at_most("free_width_law", 1e-3, free_width());
    s.at_most("free_trajectory_law", 1e-3, free_trajectories());
    s.group(
        [
            ("harmonic_velocity", Relation::AtMost, 1e-12),
            ("harmonic_effective_potential", Relation::AtMost, 1e-6),
        ],
        harmonic_static(),
    );
    s.at_most("orbital_energy_identity", 1e-6, orbital_identity());
    s.group(
        [
            ("plane_wave_quantum_potential", Relation::AtMost, 1e-8),
            ("plane_wave_velocity", Relation::AtMost, 1e-5),
        ],
        plane_wave_fields(),
    );
    s.finish()
}

fn free_width() -> Result<f64> {
    let g = Grid1D::periodic(-20.0, 40.0, 1024)?;
    let packet = GaussianPacket::new(0.0, 1.0, 0.0);
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, 0.004, 2.0);
    let rec = propagate(&packet.sample(g), &PotentialSpec::free(), &cfg, 500, &mut [])?;
    let exact = packet.free_width(2.0, 1.0);
    Ok(((density_width(&rec.final_psi.density(), &g) - exact) / exact).abs())
}

/// Worst relative deviation from x₀σ(t)/σ₀ at t = 2.
fn free_trajectories() -> Result<f64> {
    let g = Grid1D::periodic(-20.0, 40.0, 1024)?;
    let packet = GaussianPacket::new(0.0, 1.0, 0.0);
    let t1 = 2.0;
    let mut rec = VelocityRecorder::new(1.0);
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, 0.005, t1);
    propagate(&packet.sample(g), &PotentialSpec::free(), &cfg, 4, &mut [&mut rec])?;
    let snaps = rec.finish()?;
    let xs: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).filter(|x| x.abs() > 0.05).collect();
    let out = integrate(&TrajectorySet::from_list_1d(0.0, &xs), &snaps, t1, &IntegrateConfig::new(0.01, 1))?;
    let mut worst = 0.0f64;
    for (k, x0) in xs.iter().enumerate() {
        let exact = packet.free_trajectory(*x0, t1, 1.0);
        worst = worst.max(((out.positions[k].last().unwrap()[0] - exact) / exact).abs());
    }
    Ok(worst)
}

fn harmonic_static() -> Result<[f64; 2]> {
    let omega = 1.3;
    let g = Grid1D::periodic(-10.0, 20.0, 1000)?;
    let hf = decompose(&harmonic_state(g, 0, omega, 1.0), &PotentialSpec::harmonic(omega), 0.0, 1.0)?;
    let e0 = harmonic_energy(0, omega, 1.0);
    let v = max_unmasked(hf.velocity[0].values(), &hf.node_mask, |_, v| v);
    let veff = max_unmasked(hf.v_eff.values(), &hf.node_mask, |_, x| x - e0);
    Ok([v, veff])
}

/// Q + v_eff against the eigenvalue of the lowest discrete orbital.
fn orbital_identity() -> Result<f64> {
    let g = Grid1D::dirichlet(-8.0, 8.0, 1001)?;
    let v = PotentialSpec::harmonic(1.0);
    let (eps, orbs) = lowest_orbitals(g, &v.line_values(&g, 0.0)?, 1, 1.0)?;
    let f = Functional::new(&FunctionalConfig::external(v))?;
    let rep = orbital_diagnostics(&OrbitalSet::new(orbs)?, &f, 0.0, 1.0)?;
    let e = rep[0].epsilon.values();
    Ok(e.iter().filter(|x| x.is_finite()).map(|x| (x - eps[0]).abs()).fold(0.0, f64::max))
}

fn plane_wave_fields() -> Result<[f64; 2]> {
    let g = Grid1D::periodic(0.0, 2.0 * PI, 1024)?;
    let k = 1.0;
    let hf = decompose(&plane_wave(g, k), &PotentialSpec::free(), 0.0, 1.0)?;
    let q = max_unmasked(hf.q_potential.values(), &hf.node_mask, |_, q| q);
    let v = max_unmasked(hf.velocity[0].values(), &hf.node_mask, |_, v| (v - k) / k);
    Ok([q, v])
}

pub(super) fn scale_gauge() -> Vec<Verdict> {
    let mut s = Sheet::new("scale_gauge");
    s.at_most("quantum_potential_scale_invariance", 1e-12, scale_invariance());
    s.at_most("global_phase_invariance", 1e-10, gauge_invariance());
    s.finish()
}

fn scale_invariance() -> Result<f64> {
    let g = Grid1D::periodic(-10.0, 20.0, 400)?;
    let a = GaussianPacket::new(-2.0, 0.9, 1.0).sample(g);
    let b = GaussianPacket::new(2.5, 0.6, -0.5).sample(g);
    let rho = superpose(&a, Complex64::new(1.0, 0.0), &b, Complex64::new(0.3, 0.4))?.density();
    let mask = node_mask(&rho, EPS_NODE);
    let q = quantum_potential_rho(&rho, 1.0, QStencil::LogRatio, &mask);
    let mut worst = 0.0f64;
    for c in [1e-6, 0.37, 42.0, 1e5] {
        let qs = quantum_potential_rho(&rho.map(|r| c * r), 1.0, QStencil::LogRatio, &mask);
        worst = worst.max(max_unmasked(q.values(), &mask, |k, x| x - qs.values()[k]));
    }
    Ok(worst)
}

/// Largest change of any hydrodynamic field under three global phases.
fn gauge_invariance() -> Result<f64> {
    let g = Grid2D::square(Grid1D::periodic(-6.0, 12.0, 96)?);
    let p = GaussianPacket::new(0.5, 1.0, 1.0);
    let psi = ComplexField::from_fn_2d(g, |x, y| {
        p.value(x) * p.value(-y) + 0.2 * Complex64::new(x - 1.0, y) * (-((x - 1.0).powi(2) + y * y) / 2.0).exp()
    });
    let v = PotentialSpec::harmonic(0.5);
    let a = decompose(&psi, &v, 0.0, 1.0)?;
    let mut worst = 0.0f64;
    for alpha in [0.3, 2.0, -1.1] {
        let b = decompose(&with_global_phase(&psi, alpha), &v, 0.0, 1.0)?;
        if a.node_mask != b.node_mask {
            return Ok(f64::INFINITY);
        }
        let cmp = |x: &RealField, y: &RealField| max_unmasked(x.values(), &a.node_mask, |k, v| v - y.values()[k]);
        worst = worst
            .max(cmp(&a.rho, &b.rho))
            .max(cmp(&a.q_potential, &b.q_potential))
            .max(cmp(&a.v_eff, &b.v_eff))
            .max(cmp(&a.velocity[0], &b.velocity[0]))
            .max(cmp(&a.velocity[1], &b.velocity[1]))
            .max(max_abs_diff_real(a.current[0].values(), b.current[0].values()))
            .max(max_abs_diff_real(a.current[1].values(), b.current[1].values()));
    }
    Ok(worst)
}

pub(super) fn equivariance() -> Vec<Verdict> {
    let mut s = Sheet::new("equivariance");
    match free_ensemble() {
        Ok((rep, control)) => {
            push_report(&mut s, "free", Ok(rep));
            s.push("negative_control_ks", Relation::Above, control.ks_bound, Ok(control.ks));
        }
        Err(e) => {
            push_report(&mut s, "free", Err(e.to_string()));
            s.push("negative_control_ks", Relation::Above, f64::NAN, Err(e.to_string()));
        }
    }
    push_report(&mut s, "barrier", barrier_ensemble().map_err(|e| e.to_string()));
    s.finish()
}

fn push_report(s: &mut Sheet, tag: &str, rep: std::result::Result<EquivarianceReport, String>) {
    match rep {
        Ok(r) => {
            s.push(&format!("{tag}_ks"), Relation::AtMost, r.ks_bound, Ok(r.ks));
        }
        Err(e) => {
            s.push(&format!("{tag}_ks"), Relation::AtMost, f64::NAN, Err(e));
        }
    }
}

/// Spreading packet up to twice its width; the control compares the final
/// ensemble with the initial density.
fn free_ensemble() -> Result<(EquivarianceReport, EquivarianceReport)> {
    let g = Grid1D::periodic(-30.0, 60.0, 1024)?;
    let packet = GaussianPacket::new(0.0, 1.0, 0.0);
    let t1 = 2.0 * 3f64.sqrt();
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, t1 / 1000.0, t1);
    let mut rec = VelocityRecorder::new(1.0);
    let mut coll = SnapshotCollector::default();
    propagate(&packet.sample(g), &PotentialSpec::free(), &cfg, 10, &mut [&mut rec, &mut coll])?;
    let snaps = rec.finish()?;
    let rho0 = packet.sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho0, 10_000, SEED_FREE)?, SEED_FREE, Sampling::InverseCdf);
    let out = integrate(&ts, &snaps, t1, &IntegrateConfig::new(t1 / 200.0, 50))?;
    let rho_t = coll.snapshots.last().unwrap().density();
    Ok((equivariance_check(&out, &rho_t, t1, 20)?, equivariance_check(&out, &rho0, t1, 20)?))
}

fn barrier_ensemble() -> Result<EquivarianceReport> {
    let g = Grid1D::periodic(-40.0, 80.0, 1024)?;
    let packet = GaussianPacket::new(-8.0, 1.5, 1.5);
    let barrier = PotentialSpec::gaussian_barrier(1.2, 0.5, 0.0);
    let t1 = 8.0;
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, 0.004, t1);
    let mut rec = VelocityRecorder::new(1.0);
    let mut coll = SnapshotCollector::default();
    propagate(&packet.sample(g), &barrier, &cfg, 1, &mut [&mut rec, &mut coll])?;
    let snaps = rec.finish()?;
    let rho0 = packet.sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho0, 10_000, SEED_BARRIER)?, SEED_BARRIER, Sampling::InverseCdf);
    let out = integrate(&ts, &snaps, t1, &IntegrateConfig::new(0.002, 500))?;
    equivariance_check(&out, &coll.snapshots.last().unwrap().density(), t1, 20)
}

pub(super) fn vortex() -> Vec<Verdict> {
    let mut s = Sheet::new("vortex");
    s.group(
        [
            ("circle_circulation", Relation::AtMost, 0.01),
            ("reversed_circle_circulation", Relation::AtMost, 0.01),
            ("rectangle_circulation", Relation::AtMost, 0.01),
            ("reversal_negates", Relation::AtMost, 1e-12),
        ],
        quantized(),
    );
    s.at_most("vortex_free_loop", 1e-6, vortex_free());
    s.finish()
}

fn vortex_fields(n: usize) -> Result<(HydroFields, Grid2D)> {
    let g = Grid2D::square(Grid1D::periodic(-6.0, 12.0, n)?);
    Ok((decompose(&single_vortex(g, 0.0, 0.0), &PotentialSpec::free(), 0.0, 1.0)?, g))
}

/// Relative errors against ±2π, and the reversal defect in quanta.
fn quantized() -> Result<[f64; 4]> {
    let (hf, _) = vortex_fields(240)?;
    let quantum = 2.0 * PI;
    let circle = circle_loop(0.0, 0.0, 1.0, 256);
    let c = circulation_polygon(&hf, &circle)?;
    let mut reversed = circle;
    reversed.reverse();
    let r = circulation_polygon(&hf, &reversed)?;
    let rect = rectangle_loop(100, 100, 140, 140);
    let cr = circulation(&hf, &rect)?;
    let mut back = rect;
    back.reverse();
    let cb = circulation(&hf, &back)?;
    Ok([
        ((c - quantum) / quantum).abs(),
        ((r + quantum) / quantum).abs(),
        ((cr - quantum) / quantum).abs(),
        (cr + cb).abs() / quantum,
    ])
}

/// Circulation in quanta around loops enclosing no vortex.
fn vortex_free() -> Result<f64> {
    let g = Grid2D::square(Grid1D::periodic(-8.0, 16.0, 128)?);
    let a = GaussianPacket::new(0.0, 1.5, 1.2);
    let b = GaussianPacket::new(0.5, 1.0, -0.7);
    let psi = ComplexField::from_fn_2d(g, |x, y| a.value(x) * b.value(y));
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0)?;
    let c = circulation(&hf, &rectangle_loop(40, 50, 90, 80))?;
    Ok(c.abs() / (2.0 * PI))
}
