//! Two-particle, reduced and orbital suites.

use super::{max_abs_diff_real, Relation, Sheet, Verdict};
use crate::error::Result;
use crate::manybody::{
    full_trajectories, hartree_trajectories, max_trajectory_deviation, product, propagate_full, propagate_hartree,
    q_full, symmetrize, symmetry_defect, HartreeConfig, HartreeState, Interaction, Symmetry, TwoBodyPotential,
    TwoBodyState,
};
use crate::propagator::{propagate, SnapshotCollector};
use crate::qfdft::{
    self, density, kinetic_functional, lowest_orbitals, propagate_ks, stationary_limit, Functional, FunctionalConfig,
    OrbitalSet, ScfConfig,
};
use crate::reduced::{self, reduce, reduced_trajectories, RdmRecorder};
use crate::states::{harmonic_eigenfunction, harmonic_state, GaussianPacket};
use crate::trajectories::{integrate, sample_initial, IntegrateConfig, Sampling, TrajectorySet, VelocityRecorder};
use crate::{ops, Grid1D, PotentialSpec, PropagatorConfig, Scheme};

const SEED_COLLISION: u64 = 21;
const SEED_REDUCED: u64 = 5;

fn line() -> Grid1D {
    Grid1D::periodic(-12.0, 24.0, 128).expect("pinned grid")
}

fn so(dt: f64, t: f64) -> PropagatorConfig {
    PropagatorConfig::new(Scheme::SplitOperator, dt, t)
}

fn cn(dt: f64, t: f64) -> PropagatorConfig {
    PropagatorConfig::new(Scheme::CrankNicolson, dt, t)
}

fn pot(external: PotentialSpec, interaction: Interaction) -> TwoBodyPotential {
    TwoBodyPotential { external, interaction }
}

pub(super) fn manybody() -> Vec<Verdict> {
    let mut s = Sheet::new("manybody");
    s.at_most("quantum_potential_additivity", 1e-6, additivity());
    s.at_most("product_full_vs_hartree", 1e-4, collision(Interaction::None));
    s.push(
        "interacting_full_vs_hartree",
        Relation::Above,
        10.0 * 1e-4,
        collision(Interaction::soft_coulomb(1.0)).map_err(|e| e.to_string()),
    );
    s.at_most("exchange_symmetry", 1e-8, symmetric_run());
    s.finish()
}

/// Worst deviation of the discrete two-body Q from the sum of closed forms.
fn additivity() -> Result<f64> {
    let g = line();
    let (s1, s2) = (0.8, 1.3);
    let psi = product(&GaussianPacket::new(-1.0, s1, 0.5).sample(g), &GaussianPacket::new(2.0, s2, -1.0).sample(g))?;
    let q = q_full(&psi, 1.0);
    let closed = |x: f64, c: f64, s: f64| 1.0 / (4.0 * s * s) - (x - c).powi(2) / (8.0 * s.powi(4));
    let n = g.n_points();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = q.values()[i * n + j];
            if v.is_finite() {
                worst = worst.max((v - (closed(g.x(i), -1.0, s1) + closed(g.x(j), 2.0, s2))).abs());
            }
        }
    }
    Ok(worst)
}

/// Head-on packets: max trajectory gap between the full and Hartree runs.
fn collision(interaction: Interaction) -> Result<f64> {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(2.0, 0.8, -1.0).sample(g);
    let free = PotentialSpec::free();
    let state = TwoBodyState::new(product(&a, &b)?, pot(free.clone(), interaction), Symmetry::None)?;
    let (dt, t, stride) = (0.005, 2.0, 4);
    let mut coll = SnapshotCollector::default();
    propagate_full(&state, &so(dt, t), stride, &mut [&mut coll])?;
    let h = HartreeState::new([a, b], free, interaction)?;
    let hc = HartreeConfig {
        propagator: so(dt, t),
        predictor_corrector: false,
    };
    let run = propagate_hartree(&h, &hc, stride)?;
    let init = sample_initial(&state.psi.density(), 200, SEED_COLLISION)?;
    let icfg = IntegrateConfig::new(0.01, 10);
    let full = full_trajectories(&coll.times, &coll.snapshots, 1.0, init.clone(), SEED_COLLISION, Sampling::InverseCdf, &icfg)?;
    let hart = hartree_trajectories(&run, 1.0, &init, SEED_COLLISION, Sampling::InverseCdf, &icfg)?;
    max_trajectory_deviation(&full, &hart)
}

fn symmetric_run() -> Result<f64> {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.9, 0.8).sample(g);
    let b = GaussianPacket::new(2.0, 0.7, -0.6).sample(g);
    let psi = symmetrize(&product(&a, &b)?)?;
    let p = pot(PotentialSpec::harmonic(0.5), Interaction::soft_coulomb(1.0));
    let state = TwoBodyState::new(psi, p, Symmetry::Symmetric)?;
    let run = propagate_full(&state, &so(0.002, 2.0), 1000, &mut [])?;
    symmetry_defect(&run.final_psi, Symmetry::Symmetric)
}

/// Max reduced continuity residual for a packet scattering off a barrier
/// next to an interacting partner.
pub(super) fn two_body_continuity(n: usize, dt: f64) -> Result<f64> {
    let g = Grid1D::periodic(-12.0, 24.0, n)?;
    let a = GaussianPacket::new(-4.0, 0.8, 1.5).sample(g);
    let b = GaussianPacket::new(3.0, 1.0, 0.0).sample(g);
    let p = pot(PotentialSpec::gaussian_barrier(1.0, 0.5, 0.0), Interaction::soft_coulomb(1.0));
    let state = TwoBodyState::new(product(&a, &b)?, p, Symmetry::None)?;
    let mut rec = RdmRecorder::default();
    propagate_full(&state, &so(dt, 1.5), 20, &mut [&mut rec])?;
    let rows = reduced::continuity_audit(&rec.rdms, 1.0)?;
    Ok(rows.iter().map(|r| r.max).fold(0.0, f64::max))
}

pub(super) fn reduced() -> Vec<Verdict> {
    let mut s = Sheet::new("reduced");
    s.group(
        [
            ("hermiticity_defect", Relation::AtMost, reduced::HERMITICITY_TOL),
            ("trace_defect", Relation::AtMost, reduced::TRACE_TOL),
            ("min_eigenvalue", Relation::AtLeast, -reduced::PSD_TOL),
        ],
        collision_rdms(),
    );
    s.at_most("product_reduced_vs_bohmian", 1e-4, product_reduced_vs_bohmian());
    s.group(
        [
            ("product_purity", Relation::AtMost, 1e-8),
            ("two_term_purity", Relation::AtMost, 1e-3),
        ],
        purities(),
    );
    s.finish()
}

/// Worst invariant defects over every matrix of an interacting collision.
fn collision_rdms() -> Result<[f64; 3]> {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(2.0, 0.8, -1.0).sample(g);
    let state = TwoBodyState::new(product(&a, &b)?, pot(PotentialSpec::free(), Interaction::soft_coulomb(1.0)), Symmetry::None)?;
    let mut rec = RdmRecorder::default();
    propagate_full(&state, &so(0.005, 2.0), 20, &mut [&mut rec])?;
    let mut out = [0.0f64, 0.0, f64::INFINITY];
    for r in &rec.rdms {
        out[0] = out[0].max(r.hermiticity_defect());
        out[1] = out[1].max((r.trace() - 1.0).norm());
        out[2] = out[2].min(r.min_eigenvalue());
    }
    Ok(out)
}

fn product_reduced_vs_bohmian() -> Result<f64> {
    let g = line();
    let a = GaussianPacket::new(-1.0, 0.9, 1.0).sample(g);
    let b = GaussianPacket::new(1.5, 1.2, -0.5).sample(g);
    let v = PotentialSpec::harmonic(0.5);
    let state = TwoBodyState::new(product(&a, &b)?, pot(v.clone(), Interaction::None), Symmetry::None)?;
    let c = so(0.005, 2.0);
    let mut rec = RdmRecorder::default();
    propagate_full(&state, &c, 4, &mut [&mut rec])?;
    let mut vr = VelocityRecorder::new(1.0);
    propagate(&a, &v, &c, 4, &mut [&mut vr])?;
    let snaps = vr.finish()?;
    let icfg = IntegrateConfig::new(0.01, 10);
    let red = reduced_trajectories(&rec.rdms, 1.0, 300, SEED_REDUCED, &icfg)?;
    let start: Vec<f64> = red.positions.iter().map(|p| p[0][0]).collect();
    let bohm = integrate(&TrajectorySet::from_list_1d(0.0, &start), &snaps, 2.0, &icfg)?;
    let mut worst = 0.0f64;
    for (r, b) in red.positions.iter().zip(&bohm.positions) {
        for (x, y) in r.iter().zip(b) {
            worst = worst.max((x[0] - y[0]).abs());
        }
    }
    Ok(worst)
}

/// |P − 1| for a product and |P − ½| for the symmetrized pair of the two
/// lowest oscillator states.
fn purities() -> Result<[f64; 2]> {
    let g = line();
    let a = GaussianPacket::new(-1.0, 0.9, 1.2).sample(g);
    let b = GaussianPacket::new(2.0, 1.3, -0.4).sample(g);
    let p = reduce(&product(&a, &b)?, 0.0)?.purity();
    let h0 = harmonic_state(g, 0, 1.0, 1.0);
    let h1 = harmonic_state(g, 1, 1.0, 1.0);
    let q = reduce(&symmetrize(&product(&h0, &h1)?)?, 0.0)?.purity();
    Ok([(p - 1.0).abs(), (q - 0.5).abs()])
}

pub(super) fn qfdft() -> Vec<Verdict> {
    let mut s = Sheet::new("qfdft");
    s.group(
        [
            ("particle_number", Relation::AtMost, 1e-8),
            ("kinetic_two_forms", Relation::AtMost, 1e-6),
        ],
        breathing_pair(),
    );
    s.at_most("stationary_harmonic_l2", 1e-4, harmonic_ground_orbital());
    s.at_most("stationary_fixed_point", 1e-6, fixed_point());
    s.finish()
}

fn box_grid(n: usize) -> Result<Grid1D> {
    Grid1D::dirichlet(-8.0, 8.0, n)
}

/// Two interacting orbitals released from the bare oscillator levels.
fn breathing_pair() -> Result<[f64; 2]> {
    let g = box_grid(321)?;
    let v = PotentialSpec::harmonic(1.0);
    let (_, orbs) = lowest_orbitals(g, &v.line_values(&g, 0.0)?, 2, 1.0)?;
    let set = OrbitalSet::new(orbs)?;
    let f = Functional::new(&FunctionalConfig::external(v).with_hartree(Interaction::soft_coulomb(1.0)))?;
    let run = propagate_ks(&set, &f, &cn(0.002, 2.0), 100)?;
    let mut n_dev = run.max_particle_deviation;
    for snap in &run.snapshots {
        n_dev = n_dev.max((ops::integrate(&density(snap)) - 2.0).abs());
    }
    let kin = kinetic_functional(&run.times, &run.snapshots, 1.0)?;
    Ok([n_dev, kin.difference()])
}

fn harmonic_ground_orbital() -> Result<f64> {
    let g = box_grid(1001)?;
    let start = OrbitalSet::orthonormalize(vec![GaussianPacket::new(0.5, 1.5, 0.0).sample(g)])?;
    let f = Functional::new(&FunctionalConfig::external(PotentialSpec::harmonic(1.0)))?;
    let res = stationary_limit(&start, &f, &ScfConfig::default())?;
    let phi = &res.orbitals.orbitals()[0];
    // fix the arbitrary sign against the closed form
    let sign = if phi.values()[g.n_points() / 2].re < 0.0 { -1.0 } else { 1.0 };
    Ok((0..g.n_points())
        .map(|i| (sign * phi.values()[i].re - harmonic_eigenfunction(0, g.x(i), 1.0, 1.0, 0.0)).powi(2) * g.weight(i))
        .sum::<f64>()
        .sqrt())
}

/// Self-consistent pair with Hartree and local exchange, then 10³ steps.
fn fixed_point() -> Result<f64> {
    let g = box_grid(321)?;
    let v = PotentialSpec::harmonic(1.0);
    let f = Functional::new(
        &FunctionalConfig::external(v.clone())
            .with_hartree(Interaction::soft_coulomb(0.5))
            .with_xc("lda_x_1d"),
    )?;
    let (_, orbs) = lowest_orbitals(g, &v.line_values(&g, 0.0)?, 2, 1.0)?;
    let res = stationary_limit(&OrbitalSet::new(orbs)?, &f, &ScfConfig::default())?;
    let run = propagate_ks(&res.orbitals, &f, &cn(0.002, 2.0), 1000)?;
    Ok(max_abs_diff_real(res.density.values(), density(&run.final_set).values()))
}

/// Max continuity residual of two interacting orbitals in a trap.
pub(super) fn ks_continuity(n: usize, dt: f64) -> Result<f64> {
    let g = Grid1D::dirichlet(-10.0, 10.0, n)?;
    let set = OrbitalSet::orthonormalize(vec![
        GaussianPacket::new(-2.0, 0.8, 1.0).sample(g),
        GaussianPacket::new(2.0, 0.9, -0.5).sample(g),
    ])?;
    let f = Functional::new(
        &FunctionalConfig::external(PotentialSpec::harmonic(0.5)).with_hartree(Interaction::soft_coulomb(1.0)),
    )?;
    let run = propagate_ks(&set, &f, &cn(dt, 1.0), 10)?;
    let rows = qfdft::continuity_audit(&run.times, &run.snapshots, 1.0)?;
    Ok(rows.iter().map(|r| r.max).fold(0.0, f64::max))
}
