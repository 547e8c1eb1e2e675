use qfd_core::manybody::{
    antisymmetrize, center, compare, correlation_witness_max, full_trajectories, hartree_trajectories, marginals,
    max_trajectory_deviation, mean_field, product, propagate_full, propagate_hartree, q_full, swap, symmetrize,
    symmetry_defect, write_comparison_csv, HartreeConfig, HartreeState, Interaction, Symmetry, TwoBodyPotential,
    TwoBodyState,
};
use qfd_core::propagator::{propagate, SnapshotCollector};
use qfd_core::states::{harmonic_state, GaussianPacket};
use qfd_core::trajectories::{sample_initial, IntegrateConfig, Sampling};
use qfd_core::{Complex64, ComplexField, Grid1D, Grid2D, PotentialSpec, Propagator, PropagatorConfig, Scheme};

fn line() -> Grid1D {
    Grid1D::periodic(-12.0, 24.0, 128).unwrap()
}

fn pot(external: PotentialSpec, interaction: Interaction) -> TwoBodyPotential {
    TwoBodyPotential { external, interaction }
}

fn cfg(dt: f64, t: f64) -> PropagatorConfig {
    PropagatorConfig::new(Scheme::SplitOperator, dt, t)
}

fn hcfg(dt: f64, t: f64) -> HartreeConfig {
    HartreeConfig {
        propagator: cfg(dt, t),
        predictor_corrector: false,
    }
}

#[test]
fn noninteracting_product_stays_a_product() {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(1.5, 1.1, -0.5).sample(g);
    let v = PotentialSpec::harmonic(0.3);
    let state = TwoBodyState::new(product(&a, &b).unwrap(), pot(v.clone(), Interaction::None), Symmetry::None).unwrap();
    let c = cfg(0.005, 1.0);
    let full = propagate_full(&state, &c, 200, &mut []).unwrap();
    let ra = propagate(&a, &v, &c, 200, &mut []).unwrap();
    let rb = propagate(&b, &v, &c, 200, &mut []).unwrap();
    let prod = product(&ra.final_psi, &rb.final_psi).unwrap();
    assert!(full.final_psi.max_abs_diff(&prod) <= 1e-6);
    assert!(full.max_norm_deviation() < 1e-10);
    assert!(full.max_relative_energy_drift() < 1e-6);
}

fn symmetric_pair(g: Grid1D) -> ComplexField {
    let a = GaussianPacket::new(-2.0, 0.9, 0.8).sample(g);
    let b = GaussianPacket::new(2.0, 0.7, -0.6).sample(g);
    symmetrize(&product(&a, &b).unwrap()).unwrap()
}

#[test]
fn exchange_symmetry_is_preserved_and_commutes_with_propagation() {
    let g = line();
    let psi = symmetric_pair(g);
    let p = pot(PotentialSpec::harmonic(0.5), Interaction::soft_coulomb(1.0));
    let state = TwoBodyState::new(psi.clone(), p.clone(), Symmetry::Symmetric).unwrap();
    let run = propagate_full(&state, &cfg(0.002, 2.0), 1000, &mut []).unwrap();
    assert_eq!(run.steps, 1000);
    assert!(symmetry_defect(&run.final_psi, Symmetry::Symmetric).unwrap() <= 1e-8);

    // swap then propagate == propagate then swap, for a state without symmetry
    let a = GaussianPacket::new(-1.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(2.0, 1.2, -0.4).sample(g);
    let psi = product(&a, &b).unwrap();
    let c = cfg(0.005, 0.5);
    let mut prop = Propagator::new(Grid2D::square(g).into(), &p, c).unwrap();
    let mut x = psi.clone();
    let mut y = swap(&psi).unwrap();
    for s in 0..100 {
        prop.step(&mut x, s as f64 * 0.005).unwrap();
        prop.step(&mut y, s as f64 * 0.005).unwrap();
    }
    assert!(swap(&x).unwrap().max_abs_diff(&y) <= 1e-10);
}

#[test]
fn antisymmetric_state_keeps_its_sign() {
    let g = line();
    let a = GaussianPacket::new(-1.5, 0.9, 0.0).sample(g);
    let b = GaussianPacket::new(1.5, 0.9, 0.0).sample(g);
    let psi = antisymmetrize(&product(&a, &b).unwrap()).unwrap();
    let state = TwoBodyState::new(psi, pot(PotentialSpec::harmonic(0.4), Interaction::soft_coulomb(0.5)), Symmetry::Antisymmetric).unwrap();
    let run = propagate_full(&state, &cfg(0.005, 1.0), 100, &mut []).unwrap();
    assert!(symmetry_defect(&run.final_psi, Symmetry::Antisymmetric).unwrap() <= 1e-8);
    // the diagonal r₁ = r₂ is a node line
    let n = g.n_points();
    for i in 0..n {
        assert!(run.final_psi.values()[i * n + i].norm() < 1e-12);
    }
    assert!(antisymmetrize(&symmetric_pair(g)).is_err());
}

#[test]
fn state_validation() {
    let g = line();
    let psi = symmetric_pair(g);
    let p = pot(PotentialSpec::free(), Interaction::None);
    assert!(TwoBodyState::new(psi.map(|z| z * 2.0), p.clone(), Symmetry::Symmetric).is_err());
    let a = GaussianPacket::new(-1.0, 1.0, 0.0).sample(g);
    let b = GaussianPacket::new(1.0, 1.0, 0.0).sample(g);
    assert!(TwoBodyState::new(product(&a, &b).unwrap(), p.clone(), Symmetry::Symmetric).is_err());
    let other = Grid1D::periodic(-12.0, 24.0, 64).unwrap();
    assert!(product(&a, &GaussianPacket::new(0.0, 1.0, 0.0).sample(other)).is_err());
    let bad = pot(PotentialSpec::free(), Interaction::SoftCoulomb { strength: 1.0, softening: 0.0 });
    assert!(TwoBodyState::new(psi, bad, Symmetry::Symmetric).is_err());
}

#[test]
fn stationary_product_of_ground_states() {
    let g = line();
    let phi = harmonic_state(g, 0, 1.0, 1.0);
    let psi = product(&phi, &phi).unwrap();
    let state = TwoBodyState::new(psi.clone(), pot(PotentialSpec::harmonic(1.0), Interaction::None), Symmetry::Symmetric).unwrap();
    let run = propagate_full(&state, &cfg(2e-4, 0.5), 2500, &mut []).unwrap();
    let d0 = psi.density();
    let d1 = run.final_psi.density();
    let diff = d0.values().iter().zip(d1.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");

    // and its trajectories do not move
    let rho = psi.density();
    let init = sample_initial(&rho, 50, 4).unwrap();
    let mut coll = SnapshotCollector::default();
    propagate_full(&state, &cfg(2e-4, 0.5), 250, &mut [&mut coll]).unwrap();
    let [t1, t2] = full_trajectories(&coll.times, &coll.snapshots, 1.0, init.clone(), 4, Sampling::InverseCdf, &IntegrateConfig::new(0.025, 5)).unwrap();
    for (k, p0) in init.iter().enumerate() {
        assert!((t1.positions[k].last().unwrap()[0] - p0[0]).abs() < 1e-6);
        assert!((t2.positions[k].last().unwrap()[0] - p0[1]).abs() < 1e-6);
    }
}

#[test]
fn quantum_potential_is_additive_on_products() {
    let g = line();
    let s1 = 0.8;
    let s2 = 1.3;
    let a = GaussianPacket::new(-1.0, s1, 0.5).sample(g);
    let b = GaussianPacket::new(2.0, s2, -1.0).sample(g);
    let psi = product(&a, &b).unwrap();
    let q = q_full(&psi, 1.0);
    let closed = |x: f64, c: f64, s: f64| 1.0 / (4.0 * s * s) - (x - c).powi(2) / (8.0 * s.powi(4));
    let n = g.n_points();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v = q.values()[i * n + j];
            if v.is_nan() {
                continue;
            }
            let exact = closed(g.x(i), -1.0, s1) + closed(g.x(j), 2.0, s2);
            worst = worst.max((v - exact).abs());
        }
    }
    assert!(worst <= 1e-6, "{worst}");
    assert!(correlation_witness_max(&psi, 1.0).unwrap() <= 1e-6);
    // global rescale
    let scaled = psi.map(|z| z * Complex64::new(3.0, -1.0));
    let qs = q_full(&scaled, 1.0);
    let d = q.values().iter().zip(qs.values()).filter(|(a, _)| a.is_finite()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d <= 1e-10, "{d}");
}

#[test]
fn entangled_state_has_large_correlation_witness() {
    let g = line();
    let psi = symmetric_pair(g);
    let w = correlation_witness_max(&psi, 1.0).unwrap();
    assert!(w > 0.1, "{w}");
}

#[test]
fn noninteracting_hartree_equals_independent_runs() {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(1.5, 1.1, -0.5).sample(g);
    let v = PotentialSpec::harmonic(0.3);
    let h = HartreeState::new([a.clone(), b.clone()], v.clone(), Interaction::None).unwrap();
    let run = propagate_hartree(&h, &hcfg(0.005, 1.0), 50).unwrap();
    let c = cfg(0.005, 1.0);
    let ra = propagate(&a, &v, &c, 50, &mut []).unwrap();
    let rb = propagate(&b, &v, &c, 50, &mut []).unwrap();
    assert!(run.final_orbitals[0].max_abs_diff(&ra.final_psi) <= 1e-12);
    assert!(run.final_orbitals[1].max_abs_diff(&rb.final_psi) <= 1e-12);
    assert_eq!(run.times.len(), 5);
}

#[test]
fn mean_field_is_bounded_by_coupling() {
    let g = line();
    let rho = GaussianPacket::new(0.0, 0.5, 0.0).sample(g).density();
    let vh = mean_field(&rho, &Interaction::soft_coulomb(1.7)).unwrap();
    assert!(vh.iter().all(|v| *v > 0.0 && *v <= 1.7));
    assert!(vh.iter().cloned().fold(0.0, f64::max) > 1.0);
}

#[test]
fn hartree_repulsion_tracks_full_marginal_centres() {
    let g = Grid1D::periodic(-16.0, 32.0, 192).unwrap();
    let a = GaussianPacket::new(-2.0, 0.7, 0.0).sample(g);
    let b = GaussianPacket::new(2.0, 0.7, 0.0).sample(g);
    let inter = Interaction::soft_coulomb(1.0);
    let free = PotentialSpec::free();
    let state = TwoBodyState::new(product(&a, &b).unwrap(), pot(free.clone(), inter), Symmetry::None).unwrap();
    let full = propagate_full(&state, &cfg(0.002, 1.0), 500, &mut []).unwrap();
    let (m1, m2) = marginals(&full.final_psi).unwrap();
    for pc in [false, true] {
        let h = HartreeState::new([a.clone(), b.clone()], free.clone(), inter).unwrap();
        let run = propagate_hartree(&h, &HartreeConfig { propagator: cfg(0.002, 1.0), predictor_corrector: pc }, 500).unwrap();
        assert!(run.max_norm_deviation < 1e-8);
        for (m, o, c0) in [(&m1, &run.final_orbitals[0], -2.0), (&m2, &run.final_orbitals[1], 2.0)] {
            let full_shift = center(m).unwrap() - c0;
            let h_shift = center(&o.density()).unwrap() - c0;
            assert!(full_shift.abs() > 1e-3, "particles must repel: {full_shift}");
            assert!(full_shift.signum() == c0.signum());
            assert!(((h_shift - full_shift) / full_shift).abs() < 0.05, "{h_shift} vs {full_shift}");
        }
    }
}

#[test]
fn hartree_norm_conserved_with_interaction() {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(2.0, 0.8, -1.0).sample(g);
    let h = HartreeState::new([a, b], PotentialSpec::harmonic(0.5), Interaction::soft_coulomb(1.0)).unwrap();
    let run = propagate_hartree(&h, &HartreeConfig { propagator: cfg(0.002, 2.0), predictor_corrector: true }, 100).unwrap();
    assert!(run.max_norm_deviation <= 1e-8, "{}", run.max_norm_deviation);
}

fn collision(interaction: Interaction, t: f64) -> (f64, Vec<qfd_core::manybody::ComparisonRow>) {
    let g = line();
    let a = GaussianPacket::new(-2.0, 0.8, 1.0).sample(g);
    let b = GaussianPacket::new(2.0, 0.8, -1.0).sample(g);
    let free = PotentialSpec::free();
    let state = TwoBodyState::new(product(&a, &b).unwrap(), pot(free.clone(), interaction), Symmetry::None).unwrap();
    let dt = 0.005;
    let stride = 4;
    let mut coll = SnapshotCollector::default();
    propagate_full(&state, &cfg(dt, t), stride, &mut [&mut coll]).unwrap();
    let h = HartreeState::new([a, b], free, interaction).unwrap();
    let run = propagate_hartree(&h, &hcfg(dt, t), stride).unwrap();
    let init = sample_initial(&state.psi.density(), 200, 21).unwrap();
    let icfg = IntegrateConfig::new(0.01, 10);
    let full = full_trajectories(&coll.times, &coll.snapshots, 1.0, init.clone(), 21, Sampling::InverseCdf, &icfg).unwrap();
    let hart = hartree_trajectories(&run, 1.0, &init, 21, Sampling::InverseCdf, &icfg).unwrap();
    let dev = max_trajectory_deviation(&full, &hart).unwrap();
    let rows = compare(&coll.snapshots, &run, Symmetry::None, 1.0).unwrap();
    (dev, rows)
}

#[test]
fn product_trajectories_agree_and_collision_diverges() {
    let (dev, rows) = collision(Interaction::None, 2.0);
    assert!(dev <= 1e-4, "{dev}");
    assert!(rows.iter().all(|r| r.full_vs_hartree_density_l2 < 1e-10 && r.correlation_witness_max < 1e-6));

    let (dev, rows) = collision(Interaction::soft_coulomb(1.0), 2.0);
    assert!(dev > 10.0 * 1e-4, "{dev}");
    let last = rows.last().unwrap();
    assert!(last.correlation_witness_max > rows[0].correlation_witness_max);
    let mut csv = Vec::new();
    write_comparison_csv(&rows, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("t,full_vs_hartree_density_L2,correlation_witness_max,symmetry_defect\n"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}
