use qfd_core::propagator::{propagate, SnapshotCollector};
use qfd_core::states::{harmonic_state, plane_wave, GaussianPacket};
use qfd_core::trajectories::{
    equivariance_check, integrate, non_crossing_check, sample_initial, IntegrateConfig, Lookup, Sampling,
    SnapshotVelocity, TrajFlag, TrajectorySet, VelocityProvider, VelocityRecorder,
};
use qfd_core::{ComplexField, Grid1D, Grid2D, PotentialSpec, PropagatorConfig, QfdError, RealField, Scheme};

fn snapshots(psi0: &ComplexField, v: &PotentialSpec, dt: f64, t_final: f64, stride: usize) -> SnapshotVelocity {
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, dt, t_final);
    let mut rec = VelocityRecorder::new(1.0);
    propagate(psi0, v, &cfg, stride, &mut [&mut rec]).unwrap();
    rec.finish().unwrap()
}

#[test]
fn uniform_density_sample_mean() {
    let g = Grid1D::dirichlet(0.0, 1.0, 101).unwrap();
    let rho = RealField::new(g, vec![1.0; 101]).unwrap();
    let xs = sample_initial(&rho, 100_000, 7).unwrap();
    let mean: f64 = xs.iter().map(|p| p[0]).sum::<f64>() / xs.len() as f64;
    assert!((mean - 0.5).abs() < 0.005, "{mean}");
    assert!(xs.iter().all(|p| (0.0..=1.0).contains(&p[0])));
}

#[test]
fn delta_density_samples_stay_in_its_cell() {
    let g = Grid1D::periodic(-5.0, 10.0, 100).unwrap();
    let mut vals = vec![0.0; 100];
    vals[37] = 1.0 / g.dx();
    let rho = RealField::new(g, vals).unwrap();
    let (a, b) = g.cell(37);
    for p in sample_initial(&rho, 5000, 3).unwrap() {
        assert!(p[0] >= a && p[0] <= b, "{} not in [{a}, {b}]", p[0]);
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let g = Grid1D::periodic(-10.0, 20.0, 256).unwrap();
    let rho = GaussianPacket::new(0.0, 1.0, 0.0).sample(g).density();
    let a = sample_initial(&rho, 1000, 42).unwrap();
    let b = sample_initial(&rho, 1000, 42).unwrap();
    let c = sample_initial(&rho, 1000, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unnormalized_density_is_rejected() {
    let g = Grid1D::periodic(-10.0, 20.0, 256).unwrap();
    let rho = GaussianPacket::new(0.0, 1.0, 0.0).sample(g).density().map(|r| 1.01 * r);
    assert!(matches!(sample_initial(&rho, 10, 1), Err(QfdError::NotNormalized { .. })));
}

#[test]
fn initial_samples_pass_ks_and_chi_square() {
    let g = Grid1D::periodic(-15.0, 30.0, 600).unwrap();
    let rho = GaussianPacket::new(1.0, 1.3, 0.0).sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho, 10_000, 11).unwrap(), 11, Sampling::InverseCdf);
    let rep = equivariance_check(&ts, &rho, 0.0, 25).unwrap();
    assert!(rep.ks_pass(), "{rep:?}");
    assert!(rep.chi2_pass(), "{rep:?}");
    assert_eq!(rep.bins, 25);
}

#[test]
fn two_dimensional_sampling_matches_marginals() {
    let g = Grid2D::square(Grid1D::periodic(-8.0, 16.0, 96).unwrap());
    let a = GaussianPacket::new(-1.0, 0.8, 0.0);
    let b = GaussianPacket::new(2.0, 1.5, 0.0);
    let psi = ComplexField::from_fn_2d(g, |x, y| a.value(x) * b.value(y) + 0.3 * b.value(x) * a.value(y)).normalized().unwrap();
    let rho = psi.density();
    let ts = TrajectorySet::new(2, 0.0, sample_initial(&rho, 10_000, 5).unwrap(), 5, Sampling::InverseCdf);
    let rep = equivariance_check(&ts, &rho, 0.0, 20).unwrap();
    assert!(rep.ks_pass(), "{rep:?}");
}

#[test]
fn plane_wave_trajectories_move_uniformly() {
    let g = Grid1D::periodic(0.0, 2.0 * std::f64::consts::PI, 1 << 15).unwrap();
    let snaps = snapshots(&plane_wave(g, 1.0), &PotentialSpec::free(), 0.01, 1.0, 10);
    let ts = TrajectorySet::from_list_1d(0.0, &[0.1, 1.0, 3.0, 6.2]);
    let out = integrate(&ts, &snaps, 1.0, &IntegrateConfig::new(0.01, 10)).unwrap();
    for (k, x0) in [0.1, 1.0, 3.0, 6.2].iter().enumerate() {
        let x1 = out.positions[k].last().unwrap()[0];
        assert!((x1 - (x0 + 1.0)).abs() < 1e-8, "{x1}");
    }
    assert_eq!(out.times.len(), 11);
}

#[test]
fn harmonic_ground_state_trajectories_are_stationary() {
    let g = Grid1D::periodic(-10.0, 20.0, 256).unwrap();
    let psi = harmonic_state(g, 0, 1.0, 1.0);
    let snaps = snapshots(&psi, &PotentialSpec::harmonic(1.0), 1e-4, 2.0, 500);
    let xs: Vec<f64> = (0..21).map(|k| -3.0 + 0.3 * k as f64).collect();
    let out = integrate(&TrajectorySet::from_list_1d(0.0, &xs), &snaps, 2.0, &IntegrateConfig::new(0.02, 5)).unwrap();
    for (k, x0) in xs.iter().enumerate() {
        for p in &out.positions[k] {
            assert!((p[0] - x0).abs() <= 1e-8);
        }
    }
}

fn free_gaussian_errors(snap_dt: f64, traj_dt: f64, t1: f64) -> (f64, TrajectorySet) {
    let g = Grid1D::periodic(-20.0, 40.0, 1024).unwrap();
    let packet = GaussianPacket::new(0.0, 1.0, 0.0);
    let prop_dt = 0.005;
    let stride = (snap_dt / prop_dt).round() as usize;
    let snaps = snapshots(&packet.sample(g), &PotentialSpec::free(), prop_dt, t1, stride);
    let xs: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).filter(|x: &f64| x.abs() > 0.05).collect();
    let ts = TrajectorySet::from_list_1d(0.0, &xs);
    let out = integrate(&ts, &snaps, t1, &IntegrateConfig::new(traj_dt, 1)).unwrap();
    let mut worst = 0.0f64;
    for (k, x0) in xs.iter().enumerate() {
        let exact = packet.free_trajectory(*x0, t1, 1.0);
        let got = out.positions[k].last().unwrap()[0];
        worst = worst.max(((got - exact) / exact).abs());
    }
    (worst, out)
}

#[test]
fn free_gaussian_trajectories_follow_width_law() {
    let (err, out) = free_gaussian_errors(0.02, 0.01, 2.0);
    assert!(err < 1e-3, "{err}");
    assert_eq!(non_crossing_check(&out).unwrap(), None);
}

#[test]
fn refining_time_resolution_improves_trajectories() {
    let (coarse, _) = free_gaussian_errors(0.4, 0.2, 2.0);
    let (fine, _) = free_gaussian_errors(0.2, 0.1, 2.0);
    assert!(coarse / fine >= 2.0, "{coarse} -> {fine}");
}

#[test]
fn equivariance_of_spreading_gaussian_and_negative_control() {
    let g = Grid1D::periodic(-30.0, 60.0, 1024).unwrap();
    let packet = GaussianPacket::new(0.0, 1.0, 0.0);
    let t1 = 2.0 * 3f64.sqrt(); // σ(t₁) = 2σ₀
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, t1 / 1000.0, t1);
    let mut rec = VelocityRecorder::new(1.0);
    let mut coll = SnapshotCollector::default();
    propagate(&packet.sample(g), &PotentialSpec::free(), &cfg, 10, &mut [&mut rec, &mut coll]).unwrap();
    let snaps = rec.finish().unwrap();
    let rho0 = packet.sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho0, 10_000, 2024).unwrap(), 2024, Sampling::InverseCdf);
    let out = integrate(&ts, &snaps, t1, &IntegrateConfig::new(t1 / 200.0, 50)).unwrap();
    assert!((packet.free_width(t1, 1.0) - 2.0).abs() < 1e-12);
    let rho_t = coll.snapshots.last().unwrap().density();
    let rep = equivariance_check(&out, &rho_t, t1, 20).unwrap();
    assert!(rep.ks_pass(), "{rep:?}");
    let wrong = equivariance_check(&out, &rho0, t1, 20).unwrap();
    assert!(!wrong.ks_pass_scaled(2.0), "{wrong:?}");
    assert!(wrong.ks > 0.15);
    assert_eq!(non_crossing_check(&out).unwrap(), None);
}

#[test]
fn barrier_scattering_remains_equivariant_and_ordered() {
    let g = Grid1D::periodic(-40.0, 80.0, 1024).unwrap();
    let packet = GaussianPacket::new(-8.0, 1.5, 1.5);
    let barrier = PotentialSpec::gaussian_barrier(1.2, 0.5, 0.0);
    let t1 = 8.0;
    let cfg = PropagatorConfig::new(Scheme::SplitOperator, 0.004, t1);
    let mut rec = VelocityRecorder::new(1.0);
    let mut coll = SnapshotCollector::default();
    propagate(&packet.sample(g), &barrier, &cfg, 1, &mut [&mut rec, &mut coll]).unwrap();
    let snaps = rec.finish().unwrap();
    let rho0 = packet.sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho0, 10_000, 99).unwrap(), 99, Sampling::InverseCdf);
    let out = integrate(&ts, &snaps, t1, &IntegrateConfig::new(0.002, 500)).unwrap();
    let rep = equivariance_check(&out, &coll.snapshots.last().unwrap().density(), t1, 20).unwrap();
    assert!(rep.ks_pass(), "{rep:?}");
    let ok = out.flags.iter().filter(|f| f.is_ok()).count();
    assert!(ok >= 9_990, "{ok}");
    if let Some(c) = non_crossing_check(&out).unwrap() {
        for k in [c.first, c.second] {
            eprintln!("{k} {:?} {:?}", out.flags[k], &out.positions[k]);
        }
        panic!("{c:?}");
    }
}

#[test]
fn integration_is_deterministic() {
    let g = Grid1D::periodic(-20.0, 40.0, 512).unwrap();
    let packet = GaussianPacket::new(-1.0, 1.0, 0.5);
    let snaps = snapshots(&packet.sample(g), &PotentialSpec::free(), 0.01, 1.0, 4);
    let rho0 = packet.sample(g).density();
    let ts = TrajectorySet::new(1, 0.0, sample_initial(&rho0, 2000, 8).unwrap(), 8, Sampling::InverseCdf);
    let a = integrate(&ts, &snaps, 1.0, &IntegrateConfig::new(0.01, 10)).unwrap();
    let b = integrate(&ts, &snaps, 1.0, &IntegrateConfig::new(0.01, 10)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn non_crossing_detects_first_inversion() {
    let single = TrajectorySet::from_list_1d(0.0, &[0.3]);
    assert_eq!(non_crossing_check(&single).unwrap(), None);
    let mut ts = TrajectorySet::from_list_1d(0.0, &[0.0, 1.0, 2.0]);
    ts.times = vec![0.0, 0.1, 0.2, 0.3];
    ts.positions[0].extend([[0.1, 0.0], [0.2, 0.0], [2.5, 0.0]]);
    ts.positions[1].extend([[1.1, 0.0], [1.2, 0.0], [1.3, 0.0]]);
    ts.positions[2].extend([[2.1, 0.0], [0.5, 0.0], [2.3, 0.0]]);
    let c = non_crossing_check(&ts).unwrap().unwrap();
    assert_eq!((c.time_index, c.first, c.second), (2, 1, 2));
}

struct Uniform(f64, (f64, f64));

impl VelocityProvider for Uniform {
    fn dims(&self) -> usize {
        1
    }
    fn velocity(&self, _t: f64, pos: [f64; 2]) -> Lookup {
        if pos[0] < self.1 .0 || pos[0] > self.1 .1 {
            Lookup::Outside
        } else {
            Lookup::Velocity([self.0, 0.0])
        }
    }
    fn time_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }
}

#[test]
fn trajectory_leaving_dirichlet_domain_is_frozen_and_flagged() {
    let ts = TrajectorySet::from_list_1d(0.0, &[0.0, 4.5]);
    let out = integrate(&ts, &Uniform(1.0, (-5.0, 5.0)), 2.0, &IntegrateConfig::new(0.1, 1)).unwrap();
    assert!(out.flags[0].is_ok());
    match out.flags[1] {
        TrajFlag::Exited { t } => assert!((t - 0.5).abs() < 1e-9, "{t}"),
        f => panic!("{f:?}"),
    }
    let frozen = out.positions[1].last().unwrap()[0];
    assert!(frozen <= 5.0 && frozen > 4.8);
    assert!((out.positions[0].last().unwrap()[0] - 2.0).abs() < 1e-12);
}

#[test]
fn snapshot_field_exit_through_dirichlet_wall() {
    let g = Grid1D::dirichlet(-5.0, 5.0, 201).unwrap();
    let mut snaps = SnapshotVelocity::new(g.into());
    for t in [0.0, 1.0] {
        snaps.push_fields(t, vec![RealField::new(g, vec![2.0; 201]).unwrap()]).unwrap();
    }
    let out = integrate(&TrajectorySet::from_list_1d(0.0, &[4.0]), &snaps, 1.0, &IntegrateConfig::new(0.05, 1)).unwrap();
    assert!(matches!(out.flags[0], TrajFlag::Exited { .. }));
}

#[test]
fn trajectory_stuck_at_node_is_flagged_after_halving() {
    let g = Grid1D::periodic(-5.0, 10.0, 100).unwrap();
    let mut v = vec![1.0; 100];
    for x in &mut v[60..64] {
        *x = f64::NAN;
    }
    let mut snaps = SnapshotVelocity::new(g.into());
    for t in [0.0, 5.0] {
        snaps.push_fields(t, vec![RealField::new(g, v.clone()).unwrap()]).unwrap();
    }
    let out = integrate(&TrajectorySet::from_list_1d(0.0, &[0.0]), &snaps, 5.0, &IntegrateConfig::new(0.1, 1)).unwrap();
    match out.flags[0] {
        TrajFlag::NodeBreakdown { t } => assert!(t < 1.1),
        f => panic!("{f:?}"),
    }
    let stuck = out.positions[0].last().unwrap()[0];
    assert!(stuck < g.x(59) && stuck > 0.5, "{stuck}");
}

#[test]
fn too_few_trajectories_for_statistics() {
    let g = Grid1D::periodic(-5.0, 10.0, 100).unwrap();
    let rho = GaussianPacket::new(0.0, 1.0, 0.0).sample(g).density();
    let ts = TrajectorySet::from_list_1d(0.0, &[0.0; 10]);
    assert!(matches!(
        equivariance_check(&ts, &rho, 0.0, 20),
        Err(QfdError::TooFewTrajectories { got: 10, need: 1000 })
    ));
}

#[test]
fn csv_and_manifest_layout() {
    let mut ts = TrajectorySet::from_list_1d(0.0, &[0.5, -0.25]);
    ts.seed = 17;
    ts.flags[1] = TrajFlag::Exited { t: 0.5 };
    let mut csv = Vec::new();
    ts.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "traj_id,t,x\n0,0e0,5e-1\n1,0e0,-2.5e-1\n");
    let mut man = Vec::new();
    ts.write_manifest(&mut man).unwrap();
    let man = String::from_utf8(man).unwrap();
    assert!(man.starts_with("# seed=17 sampling=explicit_list n_traj=2 dims=1 n_times=1\ntraj_id,flag,t_flag\n"));
    assert!(man.ends_with("0,ok,\n1,exited,5e-1\n"));
}
