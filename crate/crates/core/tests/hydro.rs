use std::f64::consts::PI;

use qfd_core::hydro::{
    circle_loop, circulation, circulation_polygon, continuity_residual, decompose_with, effective_force,
    free_motion_criterion, node_mask, quantum_potential_amplitude, quantum_potential_rho, rectangle_loop,
    write_bundle, QStencil, EPS_NODE,
};
use qfd_core::io;
use qfd_core::propagator::with_global_phase;
use qfd_core::states::{harmonic_energy, harmonic_state, plane_wave, single_vortex, superpose, GaussianPacket};
use qfd_core::{
    decompose, Complex64, ComplexField, Grid1D, Grid2D, PotentialSpec, Propagator, PropagatorConfig, RealField,
    Scheme,
};

fn max_over(values: &[f64], keep: impl Fn(usize) -> bool, f: impl Fn(usize, f64) -> f64) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(k, _)| keep(*k))
        .map(|(k, v)| f(k, *v).abs())
        .fold(0.0, f64::max)
}

#[test]
fn plane_wave_has_uniform_velocity_and_no_quantum_potential() {
    let g = Grid1D::periodic(0.0, 2.0 * PI, 1 << 15).unwrap();
    let psi = plane_wave(g, 1.0);
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap();
    assert_eq!(hf.mask_count(), 0);
    assert!(max_over(hf.velocity[0].values(), |_| true, |_, v| v - 1.0) < 1e-8);
    assert!(hf.q_potential.max_abs() < 1e-8);
}

#[test]
fn plane_wave_moves_freely_everywhere() {
    let g = Grid1D::periodic(0.0, 2.0 * PI, 256).unwrap();
    let hf = decompose(&plane_wave(g, 5.0), &PotentialSpec::free(), 0.0, 1.0).unwrap();
    assert!(free_motion_criterion(&hf, 1e-6).iter().all(|b| *b));
}

#[test]
fn velocity_scales_with_inverse_mass() {
    let g = Grid1D::periodic(0.0, 2.0 * PI, 1 << 17).unwrap();
    let psi = plane_wave(g, 2.0);
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 4.0).unwrap();
    assert!(max_over(hf.velocity[0].values(), |_| true, |_, v| v - 0.5) < 1e-8);
}

#[test]
fn gaussian_quantum_potential_matches_closed_form() {
    let sigma = 0.8;
    let g = Grid1D::periodic(-12.0, 24.0, 960).unwrap();
    let psi = GaussianPacket::new(0.0, sigma, 0.7).sample(g);
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap();
    let exact = |x: f64| 1.0 / (4.0 * sigma * sigma) - x * x / (8.0 * sigma.powi(4));
    let err = max_over(hf.q_potential.values(), |k| !hf.node_mask[k], |k, q| q - exact(g.x(k)));
    assert!(err < 1e-8, "{err}");
    let q0 = hf.q_potential.values()[480];
    assert!((q0 - 1.0 / (4.0 * sigma * sigma)).abs() < 1e-10);

    // independent finite-difference cross-check: −½ R''/R with a 3-point stencil
    // converges to the same closed form at second order
    let fd_err = |n: usize| {
        let g = Grid1D::periodic(-6.0, 12.0, n).unwrap();
        let h = g.dx();
        let r: Vec<f64> = (0..n).map(|i| (-(g.x(i).powi(2)) / (4.0 * sigma * sigma)).exp()).collect();
        (n / 4..3 * n / 4)
            .map(|i| {
                let q = -0.5 * (r[i + 1] + r[i - 1] - 2.0 * r[i]) / (h * h * r[i]);
                (q - exact(g.x(i))).abs()
            })
            .fold(0.0, f64::max)
    };
    let ratio = fd_err(600) / fd_err(1200);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn harmonic_ground_state_is_static_with_constant_effective_potential() {
    let omega = 1.3;
    let g = Grid1D::periodic(-10.0, 20.0, 2000).unwrap();
    let psi = harmonic_state(g, 0, omega, 1.0);
    let v = PotentialSpec::harmonic(omega);
    let hf = decompose(&psi, &v, 0.0, 1.0).unwrap();
    let e0 = harmonic_energy(0, omega, 1.0);
    assert!(hf.velocity[0].values().iter().all(|v| v.is_nan() || *v == 0.0));
    let err = max_over(hf.v_eff.values(), |k| !hf.node_mask[k], |_, q| q - e0);
    assert!(err < 1e-6, "{err}");
    let free = free_motion_criterion(&hf, 1e-6);
    for (k, ok) in free.iter().enumerate() {
        assert_eq!(*ok, !hf.node_mask[k], "node {k}");
    }
}

#[test]
fn excited_harmonic_states_satisfy_stationary_identity_away_from_nodes() {
    let omega = 1.0;
    let g = Grid1D::dirichlet(-10.0, 10.0, 20_001).unwrap();
    let v = PotentialSpec::harmonic(omega);
    for (n, nodes) in [(1usize, vec![0.0]), (2, vec![-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2])] {
        let psi = harmonic_state(g, n, omega, 1.0);
        let hf = decompose(&psi, &v, 0.0, 1.0).unwrap();
        let e = harmonic_energy(n, omega, 1.0);
        let keep = |k: usize| !hf.node_mask[k] && nodes.iter().all(|x0| (g.x(k) - x0).abs() > 0.75);
        let err = max_over(hf.v_eff.values(), keep, |_, q| q - e);
        assert!(err < 1e-6, "n = {n}: {err}");
    }
}

#[test]
fn coarse_excited_state_within_example_tolerance() {
    let g = Grid1D::dirichlet(-10.0, 10.0, 2001).unwrap();
    let psi = harmonic_state(g, 1, 1.0, 1.0);
    let hf = decompose(&psi, &PotentialSpec::harmonic(1.0), 0.0, 1.0).unwrap();
    let keep = |k: usize| !hf.node_mask[k] && g.x(k).abs() > 0.6;
    let err = max_over(hf.v_eff.values(), keep, |_, q| q - 1.5);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn quantum_potential_is_scale_invariant() {
    let g = Grid1D::periodic(-10.0, 20.0, 400).unwrap();
    let a = GaussianPacket::new(-2.0, 0.9, 1.0).sample(g);
    let b = GaussianPacket::new(2.5, 0.6, -0.5).sample(g);
    let psi = superpose(&a, Complex64::new(1.0, 0.0), &b, Complex64::new(0.3, 0.4)).unwrap();
    let rho = psi.density();
    let mask = node_mask(&rho, EPS_NODE);
    let q = quantum_potential_rho(&rho, 1.0, QStencil::LogRatio, &mask);
    for c in [1e-6, 0.37, 42.0, 1e5] {
        let scaled = rho.map(|r| c * r);
        let qs = quantum_potential_rho(&scaled, 1.0, QStencil::LogRatio, &mask);
        let err = max_over(q.values(), |k| !mask[k], |k, x| x - qs.values()[k]);
        assert!(err <= 1e-12, "c = {c}: {err}");
    }
}

#[test]
fn hydro_fields_are_gauge_invariant() {
    let g = Grid2D::square(Grid1D::periodic(-6.0, 12.0, 96).unwrap());
    let p = GaussianPacket::new(0.5, 1.0, 1.0);
    let psi = ComplexField::from_fn_2d(g, |x, y| p.value(x) * p.value(-y) + single_vortex_value(x, y));
    let v = PotentialSpec::harmonic(0.5);
    let a = decompose(&psi, &v, 0.0, 1.0).unwrap();
    for alpha in [0.3, 2.0, -1.1] {
        let b = decompose(&with_global_phase(&psi, alpha), &v, 0.0, 1.0).unwrap();
        assert_eq!(a.node_mask, b.node_mask);
        let cmp = |x: &RealField, y: &RealField| max_over(x.values(), |k| !a.node_mask[k], |k, v| v - y.values()[k]);
        assert!(cmp(&a.rho, &b.rho) < 1e-14);
        assert!(cmp(&a.q_potential, &b.q_potential) < 1e-10);
        for axis in 0..2 {
            assert!(cmp(&a.velocity[axis], &b.velocity[axis]) < 1e-10);
        }
    }
}

fn single_vortex_value(x: f64, y: f64) -> Complex64 {
    0.2 * Complex64::new(x - 1.0, y) * (-((x - 1.0).powi(2) + y * y) / 2.0).exp()
}

#[test]
fn density_and_amplitude_forms_agree() {
    let g = Grid1D::dirichlet(-10.0, 10.0, 801).unwrap();
    let a = GaussianPacket::new(-1.5, 0.7, 2.0).sample(g);
    let b = harmonic_state(g, 3, 1.0, 1.0);
    let psi = superpose(&a, Complex64::new(0.6, 0.0), &b, Complex64::new(0.0, 0.8)).unwrap();
    let rho = psi.density();
    let mask = node_mask(&rho, EPS_NODE);
    let r = rho.map(f64::sqrt);
    for stencil in [QStencil::LogRatio, QStencil::Amplitude] {
        let q1 = quantum_potential_amplitude(&r, 1.0, stencil, &mask);
        let q2 = quantum_potential_rho(&rho, 1.0, stencil, &mask);
        let err = max_over(q1.values(), |k| !mask[k], |k, x| (x - q2.values()[k]) / (1.0 + x.abs()));
        assert!(err <= 1e-8, "{stencil:?}: {err}");
    }
}

#[test]
fn current_matches_direct_formula_and_density_times_velocity() {
    let g = Grid2D::new(Grid1D::periodic(-6.0, 12.0, 64).unwrap(), Grid1D::dirichlet(-5.0, 5.0, 81).unwrap());
    let psi = single_vortex(g, 0.3, -0.2).normalized().unwrap();
    let mass = 1.7;
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, mass).unwrap();
    let (nx, ny) = (64usize, 81usize);
    let vals = psi.values();
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            let (ip, im) = ((i + 1) % nx, (i + nx - 1) % nx);
            let dx = (vals[ip * ny + j] - vals[im * ny + j]) / (2.0 * g.gx.dx());
            let jx = (vals[k].conj() * dx).im / mass;
            assert!((hf.current[0].values()[k] - jx).abs() <= 1e-10);
            if !hf.node_mask[k] {
                for axis in 0..2 {
                    let prod = hf.rho.values()[k] * hf.velocity[axis].values()[k];
                    assert!((prod - hf.current[axis].values()[k]).abs() <= 1e-12);
                }
            }
        }
    }
    let total: f64 = hf.rho.values().iter().enumerate().map(|(k, r)| r * g.gx.weight(k / ny) * g.gy.weight(k % ny)).sum();
    assert!((total - 1.0).abs() < 1e-8);
    assert!(hf.rho.values().iter().all(|r| *r >= 0.0));
}

#[test]
fn masked_nodes_carry_nan_and_exact_zero_is_masked() {
    let g = Grid1D::dirichlet(-5.0, 5.0, 101).unwrap();
    let psi = harmonic_state(g, 1, 1.0, 1.0);
    let hf = decompose(&psi, &PotentialSpec::harmonic(1.0), 0.0, 1.0).unwrap();
    assert!(hf.node_mask[50], "node at x = 0 lies on the grid");
    assert!(hf.q_potential.values()[50].is_nan());
    assert!(hf.velocity[0].values()[50].is_nan());
    assert!(hf.q_potential.values()[49].is_finite());
}

fn run_three(dx: f64, t: f64) -> f64 {
    let n = (40.0 / dx).round() as usize;
    let g = Grid1D::periodic(-20.0, 40.0, n).unwrap();
    let packet = GaussianPacket::new(-2.0, 1.0, 1.0);
    let psi0 = packet.sample(g);
    let dt = PropagatorConfig::default_dt(&g.into(), 1.0);
    let free = PotentialSpec::free();
    let mut p = Propagator::new(g.into(), &free, PropagatorConfig::new(Scheme::SplitOperator, dt, t)).unwrap();
    let steps = (t / dt).round() as usize;
    let mut psi = psi0;
    let mut snaps = Vec::new();
    for s in 0..=steps + 1 {
        if s + 1 >= steps {
            snaps.push(decompose(&psi, &free, s as f64 * dt, 1.0).unwrap());
        }
        p.step(&mut psi, s as f64 * dt).unwrap();
    }
    let res = continuity_residual(&snaps[0], &snaps[1], &snaps[2], dt).unwrap();
    assert!(res.integral.abs() < 1e-10, "{}", res.integral);
    res.max
}

#[test]
fn continuity_residual_is_second_order_on_free_gaussian() {
    let coarse = run_three(0.05, 0.5);
    let fine = run_three(0.025, 0.5);
    assert!(coarse <= 1e-3, "{coarse}");
    assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
}

#[test]
fn continuity_residual_vanishes_for_stationary_state() {
    let g = Grid1D::periodic(-10.0, 20.0, 256).unwrap();
    let psi = harmonic_state(g, 2, 1.0, 1.0);
    let v = PotentialSpec::harmonic(1.0);
    let mut p = Propagator::new(g.into(), &v, PropagatorConfig::new(Scheme::SplitOperator, 1e-3, 1.0)).unwrap();
    let a = decompose(&psi, &v, 0.0, 1.0).unwrap();
    let mut s = psi.clone();
    p.step(&mut s, 0.0).unwrap();
    let b = decompose(&s, &v, 1e-3, 1.0).unwrap();
    p.step(&mut s, 1e-3).unwrap();
    let c = decompose(&s, &v, 2e-3, 1.0).unwrap();
    let res = continuity_residual(&a, &b, &c, 1e-3).unwrap();
    assert!(res.max <= 1e-8, "{}", res.max);
}

#[test]
fn continuity_residual_rejects_mismatched_grids() {
    let g1 = Grid1D::periodic(-10.0, 20.0, 64).unwrap();
    let g2 = Grid1D::periodic(-10.0, 20.0, 128).unwrap();
    let a = decompose(&harmonic_state(g1, 0, 1.0, 1.0), &PotentialSpec::free(), 0.0, 1.0).unwrap();
    let b = decompose(&harmonic_state(g2, 0, 1.0, 1.0), &PotentialSpec::free(), 0.0, 1.0).unwrap();
    assert!(continuity_residual(&a, &a, &b, 0.1).is_err());
}

fn vortex_fields() -> (qfd_core::HydroFields, Grid2D) {
    let g = Grid2D::square(Grid1D::periodic(-6.0, 12.0, 240).unwrap());
    let psi = single_vortex(g, 0.0, 0.0);
    (decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap(), g)
}

#[test]
fn single_vortex_has_quantized_circulation() {
    let (hf, g) = vortex_fields();
    let quantum = 2.0 * PI;
    let circle = circle_loop(0.0, 0.0, 1.0, 256);
    let c = circulation_polygon(&hf, &circle).unwrap();
    assert!((c - quantum).abs() < 0.01 * quantum, "{c}");
    let mut reversed = circle.clone();
    reversed.reverse();
    let r = circulation_polygon(&hf, &reversed).unwrap();
    assert!((r + quantum).abs() < 0.01 * quantum, "{r}");

    // grid rectangle enclosing the core (x, y in [-1, 1])
    let (i0, i1) = (100, 140);
    let rect = rectangle_loop(i0, i0, i1, i1);
    assert!((g.gx.x(i0) + 1.0).abs() < 1e-12);
    let c = circulation(&hf, &rect).unwrap();
    assert!((c - quantum).abs() < 0.01 * quantum, "{c}");
    let mut back = rect.clone();
    back.reverse();
    assert!((circulation(&hf, &back).unwrap() + c).abs() < 1e-12);
}

#[test]
fn vortex_free_loop_has_zero_circulation() {
    let g = Grid2D::square(Grid1D::periodic(-8.0, 16.0, 128).unwrap());
    let a = GaussianPacket::new(0.0, 1.5, 1.2);
    let b = GaussianPacket::new(0.5, 1.0, -0.7);
    let psi = ComplexField::from_fn_2d(g, |x, y| a.value(x) * b.value(y));
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap();
    let c = circulation(&hf, &rectangle_loop(40, 50, 90, 80)).unwrap();
    assert!(c.abs() <= 1e-6 * 2.0 * PI, "{c}");
    // a loop beside the vortex core also encloses nothing
    let (hv, _) = vortex_fields();
    let c = circulation(&hv, &rectangle_loop(150, 150, 170, 170)).unwrap();
    assert!(c.abs() <= 1e-3, "{c}");
}

#[test]
fn loop_through_node_is_rejected_by_name() {
    let g = Grid2D::square(Grid1D::periodic(-6.0, 12.0, 120).unwrap());
    let psi = single_vortex(g, 0.0, 0.0);
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap();
    assert!(hf.node_mask[g.index(60, 60)]);
    let err = circulation(&hf, &rectangle_loop(60, 60, 70, 70)).unwrap_err();
    assert!(matches!(err, qfd_core::QfdError::MaskedLoopPoint { i: 60, j: 60 }), "{err}");
    assert!(err.to_string().contains("(60, 60)"));
    let err = circulation(&hf, &[(10, 10), (10, 11), (11, 11)]).unwrap_err();
    assert!(err.to_string().contains("closed"));
}

#[test]
fn interfering_packets_feel_quantum_force_where_potential_vanishes() {
    let g = Grid1D::periodic(-20.0, 40.0, 1600).unwrap();
    let left = GaussianPacket::new(-1.0, 1.5, 3.0).sample(g);
    let right = GaussianPacket::new(1.0, 1.5, -3.0).sample(g);
    let psi = superpose(&left, Complex64::new(1.0, 0.0), &right, Complex64::new(1.0, 0.0)).unwrap();
    let hf = decompose(&psi, &PotentialSpec::free(), 0.0, 1.0).unwrap();
    let force = effective_force(&hf);
    let free = free_motion_criterion(&hf, 1e-2);
    let strong = (0..g.n_points()).filter(|&k| g.x(k).abs() < 2.0 && !hf.node_mask[k] && !free[k]).count();
    assert!(strong > 20, "{strong}");
    assert!(force.values().iter().any(|f| f.is_finite() && *f > 1.0));
}

#[test]
fn bundle_round_trips_through_binary_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid1D::dirichlet(-5.0, 5.0, 64).unwrap();
    let psi = harmonic_state(g, 1, 1.0, 1.0);
    let hf = decompose_with(&psi, &PotentialSpec::harmonic(1.0), 0.0, 1.0, QStencil::LogRatio, EPS_NODE).unwrap();
    let files = write_bundle(&hf, dir.path(), "snap", 0.25).unwrap();
    assert_eq!(files.len(), 7);
    let manifest = std::fs::read_to_string(dir.path().join("snap_manifest.csv")).unwrap();
    assert!(manifest.starts_with("field,file,eps_node,mask_count\n"));
    assert!(manifest.contains(&format!("q_potential,snap_q_potential.qfdf,1e-12,{}", hf.mask_count())));
    let (header, stored) = io::read_file(dir.path().join("snap_q_potential.qfdf")).unwrap();
    assert_eq!(header.time, 0.25);
    let q = stored.into_real().unwrap();
    for (a, b) in q.values().iter().zip(hf.q_potential.values()) {
        assert!(a.to_bits() == b.to_bits());
    }
}
