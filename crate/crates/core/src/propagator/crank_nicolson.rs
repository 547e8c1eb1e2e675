//! Crank–Nicolson (Cayley) propagation with the 3-point kinetic stencil.
//!
//! In 1D each step solves `(1 + i dt H/2) ψ' = (1 − i dt H/2) ψ`. On 2D grids
//! the Hamiltonian is split as `Hx = Tx + V/2`, `Hy = Ty + V/2` and the step is
//! the Strang product `Cx(dt/2) Cy(dt) Cx(dt/2)` of exactly unitary line
//! Cayley factors, solved line by line.
//!
//! Dirichlet wall nodes are pinned to zero; periodic axes use the cyclic solve.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::tridiag::{cyclic_thomas, thomas, CyclicScratch};
use crate::grid::{Boundary, Grid, Grid1D};

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub(crate) struct CrankNicolson {
    grid: Grid,
    mass: f64,
}

struct LineScratch {
    diag: Vec<C64>,
    rhs: Vec<C64>,
    work: Vec<C64>,
    cyclic: CyclicScratch,
}

impl LineScratch {
    fn new(n: usize) -> Self {
        Self {
            diag: Vec::with_capacity(n),
            rhs: Vec::with_capacity(n),
            work: vec![C64::new(0.0, 0.0); n],
            cyclic: CyclicScratch::new(n),
        }
    }
}

/// Cayley factor along one line: `line ← (1 + iτH/2)⁻¹ (1 − iτH/2) line`,
/// H = −(1/2m) ∂² + v − i w.
fn cayley_line(g: &Grid1D, mass: f64, tau: f64, v: &[f64], w: Option<&[f64]>, line: &mut [C64], s: &mut LineScratch) {
    let n = line.len();
    let kin = 1.0 / (2.0 * mass * g.dx() * g.dx());
    // H = kin·(2 on diag, −1 off) + v − i w
    let h_diag = |k: usize| C64::new(2.0 * kin + v[k], -w.map_or(0.0, |w| w[k]));
    let a = 0.5 * tau;
    let off_lhs = I * a * (-kin);
    match g.boundary() {
        Boundary::Dirichlet => {
            let m = n - 2;
            s.diag.clear();
            s.rhs.clear();
            for k in 1..n - 1 {
                let hd = h_diag(k);
                s.diag.push(C64::new(1.0, 0.0) + I * a * hd);
                let hpsi = hd * line[k] - kin * (line[k - 1] + line[k + 1]);
                s.rhs.push(line[k] - I * a * hpsi);
            }
            // wall values are zero, so the first/last rows need no correction
            thomas(off_lhs, &s.diag, &mut s.rhs, &mut s.work[..m]);
            line[0] = C64::new(0.0, 0.0);
            line[n - 1] = C64::new(0.0, 0.0);
            line[1..n - 1].copy_from_slice(&s.rhs);
        }
        Boundary::Periodic => {
            s.diag.clear();
            s.rhs.clear();
            for k in 0..n {
                let hd = h_diag(k);
                s.diag.push(C64::new(1.0, 0.0) + I * a * hd);
                let left = line[(k + n - 1) % n];
                let right = line[(k + 1) % n];
                let hpsi = hd * line[k] - kin * (left + right);
                s.rhs.push(line[k] - I * a * hpsi);
            }
            cyclic_thomas(off_lhs, &s.diag, &mut s.rhs, &mut s.cyclic);
            line.copy_from_slice(&s.rhs);
        }
    }
}

impl CrankNicolson {
    pub(crate) fn new(grid: Grid, mass: f64) -> Self {
        Self { grid, mass }
    }

    pub(crate) fn apply(&mut self, psi: &mut [C64], v: &[f64], absorb: Option<&[f64]>, dt: f64) {
        match self.grid {
            Grid::One(g) => {
                let mut s = LineScratch::new(g.n_points());
                cayley_line(&g, self.mass, dt, v, absorb, psi, &mut s);
            }
            Grid::Two(g) => {
                let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
                let half_v: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
                let half_w: Option<Vec<f64>> = absorb.map(|w| w.iter().map(|x| 0.5 * x).collect());
                let mass = self.mass;
                let sweep_x = |psi: &mut [C64], tau: f64| {
                    // lines along axis 0: columns of the row-major array
                    let mut cols = vec![C64::new(0.0, 0.0); nx * ny];
                    for i in 0..nx {
                        for j in 0..ny {
                            cols[j * nx + i] = psi[i * ny + j];
                        }
                    }
                    let mut vt = vec![0.0; nx * ny];
                    let mut wt = half_w.as_ref().map(|_| vec![0.0; nx * ny]);
                    for i in 0..nx {
                        for j in 0..ny {
                            vt[j * nx + i] = half_v[i * ny + j];
                            if let (Some(wt), Some(hw)) = (wt.as_mut(), half_w.as_ref()) {
                                wt[j * nx + i] = hw[i * ny + j];
                            }
                        }
                    }
                    cols.par_chunks_mut(nx).enumerate().for_each_init(
                        || LineScratch::new(nx),
                        |s, (j, line)| {
                            let vl = &vt[j * nx..(j + 1) * nx];
                            let wl = wt.as_ref().map(|w| &w[j * nx..(j + 1) * nx]);
                            cayley_line(&g.gx, mass, tau, vl, wl, line, s);
                        },
                    );
                    for i in 0..nx {
                        for j in 0..ny {
                            psi[i * ny + j] = cols[j * nx + i];
                        }
                    }
                };
                let sweep_y = |psi: &mut [C64], tau: f64| {
                    psi.par_chunks_mut(ny).enumerate().for_each_init(
                        || LineScratch::new(ny),
                        |s, (i, line)| {
                            let vl = &half_v[i * ny..(i + 1) * ny];
                            let wl = half_w.as_ref().map(|w| &w[i * ny..(i + 1) * ny]);
                            cayley_line(&g.gy, mass, tau, vl, wl, line, s);
                        },
                    );
                };
                sweep_x(psi, 0.5 * dt);
                sweep_y(psi, dt);
                sweep_x(psi, 0.5 * dt);
            }
        }
    }
}

/// Phase factor the 1D Cayley step applies to a plane wave e^{ikx} under V = 0.
pub fn plane_wave_phase(k: f64, dx: f64, mass: f64, dt: f64) -> C64 {
    let omega = (1.0 - (k * dx).cos()) / (mass * dx * dx);
    (C64::new(1.0, 0.0) - I * 0.5 * dt * omega) / (C64::new(1.0, 0.0) + I * 0.5 * dt * omega)
}
