//! Strang-split Fourier propagator for periodic grids:
//! exp(−iV dt/2) · exp(−iT dt) · exp(−iV dt/2), kinetic factor in k-space.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{QfdError, Result};
use crate::grid::Grid;

pub(crate) struct SplitOperator {
    grid: Grid,
    mass: f64,
    /// |k|² per node in FFT order.
    k_squared: Vec<f64>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    cached_dt: Option<(u64, Vec<C64>)>,
    transpose: Vec<C64>,
}

impl SplitOperator {
    pub(crate) fn new(grid: Grid, mass: f64) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(QfdError::param("propagator.scheme", "split_operator requires periodic boundaries"));
        }
        let mut planner = FftPlanner::new();
        let (nx, ny) = grid.shape();
        let plan = |planner: &mut FftPlanner<f64>, n: usize, dir| planner.plan_fft(n, dir);
        let fwd = [plan(&mut planner, nx, FftDirection::Forward), plan(&mut planner, ny.max(1), FftDirection::Forward)];
        let inv = [plan(&mut planner, nx, FftDirection::Inverse), plan(&mut planner, ny.max(1), FftDirection::Inverse)];
        let k_squared = match grid {
            Grid::One(g) => g.wavenumbers().iter().map(|k| k * k).collect(),
            Grid::Two(g) => {
                let kx = g.gx.wavenumbers();
                let ky = g.gy.wavenumbers();
                kx.iter().flat_map(|a| ky.iter().map(move |b| a * a + b * b)).collect()
            }
        };
        Ok(Self {
            grid,
            mass,
            k_squared,
            fwd,
            inv,
            cached_dt: None,
            transpose: Vec::new(),
        })
    }

    fn kinetic_phase(&mut self, dt: f64) -> &[C64] {
        let key = dt.to_bits();
        if self.cached_dt.as_ref().map(|(k, _)| *k) != Some(key) {
            let m = self.mass;
            let phases = self
                .k_squared
                .iter()
                .map(|k2| C64::from_polar(1.0, -k2 * dt / (2.0 * m)))
                .collect();
            self.cached_dt = Some((key, phases));
        }
        &self.cached_dt.as_ref().unwrap().1
    }

    fn fft(&mut self, data: &mut [C64], forward: bool) {
        let plans = if forward { &self.fwd } else { &self.inv };
        match self.grid {
            Grid::One(_) => plans[0].process(data),
            Grid::Two(g) => {
                let (nx, ny) = (g.gx.n_points(), g.gy.n_points());
                let row_plan = plans[1].clone();
                data.par_chunks_mut(ny).for_each(|row| row_plan.process(row));
                self.transpose.resize(nx * ny, C64::new(0.0, 0.0));
                transpose(data, &mut self.transpose, nx, ny);
                let col_plan = plans[0].clone();
                self.transpose.par_chunks_mut(nx).for_each(|col| col_plan.process(col));
                transpose(&self.transpose, data, ny, nx);
            }
        }
    }

    /// One step of length `dt` (may be negative) under the potential values `v`.
    /// `absorb` holds optional complex-absorbing-potential strengths W ≥ 0.
    pub(crate) fn apply(&mut self, psi: &mut [C64], v: &[f64], absorb: Option<&[f64]>, dt: f64) {
        let half = 0.5 * dt;
        let half_kick = |psi: &mut [C64]| {
            psi.par_iter_mut().zip(v.par_iter()).enumerate().for_each(|(k, (p, &vk))| {
                let damp = absorb.map_or(1.0, |w| (-w[k] * half).exp());
                *p *= C64::from_polar(damp, -vk * half);
            });
        };
        half_kick(psi);
        self.fft(psi, true);
        let n = psi.len() as f64;
        let phases = self.kinetic_phase(dt).to_vec();
        psi.par_iter_mut().zip(phases.par_iter()).for_each(|(p, ph)| *p *= ph / n);
        self.fft(psi, false);
        half_kick(psi);
    }

    /// Spectral kinetic energy ⟨ψ|T|ψ⟩.
    pub(crate) fn kinetic_energy(&mut self, psi: &[C64]) -> f64 {
        let mut buf = psi.to_vec();
        self.fft(&mut buf, true);
        let n = buf.len() as f64;
        let cell = match self.grid {
            Grid::One(g) => g.dx(),
            Grid::Two(g) => g.cell_volume(),
        };
        let s: f64 = buf.iter().zip(&self.k_squared).map(|(c, k2)| c.norm_sqr() * k2).sum();
        s * cell / n / (2.0 * self.mass)
    }
}

fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    for i in 0..rows {
        for j in 0..cols {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
}
