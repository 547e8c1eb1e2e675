//! Closed-form wavefunctions used as initial states and as test oracles.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::field::ComplexField;
use crate::grid::{Grid1D, Grid2D};

/// Gaussian packet whose density has standard deviation `sigma`, centred at
/// `center` with mean momentum `k0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPacket {
    pub center: f64,
    pub sigma: f64,
    pub k0: f64,
}

impl GaussianPacket {
    pub fn new(center: f64, sigma: f64, k0: f64) -> Self {
        Self { center, sigma, k0 }
    }

    /// Free-particle solution ψ(x, t) for mass `m` (exact in the continuum).
    pub fn free_value(&self, x: f64, t: f64, m: f64) -> C64 {
        let s2 = self.sigma * self.sigma;
        let tau = C64::new(1.0, t / (2.0 * m * s2));
        let v = self.k0 / m;
        let d = x - self.center - v * t;
        let amp = (2.0 * std::f64::consts::PI * s2).powf(-0.25) / tau.sqrt();
        let gauss = (-(d * d) / (4.0 * s2 * tau)).exp();
        let phase = C64::from_polar(1.0, self.k0 * (x - 0.5 * v * t));
        amp * gauss * phase
    }

    pub fn value(&self, x: f64) -> C64 {
        self.free_value(x, 0.0, 1.0)
    }

    /// Density width σ(t) = σ₀ √(1 + (t / 2mσ₀²)²) of the freely spreading packet.
    pub fn free_width(&self, t: f64, m: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.sigma * (1.0 + (t / (2.0 * m * s2)).powi(2)).sqrt()
    }

    /// Bohmian position at time `t` of the trajectory that started at `x0`.
    pub fn free_trajectory(&self, x0: f64, t: f64, m: f64) -> f64 {
        self.center + self.k0 / m * t + (x0 - self.center) * self.free_width(t, m) / self.sigma
    }

    pub fn sample(&self, grid: Grid1D) -> ComplexField {
        ComplexField::from_fn_1d(grid, |x| self.value(x))
    }

    pub fn sample_free(&self, grid: Grid1D, t: f64, m: f64) -> ComplexField {
        ComplexField::from_fn_1d(grid, |x| self.free_value(x, t, m))
    }
}

/// Normalized Hermite function for V = ½ω²(x − center)² and mass `m`.
pub fn harmonic_eigenfunction(n: usize, x: f64, omega: f64, m: f64, center: f64) -> f64 {
    let alpha = omega * m.sqrt(); // mΩ with Ω = ω/√m
    let xi = alpha.sqrt() * (x - center);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    let scale = alpha.powf(0.25);
    if n == 0 {
        return scale * h0;
    }
    let mut prev = h0;
    let mut cur = std::f64::consts::SQRT_2 * xi * h0;
    for k in 1..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    scale * cur
}

/// Eigenvalue (n + ½) ω/√m.
pub fn harmonic_energy(n: usize, omega: f64, m: f64) -> f64 {
    (n as f64 + 0.5) * omega / m.sqrt()
}

pub fn harmonic_state(grid: Grid1D, n: usize, omega: f64, m: f64) -> ComplexField {
    ComplexField::from_fn_1d(grid, |x| C64::new(harmonic_eigenfunction(n, x, omega, m, 0.0), 0.0))
}

/// e^{ikx}/√L on a periodic grid (`k` should be a multiple of 2π/L).
pub fn plane_wave(grid: Grid1D, k: f64) -> ComplexField {
    let amp = 1.0 / grid.length().sqrt();
    ComplexField::from_fn_1d(grid, |x| C64::from_polar(amp, k * x))
}

/// Unnormalized single vortex (x − x₀ + i(y − y₀)) e^{−r²/2}.
pub fn single_vortex(grid: Grid2D, x0: f64, y0: f64) -> ComplexField {
    ComplexField::from_fn_2d(grid, |x, y| {
        let (dx, dy) = (x - x0, y - y0);
        C64::new(dx, dy) * (-(dx * dx + dy * dy) / 2.0).exp()
    })
}

/// Normalized superposition c₁ψ₁ + c₂ψ₂.
pub fn superpose(a: &ComplexField, ca: C64, b: &ComplexField, cb: C64) -> Result<ComplexField> {
    a.zip_map(b, |x, y| ca * x + cb * y)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = Grid1D::dirichlet(-12.0, 12.0, 4001).unwrap();
        let states: Vec<_> = (0..4).map(|n| harmonic_state(g, n, 1.3, 1.0)).collect();
        for a in 0..4 {
            for b in 0..4 {
                let ip = states[a].inner(&states[b]).unwrap().re;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-10, "{a} {b} {ip}");
            }
        }
    }

    #[test]
    fn gaussian_has_requested_width() {
        let g = Grid1D::periodic(-20.0, 40.0, 2048).unwrap();
        let p = GaussianPacket::new(1.0, 0.7, 2.0);
        let psi = p.sample(g);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let rho = psi.density();
        let mean: f64 = rho.values().iter().enumerate().map(|(i, r)| r * g.x(i) * g.dx()).sum();
        let var: f64 = rho.values().iter().enumerate().map(|(i, r)| r * (g.x(i) - mean).powi(2) * g.dx()).sum();
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((var.sqrt() - 0.7).abs() < 1e-12);
    }
}
