//! External potentials V(r, t).

use crate::error::{QfdError, Result};
use crate::field::RealField;
use crate::grid::Grid;

/// Anything the propagators can sample on a grid at time `t`.
pub trait Potential: Sync {
    fn eval_into(&self, grid: &Grid, t: f64, out: &mut [f64]) -> Result<()>;

    /// `false` lets callers sample once per run.
    fn is_time_dependent(&self) -> bool;

    fn evaluate(&self, grid: &Grid, t: f64) -> Result<RealField> {
        let mut out = vec![0.0; grid.len()];
        self.eval_into(grid, t, &mut out)?;
        RealField::new(*grid, out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialKind {
    Free,
    /// ½ω²(x − center)², summed over axes on 2D grids.
    Harmonic { omega: f64, center: f64 },
    /// height · exp(−(x − center)² / (2 width²)), summed over axes on 2D grids.
    GaussianBarrier { height: f64, width: f64, center: f64 },
    /// A wall of `height` at `wall_x` (thickness along x) pierced by two slits
    /// symmetric about y = 0. Only defined on 2D grids.
    DoubleSlit2d {
        wall_x: f64,
        thickness: f64,
        slit_separation: f64,
        slit_width: f64,
        height: f64,
    },
    CustomTable(RealField),
}

/// Time envelope f(t) multiplying the whole potential.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Envelope {
    #[default]
    Constant,
    /// 1 + amplitude · sin(ω t)
    Sinusoidal { amplitude: f64, omega: f64 },
    /// min(t / duration, 1)
    LinearRamp { duration: f64 },
}

impl Envelope {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant => 1.0,
            Envelope::Sinusoidal { amplitude, omega } => 1.0 + amplitude * (omega * t).sin(),
            Envelope::LinearRamp { duration } => (t / duration).min(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub envelope: Envelope,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Self {
        Self {
            kind,
            envelope: Envelope::Constant,
        }
    }

    pub fn free() -> Self {
        Self::new(PotentialKind::Free)
    }

    pub fn harmonic(omega: f64) -> Self {
        Self::new(PotentialKind::Harmonic { omega, center: 0.0 })
    }

    pub fn gaussian_barrier(height: f64, width: f64, center: f64) -> Self {
        Self::new(PotentialKind::GaussianBarrier { height, width, center })
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Self {
        self.envelope = envelope;
        self
    }

    /// Value of a separable 1D profile at `x` (None for non-separable kinds).
    fn profile(&self, x: f64) -> Option<f64> {
        match self.kind {
            PotentialKind::Free => Some(0.0),
            PotentialKind::Harmonic { omega, center } => Some(0.5 * omega * omega * (x - center).powi(2)),
            PotentialKind::GaussianBarrier { height, width, center } => {
                Some(height * (-(x - center).powi(2) / (2.0 * width * width)).exp())
            }
            _ => None,
        }
    }

    /// Samples the time-independent part on a 1D line (per-particle external use).
    pub fn line_values(&self, grid: &crate::grid::Grid1D, t: f64) -> Result<Vec<f64>> {
        let f = self.envelope.factor(t);
        match &self.kind {
            PotentialKind::CustomTable(table) => {
                if table.grid() != &Grid::One(*grid) {
                    return Err(QfdError::GridMismatch("custom potential table grid".into()));
                }
                Ok(table.values().iter().map(|v| v * f).collect())
            }
            PotentialKind::DoubleSlit2d { .. } => Err(QfdError::param("potential", "double_slit_2d needs a 2D grid")),
            _ => Ok((0..grid.n_points()).map(|i| f * self.profile(grid.x(i)).unwrap()).collect()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| Err(QfdError::param(name, reason));
        match &self.kind {
            PotentialKind::Harmonic { omega, .. } if !(omega.is_finite() && *omega > 0.0) => {
                bad("potential.omega", "must be positive")
            }
            PotentialKind::GaussianBarrier { width, height, .. } if !(*width > 0.0 && height.is_finite()) => {
                bad("potential.width", "must be positive")
            }
            PotentialKind::DoubleSlit2d {
                thickness, slit_width, ..
            } if !(*thickness > 0.0 && *slit_width > 0.0) => bad("potential.slit_width", "must be positive"),
            PotentialKind::CustomTable(t) if !t.all_finite() => bad("potential.table", "contains non-finite values"),
            _ => Ok(()),
        }
    }
}

impl Potential for PotentialSpec {
    fn eval_into(&self, grid: &Grid, t: f64, out: &mut [f64]) -> Result<()> {
        let f = self.envelope.factor(t);
        match (&self.kind, grid) {
            (PotentialKind::CustomTable(table), _) => {
                grid.ensure_same(table.grid())?;
                for (o, v) in out.iter_mut().zip(table.values()) {
                    *o = v * f;
                }
            }
            (
                PotentialKind::DoubleSlit2d {
                    wall_x,
                    thickness,
                    slit_separation,
                    slit_width,
                    height,
                },
                Grid::Two(g),
            ) => {
                let ny = g.gy.n_points();
                for (k, o) in out.iter_mut().enumerate() {
                    let (x, y) = (g.gx.x(k / ny), g.gy.x(k % ny));
                    let in_wall = (x - wall_x).abs() <= 0.5 * thickness;
                    let in_slit = ((y.abs() - 0.5 * slit_separation).abs()) <= 0.5 * slit_width;
                    *o = if in_wall && !in_slit { f * height } else { 0.0 };
                }
            }
            (PotentialKind::DoubleSlit2d { .. }, Grid::One(_)) => {
                return Err(QfdError::param("potential", "double_slit_2d needs a 2D grid"));
            }
            (_, Grid::One(g)) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = f * self.profile(g.x(i)).unwrap();
                }
            }
            (_, Grid::Two(g)) => {
                let ny = g.gy.n_points();
                let px: Vec<f64> = g.gx.coords().into_iter().map(|x| self.profile(x).unwrap()).collect();
                let py: Vec<f64> = g.gy.coords().into_iter().map(|y| self.profile(y).unwrap()).collect();
                for (k, o) in out.iter_mut().enumerate() {
                    *o = f * (px[k / ny] + py[k % ny]);
                }
            }
        }
        Ok(())
    }

    fn is_time_dependent(&self) -> bool {
        self.envelope != Envelope::Constant
    }
}

/// A fixed table is a valid time-independent potential.
impl Potential for RealField {
    fn eval_into(&self, grid: &Grid, _t: f64, out: &mut [f64]) -> Result<()> {
        grid.ensure_same(self.grid())?;
        out.copy_from_slice(self.values());
        Ok(())
    }

    fn is_time_dependent(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, Grid2D};

    #[test]
    fn harmonic_values() {
        let g = Grid1D::dirichlet(-2.0, 2.0, 9).unwrap();
        let v = PotentialSpec::harmonic(2.0).evaluate(&g.into(), 0.0).unwrap();
        assert!((v.values()[0] - 8.0).abs() < 1e-14);
        assert_eq!(v.values()[4], 0.0);
    }

    #[test]
    fn separable_kinds_add_per_axis_in_2d() {
        let g1 = Grid1D::dirichlet(-1.0, 1.0, 9).unwrap();
        let g = Grid2D::square(g1);
        let spec = PotentialSpec::gaussian_barrier(1.5, 0.3, 0.2);
        let v = spec.evaluate(&g.into(), 0.0).unwrap();
        let line = spec.line_values(&g1, 0.0).unwrap();
        assert_eq!(v.at(2, 7), line[2] + line[7]);
    }

    #[test]
    fn envelope_scales() {
        let g = Grid1D::dirichlet(-1.0, 1.0, 9).unwrap().into();
        let spec = PotentialSpec::harmonic(1.0).with_envelope(Envelope::LinearRamp { duration: 2.0 });
        assert!(spec.is_time_dependent());
        let v = spec.evaluate(&g, 1.0).unwrap();
        assert!((v.values()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn double_slit_blocks_wall_except_slits() {
        let g = Grid2D::square(Grid1D::periodic(-4.0, 8.0, 64).unwrap());
        let spec = PotentialSpec::new(PotentialKind::DoubleSlit2d {
            wall_x: 0.0,
            thickness: 0.5,
            slit_separation: 2.0,
            slit_width: 0.5,
            height: 50.0,
        });
        let v = spec.evaluate(&g.into(), 0.0).unwrap();
        let i0 = 32; // x = 0
        let j_mid = 32; // y = 0
        let j_slit = 40; // y = 1
        assert_eq!(v.at(i0, j_mid), 50.0);
        assert_eq!(v.at(i0, j_slit), 0.0);
        assert_eq!(v.at(0, j_mid), 0.0);
        assert!(spec.evaluate(&Grid::One(g.gx), 0.0).is_err());
    }
}
