//! Field containers: one value per grid node, row-major on 2D grids.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};
use crate::grid::{Grid, Grid1D, Grid2D};

/// Scalars the finite-difference operators act on.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Default
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<f64, Output = Self>
    + 'static
{
    fn is_finite_value(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field<T> {
    grid: Grid,
    values: Vec<T>,
}

pub type ComplexField = Field<Complex64>;
pub type RealField = Field<f64>;

impl<T: Scalar> Field<T> {
    pub fn new(grid: impl Into<Grid>, values: Vec<T>) -> Result<Self> {
        let grid = grid.into();
        if values.len() != grid.len() {
            return Err(QfdError::GridMismatch(format!(
                "{} values for {} grid points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: impl Into<Grid>) -> Self {
        let grid = grid.into();
        Self {
            values: vec![T::default(); grid.len()],
            grid,
        }
    }

    pub fn from_fn_1d(grid: Grid1D, f: impl Fn(f64) -> T) -> Self {
        let values = (0..grid.n_points()).map(|i| f(grid.x(i))).collect();
        Self {
            grid: Grid::One(grid),
            values,
        }
    }

    pub fn from_fn_2d(grid: Grid2D, f: impl Fn(f64, f64) -> T) -> Self {
        let (nx, ny) = (grid.gx.n_points(), grid.gy.n_points());
        let mut values = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            let x = grid.gx.x(i);
            for j in 0..ny {
                values.push(f(x, grid.gy.x(j)));
            }
        }
        Self {
            grid: Grid::Two(grid),
            values,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<U: Scalar, V: Scalar>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Result<Field<V>> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Scalar::is_finite_value)
    }

    /// Value at 2D node `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> T {
        let (_, ny) = self.grid.shape();
        self.values[i * ny + j]
    }
}

impl RealField {
    /// Maximum over finite entries (NaN entries are masked values).
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ComplexField {
    pub fn density(&self) -> RealField {
        self.map(|z| z.norm_sqr())
    }

    /// ∫|ψ|² with the grid's quadrature weights.
    pub fn norm_sqr(&self) -> f64 {
        crate::ops::integrate(&self.density())
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(QfdError::NotNormalized { integral: n2 });
        }
        let s = 1.0 / n2.sqrt();
        self.values.iter_mut().for_each(|v| *v *= s);
        Ok(n2.sqrt())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, c: Complex64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// ∫ conj(self)·other.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            acc += a.conj() * b * self.grid.weight(k);
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
