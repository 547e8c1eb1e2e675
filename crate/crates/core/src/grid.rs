//! Uniform grids in one and two dimensions.
//!
//! Node `i` of a [`Grid1D`] sits at `x_min + i * dx`. A periodic axis of `n`
//! nodes has period `n * dx`; a Dirichlet axis spans `[x_min, x_min + (n-1) dx]`
//! and its two end nodes are the walls (the propagators pin them to zero).

use serde::{Deserialize, Serialize};

use crate::error::{QfdError, Result};

pub const MIN_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n_points: usize,
    x_min: f64,
    dx: f64,
    boundary: Boundary,
}

impl Grid1D {
    pub fn new(n_points: usize, x_min: f64, dx: f64, boundary: Boundary) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(QfdError::InvalidGrid(format!(
                "n_points = {n_points}, need at least {MIN_POINTS}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(QfdError::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        if !x_min.is_finite() {
            return Err(QfdError::InvalidGrid(format!("x_min = {x_min} not finite")));
        }
        Ok(Self {
            n_points,
            x_min,
            dx,
            boundary,
        })
    }

    /// Periodic grid with `n` nodes covering `[x_min, x_min + length)`.
    pub fn periodic(x_min: f64, length: f64, n: usize) -> Result<Self> {
        Self::new(n, x_min, length / n as f64, Boundary::Periodic)
    }

    /// Dirichlet grid with `n` nodes from `x_min` to `x_max` inclusive.
    pub fn dirichlet(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(QfdError::InvalidGrid(format!("n_points = {n}")));
        }
        Self::new(n, x_min, (x_max - x_min) / (n - 1) as f64, Boundary::Dirichlet)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    #[inline]
    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    #[inline]
    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Length of the domain: the period for periodic axes, wall to wall otherwise.
    pub fn length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.n_points as f64 * self.dx,
            Boundary::Dirichlet => (self.n_points - 1) as f64 * self.dx,
        }
    }

    /// Quadrature weight of node `i` (trapezoid halves at Dirichlet walls).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.dx,
            Boundary::Dirichlet if i == 0 || i + 1 == self.n_points => 0.5 * self.dx,
            Boundary::Dirichlet => self.dx,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.weight(i)).collect()
    }

    /// The interval of length `weight(i)` owned by node `i`.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let x = self.x(i);
        let h = 0.5 * self.dx;
        match self.boundary {
            Boundary::Dirichlet if i == 0 => (x, x + h),
            Boundary::Dirichlet if i + 1 == self.n_points => (x - h, x),
            _ => (x - h, x + h),
        }
    }

    /// Lower and upper edges of the sampling domain.
    pub fn domain(&self) -> (f64, f64) {
        match self.boundary {
            Boundary::Periodic => (self.x_min - 0.5 * self.dx, self.x_min + (self.n_points as f64 - 0.5) * self.dx),
            Boundary::Dirichlet => (self.x_min, self.x(self.n_points - 1)),
        }
    }

    /// Maps a coordinate into the fundamental periodic cell (identity for Dirichlet).
    pub fn wrap(&self, x: f64) -> f64 {
        match self.boundary {
            Boundary::Periodic => {
                let len = self.length();
                let lo = self.x_min;
                lo + (x - lo).rem_euclid(len)
            }
            Boundary::Dirichlet => x,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self.boundary {
            Boundary::Periodic => x.is_finite(),
            Boundary::Dirichlet => x >= self.x_min && x <= self.x(self.n_points - 1),
        }
    }

    /// Neighbour index with periodic wrap; `None` past a Dirichlet wall.
    #[inline]
    pub fn neighbor(&self, i: usize, offset: isize) -> Option<usize> {
        let n = self.n_points as isize;
        let j = i as isize + offset;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::Dirichlet if (0..n).contains(&j) => Some(j as usize),
            Boundary::Dirichlet => None,
        }
    }

    /// Angular wavenumbers in FFT order for a periodic axis.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * self.dx);
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as isize } else { i as isize - n as isize };
                m as f64 * dk
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub gx: Grid1D,
    pub gy: Grid1D,
}

impl Grid2D {
    pub fn new(gx: Grid1D, gy: Grid1D) -> Self {
        Self { gx, gy }
    }

    /// Two-particle configuration space: the same 1D grid for each particle.
    pub fn square(g: Grid1D) -> Self {
        Self { gx: g, gy: g }
    }

    pub fn len(&self) -> usize {
        self.gx.n_points() * self.gy.n_points()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major index: axis 0 (particle 1) is the slow index.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.gy.n_points() + j
    }

    pub fn axis(&self, axis: usize) -> Grid1D {
        if axis == 0 {
            self.gx
        } else {
            self.gy
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.gx.dx() * self.gy.dx()
    }
}

/// Grid of either dimensionality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    One(Grid1D),
    Two(Grid2D),
}

impl Grid {
    pub fn dims(&self) -> usize {
        match self {
            Grid::One(_) => 1,
            Grid::Two(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::One(g) => g.n_points(),
            Grid::Two(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis(&self, axis: usize) -> Result<Grid1D> {
        match (self, axis) {
            (Grid::One(g), 0) => Ok(*g),
            (Grid::Two(g), 0) => Ok(g.gx),
            (Grid::Two(g), 1) => Ok(g.gy),
            _ => Err(QfdError::AxisOutOfRange {
                axis,
                dims: self.dims(),
            }),
        }
    }

    /// Shape as (rows, cols); a 1D grid is `(n, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Grid::One(g) => (g.n_points(), 1),
            Grid::Two(g) => (g.gx.n_points(), g.gy.n_points()),
        }
    }

    /// Quadrature weight of flat index `k`.
    pub fn weight(&self, k: usize) -> f64 {
        match self {
            Grid::One(g) => g.weight(k),
            Grid::Two(g) => {
                let ny = g.gy.n_points();
                g.gx.weight(k / ny) * g.gy.weight(k % ny)
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k)).collect()
    }

    pub fn as_1d(&self) -> Result<Grid1D> {
        match self {
            Grid::One(g) => Ok(*g),
            Grid::Two(_) => Err(QfdError::GridMismatch("expected a 1D grid".into())),
        }
    }

    pub fn as_2d(&self) -> Result<Grid2D> {
        match self {
            Grid::Two(g) => Ok(*g),
            Grid::One(_) => Err(QfdError::GridMismatch("expected a 2D grid".into())),
        }
    }

    pub fn is_periodic(&self) -> bool {
        match self {
            Grid::One(g) => g.is_periodic(),
            Grid::Two(g) => g.gx.is_periodic() && g.gy.is_periodic(),
        }
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QfdError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::One(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::Two(g)
    }
}
