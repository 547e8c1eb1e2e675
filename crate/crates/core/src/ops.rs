//! Second-order finite-difference derivatives and grid quadrature.
//!
//! Interior nodes use central stencils. Periodic axes wrap; Dirichlet axes
//! switch to one-sided second-order stencils on the two wall nodes.

use num_complex::Complex64;

use crate::error::Result;
use crate::field::{Field, RealField, Scalar};
use crate::grid::{Boundary, Grid, Grid1D};

/// Applies `kernel` to every grid line running along `axis`.
pub(crate) fn map_lines<T: Scalar>(
    field: &Field<T>,
    axis: usize,
    kernel: impl Fn(&Grid1D, &[T], &mut [T]),
) -> Result<Field<T>> {
    let grid = *field.grid();
    let line_grid = grid.axis(axis)?;
    let mut out = vec![T::default(); field.len()];
    match grid {
        Grid::One(_) => kernel(&line_grid, field.values(), &mut out),
        Grid::Two(g2) => {
            let (nx, ny) = (g2.gx.n_points(), g2.gy.n_points());
            if axis == 1 {
                for (src, dst) in field.values().chunks(ny).zip(out.chunks_mut(ny)) {
                    kernel(&line_grid, src, dst);
                }
            } else {
                let mut line = vec![T::default(); nx];
                let mut res = vec![T::default(); nx];
                for j in 0..ny {
                    for i in 0..nx {
                        line[i] = field.values()[i * ny + j];
                    }
                    kernel(&line_grid, &line, &mut res);
                    for i in 0..nx {
                        out[i * ny + j] = res[i];
                    }
                }
            }
        }
    }
    Field::new(grid, out)
}

/// First derivative of one line.
pub(crate) fn d1_line<T: Scalar>(g: &Grid1D, f: &[T], out: &mut [T]) {
    let n = f.len();
    let inv2h = 0.5 / g.dx();
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv2h;
    }
    match g.boundary() {
        Boundary::Periodic => {
            out[0] = (f[1] - f[n - 1]) * inv2h;
            out[n - 1] = (f[0] - f[n - 2]) * inv2h;
        }
        Boundary::Dirichlet => {
            out[0] = (f[1] * 4.0 - f[0] * 3.0 - f[2]) * inv2h;
            out[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) * inv2h;
        }
    }
}

/// Second derivative of one line.
pub(crate) fn d2_line<T: Scalar>(g: &Grid1D, f: &[T], out: &mut [T]) {
    let n = f.len();
    let inv_h2 = 1.0 / (g.dx() * g.dx());
    for i in 1..n - 1 {
        out[i] = (f[i + 1] + f[i - 1] - f[i] * 2.0) * inv_h2;
    }
    match g.boundary() {
        Boundary::Periodic => {
            out[0] = (f[1] + f[n - 1] - f[0] * 2.0) * inv_h2;
            out[n - 1] = (f[0] + f[n - 2] - f[n - 1] * 2.0) * inv_h2;
        }
        Boundary::Dirichlet => {
            out[0] = (f[0] * 2.0 - f[1] * 5.0 + f[2] * 4.0 - f[3]) * inv_h2;
            out[n - 1] = (f[n - 1] * 2.0 - f[n - 2] * 5.0 + f[n - 3] * 4.0 - f[n - 4]) * inv_h2;
        }
    }
}

/// ∂f/∂(axis).
pub fn gradient<T: Scalar>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    map_lines(f, axis, d1_line)
}

/// ∂²f/∂(axis)².
pub fn second_derivative<T: Scalar>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    map_lines(f, axis, d2_line)
}

/// Sum of second derivatives over every axis (3-point / 5-point stencil).
pub fn laplacian<T: Scalar>(f: &Field<T>) -> Field<T> {
    let dims = f.grid().dims();
    let mut acc = second_derivative(f, 0).expect("axis 0 always exists");
    for axis in 1..dims {
        let d = second_derivative(f, axis).expect("axis < dims");
        for (a, b) in acc.values_mut().iter_mut().zip(d.values()) {
            *a = *a + *b;
        }
    }
    acc
}

/// ∫f with unit weights in the interior and trapezoid halves at Dirichlet walls.
pub fn integrate(f: &RealField) -> f64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * grid.weight(k))
        .sum()
}

pub fn integrate_complex(f: &Field<Complex64>) -> Complex64 {
    let grid = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * grid.weight(k))
        .sum()
}

/// Quadrature of a raw 1D line.
pub fn integrate_line(g: &Grid1D, f: &[f64]) -> f64 {
    f.iter().enumerate().map(|(i, v)| v * g.weight(i)).sum()
}
