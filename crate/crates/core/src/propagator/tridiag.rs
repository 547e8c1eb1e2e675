//! Complex tridiagonal solves with constant off-diagonals.

use num_complex::Complex64 as C64;

/// Solves `T x = rhs` in place, where `T` has diagonal `diag` and the
/// constant value `off` on both off-diagonals. `work` needs `diag.len()` slots.
pub(crate) fn thomas(off: C64, diag: &[C64], rhs: &mut [C64], work: &mut [C64]) {
    let n = diag.len();
    debug_assert!(rhs.len() == n && work.len() >= n);
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        work[i] = off / beta;
        beta = diag[i] - off * work[i];
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= work[i + 1] * next;
    }
}

/// Periodic variant: the corners `T[0][n-1]` and `T[n-1][0]` also hold `off`.
/// Sherman–Morrison on top of two ordinary tridiagonal solves.
pub(crate) fn cyclic_thomas(off: C64, diag: &[C64], rhs: &mut [C64], scratch: &mut CyclicScratch) {
    let n = diag.len();
    let gamma = -diag[0];
    let CyclicScratch { modified, z, work } = scratch;
    modified.clear();
    modified.extend_from_slice(diag);
    modified[0] = diag[0] - gamma;
    modified[n - 1] = diag[n - 1] - off * off / gamma;

    thomas(off, modified, rhs, work);

    z.clear();
    z.resize(n, C64::new(0.0, 0.0));
    z[0] = gamma;
    z[n - 1] = off;
    thomas(off, modified, z, work);

    let fact = (rhs[0] + off * rhs[n - 1] / gamma) / (C64::new(1.0, 0.0) + z[0] + off * z[n - 1] / gamma);
    for (x, zi) in rhs.iter_mut().zip(z.iter()) {
        *x -= fact * zi;
    }
}

#[derive(Default, Clone)]
pub(crate) struct CyclicScratch {
    modified: Vec<C64>,
    z: Vec<C64>,
    work: Vec<C64>,
}

impl CyclicScratch {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            modified: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            work: vec![C64::new(0.0, 0.0); n],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(off: C64, diag: &[C64], x: &[C64], cyclic: bool) -> Vec<C64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                } else if cyclic {
                    s += off * x[n - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                } else if cyclic {
                    s += off * x[0];
                }
                s
            })
            .collect()
    }

    #[test]
    fn solves_plain_and_cyclic_systems() {
        let n = 9;
        let off = C64::new(-0.3, 0.7);
        let diag: Vec<C64> = (0..n).map(|i| C64::new(2.5 + 0.1 * i as f64, 1.0 - 0.05 * i as f64)).collect();
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        for cyclic in [false, true] {
            let mut rhs = apply(off, &diag, &x, cyclic);
            if cyclic {
                cyclic_thomas(off, &diag, &mut rhs, &mut CyclicScratch::new(n));
            } else {
                thomas(off, &diag, &mut rhs, &mut vec![C64::new(0.0, 0.0); n]);
            }
            for (a, b) in rhs.iter().zip(&x) {
                assert!((a - b).norm() < 1e-13, "cyclic={cyclic}");
            }
        }
    }
}
