//! Lowest eigenpairs of the discrete single-particle Hamiltonian.

use nalgebra::DMatrix;

use crate::error::{QfdError, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix (diag `d`,
/// constant off-diagonal `e`) strictly below `x`.
fn sturm_count(d: &[f64], e: f64, x: f64) -> usize {
    let e2 = e * e;
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for (i, di) in d.iter().enumerate() {
        q = if i == 0 { di - x } else { di - x - e2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect(d: &[f64], e: f64, k: usize, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves (T − σ) y = b in place (no pivoting; zero pivots are nudged).
fn shifted_solve(d: &[f64], e: f64, sigma: f64, b: &mut [f64], c: &mut [f64]) {
    let n = d.len();
    let nudge = |p: f64| if p == 0.0 { f64::EPSILON * (e.abs() + sigma.abs()).max(1.0) } else { p };
    let mut piv = nudge(d[0] - sigma);
    c[0] = e / piv;
    b[0] /= piv;
    for i in 1..n {
        piv = nudge(d[i] - sigma - e * c[i - 1]);
        c[i] = e / piv;
        b[i] = (b[i] - e * b[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        b[i] -= c[i] * b[i + 1];
    }
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Lowest `count` eigenpairs of a symmetric tridiagonal matrix, eigenvectors
/// orthonormal in the Euclidean inner product.
pub(crate) fn lowest_tridiagonal(d: &[f64], e: f64, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = d.len();
    if count == 0 || count > n {
        return Err(QfdError::param("orbitals", format!("cannot take {count} eigenpairs of a {n}×{n} matrix")));
    }
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * e.abs();
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * e.abs();
    let mut values = Vec::with_capacity(count);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut c = vec![0.0; n];
    for k in 0..count {
        let lambda = bisect(d, e, k, lo, hi);
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * ((i as f64) * 0.7 + k as f64).sin()).collect();
        normalize(&mut v);
        for _ in 0..4 {
            shifted_solve(d, e, lambda, &mut v, &mut c);
            for u in &vectors {
                let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
            }
            normalize(&mut v);
        }
        values.push(lambda);
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// Lowest `count` eigenpairs of a dense symmetric matrix.
pub(crate) fn lowest_dense(m: DMatrix<f64>, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = m.nrows();
    if count == 0 || count > n {
        return Err(QfdError::param("orbitals", format!("cannot take {count} eigenpairs of a {n}×{n} matrix")));
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let values = order[..count].iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order[..count]
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok((values, vectors))
}
