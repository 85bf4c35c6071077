//! Small dense symmetric eigensolves by cyclic Jacobi rotations.

use nalgebra::DMatrix;

/// Eigenvalues in ascending order and the matching orthonormal eigenvectors
/// (as columns).
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix expected");
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    symmetric_eigen(m).0
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn extremal_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 2 {
        let (p, q, r) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let mid = 0.5 * (p + r);
        let rad = (0.5 * (p - r)).hypot(q);
        return (mid - rad, mid + rad);
    }
    let e = symmetric_eigenvalues(m);
    (e[0], e[e.len() - 1])
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `‖M - Mᵀ‖_F`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_symmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(n, n, |i, j| entries[(i * 8 + j) % entries.len()]);
        symmetrize(&mut m);
        m
    }

    #[test]
    fn diagonal_and_known_spectra() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0]));
        assert_eq!(symmetric_eigenvalues(&d), vec![-1.0, 2.0, 3.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
        let (lo, hi) = extremal_eigenvalues(&m);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn agrees_with_nalgebra(n in 2usize..=8, entries in prop::collection::vec(-5.0f64..5.0, 64)) {
            let m = random_symmetric(n, &entries);
            let (values, vectors) = symmetric_eigen(&m);
            let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in values.iter().zip(&reference) {
                prop_assert!((x - y).abs() < 1e-11);
            }
            let recon = &vectors * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values.clone())) * vectors.transpose();
            prop_assert!((recon - &m).norm() < 1e-11);
            let (lo, hi) = extremal_eigenvalues(&m);
            prop_assert!((lo - values[0]).abs() < 1e-11 && (hi - values[n - 1]).abs() < 1e-11);
        }
    }
}
