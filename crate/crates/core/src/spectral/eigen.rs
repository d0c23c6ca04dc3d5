use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 10_000;

/// Leading eigenpairs by magnitude; column `j` of `vectors` pairs with
/// `values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// Largest `||M v - lambda v||` over the returned pairs.
    pub max_residual: f64,
}

impl EigenPairs {
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// The first `k` pairs.
    pub fn leading(&self, k: usize) -> EigenPairs {
        let k = k.min(self.k());
        EigenPairs {
            values: self.values[..k].to_vec(),
            vectors: self.vectors.columns(0, k).into_owned(),
            max_residual: self.max_residual,
        }
    }
}

/// The `k` eigenpairs of the symmetric matrix `m` largest in absolute value,
/// sorted by descending `|lambda|` (positive first on equal magnitude). Each
/// vector is scaled so its largest-magnitude entry is positive.
pub fn top_eigenpairs(m: &DMatrix<f64>, k: usize) -> Result<EigenPairs> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a {n}x{n} matrix")));
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidInput(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS).ok_or(Error::NoConvergence {
        residual: f64::NAN,
        tolerance: RESIDUAL_TOL,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        y.abs().total_cmp(&x.abs()).then(y.total_cmp(&x)).then(a.cmp(&b))
    });
    order.truncate(k);

    let values: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (col, &j) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(j);
        let mut pivot = 0;
        for i in 1..n {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }

    let norm = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut max_residual = 0.0f64;
    for (col, &lambda) in values.iter().enumerate() {
        let v = vectors.column(col);
        max_residual = max_residual.max((m * v - v * lambda).norm());
    }
    let tolerance = RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE);
    if max_residual > tolerance {
        return Err(Error::NoConvergence {
            residual: max_residual,
            tolerance,
        });
    }
    Ok(EigenPairs {
        values,
        vectors,
        max_residual,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi rotations; eigenvalues on the diagonal, vectors in columns.
    pub(crate) fn jacobi(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = m.nrows();
        let mut a = m.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let (arp, arq) = (a[(r, p)], a[(r, q)]);
                        a[(r, p)] = c * arp - s * arq;
                        a[(r, q)] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let (apr, aqr) = (a[(p, r)], a[(q, r)]);
                        a[(p, r)] = c * apr - s * aqr;
                        a[(q, r)] = s * apr + c * aqr;
                    }
                    for r in 0..n {
                        let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                        v[(r, p)] = c * vrp - s * vrq;
                        v[(r, q)] = s * vrp + c * vrq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let x = rng.random_range(-1.0..1.0);
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn identity_and_diagonal() {
        let e = top_eigenpairs(&DMatrix::identity(4, 4), 4).unwrap();
        assert!(e.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let gram = e.vectors.transpose() * &e.vectors;
        assert!((gram - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);

        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -2.0, 1.0]));
        let e = top_eigenpairs(&d, 2).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] - 3.0).abs() < 1e-15);
        assert!((e.values[1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn matches_jacobi_oracle() {
        let m = random_symmetric(10, 1);
        let (mut oracle, vecs) = jacobi(&m);
        let mut idx: Vec<usize> = (0..10).collect();
        idx.sort_by(|&a, &b| oracle[b].abs().total_cmp(&oracle[a].abs()));
        let e = top_eigenpairs(&m, 10).unwrap();
        for (col, &j) in idx.iter().enumerate() {
            assert!((e.values[col] - oracle[j]).abs() < 1e-8);
            // eigenvectors agree up to sign
            let dot = e.vectors.column(col).dot(&vecs.column(j));
            assert!((dot.abs() - 1.0).abs() < 1e-8);
        }
        oracle.sort_by(|a, b| a.total_cmp(b));
        assert!(e.max_residual <= 1e-8 * oracle.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn rejects_bad_requests() {
        let m = random_symmetric(3, 2);
        assert!(top_eigenpairs(&m, 0).is_err());
        assert!(top_eigenpairs(&m, 4).is_err());
        let mut asym = m.clone();
        asym[(0, 1)] += 1.0;
        assert!(top_eigenpairs(&asym, 1).is_err());
    }

    proptest! {
        #[test]
        fn orthonormal_sorted_small_residual(seed in any::<u64>(), n in 2usize..25) {
            let m = random_symmetric(n, seed);
            let k = 1 + (seed as usize) % n;
            let e = top_eigenpairs(&m, k).unwrap();
            let gram = e.vectors.transpose() * &e.vectors;
            prop_assert!((gram - DMatrix::<f64>::identity(k, k)).amax() < 1e-8);
            for w in e.values.windows(2) {
                prop_assert!(w[0].abs() >= w[1].abs());
            }
            let norm = m.clone().symmetric_eigenvalues().amax();
            prop_assert!(e.max_residual <= 1e-8 * norm);
        }
    }
}
