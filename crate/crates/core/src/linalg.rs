//! Sparse symmetric positive-definite factorization (backed by `faer`'s
//! supernodal Cholesky with AMD ordering) and small dense helpers.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::Matrix3;

use crate::error::{Error, Result};

/// Cholesky factorization of a sparse SPD matrix, reusable across solves.
pub struct SpdFactor {
    dim: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor").field("dim", &self.dim).finish()
    }
}

impl SpdFactor {
    /// Factors the symmetric matrix given by `(row, col, value)` triplets.
    /// Duplicates are summed. Only the lower triangle (`row >= col`) is read,
    /// so callers may pass either the full matrix or just its lower half.
    pub fn new(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Solver("empty system".into()));
        }
        // Sequential kernels keep results bit-identical regardless of the
        // size of the rayon pool.
        faer::set_global_parallelism(faer::Par::Seq);
        let lower: Vec<Triplet<usize, usize, f64>> = triplets
            .iter()
            .filter(|(r, c, _)| r >= c)
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &lower)
            .map_err(|e| Error::Solver(format!("assembly failed: {e:?}")))?;
        let llt = matrix
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("matrix is not positive definite: {e}")))?;
        Ok(Self { dim, llt })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b` for each column in place.
    pub fn solve_columns<const K: usize>(&self, columns: &mut [Vec<f64>; K]) -> Result<()> {
        for col in columns.iter() {
            if col.len() != self.dim {
                return Err(Error::SizeMismatch {
                    what: "right-hand side",
                    expected: self.dim,
                    got: col.len(),
                });
            }
        }
        let mut rhs = Mat::<f64>::from_fn(self.dim, K, |i, j| columns[j][i]);
        self.llt.solve_in_place(rhs.as_mut());
        for (j, col) in columns.iter_mut().enumerate() {
            for (i, x) in col.iter_mut().enumerate() {
                *x = rhs[(i, j)];
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::Solver("non-finite solution".into()));
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut cols = [rhs.to_vec()];
        self.solve_columns(&mut cols)?;
        let [x] = cols;
        Ok(x)
    }
}

/// Closest proper rotation to `s` in the Procrustes sense: maximizes
/// `trace(R S)` over rotations. Falls back to the identity when the SVD
/// fails or `s` vanishes.
pub fn fit_rotation(s: &Matrix3<f64>) -> Matrix3<f64> {
    if s.iter().all(|x| x.abs() < 1e-300) {
        return Matrix3::identity();
    }
    let svd = s.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let mut r = v_t.transpose() * u.transpose();
    if r.determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let k = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(2);
        let mut u = u;
        u.column_mut(k).neg_mut();
        r = v_t.transpose() * u.transpose();
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector, Rotation3, Vector3};

    #[test]
    fn matches_dense_solve_on_path_laplacian() {
        // 1D Laplacian + identity, assembled with duplicate entries
        let n = 50;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 1.0));
        }
        for i in 0..n - 1 {
            trips.push((i, i, 1.0));
            trips.push((i + 1, i + 1, 1.0));
            trips.push((i + 1, i, -1.0));
            trips.push((i, i + 1, -1.0));
        }
        let f = SpdFactor::new(n, &trips).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = f.solve(&b).unwrap();

        let mut dense = DMatrix::<f64>::zeros(n, n);
        for &(r, c, v) in &trips {
            dense[(r, c)] += v;
        }
        let expect = dense.clone().cholesky().unwrap().solve(&DVector::from_vec(b));
        for i in 0..n {
            assert_relative_eq!(x[i], expect[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let trips = [(0, 0, 1.0), (1, 1, -1.0)];
        assert!(matches!(SpdFactor::new(2, &trips), Err(Error::Solver(_))));
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let q = Rotation3::from_euler_angles(0.3, -1.1, 2.0).into_inner();
        let pts = [
            Vector3::new(1.0, 0.2, 0.0),
            Vector3::new(0.0, 1.0, 0.5),
            Vector3::new(-0.3, 0.1, 1.0),
        ];
        let mut s = Matrix3::zeros();
        for p in &pts {
            s += p * (q * p).transpose();
        }
        let r = fit_rotation(&s);
        assert_relative_eq!(r, q, epsilon = 1e-10);
    }

    #[test]
    fn procrustes_fixes_reflections() {
        let s = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, -3.0));
        let r = fit_rotation(&s);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-12);
    }
}
