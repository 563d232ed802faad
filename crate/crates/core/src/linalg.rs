//! Sparse direct solves, generalized symmetric eigenproblems and M-orthonormal
//! range bases, all backed by faer.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, Side};

use crate::error::{CongaError, Result};
use crate::femspace::MassBlocks;
use crate::sparse::SparseOperator;

/// Sparse LU factorization with a 1-norm condition estimate.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
    norm_one: f64,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).field("norm_one", &self.norm_one).finish()
    }
}

impl SparseLu {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(CongaError::DimensionMismatch { expected: a.nrows(), found: a.ncols() });
        }
        let lu = a.to_faer().sp_lu().map_err(|e| CongaError::Singular(format!("{e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows(), norm_one: a.norm_one() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn check(&self, b: &[f64]) -> Result<Mat<f64>> {
        if b.len() != self.n {
            return Err(CongaError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        Ok(Mat::from_fn(self.n, 1, |i, _| b[i]))
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.check(b)?;
        self.lu.solve_in_place(x.as_mut());
        Ok(x.col(0).iter().copied().collect())
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.check(b)?;
        self.lu.solve_transpose_in_place(x.as_mut());
        Ok(x.col(0).iter().copied().collect())
    }

    /// Estimate of `1 / (‖A‖₁ ‖A⁻¹‖₁)` by Hager's method with Higham's
    /// alternating-sign safeguard. Returns 0 for numerically singular input.
    pub fn rcond(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let one_norm = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0f64;
        let mut last = usize::MAX;
        for _ in 0..5 {
            let Ok(y) = self.solve(&x) else { return 0.0 };
            if y.iter().any(|v| !v.is_finite()) {
                return 0.0;
            }
            estimate = estimate.max(one_norm(&y));
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let Ok(z) = self.solve_transpose(&xi) else { return 0.0 };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, -1.0), |(bj, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bj, bv) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last {
                break;
            }
            last = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        if let Ok(y) = self.solve(&alt) {
            if y.iter().any(|v| !v.is_finite()) {
                return 0.0;
            }
            estimate = estimate.max(2.0 * one_norm(&y) / (3.0 * n as f64));
        }
        if estimate == 0.0 || self.norm_one == 0.0 {
            return 0.0;
        }
        1.0 / (estimate * self.norm_one)
    }
}

/// `L⁻¹` for one block of `M = L Lᵀ`.
fn inverse_factor(blocks: &MassBlocks) -> Mat<f64> {
    blocks.factor().transpose() * blocks.block_inverse()
}

/// Applies a block-diagonal operator with a repeated dense block to the rows of `y`.
fn apply_blockwise(block: faer::MatRef<'_, f64>, y: &Mat<f64>) -> Mat<f64> {
    let n = block.nrows();
    let count = y.nrows() / n;
    let mut out = Mat::zeros(y.nrows(), y.ncols());
    for c in 0..count {
        let rows = block * y.as_ref().subrows(c * n, n);
        out.as_mut().subrows_mut(c * n, n).copy_from(&rows);
    }
    out
}

/// Eigenpairs of `S x = λ M x` for block-diagonal SPD `M`, ascending.
/// Eigenvectors are M-orthonormal columns.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Mat<f64>>,
}

pub fn generalized_eigen(s: &SparseOperator, blocks: &MassBlocks, vectors: bool) -> Result<GeneralizedEigen> {
    let n = blocks.block_size() * blocks.count();
    if s.nrows() != n || s.ncols() != n {
        return Err(CongaError::DimensionMismatch { expected: n, found: s.nrows() });
    }
    let linv = inverse_factor(blocks);
    let space = s.rows_space();
    let lop = SparseOperator::block_diagonal(space, blocks.count(), &linv);
    let reduced = lop.matmul(s)?.matmul(&lop.transpose())?;
    let dense = reduced.to_dense();
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (dense[(i, j)] + dense[(j, i)]));
    if !vectors {
        let mut values = c.self_adjoint_eigenvalues(Side::Lower).map_err(|e| CongaError::Eigen(format!("{e:?}")))?;
        values.sort_by(f64::total_cmp);
        return Ok(GeneralizedEigen { values, vectors: None });
    }
    let eig = c.self_adjoint_eigen(Side::Lower).map_err(|e| CongaError::Eigen(format!("{e:?}")))?;
    let raw: Vec<f64> = eig.S().column_vector().iter().copied().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let u = eig.U();
    let y = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    let x = apply_blockwise(linv.transpose(), &y);
    Ok(GeneralizedEigen { values: order.iter().map(|&i| raw[i]).collect(), vectors: Some(x) })
}

/// M-orthonormal basis of the column range of a dense matrix, with its
/// numerical rank.
#[derive(Debug, Clone)]
pub struct RangeBasis {
    pub q: Mat<f64>,
    pub singular_values: Vec<f64>,
}

impl RangeBasis {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    /// Coefficients of the M-orthogonal projection of `v` in the basis `q`.
    pub fn coordinates(&self, mass: &SparseOperator, v: &[f64]) -> Result<Vec<f64>> {
        let mv = mass.mul_vec(v)?;
        Ok((0..self.rank()).map(|j| self.q.col(j).iter().zip(&mv).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn project(&self, mass: &SparseOperator, v: &[f64]) -> Result<Vec<f64>> {
        let c = self.coordinates(mass, v)?;
        let mut out = vec![0.0; v.len()];
        for (j, cj) in c.iter().enumerate() {
            for (o, q) in out.iter_mut().zip(self.q.col(j).iter()) {
                *o += cj * q;
            }
        }
        Ok(out)
    }
}

/// Singular values below `rtol · σ_max` are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub fn range_basis(columns: &Mat<f64>, blocks: &MassBlocks) -> Result<RangeBasis> {
    let n = blocks.block_size() * blocks.count();
    if columns.nrows() != n {
        return Err(CongaError::DimensionMismatch { expected: n, found: columns.nrows() });
    }
    if columns.ncols() == 0 {
        return Ok(RangeBasis { q: Mat::zeros(n, 0), singular_values: Vec::new() });
    }
    let l = blocks.factor();
    let w = apply_blockwise(l.transpose(), columns);
    let svd = w.thin_svd().map_err(|e| CongaError::Eigen(format!("svd: {e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count();
    let u = svd.U().subcols(0, rank).to_owned();
    let linv = inverse_factor(blocks);
    Ok(RangeBasis { q: apply_blockwise(linv.transpose(), &u), singular_values: sv })
}

/// Modified Gram-Schmidt in the `mass` inner product. Columns whose norm
/// falls below `drop_tol` after orthogonalization are discarded.
pub fn mgs(vectors: Vec<Vec<f64>>, mass: &SparseOperator, drop_tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for q in &out {
            let c = mass.form(q, &v)?;
            for (a, b) in v.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
        let norm = mass.form(&v, &v)?.max(0.0).sqrt();
        if norm > drop_tol {
            v.iter_mut().for_each(|a| *a /= norm);
            out.push(v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Level;
    use crate::sparse::Space;

    fn tridiag(n: usize, diag: f64) -> SparseOperator {
        let sp = Space::Broken(Level::Zero);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, diag));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseOperator::from_triplets(sp, n, sp, n, t).unwrap()
    }

    #[test]
    fn lu_solves_and_estimates_condition() {
        let a = tridiag(30, 4.0);
        let lu = SparseLu::new(&a).unwrap();
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let x = lu.solve(&b).unwrap();
        let r = a.mul_vec(&x).unwrap();
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-12));
        // exact condition of a small diagonally dominant matrix is O(1)
        let rc = lu.rcond();
        assert!(rc > 0.1 && rc <= 1.0, "{rc}");
    }

    #[test]
    fn rcond_flags_near_singular() {
        // 1D Neumann-like Laplacian with a tiny shift is nearly singular
        let n = 40;
        let mut a = tridiag(n, 2.0).to_dense();
        a[(0, 0)] = 1.0 + 1e-15;
        a[(n - 1, n - 1)] = 1.0;
        let s = SparseOperator::from_dense(Space::Broken(Level::Zero), Space::Broken(Level::Zero), &a);
        let rc = SparseLu::new(&s).map(|lu| lu.rcond()).unwrap_or(0.0);
        assert!(rc < 1e-12, "{rc}");
    }

    #[test]
    fn generalized_eigen_against_diagonal_pencil() {
        let mb = MassBlocks::new(Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.0 }), 3).unwrap();
        let s = tridiag(6, 2.0);
        let e = generalized_eigen(&s, &mb, true).unwrap();
        // M = 2I so λ are half the eigenvalues of the tridiagonal matrix
        for (k, lam) in e.values.iter().enumerate() {
            let exact = (2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / 7.0).cos()) / 2.0;
            assert!((lam - exact).abs() < 1e-13);
        }
        let x = e.vectors.unwrap();
        let m = SparseOperator::block_diagonal(s.rows_space(), 3, mb.block());
        for j in 0..6 {
            let col: Vec<f64> = x.col(j).iter().copied().collect();
            assert!((m.form(&col, &col).unwrap() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn range_basis_rank_and_projection() {
        let block = Mat::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 0.5 });
        let mb = MassBlocks::new(block.clone(), 2).unwrap();
        let m = SparseOperator::block_diagonal(Space::Broken(Level::Zero), 2, &block);
        // two identical columns and one independent one: rank 2
        let cols = Mat::from_fn(4, 3, |i, j| match j {
            0 | 1 => (i + 1) as f64,
            _ => {
                if i == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        });
        let r = range_basis(&cols, &mb).unwrap();
        assert_eq!(r.rank(), 2);
        let v = vec![1.0, 2.0, 3.0, 4.0];
        let pv = r.project(&m, &v).unwrap();
        assert!(pv.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-12));
        let w = vec![0.0, 0.0, 1.0, -1.0];
        let pw = r.project(&m, &w).unwrap();
        let res: Vec<f64> = w.iter().zip(&pw).map(|(a, b)| a - b).collect();
        for j in 0..2 {
            let q: Vec<f64> = r.q.col(j).iter().copied().collect();
            assert!(m.form(&q, &res).unwrap().abs() < 1e-12);
        }
    }
}
