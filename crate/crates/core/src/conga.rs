//! Projection-based differentials, the penalized broken Hodge-Laplacian,
//! harmonic fields and the discrete Hodge-Helmholtz decomposition.

use faer::Mat;
use serde::Serialize;

use crate::assembly::ComplexOperators;
use crate::error::{CongaError, Result};
use crate::femspace::BrokenField;
use crate::grid::Level;
use crate::linalg::{generalized_eigen, mgs, range_basis, RangeBasis};
use crate::sparse::{Space, SparseOperator};

/// `D^ℓ P^ℓ`.
pub fn conga_diff(level: Level, ops: &ComplexOperators) -> Result<SparseOperator> {
    ops.diff(level)?.matmul(ops.projection(level))
}

/// The three symmetric summands of the stiffness matrix.
#[derive(Debug, Clone)]
pub struct HodgeParts {
    /// `M^ℓ (D P) (M^{ℓ-1})⁻¹ (D P)ᵀ M^ℓ`, absent at level 0.
    pub div: Option<SparseOperator>,
    /// `(I − P)ᵀ M (I − P)`, unscaled.
    pub jump: SparseOperator,
    /// `(D P)ᵀ M^{ℓ+1} (D P)`, absent at level 2.
    pub curl: Option<SparseOperator>,
}

/// Symmetric form `(S, M)` of the broken Hodge-Laplacian at one level.
#[derive(Debug, Clone)]
pub struct HodgeOperator {
    pub level: Level,
    pub alpha: f64,
    pub stiffness: SparseOperator,
    pub mass: SparseOperator,
    pub parts: HodgeParts,
}

pub fn hodge_operator(level: Level, ops: &ComplexOperators, alpha: f64) -> Result<HodgeOperator> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(CongaError::NegativePenalty(alpha));
    }
    let m = ops.mass(level);
    let div = match level.prev() {
        Some(prev) => {
            let dp = conga_diff(prev, ops)?;
            let mdp = m.matmul(&dp)?;
            Some(mdp.matmul(&ops.mass_inverse(prev))?.matmul(&mdp.transpose())?)
        }
        None => None,
    };
    let n = ops.grid().dim(level);
    let i_minus_p = SparseOperator::identity(Space::Broken(level), n).add_scaled(-1.0, ops.projection(level))?;
    let jump = i_minus_p.transpose().matmul(m)?.matmul(&i_minus_p)?;
    let curl = match level.next() {
        Some(next) => {
            let dp = conga_diff(level, ops)?;
            Some(dp.transpose().matmul(ops.mass(next))?.matmul(&dp)?)
        }
        None => None,
    };
    let mut stiffness = jump.scaled(alpha);
    for part in [&div, &curl].into_iter().flatten() {
        stiffness = stiffness.add_scaled(1.0, part)?;
    }
    Ok(HodgeOperator { level, alpha, stiffness, mass: m.clone(), parts: HodgeParts { div, jump, curl } })
}

/// Default nullspace cut relative to the largest pencil eigenvalue.
pub const NULLSPACE_TOL: f64 = 1e-9;
/// Minimum acceptable ratio between the eigenvalues straddling the cut.
pub const MIN_GAP_RATIO: f64 = 100.0;

/// Size of the numerical nullspace of a pencil and how cleanly it separates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullspaceCut {
    pub nullity: usize,
    pub lambda_max: f64,
    pub threshold: f64,
    /// Ratio of the first eigenvalue above the cut to the last one below it
    /// (or to the threshold when the nullspace is empty).
    pub gap_ratio: f64,
}

impl NullspaceCut {
    pub fn from_eigenvalues(values: &[f64], tol: f64) -> Self {
        let lambda_max = values.iter().copied().fold(0.0, f64::max);
        let threshold = tol * lambda_max;
        let nullity = values.iter().take_while(|&&v| v < threshold).count();
        let gap_ratio = match values.get(nullity) {
            None => f64::INFINITY,
            Some(&above) => {
                let below =
                    if nullity == 0 { threshold } else { values[nullity - 1].abs().max(f64::EPSILON * lambda_max) };
                above / below
            }
        };
        NullspaceCut { nullity, lambda_max, threshold, gap_ratio }
    }

    pub fn well_separated(&self) -> bool {
        self.gap_ratio >= MIN_GAP_RATIO
    }
}

/// Nullity of the `(S, M)` pencil of a Hodge operator.
pub fn pencil_nullity(op: &HodgeOperator, ops: &ComplexOperators, tol: f64) -> Result<NullspaceCut> {
    let eig = generalized_eigen(&op.stiffness, ops.mass_blocks(op.level), false)?;
    Ok(NullspaceCut::from_eigenvalues(&eig.values, tol))
}

/// M-orthonormal basis of discrete harmonic fields.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub level: Level,
    pub fields: Vec<BrokenField>,
    pub cut: NullspaceCut,
}

impl HarmonicBasis {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Columns of the basis as a dense matrix.
    pub fn matrix(&self, n: usize) -> Mat<f64> {
        Mat::from_fn(n, self.fields.len(), |i, j| self.fields[j].coeffs[i])
    }
}

pub fn harmonic_basis(op: &HodgeOperator, ops: &ComplexOperators, tol: f64) -> Result<HarmonicBasis> {
    if op.alpha <= 0.0 {
        return Err(CongaError::PenaltyRequired);
    }
    let eig = generalized_eigen(&op.stiffness, ops.mass_blocks(op.level), true)?;
    let cut = NullspaceCut::from_eigenvalues(&eig.values, tol);
    let x = eig.vectors.expect("eigenvectors requested");
    let raw = (0..cut.nullity).map(|j| x.col(j).iter().copied().collect()).collect();
    let fields = mgs(raw, &op.mass, 1e-12)?
        .into_iter()
        .map(|c| BrokenField::new(ops.grid(), op.level, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicBasis { level: op.level, fields, cut })
}

/// The four M-orthogonal components of a broken field.
#[derive(Debug, Clone)]
pub struct HodgeDecomposition {
    pub v_b: BrokenField,
    pub v_h: BrokenField,
    pub v_bstar: BrokenField,
    pub v_jump: BrokenField,
    /// Dimensions of the exact, harmonic, coexact and jump subspaces.
    pub dims: [usize; 4],
}

impl HodgeDecomposition {
    pub fn components(&self) -> [&BrokenField; 4] {
        [&self.v_b, &self.v_h, &self.v_bstar, &self.v_jump]
    }
}

/// Reusable bases for decomposing many fields at one level.
#[derive(Debug, Clone)]
pub struct Decomposer {
    level: Level,
    conforming: RangeBasis,
    exact: RangeBasis,
    harmonic: Vec<BrokenField>,
}

impl Decomposer {
    pub fn new(level: Level, ops: &ComplexOperators, harmonic: &HarmonicBasis) -> Result<Self> {
        if harmonic.level != level {
            return Err(CongaError::LevelMismatch { expected: level, found: harmonic.level });
        }
        let blocks = ops.mass_blocks(level);
        let conforming = range_basis(&ops.conforming_basis(level).to_dense(), blocks)?;
        let exact = match level.prev() {
            Some(prev) => {
                let dc = ops.diff(prev)?.matmul(ops.conforming_basis(prev))?;
                range_basis(&dc.to_dense(), blocks)?
            }
            None => RangeBasis { q: Mat::zeros(ops.grid().dim(level), 0), singular_values: Vec::new() },
        };
        Ok(Decomposer { level, conforming, exact, harmonic: harmonic.fields.clone() })
    }

    pub fn decompose(&self, v: &BrokenField, ops: &ComplexOperators) -> Result<HodgeDecomposition> {
        if v.level != self.level {
            return Err(CongaError::LevelMismatch { expected: self.level, found: v.level });
        }
        let m = ops.mass(self.level);
        let vc = self.conforming.project(m, &v.coeffs)?;
        let jump: Vec<f64> = v.coeffs.iter().zip(&vc).map(|(a, b)| a - b).collect();
        let mut vh = vec![0.0; v.len()];
        for q in &self.harmonic {
            let c = m.form(&q.coeffs, &v.coeffs)?;
            vh.iter_mut().zip(&q.coeffs).for_each(|(a, b)| *a += c * b);
        }
        let vb = self.exact.project(m, &v.coeffs)?;
        let vbstar: Vec<f64> = (0..v.len()).map(|i| vc[i] - vh[i] - vb[i]).collect();
        let n = v.len();
        let (nc, nb, nh) = (self.conforming.rank(), self.exact.rank(), self.harmonic.len());
        let grid = ops.grid();
        Ok(HodgeDecomposition {
            v_b: BrokenField::new(grid, self.level, vb)?,
            v_h: BrokenField::new(grid, self.level, vh)?,
            v_bstar: BrokenField::new(grid, self.level, vbstar)?,
            v_jump: BrokenField::new(grid, self.level, jump)?,
            dims: [nb, nh, nc.saturating_sub(nb + nh), n - nc],
        })
    }
}

pub fn hodge_decompose(
    v: &BrokenField,
    ops: &ComplexOperators,
    harmonic: &HarmonicBasis,
) -> Result<HodgeDecomposition> {
    Decomposer::new(v.level, ops, harmonic)?.decompose(v, ops)
}

/// `d*q = (M^ℓ)⁻¹ (D^ℓ P^ℓ)ᵀ M^{ℓ+1} q` for `q` at level `ℓ + 1`.
pub fn adjoint_apply(q: &BrokenField, ops: &ComplexOperators) -> Result<BrokenField> {
    let target = q.level.prev().ok_or_else(|| CongaError::InvalidMultiIndex("no adjoint from level 0".into()))?;
    let mq = ops.mass(q.level).mul_vec(&q.coeffs)?;
    let rhs = conga_diff(target, ops)?.tmul_vec(&mq)?;
    BrokenField::new(ops.grid(), target, ops.mass_blocks(target).solve(&rhs)?)
}
