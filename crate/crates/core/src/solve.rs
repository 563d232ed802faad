//! Mixed Hodge-Laplace and Helmholtz source solvers, conforming reference
//! solvers, and the generalized eigenproblem of the broken Hodge-Laplacian.

use std::time::Instant;

use faer::Mat;
use serde::Serialize;

use crate::assembly::ComplexOperators;
use crate::conga::{conga_diff, hodge_operator, HarmonicBasis, HodgeOperator, NullspaceCut, NULLSPACE_TOL};
use crate::error::{CongaError, Result};
use crate::femspace::{error_measure, load_vector, BrokenField, ErrorMeasure, SmoothFunction};
use crate::grid::Level;
use crate::linalg::{generalized_eigen, SparseLu};
use crate::sparse::{Space, SparseOperator};

/// Factorizations with a reciprocal condition estimate below this are rejected.
pub const RCOND_FLOOR: f64 = 1e-12;

/// Assembles a block matrix from sparse pieces placed at given offsets.
struct BlockSystem {
    n: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl BlockSystem {
    fn new(n: usize) -> Self {
        BlockSystem { n, triplets: Vec::new() }
    }

    fn put(&mut self, a: &SparseOperator, row: usize, col: usize, scale: f64) {
        self.triplets.extend(a.triplets().map(|(i, j, v)| (row + i, col + j, scale * v)));
    }

    fn put_dense(&mut self, a: &Mat<f64>, row: usize, col: usize) {
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                self.triplets.push((row + i, col + j, a[(i, j)]));
            }
        }
    }

    fn build(self) -> Result<SparseOperator> {
        SparseOperator::from_triplets(Space::Coefficients, self.n, Space::Coefficients, self.n, self.triplets)
    }
}

/// Factorizes and solves, rejecting ill-conditioned systems.
fn guarded_solve(a: &SparseOperator, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = SparseLu::new(a)?;
    let rcond = lu.rcond();
    if !(rcond >= RCOND_FLOOR) {
        return Err(CongaError::Singular(format!("reciprocal condition estimate {rcond:.3e}")));
    }
    let x = lu.solve(rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CongaError::Singular("non-finite solution".into()));
    }
    Ok((x, rcond))
}

fn relative_residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> Result<f64> {
    let ax = a.mul_vec(x)?;
    let r = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(if nb > 0.0 { r / nb } else { r })
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `‖(I − P) u‖` in the L² product.
pub fn jump_norm(ops: &ComplexOperators, u: &BrokenField) -> Result<f64> {
    let pu = ops.projection(u.level).mul_vec(&u.coeffs)?;
    ops.norm(u.level, &sub(&u.coeffs, &pu))
}

#[derive(Debug, Clone, Serialize)]
pub struct MixedDiagnostics {
    pub residual: f64,
    pub jump_norm: f64,
    /// `max_q |⟨P u, q⟩|` over the harmonic basis.
    pub harmonic_residual: f64,
    pub rcond: f64,
    pub filtered: bool,
}

#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub sigma: BrokenField,
    pub u: BrokenField,
    pub p: Vec<f64>,
    pub diagnostics: MixedDiagnostics,
}

/// Mixed Hodge-Laplace source problem at level `ℓ ≥ 1` for a given load
/// vector `b_μ = ⟨f, Λ_μ⟩`.
pub fn solve_mixed_load(
    level: Level,
    load: &[f64],
    ops: &ComplexOperators,
    alpha: f64,
    harmonic: &HarmonicBasis,
    filtered: bool,
) -> Result<MixedSolution> {
    if alpha <= 0.0 {
        return Err(CongaError::PenaltyRequired);
    }
    let prev = level.prev().ok_or_else(|| CongaError::InvalidMultiIndex("mixed problem needs level 1 or 2".into()))?;
    if harmonic.level != level {
        return Err(CongaError::LevelMismatch { expected: level, found: harmonic.level });
    }
    let grid = ops.grid();
    let (n0, n1, nh) = (grid.dim(prev), grid.dim(level), harmonic.len());
    if load.len() != n1 {
        return Err(CongaError::DimensionMismatch { expected: n1, found: load.len() });
    }
    let m = ops.mass(level);
    let p = ops.projection(level);
    let dp = conga_diff(prev, ops)?;
    let mdp = m.matmul(&dp)?;
    let op = hodge_operator(level, ops, alpha)?;
    let mut a11 = op.parts.jump.scaled(alpha);
    if let Some(curl) = &op.parts.curl {
        a11 = a11.add_scaled(1.0, curl)?;
    }
    // Pᵀ M H, dense n1 × nh
    let h = harmonic.matrix(n1);
    let mut pmh = Mat::zeros(n1, nh);
    for j in 0..nh {
        let col: Vec<f64> = h.col(j).iter().copied().collect();
        let v = p.tmul_vec(&m.mul_vec(&col)?)?;
        for i in 0..n1 {
            pmh[(i, j)] = v[i];
        }
    }
    let mut sys = BlockSystem::new(n0 + n1 + nh);
    sys.put(ops.mass(prev), 0, 0, -1.0);
    sys.put(&mdp.transpose(), 0, n0, 1.0);
    sys.put(&mdp, n0, 0, 1.0);
    sys.put(&a11, n0, n0, 1.0);
    sys.put_dense(&pmh, n0, n0 + n1);
    sys.put_dense(&pmh.transpose().to_owned(), n0 + n1, n0);
    let a = sys.build()?;
    let rhs_u = if filtered { p.tmul_vec(load)? } else { load.to_vec() };
    let mut rhs = vec![0.0; n0 + n1 + nh];
    rhs[n0..n0 + n1].copy_from_slice(&rhs_u);
    let (x, rcond) = guarded_solve(&a, &rhs)?;
    let residual = relative_residual(&a, &x, &rhs)?;
    let sigma = BrokenField::new(grid, prev, x[..n0].to_vec())?;
    let u = BrokenField::new(grid, level, x[n0..n0 + n1].to_vec())?;
    let pu = p.mul_vec(&u.coeffs)?;
    let mut harmonic_residual = 0.0f64;
    for q in &harmonic.fields {
        harmonic_residual = harmonic_residual.max(m.form(&pu, &q.coeffs)?.abs());
    }
    let diagnostics = MixedDiagnostics { residual, jump_norm: jump_norm(ops, &u)?, harmonic_residual, rcond, filtered };
    Ok(MixedSolution { sigma, u, p: x[n0 + n1..].to_vec(), diagnostics })
}

pub fn solve_source_mixed(
    level: Level,
    f: &SmoothFunction,
    ops: &ComplexOperators,
    alpha: f64,
    harmonic: &HarmonicBasis,
    filtered: bool,
) -> Result<MixedSolution> {
    let load = load_vector(ops.grid(), level, f)?;
    solve_mixed_load(level, &load, ops, alpha, harmonic, filtered)
}

/// Solution of a conforming reference problem, expressed in broken coefficients.
#[derive(Debug, Clone)]
pub struct ConformingSolution {
    pub sigma: BrokenField,
    pub u: BrokenField,
    pub p: Vec<f64>,
    pub rcond: f64,
}

/// Conforming mixed problem with an optional `−ω²` shift, obtained by
/// restricting every matrix to the stitched conforming bases:
/// `−⟨σ, τ⟩ + ⟨u, dτ⟩ = 0`, `⟨dσ, v⟩ + ⟨du, dv⟩ − ω²⟨u, v⟩ + ⟨p, v⟩ = ⟨f, v⟩`,
/// `⟨u, q⟩ = 0`.
pub fn solve_conforming_load(
    level: Level,
    load: &[f64],
    ops: &ComplexOperators,
    harmonic: Option<&HarmonicBasis>,
    omega: f64,
) -> Result<ConformingSolution> {
    let prev = level.prev().ok_or_else(|| CongaError::InvalidMultiIndex("mixed problem needs level 1 or 2".into()))?;
    let grid = ops.grid();
    if load.len() != grid.dim(level) {
        return Err(CongaError::DimensionMismatch { expected: grid.dim(level), found: load.len() });
    }
    let c0 = ops.conforming_basis(prev);
    let c1 = ops.conforming_basis(level);
    let (n0, n1) = (c0.ncols(), c1.ncols());
    let nh = harmonic.map_or(0, |h| h.len());
    let m1 = ops.mass(level);
    let dc = ops.diff(prev)?.matmul(c0)?;
    let m0c = c0.transpose().matmul(ops.mass(prev))?.matmul(c0)?;
    let coupling = c1.transpose().matmul(m1)?.matmul(&dc)?;
    let mc = c1.transpose().matmul(m1)?.matmul(c1)?;
    let mut a11 = mc.scaled(-omega * omega);
    if let Some(next) = level.next() {
        let dc1 = ops.diff(level)?.matmul(c1)?;
        a11 = a11.add_scaled(1.0, &dc1.transpose().matmul(ops.mass(next))?.matmul(&dc1)?)?;
    }
    let mut ch = Mat::zeros(n1, nh);
    if let Some(h) = harmonic {
        for (j, q) in h.fields.iter().enumerate() {
            let v = c1.tmul_vec(&m1.mul_vec(&q.coeffs)?)?;
            for i in 0..n1 {
                ch[(i, j)] = v[i];
            }
        }
    }
    let mut sys = BlockSystem::new(n0 + n1 + nh);
    sys.put(&m0c, 0, 0, -1.0);
    sys.put(&coupling.transpose(), 0, n0, 1.0);
    sys.put(&coupling, n0, 0, 1.0);
    sys.put(&a11, n0, n0, 1.0);
    sys.put_dense(&ch, n0, n0 + n1);
    sys.put_dense(&ch.transpose().to_owned(), n0 + n1, n0);
    let a = sys.build()?;
    let mut rhs = vec![0.0; n0 + n1 + nh];
    rhs[n0..n0 + n1].copy_from_slice(&c1.tmul_vec(load)?);
    let (x, rcond) = guarded_solve(&a, &rhs).map_err(|e| match e {
        CongaError::Singular(_) if omega != 0.0 => CongaError::Resonance { rcond: 0.0 },
        other => other,
    })?;
    Ok(ConformingSolution {
        sigma: BrokenField::new(grid, prev, c0.mul_vec(&x[..n0])?)?,
        u: BrokenField::new(grid, level, c1.mul_vec(&x[n0..n0 + n1])?)?,
        p: x[n0 + n1..].to_vec(),
        rcond,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub cells: usize,
    pub degree: usize,
    pub h: f64,
    pub omega: f64,
    pub alpha: f64,
    pub filtered: bool,
    pub dim: usize,
    pub rcond: f64,
    pub residual: f64,
    pub jump_norm: f64,
    /// `‖u_h − u‖ / ‖u‖` when an exact solution is supplied.
    pub error: Option<ErrorMeasure>,
    /// `‖P u_h − u‖ / ‖u‖` when an exact solution is supplied.
    pub conforming_error: Option<ErrorMeasure>,
    pub wall_time_s: f64,
}

/// `(−ω² M + S) u = rhs` at level 1.
pub fn solve_helmholtz(
    omega: f64,
    f: &SmoothFunction,
    ops: &ComplexOperators,
    alpha: f64,
    filtered: bool,
    exact: Option<&SmoothFunction>,
) -> Result<(BrokenField, SolveReport)> {
    let start = Instant::now();
    let grid = ops.grid();
    let level = Level::One;
    let op = hodge_operator(level, ops, alpha)?;
    let a = op.stiffness.add_scaled(-omega * omega, &op.mass)?;
    let load = load_vector(grid, level, f)?;
    let rhs = if filtered { ops.projection(level).tmul_vec(&load)? } else { load };
    let lu = SparseLu::new(&a).map_err(|_| CongaError::Resonance { rcond: 0.0 })?;
    let rcond = lu.rcond();
    if !(rcond >= RCOND_FLOOR) {
        return Err(CongaError::Resonance { rcond });
    }
    let x = lu.solve(&rhs)?;
    let residual = relative_residual(&a, &x, &rhs)?;
    let u = BrokenField::new(grid, level, x)?;
    let (error, conforming_error) = match exact {
        Some(ue) => {
            let pu = BrokenField::new(grid, level, ops.projection(level).mul_vec(&u.coeffs)?)?;
            (Some(error_measure(grid, &u, ue)?), Some(error_measure(grid, &pu, ue)?))
        }
        None => (None, None),
    };
    let report = SolveReport {
        cells: grid.k(),
        degree: grid.degree(),
        h: grid.h(),
        omega,
        alpha,
        filtered,
        dim: grid.dim(level),
        rcond,
        residual,
        jump_norm: jump_norm(ops, &u)?,
        error,
        conforming_error,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((u, report))
}

/// Conforming Helmholtz reference solve with the same data, returning the
/// relative L² error when an exact solution is supplied.
pub fn solve_helmholtz_conforming(
    omega: f64,
    f: &SmoothFunction,
    ops: &ComplexOperators,
    exact: Option<&SmoothFunction>,
) -> Result<(BrokenField, Option<ErrorMeasure>)> {
    let load = load_vector(ops.grid(), Level::One, f)?;
    let sol = solve_conforming_load(Level::One, &load, ops, None, omega)?;
    let err = exact.map(|ue| error_measure(ops.grid(), &sol.u, ue)).transpose()?;
    Ok((sol.u, err))
}

/// A source with a known solution.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub omega: f64,
    pub source: SmoothFunction,
    pub solution: SmoothFunction,
}

/// `−ω² u + L¹ u = f` on `[0, 2π]²` with
/// `u = (−sin 2x₂ cos³x₁, sin 2x₁ cos³x₂)`.
pub fn helmholtz_case(omega: f64) -> ManufacturedCase {
    let w2 = omega * omega;
    ManufacturedCase {
        name: "helmholtz",
        omega,
        source: SmoothFunction::vector(move |[x, y]| {
            [
                -(2.0 * y).sin() * x.cos() * ((13.0 - w2) * x.cos().powi(2) - 6.0),
                (2.0 * x).sin() * y.cos() * ((13.0 - w2) * y.cos().powi(2) - 6.0),
            ]
        }),
        solution: SmoothFunction::vector(|[x, y]| {
            [-(2.0 * y).sin() * x.cos().powi(3), (2.0 * x).sin() * y.cos().powi(3)]
        }),
    }
}

/// An exact eigenpair of the level-1 Hodge-Laplacian on `[0, 2π]²`.
#[derive(Debug, Clone)]
pub struct ExactMode {
    pub lambda: f64,
    pub n: (usize, usize),
    /// 1 for `(cos sin, 0)`, 2 for `(0, sin cos)`.
    pub component: u8,
}

impl ExactMode {
    pub fn function(&self) -> SmoothFunction {
        let (a, b) = (self.n.0 as f64 / 2.0, self.n.1 as f64 / 2.0);
        if self.component == 1 {
            SmoothFunction::vector(move |[x, y]| [(a * x).cos() * (b * y).sin(), 0.0])
        } else {
            SmoothFunction::vector(move |[x, y]| [0.0, (a * x).sin() * (b * y).cos()])
        }
    }
}

fn enumerate_modes(count: usize, keep: impl Fn(usize, usize, u8) -> bool) -> Vec<ExactMode> {
    let mut reach = 2 * (count as f64).sqrt().ceil() as usize + 2;
    loop {
        let mut modes = Vec::new();
        for n1 in 0..=reach {
            for n2 in 0..=reach {
                for component in [1u8, 2] {
                    if keep(n1, n2, component) {
                        let lambda = 0.25 * (n1 * n1 + n2 * n2) as f64;
                        modes.push(ExactMode { lambda, n: (n1, n2), component });
                    }
                }
            }
        }
        modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.n.cmp(&b.n)).then(a.component.cmp(&b.component)));
        modes.truncate(count);
        // every eigenvalue up to reach²/4 is complete
        if modes.len() == count && modes.last().is_none_or(|m| m.lambda <= 0.25 * (reach * reach) as f64) {
            return modes;
        }
        reach *= 2;
    }
}

/// The `count` smallest eigenpairs of the level-1 operator, with multiplicity.
pub fn exact_eigenpairs(count: usize) -> Vec<ExactMode> {
    // u₁ vanishes when n₂ = 0, u₂ when n₁ = 0
    enumerate_modes(count, |n1, n2, c| if c == 1 { n2 > 0 } else { n1 > 0 })
}

/// The `count` smallest Dirichlet-Laplacian eigenvalues on `[0, 2π]²`.
pub fn exact_dirichlet_eigenvalues(count: usize) -> Vec<f64> {
    enumerate_modes(count, |n1, n2, c| c == 1 && n1 > 0 && n2 > 0).into_iter().map(|m| m.lambda).collect()
}

/// Comparison of one discrete eigenvalue with its assigned exact value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenMatch {
    pub index: usize,
    pub computed: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub spurious: bool,
}

/// Relative distance beyond which a matched eigenvalue counts as spurious.
pub const SPURIOUS_THRESHOLD: f64 = 0.25;

/// Pairs sorted computed and exact lists index by index.
pub fn match_eigenvalues(computed: &[f64], exact: &[f64]) -> Vec<EigenMatch> {
    computed
        .iter()
        .zip(exact)
        .enumerate()
        .map(|(index, (&c, &e))| {
            let abs_error = (c - e).abs();
            EigenMatch { index, computed: c, exact: e, abs_error, spurious: abs_error > SPURIOUS_THRESHOLD * e.abs() }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Skip eigenvalues below the nullspace cut.
    pub skip_nullspace: bool,
    pub tol: f64,
    pub vectors: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { skip_nullspace: false, tol: NULLSPACE_TOL, vectors: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub level: Level,
    pub alpha: f64,
    pub cells: usize,
    pub degree: usize,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<BrokenField>,
    /// Relative residuals `‖S x − λ M x‖₁ / (‖S‖₁ ‖x‖₁)`.
    pub residuals: Vec<f64>,
    pub nullspace: NullspaceCut,
    pub matches: Option<Vec<EigenMatch>>,
    pub wall_time_s: f64,
}

impl EigenReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn with_exact(mut self, exact: &[f64]) -> Self {
        self.matches = Some(match_eigenvalues(&self.eigenvalues, exact));
        self
    }
}

/// Smallest `count` eigenpairs of `S x = λ M x`.
pub fn eig_hodge(
    op: &HodgeOperator,
    ops: &ComplexOperators,
    count: usize,
    options: EigenOptions,
) -> Result<EigenReport> {
    let start = Instant::now();
    let grid = ops.grid();
    let n = grid.dim(op.level);
    let eig = generalized_eigen(&op.stiffness, ops.mass_blocks(op.level), options.vectors)?;
    let nullspace = NullspaceCut::from_eigenvalues(&eig.values, options.tol);
    let first = if options.skip_nullspace { nullspace.nullity } else { 0 };
    if first + count > n {
        return Err(CongaError::Eigen(format!("requested {count} eigenvalues beyond {first} of {n}")));
    }
    let eigenvalues = eig.values[first..first + count].to_vec();
    let mut eigenvectors = Vec::new();
    let mut residuals = Vec::new();
    if let Some(x) = &eig.vectors {
        let snorm = op.stiffness.norm_one();
        for (k, &lambda) in eigenvalues.iter().enumerate() {
            let col: Vec<f64> = x.col(first + k).iter().copied().collect();
            let sx = op.stiffness.mul_vec(&col)?;
            let mx = op.mass.mul_vec(&col)?;
            let r: f64 = sx.iter().zip(&mx).map(|(a, b)| (a - lambda * b).abs()).sum();
            let xnorm: f64 = col.iter().map(|v| v.abs()).sum();
            residuals.push(r / (snorm * xnorm));
            eigenvectors.push(BrokenField::new(grid, op.level, col)?);
        }
    }
    Ok(EigenReport {
        level: op.level,
        alpha: op.alpha,
        cells: grid.k(),
        degree: grid.degree(),
        eigenvalues,
        eigenvectors,
        residuals,
        nullspace,
        matches: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
