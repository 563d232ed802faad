//! Broken finite element spaces: geometric degrees of freedom, the dual
//! tensor-product basis, field evaluation, L² projection and L² errors.

use std::io::{Read, Write};
use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::assembly::ComplexOperators;
use crate::error::{CongaError, Result};
use crate::grid::{Grid, Level};

type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// An analytic field on Ω: scalar for levels 0 and 2, vector for level 1.
#[derive(Clone)]
pub enum SmoothFunction {
    Scalar(ScalarFn),
    Vector(VectorFn),
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmoothFunction::Scalar(_) => f.write_str("SmoothFunction::Scalar"),
            SmoothFunction::Vector(_) => f.write_str("SmoothFunction::Vector"),
        }
    }
}

impl SmoothFunction {
    pub fn scalar(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        SmoothFunction::Scalar(Arc::new(f))
    }

    pub fn vector(f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        SmoothFunction::Vector(Arc::new(f))
    }

    pub fn zero(level: Level) -> Self {
        match level {
            Level::One => Self::vector(|_| [0.0, 0.0]),
            _ => Self::scalar(|_| 0.0),
        }
    }

    fn check_level(&self, level: Level) -> Result<()> {
        let ok = matches!(
            (self, level),
            (SmoothFunction::Vector(_), Level::One) | (SmoothFunction::Scalar(_), Level::Zero | Level::Two)
        );
        if ok {
            Ok(())
        } else {
            let found = if matches!(self, SmoothFunction::Vector(_)) { Level::One } else { Level::Zero };
            Err(CongaError::LevelMismatch { expected: level, found })
        }
    }

    /// Value as a pair; scalars occupy the first component.
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            SmoothFunction::Scalar(f) => [f(x), 0.0],
            SmoothFunction::Vector(f) => f(x),
        }
    }
}

/// Point value of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector([f64; 2]),
}

/// Coefficients of a field in the broken basis of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenField {
    pub level: Level,
    pub coeffs: Vec<f64>,
}

impl BrokenField {
    pub fn new(grid: &Grid, level: Level, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.dim(level) {
            return Err(CongaError::DimensionMismatch { expected: grid.dim(level), found: coeffs.len() });
        }
        Ok(BrokenField { level, coeffs })
    }

    pub fn zeros(grid: &Grid, level: Level) -> Self {
        BrokenField { level, coeffs: vec![0.0; grid.dim(level)] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

fn components(level: Level) -> usize {
    if level == Level::One {
        2
    } else {
        1
    }
}

/// Physical values of the local basis of `level` at reference point `s` of a
/// cell of width `h`, in local enumeration order.
pub fn local_basis(grid: &Grid, level: Level, s: [f64; 2]) -> Vec<[f64; 2]> {
    let b = grid.basis();
    let h = grid.h();
    let p = grid.degree();
    let (phi1, phi2) = (b.phi_all(s[0]), b.phi_all(s[1]));
    let psi1: Vec<f64> = b.psi_all(s[0]).into_iter().map(|v| v / h).collect();
    let psi2: Vec<f64> = b.psi_all(s[1]).into_iter().map(|v| v / h).collect();
    let mut out = Vec::with_capacity(grid.local_dim(level));
    match level {
        Level::Zero => {
            for i1 in 0..=p {
                for i2 in 0..=p {
                    out.push([phi1[i1] * phi2[i2], 0.0]);
                }
            }
        }
        Level::One => {
            for i1 in 0..p {
                for i2 in 0..=p {
                    out.push([psi1[i1] * phi2[i2], 0.0]);
                }
            }
            for i1 in 0..=p {
                for i2 in 0..p {
                    out.push([0.0, phi1[i1] * psi2[i2]]);
                }
            }
        }
        Level::Two => {
            for i1 in 0..p {
                for i2 in 0..p {
                    out.push([psi1[i1] * psi2[i2], 0.0]);
                }
            }
        }
    }
    out
}

// Tensor composite rule on a cell: reference points and physical weights.
pub(crate) fn cell_rule(grid: &Grid) -> Vec<([f64; 2], f64)> {
    let q = grid.basis().quadrature();
    let area = grid.h() * grid.h();
    let mut rule = Vec::with_capacity(q.len() * q.len());
    for (x, wx) in q.nodes.iter().zip(&q.weights) {
        for (y, wy) in q.nodes.iter().zip(&q.weights) {
            rule.push(([*x, *y], wx * wy * area));
        }
    }
    rule
}

/// Geometric degrees of freedom `σ^ℓ_μ(f)`: point values, tangential subedge
/// integrals or subcell integrals.
pub fn geometric_dofs(grid: &Grid, level: Level, f: &SmoothFunction) -> Result<BrokenField> {
    f.check_level(level)?;
    let b = grid.basis();
    let h = grid.h();
    let coeffs = grid
        .multi_indices(level)
        .map(|mi| {
            let (k1, k2) = mi.cell;
            let (i1, i2) = mi.local;
            match level {
                Level::Zero => f.eval([grid.break_point(k1, i1), grid.break_point(k2, i2)])[0],
                Level::One if mi.dir == 1 => {
                    let y = grid.break_point(k2, i2);
                    h * b.dof_rule(i1).integrate(|s| f.eval([grid.to_physical(mi.cell, [s, 0.0])[0], y])[0])
                }
                Level::One => {
                    let x = grid.break_point(k1, i1);
                    h * b.dof_rule(i2).integrate(|t| f.eval([x, grid.to_physical(mi.cell, [0.0, t])[1]])[1])
                }
                Level::Two => {
                    let (rx, ry) = (b.dof_rule(i1), b.dof_rule(i2));
                    h * h * rx.integrate(|s| ry.integrate(|t| f.eval(grid.to_physical(mi.cell, [s, t]))[0]))
                }
            }
        })
        .collect();
    Ok(BrokenField { level, coeffs })
}

/// Value of a broken field at `x`, restricted to `cell`.
pub fn eval_field(grid: &Grid, v: &BrokenField, x: [f64; 2], cell: (usize, usize)) -> Result<FieldValue> {
    let slot = grid
        .cell_slot(cell.0, cell.1)
        .ok_or_else(|| CongaError::InvalidMultiIndex(format!("inactive cell {cell:?}")))?;
    if v.coeffs.len() != grid.dim(v.level) {
        return Err(CongaError::DimensionMismatch { expected: grid.dim(v.level), found: v.coeffs.len() });
    }
    let s =
        grid.to_reference(cell, x).ok_or(CongaError::PointOutsideCell { x: x[0], y: x[1], k1: cell.0, k2: cell.1 })?;
    let n = grid.local_dim(v.level);
    let local = &v.coeffs[slot * n..(slot + 1) * n];
    let mut val = [0.0; 2];
    for (c, phi) in local.iter().zip(local_basis(grid, v.level, s)) {
        val[0] += c * phi[0];
        val[1] += c * phi[1];
    }
    Ok(match v.level {
        Level::One => FieldValue::Vector(val),
        _ => FieldValue::Scalar(val[0]),
    })
}

/// Moments `⟨f, Λ^ℓ_μ⟩` for every multi-index.
pub fn load_vector(grid: &Grid, level: Level, f: &SmoothFunction) -> Result<Vec<f64>> {
    f.check_level(level)?;
    let rule = cell_rule(grid);
    let tables: Vec<Vec<[f64; 2]>> = rule.iter().map(|(s, _)| local_basis(grid, level, *s)).collect();
    let n = grid.local_dim(level);
    let mut out = vec![0.0; grid.dim(level)];
    for (slot, &cell) in grid.cells().iter().enumerate() {
        let block = &mut out[slot * n..(slot + 1) * n];
        for ((s, w), basis) in rule.iter().zip(&tables) {
            let fx = f.eval(grid.to_physical(cell, *s));
            for (b, phi) in block.iter_mut().zip(basis) {
                *b += w * (fx[0] * phi[0] + fx[1] * phi[1]);
            }
        }
    }
    Ok(out)
}

/// L² projection onto the broken space, solved cell by cell.
pub fn l2_project(ops: &ComplexOperators, level: Level, f: &SmoothFunction) -> Result<BrokenField> {
    let grid = ops.grid();
    let rhs = load_vector(grid, level, f)?;
    let coeffs = ops.mass_blocks(level).solve(&rhs)?;
    Ok(BrokenField { level, coeffs })
}

/// `‖v - f‖_{L²(Ω)}` by cell quadrature.
pub fn l2_error(grid: &Grid, v: &BrokenField, f: &SmoothFunction) -> Result<f64> {
    f.check_level(v.level)?;
    if v.coeffs.len() != grid.dim(v.level) {
        return Err(CongaError::DimensionMismatch { expected: grid.dim(v.level), found: v.coeffs.len() });
    }
    let rule = cell_rule(grid);
    let tables: Vec<Vec<[f64; 2]>> = rule.iter().map(|(s, _)| local_basis(grid, v.level, *s)).collect();
    let n = grid.local_dim(v.level);
    let ncomp = components(v.level);
    let mut total = 0.0;
    for (slot, &cell) in grid.cells().iter().enumerate() {
        let local = &v.coeffs[slot * n..(slot + 1) * n];
        let mut cell_sum = 0.0;
        for ((s, w), basis) in rule.iter().zip(&tables) {
            let fx = f.eval(grid.to_physical(cell, *s));
            let mut vx = [0.0; 2];
            for (c, phi) in local.iter().zip(basis) {
                vx[0] += c * phi[0];
                vx[1] += c * phi[1];
            }
            cell_sum += w * (0..ncomp).map(|d| (vx[d] - fx[d]).powi(2)).sum::<f64>();
        }
        total += cell_sum;
    }
    Ok(total.sqrt())
}

/// `‖f‖_{L²(Ω)}` with the same quadrature.
pub fn l2_norm(grid: &Grid, level: Level, f: &SmoothFunction) -> Result<f64> {
    l2_error(grid, &BrokenField::zeros(grid, level), f)
}

/// `‖v - f‖ / ‖f‖`; fails when `‖f‖` vanishes.
pub fn relative_l2_error(grid: &Grid, v: &BrokenField, f: &SmoothFunction) -> Result<f64> {
    let norm = l2_norm(grid, v.level, f)?;
    if norm < RELATIVE_FLOOR {
        return Err(CongaError::ZeroNorm);
    }
    Ok(l2_error(grid, v, f)? / norm)
}

/// Denominators below this switch relative errors to absolute ones.
pub const RELATIVE_FLOOR: f64 = 1e-14;

/// An error value that is relative when the reference norm allows it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeasure {
    pub value: f64,
    /// `false` when the reference norm fell below [`RELATIVE_FLOOR`] and
    /// `value` is the absolute error.
    pub relative: bool,
}

/// Relative error `‖v - f‖ / ‖f‖`, or the absolute error (flagged) when
/// `‖f‖` is below [`RELATIVE_FLOOR`].
pub fn error_measure(grid: &Grid, v: &BrokenField, f: &SmoothFunction) -> Result<ErrorMeasure> {
    let norm = l2_norm(grid, v.level, f)?;
    let err = l2_error(grid, v, f)?;
    Ok(if norm < RELATIVE_FLOOR {
        ErrorMeasure { value: err, relative: false }
    } else {
        ErrorMeasure { value: err / norm, relative: true }
    })
}

/// Compatibility header stored with serialized fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub level: Level,
    #[serde(rename = "K")]
    pub cells: usize,
    pub p: usize,
    pub a: f64,
    pub mask_hash: String,
}

impl FieldHeader {
    pub fn for_grid(grid: &Grid, level: Level) -> Self {
        FieldHeader { level, cells: grid.k(), p: grid.degree(), a: grid.side(), mask_hash: grid.spec().content_hash() }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let expected = FieldHeader::for_grid(grid, self.level);
        if *self != expected {
            return Err(CongaError::IncompatibleField(format!("{self:?} vs grid {expected:?}")));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FieldDocument {
    header: FieldHeader,
    coeffs: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 8] = b"CONGAFLD";

impl BrokenField {
    pub fn to_json(&self, grid: &Grid) -> Result<String> {
        let doc = FieldDocument { header: FieldHeader::for_grid(grid, self.level), coeffs: self.coeffs.clone() };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(grid: &Grid, text: &str) -> Result<Self> {
        let doc: FieldDocument = serde_json::from_str(text)?;
        doc.header.check(grid)?;
        BrokenField::new(grid, doc.header.level, doc.coeffs)
    }

    /// Binary layout: magic, u32 header length, JSON header, u64 count, f64 values (little endian).
    pub fn write_binary<W: Write>(&self, grid: &Grid, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&FieldHeader::for_grid(grid, self.level))?;
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        out.write_all(&(self.coeffs.len() as u64).to_le_bytes())?;
        for c in &self.coeffs {
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(grid: &Grid, mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(CongaError::IncompatibleField("bad magic".into()));
        }
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut header)?;
        let header: FieldHeader = serde_json::from_slice(&header)?;
        header.check(grid)?;
        let mut count = [0u8; 8];
        input.read_exact(&mut count)?;
        let count = u64::from_le_bytes(count) as usize;
        let mut coeffs = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            input.read_exact(&mut buf)?;
            coeffs.push(f64::from_le_bytes(buf));
        }
        BrokenField::new(grid, header.level, coeffs)
    }
}

/// Per-cell Cholesky factors of a block-diagonal mass matrix whose blocks are
/// all equal (uniform Cartesian cells).
#[derive(Debug, Clone)]
pub struct MassBlocks {
    block: Mat<f64>,
    chol: faer::linalg::solvers::Llt<f64>,
    count: usize,
}

impl MassBlocks {
    pub fn new(block: Mat<f64>, count: usize) -> Result<Self> {
        let chol = block.llt(faer::Side::Lower).map_err(|e| CongaError::NotSpd(format!("mass block: {e:?}")))?;
        Ok(MassBlocks { block, chol, count })
    }

    pub fn block(&self) -> &Mat<f64> {
        &self.block
    }

    pub fn block_size(&self) -> usize {
        self.block.nrows()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Lower Cholesky factor of one block.
    pub fn factor(&self) -> Mat<f64> {
        self.chol.L().to_owned()
    }

    /// `M⁻¹ b`, block by block.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.block_size();
        if rhs.len() != n * self.count {
            return Err(CongaError::DimensionMismatch { expected: n * self.count, found: rhs.len() });
        }
        let b = Mat::<f64>::from_fn(n, self.count, |i, c| rhs[c * n + i]);
        let x = self.chol.solve(&b);
        Ok((0..self.count).flat_map(|c| (0..n).map(move |i| (c, i))).map(|(c, i)| x[(i, c)]).collect())
    }

    /// Inverse of one block.
    pub fn block_inverse(&self) -> Mat<f64> {
        self.chol.solve(Mat::<f64>::identity(self.block_size(), self.block_size()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, MultiIndex};

    fn grid(k: usize, p: usize) -> Grid {
        Grid::new(GridSpec::square(k, p)).unwrap()
    }

    #[test]
    fn dofs_of_constants() {
        let g = grid(2, 3);
        let one = geometric_dofs(&g, Level::Zero, &SmoothFunction::scalar(|_| 1.0)).unwrap();
        assert!(one.coeffs.iter().all(|&c| (c - 1.0).abs() < 1e-15));

        let ex = geometric_dofs(&g, Level::One, &SmoothFunction::vector(|_| [1.0, 0.0])).unwrap();
        for (n, mi) in g.multi_indices(Level::One).enumerate() {
            let expected = if mi.dir == 1 {
                g.break_point(mi.cell.0, mi.local.0 + 1) - g.break_point(mi.cell.0, mi.local.0)
            } else {
                0.0
            };
            assert!((ex.coeffs[n] - expected).abs() < 1e-14);
        }

        let area = geometric_dofs(&g, Level::Two, &SmoothFunction::scalar(|_| 1.0)).unwrap();
        for (n, mi) in g.multi_indices(Level::Two).enumerate() {
            let (k1, k2) = mi.cell;
            let (i1, i2) = mi.local;
            let a = (g.break_point(k1, i1 + 1) - g.break_point(k1, i1))
                * (g.break_point(k2, i2 + 1) - g.break_point(k2, i2));
            assert!((area.coeffs[n] - a).abs() < 1e-14);
        }
    }

    #[test]
    fn level_mismatch_rejected() {
        let g = grid(1, 1);
        assert!(geometric_dofs(&g, Level::One, &SmoothFunction::scalar(|_| 1.0)).is_err());
        assert!(geometric_dofs(&g, Level::Two, &SmoothFunction::vector(|_| [1.0, 0.0])).is_err());
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = grid(2, 3);
        let poly = |x: [f64; 2]| 1.0 + x[0] - 0.3 * x[0].powi(3) * x[1] + 0.2 * x[1].powi(3) * x[0].powi(2);
        let v = geometric_dofs(&g, Level::Zero, &SmoothFunction::scalar(poly)).unwrap();
        for (k, s) in [((1, 1), [0.1, 0.7]), ((2, 1), [0.9, 0.33]), ((2, 2), [0.5, 0.5])] {
            let x = g.to_physical(k, s);
            match eval_field(&g, &v, x, k).unwrap() {
                FieldValue::Scalar(val) => assert!((val - poly(x)).abs() < 1e-12 * poly(x).abs().max(1.0)),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn unit_coefficient_duality() {
        let g = grid(2, 2);
        let mi = MultiIndex { level: Level::Zero, cell: (2, 1), dir: 0, local: (1, 2) };
        let idx = g.index_of(&mi).unwrap();
        let mut v = BrokenField::zeros(&g, Level::Zero);
        v.coeffs[idx] = 1.0;
        for i1 in 0..=2 {
            for i2 in 0..=2 {
                let x = [g.break_point(2, i1), g.break_point(1, i2)];
                let FieldValue::Scalar(val) = eval_field(&g, &v, x, (2, 1)).unwrap() else { unreachable!() };
                let expected = if (i1, i2) == (1, 2) { 1.0 } else { 0.0 };
                assert!((val - expected).abs() < 1e-14);
            }
        }
        assert!(eval_field(&g, &v, [10.0, 10.0], (1, 1)).is_err());
    }

    #[test]
    fn dof_basis_duality() {
        // σ^ℓ_μ(Λ^ℓ_ν) = δ_{μν}; evaluate σ on each basis function through a
        // SmoothFunction wrapper over eval_field on its owning cell.
        for p in 1..=3 {
            let g = Arc::new(grid(2, p));
            for level in Level::ALL {
                let n = g.dim(level);
                for nu in 0..n {
                    let mut v = BrokenField::zeros(&g, level);
                    v.coeffs[nu] = 1.0;
                    let owner = g.multi_index(level, nu).unwrap().cell;
                    let (gg, vv) = (g.clone(), v.clone());
                    // Evaluate only on the owning cell; zero elsewhere (broken support).
                    let field = move |x: [f64; 2]| -> [f64; 2] {
                        let h = gg.h();
                        let inside = |a: f64, k: usize| a >= (k - 1) as f64 * h - 1e-12 && a <= k as f64 * h + 1e-12;
                        if !(inside(x[0], owner.0) && inside(x[1], owner.1)) {
                            return [0.0, 0.0];
                        }
                        match eval_field(&gg, &vv, x, owner).unwrap() {
                            FieldValue::Scalar(s) => [s, 0.0],
                            FieldValue::Vector(w) => w,
                        }
                    };
                    let f = match level {
                        Level::One => SmoothFunction::vector(field),
                        _ => SmoothFunction::scalar(move |x| field(x)[0]),
                    };
                    let dofs = geometric_dofs(&g, level, &f).unwrap();
                    for (mu, d) in dofs.coeffs.iter().enumerate() {
                        let same_cell = g.multi_index(level, mu).unwrap().cell == owner;
                        let expected = if mu == nu { 1.0 } else { 0.0 };
                        if same_cell {
                            assert!((d - expected).abs() < 1e-12, "p={p} {level:?} mu={mu} nu={nu} d={d}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn serialization_round_trip_and_compat() {
        let g = grid(2, 2);
        let v = geometric_dofs(&g, Level::One, &SmoothFunction::vector(|x| [x[0].sin(), x[1]])).unwrap();
        let json = v.to_json(&g).unwrap();
        assert_eq!(BrokenField::from_json(&g, &json).unwrap(), v);
        let mut buf = Vec::new();
        v.write_binary(&g, &mut buf).unwrap();
        assert_eq!(BrokenField::read_binary(&g, buf.as_slice()).unwrap(), v);
        let other = grid(3, 2);
        assert!(matches!(BrokenField::from_json(&other, &json), Err(CongaError::IncompatibleField(_))));
    }

    #[test]
    fn error_of_zero_field() {
        let g = grid(4, 2);
        let f = SmoothFunction::scalar(|x| x[0].sin() * x[1].sin());
        let norm = l2_error(&g, &BrokenField::zeros(&g, Level::Zero), &f).unwrap();
        // ∫∫ sin² x sin² y over [0, 2π]² = π²
        assert!((norm - std::f64::consts::PI).abs() < 1e-6);
        let z = SmoothFunction::zero(Level::Zero);
        assert!(matches!(relative_l2_error(&g, &BrokenField::zeros(&g, Level::Zero), &z), Err(CongaError::ZeroNorm)));
        let m = error_measure(&g, &BrokenField::zeros(&g, Level::Zero), &z).unwrap();
        assert!(!m.relative && m.value == 0.0);
    }
}
