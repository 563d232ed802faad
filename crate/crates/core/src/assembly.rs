//! Differential, mass and conforming-projection matrices.

use faer::Mat;

use crate::error::{CongaError, Result};
use crate::femspace::MassBlocks;
use crate::grid::{Grid, Level};
use crate::sparse::{Space, SparseOperator};

/// `A ⊗ B` with row index `i_a * rows(B) + i_b`.
pub(crate) fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

fn local_diff(grid: &Grid, level: Level, flip_vertical: bool) -> Vec<(usize, usize, f64)> {
    let p = grid.degree();
    let off = |lvl, dir, i| grid.local_offset(lvl, dir, i);
    let mut t = Vec::new();
    match level {
        Level::Zero => {
            for i1 in 0..p {
                for i2 in 0..=p {
                    let row = off(Level::One, 1, (i1, i2));
                    t.push((row, off(Level::Zero, 0, (i1 + 1, i2)), 1.0));
                    t.push((row, off(Level::Zero, 0, (i1, i2)), -1.0));
                }
            }
            for i1 in 0..=p {
                for i2 in 0..p {
                    let row = off(Level::One, 2, (i1, i2));
                    t.push((row, off(Level::Zero, 0, (i1, i2 + 1)), 1.0));
                    t.push((row, off(Level::Zero, 0, (i1, i2)), -1.0));
                }
            }
        }
        Level::One => {
            // Circulation of v around subcell c_i for curl v = ∂₁v₂ − ∂₂v₁.
            let s = if flip_vertical { -1.0 } else { 1.0 };
            for i1 in 0..p {
                for i2 in 0..p {
                    let row = off(Level::Two, 0, (i1, i2));
                    t.push((row, off(Level::One, 2, (i1 + 1, i2)), s));
                    t.push((row, off(Level::One, 2, (i1, i2)), -s));
                    t.push((row, off(Level::One, 1, (i1, i2 + 1)), -1.0));
                    t.push((row, off(Level::One, 1, (i1, i2)), 1.0));
                }
            }
        }
        Level::Two => {}
    }
    t
}

fn place_blocks(grid: &Grid, target: Level, source: Level, local: &[(usize, usize, f64)]) -> Result<SparseOperator> {
    let (nr, nc) = (grid.local_dim(target), grid.local_dim(source));
    let triplets =
        (0..grid.n_cells()).flat_map(|c| local.iter().map(move |&(i, j, v)| (c * nr + i, c * nc + j, v))).collect();
    SparseOperator::from_triplets(
        Space::Broken(target),
        grid.dim(target),
        Space::Broken(source),
        grid.dim(source),
        triplets,
    )
}

/// Incidence matrix `D^ℓ` of the local differential (`ℓ ∈ {0, 1}`).
pub fn assemble_diff(level: Level, grid: &Grid) -> Result<SparseOperator> {
    let target = level.next().ok_or_else(|| CongaError::InvalidMultiIndex("no differential from level 2".into()))?;
    place_blocks(grid, target, level, &local_diff(grid, level, false))
}

/// `D¹` with the sign of every vertical-edge contribution flipped. Used only as
/// a negative control for the complex and commuting-diagram checks.
pub fn assemble_curl_flipped(grid: &Grid) -> Result<SparseOperator> {
    place_blocks(grid, Level::Two, Level::One, &local_diff(grid, Level::One, true))
}

/// Mass block of a single cell.
pub fn local_mass(grid: &Grid, level: Level) -> Mat<f64> {
    let b = grid.basis();
    let h = grid.h();
    let (n, e) = (b.node_mass(), b.edge_mass());
    match level {
        Level::Zero => kron(n, n) * faer::Scale(h * h),
        Level::One => {
            let first = kron(e, n);
            let second = kron(n, e);
            let (a, c) = (first.nrows(), second.nrows());
            Mat::from_fn(a + c, a + c, |i, j| match (i < a, j < a) {
                (true, true) => first[(i, j)],
                (false, false) => second[(i - a, j - a)],
                _ => 0.0,
            })
        }
        Level::Two => kron(e, e) * faer::Scale(1.0 / (h * h)),
    }
}

/// Block-diagonal mass matrix `M^ℓ`.
pub fn assemble_mass(level: Level, grid: &Grid) -> SparseOperator {
    SparseOperator::block_diagonal(Space::Broken(level), grid.n_cells(), &local_mass(grid, level))
}

/// Averaging projection onto the conforming subspace. With `homogeneous_bc`,
/// rows and columns of boundary elements are zeroed. `P² = P`.
pub fn assemble_projection(level: Level, grid: &Grid, homogeneous_bc: bool) -> SparseOperator {
    let n = grid.dim(level);
    if level == Level::Two {
        return SparseOperator::identity(Space::Broken(level), n);
    }
    let elem_of = grid.element_of(level);
    let mult = grid.element_multiplicities(level);
    let boundary = grid.element_on_boundary(level);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); mult.len()];
    for (mu, &e) in elem_of.iter().enumerate() {
        members[e].push(mu);
    }
    let mut triplets = Vec::new();
    for (e, group) in members.iter().enumerate() {
        if homogeneous_bc && boundary[e] {
            continue;
        }
        let w = 1.0 / mult[e] as f64;
        for &mu in group {
            for &nu in group {
                triplets.push((mu, nu, w));
            }
        }
    }
    SparseOperator::from_triplets(Space::Broken(level), n, Space::Broken(level), n, triplets)
        .expect("projection indices are in range")
}

/// Stitched conforming basis: column `g` sums the broken basis functions of
/// interior element `g`. Maps conforming coefficients to broken ones.
pub fn conforming_basis(level: Level, grid: &Grid, homogeneous_bc: bool) -> SparseOperator {
    let boundary = grid.element_on_boundary(level);
    let mut column = vec![usize::MAX; boundary.len()];
    let mut count = 0;
    for (e, &b) in boundary.iter().enumerate() {
        if !(homogeneous_bc && b) {
            column[e] = count;
            count += 1;
        }
    }
    let triplets = grid
        .element_of(level)
        .iter()
        .enumerate()
        .filter(|&(_, &e)| column[e] != usize::MAX)
        .map(|(mu, &e)| (mu, column[e], 1.0))
        .collect();
    SparseOperator::from_triplets(Space::Broken(level), grid.dim(level), Space::Conforming(level), count, triplets)
        .expect("conforming indices are in range")
}

/// Dimension of `V^{ℓ,c}_h` with homogeneous boundary conditions.
pub fn conforming_dimension(level: Level, grid: &Grid) -> usize {
    grid.interior_element_count(level)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    pub homogeneous_bc: bool,
    /// Negative control: assemble `D¹` with a flipped sign block.
    pub flip_curl_sign: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { homogeneous_bc: true, flip_curl_sign: false }
    }
}

/// The matrices of the discrete complex for one grid and degree.
#[derive(Debug, Clone)]
pub struct ComplexOperators {
    grid: Grid,
    options: AssemblyOptions,
    diff: [SparseOperator; 2],
    mass: [SparseOperator; 3],
    proj: [SparseOperator; 3],
    conf: [SparseOperator; 3],
    blocks: [MassBlocks; 3],
}

impl ComplexOperators {
    pub fn new(grid: Grid) -> Result<Self> {
        Self::with_options(grid, AssemblyOptions::default())
    }

    pub fn with_options(grid: Grid, options: AssemblyOptions) -> Result<Self> {
        let d0 = assemble_diff(Level::Zero, &grid)?;
        let d1 = if options.flip_curl_sign { assemble_curl_flipped(&grid)? } else { assemble_diff(Level::One, &grid)? };
        let mass = Level::ALL.map(|l| assemble_mass(l, &grid));
        let proj = Level::ALL.map(|l| assemble_projection(l, &grid, options.homogeneous_bc));
        let conf = Level::ALL.map(|l| conforming_basis(l, &grid, options.homogeneous_bc));
        let [b0, b1, b2] = Level::ALL.map(|l| MassBlocks::new(local_mass(&grid, l), grid.n_cells()));
        Ok(ComplexOperators { grid, options, diff: [d0, d1], mass, proj, conf, blocks: [b0?, b1?, b2?] })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn options(&self) -> AssemblyOptions {
        self.options
    }

    /// `D^ℓ` for `ℓ ∈ {0, 1}`.
    pub fn diff(&self, level: Level) -> Result<&SparseOperator> {
        self.diff.get(level.index()).ok_or_else(|| CongaError::InvalidMultiIndex("no differential from level 2".into()))
    }

    pub fn mass(&self, level: Level) -> &SparseOperator {
        &self.mass[level.index()]
    }

    pub fn projection(&self, level: Level) -> &SparseOperator {
        &self.proj[level.index()]
    }

    pub fn conforming_basis(&self, level: Level) -> &SparseOperator {
        &self.conf[level.index()]
    }

    pub fn mass_blocks(&self, level: Level) -> &MassBlocks {
        &self.blocks[level.index()]
    }

    /// Block-diagonal `(M^ℓ)⁻¹` from the per-cell Cholesky factors.
    pub fn mass_inverse(&self, level: Level) -> SparseOperator {
        let blocks = self.mass_blocks(level);
        SparseOperator::block_diagonal(Space::Broken(level), blocks.count(), &blocks.block_inverse())
    }

    /// Strong penalization `10 (p + 1)² / h`.
    pub fn strong_penalty(&self) -> f64 {
        let p = self.grid.degree() as f64;
        10.0 * (p + 1.0).powi(2) / self.grid.h()
    }

    /// `⟨u, v⟩` in the L² product of level `ℓ`.
    pub fn inner(&self, level: Level, u: &[f64], v: &[f64]) -> Result<f64> {
        self.mass(level).form(u, v)
    }

    pub fn norm(&self, level: Level, u: &[f64]) -> Result<f64> {
        Ok(self.inner(level, u, u)?.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn ops(k: usize, p: usize) -> ComplexOperators {
        ComplexOperators::new(Grid::new(GridSpec::square(k, p)).unwrap()).unwrap()
    }

    #[test]
    fn unit_quad_incidence() {
        let g = Grid::new(GridSpec::square(1, 1)).unwrap();
        let d0 = assemble_diff(Level::Zero, &g).unwrap();
        assert_eq!((d0.nrows(), d0.ncols()), (4, 4));
        for i in 0..4 {
            let mut vals: Vec<f64> = d0.row(i).map(|(_, v)| v).collect();
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, vec![-1.0, 1.0]);
        }
        assert!(assemble_diff(Level::Two, &g).is_err());
    }

    #[test]
    fn complex_property_exact() {
        for k in 1..=4 {
            for p in 1..=4 {
                let o = ops(k, p);
                let dd = o.diff(Level::One).unwrap().matmul(o.diff(Level::Zero).unwrap()).unwrap();
                assert_eq!(dd.nnz(), 0, "K={k} p={p}");
                for d in [o.diff(Level::Zero).unwrap(), o.diff(Level::One).unwrap()] {
                    assert!(d.triplets().all(|(_, _, v)| v == 1.0 || v == -1.0));
                }
            }
        }
    }

    #[test]
    fn flipped_curl_breaks_complex() {
        let g = Grid::new(GridSpec::square(2, 2)).unwrap();
        let d0 = assemble_diff(Level::Zero, &g).unwrap();
        let bad = assemble_curl_flipped(&g).unwrap();
        assert!(bad.matmul(&d0).unwrap().nnz() > 0);
    }

    #[test]
    fn linear_mass_on_unit_cell() {
        let g = Grid::new(GridSpec::square(1, 1).with_side(1.0)).unwrap();
        let m0 = assemble_mass(Level::Zero, &g);
        let n = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        for i in 0..4 {
            for j in 0..4 {
                let expected = n[i / 2][j / 2] * n[i % 2][j % 2];
                assert!((m0.get(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_of_constant_is_area() {
        for spec in [GridSpec::square(3, 2), GridSpec::annulus(3, 3)] {
            let g = Grid::new(spec).unwrap();
            let m0 = assemble_mass(Level::Zero, &g);
            let one = vec![1.0; g.dim(Level::Zero)];
            let area = m0.form(&one, &one).unwrap();
            assert!((area - g.active_area()).abs() < 1e-12 * g.active_area());
        }
    }

    #[test]
    fn projection_entries() {
        let p = 2;
        let g = Grid::new(GridSpec::square(2, p)).unwrap();
        let p0 = assemble_projection(Level::Zero, &g, true);
        let p1 = assemble_projection(Level::One, &g, true);
        // cell-interior node: unit column
        let inner = crate::grid::MultiIndex { level: Level::Zero, cell: (1, 1), dir: 0, local: (1, 1) };
        let i = g.index_of(&inner).unwrap();
        let col: Vec<(usize, f64)> = p0.triplets().filter(|t| t.1 == i).map(|t| (t.0, t.2)).collect();
        assert_eq!(col, vec![(i, 1.0)]);
        // shared tangential edge: entries 1/2
        let a = crate::grid::MultiIndex { level: Level::One, cell: (1, 1), dir: 2, local: (p, 0) };
        let b = crate::grid::MultiIndex { level: Level::One, cell: (2, 1), dir: 2, local: (0, 0) };
        let (ia, ib) = (g.index_of(&a).unwrap(), g.index_of(&b).unwrap());
        for (r, c) in [(ia, ia), (ia, ib), (ib, ia), (ib, ib)] {
            assert_eq!(p1.get(r, c), 0.5);
        }
        // boundary node: zero column
        let corner = crate::grid::MultiIndex { level: Level::Zero, cell: (1, 1), dir: 0, local: (0, 0) };
        let ic = g.index_of(&corner).unwrap();
        assert!(p0.triplets().all(|t| t.1 != ic && t.0 != ic));
        let p2 = assemble_projection(Level::Two, &g, true);
        assert_eq!(p2, SparseOperator::identity(Space::Broken(Level::Two), g.dim(Level::Two)));
    }

    #[test]
    fn projection_is_idempotent_and_factorizes() {
        for spec in [GridSpec::square(3, 2), GridSpec::annulus(3, 2)] {
            let g = Grid::new(spec).unwrap();
            for level in [Level::Zero, Level::One] {
                let p = assemble_projection(level, &g, true);
                let pp = p.matmul(&p).unwrap();
                assert!(pp.add_scaled(-1.0, &p).unwrap().max_abs() <= 1e-14);
                // P = C diag(1/mult) Cᵀ
                let c = conforming_basis(level, &g, true);
                assert_eq!(c.ncols(), conforming_dimension(level, &g));
                let ctc = c.transpose().matmul(&c).unwrap();
                for (i, j, v) in ctc.triplets() {
                    assert_eq!(i, j);
                    assert!(v >= 1.0);
                }
                let pc = p.matmul(&c).unwrap();
                assert!(pc.add_scaled(-1.0, &c).unwrap().max_abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn local_mass_is_spd() {
        let o = ops(2, 3);
        for level in Level::ALL {
            assert!(o.mass(level).symmetry_defect() <= 1e-15);
            assert!(o.mass(level).to_dense().llt(faer::Side::Lower).is_ok());
        }
    }
}
