//! Cartesian cell grid with per-cell Gauss-Lobatto subgrids.
//!
//! Multi-indices are enumerated cell by cell over the active cells, in
//! lexicographic order `(k1, k2[, d], i1, i2)`. Geometric elements are keyed by
//! exact global lattice coordinates so that coincident nodes and edges of
//! neighbouring cells compare equal without any floating-point test.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis1d::{gauss_lobatto, Basis1D};
use crate::error::{CongaError, Result};

/// Form degree of a space in the 2D grad-curl sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Zero,
    One,
    Two,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Zero, Level::One, Level::Two];

    pub fn index(self) -> usize {
        match self {
            Level::Zero => 0,
            Level::One => 1,
            Level::Two => 2,
        }
    }

    pub fn from_index(l: usize) -> Option<Level> {
        Level::ALL.get(l).copied()
    }

    pub fn next(self) -> Option<Level> {
        Level::from_index(self.index() + 1)
    }

    pub fn prev(self) -> Option<Level> {
        self.index().checked_sub(1).and_then(Level::from_index)
    }
}

fn default_side() -> f64 {
    2.0 * std::f64::consts::PI
}

/// Grid parameters, deserializable from `{"K": .., "p": .., "a": .., "mask": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "K")]
    pub cells: usize,
    #[serde(rename = "p")]
    pub degree: usize,
    #[serde(rename = "a", default = "default_side")]
    pub side: f64,
    /// Active cells `(k1, k2)`, 1-based. `None` activates every cell.
    #[serde(default)]
    pub mask: Option<Vec<[usize; 2]>>,
}

impl GridSpec {
    pub fn square(cells: usize, degree: usize) -> Self {
        GridSpec { cells, degree, side: default_side(), mask: None }
    }

    /// The square with its central block of cells removed. Requires `K >= 3`.
    pub fn annulus(cells: usize, degree: usize) -> Self {
        let lo = cells / 3;
        let hi = cells - cells / 3;
        let mask = (1..=cells)
            .flat_map(|k1| (1..=cells).map(move |k2| [k1, k2]))
            .filter(|&[k1, k2]| !(k1 > lo && k1 <= hi && k2 > lo && k2 <= hi))
            .collect();
        GridSpec { cells, degree, side: default_side(), mask: Some(mask) }
    }

    pub fn with_side(mut self, side: f64) -> Self {
        self.side = side;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Hex SHA-256 of the canonical JSON form (mask sorted and deduplicated).
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        if let Some(mask) = canonical.mask.as_mut() {
            mask.sort_unstable();
            mask.dedup();
        }
        let json = serde_json::to_string(&canonical).expect("grid spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Index of a degree of freedom: level, 1-based cell, direction (level 1 only,
/// `1` or `2`, else `0`) and local subgrid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub level: Level,
    pub cell: (usize, usize),
    pub dir: u8,
    pub local: (usize, usize),
}

/// Canonical identity of a subgrid node, edge or subcell.
///
/// `origin` is the global lattice index of the element's lower-left node,
/// `dir` the edge direction (`0` for nodes and subcells).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GeomElement {
    pub level: Level,
    pub dir: u8,
    pub origin: (usize, usize),
}

#[derive(Debug, Clone)]
struct LevelTable {
    geom: Vec<GeomElement>,
    /// Position of each multi-index's element in `elements`.
    elem_of: Vec<usize>,
    elements: Vec<GeomElement>,
    multiplicity: Vec<usize>,
    on_boundary: Vec<bool>,
    lookup: BTreeMap<GeomElement, usize>,
}

#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    active: Vec<bool>,
    cells: Vec<(usize, usize)>,
    slot: Vec<Option<usize>>,
    ref_nodes: Vec<f64>,
    basis: Basis1D,
    levels: [LevelTable; 3],
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let k = spec.cells;
        let p = spec.degree;
        if k == 0 {
            return Err(CongaError::InvalidGrid("K must be positive".into()));
        }
        if p == 0 {
            return Err(CongaError::InvalidDegree);
        }
        if !(spec.side.is_finite() && spec.side > 0.0) {
            return Err(CongaError::InvalidGrid(format!("side length {} must be positive", spec.side)));
        }

        let mut active = vec![spec.mask.is_none(); k * k];
        if let Some(mask) = &spec.mask {
            for &[k1, k2] in mask {
                if k1 == 0 || k2 == 0 || k1 > k || k2 > k {
                    return Err(CongaError::InvalidGrid(format!("mask cell ({k1}, {k2}) outside 1..={k}")));
                }
                active[(k1 - 1) * k + (k2 - 1)] = true;
            }
        }
        let cells: Vec<(usize, usize)> = (1..=k)
            .flat_map(|k1| (1..=k).map(move |k2| (k1, k2)))
            .filter(|&(k1, k2)| active[(k1 - 1) * k + (k2 - 1)])
            .collect();
        if cells.is_empty() {
            return Err(CongaError::InvalidGrid("mask selects no cell".into()));
        }
        check_connected(k, &active, &cells)?;

        let mut slot = vec![None; k * k];
        for (s, &(k1, k2)) in cells.iter().enumerate() {
            slot[(k1 - 1) * k + (k2 - 1)] = Some(s);
        }

        let ref_nodes = gauss_lobatto(p)?;
        let basis = Basis1D::new(p)?;
        let mut grid = Grid {
            h: spec.side / k as f64,
            spec,
            active,
            cells,
            slot,
            ref_nodes,
            basis,
            levels: [empty_table(), empty_table(), empty_table()],
        };
        for level in Level::ALL {
            grid.levels[level.index()] = grid.build_table(level);
        }
        Ok(grid)
    }

    fn build_table(&self, level: Level) -> LevelTable {
        let geom: Vec<GeomElement> = self.multi_indices(level).map(|mi| self.geom_of(&mi)).collect();
        let mut lookup = BTreeMap::new();
        let mut elements = Vec::new();
        let mut multiplicity = Vec::new();
        let mut elem_of = Vec::with_capacity(geom.len());
        for g in &geom {
            let e = *lookup.entry(*g).or_insert_with(|| {
                elements.push(*g);
                multiplicity.push(0);
                elements.len() - 1
            });
            multiplicity[e] += 1;
            elem_of.push(e);
        }
        let on_boundary = elements.iter().map(|g| self.touches_exterior(g)).collect();
        LevelTable { geom, elem_of, elements, multiplicity, on_boundary, lookup }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Cells per direction.
    pub fn k(&self) -> usize {
        self.spec.cells
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn side(&self) -> f64 {
        self.spec.side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }

    /// Active cells in enumeration order.
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn is_active(&self, k1: usize, k2: usize) -> bool {
        k1 >= 1 && k2 >= 1 && k1 <= self.k() && k2 <= self.k() && self.active[(k1 - 1) * self.k() + (k2 - 1)]
    }

    /// Position of an active cell in the enumeration.
    pub fn cell_slot(&self, k1: usize, k2: usize) -> Option<usize> {
        if k1 == 0 || k2 == 0 || k1 > self.k() || k2 > self.k() {
            return None;
        }
        self.slot[(k1 - 1) * self.k() + (k2 - 1)]
    }

    /// Gauss-Lobatto break point `ζ_{k,i}` of interval `k` (1-based).
    pub fn break_point(&self, k: usize, i: usize) -> f64 {
        self.h * ((k - 1) as f64 + self.ref_nodes[i])
    }

    /// Number of degrees of freedom per cell.
    pub fn local_dim(&self, level: Level) -> usize {
        let p = self.degree();
        match level {
            Level::Zero => (p + 1) * (p + 1),
            Level::One => 2 * p * (p + 1),
            Level::Two => p * p,
        }
    }

    pub fn dim(&self, level: Level) -> usize {
        self.n_cells() * self.local_dim(level)
    }

    /// Local offset of `(dir, i)` within its cell block.
    pub fn local_offset(&self, level: Level, dir: u8, local: (usize, usize)) -> usize {
        let p = self.degree();
        let (i1, i2) = local;
        match (level, dir) {
            (Level::Zero, _) => i1 * (p + 1) + i2,
            (Level::One, 1) => i1 * (p + 1) + i2,
            (Level::One, _) => p * (p + 1) + i1 * p + i2,
            (Level::Two, _) => i1 * p + i2,
        }
    }

    fn local_index_valid(&self, mi: &MultiIndex) -> bool {
        let p = self.degree();
        let (i1, i2) = mi.local;
        match mi.level {
            Level::Zero => mi.dir == 0 && i1 <= p && i2 <= p,
            Level::One => match mi.dir {
                1 => i1 < p && i2 <= p,
                2 => i1 <= p && i2 < p,
                _ => false,
            },
            Level::Two => mi.dir == 0 && i1 < p && i2 < p,
        }
    }

    /// Global enumeration position of a multi-index.
    pub fn index_of(&self, mi: &MultiIndex) -> Result<usize> {
        let slot = self
            .cell_slot(mi.cell.0, mi.cell.1)
            .ok_or_else(|| CongaError::InvalidMultiIndex(format!("inactive cell {:?}", mi.cell)))?;
        if !self.local_index_valid(mi) {
            return Err(CongaError::InvalidMultiIndex(format!("{mi:?}")));
        }
        Ok(slot * self.local_dim(mi.level) + self.local_offset(mi.level, mi.dir, mi.local))
    }

    /// Multi-index at enumeration position `index`.
    pub fn multi_index(&self, level: Level, index: usize) -> Result<MultiIndex> {
        let n = self.local_dim(level);
        if index >= self.dim(level) {
            return Err(CongaError::IndexOutOfRange { index, limit: self.dim(level) });
        }
        let cell = self.cells[index / n];
        let r = index % n;
        let p = self.degree();
        let (dir, local) = match level {
            Level::Zero => (0, (r / (p + 1), r % (p + 1))),
            Level::One if r < p * (p + 1) => (1, (r / (p + 1), r % (p + 1))),
            Level::One => {
                let r = r - p * (p + 1);
                (2, (r / p, r % p))
            }
            Level::Two => (0, (r / p, r % p)),
        };
        Ok(MultiIndex { level, cell, dir, local })
    }

    /// All multi-indices of a level in enumeration order.
    pub fn multi_indices(&self, level: Level) -> impl Iterator<Item = MultiIndex> + '_ {
        let p = self.degree();
        self.cells.iter().flat_map(move |&cell| {
            let local: Vec<(u8, (usize, usize))> = match level {
                Level::Zero => grid_range(p + 1, p + 1).map(|i| (0, i)).collect(),
                Level::One => {
                    grid_range(p, p + 1).map(|i| (1, i)).chain(grid_range(p + 1, p).map(|i| (2, i))).collect()
                }
                Level::Two => grid_range(p, p).map(|i| (0, i)).collect(),
            };
            local.into_iter().map(move |(dir, local)| MultiIndex { level, cell, dir, local })
        })
    }

    fn geom_of(&self, mi: &MultiIndex) -> GeomElement {
        let p = self.degree();
        let origin = ((mi.cell.0 - 1) * p + mi.local.0, (mi.cell.1 - 1) * p + mi.local.1);
        GeomElement { level: mi.level, dir: mi.dir, origin }
    }

    /// Canonical geometric element of a multi-index.
    pub fn geom_identity(&self, mi: &MultiIndex) -> Result<GeomElement> {
        self.index_of(mi)?;
        Ok(self.geom_of(mi))
    }

    /// Geometric element of the multi-index at enumeration position `index`.
    pub fn geom_at(&self, level: Level, index: usize) -> GeomElement {
        self.levels[level.index()].geom[index]
    }

    /// Number of multi-indices mapping to `g` (zero if `g` is not in the grid).
    pub fn multiplicity(&self, g: &GeomElement) -> usize {
        let table = &self.levels[g.level.index()];
        table.lookup.get(g).map_or(0, |&e| table.multiplicity[e])
    }

    /// Whether `g` is contained in the boundary of the active region.
    pub fn on_boundary(&self, g: &GeomElement) -> bool {
        let table = &self.levels[g.level.index()];
        table.lookup.get(g).is_some_and(|&e| table.on_boundary[e])
    }

    /// Distinct geometric elements of a level, in order of first appearance.
    pub fn elements(&self, level: Level) -> &[GeomElement] {
        &self.levels[level.index()].elements
    }

    /// Position in [`Grid::elements`] of the element of each multi-index.
    pub fn element_of(&self, level: Level) -> &[usize] {
        &self.levels[level.index()].elem_of
    }

    pub fn element_multiplicities(&self, level: Level) -> &[usize] {
        &self.levels[level.index()].multiplicity
    }

    pub fn element_on_boundary(&self, level: Level) -> &[bool] {
        &self.levels[level.index()].on_boundary
    }

    /// Interior geometric elements, i.e. the dimension of the conforming space
    /// with homogeneous boundary conditions.
    pub fn interior_element_count(&self, level: Level) -> usize {
        self.element_on_boundary(level).iter().filter(|&&b| !b).count()
    }

    // Cells (1-based, possibly out of range) whose closure contains the element.
    fn touching_cells(&self, g: &GeomElement) -> Vec<(isize, isize)> {
        let p = self.degree();
        let axis = |coord: usize, along: bool| -> Vec<isize> {
            // `along`: element extends in this direction by one subinterval.
            let c = (coord / p) as isize;
            if along || !coord.is_multiple_of(p) {
                vec![c + 1]
            } else {
                vec![c, c + 1]
            }
        };
        let (a1, a2) = match (g.level, g.dir) {
            (Level::Zero, _) => (false, false),
            (Level::One, 1) => (true, false),
            (Level::One, _) => (false, true),
            (Level::Two, _) => (true, true),
        };
        let xs = axis(g.origin.0, a1);
        let ys = axis(g.origin.1, a2);
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect()
    }

    fn touches_exterior(&self, g: &GeomElement) -> bool {
        self.touching_cells(g).iter().any(|&(x, y)| x < 1 || y < 1 || !self.is_active(x as usize, y as usize))
    }

    /// Point `x ∈ Ω_k` to reference coordinates in `[0, 1]²`, if inside the closure.
    pub fn to_reference(&self, cell: (usize, usize), x: [f64; 2]) -> Option<[f64; 2]> {
        let tol = 1e-12 * self.h;
        let s = (x[0] - (cell.0 - 1) as f64 * self.h) / self.h;
        let t = (x[1] - (cell.1 - 1) as f64 * self.h) / self.h;
        let inside = |u: f64| u * self.h >= -tol && (u - 1.0) * self.h <= tol;
        (inside(s) && inside(t)).then(|| [s.clamp(0.0, 1.0), t.clamp(0.0, 1.0)])
    }

    /// Physical coordinates of reference point `s ∈ [0, 1]²` in cell `k`.
    pub fn to_physical(&self, cell: (usize, usize), s: [f64; 2]) -> [f64; 2] {
        [self.h * ((cell.0 - 1) as f64 + s[0]), self.h * ((cell.1 - 1) as f64 + s[1])]
    }

    /// Area of the active region.
    pub fn active_area(&self) -> f64 {
        self.n_cells() as f64 * self.h * self.h
    }

    /// First Betti number of the active region, from the Euler characteristic
    /// of its cell complex (vertices - edges + faces) and one component.
    pub fn betti_one(&self) -> usize {
        let mut verts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for &(k1, k2) in &self.cells {
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                verts.insert((k1 - 1 + dx, k2 - 1 + dy));
            }
            edges.insert((1, k1 - 1, k2 - 1));
            edges.insert((1, k1 - 1, k2));
            edges.insert((2, k1 - 1, k2 - 1));
            edges.insert((2, k1, k2 - 1));
        }
        let chi = verts.len() as isize - edges.len() as isize + self.cells.len() as isize;
        (1 - chi).max(0) as usize
    }
}

fn grid_range(n1: usize, n2: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n1).flat_map(move |i| (0..n2).map(move |j| (i, j)))
}

fn empty_table() -> LevelTable {
    LevelTable {
        geom: Vec::new(),
        elem_of: Vec::new(),
        elements: Vec::new(),
        multiplicity: Vec::new(),
        on_boundary: Vec::new(),
        lookup: BTreeMap::new(),
    }
}

fn check_connected(k: usize, active: &[bool], cells: &[(usize, usize)]) -> Result<()> {
    let mut seen = vec![false; k * k];
    let mut queue = VecDeque::from([cells[0]]);
    seen[(cells[0].0 - 1) * k + cells[0].1 - 1] = true;
    let mut reached = 1;
    while let Some((k1, k2)) = queue.pop_front() {
        let neighbours = [(k1.wrapping_sub(1), k2), (k1 + 1, k2), (k1, k2.wrapping_sub(1)), (k1, k2 + 1)];
        for (n1, n2) in neighbours {
            if n1 == 0 || n2 == 0 || n1 > k || n2 > k {
                continue;
            }
            let id = (n1 - 1) * k + n2 - 1;
            if active[id] && !seen[id] {
                seen[id] = true;
                reached += 1;
                queue.push_back((n1, n2));
            }
        }
    }
    if reached == cells.len() {
        Ok(())
    } else {
        Err(CongaError::DisconnectedMask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(g: &Grid) -> [usize; 3] {
        [g.dim(Level::Zero), g.dim(Level::One), g.dim(Level::Two)]
    }

    #[test]
    fn index_set_sizes() {
        assert_eq!(counts(&Grid::new(GridSpec::square(1, 1)).unwrap()), [4, 4, 1]);
        assert_eq!(counts(&Grid::new(GridSpec::square(2, 2)).unwrap()), [36, 48, 16]);
        let annulus = Grid::new(GridSpec::annulus(3, 2)).unwrap();
        assert_eq!(annulus.n_cells(), 8);
        assert_eq!(annulus.dim(Level::Two), 32);
        for level in Level::ALL {
            assert_eq!(annulus.multi_indices(level).count(), annulus.dim(level));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(Grid::new(GridSpec::square(0, 2)).is_err());
        assert!(matches!(Grid::new(GridSpec::square(2, 0)), Err(CongaError::InvalidDegree)));
        let spec = GridSpec { mask: Some(vec![[1, 1], [2, 2]]), ..GridSpec::square(2, 1) };
        assert!(matches!(Grid::new(spec), Err(CongaError::DisconnectedMask)));
        let spec = GridSpec { mask: Some(vec![[3, 1]]), ..GridSpec::square(2, 1) };
        assert!(Grid::new(spec).is_err());
        assert!(Grid::new(GridSpec::square(2, 1).with_side(-1.0)).is_err());
    }

    #[test]
    fn shared_node_identity() {
        let p = 3;
        let g = Grid::new(GridSpec::square(2, p)).unwrap();
        let mu = MultiIndex { level: Level::Zero, cell: (1, 1), dir: 0, local: (p, 1) };
        let nu = MultiIndex { level: Level::Zero, cell: (2, 1), dir: 0, local: (0, 1) };
        assert_eq!(g.geom_identity(&mu).unwrap(), g.geom_identity(&nu).unwrap());
        let interior = MultiIndex { level: Level::Zero, cell: (1, 1), dir: 0, local: (1, 2) };
        assert_eq!(g.multiplicity(&g.geom_identity(&interior).unwrap()), 1);
        assert!(g.break_point(1, p) == g.break_point(2, 0));
    }

    #[test]
    fn multiplicities() {
        let p = 2;
        let g = Grid::new(GridSpec::square(3, p)).unwrap();
        // corner shared by cells (1,1), (2,1), (1,2), (2,2)
        let corner = MultiIndex { level: Level::Zero, cell: (1, 1), dir: 0, local: (p, p) };
        assert_eq!(g.multiplicity(&g.geom_identity(&corner).unwrap()), 4);
        // edge along the vertical interface between (1,1) and (2,1)
        let edge = MultiIndex { level: Level::One, cell: (1, 1), dir: 2, local: (p, 0) };
        let ge = g.geom_identity(&edge).unwrap();
        assert_eq!(g.multiplicity(&ge), 2);
        assert!(!g.on_boundary(&ge));
        for mi in g.multi_indices(Level::Two) {
            assert_eq!(g.multiplicity(&g.geom_identity(&mi).unwrap()), 1);
        }
    }

    #[test]
    fn boundary_classification() {
        let p = 2;
        let g = Grid::new(GridSpec::square(2, p)).unwrap();
        let bottom = MultiIndex { level: Level::One, cell: (1, 1), dir: 1, local: (0, 0) };
        assert!(g.on_boundary(&g.geom_identity(&bottom).unwrap()));
        // normal edge touching the boundary at one endpoint only
        let normal = MultiIndex { level: Level::One, cell: (1, 1), dir: 2, local: (1, 0) };
        assert!(!g.on_boundary(&g.geom_identity(&normal).unwrap()));

        let a = Grid::new(GridSpec::annulus(3, p)).unwrap();
        // right edge of cell (1,2) faces the hole
        let hole = MultiIndex { level: Level::One, cell: (1, 2), dir: 2, local: (p, 1) };
        let gh = a.geom_identity(&hole).unwrap();
        assert!(a.on_boundary(&gh));
        assert_eq!(a.multiplicity(&gh), 1);
    }

    #[test]
    fn conforming_dimensions_full_square() {
        for k in 1..=4 {
            for p in 1..=3 {
                let g = Grid::new(GridSpec::square(k, p)).unwrap();
                let kp = k * p;
                assert_eq!(g.interior_element_count(Level::Zero), (kp - 1) * (kp - 1));
                assert_eq!(g.interior_element_count(Level::One), 2 * kp * (kp - 1));
                assert_eq!(g.interior_element_count(Level::Two), kp * kp);
            }
        }
    }

    #[test]
    fn enumeration_round_trip() {
        let g = Grid::new(GridSpec::annulus(3, 3)).unwrap();
        for level in Level::ALL {
            for (n, mi) in g.multi_indices(level).enumerate() {
                assert_eq!(g.index_of(&mi).unwrap(), n);
                assert_eq!(g.multi_index(level, n).unwrap(), mi);
                assert_eq!(g.geom_at(level, n), g.geom_identity(&mi).unwrap());
            }
        }
    }

    #[test]
    fn subcell_partition() {
        for spec in [GridSpec::square(3, 3), GridSpec::annulus(3, 2)] {
            let g = Grid::new(spec).unwrap();
            let mut area = 0.0;
            for mi in g.multi_indices(Level::Two) {
                let (k1, k2) = mi.cell;
                let (i1, i2) = mi.local;
                area += (g.break_point(k1, i1 + 1) - g.break_point(k1, i1))
                    * (g.break_point(k2, i2 + 1) - g.break_point(k2, i2));
            }
            let expected = g.side().powi(2) * g.n_cells() as f64 / (g.k() * g.k()) as f64;
            assert!((area - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn betti_numbers() {
        assert_eq!(Grid::new(GridSpec::square(3, 1)).unwrap().betti_one(), 0);
        assert_eq!(Grid::new(GridSpec::annulus(3, 1)).unwrap().betti_one(), 1);
        assert_eq!(Grid::new(GridSpec::annulus(6, 1)).unwrap().betti_one(), 1);
    }

    #[test]
    fn spec_json() {
        let s = GridSpec::from_json(r#"{"K": 3, "p": 2, "a": 1.0, "mask": null}"#).unwrap();
        assert_eq!(s, GridSpec::square(3, 2).with_side(1.0));
        let s = GridSpec::from_json(r#"{"K": 3, "p": 2}"#).unwrap();
        assert!((s.side - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        let a = GridSpec::annulus(3, 2);
        let b = GridSpec {
            mask: a.mask.clone().map(|mut m| {
                m.reverse();
                m
            }),
            ..a.clone()
        };
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), GridSpec::square(3, 2).content_hash());
    }
}
