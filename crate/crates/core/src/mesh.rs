//! Structured axis-aligned meshes over a box domain and nested mesh pairs.
//!
//! Cells are congruent intervals (d = 1) or squares (d = 2) of side `1/h_inv`.
//! Coordinates are kept as exact rationals; floating point only appears in
//! the measure helpers used by the solvers.
//!
//! Indexing conventions used throughout the crate:
//! * cells are numbered row-major, `idx = j * nx + i`, with `i` along x1;
//! * facets are numbered axis-then-lattice: all facets normal to x1 first
//!   (lattice `(i, j)`, `i in 0..=nx`, id `j * (nx + 1) + i`), then those
//!   normal to x2 (lattice `(i, j)`, `j in 0..=ny`, id `offset + j * nx + i`);
//! * every facet is oriented along the positive axis direction, so its
//!   "minus" cell has the smaller coordinate.
//!
//! A one-dimensional mesh is stored as an `n x 1` array without x2-facets.

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parses `"3"`, `"-2/5"` or a plain decimal such as `"0.4"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if frac_part.len() > 15 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    let den = 10i64.pow(frac_part.len() as u32);
    let frac: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().map_err(|_| bad())?
    };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    let r = Rational64::new(num, den);
    Ok(if neg { -r } else { r })
}

pub fn rat_to_f64(r: &Rational64) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A single axis-aligned box `(lower, upper)` in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    lower: Vec<Rational64>,
    upper: Vec<Rational64>,
}

impl Domain {
    pub fn new(lower: Vec<Rational64>, upper: Vec<Rational64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} lower bounds vs {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if !(1..=2).contains(&lower.len()) {
            return Err(Error::InvalidInput(format!(
                "only d = 1 and d = 2 are supported, got d = {}",
                lower.len()
            )));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if hi <= lo {
                return Err(Error::InvalidInput(format!(
                    "empty extent on axis {axis}: ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `(0, 1)^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![Rational64::zero(); dim], vec![Rational64::one(); dim])
    }

    /// `(0, width) x (0, height)`.
    pub fn rectangle(width: Rational64, height: Rational64) -> Result<Self> {
        Self::new(
            vec![Rational64::zero(), Rational64::zero()],
            vec![width, height],
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[Rational64] {
        &self.lower
    }

    pub fn upper(&self) -> &[Rational64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> Rational64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn measure(&self) -> Rational64 {
        (0..self.dim()).map(|a| self.extent(a)).product()
    }
}

/// A uniform mesh of congruent cells of side `1 / h_inv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mesh {
    domain: Domain,
    cells: [usize; 2],
    h_inv: i64,
}

/// A facet of a mesh together with its neighbouring cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FacetIndex {
    pub id: usize,
    /// Axis of the facet normal.
    pub axis: usize,
    pub lattice: [usize; 2],
    pub boundary: bool,
    /// Cell on the negative side of the facet, if any.
    pub minus: Option<usize>,
    /// Cell on the positive side of the facet, if any.
    pub plus: Option<usize>,
}

impl Mesh {
    pub fn new(domain: Domain, h_inv: i64) -> Result<Self> {
        if h_inv <= 0 {
            return Err(Error::InvalidInput(format!("h_inv must be positive, got {h_inv}")));
        }
        let mut cells = [1usize; 2];
        for axis in 0..domain.dim() {
            let n = domain.extent(axis) * Rational64::from_integer(h_inv);
            if !n.is_integer() {
                return Err(Error::DimensionMismatch(format!(
                    "extent {} on axis {axis} is not a multiple of h = 1/{h_inv}",
                    domain.extent(axis)
                )));
            }
            cells[axis] = n.to_integer() as usize;
        }
        Ok(Self { domain, cells, h_inv })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn h_inv(&self) -> i64 {
        self.h_inv
    }

    /// Cells per axis (`dim` entries).
    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim()]
    }

    pub fn nx(&self) -> usize {
        self.cells[0]
    }

    /// Number of cell rows; 1 for d = 1.
    pub fn ny(&self) -> usize {
        self.cells[1]
    }

    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn cell_size(&self) -> Rational64 {
        Rational64::new(1, self.h_inv)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.h_inv as f64
    }

    pub fn cell_measure_exact(&self) -> Rational64 {
        let h = self.cell_size();
        (0..self.dim()).fold(Rational64::one(), |acc, _| acc * h)
    }

    pub fn facet_measure_exact(&self) -> Rational64 {
        let h = self.cell_size();
        (1..self.dim()).fold(Rational64::one(), |acc, _| acc * h)
    }

    /// `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.h().powi(self.dim() as i32)
    }

    /// `h^(d-1)`; 1 in one dimension.
    pub fn facet_measure(&self) -> f64 {
        self.h().powi(self.dim() as i32 - 1)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.cells[0] + i
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 2] {
        [idx % self.cells[0], idx / self.cells[0]]
    }

    pub fn check_cell(&self, idx: usize) -> Result<()> {
        if idx < self.n_cells() {
            Ok(())
        } else {
            Err(Error::OutOfRange { index: idx, len: self.n_cells() })
        }
    }

    /// Lower corner coordinate of grid line `k` along `axis`.
    pub fn grid_coord(&self, axis: usize, k: usize) -> Rational64 {
        self.domain.lower[axis] + self.cell_size() * Rational64::from_integer(k as i64)
    }

    /// Exact bounds of a cell, one `(lo, hi)` pair per axis.
    pub fn cell_bounds(&self, idx: usize) -> Vec<(Rational64, Rational64)> {
        let c = self.cell_coords(idx);
        (0..self.dim())
            .map(|a| (self.grid_coord(a, c[a]), self.grid_coord(a, c[a] + 1)))
            .collect()
    }

    pub fn cell_center(&self, idx: usize) -> [f64; 2] {
        let b = self.cell_bounds(idx);
        let mut x = [0.0; 2];
        for (a, (lo, hi)) in b.iter().enumerate() {
            x[a] = 0.5 * (rat_to_f64(lo) + rat_to_f64(hi));
        }
        x
    }

    fn axis0_facets(&self) -> usize {
        (self.cells[0] + 1) * self.cells[1]
    }

    pub fn n_facets(&self) -> usize {
        let a0 = self.axis0_facets();
        if self.dim() == 1 {
            a0
        } else {
            a0 + self.cells[0] * (self.cells[1] + 1)
        }
    }

    pub fn facet_id(&self, axis: usize, lattice: [usize; 2]) -> usize {
        let [i, j] = lattice;
        match axis {
            0 => j * (self.cells[0] + 1) + i,
            _ => self.axis0_facets() + j * self.cells[0] + i,
        }
    }

    pub fn facet(&self, id: usize) -> FacetIndex {
        let [nx, ny] = self.cells;
        let (axis, lattice) = if id < self.axis0_facets() {
            (0, [id % (nx + 1), id / (nx + 1)])
        } else {
            let r = id - self.axis0_facets();
            (1, [r % nx, r / nx])
        };
        let [i, j] = lattice;
        let (minus, plus) = if axis == 0 {
            (
                (i > 0).then(|| self.cell_index(i - 1, j)),
                (i < nx).then(|| self.cell_index(i, j)),
            )
        } else {
            (
                (j > 0).then(|| self.cell_index(i, j - 1)),
                (j < ny).then(|| self.cell_index(i, j)),
            )
        };
        FacetIndex {
            id,
            axis,
            lattice,
            boundary: minus.is_none() || plus.is_none(),
            minus,
            plus,
        }
    }

    pub fn facets(&self) -> impl Iterator<Item = FacetIndex> + '_ {
        (0..self.n_facets()).map(move |id| self.facet(id))
    }

    /// Every interior facet once, in id order.
    pub fn interior_facets(&self) -> Vec<FacetIndex> {
        self.facets().filter(|f| !f.boundary).collect()
    }

    /// `(minus_facet, plus_facet)` ids of a cell along `axis`.
    pub fn cell_facets(&self, cell: usize, axis: usize) -> (usize, usize) {
        let [i, j] = self.cell_coords(cell);
        if axis == 0 {
            (self.facet_id(0, [i, j]), self.facet_id(0, [i + 1, j]))
        } else {
            (self.facet_id(1, [i, j]), self.facet_id(1, [i, j + 1]))
        }
    }

    /// Serializable descriptor `(extents, h_inv)`.
    pub fn descriptor(&self) -> MeshDescriptor {
        MeshDescriptor {
            extents: (0..self.dim())
                .map(|a| [self.domain.lower[a].to_string(), self.domain.upper[a].to_string()])
                .collect(),
            h_inv: self.h_inv,
            ratio: 1,
        }
    }
}

/// Where a fine facet sits relative to the coarse mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineFacetClass {
    /// Lies on the coarse facet with this id.
    OnCoarseFacet(usize),
    /// Lies in the interior of this coarse cell.
    InsideCoarseCell(usize),
}

/// A coarse TV mesh and a fine control mesh refining it by an integer ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshPair {
    coarse: Mesh,
    fine: Mesh,
    ratio: usize,
}

/// Builds the coarse mesh of size `1/h_inv` and its `ratio`-fold refinement.
pub fn build_mesh_pair(domain: Domain, h_inv: i64, ratio: usize) -> Result<MeshPair> {
    if ratio == 0 {
        return Err(Error::InvalidInput("ratio must be at least 1".into()));
    }
    let coarse = Mesh::new(domain.clone(), h_inv)?;
    let fine = Mesh::new(domain, h_inv * ratio as i64)?;
    Ok(MeshPair { coarse, fine, ratio })
}

impl MeshPair {
    /// Pair with identical coarse and fine mesh.
    pub fn identity(mesh: Mesh) -> Self {
        Self { coarse: mesh.clone(), fine: mesh, ratio: 1 }
    }

    pub fn coarse(&self) -> &Mesh {
        &self.coarse
    }

    pub fn fine(&self) -> &Mesh {
        &self.fine
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn coarse_of(&self, fine_cell: usize) -> usize {
        let [i, j] = self.fine.cell_coords(fine_cell);
        let r = self.ratio;
        let jc = if self.fine.dim() == 1 { 0 } else { j / r };
        self.coarse.cell_index(i / r, jc)
    }

    /// Coarse cell index for every fine cell.
    pub fn embedding(&self) -> Vec<usize> {
        (0..self.fine.n_cells()).map(|c| self.coarse_of(c)).collect()
    }

    /// The `ratio^d` fine cells tiling `coarse_cell`, row-major.
    pub fn fine_cells_of(&self, coarse_cell: usize) -> Result<Vec<usize>> {
        self.coarse.check_cell(coarse_cell)?;
        let [ic, jc] = self.coarse.cell_coords(coarse_cell);
        let r = self.ratio;
        let rows = if self.fine.dim() == 1 { 1 } else { r };
        let mut out = Vec::with_capacity(r * rows);
        for dj in 0..rows {
            for di in 0..r {
                let j = if self.fine.dim() == 1 { 0 } else { jc * r + dj };
                out.push(self.fine.cell_index(ic * r + di, j));
            }
        }
        Ok(out)
    }

    pub fn classify_fine_facet(&self, fine_facet: usize) -> FineFacetClass {
        let f = self.fine.facet(fine_facet);
        let r = self.ratio;
        let [i, j] = f.lattice;
        let along = if f.axis == 0 { i } else { j };
        if along % r == 0 {
            FineFacetClass::OnCoarseFacet(self.coarse.facet_id(f.axis, [i / r, j / r]))
        } else {
            let cell = f.minus.expect("facet strictly inside a coarse cell has two sides");
            FineFacetClass::InsideCoarseCell(self.coarse_of(cell))
        }
    }

    pub fn descriptor(&self) -> MeshDescriptor {
        MeshDescriptor { ratio: self.ratio, ..self.coarse.descriptor() }
    }
}

/// JSON form of a mesh pair: `{"extents": [["0","1"],["0","2/5"]], "h_inv": 15, "ratio": 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshDescriptor {
    pub extents: Vec<[String; 2]>,
    pub h_inv: i64,
    #[serde(default = "one")]
    pub ratio: usize,
}

fn one() -> usize {
    1
}

impl MeshDescriptor {
    pub fn build(&self) -> Result<MeshPair> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for [lo, hi] in &self.extents {
            lower.push(parse_rational(lo)?);
            upper.push(parse_rational(hi)?);
        }
        build_mesh_pair(Domain::new(lower, upper)?, self.h_inv, self.ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn table_level_pair() {
        let p = build_mesh_pair(Domain::unit(2).unwrap(), 2, 9).unwrap();
        assert_eq!(p.coarse().cells_per_axis(), &[2, 2]);
        assert_eq!(p.fine().cells_per_axis(), &[18, 18]);
        assert_eq!(p.fine_cells_of(0).unwrap().len(), 81);
    }

    #[test]
    fn identity_embedding_1d() {
        let p = build_mesh_pair(Domain::unit(1).unwrap(), 4, 1).unwrap();
        assert_eq!(p.coarse(), p.fine());
        assert_eq!(p.fine().n_cells(), 4);
        assert_eq!(p.embedding(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn strip_domain_cell_count() {
        let d = Domain::rectangle(r(1, 1), parse_rational("0.4").unwrap()).unwrap();
        let p = build_mesh_pair(d.clone(), 15, 1).unwrap();
        assert_eq!(p.coarse().cells_per_axis(), &[15, 6]);
        // area / tau^2
        let n = d.measure() / p.fine().cell_measure_exact();
        assert_eq!(n, Rational64::from_integer(90));
    }

    #[test]
    fn non_divisible_extent_is_rejected() {
        let d = Domain::rectangle(r(1, 1), r(1, 3)).unwrap();
        assert!(matches!(build_mesh_pair(d, 2, 1), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn interior_facet_counts() {
        let m = Mesh::new(Domain::unit(2).unwrap(), 2).unwrap();
        assert_eq!(m.interior_facets().len(), 4);
        let m = Mesh::new(Domain::unit(2).unwrap(), 1).unwrap();
        assert_eq!(m.interior_facets().len(), 0);
        let m = Mesh::new(Domain::unit(1).unwrap(), 7).unwrap();
        assert_eq!(m.interior_facets().len(), 6);
        let m = Mesh::new(Domain::rectangle(r(1, 1), r(2, 5)).unwrap(), 15).unwrap();
        assert_eq!(m.interior_facets().len(), 14 * 6 + 15 * 5);
    }

    #[test]
    fn fine_cells_per_coarse_cell() {
        let p = build_mesh_pair(Domain::unit(2).unwrap(), 3, 2).unwrap();
        assert_eq!(p.fine_cells_of(4).unwrap().len(), 4);
        let p = build_mesh_pair(Domain::unit(1).unwrap(), 2, 3).unwrap();
        assert_eq!(p.fine_cells_of(1).unwrap(), vec![3, 4, 5]);
        assert!(matches!(p.fine_cells_of(2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn facet_neighbours_are_consistent() {
        let m = Mesh::new(Domain::unit(2).unwrap(), 3).unwrap();
        for f in m.facets() {
            let sides = f.minus.is_some() as usize + f.plus.is_some() as usize;
            assert_eq!(sides, if f.boundary { 1 } else { 2 });
            assert_eq!(m.facet_id(f.axis, f.lattice), f.id);
            if let Some(c) = f.plus {
                assert_eq!(m.cell_facets(c, f.axis).0, f.id);
            }
            if let Some(c) = f.minus {
                assert_eq!(m.cell_facets(c, f.axis).1, f.id);
            }
        }
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("0.4").unwrap(), r(2, 5));
        assert_eq!(parse_rational("-3/6").unwrap(), r(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let d = Domain::rectangle(r(1, 1), r(2, 5)).unwrap();
        let p = build_mesh_pair(d, 5, 3).unwrap();
        let js = serde_json::to_string(&p.descriptor()).unwrap();
        let back: MeshDescriptor = serde_json::from_str(&js).unwrap();
        assert_eq!(back.build().unwrap(), p);
    }
}
