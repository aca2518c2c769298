//! Piecewise-constant fields on a mesh, analytic integer-valued inputs, the
//! cell-mean projection, the attained-value rounding operator and exact
//! total variation of grid functions.

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{self, clipped_area, line_length_in_rect, q, qi, HalfPlane, Rect, Q};
use crate::mesh::{Mesh, MeshPair};

/// A finite, strictly increasing set of admissible integer values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSet {
    values: Vec<i64>,
}

impl LabelSet {
    pub fn new(mut values: Vec<i64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("label set is empty".into()));
        }
        values.sort_unstable();
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("duplicate labels in {values:?}")));
        }
        Ok(Self { values })
    }

    /// `{lo, lo + 1, ..., hi}`.
    pub fn range(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidInput(format!("empty label range {lo}..{hi}")));
        }
        Self::new((lo..=hi).collect())
    }

    /// Parses `"0..5"` (inclusive) or a comma list `"0,2,5"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |_| Error::Parse(format!("bad label set {s:?}"));
        if let Some((a, b)) = s.split_once("..") {
            let b = b.trim_start_matches('=');
            return Self::range(a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        }
        let vals = s
            .split(',')
            .map(|t| t.trim().parse::<i64>().map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vals)
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> i64 {
        self.values[0]
    }

    pub fn max(&self) -> i64 {
        *self.values.last().unwrap()
    }

    pub fn contains(&self, v: i64) -> bool {
        self.values.binary_search(&v).is_ok()
    }

    /// No gaps between consecutive labels.
    pub fn is_contiguous(&self) -> bool {
        self.values.windows(2).all(|w| w[1] - w[0] == 1)
    }

    /// Nearest label to `x`; ties go to the smaller label.
    pub fn nearest(&self, x: f64) -> i64 {
        let mut best = self.values[0];
        for &v in &self.values[1..] {
            if (x - v as f64).abs() < (x - best as f64).abs() {
                best = v;
            }
        }
        best
    }

    /// Converts `v` to a label if it is one exactly.
    pub fn as_label(&self, v: f64) -> Option<i64> {
        if v.fract() != 0.0 || !v.is_finite() {
            return None;
        }
        let i = v as i64;
        self.contains(i).then_some(i)
    }
}

/// A function that is constant on each cell of `mesh`.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Field {
    mesh: Mesh,
    values: Vec<f64>,
    labels: Option<LabelSet>,
}

impl P0Field {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} cells",
                values.len(),
                mesh.n_cells()
            )));
        }
        Ok(Self { mesh, values, labels: None })
    }

    pub fn constant(mesh: Mesh, value: f64) -> Self {
        let n = mesh.n_cells();
        Self { mesh, values: vec![value; n], labels: None }
    }

    /// Field whose every value is a member of `labels`.
    pub fn from_labels(mesh: Mesh, values: &[i64], labels: LabelSet) -> Result<Self> {
        Self::new(mesh, values.iter().map(|&v| v as f64).collect())?.certify(labels)
    }

    /// Tags the field as label-valued after checking every value.
    pub fn certify(mut self, labels: LabelSet) -> Result<Self> {
        if let Some(&bad) = self.values.iter().find(|&&v| labels.as_label(v).is_none()) {
            return Err(Error::NotALabel { value: bad });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&LabelSet> {
        self.labels.as_ref()
    }

    pub fn is_label_certified(&self) -> bool {
        self.labels.is_some()
    }

    /// Integer values, if every value is an integer.
    pub fn integer_values(&self) -> Option<Vec<i64>> {
        self.values
            .iter()
            .map(|&v| (v.fract() == 0.0 && v.is_finite()).then_some(v as i64))
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Integer-valued inputs whose cell integrals are available in closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticField {
    Constant(i64),
    /// `inside` on `{normal . x >= offset}`, `outside` elsewhere.
    HalfPlane {
        normal: [BigRational; 2],
        offset: BigRational,
        inside: i64,
        outside: i64,
    },
    /// `inside` on the box `[lower, upper]`, `outside` elsewhere.
    Box {
        lower: [BigRational; 2],
        upper: [BigRational; 2],
        inside: i64,
        outside: i64,
    },
    /// A fine grid function nested into the target meshes.
    Raster(P0Field),
}

impl AnalyticField {
    pub fn half_plane(normal: [Rational64; 2], offset: Rational64, inside: i64, outside: i64) -> Result<Self> {
        if normal[0].is_zero() && normal[1].is_zero() {
            return Err(Error::InvalidInput("half-plane normal must be nonzero".into()));
        }
        Ok(Self::HalfPlane {
            normal: [q(&normal[0]), q(&normal[1])],
            offset: q(&offset),
            inside,
            outside,
        })
    }

    pub fn box_indicator(lower: [Rational64; 2], upper: [Rational64; 2], inside: i64, outside: i64) -> Result<Self> {
        if lower[0] >= upper[0] || lower[1] >= upper[1] {
            return Err(Error::InvalidInput("empty box".into()));
        }
        Ok(Self::Box {
            lower: [q(&lower[0]), q(&lower[1])],
            upper: [q(&upper[0]), q(&upper[1])],
            inside,
            outside,
        })
    }

    /// The shallow half-plane indicator `chi{(1/3, -1) . x >= 0}`.
    pub fn shallow_diagonal() -> Self {
        Self::half_plane(
            [Rational64::new(1, 3), Rational64::from_integer(-1)],
            Rational64::zero(),
            1,
            0,
        )
        .unwrap()
    }

    /// The diagonal indicator `chi{(-1, 1) . x > 0}`.
    pub fn steep_diagonal() -> Self {
        Self::half_plane(
            [Rational64::from_integer(-1), Rational64::from_integer(1)],
            Rational64::zero(),
            1,
            0,
        )
        .unwrap()
    }

    fn values_pair(&self) -> Option<(i64, i64)> {
        match self {
            Self::Constant(v) => Some((*v, *v)),
            Self::HalfPlane { inside, outside, .. } | Self::Box { inside, outside, .. } => {
                Some((*inside, *outside))
            }
            Self::Raster(_) => None,
        }
    }

    /// Exact fraction of the cell covered by the "inside" region.
    fn inside_fraction(&self, mesh: &Mesh, cell: usize) -> Result<Q> {
        let rect = cell_rect(mesh, cell);
        let frac = match self {
            Self::Constant(_) => qi(1),
            Self::HalfPlane { normal, offset, .. } => {
                if mesh.dim() == 1 && !normal[1].is_zero() {
                    return Err(Error::InvalidInput(
                        "half-plane on a 1D mesh must have a zero second normal component".into(),
                    ));
                }
                let hp = HalfPlane { normal: normal.clone(), offset: offset.clone() };
                clipped_area(&rect, &hp) / rect.area()
            }
            Self::Box { lower, upper, .. } => {
                let mut b = Rect { lo: lower.clone(), hi: upper.clone() };
                if mesh.dim() == 1 {
                    b.lo[1] = qi(0);
                    b.hi[1] = qi(1);
                }
                match rect.intersect(&b) {
                    Some(r) => r.area() / rect.area(),
                    None => Q::zero(),
                }
            }
            Self::Raster(_) => unreachable!("rasters have no inside fraction"),
        };
        Ok(frac)
    }

    /// Exact cell mean for indicator kinds, exact integer average for rasters
    /// with integer values.
    pub fn cell_mean_exact(&self, mesh: &Mesh, cell: usize) -> Result<Q> {
        mesh.check_cell(cell)?;
        if let Self::Raster(r) = self {
            let sub = raster_cells(r, mesh, cell)?;
            let ints = r.integer_values().ok_or_else(|| {
                Error::InvalidInput("exact raster means need integer values".into())
            })?;
            let sum: i64 = sub.iter().map(|&c| ints[c]).sum();
            return Ok(Q::new(BigInt::from(sum), BigInt::from(sub.len() as i64)));
        }
        let (inside, outside) = self.values_pair().unwrap();
        let frac = self.inside_fraction(mesh, cell)?;
        Ok(qi(outside) + frac * qi(inside - outside))
    }

    /// Which values the field takes on a set of positive measure in the cell,
    /// ascending.
    pub fn attained_values(&self, mesh: &Mesh, cell: usize) -> Result<Vec<i64>> {
        mesh.check_cell(cell)?;
        let mut vals = match self {
            Self::Raster(r) => {
                let sub = raster_cells(r, mesh, cell)?;
                let mut v = Vec::with_capacity(sub.len());
                for c in sub {
                    let x = r.values()[c];
                    if x.fract() != 0.0 {
                        return Err(Error::NotALabel { value: x });
                    }
                    v.push(x as i64);
                }
                v
            }
            _ => {
                let (inside, outside) = self.values_pair().unwrap();
                let frac = self.inside_fraction(mesh, cell)?;
                let mut v = Vec::with_capacity(2);
                if frac.is_positive() {
                    v.push(inside);
                }
                if frac < qi(1) {
                    v.push(outside);
                }
                v
            }
        };
        vals.sort_unstable();
        vals.dedup();
        Ok(vals)
    }

    /// Closed-form total variation on the domain of `mesh`.
    pub fn total_variation(&self, mesh: &Mesh) -> Result<f64> {
        let dom = domain_rect(mesh);
        Ok(match self {
            Self::Constant(_) => 0.0,
            Self::HalfPlane { normal, offset, inside, outside } => {
                let jump = (inside - outside).abs() as f64;
                let hp = HalfPlane { normal: normal.clone(), offset: offset.clone() };
                if mesh.dim() == 1 {
                    // threshold point strictly inside the interval
                    let x = offset / &normal[0];
                    let inner = x > dom.lo[0] && x < dom.hi[0];
                    if inner { jump } else { 0.0 }
                } else {
                    jump * line_length_in_rect(&hp, &dom)
                }
            }
            Self::Box { lower, upper, inside, outside } => {
                let jump = (inside - outside).abs() as f64;
                let b = Rect { lo: lower.clone(), hi: upper.clone() };
                let Some(clip) = dom.intersect(&b) else { return Ok(0.0) };
                let mut len = Q::zero();
                for axis in 0..mesh.dim() {
                    let other = 1 - axis;
                    let side = if mesh.dim() == 1 { qi(1) } else { &clip.hi[other] - &clip.lo[other] };
                    if clip.lo[axis] > dom.lo[axis] {
                        len += &side;
                    }
                    if clip.hi[axis] < dom.hi[axis] {
                        len += &side;
                    }
                }
                jump * geometry::q_to_f64(&len)
            }
            Self::Raster(r) => tv_exact(r),
        })
    }
}

fn cell_rect(mesh: &Mesh, cell: usize) -> Rect {
    let b = mesh.cell_bounds(cell);
    let (y0, y1) = if mesh.dim() == 1 { (qi(0), qi(1)) } else { (q(&b[1].0), q(&b[1].1)) };
    Rect { lo: [q(&b[0].0), y0], hi: [q(&b[0].1), y1] }
}

fn domain_rect(mesh: &Mesh) -> Rect {
    let d = mesh.domain();
    let (y0, y1) = if mesh.dim() == 1 {
        (qi(0), qi(1))
    } else {
        (q(&d.lower()[1]), q(&d.upper()[1]))
    };
    Rect { lo: [q(&d.lower()[0]), y0], hi: [q(&d.upper()[0]), y1] }
}

/// Indices of raster cells inside a target cell; the raster must refine `mesh`.
fn raster_cells(raster: &P0Field, mesh: &Mesh, cell: usize) -> Result<Vec<usize>> {
    let rm = raster.mesh();
    if rm.domain() != mesh.domain() || rm.h_inv() % mesh.h_inv() != 0 {
        return Err(Error::NotNested(format!(
            "raster h_inv {} vs target h_inv {}",
            rm.h_inv(),
            mesh.h_inv()
        )));
    }
    let r = (rm.h_inv() / mesh.h_inv()) as usize;
    let [i, j] = mesh.cell_coords(cell);
    let rows = if mesh.dim() == 1 { 1 } else { r };
    let mut out = Vec::with_capacity(r * rows);
    for dj in 0..rows {
        for di in 0..r {
            let jj = if mesh.dim() == 1 { 0 } else { j * r + dj };
            out.push(rm.cell_index(i * r + di, jj));
        }
    }
    Ok(out)
}

/// Sum of `values` that does not depend on their order.
fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

/// `(1/|Q|) * integral of w over Q`.
pub fn cell_mean(w: &AnalyticField, mesh: &Mesh, cell: usize) -> Result<f64> {
    if let AnalyticField::Raster(r) = w {
        mesh.check_cell(cell)?;
        let sub = raster_cells(r, mesh, cell)?;
        let mut vals: Vec<f64> = sub.iter().map(|&c| r.values()[c]).collect();
        let n = vals.len() as f64;
        return Ok(order_free_sum(&mut vals) / n);
    }
    Ok(geometry::q_to_f64(&w.cell_mean_exact(mesh, cell)?))
}

/// Cell-mean projection onto the piecewise constants of `mesh`.
pub fn project_p0(w: &AnalyticField, mesh: &Mesh) -> Result<P0Field> {
    project_p0_with(w, mesh, Exec::default())
}

pub fn project_p0_with(w: &AnalyticField, mesh: &Mesh, exec: Exec) -> Result<P0Field> {
    let vals = exec
        .map_range(mesh.n_cells(), |c| cell_mean(w, mesh, c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    P0Field::new(mesh.clone(), vals)
}

/// Per cell, the attained label nearest to the cell mean (ties to the smaller).
pub fn round_rw(w: &AnalyticField, mesh: &Mesh, labels: &LabelSet) -> Result<P0Field> {
    round_rw_with(w, mesh, labels, Exec::default())
}

pub fn round_rw_with(w: &AnalyticField, mesh: &Mesh, labels: &LabelSet, exec: Exec) -> Result<P0Field> {
    let vals = exec
        .map_range(mesh.n_cells(), |c| -> Result<f64> {
            let attained = w.attained_values(mesh, c)?;
            if let Some(&bad) = attained.iter().find(|&&v| !labels.contains(v)) {
                return Err(Error::NotALabel { value: bad as f64 });
            }
            let mean = w.cell_mean_exact(mesh, c)?;
            let mut best = attained[0];
            let mut best_d = (&mean - qi(best)).abs();
            for &v in &attained[1..] {
                let d = (&mean - qi(v)).abs();
                if d < best_d {
                    best = v;
                    best_d = d;
                }
            }
            Ok(best as f64)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    P0Field::new(mesh.clone(), vals)?.certify(labels.clone())
}

/// `sum over interior facets of |F| * |jump|`, the total variation of a grid function.
pub fn tv_exact(w: &P0Field) -> f64 {
    let mesh = w.mesh();
    let v = w.values();
    let sum: f64 = mesh
        .facets()
        .filter_map(|f| Some((v[f.minus?] - v[f.plus?]).abs()))
        .sum();
    sum * mesh.facet_measure()
}

/// [`tv_exact`] in exact arithmetic for integer-valued fields.
pub fn tv_exact_rational(w: &P0Field) -> Result<Rational64> {
    let ints = w
        .integer_values()
        .ok_or_else(|| Error::InvalidInput("exact TV needs integer values".into()))?;
    let jumps: i64 = w
        .mesh()
        .facets()
        .filter_map(|f| Some((ints[f.minus?] - ints[f.plus?]).abs()))
        .sum();
    Ok(Rational64::from_integer(jumps) * w.mesh().facet_measure_exact())
}

fn same_mesh(a: &Mesh, b: &Mesh) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch("fields live on different meshes".into()))
    }
}

/// `sum_Q |Q| |a_Q - b_Q|`.
pub fn l1_distance(a: &P0Field, b: &P0Field) -> Result<f64> {
    same_mesh(a.mesh(), b.mesh())?;
    let s: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s * a.mesh().cell_measure())
}

/// Mean of a fine field over every coarse cell, independent of the order of
/// the fine values inside each coarse cell.
pub fn coarse_cell_means(w: &P0Field, pair: &MeshPair) -> Result<Vec<f64>> {
    same_mesh(w.mesh(), pair.fine())?;
    let r = pair.ratio();
    let count = if pair.fine().dim() == 1 { r } else { r * r };
    let mut out = Vec::with_capacity(pair.coarse().n_cells());
    let mut buf = Vec::with_capacity(count);
    for c in 0..pair.coarse().n_cells() {
        buf.clear();
        buf.extend(pair.fine_cells_of(c)?.into_iter().map(|f| w.values()[f]));
        out.push(order_free_sum(&mut buf) / count as f64);
    }
    Ok(out)
}

/// `||w - p||_{L1}` between an analytic field and a grid function on a mesh
/// that `w` can be integrated over exactly.
pub fn l1_to_analytic(w: &AnalyticField, p: &P0Field) -> Result<f64> {
    let mesh = p.mesh();
    let cell_m = mesh.cell_measure();
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let pv = p.values()[c];
        match w {
            AnalyticField::Raster(r) => {
                let sub = raster_cells(r, mesh, c)?;
                let sm = r.mesh().cell_measure();
                acc += sub.iter().map(|&s| (r.values()[s] - pv).abs()).sum::<f64>() * sm;
            }
            _ => {
                let (inside, outside) = w.values_pair().unwrap();
                let frac = w.inside_fraction(mesh, c)?;
                let f = frac.to_f64().unwrap_or(f64::NAN);
                acc += cell_m * (f * (inside as f64 - pv).abs() + (1.0 - f) * (outside as f64 - pv).abs());
            }
        }
    }
    Ok(acc)
}
