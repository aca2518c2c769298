//! Lowest-order Raviart-Thomas fields on a Cartesian mesh, stored as one
//! normal flux per facet with normals along the positive axis directions.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::mesh::{Domain, Mesh};

#[derive(Debug, Clone, PartialEq)]
pub struct RT0Field {
    mesh: Mesh,
    flux: Vec<f64>,
    zero_boundary: bool,
}

impl RT0Field {
    pub fn zeros(mesh: Mesh) -> Self {
        let n = mesh.n_facets();
        Self { mesh, flux: vec![0.0; n], zero_boundary: true }
    }

    /// Wraps raw facet fluxes; the boundary flag is derived from the data.
    pub fn new(mesh: Mesh, flux: Vec<f64>) -> Result<Self> {
        if flux.len() != mesh.n_facets() {
            return Err(Error::DimensionMismatch(format!(
                "{} fluxes for {} facets",
                flux.len(),
                mesh.n_facets()
            )));
        }
        let zero_boundary = mesh.facets().filter(|f| f.boundary).all(|f| flux[f.id] == 0.0);
        Ok(Self { mesh, flux, zero_boundary })
    }

    /// Like [`RT0Field::new`] but rejects nonzero boundary fluxes.
    pub fn with_zero_boundary(mesh: Mesh, flux: Vec<f64>) -> Result<Self> {
        let f = Self::new(mesh, flux)?;
        if !f.zero_boundary {
            return Err(Error::InvalidInput("nonzero flux on a boundary facet".into()));
        }
        Ok(f)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    pub fn zero_boundary(&self) -> bool {
        self.zero_boundary
    }

    /// Sets one facet flux. Boundary facets keep the zero-boundary flag honest.
    pub fn set_flux(&mut self, facet: usize, value: f64) -> Result<()> {
        if facet >= self.flux.len() {
            return Err(Error::OutOfRange { index: facet, len: self.flux.len() });
        }
        self.flux[facet] = value;
        if self.mesh.facet(facet).boundary && value != 0.0 {
            self.zero_boundary = false;
        }
        Ok(())
    }

    /// The same field described with negative-axis normals.
    pub fn flipped_orientation(&self) -> Vec<f64> {
        self.flux.iter().map(|v| -v).collect()
    }

    /// `max(1, largest corner norm)`; dividing by it gives a feasible field.
    pub fn feasibility_scale(&self) -> f64 {
        corner_norms(self).into_iter().fold(1.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mesh: self.mesh.clone(),
            flux: self.flux.iter().map(|v| v * s).collect(),
            zero_boundary: self.zero_boundary,
        }
    }

    pub fn max_corner_norm(&self) -> f64 {
        corner_norms(self).into_iter().fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.zero_boundary && self.max_corner_norm() <= 1.0 + tol
    }

    /// CSV rows `facet,axis,i,j,flux`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "facet,axis,i,j,flux")?;
        for f in self.mesh.facets() {
            writeln!(out, "{},{},{},{},{:?}", f.id, f.axis, f.lattice[0], f.lattice[1], self.flux[f.id])?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(mesh: Mesh, input: R) -> Result<Self> {
        let mut flux = vec![0.0; mesh.n_facets()];
        let mut seen = vec![false; flux.len()];
        for (n, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            if n == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("line {}: {line:?}", n + 1));
            if cols.len() != 5 {
                return Err(bad());
            }
            let id: usize = cols[0].trim().parse().map_err(|_| bad())?;
            let v: f64 = cols[4].trim().parse().map_err(|_| bad())?;
            if id >= flux.len() {
                return Err(Error::OutOfRange { index: id, len: flux.len() });
            }
            flux[id] = v;
            seen[id] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Parse("missing facets in flux CSV".into()));
        }
        Self::new(mesh, flux)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("facet,axis,i,j,flux\n");
        for f in self.mesh.facets() {
            let _ = writeln!(s, "{},{},{},{},{:?}", f.id, f.axis, f.lattice[0], f.lattice[1], self.flux[f.id]);
        }
        s
    }
}

/// Per-cell divergence `sum over axes of (plus flux - minus flux) / h`.
pub fn divergence(phi: &RT0Field) -> Vec<f64> {
    let mesh = phi.mesh();
    let h = mesh.h();
    (0..mesh.n_cells())
        .map(|c| {
            (0..mesh.dim())
                .map(|axis| {
                    let (m, p) = mesh.cell_facets(c, axis);
                    phi.flux[p] - phi.flux[m]
                })
                .sum::<f64>()
                / h
        })
        .collect()
}

/// One pointwise-norm constraint: the facet fluxes that make up the field
/// value at a cell corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cone {
    pub cell: usize,
    /// Corner number: counter-clockwise from the lower-left in 2D, 0/1 in 1D.
    pub corner: usize,
    /// Facet id per axis; only the first `len` entries are used.
    pub facets: [usize; 2],
    pub len: usize,
}

impl Cone {
    pub fn facets(&self) -> &[usize] {
        &self.facets[..self.len]
    }
}

/// Every (cell, corner) cone of a mesh, cells in index order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConeConstraintSet {
    pub cones: Vec<Cone>,
}

impl ConeConstraintSet {
    pub fn new(mesh: &Mesh) -> Self {
        let mut cones = Vec::with_capacity(mesh.n_cells() * 2 * mesh.dim());
        for cell in 0..mesh.n_cells() {
            let (xm, xp) = mesh.cell_facets(cell, 0);
            if mesh.dim() == 1 {
                cones.push(Cone { cell, corner: 0, facets: [xm, 0], len: 1 });
                cones.push(Cone { cell, corner: 1, facets: [xp, 0], len: 1 });
            } else {
                let (ym, yp) = mesh.cell_facets(cell, 1);
                for (corner, (fx, fy)) in [(xm, ym), (xp, ym), (xp, yp), (xm, yp)].into_iter().enumerate() {
                    cones.push(Cone { cell, corner, facets: [fx, fy], len: 2 });
                }
            }
        }
        Self { cones }
    }

    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }
}

/// Euclidean norm of the field at every (cell, corner), ordered as in
/// [`ConeConstraintSet::new`].
pub fn corner_norms(phi: &RT0Field) -> Vec<f64> {
    ConeConstraintSet::new(phi.mesh())
        .cones
        .iter()
        .map(|k| k.facets().iter().map(|&f| phi.flux[f] * phi.flux[f]).sum::<f64>().sqrt())
        .collect()
}

/// Gauss-Legendre rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one point");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n starting from the Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            nodes.push(0.5 * (1.0 - x));
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    /// `integral over [a, b]` of `f`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.nodes.iter().zip(&self.weights).map(|(t, w)| w * f(a + t * len)).sum::<f64>() * len
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::gauss_legendre(4)
    }
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Facet fluxes equal to the mean normal trace of `v` over each facet.
pub fn interpolate_rt0<V>(v: &V, mesh: &Mesh) -> RT0Field
where
    V: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    interpolate_rt0_with(v, mesh, &Quadrature::default(), Exec::default())
}

pub fn interpolate_rt0_with<V>(v: &V, mesh: &Mesh, quad: &Quadrature, exec: Exec) -> RT0Field
where
    V: Fn([f64; 2]) -> [f64; 2] + Sync,
{
    let coord = |axis: usize, k: usize| crate::mesh::rat_to_f64(&mesh.grid_coord(axis, k));
    let flux = exec.map_range(mesh.n_facets(), |id| {
        let f = mesh.facet(id);
        let [i, j] = f.lattice;
        if mesh.dim() == 1 {
            return v([coord(0, i), 0.0])[0];
        }
        let h = mesh.h();
        if f.axis == 0 {
            let x = coord(0, i);
            let (a, b) = (coord(1, j), coord(1, j + 1));
            quad.integrate(a, b, |y| v([x, y])[0]) / h
        } else {
            let y = coord(1, j);
            let (a, b) = (coord(0, i), coord(0, i + 1));
            quad.integrate(a, b, |x| v([x, y])[1]) / h
        }
    });
    RT0Field::new(mesh.clone(), flux).expect("flux count matches facets")
}

/// The staircase field on `(0,1) x (0,0.4)` with `h = 1/(15k)` that follows
/// the rounded shallow diagonal `{x2 <= x1/3}` with fluxes `1`, `2/sqrt5`,
/// `1/sqrt5` and a `1/sqrt2` corner piece.
pub fn staircase_witness(mesh: &Mesh, k: usize) -> Result<RT0Field> {
    let strip = Domain::rectangle(Rational64::from_integer(1), Rational64::new(2, 5))?;
    if k == 0 || mesh.domain() != &strip || mesh.h_inv() != 15 * k as i64 {
        return Err(Error::DimensionMismatch(format!(
            "staircase witness needs (0,1)x(0,0.4) with h_inv = {}",
            15 * k
        )));
    }
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let s5 = 5f64.sqrt();
    let mut phi = RT0Field::zeros(mesh.clone());
    let mut put = |axis: usize, i: usize, j: usize, v: f64| phi.set_flux(mesh.facet_id(axis, [i, j]), v);
    put(0, 2, 0, -s2)?;
    put(1, 2, 1, s2)?;
    for g in 1..5 * k {
        put(1, 3 * g, g, 1.0)?;
        put(1, 3 * g + 1, g, 2.0 / s5)?;
        put(0, 3 * g + 2, g, -1.0 / s5)?;
        put(1, 3 * g + 2, g + 1, 2.0 / s5)?;
    }
    Ok(phi)
}

/// Closed-form value the staircase witness attains against the rounded diagonal.
pub fn staircase_value(k: usize) -> f64 {
    let s5 = 5f64.sqrt();
    (1.0 + s5) / 3.0 + (2f64.sqrt() - 1.0 - s5) / (15.0 * k as f64)
}
