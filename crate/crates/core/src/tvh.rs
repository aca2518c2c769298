//! The discrete dual total variation
//!
//! `TV^h(w) = max { integral of w div(phi) : phi in RT0_0^h, |phi| <= 1 }`
//!
//! as a second-order cone program over the interior facet fluxes of the
//! coarse mesh. Only the coarse-cell means of `w` enter the objective.
//!
//! The solver is ADMM with over-relaxation and residual-balanced step size.
//! Every returned value carries a certificate: a scaled feasible primal gives
//! the lower bound, and the ADMM multipliers, corrected to satisfy the dual
//! equality exactly, give the upper bound.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{coarse_cell_means, P0Field};
use crate::mesh::{Mesh, MeshPair};
use crate::rt0::{divergence, ConeConstraintSet, RT0Field};

const RELAXATION: f64 = 1.6;
const RHO_UPDATE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvhOptions {
    /// Relative gap `(upper - lower) / upper` at which to stop.
    pub tol: f64,
    /// Overrides the default cap of `200 * n_facets` iterations.
    pub max_iter: Option<usize>,
    /// Iterations between certificate evaluations.
    pub check_every: usize,
    pub trace: bool,
}

impl Default for TvhOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: None, check_every: 10, trace: false }
    }
}

impl TvhOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Certified bracket around the optimal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvhCertificate {
    pub lower: f64,
    pub upper: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvhResult {
    /// Objective of `maximizer`; equals `certificate.lower`.
    pub value: f64,
    /// Feasible field on the coarse mesh with zero boundary fluxes.
    pub maximizer: RT0Field,
    pub certificate: TvhCertificate,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
}

impl TvhResult {
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,lower,upper,gap")?;
        for t in &self.trace {
            writeln!(out, "{},{:?},{:?},{:?}", t.iteration, t.lower, t.upper, t.rel_gap)?;
        }
        Ok(())
    }
}

/// Coefficient of each facet flux in `integral of w div(phi)`:
/// `|E| (m_minus - m_plus)` on interior facets, 0 on the boundary.
pub fn objective_coefficients(mesh: &Mesh, means: &[f64]) -> Result<Vec<f64>> {
    if means.len() != mesh.n_cells() {
        return Err(Error::DimensionMismatch(format!(
            "{} means for {} cells",
            means.len(),
            mesh.n_cells()
        )));
    }
    let fm = mesh.facet_measure();
    Ok(mesh
        .facets()
        .map(|f| match (f.minus, f.plus) {
            (Some(a), Some(b)) => fm * (means[a] - means[b]),
            _ => 0.0,
        })
        .collect())
}

/// `TV^h` of a field on the fine mesh of `pair`.
pub fn tvh(w: &P0Field, pair: &MeshPair, opts: &TvhOptions) -> Result<TvhResult> {
    tvh_warm(w, pair, opts, None)
}

/// [`tvh`] started from a previous maximizer.
pub fn tvh_warm(w: &P0Field, pair: &MeshPair, opts: &TvhOptions, warm: Option<&RT0Field>) -> Result<TvhResult> {
    let means = coarse_cell_means(w, pair)?;
    tvh_from_means(pair.coarse(), &means, opts, warm)
}

/// [`tvh`] for many fields, run according to `exec`.
pub fn tvh_batch(fields: &[P0Field], pair: &MeshPair, opts: &TvhOptions, exec: Exec) -> Vec<Result<TvhResult>> {
    exec.map_slice(fields, |w| tvh(w, pair, opts))
}

/// `integral of w div(phi)` for a feasible `phi`, a lower bound on `TV^h(w)`.
pub fn tvh_lower_witness(w: &P0Field, pair: &MeshPair, phi: &RT0Field) -> Result<f64> {
    if phi.mesh() != pair.coarse() {
        return Err(Error::DimensionMismatch("witness must live on the coarse mesh".into()));
    }
    if !phi.zero_boundary() {
        return Err(Error::InfeasibleWitness("nonzero boundary flux".into()));
    }
    let norm = phi.max_corner_norm();
    if norm > 1.0 + 1e-12 {
        return Err(Error::InfeasibleWitness(format!("corner norm {norm}")));
    }
    let means = coarse_cell_means(w, pair)?;
    let div = divergence(phi);
    let vol = pair.coarse().cell_measure();
    Ok(means.iter().zip(&div).map(|(m, d)| m * d).sum::<f64>() * vol)
}

/// Solves the cone program for given coarse-cell means.
pub fn tvh_from_means(mesh: &Mesh, means: &[f64], opts: &TvhOptions, warm: Option<&RT0Field>) -> Result<TvhResult> {
    let coef = objective_coefficients(mesh, means)?;
    if let Some(w) = warm {
        if w.mesh() != mesh {
            return Err(Error::DimensionMismatch("warm start on a different mesh".into()));
        }
    }
    let cap = opts.max_iter.unwrap_or(200 * mesh.n_facets());
    let mut prob = Problem::new(mesh, &coef);
    if prob.active.is_empty() {
        return Ok(TvhResult {
            value: 0.0,
            maximizer: RT0Field::zeros(mesh.clone()),
            certificate: TvhCertificate { lower: 0.0, upper: 0.0, rel_gap: 0.0 },
            iterations: 0,
            trace: Vec::new(),
        });
    }
    if let Some(w) = warm {
        prob.warm_start(w.flux());
    }
    prob.solve(opts, cap)
}

/// Presolved cone program: maximize `c . f` over the facets with nonzero
/// coefficient. Facets with zero coefficient can be fixed at 0 because every
/// cone constraint only gets looser when a component shrinks.
struct Problem {
    mesh: Mesh,
    /// Mesh facet id of each active variable.
    active: Vec<usize>,
    /// Normalized coefficients, max |c| = 1.
    c: Vec<f64>,
    scale: f64,
    /// Per cone: active variable indices (second is `usize::MAX` if absent).
    cones: Vec<[usize; 2]>,
    /// CSR memberships of each variable: (cone, slot).
    memb_start: Vec<usize>,
    memb: Vec<(usize, usize)>,
    f: Vec<f64>,
    z: Vec<[f64; 2]>,
    u: Vec<[f64; 2]>,
    rho: f64,
}

impl Problem {
    fn new(mesh: &Mesh, coef: &[f64]) -> Self {
        let mut var_of = vec![usize::MAX; coef.len()];
        let mut active = Vec::new();
        for (id, &cv) in coef.iter().enumerate() {
            if cv != 0.0 {
                var_of[id] = active.len();
                active.push(id);
            }
        }
        let scale = active.iter().map(|&id| coef[id].abs()).fold(0.0, f64::max);
        let c: Vec<f64> = active.iter().map(|&id| coef[id] / scale).collect();

        let mut cones = Vec::new();
        for cone in ConeConstraintSet::new(mesh).cones {
            let mut slots = [usize::MAX; 2];
            let mut n = 0;
            for &fid in cone.facets() {
                if var_of[fid] != usize::MAX {
                    slots[n] = var_of[fid];
                    n += 1;
                }
            }
            if n > 0 {
                cones.push(slots);
            }
        }
        let mut counts = vec![0usize; active.len()];
        for k in &cones {
            for &v in k.iter().filter(|&&v| v != usize::MAX) {
                counts[v] += 1;
            }
        }
        let mut memb_start = vec![0; active.len() + 1];
        for v in 0..active.len() {
            memb_start[v + 1] = memb_start[v] + counts[v];
        }
        let mut fill = memb_start.clone();
        let mut memb = vec![(0, 0); memb_start[active.len()]];
        for (k, slots) in cones.iter().enumerate() {
            for (s, &v) in slots.iter().enumerate() {
                if v != usize::MAX {
                    memb[fill[v]] = (k, s);
                    fill[v] += 1;
                }
            }
        }
        let n = active.len();
        let m = cones.len();
        Self {
            mesh: mesh.clone(),
            active,
            c,
            scale,
            cones,
            memb_start,
            memb,
            f: vec![0.0; n],
            z: vec![[0.0; 2]; m],
            u: vec![[0.0; 2]; m],
            rho: 1.0,
        }
    }

    fn warm_start(&mut self, flux: &[f64]) {
        for (v, &id) in self.active.iter().enumerate() {
            self.f[v] = flux[id];
        }
        for (k, slots) in self.cones.iter().enumerate() {
            let mut p = [0.0; 2];
            for (s, &v) in slots.iter().enumerate() {
                if v != usize::MAX {
                    p[s] = self.f[v];
                }
            }
            self.z[k] = project_unit_ball(p);
        }
    }

    fn solve(mut self, opts: &TvhOptions, cap: usize) -> Result<TvhResult> {
        let n = self.active.len();
        let m = self.cones.len();
        let mut trace = Vec::new();
        let mut best = (f64::NEG_INFINITY, f64::INFINITY);
        let mut best_f = vec![0.0; n];
        let mut dz = vec![[0.0; 2]; m];
        let mut it = 0;
        while it < cap {
            it += 1;
            // f-update: diagonal normal equations.
            for v in 0..n {
                let mut acc = self.c[v] / self.rho;
                let range = self.memb_start[v]..self.memb_start[v + 1];
                for &(k, s) in &self.memb[range.clone()] {
                    acc += self.z[k][s] - self.u[k][s];
                }
                self.f[v] = acc / range.len() as f64;
            }
            // z- and u-updates with over-relaxation.
            let mut r2 = 0.0;
            for k in 0..m {
                let slots = self.cones[k];
                let mut xh = [0.0; 2];
                let mut pf = [0.0; 2];
                for s in 0..2 {
                    if slots[s] != usize::MAX {
                        pf[s] = self.f[slots[s]];
                        xh[s] = RELAXATION * pf[s] + (1.0 - RELAXATION) * self.z[k][s];
                    }
                }
                let znew = project_unit_ball([xh[0] + self.u[k][0], xh[1] + self.u[k][1]]);
                for s in 0..2 {
                    if slots[s] == usize::MAX {
                        continue;
                    }
                    dz[k][s] = znew[s] - self.z[k][s];
                    self.u[k][s] += xh[s] - znew[s];
                    r2 += (pf[s] - znew[s]).powi(2);
                }
                self.z[k] = znew;
            }

            if it % RHO_UPDATE_EVERY == 0 {
                let mut s2 = 0.0;
                for v in 0..n {
                    let d: f64 = self.memb[self.memb_start[v]..self.memb_start[v + 1]]
                        .iter()
                        .map(|&(k, s)| dz[k][s])
                        .sum();
                    s2 += d * d;
                }
                let (r, s) = (r2.sqrt(), self.rho * s2.sqrt());
                if r > 10.0 * s {
                    self.rescale_rho(2.0);
                } else if s > 10.0 * r {
                    self.rescale_rho(0.5);
                }
            }

            if it % opts.check_every.max(1) == 0 || it == cap {
                let (lo, up) = self.bounds();
                if lo > best.0 {
                    best.0 = lo;
                    best_f.copy_from_slice(&self.f);
                }
                best.1 = best.1.min(up);
                let gap = rel_gap(best.0, best.1);
                if opts.trace {
                    trace.push(TracePoint {
                        iteration: it,
                        lower: best.0 * self.scale,
                        upper: best.1 * self.scale,
                        rel_gap: gap,
                    });
                }
                if gap <= opts.tol {
                    break;
                }
            }
        }
        let gap = rel_gap(best.0, best.1);
        let (lower, upper) = (best.0 * self.scale, best.1 * self.scale);
        if gap > opts.tol {
            return Err(Error::NonConvergence { iterations: it, lower, upper });
        }
        let maximizer = self.maximizer(&best_f);
        Ok(TvhResult {
            value: lower,
            maximizer,
            certificate: TvhCertificate { lower, upper, rel_gap: gap },
            iterations: it,
            trace,
        })
    }

    /// Scaled-u convention: the unscaled multiplier `rho * u` is kept fixed.
    fn rescale_rho(&mut self, factor: f64) {
        self.rho *= factor;
        for u in &mut self.u {
            u[0] /= factor;
            u[1] /= factor;
        }
    }

    fn max_cone_norm(&self, f: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|slots| {
                slots
                    .iter()
                    .filter(|&&v| v != usize::MAX)
                    .map(|&v| f[v] * f[v])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Lower bound from the scaled primal, upper bound from the corrected dual.
    fn bounds(&self) -> (f64, f64) {
        let scale = self.max_cone_norm(&self.f).max(1.0);
        let lower = self.c.iter().zip(&self.f).map(|(c, f)| c * f).sum::<f64>() / scale;

        let mut y: Vec<[f64; 2]> = self.u.iter().map(|u| [self.rho * u[0], self.rho * u[1]]).collect();
        for v in 0..self.f.len() {
            let range = self.memb_start[v]..self.memb_start[v + 1];
            let sum: f64 = self.memb[range.clone()].iter().map(|&(k, s)| y[k][s]).sum();
            let fix = (self.c[v] - sum) / range.len() as f64;
            for &(k, s) in &self.memb[range] {
                y[k][s] += fix;
            }
        }
        let upper = self
            .cones
            .iter()
            .zip(&y)
            .map(|(slots, yk)| {
                let mut n2 = 0.0;
                for s in 0..2 {
                    if slots[s] != usize::MAX {
                        n2 += yk[s] * yk[s];
                    }
                }
                n2.sqrt()
            })
            .sum();
        (lower, upper)
    }

    fn maximizer(&self, f: &[f64]) -> RT0Field {
        let scale = self.max_cone_norm(f).max(1.0);
        let mut flux = vec![0.0; self.mesh.n_facets()];
        for (v, &id) in self.active.iter().enumerate() {
            flux[id] = f[v] / scale;
        }
        RT0Field::new(self.mesh.clone(), flux).expect("active facets are interior")
    }
}

fn project_unit_ball(p: [f64; 2]) -> [f64; 2] {
    let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
    if n > 1.0 {
        [p[0] / n, p[1] / n]
    } else {
        p
    }
}

fn rel_gap(lower: f64, upper: f64) -> f64 {
    if upper <= 0.0 {
        return if lower >= upper { 0.0 } else { f64::INFINITY };
    }
    ((upper - lower) / upper).max(0.0)
}
