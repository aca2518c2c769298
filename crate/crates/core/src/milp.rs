//! The integer master problem
//!
//! `min ||w - d||_1 + alpha V  s.t.  TV(w) <= c V,  cut_i(w) <= V,  w in W`
//!
//! over label-valued grid functions on the fine mesh, solved by best-first
//! branch and bound on top of [`crate::lp`]. Each cut is a divergence field
//! on the coarse mesh; `cut_i(w) = integral of w div(phi_i)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{l1_distance, tv_exact, LabelSet, P0Field};
use crate::lp::{Lp, LpStatus, Simplex};
use crate::mesh::MeshPair;

/// Brute-force enumeration limit on `|W|^cells`.
pub const ORACLE_LIMIT: u64 = 1 << 20;

const INT_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-7;
const REFRESH_EVERY: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct MipModel {
    pair: MeshPair,
    data: Vec<f64>,
    labels: LabelSet,
    alpha: f64,
    c: f64,
    /// Cut divergences per coarse cell.
    cuts: Vec<Vec<f64>>,
    /// Cut coefficients per fine cell, `div * tau^d`.
    cut_coef: Vec<Vec<f64>>,
    /// Interior fine facets as (minus cell, plus cell), axis-then-lattice order.
    facets: Vec<(usize, usize)>,
    cell_measure: f64,
    facet_measure: f64,
}

/// Validates inputs and assembles the model for `data` on `pair.fine()`.
pub fn build_mip(
    data: &P0Field,
    labels: &LabelSet,
    alpha: f64,
    c: f64,
    cuts: &[Vec<f64>],
    pair: &MeshPair,
) -> Result<MipModel> {
    if data.mesh() != pair.fine() {
        return Err(Error::DimensionMismatch("data must live on the fine mesh".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be nonnegative, got {alpha}")));
    }
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::InvalidInput(format!("c must be at least 1, got {c}")));
    }
    let nc = pair.coarse().n_cells();
    if let Some(bad) = cuts.iter().find(|k| k.len() != nc) {
        return Err(Error::DimensionMismatch(format!("cut with {} entries for {nc} coarse cells", bad.len())));
    }
    let fine = pair.fine();
    let cell_measure = fine.cell_measure();
    let cut_coef = cuts
        .iter()
        .map(|k| (0..fine.n_cells()).map(|q| k[pair.coarse_of(q)] * cell_measure).collect())
        .collect();
    let facets = fine.facets().filter_map(|f| Some((f.minus?, f.plus?))).collect();
    Ok(MipModel {
        pair: pair.clone(),
        data: data.values().to_vec(),
        labels: labels.clone(),
        alpha,
        c,
        cuts: cuts.to_vec(),
        cut_coef,
        facets,
        cell_measure,
        facet_measure: fine.facet_measure(),
    })
}

impl MipModel {
    pub fn pair(&self) -> &MeshPair {
        &self.pair
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn cuts(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    pub fn n_cells(&self) -> usize {
        self.data.len()
    }

    pub fn data_fit(&self, w: &[i64]) -> f64 {
        w.iter().zip(&self.data).map(|(&v, d)| (v as f64 - d).abs()).sum::<f64>() * self.cell_measure
    }

    pub fn tv(&self, w: &[i64]) -> f64 {
        self.facets.iter().map(|&(a, b)| (w[a] - w[b]).abs() as f64).sum::<f64>() * self.facet_measure
    }

    pub fn cut_value(&self, k: usize, w: &[i64]) -> f64 {
        self.cut_coef[k].iter().zip(w).map(|(a, &v)| a * v as f64).sum()
    }

    /// Smallest feasible `V` for fixed `w`.
    pub fn min_v(&self, w: &[i64]) -> f64 {
        let mut v = (self.tv(w) / self.c).max(0.0);
        for k in 0..self.cuts.len() {
            v = v.max(self.cut_value(k, w));
        }
        v
    }

    /// Objective with `V` at its smallest feasible value.
    pub fn objective(&self, w: &[i64]) -> f64 {
        self.data_fit(w) + self.alpha * self.min_v(w)
    }

    /// Extended formulation used by the solver: data fit and jumps are split
    /// into nonnegative parts, `w - p + n = d` and `w1 - w2 - a + b = 0`.
    /// `|w - d| >= slope w + rhs` through the two integers around a
    /// fractional datum `d` inside the label range.
    fn fit_secant(&self, q: usize) -> Option<(f64, f64)> {
        let d = self.data[q];
        let fl = d.floor();
        if fl == d || fl < self.labels.min() as f64 || fl + 1.0 > self.labels.max() as f64 {
            return None;
        }
        let slope = 2.0 * fl + 1.0 - 2.0 * d;
        Some((slope, (d - fl) - slope * fl))
    }

    fn split_lp(&self) -> (Lp, LpIndex) {
        let n = self.n_cells();
        let nf = self.facets.len();
        let vals = self.labels.values();
        let (lo, hi) = (self.labels.min() as f64, self.labels.max() as f64);
        let gapped = !self.labels.is_contiguous();
        let mut lp = Lp::default();
        let w: Vec<usize> = (0..n).map(|_| lp.add_col(0.0, lo, hi)).collect();
        let z: Vec<Vec<usize>> = if gapped {
            (0..n).map(|_| vals.iter().map(|_| lp.add_col(0.0, 0.0, 1.0)).collect()).collect()
        } else {
            Vec::new()
        };
        let p: Vec<usize> = (0..n).map(|_| lp.add_col(self.cell_measure, 0.0, f64::INFINITY)).collect();
        let m: Vec<usize> = (0..n).map(|_| lp.add_col(self.cell_measure, 0.0, f64::INFINITY)).collect();
        let a: Vec<usize> = (0..nf).map(|_| lp.add_col(0.0, 0.0, f64::INFINITY)).collect();
        let b: Vec<usize> = (0..nf).map(|_| lp.add_col(0.0, 0.0, f64::INFINITY)).collect();
        let v = lp.add_col(self.alpha, 0.0, f64::INFINITY);
        let s_tv = lp.add_col(0.0, 0.0, f64::INFINITY);
        let s_cut: Vec<usize> = (0..self.cuts.len()).map(|_| lp.add_col(0.0, 0.0, f64::INFINITY)).collect();

        for q in 0..n {
            lp.add_row(vec![(w[q], 1.0), (p[q], -1.0), (m[q], 1.0)], self.data[q]);
        }
        // Hull rows make the relaxed data term exact at the integers around
        // each datum, so the root LP is not fractional in every cell.
        for q in 0..n {
            if gapped {
                let sl = lp.add_col(0.0, 0.0, f64::INFINITY);
                let mut row = vec![(p[q], 1.0), (m[q], 1.0), (sl, -1.0)];
                row.extend(z[q].iter().zip(vals).map(|(&zc, &val)| (zc, -(val as f64 - self.data[q]).abs())));
                lp.add_row(row, 0.0);
            } else if let Some((slope, rhs)) = self.fit_secant(q) {
                let sl = lp.add_col(0.0, 0.0, f64::INFINITY);
                lp.add_row(vec![(p[q], 1.0), (m[q], 1.0), (w[q], -slope), (sl, -1.0)], rhs);
            }
        }
        for (f, &(c1, c2)) in self.facets.iter().enumerate() {
            lp.add_row(vec![(w[c1], 1.0), (w[c2], -1.0), (a[f], -1.0), (b[f], 1.0)], 0.0);
        }
        let mut tv_row: Vec<(usize, f64)> = Vec::with_capacity(2 * nf + 2);
        for f in 0..nf {
            tv_row.push((a[f], self.facet_measure));
            tv_row.push((b[f], self.facet_measure));
        }
        tv_row.push((v, -self.c));
        tv_row.push((s_tv, 1.0));
        lp.add_row(tv_row, 0.0);
        for (k, coef) in self.cut_coef.iter().enumerate() {
            let mut row: Vec<(usize, f64)> =
                coef.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(q, &a)| (w[q], a)).collect();
            row.push((v, -1.0));
            row.push((s_cut[k], 1.0));
            lp.add_row(row, 0.0);
        }
        if gapped {
            for q in 0..n {
                let mut link = vec![(w[q], 1.0)];
                link.extend(z[q].iter().zip(vals).map(|(&zc, &val)| (zc, -(val as f64))));
                lp.add_row(link, 0.0);
                lp.add_row(z[q].iter().map(|&zc| (zc, 1.0)).collect(), 1.0);
            }
        }
        let integer = if gapped { z.iter().flatten().copied().collect() } else { w.clone() };
        (lp, LpIndex { w, integer })
    }

    /// The model in CPLEX-LP format: `s`, `t`, `V` as in the problem
    /// statement, cells row-major, facets axis-then-lattice.
    pub fn write_lp<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.lp_string().as_bytes())?;
        Ok(())
    }

    pub fn lp_string(&self) -> String {
        let n = self.n_cells();
        let gapped = !self.labels.is_contiguous();
        let mut s = String::new();
        let term = |s: &mut String, coef: f64, name: &str| {
            if coef < 0.0 {
                let _ = write!(s, " - {} {name}", -coef);
            } else {
                let _ = write!(s, " + {coef} {name}");
            }
        };
        s.push_str("\\ integer total-variation master problem\nMinimize\n obj:");
        for q in 0..n {
            term(&mut s, self.cell_measure, &format!("s_{q}"));
        }
        term(&mut s, self.alpha, "V");
        s.push_str("\nSubject To\n");
        for q in 0..n {
            let _ = writeln!(s, " fit_pos_{q}: s_{q} - w_{q} >= {}", -self.data[q]);
            let _ = writeln!(s, " fit_neg_{q}: s_{q} + w_{q} >= {}", self.data[q]);
            if gapped {
                let _ = write!(s, " fit_hull_{q}: s_{q}");
                for &val in self.labels.values() {
                    term(&mut s, -(val as f64 - self.data[q]).abs(), &format!("z_{q}_{val}"));
                }
                s.push_str(" >= 0\n");
            } else if let Some((slope, rhs)) = self.fit_secant(q) {
                let _ = write!(s, " fit_hull_{q}: s_{q}");
                term(&mut s, -slope, &format!("w_{q}"));
                let _ = writeln!(s, " >= {rhs}");
            }
        }
        for (f, &(a, b)) in self.facets.iter().enumerate() {
            let _ = writeln!(s, " jump_pos_{f}: t_{f} - w_{a} + w_{b} >= 0");
            let _ = writeln!(s, " jump_neg_{f}: t_{f} + w_{a} - w_{b} >= 0");
        }
        s.push_str(" tv:");
        for f in 0..self.facets.len() {
            term(&mut s, self.facet_measure, &format!("t_{f}"));
        }
        term(&mut s, -self.c, "V");
        s.push_str(" <= 0\n");
        for (k, coef) in self.cut_coef.iter().enumerate() {
            let _ = write!(s, " cut_{k}:");
            for (q, &a) in coef.iter().enumerate() {
                if a != 0.0 {
                    term(&mut s, a, &format!("w_{q}"));
                }
            }
            term(&mut s, -1.0, "V");
            s.push_str(" <= 0\n");
        }
        if gapped {
            for q in 0..n {
                let _ = write!(s, " link_{q}: w_{q}");
                for &val in self.labels.values() {
                    term(&mut s, -(val as f64), &format!("z_{q}_{val}"));
                }
                s.push_str(" = 0\n");
                let _ = write!(s, " choose_{q}:");
                for &val in self.labels.values() {
                    term(&mut s, 1.0, &format!("z_{q}_{val}"));
                }
                s.push_str(" = 1\n");
            }
        }
        s.push_str("Bounds\n");
        for q in 0..n {
            let _ = writeln!(s, " {} <= w_{q} <= {}", self.labels.min(), self.labels.max());
        }
        s.push_str(" V >= 0\n");
        if gapped {
            s.push_str("Binaries\n");
            for q in 0..n {
                for &val in self.labels.values() {
                    let _ = writeln!(s, " z_{q}_{val}");
                }
            }
        } else {
            s.push_str("General\n");
            for q in 0..n {
                let _ = writeln!(s, " w_{q}");
            }
        }
        s.push_str("End\n");
        s
    }

    fn solution(&self, w: Vec<i64>, status: MipStatus, nodes: usize, best_bound: f64, log: Vec<MipLogEntry>) -> Result<MipSolution> {
        let v = self.min_v(&w);
        let objective = self.data_fit(&w) + self.alpha * v;
        let field = P0Field::from_labels(self.pair.fine().clone(), &w, self.labels.clone())?;
        Ok(MipSolution { w: field, labels: w, v, objective, status, nodes, best_bound, log })
    }
}

struct LpIndex {
    w: Vec<usize>,
    integer: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MipStatus {
    Optimal,
    /// Stopped by the node limit with this relative gap.
    Gap(f64),
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MipLogEntry {
    pub nodes: usize,
    pub best_bound: f64,
    pub incumbent: f64,
    pub gap: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub w: P0Field,
    pub labels: Vec<i64>,
    pub v: f64,
    pub objective: f64,
    pub status: MipStatus,
    pub nodes: usize,
    pub best_bound: f64,
    pub log: Vec<MipLogEntry>,
}

impl MipSolution {
    pub fn write_log_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nodes,best_bound,incumbent,gap,seconds")?;
        for e in &self.log {
            writeln!(out, "{},{:?},{:?},{:?},{:?}", e.nodes, e.best_bound, e.incumbent, e.gap, e.seconds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipConfig {
    /// Relative gap at which a node is pruned against the incumbent.
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Known feasible labels used as the first incumbent.
    pub warm_start: Option<Vec<i64>>,
    pub exec: Exec,
}

impl Default for MipConfig {
    fn default() -> Self {
        Self { gap_tol: 1e-4, time_limit: None, node_limit: None, warm_start: None, exec: Exec::default() }
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    bound: f64,
    /// Bound overrides (integer column, lower, upper) along the path from the root.
    fixes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Max-heap order: smallest bound first, then smallest id.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

fn rel_gap(bound: f64, incumbent: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1e-10)).max(0.0)
}

/// Best-first branch and bound.
pub fn solve_mip(model: &MipModel, cfg: &MipConfig) -> Result<MipSolution> {
    let start = Instant::now();
    let (lp, idx) = model.split_lp();
    let mut root = Simplex::new(&lp, cfg.exec);
    match root.solve_primal() {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("root relaxation infeasible".into())),
        st => return Err(Error::Infeasible(format!("root relaxation ended with {st:?}"))),
    }
    let root_bounds: Vec<(f64, f64)> = idx.integer.iter().map(|&j| root.bounds(j)).collect();
    let col_pos: std::collections::HashMap<usize, usize> =
        idx.integer.iter().enumerate().map(|(k, &j)| (j, k)).collect();

    let mut best_w: Option<Vec<i64>> = None;
    let mut best_obj = f64::INFINITY;
    let mut log = Vec::new();
    let consider = |w: Vec<i64>, best_w: &mut Option<Vec<i64>>, best_obj: &mut f64| {
        let obj = model.objective(&w);
        let better = obj < *best_obj - 1e-12 || (obj <= *best_obj + 1e-12 && best_w.as_ref().is_some_and(|b| w < *b));
        if better {
            *best_obj = obj;
            *best_w = Some(w);
            true
        } else {
            false
        }
    };
    if let Some(ws) = &cfg.warm_start {
        if ws.len() == model.n_cells() && ws.iter().all(|&v| model.labels.contains(v)) {
            consider(ws.clone(), &mut best_w, &mut best_obj);
        }
    }

    let prune_tol = |inc: f64| ABS_TOL.max(cfg.gap_tol * inc.abs());
    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, bound: root.objective(), fixes: Vec::new() });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut work = root.clone();
    let mut work_bounds = root_bounds.clone();
    let mut status = MipStatus::Optimal;

    while let Some(node) = heap.pop() {
        if node.bound >= best_obj - prune_tol(best_obj) {
            heap.clear();
            break;
        }
        if cfg.time_limit.is_some_and(|t| start.elapsed() >= t) {
            heap.push(node);
            status = MipStatus::TimeLimit;
            break;
        }
        if cfg.node_limit.is_some_and(|n| nodes >= n) {
            heap.push(node);
            status = MipStatus::Gap(0.0);
            break;
        }
        nodes += 1;
        if nodes.is_multiple_of(REFRESH_EVERY) {
            work = root.clone();
            work_bounds = root_bounds.clone();
        }
        let (st, x) = match solve_node(&mut work, &mut work_bounds, &root_bounds, &idx.integer, &col_pos, &node, &lp) {
            Some(r) => r,
            None => {
                work = root.clone();
                work_bounds = root_bounds.clone();
                solve_node(&mut work, &mut work_bounds, &root_bounds, &idx.integer, &col_pos, &node, &lp)
                    .ok_or_else(|| Error::Infeasible("node relaxation failed after refresh".into()))?
            }
        };
        if st == LpStatus::Infeasible {
            continue;
        }
        let bound = lp.objective(&x).max(node.bound);
        let wlp: Vec<f64> = idx.w.iter().map(|&j| x[j]).collect();
        let rounded: Vec<i64> = wlp.iter().map(|&v| model.labels.nearest(v)).collect();
        if consider(rounded, &mut best_w, &mut best_obj) {
            log.push(MipLogEntry {
                nodes,
                best_bound: bound.min(heap.peek().map_or(bound, |n| n.bound)),
                incumbent: best_obj,
                gap: rel_gap(bound, best_obj),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        if bound >= best_obj - prune_tol(best_obj) {
            continue;
        }
        // Most fractional integer column, lowest index on ties.
        let mut branch = None;
        let mut best_frac = INT_TOL;
        for (k, &j) in idx.integer.iter().enumerate() {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > best_frac + 1e-12 {
                best_frac = dist;
                branch = Some(k);
            }
        }
        let Some(k) = branch else {
            // Integral relaxation: its labels were just offered to the incumbent.
            continue;
        };
        let j = idx.integer[k];
        let (lo, hi) = current_bounds(&root_bounds, &col_pos, &node.fixes, j);
        let down = x[j].floor();
        let mut left = node.fixes.clone();
        left.push((j, lo, down));
        let mut right = node.fixes;
        right.push((j, down + 1.0, hi));
        heap.push(Node { id: next_id, bound, fixes: left });
        heap.push(Node { id: next_id + 1, bound, fixes: right });
        next_id += 2;
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let best_bound = open_bound.min(best_obj);
    let Some(w) = best_w else {
        return Err(Error::Infeasible("no feasible labeling found".into()));
    };
    if let MipStatus::Gap(_) = status {
        status = MipStatus::Gap(rel_gap(best_bound, best_obj));
    }
    log.push(MipLogEntry {
        nodes,
        best_bound,
        incumbent: best_obj,
        gap: rel_gap(best_bound, best_obj),
        seconds: start.elapsed().as_secs_f64(),
    });
    model.solution(w, status, nodes, best_bound, log)
}

fn current_bounds(
    root: &[(f64, f64)],
    col_pos: &std::collections::HashMap<usize, usize>,
    fixes: &[(usize, f64, f64)],
    j: usize,
) -> (f64, f64) {
    fixes
        .iter()
        .rev()
        .find(|f| f.0 == j)
        .map_or(root[col_pos[&j]], |f| (f.1, f.2))
}

/// Re-optimizes `work` for the node's bounds. `None` means numerical trouble.
fn solve_node(
    work: &mut Simplex,
    work_bounds: &mut [(f64, f64)],
    root_bounds: &[(f64, f64)],
    integer: &[usize],
    col_pos: &std::collections::HashMap<usize, usize>,
    node: &Node,
    lp: &Lp,
) -> Option<(LpStatus, Vec<f64>)> {
    let mut target = root_bounds.to_vec();
    for &(j, lo, hi) in &node.fixes {
        target[col_pos[&j]] = (lo, hi);
    }
    for (k, &j) in integer.iter().enumerate() {
        if target[k] != work_bounds[k] {
            work.set_bounds(j, target[k].0, target[k].1);
            work_bounds[k] = target[k];
        }
    }
    match work.solve_dual() {
        LpStatus::Optimal => {
            let x = work.x().to_vec();
            (lp.residual(&x) <= RESIDUAL_TOL).then_some((LpStatus::Optimal, x))
        }
        LpStatus::Infeasible => Some((LpStatus::Infeasible, Vec::new())),
        _ => None,
    }
}

/// Exhaustive minimizer of `F(w) + alpha max(TV(w)/c, max_i cut_i(w), 0)`,
/// first in lexicographic order among equal objectives.
pub fn brute_force_oracle(
    data: &P0Field,
    labels: &LabelSet,
    alpha: f64,
    c: f64,
    cuts: &[Vec<f64>],
    pair: &MeshPair,
) -> Result<MipSolution> {
    brute_force_oracle_with(data, labels, alpha, c, cuts, pair, Exec::default())
}

pub fn brute_force_oracle_with(
    data: &P0Field,
    labels: &LabelSet,
    alpha: f64,
    c: f64,
    cuts: &[Vec<f64>],
    pair: &MeshPair,
    exec: Exec,
) -> Result<MipSolution> {
    let model = build_mip(data, labels, alpha, c, cuts, pair)?;
    let n = data.mesh().n_cells();
    let k = labels.len() as u64;
    let total = (0..n).try_fold(1u64, |acc, _| acc.checked_mul(k).filter(|&t| t <= ORACLE_LIMIT));
    let Some(total) = total else {
        return Err(Error::TooLarge(format!("{k}^{n} candidates exceed {ORACLE_LIMIT}")));
    };
    let divs: Vec<Vec<f64>> = cuts.to_vec();
    let vol = pair.fine().cell_measure();
    let eval = |w: &P0Field| -> f64 {
        let f = l1_distance(w, data).expect("same mesh");
        let mut v = (tv_exact(w) / c).max(0.0);
        for d in &divs {
            let cut: f64 = w.values().iter().enumerate().map(|(q, &x)| x * d[pair.coarse_of(q)]).sum::<f64>() * vol;
            v = v.max(cut);
        }
        f + alpha * v
    };
    let decode = |mut code: u64| -> Vec<i64> {
        let mut w = vec![0i64; n];
        for q in (0..n).rev() {
            w[q] = labels.values()[(code % k) as usize];
            code /= k;
        }
        w
    };
    let chunk = 4096u64;
    let n_chunks = total.div_ceil(chunk) as usize;
    let best_per_chunk = exec.map_range(n_chunks, |ci| {
        let mut best = (f64::INFINITY, u64::MAX);
        let lo = ci as u64 * chunk;
        for code in lo..(lo + chunk).min(total) {
            let w = P0Field::new(data.mesh().clone(), decode(code).iter().map(|&v| v as f64).collect())
                .expect("cell count");
            let obj = eval(&w);
            if obj < best.0 {
                best = (obj, code);
            }
        }
        best
    });
    let (obj, code) = best_per_chunk
        .into_iter()
        .fold((f64::INFINITY, u64::MAX), |a, b| if b.0 < a.0 { b } else { a });
    let w = decode(code);
    let mut sol = model.solution(w, MipStatus::Optimal, total as usize, obj, Vec::new())?;
    sol.objective = obj;
    Ok(sol)
}
