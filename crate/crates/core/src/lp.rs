//! Dense-tableau bounded simplex.
//!
//! Problems are `min c.x  s.t.  A x = b,  l <= x <= u` with finite lower
//! bounds. The primal method (two phases, Dantzig pricing with a Bland
//! fallback against cycling) solves from a crash basis; the dual method
//! re-optimizes after bound changes, which keeps the basis dual feasible.

use crate::exec::Exec;

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_SWITCH: usize = 50;

/// Sparse-row linear program in equality form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lp {
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Lp {
    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        assert!(lower.is_finite(), "lower bounds must be finite");
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.n_cols += 1;
        self.n_cols - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// `max_i |A_i x - b_i|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| (r.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Working tableau `B^-1 [A | b]` with reduced costs and current point.
#[derive(Debug, Clone)]
pub struct Simplex {
    m: usize,
    /// Structural columns; artificials follow.
    n_struct: usize,
    width: usize,
    tab: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    exec: Exec,
    pub iterations: usize,
    pub max_iterations: usize,
}

impl Simplex {
    /// Builds the crash basis: a singleton column per row where one keeps
    /// the row feasible, an artificial otherwise.
    pub fn new(lp: &Lp, exec: Exec) -> Self {
        let m = lp.n_rows();
        let n = lp.n_cols;
        let mut col_rows = vec![0usize; n];
        for r in &lp.rows {
            for &(j, a) in r {
                if a != 0.0 {
                    col_rows[j] += 1;
                }
            }
        }
        let x0: Vec<f64> = lp.lower.clone();
        let mut basis = vec![usize::MAX; m];
        let mut used = vec![false; n];
        let mut row_sign = vec![1.0; m];
        let mut n_art = 0;
        let mut art_of_row = vec![usize::MAX; m];
        for (i, r) in lp.rows.iter().enumerate() {
            let act: f64 = r.iter().map(|&(j, a)| a * x0[j]).sum();
            let resid = lp.rhs[i] - act;
            // Singleton column whose move absorbs the residual within bounds.
            let pick = r.iter().find(|&&(j, a)| {
                if used[j] || col_rows[j] != 1 || a == 0.0 {
                    return false;
                }
                let v = x0[j] + resid / a;
                v >= lp.lower[j] - FEAS_TOL && v <= lp.upper[j] + FEAS_TOL
            });
            match pick {
                Some(&(j, _)) => {
                    basis[i] = j;
                    used[j] = true;
                }
                None => {
                    if resid < 0.0 {
                        row_sign[i] = -1.0;
                    }
                    art_of_row[i] = n + n_art;
                    n_art += 1;
                }
            }
        }
        let total = n + n_art;
        let width = total + 1;
        let mut tab = vec![0.0; m * width];
        for (i, r) in lp.rows.iter().enumerate() {
            let row = &mut tab[i * width..(i + 1) * width];
            for &(j, a) in r {
                row[j] += row_sign[i] * a;
            }
            row[total] = row_sign[i] * lp.rhs[i];
            if art_of_row[i] != usize::MAX {
                row[art_of_row[i]] = 1.0;
                basis[i] = art_of_row[i];
            }
            let p = row[basis[i]];
            if p != 1.0 {
                row.iter_mut().for_each(|v| *v /= p);
            }
        }
        let mut cost = lp.cost.clone();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        cost.resize(total, 0.0);
        lower.resize(total, 0.0);
        upper.resize(total, f64::INFINITY);
        let mut x = x0;
        x.resize(total, 0.0);
        let mut is_basic = vec![false; total];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut s = Self {
            m,
            n_struct: n,
            width,
            tab,
            d: vec![0.0; total],
            cost,
            lower,
            upper,
            x,
            basis,
            is_basic,
            exec,
            iterations: 0,
            max_iterations: 50_000 + 50 * (m + total),
        };
        s.recompute_basic_values();
        s
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    pub fn n_cols(&self) -> usize {
        self.n_struct
    }

    fn total(&self) -> usize {
        self.width - 1
    }

    fn n_art(&self) -> usize {
        self.total() - self.n_struct
    }

    /// Structural part of the current point.
    pub fn x(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    pub fn objective(&self) -> f64 {
        self.cost[..self.n_struct].iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.tab[i * self.width..(i + 1) * self.width]
    }

    /// `x_B = B^-1 b - sum over nonbasic of (B^-1 A_j) x_j`.
    fn recompute_basic_values(&mut self) {
        let total = self.total();
        for i in 0..self.m {
            let row = &self.tab[i * self.width..(i + 1) * self.width];
            let mut v = row[total];
            for j in 0..total {
                if !self.is_basic[j] && row[j] != 0.0 {
                    v -= row[j] * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn reset_reduced_costs(&mut self, cost: &[f64]) {
        let total = self.total();
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.width..i * self.width + total];
                for (dj, &t) in d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        self.d = d;
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width;
        let p = self.tab[r * w + j];
        for v in &mut self.tab[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.tab[r * w..(r + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&k| prow[k] != 0.0).collect();
        let update = |i: usize, row: &mut [f64]| {
            if i == r {
                return;
            }
            let f = row[j];
            if f != 0.0 {
                for &k in &nz {
                    row[k] -= f * prow[k];
                }
                row[j] = 0.0;
            }
        };
        if self.exec.is_parallel() && self.m * nz.len() > 1 << 16 {
            self.exec.for_each_chunk_mut(&mut self.tab, w, update);
        } else {
            for (i, row) in self.tab.chunks_mut(w).enumerate() {
                update(i, row);
            }
        }
        let dj = self.d[j];
        if dj != 0.0 {
            for &k in &nz {
                if k < w - 1 {
                    self.d[k] -= dj * prow[k];
                }
            }
            self.d[j] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
        self.iterations += 1;
    }

    /// Two-phase primal simplex from the crash basis.
    pub fn solve_primal(&mut self) -> LpStatus {
        let total = self.total();
        if self.n_art() > 0 {
            let mut c1 = vec![0.0; total];
            c1[self.n_struct..].iter_mut().for_each(|c| *c = 1.0);
            self.reset_reduced_costs(&c1);
            let st = self.primal_loop();
            if st != LpStatus::Optimal {
                return st;
            }
            let infeas: f64 = self.x[self.n_struct..].iter().sum();
            if infeas > 1e-7 {
                return LpStatus::Infeasible;
            }
            for j in self.n_struct..total {
                self.upper[j] = 0.0;
                if !self.is_basic[j] {
                    self.x[j] = 0.0;
                }
            }
            self.drive_out_artificials();
        }
        let cost = self.cost.clone();
        self.reset_reduced_costs(&cost);
        let st = self.primal_loop();
        self.recompute_basic_values();
        st
    }

    /// Pivots zero-valued artificials out of the basis where a structural
    /// column is available.
    fn drive_out_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.n_struct {
                continue;
            }
            let row = self.row(r);
            let pick = (0..self.n_struct)
                .filter(|&j| !self.is_basic[j] && row[j].abs() > 1e-7)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()).then(b.cmp(&a)));
            if let Some(j) = pick {
                // Degenerate pivot: the artificial is at 0, x_j keeps its value.
                self.pivot(r, j);
                self.recompute_basic_values();
            }
        }
    }

    fn primal_loop(&mut self) -> LpStatus {
        let total = self.total();
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..total {
                if self.is_basic[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let at_upper = self.x[j] >= self.upper[j];
                let score = if at_upper { self.d[j] } else { -self.d[j] };
                if score > OPT_TOL && (score > best || enter.is_none()) {
                    enter = Some(j);
                    best = score;
                    if bland {
                        break;
                    }
                }
            }
            let Some(j) = enter else { return LpStatus::Optimal };
            let sigma = if self.x[j] >= self.upper[j] { -1.0 } else { 1.0 };
            let mut t = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, f64)> = None;
            let mut best_piv = 0.0;
            for i in 0..self.m {
                let a = self.tab[i * self.width + j];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let rate = -sigma * a;
                let (lim, target) = if rate < 0.0 {
                    ((self.x[b] - self.lower[b]) / -rate, self.lower[b])
                } else if self.upper[b].is_finite() {
                    ((self.upper[b] - self.x[b]) / rate, self.upper[b])
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = lim < t - 1e-12
                    || (lim <= t + 1e-12 && leave.is_some() && {
                        if bland {
                            b < self.basis[leave.unwrap().0]
                        } else {
                            a.abs() > best_piv
                        }
                    });
                if better {
                    t = lim;
                    leave = Some((i, target));
                    best_piv = a.abs();
                }
            }
            if t.is_infinite() {
                return LpStatus::Unbounded;
            }
            degenerate = if t <= 1e-12 { degenerate + 1 } else { 0 };
            for i in 0..self.m {
                let a = self.tab[i * self.width + j];
                if a != 0.0 {
                    let b = self.basis[i];
                    self.x[b] -= sigma * t * a;
                }
            }
            self.x[j] += sigma * t;
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if sigma > 0.0 { self.upper[j] } else { self.lower[j] };
                    self.iterations += 1;
                }
                Some((r, target)) => {
                    let b = self.basis[r];
                    self.pivot(r, j);
                    self.x[b] = target;
                }
            }
        }
    }

    /// Changes the bounds of column `j`, keeping a nonbasic column on the
    /// same side. Follow with [`Simplex::solve_dual`].
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(lower.is_finite() && lower <= upper);
        let old = self.x[j];
        let at_upper = !self.is_basic[j] && self.x[j] >= self.upper[j] && self.upper[j] > self.lower[j];
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.is_basic[j] {
            return;
        }
        let new = if at_upper && upper.is_finite() { upper } else { lower };
        let delta = new - old;
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.tab[i * self.width + j];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
            self.x[j] = new;
        }
    }

    /// Dual simplex from a dual-feasible basis.
    pub fn solve_dual(&mut self) -> LpStatus {
        let total = self.total();
        let start = self.iterations;
        let mut stall = 0usize;
        let mut last_obj = f64::NEG_INFINITY;
        loop {
            if self.iterations >= self.max_iterations || self.iterations - start > 20 * (self.m + total) {
                return LpStatus::IterationLimit;
            }
            let bland = stall > DEGENERATE_SWITCH;
            let mut leave = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let b = self.basis[i];
                let v = self.x[b];
                let infeas = if v < self.lower[b] - FEAS_TOL {
                    self.lower[b] - v
                } else if v > self.upper[b] + FEAS_TOL {
                    v - self.upper[b]
                } else {
                    continue;
                };
                if leave.is_none() || (!bland && infeas > worst) {
                    leave = Some(i);
                    worst = infeas;
                    if bland {
                        break;
                    }
                }
            }
            let Some(r) = leave else {
                self.recompute_basic_values();
                return LpStatus::Optimal;
            };
            let b = self.basis[r];
            let below = self.x[b] < self.lower[b];
            let target = if below { self.lower[b] } else { self.upper[b] };
            let row = &self.tab[r * self.width..(r + 1) * self.width];
            let mut enter = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_piv = 0.0;
            for j in 0..total {
                if self.is_basic[j] || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = row[j];
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let at_upper = self.x[j] >= self.upper[j];
                // x_b moves by -a * dx_j; dx_j >= 0 at lower, <= 0 at upper.
                let ok = if below { (a < 0.0) != at_upper } else { (a > 0.0) != at_upper };
                if !ok {
                    continue;
                }
                let ratio = (self.d[j] / a).abs();
                let better = ratio < best_ratio - 1e-12
                    || (ratio <= best_ratio + 1e-12 && !bland && a.abs() > best_piv);
                if better {
                    best_ratio = ratio;
                    enter = Some(j);
                    best_piv = a.abs();
                }
            }
            let Some(j) = enter else { return LpStatus::Infeasible };
            let dx = (self.x[b] - target) / row[j];
            for i in 0..self.m {
                let a = self.tab[i * self.width + j];
                if a != 0.0 {
                    let bi = self.basis[i];
                    self.x[bi] -= a * dx;
                }
            }
            self.x[j] += dx;
            self.pivot(r, j);
            self.x[b] = target;
            let obj = self.objective();
            stall = if obj > last_obj + 1e-12 { 0 } else { stall + 1 };
            last_obj = obj;
        }
    }
}

/// Solves `lp` from scratch.
pub fn solve(lp: &Lp) -> (LpStatus, Vec<f64>, f64) {
    let mut s = Simplex::new(lp, Exec::Sequential);
    let st = s.solve_primal();
    let x = s.x().to_vec();
    let obj = lp.objective(&x);
    (st, x, obj)
}
