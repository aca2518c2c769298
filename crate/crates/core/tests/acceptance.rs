//! Acceptance suite. Every check writes one `PASS`/`FAIL` line to stderr
//! (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use inttv::exec::Exec;
use inttv::experiments::{denoise_sweep, phantom, tv_table, DenoiseConfig};
use inttv::field::{l1_distance, l1_to_analytic, project_p0, round_rw, tv_exact, tv_exact_rational, AnalyticField, LabelSet, P0Field};
use inttv::mesh::{build_mesh_pair, Domain, Mesh, MeshPair};
use inttv::milp::{brute_force_oracle, build_mip, solve_mip, MipConfig};
use inttv::oa::{outer_approximation, OAConfig, Termination};
use inttv::rt0::{divergence, interpolate_rt0, staircase_witness, RT0Field};
use inttv::tvh::{tvh, tvh_lower_witness, TvhOptions};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn report(id: u32, name: &str, failures: &[String], detail: &str) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "acceptance {id:02} {name}: {verdict} ({detail})");
    for f in failures.iter().take(10) {
        let _ = writeln!(err, "    {f}");
    }
    assert!(failures.is_empty(), "{name}: {} failure(s), first: {}", failures.len(), failures[0]);
}

fn q(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn labels(v: &[i64]) -> LabelSet {
    LabelSet::new(v.to_vec()).unwrap()
}

fn random_labels(rng: &mut ChaCha8Rng, k: usize) -> LabelSet {
    let mut vals: Vec<i64> = Vec::new();
    while vals.len() < k {
        let v = rng.gen_range(-3..7);
        if !vals.contains(&v) {
            vals.push(v);
        }
    }
    LabelSet::new(vals).unwrap()
}

fn random_label_field(rng: &mut ChaCha8Rng, mesh: &Mesh, w: &LabelSet) -> P0Field {
    let v: Vec<i64> = (0..mesh.n_cells()).map(|_| w.values()[rng.gen_range(0..w.len())]).collect();
    P0Field::from_labels(mesh.clone(), &v, w.clone()).unwrap()
}

/// Rectangle of `cx x cy` coarse cells of side `1/h_inv`, refined by `ratio`.
fn rect_pair(cx: i64, cy: i64, h_inv: i64, ratio: usize) -> MeshPair {
    build_mesh_pair(Domain::rectangle(q(cx, h_inv), q(cy, h_inv)).unwrap(), h_inv, ratio).unwrap()
}

#[test]
fn mesh_coupling_table() {
    let start = Instant::now();
    let reference = [
        ((2, 9), 0.97748, 0.36456, 1.22222),
        ((4, 10), 1.03118, 0.67116, 1.27500),
        ((8, 11), 1.05709, 0.86291, 1.30682),
    ];
    let levels: Vec<(i64, usize)> = reference.iter().map(|p| p.0).collect();
    let rows = tv_table(&levels, &TvhOptions::with_tol(1e-6)).unwrap();
    let tol = 5e-4;
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for (r, &((h, k), tau_ref, h_ref, tv_ref)) in rows.iter().zip(&reference) {
        let tv_tau = r.tv_tau.unwrap();
        detail.push(format!("{h}:{}: TVtau {tv_tau:.5} TVh {:.5} TV {:.5}", h * k as i64, r.tv_h, r.tv_exact_w_tau));
        for (what, got, want) in [("TV^tau", tv_tau, tau_ref), ("TV^h", r.tv_h, h_ref), ("TV", r.tv_exact_w_tau, tv_ref)] {
            if (got - want).abs() > tol {
                failures.push(format!("h^-1 = {h}, tau^-1 = {}: {what} = {got:.5}, reference {want:.5}", h * k as i64));
            }
        }
    }
    detail.push(format!("{:.1}s", start.elapsed().as_secs_f64()));
    report(1, "mesh-coupling table", &failures, &detail.join("; "));
}

#[test]
fn sharp_constant_diagonal() {
    let mut failures = Vec::new();
    for k in [2i64, 4, 8, 16] {
        let mesh = Mesh::new(Domain::unit(2).unwrap(), k).unwrap();
        let w = round_rw(&AnalyticField::steep_diagonal(), &mesh, &labels(&[0, 1])).unwrap();
        let tv = tv_exact_rational(&w).unwrap();
        if tv != q(2 * (k - 1), k) {
            failures.push(format!("k = {k}: TV = {tv}, expected {}", q(2 * (k - 1), k)));
        }
    }
    report(2, "rounded steep diagonal TV = 2(k-1)/k", &failures, "k in 2,4,8,16, exact rationals");
}

#[test]
fn staircase_lower_bound() {
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for k in 1..=3usize {
        let mesh = Mesh::new(Domain::rectangle(q(1, 1), q(2, 5)).unwrap(), 15 * k as i64).unwrap();
        let w = round_rw(&AnalyticField::shallow_diagonal(), &mesh, &labels(&[0, 1])).unwrap();
        let pair = MeshPair::identity(mesh.clone());
        let phi = staircase_witness(&mesh, k).unwrap();
        if !phi.is_feasible(1e-12) {
            failures.push(format!("k = {k}: witness infeasible, corner norm {}", phi.max_corner_norm()));
        }
        let expected = (1.0 + 5f64.sqrt()) / 3.0 + (SQRT2 - 1.0 - 5f64.sqrt()) / (15.0 * k as f64);
        let got = tvh_lower_witness(&w, &pair, &phi).unwrap();
        if (got - expected).abs() > 1e-12 {
            failures.push(format!("k = {k}: witness value {got}, closed form {expected}"));
        }
        let opts = TvhOptions::default();
        let solved = tvh(&w, &pair, &opts).unwrap().value;
        if solved < expected - opts.tol {
            failures.push(format!("k = {k}: TV^h = {solved} below witness {expected}"));
        }
        detail.push(format!("k={k}: {got:.12} vs {expected:.12}, TVh {solved:.8}"));
    }
    report(3, "staircase witness", &failures, &detail.join("; "));
}

#[test]
fn tvh_below_tv() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for t in 0..500 {
        let ratio = [1usize, 2, 3][rng.gen_range(0..3)];
        let max_c = 12 / ratio as i64;
        let (cx, cy) = (rng.gen_range(1..=max_c), rng.gen_range(1..=max_c));
        let pair = rect_pair(cx, cy, rng.gen_range(1..=3), ratio);
        let k = rng.gen_range(2..=4);
        let w_set = random_labels(&mut rng, k);
        let w = random_label_field(&mut rng, pair.fine(), &w_set);
        let th = tvh(&w, &pair, &TvhOptions::default()).unwrap().value;
        let tv = tv_exact(&w);
        worst = worst.max(th - tv);
        if th > tv + 1e-5 {
            failures.push(format!("instance {t}: TV^h = {th} > TV = {tv}"));
        }
    }
    report(4, "TV^h <= TV", &failures, &format!("500 fields, max TV^h - TV = {worst:.3e}"));
}

#[test]
fn divergence_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1f);
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for t in 0..1000 {
        let dim = if t % 4 == 0 { 1 } else { 2 };
        let h_inv = rng.gen_range(1..=5);
        let domain = if dim == 1 {
            Domain::new(vec![q(0, 1)], vec![q(rng.gen_range(1..=8), h_inv)]).unwrap()
        } else {
            Domain::rectangle(q(rng.gen_range(1..=8), h_inv), q(rng.gen_range(1..=8), h_inv)).unwrap()
        };
        let mesh = Mesh::new(domain, h_inv).unwrap();
        let flux: Vec<f64> = mesh
            .facets()
            .map(|f| if f.boundary { 0.0 } else { rng.gen_range(-3.0..3.0) })
            .collect();
        let raw = RT0Field::with_zero_boundary(mesh.clone(), flux).unwrap();
        let phi = raw.scaled(1.0 / raw.feasibility_scale());
        if !phi.is_feasible(1e-12) {
            failures.push(format!("field {t}: scaling left corner norm {}", phi.max_corner_norm()));
            continue;
        }
        let bound = 2.0 * dim as f64 / mesh.h();
        let max_div = divergence(&phi).into_iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        worst = worst.max(max_div / bound);
        if max_div > bound + 1e-12 {
            failures.push(format!("field {t}: max |div| = {max_div} > {bound}"));
        }
    }
    report(5, "|div phi| <= 2d/h", &failures, &format!("1000 fields, max |div| / bound = {worst:.4}"));
}

/// A field with the same coarse-cell sums: values permuted inside each coarse
/// cell, then pairs `(a, b)` with `b >= a + 2` moved to `(a + 1, b - 1)`.
fn same_means(rng: &mut ChaCha8Rng, w: &P0Field, pair: &MeshPair, w_set: &LabelSet) -> P0Field {
    let mut vals = w.integer_values().unwrap();
    for cc in 0..pair.coarse().n_cells() {
        let cells = pair.fine_cells_of(cc).unwrap();
        for i in (1..cells.len()).rev() {
            let j = rng.gen_range(0..=i);
            vals.swap(cells[i], cells[j]);
        }
        if rng.gen_bool(0.5) {
            for _ in 0..cells.len() {
                let (a, b) = (cells[rng.gen_range(0..cells.len())], cells[rng.gen_range(0..cells.len())]);
                if vals[b] >= vals[a] + 2 {
                    vals[a] += 1;
                    vals[b] -= 1;
                }
            }
        }
    }
    P0Field::from_labels(w.mesh().clone(), &vals, w_set.clone()).unwrap()
}

#[test]
fn null_space_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2e20);
    let opts = TvhOptions::default();
    let mut failures = Vec::new();
    let mut worst = 0f64;
    let mut changed = 0;
    for t in 0..100 {
        let ratio = rng.gen_range(2..=3);
        let pair = rect_pair(rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=2), ratio);
        let w_set = LabelSet::range(0, rng.gen_range(1..=3)).unwrap();
        let w = random_label_field(&mut rng, pair.fine(), &w_set);
        let v = same_means(&mut rng, &w, &pair, &w_set);
        if v != w {
            changed += 1;
        }
        let (a, b) = (tvh(&w, &pair, &opts).unwrap().value, tvh(&v, &pair, &opts).unwrap().value);
        worst = worst.max((a - b).abs());
        if (a - b).abs() > 2.0 * opts.tol {
            failures.push(format!("pair {t}: {a} vs {b}"));
        }
    }
    report(6, "equal coarse means give equal TV^h", &failures, &format!("100 pairs ({changed} distinct), max diff {worst:.3e}"));
}

struct HalfPlaneCase {
    w: AnalyticField,
    w_set: LabelSet,
    pair: MeshPair,
}

fn half_plane_cases() -> Vec<HalfPlaneCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4a1f);
    let mut out = Vec::new();
    while out.len() < 100 {
        let normal = [q(rng.gen_range(-9..=9), rng.gen_range(1..=9)), q(rng.gen_range(-9..=9), rng.gen_range(1..=9))];
        if normal[0] == q(0, 1) && normal[1] == q(0, 1) {
            continue;
        }
        let p = [q(rng.gen_range(1..20), 20), q(rng.gen_range(1..20), 20)];
        let offset = normal[0] * p[0] + normal[1] * p[1];
        let w_set = LabelSet::range(0, 3).unwrap();
        let inside = rng.gen_range(0..=3);
        let outside = (inside + rng.gen_range(1..=3)) % 4;
        let w = AnalyticField::half_plane(normal, offset, inside, outside).unwrap();
        let pair = build_mesh_pair(Domain::unit(2).unwrap(), rng.gen_range(1..=4), rng.gen_range(1..=4)).unwrap();
        out.push(HalfPlaneCase { w, w_set, pair });
    }
    out
}

#[test]
fn projection_and_rounding_error() {
    let d_sqrt = SQRT2;
    let mut failures = Vec::new();
    let (mut worst_p, mut worst_r) = (0f64, 0f64);
    for (t, c) in half_plane_cases().iter().enumerate() {
        let fine = c.pair.fine();
        let tau = fine.h();
        let tv = c.w.total_variation(fine).unwrap();
        let proj = l1_to_analytic(&c.w, &project_p0(&c.w, fine).unwrap()).unwrap();
        let round = l1_to_analytic(&c.w, &round_rw(&c.w, fine, &c.w_set).unwrap()).unwrap();
        let (bp, br) = (d_sqrt * tau * tv, 2.0 * d_sqrt * tau * tv);
        if bp > 0.0 {
            worst_p = worst_p.max(proj / bp);
            worst_r = worst_r.max(round / br);
        }
        // the slack only absorbs the final rounding of the L1 sums
        if proj > bp + 1e-12 {
            failures.push(format!("case {t}: projection error {proj} > {bp}"));
        }
        if round > br + 1e-12 {
            failures.push(format!("case {t}: rounding error {round} > {br}"));
        }
    }
    let detail = format!("100 half-planes, max ratios {worst_p:.3} / {worst_r:.3}");
    report(7, "projection and rounding L1 bounds", &failures, &detail);
}

#[test]
fn rounded_tvh_bound() {
    let d = 2.0;
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (t, c) in half_plane_cases().iter().enumerate() {
        let fine = c.pair.fine();
        let tau = fine.h();
        let h = c.pair.coarse().h();
        let tv = c.w.total_variation(fine).unwrap();
        let r = round_rw(&c.w, fine, &c.w_set).unwrap();
        let th = tvh(&r, &c.pair, &TvhOptions::default()).unwrap().value;
        let bound = tv + SQRT2 * tv * 2.0 * d * tau / h + 1e-5;
        worst = worst.max(th - bound);
        if th > bound {
            failures.push(format!("case {t}: TV^h = {th} > {bound}"));
        }
    }
    report(8, "TV^h of rounded field", &failures, &format!("100 half-planes, max excess {worst:.3e}"));
}

/// `sum c[a][b] x^a y^b` for `a + b <= 3`.
struct Poly([[f64; 4]; 4]);

impl Poly {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut c = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 - a {
                c[a][b] = rng.gen_range(-2.0..2.0);
            }
        }
        Self(c)
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += self.0[a][b] * x.powi(a as i32) * y.powi(b as i32);
            }
        }
        s
    }

    fn d(&self, axis: usize) -> Self {
        let mut c = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                let (k, src) = if axis == 0 { (a + 1, (a + 1, b)) } else { (b + 1, (a, b + 1)) };
                if src.0 < 4 && src.1 < 4 {
                    c[a][b] = k as f64 * self.0[src.0][src.1];
                }
            }
        }
        Self(c)
    }

    /// Exact integral over a rectangle, monomial by monomial.
    fn integral(&self, x: (f64, f64), y: (f64, f64)) -> f64 {
        let prim = |lo: f64, hi: f64, k: usize| (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / (k + 1) as f64;
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += self.0[a][b] * prim(x.0, x.1, a) * prim(y.0, y.1, b);
            }
        }
        s
    }
}

#[test]
fn commuting_interpolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut failures = Vec::new();
    let mut worst = 0f64;
    for t in 0..20 {
        let h_inv = rng.gen_range(1..=6);
        let mesh = Mesh::new(Domain::rectangle(q(rng.gen_range(1..=6), h_inv), q(rng.gen_range(1..=6), h_inv)).unwrap(), h_inv).unwrap();
        let (p, r) = (Poly::random(&mut rng), Poly::random(&mut rng));
        let phi = interpolate_rt0(&|x: [f64; 2]| [p.eval(x[0], x[1]), r.eval(x[0], x[1])], &mesh);
        let div = divergence(&phi);
        let (px, ry) = (p.d(0), r.d(1));
        for (cell, dv) in div.iter().enumerate() {
            let b = mesh.cell_bounds(cell);
            let xs = (inttv::mesh::rat_to_f64(&b[0].0), inttv::mesh::rat_to_f64(&b[0].1));
            let ys = (inttv::mesh::rat_to_f64(&b[1].0), inttv::mesh::rat_to_f64(&b[1].1));
            let mean = (px.integral(xs, ys) + ry.integral(xs, ys)) / mesh.cell_measure();
            worst = worst.max((dv - mean).abs());
            if (dv - mean).abs() > 1e-10 {
                failures.push(format!("field {t}, cell {cell}: div {dv} vs mean {mean}"));
            }
        }
    }
    report(9, "div of interpolant = mean of div", &failures, &format!("20 cubic fields, max error {worst:.2e}"));
}

fn random_cuts(rng: &mut ChaCha8Rng, coarse: &Mesh) -> Vec<Vec<f64>> {
    (0..rng.gen_range(0..=3))
        .map(|_| {
            let flux = coarse.facets().map(|f| if f.boundary { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            let phi = RT0Field::with_zero_boundary(coarse.clone(), flux).unwrap();
            divergence(&phi.scaled(1.0 / phi.feasibility_scale()))
        })
        .collect()
}

#[test]
fn milp_matches_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x3111);
    let mut failures = Vec::new();
    let mut worst = 0f64;
    for t in 0..200 {
        let (pair, w_set) = if t < 150 {
            let (nx, ny) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
            let pair = if nx == ny && nx > 1 && rng.gen_bool(0.3) { rect_pair(1, 1, 1, nx as usize) } else { rect_pair(nx, ny, 1, 1) };
            (pair, random_labels(&mut rng, 2))
        } else {
            let pair = if rng.gen_bool(0.5) { rect_pair(2, 2, 2, 1) } else { rect_pair(1, 1, 1, 2) };
            (pair, random_labels(&mut rng, 3))
        };
        let (lo, hi) = (w_set.min() as f64, w_set.max() as f64);
        let data: Vec<f64> = (0..pair.fine().n_cells()).map(|_| rng.gen_range(lo - 0.5..hi + 0.5)).collect();
        let data = P0Field::new(pair.fine().clone(), data).unwrap();
        let alpha = if t % 10 == 0 { 0.0 } else { rng.gen_range(0.0..2.0) };
        let c = rng.gen_range(1.0..4.0);
        let cuts = random_cuts(&mut rng, pair.coarse());
        let model = build_mip(&data, &w_set, alpha, c, &cuts, &pair).unwrap();
        let cfg = MipConfig { gap_tol: 0.0, ..MipConfig::default() };
        let mip = solve_mip(&model, &cfg).unwrap();
        let oracle = brute_force_oracle(&data, &w_set, alpha, c, &cuts, &pair).unwrap();
        let diff = (mip.objective - oracle.objective).abs();
        worst = worst.max(diff);
        if diff > 1e-8 {
            failures.push(format!("instance {t}: MILP {} vs enumeration {}", mip.objective, oracle.objective));
        }
    }
    let detail = format!("200 instances, max diff {worst:.2e}, {:.1}s", start.elapsed().as_secs_f64());
    report(10, "MILP vs enumeration", &failures, &detail);
}

#[test]
fn outer_approximation_matches_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0a0a);
    let w_set = labels(&[0, 1]);
    let mut tight = TvhOptions::with_tol(1e-10);
    tight.max_iter = Some(1_000_000);
    let mut failures = Vec::new();
    let (mut n_opt, mut worst, mut max_it) = (0, 0f64, 0);
    for t in 0..50 {
        let pair = if t % 5 == 4 { rect_pair(1, 1, 1, 3) } else { rect_pair(3, 3, 3, 1) };
        let data: Vec<f64> = (0..9).map(|_| rng.gen_range(0.0..1.0)).collect();
        let data = P0Field::new(pair.fine().clone(), data).unwrap();
        let alpha = rng.gen_range(0.05..1.0);
        let c = if rng.gen_bool(0.5) { SQRT2 } else { rng.gen_range(SQRT2..3.0) };

        let mut best = f64::INFINITY;
        for bits in 0u32..512 {
            let v: Vec<i64> = (0..9).map(|k| ((bits >> k) & 1) as i64).collect();
            let w = P0Field::from_labels(pair.fine().clone(), &v, w_set.clone()).unwrap();
            let th = tvh(&w, &pair, &tight).unwrap().value;
            let val = l1_distance(&w, &data).unwrap() + alpha * (tv_exact(&w) / c).max(th);
            best = best.min(val);
        }

        let mut cfg = OAConfig::new(alpha, c);
        cfg.gap_tol = 0.0;
        cfg.max_iter = 1000;
        cfg.mip.gap_tol = 0.0;
        cfg.tvh = tight;
        let st = outer_approximation(&data, &w_set, &pair, &cfg).unwrap();
        max_it = max_it.max(st.iterations());
        match st.termination {
            Termination::Opt => {
                n_opt += 1;
                let diff = (st.objective - best).abs();
                worst = worst.max(diff);
                if diff > 1e-6 {
                    failures.push(format!("instance {t}: OA {} vs enumeration {best}", st.objective));
                }
            }
            other => failures.push(format!("instance {t}: stopped with {other:?} after {} iterations", st.iterations())),
        }
    }
    let detail = format!(
        "50 instances, {n_opt} Opt, max iterations {max_it}, max diff {worst:.2e}, {:.1}s",
        start.elapsed().as_secs_f64()
    );
    report(11, "outer approximation vs enumeration", &failures, &detail);
}

#[test]
fn denoising_regression() {
    let start = Instant::now();
    let cfg = DenoiseConfig {
        image: None,
        labels: (0..=5).collect(),
        alpha: 0.005,
        c: vec![SQRT2, 9.0 * SQRT2],
        h_inv: 4,
        ratio: 4,
        sigma: 0.05,
        seed: 7,
        max_iter: 25,
        gap_tol: 1e-3,
        mip_gap: 1e-4,
        mip_time_limit_secs: None,
        tvh_tol: 1e-6,
    };
    let clean = phantom(16).unwrap();
    let first = denoise_sweep(cfg.runs(&clean).unwrap(), Exec::Parallel).unwrap();
    let mut seq_runs = cfg.runs(&clean).unwrap();
    for r in &mut seq_runs {
        r.oa.mip.exec = Exec::Sequential;
    }
    let second = denoise_sweep(seq_runs, Exec::Sequential).unwrap();

    let mut failures = Vec::new();
    let mut detail = Vec::new();
    // values of the first recorded run
    let recorded = [(0.200663661259884, 13.5), (0.18064037704638047, 14.25)];
    for ((a, b), (obj_ref, tv_ref)) in first.iter().zip(&second).zip(recorded) {
        let (sa, sb) = (a.result.as_ref().unwrap(), b.result.as_ref().unwrap());
        let (la, lb) = (sa.last(), sb.last());
        let bits = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let ka = bits(&[sa.objective, la.tv, la.tvh, sa.v, la.gap]);
        let kb = bits(&[sb.objective, lb.tv, lb.tvh, sb.v, lb.gap]);
        if ka != kb || sa.w != sb.w {
            failures.push(format!("c = {}: runs differ", sa.config.c));
        }
        if (sa.objective - obj_ref).abs() > 1e-9 * obj_ref || la.tv != tv_ref {
            failures.push(format!("c = {}: objective {} / TV {} drifted from {obj_ref} / {tv_ref}", sa.config.c, sa.objective, la.tv));
        }
        if !sa.w.is_label_certified() || tv_exact(&sa.w) > sa.config.c * sa.v + 1e-9 {
            failures.push(format!("c = {}: output not a feasible label field", sa.config.c));
        }
        detail.push(format!(
            "c={:.4}: {} it={} obj={:.6} TV={} TVh={:.5} V={:.5} gap={:.2e}",
            sa.config.c,
            sa.termination.label(),
            sa.iterations(),
            sa.objective,
            la.tv,
            la.tvh,
            sa.v,
            la.gap
        ));
    }
    let (tv_small, tv_large) = (tv_exact(first[0].output().unwrap()), tv_exact(first[1].output().unwrap()));
    if tv_small > tv_large {
        failures.push(format!("TV at c = sqrt2 is {tv_small} > {tv_large} at c = 9 sqrt2"));
    }
    detail.push(format!("{:.1}s", start.elapsed().as_secs_f64()));
    report(12, "16x16 denoising regression", &failures, &detail.join("; "));
}
