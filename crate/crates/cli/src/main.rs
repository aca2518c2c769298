use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use inttv::experiments::{
    denoise_sweep, phantom, read_pgm, tv_table_with, write_denoise_outputs, write_tv_table_csv, write_tv_table_gnuplot,
    write_tv_vs_c, DenoiseConfig,
};
use inttv::field::{l1_distance, tv_exact, LabelSet, P0Field};
use inttv::mesh::{build_mesh_pair, Domain, MeshPair};
use inttv::milp::{brute_force_oracle, build_mip, solve_mip, MipConfig, ORACLE_LIMIT};
use inttv::oa::{min_c, outer_approximation, OAConfig, Termination};
use inttv::tvh::{tvh, TvhOptions};
use inttv::Exec;

#[derive(Parser)]
#[command(name = "inttv", version, about = "Integer total-variation experiments")]
struct Cli {
    /// Run batches on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// TV, TV^tau and TV^h of the rounded shallow diagonal on coupled meshes.
    Tvtable(TvTableArgs),
    /// Denoise a gray image into integer labels by outer approximation.
    Denoise(DenoiseArgs),
    /// Cross-check the MILP (or the full cutting-plane loop) against enumeration.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct TvTableArgs {
    /// Comma-separated `h_inv:ratio` pairs.
    #[arg(long, default_value = "2:9,4:10,8:11")]
    levels: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    /// JSON run configuration; replaces the instance flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// PGM input (P2 or P5). Defaults to a synthetic phantom of matching size.
    #[arg(long)]
    image: Option<PathBuf>,
    /// `lo..hi` or a comma-separated list.
    #[arg(long, default_value = "0..5")]
    labels: String,
    #[arg(long, default_value_t = 0.005)]
    alpha: f64,
    /// One or more comma-separated constants; each gives an independent run.
    #[arg(long, value_delimiter = ',', default_value = "1.41421356")]
    c: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    h_inv: i64,
    #[arg(long, default_value_t = 4)]
    ratio: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-3)]
    gap_tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    mip_gap: f64,
    /// Seconds per MILP solve.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    tvh_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Fine grid as `NxM`.
    #[arg(long, default_value = "3x3")]
    grid: String,
    #[arg(long, default_value = "0,1")]
    labels: String,
    /// Fine cells per coarse cell and axis.
    #[arg(long, default_value_t = 1)]
    ratio: usize,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Check the whole cutting-plane loop against the equivalent problem.
    #[arg(long)]
    oa: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let res = match cli.command {
        Command::Tvtable(a) => run_tvtable(a, exec),
        Command::Denoise(a) => run_denoise(a, exec),
        Command::Oracle(a) => run_oracle(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_levels(s: &str) -> Result<Vec<(i64, usize)>> {
    s.split(',')
        .map(|p| {
            let (h, r) = p.trim().split_once(':').with_context(|| format!("level {p:?} is not h_inv:ratio"))?;
            Ok((h.trim().parse()?, r.trim().parse()?))
        })
        .collect()
}

fn run_tvtable(a: TvTableArgs, exec: Exec) -> Result<bool> {
    let levels = parse_levels(&a.levels)?;
    let rows = tv_table_with(&levels, &TvhOptions::with_tol(a.tol), exec)?;
    write_tv_table_csv(&rows, std::io::stdout().lock())?;
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir)?;
        write_tv_table_csv(&rows, fs::File::create(dir.join("table.csv"))?)?;
        write_tv_table_gnuplot("table.csv", fs::File::create(dir.join("table.gp"))?)?;
        fs::write(dir.join("table.json"), serde_json::to_string_pretty(&rows)?)?;
    }
    Ok(true)
}

fn denoise_config(a: &DenoiseArgs) -> Result<DenoiseConfig> {
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(serde_json::from_str(&text)?);
    }
    Ok(DenoiseConfig {
        image: a.image.as_ref().map(|p| p.display().to_string()),
        labels: LabelSet::parse(&a.labels)?.values().to_vec(),
        alpha: a.alpha,
        c: a.c.clone(),
        h_inv: a.h_inv,
        ratio: a.ratio,
        sigma: a.sigma,
        seed: a.seed,
        max_iter: a.max_iter,
        gap_tol: a.gap_tol,
        mip_gap: a.mip_gap,
        mip_time_limit_secs: a.time_limit,
        tvh_tol: a.tvh_tol,
    })
}

fn load_clean(cfg: &DenoiseConfig) -> Result<P0Field> {
    match &cfg.image {
        Some(path) => {
            let img = read_pgm(fs::File::open(path).with_context(|| format!("opening {path}"))?)?;
            let pair = cfg.mesh_pair(img.width, img.height)?;
            Ok(img.to_field(pair.fine())?)
        }
        None => Ok(phantom(cfg.h_inv * cfg.ratio as i64)?),
    }
}

fn run_denoise(a: DenoiseArgs, exec: Exec) -> Result<bool> {
    let cfg = denoise_config(&a)?;
    if cfg.c.is_empty() {
        bail!("no value of c given");
    }
    let clean = load_clean(&cfg)?;
    let runs = denoise_sweep(cfg.runs(&clean)?, exec)?;
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("run-config.json"), serde_json::to_string_pretty(&cfg)?)?;
    println!("c,Term.,It.,Obj. val.,TV,TVh,V,Gap,Time");
    for (k, run) in runs.iter().enumerate() {
        let dir = run_dir(&a.out, k, run.oa.c);
        write_denoise_outputs(run, Some(&cfg), &dir)?;
        let st = run.result.as_ref().expect("solved run");
        let last = st.last();
        println!(
            "{:.5},{},{},{:.6},{:.5},{:.5},{:.5},{:.3e},{:.2}",
            st.config.c,
            st.termination.label(),
            st.iterations(),
            st.objective,
            last.tv,
            last.tvh,
            st.v,
            last.gap,
            st.seconds
        );
    }
    write_tv_vs_c(&runs, &a.out)?;
    Ok(true)
}

fn run_dir(out: &Path, k: usize, c: f64) -> PathBuf {
    out.join(format!("run{k:02}_c{c:.4}"))
}

fn parse_grid(s: &str) -> Result<(i64, i64)> {
    let (x, y) = s.split_once(['x', 'X']).with_context(|| format!("grid {s:?} is not NxM"))?;
    Ok((x.trim().parse()?, y.trim().parse()?))
}

fn run_oracle(a: OracleArgs) -> Result<bool> {
    let (nx, ny) = parse_grid(&a.grid)?;
    let r = a.ratio as i64;
    if r < 1 || nx < 1 || ny < 1 || nx % r != 0 || ny % r != 0 {
        bail!("a {nx}x{ny} grid cannot be split into {r}x{r} blocks");
    }
    let pair = build_mesh_pair(Domain::rectangle(Rational64::from_integer(nx / r), Rational64::from_integer(ny / r))?, 1, a.ratio)?;
    let labels = LabelSet::parse(&a.labels)?;
    let n = pair.fine().n_cells() as u32;
    if (labels.len() as u64).checked_pow(n).is_none_or(|t| t > ORACLE_LIMIT) {
        bail!("{}^{n} candidates are too many to enumerate", labels.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (lo, hi) = (labels.min() as f64, labels.max() as f64);
    let mut worst = 0f64;
    let mut mismatches = 0;
    for t in 0..a.trials {
        let data: Vec<f64> = (0..n).map(|_| rng.gen_range(lo - 0.5..hi + 0.5)).collect();
        let data = P0Field::new(pair.fine().clone(), data)?;
        let alpha = rng.gen_range(0.05..2.0);
        let c = rng.gen_range(min_c(2)..4.0);
        let (got, want) = if a.oa {
            oa_trial(&data, &labels, alpha, c, &pair)?
        } else {
            let model = build_mip(&data, &labels, alpha, c, &[], &pair)?;
            let mip = solve_mip(&model, &MipConfig { gap_tol: 0.0, ..MipConfig::default() })?;
            (mip.objective, brute_force_oracle(&data, &labels, alpha, c, &[], &pair)?.objective)
        };
        let diff = (got - want).abs();
        worst = worst.max(diff);
        let tol = if a.oa { 1e-6 } else { 1e-8 };
        if diff > tol {
            mismatches += 1;
            println!("trial {t}: solver {got} vs enumeration {want}");
        }
    }
    println!("{} trials, {mismatches} mismatches, max difference {worst:.3e}", a.trials);
    Ok(mismatches == 0)
}

/// Cutting-plane objective and the enumerated minimum of
/// `F(w) + alpha max(TV(w)/c, TV^h(w))`.
fn oa_trial(data: &P0Field, labels: &LabelSet, alpha: f64, c: f64, pair: &MeshPair) -> Result<(f64, f64)> {
    let mut tight = TvhOptions::with_tol(1e-10);
    tight.max_iter = Some(1_000_000);
    let mut cfg = OAConfig::new(alpha, c);
    cfg.gap_tol = 0.0;
    cfg.max_iter = 1000;
    cfg.mip.gap_tol = 0.0;
    cfg.tvh = tight;
    let st = outer_approximation(data, labels, pair, &cfg)?;
    if st.termination != Termination::Opt {
        bail!("cutting-plane loop stopped with {:?}", st.termination);
    }
    let n = data.mesh().n_cells();
    let k = labels.len();
    let mut best = f64::INFINITY;
    let mut digits = vec![0usize; n];
    loop {
        let vals: Vec<i64> = digits.iter().map(|&d| labels.values()[d]).collect();
        let w = P0Field::from_labels(pair.fine().clone(), &vals, labels.clone())?;
        let th = tvh(&w, pair, &tight)?.value;
        best = best.min(l1_distance(&w, data)? + alpha * (tv_exact(&w) / c).max(th));
        let Some(pos) = digits.iter().position(|&d| d + 1 < k) else { break };
        digits[pos] += 1;
        digits[..pos].iter_mut().for_each(|d| *d = 0);
    }
    Ok((st.objective, best))
}
