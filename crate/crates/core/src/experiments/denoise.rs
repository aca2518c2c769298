use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::image::{write_label_pgm, write_p0_csv, write_pgm, Pgm, PgmFormat};
use super::noise::{add_gaussian_noise, scale_to_labels};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{tv_exact, LabelSet, P0Field};
use crate::mesh::{build_mesh_pair, Domain, Mesh, MeshPair};
use crate::oa::{outer_approximation, OAConfig, OAState};

/// Serializable description of a denoising run, as read from and written to
/// run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseConfig {
    /// Input PGM; the built-in phantom is used when absent.
    #[serde(default)]
    pub image: Option<String>,
    pub labels: Vec<i64>,
    pub alpha: f64,
    pub c: Vec<f64>,
    pub h_inv: i64,
    pub ratio: usize,
    pub sigma: f64,
    pub seed: u64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_mip_gap")]
    pub mip_gap: f64,
    #[serde(default)]
    pub mip_time_limit_secs: Option<f64>,
    #[serde(default = "default_tvh_tol")]
    pub tvh_tol: f64,
}

fn default_max_iter() -> usize {
    25
}
fn default_gap_tol() -> f64 {
    1e-3
}
fn default_mip_gap() -> f64 {
    1e-4
}
fn default_tvh_tol() -> f64 {
    1e-6
}

impl DenoiseConfig {
    pub fn oa_config(&self, c: f64) -> OAConfig {
        let mut cfg = OAConfig::new(self.alpha, c);
        cfg.max_iter = self.max_iter;
        cfg.gap_tol = self.gap_tol;
        cfg.mip.gap_tol = self.mip_gap;
        cfg.mip.time_limit = self.mip_time_limit_secs.map(Duration::from_secs_f64);
        cfg.tvh.tol = self.tvh_tol;
        cfg
    }

    /// Mesh pair for a `width x height` image with `h_inv * ratio` pixels per unit length.
    pub fn mesh_pair(&self, width: usize, height: usize) -> Result<MeshPair> {
        if !width.is_multiple_of(self.ratio) || !height.is_multiple_of(self.ratio) {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} image is not divisible into {r}x{r} blocks",
                r = self.ratio
            )));
        }
        let n = self.h_inv * self.ratio as i64;
        let domain = Domain::rectangle(Rational64::new(width as i64, n), Rational64::new(height as i64, n))?;
        build_mesh_pair(domain, self.h_inv, self.ratio)
    }

    /// One run per entry of `c`, sharing the clean image.
    pub fn runs(&self, clean: &P0Field) -> Result<Vec<DenoiseRun>> {
        let pair = self.mesh_pair(clean.mesh().nx(), clean.mesh().ny())?;
        let labels = LabelSet::new(self.labels.clone())?;
        let clean = P0Field::new(pair.fine().clone(), clean.values().to_vec())?;
        Ok(self
            .c
            .iter()
            .map(|&c| DenoiseRun::new(clean.clone(), pair.clone(), labels.clone(), self.oa_config(c), self.sigma, self.seed))
            .collect())
    }
}

/// A denoising instance and, once run, its data and result.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseRun {
    /// Gray levels in `[0, 1]` on the fine mesh.
    pub clean: P0Field,
    pub pair: MeshPair,
    pub labels: LabelSet,
    pub oa: OAConfig,
    pub sigma: f64,
    pub seed: u64,
    /// Noisy image scaled to `[min W, max W]`.
    pub data: Option<P0Field>,
    /// Cells whose scaled noisy value fell outside the label range.
    pub clamped_cells: usize,
    pub result: Option<OAState>,
}

impl DenoiseRun {
    pub fn new(clean: P0Field, pair: MeshPair, labels: LabelSet, oa: OAConfig, sigma: f64, seed: u64) -> Self {
        Self { clean, pair, labels, oa, sigma, seed, data: None, clamped_cells: 0, result: None }
    }

    pub fn output(&self) -> Option<&P0Field> {
        self.result.as_ref().map(|r| &r.w)
    }
}

/// Adds noise, scales to the label range and runs outer approximation.
pub fn denoise(mut run: DenoiseRun) -> Result<DenoiseRun> {
    if run.clean.mesh() != run.pair.fine() {
        return Err(Error::DimensionMismatch("clean image is not on the fine mesh".into()));
    }
    if !(run.sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be non-negative, got {}", run.sigma)));
    }
    let noisy = add_gaussian_noise(&run.clean, run.sigma, run.seed);
    let (data, clamped) = scale_to_labels(&noisy, &run.labels);
    run.result = Some(outer_approximation(&data, &run.labels, &run.pair, &run.oa)?);
    run.data = Some(data);
    run.clamped_cells = clamped;
    Ok(run)
}

/// Independent runs in parallel; results keep input order.
pub fn denoise_sweep(runs: Vec<DenoiseRun>, exec: Exec) -> Result<Vec<DenoiseRun>> {
    exec.map_slice(&runs, |r| denoise(r.clone())).into_iter().collect()
}

fn solved(run: &DenoiseRun) -> Result<(&P0Field, &OAState)> {
    match (&run.data, &run.result) {
        (Some(d), Some(r)) => Ok((d, r)),
        _ => Err(Error::InvalidInput("run has not been solved".into())),
    }
}

fn is_feasible(st: &OAState) -> bool {
    tv_exact(&st.w) <= st.config.c * st.v * (1.0 + 1e-12) + 1e-12
}

/// Writes images, the iteration history, a gap plot script and a manifest
/// into `dir`.
pub fn write_denoise_outputs(run: &DenoiseRun, config: Option<&DenoiseConfig>, dir: &Path) -> Result<()> {
    let (data, st) = solved(run)?;
    fs::create_dir_all(dir)?;
    let (lo, hi) = (run.labels.min() as f64, run.labels.max() as f64);
    write_pgm(&Pgm::from_field(&run.clean, 0.0, 1.0, 255), PgmFormat::Binary, fs::File::create(dir.join("clean.pgm"))?)?;
    write_pgm(&Pgm::from_field(data, lo, hi, 255), PgmFormat::Binary, fs::File::create(dir.join("noisy.pgm"))?)?;
    write_p0_csv(data, fs::File::create(dir.join("data.csv"))?)?;
    write_label_pgm(&st.w, &dir.join("result.pgm"), PgmFormat::Binary)?;
    st.write_history_csv(fs::File::create(dir.join("history.csv"))?)?;
    let mut gp = fs::File::create(dir.join("gap.gp"))?;
    writeln!(gp, "set datafile separator ','")?;
    writeln!(gp, "set xlabel 'iteration'")?;
    writeln!(gp, "set ylabel '(TV^h - V) / TV^h'")?;
    writeln!(gp, "set logscale y")?;
    writeln!(gp, "plot 'history.csv' using 3:(abs($8)) with linespoints title 'gap'")?;

    let last = st.last();
    let manifest = json!({
        "config": config,
        "alpha": run.oa.alpha,
        "c": run.oa.c,
        "labels": run.labels.values(),
        "h_inv": run.pair.coarse().h_inv(),
        "ratio": run.pair.ratio(),
        "fine_cells": [run.pair.fine().nx(), run.pair.fine().ny()],
        "noise": {
            "sigma": run.sigma,
            "seed": run.seed,
            "generator": "ChaCha20, key = seed as little-endian u64, Box-Muller",
            "scaling": "gray + noise mapped affinely onto [min W, max W], then clamped",
            "clamped_cells": run.clamped_cells,
        },
        "result": {
            "termination": st.termination.label(),
            "iterations": st.iterations(),
            "objective": st.objective,
            "tv": last.tv,
            "tvh": last.tvh,
            "tvh_upper": last.tvh_certificate.upper,
            "v": st.v,
            "gap": last.gap,
            "opt_test": last.opt_test,
            "repeated_incumbent": st.repeated_incumbent,
            "feasible_tv_le_cv": is_feasible(st),
            "seconds": st.seconds,
        },
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Summary of a sweep over `c`: `tv_vs_c.csv` and a gnuplot script.
pub fn write_tv_vs_c(runs: &[DenoiseRun], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = fs::File::create(dir.join("tv_vs_c.csv"))?;
    writeln!(csv, "c,Term.,It.,Obj. val.,TV,TVh,V,Gap,feasible")?;
    for run in runs {
        let (_, st) = solved(run)?;
        let last = st.last();
        writeln!(
            csv,
            "{:?},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            st.config.c,
            st.termination.label(),
            st.iterations(),
            st.objective,
            last.tv,
            last.tvh,
            st.v,
            last.gap,
            is_feasible(st)
        )?;
    }
    let mut gp = fs::File::create(dir.join("tv_vs_c.gp"))?;
    writeln!(gp, "set datafile separator ','")?;
    writeln!(gp, "set key autotitle columnhead")?;
    writeln!(gp, "set logscale x")?;
    writeln!(gp, "set xlabel 'c'")?;
    writeln!(gp, "plot 'tv_vs_c.csv' using 1:5 with linespoints, '' using 1:6 with linespoints")?;
    Ok(())
}

/// Synthetic `n x n` gray image on the unit square with levels in steps of
/// 1/5: a dark band, a bright box, a disc and a small mid-gray square.
pub fn phantom(n: i64) -> Result<P0Field> {
    let mesh = Mesh::new(Domain::unit(2)?, n)?;
    let vals = (0..mesh.n_cells())
        .map(|c| {
            let [x, y] = mesh.cell_center(c);
            let disc = (x - 0.68).powi(2) + (y - 0.62).powi(2) <= 0.22f64.powi(2);
            if y < 0.12 {
                0.0
            } else if disc {
                1.0
            } else if (0.12..0.5).contains(&x) && (0.2..0.58).contains(&y) {
                0.8
            } else if (0.62..0.9).contains(&x) && (0.15..0.34).contains(&y) {
                0.6
            } else if x + y < 0.6 {
                0.4
            } else {
                0.2
            }
        })
        .collect();
    P0Field::new(mesh, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> DenoiseConfig {
        DenoiseConfig {
            image: None,
            labels: (0..=5).collect(),
            alpha: 0.005,
            c: vec![2f64.sqrt()],
            h_inv: 2,
            ratio: 2,
            sigma: 0.05,
            seed: 7,
            max_iter: 25,
            gap_tol: 1e-3,
            mip_gap: 1e-4,
            mip_time_limit_secs: None,
            tvh_tol: 1e-6,
        }
    }

    #[test]
    fn clean_label_image_is_returned_in_one_iteration() {
        let mut cfg = config();
        cfg.sigma = 0.0;
        cfg.alpha = 1e-6;
        let clean = phantom(4).unwrap();
        let run = denoise(cfg.runs(&clean).unwrap().remove(0)).unwrap();
        let st = run.result.as_ref().unwrap();
        assert_eq!(st.iterations(), 1);
        let expect: Vec<f64> = clean.values().iter().map(|g| (5.0 * g).round()).collect();
        assert_eq!(st.w.values(), &expect[..]);
        assert!(st.w.is_label_certified());
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config();
        cfg.c = vec![2f64.sqrt(), 9.0 * 2f64.sqrt()];
        let runs = denoise_sweep(cfg.runs(&phantom(4).unwrap()).unwrap(), Exec::default()).unwrap();
        for (k, r) in runs.iter().enumerate() {
            assert!(r.output().unwrap().is_label_certified());
            write_denoise_outputs(r, Some(&cfg), &dir.path().join(format!("run{k}"))).unwrap();
        }
        write_tv_vs_c(&runs, dir.path()).unwrap();
        for f in ["clean.pgm", "noisy.pgm", "data.csv", "result.pgm", "result.labels.json", "history.csv", "gap.gp"] {
            assert!(dir.path().join("run0").join(f).exists(), "{f}");
        }
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("run1/manifest.json")).unwrap()).unwrap();
        assert_eq!(m["result"]["feasible_tv_le_cv"], true);
        assert_eq!(m["config"]["seed"], 7);
        let back: DenoiseConfig = serde_json::from_value(m["config"].clone()).unwrap();
        assert_eq!(back, cfg);
        let csv = fs::read_to_string(dir.path().join("tv_vs_c.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn image_size_must_match_ratio() {
        let mut cfg = config();
        cfg.ratio = 3;
        assert!(cfg.runs(&phantom(4).unwrap()).is_err());
        assert!(cfg.mesh_pair(6, 3).is_ok());
    }
}
