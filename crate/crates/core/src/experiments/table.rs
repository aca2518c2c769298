use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{round_rw, tv_exact, AnalyticField, LabelSet};
use crate::mesh::{build_mesh_pair, Domain, MeshPair};
use crate::tvh::{tvh, TvhCertificate, TvhOptions};

/// Finest fine mesh on which `TV^tau` is still computed.
pub const TV_TAU_MAX: i64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvTableRow {
    pub h_inv: i64,
    pub ratio: usize,
    pub tau_inv: i64,
    /// `TV^tau(w^tau)`, skipped above [`TV_TAU_MAX`].
    pub tv_tau: Option<f64>,
    pub tv_h: f64,
    pub tv_exact_w_tau: f64,
    /// `TV` of the continuous indicator, `sqrt(10)/3`.
    pub tv_limit: f64,
    /// `TV(w^tau) / TV^h(w^tau)`.
    pub ratio_tv_over_tvh: f64,
    /// `(TV(w) - TV^h(w^tau)) h / tau`.
    pub scaled_error: f64,
    #[serde(skip)]
    pub tv_h_certificate: TvhCertificate,
}

/// One row per `(h_inv, ratio)`, rows solved via `Exec::default()`.
pub fn tv_table(levels: &[(i64, usize)], opts: &TvhOptions) -> Result<Vec<TvTableRow>> {
    tv_table_with(levels, opts, Exec::default())
}

pub fn tv_table_with(levels: &[(i64, usize)], opts: &TvhOptions, exec: Exec) -> Result<Vec<TvTableRow>> {
    for &(h_inv, ratio) in levels {
        let tau_inv = h_inv * ratio as i64;
        if h_inv < 1 || ratio < 1 || tau_inv > 4096 {
            return Err(Error::TooLarge(format!("level {h_inv}:{ratio} is outside the supported range")));
        }
    }
    exec.map_slice(levels, |&(h_inv, ratio)| row(h_inv, ratio, opts)).into_iter().collect()
}

fn row(h_inv: i64, ratio: usize, opts: &TvhOptions) -> Result<TvTableRow> {
    let pair = build_mesh_pair(Domain::unit(2)?, h_inv, ratio)?;
    let w = round_rw(&AnalyticField::shallow_diagonal(), pair.fine(), &LabelSet::new(vec![0, 1])?)?;
    let tau_inv = h_inv * ratio as i64;
    let tv_tau = if tau_inv <= TV_TAU_MAX {
        Some(tvh(&w, &MeshPair::identity(pair.fine().clone()), opts)?.value)
    } else {
        None
    };
    let th = tvh(&w, &pair, opts)?;
    let tv_w = tv_exact(&w);
    let tv_limit = 10f64.sqrt() / 3.0;
    Ok(TvTableRow {
        h_inv,
        ratio,
        tau_inv,
        tv_tau,
        tv_h: th.value,
        tv_exact_w_tau: tv_w,
        tv_limit,
        ratio_tv_over_tvh: tv_w / th.value,
        scaled_error: (tv_limit - th.value) * ratio as f64,
        tv_h_certificate: th.certificate,
    })
}

pub fn write_tv_table_csv<W: Write>(rows: &[TvTableRow], mut out: W) -> Result<()> {
    writeln!(out, "h_inv,tau_inv,tv_tau,tv_h,tv_w_tau,tv_limit,ratio,scaled_error,tv_h_upper")?;
    for r in rows {
        let tau = r.tv_tau.map(|v| format!("{v:.5}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{:.5},{:.5},{:.5},{:.5},{:.3e},{:.5}",
            r.h_inv,
            r.tau_inv,
            tau,
            r.tv_h,
            r.tv_exact_w_tau,
            r.tv_limit,
            r.ratio_tv_over_tvh,
            r.scaled_error,
            r.tv_h_certificate.upper
        )?;
    }
    Ok(())
}

/// Plots `TV^tau` and `TV^h` over `tau_inv` from `csv_name`.
pub fn write_tv_table_gnuplot<W: Write>(csv_name: &str, mut out: W) -> Result<()> {
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set key autotitle columnhead bottom right")?;
    writeln!(out, "set logscale x 2")?;
    writeln!(out, "set xlabel 'tau^{{-1}}'")?;
    writeln!(out, "plot '{csv_name}' using 2:3 with linespoints, \\")?;
    writeln!(out, "     '' using 2:4 with linespoints, \\")?;
    writeln!(out, "     '' using 2:6 with lines dashtype 2")?;
    Ok(())
}
