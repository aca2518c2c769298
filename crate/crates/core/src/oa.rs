//! Outer approximation: alternate the integer master problem with the
//! `TV^h` separation problem, adding the maximizer's divergence as a cut
//! until the epigraph variable `V` covers `TV^h` of the incumbent.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::{l1_distance, tv_exact, LabelSet, P0Field};
use crate::milp::{build_mip, solve_mip, MipConfig, MipStatus};
use crate::mesh::MeshPair;
use crate::rt0::{divergence, RT0Field};
use crate::tvh::{tvh, tvh_warm, TvhCertificate, TvhOptions};

/// Smallest admissible `c` for a dimension.
pub fn min_c(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => std::f64::consts::SQRT_2,
        _ => 13.0 * 3f64.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OAConfig {
    pub alpha: f64,
    pub c: f64,
    pub max_iter: usize,
    /// Relative gap `(TV^h - V) / TV^h` accepted as converged.
    pub gap_tol: f64,
    pub mip: MipConfig,
    pub tvh: TvhOptions,
}

impl OAConfig {
    /// 25 iterations, gap 1e-3, MIP gap 1e-4, `TV^h` tolerance 1e-6.
    pub fn new(alpha: f64, c: f64) -> Self {
        Self {
            alpha,
            c,
            max_iter: 25,
            gap_tol: 1e-3,
            mip: MipConfig::default(),
            tvh: TvhOptions::default(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        // Small slack so that a rounded decimal like 1.41421356 is accepted.
        if !(self.c >= min_c(dim) - 1e-8) {
            return Err(Error::InvalidInput(format!("c = {} is below {} for d = {dim}", self.c, min_c(dim))));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Absolute slack of the optimality test `TV^h(w) - V <= 0`.
    pub fn opt_tol(&self, tvh_value: f64) -> f64 {
        self.tvh.tol * tvh_value.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Opt,
    Tol,
    MaxIter,
    MipTimeLimit,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Self::Opt => "Opt",
            Self::Tol => "Tol",
            Self::MaxIter => "MaxIter",
            Self::MipTimeLimit => "MipTime",
        }
    }
}

/// A cut `integral of w div(phi) <= V`, stored as `div(phi)` per coarse cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub div: Vec<f64>,
    pub iteration: usize,
}

impl Cut {
    pub fn from_field(phi: &RT0Field, iteration: usize) -> Self {
        Self { div: divergence(phi), iteration }
    }

    pub fn value(&self, w: &P0Field, pair: &MeshPair) -> f64 {
        let vol = pair.fine().cell_measure();
        w.values().iter().enumerate().map(|(q, &x)| x * self.div[pair.coarse_of(q)]).sum::<f64>() * vol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OAIteration {
    /// One-based iteration count.
    pub iteration: usize,
    pub objective: f64,
    pub tv: f64,
    pub tvh: f64,
    pub v: f64,
    pub gap: f64,
    /// `TV^h(w) - V` with the certified lower bound of `TV^h`.
    pub opt_test: f64,
    pub tvh_certificate: TvhCertificate,
    pub mip_status: MipStatus,
    pub mip_nodes: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OAState {
    pub config: OAConfig,
    pub cuts: Vec<Cut>,
    pub w: P0Field,
    pub v: f64,
    pub objective: f64,
    pub history: Vec<OAIteration>,
    pub termination: Termination,
    /// The incumbent equalled an earlier one, so its cut was already present.
    pub repeated_incumbent: bool,
    pub seconds: f64,
}

impl OAState {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn last(&self) -> &OAIteration {
        self.history.last().expect("at least one iteration")
    }

    /// Rows `c, Term., It., Obj. val., TV, TVh, V, Gap, Time`, one per
    /// iteration; the termination label is filled on the final row.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "c,Term.,It.,Obj. val.,TV,TVh,V,Gap,Time")?;
        let n = self.history.len();
        for (k, h) in self.history.iter().enumerate() {
            let term = if k + 1 == n { self.termination.label() } else { "" };
            writeln!(
                out,
                "{:?},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
                self.config.c, term, h.iteration, h.objective, h.tv, h.tvh, h.v, h.gap, h.seconds
            )?;
        }
        Ok(())
    }
}

/// Runs the cutting-plane loop on `data` (fine mesh of `pair`).
pub fn outer_approximation(data: &P0Field, labels: &LabelSet, pair: &MeshPair, cfg: &OAConfig) -> Result<OAState> {
    cfg.validate(pair.fine().dim())?;
    let start = Instant::now();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut history = Vec::new();
    let mut seen: Vec<Vec<i64>> = Vec::new();
    let mut warm_phi: Option<RT0Field> = None;
    let mut warm_w: Option<Vec<i64>> = None;
    loop {
        let k = history.len() + 1;
        let divs: Vec<Vec<f64>> = cuts.iter().map(|c| c.div.clone()).collect();
        let model = build_mip(data, labels, cfg.alpha, cfg.c, &divs, pair)?;
        let mip_cfg = MipConfig { warm_start: warm_w.clone(), ..cfg.mip.clone() };
        let sol = solve_mip(&model, &mip_cfg)?;
        let tv = tv_exact(&sol.w);
        let sep = tvh_warm(&sol.w, pair, &cfg.tvh, warm_phi.as_ref())?;
        let opt_test = sep.value - sol.v;
        let gap = if sep.value <= f64::EPSILON { 0.0 } else { (sep.value - sol.v) / sep.value };
        let repeated = seen.contains(&sol.labels);
        history.push(OAIteration {
            iteration: k,
            objective: sol.objective,
            tv,
            tvh: sep.value,
            v: sol.v,
            gap,
            opt_test,
            tvh_certificate: sep.certificate,
            mip_status: sol.status,
            mip_nodes: sol.nodes,
            seconds: start.elapsed().as_secs_f64(),
        });
        let term = if sol.status == MipStatus::TimeLimit {
            Some(Termination::MipTimeLimit)
        } else if opt_test <= cfg.opt_tol(sep.value) || repeated {
            Some(Termination::Opt)
        } else if gap <= cfg.gap_tol {
            Some(Termination::Tol)
        } else if k >= cfg.max_iter {
            Some(Termination::MaxIter)
        } else {
            None
        };
        if let Some(termination) = term {
            return Ok(OAState {
                config: cfg.clone(),
                cuts,
                w: sol.w,
                v: sol.v,
                objective: sol.objective,
                history,
                termination,
                repeated_incumbent: repeated,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        cuts.push(Cut::from_field(&sep.maximizer, k));
        seen.push(sol.labels.clone());
        warm_phi = Some(sep.maximizer);
        warm_w = Some(sol.labels);
    }
}

/// `F(w) + alpha max(TV(w)/c, TV^h(w))` with `F = ||w - data||_1`.
pub fn equivalent_value_check(
    w: &P0Field,
    data: &P0Field,
    alpha: f64,
    c: f64,
    pair: &MeshPair,
    opts: &TvhOptions,
) -> Result<f64> {
    if !w.is_label_certified() {
        return Err(Error::InvalidInput("equivalent value needs a label-valued field".into()));
    }
    let f = l1_distance(w, data)?;
    let th = tvh(w, pair, opts)?.value;
    Ok(f + alpha * (tv_exact(w) / c).max(th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh_pair, Domain};
    use rand::{Rng, SeedableRng};

    fn binary() -> LabelSet {
        LabelSet::new(vec![0, 1]).unwrap()
    }

    #[test]
    fn label_data_stops_immediately() {
        let pair = build_mesh_pair(Domain::unit(2).unwrap(), 2, 2).unwrap();
        let d = P0Field::constant(pair.fine().clone(), 1.0);
        let st = outer_approximation(&d, &binary(), &pair, &OAConfig::new(0.1, 2f64.sqrt())).unwrap();
        assert_eq!(st.termination, Termination::Opt);
        assert_eq!(st.iterations(), 1);
        assert_eq!(st.objective, 0.0);
        assert_eq!(st.v, 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)] // a truncated sqrt(2) must pass the tolerance
    fn config_validation() {
        let pair = build_mesh_pair(Domain::unit(2).unwrap(), 2, 1).unwrap();
        let d = P0Field::constant(pair.fine().clone(), 0.0);
        assert!(outer_approximation(&d, &binary(), &pair, &OAConfig::new(0.1, 1.2)).is_err());
        assert!(outer_approximation(&d, &binary(), &pair, &OAConfig::new(0.0, 2.0)).is_err());
        assert!(OAConfig::new(0.1, 1.41421356).validate(2).is_ok());
        assert!(OAConfig::new(0.1, 1.0).validate(1).is_ok());
    }

    #[test]
    fn random_instances_terminate_and_respect_invariants() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..8 {
            let pair = build_mesh_pair(Domain::unit(2).unwrap(), 3, 1).unwrap();
            let d = P0Field::new(pair.fine().clone(), (0..9).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
            let mut cfg = OAConfig::new(rng.gen_range(0.2..2.0), 2f64.sqrt());
            cfg.gap_tol = 0.0;
            cfg.max_iter = 100;
            cfg.mip.gap_tol = 0.0;
            let st = outer_approximation(&d, &binary(), &pair, &cfg).unwrap();
            assert_ne!(st.termination, Termination::MaxIter);
            // TV(w) <= c V holds as a model constraint
            assert!(tv_exact(&st.w) <= cfg.c * st.v + 1e-9);
            // master objectives never decrease as cuts accumulate
            assert!(st.history.windows(2).all(|p| p[1].objective >= p[0].objective - 1e-9));
            // every cut stays below TV^h of the final incumbent
            let th = tvh(&st.w, &pair, &cfg.tvh).unwrap().certificate.upper;
            assert!(st.cuts.iter().all(|c| c.value(&st.w, &pair) <= th + 1e-6));
            assert_eq!(st.cuts.len(), st.iterations() - 1);
        }
    }

    #[test]
    fn history_csv_columns() {
        let pair = build_mesh_pair(Domain::unit(2).unwrap(), 2, 1).unwrap();
        let d = P0Field::new(pair.fine().clone(), vec![0.9, 0.1, 0.8, 0.2]).unwrap();
        let st = outer_approximation(&d, &binary(), &pair, &OAConfig::new(0.05, 2f64.sqrt())).unwrap();
        let mut buf = Vec::new();
        st.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("c,Term.,It.,Obj. val.,TV,TVh,V,Gap,Time"));
        assert_eq!(text.lines().count(), st.iterations() + 1);
        assert!(text.lines().last().unwrap().contains(st.termination.label()));
    }

    #[test]
    fn equivalent_value_examples() {
        let pair = build_mesh_pair(Domain::unit(2).unwrap(), 2, 2).unwrap();
        let w = P0Field::from_labels(pair.fine().clone(), &[1; 16], binary()).unwrap();
        let opts = TvhOptions::default();
        assert_eq!(equivalent_value_check(&w, &w, 0.3, 2.0, &pair, &opts).unwrap(), 0.0);
        let labels: Vec<i64> = (0..16).map(|q| (q % 4 >= 2) as i64).collect();
        let w = P0Field::from_labels(pair.fine().clone(), &labels, binary()).unwrap();
        let d = P0Field::constant(pair.fine().clone(), 0.25);
        let f = l1_distance(&w, &d).unwrap();
        assert!(equivalent_value_check(&w, &d, 0.3, 2.0, &pair, &opts).unwrap() >= f);
        assert!(equivalent_value_check(&d, &d, 0.3, 2.0, &pair, &opts).is_err());
    }
}
