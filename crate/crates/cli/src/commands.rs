//! One function per subcommand. Each returns whether its internal assertions held.

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use jpsw_core::exact::{
    exact_stationarity_residual, find_cycle_fixed_points_with, verify_counterexample, CounterexampleReport,
    ExactOptions,
};
use jpsw_core::loynes::{forward_simulate, loynes_iterate_with, LoynesOptions};
use jpsw_core::scalar::{format_rational, Rational};
use jpsw_core::space::{cyclic_history, sample_replication};
use jpsw_core::stability::{
    check_jpsw_conditions, doubling_grid, estimate_loss_probability, tightness_probe, StabilityOptions,
};
use jpsw_core::zstat::{compute_zvector, ZVector};
use jpsw_core::{Model, OrderedProfile, PolicyMap};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{json_bytes, Sink};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    AssertionFailed,
}

pub const DEFAULT_HORIZON: usize = 1_000;
pub const DEFAULT_TRUNCATION: usize = 1_000;
pub const DEFAULT_LOSS_HORIZON: usize = 100_000;

pub fn simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let model = cfg.model()?;
    let policy = cfg.policy_or("jsw:2")?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let init = match &cfg.initial {
        Some(v) => OrderedProfile::new(v.clone()).context("field 'initial'")?,
        None => OrderedProfile::zeros(policy.dim()),
    };
    if init.dim() != policy.dim() {
        bail!("field 'initial' has {} coordinates but policy {policy} needs {}", init.dim(), policy.dim());
    }
    let path = model.forward_path(horizon, cfg.seed())?;
    let traj = forward_simulate(policy, &init, &path)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    sink.primary("trajectory.csv", &buf)?;
    if sink.to_dir() {
        let mut marks = Vec::new();
        path.write_csv(&mut marks)?;
        sink.file("marks.csv", &marks)?;
    }
    Ok(Status::Ok)
}

pub fn loynes(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let model = cfg.model()?;
    let policy = cfg.policy_or("jsw:2")?;
    let max_n = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let tol = cfg.tolerance.unwrap_or(match model {
        Model::Cyclic(_) => 0.0,
        Model::GiGi(_) => 1e-12,
    });
    let path = model.backward_path(max_n, cfg.seed())?;
    let result = loynes_iterate_with(policy, &path, LoynesOptions { max_n, tol, window: None })?;
    sink.primary("loynes.json", &json_bytes(&result)?)?;
    Ok(Status::Ok)
}

/// `Z^p` at one sample (cyclic) or on one replication (GI/GI).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZEntry {
    pub replication: usize,
    /// Sample index of the present on a cyclic space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub present: Option<i64>,
    /// `Z_1, …, Z_p` by name.
    pub z: BTreeMap<String, f64>,
    pub zvector: ZVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSummary {
    /// Coordinatewise mean of `(Z_p, …, Z_1)`.
    pub mean: Vec<f64>,
    pub fraction_zp_positive: f64,
    pub fraction_tail_bound_ok: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStatsReport {
    pub p: usize,
    pub truncation: usize,
    pub seed: u64,
    pub entries: Vec<ZEntry>,
    pub summary: ZSummary,
}

fn lag_from(cfg: &RunConfig) -> usize {
    cfg.p.unwrap_or(match cfg.policy {
        Some(PolicyMap::Gamma { p } | PolicyMap::Psi { p } | PolicyMap::Loss { p }) => p,
        Some(PolicyMap::Jpsw { p, .. } | PolicyMap::Phi { p, .. }) => p,
        _ => 1,
    })
}

pub fn zstats(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let model = cfg.model()?;
    let p = lag_from(cfg);
    let k = cfg.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let reps = cfg.replications.unwrap_or(1);
    let seed = cfg.seed();
    let start = cfg.start.unwrap_or(0);
    let mut entries = Vec::with_capacity(reps);
    for r in 0..reps {
        let (path, present) = match &model {
            Model::Cyclic(space) => {
                let present = start + r as i64;
                (cyclic_history(space, present, k)?, Some(present))
            }
            Model::GiGi(m) => (sample_replication(m, k, seed, r as u64)?.reindexed(-(k as i64)), None),
        };
        let zvector = compute_zvector(&path, p, k)?;
        let z = (1..=p).map(|ell| (format!("Z_{ell}"), zvector.z(ell))).collect();
        entries.push(ZEntry { replication: r, present, z, zvector });
    }
    let n = entries.len() as f64;
    let mean = (1..=p)
        .map(|i| entries.iter().map(|e| e.zvector.values.at(i)).sum::<f64>() / n)
        .collect();
    let summary = ZSummary {
        mean,
        fraction_zp_positive: entries.iter().filter(|e| e.zvector.z(p) > 0.0).count() as f64 / n,
        fraction_tail_bound_ok: entries.iter().filter(|e| e.zvector.tail_bound_ok).count() as f64 / n,
    };
    let report = ZStatsReport { p, truncation: k, seed, entries, summary };
    sink.primary("zstats.json", &json_bytes(&report)?)?;
    Ok(Status::Ok)
}

pub fn stability(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let model = cfg.model()?;
    let (servers, p) = cfg.servers_and_p()?;
    let defaults = StabilityOptions::default();
    let opts = StabilityOptions {
        replications: cfg.replications.unwrap_or(defaults.replications),
        truncation: cfg.truncation.unwrap_or(defaults.truncation),
        horizon: cfg.horizon.unwrap_or(defaults.horizon),
        burn_in: cfg.burn_in,
        seed: cfg.seed(),
    };
    let report = check_jpsw_conditions(&model, servers, p, &opts)?;
    sink.primary("stability.json", &json_bytes(&report)?)?;
    if sink.to_dir() {
        sink.file("stability.txt", report.table().as_bytes())?;
        let grid = cfg.horizons.clone().unwrap_or_else(|| doubling_grid(1_000, 6));
        let diag = tightness_probe(PolicyMap::jpsw(servers, p)?, &model, &grid, cfg.seed())?;
        sink.file("tightness.json", &json_bytes(&diag)?)?;
        sink.file("tightness.tsv", diag.to_tsv().as_bytes())?;
    }
    Ok(Status::Ok)
}

pub fn fixed_point(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let Model::Cyclic(space) = cfg.model()? else {
        bail!("field 'model': fixed-point needs a cyclic space");
    };
    let policy = cfg.policy_or("jpsw:2:1")?;
    let opts = ExactOptions { trace: cfg.trace.unwrap_or(false), ..ExactOptions::default() };
    let report = find_cycle_fixed_points_with(policy, &space, &opts)?;
    sink.primary("fixed_point.json", &json_bytes(&report)?)?;
    Ok(Status::Ok)
}

/// The counterexample pair plus the exact residual of every plain-policy
/// solution; parses back as a [`CounterexampleReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOutput {
    #[serde(flatten)]
    pub report: CounterexampleReport,
    pub jsw_residuals: Vec<String>,
    pub all_residuals_zero: bool,
}

pub fn counterexample(_cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let report = verify_counterexample()?;
    let residuals: Vec<Rational> = report
        .jsw
        .solutions
        .iter()
        .map(|s| exact_stationarity_residual(report.jsw.policy, &report.jsw.space, &s.orbit))
        .collect::<std::result::Result<_, _>>()?;
    let all_residuals_zero = !residuals.is_empty() && residuals.iter().all(Zero::is_zero);
    let ok = report.reproduced && all_residuals_zero;
    let out = CounterexampleOutput {
        report,
        jsw_residuals: residuals.iter().map(format_rational).collect(),
        all_residuals_zero,
    };
    sink.primary("counterexample.json", &json_bytes(&out)?)?;
    Ok(if ok { Status::Ok } else { Status::AssertionFailed })
}

pub fn loss(cfg: &RunConfig, sink: &mut Sink) -> Result<Status> {
    let model = cfg.model()?;
    let (p, policy_servers) = match cfg.policy {
        Some(PolicyMap::Loss { p }) => (p, None),
        Some(PolicyMap::Jpsw { servers, p }) => (p, Some(servers)),
        Some(other) => bail!("field 'policy': loss expects loss:p or jpsw:S:p, got {other}"),
        None => (1, None),
    };
    let p = cfg.p.unwrap_or(p);
    let servers = cfg.servers.or(policy_servers).unwrap_or(p + 1);
    let horizon = cfg.horizon.unwrap_or(DEFAULT_LOSS_HORIZON);
    let est = estimate_loss_probability(&model, p, servers, horizon, cfg.burn_in, cfg.seed())?;
    sink.primary("loss.json", &json_bytes(&est)?)?;
    Ok(Status::Ok)
}
