//! Load conditions, Monte Carlo estimates of `P(Z_p > 0)` and of the loss
//! probability, and a tightness probe for forward trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PolicyMap;
use crate::profile::OrderedProfile;
use crate::scalar::{format_rational, rational_to_f64, Rational};
use crate::space::{cyclic_history, sample_replication, FiniteCyclicSpace, GiGiModel, Model};
use crate::zstat::ZScanner;

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Student quantile `t_{0.975}` with 19 degrees of freedom (20 batch means).
const T95_19: f64 = 2.093_024_054_408_263;
const BATCHES: usize = 20;

/// `lhs < rhs`, with `margin = rhs − lhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
    /// Margin as an exact fraction when the inputs are exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_margin: Option<String>,
}

impl ConditionCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        ConditionCheck { lhs, rhs, margin: rhs - lhs, holds: lhs < rhs, exact_margin: None }
    }

    fn exact(lhs: Rational, rhs: Rational) -> Self {
        let margin = &rhs - &lhs;
        ConditionCheck {
            lhs: rational_to_f64(&lhs),
            rhs: rational_to_f64(&rhs),
            margin: rational_to_f64(&margin),
            holds: lhs < rhs,
            exact_margin: Some(format_rational(&margin)),
        }
    }
}

/// Proportion estimate with a 95% half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: f64,
    pub samples: usize,
}

impl Estimate {
    fn binomial(successes: usize, n: usize) -> Self {
        let value = successes as f64 / n as f64;
        Estimate { value, half_width: Z95 * (value * (1.0 - value) / n as f64).sqrt(), samples: n }
    }

    fn exact(value: f64, n: usize) -> Self {
        Estimate { value, half_width: 0.0, samples: n }
    }
}

fn check_servers(servers: usize) -> Result<()> {
    if servers == 0 {
        return Err(Error::OutOfRange("the number of servers must be >= 1".into()));
    }
    Ok(())
}

/// `Eσ < S·Eτ`, exactly on cyclic spaces.
pub fn check_jsw_condition(model: &Model, servers: usize) -> Result<ConditionCheck> {
    check_servers(servers)?;
    Ok(match model {
        Model::Cyclic(space) => {
            let s = Rational::from_integer((servers as i64).into());
            ConditionCheck::exact(space.exact_mean_sigma(), s * space.exact_mean_tau())
        }
        Model::GiGi(m) => ConditionCheck::new(m.mean_sigma(), servers as f64 * m.mean_tau()),
    })
}

/// `Eσ·P(Z_p>0) < (S−p)·Eτ` from given values.
pub fn jpsw_condition(mean_sigma: f64, p_z_positive: f64, servers: usize, p: usize, mean_tau: f64) -> ConditionCheck {
    ConditionCheck::new(mean_sigma * p_z_positive, (servers - p) as f64 * mean_tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PzEstimate {
    pub p: usize,
    pub p_z_positive: Estimate,
    /// Replications with `Z_p = 0`.
    pub zero_count: usize,
    pub truncation: usize,
    pub tail_failures: usize,
    /// False when more than 1% of replications failed the tail bound.
    pub valid: bool,
}

/// Fraction of replications with `Z_p > 0`, each on a fresh backward path of
/// `truncation` marks.
pub fn estimate_pz_positive(
    model: &GiGiModel,
    p: usize,
    replications: usize,
    truncation: usize,
    seed: u64,
) -> Result<PzEstimate> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    if p == 0 {
        return Err(Error::OutOfRange("p must be >= 1".into()));
    }
    if truncation < p {
        return Err(Error::InvalidArgument(format!("truncation {truncation} is below p = {p}")));
    }
    let outcomes: Vec<(bool, bool)> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replication(model, truncation, seed, r)?.reindexed(-(truncation as i64));
            let z = ZScanner::new(&path).zvector_at(0, p, truncation)?;
            Ok((z.z(p) > 0.0, z.tail_bound_ok))
        })
        .collect::<Result<_>>()?;
    let positive = outcomes.iter().filter(|o| o.0).count();
    let tail_failures = outcomes.iter().filter(|o| !o.1).count();
    Ok(PzEstimate {
        p,
        p_z_positive: Estimate::binomial(positive, replications),
        zero_count: replications - positive,
        truncation,
        tail_failures,
        valid: tail_failures * 100 <= replications,
    })
}

/// History length after which truncating `Z` on a cyclic space is exact:
/// every further lag has accumulated more inter-arrival time than the
/// largest service time.
fn exact_cyclic_truncation(space: &FiniteCyclicSpace, p: usize) -> usize {
    let k = space.len();
    let cycle_tau: f64 = space.marks().iter().map(|m| m.tau).sum();
    let max_sigma = space.marks().iter().map(|m| m.sigma).fold(0.0, f64::max);
    let cycles = (max_sigma / cycle_tau).floor() as usize + 2;
    (cycles * k).max(p)
}

/// Exact `P(Z_p > 0)` on a cyclic space: average over its samples.
pub fn cyclic_pz_positive(space: &FiniteCyclicSpace, p: usize) -> Result<PzEstimate> {
    if p == 0 {
        return Err(Error::OutOfRange("p must be >= 1".into()));
    }
    let n = exact_cyclic_truncation(space, p);
    let mut positive = 0;
    for present in 0..space.len() as i64 {
        let h = cyclic_history(space, present, n)?;
        if ZScanner::new(&h).zvector_at(0, p, n)?.z(p) > 0.0 {
            positive += 1;
        }
    }
    Ok(PzEstimate {
        p,
        p_z_positive: Estimate::exact(positive as f64 / space.len() as f64, space.len()),
        zero_count: space.len() - positive,
        truncation: n,
        tail_failures: 0,
        valid: true,
    })
}

/// `P_loss / Eτ < (S−p) / Eσ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingCheck {
    pub overflow_intensity: f64,
    /// `None` when `Eσ = 0` (unbounded service capacity).
    pub service_capacity: Option<f64>,
    pub holds: bool,
}

impl SplittingCheck {
    fn new(loss: f64, mean_sigma: f64, mean_tau: f64, servers: usize, p: usize) -> Self {
        let overflow_intensity = loss / mean_tau;
        let capacity = (servers - p) as f64;
        let service_capacity = (mean_sigma > 0.0).then(|| capacity / mean_sigma);
        let holds = loss * mean_sigma < capacity * mean_tau;
        SplittingCheck { overflow_intensity, service_capacity, holds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub p: usize,
    pub servers: usize,
    pub loss_prob: Estimate,
    pub horizon: usize,
    pub burn_in: usize,
    pub splitting: SplittingCheck,
}

/// Default burn-in: 10% of the horizon.
pub fn default_burn_in(horizon: usize) -> usize {
    horizon / 10
}

/// Fraction of arrival epochs in `[burn_in, horizon)` at which all `p`
/// servers of the loss system started empty at time 0 are busy. The
/// half-width uses 20 batch means and is zero for deterministic inputs.
pub fn estimate_loss_probability(
    model: &Model,
    p: usize,
    servers: usize,
    horizon: usize,
    burn_in: Option<usize>,
    seed: u64,
) -> Result<LossEstimate> {
    let loss = PolicyMap::loss(p)?;
    if servers <= p {
        return Err(Error::OutOfRange(format!("p = {p} must be below the number of servers {servers}")));
    }
    let burn_in = burn_in.unwrap_or_else(|| default_burn_in(horizon));
    if horizon <= burn_in {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must exceed burn-in {burn_in}")));
    }
    let path = model.forward_path(horizon, seed)?;
    let mut u = OrderedProfile::zeros(p);
    let mut busy = Vec::with_capacity(horizon - burn_in);
    for (n, m) in path.marks.iter().enumerate() {
        if n >= burn_in {
            busy.push(u.at(1) > 0.0);
        }
        u = loss.apply_unchecked(u.values(), m);
    }
    let n = busy.len();
    let value = busy.iter().filter(|&&b| b).count() as f64 / n as f64;
    let deterministic = match model {
        Model::Cyclic(_) => true,
        Model::GiGi(m) => m.is_deterministic(),
    };
    let half_width = if deterministic || n < BATCHES { 0.0 } else { batch_half_width(&busy) };
    Ok(LossEstimate {
        p,
        servers,
        loss_prob: Estimate { value, half_width, samples: n },
        horizon,
        burn_in,
        splitting: SplittingCheck::new(value, model.mean_sigma(), model.mean_tau(), servers, p),
    })
}

fn batch_half_width(xs: &[bool]) -> f64 {
    let size = xs.len() / BATCHES;
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().filter(|&&b| b).count() as f64 / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / BATCHES as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    T95_19 * (var / BATCHES as f64).sqrt()
}

/// Hypotheses of the existence theorem for the partial-splitting policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisChecklist {
    pub gigi_input: bool,
    pub tau_unbounded_support: bool,
    pub load_condition: bool,
    pub empty_event_observed: bool,
    pub all_met: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    pub replications: usize,
    pub truncation: usize,
    pub horizon: usize,
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions { replications: 10_000, truncation: 1_000, horizon: 100_000, burn_in: None, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_sigma: f64,
    pub mean_tau: f64,
    #[serde(rename = "S")]
    pub servers: usize,
    pub p: usize,
    pub p_z_positive: PzEstimate,
    /// At least one replication (or sample) had `Z_p = 0`.
    pub p_z_zero_positive: bool,
    pub jsw_condition: ConditionCheck,
    pub jpsw_condition: ConditionCheck,
    /// Whether the load-condition margin exceeds its own Monte Carlo error.
    pub jpsw_condition_resolved: bool,
    pub loss: LossEstimate,
    pub splitting_ok: bool,
    pub hypotheses: HypothesisChecklist,
    pub replications: usize,
    pub horizon: usize,
    pub seed: u64,
}

pub fn check_jpsw_conditions(model: &Model, servers: usize, p: usize, opts: &StabilityOptions) -> Result<StabilityReport> {
    check_servers(servers)?;
    if p == 0 || p >= servers {
        return Err(Error::OutOfRange(format!("p = {p} must satisfy 1 <= p <= S-1 = {}", servers - 1)));
    }
    let pz = match model {
        Model::Cyclic(space) => cyclic_pz_positive(space, p)?,
        Model::GiGi(m) => estimate_pz_positive(m, p, opts.replications, opts.truncation, opts.seed)?,
    };
    let mean_sigma = model.mean_sigma();
    let mean_tau = model.mean_tau();
    let jpsw = match model {
        Model::Cyclic(space) => {
            let n = space.len() as i64;
            let frac = Rational::new((n - pz.zero_count as i64).into(), n.into());
            let lhs = space.exact_mean_sigma() * frac;
            let rhs = Rational::from_integer(((servers - p) as i64).into()) * space.exact_mean_tau();
            ConditionCheck::exact(lhs, rhs)
        }
        Model::GiGi(_) => jpsw_condition(mean_sigma, pz.p_z_positive.value, servers, p, mean_tau),
    };
    let resolved = jpsw.margin.abs() > mean_sigma * pz.p_z_positive.half_width;
    let loss = estimate_loss_probability(model, p, servers, opts.horizon, opts.burn_in, opts.seed)?;
    let (gigi, unbounded) = match model {
        Model::Cyclic(_) => (false, false),
        Model::GiGi(m) => (true, m.tau().has_unbounded_support()),
    };
    let empty = pz.zero_count > 0;
    let hypotheses = HypothesisChecklist {
        gigi_input: gigi,
        tau_unbounded_support: unbounded,
        load_condition: jpsw.holds,
        empty_event_observed: empty,
        all_met: gigi && unbounded && jpsw.holds && empty,
    };
    Ok(StabilityReport {
        mean_sigma,
        mean_tau,
        servers,
        p,
        p_z_zero_positive: empty,
        jsw_condition: check_jsw_condition(model, servers)?,
        jpsw_condition_resolved: resolved,
        jpsw_condition: jpsw,
        splitting_ok: loss.splitting.holds,
        loss,
        hypotheses,
        replications: pz.p_z_positive.samples,
        horizon: opts.horizon,
        seed: opts.seed,
        p_z_positive: pz,
    })
}

impl StabilityReport {
    /// Plain-text table: each inequality, its two sides and the verdict.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let row = |name: &str, lhs: String, rhs: String, ok: bool| {
            format!("{name:<28} {lhs:>14}  <  {rhs:<14} {}\n", if ok { "holds" } else { "fails" })
        };
        out += &format!(
            "S = {}  p = {}  E[sigma] = {}  E[tau] = {}\n",
            self.servers, self.p, self.mean_sigma, self.mean_tau
        );
        out += &format!(
            "P(Z_p > 0) = {:.6} +/- {:.6}  ({} samples, {} with Z_p = 0)\n",
            self.p_z_positive.p_z_positive.value,
            self.p_z_positive.p_z_positive.half_width,
            self.p_z_positive.p_z_positive.samples,
            self.p_z_positive.zero_count
        );
        out += &format!(
            "P_loss = {:.6} +/- {:.6}\n",
            self.loss.loss_prob.value, self.loss.loss_prob.half_width
        );
        out += &row(
            "E[sigma] < S E[tau]",
            format!("{:.6}", self.jsw_condition.lhs),
            format!("{:.6}", self.jsw_condition.rhs),
            self.jsw_condition.holds,
        );
        out += &row(
            "E[sigma] P(Z_p>0) < (S-p)E[tau]",
            format!("{:.6}", self.jpsw_condition.lhs),
            format!("{:.6}", self.jpsw_condition.rhs),
            self.jpsw_condition.holds,
        );
        out += &row(
            "P_loss/E[tau] < (S-p)/E[sigma]",
            format!("{:.6}", self.loss.splitting.overflow_intensity),
            self.loss.splitting.service_capacity.map_or("inf".into(), |c| format!("{c:.6}")),
            self.splitting_ok,
        );
        out += &format!(
            "P(Z_p = 0) > 0: {}   tau unbounded: {}   GI/GI: {}   all hypotheses: {}\n",
            self.p_z_zero_positive,
            self.hypotheses.tau_unbounded_support,
            self.hypotheses.gigi_input,
            self.hypotheses.all_met
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TightnessVerdict {
    Tight,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessDiagnostic {
    pub policy: PolicyMap,
    pub horizon_grid: Vec<usize>,
    /// 99th percentile of the total workload over `(h/2, h]` for each `h`.
    pub quantile_track: Vec<f64>,
    /// Relative change between consecutive entries of the track.
    pub relative_changes: Vec<f64>,
    pub threshold: f64,
    pub verdict: TightnessVerdict,
    pub seed: u64,
}

pub const TIGHTNESS_THRESHOLD: f64 = 0.05;

fn relative_change(prev: f64, next: f64) -> f64 {
    if prev == next {
        0.0
    } else if prev == 0.0 {
        f64::INFINITY
    } else {
        (next - prev) / prev.abs()
    }
}

/// Nearest-rank quantile.
fn quantile(mut xs: Vec<f64>, q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let rank = ((q * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

pub fn tightness_probe(policy: PolicyMap, model: &Model, horizon_grid: &[usize], seed: u64) -> Result<TightnessDiagnostic> {
    if horizon_grid.len() < 2 {
        return Err(Error::InvalidArgument("the horizon grid needs at least two entries".into()));
    }
    if horizon_grid[0] < 2 || horizon_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("the horizon grid must be strictly increasing and start at >= 2".into()));
    }
    let policy = policy.validated()?;
    let last = *horizon_grid.last().expect("nonempty");
    let path = model.forward_path(last, seed)?;
    let mut totals = Vec::with_capacity(last + 1);
    let mut u = OrderedProfile::zeros(policy.dim());
    totals.push(0.0);
    for m in &path.marks {
        u = policy.apply_unchecked(u.values(), m);
        totals.push(u.total());
    }
    let quantile_track: Vec<f64> = horizon_grid
        .iter()
        .map(|&h| quantile(totals[h / 2 + 1..=h].to_vec(), 0.99))
        .collect();
    let relative_changes: Vec<f64> = quantile_track.windows(2).map(|w| relative_change(w[0], w[1])).collect();
    let last_change = *relative_changes.last().expect("two horizons");
    let verdict = if last_change.abs() < TIGHTNESS_THRESHOLD {
        TightnessVerdict::Tight
    } else if last_change >= TIGHTNESS_THRESHOLD
        && relative_changes.iter().rev().take(2).all(|&c| c >= TIGHTNESS_THRESHOLD)
    {
        TightnessVerdict::Growing
    } else {
        TightnessVerdict::Inconclusive
    };
    Ok(TightnessDiagnostic {
        policy,
        horizon_grid: horizon_grid.to_vec(),
        quantile_track,
        relative_changes,
        threshold: TIGHTNESS_THRESHOLD,
        verdict,
        seed,
    })
}

impl TightnessDiagnostic {
    /// `horizon<TAB>q99<TAB>relative_change`, one line per horizon.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("horizon\tq99_total\trelative_change\n");
        for (i, (h, q)) in self.horizon_grid.iter().zip(&self.quantile_track).enumerate() {
            let change = if i == 0 { "NA".to_string() } else { self.relative_changes[i - 1].to_string() };
            out += &format!("{h}\t{q}\t{change}\n");
        }
        out
    }
}

/// Doubling grid `start, 2·start, …` with `count` entries.
pub fn doubling_grid(start: usize, count: usize) -> Vec<usize> {
    (0..count).map(|i| start << i).collect()
}
