//! Forward trajectories, backward Loynes schemes and stationarity checks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::PolicyMap;
use crate::profile::OrderedProfile;
use crate::space::{FiniteCyclicSpace, MarkedPath};

/// `profiles[n+1] = policy(profiles[n], path.marks[n])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub policy: PolicyMap,
    pub profiles: Vec<OrderedProfile>,
    pub path: MarkedPath,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    /// Recomputes every transition; true when the stored profiles replay.
    pub fn replays(&self) -> bool {
        self.profiles.len() == self.path.len() + 1
            && self
                .profiles
                .windows(2)
                .zip(&self.path.marks)
                .all(|(w, m)| self.policy.apply_unchecked(w[0].values(), m) == w[1])
    }

    /// CSV with header `n,w1,...,wq`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        let mut w = csv::Writer::from_writer(out);
        let q = self.policy.dim();
        let mut header = vec!["n".to_string()];
        header.extend((1..=q).map(|i| format!("w{i}")));
        w.write_record(&header).map_err(io)?;
        for (n, prof) in self.profiles.iter().enumerate() {
            let mut row = vec![(self.path.origin_index + n as i64).to_string()];
            row.extend(prof.values().iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }
}

pub fn forward_simulate(policy: PolicyMap, init: &OrderedProfile, path: &MarkedPath) -> Result<Trajectory> {
    if init.dim() != policy.dim() {
        return Err(Error::DimensionMismatch { expected: policy.dim(), got: init.dim() });
    }
    let mut profiles = Vec::with_capacity(path.len() + 1);
    profiles.push(init.clone());
    for m in &path.marks {
        let next = policy.apply_unchecked(profiles.last().expect("nonempty").values(), m);
        profiles.push(next);
    }
    Ok(Trajectory { policy, profiles, path: path.clone() })
}

/// Stopping rule of a Loynes run: stop at the first `n >= window` with
/// `‖W_n − W_{n−window}‖∞ <= tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoynesOptions {
    pub max_n: usize,
    pub tol: f64,
    /// Defaults to the shift period on cyclic paths (exact periodicity) and
    /// to `max(1, max_n / 4)` otherwise.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoynesResult {
    pub policy: PolicyMap,
    /// `W_0 = 0, W_1, …, W_{horizon_used}`.
    pub iterates: Vec<OrderedProfile>,
    pub converged: bool,
    pub limit: Option<OrderedProfile>,
    pub horizon_used: usize,
    pub window: usize,
    pub tol: f64,
    pub stopping_rule: String,
}

impl LoynesResult {
    /// Whether the iterates are ≺-nondecreasing.
    pub fn is_monotone(&self) -> bool {
        self.iterates.windows(2).all(|w| w[0].precedes(&w[1]))
    }
}

/// Loynes sequence at time 0 of a path covering `-max_n..-1`, using the
/// default stopping window.
pub fn loynes_iterate(policy: PolicyMap, backward_path: &MarkedPath, max_n: usize, tol: f64) -> Result<LoynesResult> {
    loynes_iterate_with(policy, backward_path, LoynesOptions { max_n, tol, window: None })
}

/// `W_n` is obtained by running the map forward over the marks at times
/// `-n, …, -1` starting from the zero profile.
pub fn loynes_iterate_with(policy: PolicyMap, backward_path: &MarkedPath, opts: LoynesOptions) -> Result<LoynesResult> {
    if !policy.is_monotone() {
        return Err(Error::NonMonotone {
            policy: policy.to_string(),
            reason: "the map is not ≺-nondecreasing, so the Loynes sequence need not be monotone \
                     and its limit need not solve the stationarity equation"
                .into(),
        });
    }
    if opts.max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be >= 1".into()));
    }
    if !(opts.tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be >= 0", opts.tol)));
    }
    let marks: Vec<_> = (1..=opts.max_n as i64)
        .map(|k| backward_path.mark_at(-k).copied().ok_or(Error::PathTooShort(-k)))
        .collect::<Result<_>>()?;
    let window = opts
        .window
        .or(backward_path.period)
        .unwrap_or((opts.max_n / 4).max(1))
        .max(1);

    let dim = policy.dim();
    let mut iterates = vec![OrderedProfile::zeros(dim)];
    let mut converged = false;
    for n in 1..=opts.max_n {
        let mut w = vec![0.0; dim];
        for m in marks[..n].iter().rev() {
            w = policy.step(&mut crate::scalar::Exact, &w, &m.sigma, &m.tau);
        }
        iterates.push(OrderedProfile::from_map_output(w));
        if n >= window && iterates[n].max_norm_distance(&iterates[n - window]) <= opts.tol {
            converged = true;
            break;
        }
    }
    let horizon_used = iterates.len() - 1;
    let limit = converged.then(|| iterates[horizon_used].clone());
    Ok(LoynesResult {
        policy,
        iterates,
        converged,
        limit,
        horizon_used,
        window,
        tol: opts.tol,
        stopping_rule: format!("first n >= {window} with max|W_n - W_(n-{window})| <= {}", opts.tol),
    })
}

/// `max_i ‖candidate[i+1 mod K] − policy(candidate[i], marks[i])‖∞`; zero iff
/// the candidate solves `X∘θ = policy(X)` on the space.
pub fn stationarity_residual(
    policy: PolicyMap,
    space: &FiniteCyclicSpace,
    candidate: &[OrderedProfile],
) -> Result<f64> {
    let k = space.len();
    if candidate.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: candidate.len() });
    }
    let mut worst = 0.0_f64;
    for (i, m) in space.marks().iter().enumerate() {
        let image = policy.apply(&candidate[i], m)?;
        worst = worst.max(image.max_norm_distance(&candidate[(i + 1) % k]));
    }
    Ok(worst)
}
