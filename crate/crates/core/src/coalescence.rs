//! Multi-start coupling on a shared path and renovating-event detection.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::maps::PolicyMap;
use crate::profile::OrderedProfile;
use crate::space::MarkedPath;

/// First step after which all coupled trajectories agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeStep {
    At(usize),
    NoneWithinHorizon,
}

impl MergeStep {
    pub fn step(&self) -> Option<usize> {
        match *self {
            MergeStep::At(n) => Some(n),
            MergeStep::NoneWithinHorizon => None,
        }
    }
}

const NONE_WITHIN_HORIZON: &str = "none within horizon";

impl Serialize for MergeStep {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            MergeStep::At(n) => s.serialize_u64(n as u64),
            MergeStep::NoneWithinHorizon => s.serialize_str(NONE_WITHIN_HORIZON),
        }
    }
}

impl<'de> Deserialize<'de> for MergeStep {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Step(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Step(n) => Ok(MergeStep::At(n)),
            Raw::Text(t) if t == NONE_WITHIN_HORIZON => Ok(MergeStep::NoneWithinHorizon),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected merge step '{t}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceReport {
    pub policy: PolicyMap,
    /// Monotone map run alongside from the coordinatewise maximum of the starts.
    pub dominating: PolicyMap,
    pub starts: Vec<OrderedProfile>,
    pub merge_step: MergeStep,
    /// Steps `n` where the dominating profile `D_n` had `D_n(1) = 0` and
    /// `D_n(ℓ) <= Σ_{i=0}^{ℓ−1} τ_{n+i}` for `2 <= ℓ <= q`.
    pub renovation_hits: Vec<usize>,
    pub horizon: usize,
    /// Set if trajectories separated again after merging (never expected).
    pub diverged_after_merge: bool,
}

/// Whether the staircase event holds for profile `d` at step `n` of `path`.
/// `None` when the path ends before the staircase is fully observed.
pub fn renovation_event(d: &OrderedProfile, path: &MarkedPath, n: usize) -> Option<bool> {
    let q = d.dim();
    if n + q > path.len() {
        return None;
    }
    if d.at(1) != 0.0 {
        return Some(false);
    }
    let mut budget = 0.0;
    for ell in 1..=q {
        budget += path.marks[n + ell - 1].tau;
        if ell >= 2 && d.at(ell) > budget {
            return Some(false);
        }
    }
    Some(true)
}

pub fn detect_coalescence(policy: PolicyMap, starts: &[OrderedProfile], path: &MarkedPath) -> Result<CoalescenceReport> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no starting profiles".into()));
    }
    let dim = policy.dim();
    if let Some(bad) = starts.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
    }
    let dominating = policy.dominating();
    let mut dom = starts.iter().skip(1).fold(starts[0].clone(), |acc, s| acc.join(s));
    let mut current: Vec<OrderedProfile> = starts.to_vec();
    let all_equal = |v: &[OrderedProfile]| v.windows(2).all(|w| w[0] == w[1]);

    let mut merge = all_equal(&current).then_some(0);
    let mut diverged = false;
    let mut hits = Vec::new();
    for (n, m) in path.marks.iter().enumerate() {
        if renovation_event(&dom, path, n) == Some(true) {
            hits.push(n);
        }
        dom = dominating.apply_unchecked(dom.values(), m);
        for c in current.iter_mut() {
            *c = policy.apply_unchecked(c.values(), m);
        }
        let equal = all_equal(&current);
        match (merge, equal) {
            (None, true) => merge = Some(n + 1),
            (Some(_), false) => diverged = true,
            _ => {}
        }
    }
    Ok(CoalescenceReport {
        policy,
        dominating,
        starts: starts.to_vec(),
        merge_step: merge.map_or(MergeStep::NoneWithinHorizon, MergeStep::At),
        renovation_hits: hits,
        horizon: path.len(),
        diverged_after_merge: diverged,
    })
}
