//! Run configuration: one JSON document, overridable flag by flag.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jpsw_core::space::{counterexample_space, SpaceDescriptor};
use jpsw_core::{Model, PolicyMap};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input model; the three-point counterexample space when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SpaceDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Doubling grid for the tightness probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub servers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Sample index of `ω` at which cyclic runs start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<bool>,
}

macro_rules! override_fields {
    ($base:expr, $over:expr, $($f:ident),*) => {
        $(if $over.$f.is_some() { $base.$f = $over.$f.clone(); })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Values set in `flags` replace those of `self`.
    pub fn merged(mut self, flags: &RunConfig) -> Self {
        override_fields!(
            self, flags, model, policy, horizon, horizons, replications, burn_in, seed, truncation, tolerance,
            output_dir, servers, p, start, initial, trace
        );
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("horizon", self.horizon),
            ("replications", self.replications),
            ("truncation", self.truncation),
            ("servers", self.servers),
            ("p", self.p),
        ];
        for (name, v) in counts {
            if v == Some(0) {
                bail!("field '{name}' must be positive");
            }
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                bail!("field 'tolerance' must be >= 0, got {t}");
            }
        }
        if let Some(h) = &self.horizons {
            if h.len() < 2 || h[0] < 2 || h.windows(2).any(|w| w[0] >= w[1]) {
                bail!("field 'horizons' must be strictly increasing with at least two entries >= 2");
            }
        }
        if let (Some(h), Some(b)) = (self.horizon, self.burn_in) {
            if b >= h {
                bail!("field 'burn_in' ({b}) must be below 'horizon' ({h})");
            }
        }
        if let Some(policy) = self.policy {
            policy.validated().context("field 'policy'")?;
        }
        self.model().context("field 'model'")?;
        Ok(())
    }

    pub fn model(&self) -> Result<Model> {
        Ok(match &self.model {
            Some(d) => Model::from_descriptor(d)?,
            None => Model::Cyclic(counterexample_space()),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn policy_or(&self, default: &str) -> Result<PolicyMap> {
        Ok(match self.policy {
            Some(p) => p,
            None => default.parse()?,
        })
    }

    /// `(S, p)` from explicit fields, else from a `jpsw:S:p` or `phi:S:p` policy.
    pub fn servers_and_p(&self) -> Result<(usize, usize)> {
        let from_policy = match self.policy {
            Some(PolicyMap::Jpsw { servers, p }) | Some(PolicyMap::Phi { servers, p }) => Some((servers, p)),
            _ => None,
        };
        let servers = self.servers.or(from_policy.map(|x| x.0));
        let p = self.p.or(from_policy.map(|x| x.1));
        match (servers, p) {
            (Some(s), Some(p)) if p >= 1 && p < s => Ok((s, p)),
            (Some(s), Some(p)) => bail!("fields 'servers' = {s} and 'p' = {p} need 1 <= p <= servers - 1"),
            _ => bail!("fields 'servers' and 'p' are required (or a jpsw:S:p policy)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_override() {
        let text = r#"{
            "model": {"gigi": {"sigma": {"exponential": {"rate": 1.0}}, "tau": {"point": {"value": 2.0}}}},
            "policy": "jpsw:3:1",
            "horizon": 500,
            "seed": 9,
            "tolerance": 0.0
        }"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.servers_and_p().unwrap(), (3, 1));
        let flags = RunConfig { seed: Some(4), ..Default::default() };
        let m = c.merged(&flags);
        assert_eq!(m.seed(), 4);
        assert_eq!(m.horizon, Some(500));
        m.validate().unwrap();
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"horizn": 5}"#).is_err());
        let c = RunConfig { horizon: Some(0), ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("horizon"));
        let c = RunConfig { horizon: Some(10), burn_in: Some(10), ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { horizons: Some(vec![8, 8]), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
