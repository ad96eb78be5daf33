//! Sample spaces and mark sequences.
//!
//! Two input families are supported: deterministic finite cyclic spaces
//! (uniform measure on `K` points, shift `i -> i+1 mod K`) and GI/GI models
//! with independent i.i.d. service and inter-arrival streams.
//!
//! Random paths use ChaCha8 keyed by the run seed. Each replication `r`
//! reads service times from stream `2r` and inter-arrival times from stream
//! `2r + 1`, so the two sequences never share generator output and any
//! replication can be regenerated on its own.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution as _, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{rational_from_f64, Rational};

/// One customer: service time `sigma` and time until the next arrival `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub sigma: f64,
    pub tau: f64,
}

impl Mark {
    pub fn new(sigma: f64, tau: f64) -> Result<Self> {
        let m = Mark { sigma, tau };
        m.check(0)?;
        Ok(m)
    }

    fn check(&self, index: usize) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::InvalidMark {
                index,
                reason: format!("sigma = {} must be finite and >= 0", self.sigma),
            });
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(Error::InvalidMark {
                index,
                reason: format!("tau = {} must be finite and > 0", self.tau),
            });
        }
        Ok(())
    }
}

/// Finite stationary ergodic quadruple with uniform measure and cyclic shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Mark>", into = "Vec<Mark>")]
pub struct FiniteCyclicSpace {
    marks: Vec<Mark>,
}

impl TryFrom<Vec<Mark>> for FiniteCyclicSpace {
    type Error = Error;

    fn try_from(marks: Vec<Mark>) -> Result<Self> {
        build_cyclic_space(marks)
    }
}

impl From<FiniteCyclicSpace> for Vec<Mark> {
    fn from(s: FiniteCyclicSpace) -> Self {
        s.marks
    }
}

pub fn build_cyclic_space(marks: Vec<Mark>) -> Result<FiniteCyclicSpace> {
    if marks.is_empty() {
        return Err(Error::EmptySpace);
    }
    for (i, m) in marks.iter().enumerate() {
        m.check(i)?;
    }
    Ok(FiniteCyclicSpace { marks })
}

/// Three-point space on which J2SW with two servers has no stationary profile.
pub fn counterexample_space() -> FiniteCyclicSpace {
    FiniteCyclicSpace {
        marks: vec![
            Mark { sigma: 2.25, tau: 1.0 },
            Mark { sigma: 1.5, tau: 1.0 },
            Mark { sigma: 2.0, tau: 1.0 },
        ],
    }
}

impl FiniteCyclicSpace {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    /// Mark at sample `theta^index(omega_1)`, any integer index.
    pub fn mark_at(&self, index: i64) -> Mark {
        self.marks[index.rem_euclid(self.marks.len() as i64) as usize]
    }

    pub fn mean_sigma(&self) -> f64 {
        self.marks.iter().map(|m| m.sigma).sum::<f64>() / self.len() as f64
    }

    pub fn mean_tau(&self) -> f64 {
        self.marks.iter().map(|m| m.tau).sum::<f64>() / self.len() as f64
    }

    pub fn exact_mean_sigma(&self) -> Rational {
        self.exact_mean(|m| m.sigma)
    }

    pub fn exact_mean_tau(&self) -> Rational {
        self.exact_mean(|m| m.tau)
    }

    fn exact_mean(&self, f: impl Fn(&Mark) -> f64) -> Rational {
        let total = self
            .marks
            .iter()
            .map(|m| rational_from_f64(f(m)).expect("marks are finite"))
            .fold(Rational::from_integer(0.into()), |acc, q| acc + q);
        total / Rational::from_integer((self.len() as i64).into())
    }

    /// Marks as exact rationals, in sample order.
    pub fn exact_marks(&self) -> Vec<(Rational, Rational)> {
        self.marks
            .iter()
            .map(|m| {
                (
                    rational_from_f64(m.sigma).expect("finite"),
                    rational_from_f64(m.tau).expect("finite"),
                )
            })
            .collect()
    }
}

/// Closed family of marginal distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    Point { value: f64 },
    Exponential { rate: f64 },
    Uniform { a: f64, b: f64 },
    Discrete { values: Vec<(f64, f64)> },
}

impl Distribution {
    fn validate(&self, what: &str, strictly_positive: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(format!("{what}: {msg}")));
        match *self {
            Distribution::Point { value } => {
                if !value.is_finite() || value < 0.0 {
                    return bad(format!("point mass {value} must be finite and >= 0"));
                }
                if strictly_positive && value == 0.0 {
                    return bad("point mass at 0".into());
                }
            }
            Distribution::Exponential { rate } => {
                if !rate.is_finite() || rate <= 0.0 {
                    return bad(format!("exponential rate {rate} must be > 0"));
                }
            }
            Distribution::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() || a < 0.0 || a >= b {
                    return bad(format!("uniform({a}, {b}) needs 0 <= a < b"));
                }
                if strictly_positive && a == 0.0 {
                    return bad("uniform support touches 0".into());
                }
            }
            Distribution::Discrete { ref values } => {
                if values.is_empty() {
                    return bad("empty discrete distribution".into());
                }
                let mut total = 0.0;
                for &(v, p) in values {
                    if !v.is_finite() || v < 0.0 {
                        return bad(format!("atom {v} must be finite and >= 0"));
                    }
                    if !p.is_finite() || p < 0.0 {
                        return bad(format!("probability {p} must be >= 0"));
                    }
                    if strictly_positive && v == 0.0 && p > 0.0 {
                        return bad("positive mass at 0".into());
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("probabilities sum to {total}"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Point { value } => value,
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { a, b } => 0.5 * (a + b),
            Distribution::Discrete { ref values } => values.iter().map(|&(v, p)| v * p).sum(),
        }
    }

    pub fn has_unbounded_support(&self) -> bool {
        matches!(self, Distribution::Exponential { .. })
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Distribution::Point { .. } => true,
            Distribution::Discrete { values } => values.iter().filter(|(_, p)| *p > 0.0).count() == 1,
            _ => false,
        }
    }

    fn sampler(&self) -> Sampler {
        match *self {
            Distribution::Point { value } => Sampler::Point(value),
            Distribution::Exponential { rate } => Sampler::Exp(Exp::new(rate).expect("validated")),
            Distribution::Uniform { a, b } => Sampler::Uniform(Uniform::new(a, b).expect("validated")),
            Distribution::Discrete { ref values } => Sampler::Discrete(
                values.iter().map(|v| v.0).collect(),
                WeightedIndex::new(values.iter().map(|v| v.1)).expect("validated"),
            ),
        }
    }
}

enum Sampler {
    Point(f64),
    Exp(Exp<f64>),
    Uniform(Uniform<f64>),
    Discrete(Vec<f64>, WeightedIndex<f64>),
}

impl Sampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Point(v) => *v,
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
            Sampler::Discrete(atoms, idx) => atoms[idx.sample(rng)],
        }
    }
}

/// GI/GI input: i.i.d. service times independent of i.i.d. inter-arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GiGiRaw", into = "GiGiRaw")]
pub struct GiGiModel {
    sigma: Distribution,
    tau: Distribution,
}

#[derive(Serialize, Deserialize)]
struct GiGiRaw {
    sigma: Distribution,
    tau: Distribution,
}

impl TryFrom<GiGiRaw> for GiGiModel {
    type Error = Error;

    fn try_from(raw: GiGiRaw) -> Result<Self> {
        GiGiModel::new(raw.sigma, raw.tau)
    }
}

impl From<GiGiModel> for GiGiRaw {
    fn from(m: GiGiModel) -> Self {
        GiGiRaw { sigma: m.sigma, tau: m.tau }
    }
}

impl GiGiModel {
    pub fn new(sigma: Distribution, tau: Distribution) -> Result<Self> {
        sigma.validate("sigma", false)?;
        tau.validate("tau", true)?;
        Ok(GiGiModel { sigma, tau })
    }

    pub fn sigma(&self) -> &Distribution {
        &self.sigma
    }

    pub fn tau(&self) -> &Distribution {
        &self.tau
    }

    pub fn mean_sigma(&self) -> f64 {
        self.sigma.mean()
    }

    pub fn mean_tau(&self) -> f64 {
        self.tau.mean()
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma.is_deterministic() && self.tau.is_deterministic()
    }
}

/// Finite window of a mark sequence; `marks[i]` is the mark of customer
/// `origin_index + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPath {
    pub marks: Vec<Mark>,
    pub origin_index: i64,
    pub seed: Option<u64>,
    /// Shift period when the path was unrolled from a cyclic space.
    pub period: Option<usize>,
}

impl MarkedPath {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// One past the last covered time.
    pub fn end_index(&self) -> i64 {
        self.origin_index + self.marks.len() as i64
    }

    pub fn mark_at(&self, t: i64) -> Option<&Mark> {
        let i = t - self.origin_index;
        if i < 0 {
            return None;
        }
        self.marks.get(i as usize)
    }

    /// Same marks reindexed so that `new_origin` is the first time.
    pub fn reindexed(mut self, new_origin: i64) -> Self {
        self.origin_index = new_origin;
        self
    }

    pub fn max_sigma(&self) -> f64 {
        self.marks.iter().map(|m| m.sigma).fold(0.0, f64::max)
    }

    /// CSV with header `n,sigma,tau`, one row per covered time.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        w.write_record(["n", "sigma", "tau"]).map_err(io)?;
        for (i, m) in self.marks.iter().enumerate() {
            let n = self.origin_index + i as i64;
            w.write_record([n.to_string(), m.sigma.to_string(), m.tau.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }
}

/// The two generator streams of replication `replication` under `seed`.
pub fn substreams(seed: u64, replication: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut sigma_rng = ChaCha8Rng::seed_from_u64(seed);
    sigma_rng.set_stream(2 * replication);
    let mut tau_rng = ChaCha8Rng::seed_from_u64(seed);
    tau_rng.set_stream(2 * replication + 1);
    (sigma_rng, tau_rng)
}

pub fn sample_path(model: &GiGiModel, n: usize, seed: u64) -> Result<MarkedPath> {
    sample_replication(model, n, seed, 0)
}

/// Path of replication `replication`; replication 0 is [`sample_path`].
pub fn sample_replication(
    model: &GiGiModel,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<MarkedPath> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be >= 1".into()));
    }
    let (mut sr, mut tr) = substreams(seed, replication);
    let ss = model.sigma.sampler();
    let ts = model.tau.sampler();
    let mut marks = Vec::with_capacity(n);
    for _ in 0..n {
        let sigma = ss.draw(&mut sr);
        let mut tau = ts.draw(&mut tr);
        // an exponential draw can underflow to exactly 0; redraw keeps tau > 0
        while tau <= 0.0 {
            tau = ts.draw(&mut tr);
        }
        marks.push(Mark { sigma, tau });
    }
    Ok(MarkedPath { marks, origin_index: 0, seed: Some(seed), period: None })
}

/// Reads `n` marks starting at sample index `start_index` (negative allowed).
pub fn unroll(space: &FiniteCyclicSpace, start_index: i64, n: usize) -> Result<MarkedPath> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be >= 1".into()));
    }
    let marks = (0..n as i64).map(|k| space.mark_at(start_index + k)).collect();
    Ok(MarkedPath { marks, origin_index: start_index, seed: None, period: Some(space.len()) })
}

/// Backward window of a cyclic space seen from sample `present`: covers the
/// times `-n..-1` relative to it.
pub fn cyclic_history(space: &FiniteCyclicSpace, present: i64, n: usize) -> Result<MarkedPath> {
    Ok(unroll(space, present - n as i64, n)?.reindexed(-(n as i64)))
}

/// Input source named in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceDescriptor {
    Cyclic(Vec<(f64, f64)>),
    Gigi(GiGiModel),
}

/// `{"space": {"cyclic": [[sigma, tau], ...]}}` or `{"space": {"gigi": {...}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub space: SpaceDescriptor,
}

/// Validated input model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Cyclic(FiniteCyclicSpace),
    GiGi(GiGiModel),
}

impl Model {
    pub fn from_descriptor(d: &SpaceDescriptor) -> Result<Self> {
        match d {
            SpaceDescriptor::Cyclic(pairs) => {
                let marks = pairs.iter().map(|&(sigma, tau)| Mark { sigma, tau }).collect();
                Ok(Model::Cyclic(build_cyclic_space(marks)?))
            }
            SpaceDescriptor::Gigi(m) => Ok(Model::GiGi(GiGiModel::new(m.sigma.clone(), m.tau.clone())?)),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Model::from_descriptor(&f.space)
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        match self {
            Model::Cyclic(s) => SpaceDescriptor::Cyclic(s.marks.iter().map(|m| (m.sigma, m.tau)).collect()),
            Model::GiGi(m) => SpaceDescriptor::Gigi(m.clone()),
        }
    }

    pub fn mean_sigma(&self) -> f64 {
        match self {
            Model::Cyclic(s) => s.mean_sigma(),
            Model::GiGi(m) => m.mean_sigma(),
        }
    }

    pub fn mean_tau(&self) -> f64 {
        match self {
            Model::Cyclic(s) => s.mean_tau(),
            Model::GiGi(m) => m.mean_tau(),
        }
    }

    /// Forward path of `n` marks starting at time 0.
    pub fn forward_path(&self, n: usize, seed: u64) -> Result<MarkedPath> {
        match self {
            Model::Cyclic(s) => unroll(s, 0, n),
            Model::GiGi(m) => sample_path(m, n, seed),
        }
    }

    /// Backward window covering times `-n..-1`.
    pub fn backward_path(&self, n: usize, seed: u64) -> Result<MarkedPath> {
        match self {
            Model::Cyclic(s) => cyclic_history(s, 0, n),
            Model::GiGi(m) => Ok(sample_path(m, n, seed)?.reindexed(-(n as i64))),
        }
    }
}
