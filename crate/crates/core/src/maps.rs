//! Driving maps of the workload recursions.
//!
//! Each map sends an ordered profile and one mark to the ordered profile
//! seen by the next customer:
//!
//! * `jsw`  : join the shortest workload, `u ↦ sort([u + σe₁ − τ1]⁺)`;
//! * `jpsw` : join a free server if any, else the `(p+1)`-th shortest;
//! * `loss` : `p` servers without waiting room;
//! * `gamma`, `psi`, `phi`: the monotone comparison maps used to bound
//!   the two non-monotone policies above.
//!
//! The kernels are generic over [`Scalar`] and take a [`Comparator`]; the
//! `apply_*` functions are the checked `f64` entry points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::OrderedProfile;
use crate::scalar::{max, min, pos, sort, Comparator, Exact, Scalar};
use crate::space::Mark;

/// Allocation policy or auxiliary comparison map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PolicyMap {
    Jsw { servers: usize },
    Jpsw { servers: usize, p: usize },
    Loss { p: usize },
    Gamma { p: usize },
    Psi { p: usize },
    Phi { servers: usize, p: usize },
}

impl PolicyMap {
    pub fn jsw(servers: usize) -> Result<Self> {
        PolicyMap::Jsw { servers }.validated()
    }

    pub fn jpsw(servers: usize, p: usize) -> Result<Self> {
        PolicyMap::Jpsw { servers, p }.validated()
    }

    pub fn loss(p: usize) -> Result<Self> {
        PolicyMap::Loss { p }.validated()
    }

    pub fn gamma(p: usize) -> Result<Self> {
        PolicyMap::Gamma { p }.validated()
    }

    pub fn psi(p: usize) -> Result<Self> {
        PolicyMap::Psi { p }.validated()
    }

    pub fn phi(servers: usize, p: usize) -> Result<Self> {
        PolicyMap::Phi { servers, p }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::OutOfRange(msg));
        match self {
            PolicyMap::Jsw { servers } if servers == 0 => bad("jsw needs S >= 1".into()),
            PolicyMap::Jpsw { servers, p } if servers == 0 || p >= servers => {
                bad(format!("jpsw needs 0 <= p <= S-1, got S={servers}, p={p}"))
            }
            PolicyMap::Loss { p } | PolicyMap::Gamma { p } | PolicyMap::Psi { p } if p == 0 => {
                bad(format!("{self} needs p >= 1"))
            }
            PolicyMap::Phi { servers, p } if p == 0 || p >= servers => {
                bad(format!("phi needs 1 <= p <= S-1, got S={servers}, p={p}"))
            }
            _ => Ok(self),
        }
    }

    /// Dimension of the profiles the map acts on.
    pub fn dim(&self) -> usize {
        match *self {
            PolicyMap::Jsw { servers } | PolicyMap::Jpsw { servers, .. } | PolicyMap::Phi { servers, .. } => {
                servers
            }
            PolicyMap::Loss { p } | PolicyMap::Gamma { p } | PolicyMap::Psi { p } => p,
        }
    }

    /// Whether the map is ≺-nondecreasing, i.e. whether a Loynes scheme applies.
    pub fn is_monotone(&self) -> bool {
        match *self {
            PolicyMap::Jpsw { p, .. } => p == 0,
            PolicyMap::Loss { .. } => false,
            _ => true,
        }
    }

    /// Monotone map whose trajectories dominate this policy's.
    pub fn dominating(&self) -> PolicyMap {
        match *self {
            PolicyMap::Jpsw { servers, p: 0 } => PolicyMap::Jsw { servers },
            PolicyMap::Jpsw { servers, p } => PolicyMap::Phi { servers, p },
            PolicyMap::Loss { p } => PolicyMap::Psi { p },
            other => other,
        }
    }

    /// Generic one-step transition. `u` must have dimension [`Self::dim`].
    pub fn step<S: Scalar, C: Comparator<S>>(&self, c: &mut C, u: &[S], sigma: &S, tau: &S) -> Vec<S> {
        debug_assert_eq!(u.len(), self.dim());
        match *self {
            PolicyMap::Jsw { .. } => jsw_kernel(c, u, sigma, tau),
            PolicyMap::Jpsw { p, .. } => jpsw_kernel(c, u, sigma, tau, p),
            PolicyMap::Loss { .. } => loss_kernel(c, u, sigma, tau),
            PolicyMap::Gamma { .. } => gamma_kernel(c, u, sigma, tau),
            PolicyMap::Psi { .. } => psi_kernel(c, u, sigma, tau),
            PolicyMap::Phi { p, .. } => phi_kernel(c, u, sigma, tau, p),
        }
    }

    /// Checked `f64` transition.
    pub fn apply(&self, u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.dim() });
        }
        Ok(self.apply_unchecked(u.values(), m))
    }

    pub(crate) fn apply_unchecked(&self, u: &[f64], m: &Mark) -> OrderedProfile {
        OrderedProfile::from_map_output(self.step(&mut Exact, u, &m.sigma, &m.tau))
    }
}

impl fmt::Display for PolicyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PolicyMap::Jsw { servers } => write!(f, "jsw:{servers}"),
            PolicyMap::Jpsw { servers, p } => write!(f, "jpsw:{servers}:{p}"),
            PolicyMap::Loss { p } => write!(f, "loss:{p}"),
            PolicyMap::Gamma { p } => write!(f, "gamma:{p}"),
            PolicyMap::Psi { p } => write!(f, "psi:{p}"),
            PolicyMap::Phi { servers, p } => write!(f, "phi:{servers}:{p}"),
        }
    }
}

impl FromStr for PolicyMap {
    type Err = Error;

    /// `jsw:S | jpsw:S:p | loss:p | gamma:p | psi:p | phi:S:p`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer '{t}' in policy '{s}'")))
        };
        let policy = match parts.as_slice() {
            ["jsw", a] => PolicyMap::Jsw { servers: num(a)? },
            ["jpsw", a, b] => PolicyMap::Jpsw { servers: num(a)?, p: num(b)? },
            ["loss", a] => PolicyMap::Loss { p: num(a)? },
            ["gamma", a] => PolicyMap::Gamma { p: num(a)? },
            ["psi", a] => PolicyMap::Psi { p: num(a)? },
            ["phi", a, b] => PolicyMap::Phi { servers: num(a)?, p: num(b)? },
            _ => return Err(Error::Parse(format!("unknown policy '{s}'"))),
        };
        policy.validated()
    }
}

impl TryFrom<String> for PolicyMap {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PolicyMap> for String {
    fn from(p: PolicyMap) -> Self {
        p.to_string()
    }
}

fn add_shift_clip_sort<S: Scalar, C: Comparator<S>>(
    c: &mut C,
    u: &[S],
    target: Option<usize>,
    sigma: &S,
    tau: &S,
) -> Vec<S> {
    let mut v: Vec<S> = u
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let x = if Some(i) == target { x.clone() + sigma.clone() } else { x.clone() };
            pos(c, x - tau.clone())
        })
        .collect();
    sort(c, &mut v);
    v
}

pub fn jsw_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S) -> Vec<S> {
    add_shift_clip_sort(c, u, Some(0), sigma, tau)
}

pub fn jpsw_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S, p: usize) -> Vec<S> {
    if c.is_zero(&u[0]) {
        add_shift_clip_sort(c, u, Some(0), sigma, tau)
    } else {
        add_shift_clip_sort(c, u, Some(p), sigma, tau)
    }
}

pub fn loss_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S) -> Vec<S> {
    let target = if c.is_zero(&u[0]) { Some(0) } else { None };
    add_shift_clip_sort(c, u, target, sigma, tau)
}

pub fn gamma_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S) -> Vec<S> {
    let p = u.len();
    let mut v = Vec::with_capacity(p);
    for j in 0..p - 1 {
        v.push(pos(c, u[j + 1].clone() - tau.clone()));
    }
    let top = max(c, &u[p - 1], sigma);
    v.push(pos(c, top - tau.clone()));
    v
}

/// `[(x ∨ a) ∧ cap − τ]⁺`, or without the cap on the last coordinate.
fn capped<S: Scalar, C: Comparator<S>>(c: &mut C, x: &S, a: &S, cap: Option<&S>, tau: &S) -> S {
    let m = max(c, x, a);
    let m = match cap {
        Some(cap) => min(c, &m, cap),
        None => m,
    };
    pos(c, m - tau.clone())
}

pub fn psi_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S) -> Vec<S> {
    let p = u.len();
    (0..p)
        .map(|j| capped(c, &u[j], sigma, u.get(j + 1), tau))
        .collect()
}

/// `p` counts coordinates with the plain `σ` threshold; coordinates after it
/// use `σ + u(p+1)·1{u(1)>0}`.
pub fn phi_kernel<S: Scalar, C: Comparator<S>>(c: &mut C, u: &[S], sigma: &S, tau: &S, p: usize) -> Vec<S> {
    let s = u.len();
    let boosted = if c.is_zero(&u[0]) {
        sigma.clone()
    } else {
        sigma.clone() + u[p].clone()
    };
    (0..s)
        .map(|j| {
            let a = if j < p { sigma } else { &boosted };
            capped(c, &u[j], a, u.get(j + 1), tau)
        })
        .collect()
}

fn checked(policy: Result<PolicyMap>, u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
    policy?.apply(u, m)
}

pub fn apply_jsw(u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
    checked(PolicyMap::jsw(u.dim()), u, m)
}

pub fn apply_jpsw(u: &OrderedProfile, m: &Mark, p: usize) -> Result<OrderedProfile> {
    checked(PolicyMap::jpsw(u.dim(), p), u, m)
}

pub fn apply_loss(u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
    checked(PolicyMap::loss(u.dim()), u, m)
}

pub fn apply_gamma(u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
    checked(PolicyMap::gamma(u.dim()), u, m)
}

pub fn apply_psi(u: &OrderedProfile, m: &Mark) -> Result<OrderedProfile> {
    checked(PolicyMap::psi(u.dim()), u, m)
}

pub fn apply_phi(u: &OrderedProfile, m: &Mark, p: usize) -> Result<OrderedProfile> {
    checked(PolicyMap::phi(u.dim(), p), u, m)
}
