//! Piecewise-affine structure of the one-cycle map on a finite cyclic space
//! and its exact fixed points.
//!
//! The cycle map `F = f_K ∘ … ∘ f_1` (with `f_i` the policy map under the
//! mark at `ω_i`) is evaluated once per branch pattern on symbolic inputs.
//! Each comparison the map performs either has a constant outcome or splits
//! the current domain into `e ≤ 0` and `e > 0` (or `e = 0` and `e > 0` for
//! the empty-server test); both halves are explored depth first, and halves
//! that are infeasible are pruned. The leaves partition the ordered cone.

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::affine::{AffineExpr, LinearConstraint, Relation};
use super::polyhedron::Polyhedron;
use crate::error::{Error, Result};
use crate::maps::PolicyMap;
use crate::scalar::{format_rational, serde_rational_mat, serde_rational_vec, Comparator, Exact, Rational};
use crate::space::{counterexample_space, FiniteCyclicSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactOptions {
    pub max_dim: usize,
    pub max_patterns: usize,
    pub trace: bool,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { max_dim: 4, max_patterns: 1_000_000, trace: false }
    }
}

/// `u ↦ matrix·u + offset` on `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(with = "serde_rational_mat")]
    pub matrix: Vec<Vec<Rational>>,
    #[serde(with = "serde_rational_vec")]
    pub offset: Vec<Rational>,
    pub domain: Vec<LinearConstraint>,
}

impl AffinePiece {
    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn contains(&self, u: &[Rational]) -> bool {
        self.domain.iter().all(|c| c.holds(u))
    }

    pub fn apply(&self, u: &[Rational]) -> Vec<Rational> {
        self.matrix
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| row.iter().zip(u).fold(b.clone(), |acc, (a, x)| acc + a * x))
            .collect()
    }

    pub fn polyhedron(&self) -> Polyhedron {
        Polyhedron::new(self.dim(), self.domain.clone())
    }

    /// Domain intersected with `(I − A)u = b`.
    pub fn fixed_point_set(&self) -> Polyhedron {
        let d = self.dim();
        let mut cons = self.domain.clone();
        for (i, (row, b)) in self.matrix.iter().zip(&self.offset).enumerate() {
            let coeffs = (0..d)
                .map(|j| {
                    let id = if i == j { Rational::one() } else { Rational::zero() };
                    id - &row[j]
                })
                .collect();
            cons.push(LinearConstraint::new(coeffs, Relation::Eq, b.clone()));
        }
        Polyhedron::new(d, cons)
    }
}

#[derive(Debug, Clone)]
struct Decision {
    choice: bool,
    /// Whether the decision split a feasible domain (and so constrains it).
    split: bool,
}

/// Comparator over affine expressions that follows a decision script and
/// opens new branches past its end.
struct BranchExplorer {
    dim: usize,
    domain: Polyhedron,
    script: Vec<Decision>,
    cursor: usize,
    alternatives: Vec<Vec<Decision>>,
}

impl BranchExplorer {
    fn new(dim: usize, script: Vec<Decision>) -> Self {
        BranchExplorer { dim, domain: Polyhedron::new(dim, cone(dim)), script, cursor: 0, alternatives: Vec::new() }
    }

    /// `yes`/`no` are the constraints for the two outcomes.
    fn decide(&mut self, yes: LinearConstraint, no: LinearConstraint) -> bool {
        if let Some(d) = self.script.get(self.cursor).cloned() {
            self.cursor += 1;
            if d.split {
                self.domain = self.domain.with(if d.choice { yes } else { no });
            }
            return d.choice;
        }
        let with_yes = self.domain.with(yes);
        let with_no = self.domain.with(no);
        let (choice, split) = match (with_yes.is_feasible(), with_no.is_feasible()) {
            (true, true) => {
                let mut alt = self.script.clone();
                alt.push(Decision { choice: false, split: true });
                self.alternatives.push(alt);
                self.domain = with_yes;
                (true, true)
            }
            (true, false) => (true, false),
            (false, true) => (false, false),
            (false, false) => unreachable!("comparison on an empty domain"),
        };
        self.script.push(Decision { choice, split });
        self.cursor += 1;
        choice
    }
}

impl Comparator<AffineExpr> for BranchExplorer {
    fn le(&mut self, a: &AffineExpr, b: &AffineExpr) -> bool {
        let e = a.clone() - b.clone();
        if e.is_constant() {
            return !e.constant.is_positive();
        }
        let neg = AffineExpr::constant(Rational::zero()) - e.clone();
        let yes = LinearConstraint::from_expr(&e, Relation::Le, self.dim);
        let no = LinearConstraint::from_expr(&neg, Relation::Lt, self.dim);
        self.decide(yes, no)
    }

    // only ever applied to workloads, which are nonnegative on the cone
    fn is_zero(&mut self, a: &AffineExpr) -> bool {
        if a.is_constant() {
            return a.constant.is_zero();
        }
        let neg = AffineExpr::constant(Rational::zero()) - a.clone();
        let yes = LinearConstraint::from_expr(a, Relation::Eq, self.dim);
        let no = LinearConstraint::from_expr(&neg, Relation::Lt, self.dim);
        self.decide(yes, no)
    }
}

/// `0 ≤ u(1) ≤ u(2) ≤ … ≤ u(d)`.
pub fn cone(dim: usize) -> Vec<LinearConstraint> {
    let mut out = Vec::with_capacity(dim);
    let unit = |i: usize, s: i64| {
        let mut c = vec![Rational::zero(); dim];
        c[i] = Rational::from_integer(s.into());
        c
    };
    out.push(LinearConstraint::new(unit(0, -1), Relation::Le, Rational::zero()));
    for i in 0..dim.saturating_sub(1) {
        let mut c = unit(i, 1);
        c[i + 1] = -Rational::one();
        out.push(LinearConstraint::new(c, Relation::Le, Rational::zero()));
    }
    out
}

fn check_inputs(policy: PolicyMap, opts: &ExactOptions) -> Result<()> {
    let d = policy.validated()?.dim();
    if d > opts.max_dim {
        return Err(Error::CapExceeded(format!("profile dimension {d} exceeds the cap {}", opts.max_dim)));
    }
    Ok(())
}

/// Pieces of the cycle map and the number of pruned (one-sided) branches.
fn enumerate(policy: PolicyMap, space: &FiniteCyclicSpace, opts: &ExactOptions) -> Result<(Vec<AffinePiece>, usize)> {
    check_inputs(policy, opts)?;
    let d = policy.dim();
    let marks: Vec<(AffineExpr, AffineExpr)> = space
        .exact_marks()
        .into_iter()
        .map(|(s, t)| (AffineExpr::constant(s), AffineExpr::constant(t)))
        .collect();
    let mut stack = vec![Vec::new()];
    let mut pieces = Vec::new();
    let mut pruned = 0;
    let mut patterns = 0usize;
    while let Some(script) = stack.pop() {
        patterns += 1;
        if patterns > opts.max_patterns {
            return Err(Error::CapExceeded(format!(
                "more than {} branch patterns ({} pieces so far, {} pending)",
                opts.max_patterns,
                pieces.len(),
                stack.len() + 1
            )));
        }
        let replayed = script.len();
        let mut ex = BranchExplorer::new(d, script);
        let mut u: Vec<AffineExpr> = (0..d).map(|i| AffineExpr::variable(i, d)).collect();
        for (sigma, tau) in &marks {
            u = policy.step(&mut ex, &u, sigma, tau);
        }
        // prunes are counted by the run that first met the decision
        pruned += ex.script[replayed..].iter().filter(|s| !s.split).count();
        stack.extend(ex.alternatives.into_iter().rev());
        pieces.push(AffinePiece {
            matrix: u.iter().map(|e| e.dense(d)).collect(),
            offset: u.iter().map(|e| e.constant.clone()).collect(),
            domain: ex.domain.constraints().to_vec(),
        });
    }
    Ok((pieces, pruned))
}

/// Pieces of the one-cycle map starting at `ω_1`; their domains partition
/// the ordered cone exactly.
pub fn enumerate_pieces(policy: PolicyMap, space: &FiniteCyclicSpace) -> Result<Vec<AffinePiece>> {
    enumerate_pieces_with(policy, space, &ExactOptions::default())
}

pub fn enumerate_pieces_with(
    policy: PolicyMap,
    space: &FiniteCyclicSpace,
    opts: &ExactOptions,
) -> Result<Vec<AffinePiece>> {
    Ok(enumerate(policy, space, opts)?.0)
}

/// Composes the policy maps over one cycle in rationals; returns the orbit
/// `u, f_1(u), …` with `K + 1` entries (the last one is `F(u)`).
pub fn push_through_cycle(policy: PolicyMap, space: &FiniteCyclicSpace, u: &[Rational]) -> Vec<Vec<Rational>> {
    let mut orbit = vec![u.to_vec()];
    for (sigma, tau) in space.exact_marks() {
        let next = policy.step(&mut Exact, orbit.last().expect("nonempty"), &sigma, &tau);
        orbit.push(next);
    }
    orbit
}

/// `max_i ‖X(ω_{i+1}) − policy(X(ω_i), mark_i)‖∞` in exact arithmetic.
pub fn exact_stationarity_residual(
    policy: PolicyMap,
    space: &FiniteCyclicSpace,
    orbit: &[Vec<Rational>],
) -> Result<Rational> {
    let k = space.len();
    if orbit.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: orbit.len() });
    }
    let mut worst = Rational::zero();
    for (i, (sigma, tau)) in space.exact_marks().into_iter().enumerate() {
        if orbit[i].len() != policy.dim() {
            return Err(Error::DimensionMismatch { expected: policy.dim(), got: orbit[i].len() });
        }
        let image = policy.step(&mut Exact, &orbit[i], &sigma, &tau);
        for (a, b) in image.iter().zip(&orbit[(i + 1) % k]) {
            let diff = (a - b).abs();
            if diff > worst {
                worst = diff;
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    None,
    Unique,
    Multiple,
    SubspaceFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    Point,
    /// A polyhedral set of fixed points with more than one element; the
    /// orbit is one representative.
    Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSolution {
    pub kind: SolutionKind,
    /// Profiles at `ω_1, …, ω_K`.
    #[serde(with = "serde_rational_mat")]
    pub orbit: Vec<Vec<Rational>>,
    /// For families: the constraints describing all profiles at `ω_1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceTrace {
    pub index: usize,
    pub domain: Vec<String>,
    #[serde(with = "serde_rational_mat")]
    pub matrix: Vec<Vec<Rational>>,
    #[serde(with = "serde_rational_vec")]
    pub offset: Vec<Rational>,
    /// `"empty"`, `"point"` or `"family"`.
    pub fixed_points: String,
    #[serde(with = "serde_rational_vec")]
    pub candidate: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub policy: PolicyMap,
    pub space: FiniteCyclicSpace,
    /// Branch patterns visited: the feasible pieces plus the pruned ones.
    pub pieces_examined: usize,
    pub feasible_pieces: usize,
    /// Branch halves discarded because their domain was empty.
    pub pruned_branches: usize,
    pub solutions: Vec<CycleSolution>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<PieceTrace>>,
}

pub fn find_cycle_fixed_points(policy: PolicyMap, space: &FiniteCyclicSpace) -> Result<FixedPointReport> {
    find_cycle_fixed_points_with(policy, space, &ExactOptions::default())
}

pub fn find_cycle_fixed_points_with(
    policy: PolicyMap,
    space: &FiniteCyclicSpace,
    opts: &ExactOptions,
) -> Result<FixedPointReport> {
    let (pieces, pruned) = enumerate(policy, space, opts)?;
    let solved: Vec<(Option<CycleSolution>, PieceTrace)> = pieces
        .par_iter()
        .enumerate()
        .map(|(index, piece)| solve_piece(policy, space, index, piece))
        .collect::<Result<_>>()?;

    let mut solutions = Vec::new();
    let mut traces = Vec::new();
    for (sol, tr) in solved {
        solutions.extend(sol);
        traces.push(tr);
    }
    solutions.sort_by(|a, b| a.orbit.cmp(&b.orbit));
    let verdict = if solutions.is_empty() {
        Verdict::None
    } else if solutions.iter().any(|s| s.kind == SolutionKind::Family) {
        Verdict::SubspaceFamily
    } else if solutions.len() == 1 {
        Verdict::Unique
    } else {
        Verdict::Multiple
    };
    Ok(FixedPointReport {
        policy,
        space: space.clone(),
        pieces_examined: pieces.len() + pruned,
        feasible_pieces: pieces.len(),
        pruned_branches: pruned,
        solutions,
        verdict,
        trace: opts.trace.then_some(traces),
    })
}

fn solve_piece(
    policy: PolicyMap,
    space: &FiniteCyclicSpace,
    index: usize,
    piece: &AffinePiece,
) -> Result<(Option<CycleSolution>, PieceTrace)> {
    let set = piece.fixed_point_set();
    let witness = set.witness();
    let (label, solution) = match witness {
        None => ("empty", None),
        Some(u) => {
            let single = set.is_singleton();
            let mut orbit = push_through_cycle(policy, space, &u);
            let closed = orbit.pop().expect("K >= 1");
            if closed != u || !exact_stationarity_residual(policy, space, &orbit)?.is_zero() {
                return Err(Error::InvalidArgument(format!(
                    "piece {index}: fixed point [{}] does not close the orbit",
                    u.iter().map(format_rational).collect::<Vec<_>>().join(", ")
                )));
            }
            let (kind, constraints) = if single {
                (SolutionKind::Point, Vec::new())
            } else {
                (SolutionKind::Family, set.constraints().to_vec())
            };
            (if single { "point" } else { "family" }, Some(CycleSolution { kind, orbit, constraints }))
        }
    };
    let trace = PieceTrace {
        index,
        domain: piece.domain.iter().map(|c| c.to_string()).collect(),
        matrix: piece.matrix.clone(),
        offset: piece.offset.clone(),
        fixed_points: label.into(),
        candidate: solution.as_ref().map(|s| s.orbit[0].clone()).unwrap_or_default(),
    };
    Ok((solution, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub jpsw: FixedPointReport,
    pub jsw: FixedPointReport,
    #[serde(with = "crate::scalar::serde_rational")]
    pub mean_sigma: Rational,
    #[serde(with = "crate::scalar::serde_rational")]
    pub mean_tau: Rational,
    /// `E σ < S E τ` for `S = 2`.
    pub load_condition_holds: bool,
    /// No stationary solution for the partial-splitting policy while the
    /// plain policy has one, under the load condition.
    pub reproduced: bool,
}

/// JPSW(2,1) and JSW(2) on the three-point space.
pub fn verify_counterexample() -> Result<CounterexampleReport> {
    let space = counterexample_space();
    let jpsw = find_cycle_fixed_points(PolicyMap::jpsw(2, 1)?, &space)?;
    let jsw = find_cycle_fixed_points(PolicyMap::jsw(2)?, &space)?;
    let mean_sigma = space.exact_mean_sigma();
    let mean_tau = space.exact_mean_tau();
    let load_condition_holds = mean_sigma < Rational::from_integer(2.into()) * &mean_tau;
    let reproduced = load_condition_holds && jpsw.verdict == Verdict::None && !jsw.solutions.is_empty();
    Ok(CounterexampleReport { jpsw, jsw, mean_sigma, mean_tau, load_condition_holds, reproduced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_cyclic_space, Mark};

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn single(sigma: f64, tau: f64) -> FiniteCyclicSpace {
        build_cyclic_space(vec![Mark { sigma, tau }]).unwrap()
    }

    #[test]
    fn cone_constraints() {
        let c = cone(3);
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|c| c.holds(&[q(0, 1), q(1, 2), q(1, 2)])));
        assert!(!c.iter().all(|c| c.holds(&[q(1, 1), q(1, 2), q(2, 1)])));
    }

    #[test]
    fn loss_single_server_has_no_solution() {
        let s = single(2.0, 1.0);
        let loss = PolicyMap::loss(1).unwrap();
        let pieces = enumerate_pieces(loss, &s).unwrap();
        // u = 0 ↦ 1;  0 < u ≤ 1 ↦ 0;  u > 1 ↦ u − 1
        assert_eq!(pieces.len(), 3);
        let at = |x: Rational| pieces.iter().find(|p| p.contains(&[x.clone()])).unwrap().apply(&[x]);
        assert_eq!(at(q(0, 1)), vec![q(1, 1)]);
        assert_eq!(at(q(1, 2)), vec![q(0, 1)]);
        assert_eq!(at(q(5, 2)), vec![q(3, 2)]);
        let r = find_cycle_fixed_points(loss, &s).unwrap();
        assert_eq!(r.verdict, Verdict::None);
        assert_eq!(r.feasible_pieces, 3);
        assert!(r.solutions.is_empty());
    }

    #[test]
    fn lindley_without_service() {
        let s = single(0.0, 1.0);
        let jsw = PolicyMap::jsw(1).unwrap();
        let r = find_cycle_fixed_points_with(jsw, &s, &ExactOptions { trace: true, ..Default::default() }).unwrap();
        // [u − 1]⁺ splits at u = 1; only the flat part carries a fixed point
        assert_eq!(r.feasible_pieces, 2);
        assert_eq!(r.pieces_examined, 2);
        let trace = r.trace.as_ref().unwrap();
        assert_eq!(trace.iter().filter(|t| t.fixed_points != "empty").count(), 1);
        assert_eq!(r.verdict, Verdict::Unique);
        assert_eq!(r.solutions[0].orbit, vec![vec![q(0, 1)]]);
    }

    #[test]
    fn counterexample_has_no_jpsw_solution() {
        let r = verify_counterexample().unwrap();
        assert!(r.reproduced);
        assert_eq!(r.jpsw.verdict, Verdict::None);
        assert!(r.jpsw.pieces_examined >= 10);
        assert!(r.jpsw.feasible_pieces >= 8);
        assert_eq!(r.mean_sigma, q(23, 12));
        assert_eq!(r.mean_tau, q(1, 1));
        assert!(r.load_condition_holds);
        assert!(!r.jsw.solutions.is_empty());
        for sol in &r.jsw.solutions {
            let res = exact_stationarity_residual(r.jsw.policy, &r.jsw.space, &sol.orbit).unwrap();
            assert!(res.is_zero());
        }
    }

    #[test]
    fn report_serializes_rationals_as_strings() {
        let r = find_cycle_fixed_points(PolicyMap::jsw(1).unwrap(), &single(0.0, 1.0)).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["verdict"], "unique");
        assert_eq!(json["solutions"][0]["orbit"][0][0], "0/1");
        assert_eq!(serde_json::to_value(Verdict::SubspaceFamily).unwrap(), "subspace-family");
        let back: FixedPointReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn caps_are_enforced() {
        let s = single(1.0, 1.0);
        let e = find_cycle_fixed_points(PolicyMap::jsw(5).unwrap(), &s).unwrap_err();
        assert!(matches!(e, Error::CapExceeded(_)));
        let opts = ExactOptions { max_patterns: 2, ..Default::default() };
        let e = enumerate_pieces_with(PolicyMap::jsw(3).unwrap(), &counterexample_space(), &opts).unwrap_err();
        assert!(matches!(e, Error::CapExceeded(_)));
    }

    #[test]
    fn residual_detects_mismatch() {
        let s = single(2.0, 1.0);
        let jsw = PolicyMap::jsw(1).unwrap();
        assert_eq!(exact_stationarity_residual(jsw, &s, &[vec![q(0, 1)]]).unwrap(), q(1, 1));
        assert!(exact_stationarity_residual(jsw, &s, &[]).is_err());
    }
}
