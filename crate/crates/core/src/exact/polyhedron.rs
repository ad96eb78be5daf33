//! Exact Fourier–Motzkin elimination over rationals with strict inequalities.
//!
//! Equalities are eliminated by substitution, inequalities by pairwise
//! combination. After every step, parallel constraints are merged keeping
//! the tightest one, which keeps difference-bound systems (the only kind the
//! workload maps produce) quadratic in the dimension.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use super::affine::{LinearConstraint, Relation};
use crate::scalar::Rational;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone)]
enum Stage {
    /// `x_var = bound − Σ coeffs·x` (coefficient on `var` is zero).
    Substitute { var: usize, coeffs: Vec<Rational>, bound: Rational },
    /// Constraints mentioning `var` at the time it was eliminated.
    Bounds { var: usize, constraints: Vec<LinearConstraint> },
}

/// One-sided bound `(value, strict)`.
pub type Bound = Option<(Rational, bool)>;

impl Polyhedron {
    pub fn new(dim: usize, constraints: Vec<LinearConstraint>) -> Self {
        debug_assert!(constraints.iter().all(|c| c.dim() == dim));
        Polyhedron { dim, constraints }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.constraints.iter().all(|c| c.holds(x))
    }

    pub fn with(&self, extra: LinearConstraint) -> Self {
        let mut constraints = self.constraints.clone();
        constraints.push(extra);
        Polyhedron { dim: self.dim, constraints }
    }

    pub fn is_feasible(&self) -> bool {
        self.eliminate(&(0..self.dim).collect::<Vec<_>>()).is_some()
    }

    /// A point of the polyhedron, preferring interior points on strict facets.
    pub fn witness(&self) -> Option<Vec<Rational>> {
        self.point_with(pick)
    }

    /// Builds a point coordinate by coordinate; `choose` receives the
    /// admissible range for each coordinate given those already fixed and
    /// must return a value inside it. Any such choice extends to a full point.
    pub fn point_with(&self, choose: impl FnMut(Bound, Bound) -> Rational) -> Option<Vec<Rational>> {
        Some(self.sampler()?.point_with(choose))
    }

    /// Elimination done once, for drawing many points; `None` if empty.
    pub fn sampler(&self) -> Option<PointSampler> {
        let order: Vec<usize> = (0..self.dim).rev().collect();
        Some(PointSampler { dim: self.dim, stages: self.eliminate(&order)? })
    }

    /// Range of coordinate `var` over the polyhedron; `None` if empty.
    pub fn coordinate_range(&self, var: usize) -> Option<(Bound, Bound)> {
        let others: Vec<usize> = (0..self.dim).filter(|&i| i != var).collect();
        let stages = self.eliminate_keep(&others)?;
        let x = vec![Rational::zero(); self.dim];
        Some(bounds_on(var, &stages, &x))
    }

    /// True when the polyhedron is a single point.
    pub fn is_singleton(&self) -> bool {
        (0..self.dim).all(|v| match self.coordinate_range(v) {
            Some((Some((lo, false)), Some((hi, false)))) => lo == hi,
            _ => false,
        })
    }

    /// Eliminates the listed variables in order; `None` if infeasible.
    fn eliminate(&self, order: &[usize]) -> Option<Vec<Stage>> {
        let mut current = simplify(self.constraints.clone())?;
        let mut stages = Vec::with_capacity(order.len());
        for &var in order {
            let (stage, next) = eliminate_var(var, current)?;
            stages.push(stage);
            current = next;
        }
        Some(stages)
    }

    /// Eliminates `order` and returns the remaining constraints.
    fn eliminate_keep(&self, order: &[usize]) -> Option<Vec<LinearConstraint>> {
        let mut current = simplify(self.constraints.clone())?;
        for &var in order {
            current = eliminate_var(var, current)?.1;
        }
        Some(current)
    }
}

#[derive(Debug, Clone)]
pub struct PointSampler {
    dim: usize,
    stages: Vec<Stage>,
}

impl PointSampler {
    pub fn point_with(&self, mut choose: impl FnMut(Bound, Bound) -> Rational) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.dim];
        for stage in self.stages.iter().rev() {
            match stage {
                Stage::Substitute { var, coeffs, bound } => {
                    let rest = dot(coeffs, &x);
                    x[*var] = bound - rest;
                }
                Stage::Bounds { var, constraints } => {
                    let (lo, hi) = bounds_on(*var, constraints, &x);
                    x[*var] = choose(lo, hi);
                }
            }
        }
        x
    }
}

fn dot(a: &[Rational], x: &[Rational]) -> Rational {
    a.iter().zip(x).fold(Rational::zero(), |acc, (c, v)| acc + c * v)
}

fn eliminate_var(var: usize, cons: Vec<LinearConstraint>) -> Option<(Stage, Vec<LinearConstraint>)> {
    if let Some(pos) = cons.iter().position(|c| c.rel == Relation::Eq && !c.coeffs[var].is_zero()) {
        let eq = &cons[pos];
        let a = eq.coeffs[var].clone();
        let mut coeffs: Vec<Rational> = eq.coeffs.iter().map(|c| c / &a).collect();
        let bound = &eq.bound / &a;
        coeffs[var] = Rational::zero();
        let mut next = Vec::with_capacity(cons.len());
        for (i, c) in cons.iter().enumerate() {
            if i == pos {
                continue;
            }
            let k = c.coeffs[var].clone();
            if k.is_zero() {
                next.push(c.clone());
                continue;
            }
            // substitute x_var = bound − coeffs·x
            let new_coeffs = c.coeffs.iter().zip(&coeffs).map(|(ci, ei)| ci - &k * ei).collect::<Vec<_>>();
            let mut nc = LinearConstraint::new(new_coeffs, c.rel, &c.bound - &k * &bound);
            nc.coeffs[var] = Rational::zero();
            next.push(nc);
        }
        let next = simplify(next)?;
        return Some((Stage::Substitute { var, coeffs, bound }, next));
    }

    let mut lower = Vec::new(); // coefficient < 0: gives a lower bound on x_var
    let mut upper = Vec::new();
    let mut rest = Vec::new();
    for c in cons {
        let k = &c.coeffs[var];
        if k.is_zero() {
            rest.push(c);
        } else if k.is_positive() {
            upper.push(c);
        } else {
            lower.push(c);
        }
    }
    let involved: Vec<LinearConstraint> = lower.iter().chain(&upper).cloned().collect();
    for u in &upper {
        for l in &lower {
            let a = u.coeffs[var].clone();
            let b = -l.coeffs[var].clone();
            // b·u + a·l cancels x_var
            let coeffs = u.coeffs.iter().zip(&l.coeffs).map(|(x, y)| &b * x + &a * y).collect::<Vec<_>>();
            let rel = if u.rel == Relation::Lt || l.rel == Relation::Lt { Relation::Lt } else { Relation::Le };
            let mut c = LinearConstraint::new(coeffs, rel, &b * &u.bound + &a * &l.bound);
            c.coeffs[var] = Rational::zero();
            rest.push(c);
        }
    }
    let next = simplify(rest)?;
    Some((Stage::Bounds { var, constraints: involved }, next))
}

/// Drops trivial constraints, merges parallel ones; `None` if a constant
/// constraint is violated.
fn simplify(cons: Vec<LinearConstraint>) -> Option<Vec<LinearConstraint>> {
    let mut ineq: HashMap<Vec<Rational>, (Rational, bool)> = HashMap::new();
    let mut order: Vec<Vec<Rational>> = Vec::new();
    let mut eqs: Vec<LinearConstraint> = Vec::new();
    for c in cons {
        let Some(lead) = c.coeffs.iter().find(|v| !v.is_zero()).cloned() else {
            if !c.rel.holds(&Rational::zero(), &c.bound) {
                return None;
            }
            continue;
        };
        let scale = lead.abs();
        let coeffs: Vec<Rational> = c.coeffs.iter().map(|v| v / &scale).collect();
        let bound = &c.bound / &scale;
        match c.rel {
            Relation::Eq => {
                // canonical sign: leading coefficient +1
                let (coeffs, bound) = if lead.is_negative() {
                    (coeffs.iter().map(|v| -v).collect(), -bound)
                } else {
                    (coeffs, bound)
                };
                let nc = LinearConstraint::new(coeffs, Relation::Eq, bound);
                if let Some(old) = eqs.iter().find(|e| e.coeffs == nc.coeffs) {
                    if old.bound != nc.bound {
                        return None;
                    }
                } else {
                    eqs.push(nc);
                }
            }
            rel => {
                let strict = rel == Relation::Lt;
                match ineq.get_mut(&coeffs) {
                    Some(slot) => {
                        if bound < slot.0 || (bound == slot.0 && strict) {
                            *slot = (bound, strict);
                        }
                    }
                    None => {
                        order.push(coeffs.clone());
                        ineq.insert(coeffs, (bound, strict));
                    }
                }
            }
        }
    }
    // opposite parallel inequalities: a·x ≤ b and −a·x ≤ c need −c ≤ b
    for coeffs in &order {
        let neg: Vec<Rational> = coeffs.iter().map(|v| -v).collect();
        if let (Some((b, sb)), Some((c, sc))) = (ineq.get(coeffs), ineq.get(&neg)) {
            let lo = -c.clone();
            if lo > *b || (lo == *b && (*sb || *sc)) {
                return None;
            }
        }
    }
    let mut out = eqs;
    for coeffs in order {
        let (bound, strict) = ineq.remove(&coeffs).expect("present");
        out.push(LinearConstraint::new(coeffs, if strict { Relation::Lt } else { Relation::Le }, bound));
    }
    Some(out)
}

/// Bounds on `x_var` implied by `cons` once the other coordinates take the
/// values in `x`.
fn bounds_on(var: usize, cons: &[LinearConstraint], x: &[Rational]) -> (Bound, Bound) {
    let mut lo: Bound = None;
    let mut hi: Bound = None;
    for c in cons {
        let k = &c.coeffs[var];
        if k.is_zero() {
            continue;
        }
        let rest: Rational = c
            .coeffs
            .iter()
            .zip(x)
            .enumerate()
            .filter(|(i, _)| *i != var)
            .fold(Rational::zero(), |acc, (_, (ci, xi))| acc + ci * xi);
        let v = (&c.bound - rest) / k;
        let strict = c.rel == Relation::Lt;
        let tighten_hi = |hi: &mut Bound, v: Rational, strict: bool| match hi {
            Some((h, s)) if v > *h || (v == *h && (*s || !strict)) => {}
            _ => *hi = Some((v, strict)),
        };
        let tighten_lo = |lo: &mut Bound, v: Rational, strict: bool| match lo {
            Some((l, s)) if v < *l || (v == *l && (*s || !strict)) => {}
            _ => *lo = Some((v, strict)),
        };
        match c.rel {
            Relation::Eq => {
                tighten_hi(&mut hi, v.clone(), false);
                tighten_lo(&mut lo, v, false);
            }
            _ if k.is_positive() => tighten_hi(&mut hi, v, strict),
            _ => tighten_lo(&mut lo, v, strict),
        }
    }
    (lo, hi)
}

fn pick(lo: Bound, hi: Bound) -> Rational {
    let one = Rational::one();
    match (lo, hi) {
        (None, None) => Rational::zero(),
        (Some((l, s)), None) => {
            if s {
                l + one
            } else {
                l
            }
        }
        (None, Some((h, s))) => {
            if s {
                h - one
            } else {
                h
            }
        }
        // feasibility guarantees l < h, or l == h with both ends closed
        (Some((l, ls)), Some((h, hs))) => {
            if l == h || !ls {
                l
            } else if !hs {
                h
            } else {
                (l + h) / Rational::from_integer(2.into())
            }
        }
    }
}
