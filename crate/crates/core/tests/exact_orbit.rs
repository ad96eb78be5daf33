use jpsw_core::exact::{
    cone, enumerate_pieces, exact_stationarity_residual, find_cycle_fixed_points, push_through_cycle, Bound,
    Polyhedron, Verdict,
};
use jpsw_core::loynes::loynes_iterate;
use jpsw_core::scalar::{rational_from_f64, Rational};
use jpsw_core::space::{build_cyclic_space, counterexample_space, cyclic_history, FiniteCyclicSpace, Mark};
use jpsw_core::PolicyMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

/// Random rational in the admissible range, hitting closed endpoints now and then.
fn choose(rng: &mut ChaCha8Rng, lo: Bound, hi: Bound) -> Rational {
    let step = |k: i64| q(k, 8);
    match (lo, hi) {
        (None, None) => step(rng.random_range(-40..40)),
        (Some((l, strict)), None) => l + step(rng.random_range(if strict { 1 } else { 0 }..80)),
        (None, Some((h, strict))) => h - step(rng.random_range(if strict { 1 } else { 0 }..80)),
        (Some((l, ls)), Some((h, hs))) => {
            if l == h {
                return l;
            }
            let k = rng.random_range(if ls { 1 } else { 0 }..=if hs { 63 } else { 64 });
            &l + (&h - &l) * q(k, 64)
        }
    }
}

fn cone_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Rational> {
    let mut acc = Rational::from_integer(0.into());
    (0..dim)
        .map(|_| {
            // ties and zeros are frequent on purpose: they sit on piece boundaries
            if rng.random_bool(0.7) {
                acc += q(rng.random_range(0..24), 4);
            }
            acc.clone()
        })
        .collect()
}

fn settings() -> Vec<(PolicyMap, FiniteCyclicSpace)> {
    let ce = counterexample_space();
    let two = build_cyclic_space(vec![Mark { sigma: 3.0, tau: 1.0 }, Mark { sigma: 0.5, tau: 2.0 }]).unwrap();
    vec![
        (PolicyMap::jpsw(2, 1).unwrap(), ce.clone()),
        (PolicyMap::jsw(2).unwrap(), ce.clone()),
        (PolicyMap::loss(2).unwrap(), ce.clone()),
        (PolicyMap::phi(2, 1).unwrap(), ce.clone()),
        (PolicyMap::psi(2).unwrap(), two.clone()),
        (PolicyMap::gamma(2).unwrap(), two.clone()),
        (PolicyMap::jpsw(3, 1).unwrap(), two),
    ]
}

#[test]
fn pieces_agree_with_direct_composition() {
    for (policy, space) in settings() {
        let pieces = enumerate_pieces(policy, &space).unwrap();
        pieces.par_iter().enumerate().for_each(|(i, piece)| {
            let mut rng = ChaCha8Rng::seed_from_u64(11 + i as u64);
            let sampler = piece.polyhedron().sampler().unwrap();
            for _ in 0..10_000 {
                let u = sampler.point_with(|lo, hi| choose(&mut rng, lo, hi));
                assert!(piece.contains(&u));
                let direct = push_through_cycle(policy, &space, &u).pop().unwrap();
                assert_eq!(piece.apply(&u), direct, "{policy} at {u:?}");
            }
        });
    }
}

#[test]
fn pieces_partition_the_cone() {
    for (policy, space) in settings() {
        let pieces = enumerate_pieces(policy, &space).unwrap();
        let d = policy.dim();
        let full = Polyhedron::new(d, cone(d));
        (0..10_000u64).into_par_iter().for_each(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(12);
            rng.set_stream(i);
            let u = cone_point(&mut rng, d);
            assert!(full.contains(&u));
            let hits: Vec<_> = pieces.iter().filter(|p| p.contains(&u)).collect();
            assert_eq!(hits.len(), 1, "{policy} at {u:?}");
            assert_eq!(hits[0].apply(&u), push_through_cycle(policy, &space, &u).pop().unwrap());
        });
    }
}

#[test]
fn reported_solutions_close_exactly() {
    for (policy, space) in settings() {
        let r = find_cycle_fixed_points(policy, &space).unwrap();
        for sol in &r.solutions {
            assert_eq!(sol.orbit.len(), space.len());
            assert_eq!(exact_stationarity_residual(policy, &space, &sol.orbit).unwrap(), q(0, 1));
        }
        assert_eq!(r.verdict == Verdict::None, r.solutions.is_empty());
    }
}

#[test]
fn jsw_solution_is_the_loynes_limit() {
    let space = counterexample_space();
    let jsw = PolicyMap::jsw(2).unwrap();
    let r = find_cycle_fixed_points(jsw, &space).unwrap();
    assert_ne!(r.verdict, Verdict::None);

    let h = cyclic_history(&space, 0, 60).unwrap();
    let loynes = loynes_iterate(jsw, &h, 60, 0.0).unwrap();
    assert!(loynes.converged);
    let limit: Vec<Rational> =
        loynes.limit.unwrap().values().iter().map(|&x| rational_from_f64(x).unwrap()).collect();
    assert_eq!(push_through_cycle(jsw, &space, &limit).pop().unwrap(), limit);
    assert!(r.solutions.iter().any(|s| s.orbit[0] == limit));
    // minimality of the Loynes solution
    for s in &r.solutions {
        assert!(s.orbit[0].iter().zip(&limit).all(|(a, b)| a >= b));
    }
    assert_eq!(limit, vec![q(0, 1), q(5, 4)]);
}

#[test]
fn no_forward_orbit_returns_when_verdict_is_none() {
    let space = counterexample_space();
    let jpsw = PolicyMap::jpsw(2, 1).unwrap();
    assert_eq!(find_cycle_fixed_points(jpsw, &space).unwrap().verdict, Verdict::None);
    let mut starts = Vec::new();
    for i in 0..10 {
        for j in i..20 {
            if starts.len() < 100 {
                starts.push(vec![q(i, 4), q(j, 4)]);
            }
        }
    }
    assert_eq!(starts.len(), 100);
    for start in starts {
        let mut u = start;
        for _ in 0..1_000 {
            let next = push_through_cycle(jpsw, &space, &u).pop().unwrap();
            assert_ne!(next, u);
            u = next;
        }
    }
}

#[test]
fn lossy_and_dominating_policies() {
    let space = counterexample_space();
    // the dominating map is monotone but overloaded here (Eσ > (S−p)Eτ): its
    // Loynes sequence grows without bound and no periodic solution exists
    let phi_map = PolicyMap::phi(2, 1).unwrap();
    let phi = find_cycle_fixed_points(phi_map, &space).unwrap();
    assert_eq!(phi.verdict, Verdict::None);
    let h = cyclic_history(&space, 0, 300).unwrap();
    let loynes = loynes_iterate(phi_map, &h, 300, 0.0).unwrap();
    assert!(!loynes.converged);
    assert!(loynes.iterates[300].at(2) > loynes.iterates[150].at(2) + 10.0);
    let gamma = find_cycle_fixed_points(PolicyMap::gamma(1).unwrap(), &space).unwrap();
    // Γ¹ has the unique solution Z_1 = (1, 1.25, 0.5)
    assert_eq!(gamma.verdict, Verdict::Unique);
    assert_eq!(gamma.solutions[0].orbit, vec![vec![q(1, 1)], vec![q(5, 4)], vec![q(1, 2)]]);
}
