mod common;

use common::{certified, expt, prototype, random_tower};
use freegroup::{Alphabet, Decision, Word};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use towercalc::classify::{core, core_in_order, equiv, is_minimal, is_prime};
use towercalc::expr::GroupExpr;
use towercalc::limits::{rho_n, twist_auto, verify_discriminating, EtagePresentation};
use towercalc::retract::{decide_retractable, Obstruction};
use towercalc::splitting::{grushko_blowup, make_k, make_parachute, CenteredSplitting, Edge};
use towercalc::surface::Surface;
use towercalc::tower::{
    b1_mod2, normalize_etages, stabilize, strip_outer_etage, termination_measure, upgrade_to_simple, Tower,
};

fn tower(seed: u64, depth: usize) -> common::Built {
    random_tower(&mut ChaCha8Rng::seed_from_u64(seed), depth)
}

/// Generator count and relators of an expression built without atoms.
fn relators(e: &GroupExpr) -> Option<(usize, Vec<Word>)> {
    let shift = |w: &Word, by: usize| {
        Word::from_letters(w.letters().iter().map(|l| freegroup::Letter::new(l.index() + by, l.is_inverse())))
    };
    match e {
        GroupExpr::Trivial => Some((0, vec![])),
        GroupExpr::Free(names) => Some((names.len(), vec![])),
        GroupExpr::ClosedSurface(s) => {
            let n = s.handle_generators() as usize;
            let gens: Vec<Word> = (0..n).map(Word::gen).collect();
            let mut r = Word::identity();
            if s.orientable {
                for p in gens.chunks(2) {
                    r = r.mul(&Word::commutator(&p[0], &p[1]));
                }
            } else {
                for g in &gens {
                    r = r.mul(&g.mul(g));
                }
            }
            Some((n, vec![r]))
        }
        GroupExpr::FreeProduct(fs) => {
            let mut rank = 0;
            let mut out = Vec::new();
            for f in fs {
                let (n, rs) = relators(f)?;
                out.extend(rs.iter().map(|w| shift(w, rank)));
                rank += n;
            }
            Some((rank, out))
        }
        GroupExpr::Etage(et) => {
            let c = &et.splitting;
            let p = c.presentation();
            let (_, mut out) = relators(&GroupExpr::FreeProduct(c.bottoms().to_vec()))?;
            out.push(p.relator.clone());
            Some((p.rank(), out))
        }
        GroupExpr::Atom(_) => None,
    }
}

/// `log2 |Hom(G, Z/2)|` by enumerating all assignments.
fn b1_by_counting(e: &GroupExpr) -> Option<u32> {
    let (rank, rels) = relators(e)?;
    if rank > 16 {
        return None;
    }
    let parity = |w: &Word, bits: u32| w.letters().iter().filter(|l| bits >> l.index() & 1 == 1).count() % 2;
    let count = (0u32..1 << rank).filter(|&bits| rels.iter().all(|r| parity(r, bits) == 0)).count();
    Some(count.trailing_zeros())
}

fn etages(e: &GroupExpr) -> Vec<&GroupExpr> {
    let mut out = Vec::new();
    e.walk(&mut |x| {
        if matches!(x, GroupExpr::Etage(_)) {
            out.push(x);
        }
    });
    out
}

fn base_of(e: &GroupExpr) -> GroupExpr {
    let GroupExpr::Etage(et) = e else { unreachable!() };
    GroupExpr::product(et.splitting.bottoms().iter().cloned())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn betti_rises_across_every_etage(seed in any::<u64>()) {
        let t = tower(seed, 4);
        for e in etages(&t.expr) {
            if let (Some(top), Some(bottom)) = (b1_mod2(e), b1_mod2(&base_of(e))) {
                prop_assert!(top > bottom, "{} <= {}", top, bottom);
            }
        }
    }

    #[test]
    fn betti_matches_homomorphism_count(seed in any::<u64>()) {
        let t = tower(seed, 3);
        if let Some(expected) = b1_by_counting(&t.expr) {
            prop_assert_eq!(b1_mod2(&t.expr), Some(expected));
        }
    }

    #[test]
    fn normalization_keeps_the_core(seed in any::<u64>()) {
        let t = Tower::new(tower(seed, 4).expr).unwrap();
        let n = normalize_etages(&t);
        prop_assert_eq!(core(n.expr()).unwrap(), core(t.expr()).unwrap());
        prop_assert_eq!(b1_mod2(n.expr()), b1_mod2(t.expr()));
    }

    #[test]
    fn stabilization_is_simple_and_keeps_the_core(seed in any::<u64>()) {
        let t = Tower::new(tower(seed, 3).expr).unwrap();
        let s = stabilize(&t).unwrap();
        for e in etages(s.expr()) {
            let GroupExpr::Etage(et) = e else { unreachable!() };
            prop_assert!(et.splitting.is_simple());
        }
        prop_assert_eq!(core(s.expr()).unwrap(), core(t.expr()).unwrap());
        let added: u32 = etages(t.expr())
            .iter()
            .map(|e| match e {
                GroupExpr::Etage(et) => et.splitting.bottoms().len() as u32 - 1,
                _ => 0,
            })
            .sum();
        prop_assert_eq!(b1_mod2(s.expr()), b1_mod2(t.expr()).map(|b| b + added));
    }

    #[test]
    fn stripping_terminates_within_the_measure(seed in any::<u64>()) {
        let t = tower(seed, 4);
        let bound = termination_measure(&t.expr);
        let mut cur = t.expr.clone();
        let mut steps = 0;
        while let Some(next) = strip_outer_etage(&cur) {
            if let (Some(a), Some(b)) = (b1_mod2(&cur), b1_mod2(&next)) {
                prop_assert!(b < a);
            }
            cur = next;
            steps += 1;
        }
        prop_assert!(steps <= bound, "{} steps, measure {}", steps, bound);
    }

    #[test]
    fn rule_order_does_not_matter(seed in any::<u64>(), order in any::<u64>()) {
        let t = tower(seed, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(order);
        let c = core_in_order(&t.expr, |m| rand::Rng::gen_range(&mut rng, 0..m)).unwrap();
        let mut names: Vec<String> = c.factors.iter().map(|s| s.to_string()).collect();
        names.sort();
        prop_assert_eq!(names, t.core);
    }

    #[test]
    fn core_is_idempotent(seed in any::<u64>()) {
        let c = core(&tower(seed, 4).expr).unwrap();
        prop_assert_eq!(core(&c.to_expr()).unwrap(), c);
    }

    #[test]
    fn core_distributes(a in any::<u64>(), b in any::<u64>()) {
        let (x, y) = (tower(a, 3).expr, tower(b, 3).expr);
        let joint = core(&GroupExpr::FreeProduct(vec![x.clone(), y.clone()])).unwrap();
        prop_assert_eq!(joint, core(&x).unwrap().union(&core(&y).unwrap()));
    }

    #[test]
    fn free_factors_do_not_change_the_class(seed in any::<u64>(), r in 1usize..4) {
        let x = tower(seed, 3).expr;
        let z = GroupExpr::product([x.clone()]);
        prop_assume!(!z.is_abelian());
        let bigger = GroupExpr::FreeProduct(vec![x.clone(), GroupExpr::free(r)]);
        prop_assert!(equiv(&x, &bigger).unwrap());
    }

    #[test]
    fn punctured_torus_verdicts_are_checkable(w in proptest::collection::vec(prop_oneof![Just(1i32), Just(-1), Just(2), Just(-2)], 1..7)) {
        let word = Word::from_signed(&w);
        prop_assume!(!word.is_identity());
        let c = CenteredSplitting::new(
            Surface::orientable(1, 1),
            vec![GroupExpr::free(2)],
            vec![Edge { boundary: 0, bottom: 0, word: word.clone() }],
        ).unwrap();
        match decide_retractable(&c) {
            Decision::Yes(r) => {
                prop_assert!(r.verify());
                prop_assert!(r.images.apply(&c.presentation().relator).unwrap().is_identity());
                prop_assert_eq!(&r.images.images()[..2], &[Word::gen(0), Word::gen(1)]);
            }
            Decision::No(Obstruction::Homology { .. }) => {
                prop_assert!(word.exponent_sum(0) != 0 || word.exponent_sum(1) != 0);
            }
            Decision::No(o) => prop_assert!(false, "unexpected obstruction {}", o),
            Decision::Unknown(_) => {}
        }
    }

    #[test]
    fn twisting_fixes_the_bottom_and_composes(x in "[ab]{1,3}", y in "[ab]{1,3}") {
        let spaced = |s: &str| s.chars().map(String::from).collect::<Vec<_>>().join(" ");
        let c = expt("[a,b]");
        let ep = EtagePresentation::with_images(&c, &[("u1".to_string(), spaced(&x)), ("v1".to_string(), spaced(&y))]).unwrap();
        let tau = twist_auto(&ep);
        prop_assert_eq!(&tau.images()[..2], &[Word::gen(0), Word::gen(1)]);
        for m in 0..5 {
            let next = tau.then(&rho_n(&ep, m).unwrap()).unwrap();
            prop_assert_eq!(rho_n(&ep, m + 1).unwrap(), next);
        }
    }
}

#[test]
fn discrimination_is_monotone_in_radius() {
    for (x, y) in [("a", "b"), ("a b", "b"), ("a", "a")] {
        let ep = EtagePresentation::with_images(&expt("[a,b]"), &[("u1", x), ("v1", y)]).unwrap();
        let mut last = Some(0);
        for r in 0..=3 {
            let found = verify_discriminating(&ep, r, 16).unwrap().found_n;
            match (last, found) {
                (Some(a), Some(b)) => assert!(b >= a),
                (None, f) => assert_eq!(f, None),
                _ => {}
            }
            last = found;
        }
    }
}

#[test]
fn surface_table_properties() {
    let mut exceptional = 0;
    for g in 0..=6u32 {
        for b in 0..=6 - g {
            for s in [Some(Surface::orientable(g, b)), Surface::non_orientable(g, b).ok()].into_iter().flatten() {
                if s.is_hyperbolic() && s.is_exceptional().unwrap() {
                    exceptional += 1;
                }
                if let Ok(t) = s.remove_pants() {
                    assert_eq!(t.euler_char(), s.euler_char() + 1);
                }
                if s.is_closed() && s.orientable {
                    assert_eq!(s.b1_mod2_closed().unwrap() % 2, 0);
                }
            }
        }
    }
    assert_eq!(exceptional, 4);
}

fn splitting_fixtures() -> Vec<CenteredSplitting> {
    let n22 = Surface::non_orientable(2, 2).unwrap();
    vec![
        expt("[a,b]"),
        expt("a^2 b^2"),
        make_parachute(n22, &[2, 4]).unwrap(),
        make_parachute(Surface::orientable(1, 2), &[3, -3]).unwrap(),
        make_parachute(Surface::orientable(0, 4), &[1, -1, 1, -1]).unwrap(),
        make_k(GroupExpr::atom(prototype(0)), GroupExpr::atom(prototype(1)), "x", "x").unwrap(),
        make_k(GroupExpr::free(2), GroupExpr::named_free(["c", "d"]), "a^2", "c^2").unwrap(),
    ]
}

#[test]
fn splitting_invariants() {
    for c in splitting_fixtures() {
        assert!(c.validate().is_empty());
        assert_eq!(c.to_dot(), c.clone().to_dot());
        if let Ok(g) = grushko_blowup(&c) {
            assert_eq!(g.collapse(), c);
        }
    }
    let p = make_parachute(Surface::orientable(0, 4), &[1, -1, 1, -1]).unwrap();
    assert!(p.base().unwrap().is_z());
    let k = make_k(GroupExpr::atom(prototype(0)), GroupExpr::atom(prototype(1)), "x", "x").unwrap();
    assert_eq!(k.base().unwrap().factors().len(), 2);
}

#[test]
fn upgrade_keeps_the_base_signature() {
    let f = |w: &str| Alphabet::standard(2).parse(w).unwrap();
    for (g, bottoms) in [(2u32, 2usize), (3, 2), (3, 3)] {
        let bs: Vec<GroupExpr> = (0..bottoms).map(|_| GroupExpr::free(2)).collect();
        let edges = (0..bottoms).map(|j| Edge { boundary: j, bottom: j, word: f("[a,b]") }).collect();
        let c = CenteredSplitting::new(Surface::orientable(g, bottoms as u32), bs, edges).unwrap();
        let t = Tower::new(certified(&c)).unwrap();
        let up = upgrade_to_simple(&t).unwrap();
        let GroupExpr::Etage(et) = up.expr() else { panic!() };
        assert!(et.splitting.is_simple());
        assert_eq!(et.splitting.surface().euler_char(), c.surface().euler_char() + bottoms as i64 - 1);
        let (old, new) = (base_of(t.expr()), base_of(up.expr()));
        assert_eq!(core(&old).unwrap(), core(&new).unwrap());
        assert_eq!(b1_mod2(&old), b1_mod2(&new));
        assert_eq!(old.alphabet().len(), new.alphabet().len());
    }
}

#[test]
fn prime_implies_minimal_on_fixtures() {
    let mut corpus: Vec<GroupExpr> = (0..40).map(|s| tower(s, 3).expr).collect();
    corpus.extend([
        GroupExpr::ClosedSurface(Surface::non_orientable(3, 0).unwrap()),
        GroupExpr::ClosedSurface(Surface::non_orientable(4, 0).unwrap()),
        GroupExpr::atom(prototype(2)),
        GroupExpr::free(2),
    ]);
    for e in corpus.iter().filter(|e| !GroupExpr::product([(*e).clone()]).is_abelian()) {
        if is_prime(e).unwrap().is_yes() {
            assert!(is_minimal(e).unwrap().is_yes());
        }
    }
    let sample: Vec<&GroupExpr> = corpus
        .iter()
        .filter(|e| !GroupExpr::product([(*e).clone()]).is_abelian())
        .take(12)
        .collect();
    for a in &sample {
        assert!(equiv(a, a).unwrap());
        for b in &sample {
            assert_eq!(equiv(a, b).unwrap(), equiv(b, a).unwrap());
            for c in &sample {
                if equiv(a, b).unwrap() && equiv(b, c).unwrap() {
                    assert!(equiv(a, c).unwrap());
                }
            }
        }
    }
}
