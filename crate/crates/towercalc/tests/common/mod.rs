#![allow(dead_code)]

use freegroup::{Alphabet, Word};
use rand::Rng;
use towercalc::expr::{Atom, Fact, GroupExpr};
use towercalc::splitting::{make_parachute, CenteredSplitting, Edge};
use towercalc::surface::Surface;
use towercalc::tower::etage_surface;

pub const POOL: usize = 5;

pub fn prototype(i: usize) -> Atom {
    let mut a = Atom::new(format!("P{}", i + 1))
        .with(Fact::Prototype)
        .with(Fact::Square("x".into()))
        .with(Fact::NoCyclicSplittingRel("x".into()));
    a.facts.b1_mod2 = Some(i as u32 + 1);
    a
}

/// A tower together with the core its construction predicts, as sorted factor names.
pub struct Built {
    pub expr: GroupExpr,
    pub core: Vec<String>,
}

fn n(g: u32) -> Surface {
    Surface::non_orientable(g, 0).unwrap()
}

pub fn expt(word: &str) -> CenteredSplitting {
    CenteredSplitting::new(
        Surface::orientable(1, 1),
        vec![GroupExpr::free(2)],
        vec![Edge {
            boundary: 0,
            bottom: 0,
            word: Alphabet::standard(2).parse(word).unwrap(),
        }],
    )
    .unwrap()
}

pub fn certified(c: &CenteredSplitting) -> GroupExpr {
    match etage_surface(c) {
        Ok(t) => t.into_expr(),
        Err(e) => panic!("{}\n{:?}\n{}", e, c.edges(), c.to_dot()),
    }
}

fn leaf(rng: &mut impl Rng) -> Built {
    let (expr, core) = match rng.gen_range(0..7) {
        0 | 1 => {
            let a = prototype(rng.gen_range(0..POOL));
            let name = a.name.clone();
            (GroupExpr::atom(a), vec![name])
        }
        2 => (GroupExpr::free(rng.gen_range(1..=3)), vec![]),
        3 => (GroupExpr::ClosedSurface(n(3)), vec!["N(3)".to_string()]),
        4 => {
            let s = [Surface::orientable(2, 0), n(4), n(5)][rng.gen_range(0..3)];
            (GroupExpr::ClosedSurface(s), vec![])
        }
        5 => (
            certified(&make_parachute(Surface::non_orientable(2, 2).unwrap(), &[2, 4]).unwrap()),
            vec![],
        ),
        _ => (certified(&expt("[a,b]")), vec![]),
    };
    Built { expr, core }
}

/// Commutator of the last two symbols of the free factor, which `product` places last.
fn glue_free_pair(base: &GroupExpr) -> Word {
    let n = base.alphabet().len();
    Word::commutator(&Word::gen(n - 2), &Word::gen(n - 1))
}

pub fn random_tower(rng: &mut impl Rng, depth: usize) -> Built {
    if depth == 0 || rng.gen_bool(0.25) {
        return leaf(rng);
    }
    match rng.gen_range(0..4) {
        0 => {
            let parts: Vec<Built> = (0..rng.gen_range(2..=3)).map(|_| random_tower(rng, depth - 1)).collect();
            let mut core: Vec<String> = parts.iter().flat_map(|p| p.core.clone()).collect();
            core.sort();
            Built {
                expr: GroupExpr::FreeProduct(parts.into_iter().map(|p| p.expr).collect()),
                core,
            }
        }
        1 => {
            let sub = random_tower(rng, depth - 1);
            Built {
                expr: GroupExpr::FreeProduct(vec![sub.expr, GroupExpr::free(1)]),
                core: sub.core,
            }
        }
        2 => {
            let sub = random_tower(rng, depth - 1);
            let base = GroupExpr::product([sub.expr, GroupExpr::free(2)]);
            let word = glue_free_pair(&base);
            let c = CenteredSplitting::new(
                Surface::orientable(1, 1),
                vec![base],
                vec![Edge { boundary: 0, bottom: 0, word }],
            )
            .unwrap();
            Built {
                expr: certified(&c),
                core: sub.core,
            }
        }
        _ => {
            let i = rng.gen_range(0..POOL);
            let j = (i + rng.gen_range(1..POOL)) % POOL;
            let (s1, s2) = (random_tower(rng, depth - 1), random_tower(rng, depth - 1));
            let (p1, p2) = (prototype(i), prototype(j));
            let mut core: Vec<String> = s1.core.iter().chain(&s2.core).cloned().collect();
            core.extend([p1.name.clone(), p2.name.clone()]);
            core.sort();
            // the atom comes first, so its element `x` is generator 0 of each bottom
            let a1 = GroupExpr::product([GroupExpr::atom(p1), s1.expr]);
            let a2 = GroupExpr::product([GroupExpr::atom(p2), s2.expr]);
            let edges = (0..2)
                .map(|k| Edge { boundary: k, bottom: k, word: Word::gen(0) })
                .collect();
            let c = CenteredSplitting::new(Surface::non_orientable(2, 2).unwrap(), vec![a1, a2], edges).unwrap();
            Built {
                expr: certified(&c),
                core,
            }
        }
    }
}
