// Brute-force cross-checks of the exact algorithms.

use std::collections::HashSet;

use freegroup::*;

fn w(s: &[i32]) -> Word {
    Word::from_signed(s)
}

// conjugacy by searching for a conjugator of bounded length
fn conjugate_by_search(u: &Word, v: &Word, conjugators: &[Word]) -> bool {
    conjugators.iter().any(|c| c.conjugate(u) == *v)
}

#[test]
fn conjugacy_matches_search_on_small_ball() {
    let mut ball = Ball::new(2);
    let words = ball.up_to(2);
    let conjugators = ball.up_to(4);
    for u in &words {
        for v in &words {
            assert_eq!(
                is_conjugate(u, v),
                conjugate_by_search(u, v, &conjugators),
                "{:?} ~ {:?}",
                u,
                v
            );
        }
    }
}

#[test]
fn conjugacy_is_an_equivalence_on_ball_four() {
    let words = Ball::new(2).up_to(4);
    let n = words.len();
    let rel: Vec<Vec<bool>> = words
        .iter()
        .map(|u| words.iter().map(|v| is_conjugate(u, v)).collect())
        .collect();
    for i in 0..n {
        assert!(rel[i][i]);
        for j in 0..n {
            assert_eq!(rel[i][j], rel[j][i]);
            if rel[i][j] {
                for k in 0..n {
                    if rel[j][k] {
                        assert!(rel[i][k]);
                    }
                }
            }
        }
    }
}

#[test]
fn cyclic_core_by_rotation_and_cancellation() {
    // rotate letters to the back while the ends cancel
    fn naive(w: &Word) -> Word {
        let mut ls = w.letters().to_vec();
        loop {
            let n = ls.len();
            if n >= 2 && ls[0] == ls[n - 1].inv() {
                ls = ls[1..n - 1].to_vec();
            } else {
                return Word::from_letters(ls);
            }
        }
    }
    for u in Ball::new(3).up_to(4) {
        let c = w(&[1]).conjugate(&u);
        assert_eq!(cyclic_reduce(&c).0, naive(&c));
    }
    let xy = Word::commutator(&w(&[2]), &w(&[3]));
    assert_eq!(cyclic_reduce(&w(&[1]).conjugate(&xy)), (xy, w(&[1])));
}

#[test]
fn double_twist_by_composition() {
    let ab = Word::commutator(&w(&[1]), &w(&[2]));
    let tau = FreeHom::new(vec![w(&[1]), w(&[2]), ab.conjugate(&w(&[3]))]);
    let twice = tau.then(&tau).unwrap();
    assert_eq!(twice.image(2), &ab.pow(2).conjugate(&w(&[3])));
}

fn products_within(gens: &[Word], max_len: usize) -> HashSet<Word> {
    let steps: Vec<Word> = gens.iter().flat_map(|g| [g.clone(), g.inverse()]).collect();
    let mut seen = HashSet::from([Word::identity()]);
    let mut frontier = vec![Word::identity()];
    while let Some(x) = frontier.pop() {
        for s in &steps {
            let y = x.mul(s);
            if y.len() <= max_len && seen.insert(y.clone()) {
                frontier.push(y);
            }
        }
    }
    seen
}

#[test]
fn fold_rank_of_three_generators() {
    let gens = [w(&[1, 1]), w(&[2, 2]), w(&[1, 2])];
    let g = fold(&gens);
    assert_eq!(g.rank(), 3);
    let brute = products_within(&gens, 8);
    for x in Ball::new(2).up_to(4) {
        assert_eq!(g.contains(&x), brute.contains(&x), "{:?}", x);
    }
}

#[test]
fn free_basis_from_twisted_pair() {
    let (u, v, wd) = (w(&[1]), w(&[2]), w(&[1, -2, 1]));
    assert!(is_free_basis(&[v.mul(&u.pow(5)), wd]));
}

#[test]
fn commutator_times_square_is_three_squares() {
    let a = Alphabet::standard(3);
    let lhs = a.parse("[a,b] c^2").unwrap();
    let rhs = a
        .parse("(a c^-1 b)^2 (b^-1 c)^2 (c^-1 b a^-1 b^-1 c^2)^2")
        .unwrap();
    assert_eq!(lhs, rhs);
}
