//! Twists, the retractions `rho o tau^n`, and bounded checks that they
//! discriminate, for simple étages over free groups.

use freegroup::{is_conjugate, Alphabet, Ball, Bound, Decision, FreeHom, Word, WordError};
use serde::Serialize;
use thiserror::Error;

use crate::expr::GroupExpr;
use crate::splitting::{CenteredSplitting, Presentation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LimitsError {
    #[error("the étage must be simple with a free bottom group")]
    NotSimpleOverFree,
    #[error("retraction image of {0} must lie in the bottom group")]
    ImageOutsideBottom(String),
    #[error("retraction does not fix bottom generator {0}")]
    NotIdentityOnBottom(String),
    #[error("retraction has {got} images for {want} generators")]
    Arity { got: usize, want: usize },
    #[error("twist does not preserve relator {0}")]
    RelatorNotPreserved(String),
    #[error("ball of radius {radius} has {size} words, above the cap {cap}")]
    BallTooLarge { radius: usize, size: u128, cap: u128 },
    #[error("word problem is only implemented for one boundary component")]
    Unsupported,
    #[error("empty exponent range")]
    EmptyRange,
    #[error("need one more `a` than `c`, got {a} and {c}")]
    BaumslagArity { a: usize, c: usize },
    #[error("`c` entries must be non-trivial")]
    TrivialC,
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Default cap on ball size in [`verify_discriminating`].
pub const BALL_CAP: u128 = 2_000_000;

/// The one-relator presentation of a simple étage over a free group, a retraction
/// onto the bottom, and the product of the twists around its edges.
#[derive(Clone, Debug)]
pub struct EtagePresentation {
    pub names: Vec<String>,
    pub bottom_rank: usize,
    pub relators: Vec<Word>,
    pub retraction: FreeHom,
    pub twist: FreeHom,
    orientable: bool,
    presentation: Presentation,
}

impl EtagePresentation {
    /// `rho` gives, for every ambient generator, its image as a word in the
    /// ambient generators that only uses bottom letters.
    pub fn new(c: &CenteredSplitting, rho: FreeHom) -> Result<EtagePresentation, LimitsError> {
        if !c.is_simple() || !matches!(c.bottoms()[0], GroupExpr::Free(_)) {
            return Err(LimitsError::NotSimpleOverFree);
        }
        let p = c.presentation();
        let bottom_rank = p.bottom_spans[0].1;
        if rho.source_rank() != p.rank() {
            return Err(LimitsError::Arity {
                got: rho.source_rank(),
                want: p.rank(),
            });
        }
        for (i, w) in rho.images().iter().enumerate() {
            if w.letters().iter().any(|l| l.index() >= bottom_rank) {
                return Err(LimitsError::ImageOutsideBottom(p.names[i].clone()));
            }
            if i < bottom_rank && *w != Word::gen(i) {
                return Err(LimitsError::NotIdentityOnBottom(p.names[i].clone()));
            }
        }
        let twist = twist_of(&p)?;
        Ok(EtagePresentation {
            names: p.names.clone(),
            bottom_rank,
            relators: vec![p.relator.clone()],
            retraction: rho,
            twist,
            orientable: c.surface().orientable,
            presentation: p,
        })
    }

    /// Images given as `(generator, word)` texts; bottom generators default to themselves.
    pub fn with_images<S: AsRef<str>>(
        c: &CenteredSplitting,
        images: &[(S, S)],
    ) -> Result<EtagePresentation, LimitsError> {
        let p = c.presentation();
        let alphabet = p.alphabet();
        let mut rho = FreeHom::identity(p.rank());
        for (name, text) in images {
            let i = alphabet
                .index_of(name.as_ref())
                .ok_or_else(|| WordError::UnknownGenerator(name.as_ref().to_string()))?;
            rho.set_image(i, alphabet.parse(text.as_ref())?);
        }
        EtagePresentation::new(c, rho)
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.names.clone())
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    /// Whether the retraction kills every relator.
    pub fn retraction_is_homomorphism(&self) -> bool {
        self.relators
            .iter()
            .all(|r| self.retraction.apply(r).is_ok_and(|w| w.is_identity()))
    }

    /// Triviality in the étage group, for étages with one boundary component:
    /// reduce alternating syllables in the amalgam of the bottom and surface
    /// groups over the boundary subgroup.
    pub fn is_trivial(&self, w: &Word) -> Result<bool, LimitsError> {
        let p = &self.presentation;
        if p.boundary.len() != 1 {
            return Err(LimitsError::Unsupported);
        }
        let bottom_edge = &p.boundary[0];
        let handles: Vec<Word> = (p.handles.0..p.handles.1).map(Word::gen).collect();
        let surface_edge = p.handle_product(self.orientable, &handles);
        let edge = [bottom_edge, &surface_edge];
        let side = |l: &freegroup::Letter| usize::from(l.index() >= self.bottom_rank);
        let mut syl: Vec<(usize, Word)> = Vec::new();
        for l in w.letters() {
            let s = side(l);
            match syl.last_mut() {
                Some((t, x)) if *t == s => *x = x.mul(&Word::from_letters([*l])),
                _ => syl.push((s, Word::from_letters([*l]))),
            }
        }
        loop {
            // merge equal sides and drop trivial syllables
            let mut merged: Vec<(usize, Word)> = Vec::new();
            for (s, x) in syl.drain(..) {
                if x.is_identity() {
                    continue;
                }
                match merged.last_mut() {
                    Some((t, y)) if *t == s => {
                        *y = y.mul(&x);
                        if y.is_identity() {
                            merged.pop();
                        }
                    }
                    _ => merged.push((s, x)),
                }
            }
            syl = merged;
            if syl.len() <= 1 {
                return Ok(syl.is_empty());
            }
            let hit = syl
                .iter()
                .enumerate()
                .find_map(|(i, (s, x))| edge_power(edge[*s], x).map(|k| (i, *s, k)));
            match hit {
                Some((i, s, k)) => syl[i] = (1 - s, edge[1 - s].pow(k)),
                None => return Ok(false),
            }
        }
    }
}

/// `k` with `x = edge^k`, if any.
fn edge_power(edge: &Word, x: &Word) -> Option<i64> {
    (1..=x.len() as i64).find_map(|k| {
        if edge.pow(k) == *x {
            Some(k)
        } else if edge.pow(-k) == *x {
            Some(-k)
        } else {
            None
        }
    })
}

/// Product of the twists around the edges, in edge order. Around the edge
/// without stable letter, surface generators are conjugated by its element;
/// around an edge with stable letter `t` and element `w`, `t` goes to `t w`.
fn twist_of(p: &Presentation) -> Result<FreeHom, LimitsError> {
    let mut tau = FreeHom::identity(p.rank());
    for (i, stable) in p.stable.iter().enumerate() {
        let mut step = FreeHom::identity(p.rank());
        match stable {
            None => {
                let c = &p.boundary[i];
                for g in p.handles.0..p.rank() {
                    let h = Word::gen(g);
                    let img = if p.stable.contains(&Some(g)) { c.mul(&h) } else { c.conjugate(&h) };
                    step.set_image(g, img);
                }
            }
            Some(t) => {
                let w = Word::gen(*t).inverse().mul(&p.boundary[i]).mul(&Word::gen(*t));
                step.set_image(*t, Word::gen(*t).mul(&w));
            }
        }
        tau = tau.then(&step)?;
    }
    let r = &p.relator;
    let image = tau.apply(r)?;
    if !(is_conjugate(&image, r) || is_conjugate(&image, &r.inverse())) {
        return Err(LimitsError::RelatorNotPreserved(p.alphabet().format(r)));
    }
    Ok(tau)
}

pub fn twist_auto(ep: &EtagePresentation) -> FreeHom {
    ep.twist.clone()
}

/// `rho o tau^n`.
pub fn rho_n(ep: &EtagePresentation, n: u32) -> Result<FreeHom, LimitsError> {
    Ok(ep.twist.power(n)?.then(&ep.retraction)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrimination {
    /// Least `n` from which on no `rho_m` with `m <= n_max` kills a non-trivial word of the ball.
    pub found_n: Option<u32>,
    pub checked_words: usize,
    /// Non-trivial words killed by `rho_m` for the largest such `m`.
    pub last_killed: Option<(u32, String)>,
}

fn ball_size(rank: usize, radius: usize) -> u128 {
    let mut total = 1u128;
    let mut level = 2 * rank as u128;
    for _ in 0..radius {
        total = total.saturating_add(level);
        level = level.saturating_mul((2 * rank as u128).saturating_sub(1).max(1));
    }
    total
}

pub fn verify_discriminating(
    ep: &EtagePresentation,
    radius: usize,
    n_max: u32,
) -> Result<Discrimination, LimitsError> {
    verify_discriminating_capped(ep, radius, n_max, BALL_CAP)
}

pub fn verify_discriminating_capped(
    ep: &EtagePresentation,
    radius: usize,
    n_max: u32,
    cap: u128,
) -> Result<Discrimination, LimitsError> {
    let size = ball_size(ep.rank(), radius);
    if size > cap {
        return Err(LimitsError::BallTooLarge { radius, size, cap });
    }
    let homs = (0..=n_max)
        .scan(ep.retraction.clone(), |acc, m| {
            let cur = acc.clone();
            if m < n_max {
                *acc = ep.twist.then(acc).expect("ranks agree");
            }
            Some(cur)
        })
        .collect::<Vec<_>>();
    let words = Ball::new(ep.rank()).up_to(radius);
    let mut worst: Option<(u32, Word)> = None;
    let mut checked = 0;
    for w in words.iter().filter(|w| !w.is_identity()) {
        let last = (0..=n_max).rev().find(|&m| homs[m as usize].apply(w).is_ok_and(|x| x.is_identity()));
        let Some(m) = last else {
            checked += 1;
            continue;
        };
        if ep.is_trivial(w)? {
            continue;
        }
        checked += 1;
        if worst.as_ref().is_none_or(|(k, _)| m > *k) {
            worst = Some((m, w.clone()));
        }
    }
    let found_n = match &worst {
        None => Some(0),
        Some((m, _)) if *m < n_max => Some(m + 1),
        Some(_) => None,
    };
    Ok(Discrimination {
        found_n,
        checked_words: checked,
        last_killed: worst.map(|(m, w)| (m, ep.alphabet().format(&w))),
    })
}

/// `a_0 c_1^{p_1} a_1 ... c_k^{p_k} a_k`.
pub fn baumslag_product(a: &[Word], c: &[Word], p: &[u32]) -> Word {
    let mut out = a[0].clone();
    for i in 0..c.len() {
        out = out.mul(&c[i].pow(p[i] as i64)).mul(&a[i + 1]);
    }
    out
}

/// Whether `a_i c_{i+1}^{+inf} = c_i^{-inf}` for some interior `i`: with
/// primitive roots `r`, this happens exactly when `a_i r_{i+1} a_i^-1 = r_i^-1`.
pub fn baumslag_hypothesis_holds(a: &[Word], c: &[Word]) -> bool {
    (1..c.len()).all(|i| {
        let r_next = c[i].root();
        let r_prev = c[i - 1].root();
        a[i].conjugate(&r_next) != r_prev.inverse()
    })
}

/// Least `C` in the range such that every exponent tuple with entries in
/// `[C, hi]` gives a non-trivial product. `No` carries a collapsing tuple
/// with the largest minimum entry.
pub fn baumslag_check(a: &[Word], c: &[Word], range: (u32, u32)) -> Result<Decision<u32, Vec<u32>>, LimitsError> {
    let (lo, hi) = range;
    if lo > hi {
        return Err(LimitsError::EmptyRange);
    }
    if a.len() != c.len() + 1 {
        return Err(LimitsError::BaumslagArity { a: a.len(), c: c.len() });
    }
    if c.iter().any(|w| w.is_identity()) {
        return Err(LimitsError::TrivialC);
    }
    let k = c.len();
    let mut worst: Option<Vec<u32>> = None;
    let mut p = vec![lo; k];
    let mut tuples = 0u64;
    loop {
        tuples += 1;
        if baumslag_product(a, c, &p).is_identity() {
            let m = p.iter().copied().min().unwrap_or(hi);
            if worst.as_ref().is_none_or(|w| w.iter().copied().min().unwrap_or(hi) < m) {
                worst = Some(p.clone());
            }
        }
        let mut i = 0;
        while i < k {
            p[i] += 1;
            if p[i] <= hi {
                break;
            }
            p[i] = lo;
            i += 1;
        }
        if i == k {
            break;
        }
    }
    let hypothesis = baumslag_hypothesis_holds(a, c);
    Ok(match worst {
        None => Decision::Yes(lo),
        Some(w) => {
            let m = w.iter().copied().min().unwrap_or(hi);
            if k > 0 && m < hi {
                Decision::Yes(m + 1)
            } else if hypothesis {
                Decision::Unknown(
                    Bound::new("exponent tuples", tuples).limit("max_exponent", hi as u64),
                )
            } else {
                Decision::No(w)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitting::Edge;
    use crate::surface::Surface;

    fn torus() -> CenteredSplitting {
        CenteredSplitting::new(
            Surface::orientable(1, 1),
            vec![GroupExpr::free(2)],
            vec![Edge {
                boundary: 0,
                bottom: 0,
                word: Alphabet::standard(2).parse("[a,b]").unwrap(),
            }],
        )
        .unwrap()
    }

    fn torus_ep(x: &str, y: &str) -> EtagePresentation {
        EtagePresentation::with_images(&torus(), &[("u1", x), ("v1", y)]).unwrap()
    }

    fn w(ep: &EtagePresentation, s: &str) -> Word {
        ep.alphabet().parse(s).unwrap()
    }

    #[test]
    fn twist_on_punctured_torus() {
        let ep = torus_ep("a", "b");
        let t = twist_auto(&ep);
        assert_eq!(t.image(0), &w(&ep, "a"));
        assert_eq!(t.image(1), &w(&ep, "b"));
        assert_eq!(t.image(2), &w(&ep, "[a,b] u1 [a,b]^-1"));
        assert_eq!(t.image(3), &w(&ep, "[a,b] v1 [a,b]^-1"));
        assert!(ep.retraction_is_homomorphism());
    }

    #[test]
    fn rho_one() {
        let ep = torus_ep("a", "b");
        assert_eq!(rho_n(&ep, 0).unwrap(), ep.retraction);
        let r1 = rho_n(&ep, 1).unwrap();
        assert_eq!(r1.image(2), &w(&ep, "[a,b] a [a,b]^-1"));
        for n in 0..=10 {
            let r = rho_n(&ep, n).unwrap();
            assert_eq!(&r.images()[..2], &[Word::gen(0), Word::gen(1)]);
        }
    }

    #[test]
    fn two_edge_twist_preserves_relator() {
        let c = CenteredSplitting::new(
            Surface::orientable(1, 2),
            vec![GroupExpr::free(2)],
            vec![
                Edge { boundary: 0, bottom: 0, word: Word::gen(0) },
                Edge { boundary: 1, bottom: 0, word: Word::gen(1) },
            ],
        )
        .unwrap();
        let ep = EtagePresentation::new(&c, FreeHom::identity(5).then(&FreeHom::new(vec![
            Word::gen(0),
            Word::gen(1),
            Word::gen(0),
            Word::gen(1),
            Word::identity(),
        ])).unwrap())
        .unwrap();
        let tau = twist_auto(&ep);
        let r = &ep.relators[0];
        assert!(is_conjugate(&tau.apply(r).unwrap(), r));
        assert_eq!(tau.image(4), &w(&ep, "a t2 b"));
    }

    #[test]
    fn word_problem_in_the_amalgam() {
        let ep = torus_ep("a", "b");
        assert!(ep.is_trivial(&ep.relators[0]).unwrap());
        assert!(!ep.is_trivial(&w(&ep, "[u1,v1] [a,b]^-1 a b a^-1")).unwrap());
        assert!(ep.is_trivial(&w(&ep, "b [u1,v1] [a,b]^-1 b^-1")).unwrap());
        assert!(ep.is_trivial(&w(&ep, "[u1,v1] a [u1,v1]^-1 [a,b] a^-1 [a,b]^-1")).unwrap());
        assert!(!ep.is_trivial(&w(&ep, "a [u1,v1] a^-1 [a,b]^-1 a [a,b] a^-1 [u1,v1]^-1")).unwrap());
        assert!(!ep.is_trivial(&w(&ep, "u1 a^-1")).unwrap());
        assert!(!ep.is_trivial(&w(&ep, "[u1,v1]")).unwrap());
    }

    #[test]
    fn discriminating_sequence() {
        let ep = torus_ep("a", "b");
        let d = verify_discriminating(&ep, 2, 64).unwrap();
        assert!(d.found_n.is_some());
        assert_eq!(verify_discriminating(&ep, 0, 64).unwrap().found_n, Some(0));
        let broken = torus_ep("a", "a");
        let d = verify_discriminating(&broken, 2, 64).unwrap();
        assert_eq!(d.found_n, None);
    }

    #[test]
    fn ball_cap() {
        let ep = torus_ep("a", "b");
        assert!(matches!(
            verify_discriminating_capped(&ep, 3, 4, 100),
            Err(LimitsError::BallTooLarge { .. })
        ));
        assert_eq!(ball_size(2, 2), 1 + 4 + 12);
    }

    #[test]
    fn baumslag_examples() {
        let f = |s: &str| Alphabet::standard(2).parse(s).unwrap();
        let one = Word::identity();
        assert_eq!(baumslag_check(&[one.clone(), one.clone()], &[f("b")], (1, 8)).unwrap(), Decision::Yes(1));
        assert_eq!(
            baumslag_check(&[f("a"), f("a"), one.clone()], &[f("b"), f("b")], (1, 8)).unwrap(),
            Decision::Yes(1)
        );
        let d = baumslag_check(&[one.clone(), one.clone(), one.clone()], &[f("b"), f("b^-1")], (1, 6)).unwrap();
        assert!(matches!(d, Decision::No(ref p) if p[0] == p[1]));
        assert!(!baumslag_hypothesis_holds(&[one.clone(), one.clone(), one], &[f("b"), f("b^-1")]));
    }

    #[test]
    fn baumslag_small_collapse_then_recovers() {
        let f = |s: &str| Alphabet::standard(2).parse(s).unwrap();
        // b^-2 b^p is trivial only at p = 2
        let d = baumslag_check(&[f("b^-2"), Word::identity()], &[f("b")], (1, 8)).unwrap();
        assert_eq!(d, Decision::Yes(3));
    }
}
