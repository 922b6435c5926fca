use serde::{Deserialize, Serialize};

use crate::word::{conjugator, cyclic_reduce};
use crate::{abelianize, Bound, Decision, Letter, Word, WordError};

pub const RADIUS_CAP: usize = 8;
pub const DEFAULT_BUDGET: u64 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pieces {
    Commutators,
    Squares,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianObstruction {
    pub modulus: u32,
    pub vector: Vec<i64>,
}

/// Witness words: `x1 y1 x2 y2 ...` for commutators, `w1 w2 ...` for squares.
pub type GenusDecision = Decision<Vec<Word>, AbelianObstruction>;

#[derive(Clone, Debug)]
pub struct GenusQuery {
    pub kind: Pieces,
    pub max_pieces: usize,
    pub radius: usize,
    pub budget: u64,
}

impl GenusQuery {
    pub fn new(kind: Pieces, max_pieces: usize, radius: usize) -> GenusQuery {
        GenusQuery {
            kind,
            max_pieces,
            radius,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Multiply out a witness list.
pub fn witness_product(kind: Pieces, witness: &[Word]) -> Word {
    match kind {
        Pieces::Squares => Word::product(witness.iter().map(|w| w.mul(w)).collect::<Vec<_>>().iter()),
        Pieces::Commutators => Word::product(
            witness
                .chunks(2)
                .map(|p| Word::commutator(&p[0], &p[1]))
                .collect::<Vec<_>>()
                .iter(),
        ),
    }
}

/// Is `g` a product of at most `max_pieces` commutators (or squares) of words of length at most `radius`?
pub fn genus_oracle(
    g: &Word,
    rank: usize,
    kind: Pieces,
    max_pieces: usize,
    radius: usize,
) -> Result<GenusDecision, WordError> {
    search(g, rank, &GenusQuery::new(kind, max_pieces, radius), |_| true)
}

/// Like [`genus_oracle`], but only witnesses accepted by `accept` count.
pub fn search(
    g: &Word,
    rank: usize,
    q: &GenusQuery,
    mut accept: impl FnMut(&[Word]) -> bool,
) -> Result<GenusDecision, WordError> {
    if q.radius > RADIUS_CAP {
        return Err(WordError::RadiusCap {
            radius: q.radius,
            cap: RADIUS_CAP,
        });
    }
    if q.radius == 0 || q.max_pieces == 0 {
        return Err(WordError::InvalidArgument("radius and max_pieces must be at least 1"));
    }
    if g.min_rank() > rank {
        return Err(WordError::IndexOutOfRank {
            index: g.min_rank() - 1,
            rank,
        });
    }
    let modulus = match q.kind {
        Pieces::Commutators => 0,
        Pieces::Squares => 2,
    };
    let vector = abelianize(g, rank, modulus);
    if vector.iter().any(|&x| x != 0) {
        return Ok(Decision::No(AbelianObstruction { modulus, vector }));
    }

    let mut ball = Ball::new(rank);
    let mut explored = 0u64;
    for k in 1..=q.max_pieces {
        let free = match q.kind {
            Pieces::Commutators => 2 * k - 1,
            Pieces::Squares => k - 1,
        };
        let mut found = None;
        let exhausted = for_each_tuple(&mut ball, free, q.radius, |tuple| {
            explored += 1;
            if explored > q.budget {
                return Step::Stop;
            }
            if let Some(w) = solve_last(g, q.kind, tuple, q.radius) {
                if accept(&w) {
                    found = Some(w);
                    return Step::Stop;
                }
            }
            Step::Continue
        });
        if let Some(w) = found {
            return Ok(Decision::Yes(w));
        }
        if !exhausted {
            break;
        }
    }
    Ok(Decision::Unknown(
        Bound::new(format!("{:?} witness search", q.kind).to_lowercase(), explored)
            .limit("radius", q.radius as u64)
            .limit("max_pieces", q.max_pieces as u64)
            .limit("budget", q.budget),
    ))
}

fn solve_last(g: &Word, kind: Pieces, tuple: &[Word], radius: usize) -> Option<Vec<Word>> {
    match kind {
        Pieces::Squares => {
            let prefix = witness_product(kind, tuple);
            let h = prefix.inverse().mul(g);
            let r = square_root(&h)?;
            if r.len() > radius {
                return None;
            }
            let mut w = tuple.to_vec();
            w.push(r);
            Some(w)
        }
        Pieces::Commutators => {
            let (pairs, x) = tuple.split_at(tuple.len() - 1);
            let x = &x[0];
            let prefix = witness_product(kind, pairs);
            let h = prefix.inverse().mul(g);
            let y = commutator_partner(x, &h, radius)?;
            let mut w = tuple.to_vec();
            w.push(y);
            Some(w)
        }
    }
}

/// The unique `r` with `r^2 = h`, if any.
pub fn square_root(h: &Word) -> Option<Word> {
    let (core, conj) = cyclic_reduce(h);
    let n = core.len();
    if n % 2 != 0 {
        return None;
    }
    let (l, r) = core.letters().split_at(n / 2);
    if l != r {
        return None;
    }
    Some(conj.conjugate(&Word::from_letters(l.iter().copied())))
}

/// Shortest `y` (length at most `radius`) with `[x, y] = h`.
fn commutator_partner(x: &Word, h: &Word, radius: usize) -> Option<Word> {
    if x.is_identity() {
        return h.is_identity().then(Word::identity);
    }
    let xi = x.inverse();
    let y0 = conjugator(&xi, &xi.mul(h))?;
    let root = x.root();
    let span = (radius + y0.len() + 2) as i64;
    (-span..=span)
        .map(|n| y0.mul(&root.pow(n)))
        .filter(|y| y.len() <= radius)
        .min_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)))
}

enum Step {
    Continue,
    Stop,
}

/// Reduced words grouped by length, generated on demand in letter order.
pub struct Ball {
    rank: usize,
    levels: Vec<Vec<Word>>,
}

impl Ball {
    pub fn new(rank: usize) -> Ball {
        Ball {
            rank,
            levels: vec![vec![Word::identity()]],
        }
    }

    pub fn level(&mut self, len: usize) -> &[Word] {
        while self.levels.len() <= len {
            let prev = self.levels.last().unwrap();
            let mut next = Vec::new();
            for w in prev {
                for key in 0..2 * self.rank {
                    let l = Letter::from_rank_key(key);
                    if w.letters().last() == Some(&l.inv()) {
                        continue;
                    }
                    let mut ls = w.letters().to_vec();
                    ls.push(l);
                    next.push(Word::from_letters(ls));
                }
            }
            self.levels.push(next);
        }
        &self.levels[len]
    }

    /// All words of length at most `radius`, shortest first.
    pub fn up_to(&mut self, radius: usize) -> Vec<Word> {
        (0..=radius).flat_map(|l| self.level(l).to_vec()).collect()
    }
}

// Visit tuples of `m` words ordered by total length, then length profile, then lexicographically.
// Returns false if stopped early.
fn for_each_tuple(
    ball: &mut Ball,
    m: usize,
    radius: usize,
    mut visit: impl FnMut(&[Word]) -> Step,
) -> bool {
    if m == 0 {
        return !matches!(visit(&[]), Step::Stop);
    }
    for l in 0..=radius {
        ball.level(l);
    }
    for total in 0..=m * radius {
        for profile in compositions(total, m, radius) {
            let lists: Vec<&[Word]> = profile.iter().map(|&l| ball.levels[l].as_slice()).collect();
            let mut idx = vec![0usize; m];
            let mut tuple: Vec<Word> = lists.iter().map(|l| l[0].clone()).collect();
            'odometer: loop {
                if let Step::Stop = visit(&tuple) {
                    return false;
                }
                let mut pos = m;
                while pos > 0 {
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < lists[pos].len() {
                        tuple[pos] = lists[pos][idx[pos]].clone();
                        continue 'odometer;
                    }
                    idx[pos] = 0;
                    tuple[pos] = lists[pos][0].clone();
                }
                break;
            }
        }
    }
    true
}

fn compositions(total: usize, parts: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(parts);
    fn rec(rest: usize, parts: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for l in 0..=rest.min(cap) {
            if rest - l <= (parts - 1) * cap {
                cur.push(l);
                rec(rest - l, parts - 1, cap, cur, out);
                cur.pop();
            }
        }
    }
    rec(total, parts, cap, &mut cur, &mut out);
    out
}

/// Decompositions of `g` read directly off its letters: `g` is the literal
/// concatenation of at most `max_pieces` blocks `x x` (or `x y x^-1 y^-1`).
/// Witnesses are padded with trivial pieces and listed in the order of
/// [`search`]; at most `limit` are returned.
pub fn literal_pieces(g: &Word, kind: Pieces, max_pieces: usize, limit: usize) -> Vec<Vec<Word>> {
    let letters = g.letters();
    let slice = |a: usize, b: usize| Word::from_letters(letters[a..b].iter().copied());
    let mut out = Vec::new();
    let mut cur: Vec<Word> = Vec::new();
    fn rec(
        at: usize,
        kind: Pieces,
        max_pieces: usize,
        limit: usize,
        letters: &[Letter],
        slice: &dyn Fn(usize, usize) -> Word,
        cur: &mut Vec<Word>,
        out: &mut Vec<Vec<Word>>,
    ) {
        if out.len() >= limit {
            return;
        }
        let n = letters.len();
        let per = if kind == Pieces::Squares { 1 } else { 2 };
        if at == n {
            let mut w = cur.clone();
            w.resize(max_pieces * per, Word::identity());
            out.push(w);
            return;
        }
        if cur.len() / per == max_pieces {
            return;
        }
        match kind {
            Pieces::Squares => {
                for p in 1..=(n - at) / 2 {
                    if letters[at..at + p] == letters[at + p..at + 2 * p] {
                        cur.push(slice(at, at + p));
                        rec(at + 2 * p, kind, max_pieces, limit, letters, slice, cur, out);
                        cur.pop();
                    }
                }
            }
            Pieces::Commutators => {
                for p in 1..=(n - at) / 2 {
                    for q in 1..=(n - at - 2 * p) / 2 {
                        let (x, y) = (at, at + p);
                        let (xi, yi) = (y + q, y + q + p);
                        let inverse = |a: usize, b: usize, len: usize| {
                            (0..len).all(|k| letters[b + k] == letters[a + len - 1 - k].inv())
                        };
                        if yi + q <= n && inverse(x, xi, p) && inverse(y, yi, q) {
                            cur.push(slice(x, y));
                            cur.push(slice(y, xi));
                            rec(yi + q, kind, max_pieces, limit, letters, slice, cur, out);
                            cur.pop();
                            cur.pop();
                        }
                    }
                }
            }
        }
    }
    rec(0, kind, max_pieces, limit, letters, &slice, &mut cur, &mut out);
    out
}
