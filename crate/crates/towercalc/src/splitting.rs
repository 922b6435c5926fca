use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use freegroup::{cyclic_reduce, Alphabet, Word};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{handle_names, GroupExpr};
use crate::surface::{Surface, SurfaceError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplittingError {
    #[error("invalid splitting: {}", list(.0))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error("expected {expected} indices, got {got}")]
    IndexCount { expected: usize, got: usize },
    #[error("indices must be nonzero")]
    ZeroIndex,
    #[error("sum of |indices| is {0}, minimality needs at least 2")]
    IndexSum(u64),
    #[error("element `{0}` is not declared on the bottom group")]
    ElementUndeclared(String),
    #[error("insufficient facts: {0}")]
    InsufficientFacts(String),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// A failed clause of the centered-splitting definition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "clause", rename_all = "kebab-case")]
pub enum Violation {
    NoBottoms,
    NonHyperbolic,
    BoundaryOutOfRange { boundary: usize },
    BoundaryUsedTwice { boundary: usize },
    BoundaryNotUsed { boundary: usize },
    BottomOutOfRange { edge: usize },
    BottomNotHit { bottom: usize },
    TrivialGluing { edge: usize },
    GluingOutOfAlphabet { edge: usize },
    Minimality { bottom: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBottoms => write!(f, "no-bottoms"),
            Violation::NonHyperbolic => write!(f, "non-hyperbolic"),
            Violation::BoundaryOutOfRange { boundary } => {
                write!(f, "boundary-out-of-range({})", boundary + 1)
            }
            Violation::BoundaryUsedTwice { boundary } => {
                write!(f, "boundary-used-twice({})", boundary + 1)
            }
            Violation::BoundaryNotUsed { boundary } => {
                write!(f, "boundary-not-used({})", boundary + 1)
            }
            Violation::BottomOutOfRange { edge } => write!(f, "bottom-out-of-range(edge {})", edge),
            Violation::BottomNotHit { bottom } => write!(f, "bottom-not-hit({})", bottom + 1),
            Violation::TrivialGluing { edge } => write!(f, "trivial-gluing(edge {})", edge),
            Violation::GluingOutOfAlphabet { edge } => {
                write!(f, "gluing-out-of-alphabet(edge {})", edge)
            }
            Violation::Minimality { bottom } => write!(f, "minimality({})", bottom + 1),
        }
    }
}

/// Boundary component `boundary` glued to the element `word` of bottom `bottom`.
/// The word is written in the bottom's alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub boundary: usize,
    pub bottom: usize,
    pub word: Word,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CenteredSplitting {
    surface: Surface,
    bottoms: Vec<GroupExpr>,
    edges: Vec<Edge>,
}

/// The standard presentation of the fundamental group of a splitting: bottom
/// symbols, handle generators, one stable letter per non-tree edge, and the
/// surface relation `c_1 ... c_b = [u_1,v_1]...` (or `u_1^2 ...`), where
/// `c_i = t_i w_i t_i^-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    pub names: Vec<String>,
    pub bottom_spans: Vec<(usize, usize)>,
    pub handles: (usize, usize),
    pub stable: Vec<Option<usize>>,
    pub boundary: Vec<Word>,
    pub relator: Word,
}

impl Presentation {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.names.clone())
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn handle(&self, k: usize) -> usize {
        self.handles.0 + k
    }

    pub fn handle_count(&self) -> usize {
        self.handles.1 - self.handles.0
    }

    pub fn is_bottom_symbol(&self, i: usize) -> bool {
        self.bottom_spans.iter().any(|&(a, b)| a <= i && i < b)
    }

    /// Right-hand side of the surface relation as a word in the handles.
    pub fn handle_product(&self, orientable: bool, images: &[Word]) -> Word {
        let mut out = Word::identity();
        if orientable {
            for p in images.chunks(2) {
                out = out.mul(&Word::commutator(&p[0], &p[1]));
            }
        } else {
            for u in images {
                out = out.mul(&u.mul(u));
            }
        }
        out
    }
}

fn shift(w: &Word, by: usize) -> Word {
    Word::from_letters(
        w.letters()
            .iter()
            .map(|l| freegroup::Letter::new(l.index() + by, l.is_inverse())),
    )
}

impl CenteredSplitting {
    /// Build without normalizing or validating.
    pub fn from_parts(surface: Surface, bottoms: Vec<GroupExpr>, mut edges: Vec<Edge>) -> Self {
        edges.sort_by_key(|e| (e.boundary, e.bottom));
        CenteredSplitting {
            surface,
            bottoms,
            edges,
        }
    }

    /// Build, fold redundant valence-2 cyclic bottoms into the surface, and validate.
    pub fn new(
        surface: Surface,
        bottoms: Vec<GroupExpr>,
        edges: Vec<Edge>,
    ) -> Result<Self, SplittingError> {
        let mut c = CenteredSplitting::from_parts(surface, bottoms, edges);
        let violations = c.validate();
        if !violations.is_empty() {
            return Err(SplittingError::Invalid(violations));
        }
        while c.absorb_redundant_bottom() {}
        Ok(c)
    }

    pub fn surface(&self) -> Surface {
        self.surface
    }

    pub fn bottoms(&self) -> &[GroupExpr] {
        &self.bottoms
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_simple(&self) -> bool {
        self.bottoms.len() == 1
    }

    pub fn edges_at(&self, bottom: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| self.edges[i].bottom == bottom)
            .collect()
    }

    pub fn valence(&self, bottom: usize) -> usize {
        self.edges_at(bottom).len()
    }

    pub fn valence_one_count(&self) -> usize {
        (0..self.bottoms.len()).filter(|&j| self.valence(j) == 1).count()
    }

    /// Exponent `d` when the edge word is a power of a single symbol.
    pub fn edge_index(&self, edge: usize) -> Option<i64> {
        power_of_symbol(&self.edges[edge].word).map(|(_, d)| d)
    }

    /// Indices of a parachute (single cyclic bottom), in boundary order.
    pub fn parachute_indices(&self) -> Option<Vec<i64>> {
        if self.bottoms.len() != 1 || !self.bottoms[0].is_z() {
            return None;
        }
        Some(self.edges.iter().map(|e| e.word.exponent_sum(0)).collect())
    }

    /// All bottoms cyclic.
    pub fn is_multi_parachute(&self) -> bool {
        self.bottoms.iter().all(|b| b.is_z())
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.bottoms.is_empty() {
            out.push(Violation::NoBottoms);
        }
        if !self.surface.is_hyperbolic() {
            out.push(Violation::NonHyperbolic);
        }
        let b = self.surface.boundary as usize;
        let mut used = vec![0usize; b];
        for e in &self.edges {
            if e.boundary >= b {
                out.push(Violation::BoundaryOutOfRange {
                    boundary: e.boundary,
                });
            } else {
                used[e.boundary] += 1;
            }
        }
        for (i, &n) in used.iter().enumerate() {
            if n > 1 {
                out.push(Violation::BoundaryUsedTwice { boundary: i });
            }
            if n == 0 {
                out.push(Violation::BoundaryNotUsed { boundary: i });
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            match self.bottoms.get(e.bottom) {
                None => out.push(Violation::BottomOutOfRange { edge: i }),
                Some(bottom) => {
                    if e.word.is_identity() {
                        out.push(Violation::TrivialGluing { edge: i });
                    } else if e.word.min_rank() > bottom.alphabet().len() {
                        out.push(Violation::GluingOutOfAlphabet { edge: i });
                    }
                }
            }
        }
        for j in 0..self.bottoms.len() {
            let at = self.edges_at(j);
            if at.is_empty() {
                out.push(Violation::BottomNotHit { bottom: j });
            } else if at.len() == 1 && self.bottoms[j].is_z() {
                // the edge group is the whole bottom unless the index exceeds 1
                if self.edges[at[0]].word.exponent_sum(0).abs() == 1 {
                    out.push(Violation::Minimality { bottom: j });
                }
            }
        }
        out
    }

    fn absorb_redundant_bottom(&mut self) -> bool {
        if self.bottoms.len() < 2 {
            return false;
        }
        let found = (0..self.bottoms.len()).find(|&j| {
            let at = self.edges_at(j);
            self.bottoms[j].is_z()
                && at.len() == 2
                && at.iter().all(|&i| self.edges[i].word.exponent_sum(0).abs() == 1)
        });
        let Some(j) = found else { return false };
        let at = self.edges_at(j);
        let d1 = self.edges[at[0]].word.exponent_sum(0);
        let d2 = self.edges[at[1]].word.exponent_sum(0);
        let s = self.surface;
        let b = s.boundary - 2;
        self.surface = if s.orientable && d1 == -d2 {
            Surface::orientable(s.genus + 1, b)
        } else if s.orientable {
            Surface {
                genus: 2 * s.genus + 2,
                boundary: b,
                orientable: false,
            }
        } else {
            Surface {
                genus: s.genus + 2,
                boundary: b,
                orientable: false,
            }
        };
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| e.bottom != j)
            .cloned()
            .collect();
        for (k, e) in edges.iter_mut().enumerate() {
            e.boundary = k;
            if e.bottom > j {
                e.bottom -= 1;
            }
        }
        self.bottoms.remove(j);
        self.edges = edges;
        true
    }

    /// The abstract free product of the bottom groups.
    pub fn base(&self) -> Result<GroupExpr, SplittingError> {
        let v = self.validate();
        if !v.is_empty() {
            return Err(SplittingError::Invalid(v));
        }
        Ok(GroupExpr::product(self.bottoms.iter().cloned()))
    }

    pub fn presentation(&self) -> Presentation {
        let alphabets: Vec<Vec<String>> = self.bottoms.iter().map(|b| b.alphabet()).collect();
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for a in &alphabets {
            for n in a {
                *count.entry(n).or_default() += 1;
            }
        }
        let mut names = Vec::new();
        let mut bottom_spans = Vec::new();
        for (j, a) in alphabets.iter().enumerate() {
            let start = names.len();
            for n in a {
                if count[n.as_str()] > 1 {
                    names.push(format!("{}_{}", n, j + 1));
                } else {
                    names.push(n.clone());
                }
            }
            bottom_spans.push((start, names.len()));
        }
        let taken: BTreeSet<String> = names.iter().cloned().collect();
        let fresh = |n: String| if taken.contains(&n) { format!("s.{}", n) } else { n };
        let h0 = names.len();
        for n in handle_names(&self.surface) {
            names.push(fresh(n));
        }
        let handles = (h0, names.len());
        let mut seen = BTreeSet::new();
        let mut stable = Vec::new();
        let mut boundary = Vec::new();
        for e in &self.edges {
            let w = shift(&e.word, bottom_spans[e.bottom].0);
            if seen.insert(e.bottom) {
                stable.push(None);
                boundary.push(w);
            } else {
                names.push(fresh(format!("t{}", e.boundary + 1)));
                let t = names.len() - 1;
                stable.push(Some(t));
                boundary.push(Word::gen(t).conjugate(&w));
            }
        }
        let handle_words: Vec<Word> = (handles.0..handles.1).map(Word::gen).collect();
        let rhs = handle_product(self.surface.orientable, &handle_words);
        let relator = Word::product(boundary.iter()).mul(&rhs.inverse());
        Presentation {
            names,
            bottom_spans,
            handles,
            stable,
            boundary,
            relator,
        }
    }

    /// Render an edge word using the bottom's alphabet.
    pub fn edge_text(&self, edge: usize) -> String {
        let e = &self.edges[edge];
        Alphabet::new(self.bottoms[e.bottom].alphabet()).format(&e.word)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph splitting {\n");
        let _ = writeln!(out, "  v [label=\"{}\", shape=box];", self.surface);
        for (j, b) in self.bottoms.iter().enumerate() {
            let _ = writeln!(out, "  b{} [label=\"{}\"];", j + 1, escape(&b.to_string()));
        }
        for (i, e) in self.edges.iter().enumerate() {
            let label = match (self.bottoms[e.bottom].is_z(), self.edge_index(i)) {
                (true, Some(d)) => format!("c{}: d={}", e.boundary + 1, d),
                (false, Some(d)) if d != 1 => {
                    format!("c{}: {} (d={})", e.boundary + 1, self.edge_text(i), d)
                }
                _ => format!("c{}: {}", e.boundary + 1, self.edge_text(i)),
            };
            let _ = writeln!(out, "  v -> b{} [label=\"{}\"];", e.bottom + 1, escape(&label));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn handle_product(orientable: bool, images: &[Word]) -> Word {
    let mut out = Word::identity();
    if orientable {
        for p in images.chunks(2) {
            out = out.mul(&Word::commutator(&p[0], &p[1]));
        }
    } else {
        for u in images {
            out = out.mul(&u.mul(u));
        }
    }
    out
}

/// `(symbol, d)` when `w = symbol^d`.
pub fn power_of_symbol(w: &Word) -> Option<(usize, i64)> {
    let first = *w.letters().first()?;
    w.letters()
        .iter()
        .all(|&l| l == first)
        .then(|| (first.index(), w.len() as i64 * first.sign()))
}

/// Parse an element of a bottom group, accepting unqualified atom element names.
pub fn parse_element(bottom: &GroupExpr, text: &str) -> Result<Word, SplittingError> {
    let alphabet = Alphabet::new(bottom.alphabet());
    if let Ok(w) = alphabet.parse(text) {
        return Ok(w);
    }
    if let GroupExpr::Atom(a) = bottom {
        let plain = Alphabet::new(a.facts.elements.iter().cloned());
        if let Ok(w) = plain.parse(text) {
            return Ok(w);
        }
    }
    Err(SplittingError::ElementUndeclared(text.to_string()))
}

/// A simple splitting over a cyclic bottom `<z>` with boundary `i` glued to `z^d_i`.
pub fn make_parachute(surface: Surface, indices: &[i64]) -> Result<CenteredSplitting, SplittingError> {
    if !surface.is_hyperbolic() {
        return Err(SurfaceError::NotHyperbolic(surface, surface.euler_char()).into());
    }
    if surface.boundary == 0 || indices.len() != surface.boundary as usize {
        return Err(SplittingError::IndexCount {
            expected: surface.boundary as usize,
            got: indices.len(),
        });
    }
    if indices.contains(&0) {
        return Err(SplittingError::ZeroIndex);
    }
    let total: u64 = indices.iter().map(|d| d.unsigned_abs()).sum();
    if total < 2 {
        return Err(SplittingError::IndexSum(total));
    }
    let edges = indices
        .iter()
        .enumerate()
        .map(|(i, &d)| Edge {
            boundary: i,
            bottom: 0,
            word: Word::gen(0).pow(d),
        })
        .collect();
    CenteredSplitting::new(surface, vec![GroupExpr::z()], edges)
}

/// A splitting over cyclic bottoms: `indices[j]` lists `(boundary, d)` for bottom `j`.
pub fn make_multi_parachute(
    surface: Surface,
    indices: &[Vec<(usize, i64)>],
) -> Result<CenteredSplitting, SplittingError> {
    let mut edges = Vec::new();
    for (j, list) in indices.iter().enumerate() {
        for &(boundary, d) in list {
            if d == 0 {
                return Err(SplittingError::ZeroIndex);
            }
            edges.push(Edge {
                boundary,
                bottom: j,
                word: Word::gen(0).pow(d),
            });
        }
    }
    let bottoms = vec![GroupExpr::z(); indices.len()];
    CenteredSplitting::new(surface, bottoms, edges)
}

/// The twice-punctured Klein bottle with its boundaries glued to `a1` in `A1` and `a2` in `A2`.
pub fn make_k(
    a1: GroupExpr,
    a2: GroupExpr,
    e1: &str,
    e2: &str,
) -> Result<CenteredSplitting, SplittingError> {
    let w1 = parse_element(&a1, e1)?;
    let w2 = parse_element(&a2, e2)?;
    let surface = Surface::non_orientable(2, 2)?;
    CenteredSplitting::new(
        surface,
        vec![a1, a2],
        vec![
            Edge {
                boundary: 0,
                bottom: 0,
                word: w1,
            },
            Edge {
                boundary: 1,
                bottom: 1,
                word: w2,
            },
        ],
    )
}

/// One piece of a blown-up bottom: a factor or a block of free generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub origin: usize,
    pub expr: GroupExpr,
    /// Positions of this piece's alphabet in the original bottom's alphabet.
    pub symbols: Vec<usize>,
    /// Factor position inside the original bottom.
    pub slot: usize,
}

/// The Grushko blowup of a centered splitting: the star of the surface vertex,
/// with bottoms replaced by the factors that meet edge groups, and the
/// complementary factors and free rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrushkoBlowup {
    pub surface: Surface,
    pub star: Vec<Piece>,
    /// Edges of the star; `bottom` indexes `star`, words are in the piece alphabet.
    pub edges: Vec<Edge>,
    pub factors: Vec<Piece>,
    /// Free generators split off, as pieces of rank one.
    pub free: Vec<Piece>,
    pub original_bottoms: usize,
}

impl GrushkoBlowup {
    /// Rank of the free factor `F` in `G = pi_1(star) * G_2 * ... * F`.
    pub fn free_rank(&self) -> usize {
        self.free.len() + self.star.len() - self.original_bottoms
    }

    /// The splitting of the star of the surface vertex.
    pub fn star_splitting(&self) -> CenteredSplitting {
        CenteredSplitting::from_parts(
            self.surface,
            self.star.iter().map(|p| p.expr.clone()).collect(),
            self.edges.clone(),
        )
    }

    /// Undo the blowup by collapsing the edges with trivial group.
    pub fn collapse(&self) -> CenteredSplitting {
        let mut bottoms = Vec::new();
        let mut offsets: Vec<BTreeMap<usize, usize>> = Vec::new();
        for j in 0..self.original_bottoms {
            let mut parts: Vec<&Piece> = self
                .star
                .iter()
                .chain(&self.factors)
                .chain(&self.free)
                .filter(|p| p.origin == j)
                .collect();
            let is_free = |p: &Piece| matches!(p.expr, GroupExpr::Free(_));
            parts.sort_by_key(|p| (is_free(p), p.slot, p.symbols.first().copied()));
            let mut free_syms: Vec<(usize, String)> = Vec::new();
            let mut others = Vec::new();
            for p in &parts {
                if let GroupExpr::Free(names) = &p.expr {
                    free_syms.extend(p.symbols.iter().copied().zip(names.iter().cloned()));
                } else {
                    others.push(p.expr.clone());
                }
            }
            free_syms.sort();
            if !free_syms.is_empty() {
                others.push(GroupExpr::Free(free_syms.into_iter().map(|(_, n)| n).collect()));
            }
            bottoms.push(GroupExpr::product(others));
            let mut m = BTreeMap::new();
            for (k, p) in self.star.iter().enumerate() {
                if p.origin == j {
                    m.insert(k, 0);
                }
            }
            offsets.push(m);
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let p = &self.star[e.bottom];
                let word = Word::from_letters(
                    e.word
                        .letters()
                        .iter()
                        .map(|l| freegroup::Letter::new(p.symbols[l.index()], l.is_inverse())),
                );
                Edge {
                    boundary: e.boundary,
                    bottom: p.origin,
                    word,
                }
            })
            .collect();
        CenteredSplitting::from_parts(self.surface, bottoms, edges)
    }
}

/// Whitehead graph of a set of cyclic words on `n` symbols: connected with no cut vertex.
fn whitehead_biconnected(words: &[Word], n: usize) -> bool {
    let vert = |l: freegroup::Letter| 2 * l.index() + l.is_inverse() as usize;
    let mut adj = vec![BTreeSet::new(); 2 * n];
    for w in words {
        let (core, _) = cyclic_reduce(w);
        let ls = core.letters();
        for k in 0..ls.len() {
            let x = ls[k];
            let y = ls[(k + 1) % ls.len()];
            let (a, b) = (vert(x), vert(y.inv()));
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let connected_without = |skip: Option<usize>| {
        let start = (0..2 * n).find(|&v| Some(v) != skip);
        let Some(start) = start else { return true };
        let mut seen = vec![false; 2 * n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if Some(u) != skip && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        (0..2 * n).all(|v| Some(v) == skip || seen[v])
    };
    connected_without(None) && (0..2 * n).all(|v| connected_without(Some(v)))
}

pub fn grushko_blowup(c: &CenteredSplitting) -> Result<GrushkoBlowup, SplittingError> {
    let v = c.validate();
    if !v.is_empty() {
        return Err(SplittingError::Invalid(v));
    }
    let mut star: Vec<Piece> = Vec::new();
    let mut factors = Vec::new();
    let mut free = Vec::new();
    let mut edges = Vec::new();
    for (j, bottom) in c.bottoms.iter().enumerate() {
        let spans = bottom.factor_spans();
        let fs = bottom.factors();
        // which factor each edge lands in
        let mut by_factor: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in c.edges_at(j) {
            let used: BTreeSet<usize> = c.edges[i].word.letters().iter().map(|l| l.index()).collect();
            let homes: BTreeSet<usize> = used
                .iter()
                .map(|&s| spans.iter().position(|&(a, b)| a <= s && s < b).unwrap())
                .collect();
            if homes.len() != 1 {
                return Err(SplittingError::InsufficientFacts(format!(
                    "edge {} of bottom {} meets several free factors",
                    i,
                    j + 1
                )));
            }
            by_factor.entry(*homes.first().unwrap()).or_default().push(i);
        }
        for (slot, f) in fs.iter().enumerate() {
            let (lo, hi) = spans[slot];
            let symbols: Vec<usize> = (lo..hi).collect();
            let hits = by_factor.get(&slot).cloned().unwrap_or_default();
            match f {
                GroupExpr::Free(names) => {
                    // group used generators into blocks linked by shared words
                    let mut block_of: BTreeMap<usize, usize> = BTreeMap::new();
                    let mut blocks: Vec<(BTreeSet<usize>, Vec<usize>)> = Vec::new();
                    for &i in &hits {
                        let used: BTreeSet<usize> =
                            c.edges[i].word.letters().iter().map(|l| l.index()).collect();
                        let touching: BTreeSet<usize> =
                            used.iter().filter_map(|s| block_of.get(s).copied()).collect();
                        let mut syms = used.clone();
                        let mut members = vec![i];
                        for &k in touching.iter().rev() {
                            let (s, m) = std::mem::take(&mut blocks[k]);
                            syms.extend(s);
                            members.extend(m);
                        }
                        blocks.push((syms.clone(), members));
                        let id = blocks.len() - 1;
                        for s in syms {
                            block_of.insert(s, id);
                        }
                    }
                    let mut covered = BTreeSet::new();
                    for (syms, members) in blocks.into_iter().filter(|(s, _)| !s.is_empty()) {
                        let syms: Vec<usize> = syms.into_iter().collect();
                        let local = |w: &Word| {
                            Word::from_letters(w.letters().iter().map(|l| {
                                freegroup::Letter::new(
                                    syms.iter().position(|&s| s == l.index()).unwrap(),
                                    l.is_inverse(),
                                )
                            }))
                        };
                        let words: Vec<Word> = members.iter().map(|&i| local(&c.edges[i].word)).collect();
                        if syms.len() > 1 && !whitehead_biconnected(&words, syms.len()) {
                            return Err(SplittingError::InsufficientFacts(format!(
                                "cannot certify that bottom {} is freely indecomposable relative to its edge words",
                                j + 1
                            )));
                        }
                        covered.extend(syms.iter().copied());
                        let idx = star.len();
                        star.push(Piece {
                            origin: j,
                            expr: GroupExpr::Free(syms.iter().map(|&s| names[s - lo].clone()).collect()),
                            symbols: syms.clone(),
                            slot,
                        });
                        for (&i, w) in members.iter().zip(words) {
                            edges.push(Edge {
                                boundary: c.edges[i].boundary,
                                bottom: idx,
                                word: w,
                            });
                        }
                    }
                    for s in symbols.iter().filter(|s| !covered.contains(s)) {
                        free.push(Piece {
                            origin: j,
                            expr: GroupExpr::Free(vec![names[s - lo].clone()]),
                            symbols: vec![*s],
                            slot,
                        });
                    }
                }
                other => {
                    let piece = Piece {
                        origin: j,
                        expr: (*other).clone(),
                        symbols: symbols.clone(),
                        slot,
                    };
                    if hits.is_empty() {
                        factors.push(piece);
                        continue;
                    }
                    let one_ended = match other {
                        GroupExpr::Atom(a) => a.facts.one_ended,
                        GroupExpr::ClosedSurface(_) => true,
                        _ => false,
                    };
                    if !one_ended {
                        return Err(SplittingError::InsufficientFacts(format!(
                            "factor {} of bottom {} is not declared one-ended",
                            slot + 1,
                            j + 1
                        )));
                    }
                    let idx = star.len();
                    star.push(piece);
                    for i in hits {
                        edges.push(Edge {
                            boundary: c.edges[i].boundary,
                            bottom: idx,
                            word: shift_down(&c.edges[i].word, lo),
                        });
                    }
                }
            }
        }
    }
    edges.sort_by_key(|e| e.boundary);
    Ok(GrushkoBlowup {
        surface: c.surface,
        star,
        edges,
        factors,
        free,
        original_bottoms: c.bottoms.len(),
    })
}

fn shift_down(w: &Word, by: usize) -> Word {
    Word::from_letters(
        w.letters()
            .iter()
            .map(|l| freegroup::Letter::new(l.index() - by, l.is_inverse())),
    )
}
