use std::collections::BTreeSet;
use std::fmt;

use freegroup::{
    abelianize, conjugator, cyclic_reduce, fold, genus_search, is_free_basis, literal_pieces, Ball,
    Bound, Decision, FreeHom, GenusQuery, Pieces, Word, WordError, DEFAULT_BUDGET,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::GroupExpr;
use crate::splitting::{handle_product, CenteredSplitting, Presentation, Violation};
use crate::surface::Surface;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RetractError {
    #[error("{0} is exceptional")]
    Exceptional(Surface),
    #[error("the splitting is not simple")]
    NotSimple,
    #[error("abelian bottom: a simple étage needs a non-abelian base")]
    AbelianBottom,
    #[error("bottom is not a free group")]
    NotFreeBottom,
    #[error("the map pinches: its restriction to the surface group is not injective")]
    Pinching,
    #[error("the boundary-preserving map was rejected: {0}")]
    Rejected(String),
    #[error("expected {expected} images, got {got}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("pinch data: {0}")]
    Bookkeeping(String),
}

/// Why a splitting is not retractable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "obstruction", rename_all = "kebab-case")]
pub enum Obstruction {
    Invalid { violations: Vec<Violation> },
    NonHyperbolic { surface: Surface },
    Exceptional { surface: Surface },
    GenusBound { genus: u32, valence_one: usize },
    /// The edge words at `bottom` do not sum to zero in homology with the given modulus.
    Homology { bottom: usize, modulus: u32, vector: Vec<i64> },
    IndexSum { bottom: usize, sum: i64 },
    Parity { bottom: usize, sum: i64 },
    KleinParity { indices: Vec<i64> },
}

impl Obstruction {
    pub fn name(&self) -> &'static str {
        match self {
            Obstruction::Invalid { .. } => "invalid",
            Obstruction::NonHyperbolic { .. } => "non-hyperbolic",
            Obstruction::Exceptional { .. } => "exceptional",
            Obstruction::GenusBound { .. } => "genus-bound",
            Obstruction::Homology { .. } => "homology",
            Obstruction::IndexSum { .. } => "index-sum",
            Obstruction::Parity { .. } => "parity",
            Obstruction::KleinParity { .. } => "klein-parity",
        }
    }
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the non-abelian image of the surface group is certified.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonAbelian {
    /// The image lies in a free factor and has rank at least 2.
    FreeRank,
    /// Two images are conjugates of nontrivial elements of distinct free factors.
    SeparateFactors(usize, usize),
    /// Orientable surface with one boundary component: the image of the
    /// handle product is the (nontrivial) gluing element.
    BoundaryCommutator,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetSymbol {
    pub name: String,
    /// Symbols in the same class live in the same free factor.
    pub class: usize,
    /// A free generator, as opposed to a stand-in for an atom element or root.
    pub faithful: bool,
}

/// A retraction of the étage presentation onto a free-group model of its base.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Retraction {
    pub ambient: Vec<String>,
    pub target: Vec<TargetSymbol>,
    pub images: FreeHom,
    /// Ambient symbols whose image is prescribed (the base and, when extended, the extra generator).
    pub fixed: Vec<(usize, Word)>,
    pub relator: Word,
    /// Generators of the surface group, as ambient words.
    pub surface: Vec<Word>,
    pub orientable_one_boundary: bool,
    pub nonabelian: NonAbelian,
    /// The target carries an extra free generator (retraction onto `B * Z`).
    pub extended: bool,
}

impl Retraction {
    /// Mechanically recheck the certificate.
    pub fn verify(&self) -> bool {
        if self.images.source_rank() != self.ambient.len() {
            return false;
        }
        let Ok(r) = self.images.apply(&self.relator) else {
            return false;
        };
        if !r.is_identity() {
            return false;
        }
        if self.fixed.iter().any(|(i, w)| self.images.image(*i) != w) {
            return false;
        }
        let Ok(imgs) = self
            .surface
            .iter()
            .map(|w| self.images.apply(w))
            .collect::<Result<Vec<_>, _>>()
        else {
            return false;
        };
        check_claim(&self.nonabelian, &self.target, &imgs, self.orientable_one_boundary)
    }

    pub fn image_of(&self, name: &str) -> Option<&Word> {
        self.ambient
            .iter()
            .position(|n| n == name)
            .map(|i| self.images.image(i))
    }
}

fn check_claim(claim: &NonAbelian, target: &[TargetSymbol], imgs: &[Word], obc: bool) -> bool {
    match claim {
        NonAbelian::FreeRank => {
            all_faithful(target, imgs) && fold(&nontrivial(imgs)).rank() >= 2
        }
        NonAbelian::SeparateFactors(i, j) => match (imgs.get(*i), imgs.get(*j)) {
            (Some(a), Some(b)) => match (factor_power(target, a), factor_power(target, b)) {
                (Some(x), Some(y)) => x != y,
                _ => false,
            },
            _ => false,
        },
        NonAbelian::BoundaryCommutator => obc,
    }
}

fn nontrivial(imgs: &[Word]) -> Vec<Word> {
    imgs.iter().filter(|w| !w.is_identity()).cloned().collect()
}

fn all_faithful(target: &[TargetSymbol], imgs: &[Word]) -> bool {
    imgs.iter()
        .flat_map(|w| w.letters())
        .all(|l| target[l.index()].faithful)
}

/// Class of the factor when the cyclic core of `w` is a nontrivial power of one symbol.
fn factor_power(target: &[TargetSymbol], w: &Word) -> Option<usize> {
    let (core, _) = cyclic_reduce(w);
    let first = *core.letters().first()?;
    core.letters()
        .iter()
        .all(|&l| l == first)
        .then(|| target[first.index()].class)
}

fn certify_nonabelian(target: &[TargetSymbol], imgs: &[Word], obc: bool) -> Option<NonAbelian> {
    if all_faithful(target, imgs) {
        return (fold(&nontrivial(imgs)).rank() >= 2).then_some(NonAbelian::FreeRank);
    }
    let classes: Vec<Option<usize>> = imgs.iter().map(|w| factor_power(target, w)).collect();
    for i in 0..imgs.len() {
        for j in i + 1..imgs.len() {
            if let (Some(a), Some(b)) = (classes[i], classes[j]) {
                if a != b {
                    return Some(NonAbelian::SeparateFactors(i, j));
                }
            }
        }
    }
    obc.then_some(NonAbelian::BoundaryCommutator)
}

/// Bounds for the witness searches.
#[derive(Clone, Debug)]
pub struct SearchBounds {
    /// Witness length for the handle images.
    pub radius: usize,
    /// Length of candidate images for stable letters.
    pub stable_radius: usize,
    pub budget: u64,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds {
            radius: 5,
            stable_radius: 2,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// The free-group model of the base: every bottom symbol mapped to a word over target symbols.
#[derive(Clone, Debug)]
struct Model {
    target: Vec<TargetSymbol>,
    fixed: Vec<(usize, Word)>,
}

impl Model {
    fn build(bottoms: &[GroupExpr], pres: &Presentation) -> Option<Model> {
        let mut m = Model {
            target: Vec::new(),
            fixed: Vec::new(),
        };
        let mut class = 0;
        for (j, b) in bottoms.iter().enumerate() {
            let mut at = pres.bottom_spans[j].0;
            for f in b.leaves() {
                match f {
                    GroupExpr::Free(names) => {
                        for _ in names {
                            let w = m.push(pres.names[at].clone(), class, true);
                            class += 1;
                            m.fixed.push((at, w));
                            at += 1;
                        }
                    }
                    GroupExpr::Atom(a) => {
                        for e in &a.facts.elements {
                            let name = &pres.names[at];
                            let (head, tail) = name.rsplit_once('.').unwrap_or(("", name));
                            let sub = |p: &str| format!("{}.{}_{}", head, p, tail);
                            let w = if a.facts.is_square(e) {
                                let r = m.push(sub("r"), class, false);
                                r.mul(&r)
                            } else if a.facts.is_commutator(e) {
                                let p = m.push(sub("p"), class, false);
                                let q = m.push(sub("q"), class, false);
                                Word::commutator(&p, &q)
                            } else {
                                m.push(name.clone(), class, false)
                            };
                            m.fixed.push((at, w));
                            at += 1;
                        }
                        class += 1;
                    }
                    GroupExpr::Etage(_) | GroupExpr::ClosedSurface(_) => {
                        // generators evaluate into the factor; nothing more is known
                        for _ in f.alphabet() {
                            let w = m.push(pres.names[at].clone(), class, false);
                            m.fixed.push((at, w));
                            at += 1;
                        }
                        class += 1;
                    }
                    _ => return None,
                }
            }
        }
        Some(m)
    }

    fn push(&mut self, name: String, class: usize, faithful: bool) -> Word {
        self.target.push(TargetSymbol {
            name,
            class,
            faithful,
        });
        Word::gen(self.target.len() - 1)
    }

    fn add_extra(&mut self) -> Word {
        let taken: BTreeSet<&str> = self.target.iter().map(|t| t.name.as_str()).collect();
        let name = ["s", "s0", "s1", "s2"]
            .into_iter()
            .find(|n| !taken.contains(n))
            .unwrap_or("s_")
            .to_string();
        let class = self.target.iter().map(|t| t.class + 1).max().unwrap_or(0);
        self.push(name, class, true)
    }
}

/// The unknowns of a retraction problem over a fixed model.
struct Problem<'a> {
    c: &'a CenteredSplitting,
    pres: Presentation,
    model: Model,
    extended: bool,
    /// Stable letters with a prescribed image.
    pinned: Vec<(usize, Word)>,
}

impl Problem<'_> {
    fn rank(&self) -> usize {
        self.model.target.len()
    }

    fn surface_words(&self) -> Vec<Word> {
        let mut out: Vec<Word> = (self.pres.handles.0..self.pres.handles.1).map(Word::gen).collect();
        out.extend(self.pres.boundary.iter().cloned());
        out
    }

    fn orientable_one_boundary(&self) -> bool {
        let s = self.c.surface();
        s.orientable && s.boundary == 1 && s.genus >= 1
    }

    /// Base images with all stable letters and handles sent to the identity.
    fn blank(&self) -> FreeHom {
        let mut h = FreeHom::new(vec![Word::identity(); self.pres.rank()]);
        for (i, w) in &self.model.fixed {
            h.set_image(*i, w.clone());
        }
        for (i, w) in &self.pinned {
            h.set_image(*i, w.clone());
        }
        h
    }

    fn certificate(&self, images: FreeHom) -> Option<Retraction> {
        let surface = self.surface_words();
        let imgs: Vec<Word> = surface
            .iter()
            .map(|w| images.apply(w))
            .collect::<Result<_, _>>()
            .ok()?;
        let nonabelian =
            certify_nonabelian(&self.model.target, &imgs, self.orientable_one_boundary())?;
        let mut fixed = self.model.fixed.clone();
        fixed.extend(self.pinned.iter().cloned());
        let r = Retraction {
            ambient: self.pres.names.clone(),
            target: self.model.target.clone(),
            images,
            fixed,
            relator: self.pres.relator.clone(),
            surface,
            orientable_one_boundary: self.orientable_one_boundary(),
            nonabelian,
            extended: self.extended,
        };
        r.verify().then_some(r)
    }

    /// Product of the boundary images under `h`.
    fn boundary_product(&self, h: &FreeHom) -> Word {
        let imgs: Vec<Word> = self
            .pres
            .boundary
            .iter()
            .map(|w| h.apply(w).expect("presentation words are in range"))
            .collect();
        Word::product(imgs.iter())
    }

    /// Fill the handles by a genus search for the boundary product under `h`.
    fn solve_handles(&self, h: &FreeHom, bounds: &SearchBounds, explored: &mut u64) -> Option<Retraction> {
        let s = self.c.surface();
        let a = self.boundary_product(h);
        if s.genus == 0 {
            return if a.is_identity() {
                self.certificate(h.clone())
            } else {
                None
            };
        }
        let kind = if s.orientable {
            Pieces::Commutators
        } else {
            Pieces::Squares
        };
        let assign = |w: &[Word]| {
            let mut cand = h.clone();
            for (k, x) in w.iter().enumerate() {
                cand.set_image(self.pres.handle(k), x.clone());
            }
            cand
        };
        for w in literal_pieces(&a, kind, s.genus as usize, 32) {
            if let Some(r) = self.certificate(assign(&w)) {
                return Some(r);
            }
        }
        let mut q = GenusQuery::new(kind, s.genus as usize, bounds.radius);
        q.budget = bounds.budget.saturating_sub(*explored).max(1);
        let mut found = None;
        let result = genus_search(&a, self.rank(), &q, |w| {
            match self.certificate(assign(w)) {
                Some(r) => {
                    found = Some(r);
                    true
                }
                None => false,
            }
        })
        .ok()?;
        *explored += match &result {
            Decision::Unknown(b) => b.explored,
            _ => 1,
        };
        found
    }

    fn free_stable(&self) -> Vec<usize> {
        let pinned: BTreeSet<usize> = self.pinned.iter().map(|(i, _)| *i).collect();
        self.pres
            .stable
            .iter()
            .flatten()
            .copied()
            .filter(|t| !pinned.contains(t))
            .collect()
    }

    /// Try stable-letter images from a small ball, then search the handles.
    fn search(&self, bounds: &SearchBounds) -> Result<Retraction, Bound> {
        let base = self.blank();
        let mut explored = 0u64;
        if let Some(r) = self.solve_handles(&base, bounds, &mut explored) {
            return Ok(r);
        }
        let free = self.free_stable();
        if !free.is_empty() && bounds.stable_radius > 0 {
            let candidates = Ball::new(self.rank()).up_to(bounds.stable_radius);
            let mut idx = vec![0usize; free.len()];
            'odometer: loop {
                if explored >= bounds.budget {
                    break;
                }
                let mut h = base.clone();
                for (k, &t) in free.iter().enumerate() {
                    h.set_image(t, candidates[idx[k]].clone());
                }
                explored += 1;
                if let Some(r) = self.solve_handles(&h, bounds, &mut explored) {
                    return Ok(r);
                }
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < candidates.len() {
                        continue 'odometer;
                    }
                    *slot = 0;
                }
                break;
            }
        }
        Err(Bound::new("retraction witness search", explored)
            .limit("radius", bounds.radius as u64)
            .limit("stable_radius", bounds.stable_radius as u64)
            .limit("budget", bounds.budget))
    }
}

pub type RetractDecision = Decision<Retraction, Obstruction>;

pub fn decide_retractable(c: &CenteredSplitting) -> RetractDecision {
    decide_retractable_with(c, &SearchBounds::default())
}

pub fn decide_retractable_with(c: &CenteredSplitting, bounds: &SearchBounds) -> RetractDecision {
    if let Some(no) = obstruction(c) {
        return Decision::No(no);
    }
    match witness(c, bounds) {
        Ok(r) => Decision::Yes(r),
        Err(b) => Decision::Unknown(b),
    }
}

/// The first necessary condition that fails, if any.
pub fn obstruction(c: &CenteredSplitting) -> Option<Obstruction> {
    let s = c.surface();
    let violations = c.validate();
    if violations.contains(&Violation::NonHyperbolic) {
        return Some(Obstruction::NonHyperbolic { surface: s });
    }
    if !violations.is_empty() {
        return Some(Obstruction::Invalid { violations });
    }
    if s.is_exceptional().unwrap_or(true) {
        return Some(Obstruction::Exceptional { surface: s });
    }
    let n1 = c.valence_one_count();
    if (s.genus as usize) < n1 {
        return Some(Obstruction::GenusBound {
            genus: s.genus,
            valence_one: n1,
        });
    }
    if let Some(h) = homology_obstruction(c) {
        return Some(h);
    }
    if let Some(d) = c.parachute_indices() {
        let total: i64 = d.iter().map(|x| x.abs()).sum();
        if !s.orientable && s.genus == 2 && d.len() == 2 && total >= 3 && (d[0] % 2 != 0 || d[1] % 2 != 0) {
            return Some(Obstruction::KleinParity { indices: d });
        }
    }
    None
}

/// Edge words at each bottom must sum to zero in the homology of that bottom:
/// rationally for orientable surfaces, mod 2 always.
fn homology_obstruction(c: &CenteredSplitting) -> Option<Obstruction> {
    let s = c.surface();
    for (j, b) in c.bottoms().iter().enumerate() {
        let fs = b.factors();
        if fs.is_empty() || !fs.iter().all(|f| matches!(f, GroupExpr::Free(_))) {
            continue;
        }
        let rank = b.alphabet().len();
        let mut sum = vec![0i64; rank];
        for i in c.edges_at(j) {
            for (x, y) in sum.iter_mut().zip(abelianize(&c.edges()[i].word, rank, 0)) {
                *x += y;
            }
        }
        let moduli: &[u32] = if s.orientable { &[0, 2] } else { &[2] };
        for &m in moduli {
            let v: Vec<i64> = sum
                .iter()
                .map(|&x| if m == 2 { x.rem_euclid(2) } else { x })
                .collect();
            if v.iter().any(|&x| x != 0) {
                return Some(if rank == 1 && m == 0 {
                    Obstruction::IndexSum { bottom: j, sum: sum[0] }
                } else if rank == 1 {
                    Obstruction::Parity { bottom: j, sum: sum[0] }
                } else {
                    Obstruction::Homology {
                        bottom: j,
                        modulus: m,
                        vector: v,
                    }
                });
            }
        }
    }
    None
}

fn unknown(reason: &str) -> Bound {
    Bound::new(reason, 0)
}

fn witness(c: &CenteredSplitting, bounds: &SearchBounds) -> Result<Retraction, Bound> {
    let pres = c.presentation();
    let Some(mut model) = Model::build(c.bottoms(), &pres) else {
        return Err(unknown("no free-group model for a bottom"));
    };
    let s = c.surface();
    let extended = c.bottoms().len() == 1 && c.bottoms()[0].is_abelian();
    let mut pinned = Vec::new();
    if extended {
        let extra = model.add_extra();
        let carrier = pres
            .stable
            .iter()
            .flatten()
            .next()
            .copied()
            .or_else(|| (pres.handle_count() > 0).then_some(pres.handles.0));
        let Some(carrier) = carrier else {
            return Err(unknown("no generator to carry the extra factor"));
        };
        pinned.push((carrier, extra));
    }
    let problem = Problem {
        c,
        pres,
        model,
        extended,
        pinned,
    };
    if let Some(d) = c.parachute_indices() {
        if let Some(r) = explicit_parachute(&problem, s, &d) {
            return Ok(r);
        }
    }
    problem.search(bounds)
}

/// Closed-form retractions for parachutes.
fn explicit_parachute(p: &Problem, s: Surface, d: &[i64]) -> Option<Retraction> {
    let b = d.len();
    if b < 2 {
        return None;
    }
    let z = Word::gen(0);
    let extra = Word::gen(1);
    let stable = |i: usize| p.pres.stable[i];
    let mut h = p.blank();
    if s.orientable && s.genus >= 1 && d.iter().sum::<i64>() == 0 {
        for i in 2..b {
            h.set_image(stable(i)?, Word::identity());
        }
        let tail: i64 = d[2..].iter().sum();
        h.set_image(p.pres.handle(0), z.pow(-d[1]));
        h.set_image(p.pres.handle(1), z.pow(-tail).mul(&extra).mul(&z.pow(tail)));
        return p.certificate(h);
    }
    if s.orientable && s.genus == 0 {
        // split the boundaries into two zero-sum sets; the second set is conjugated by the extra
        // generator and the first is conjugated past the running product of the second
        for mask in 1u32..1 << (b - 1) {
            let in_second = |i: usize| i > 0 && mask >> (i - 1) & 1 == 1;
            let second: i64 = (1..b).filter(|&i| in_second(i)).map(|i| d[i]).sum();
            if second != 0 || d.iter().sum::<i64>() != 0 {
                continue;
            }
            let mut h = p.blank();
            let mut pinned = Vec::new();
            let mut q = Word::identity();
            for (i, &di) in d.iter().enumerate().skip(1) {
                let t = stable(i)?;
                if in_second(i) {
                    h.set_image(t, extra.clone());
                    if pinned.is_empty() {
                        pinned.push((t, extra.clone()));
                    }
                    q = q.mul(&extra.conjugate(&z.pow(di)));
                } else {
                    h.set_image(t, q.inverse());
                }
            }
            let q = Problem {
                c: p.c,
                pres: p.pres.clone(),
                model: p.model.clone(),
                extended: p.extended,
                pinned,
            };
            if let Some(r) = q.certificate(h) {
                return Some(r);
            }
        }
    }
    if !s.orientable && s.genus >= 2 {
        // a contiguous block of boundaries with even index sum, sent through the extra generator
        for k in 1..b {
            for l in k..b {
                let dk: i64 = d[k..=l].iter().sum();
                if dk % 2 != 0 {
                    continue;
                }
                let before: i64 = d[..k].iter().sum();
                let after: i64 = d[l + 1..].iter().sum();
                if (before + after) % 2 != 0 {
                    continue;
                }
                let mut h = p.blank();
                let mut pinned = Vec::new();
                for i in 1..b {
                    let t = stable(i)?;
                    let img = if (k..=l).contains(&i) { extra.clone() } else { Word::identity() };
                    h.set_image(t, img.clone());
                    if i == k {
                        pinned.push((t, img));
                    }
                }
                h.set_image(p.pres.handle(0), z.pow((before + after) / 2));
                let mid = extra.mul(&z.pow(dk / 2)).mul(&extra.inverse());
                h.set_image(p.pres.handle(1), z.pow(-after).mul(&mid).mul(&z.pow(after)));
                let q = Problem {
                    c: p.c,
                    pres: p.pres.clone(),
                    model: p.model.clone(),
                    extended: p.extended,
                    pinned,
                };
                if let Some(r) = q.certificate(h) {
                    return Some(r);
                }
            }
        }
    }
    None
}

/// A homomorphism from the surface group given by the images of its generators,
/// written over the ambient alphabet of the étage presentation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bpm {
    pub handles: Vec<Word>,
    pub boundary: Vec<Word>,
}

/// Conjugators `k_i` with `k_i w_i k_i^-1 = p(c_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BpmCertificate {
    pub conjugators: Vec<Word>,
    pub nonabelian: NonAbelian,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "kebab-case")]
pub enum BpmFailure {
    SurfaceRelation,
    BoundaryNotConjugate { boundary: usize },
    AbelianImage,
    IsoOntoConjugate,
}

pub fn check_bpm(b: &Bpm, c: &CenteredSplitting) -> Result<Decision<BpmCertificate, BpmFailure>, RetractError> {
    let s = c.surface();
    if s.is_exceptional().unwrap_or(true) {
        return Err(RetractError::Exceptional(s));
    }
    let pres = c.presentation();
    if b.handles.len() != pres.handle_count() {
        return Err(RetractError::Arity {
            expected: pres.handle_count(),
            got: b.handles.len(),
        });
    }
    if b.boundary.len() != pres.boundary.len() {
        return Err(RetractError::Arity {
            expected: pres.boundary.len(),
            got: b.boundary.len(),
        });
    }
    if identity_like(b, &pres) {
        return Ok(Decision::No(BpmFailure::IsoOntoConjugate));
    }
    let in_base = |w: &Word| w.letters().iter().all(|l| pres.is_bottom_symbol(l.index()));
    if !b.handles.iter().chain(&b.boundary).all(in_base) {
        return Ok(Decision::Unknown(
            Bound::new("boundary-preserving map leaves the base", 0),
        ));
    }
    let exact = c
        .bottoms()
        .iter()
        .all(|x| x.factors().iter().all(|f| matches!(f, GroupExpr::Free(_))));
    let fail = |f: BpmFailure| {
        if exact {
            Decision::No(f)
        } else {
            Decision::Unknown(Bound::new(
                format!("opaque bottom: cannot confirm {:?}", f),
                0,
            ))
        }
    };
    let lhs = Word::product(b.boundary.iter());
    if lhs != handle_product(s.orientable, &b.handles) {
        return Ok(fail(BpmFailure::SurfaceRelation));
    }
    let mut conjugators = Vec::new();
    for (i, (img, w)) in b.boundary.iter().zip(&pres.boundary).enumerate() {
        let glued = strip_stable(w, &pres);
        match conjugator(&glued, img) {
            Some(k) => conjugators.push(k),
            None => return Ok(fail(BpmFailure::BoundaryNotConjugate { boundary: i })),
        }
    }
    let imgs: Vec<Word> = b.handles.iter().chain(&b.boundary).cloned().collect();
    let fold_rank = fold(&nontrivial(&imgs)).rank();
    if exact {
        if fold_rank < 2 {
            return Ok(Decision::No(BpmFailure::AbelianImage));
        }
        return Ok(Decision::Yes(BpmCertificate {
            conjugators,
            nonabelian: NonAbelian::FreeRank,
        }));
    }
    if s.orientable && s.boundary == 1 && s.genus >= 1 {
        return Ok(Decision::Yes(BpmCertificate {
            conjugators,
            nonabelian: NonAbelian::BoundaryCommutator,
        }));
    }
    Ok(Decision::Unknown(Bound::new("non-abelian image over opaque bottoms", 0)))
}

/// The gluing element `w_i` of a boundary word `t_i w_i t_i^-1`.
fn strip_stable(c: &Word, pres: &Presentation) -> Word {
    Word::from_letters(
        c.letters()
            .iter()
            .copied()
            .filter(|l| pres.is_bottom_symbol(l.index())),
    )
}

/// Images are the generators themselves conjugated by one common element.
fn identity_like(b: &Bpm, pres: &Presentation) -> bool {
    let gens: Vec<Word> = (pres.handles.0..pres.handles.1)
        .map(Word::gen)
        .chain(pres.boundary.iter().cloned())
        .collect();
    let imgs: Vec<&Word> = b.handles.iter().chain(&b.boundary).collect();
    let Some((g, k)) = gens
        .iter()
        .zip(&imgs)
        .find(|(g, _)| !g.is_identity())
        .and_then(|(g, i)| conjugator(g, i).map(|k| (g, k)))
    else {
        return false;
    };
    // conjugators of one pair differ by powers of the root
    let root = g.root();
    (-3..=3).any(|n| {
        let k = k.mul(&root.pow(n));
        gens.iter().zip(&imgs).all(|(g, i)| k.conjugate(g) == **i)
    })
}

/// Turn a boundary-preserving map into a retraction of a simple étage over a free bottom.
pub fn build_retraction(c: &CenteredSplitting, b: &Bpm) -> Result<Retraction, RetractError> {
    if !c.is_simple() {
        return Err(RetractError::NotSimple);
    }
    let bottom = &c.bottoms()[0];
    match bottom.free_rank() {
        Some(r) if r >= 2 => {}
        Some(_) => return Err(RetractError::AbelianBottom),
        None => return Err(RetractError::NotFreeBottom),
    }
    let cert = match check_bpm(b, c)? {
        Decision::Yes(cert) => cert,
        other => return Err(RetractError::Rejected(other.verdict().to_string())),
    };
    let pres = c.presentation();
    let nb = pres.boundary.len();
    let mut basis: Vec<Word> = b.handles.clone();
    basis.extend(b.boundary[..nb - 1].iter().cloned());
    if !is_free_basis(&basis) {
        return Err(RetractError::Pinching);
    }
    let g1 = cert.conjugators[0].clone();
    let g1i = g1.inverse();
    let mut images = FreeHom::new(vec![Word::identity(); pres.rank()]);
    let (lo, hi) = pres.bottom_spans[0];
    for i in lo..hi {
        images.set_image(i, Word::gen(i));
    }
    for (k, h) in b.handles.iter().enumerate() {
        images.set_image(pres.handle(k), g1i.conjugate(h));
    }
    for (i, t) in pres.stable.iter().enumerate() {
        if let Some(t) = t {
            images.set_image(*t, g1i.mul(&cert.conjugators[i]));
        }
    }
    let target = (lo..hi)
        .map(|i| TargetSymbol {
            name: pres.names[i].clone(),
            class: i,
            faithful: true,
        })
        .collect();
    let mut surface: Vec<Word> = (pres.handles.0..pres.handles.1).map(Word::gen).collect();
    surface.extend(pres.boundary.iter().cloned());
    let s = c.surface();
    let r = Retraction {
        ambient: pres.names.clone(),
        target,
        images,
        fixed: (lo..hi).map(|i| (i, Word::gen(i))).collect(),
        relator: pres.relator.clone(),
        surface,
        orientable_one_boundary: s.orientable && s.boundary == 1 && s.genus >= 1,
        nonabelian: NonAbelian::FreeRank,
        extended: false,
    };
    if !r.verify() {
        return Err(RetractError::Rejected("relator does not map to the identity".into()));
    }
    Ok(r)
}

/// One complementary piece of a multicurve.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinchPiece {
    pub genus: u32,
    pub orientable: bool,
    /// Original boundary components lying on this piece.
    pub boundaries: Vec<usize>,
}

/// A multicurve described combinatorially: the complementary pieces and, for
/// each curve, the two pieces on its sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinchData {
    pub pieces: Vec<PinchPiece>,
    pub curves: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinchedQuotient {
    /// Pieces with their curve sides capped by discs.
    pub pieces: Vec<Surface>,
    pub boundaries: Vec<Vec<usize>>,
    /// Arcs with trivial edge group, one per pinched curve, joining the caps.
    pub arcs: Vec<(usize, usize)>,
    /// Rank of the free factor contributed by the arcs.
    pub free_rank: usize,
}

pub fn pinched_quotient(c: &CenteredSplitting, pd: &PinchData) -> Result<PinchedQuotient, RetractError> {
    let s = c.surface();
    let bad = |m: &str| Err(RetractError::Bookkeeping(m.to_string()));
    if pd.curves.is_empty() {
        if pd.pieces.len() > 1 {
            return bad("several pieces without curves");
        }
        return Ok(PinchedQuotient {
            pieces: vec![s],
            boundaries: vec![(0..s.boundary as usize).collect()],
            arcs: Vec::new(),
            free_rank: 0,
        });
    }
    let n = pd.pieces.len();
    if pd.curves.iter().any(|&(a, b)| a >= n || b >= n) {
        return bad("curve side out of range");
    }
    let mut seen = vec![0usize; s.boundary as usize];
    for p in &pd.pieces {
        for &i in &p.boundaries {
            match seen.get_mut(i) {
                Some(x) => *x += 1,
                None => return bad("boundary out of range"),
            }
        }
    }
    if seen.iter().any(|&x| x != 1) {
        return bad("pieces do not partition the boundary");
    }
    if s.orientable && pd.pieces.iter().any(|p| !p.orientable) {
        return bad("non-orientable piece in an orientable surface");
    }
    if pd.pieces.iter().any(|p| !p.orientable && p.genus == 0) {
        return bad("non-orientable piece needs a crosscap");
    }
    let mut sides = vec![0u32; n];
    for &(a, b) in &pd.curves {
        sides[a] += 1;
        sides[b] += 1;
    }
    let uncapped: Vec<Surface> = pd
        .pieces
        .iter()
        .zip(&sides)
        .map(|(p, &k)| Surface {
            genus: p.genus,
            boundary: p.boundaries.len() as u32 + k,
            orientable: p.orientable,
        })
        .collect();
    if uncapped.iter().map(|x| x.euler_char()).sum::<i64>() != s.euler_char() {
        return bad("euler characteristic not conserved");
    }
    // the pieces glued along the curves must form a connected surface
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(c: &mut [usize], x: usize) -> usize {
        if c[x] != x {
            let r = find(c, c[x]);
            c[x] = r;
        }
        c[x]
    }
    for &(a, b) in &pd.curves {
        let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
        comp[ra] = rb;
    }
    let root = find(&mut comp, 0);
    if (0..n).any(|x| find(&mut comp, x) != root) {
        return bad("pieces are not connected by the curves");
    }
    if !s.orientable && pd.pieces.iter().all(|p| p.orientable) && pd.curves.len() < n {
        return bad("orientable pieces glued along a tree cannot be non-orientable");
    }
    Ok(PinchedQuotient {
        pieces: pd
            .pieces
            .iter()
            .map(|p| Surface {
                genus: p.genus,
                boundary: p.boundaries.len() as u32,
                orientable: p.orientable,
            })
            .collect(),
        boundaries: pd.pieces.iter().map(|p| p.boundaries.clone()).collect(),
        arcs: pd.curves.clone(),
        free_rank: pd.curves.len() + 1 - n,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Atom, Fact};
    use crate::splitting::{make_k, make_parachute, Edge};
    use freegroup::Alphabet;

    fn over_f2(surface: Surface, words: &[&str]) -> CenteredSplitting {
        let a = Alphabet::standard(2);
        let edges = words
            .iter()
            .enumerate()
            .map(|(i, w)| Edge {
                boundary: i,
                bottom: 0,
                word: a.parse(w).unwrap(),
            })
            .collect();
        CenteredSplitting::new(surface, vec![GroupExpr::free(2)], edges).unwrap()
    }

    fn n(g: u32, b: u32) -> Surface {
        Surface::non_orientable(g, b).unwrap()
    }

    fn no_name(d: RetractDecision) -> &'static str {
        match d {
            Decision::No(o) => o.name(),
            other => panic!("expected No, got {}", other.verdict()),
        }
    }

    #[test]
    fn punctured_torus_over_commutator() {
        let c = over_f2(Surface::orientable(1, 1), &["[a,b]"]);
        let r = decide_retractable(&c).yes().unwrap();
        assert!(r.verify());
        assert!(!r.extended);
        assert_eq!(r.image_of("a"), Some(&Word::gen(0)));
        assert_eq!(r.image_of("b"), Some(&Word::gen(1)));
        let [x, y] = [r.image_of("u1").unwrap(), r.image_of("v1").unwrap()];
        assert_eq!(Word::commutator(x, y), Alphabet::standard(2).parse("[a,b]").unwrap());
    }

    #[test]
    fn squared_generator_commutator() {
        let c = over_f2(Surface::orientable(1, 1), &["[a^2,b]"]);
        let r = decide_retractable(&c).yes().unwrap();
        assert!(r.verify());
    }

    #[test]
    fn non_commutator_is_rejected() {
        let c = over_f2(Surface::orientable(1, 1), &["a"]);
        match decide_retractable(&c) {
            Decision::No(Obstruction::Homology { modulus, vector, .. }) => {
                assert_eq!(modulus, 0);
                assert_eq!(vector, vec![1, 0]);
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn parachutes() {
        let r = decide_retractable(&make_parachute(n(2, 2), &[2, 4]).unwrap()).yes().unwrap();
        assert!(r.verify() && r.extended);
        assert_eq!(no_name(decide_retractable(&make_parachute(n(2, 2), &[2, 3]).unwrap())), "parity");
        assert_eq!(
            no_name(decide_retractable(&make_parachute(n(2, 2), &[1, 3]).unwrap())),
            "klein-parity"
        );
        assert_eq!(
            no_name(decide_retractable(&make_parachute(Surface::orientable(1, 2), &[1, 2]).unwrap())),
            "index-sum"
        );
        let r = decide_retractable(&make_parachute(Surface::orientable(1, 2), &[3, -3]).unwrap());
        assert!(r.yes().unwrap().verify());
        let r = decide_retractable(&make_parachute(n(3, 2), &[1, 3]).unwrap());
        assert!(r.yes().unwrap().verify());
    }

    #[test]
    fn klein_bottle_with_unit_indices_is_a_surface_group() {
        let c = make_parachute(n(2, 2), &[1, 1]).unwrap();
        let r = decide_retractable(&c).yes().unwrap();
        assert!(r.verify());
    }

    #[test]
    fn four_punctured_sphere() {
        let yes = make_parachute(Surface::orientable(0, 4), &[1, -1, 1, -1]).unwrap();
        assert!(decide_retractable(&yes).yes().unwrap().verify());
        let open = make_parachute(Surface::orientable(0, 4), &[1, 1, 1, -3]).unwrap();
        assert!(decide_retractable(&open).is_unknown());
    }

    #[test]
    fn k_construction_with_square_facts() {
        let p1 = Atom::new("P1").with(Fact::Square("a1".into()));
        let p2 = Atom::new("P2").with(Fact::Square("a2".into()));
        let k = make_k(GroupExpr::atom(p1), GroupExpr::atom(p2), "a1", "a2").unwrap();
        let r = decide_retractable(&k).yes().unwrap();
        assert!(r.verify());
        assert!(matches!(r.nonabelian, NonAbelian::SeparateFactors(..)));
        let bare = make_k(
            GroupExpr::atom(Atom::new("P1").element("a1")),
            GroupExpr::atom(Atom::new("P2").element("a2")),
            "a1",
            "a2",
        )
        .unwrap();
        assert!(decide_retractable(&bare).is_unknown());
    }

    #[test]
    fn explicit_free_k_construction() {
        let k = make_k(GroupExpr::free(2), GroupExpr::named_free(["c", "d"]), "a^2", "c^2").unwrap();
        assert!(decide_retractable(&k).yes().unwrap().verify());
    }

    #[test]
    fn necessary_conditions() {
        let pants = make_parachute(Surface::orientable(0, 3), &[1, 1, -2]).unwrap();
        assert_eq!(no_name(decide_retractable(&pants)), "exceptional");
        let f = |w: &str| Alphabet::standard(2).parse(w).unwrap();
        let three = CenteredSplitting::new(
            Surface::orientable(1, 3),
            vec![GroupExpr::free(2), GroupExpr::free(2), GroupExpr::free(2)],
            (0..3)
                .map(|i| Edge {
                    boundary: i,
                    bottom: i,
                    word: f("[a,b]"),
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(no_name(decide_retractable(&three)), "genus-bound");
        let invalid = CenteredSplitting::from_parts(Surface::orientable(1, 2), vec![GroupExpr::free(2)], vec![]);
        assert_eq!(no_name(decide_retractable(&invalid)), "invalid");
    }

    #[test]
    fn closed_surface_bottom_is_opaque() {
        let c = CenteredSplitting::new(
            Surface::orientable(1, 1),
            vec![GroupExpr::ClosedSurface(Surface::orientable(2, 0))],
            vec![Edge {
                boundary: 0,
                bottom: 0,
                word: Word::from_signed(&[1, 2, -1, -2]),
            }],
        )
        .unwrap();
        let r = decide_retractable(&c).yes().unwrap();
        assert_eq!(r.nonabelian, NonAbelian::BoundaryCommutator);
        assert!(r.target.iter().all(|t| !t.faithful && t.class == 0));
    }

    fn expt_bpm(handles: [&str; 2], boundary: &str) -> Bpm {
        let a = Alphabet::new(["a", "b", "u1", "v1"]);
        Bpm {
            handles: handles.iter().map(|h| a.parse(h).unwrap()).collect(),
            boundary: vec![a.parse(boundary).unwrap()],
        }
    }

    #[test]
    fn boundary_preserving_maps() {
        let c = over_f2(Surface::orientable(1, 1), &["[a,b]"]);
        assert!(check_bpm(&expt_bpm(["a", "b"], "[a,b]"), &c).unwrap().is_yes());
        assert_eq!(
            check_bpm(&expt_bpm(["u1", "v1"], "[a,b]"), &c).unwrap(),
            Decision::No(BpmFailure::IsoOntoConjugate)
        );
        assert_eq!(
            check_bpm(&expt_bpm(["b u1 b^-1", "b v1 b^-1"], "b [a,b] b^-1"), &c).unwrap(),
            Decision::No(BpmFailure::IsoOntoConjugate)
        );
        assert_eq!(
            check_bpm(&expt_bpm(["a", "a"], "1"), &c).unwrap(),
            Decision::No(BpmFailure::BoundaryNotConjugate { boundary: 0 })
        );
        let g = over_f2(Surface::orientable(1, 1), &["a"]);
        assert_eq!(
            check_bpm(&expt_bpm(["a", "b"], "[a,b]"), &g).unwrap(),
            Decision::No(BpmFailure::BoundaryNotConjugate { boundary: 0 })
        );
        assert_eq!(
            check_bpm(&expt_bpm(["a", "b"], "a"), &g).unwrap(),
            Decision::No(BpmFailure::SurfaceRelation)
        );
        let pants = make_parachute(Surface::orientable(0, 3), &[1, 1, -2]).unwrap();
        let empty = Bpm { handles: vec![], boundary: vec![Word::identity(); 3] };
        assert!(matches!(check_bpm(&empty, &pants), Err(RetractError::Exceptional(_))));
    }

    #[test]
    fn retraction_from_boundary_preserving_map() {
        let c = over_f2(Surface::orientable(1, 1), &["[a,b]"]);
        let r = build_retraction(&c, &expt_bpm(["a", "b"], "[a,b]")).unwrap();
        assert!(r.verify());
        assert_eq!(r.image_of("u1"), Some(&Word::gen(0)));
        let c2 = over_f2(Surface::orientable(1, 1), &["[a^2,b]"]);
        let r2 = build_retraction(&c2, &expt_bpm(["a^2", "b"], "[a^2,b]")).unwrap();
        assert_eq!(r2.image_of("u1"), Some(&Word::from_signed(&[1, 1])));
        for i in 0..2 {
            assert_eq!(r2.images.image(i), &Word::gen(i));
        }
        let conj = build_retraction(&c, &expt_bpm(["b a b^-1", "b b b^-1"], "b [a,b] b^-1")).unwrap();
        assert!(conj.verify());
        assert_eq!(conj.image_of("u1"), Some(&Word::gen(0)));
    }

    #[test]
    fn retraction_with_stable_letters() {
        let f3 = Alphabet::standard(3);
        let words = ["a", "b", "c", "(a^2 b a^-1 c)^-1"];
        let c = CenteredSplitting::new(
            Surface::orientable(0, 4),
            vec![GroupExpr::free(3)],
            words
                .iter()
                .enumerate()
                .map(|(i, w)| Edge { boundary: i, bottom: 0, word: f3.parse(w).unwrap() })
                .collect(),
        )
        .unwrap();
        let amb = Alphabet::new(c.presentation().names);
        let bpm = Bpm {
            handles: vec![],
            boundary: ["a", "a b a^-1", "c", "(a^2 b a^-1 c)^-1"]
                .iter()
                .map(|w| amb.parse(w).unwrap())
                .collect(),
        };
        let r = build_retraction(&c, &bpm).unwrap();
        assert!(r.verify());
        assert_eq!(r.image_of("t2"), Some(&Word::gen(0)));
        assert_eq!(r.image_of("t3"), Some(&Word::identity()));
    }

    #[test]
    fn retraction_errors() {
        let para = make_parachute(n(2, 2), &[2, 4]).unwrap();
        let bpm = Bpm { handles: vec![Word::identity(); 2], boundary: vec![Word::identity(); 2] };
        assert_eq!(build_retraction(&para, &bpm), Err(RetractError::AbelianBottom));
        let g2 = over_f2(Surface::orientable(2, 1), &["[a,b]"]);
        let a = Alphabet::new(["a", "b", "u1", "v1", "u2", "v2"]);
        let pinch = Bpm {
            handles: ["a", "b", "1", "1"].iter().map(|x| a.parse(x).unwrap()).collect(),
            boundary: vec![a.parse("[a,b]").unwrap()],
        };
        assert_eq!(build_retraction(&g2, &pinch), Err(RetractError::Pinching));
    }

    fn piece(genus: u32, boundaries: &[usize]) -> PinchPiece {
        PinchPiece { genus, orientable: true, boundaries: boundaries.to_vec() }
    }

    #[test]
    fn pinching_bookkeeping() {
        let c = over_f2(Surface::orientable(1, 2), &["a", "a^-1"]);
        let pd = PinchData { pieces: vec![piece(1, &[]), piece(0, &[0, 1])], curves: vec![(0, 1)] };
        let q = pinched_quotient(&c, &pd).unwrap();
        assert_eq!(q.pieces, vec![Surface::orientable(1, 0), Surface::orientable(0, 2)]);
        assert_eq!(q.arcs.len(), 1);
        assert_eq!(q.free_rank, 0);
        let id = pinched_quotient(&c, &PinchData { pieces: vec![], curves: vec![] }).unwrap();
        assert_eq!(id.pieces, vec![c.surface()]);
        let bad = PinchData { pieces: vec![piece(1, &[0]), piece(0, &[0, 1])], curves: vec![(0, 1)] };
        assert!(pinched_quotient(&c, &bad).is_err());
        let wrong_chi = PinchData { pieces: vec![piece(0, &[]), piece(0, &[0, 1])], curves: vec![(0, 1)] };
        assert!(pinched_quotient(&c, &wrong_chi).is_err());
    }

    #[test]
    fn pinching_genus_two() {
        let c = over_f2(Surface::orientable(2, 2), &["a", "a^-1"]);
        let pd = PinchData { pieces: vec![piece(1, &[]), piece(1, &[0, 1])], curves: vec![(0, 1)] };
        let q = pinched_quotient(&c, &pd).unwrap();
        assert_eq!(q.boundaries.iter().map(|b| b.len()).sum::<usize>(), 2);
        let nonsep = PinchData { pieces: vec![piece(1, &[0, 1])], curves: vec![(0, 0)] };
        let q = pinched_quotient(&c, &nonsep).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.pieces, vec![Surface::orientable(1, 2)]);
    }

    #[test]
    fn planar_parachute_with_crossing_blocks() {
        let c = make_parachute(Surface::orientable(0, 4), &[3, 4, -3, -4]).unwrap();
        let r = decide_retractable(&c).yes().expect("retractable");
        assert!(r.verify());
        let c = make_parachute(Surface::orientable(0, 4), &[2, 1, 1, -4]).unwrap();
        assert!(!decide_retractable(&c).is_no());
    }
}
