//! Cores and the classification predicates built on them.
//!
//! The core is computed by a small rewrite system on expression trees:
//! an étage is replaced by the free product of its bottoms, free groups and
//! non-exceptional closed surface groups vanish, and products are flattened.
//! Atoms are irreducible. The normal form does not depend on the order in
//! which redexes are contracted; [`core_in_order`] exposes the order for
//! testing that claim.

use std::collections::BTreeSet;
use std::fmt;

use freegroup::{Bound, Decision};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Atom, Fact, GroupExpr};
use crate::retract::decide_retractable;
use crate::splitting::{make_multi_parachute, CenteredSplitting};
use crate::surface::Surface;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("étage without a verified retraction")]
    Uncertified,
    #[error("the group is abelian")]
    Abelian,
    #[error("{0} is not hyperbolic")]
    NonHyperbolic(Surface),
}

/// One factor of a core, up to isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signature {
    Atom { name: String },
    Surface { surface: Surface },
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signature::Atom { name } => f.write_str(name),
            Signature::Surface { surface } => write!(f, "{}", surface),
        }
    }
}

/// Sorted multiset of factor signatures; empty means the trivial group.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CoreNormalForm {
    pub factors: Vec<Signature>,
    #[serde(skip)]
    atoms: Vec<Atom>,
}

impl CoreNormalForm {
    fn from_leaves(leaves: Vec<GroupExpr>) -> CoreNormalForm {
        let mut pairs: Vec<(Signature, Option<Atom>)> = leaves
            .into_iter()
            .map(|e| match e {
                GroupExpr::Atom(a) => (Signature::Atom { name: a.name.clone() }, Some(a)),
                GroupExpr::ClosedSurface(s) => (Signature::Surface { surface: s }, None),
                other => unreachable!("not a normal form leaf: {:?}", other),
            })
            .collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        CoreNormalForm {
            factors: pairs.iter().map(|p| p.0.clone()).collect(),
            atoms: pairs.into_iter().filter_map(|p| p.1).collect(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.factors.is_empty()
    }

    /// Rebuild a group expression (free product of the factors).
    pub fn to_expr(&self) -> GroupExpr {
        let mut atoms = self.atoms.iter();
        GroupExpr::product(self.factors.iter().map(|s| match s {
            Signature::Atom { .. } => GroupExpr::Atom(atoms.next().expect("atom list in step").clone()),
            Signature::Surface { surface } => GroupExpr::ClosedSurface(*surface),
        }))
    }

    /// Multiset union.
    pub fn union(&self, other: &CoreNormalForm) -> CoreNormalForm {
        let mut leaves = self.to_expr().factors().into_iter().cloned().collect::<Vec<_>>();
        leaves.extend(other.to_expr().factors().into_iter().cloned());
        CoreNormalForm::from_leaves(leaves)
    }
}

impl fmt::Display for CoreNormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.factors.iter().map(|s| s.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// The elementary core: the core, or the free group of rank two when the core is trivial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ecore", rename_all = "snake_case")]
pub enum ElementaryCore {
    Core(CoreNormalForm),
    F2,
}

impl fmt::Display for ElementaryCore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementaryCore::Core(c) => write!(f, "{}", c),
            ElementaryCore::F2 => f.write_str("F(2)"),
        }
    }
}

fn check_input(e: &GroupExpr) -> Result<(), ClassifyError> {
    let mut err = None;
    e.walk(&mut |x| match x {
        GroupExpr::Etage(et) if !et.certificate.as_ref().is_some_and(|c| c.verify()) => {
            err.get_or_insert(ClassifyError::Uncertified);
        }
        GroupExpr::ClosedSurface(s) if !s.is_hyperbolic() => {
            err.get_or_insert(ClassifyError::NonHyperbolic(*s));
        }
        _ => {}
    });
    err.map_or(Ok(()), Err)
}

fn is_redex(e: &GroupExpr) -> bool {
    match e {
        GroupExpr::Etage(_) | GroupExpr::Free(_) => true,
        GroupExpr::ClosedSurface(s) => s.is_exceptional() != Ok(true),
        GroupExpr::FreeProduct(fs) => {
            fs.len() <= 1
                || fs
                    .iter()
                    .any(|f| matches!(f, GroupExpr::Trivial | GroupExpr::FreeProduct(_)))
        }
        _ => false,
    }
}

fn redexes(e: &GroupExpr, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if is_redex(e) {
        out.push(path.clone());
    }
    if let GroupExpr::FreeProduct(fs) = e {
        for (i, f) in fs.iter().enumerate() {
            path.push(i);
            redexes(f, path, out);
            path.pop();
        }
    }
}

fn contract(e: &mut GroupExpr, path: &[usize]) {
    if let Some((&i, rest)) = path.split_first() {
        let GroupExpr::FreeProduct(fs) = e else { unreachable!() };
        return contract(&mut fs[i], rest);
    }
    *e = match std::mem::replace(e, GroupExpr::Trivial) {
        GroupExpr::Etage(et) => GroupExpr::FreeProduct(et.splitting.bottoms().to_vec()),
        GroupExpr::Free(_) | GroupExpr::ClosedSurface(_) => GroupExpr::Trivial,
        GroupExpr::FreeProduct(fs) => {
            let mut flat = Vec::new();
            for f in fs {
                match f {
                    GroupExpr::Trivial => {}
                    GroupExpr::FreeProduct(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            match flat.len() {
                0 => GroupExpr::Trivial,
                1 => flat.pop().unwrap(),
                _ => GroupExpr::FreeProduct(flat),
            }
        }
        other => other,
    };
}

/// Core computed by contracting, at each step, the redex chosen by `choose`
/// among the currently available ones (listed in preorder).
pub fn core_in_order(
    e: &GroupExpr,
    mut choose: impl FnMut(usize) -> usize,
) -> Result<CoreNormalForm, ClassifyError> {
    check_input(e)?;
    let mut cur = e.clone();
    loop {
        let mut found = Vec::new();
        redexes(&cur, &mut Vec::new(), &mut found);
        if found.is_empty() {
            break;
        }
        let k = choose(found.len()) % found.len();
        contract(&mut cur, &found[k]);
    }
    Ok(CoreNormalForm::from_leaves(match cur {
        GroupExpr::Trivial => Vec::new(),
        GroupExpr::FreeProduct(fs) => fs,
        leaf => vec![leaf],
    }))
}

pub fn core(e: &GroupExpr) -> Result<CoreNormalForm, ClassifyError> {
    core_in_order(e, |_| 0)
}

fn flat(e: &GroupExpr) -> GroupExpr {
    GroupExpr::product([e.clone()])
}

fn require_nonabelian(e: &GroupExpr) -> Result<GroupExpr, ClassifyError> {
    let f = flat(e);
    if f.is_abelian() {
        return Err(ClassifyError::Abelian);
    }
    Ok(f)
}

pub fn ecore(e: &GroupExpr) -> Result<ElementaryCore, ClassifyError> {
    require_nonabelian(e)?;
    let c = core(e)?;
    Ok(if c.is_trivial() {
        ElementaryCore::F2
    } else {
        ElementaryCore::Core(c)
    })
}

pub fn equiv(a: &GroupExpr, b: &GroupExpr) -> Result<bool, ClassifyError> {
    require_nonabelian(a)?;
    require_nonabelian(b)?;
    Ok(core(a)? == core(b)?)
}

/// Elementarily equivalent to a free group of rank two.
pub fn is_efree(e: &GroupExpr) -> Result<bool, ClassifyError> {
    require_nonabelian(e)?;
    Ok(core(e)?.is_trivial())
}

/// Why a predicate answered the way it did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Reason {
    /// A free product of one-ended factors none of which is an étage.
    Prototype,
    OneEndedPrototype,
    FreeFactor,
    SurfaceEtage,
    ClosedSurfaceEtage { surface: Surface },
    SeveralFactors { count: usize },
    ManyEndedFactor { name: String },
    /// The group is a prototype, and prototypes have no proper elementarily embedded subgroup.
    PrototypeIsMinimal,
    FreeOfRankTwo,
    ClosedN4,
    MinimalMultiParachute { surface: Surface, indices: Vec<Vec<i64>> },
    /// Twice-punctured Klein bottle over two atoms glued to squares with no cyclic splitting relative to them.
    RigidKConstruction,
    NotPrototype,
    NotInEfreeList,
    MultiParachuteRejected { why: String },
}

pub type Verdict = Decision<Reason, Reason>;

fn unknown_atom(name: &str, what: &str) -> Bound {
    Bound::new(format!("{} for atom {}", what, name), 0)
}

pub fn is_prototype(e: &GroupExpr) -> Result<Verdict, ClassifyError> {
    check_input(e)?;
    let f = flat(e);
    let mut undecided = None;
    for x in f.factors() {
        match x {
            GroupExpr::Free(_) => return Ok(Decision::No(Reason::FreeFactor)),
            GroupExpr::Etage(_) => return Ok(Decision::No(Reason::SurfaceEtage)),
            GroupExpr::ClosedSurface(s) if s.is_exceptional() != Ok(true) => {
                return Ok(Decision::No(Reason::ClosedSurfaceEtage { surface: *s }))
            }
            GroupExpr::Atom(a) if !a.facts.facts.contains(&Fact::Prototype) => {
                undecided.get_or_insert_with(|| unknown_atom(&a.name, "no prototype fact"));
            }
            _ => {}
        }
    }
    Ok(match undecided {
        Some(b) => Decision::Unknown(b),
        None => Decision::Yes(Reason::Prototype),
    })
}

fn one_ended(e: &GroupExpr) -> bool {
    match e {
        GroupExpr::Atom(a) => a.facts.one_ended,
        GroupExpr::ClosedSurface(_) => true,
        _ => false,
    }
}

pub fn is_prime(e: &GroupExpr) -> Result<Verdict, ClassifyError> {
    let f = require_nonabelian(e)?;
    Ok(match is_prototype(&f)? {
        Decision::Yes(_) => {
            let fs = f.factors();
            if fs.len() != 1 {
                Decision::No(Reason::SeveralFactors { count: fs.len() })
            } else if !one_ended(fs[0]) {
                let GroupExpr::Atom(a) = fs[0] else { unreachable!() };
                Decision::No(Reason::ManyEndedFactor { name: a.name.clone() })
            } else {
                Decision::Yes(Reason::OneEndedPrototype)
            }
        }
        Decision::No(_) => Decision::No(Reason::NotPrototype),
        Decision::Unknown(b) => Decision::Unknown(b),
    })
}

/// The hypotheses under which the twice-punctured Klein bottle construction
/// has no proper elementarily embedded subgroup.
fn is_rigid_k(e: &GroupExpr) -> bool {
    let GroupExpr::Etage(et) = e else { return false };
    let c = &et.splitting;
    if Surface::non_orientable(2, 2) != Ok(c.surface()) || c.bottoms().len() != 2 || c.edges().len() != 2 {
        return false;
    }
    c.edges().iter().all(|edge| {
        let GroupExpr::Atom(a) = &c.bottoms()[edge.bottom] else { return false };
        let names = c.bottoms()[edge.bottom].alphabet();
        let [l] = edge.word.letters() else { return false };
        let element = &names[l.index()][a.name.len() + 1..];
        a.facts.one_ended && a.facts.is_square(element) && a.facts.no_cyclic_splitting_rel(element)
    })
}

/// Cap off bottoms of total index two: a single edge of index 2 is a Möbius
/// band, two edges of index 1 an annulus.
fn absorb_small_bottoms(surface: Surface, bottoms: &[Vec<i64>]) -> (Surface, Vec<Vec<i64>>) {
    let mut s = surface;
    let mut rest = Vec::new();
    for ds in bottoms {
        match ds.as_slice() {
            [d] if d.abs() == 2 => {
                s = Surface {
                    genus: if s.orientable { 2 * s.genus + 1 } else { s.genus + 1 },
                    boundary: s.boundary - 1,
                    orientable: false,
                };
            }
            [d1, d2] if d1.abs() == 1 && d2.abs() == 1 => {
                s = if !s.orientable {
                    Surface { genus: s.genus + 2, boundary: s.boundary - 2, orientable: false }
                } else if d1 == &-d2 {
                    Surface::orientable(s.genus + 1, s.boundary - 2)
                } else {
                    Surface { genus: 2 * s.genus + 2, boundary: s.boundary - 2, orientable: false }
                };
            }
            _ => rest.push(ds.clone()),
        }
    }
    (s, rest)
}

fn bottom_indices(c: &CenteredSplitting) -> Option<Vec<Vec<i64>>> {
    (0..c.bottoms().len())
        .map(|j| c.edges_at(j).into_iter().map(|i| c.edge_index(i)).collect())
        .collect()
}

/// Conditions for a multi-parachute to be on the list of minimal elementarily
/// free groups, retractability aside.
fn catalog_shape(surface: Surface, indices: &[Vec<i64>]) -> Result<(), String> {
    if !surface.is_hyperbolic() || surface.is_exceptional() != Ok(false) {
        return Err(format!("{} is exceptional or not hyperbolic", surface));
    }
    if surface.euler_char() < -2 {
        return Err(format!("{} has euler characteristic below -2", surface));
    }
    if surface == Surface::orientable(1, 2) {
        return Err("twice-punctured torus".into());
    }
    for ds in indices {
        if ds.iter().map(|d| d.abs()).sum::<i64>() < 3 {
            return Err(format!("bottom with indices {:?} has index sum below 3", ds));
        }
    }
    Ok(())
}

fn multi_parachute_minimal(c: &CenteredSplitting) -> Verdict {
    let Some(indices) = bottom_indices(c) else {
        return Decision::No(Reason::NotInEfreeList);
    };
    let (s, rest) = absorb_small_bottoms(c.surface(), &indices);
    if rest.is_empty() {
        return if s == Surface::non_orientable(4, 0).unwrap() {
            Decision::Yes(Reason::ClosedN4)
        } else {
            Decision::No(Reason::NotInEfreeList)
        };
    }
    if let Err(why) = catalog_shape(s, &rest) {
        return Decision::No(Reason::MultiParachuteRejected { why });
    }
    let reduced = make_multi_parachute(s, &numbered(&rest));
    match reduced.as_ref().map(decide_retractable) {
        Ok(Decision::Yes(_)) => Decision::Yes(Reason::MinimalMultiParachute { surface: s, indices: rest }),
        Ok(Decision::No(o)) => Decision::No(Reason::MultiParachuteRejected { why: o.to_string() }),
        Ok(Decision::Unknown(b)) => Decision::Unknown(b),
        Err(e) => Decision::No(Reason::MultiParachuteRejected { why: e.to_string() }),
    }
}

/// Assign boundary numbers bottom by bottom.
fn numbered(indices: &[Vec<i64>]) -> Vec<Vec<(usize, i64)>> {
    let mut k = 0;
    indices
        .iter()
        .map(|ds| {
            ds.iter()
                .map(|&d| {
                    k += 1;
                    (k - 1, d)
                })
                .collect()
        })
        .collect()
}

/// Whether the group has no proper elementarily embedded subgroup.
pub fn is_minimal(e: &GroupExpr) -> Result<Verdict, ClassifyError> {
    let f = require_nonabelian(e)?;
    let proto = is_prototype(&f)?;
    if proto.is_yes() {
        return Ok(Decision::Yes(Reason::PrototypeIsMinimal));
    }
    let c = core(&f)?;
    match c.factors.len() {
        0 => Ok(match &f {
            GroupExpr::Free(names) if names.len() == 2 => Decision::Yes(Reason::FreeOfRankTwo),
            GroupExpr::ClosedSurface(s) if *s == Surface::non_orientable(4, 0).unwrap() => {
                Decision::Yes(Reason::ClosedN4)
            }
            GroupExpr::Etage(et) if et.splitting.is_multi_parachute() => multi_parachute_minimal(&et.splitting),
            _ => Decision::No(Reason::NotInEfreeList),
        }),
        1 if one_ended(&c.to_expr()) => Ok(match proto {
            Decision::Unknown(b) => Decision::Unknown(b),
            _ => Decision::No(Reason::NotPrototype),
        }),
        _ => Ok(if is_rigid_k(&f) {
            Decision::Yes(Reason::RigidKConstruction)
        } else {
            Decision::Unknown(Bound::new("minimality with an infinitely-ended core", 0))
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub surface: Surface,
    /// Indices at each cyclic bottom.
    pub indices: Vec<Vec<i64>>,
    /// `Yes` or `Unknown`; refuted configurations are not listed.
    pub retractable: &'static str,
    #[serde(skip)]
    pub splitting: CenteredSplitting,
}

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    // restricted growth strings
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur[i] = b;
            rec(i + 1, max.max(b), cur, out);
        }
    }
    if n == 0 {
        return out;
    }
    rec(1, 0, &mut cur, &mut out);
    out
}

/// Representative of a multi-parachute configuration up to boundary
/// permutations and automorphisms of the cyclic bottoms (and, on
/// non-orientable surfaces, reversal of individual boundary curves).
fn canonical(orientable: bool, bottoms: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = bottoms
        .iter()
        .map(|ds| {
            if !orientable {
                let mut v: Vec<i64> = ds.iter().map(|d| d.abs()).collect();
                v.sort_unstable_by(|a, b| b.cmp(a));
                return v;
            }
            let mut p = ds.clone();
            p.sort_unstable_by(|a, b| b.cmp(a));
            let mut m: Vec<i64> = ds.iter().map(|d| -d).collect();
            m.sort_unstable_by(|a, b| b.cmp(a));
            p.max(m)
        })
        .collect();
    out.sort();
    out
}

fn catalog_surfaces(max_genus: u32, max_boundary: u32) -> Vec<Surface> {
    let mut out = Vec::new();
    for b in 1..=max_boundary {
        for g in 0..=max_genus {
            out.push(Surface::orientable(g, b));
            if g > 0 {
                out.push(Surface::non_orientable(g, b).unwrap());
            }
        }
    }
    out.retain(|s| s.is_hyperbolic() && catalog_shape(*s, &[]).is_ok());
    out
}

/// Multi-parachutes within the bounds that are minimal and elementarily free.
pub fn minimal_efree_catalog(max_genus: u32, max_boundary: u32, max_index: i64) -> Vec<CatalogEntry> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let values: Vec<i64> = (-max_index..=max_index).filter(|&d| d != 0).collect();
    for s in catalog_surfaces(max_genus, max_boundary) {
        let b = s.boundary as usize;
        for part in set_partitions(b) {
            let nb = part.iter().max().unwrap() + 1;
            let mut choice = vec![0usize; b];
            loop {
                let mut bottoms = vec![Vec::new(); nb];
                for (k, &j) in part.iter().enumerate() {
                    bottoms[j].push(values[choice[k]]);
                }
                let key = canonical(s.orientable, &bottoms);
                if catalog_shape(s, &key).is_ok() && seen.insert((s, key.clone())) {
                    if let Ok(c) = make_multi_parachute(s, &numbered(&key)) {
                        let verdict = decide_retractable(&c);
                        if !verdict.is_no() {
                            out.push(CatalogEntry {
                                surface: s,
                                indices: key,
                                retractable: verdict.verdict(),
                                splitting: c,
                            });
                        }
                    }
                }
                let mut k = 0;
                while k < b {
                    choice[k] += 1;
                    if choice[k] < values.len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == b {
                    break;
                }
            }
        }
    }
    out
}
