use std::collections::BTreeSet;

use freegroup::Alphabet;
use serde::{Deserialize, Serialize};

use crate::retract::Retraction;
use crate::splitting::CenteredSplitting;
use crate::surface::Surface;

/// A declared property of an opaque atom, trusted as an axiom of the input.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fact {
    Square(String),
    Commutator(String),
    NoCyclicSplittingRel(String),
    Prototype,
}

impl Fact {
    pub fn element(&self) -> Option<&str> {
        match self {
            Fact::Square(e) | Fact::Commutator(e) | Fact::NoCyclicSplittingRel(e) => Some(e),
            Fact::Prototype => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomFacts {
    pub one_ended: bool,
    pub b1_mod2: Option<u32>,
    pub elements: BTreeSet<String>,
    pub facts: BTreeSet<Fact>,
}

impl AtomFacts {
    /// Record a fact, declaring the element it mentions.
    pub fn add(&mut self, fact: Fact) {
        if let Some(e) = fact.element() {
            self.elements.insert(e.to_string());
        }
        self.facts.insert(fact);
    }

    pub fn is_square(&self, e: &str) -> bool {
        self.facts.contains(&Fact::Square(e.to_string()))
    }

    pub fn is_commutator(&self, e: &str) -> bool {
        self.facts.contains(&Fact::Commutator(e.to_string()))
    }

    pub fn no_cyclic_splitting_rel(&self, e: &str) -> bool {
        self.facts.contains(&Fact::NoCyclicSplittingRel(e.to_string()))
    }
}

/// An opaque one-ended building block, identified by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub name: String,
    pub facts: AtomFacts,
}

impl Atom {
    pub fn new(name: impl Into<String>) -> Atom {
        Atom {
            name: name.into(),
            facts: AtomFacts {
                one_ended: true,
                ..AtomFacts::default()
            },
        }
    }

    pub fn with(mut self, fact: Fact) -> Atom {
        self.facts.add(fact);
        self
    }

    pub fn element(mut self, e: impl Into<String>) -> Atom {
        self.facts.elements.insert(e.into());
        self
    }

    pub fn qualified(&self, element: &str) -> String {
        format!("{}.{}", self.name, element)
    }
}

/// A surface étage: a centered splitting together with its retractability certificate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Etage {
    pub splitting: CenteredSplitting,
    pub certificate: Option<Retraction>,
    /// A bottom index whose group is protected (relative towers).
    pub marker: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupExpr {
    Atom(Atom),
    /// Free group on the named generators.
    Free(Vec<String>),
    ClosedSurface(Surface),
    FreeProduct(Vec<GroupExpr>),
    Etage(Box<Etage>),
    Trivial,
}

impl GroupExpr {
    pub fn free(rank: usize) -> GroupExpr {
        if rank == 0 {
            return GroupExpr::Trivial;
        }
        GroupExpr::Free(Alphabet::standard(rank).names().to_vec())
    }

    pub fn named_free<S: Into<String>>(names: impl IntoIterator<Item = S>) -> GroupExpr {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            GroupExpr::Trivial
        } else {
            GroupExpr::Free(names)
        }
    }

    pub fn z() -> GroupExpr {
        GroupExpr::Free(vec!["z".into()])
    }

    pub fn atom(a: Atom) -> GroupExpr {
        GroupExpr::Atom(a)
    }

    pub fn etage(splitting: CenteredSplitting, certificate: Option<Retraction>) -> GroupExpr {
        GroupExpr::Etage(Box::new(Etage {
            splitting,
            certificate,
            marker: None,
        }))
    }

    /// Flattened free product: nested products are spliced in, trivial factors
    /// dropped, and free factors merged into one free factor placed last.
    pub fn product(factors: impl IntoIterator<Item = GroupExpr>) -> GroupExpr {
        let mut flat = Vec::new();
        let mut free_names: Vec<String> = Vec::new();
        fn push(e: GroupExpr, flat: &mut Vec<GroupExpr>, free_names: &mut Vec<String>) {
            match e {
                GroupExpr::FreeProduct(fs) => {
                    for f in fs {
                        push(f, flat, free_names);
                    }
                }
                GroupExpr::Trivial => {}
                GroupExpr::Free(names) => free_names.extend(names),
                other => flat.push(other),
            }
        }
        for f in factors {
            push(f, &mut flat, &mut free_names);
        }
        if !free_names.is_empty() {
            let distinct: BTreeSet<&String> = free_names.iter().collect();
            if distinct.len() < free_names.len() {
                free_names = Alphabet::standard(free_names.len()).names().to_vec();
            }
            flat.push(GroupExpr::Free(free_names));
        }
        match flat.len() {
            0 => GroupExpr::Trivial,
            1 => flat.pop().unwrap(),
            _ => GroupExpr::FreeProduct(flat),
        }
    }

    /// Free factors of a flattened expression (a single non-product counts as one factor).
    pub fn factors(&self) -> Vec<&GroupExpr> {
        match self {
            GroupExpr::FreeProduct(fs) => fs.iter().collect(),
            GroupExpr::Trivial => Vec::new(),
            other => vec![other],
        }
    }

    /// Free factors with nested products expanded, in alphabet order.
    pub fn leaves(&self) -> Vec<&GroupExpr> {
        match self {
            GroupExpr::FreeProduct(fs) => fs.iter().flat_map(|f| f.leaves()).collect(),
            GroupExpr::Trivial => Vec::new(),
            other => vec![other],
        }
    }

    /// Symbols available to gluing words into this group.
    pub fn alphabet(&self) -> Vec<String> {
        match self {
            GroupExpr::Atom(a) => a.facts.elements.iter().map(|e| a.qualified(e)).collect(),
            GroupExpr::Free(names) => names.clone(),
            GroupExpr::ClosedSurface(s) => handle_names(s),
            GroupExpr::FreeProduct(fs) => fs.iter().flat_map(|f| f.alphabet()).collect(),
            GroupExpr::Etage(e) => e.splitting.presentation().names,
            GroupExpr::Trivial => Vec::new(),
        }
    }

    /// Range of alphabet positions belonging to each free factor.
    pub fn factor_spans(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        let mut at = 0;
        for f in self.factors() {
            let n = f.alphabet().len();
            spans.push((at, at + n));
            at += n;
        }
        spans
    }

    pub fn free_rank(&self) -> Option<usize> {
        match self {
            GroupExpr::Free(names) => Some(names.len()),
            GroupExpr::Trivial => Some(0),
            _ => None,
        }
    }

    pub fn is_z(&self) -> bool {
        self.free_rank() == Some(1)
    }

    /// Abelian groups here are the trivial group and Z.
    pub fn is_abelian(&self) -> bool {
        matches!(self.free_rank(), Some(0) | Some(1))
    }

    pub fn has_etage(&self) -> bool {
        match self {
            GroupExpr::Etage(_) => true,
            GroupExpr::FreeProduct(fs) => fs.iter().any(|f| f.has_etage()),
            _ => false,
        }
    }

    /// Visit every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a GroupExpr)) {
        f(self);
        match self {
            GroupExpr::FreeProduct(fs) => fs.iter().for_each(|x| x.walk(f)),
            GroupExpr::Etage(e) => e.splitting.bottoms().iter().for_each(|x| x.walk(f)),
            _ => {}
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let GroupExpr::Atom(a) = e {
                out.push(a);
            }
        });
        out
    }
}

/// `u1, v1, ..., ug, vg` for orientable surfaces, `u1, ..., ug` otherwise.
pub fn handle_names(s: &Surface) -> Vec<String> {
    let mut out = Vec::new();
    for j in 1..=s.genus {
        out.push(format!("u{}", j));
        if s.orientable {
            out.push(format!("v{}", j));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_flatten_and_merge() {
        let p = GroupExpr::atom(Atom::new("P"));
        let e = GroupExpr::product([
            GroupExpr::free(2),
            GroupExpr::product([p.clone(), GroupExpr::Trivial]),
            GroupExpr::named_free(["x"]),
        ]);
        assert_eq!(
            e,
            GroupExpr::FreeProduct(vec![p.clone(), GroupExpr::named_free(["a", "b", "x"])])
        );
        assert_eq!(GroupExpr::product([GroupExpr::free(2), GroupExpr::free(1)]), GroupExpr::free(3));
        assert_eq!(GroupExpr::product([GroupExpr::Trivial]), GroupExpr::Trivial);
        assert_eq!(GroupExpr::product([p.clone()]), p);
    }

    #[test]
    fn alphabets_are_qualified() {
        let p = Atom::new("P1").with(Fact::Square("a1".into()));
        let e = GroupExpr::product([GroupExpr::atom(p), GroupExpr::z()]);
        assert_eq!(e.alphabet(), vec!["P1.a1".to_string(), "z".to_string()]);
        assert_eq!(e.factor_spans(), vec![(0, 1), (1, 2)]);
    }
}
