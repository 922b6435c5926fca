use freegroup::{Bound, Decision, Word};
use thiserror::Error;

use crate::expr::{Etage, GroupExpr};
use crate::retract::{decide_retractable, Obstruction};
use crate::splitting::{CenteredSplitting, Edge, SplittingError};
use crate::surface::Surface;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TowerError {
    #[error("splitting is not retractable ({0})")]
    Rejected(Obstruction),
    #[error("retractability undecided: {0}")]
    Undecided(Bound),
    #[error("étage certificate missing or invalid")]
    BadCertificate,
    #[error("{surface} has euler characteristic {chi}; simplification needs at most -3")]
    SmallSurface { surface: Surface, chi: i64 },
    #[error("not an étage")]
    NotEtage,
    #[error(transparent)]
    Splitting(#[from] SplittingError),
}

/// A group expression whose étages all carry a verified retraction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tower(GroupExpr);

impl Tower {
    pub fn new(e: GroupExpr) -> Result<Tower, TowerError> {
        let mut ok = true;
        e.walk(&mut |x| {
            if let GroupExpr::Etage(et) = x {
                ok &= et.certificate.as_ref().is_some_and(|c| c.verify());
            }
        });
        if ok {
            Ok(Tower(e))
        } else {
            Err(TowerError::BadCertificate)
        }
    }

    /// Decide every uncertified étage, innermost first.
    pub fn certify(e: GroupExpr) -> Result<Tower, TowerError> {
        Ok(Tower(certify_expr(e)?))
    }

    pub fn expr(&self) -> &GroupExpr {
        &self.0
    }

    pub fn into_expr(self) -> GroupExpr {
        self.0
    }
}

fn certify_expr(e: GroupExpr) -> Result<GroupExpr, TowerError> {
    match e {
        GroupExpr::FreeProduct(fs) => Ok(GroupExpr::product(
            fs.into_iter().map(certify_expr).collect::<Result<Vec<_>, _>>()?,
        )),
        GroupExpr::Etage(et) => {
            let Etage {
                splitting,
                certificate,
                marker,
            } = *et;
            let bottoms = splitting
                .bottoms()
                .iter()
                .cloned()
                .map(certify_expr)
                .collect::<Result<Vec<_>, _>>()?;
            let splitting =
                CenteredSplitting::from_parts(splitting.surface(), bottoms, splitting.edges().to_vec());
            let certificate = match certificate {
                Some(c) if c.verify() => c,
                _ => match decide_retractable(&splitting) {
                    Decision::Yes(c) => c,
                    Decision::No(o) => return Err(TowerError::Rejected(o)),
                    Decision::Unknown(b) => return Err(TowerError::Undecided(b)),
                },
            };
            Ok(GroupExpr::Etage(Box::new(Etage {
                splitting,
                certificate: Some(certificate),
                marker,
            })))
        }
        other => Ok(other),
    }
}

/// `H * Z`.
pub fn etage_free_product(h: &Tower) -> Tower {
    Tower(GroupExpr::product([h.0.clone(), GroupExpr::free(1)]))
}

/// Wrap a retractable splitting as an étage.
pub fn etage_surface(c: &CenteredSplitting) -> Result<Tower, TowerError> {
    match decide_retractable(c) {
        Decision::Yes(cert) => Ok(Tower(GroupExpr::etage(c.clone(), Some(cert)))),
        Decision::No(o) => Err(TowerError::Rejected(o)),
        Decision::Unknown(b) => Err(TowerError::Undecided(b)),
    }
}

/// Move free factors sitting next to a surface étage into the base of that
/// étage, so that surface étages end up outermost. A move is kept only when
/// the enlarged étage is again certified retractable.
pub fn normalize_etages(t: &Tower) -> Tower {
    Tower(normalize(t.0.clone()))
}

fn normalize(e: GroupExpr) -> GroupExpr {
    match e {
        GroupExpr::FreeProduct(fs) => {
            let fs: Vec<GroupExpr> = fs.into_iter().map(normalize).collect();
            let free = fs.iter().position(|f| matches!(f, GroupExpr::Free(_)));
            let etage = fs.iter().position(|f| matches!(f, GroupExpr::Etage(_)));
            let (Some(fi), Some(ei)) = (free, etage) else {
                return GroupExpr::product(fs);
            };
            let GroupExpr::Etage(et) = &fs[ei] else { unreachable!() };
            match absorb(et, &fs[fi]) {
                Some(merged) => {
                    let rest = fs
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != fi && i != ei)
                        .map(|(_, f)| f.clone());
                    GroupExpr::product(std::iter::once(merged).chain(rest))
                }
                None => GroupExpr::product(fs),
            }
        }
        GroupExpr::Etage(et) => {
            let c = &et.splitting;
            let mut changed = false;
            let mut bottoms = Vec::new();
            let mut perms = Vec::new();
            for b in c.bottoms() {
                let n = normalize(b.clone());
                match symbol_permutation(&b.alphabet(), &n.alphabet()) {
                    Some(p) if n != *b => {
                        changed = true;
                        bottoms.push(n);
                        perms.push(Some(p));
                    }
                    _ => {
                        bottoms.push(b.clone());
                        perms.push(None);
                    }
                }
            }
            if !changed {
                return GroupExpr::Etage(et);
            }
            let edges = c
                .edges()
                .iter()
                .map(|e| match &perms[e.bottom] {
                    Some(p) => Edge {
                        word: Word::from_letters(
                            e.word.letters().iter().map(|l| freegroup::Letter::new(p[l.index()], l.is_inverse())),
                        ),
                        ..e.clone()
                    },
                    None => e.clone(),
                })
                .collect();
            let Ok(splitting) = CenteredSplitting::new(c.surface(), bottoms, edges) else {
                return GroupExpr::Etage(et);
            };
            match decide_retractable(&splitting) {
                Decision::Yes(cert) if !cert.extended || et.certificate.as_ref().is_some_and(|o| o.extended) => {
                    GroupExpr::Etage(Box::new(Etage {
                        splitting,
                        certificate: Some(cert),
                        marker: et.marker,
                    }))
                }
                _ => GroupExpr::Etage(et),
            }
        }
        other => other,
    }
}

/// Position in `new` of each symbol of `old`, when both list the same distinct names.
fn symbol_permutation(old: &[String], new: &[String]) -> Option<Vec<usize>> {
    if old.len() != new.len() {
        return None;
    }
    let at: std::collections::HashMap<&String, usize> = new.iter().enumerate().map(|(i, n)| (n, i)).collect();
    if at.len() != new.len() {
        return None;
    }
    old.iter().map(|n| at.get(n).copied()).collect()
}

fn absorb(et: &Etage, free: &GroupExpr) -> Option<GroupExpr> {
    let c = &et.splitting;
    let mut bottoms = c.bottoms().to_vec();
    let flat = GroupExpr::product([bottoms[0].clone(), free.clone()]);
    let before = bottoms[0].alphabet();
    bottoms[0] = if flat.alphabet().starts_with(&before) {
        flat
    } else {
        GroupExpr::FreeProduct(vec![bottoms[0].clone(), free.clone()])
    };
    let merged = CenteredSplitting::new(c.surface(), bottoms, c.edges().to_vec()).ok()?;
    let old = et.certificate.as_ref()?;
    match decide_retractable(&merged) {
        Decision::Yes(cert) if cert.extended == old.extended || !cert.extended => {
            Some(GroupExpr::Etage(Box::new(Etage {
                splitting: merged,
                certificate: Some(cert),
                marker: et.marker,
            })))
        }
        _ => None,
    }
}

/// Mod-2 first homology of an expression: generator count, relation rows, and
/// the class of each alphabet symbol when known.
struct F2Model {
    dim: usize,
    relations: Vec<Vec<u8>>,
    symbols: Vec<Option<Vec<u8>>>,
}

impl F2Model {
    fn unit(dim: usize, i: usize) -> Vec<u8> {
        let mut v = vec![0; dim];
        v[i] = 1;
        v
    }

    fn of(e: &GroupExpr) -> Option<F2Model> {
        match e {
            GroupExpr::Trivial => Some(F2Model {
                dim: 0,
                relations: Vec::new(),
                symbols: Vec::new(),
            }),
            GroupExpr::Free(names) => Some(F2Model {
                dim: names.len(),
                relations: Vec::new(),
                symbols: (0..names.len()).map(|i| Some(F2Model::unit(names.len(), i))).collect(),
            }),
            GroupExpr::ClosedSurface(s) => {
                let n = s.handle_generators() as usize;
                Some(F2Model {
                    dim: n,
                    relations: Vec::new(),
                    symbols: (0..n).map(|i| Some(F2Model::unit(n, i))).collect(),
                })
            }
            GroupExpr::Atom(a) => {
                let dim = a.facts.b1_mod2? as usize;
                let symbols = a
                    .facts
                    .elements
                    .iter()
                    .map(|x| (a.facts.is_square(x) || a.facts.is_commutator(x)).then(|| vec![0; dim]))
                    .collect();
                Some(F2Model {
                    dim,
                    relations: Vec::new(),
                    symbols,
                })
            }
            GroupExpr::FreeProduct(fs) => {
                let parts = fs.iter().map(F2Model::of).collect::<Option<Vec<_>>>()?;
                Some(F2Model::sum(parts))
            }
            GroupExpr::Etage(et) => {
                let c = &et.splitting;
                let parts = c.bottoms().iter().map(F2Model::of).collect::<Option<Vec<_>>>()?;
                let spans: Vec<usize> = parts.iter().map(|p| p.symbols.len()).collect();
                let base = F2Model::sum(parts);
                let pres = c.presentation();
                let extra = pres.rank() - base.symbols.len();
                let dim = base.dim + extra;
                let widen = |v: &Vec<u8>| {
                    let mut w = v.clone();
                    w.resize(dim, 0);
                    w
                };
                let mut relations: Vec<Vec<u8>> = base.relations.iter().map(widen).collect();
                // boundary words sum to the handle product, which vanishes mod 2
                let mut row = vec![0u8; dim];
                let offsets: Vec<usize> = spans
                    .iter()
                    .scan(0, |at, n| {
                        let o = *at;
                        *at += n;
                        Some(o)
                    })
                    .collect();
                for Edge { bottom, word, .. } in c.edges() {
                    for l in word.letters() {
                        let v = base.symbols[offsets[*bottom] + l.index()].as_ref()?;
                        for (x, y) in row.iter_mut().zip(v) {
                            *x ^= y;
                        }
                    }
                }
                relations.push(row);
                let mut symbols: Vec<Option<Vec<u8>>> =
                    base.symbols.iter().map(|s| s.as_ref().map(widen)).collect();
                for i in 0..extra {
                    symbols.push(Some(F2Model::unit(dim, base.dim + i)));
                }
                Some(F2Model {
                    dim,
                    relations,
                    symbols,
                })
            }
        }
    }

    fn sum(parts: Vec<F2Model>) -> F2Model {
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let mut out = F2Model {
            dim,
            relations: Vec::new(),
            symbols: Vec::new(),
        };
        let mut at = 0;
        for p in parts {
            let place = |v: &Vec<u8>| {
                let mut w = vec![0u8; dim];
                w[at..at + p.dim].copy_from_slice(v);
                w
            };
            out.relations.extend(p.relations.iter().map(place));
            out.symbols.extend(p.symbols.iter().map(|s| s.as_ref().map(place)));
            at += p.dim;
        }
        out
    }

    fn betti(&self) -> u32 {
        (self.dim - rank_f2(self.relations.clone())) as u32
    }
}

fn rank_f2(mut rows: Vec<Vec<u8>>) -> usize {
    let mut rank = 0;
    let cols = rows.first().map_or(0, |r| r.len());
    for col in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][col] == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][col] == 1 {
                let pivot = rows[rank].clone();
                for (x, y) in rows[r].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Dimension of `H^1(G; Z/2)`, when every atom declares it and every gluing
/// element has a known class.
pub fn b1_mod2(e: &GroupExpr) -> Option<u32> {
    F2Model::of(e).map(|m| m.betti())
}

/// Number of étage nodes.
pub fn etage_count(e: &GroupExpr) -> usize {
    let mut n = 0;
    e.walk(&mut |x| {
        if matches!(x, GroupExpr::Etage(_)) {
            n += 1;
        }
    });
    n
}

/// Mod-2 Betti number when computable, otherwise the étage count.
pub fn termination_measure(e: &GroupExpr) -> u32 {
    b1_mod2(e).unwrap_or_else(|| etage_count(e) as u32)
}

/// Replace the first étage found (outermost, leftmost) by its base.
pub fn strip_outer_etage(e: &GroupExpr) -> Option<GroupExpr> {
    match e {
        GroupExpr::Etage(et) => Some(GroupExpr::product(et.splitting.bottoms().iter().cloned())),
        GroupExpr::FreeProduct(fs) => {
            let i = fs.iter().position(|f| f.has_etage())?;
            let mut fs = fs.clone();
            fs[i] = strip_outer_etage(&fs[i])?;
            Some(GroupExpr::product(fs))
        }
        _ => None,
    }
}

/// Merge bottom `j` and `k` through a pair of pants around their first boundaries.
fn merge_bottoms(c: &CenteredSplitting, j: usize, k: usize) -> Result<CenteredSplitting, TowerError> {
    let s = c.surface();
    let ej = c.edges_at(j)[0];
    let ek = c.edges_at(k)[0];
    let spans = [c.bottoms()[j].alphabet().len(), c.bottoms()[k].alphabet().len()];
    let merged = GroupExpr::product([c.bottoms()[j].clone(), c.bottoms()[k].clone()]);
    debug_assert_eq!(merged.alphabet().len(), spans[0] + spans[1]);
    let shift = |w: &Word| {
        Word::from_letters(
            w.letters()
                .iter()
                .map(|l| freegroup::Letter::new(l.index() + spans[0], l.is_inverse())),
        )
    };
    let remap = |b: usize| {
        let b = if b == k { j } else { b };
        if b > k { b - 1 } else { b }
    };
    let mut bottoms = c.bottoms().to_vec();
    bottoms[j] = merged;
    bottoms.remove(k);
    let mut edges = vec![Edge {
        boundary: 0,
        bottom: remap(j),
        word: c.edges()[ej].word.mul(&shift(&c.edges()[ek].word)),
    }];
    for (i, e) in c.edges().iter().enumerate() {
        if i == ej || i == ek {
            continue;
        }
        let word = if e.bottom == k { shift(&e.word) } else { e.word.clone() };
        edges.push(Edge {
            boundary: edges.len(),
            bottom: remap(e.bottom),
            word,
        });
    }
    let surface = s.remove_pants().map_err(SplittingError::from)?;
    Ok(CenteredSplitting::new(surface, bottoms, edges)?)
}

/// Turn a non-simple étage with a surface of euler characteristic at most -3
/// into a simple étage over the free product of its bottoms.
pub fn upgrade_to_simple(t: &Tower) -> Result<Tower, TowerError> {
    let GroupExpr::Etage(et) = t.expr() else {
        return Err(TowerError::NotEtage);
    };
    let mut c = et.splitting.clone();
    if c.is_simple() {
        return Ok(t.clone());
    }
    let chi = c.surface().euler_char();
    if chi > -3 {
        return Err(TowerError::SmallSurface {
            surface: c.surface(),
            chi,
        });
    }
    while c.bottoms().len() > 1 {
        c = merge_bottoms(&c, 0, 1)?;
    }
    etage_surface(&c)
}

/// Rewrite every non-simple étage with `n` bottoms as a simple étage over the
/// free product of its bottoms; the result is the input times a free group of
/// rank `n - 1` per rewritten étage.
pub fn stabilize(t: &Tower) -> Result<Tower, TowerError> {
    Ok(Tower(stab(t.expr())?))
}

fn stab(e: &GroupExpr) -> Result<GroupExpr, TowerError> {
    match e {
        GroupExpr::FreeProduct(fs) => Ok(GroupExpr::product(
            fs.iter().map(stab).collect::<Result<Vec<_>, _>>()?,
        )),
        GroupExpr::Etage(et) => {
            let c = &et.splitting;
            let bottoms = c.bottoms().iter().map(stab).collect::<Result<Vec<_>, _>>()?;
            if bottoms.len() == 1 {
                let c2 = CenteredSplitting::from_parts(c.surface(), bottoms, c.edges().to_vec());
                return Ok(GroupExpr::Etage(Box::new(Etage {
                    splitting: c2,
                    certificate: et.certificate.clone(),
                    marker: et.marker,
                })));
            }
            let mut offsets = Vec::new();
            let mut at = 0;
            for b in &bottoms {
                offsets.push(at);
                at += b.alphabet().len();
            }
            // keep the factor order so the offsets stay valid
            let base = GroupExpr::FreeProduct(bottoms);
            let edges = c
                .edges()
                .iter()
                .map(|e| Edge {
                    boundary: e.boundary,
                    bottom: 0,
                    word: Word::from_letters(
                        e.word
                            .letters()
                            .iter()
                            .map(|l| freegroup::Letter::new(l.index() + offsets[e.bottom], l.is_inverse())),
                    ),
                })
                .collect();
            let simple = CenteredSplitting::new(c.surface(), vec![base], edges)?;
            let mut out = etage_surface(&simple)?.into_expr();
            if let (GroupExpr::Etage(x), Some(_)) = (&mut out, et.marker) {
                x.marker = Some(0);
            }
            Ok(out)
        }
        other => Ok(other.clone()),
    }
}
