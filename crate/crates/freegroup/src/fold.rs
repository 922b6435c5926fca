use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::{Letter, Word};

/// Folded core graph of a finitely generated subgroup. State 0 is the basepoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupGraph {
    states: usize,
    // (source, generator, target), positive orientation only, sorted
    edges: Vec<(usize, usize, usize)>,
    out: HashMap<(usize, usize), usize>,
    inc: HashMap<(usize, usize), usize>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller root so the basepoint stays 0
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

/// Stallings folding of the bouquet of loops spelled by `generators`.
pub fn fold(generators: &[Word]) -> SubgroupGraph {
    let mut states = 1;
    let mut edges = Vec::new();
    for g in generators {
        let n = g.len();
        if n == 0 {
            continue;
        }
        let mut prev = 0;
        for (i, l) in g.letters().iter().enumerate() {
            let next = if i + 1 == n {
                0
            } else {
                states += 1;
                states - 1
            };
            push_edge(&mut edges, prev, *l, next);
            prev = next;
        }
    }

    let mut uf = UnionFind::new(states);
    loop {
        let mut changed = false;
        let mut seen_out: HashMap<(usize, usize), usize> = HashMap::new();
        let mut seen_in: HashMap<(usize, usize), usize> = HashMap::new();
        for &(u, g, v) in &edges {
            let (u, v) = (uf.find(u), uf.find(v));
            if let Some(&t) = seen_out.get(&(u, g)) {
                changed |= uf.union(t, v);
            } else {
                seen_out.insert((u, g), v);
            }
            let v = uf.find(v);
            let u = uf.find(u);
            if let Some(&s) = seen_in.get(&(v, g)) {
                changed |= uf.union(s, u);
            } else {
                seen_in.insert((v, g), u);
            }
        }
        if !changed {
            break;
        }
    }

    let folded: BTreeSet<(usize, usize, usize)> = edges
        .iter()
        .map(|&(u, g, v)| (uf.find(u), g, uf.find(v)))
        .collect();
    SubgroupGraph::canonical(prune(folded.into_iter().collect()))
}

fn push_edge(edges: &mut Vec<(usize, usize, usize)>, from: usize, l: Letter, to: usize) {
    if l.is_inverse() {
        edges.push((to, l.index(), from));
    } else {
        edges.push((from, l.index(), to));
    }
}

// drop hanging trees away from the basepoint
fn prune(mut edges: Vec<(usize, usize, usize)>) -> Vec<(usize, usize, usize)> {
    loop {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for &(u, _, v) in &edges {
            *degree.entry(u).or_default() += 1;
            *degree.entry(v).or_default() += 1;
        }
        let before = edges.len();
        edges.retain(|&(u, _, v)| {
            let leaf = |s: usize| s != 0 && degree[&s] <= 1;
            !(leaf(u) || leaf(v))
        });
        if edges.len() == before {
            return edges;
        }
    }
}

impl SubgroupGraph {
    // renumber states in BFS order from the basepoint, visiting labels in letter order
    fn canonical(edges: Vec<(usize, usize, usize)>) -> SubgroupGraph {
        let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for &(u, g, v) in &edges {
            adj.entry(u).or_default().push((2 * g, v));
            adj.entry(v).or_default().push((2 * g + 1, u));
        }
        for list in adj.values_mut() {
            list.sort();
        }
        let mut order: HashMap<usize, usize> = HashMap::new();
        order.insert(0, 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            for &(_, t) in adj.get(&s).map(|v| v.as_slice()).unwrap_or(&[]) {
                if !order.contains_key(&t) {
                    order.insert(t, order.len());
                    queue.push_back(t);
                }
            }
        }
        let mut renamed: Vec<(usize, usize, usize)> = edges
            .iter()
            .map(|&(u, g, v)| (order[&u], g, order[&v]))
            .collect();
        renamed.sort();
        let mut out = HashMap::new();
        let mut inc = HashMap::new();
        for &(u, g, v) in &renamed {
            out.insert((u, g), v);
            inc.insert((v, g), u);
        }
        SubgroupGraph {
            states: order.len(),
            edges: renamed,
            out,
            inc,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    pub fn rank(&self) -> usize {
        self.edges.len() + 1 - self.states
    }

    pub fn contains(&self, w: &Word) -> bool {
        let mut s = 0;
        for l in w.letters() {
            let next = if l.is_inverse() {
                self.inc.get(&(s, l.index()))
            } else {
                self.out.get(&(s, l.index()))
            };
            match next {
                Some(&t) => s = t,
                None => return false,
            }
        }
        s == 0
    }
}

/// True iff the words freely generate the subgroup they span.
pub fn is_free_basis(generators: &[Word]) -> bool {
    !generators.is_empty()
        && generators.iter().all(|g| !g.is_identity())
        && fold(generators).rank() == generators.len()
}
