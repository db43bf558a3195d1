//! Directed multigraphs with stable arc identities, plus the connectivity
//! and flow primitives the decomposition pipeline is built on.
//!
//! Vertices are small dense integers; arcs carry ids that survive induced
//! subgraphs, spanning subgraphs and reversal, so parallel copies stay
//! individually addressable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Identity of a single arc. Parallel arcs get distinct ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub u32);

pub type Vertex = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("digraph is not strong")]
    NotStrong,
    #[error("invalid arc: {0}")]
    InvalidArc(String),
}

/// A finite directed multigraph without loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiDigraph {
    verts: BTreeSet<Vertex>,
    arcs: BTreeMap<ArcId, (Vertex, Vertex)>,
    next_id: u32,
}

impl MultiDigraph {
    pub fn new() -> Self {
        MultiDigraph { verts: BTreeSet::new(), arcs: BTreeMap::new(), next_id: 0 }
    }

    /// Graph on vertices `0..n` with the given tail/head pairs.
    pub fn from_arcs(n: usize, pairs: &[(Vertex, Vertex)]) -> Self {
        let mut g = MultiDigraph::new();
        for v in 0..n {
            g.add_vertex(v);
        }
        for &(t, h) in pairs {
            g.add_arc(t, h);
        }
        g
    }

    pub fn add_vertex(&mut self, v: Vertex) {
        self.verts.insert(v);
    }

    pub fn add_arc(&mut self, tail: Vertex, head: Vertex) -> ArcId {
        assert!(tail != head, "loops are not allowed");
        assert!(self.verts.contains(&tail) && self.verts.contains(&head));
        let id = ArcId(self.next_id);
        self.next_id += 1;
        self.arcs.insert(id, (tail, head));
        id
    }

    pub fn remove_arc(&mut self, id: ArcId) -> Option<(Vertex, Vertex)> {
        self.arcs.remove(&id)
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.verts.iter().copied()
    }

    pub fn vertex_set(&self) -> &BTreeSet<Vertex> {
        &self.verts
    }

    pub fn has_vertex(&self, v: Vertex) -> bool {
        self.verts.contains(&v)
    }

    pub fn arcs(&self) -> impl Iterator<Item = (ArcId, Vertex, Vertex)> + '_ {
        self.arcs.iter().map(|(&id, &(t, h))| (id, t, h))
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = ArcId> + '_ {
        self.arcs.keys().copied()
    }

    pub fn endpoints(&self, id: ArcId) -> Option<(Vertex, Vertex)> {
        self.arcs.get(&id).copied()
    }

    pub fn tail(&self, id: ArcId) -> Vertex {
        self.arcs[&id].0
    }

    pub fn head(&self, id: ArcId) -> Vertex {
        self.arcs[&id].1
    }

    pub fn has_arc(&self, tail: Vertex, head: Vertex) -> bool {
        self.arcs.values().any(|&(t, h)| t == tail && h == head)
    }

    /// Smallest arc id from `tail` to `head`, if any.
    pub fn find_arc(&self, tail: Vertex, head: Vertex) -> Option<ArcId> {
        self.arcs
            .iter()
            .find(|(_, &(t, h))| t == tail && h == head)
            .map(|(&id, _)| id)
    }

    pub fn arcs_between(&self, tail: Vertex, head: Vertex) -> Vec<ArcId> {
        self.arcs
            .iter()
            .filter(|(_, &(t, h))| t == tail && h == head)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn out_arcs(&self, v: Vertex) -> Vec<ArcId> {
        self.arcs
            .iter()
            .filter(|(_, &(t, _))| t == v)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn in_arcs(&self, v: Vertex) -> Vec<ArcId> {
        self.arcs
            .iter()
            .filter(|(_, &(_, h))| h == v)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn out_degree(&self, v: Vertex) -> usize {
        self.arcs.values().filter(|&&(t, _)| t == v).count()
    }

    pub fn in_degree(&self, v: Vertex) -> usize {
        self.arcs.values().filter(|&&(_, h)| h == v).count()
    }

    /// Distinct out-neighbours, sorted.
    pub fn out_neighbors(&self, v: Vertex) -> BTreeSet<Vertex> {
        self.arcs
            .values()
            .filter(|&&(t, _)| t == v)
            .map(|&(_, h)| h)
            .collect()
    }

    /// Distinct in-neighbours, sorted.
    pub fn in_neighbors(&self, v: Vertex) -> BTreeSet<Vertex> {
        self.arcs
            .values()
            .filter(|&&(_, h)| h == v)
            .map(|&(t, _)| t)
            .collect()
    }

    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        self.arcs
            .values()
            .any(|&(t, h)| (t == u && h == v) || (t == v && h == u))
    }

    /// Subdigraph induced by a vertex subset; arc ids are preserved.
    pub fn induced(&self, keep: &BTreeSet<Vertex>) -> MultiDigraph {
        let arcs = self
            .arcs
            .iter()
            .filter(|(_, &(t, h))| keep.contains(&t) && keep.contains(&h))
            .map(|(&id, &a)| (id, a))
            .collect();
        MultiDigraph { verts: keep.clone(), arcs, next_id: self.next_id }
    }

    /// Spanning subdigraph on the same vertex set restricted to `ids`.
    pub fn spanning(&self, ids: &BTreeSet<ArcId>) -> MultiDigraph {
        let arcs = self
            .arcs
            .iter()
            .filter(|(id, _)| ids.contains(id))
            .map(|(&id, &a)| (id, a))
            .collect();
        MultiDigraph { verts: self.verts.clone(), arcs, next_id: self.next_id }
    }

    /// Subdigraph on `verts` restricted to `ids`.
    pub fn sub(&self, verts: &BTreeSet<Vertex>, ids: &BTreeSet<ArcId>) -> MultiDigraph {
        let arcs = self
            .arcs
            .iter()
            .filter(|(id, &(t, h))| ids.contains(id) && verts.contains(&t) && verts.contains(&h))
            .map(|(&id, &a)| (id, a))
            .collect();
        MultiDigraph { verts: verts.clone(), arcs, next_id: self.next_id }
    }

    pub fn remove_vertex(&mut self, v: Vertex) {
        self.verts.remove(&v);
        self.arcs.retain(|_, &mut (t, h)| t != v && h != v);
    }

    /// Arc-reversed graph; every id is kept and maps to its own reversal.
    pub fn reverse(&self) -> MultiDigraph {
        let arcs = self.arcs.iter().map(|(&id, &(t, h))| (id, (h, t))).collect();
        MultiDigraph { verts: self.verts.clone(), arcs, next_id: self.next_id }
    }

    /// Relabel vertices through `map` (old vertex -> new vertex).
    pub fn relabel(&self, map: &BTreeMap<Vertex, Vertex>) -> MultiDigraph {
        let verts = self.verts.iter().map(|v| map[v]).collect();
        let arcs = self
            .arcs
            .iter()
            .map(|(&id, &(t, h))| (id, (map[&t], map[&h])))
            .collect();
        MultiDigraph { verts, arcs, next_id: self.next_id }
    }

    fn max_vertex(&self) -> usize {
        self.verts.iter().next_back().copied().unwrap_or(0)
    }

    fn reachable(&self, from: Vertex, forward: bool, skip: Option<ArcId>) -> BTreeSet<Vertex> {
        let cap = self.max_vertex() + 1;
        let mut adj: Vec<Vec<Vertex>> = vec![Vec::new(); cap];
        for (id, &(t, h)) in &self.arcs {
            if Some(*id) == skip {
                continue;
            }
            if forward {
                adj[t].push(h);
            } else {
                adj[h].push(t);
            }
        }
        let mut seen = vec![false; cap];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        self.verts.iter().copied().filter(|&v| seen[v]).collect()
    }
}

impl Default for MultiDigraph {
    fn default() -> Self {
        Self::new()
    }
}

/// Strong components listed so that no arc leaves a later component for a
/// strictly earlier one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcyclicOrdering {
    pub components: Vec<BTreeSet<Vertex>>,
}

impl AcyclicOrdering {
    pub fn initial(&self) -> &BTreeSet<Vertex> {
        self.components.first().expect("nonempty graph")
    }

    pub fn terminal(&self) -> &BTreeSet<Vertex> {
        self.components.last().expect("nonempty graph")
    }

    pub fn component_of(&self, v: Vertex) -> Option<usize> {
        self.components.iter().position(|c| c.contains(&v))
    }
}

/// A directed path held as its arc-id sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiPath {
    pub arcs: Vec<ArcId>,
}

impl DiPath {
    pub fn vertices(&self, g: &MultiDigraph) -> Vec<Vertex> {
        if self.arcs.is_empty() {
            return Vec::new();
        }
        let mut vs = vec![g.tail(self.arcs[0])];
        for &a in &self.arcs {
            vs.push(g.head(a));
        }
        vs
    }

    pub fn start(&self, g: &MultiDigraph) -> Vertex {
        g.tail(self.arcs[0])
    }

    pub fn end(&self, g: &MultiDigraph) -> Vertex {
        g.head(*self.arcs.last().expect("nonempty path"))
    }

    pub fn contains_vertex(&self, g: &MultiDigraph, v: Vertex) -> bool {
        self.vertices(g).contains(&v)
    }

    pub fn contains_arc(&self, id: ArcId) -> bool {
        self.arcs.contains(&id)
    }

    /// Suffix starting at the first occurrence of `v`.
    pub fn suffix_from(&self, g: &MultiDigraph, v: Vertex) -> Option<DiPath> {
        let vs = self.vertices(g);
        let pos = vs.iter().position(|&x| x == v)?;
        Some(DiPath { arcs: self.arcs[pos..].to_vec() })
    }

    /// Consecutive arcs share head/tail and no vertex repeats.
    pub fn is_valid(&self, g: &MultiDigraph) -> bool {
        if self.arcs.is_empty() {
            return false;
        }
        for w in self.arcs.windows(2) {
            match (g.endpoints(w[0]), g.endpoints(w[1])) {
                (Some((_, h)), Some((t, _))) if h == t => {}
                _ => return false,
            }
        }
        let vs = self.vertices(g);
        let set: BTreeSet<_> = vs.iter().collect();
        set.len() == vs.len()
    }
}

/// True iff every ordered vertex pair is joined by a directed path.
pub fn is_strong(g: &MultiDigraph) -> bool {
    let n = g.vertex_count();
    if n <= 1 {
        return n == 1;
    }
    let root = *g.verts.iter().next().unwrap();
    g.reachable(root, true, None).len() == n && g.reachable(root, false, None).len() == n
}

fn is_strong_without(g: &MultiDigraph, skip: ArcId) -> bool {
    let n = g.vertex_count();
    if n <= 1 {
        return n == 1;
    }
    let root = *g.verts.iter().next().unwrap();
    g.reachable(root, true, Some(skip)).len() == n && g.reachable(root, false, Some(skip)).len() == n
}

/// Strong components in acyclic order (tails of inter-component arcs come
/// no later than heads).
pub fn acyclic_ordering(g: &MultiDigraph) -> AcyclicOrdering {
    let verts: Vec<Vertex> = g.vertices().collect();
    let cap = g.max_vertex() + 1;
    let mut index_of = vec![usize::MAX; cap];
    for (i, &v) in verts.iter().enumerate() {
        index_of[v] = i;
    }
    let n = verts.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (_, t, h) in g.arcs() {
        adj[index_of[t]].push(index_of[h]);
    }

    // Iterative Tarjan.
    let mut idx = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp_of = vec![usize::MAX; n];
    let mut counter = 0usize;
    let mut n_comps = 0usize;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if idx[start] != usize::MAX {
            continue;
        }
        call.push((start, 0));
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei == 0 {
                idx[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if *ei < adj[v].len() {
                let w = adj[v][*ei];
                *ei += 1;
                if idx[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(idx[w]);
                }
            } else {
                if low[v] == idx[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp_of[w] = n_comps;
                        if w == v {
                            break;
                        }
                    }
                    n_comps += 1;
                }
                call.pop();
                if let Some(&mut (p, _)) = call.last_mut() {
                    low[p] = low[p].min(low[v]);
                }
            }
        }
    }

    // Tarjan emits components in reverse topological order of the
    // condensation, which is exactly the acyclic ordering reversed.
    let mut comps: Vec<BTreeSet<Vertex>> = vec![BTreeSet::new(); n_comps];
    for (i, &v) in verts.iter().enumerate() {
        comps[n_comps - 1 - comp_of[i]].insert(v);
    }
    AcyclicOrdering { components: comps }
}

/// Max number of arc-disjoint paths from `src` set to `dst` set, capped at
/// `cap`, over arcs satisfying `allowed`. Interior vertices avoid both sets:
/// arcs entering `src` or leaving `dst` are unusable.
fn bounded_flow(
    g: &MultiDigraph,
    src: &BTreeSet<Vertex>,
    dst: &BTreeSet<Vertex>,
    allowed: &dyn Fn(ArcId) -> bool,
    cap: usize,
) -> Vec<Vec<ArcId>> {
    let vcap = g.max_vertex() + 2;
    let mut arcs: Vec<(Vertex, Vertex, ArcId)> = Vec::new();
    for (id, t, h) in g.arcs() {
        if !allowed(id) || dst.contains(&t) || src.contains(&h) {
            continue;
        }
        arcs.push((t, h, id));
    }
    let m = arcs.len();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); vcap];
    let mut into: Vec<Vec<usize>> = vec![Vec::new(); vcap];
    for (i, &(t, h, _)) in arcs.iter().enumerate() {
        out[t].push(i);
        into[h].push(i);
    }
    let mut used = vec![false; m];
    let mut total = 0;
    while total < cap {
        // BFS over residual: forward on unused arcs, backward on used ones.
        let mut pred: Vec<Option<(usize, bool)>> = vec![None; vcap];
        let mut seen = vec![false; vcap];
        let mut queue: std::collections::VecDeque<Vertex> = src.iter().copied().collect();
        for &s in src {
            seen[s] = true;
        }
        let mut reached: Option<Vertex> = None;
        'bfs: while let Some(v) = queue.pop_front() {
            for &i in &out[v] {
                if used[i] {
                    continue;
                }
                let h = arcs[i].1;
                if !seen[h] {
                    seen[h] = true;
                    pred[h] = Some((i, true));
                    if dst.contains(&h) {
                        reached = Some(h);
                        break 'bfs;
                    }
                    queue.push_back(h);
                }
            }
            for &i in &into[v] {
                if !used[i] {
                    continue;
                }
                let t = arcs[i].0;
                if !seen[t] {
                    seen[t] = true;
                    pred[t] = Some((i, false));
                    queue.push_back(t);
                }
            }
        }
        let Some(mut v) = reached else { break };
        while let Some((i, fwd)) = pred[v] {
            if fwd {
                used[i] = true;
                v = arcs[i].0;
            } else {
                used[i] = false;
                v = arcs[i].1;
            }
        }
        total += 1;
    }

    // Decompose the flow into paths, dropping interior cycles.
    let mut taken = vec![false; m];
    let mut paths = Vec::new();
    for _ in 0..total {
        let mut start = None;
        'outer: for &s in src {
            for &i in &out[s] {
                if used[i] && !taken[i] {
                    start = Some(i);
                    break 'outer;
                }
            }
        }
        let Some(first) = start else { break };
        let mut path_arcs = vec![first];
        taken[first] = true;
        let mut at = arcs[first].1;
        let mut guard = 0;
        while !dst.contains(&at) {
            guard += 1;
            assert!(guard <= m + 1, "flow decomposition runaway");
            let nxt = out[at]
                .iter()
                .copied()
                .find(|&i| used[i] && !taken[i])
                .expect("flow conservation");
            taken[nxt] = true;
            path_arcs.push(nxt);
            at = arcs[nxt].1;
        }
        // Strip any repeated-vertex loops.
        loop {
            let mut verts = vec![arcs[path_arcs[0]].0];
            for &i in &path_arcs {
                verts.push(arcs[i].1);
            }
            let mut dup = None;
            'scan: for a in 0..verts.len() {
                for b in a + 1..verts.len() {
                    if verts[a] == verts[b] {
                        dup = Some((a, b));
                        break 'scan;
                    }
                }
            }
            match dup {
                Some((a, b)) => {
                    path_arcs.drain(a..b);
                }
                None => break,
            }
        }
        paths.push(path_arcs.iter().map(|&i| arcs[i].2).collect());
    }
    paths
}

/// Up to `cap` arc-disjoint `(X, Y)`-paths over allowed arcs.
pub fn xy_paths(
    g: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    allowed: &dyn Fn(ArcId) -> bool,
    cap: usize,
) -> Vec<Vec<ArcId>> {
    bounded_flow(g, x, y, allowed, cap)
}

/// Number of arc-disjoint `(X, Y)`-paths over allowed arcs, capped.
pub fn xy_path_count(
    g: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    allowed: &dyn Fn(ArcId) -> bool,
    cap: usize,
) -> usize {
    bounded_flow(g, x, y, allowed, cap).len()
}

/// Two arc-disjoint `(X, Y)`-paths meeting `X ∪ Y` only at their endpoints,
/// or `None` when fewer than two exist.
pub fn arc_disjoint_xy_paths(
    g: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    allowed: &dyn Fn(ArcId) -> bool,
) -> Option<(DiPath, DiPath)> {
    assert!(!x.is_empty() && !y.is_empty() && x.is_disjoint(y));
    let mut paths = bounded_flow(g, x, y, allowed, 2);
    if paths.len() < 2 {
        return None;
    }
    let q2 = DiPath { arcs: paths.pop().unwrap() };
    let q1 = DiPath { arcs: paths.pop().unwrap() };
    Some((q1, q2))
}

/// Largest `k` (capped at `cap`) such that the graph is k-arc-strong.
pub fn arc_strong_connectivity(g: &MultiDigraph, cap: usize) -> usize {
    let n = g.vertex_count();
    if n <= 1 {
        return cap;
    }
    let root = *g.verts.iter().next().unwrap();
    let mut best = cap;
    for v in g.vertices() {
        if v == root {
            continue;
        }
        let rs: BTreeSet<_> = [root].into_iter().collect();
        let vs: BTreeSet<_> = [v].into_iter().collect();
        let fwd = bounded_flow(g, &rs, &vs, &|_| true, best).len();
        best = best.min(fwd);
        if best == 0 {
            return 0;
        }
        let back = bounded_flow(g, &vs, &rs, &|_| true, best).len();
        best = best.min(back);
        if best == 0 {
            return 0;
        }
    }
    best
}

/// True iff removing any `k - 1` arcs leaves the graph strong.
pub fn is_k_arc_strong(g: &MultiDigraph, k: usize) -> bool {
    if k == 0 {
        return true;
    }
    if g.vertex_count() > 1 {
        for v in g.vertices() {
            if g.out_degree(v) < k || g.in_degree(v) < k {
                return false;
            }
        }
    }
    arc_strong_connectivity(g, k) >= k
}

/// Arcs whose removal destroys strongness. Parallel copies are never cut.
pub fn cut_arcs(g: &MultiDigraph) -> Result<BTreeSet<ArcId>, GraphError> {
    if !is_strong(g) {
        return Err(GraphError::NotStrong);
    }
    let mut cuts = BTreeSet::new();
    for (id, t, h) in g.arcs() {
        if g.arcs_between(t, h).len() > 1 {
            continue;
        }
        if !is_strong_without(g, id) {
            cuts.insert(id);
        }
    }
    Ok(cuts)
}

/// A multiplicity-preserving vertex bijection from `a` onto `b`, if the two
/// graphs are isomorphic. Backtracking with degree-profile pruning; intended
/// for small graphs.
pub fn are_isomorphic(a: &MultiDigraph, b: &MultiDigraph) -> Option<BTreeMap<Vertex, Vertex>> {
    if a.vertex_count() != b.vertex_count() || a.arc_count() != b.arc_count() {
        return None;
    }
    let va: Vec<Vertex> = a.vertices().collect();
    let vb: Vec<Vertex> = b.vertices().collect();
    let n = va.len();
    if n == 0 {
        return Some(BTreeMap::new());
    }

    let profile = |g: &MultiDigraph, vs: &[Vertex], v: Vertex| -> (Vec<usize>, Vec<usize>) {
        let mut outs: Vec<usize> = vs
            .iter()
            .map(|&w| g.arcs_between(v, w).len())
            .filter(|&c| c > 0)
            .collect();
        let mut ins: Vec<usize> = vs
            .iter()
            .map(|&w| g.arcs_between(w, v).len())
            .filter(|&c| c > 0)
            .collect();
        outs.sort_unstable();
        ins.sort_unstable();
        (outs, ins)
    };
    let pa: Vec<_> = va.iter().map(|&v| profile(a, &va, v)).collect();
    let pb: Vec<_> = vb.iter().map(|&v| profile(b, &vb, v)).collect();
    {
        let mut sa = pa.clone();
        let mut sb = pb.clone();
        sa.sort();
        sb.sort();
        if sa != sb {
            return None;
        }
    }

    let mult = |g: &MultiDigraph, u: Vertex, v: Vertex| g.arcs_between(u, v).len();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn backtrack(
        i: usize,
        n: usize,
        va: &[Vertex],
        vb: &[Vertex],
        pa: &[(Vec<usize>, Vec<usize>)],
        pb: &[(Vec<usize>, Vec<usize>)],
        a: &MultiDigraph,
        b: &MultiDigraph,
        mult: &dyn Fn(&MultiDigraph, Vertex, Vertex) -> usize,
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        if i == n {
            return true;
        }
        for j in 0..n {
            if used[j] || pa[i] != pb[j] {
                continue;
            }
            let ok = (0..i).all(|k| {
                mult(a, va[i], va[k]) == mult(b, vb[j], vb[map[k]])
                    && mult(a, va[k], va[i]) == mult(b, vb[map[k]], vb[j])
            });
            if ok {
                map[i] = j;
                used[j] = true;
                if backtrack(i + 1, n, va, vb, pa, pb, a, b, mult, map, used) {
                    return true;
                }
                used[j] = false;
                map[i] = usize::MAX;
            }
        }
        false
    }

    if backtrack(0, n, &va, &vb, &pa, &pb, a, b, &mult, &mut map, &mut used) {
        Some(va.iter().enumerate().map(|(i, &v)| (v, vb[map[i]])).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s4() -> MultiDigraph {
        MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 3), (3, 1)],
        )
    }

    #[test]
    fn strongness_basics() {
        let two_cycle = MultiDigraph::from_arcs(2, &[(0, 1), (1, 0)]);
        assert!(is_strong(&two_cycle));
        let path = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2)]);
        assert!(!is_strong(&path));
        assert!(is_strong(&s4()));
    }

    #[test]
    fn acyclic_ordering_basics() {
        let strong = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        let ord = acyclic_ordering(&strong);
        assert_eq!(ord.components.len(), 1);

        let arc = MultiDigraph::from_arcs(2, &[(0, 1)]);
        let ord = acyclic_ordering(&arc);
        assert_eq!(ord.components.len(), 2);
        assert!(ord.components[0].contains(&0));
        assert!(ord.components[1].contains(&1));

        // 4-cycle plus chords v1v3, v2v4 is strongly connected.
        let s4m2 = MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]);
        assert_eq!(acyclic_ordering(&s4m2).components.len(), 1);
        // Brute-force reachability agrees.
        assert!(is_strong(&s4m2));
    }

    #[test]
    fn ordering_respects_arcs() {
        let g = MultiDigraph::from_arcs(6, &[(0, 1), (1, 0), (1, 2), (2, 3), (3, 2), (3, 4), (4, 5), (5, 4)]);
        let ord = acyclic_ordering(&g);
        assert_eq!(ord.components.len(), 3);
        for (_, t, h) in g.arcs() {
            let it = ord.component_of(t).unwrap();
            let ih = ord.component_of(h).unwrap();
            assert!(it <= ih, "arc {}->{} violates ordering", t, h);
        }
        for c in &ord.components {
            assert!(is_strong(&g.induced(c)));
        }
    }

    #[test]
    fn k_arc_strong_examples() {
        assert!(is_k_arc_strong(&s4(), 2));
        // Out-degree-1 vertex rules out 2-arc-strongness.
        let path = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0), (0, 2), (1, 0)]);
        assert!(!is_k_arc_strong(&path, 2));
        // S4,1 from the exception catalog is 2-arc-strong.
        let mut s41 = s4();
        s41.add_arc(2, 0);
        assert!(is_k_arc_strong(&s41, 2));
    }

    #[test]
    fn k_arc_strong_matches_brute_force() {
        // Exhaustive check against removing every (k-1)-subset.
        let samples = vec![
            s4(),
            MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]),
            MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0), (0, 2), (2, 1), (1, 0)]),
            MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3), (2, 0)]),
        ];
        for g in samples {
            for k in 1..=3usize {
                let ids: Vec<ArcId> = g.arc_ids().collect();
                let mut brute = true;
                let subsets = choose_subsets(&ids, k - 1);
                for del in subsets {
                    let keep: BTreeSet<ArcId> =
                        ids.iter().copied().filter(|i| !del.contains(i)).collect();
                    if !is_strong(&g.spanning(&keep)) {
                        brute = false;
                        break;
                    }
                }
                assert_eq!(is_k_arc_strong(&g, k), brute, "k={}", k);
            }
        }
    }

    fn choose_subsets(ids: &[ArcId], k: usize) -> Vec<Vec<ArcId>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(ids: &[ArcId], k: usize, at: usize, cur: &mut Vec<ArcId>, out: &mut Vec<Vec<ArcId>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            if at == ids.len() {
                return;
            }
            cur.push(ids[at]);
            rec(ids, k, at + 1, cur, out);
            cur.pop();
            rec(ids, k, at + 1, cur, out);
        }
        rec(ids, k, 0, &mut cur, &mut out);
        out
    }

    #[test]
    fn cut_arcs_examples() {
        assert!(cut_arcs(&s4()).unwrap().is_empty());

        let cycle = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(cut_arcs(&cycle).unwrap().len(), 3);

        // 3-cycle with one doubled arc: only the two undoubled arcs are cut.
        let mut g = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        let dup = g.add_arc(0, 1);
        let cuts = cut_arcs(&g).unwrap();
        assert_eq!(cuts.len(), 2);
        assert!(!cuts.contains(&dup));
        // Direct recomputation.
        for (id, _, _) in g.arcs() {
            let mut h = g.clone();
            h.remove_arc(id);
            assert_eq!(cuts.contains(&id), !is_strong(&h));
        }

        let not_strong = MultiDigraph::from_arcs(2, &[(0, 1)]);
        assert_eq!(cut_arcs(&not_strong), Err(GraphError::NotStrong));
    }

    #[test]
    fn xy_paths_examples() {
        let mut g = MultiDigraph::from_arcs(2, &[(0, 1)]);
        g.add_arc(0, 1);
        let x: BTreeSet<_> = [0].into();
        let y: BTreeSet<_> = [1].into();
        let (q1, q2) = arc_disjoint_xy_paths(&g, &x, &y, &|_| true).unwrap();
        assert_eq!(q1.arcs.len(), 1);
        assert_eq!(q2.arcs.len(), 1);
        assert_ne!(q1.arcs[0], q2.arcs[0]);

        let chain = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2)]);
        let y2: BTreeSet<_> = [2].into();
        assert!(arc_disjoint_xy_paths(&chain, &x, &y2, &|_| true).is_none());
    }

    #[test]
    fn xy_paths_avoid_endpoints_internally() {
        // Any returned path may touch X and Y only at its endpoints.
        let g = MultiDigraph::from_arcs(
            5,
            &[(0, 2), (2, 1), (1, 3), (0, 3), (3, 4), (2, 4), (4, 0), (3, 2)],
        );
        let x: BTreeSet<_> = [0, 1].into();
        let y: BTreeSet<_> = [4].into();
        if let Some((q1, q2)) = arc_disjoint_xy_paths(&g, &x, &y, &|_| true) {
            for p in [&q1, &q2] {
                assert!(p.is_valid(&g));
                let vs = p.vertices(&g);
                assert!(x.contains(&vs[0]));
                assert!(y.contains(vs.last().unwrap()));
                for v in &vs[1..vs.len() - 1] {
                    assert!(!x.contains(v) && !y.contains(v));
                }
            }
            let s1: BTreeSet<_> = q1.arcs.iter().collect();
            assert!(q2.arcs.iter().all(|a| !s1.contains(a)));
        } else {
            panic!("expected a pair");
        }
    }

    #[test]
    fn reverse_is_involution_and_preserves_connectivity() {
        let g = s4();
        let r = g.reverse();
        assert_eq!(r.reverse(), g);
        assert_eq!(is_strong(&g), is_strong(&r));
        for k in 1..=3 {
            assert_eq!(is_k_arc_strong(&g, k), is_k_arc_strong(&r, k));
        }
        let a = MultiDigraph::from_arcs(2, &[(0, 1)]);
        let ra = a.reverse();
        assert_eq!(ra.endpoints(ArcId(0)), Some((1, 0)));
    }

    #[test]
    fn isomorphism_examples() {
        let g = s4();
        let id = are_isomorphic(&g, &g).unwrap();
        for v in g.vertices() {
            assert_eq!(id[&v], v);
        }

        // S4 relabeled by a 4-cycle permutation.
        let map: BTreeMap<_, _> = [(0, 1), (1, 2), (2, 3), (3, 0)].into();
        let h = g.relabel(&map);
        assert!(are_isomorphic(&g, &h).is_some());

        // reverse(S4) is isomorphic to S4; cross-check with the brute-force
        // permutation oracle.
        assert!(are_isomorphic(&g, &g.reverse()).is_some());
        assert!(brute_force_isomorphic(&g, &g.reverse()));

        // S4 vs S4,1: arc counts differ.
        let mut s41 = s4();
        s41.add_arc(2, 0);
        assert!(are_isomorphic(&g, &s41).is_none());
    }

    fn brute_force_isomorphic(a: &MultiDigraph, b: &MultiDigraph) -> bool {
        let va: Vec<Vertex> = a.vertices().collect();
        let vb: Vec<Vertex> = b.vertices().collect();
        if va.len() != vb.len() || a.arc_count() != b.arc_count() {
            return false;
        }
        permutations(&vb).into_iter().any(|perm| {
            va.iter().enumerate().all(|(i, &u)| {
                va.iter().enumerate().all(|(j, &v)| {
                    a.arcs_between(u, v).len() == b.arcs_between(perm[i], perm[j]).len()
                })
            })
        })
    }

    fn permutations(vs: &[Vertex]) -> Vec<Vec<Vertex>> {
        if vs.is_empty() {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for (i, &v) in vs.iter().enumerate() {
            let mut rest = vs.to_vec();
            rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, v);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn isomorphism_agrees_with_brute_force_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.gen_range(2..=5usize);
            let mut g = MultiDigraph::new();
            for v in 0..n {
                g.add_vertex(v);
            }
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.gen_bool(0.4) {
                        g.add_arc(u, v);
                        if rng.gen_bool(0.2) {
                            g.add_arc(u, v);
                        }
                    }
                }
            }
            let mut h = MultiDigraph::new();
            for v in 0..n {
                h.add_vertex(v);
            }
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.gen_bool(0.4) {
                        h.add_arc(u, v);
                    }
                }
            }
            assert_eq!(are_isomorphic(&g, &h).is_some(), brute_force_isomorphic(&g, &h));
            assert!(are_isomorphic(&g, &g).is_some());
        }
    }
}
