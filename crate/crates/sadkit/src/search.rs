//! Exact decomposers: the exhaustive two-coloring oracle, the
//! semicomplete-multidigraph decomposer and the decomposition verifier.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::exceptions::ExceptionCertificate;
use crate::graph::{is_k_arc_strong, is_strong, ArcId, MultiDigraph, Vertex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SearchError {
    #[error("arc count {0} exceeds oracle budget {1}")]
    BudgetExceeded(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
}

/// Default cap on oracle instance size, overridable via
/// `SADKIT_ORACLE_BUDGET`.
pub const DEFAULT_ORACLE_BUDGET: usize = 22;

pub fn oracle_budget() -> usize {
    std::env::var("SADKIT_ORACLE_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_ORACLE_BUDGET)
}

/// A partition of the host's arcs into two classes, each spanning strong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub a1: BTreeSet<ArcId>,
    pub a2: BTreeSet<ArcId>,
}

/// Either a verified decomposition or a certificate of impossibility.
#[derive(Debug, Clone)]
pub enum Outcome {
    Decomposition(Decomposition),
    Exception(ExceptionCertificate),
}

impl Outcome {
    pub fn is_decomposition(&self) -> bool {
        matches!(self, Outcome::Decomposition(_))
    }
}

/// True iff `dec` partitions the arcs of `d` into two spanning strong
/// subdigraphs.
pub fn verify_decomposition(d: &MultiDigraph, dec: &Decomposition) -> bool {
    if !dec.a1.is_disjoint(&dec.a2) {
        return false;
    }
    let all: BTreeSet<ArcId> = d.arc_ids().collect();
    let union: BTreeSet<ArcId> = dec.a1.union(&dec.a2).copied().collect();
    if union != all {
        return false;
    }
    is_strong(&d.spanning(&dec.a1)) && is_strong(&d.spanning(&dec.a2))
}

struct Search {
    // arc i: (tail, head) as dense indices
    arcs: Vec<(usize, usize)>,
    ids: Vec<ArcId>,
    n: usize,
    color: Vec<u8>, // 0 unassigned, 1, 2
    out_cnt: [Vec<u32>; 2],
    in_cnt: [Vec<u32>; 2],
    rem_out: Vec<u32>,
    rem_in: Vec<u32>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    check_stride: usize,
}

impl Search {
    fn new(d: &MultiDigraph) -> Self {
        let verts: Vec<Vertex> = d.vertices().collect();
        let dense = |v: Vertex| verts.binary_search(&v).unwrap();
        let n = verts.len();
        let mut arcs = Vec::new();
        let mut ids = Vec::new();
        for (id, t, h) in d.arcs() {
            arcs.push((dense(t), dense(h)));
            ids.push(id);
        }
        let mut rem_out = vec![0u32; n];
        let mut rem_in = vec![0u32; n];
        for &(t, h) in &arcs {
            rem_out[t] += 1;
            rem_in[h] += 1;
        }
        // Most-constrained arcs first: small residual degree at an endpoint.
        let mut order: Vec<usize> = (0..arcs.len()).collect();
        order.sort_by_key(|&i| {
            let (t, h) = arcs[i];
            rem_out[t].min(rem_in[h])
        });
        let arcs: Vec<(usize, usize)> = order.iter().map(|&i| arcs[i]).collect();
        let ids: Vec<ArcId> = order.iter().map(|&i| ids[i]).collect();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (i, &(t, h)) in arcs.iter().enumerate() {
            out_adj[t].push(i);
            in_adj[h].push(i);
        }
        Search {
            color: vec![0; arcs.len()],
            out_cnt: [vec![0; n], vec![0; n]],
            in_cnt: [vec![0; n], vec![0; n]],
            rem_out,
            rem_in,
            arcs,
            ids,
            n,
            out_adj,
            in_adj,
            check_stride: 6,
        }
    }

    fn assign(&mut self, i: usize, c: u8) {
        let (t, h) = self.arcs[i];
        self.color[i] = c;
        let k = (c - 1) as usize;
        self.out_cnt[k][t] += 1;
        self.in_cnt[k][h] += 1;
        self.rem_out[t] -= 1;
        self.rem_in[h] -= 1;
    }

    fn unassign(&mut self, i: usize) {
        let (t, h) = self.arcs[i];
        let k = (self.color[i] - 1) as usize;
        self.color[i] = 0;
        self.out_cnt[k][t] -= 1;
        self.in_cnt[k][h] -= 1;
        self.rem_out[t] += 1;
        self.rem_in[h] += 1;
    }

    /// A vertex whose remaining arcs cannot give both classes an in- and an
    /// out-arc dooms the branch.
    fn degree_feasible(&self, i: usize) -> bool {
        let (t, h) = self.arcs[i];
        for &v in [t, h].iter() {
            for k in 0..2 {
                if self.out_cnt[k][v] == 0 && self.rem_out[v] == 0 {
                    return false;
                }
                if self.in_cnt[k][v] == 0 && self.rem_in[v] == 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Class `k` plus all unassigned arcs must still strongly connect
    /// everything, otherwise the branch is dead.
    fn potential_strong(&self, k: usize) -> bool {
        if self.n <= 1 {
            return true;
        }
        let ok = |i: usize| self.color[i] == 0 || self.color[i] == (k + 1) as u8;
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(v) = stack.pop() {
            for &i in &self.out_adj[v] {
                if !ok(i) {
                    continue;
                }
                let h = self.arcs[i].1;
                if !seen[h] {
                    seen[h] = true;
                    cnt += 1;
                    stack.push(h);
                }
            }
        }
        if cnt < self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(v) = stack.pop() {
            for &i in &self.in_adj[v] {
                if !ok(i) {
                    continue;
                }
                let t = self.arcs[i].0;
                if !seen[t] {
                    seen[t] = true;
                    cnt += 1;
                    stack.push(t);
                }
            }
        }
        cnt == self.n
    }

    fn class_strong(&self, k: usize) -> bool {
        if self.n <= 1 {
            return true;
        }
        let ok = |i: usize| self.color[i] == (k + 1) as u8;
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(v) = stack.pop() {
            for &i in &self.out_adj[v] {
                if !ok(i) {
                    continue;
                }
                let h = self.arcs[i].1;
                if !seen[h] {
                    seen[h] = true;
                    cnt += 1;
                    stack.push(h);
                }
            }
        }
        if cnt < self.n {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut cnt = 1;
        while let Some(v) = stack.pop() {
            for &i in &self.in_adj[v] {
                if !ok(i) {
                    continue;
                }
                let t = self.arcs[i].0;
                if !seen[t] {
                    seen[t] = true;
                    cnt += 1;
                    stack.push(t);
                }
            }
        }
        cnt == self.n
    }

    fn run(&mut self, i: usize) -> bool {
        if i == self.arcs.len() {
            return self.class_strong(0) && self.class_strong(1);
        }
        if i % self.check_stride == 0 && i > 0 && (!self.potential_strong(0) || !self.potential_strong(1)) {
            return false;
        }
        // Branch the class with fewer arcs first; the first arc is pinned to
        // class 1 by symmetry.
        let n1 = self.color.iter().filter(|&&c| c == 1).count();
        let n2 = self.color.iter().filter(|&&c| c == 2).count();
        let tries: &[u8] = if i == 0 {
            &[1]
        } else if n1 <= n2 {
            &[1, 2]
        } else {
            &[2, 1]
        };
        for &c in tries {
            self.assign(i, c);
            if self.degree_feasible(i) && self.run(i + 1) {
                return true;
            }
            self.unassign(i);
        }
        false
    }

    fn extract(&self) -> Decomposition {
        let mut a1 = BTreeSet::new();
        let mut a2 = BTreeSet::new();
        for (i, &c) in self.color.iter().enumerate() {
            if c == 1 {
                a1.insert(self.ids[i]);
            } else {
                a2.insert(self.ids[i]);
            }
        }
        Decomposition { a1, a2 }
    }
}

pub(crate) fn search_sad(d: &MultiDigraph) -> Option<Decomposition> {
    let n = d.vertex_count();
    if n <= 1 {
        // Both empty classes span a single vertex.
        return Some(Decomposition { a1: BTreeSet::new(), a2: BTreeSet::new() });
    }
    for v in d.vertices() {
        if d.out_degree(v) < 2 || d.in_degree(v) < 2 {
            return None;
        }
    }
    let mut s = Search::new(d);
    if s.run(0) {
        let dec = s.extract();
        debug_assert!(verify_decomposition(d, &dec));
        Some(dec)
    } else {
        None
    }
}

/// Exhaustive strong-arc-decomposition oracle with pruning. Instances above
/// `budget` arcs are refused.
pub fn brute_force_sad(
    d: &MultiDigraph,
    budget: usize,
) -> Result<Option<Decomposition>, SearchError> {
    if d.arc_count() > budget {
        return Err(SearchError::BudgetExceeded(d.arc_count(), budget));
    }
    Ok(search_sad(d))
}

/// Decomposes a 2-arc-strong semicomplete multidigraph, or certifies it as
/// one of the seven catalog exceptions.
pub fn sad_semicomplete_multi(d: &MultiDigraph) -> Result<Outcome, SearchError> {
    if !crate::semicomplete::is_semicomplete(d) {
        return Err(SearchError::Precondition("input must be semicomplete".into()));
    }
    if !is_k_arc_strong(d, 2) {
        return Err(SearchError::Precondition("input must be 2-arc-strong".into()));
    }
    if let Some(cert) = crate::exceptions::match_figure1(d) {
        return Ok(Outcome::Exception(cert));
    }
    match search_sad(d) {
        Some(dec) => Ok(Outcome::Decomposition(dec)),
        None => Err(SearchError::Internal(
            "2-arc-strong semicomplete multidigraph outside the catalog must decompose".into(),
        )),
    }
}

/// Extends a decomposition of `induced(x)` to all of `d`: every outside
/// vertex contributes one in-arc and one out-arc to each class, the leftover
/// arcs all land in class 1.
pub fn extend_by_lemma6(
    d: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    dec_on_x: &Decomposition,
) -> Result<Decomposition, SearchError> {
    let inner = d.induced(x);
    if !verify_decomposition(&inner, dec_on_x) {
        return Err(SearchError::Precondition("inner decomposition does not verify".into()));
    }
    let mut a1 = dec_on_x.a1.clone();
    let mut a2 = dec_on_x.a2.clone();
    for v in d.vertices() {
        if x.contains(&v) {
            continue;
        }
        let ins: Vec<ArcId> = d
            .in_arcs(v)
            .into_iter()
            .filter(|&a| x.contains(&d.tail(a)))
            .collect();
        let outs: Vec<ArcId> = d
            .out_arcs(v)
            .into_iter()
            .filter(|&a| x.contains(&d.head(a)))
            .collect();
        let in_nbrs: BTreeSet<Vertex> = ins.iter().map(|&a| d.tail(a)).collect();
        let out_nbrs: BTreeSet<Vertex> = outs.iter().map(|&a| d.head(a)).collect();
        if in_nbrs.len() < 2 || out_nbrs.len() < 2 {
            return Err(SearchError::Precondition(format!(
                "vertex {v} lacks two in- or out-neighbors inside X"
            )));
        }
        let mut in_it = in_nbrs.iter();
        let (u1, u2) = (*in_it.next().unwrap(), *in_it.next().unwrap());
        let mut out_it = out_nbrs.iter();
        let (w1, w2) = (*out_it.next().unwrap(), *out_it.next().unwrap());
        a1.insert(*ins.iter().find(|&&a| d.tail(a) == u1).unwrap());
        a2.insert(*ins.iter().find(|&&a| d.tail(a) == u2).unwrap());
        a1.insert(*outs.iter().find(|&&a| d.head(a) == w1).unwrap());
        a2.insert(*outs.iter().find(|&&a| d.head(a) == w2).unwrap());
    }
    for id in d.arc_ids() {
        if !a1.contains(&id) && !a2.contains(&id) {
            a1.insert(id);
        }
    }
    let dec = Decomposition { a1, a2 };
    if !verify_decomposition(d, &dec) {
        return Err(SearchError::Internal("extended decomposition failed verification".into()));
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exceptions;

    fn s4() -> MultiDigraph {
        MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 3), (3, 1)],
        )
    }

    #[test]
    fn verify_examples() {
        // Two arc-disjoint Hamiltonian cycles on 4 vertices.
        let g = MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 1), (1, 3), (3, 0)],
        );
        // First cycle: 0->1->2->3->0, second: 0->2->1->3->0.
        let a1: BTreeSet<ArcId> = [ArcId(0), ArcId(1), ArcId(2), ArcId(3)].into();
        let a2: BTreeSet<ArcId> = [ArcId(4), ArcId(5), ArcId(6), ArcId(7)].into();
        assert!(verify_decomposition(&g, &Decomposition { a1: a1.clone(), a2: a2.clone() }));

        // Empty class fails on two or more vertices.
        let all: BTreeSet<ArcId> = g.arc_ids().collect();
        assert!(!verify_decomposition(&g, &Decomposition { a1: all, a2: BTreeSet::new() }));

        // No bipartition of S4 works.
        let s = s4();
        assert!(search_sad(&s).is_none());
    }

    #[test]
    fn oracle_on_catalog_and_witness() {
        assert!(brute_force_sad(&s4(), 22).unwrap().is_none());
        for g in exceptions::figure1_graphs() {
            assert!(brute_force_sad(&g.1, 22).unwrap().is_none(), "{:?}", g.0);
        }
        // Two arc-disjoint 4-cycles decompose.
        let g = MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 1), (1, 3), (3, 0)],
        );
        let dec = brute_force_sad(&g, 22).unwrap().unwrap();
        assert!(verify_decomposition(&g, &dec));
    }

    #[test]
    fn oracle_budget_is_enforced() {
        let mut g = s4();
        for _ in 0..20 {
            g.add_arc(0, 1);
        }
        assert!(matches!(brute_force_sad(&g, 22), Err(SearchError::BudgetExceeded(_, _))));
    }

    /// Unpruned enumeration over all bipartitions; test-only oracle for the
    /// pruned search.
    fn unpruned_sad(d: &MultiDigraph) -> Option<Decomposition> {
        let ids: Vec<ArcId> = d.arc_ids().collect();
        let m = ids.len();
        if d.vertex_count() <= 1 {
            return Some(Decomposition { a1: BTreeSet::new(), a2: BTreeSet::new() });
        }
        for mask in 0u64..(1u64 << m) {
            let a1: BTreeSet<ArcId> =
                ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x).collect();
            let a2: BTreeSet<ArcId> =
                ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 0).map(|(_, &x)| x).collect();
            let dec = Decomposition { a1, a2 };
            if verify_decomposition(d, &dec) {
                return Some(dec);
            }
        }
        None
    }

    #[test]
    fn pruned_search_matches_unpruned_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 60 {
            let n = rng.gen_range(2..=4usize);
            let mut g = MultiDigraph::new();
            for v in 0..n {
                g.add_vertex(v);
            }
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.gen_bool(0.55) {
                        g.add_arc(u, v);
                        if rng.gen_bool(0.25) {
                            g.add_arc(u, v);
                        }
                    }
                }
            }
            if g.arc_count() > 14 {
                continue;
            }
            checked += 1;
            let fast = search_sad(&g);
            let slow = unpruned_sad(&g);
            assert_eq!(fast.is_some(), slow.is_some());
            if let Some(dec) = fast {
                assert!(verify_decomposition(&g, &dec));
            }
        }
    }

    #[test]
    fn semicomplete_multi_decomposer() {
        // S4,2 is certified as an exception.
        let mut s42 = s4();
        s42.add_arc(0, 1);
        match sad_semicomplete_multi(&s42).unwrap() {
            Outcome::Exception(cert) => {
                assert_eq!(cert.catalog_id, exceptions::CatalogId::S4x(2));
            }
            _ => panic!("expected exception"),
        }

        // A 2-arc-strong semicomplete digraph on 5 vertices decomposes.
        let mut g = s4();
        g.add_vertex(4);
        for v in 0..4 {
            g.add_arc(4, v);
            g.add_arc(v, 4);
        }
        match sad_semicomplete_multi(&g).unwrap() {
            Outcome::Decomposition(dec) => assert!(verify_decomposition(&g, &dec)),
            _ => panic!("expected decomposition"),
        }

        // S4 plus parallel arcs on two opposite cycle arcs matches no
        // catalog graph and decomposes.
        let mut h = s4();
        h.add_arc(1, 2);
        h.add_arc(3, 0);
        match sad_semicomplete_multi(&h).unwrap() {
            Outcome::Decomposition(dec) => assert!(verify_decomposition(&h, &dec)),
            _ => panic!("expected decomposition"),
        }
        assert!(unpruned_sad(&h).is_some());
    }

    #[test]
    fn lemma6_extension() {
        // X = V: unchanged.
        let g = MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 1), (1, 3), (3, 0)],
        );
        let dec = search_sad(&g).unwrap();
        let x: BTreeSet<Vertex> = g.vertices().collect();
        let ext = extend_by_lemma6(&g, &x, &dec).unwrap();
        assert_eq!(ext, dec);

        // One outside vertex with two in/out neighbors inside X.
        let mut h = g.clone();
        h.add_vertex(4);
        h.add_arc(4, 0);
        h.add_arc(4, 1);
        h.add_arc(2, 4);
        h.add_arc(3, 4);
        let ext = extend_by_lemma6(&h, &x, &dec).unwrap();
        assert!(verify_decomposition(&h, &ext));
        // Restricted to X, each class matches the inner decomposition up to
        // the freely assigned remainder (there is none inside X here).
        for id in dec.a2.iter() {
            assert!(ext.a2.contains(id));
        }

        // Outside vertex with a single out-neighbor is rejected.
        let mut bad = g.clone();
        bad.add_vertex(4);
        bad.add_arc(4, 0);
        bad.add_arc(2, 4);
        bad.add_arc(3, 4);
        assert!(matches!(
            extend_by_lemma6(&bad, &x, &dec),
            Err(SearchError::Precondition(_))
        ));
    }
}

/// Visits every semicomplete digraph on `n` vertices: each unordered pair
/// gets one direction, the other, or both.
pub fn enumerate_semicomplete(n: usize, f: &mut dyn FnMut(&MultiDigraph)) {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let m = pairs.len();
    let mut states = vec![0u8; m];
    loop {
        let mut g = MultiDigraph::new();
        for v in 0..n {
            g.add_vertex(v);
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            match states[k] {
                0 => {
                    g.add_arc(i, j);
                }
                1 => {
                    g.add_arc(j, i);
                }
                _ => {
                    g.add_arc(i, j);
                    g.add_arc(j, i);
                }
            }
        }
        f(&g);
        // Advance base-3 counter.
        let mut k = 0;
        loop {
            if k == m {
                return;
            }
            states[k] += 1;
            if states[k] < 3 {
                break;
            }
            states[k] = 0;
            k += 1;
        }
    }
}
