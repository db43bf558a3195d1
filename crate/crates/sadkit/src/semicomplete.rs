//! Structure theory of semicomplete digraphs: split partitions, nice
//! decompositions and the natural ordering of backward arcs.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{acyclic_ordering, cut_arcs, is_strong, ArcId, MultiDigraph, Vertex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NiceError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
}

/// True iff every pair of distinct vertices is adjacent in some direction.
pub fn is_semicomplete(g: &MultiDigraph) -> bool {
    let vs: Vec<Vertex> = g.vertices().collect();
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            if !g.adjacent(vs[i], vs[j]) {
                return false;
            }
        }
    }
    true
}

/// A digraph together with a certified split partition `(V1, V2)`:
/// `V1` independent, `V2` inducing a semicomplete (multi)digraph, and no
/// parallel arcs between the two sides.
#[derive(Debug, Clone)]
pub struct SplitInstance {
    pub graph: MultiDigraph,
    pub v1: BTreeSet<Vertex>,
    pub v2: BTreeSet<Vertex>,
}

impl SplitInstance {
    pub fn induced_v2(&self) -> MultiDigraph {
        self.graph.induced(&self.v2)
    }

    pub fn reverse(&self) -> SplitInstance {
        SplitInstance { graph: self.graph.reverse(), v1: self.v1.clone(), v2: self.v2.clone() }
    }
}

/// Validates the split-partition invariants and returns the instance.
pub fn certify_split(
    graph: &MultiDigraph,
    v1: &BTreeSet<Vertex>,
    v2: &BTreeSet<Vertex>,
) -> Result<SplitInstance, SplitError> {
    if !v1.is_disjoint(v2) {
        return Err(SplitError::InvalidPartition("V1 and V2 intersect".into()));
    }
    let union: BTreeSet<Vertex> = v1.union(v2).copied().collect();
    if &union != graph.vertex_set() {
        return Err(SplitError::InvalidPartition("V1 ∪ V2 must cover all vertices".into()));
    }
    for (_, t, h) in graph.arcs() {
        if v1.contains(&t) && v1.contains(&h) {
            return Err(SplitError::InvalidPartition(format!(
                "V1 is not independent: arc {t}->{h}"
            )));
        }
    }
    for &x in v1 {
        for &v in v2 {
            if graph.arcs_between(x, v).len() > 1 || graph.arcs_between(v, x).len() > 1 {
                return Err(SplitError::InvalidPartition(format!(
                    "parallel arcs between V1 vertex {x} and V2 vertex {v}"
                )));
            }
        }
    }
    let inner = graph.induced(v2);
    if !is_semicomplete(&inner) {
        return Err(SplitError::InvalidPartition("V2 does not induce a semicomplete digraph".into()));
    }
    Ok(SplitInstance { graph: graph.clone(), v1: v1.clone(), v2: v2.clone() })
}

/// Repeatedly promotes any `V1` vertex adjacent to every `V2` vertex into
/// `V2` until the partition is maximal. Ties break on smallest vertex id.
pub fn maximal_split_partition(inst: &SplitInstance) -> SplitInstance {
    let mut v1 = inst.v1.clone();
    let mut v2 = inst.v2.clone();
    loop {
        let promote = v1
            .iter()
            .copied()
            .find(|&x| v2.iter().all(|&v| inst.graph.adjacent(x, v)));
        match promote {
            Some(x) => {
                v1.remove(&x);
                v2.insert(x);
            }
            None => break,
        }
    }
    SplitInstance { graph: inst.graph.clone(), v1, v2 }
}

/// Ordered blocks `U1..Ul` of a strong semicomplete digraph whose cut-arcs
/// are exactly the backward arcs, listed in natural order.
#[derive(Debug, Clone)]
pub struct NiceDecomposition {
    pub blocks: Vec<BTreeSet<Vertex>>,
    /// Backward arcs in natural order: strictly decreasing tail index.
    pub backward: Vec<ArcId>,
    index: BTreeMap<Vertex, usize>,
}

impl NiceDecomposition {
    /// 1-based block index of a vertex, following the paper's `ind`.
    pub fn ind(&self, v: Vertex) -> usize {
        self.index[&v] + 1
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn top_block(&self) -> &BTreeSet<Vertex> {
        self.blocks.last().expect("nonempty")
    }

    pub fn bottom_block(&self) -> &BTreeSet<Vertex> {
        self.blocks.first().expect("nonempty")
    }
}

/// The (unique) nice decomposition of a strong semicomplete digraph of order
/// at least 4: delete the cut-arcs, take strong components of the remainder
/// in acyclic order, then validate every defining property.
pub fn nice_decomposition(g: &MultiDigraph) -> Result<NiceDecomposition, NiceError> {
    if g.vertex_count() < 4 {
        return Err(NiceError::Precondition("order must be at least 4".into()));
    }
    if !is_semicomplete(g) {
        return Err(NiceError::Precondition("digraph must be semicomplete".into()));
    }
    if !is_strong(g) {
        return Err(NiceError::Precondition("digraph must be strong".into()));
    }
    let cuts = cut_arcs(g).expect("strong checked above");
    let keep: BTreeSet<ArcId> = g.arc_ids().filter(|id| !cuts.contains(id)).collect();
    let ord = acyclic_ordering(&g.spanning(&keep));
    let mut blocks = ord.components;

    // The ordering of the residual components needs both constraints: non-cut
    // arcs point forward, cut arcs point backward. Re-sort with both and
    // demand a unique topological order.
    blocks = order_blocks(g, &cuts, blocks)?;

    let mut index = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        for &v in b {
            index.insert(v, i);
        }
    }
    let mut backward: Vec<ArcId> = cuts.iter().copied().collect();
    backward.sort_by(|&a, &b| {
        let ta = index[&g.tail(a)];
        let tb = index[&g.tail(b)];
        tb.cmp(&ta)
    });
    let nd = NiceDecomposition { blocks, backward, index };
    validate_nice(g, &nd).map_err(NiceError::Internal)?;
    Ok(nd)
}

fn order_blocks(
    g: &MultiDigraph,
    cuts: &BTreeSet<ArcId>,
    blocks: Vec<BTreeSet<Vertex>>,
) -> Result<Vec<BTreeSet<Vertex>>, NiceError> {
    let k = blocks.len();
    let block_of = |v: Vertex| blocks.iter().position(|b| b.contains(&v)).unwrap();
    // precedence[i][j]: block i must come before block j.
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    let mut indeg = vec![0usize; k];
    let add = |succ: &mut Vec<BTreeSet<usize>>, indeg: &mut Vec<usize>, a: usize, b: usize| {
        if a != b && succ[a].insert(b) {
            indeg[b] += 1;
        }
    };
    for (id, t, h) in g.arcs() {
        let (bt, bh) = (block_of(t), block_of(h));
        if bt == bh {
            continue;
        }
        if cuts.contains(&id) {
            // Backward arc: head block strictly earlier.
            add(&mut succ, &mut indeg, bh, bt);
        } else {
            add(&mut succ, &mut indeg, bt, bh);
        }
    }
    let mut out = Vec::with_capacity(k);
    let mut placed = vec![false; k];
    for _ in 0..k {
        let sources: Vec<usize> =
            (0..k).filter(|&i| !placed[i] && indeg[i] == 0).collect();
        if sources.len() != 1 {
            return Err(NiceError::Internal(format!(
                "block ordering not unique ({} simultaneous sources)",
                sources.len()
            )));
        }
        let s = sources[0];
        placed[s] = true;
        for &j in &succ[s] {
            indeg[j] -= 1;
        }
        out.push(blocks[s].clone());
    }
    Ok(out)
}

/// Checks every defining property of a nice decomposition; returns the
/// violated property on failure.
pub fn validate_nice(g: &MultiDigraph, nd: &NiceDecomposition) -> Result<(), String> {
    let all: BTreeSet<Vertex> = nd.blocks.iter().flatten().copied().collect();
    if &all != g.vertex_set() {
        return Err("blocks do not partition the vertex set".into());
    }
    let total: usize = nd.blocks.iter().map(|b| b.len()).sum();
    if total != all.len() {
        return Err("blocks overlap".into());
    }
    for b in &nd.blocks {
        if !is_strong(&g.induced(b)) {
            return Err("a block does not induce a strong subdigraph".into());
        }
    }
    let cuts = cut_arcs(g).map_err(|_| "host not strong".to_string())?;
    let backward_set: BTreeSet<ArcId> = g
        .arcs()
        .filter(|&(_, t, h)| nd.ind(t) > nd.ind(h))
        .map(|(id, _, _)| id)
        .collect();
    if backward_set != cuts {
        return Err("cut-arc set differs from backward-arc set".into());
    }
    let listed: BTreeSet<ArcId> = nd.backward.iter().copied().collect();
    if listed != cuts {
        return Err("backward list does not match the cut-arc set".into());
    }
    // Natural ordering: strictly decreasing tail indices.
    for w in nd.backward.windows(2) {
        if nd.ind(g.tail(w[0])) <= nd.ind(g.tail(w[1])) {
            return Err("backward arcs not in natural order".into());
        }
    }
    // Index chain from the structure proposition.
    let r = nd.backward.len();
    if r > 0 {
        let x = |j: usize| nd.ind(g.tail(nd.backward[j]));
        let y = |j: usize| nd.ind(g.head(nd.backward[j]));
        if x(0) != nd.block_count() {
            return Err("first backward tail not in the top block".into());
        }
        if y(r - 1) != 1 {
            return Err("last backward head not in the bottom block".into());
        }
        for j in 0..r.saturating_sub(1) {
            if !(y(j + 1) < y(j) && y(j) <= x(j + 1) && x(j + 1) < x(j)) {
                return Err("index chain violated".into());
            }
        }
        for j in 0..r.saturating_sub(2) {
            if !(y(j + 1) <= x(j + 2) && x(j + 2) < y(j)) {
                return Err("second index chain violated".into());
            }
        }
    }
    Ok(())
}

/// Backward arcs of `nd` in natural order.
pub fn natural_backward_ordering(nd: &NiceDecomposition) -> Vec<ArcId> {
    nd.backward.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_k_arc_strong;

    fn s4() -> MultiDigraph {
        MultiDigraph::from_arcs(
            4,
            &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 3), (3, 1)],
        )
    }

    #[test]
    fn semicompleteness() {
        let single = MultiDigraph::from_arcs(1, &[]);
        assert!(is_semicomplete(&single));
        let two = MultiDigraph::from_arcs(2, &[]);
        assert!(!is_semicomplete(&two));
        assert!(is_semicomplete(&s4()));
    }

    #[test]
    fn certify_split_examples() {
        let g = s4();
        let empty = BTreeSet::new();
        let all: BTreeSet<_> = g.vertices().collect();
        assert!(certify_split(&g, &empty, &all).is_ok());

        // Two V1 vertices joined by an arc.
        let mut h = s4();
        h.add_vertex(4);
        h.add_vertex(5);
        h.add_arc(4, 5);
        for x in [4, 5] {
            h.add_arc(x, 0);
            h.add_arc(0, x);
        }
        let v1: BTreeSet<_> = [4, 5].into();
        let v2: BTreeSet<_> = [0, 1, 2, 3].into();
        assert!(matches!(certify_split(&h, &v1, &v2), Err(SplitError::InvalidPartition(_))));

        // Appendix-style gadget: base plus one V1 vertex with 2-cycles.
        let mut k = MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]);
        k.add_vertex(4);
        for v in [1, 3] {
            k.add_arc(4, v);
            k.add_arc(v, 4);
        }
        let v1: BTreeSet<_> = [4].into();
        let v2: BTreeSet<_> = [0, 1, 2, 3].into();
        assert!(certify_split(&k, &v1, &v2).is_ok());
    }

    #[test]
    fn certify_split_reversal_symmetric() {
        let mut g = MultiDigraph::from_arcs(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)]);
        g.add_vertex(3);
        g.add_arc(3, 0);
        g.add_arc(0, 3);
        g.add_arc(3, 1);
        g.add_arc(1, 3);
        let v1: BTreeSet<_> = [3].into();
        let v2: BTreeSet<_> = [0, 1, 2].into();
        assert_eq!(
            certify_split(&g, &v1, &v2).is_ok(),
            certify_split(&g.reverse(), &v1, &v2).is_ok()
        );
    }

    #[test]
    fn maximal_partition_promotes() {
        // |V2| = 2 and x forms 2-cycles to both: x is promoted.
        let mut g = MultiDigraph::from_arcs(2, &[(0, 1), (1, 0)]);
        g.add_vertex(2);
        for v in [0, 1] {
            g.add_arc(2, v);
            g.add_arc(v, 2);
        }
        let v1: BTreeSet<_> = [2].into();
        let v2: BTreeSet<_> = [0, 1].into();
        let inst = certify_split(&g, &v1, &v2).unwrap();
        let max = maximal_split_partition(&inst);
        assert!(max.v2.contains(&2));
        assert!(max.v1.is_empty());

        // Idempotent and never shrinks V2.
        let again = maximal_split_partition(&max);
        assert_eq!(again.v2, max.v2);

        // A V1 vertex missing one V2 neighbour stays put.
        let mut h = s4();
        h.add_vertex(4);
        for v in [0, 1, 2] {
            h.add_arc(4, v);
            h.add_arc(v, 4);
        }
        let inst = certify_split(&h, &[4].into(), &[0, 1, 2, 3].into()).unwrap();
        let max = maximal_split_partition(&inst);
        assert!(max.v1.contains(&4));
    }

    #[test]
    fn nice_decomposition_two_blocks() {
        // Two complete digraphs, complete forward arcs, one backward arc
        // 5 -> 0: blocks are internally 2-arc-strong so the only cut arc is
        // the backward one.
        let mut arcs = Vec::new();
        for group in [[0, 1, 2], [3, 4, 5]] {
            for &a in &group {
                for &b in &group {
                    if a != b {
                        arcs.push((a, b));
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 3..6 {
                arcs.push((a, b));
            }
        }
        arcs.push((5, 0));
        let g = MultiDigraph::from_arcs(6, &arcs);
        let nd = nice_decomposition(&g).unwrap();
        assert_eq!(nd.block_count(), 2);
        assert_eq!(nd.bottom_block(), &[0, 1, 2].into());
        assert_eq!(nd.top_block(), &[3, 4, 5].into());
        assert_eq!(nd.backward.len(), 1);
        assert_eq!(natural_backward_ordering(&nd), nd.backward);
        assert!(validate_nice(&g, &nd).is_ok());
    }

    #[test]
    fn nice_decomposition_backward_chain() {
        // Chained singleton blocks arise when 3-cycles leave in-degree-one
        // vertices; the validator pins the full index chain.
        let mut arcs = vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)];
        for a in 0..3 {
            for b in 3..6 {
                arcs.push((a, b));
            }
        }
        arcs.push((5, 0));
        let g = MultiDigraph::from_arcs(6, &arcs);
        let nd = nice_decomposition(&g).unwrap();
        assert!(validate_nice(&g, &nd).is_ok());
        assert_eq!(nd.backward.len(), 5);
        assert_eq!(nd.block_count(), 6);
    }

    #[test]
    fn nice_decomposition_single_block_when_two_arc_strong() {
        let mut g = s4();
        g.add_vertex(4);
        // Make a 2-arc-strong semicomplete digraph on 5 vertices.
        for v in 0..4 {
            g.add_arc(4, v);
            g.add_arc(v, 4);
        }
        assert!(is_k_arc_strong(&g, 2));
        let nd = nice_decomposition(&g).unwrap();
        assert_eq!(nd.block_count(), 1);
        assert!(nd.backward.is_empty());
    }

    #[test]
    fn nice_decomposition_chain_structure() {
        // Chain of singleton blocks: tournament 0 <- 1 <- 2 <- 3 forward
        // complete, with backward arcs forming the unique return structure.
        let g = MultiDigraph::from_arcs(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 0)]);
        let nd = nice_decomposition(&g).unwrap();
        assert!(validate_nice(&g, &nd).is_ok());
        // x1 in the top block, y_r in the bottom one.
        let top_tail = g.tail(nd.backward[0]);
        assert!(nd.top_block().contains(&top_tail));
        let last = *nd.backward.last().unwrap();
        assert!(nd.bottom_block().contains(&g.head(last)));
    }

    #[test]
    fn nice_rejects_small_or_nonstrong() {
        let g = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        assert!(matches!(nice_decomposition(&g), Err(NiceError::Precondition(_))));
        let h = MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (1, 3), (0, 2), (0, 3)]);
        assert!(matches!(nice_decomposition(&h), Err(NiceError::Precondition(_))));
    }
}
