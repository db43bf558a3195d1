//! The exception catalog: the seven semicomplete-multidigraph exceptions,
//! the appendix split-digraph families on four inner vertices, and the
//! certificate-producing matchers (catalog isomorphism and forbidden local
//! structures).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{acyclic_ordering, are_isomorphic, MultiDigraph, Vertex};
use crate::semicomplete::SplitInstance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogError {
    #[error("invalid dashed flags: {0}")]
    InvalidFlags(String),
}

/// Appendix gadget families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FamilyId {
    I,
    II,
    III,
    IV,
    V,
}

impl FamilyId {
    pub const ALL: [FamilyId; 5] = [FamilyId::I, FamilyId::II, FamilyId::III, FamilyId::IV, FamilyId::V];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::I => "i",
            FamilyId::II => "ii",
            FamilyId::III => "iii",
            FamilyId::IV => "iv",
            FamilyId::V => "v",
        }
    }

    pub fn has_dash(self) -> bool {
        matches!(self, FamilyId::IV | FamilyId::V)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CatalogId {
    S4,
    /// `S4,k` for k in 1..=6.
    S4x(u8),
    /// Single-gadget family on the S4-minus-one-arc base.
    Single(FamilyId),
    /// `(left)* x (right)` product on the double-chord base.
    Product(FamilyId, FamilyId),
    Lemma9,
    Lemma19,
}

impl std::fmt::Display for CatalogId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CatalogId::S4 => write!(f, "S4"),
            CatalogId::S4x(k) => write!(f, "S4,{k}"),
            CatalogId::Single(x) => write!(f, "single({})", x.name()),
            CatalogId::Product(l, r) => write!(f, "({})*x({})", l.name(), r.name()),
            CatalogId::Lemma9 => write!(f, "local-out-bottleneck"),
            CatalogId::Lemma19 => write!(f, "local-3-cycle-bottleneck"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CertDetail {
    /// Catalog vertex -> instance vertex bijection.
    Isomorphism(BTreeMap<Vertex, Vertex>),
    /// Ordered witness vertices of a forbidden local structure.
    Witness(Vec<Vertex>),
}

/// Machine-checkable evidence that an instance has no strong arc
/// decomposition.
#[derive(Debug, Clone)]
pub struct ExceptionCertificate {
    pub catalog_id: CatalogId,
    /// Matched only after reversing all arcs.
    pub reversed: bool,
    /// Which optional arcs of the appendix family are present
    /// (left gadget, right gadget).
    pub dashed: (bool, bool),
    pub detail: CertDetail,
}

fn s4_arcs() -> Vec<(Vertex, Vertex)> {
    vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 3), (3, 1)]
}

pub fn s4() -> MultiDigraph {
    MultiDigraph::from_arcs(4, &s4_arcs())
}

/// Base with one 2-cycle chord: S4 minus the arc v4 -> v2.
pub fn s4_minus_1() -> MultiDigraph {
    MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0), (1, 3)])
}

/// Base with plain chords only: the 4-cycle plus v1 -> v3 and v2 -> v4.
pub fn s4_minus_2() -> MultiDigraph {
    MultiDigraph::from_arcs(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)])
}

/// The seven 2-arc-strong semicomplete multidigraphs without a strong arc
/// decomposition.
pub fn figure1_graphs() -> Vec<(CatalogId, MultiDigraph)> {
    let mut out = vec![(CatalogId::S4, s4())];
    let extras: [&[(Vertex, Vertex)]; 6] = [
        &[(2, 0)],
        &[(0, 1)],
        &[(0, 2), (3, 1)],
        &[(0, 1), (0, 2)],
        &[(0, 1), (3, 1)],
        &[(0, 1), (0, 2), (3, 1)],
    ];
    for (k, extra) in extras.iter().enumerate() {
        let mut g = s4();
        for &(t, h) in extra.iter() {
            g.add_arc(t, h);
        }
        out.push((CatalogId::S4x(k as u8 + 1), g));
    }
    out
}

/// Gadget arcs for vertex `a` attached on the v2/v4 side (right gadget).
fn right_gadget(f: FamilyId, a: Vertex, dash: bool) -> Vec<(Vertex, Vertex)> {
    let mut arcs = match f {
        FamilyId::I => vec![(a, 1), (1, a), (a, 3), (3, a)],
        FamilyId::II => vec![(a, 1), (1, a), (3, a), (a, 0)],
        FamilyId::III => vec![(a, 1), (a, 3), (3, a), (0, a)],
        FamilyId::IV => vec![(a, 1), (1, a), (3, a), (a, 2)],
        FamilyId::V => vec![(a, 1), (a, 3), (3, a), (2, a)],
    };
    if dash {
        match f {
            FamilyId::IV => arcs.push((a, 3)),
            FamilyId::V => arcs.push((1, a)),
            _ => {}
        }
    }
    arcs
}

/// Gadget arcs for vertex `b` attached on the v1/v3 side (starred, left).
fn left_gadget(f: FamilyId, b: Vertex, dash: bool) -> Vec<(Vertex, Vertex)> {
    let mut arcs = match f {
        FamilyId::I => vec![(b, 0), (0, b), (b, 2), (2, b)],
        FamilyId::II => vec![(b, 0), (b, 2), (2, b), (3, b)],
        FamilyId::III => vec![(b, 0), (b, 3), (0, b), (2, b)],
        FamilyId::IV => vec![(b, 0), (b, 2), (2, b), (1, b)],
        FamilyId::V => vec![(b, 0), (0, b), (2, b), (b, 1)],
    };
    if dash {
        match f {
            FamilyId::IV => arcs.push((0, b)),
            FamilyId::V => arcs.push((b, 2)),
            _ => {}
        }
    }
    arcs
}

/// Single-gadget family: the one-chord base plus gadget `f` at vertex 4.
pub fn build_single_family(f: FamilyId, dash: bool) -> Result<SplitInstance, CatalogError> {
    if dash && !f.has_dash() {
        return Err(CatalogError::InvalidFlags(format!("family {} has no dashed arc", f.name())));
    }
    let mut g = s4_minus_1();
    g.add_vertex(4);
    for (t, h) in right_gadget(f, 4, dash) {
        g.add_arc(t, h);
    }
    let v1: BTreeSet<Vertex> = [4].into();
    let v2: BTreeSet<Vertex> = [0, 1, 2, 3].into();
    Ok(crate::semicomplete::certify_split(&g, &v1, &v2).expect("catalog data is well-formed"))
}

/// Appendix product `(left)* x (right)`: the chord base plus starred gadget
/// `left` at vertex 5 and plain gadget `right` at vertex 4.
pub fn build_appendix_family(
    left: FamilyId,
    right: FamilyId,
    dashed: (bool, bool),
) -> Result<SplitInstance, CatalogError> {
    if dashed.0 && !left.has_dash() {
        return Err(CatalogError::InvalidFlags(format!("family {}* has no dashed arc", left.name())));
    }
    if dashed.1 && !right.has_dash() {
        return Err(CatalogError::InvalidFlags(format!("family {} has no dashed arc", right.name())));
    }
    let mut g = s4_minus_2();
    g.add_vertex(4);
    g.add_vertex(5);
    for (t, h) in right_gadget(right, 4, dashed.1) {
        g.add_arc(t, h);
    }
    for (t, h) in left_gadget(left, 5, dashed.0) {
        g.add_arc(t, h);
    }
    let v1: BTreeSet<Vertex> = [4, 5].into();
    let v2: BTreeSet<Vertex> = [0, 1, 2, 3].into();
    Ok(crate::semicomplete::certify_split(&g, &v1, &v2).expect("catalog data is well-formed"))
}

/// The non-decomposable `(left)* x (right)` combinations.
pub const NON_DECOMPOSABLE_PRODUCTS: [(FamilyId, FamilyId); 11] = [
    (FamilyId::I, FamilyId::I),
    (FamilyId::I, FamilyId::II),
    (FamilyId::I, FamilyId::III),
    (FamilyId::I, FamilyId::IV),
    (FamilyId::II, FamilyId::II),
    (FamilyId::II, FamilyId::III),
    (FamilyId::II, FamilyId::IV),
    (FamilyId::III, FamilyId::III),
    (FamilyId::III, FamilyId::IV),
    (FamilyId::III, FamilyId::V),
    (FamilyId::IV, FamilyId::IV),
];

/// The decomposable `(left)* x (right)` combinations.
pub const DECOMPOSABLE_PRODUCTS: [(FamilyId, FamilyId); 4] = [
    (FamilyId::I, FamilyId::V),
    (FamilyId::II, FamilyId::V),
    (FamilyId::IV, FamilyId::V),
    (FamilyId::V, FamilyId::V),
];

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub id: CatalogId,
    pub dashed: (bool, bool),
    pub graph: MultiDigraph,
}

fn dash_options(f: FamilyId) -> Vec<bool> {
    if f.has_dash() {
        vec![false, true]
    } else {
        vec![false]
    }
}

/// Every non-decomposable catalog graph, each dashed-arc variant listed
/// separately.
pub fn catalog() -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for (id, graph) in figure1_graphs() {
        out.push(CatalogEntry { id, dashed: (false, false), graph });
    }
    for f in FamilyId::ALL {
        for dash in dash_options(f) {
            let inst = build_single_family(f, dash).unwrap();
            out.push(CatalogEntry {
                id: CatalogId::Single(f),
                dashed: (false, dash),
                graph: inst.graph,
            });
        }
    }
    for (l, r) in NON_DECOMPOSABLE_PRODUCTS {
        for dl in dash_options(l) {
            for dr in dash_options(r) {
                let inst = build_appendix_family(l, r, (dl, dr)).unwrap();
                out.push(CatalogEntry {
                    id: CatalogId::Product(l, r),
                    dashed: (dl, dr),
                    graph: inst.graph,
                });
            }
        }
    }
    out
}

/// Isomorphism check against the seven semicomplete-multidigraph exceptions
/// only.
pub fn match_figure1(d: &MultiDigraph) -> Option<ExceptionCertificate> {
    for (id, g) in figure1_graphs() {
        if let Some(map) = are_isomorphic(&g, d) {
            return Some(ExceptionCertificate {
                catalog_id: id,
                reversed: false,
                dashed: (false, false),
                detail: CertDetail::Isomorphism(map),
            });
        }
        if let Some(map) = are_isomorphic(&g.reverse(), d) {
            return Some(ExceptionCertificate {
                catalog_id: id,
                reversed: true,
                dashed: (false, false),
                detail: CertDetail::Isomorphism(map),
            });
        }
    }
    None
}

/// Scan for the degree-two out-bottleneck structure (both orientations).
/// The witness lists `(u, x1, x2, x3, v)`.
pub fn lemma9_witness(d: &MultiDigraph) -> Option<(Vec<Vertex>, bool)> {
    for (g, reversed) in [(d.clone(), false), (d.reverse(), true)] {
        if let Some(w) = lemma9_scan(&g) {
            return Some((w, reversed));
        }
    }
    None
}

fn lemma9_scan(g: &MultiDigraph) -> Option<Vec<Vertex>> {
    for u in g.vertices() {
        if g.out_degree(u) != 2 || g.in_degree(u) != 2 {
            continue;
        }
        let outs = g.out_neighbors(u);
        let ins = g.in_neighbors(u);
        if outs.len() != 2 || ins.len() != 2 {
            continue;
        }
        for &x1 in outs.intersection(&ins) {
            let x2 = *ins.iter().find(|&&z| z != x1)?;
            let x3 = *outs.iter().find(|&&z| z != x1)?;
            if x3 == x2 {
                continue;
            }
            if g.out_degree(x1) != 2 || g.out_neighbors(x1) != [x2, u].into() {
                continue;
            }
            if g.out_degree(x2) != 2 {
                continue;
            }
            let x2_outs = g.out_neighbors(x2);
            if !x2_outs.contains(&u) {
                continue;
            }
            let v = *x2_outs.iter().find(|&&z| z != u)?;
            if v == x1 || v == x2 || v == u {
                continue;
            }
            return Some(vec![u, x1, x2, x3, v]);
        }
    }
    None
}

/// Scan for the terminal-3-cycle bottleneck structure (both orientations).
/// The witness lists `(a, b, c, u, v)`.
pub fn lemma19_witness(s: &SplitInstance) -> Option<(Vec<Vertex>, bool)> {
    for (inst, reversed) in [(s.clone(), false), (s.reverse(), true)] {
        if let Some(w) = lemma19_scan(&inst) {
            return Some((w, reversed));
        }
    }
    None
}

fn lemma19_scan(s: &SplitInstance) -> Option<Vec<Vertex>> {
    let inner = s.induced_v2();
    if inner.vertex_count() < 4 {
        return None;
    }
    let ord = acyclic_ordering(&inner);
    if ord.components.len() < 2 {
        return None;
    }
    let cp = ord.terminal().clone();
    if cp.len() != 3 {
        return None;
    }
    let cyc = inner.induced(&cp);
    if cyc.arc_count() != 3 {
        return None;
    }
    let verts: Vec<Vertex> = cp.iter().copied().collect();
    // The three arcs must form a directed triangle.
    let first = verts[0];
    let mut order = vec![first];
    let mut at = first;
    for _ in 0..2 {
        let nbrs = cyc.out_neighbors(at);
        if nbrs.len() != 1 {
            return None;
        }
        at = *nbrs.iter().next().unwrap();
        order.push(at);
    }
    if !cyc.out_neighbors(at).contains(&first) {
        return None;
    }
    let g = &s.graph;
    for rot in 0..3 {
        let a = order[rot % 3];
        let b = order[(rot + 1) % 3];
        let c = order[(rot + 2) % 3];
        // N+(a) = {u, b}
        if g.out_degree(a) != 2 {
            continue;
        }
        let a_outs = g.out_neighbors(a);
        if !a_outs.contains(&b) {
            continue;
        }
        let Some(&u) = a_outs.iter().find(|&&z| z != b) else { continue };
        if !s.v1.contains(&u) {
            continue;
        }
        // N+(c) = {v, a}
        if g.out_degree(c) != 2 {
            continue;
        }
        let c_outs = g.out_neighbors(c);
        if !c_outs.contains(&a) {
            continue;
        }
        let Some(&v) = c_outs.iter().find(|&&z| z != a) else { continue };
        if !s.v1.contains(&v) || v == u {
            continue;
        }
        // N+(b) = {u, v, c}
        if g.out_degree(b) != 3 || g.out_neighbors(b) != [u, v, c].into() {
            continue;
        }
        // N+(u) = {a, u+}, u+ in V2 \ Cp
        if g.out_degree(u) != 2 {
            continue;
        }
        let u_outs = g.out_neighbors(u);
        if !u_outs.contains(&a) {
            continue;
        }
        let Some(&up) = u_outs.iter().find(|&&z| z != a) else { continue };
        if !s.v2.contains(&up) || cp.contains(&up) {
            continue;
        }
        // N+(v) = {b, v+}, v+ in V2 \ Cp
        if g.out_degree(v) != 2 {
            continue;
        }
        let v_outs = g.out_neighbors(v);
        if !v_outs.contains(&b) {
            continue;
        }
        let Some(&vp) = v_outs.iter().find(|&&z| z != b) else { continue };
        if !s.v2.contains(&vp) || cp.contains(&vp) {
            continue;
        }
        // N-(u) = {a, b}, N-(v) = {b, c}
        if g.in_degree(u) != 2 || g.in_neighbors(u) != [a, b].into() {
            continue;
        }
        if g.in_degree(v) != 2 || g.in_neighbors(v) != [b, c].into() {
            continue;
        }
        return Some(vec![a, b, c, u, v]);
    }
    None
}

/// Certificate for the first catalog entry isomorphic to `d`, trying both
/// orientations, else a local-structure witness. Whole-graph isomorphism
/// takes precedence so catalog-sized instances get the catalog id; local
/// witnesses cover everything larger.
pub fn match_exception(d: &MultiDigraph) -> Option<ExceptionCertificate> {
    if let Some(cert) = match_catalog(d) {
        return Some(cert);
    }
    if let Some((w, reversed)) = lemma9_witness(d) {
        return Some(ExceptionCertificate {
            catalog_id: CatalogId::Lemma9,
            reversed,
            dashed: (false, false),
            detail: CertDetail::Witness(w),
        });
    }
    None
}

fn match_catalog(d: &MultiDigraph) -> Option<ExceptionCertificate> {
    for entry in catalog() {
        if let Some(map) = are_isomorphic(&entry.graph, d) {
            return Some(ExceptionCertificate {
                catalog_id: entry.id,
                reversed: false,
                dashed: entry.dashed,
                detail: CertDetail::Isomorphism(map),
            });
        }
        if let Some(map) = are_isomorphic(&entry.graph.reverse(), d) {
            return Some(ExceptionCertificate {
                catalog_id: entry.id,
                reversed: true,
                dashed: entry.dashed,
                detail: CertDetail::Isomorphism(map),
            });
        }
    }
    None
}

/// Like [`match_exception`] but can also see the split partition, enabling
/// the terminal-3-cycle scan.
pub fn match_exception_split(s: &SplitInstance) -> Option<ExceptionCertificate> {
    if let Some(cert) = match_catalog(&s.graph) {
        return Some(cert);
    }
    if let Some((w, reversed)) = lemma9_witness(&s.graph) {
        return Some(ExceptionCertificate {
            catalog_id: CatalogId::Lemma9,
            reversed,
            dashed: (false, false),
            detail: CertDetail::Witness(w),
        });
    }
    if let Some((w, reversed)) = lemma19_witness(s) {
        return Some(ExceptionCertificate {
            catalog_id: CatalogId::Lemma19,
            reversed,
            dashed: (false, false),
            detail: CertDetail::Witness(w),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_k_arc_strong;

    #[test]
    fn figure1_shapes() {
        let graphs = figure1_graphs();
        assert_eq!(graphs.len(), 7);
        assert_eq!(graphs[0].1.arc_count(), 8);
        assert_eq!(graphs[1].1.arc_count(), 9);
        // Every entry is 2-arc-strong.
        for (id, g) in &graphs {
            assert!(is_k_arc_strong(g, 2), "{id:?} must be 2-arc-strong");
        }
    }

    #[test]
    fn catalog_members_are_two_arc_strong() {
        for entry in catalog() {
            assert!(
                is_k_arc_strong(&entry.graph, 2),
                "{} {:?} must be 2-arc-strong",
                entry.id,
                entry.dashed
            );
        }
    }

    #[test]
    fn match_is_isomorphism_invariant() {
        let g = s4();
        let map: BTreeMap<Vertex, Vertex> = [(0, 2), (1, 3), (2, 0), (3, 1)].into();
        let relabeled = g.relabel(&map);
        let cert = match_exception(&relabeled).unwrap();
        assert_eq!(cert.catalog_id, CatalogId::S4);
    }

    #[test]
    fn catalog_closed_under_reversal() {
        for entry in catalog() {
            let r = entry.graph.reverse();
            assert!(match_exception(&r).is_some(), "reverse of {} must match", entry.id);
        }
    }

    #[test]
    fn dashed_flags_are_validated() {
        assert!(build_single_family(FamilyId::I, true).is_err());
        assert!(build_single_family(FamilyId::IV, true).is_ok());
        assert!(build_appendix_family(FamilyId::I, FamilyId::V, (true, false)).is_err());
        assert!(build_appendix_family(FamilyId::IV, FamilyId::V, (true, true)).is_ok());
    }

    #[test]
    fn product_instances_are_split_and_strong() {
        for (l, r) in NON_DECOMPOSABLE_PRODUCTS.iter().chain(DECOMPOSABLE_PRODUCTS.iter()) {
            let inst = build_appendix_family(*l, *r, (false, false)).unwrap();
            assert!(is_k_arc_strong(&inst.graph, 2), "({:?})*x({:?})", l, r);
        }
    }

    #[test]
    fn lemma9_structure_detected() {
        // Build the illustrated structure: x1 <-> u 2-cycle, x2 -> u,
        // u -> x3, x1 -> x2, x2 -> v, embedded in a host that completes
        // degrees elsewhere.
        let mut g = MultiDigraph::new();
        for v in 0..6 {
            g.add_vertex(v);
        }
        // u = 0, x1 = 1, x2 = 2, x3 = 3, v = 4; 5 pads the host.
        g.add_arc(0, 1);
        g.add_arc(1, 0);
        g.add_arc(2, 0);
        g.add_arc(0, 3);
        g.add_arc(1, 2);
        g.add_arc(2, 4);
        // Pad so other vertices are not degree-starved.
        for &(t, h) in &[(3, 4), (4, 3), (3, 5), (5, 3), (4, 5), (5, 4), (5, 1), (4, 1), (3, 2), (5, 2)] {
            g.add_arc(t, h);
        }
        let (w, reversed) = lemma9_witness(&g).expect("structure present");
        assert!(!reversed);
        assert_eq!(w[0], 0);
        assert_eq!(w[1], 1);

        // A 3-arc-strong graph has no degree-2 vertex, so no witness.
        let mut k = MultiDigraph::new();
        for v in 0..4 {
            k.add_vertex(v);
        }
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    k.add_arc(u, v);
                }
            }
        }
        assert!(lemma9_witness(&k).is_none());
    }

    #[test]
    fn single_families_match_catalog() {
        for f in FamilyId::ALL {
            let inst = build_single_family(f, false).unwrap();
            let cert = match_exception(&inst.graph).expect("family is in the catalog");
            match cert.catalog_id {
                CatalogId::Single(_) | CatalogId::Lemma9 => {}
                other => panic!("unexpected id {other}"),
            }
        }
    }
}
