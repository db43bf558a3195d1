//! The split-digraph machinery: splitting-off and lifting, feasible sets,
//! critical path pairs, pending-decomposition extension, the small-`V2`
//! solvers and the top-level orchestrator.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::exceptions;
use crate::graph::{
    arc_disjoint_xy_paths, is_k_arc_strong, is_strong, ArcId, DiPath, MultiDigraph, Vertex,
};
use crate::search::{
    brute_force_sad, extend_by_lemma6, oracle_budget, sad_semicomplete_multi,
    verify_decomposition, Decomposition, Outcome, SearchError,
};
use crate::semicomplete::{maximal_split_partition, nice_decomposition, SplitInstance};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("input is not 2-arc-strong")]
    NotTwoArcStrong,
    #[error("instance needs the oracle but exceeds its budget ({0} arcs > {1})")]
    BudgetExceeded(usize, usize),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("internal invariant failure: {0}")]
    Internal(String),
}

impl From<SearchError> for SolveError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::BudgetExceeded(a, b) => SolveError::BudgetExceeded(a, b),
            SearchError::Precondition(m) => SolveError::Precondition(m),
            SearchError::Internal(m) => SolveError::Internal(m),
        }
    }
}

/// Map from each splitting-arc id back to the crossing pair it replaced.
pub type LiftMap = BTreeMap<ArcId, (ArcId, ArcId)>;

/// Splits off every `V1` vertex on `p`: the crossing pair `(ut, tv)` at `t`
/// becomes a fresh arc `uv`. Returns the modified graph and the lift map.
pub fn split_off_path(
    s: &SplitInstance,
    p: &DiPath,
) -> Result<(MultiDigraph, LiftMap), SolveError> {
    let g = &s.graph;
    let vs = p.vertices(g);
    if vs.is_empty() || s.v1.contains(&vs[0]) || s.v1.contains(vs.last().unwrap()) {
        return Err(SolveError::Precondition("path endpoints must lie in V2".into()));
    }
    let mut out = g.clone();
    let mut lift = LiftMap::new();
    for (i, &v) in vs.iter().enumerate() {
        if !s.v1.contains(&v) {
            continue;
        }
        let in_arc = p.arcs[i - 1];
        let out_arc = p.arcs[i];
        let u = g.tail(in_arc);
        let w = g.head(out_arc);
        out.remove_arc(in_arc);
        out.remove_arc(out_arc);
        let id = out.add_arc(u, w);
        lift.insert(id, (in_arc, out_arc));
    }
    Ok((out, lift))
}

/// Replaces every splitting arc of each class by its original crossing pair.
pub fn lift(dec: &Decomposition, lift_map: &LiftMap) -> (BTreeSet<ArcId>, BTreeSet<ArcId>) {
    let expand = |class: &BTreeSet<ArcId>| -> BTreeSet<ArcId> {
        let mut out = BTreeSet::new();
        for &a in class {
            match lift_map.get(&a) {
                Some(&(i, o)) => {
                    out.insert(i);
                    out.insert(o);
                }
                None => {
                    out.insert(a);
                }
            }
        }
        out
    };
    (expand(&dec.a1), expand(&dec.a2))
}

/// A set of crossing-arc pairs, one in-arc plus one out-arc per distinct
/// `V1` vertex.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeasibleSet {
    pairs: BTreeMap<Vertex, (ArcId, ArcId)>,
}

impl FeasibleSet {
    pub fn new() -> Self {
        FeasibleSet { pairs: BTreeMap::new() }
    }

    pub fn v1_vertices(&self) -> BTreeSet<Vertex> {
        self.pairs.keys().copied().collect()
    }

    pub fn contains_vertex(&self, f: Vertex) -> bool {
        self.pairs.contains_key(&f)
    }

    pub fn pair(&self, f: Vertex) -> Option<(ArcId, ArcId)> {
        self.pairs.get(&f).copied()
    }

    pub fn arc_ids(&self) -> BTreeSet<ArcId> {
        self.pairs.values().flat_map(|&(i, o)| [i, o]).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Vertex, (ArcId, ArcId))> + '_ {
        self.pairs.iter().map(|(&f, &p)| (f, p))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn set_pair(&mut self, f: Vertex, in_arc: ArcId, out_arc: ArcId) {
        self.pairs.insert(f, (in_arc, out_arc));
    }

    pub fn validate(&self, s: &SplitInstance) -> Result<(), String> {
        for (&f, &(i, o)) in &self.pairs {
            if !s.v1.contains(&f) {
                return Err(format!("feasible-set vertex {f} not in V1"));
            }
            let (vi, fi) = s.graph.endpoints(i).ok_or("missing in-arc")?;
            let (fo, ui) = s.graph.endpoints(o).ok_or("missing out-arc")?;
            if fi != f || fo != f {
                return Err(format!("pair at {f} does not share its middle vertex"));
            }
            if !s.v2.contains(&vi) || !s.v2.contains(&ui) {
                return Err(format!("pair at {f} does not cross into V2"));
            }
            if vi == ui {
                return Err(format!("pair at {f} would split into a loop"));
            }
        }
        Ok(())
    }
}

/// Rebuild operation on a feasible set: route `f` through the in-arc from
/// `e`, keeping or repairing its out-arc. `preferred_out` pins the out-arc
/// choice when a fresh pair is created (defaults to the smallest
/// out-neighbor other than `e`).
pub fn rebuild_feasible(
    s: &SplitInstance,
    b: &FeasibleSet,
    f: Vertex,
    e: Vertex,
    preferred_out: Option<ArcId>,
) -> Result<FeasibleSet, SolveError> {
    let g = &s.graph;
    if !s.v1.contains(&f) {
        return Err(SolveError::Precondition(format!("{f} is not a V1 vertex")));
    }
    let in_arc = g
        .find_arc(e, f)
        .ok_or_else(|| SolveError::Precondition(format!("no arc {e}->{f}")))?;
    let pick_out = |avoid: Vertex| -> Result<ArcId, SolveError> {
        if let Some(p) = preferred_out {
            let (t, h) = g.endpoints(p).unwrap();
            if t == f && h != avoid {
                return Ok(p);
            }
        }
        g.out_arcs(f)
            .into_iter()
            .find(|&a| g.head(a) != avoid)
            .ok_or_else(|| {
                SolveError::Internal(format!(
                    "no alternative out-neighbor at {f}; impossible for 2-arc-strong hosts"
                ))
            })
    };
    let mut out = b.clone();
    match b.pair(f) {
        None => {
            let o = pick_out(e)?;
            out.set_pair(f, in_arc, o);
        }
        Some((_, old_out)) => {
            let o = if g.head(old_out) == e { pick_out(e)? } else { old_out };
            out.set_pair(f, in_arc, o);
        }
    }
    Ok(out)
}

/// A critical `(X, Y)` path pair with its boundary bookkeeping.
#[derive(Debug, Clone)]
pub struct CriticalPairState {
    pub b: FeasibleSet,
    pub q1: DiPath,
    pub q2: DiPath,
    /// Crossing arcs used by the pair, minus the feasible set.
    pub boundary: BTreeSet<ArcId>,
    /// V1 vertices incident to boundary arcs.
    pub v_boundary: BTreeSet<Vertex>,
}

fn is_crossing(s: &SplitInstance, g: &MultiDigraph, id: ArcId) -> bool {
    let (t, h) = g.endpoints(id).unwrap();
    s.v1.contains(&t) != s.v1.contains(&h)
}

fn crossing_arcs_of(s: &SplitInstance, g: &MultiDigraph, p: &DiPath) -> BTreeSet<ArcId> {
    p.arcs.iter().copied().filter(|&a| is_crossing(s, g, a)).collect()
}

fn boundary_of(
    s: &SplitInstance,
    g: &MultiDigraph,
    b: &FeasibleSet,
    q1: &DiPath,
    q2: &DiPath,
) -> BTreeSet<ArcId> {
    let b_arcs = b.arc_ids();
    let mut out = crossing_arcs_of(s, g, q1);
    out.extend(crossing_arcs_of(s, g, q2));
    out.retain(|a| !b_arcs.contains(a));
    out
}

fn v1_of_arcs(s: &SplitInstance, g: &MultiDigraph, arcs: &BTreeSet<ArcId>) -> BTreeSet<Vertex> {
    arcs.iter()
        .flat_map(|&a| {
            let (t, h) = g.endpoints(a).unwrap();
            [t, h]
        })
        .filter(|v| s.v1.contains(v))
        .collect()
}

/// Arc filter enforcing the side condition: `V1(B)` vertices are traversable
/// only through their feasible pair, and (when given) other crossing arcs
/// are limited to a whitelist.
fn allowed_filter<'a>(
    s: &'a SplitInstance,
    g: &'a MultiDigraph,
    b: &FeasibleSet,
    whitelist: Option<&'a BTreeSet<ArcId>>,
) -> impl Fn(ArcId) -> bool + 'a {
    let b_arcs = b.arc_ids();
    let b_verts = b.v1_vertices();
    move |id: ArcId| {
        let (t, h) = match g.endpoints(id) {
            Some(e) => e,
            None => return false,
        };
        let crossing = s.v1.contains(&t) != s.v1.contains(&h);
        if !crossing {
            return true;
        }
        let f = if s.v1.contains(&t) { t } else { h };
        if b_verts.contains(&f) {
            return b_arcs.contains(&id);
        }
        match whitelist {
            Some(w) => w.contains(&id) || b_arcs.contains(&id),
            None => true,
        }
    }
}

fn pair_is_valid(
    s: &SplitInstance,
    g: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    b: &FeasibleSet,
    q1: &DiPath,
    q2: &DiPath,
) -> Result<(), String> {
    for (name, p) in [("q1", q1), ("q2", q2)] {
        if !p.is_valid(g) {
            return Err(format!("{name} is not a simple path"));
        }
        let vs = p.vertices(g);
        if !x.contains(&vs[0]) {
            return Err(format!("{name} does not start in X"));
        }
        if !y.contains(vs.last().unwrap()) {
            return Err(format!("{name} does not end in Y"));
        }
        for v in &vs[1..vs.len() - 1] {
            if x.contains(v) || y.contains(v) {
                return Err(format!("{name} meets X ∪ Y internally"));
            }
        }
    }
    let a1: BTreeSet<ArcId> = q1.arcs.iter().copied().collect();
    if q2.arcs.iter().any(|a| a1.contains(a)) {
        return Err("paths share an arc".into());
    }
    // Side condition: V1(B) path vertices use exactly their pair.
    let b_arcs = b.arc_ids();
    for p in [q1, q2] {
        for &a in &p.arcs {
            if is_crossing(s, g, a) && !b_arcs.contains(&a) {
                let (t, h) = g.endpoints(a).unwrap();
                let f = if s.v1.contains(&t) { t } else { h };
                if b.contains_vertex(f) {
                    return Err(format!("boundary arc at feasible vertex {f}"));
                }
            }
        }
    }
    Ok(())
}

/// Computes an `(X, Y)_B`-critical path pair. Starting from `seed` (or a
/// fresh flow pair), repeatedly tries to exclude one boundary arc; the
/// replacement pair may only use the feasible set plus the shrunken
/// boundary, so the boundary is inclusion-minimal at the fixpoint.
pub fn critical_pair(
    s: &SplitInstance,
    host: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    b: &FeasibleSet,
    seed: Option<(DiPath, DiPath)>,
) -> Result<CriticalPairState, SolveError> {
    let (mut q1, mut q2) = match seed {
        Some((a, b_)) => (a, b_),
        None => {
            let filter = allowed_filter(s, host, b, None);
            arc_disjoint_xy_paths(host, x, y, &filter).ok_or_else(|| {
                SolveError::Internal("no (X,Y) path pair; host should be 2-arc-strong".into())
            })?
        }
    };
    pair_is_valid(s, host, x, y, b, &q1, &q2).map_err(SolveError::Internal)?;
    let mut boundary = boundary_of(s, host, b, &q1, &q2);
    'outer: loop {
        for &excl in boundary.iter() {
            let mut white = boundary.clone();
            white.remove(&excl);
            let filter = allowed_filter(s, host, b, Some(&white));
            if let Some((n1, n2)) = arc_disjoint_xy_paths(host, x, y, &filter) {
                let nb = boundary_of(s, host, b, &n1, &n2);
                debug_assert!(nb.is_subset(&white));
                q1 = n1;
                q2 = n2;
                boundary = nb;
                continue 'outer;
            }
        }
        break;
    }
    let v_boundary = v1_of_arcs(s, host, &boundary);
    if !v_boundary.is_disjoint(&b.v1_vertices()) {
        return Err(SolveError::Internal("boundary meets V1(B)".into()));
    }
    Ok(CriticalPairState { b: b.clone(), q1, q2, boundary, v_boundary })
}

/// Completes `fixed` to an arc-disjoint pair within the current allowed
/// arcs, then re-criticalizes.
pub fn complete_pair(
    s: &SplitInstance,
    host: &MultiDigraph,
    x: &BTreeSet<Vertex>,
    y: &BTreeSet<Vertex>,
    b: &FeasibleSet,
    whitelist: Option<&BTreeSet<ArcId>>,
    fixed: &DiPath,
) -> Option<(DiPath, DiPath)> {
    let base = allowed_filter(s, host, b, whitelist);
    let fixed_arcs: BTreeSet<ArcId> = fixed.arcs.iter().copied().collect();
    let filter = |id: ArcId| base(id) && !fixed_arcs.contains(&id);
    let paths = crate::graph::xy_paths(host, x, y, &filter, 1);
    let mate = paths.into_iter().next()?;
    Some((fixed.clone(), DiPath { arcs: mate }))
}

/// The multidigraph on `V2` obtained by adding the split images of the
/// feasible set and of each path's boundary arcs to the inner digraph.
pub fn build_gbar(
    s: &SplitInstance,
    host: &MultiDigraph,
    st: &CriticalPairState,
) -> Result<(MultiDigraph, LiftMap), SolveError> {
    let mut g = host.induced(&s.v2);
    let mut lift_map = LiftMap::new();
    for (_, (i, o)) in st.b.pairs() {
        let u = host.tail(i);
        let w = host.head(o);
        let id = g.add_arc(u, w);
        lift_map.insert(id, (i, o));
    }
    let b_arcs = st.b.arc_ids();
    for p in [&st.q1, &st.q2] {
        let vs = p.vertices(host);
        for (i, &v) in vs.iter().enumerate() {
            if !s.v1.contains(&v) {
                continue;
            }
            let in_arc = p.arcs[i - 1];
            let out_arc = p.arcs[i];
            if b_arcs.contains(&in_arc) {
                if !b_arcs.contains(&out_arc) {
                    return Err(SolveError::Internal(format!(
                        "mixed feasible/boundary crossing at {v}"
                    )));
                }
                continue;
            }
            if b_arcs.contains(&out_arc) {
                return Err(SolveError::Internal(format!("mixed crossing at {v}")));
            }
            let u = host.tail(in_arc);
            let w = host.head(out_arc);
            let id = g.add_arc(u, w);
            lift_map.insert(id, (in_arc, out_arc));
        }
    }
    Ok((g, lift_map))
}

/// Two arc-disjoint strong subdigraphs covering `V2` whose private vertices
/// keep a spare in- and out-arc in the host.
#[derive(Debug, Clone)]
pub struct PendingDecomposition {
    pub verts1: BTreeSet<Vertex>,
    pub arcs1: BTreeSet<ArcId>,
    pub verts2: BTreeSet<Vertex>,
    pub arcs2: BTreeSet<ArcId>,
}

impl PendingDecomposition {
    /// Builds the two sides from arc sets; vertex sets are V2 plus every
    /// endpoint of the class.
    pub fn from_arcs(s: &SplitInstance, a1: &BTreeSet<ArcId>, a2: &BTreeSet<ArcId>) -> Self {
        let collect = |ids: &BTreeSet<ArcId>| -> BTreeSet<Vertex> {
            let mut vs: BTreeSet<Vertex> = s.v2.clone();
            for &a in ids {
                let (t, h) = s.graph.endpoints(a).unwrap();
                vs.insert(t);
                vs.insert(h);
            }
            vs
        };
        PendingDecomposition {
            verts1: collect(a1),
            arcs1: a1.clone(),
            verts2: collect(a2),
            arcs2: a2.clone(),
        }
    }

    pub fn validate(&self, s: &SplitInstance) -> Result<(), String> {
        if !self.arcs1.is_disjoint(&self.arcs2) {
            return Err("classes share an arc".into());
        }
        for (vs, arcs, name) in
            [(&self.verts1, &self.arcs1, "d1"), (&self.verts2, &self.arcs2, "d2")]
        {
            if !s.v2.is_subset(vs) {
                return Err(format!("{name} does not cover V2"));
            }
            for &a in arcs.iter() {
                let (t, h) = s
                    .graph
                    .endpoints(a)
                    .ok_or_else(|| format!("{name} uses an arc outside the host"))?;
                if !vs.contains(&t) || !vs.contains(&h) {
                    return Err(format!("{name} arc endpoints outside its vertex set"));
                }
            }
            if !is_strong(&s.graph.sub(vs, arcs)) {
                return Err(format!("{name} is not strong"));
            }
        }
        // Private vertices keep a spare in- and out-arc beyond their side.
        for (mine_vs, mine_arcs, other_vs) in [
            (&self.verts1, &self.arcs1, &self.verts2),
            (&self.verts2, &self.arcs2, &self.verts1),
        ] {
            for &t in mine_vs.difference(other_vs) {
                let spare_in = s.graph.in_arcs(t).into_iter().any(|a| !mine_arcs.contains(&a));
                let spare_out = s.graph.out_arcs(t).into_iter().any(|a| !mine_arcs.contains(&a));
                if !spare_in || !spare_out {
                    return Err(format!("private vertex {t} lacks spare arcs"));
                }
            }
        }
        Ok(())
    }
}

/// Extends a pending decomposition to a full verified strong arc
/// decomposition of the host.
pub fn pending_extend(
    s: &SplitInstance,
    pd: &PendingDecomposition,
) -> Result<Decomposition, SolveError> {
    pd.validate(s).map_err(|m| SolveError::Precondition(format!("invalid pending: {m}")))?;
    let g = &s.graph;
    let mut a1 = pd.arcs1.clone();
    let mut a2 = pd.arcs2.clone();
    // Each private vertex of one side gets hooked into the other side.
    for (private, own, other) in [
        (pd.verts1.difference(&pd.verts2), &pd.arcs1, &mut a2),
        (pd.verts2.difference(&pd.verts1), &pd.arcs2, &mut a1),
    ] {
        for &t in private {
            let in_arc = g
                .in_arcs(t)
                .into_iter()
                .find(|a| !own.contains(a))
                .ok_or_else(|| SolveError::Internal(format!("no spare in-arc at {t}")))?;
            let out_arc = g
                .out_arcs(t)
                .into_iter()
                .find(|a| !own.contains(a))
                .ok_or_else(|| SolveError::Internal(format!("no spare out-arc at {t}")))?;
            other.insert(in_arc);
            other.insert(out_arc);
        }
    }
    let g_verts: BTreeSet<Vertex> = pd.verts1.union(&pd.verts2).copied().collect();
    // Remaining arcs inside the union go to class 1.
    for (id, t, h) in g.arcs() {
        if g_verts.contains(&t) && g_verts.contains(&h) && !a1.contains(&id) && !a2.contains(&id) {
            a1.insert(id);
        }
    }
    let inner_dec = Decomposition { a1, a2 };
    let dec = extend_by_lemma6(g, &g_verts, &inner_dec)?;
    if !verify_decomposition(g, &dec) {
        return Err(SolveError::Internal("pending extension failed verification".into()));
    }
    Ok(dec)
}

/// The `(X, Y)` target pair the procedures aim at.
pub fn targets_xy(s: &SplitInstance) -> Result<(BTreeSet<Vertex>, BTreeSet<Vertex>), SolveError> {
    let inner = s.induced_v2();
    if is_strong(&inner) {
        if is_k_arc_strong(&inner, 2) {
            return Err(SolveError::Precondition(
                "inner digraph 2-arc-strong: targets are unused".into(),
            ));
        }
        if s.v2.len() < 4 {
            return Err(SolveError::Precondition("strong case needs |V2| >= 4".into()));
        }
        let nd = nice_decomposition(&inner)
            .map_err(|e| SolveError::Internal(format!("nice decomposition: {e}")))?;
        return Ok((nd.top_block().clone(), nd.bottom_block().clone()));
    }
    let ord = crate::graph::acyclic_ordering(&inner);
    let cp = ord.terminal().clone();
    let c1 = ord.initial().clone();
    let x = if cp.len() >= 4 {
        let nd = nice_decomposition(&inner.induced(&cp))
            .map_err(|e| SolveError::Internal(format!("nice decomposition of Cp: {e}")))?;
        nd.top_block().clone()
    } else {
        cp
    };
    let y = if c1.len() >= 4 {
        let nd = nice_decomposition(&inner.induced(&c1))
            .map_err(|e| SolveError::Internal(format!("nice decomposition of C1: {e}")))?;
        nd.bottom_block().clone()
    } else {
        c1
    };
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Small-|V2| solvers
// ---------------------------------------------------------------------------

/// |V2| <= 3: split off both crossing pairs at a V1 vertex, recurse, then
/// redistribute the two splitting arcs.
fn solve_v2_le3(s: &SplitInstance) -> Result<Decomposition, SolveError> {
    if s.v1.is_empty() {
        return match sad_semicomplete_multi(&s.graph)? {
            Outcome::Decomposition(d) => Ok(d),
            Outcome::Exception(_) => Err(SolveError::Internal(
                "no exceptions exist on at most 3 vertices".into(),
            )),
        };
    }
    let g = &s.graph;
    let x = *s.v1.iter().next().unwrap();
    let nbrs: BTreeSet<Vertex> =
        s.v2.iter().copied().filter(|&v| g.adjacent(x, v)).collect();
    if nbrs.len() != 2 {
        return Err(SolveError::Internal(format!(
            "maximal small instance: V1 vertex {x} must have exactly 2 neighbors"
        )));
    }
    let mut it = nbrs.iter();
    let (u, v) = (*it.next().unwrap(), *it.next().unwrap());
    let need = |t: Vertex, h: Vertex| {
        g.find_arc(t, h)
            .ok_or_else(|| SolveError::Internal(format!("expected arc {t}->{h}")))
    };
    let (ux, xu, vx, xv) = (need(u, x)?, need(x, u)?, need(v, x)?, need(x, v)?);

    let mut reduced = g.clone();
    for a in [ux, xu, vx, xv] {
        reduced.remove_arc(a);
    }
    let t_uv = reduced.add_arc(u, v);
    let t_vu = reduced.add_arc(v, u);
    reduced.remove_vertex(x);
    if !is_k_arc_strong(&reduced, 2) {
        return Err(SolveError::Internal("reduced small instance lost 2-arc-strongness".into()));
    }
    let mut v1 = s.v1.clone();
    v1.remove(&x);
    let sub = SplitInstance { graph: reduced.clone(), v1, v2: s.v2.clone() };
    let inner = solve_v2_le3(&sub)?;

    let mut a1 = inner.a1.clone();
    let mut a2 = inner.a2.clone();
    // Get the two splitting arcs into different classes: move the one with a
    // real parallel copy, swapping the copy back if needed.
    if a1.contains(&t_uv) == a1.contains(&t_vu) {
        let mut fixed = false;
        for (tilde, (tt, hh)) in [(t_uv, (u, v)), (t_vu, (v, u))] {
            let real = reduced
                .arcs_between(tt, hh)
                .into_iter()
                .find(|&a| a != t_uv && a != t_vu);
            let Some(real_arc) = real else { continue };
            let (mut n1, mut n2) = (a1.clone(), a2.clone());
            {
                let (src, dst) =
                    if n1.contains(&tilde) { (&mut n1, &mut n2) } else { (&mut n2, &mut n1) };
                src.remove(&tilde);
                dst.insert(tilde);
                if dst.contains(&real_arc) {
                    dst.remove(&real_arc);
                    src.insert(real_arc);
                }
            }
            if is_strong(&reduced.spanning(&n1)) && is_strong(&reduced.spanning(&n2)) {
                a1 = n1;
                a2 = n2;
                fixed = true;
                break;
            }
        }
        if !fixed {
            return Err(SolveError::Internal(
                "could not redistribute splitting arcs in the small case".into(),
            ));
        }
    }
    // Lift: the class holding u->v gains (ux, xv), the other (vx, xu).
    for class in [&mut a1, &mut a2] {
        if class.remove(&t_uv) {
            class.insert(ux);
            class.insert(xv);
        }
        if class.remove(&t_vu) {
            class.insert(vx);
            class.insert(xu);
        }
    }
    let dec = Decomposition { a1, a2 };
    if !verify_decomposition(g, &dec) {
        return Err(SolveError::Internal("small-case lift failed verification".into()));
    }
    Ok(dec)
}

/// One candidate splitting set for the four-vertex constructive engine.
struct SplitChoice {
    /// (in-arc, out-arc) pairs at one V1 vertex, 1 or 2 of them.
    pairs: Vec<(ArcId, ArcId)>,
}

fn split_choices(s: &SplitInstance, x: Vertex) -> Vec<SplitChoice> {
    let g = &s.graph;
    let ins = g.in_arcs(x);
    let outs = g.out_arcs(x);
    let inner = s.induced_v2();
    let mut singles = Vec::new();
    for &i in &ins {
        for &o in &outs {
            if g.tail(i) != g.head(o) {
                singles.push((i, o));
            }
        }
    }
    let mut out: Vec<SplitChoice> = singles.iter().map(|&p| SplitChoice { pairs: vec![p] }).collect();
    for (ai, &p1) in singles.iter().enumerate() {
        for &p2 in singles.iter().skip(ai + 1) {
            let arcs: BTreeSet<ArcId> = [p1.0, p1.1, p2.0, p2.1].into();
            if arcs.len() != 4 {
                continue;
            }
            // One of the two images needs a real parallel arc inside V2.
            let has_parallel = |p: (ArcId, ArcId)| {
                inner.has_arc(g.tail(p.0), g.head(p.1))
            };
            if has_parallel(p1) || has_parallel(p2) {
                out.push(SplitChoice { pairs: vec![p1, p2] });
            }
        }
    }
    out
}

/// Constructive engine for |V2| = 4: find a small per-vertex splitting set
/// `C` such that `D[V2] + C` decomposes, redistribute the parallel images,
/// lift and extend.
fn lemma20_search(s: &SplitInstance, max_support: usize) -> Result<Option<Decomposition>, SolveError> {
    let g = &s.graph;
    let v1: Vec<Vertex> = s.v1.iter().copied().collect();
    let inner = s.induced_v2();
    let supports = subsets_up_to(&v1, max_support.min(v1.len()));
    for support in supports {
        if support.is_empty() {
            continue;
        }
        let per_vertex: Vec<Vec<SplitChoice>> =
            support.iter().map(|&x| split_choices(s, x)).collect();
        if per_vertex.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut idx = vec![0usize; support.len()];
        loop {
            // Assemble G' = inner + split images for this choice.
            let mut gp = inner.clone();
            let mut image_info: Vec<(Vertex, Vec<(ArcId, (ArcId, ArcId))>)> = Vec::new();
            for (k, &x) in support.iter().enumerate() {
                let choice = &per_vertex[k][idx[k]];
                let mut imgs = Vec::new();
                for &(i, o) in &choice.pairs {
                    let id = gp.add_arc(g.tail(i), g.head(o));
                    imgs.push((id, (i, o)));
                }
                image_info.push((x, imgs));
            }
            if is_k_arc_strong(&gp, 2) {
                if let Some(dec) = crate::search::search_sad(&gp) {
                    if let Some(full) = lemma20_finish(s, &gp, dec, &image_info)? {
                        return Ok(Some(full));
                    }
                }
            }
            // Advance the multi-index.
            let mut k = 0;
            loop {
                if k == support.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < per_vertex[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == support.len() {
                break;
            }
        }
    }
    Ok(None)
}

fn lemma20_finish(
    s: &SplitInstance,
    gp: &MultiDigraph,
    dec: Decomposition,
    image_info: &[(Vertex, Vec<(ArcId, (ArcId, ArcId))>)],
) -> Result<Option<Decomposition>, SolveError> {
    let mut a1 = dec.a1.clone();
    let mut a2 = dec.a2.clone();
    let inner = s.induced_v2();
    // Per-vertex redistribution: two images at the same vertex must end up
    // in different classes; the image with a real parallel arc moves.
    for (_, imgs) in image_info {
        if imgs.len() != 2 {
            continue;
        }
        let (id_a, _) = imgs[0];
        let (id_b, _) = imgs[1];
        if a1.contains(&id_a) != a1.contains(&id_b) {
            continue;
        }
        let mut fixed = false;
        for tilde in [id_a, id_b] {
            let (t, h) = gp.endpoints(tilde).unwrap();
            let Some(real) = inner.find_arc(t, h) else { continue };
            let (mut n1, mut n2) = (a1.clone(), a2.clone());
            {
                let (src, dst) =
                    if n1.contains(&tilde) { (&mut n1, &mut n2) } else { (&mut n2, &mut n1) };
                src.remove(&tilde);
                dst.insert(tilde);
                if dst.contains(&real) {
                    dst.remove(&real);
                    src.insert(real);
                }
            }
            if is_strong(&gp.spanning(&n1)) && is_strong(&gp.spanning(&n2)) {
                a1 = n1;
                a2 = n2;
                fixed = true;
                break;
            }
        }
        if !fixed {
            return Ok(None);
        }
    }
    // Lift every image.
    let mut lift_map = LiftMap::new();
    for (_, imgs) in image_info {
        for &(id, pair) in imgs {
            lift_map.insert(id, pair);
        }
    }
    let (l1, l2) = lift(&Decomposition { a1, a2 }, &lift_map);
    let pd = PendingDecomposition::from_arcs(s, &l1, &l2);
    if pd.validate(s).is_err() {
        return Ok(None);
    }
    match pending_extend(s, &pd) {
        Ok(dec) => Ok(Some(dec)),
        Err(_) => Ok(None),
    }
}

fn subsets_up_to(v: &[Vertex], k: usize) -> Vec<Vec<Vertex>> {
    let mut out: Vec<Vec<Vertex>> = Vec::new();
    for size in 1..=k {
        let mut cur = Vec::new();
        fn rec(v: &[Vertex], size: usize, at: usize, cur: &mut Vec<Vertex>, out: &mut Vec<Vec<Vertex>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            if at == v.len() {
                return;
            }
            cur.push(v[at]);
            rec(v, size, at + 1, cur, out);
            cur.pop();
            rec(v, size, at + 1, cur, out);
        }
        rec(v, size, 0, &mut cur, &mut out);
    }
    out
}

/// Solver for maximal instances with |V2| <= 4.
pub fn solve_small_v2(s: &SplitInstance, report: &mut SolveReport) -> Result<Outcome, SolveError> {
    if !is_k_arc_strong(&s.graph, 2) {
        return Err(SolveError::Precondition("solve_small_v2 needs a 2-arc-strong host".into()));
    }
    if s.v2.len() > 4 {
        return Err(SolveError::Precondition("solve_small_v2 handles |V2| <= 4".into()));
    }
    if s.v2.len() <= 3 {
        if !s.v1.is_empty() && s.v2.len() < 3 {
            return Err(SolveError::Internal(
                "maximal 2-arc-strong instances with V1 nonempty have |V2| >= 3".into(),
            ));
        }
        report.trace.push(format!("small case |V2|={} via splitting recursion", s.v2.len()));
        return Ok(Outcome::Decomposition(solve_v2_le3(s)?));
    }
    // |V2| = 4.
    if let Some(cert) = exceptions::match_exception_split(s) {
        report.trace.push(format!("matched exception {}", cert.catalog_id));
        return Ok(Outcome::Exception(cert));
    }
    if s.v1.is_empty() {
        report.trace.push("V1 empty: semicomplete decomposer".into());
        return Ok(sad_semicomplete_multi(&s.graph)?);
    }
    let inner = s.induced_v2();
    if is_k_arc_strong(&inner, 2) {
        match sad_semicomplete_multi(&inner)? {
            Outcome::Decomposition(dec) => {
                report.trace.push("inner digraph 2-arc-strong: extend by degree lemma".into());
                return Ok(Outcome::Decomposition(extend_by_lemma6(&s.graph, &s.v2, &dec)?));
            }
            Outcome::Exception(_) => {
                // Inner graph is the 8-arc exception; the splitting engine
                // below covers this.
            }
        }
    }
    report.trace.push("constructive splitting-set search".into());
    if let Some(dec) = lemma20_search(s, 3)? {
        return Ok(Outcome::Decomposition(dec));
    }
    // The general machinery also covers |V2| = 4 once the catalog has been
    // ruled out.
    report.trace.push("splitting-set search exhausted; general pipeline".into());
    match crate::procedures::run_pipeline(s, report) {
        Ok(pd) => return Ok(Outcome::Decomposition(pending_extend(s, &pd)?)),
        Err(e) => {
            report.trace.push(format!("pipeline on |V2|=4 failed: {e}; oracle"));
        }
    }
    report.fallback = true;
    let budget = oracle_budget();
    match brute_force_sad(&s.graph, budget)? {
        Some(dec) => Ok(Outcome::Decomposition(dec)),
        None => Err(SolveError::Internal(
            "oracle found no decomposition but no exception matched".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Orchestrator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub fallback: bool,
    pub trace: Vec<String>,
}

/// Decides and constructs: either a verified decomposition of the instance
/// or an exception certificate.
pub fn solve_split(s: &SplitInstance) -> Result<(Outcome, SolveReport), SolveError> {
    let mut report = SolveReport::default();
    if s.graph.vertex_count() == 0 {
        return Err(SolveError::Precondition("empty graph".into()));
    }
    if s.graph.vertex_count() == 1 {
        report.trace.push("single vertex: empty decomposition".into());
        return Ok((
            Outcome::Decomposition(Decomposition { a1: BTreeSet::new(), a2: BTreeSet::new() }),
            report,
        ));
    }
    if !is_k_arc_strong(&s.graph, 2) {
        return Err(SolveError::NotTwoArcStrong);
    }
    let s = maximal_split_partition(s);
    report.trace.push(format!("maximal partition |V1|={} |V2|={}", s.v1.len(), s.v2.len()));

    if s.v1.is_empty() {
        report.trace.push("semicomplete host".into());
        return Ok((sad_semicomplete_multi(&s.graph)?, report));
    }
    if s.v2.len() <= 4 {
        let out = solve_small_v2(&s, &mut report)?;
        return Ok((out, report));
    }
    // |V2| >= 5.
    if let Some(cert) = exceptions::match_exception_split(&s) {
        report.trace.push(format!("local counterexample {}", cert.catalog_id));
        return Ok((Outcome::Exception(cert), report));
    }
    let inner = s.induced_v2();
    if is_k_arc_strong(&inner, 2) {
        report.trace.push("inner digraph 2-arc-strong: extend by degree lemma".into());
        match sad_semicomplete_multi(&inner)? {
            Outcome::Decomposition(dec) => {
                let full = extend_by_lemma6(&s.graph, &s.v2, &dec)?;
                return Ok((Outcome::Decomposition(full), report));
            }
            Outcome::Exception(_) => {
                return Err(SolveError::Internal(
                    "semicomplete exception impossible for |V2| >= 5".into(),
                ))
            }
        }
    }
    match crate::procedures::run_pipeline(&s, &mut report) {
        Ok(pd) => {
            let dec = pending_extend(&s, &pd)?;
            report.trace.push("pipeline decomposition verified".into());
            Ok((Outcome::Decomposition(dec), report))
        }
        Err(e) => {
            report.trace.push(format!("pipeline internal failure: {e}; oracle fallback"));
            report.fallback = true;
            let budget = oracle_budget();
            match brute_force_sad(&s.graph, budget)? {
                Some(dec) => Ok((Outcome::Decomposition(dec), report)),
                None => Err(SolveError::Internal(format!(
                    "pipeline failed and oracle found no decomposition: {e}"
                ))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semicomplete::certify_split;

    fn small_split() -> SplitInstance {
        // V2 = triangle with 2-cycles, V1 = one vertex with 2-cycles to two
        // of them.
        let mut g = MultiDigraph::from_arcs(3, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)]);
        g.add_vertex(3);
        for v in [0, 1] {
            g.add_arc(3, v);
            g.add_arc(v, 3);
        }
        certify_split(&g, &[3].into(), &[0, 1, 2].into()).unwrap()
    }

    #[test]
    fn split_off_along_path() {
        let s = small_split();
        let g = &s.graph;
        // Path 0 -> 3 -> 1 through the V1 vertex.
        let a = g.find_arc(0, 3).unwrap();
        let b = g.find_arc(3, 1).unwrap();
        let p = DiPath { arcs: vec![a, b] };
        let (out, liftmap) = split_off_path(&s, &p).unwrap();
        assert_eq!(liftmap.len(), 1);
        assert_eq!(out.arc_count(), g.arc_count() - 1);
        let (&tilde, &(i, o)) = liftmap.iter().next().unwrap();
        assert_eq!((i, o), (a, b));
        assert_eq!(out.endpoints(tilde), Some((0, 1)));

        // A path fully inside V2 changes nothing.
        let c = g.find_arc(0, 1).unwrap();
        let p2 = DiPath { arcs: vec![c] };
        let (out2, lm2) = split_off_path(&s, &p2).unwrap();
        assert!(lm2.is_empty());
        assert_eq!(out2.arc_count(), g.arc_count());
    }

    #[test]
    fn split_then_lift_is_identity() {
        let s = small_split();
        let g = &s.graph;
        let a = g.find_arc(0, 3).unwrap();
        let b = g.find_arc(3, 1).unwrap();
        let p = DiPath { arcs: vec![a, b] };
        let (out, liftmap) = split_off_path(&s, &p).unwrap();
        let all: BTreeSet<ArcId> = out.arc_ids().collect();
        let dec = Decomposition { a1: all.clone(), a2: BTreeSet::new() };
        let (l1, _) = lift(&dec, &liftmap);
        let orig: BTreeSet<ArcId> = g.arc_ids().collect();
        assert_eq!(l1, orig);
    }

    #[test]
    fn critical_pair_trivial_cases() {
        let s = small_split();
        // X = {0}, Y = {2}: two arc-disjoint paths inside V2 exist, so the
        // boundary is empty.
        let st = critical_pair(&s, &s.graph, &[0].into(), &[2].into(), &FeasibleSet::new(), None)
            .unwrap();
        assert!(st.boundary.is_empty());
        assert!(st.v_boundary.is_empty());
    }

    #[test]
    fn critical_pair_minimality_is_certified() {
        // Force crossing arcs: V2 path structure demands V1 routing.
        let mut g = MultiDigraph::new();
        for v in 0..6 {
            g.add_vertex(v);
        }
        // V2 = {0,1,2,3}: semicomplete with forward arcs only.
        for (t, h) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            g.add_arc(t, h);
        }
        // V1 = {4,5} routing back from 3 to 0.
        for x in [4, 5] {
            g.add_arc(3, x);
            g.add_arc(x, 0);
            g.add_arc(x, 1);
            g.add_arc(2, x);
        }
        let s = certify_split(&g, &[4, 5].into(), &[0, 1, 2, 3].into()).unwrap();
        let st = critical_pair(&s, &s.graph, &[3].into(), &[0].into(), &FeasibleSet::new(), None)
            .unwrap();
        // Both paths must cross V1, boundary nonempty and minimal.
        assert!(!st.boundary.is_empty());
        for &a in &st.boundary {
            let mut white = st.boundary.clone();
            white.remove(&a);
            let filter = allowed_filter(&s, &s.graph, &st.b, Some(&white));
            assert!(
                arc_disjoint_xy_paths(&s.graph, &[3].into(), &[0].into(), &filter).is_none(),
                "boundary not minimal at {a:?}"
            );
        }
    }

    #[test]
    fn rebuild_feasible_cases() {
        let mut g = MultiDigraph::new();
        for v in 0..5 {
            g.add_vertex(v);
        }
        // V2 = {0,1,2,3} complete; V1 = {4} with two in- and two
        // out-neighbors.
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    g.add_arc(u, v);
                }
            }
        }
        g.add_arc(0, 4);
        g.add_arc(1, 4);
        g.add_arc(4, 2);
        g.add_arc(4, 3);
        let s = certify_split(&g, &[4].into(), &[0, 1, 2, 3].into()).unwrap();

        // Fresh vertex: in from 0, smallest out.
        let b = rebuild_feasible(&s, &FeasibleSet::new(), 4, 0, None).unwrap();
        let (i, o) = b.pair(4).unwrap();
        assert_eq!(g.endpoints(i), Some((0, 4)));
        assert_eq!(g.endpoints(o), Some((4, 2)));

        // Present vertex, out-arc kept when it does not point at e.
        let b2 = rebuild_feasible(&s, &b, 4, 1, None).unwrap();
        let (i2, o2) = b2.pair(4).unwrap();
        assert_eq!(g.endpoints(i2), Some((1, 4)));
        assert_eq!(o2, o);
    }

    #[test]
    fn pending_extend_roundtrip() {
        // Two disjoint strong arc sets over V2 plus a private V1 vertex on
        // one side.
        let mut g = MultiDigraph::new();
        for v in 0..5 {
            g.add_vertex(v);
        }
        // V2 = {0,1,2,3}: two arc-disjoint hamiltonian cycles.
        let c1 = [(0, 1), (1, 2), (2, 3), (3, 0)].map(|(t, h)| g.add_arc(t, h));
        let c2 = [(0, 2), (2, 1), (1, 3), (3, 0)].map(|(t, h)| {
            if (t, h) == (3, 0) {
                g.add_arc(3, 0)
            } else {
                g.add_arc(t, h)
            }
        });
        // V1 = {4}: 2 ins and 2 outs.
        let i1 = g.add_arc(0, 4);
        let _i2 = g.add_arc(1, 4);
        let o1 = g.add_arc(4, 2);
        let _o2 = g.add_arc(4, 3);
        let s = certify_split(&g, &[4].into(), &[0, 1, 2, 3].into()).unwrap();
        assert!(is_k_arc_strong(&g, 2));

        let mut arcs1: BTreeSet<ArcId> = c1.into();
        arcs1.insert(i1);
        arcs1.insert(o1);
        // Class 1 must stay strong: 0->4->2 plus the cycle works.
        let arcs2: BTreeSet<ArcId> = c2.into();
        let pd = PendingDecomposition::from_arcs(&s, &arcs1, &arcs2);
        pd.validate(&s).unwrap();
        let dec = pending_extend(&s, &pd).unwrap();
        assert!(verify_decomposition(&g, &dec));
    }

    #[test]
    fn solve_trivial_and_small() {
        let s = small_split();
        let (out, _) = solve_split(&s).unwrap();
        match out {
            Outcome::Decomposition(dec) => assert!(verify_decomposition(&s.graph, &dec)),
            _ => panic!("small instance must decompose"),
        }
    }

    #[test]
    fn solve_s4_exception() {
        let g = exceptions::s4();
        let s = certify_split(&g, &BTreeSet::new(), &g.vertex_set().clone()).unwrap();
        let (out, _) = solve_split(&s).unwrap();
        match out {
            Outcome::Exception(cert) => assert_eq!(cert.catalog_id, exceptions::CatalogId::S4),
            _ => panic!("S4 must be an exception"),
        }
    }

    #[test]
    fn solve_rejects_weak_instances() {
        let g = MultiDigraph::from_arcs(3, &[(0, 1), (1, 2), (2, 0)]);
        let s = certify_split(&g, &BTreeSet::new(), &g.vertex_set().clone()).unwrap();
        assert!(matches!(solve_split(&s), Err(SolveError::NotTwoArcStrong)));
    }
}
