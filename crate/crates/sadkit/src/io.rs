//! Persistence formats (edge lists, DOT, JSON certificates) and the seeded
//! instance generator.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::exceptions::CertDetail;
use crate::graph::{is_k_arc_strong, ArcId, MultiDigraph, Vertex};
use crate::search::{Decomposition, Outcome};
use crate::semicomplete::{certify_split, maximal_split_partition, SplitInstance};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {0}: {1}")]
    Parse(usize, String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error("generation failed after {0} repair attempts")]
    GenerationFailed(usize),
}

/// A parsed edge-list document: a bare multidigraph or a split instance.
#[derive(Debug, Clone)]
pub enum Parsed {
    Graph(MultiDigraph),
    Split(SplitInstance),
}

impl Parsed {
    pub fn graph(&self) -> &MultiDigraph {
        match self {
            Parsed::Graph(g) => g,
            Parsed::Split(s) => &s.graph,
        }
    }
}

/// Parses the edge-list format: a vertex count, an optional `v1:` partition
/// line, then `tail head [multiplicity]` lines. Vertices are 1-based
/// externally.
pub fn parse_edge_list(text: &str) -> Result<Parsed, IoError> {
    let mut n: Option<usize> = None;
    let mut v1_ext: Option<Vec<usize>> = None;
    let mut arcs: Vec<(usize, usize, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if n.is_none() {
            n = Some(
                line.parse::<usize>()
                    .map_err(|_| IoError::Parse(lineno, "expected vertex count".into()))?,
            );
            continue;
        }
        if let Some(rest) = line.strip_prefix("v1:") {
            let mut ids = Vec::new();
            for tok in rest.split_whitespace() {
                ids.push(
                    tok.parse::<usize>()
                        .map_err(|_| IoError::Parse(lineno, format!("bad vertex id {tok}")))?,
                );
            }
            v1_ext = Some(ids);
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(IoError::Parse(lineno, "expected 'tail head [multiplicity]'".into()));
        }
        let t = toks[0]
            .parse::<usize>()
            .map_err(|_| IoError::Parse(lineno, format!("bad tail {}", toks[0])))?;
        let h = toks[1]
            .parse::<usize>()
            .map_err(|_| IoError::Parse(lineno, format!("bad head {}", toks[1])))?;
        let m = if toks.len() == 3 {
            toks[2]
                .parse::<usize>()
                .map_err(|_| IoError::Parse(lineno, format!("bad multiplicity {}", toks[2])))?
        } else {
            1
        };
        let nn = n.unwrap();
        if t == 0 || h == 0 || t > nn || h > nn {
            return Err(IoError::Parse(lineno, format!("vertex out of range in '{line}'")));
        }
        if t == h {
            return Err(IoError::Parse(lineno, "loops are not allowed".into()));
        }
        if m == 0 {
            return Err(IoError::Parse(lineno, "multiplicity must be positive".into()));
        }
        arcs.push((t, h, m));
    }
    let n = n.ok_or_else(|| IoError::Parse(0, "empty document".into()))?;
    let mut g = MultiDigraph::new();
    for v in 0..n {
        g.add_vertex(v);
    }
    for (t, h, m) in arcs {
        for _ in 0..m {
            g.add_arc(t - 1, h - 1);
        }
    }
    match v1_ext {
        None => Ok(Parsed::Graph(g)),
        Some(ids) => {
            let v1: BTreeSet<Vertex> = ids.iter().map(|&v| v - 1).collect();
            let v2: BTreeSet<Vertex> = (0..n).filter(|v| !v1.contains(v)).collect();
            let inst = certify_split(&g, &v1, &v2)
                .map_err(|e| IoError::InvalidPartition(e.to_string()))?;
            Ok(Parsed::Split(inst))
        }
    }
}

/// Canonical edge-list emission: sorted arcs with merged multiplicities.
pub fn emit_edge_list(p: &Parsed) -> String {
    let g = p.graph();
    let n = g.vertex_count();
    let mut out = String::new();
    out.push_str(&format!("{n}\n"));
    if let Parsed::Split(s) = p {
        let ids: Vec<String> = s.v1.iter().map(|v| (v + 1).to_string()).collect();
        out.push_str(&format!("v1: {}\n", ids.join(" ")));
    }
    let mut mult: BTreeMap<(Vertex, Vertex), usize> = BTreeMap::new();
    for (_, t, h) in g.arcs() {
        *mult.entry((t, h)).or_insert(0) += 1;
    }
    for ((t, h), m) in mult {
        if m == 1 {
            out.push_str(&format!("{} {}\n", t + 1, h + 1));
        } else {
            out.push_str(&format!("{} {} {}\n", t + 1, h + 1, m));
        }
    }
    out
}

/// DOT output; decomposition classes get distinct styles.
pub fn emit_dot(g: &MultiDigraph, highlight: Option<&Decomposition>) -> String {
    let mut out = String::from("digraph d {\n");
    for v in g.vertices() {
        out.push_str(&format!("  v{};\n", v + 1));
    }
    for (id, t, h) in g.arcs() {
        let attr = match highlight {
            Some(dec) if dec.a1.contains(&id) => " [color=red, style=solid]",
            Some(dec) if dec.a2.contains(&id) => " [color=blue, style=dashed]",
            _ => "",
        };
        out.push_str(&format!("  v{} -> v{}{};\n", t + 1, h + 1, attr));
    }
    out.push_str("}\n");
    out
}

/// Copy-index of an arc among the parallel arcs sharing its endpoints,
/// ordered by arc id.
fn copy_index(g: &MultiDigraph, id: ArcId) -> usize {
    let (t, h) = g.endpoints(id).unwrap();
    g.arcs_between(t, h).iter().position(|&a| a == id).unwrap()
}

fn arc_from_triple(g: &MultiDigraph, t: usize, h: usize, c: usize) -> Option<ArcId> {
    if t == 0 || h == 0 {
        return None;
    }
    g.arcs_between(t - 1, h - 1).get(c).copied()
}

/// JSON certificate for an outcome; arc ids are (tail, head, copy-index)
/// triples so certificates survive reparsing.
pub fn outcome_to_json(g: &MultiDigraph, out: &Outcome) -> Value {
    match out {
        Outcome::Decomposition(dec) => {
            let enc = |class: &BTreeSet<ArcId>| -> Vec<Value> {
                class
                    .iter()
                    .map(|&a| {
                        let (t, h) = g.endpoints(a).unwrap();
                        json!([t + 1, h + 1, copy_index(g, a)])
                    })
                    .collect()
            };
            json!({ "kind": "decomposition", "a1": enc(&dec.a1), "a2": enc(&dec.a2) })
        }
        Outcome::Exception(cert) => {
            let mut obj = json!({
                "kind": "exception",
                "catalog": cert.catalog_id.to_string(),
                "reversed": cert.reversed,
                "dashed": [cert.dashed.0, cert.dashed.1],
            });
            match &cert.detail {
                CertDetail::Isomorphism(map) => {
                    obj["mapping"] = map
                        .iter()
                        .map(|(&a, &b)| json!([a + 1, b + 1]))
                        .collect::<Vec<Value>>()
                        .into();
                }
                CertDetail::Witness(w) => {
                    obj["witness"] =
                        w.iter().map(|&v| json!(v + 1)).collect::<Vec<Value>>().into();
                }
            }
            obj
        }
    }
}

/// Reads a decomposition certificate back against a host graph.
pub fn decomposition_from_json(g: &MultiDigraph, v: &Value) -> Result<Decomposition, IoError> {
    if v["kind"] != "decomposition" {
        return Err(IoError::Certificate("kind must be 'decomposition'".into()));
    }
    let read = |key: &str| -> Result<BTreeSet<ArcId>, IoError> {
        let arr = v[key]
            .as_array()
            .ok_or_else(|| IoError::Certificate(format!("{key} must be an array")))?;
        let mut out = BTreeSet::new();
        for item in arr {
            let triple = item
                .as_array()
                .filter(|a| a.len() == 3)
                .ok_or_else(|| IoError::Certificate("arc must be [tail, head, copy]".into()))?;
            let t = triple[0].as_u64().unwrap_or(0) as usize;
            let h = triple[1].as_u64().unwrap_or(0) as usize;
            let c = triple[2].as_u64().unwrap_or(0) as usize;
            let id = arc_from_triple(g, t, h, c)
                .ok_or_else(|| IoError::Certificate(format!("arc ({t},{h},{c}) not in host")))?;
            if !out.insert(id) {
                return Err(IoError::Certificate(format!("duplicate arc ({t},{h},{c})")));
            }
        }
        Ok(out)
    };
    Ok(Decomposition { a1: read("a1")?, a2: read("a2")? })
}

/// Seeded construction of 2-arc-strong split instances.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub v1_size: usize,
    pub v2_size: usize,
    pub crossing_density: f64,
    pub seed: u64,
    pub require_two_arc_strong: bool,
    pub require_maximal_partition: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            v1_size: 2,
            v2_size: 5,
            crossing_density: 0.5,
            seed: 0,
            require_two_arc_strong: true,
            require_maximal_partition: false,
        }
    }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<SplitInstance, IoError> {
    assert!(cfg.v2_size >= 2, "v2_size must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n2 = cfg.v2_size;
    let n1 = cfg.v1_size;
    let mut g = MultiDigraph::new();
    for v in 0..n2 + n1 {
        g.add_vertex(v);
    }
    let v2: BTreeSet<Vertex> = (0..n2).collect();
    let v1: BTreeSet<Vertex> = (n2..n2 + n1).collect();
    // Random semicomplete inner digraph.
    for i in 0..n2 {
        for j in i + 1..n2 {
            match rng.gen_range(0..3) {
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
    }
    // Random crossing arcs.
    for &x in &v1 {
        for &v in &v2 {
            if rng.gen_bool(cfg.crossing_density / 2.0) {
                g.add_arc(x, v);
            }
            if rng.gen_bool(cfg.crossing_density / 2.0) {
                g.add_arc(v, x);
            }
        }
    }
    // Every V1 vertex needs out- and in-degree 2.
    for &x in &v1 {
        let mut outs: Vec<Vertex> = g.out_neighbors(x).into_iter().collect();
        while outs.len() < 2 {
            let v = rng.gen_range(0..n2);
            if !outs.contains(&v) {
                g.add_arc(x, v);
                outs.push(v);
            }
        }
        let mut ins: Vec<Vertex> = g.in_neighbors(x).into_iter().collect();
        while ins.len() < 2 {
            let v = rng.gen_range(0..n2);
            if !ins.contains(&v) {
                g.add_arc(v, x);
                ins.push(v);
            }
        }
    }
    // Repair toward 2-arc-strongness, preferring crossing arcs.
    let limit = 400;
    let mut attempts = 0;
    while cfg.require_two_arc_strong && !is_k_arc_strong(&g, 2) {
        attempts += 1;
        if attempts > limit {
            return Err(IoError::GenerationFailed(limit));
        }
        let mut added = false;
        if n1 > 0 && rng.gen_bool(0.8) {
            let x = n2 + rng.gen_range(0..n1);
            let v = rng.gen_range(0..n2);
            let (t, h) = if rng.gen_bool(0.5) { (x, v) } else { (v, x) };
            if !g.has_arc(t, h) {
                g.add_arc(t, h);
                added = true;
            }
        }
        if !added {
            let i = rng.gen_range(0..n2);
            let j = rng.gen_range(0..n2);
            if i != j && !g.has_arc(i, j) {
                g.add_arc(i, j);
            }
        }
    }
    let inst = certify_split(&g, &v1, &v2).map_err(|e| IoError::InvalidPartition(e.to_string()))?;
    if cfg.require_maximal_partition {
        Ok(maximal_split_partition(&inst))
    } else {
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_basics() {
        let p = parse_edge_list("4\n1 2\n2 3\n3 4\n4 1\n").unwrap();
        let g = p.graph();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.arc_count(), 4);
        assert!(g.has_arc(0, 1));

        // Multiplicity makes parallel arcs.
        let p = parse_edge_list("2\n1 2 2\n2 1\n").unwrap();
        assert_eq!(p.graph().arcs_between(0, 1).len(), 2);

        // Partition violating independence is rejected.
        let err = parse_edge_list("3\nv1: 1 2\n1 2\n2 3\n3 1\n");
        assert!(matches!(err, Err(IoError::InvalidPartition(_))));
    }

    #[test]
    fn roundtrip_canonical() {
        let text = "4\nv1: 4\n1 2\n1 4\n2 3 2\n3 1\n4 1\n";
        let p = parse_edge_list(text).unwrap();
        let emitted = emit_edge_list(&p);
        assert_eq!(emitted, text);
        let p2 = parse_edge_list(&emitted).unwrap();
        assert_eq!(emit_edge_list(&p2), emitted);
    }

    #[test]
    fn dot_output_shape() {
        let g = MultiDigraph::from_arcs(2, &[(0, 1), (1, 0)]);
        let dot = emit_dot(&g, None);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("v1 -> v2"));
        let dec = Decomposition {
            a1: [ArcId(0)].into(),
            a2: [ArcId(1)].into(),
        };
        let dot = emit_dot(&g, Some(&dec));
        assert!(dot.contains("color=red"));
        assert!(dot.contains("color=blue"));
    }

    #[test]
    fn json_decomposition_roundtrip() {
        let mut g = MultiDigraph::from_arcs(2, &[(0, 1), (1, 0)]);
        g.add_arc(0, 1);
        let dec = Decomposition {
            a1: [ArcId(0), ArcId(1)].into(),
            a2: [ArcId(2)].into(),
        };
        let v = outcome_to_json(&g, &Outcome::Decomposition(dec.clone()));
        let back = decomposition_from_json(&g, &v).unwrap();
        assert_eq!(back, dec);
    }

    #[test]
    fn generator_is_deterministic_and_strong() {
        let cfg = GeneratorConfig { v1_size: 2, v2_size: 5, seed: 42, ..Default::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(
            emit_edge_list(&Parsed::Split(a.clone())),
            emit_edge_list(&Parsed::Split(b.clone()))
        );
        assert!(is_k_arc_strong(&a.graph, 2));

        // Degenerate config: no V1 vertices.
        let cfg = GeneratorConfig { v1_size: 0, v2_size: 5, seed: 7, ..Default::default() };
        let c = generate(&cfg).unwrap();
        assert!(c.v1.is_empty());
        assert!(is_k_arc_strong(&c.graph, 2));
    }
}
