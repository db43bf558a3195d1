//! Command-line surface: decompose split digraphs, verify certificates, run
//! the oracle, inspect nice decompositions, generate instances, export the
//! exception catalog and reproduce the small-order enumeration.
//!
//! Exit codes: 0 success (decomposition found / check passed), 1 usage,
//! 2 invalid input, 3 exception certificate, 4 internal invariant failure.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sadkit::engine::{solve_split, SolveError};
use sadkit::exceptions;
use sadkit::graph::{is_k_arc_strong, MultiDigraph};
use sadkit::io::{
    decomposition_from_json, emit_dot, emit_edge_list, generate, outcome_to_json,
    parse_edge_list, GeneratorConfig, Parsed,
};
use sadkit::search::{brute_force_sad, verify_decomposition, Outcome};
use sadkit::semicomplete::{certify_split, nice_decomposition};

#[derive(Parser)]
#[command(name = "sadkit", about = "Strong arc decompositions of split digraphs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Edges,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a split digraph or emit an exception certificate.
    Decompose {
        file: PathBuf,
        /// Print the procedure trace.
        #[arg(long)]
        trace: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Check a JSON decomposition certificate against a graph.
    Verify { graph: PathBuf, certificate: PathBuf },
    /// Run the exhaustive oracle.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Print the nice decomposition of a strong semicomplete digraph.
    NiceDecomp { file: PathBuf },
    /// Generate a seeded 2-arc-strong split instance.
    Gen {
        #[arg(long, default_value_t = 2)]
        v1: usize,
        #[arg(long, default_value_t = 5)]
        v2: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Re-partition to a maximal split partition.
        #[arg(long)]
        maximal: bool,
    },
    /// List the exception catalog; optionally write each member to a
    /// directory as edge lists and DOT files.
    Catalog {
        #[arg(long)]
        emit_dir: Option<PathBuf>,
    },
    /// Enumerate all semicomplete digraphs on n vertices and report the
    /// non-decomposable 2-arc-strong ones up to isomorphism.
    Enumerate {
        #[arg(long)]
        n: usize,
    },
}

fn read_graph(path: &PathBuf) -> Result<Parsed, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_edge_list(&text).map_err(|e| e.to_string())
}

fn as_split(p: Parsed) -> Result<sadkit::SplitInstance, String> {
    match p {
        Parsed::Split(s) => Ok(s),
        Parsed::Graph(g) => {
            // Bare graphs are treated as semicomplete hosts (V1 empty).
            let v2: BTreeSet<_> = g.vertices().collect();
            certify_split(&g, &BTreeSet::new(), &v2).map_err(|e| e.to_string())
        }
    }
}

fn run() -> Result<u8, (u8, String)> {
    let cli = Cli::try_parse().map_err(|e| {
        let _ = e.print();
        (1u8, String::new())
    })?;
    match cli.command {
        Command::Decompose { file, trace, format } => {
            let parsed = read_graph(&file).map_err(|m| (2, m))?;
            let inst = as_split(parsed).map_err(|m| (2, m))?;
            let (outcome, report) = match solve_split(&inst) {
                Ok(x) => x,
                Err(SolveError::NotTwoArcStrong) => {
                    return Err((2, "input is not 2-arc-strong".into()))
                }
                Err(e) => return Err((4, e.to_string())),
            };
            if trace {
                for line in &report.trace {
                    eprintln!("# {line}");
                }
            }
            match &outcome {
                Outcome::Decomposition(dec) => {
                    match format {
                        Format::Json => {
                            println!(
                                "{}",
                                serde_json::to_string_pretty(&outcome_to_json(
                                    &inst.graph,
                                    &outcome
                                ))
                                .unwrap()
                            );
                        }
                        Format::Dot => print!("{}", emit_dot(&inst.graph, Some(dec))),
                        Format::Edges => {
                            let g1 = inst.graph.spanning(&dec.a1);
                            let g2 = inst.graph.spanning(&dec.a2);
                            print!("# class 1\n{}", emit_edge_list(&Parsed::Graph(g1)));
                            print!("# class 2\n{}", emit_edge_list(&Parsed::Graph(g2)));
                        }
                    }
                    Ok(0)
                }
                Outcome::Exception(_) => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&outcome_to_json(&inst.graph, &outcome))
                            .unwrap()
                    );
                    Ok(3)
                }
            }
        }
        Command::Verify { graph, certificate } => {
            let parsed = read_graph(&graph).map_err(|m| (2, m))?;
            let text = std::fs::read_to_string(&certificate)
                .map_err(|e| (2, format!("{}: {e}", certificate.display())))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| (2, e.to_string()))?;
            let dec =
                decomposition_from_json(parsed.graph(), &value).map_err(|e| (2, e.to_string()))?;
            if verify_decomposition(parsed.graph(), &dec) {
                println!("ok: both classes are spanning strong subdigraphs");
                Ok(0)
            } else {
                Err((2, "certificate does not verify".into()))
            }
        }
        Command::Oracle { file, budget } => {
            let parsed = read_graph(&file).map_err(|m| (2, m))?;
            let budget = budget.unwrap_or_else(sadkit::search::oracle_budget);
            match brute_force_sad(parsed.graph(), budget) {
                Ok(Some(dec)) => {
                    let out = Outcome::Decomposition(dec);
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&outcome_to_json(parsed.graph(), &out))
                            .unwrap()
                    );
                    Ok(0)
                }
                Ok(None) => {
                    println!("{{\"kind\": \"absent\"}}");
                    Ok(3)
                }
                Err(e) => Err((2, e.to_string())),
            }
        }
        Command::NiceDecomp { file } => {
            let parsed = read_graph(&file).map_err(|m| (2, m))?;
            let nd = nice_decomposition(parsed.graph()).map_err(|e| (2, e.to_string()))?;
            for (i, block) in nd.blocks.iter().enumerate() {
                let ids: Vec<String> = block.iter().map(|v| (v + 1).to_string()).collect();
                println!("U{} = {{{}}}", i + 1, ids.join(", "));
            }
            for &a in &nd.backward {
                let (t, h) = parsed.graph().endpoints(a).unwrap();
                println!("backward {} -> {}", t + 1, h + 1);
            }
            Ok(0)
        }
        Command::Gen { v1, v2, density, seed, maximal } => {
            let cfg = GeneratorConfig {
                v1_size: v1,
                v2_size: v2,
                crossing_density: density,
                seed,
                require_two_arc_strong: true,
                require_maximal_partition: maximal,
            };
            let inst = generate(&cfg).map_err(|e| (2, e.to_string()))?;
            print!("{}", emit_edge_list(&Parsed::Split(inst)));
            Ok(0)
        }
        Command::Catalog { emit_dir } => {
            let entries = exceptions::catalog();
            for entry in &entries {
                println!(
                    "{} dashed=({}, {}) vertices={} arcs={}",
                    entry.id,
                    entry.dashed.0,
                    entry.dashed.1,
                    entry.graph.vertex_count(),
                    entry.graph.arc_count()
                );
            }
            if let Some(dir) = emit_dir {
                std::fs::create_dir_all(&dir).map_err(|e| (2, e.to_string()))?;
                for (i, entry) in entries.iter().enumerate() {
                    let stem = format!(
                        "{:02}_{}{}",
                        i,
                        entry.id.to_string().replace(['(', ')', '*', ','], "_"),
                        match entry.dashed {
                            (false, false) => String::new(),
                            (l, r) => format!("_dash{}{}", l as u8, r as u8),
                        }
                    );
                    let edges = emit_edge_list(&Parsed::Graph(entry.graph.clone()));
                    std::fs::write(dir.join(format!("{stem}.edges")), edges)
                        .map_err(|e| (2, e.to_string()))?;
                    let dot = emit_dot(&entry.graph, None);
                    std::fs::write(dir.join(format!("{stem}.dot")), dot)
                        .map_err(|e| (2, e.to_string()))?;
                }
            }
            Ok(0)
        }
        Command::Enumerate { n } => {
            if n > 5 {
                return Err((1, "enumeration is supported up to n = 5".into()));
            }
            let mut total = 0u64;
            let mut strong2 = 0u64;
            let mut non_dec: Vec<MultiDigraph> = Vec::new();
            sadkit::search::enumerate_semicomplete(n, &mut |g| {
                total += 1;
                if !is_k_arc_strong(g, 2) {
                    return;
                }
                strong2 += 1;
                if brute_force_sad(g, 32).unwrap().is_none() {
                    if !non_dec.iter().any(|h| sadkit::graph::are_isomorphic(h, g).is_some()) {
                        non_dec.push(g.clone());
                    }
                }
            });
            println!("semicomplete digraphs on {n} vertices: {total}");
            println!("2-arc-strong: {strong2}");
            println!("non-decomposable isomorphism classes: {}", non_dec.len());
            for g in &non_dec {
                match exceptions::match_exception(g) {
                    Some(cert) => println!("  {}", cert.catalog_id),
                    None => println!("  (outside the catalog!)"),
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(code)
        }
    }
}
