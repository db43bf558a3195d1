//! Cross-checks of the full solver against the exhaustive oracle on seeded
//! corpora, plus reversal symmetry and trace sanity.

use sadkit::engine::solve_split;
use sadkit::graph::is_k_arc_strong;
use sadkit::io::{generate, GeneratorConfig};
use sadkit::search::{brute_force_sad, verify_decomposition, Outcome};
use sadkit::semicomplete::SplitInstance;

fn corpus(count: usize, base_seed: u64) -> Vec<SplitInstance> {
    let mut out = Vec::new();
    let mut seed = base_seed;
    while out.len() < count {
        let v2 = 4 + (seed % 5) as usize; // 4..=8
        let v1 = (seed / 5 % 7) as usize; // 0..=6
        let density = 0.3 + 0.1 * ((seed / 35 % 5) as f64);
        let cfg = GeneratorConfig {
            v1_size: v1,
            v2_size: v2,
            crossing_density: density,
            seed,
            require_two_arc_strong: true,
            require_maximal_partition: false,
        };
        seed += 1;
        let Ok(inst) = generate(&cfg) else { continue };
        if inst.graph.arc_count() <= 22 {
            out.push(inst);
        }
    }
    out
}

#[test]
fn solver_agrees_with_oracle_on_generated_instances() {
    let instances = corpus(150, 10_000);
    let mut fallbacks = 0;
    for (i, inst) in instances.iter().enumerate() {
        let oracle = brute_force_sad(&inst.graph, 22).expect("within budget");
        let (outcome, report) = solve_split(inst).unwrap_or_else(|e| {
            panic!("instance {i}: solver error {e}");
        });
        if report.fallback {
            fallbacks += 1;
        }
        match (&outcome, &oracle) {
            (Outcome::Decomposition(dec), Some(_)) => {
                assert!(verify_decomposition(&inst.graph, dec), "instance {i}: bad witness");
            }
            (Outcome::Exception(_), None) => {}
            (Outcome::Decomposition(_), None) => panic!("instance {i}: solver found a phantom"),
            (Outcome::Exception(c), Some(_)) => {
                panic!("instance {i}: solver claimed exception {}", c.catalog_id)
            }
        }
    }
    // The pipeline must mostly run without the oracle safety net.
    assert!(
        fallbacks * 20 <= instances.len(),
        "too many oracle fallbacks: {fallbacks}/{}",
        instances.len()
    );
}

#[test]
fn reversal_symmetry_of_outcomes() {
    let instances = corpus(40, 77_000);
    for inst in &instances {
        let (fwd, _) = solve_split(inst).unwrap();
        let (rev, _) = solve_split(&inst.reverse()).unwrap();
        assert_eq!(fwd.is_decomposition(), rev.is_decomposition());
    }
}

#[test]
fn generated_instances_are_two_arc_strong() {
    for inst in corpus(25, 5) {
        assert!(is_k_arc_strong(&inst.graph, 2));
    }
}
