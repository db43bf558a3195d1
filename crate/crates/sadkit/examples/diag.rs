use sadkit::exceptions::{build_appendix_family, FamilyId, NON_DECOMPOSABLE_PRODUCTS};
use sadkit::graph::is_k_arc_strong;
use sadkit::search::{brute_force_sad, enumerate_semicomplete};
use std::time::Instant;

fn main() {
    // Absent-proof timing on the biggest non-decomposable member.
    let t0 = Instant::now();
    let inst = build_appendix_family(FamilyId::IV, FamilyId::IV, (true, true)).unwrap();
    println!("(iv)*x(iv) full-dash arcs={}", inst.graph.arc_count());
    assert!(brute_force_sad(&inst.graph, 32).unwrap().is_none());
    println!("absent proof: {:?}", t0.elapsed());

    let t1 = Instant::now();
    for (l, r) in NON_DECOMPOSABLE_PRODUCTS {
        let inst = build_appendix_family(l, r, (false, false)).unwrap();
        assert!(brute_force_sad(&inst.graph, 32).unwrap().is_none());
    }
    println!("11 products absent: {:?}", t1.elapsed());

    // n=5 enumeration timing.
    let t2 = Instant::now();
    let mut total = 0u64;
    let mut strong2 = 0u64;
    let mut nondec = 0u64;
    enumerate_semicomplete(5, &mut |g| {
        total += 1;
        if !is_k_arc_strong(g, 2) { return; }
        strong2 += 1;
        if brute_force_sad(g, 32).unwrap().is_none() { nondec += 1; }
    });
    println!("n=5: total={total} 2as={strong2} nondec={nondec} in {:?}", t2.elapsed());
}
