//! Randomized cross-checks between the linear model and the brute-force
//! oracle, plus recovery round-trips, on seeded random systems.

mod common;

#[test]
fn randomized_cross_checks_hold() {
    let stats = common::run_randomized_cross_checks(200, 0xF55);
    assert!(stats.analyzed >= 200);
    // The suite must actually exercise the nontrivial paths.
    assert!(stats.observable_systems > 0, "no observable system sampled");
    assert!(stats.recoveries > 0, "no recovery round-trip completed");
    println!(
        "analyzed {} systems ({} skipped at caps, {} observable, {} recoveries)",
        stats.analyzed, stats.skipped, stats.observable_systems, stats.recoveries
    );
}
