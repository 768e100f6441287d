//! Transfer checks between the state map and the full composition
//! operator on the named roster plus seeded random systems.

mod common;

#[test]
fn transfer_checks_hold_on_the_roster() {
    let results = common::run_lemma_roster();
    assert!(results.len() >= 17);
    for (name, report) in &results {
        assert_eq!(report.checks.len(), 5, "{name}");
        for check in &report.checks {
            assert!(
                check.passed,
                "{name}: {} failed: {}",
                check.name, check.detail
            );
        }
    }
}
