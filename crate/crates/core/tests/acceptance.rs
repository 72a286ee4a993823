//! Every acceptance criterion at its stated tolerance, one PASS/FAIL line each.

use speccl::report::criteria::{self, Outcome};
use speccl::report::SELF_CHECK_SEED;

#[test]
fn acceptance_criteria() {
    let configs = criteria::builtin_configs().expect("built-in configs");
    let runs = criteria::run_all(&configs);
    let mut outcomes: Vec<Outcome> = criteria::scenario_criteria(&runs);
    outcomes.extend(criteria::property_criteria(SELF_CHECK_SEED));
    outcomes.sort_by(|a, b| a.id.cmp(b.id));

    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<_> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
