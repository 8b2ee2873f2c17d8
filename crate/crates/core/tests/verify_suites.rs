use gaugeopt::verify::run_all_suites;

#[test]
fn every_suite_passes_at_moderate_size() {
    let reports = run_all_suites(300, 11).unwrap();
    let mut failed = Vec::new();
    for r in &reports {
        println!("{} cases={} max_rel={:e} violations={} passed={}", r.name, r.case_count, r.max_rel_error, r.violations, r.passed());
        if !r.passed() {
            failed.push(r.to_json());
        }
    }
    assert!(failed.is_empty(), "{failed:#?}");
}
