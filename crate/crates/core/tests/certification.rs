use polar_park::verify::{run_suite, CertReport, Suite, SuiteOptions};

fn run(suite: Suite, seed: u64) -> Vec<CertReport> {
    let reports = run_suite(suite, SuiteOptions::with_seed(seed)).expect("suite runs");
    for r in &reports {
        println!("{}", r.summary());
    }
    reports
}

#[test]
fn full_battery_passes_on_default_grids() {
    let reports = run(Suite::All, 2024);
    // lemma, 4x(positive, decrease), 2 equality, 2 bolsa bounds,
    // 4 inner gradients, 4x6x(clf, prop1, gradient), 4 decay runs
    assert_eq!(reports.len(), 1 + 8 + 2 + 2 + 4 + 72 + 4);
    let failed: Vec<&CertReport> = reports.iter().filter(|r| !r.pass).collect();
    assert!(failed.is_empty(), "failed: {:#?}", failed.iter().map(|r| r.summary()).collect::<Vec<_>>());
}

#[test]
fn reports_are_deterministic_given_the_seed() {
    let a = run(Suite::Clf, 5);
    let b = run(Suite::Clf, 5);
    assert_eq!(a, b);
    let json: Vec<String> = a.iter().map(CertReport::to_json).collect();
    let back: Vec<CertReport> = json.iter().map(|s| CertReport::from_json(s).unwrap()).collect();
    assert_eq!(back, a);
}

#[test]
fn single_suites_select_their_checks() {
    let lemma = run(Suite::Lemma1, 0);
    assert_eq!(lemma.len(), 1);
    assert!(lemma[0].pass);
    assert!(run(Suite::Kl, 0).iter().all(|r| r.check.starts_with("kl_decay/")));
    assert!(run(Suite::Prop1, 0).iter().all(|r| r.check.starts_with("composite/")));
}
