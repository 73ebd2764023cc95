//! Runs the full acceptance suite once and prints one PASS/FAIL line per
//! criterion. Tolerances are the catalog defaults; runtime budgets are
//! pinned below. Built without the test harness so the report is never
//! captured.

use pnlw::harness::{leaf_components, run_experiment, Check, RunManifest};

/// `(criterion id, label, runtime budget in seconds)`.
const CRITERIA: [(&str, &str, Option<f64>); 8] = [
    ("acceptance-1", "spectral core", Some(10.0)),
    ("acceptance-2", "Haar sampling and concentration", Some(300.0)),
    ("acceptance-3", "linear flow and Gaussian tail", Some(300.0)),
    ("acceptance-4", "nonlinear solver", Some(120.0)),
    ("acceptance-5", "globalization", Some(600.0)),
    ("acceptance-6", "Penrose transform", Some(120.0)),
    ("acceptance-7", "scattering exponent", Some(600.0)),
    ("acceptance-8", "uniqueness proxy", None),
];

/// Checks that fail with a faithful implementation; see the README.
const KNOWN_GAPS: [&str; 2] = ["median-sqrtq/median-sqrtq", "scattering-fit/scattering-beta"];

fn key(c: &Check) -> String {
    format!("{}/{}", c.component, c.id)
}

fn main() {
    let out = tempfile::tempdir().unwrap();
    let suite = run_experiment(&RunManifest::new("all-acceptance", 0), out.path()).unwrap();
    let mut unexpected = Vec::new();
    let mut lines = Vec::new();
    for (i, (id, label, budget)) in CRITERIA.iter().enumerate() {
        let leaves = leaf_components(id).unwrap();
        let group = suite.groups.iter().find(|g| g.id == *id).expect("suite has one group per criterion");
        let seconds = group.seconds;
        let checks: Vec<&Check> = suite.checks.iter().filter(|c| leaves.contains(&c.component.as_str())).collect();
        let in_time = budget.is_none_or(|b| seconds < b);
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed) && in_time;
        let limit = budget.map_or("no limit".to_string(), |b| format!("limit {b} s"));
        lines.push(format!(
            "{} criterion {} {label}: {} checks, {seconds:.1} s ({limit})",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            checks.len()
        ));
        for c in checks.iter().filter(|c| !c.passed) {
            lines.push(format!("    {}", c.line()));
            if !KNOWN_GAPS.contains(&key(c).as_str()) {
                unexpected.push(key(c));
            }
        }
        if !in_time {
            unexpected.push(format!("criterion {} runtime {seconds:.1} s", i + 1));
        }
    }
    for c in &suite.constants {
        let ci = match (c.ci_low, c.ci_high) {
            (Some(lo), Some(hi)) => format!(" [{lo:.4e}, {hi:.4e}]"),
            _ => String::new(),
        };
        lines.push(format!("    const {}/{} = {:.6e}{ci}", c.component, c.name, c.value));
    }
    println!("{}", lines.join("\n"));

    // The aggregate must agree with standalone runs of its parts.
    for id in ["acceptance-1", "acceptance-6"] {
        let alone = run_experiment(&RunManifest::new(id, 0), out.path()).unwrap();
        let leaves = leaf_components(id).unwrap();
        let inside: Vec<Check> =
            suite.checks.iter().filter(|c| leaves.contains(&c.component.as_str())).cloned().collect();
        assert_eq!(alone.checks, inside, "{id} differs between the suite and a standalone run");
    }

    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}
