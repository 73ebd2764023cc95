use std::collections::HashSet;
use std::fs;
use std::path::Path;

use pnlw::harness::{leaf_components, list_experiments, lookup, run_experiment, Check, Kind, RunManifest};
use pnlw::Error;
use proptest::prelude::*;

fn problems(err: Error) -> Vec<String> {
    match err {
        Error::Validation(p) => p,
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn catalog_ids_are_unique_and_cover_the_required_set() {
    let ids: Vec<&str> = list_experiments().iter().map(|e| e.id).collect();
    let unique: HashSet<&str> = ids.iter().copied().collect();
    assert_eq!(unique.len(), ids.len());
    for id in [
        "parseval",
        "kernel-constancy",
        "haar-orthogonality",
        "median-sqrtq",
        "tail-shape",
        "bernstein",
        "coordinate-tail",
        "linear-periodicity",
        "prop-proba-1",
        "prop-proba-2",
        "prop-proba-3",
        "picard-contraction",
        "duffing-oracle",
        "hamiltonian-drift",
        "gronwall-case1",
        "budget-case2",
        "chart-roundtrip",
        "h0-h1-eigen",
        "lq-transfer",
        "scattering-fit",
        "uniqueness-H",
    ] {
        assert!(unique.contains(id), "{id} missing from the catalog");
    }
}

#[test]
fn every_leaf_belongs_to_at_most_one_criterion() {
    let mut seen = HashSet::new();
    for k in 1..=8 {
        let id = format!("acceptance-{k}");
        for leaf in leaf_components(&id).unwrap() {
            assert!(matches!(lookup(leaf).unwrap().kind, Kind::Single(_)));
            assert!(seen.insert(leaf), "{leaf} appears under two criteria");
        }
    }
    let all = leaf_components("all-acceptance").unwrap();
    assert_eq!(all.len(), seen.len());
}

#[test]
fn unknown_experiment_is_rejected() {
    let err = RunManifest::new("no-such-thing", 0).resolve().unwrap_err();
    assert!(matches!(err, Error::UnknownExperiment(_)), "{err}");
}

#[test]
fn out_of_range_sigma_is_named() {
    let text = r#"{"experiment": "simulate", "params": {"sigma": 0.7}}"#;
    let err = RunManifest::from_json(text).unwrap().resolve().unwrap_err();
    let p = problems(err);
    assert!(p.iter().any(|m| m.contains("sigma")), "{p:?}");
}

#[test]
fn all_invalid_fields_are_listed_together() {
    let text = r#"{"experiment": "simulate", "params": {"sigma": 0.7, "dt": -1.0, "n_max": 0}}"#;
    let p = problems(RunManifest::from_json(text).unwrap().resolve().unwrap_err());
    for field in ["sigma", "dt", "n_max"] {
        assert!(p.iter().any(|m| m.contains(field)), "{field} not reported in {p:?}");
    }
}

#[test]
fn unknown_keys_are_listed_together() {
    let text = r#"{"experiment": "parseval", "colour": 1, "params": {"nmax": 3, "tolerances": {"parseval": 1e-9}}}"#;
    let p = problems(RunManifest::from_json(text).unwrap_err());
    assert!(p.iter().any(|m| m.contains("colour")), "{p:?}");
    assert!(p.iter().any(|m| m.contains("nmax")), "{p:?}");
}

#[test]
fn unknown_tolerance_is_rejected() {
    let text = r#"{"experiment": "parseval", "params": {"tolerances": {"nope": 1.0}}}"#;
    let p = problems(RunManifest::from_json(text).unwrap().resolve().unwrap_err());
    assert!(p.iter().any(|m| m.contains("nope")), "{p:?}");
}

fn csv_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for comp in fs::read_dir(root).unwrap() {
        let comp = comp.unwrap().path();
        if comp.is_dir() {
            for f in fs::read_dir(&comp).unwrap() {
                let f = f.unwrap().path();
                let name = f.strip_prefix(root).unwrap().display().to_string();
                out.push((name, fs::read(&f).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn repeated_runs_write_identical_tables() {
    let mut m = RunManifest::new("linear-periodicity", 7);
    m.params.n_max = Some(5);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&m, a.path()).unwrap();
    let rb = run_experiment(&m, b.path()).unwrap();
    assert_eq!(ra.run_dir, rb.run_dir);
    assert_eq!(ra.checks, rb.checks);
    let (fa, fb) = (csv_files(&a.path().join(&ra.run_dir)), csv_files(&b.path().join(&rb.run_dir)));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
    assert!(a.path().join(&ra.run_dir).join("manifest.json").exists());
}

#[test]
fn seed_changes_the_run_directory_and_the_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let r0 = run_experiment(&RunManifest::new("linear-periodicity", 0), dir.path()).unwrap();
    let r1 = run_experiment(&RunManifest::new("linear-periodicity", 1), dir.path()).unwrap();
    assert_ne!(r0.run_dir, r1.run_dir);
    assert_ne!(r0.checks[0].value, r1.checks[0].value);
}

#[test]
fn composite_matches_its_components() {
    let dir = tempfile::tempdir().unwrap();
    let agg = run_experiment(&RunManifest::new("acceptance-6", 3), dir.path()).unwrap();
    let mut singles = Vec::new();
    let leaves = leaf_components("acceptance-6").unwrap();
    assert_eq!(agg.groups.len(), leaves.len());
    for (leaf, group) in leaves.iter().zip(&agg.groups) {
        let single = run_experiment(&RunManifest::new(leaf, 3), dir.path()).unwrap();
        assert_eq!(group.id, *leaf);
        assert_eq!(group.passed, single.passed);
        singles.extend(single.checks);
    }
    assert_eq!(agg.checks, singles);
}

#[test]
fn component_error_becomes_a_failed_check_inside_a_composite() {
    // 7 oracle steps over [0, 20] put no grid point on the solver snapshots.
    let text = r#"{"experiment": "acceptance-4", "components": {"duffing-oracle": {"points": 7}}}"#;
    let m = RunManifest::from_json(text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&m, dir.path()).unwrap();
    assert!(!r.passed);
    assert!(r.checks.iter().any(|c| c.component == "duffing-oracle" && c.id == "error" && !c.passed));
    assert!(r.checks.iter().any(|c| c.component == "picard-contraction" && c.passed));

    let mut single = RunManifest::new("duffing-oracle", 0);
    single.params.points = Some(7);
    assert!(run_experiment(&single, dir.path()).is_err());
}

proptest! {
    #[test]
    fn evaluate_respects_bounds(v in -10.0f64..10.0, lo in -10.0f64..0.0, hi in 0.0f64..10.0) {
        prop_assert_eq!(Check::evaluate(v, Some(lo), Some(hi), false), v >= lo && v <= hi);
        prop_assert_eq!(Check::evaluate(v, Some(lo), None, true), v > lo);
        prop_assert!(!Check::evaluate(f64::NAN, None, Some(hi), false));
    }

    #[test]
    fn content_hash_tracks_every_parameter(seed in 0u64..1000, n in 2usize..20) {
        let mut a = RunManifest::new("parseval", seed);
        a.params.n_max = Some(n);
        let b = a.clone();
        prop_assert_eq!(a.content_hash().unwrap(), b.content_hash().unwrap());
        let mut c = a.clone();
        c.params.n_max = Some(n + 1);
        prop_assert_ne!(a.content_hash().unwrap(), c.content_hash().unwrap());
    }
}
