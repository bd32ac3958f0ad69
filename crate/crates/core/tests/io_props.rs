use std::path::PathBuf;

use proptest::prelude::*;
use selfsim::io::{read_csv, run, write_csv, CurveSet, ErrorRecord, RunConfig, RunStatus};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        columns in 2usize..5,
        rows in prop::collection::vec(prop::collection::vec(finite(), 5), 1..40),
    ) {
        let data: Vec<Vec<f64>> = (0..columns).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let labels: Vec<String> = (0..columns).map(|j| format!("c{j}")).collect();
        let curves = CurveSet::new("random", labels, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("random.csv");
        write_csv(&curves, &path).unwrap();
        let back = read_csv(&path).unwrap();
        prop_assert_eq!(&back.columns, &curves.columns);
        for (a, b) in back.data.iter().zip(&curves.data) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn even_node_counts_are_rejected(n in 1usize..1000) {
        let text = format!(r#"{{"problem": "pme_barenblatt", "m": 2, "n": {}}}"#, 2 * n);
        let e = RunConfig::from_json(&text).unwrap_err();
        prop_assert_eq!(ErrorRecord::from(&e).parameter, Some("n".to_string()));
    }

    #[test]
    fn nonpositive_diffusion_is_rejected(bad in -5.0..=0.0f64) {
        let text = format!(
            r#"{{"problem": "rds_profile", "network": {{"network": "two_species", "beta": 1, "gamma": 2}},
                "d": [1, {bad}], "u_minus": 1, "u_plus": 2}}"#
        );
        let e = RunConfig::from_json(&text).unwrap_err();
        prop_assert_eq!(ErrorRecord::from(&e).parameter, Some("d".to_string()));
    }

    #[test]
    fn eckhaus_unstable_wavenumbers_are_rejected(eta in 0.58..0.99f64) {
        let text = format!(r#"{{"problem": "gl_profile", "eta_minus": {eta}, "eta_plus": 0.1}}"#);
        let e = RunConfig::from_json(&text).unwrap_err();
        prop_assert_eq!(ErrorRecord::from(&e).parameter, Some("eta_minus".to_string()));
    }
}

fn recipes() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn every_recipe_parses() {
    let paths = recipes();
    assert!(paths.len() >= 6);
    for p in paths {
        RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn recipe_profiles_solve() {
    for p in recipes() {
        let mut config = RunConfig::load(&p).unwrap();
        if config.problem.is_simulation() {
            continue;
        }
        // The profile part only; the long simulations are exercised by the CLI.
        config.final_time = None;
        config.snapshots = None;
        let out = run(&config).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(out.report.status, RunStatus::Ok, "{}", p.display());
        assert!(!out.curves.is_empty());
    }
}
