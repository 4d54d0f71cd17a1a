use std::path::{Path, PathBuf};

use copem::config::{load_experiment, load_pair, load_scenario};
use copem::experiment::default_configs;
use copem::policy::PolicyParams;
use copem::scenario::default_scenario;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

#[test]
fn scenario_file_matches_builtin_default() {
    let s = load_scenario(&configs().join("scenario.toml")).unwrap();
    assert_eq!(s, default_scenario());
}

#[test]
fn experiment_file_lists_the_six_configs() {
    let e = load_experiment(&configs().join("experiment.toml"))
        .unwrap()
        .experiment;
    assert_eq!(e.configs, default_configs());
    assert_eq!(e.runs_per_config, 500);
    assert_eq!(e.policy, PolicyParams::default());
    assert_eq!(e.buffer_capacity, None);
    assert_eq!(e.max_latency(), 1.5);
}

#[test]
fn pair_cross_checks_clean() {
    load_pair(
        &configs().join("scenario.toml"),
        &configs().join("experiment.toml"),
    )
    .unwrap();
}
