use std::fs;

use wgdelay::error::Error;
use wgdelay::output::{write_csv, write_json, SOJOURN_HEADER};
use wgdelay::scenario::Scenario;

const FREE: &str = include_str!("../../../scenarios/free.toml");

fn config_error(text: &str) -> String {
    match Scenario::from_toml_str(text) {
        Err(Error::Config(m)) => m,
        Err(e) => panic!("expected a configuration error, got {e}"),
        Ok(_) => panic!("scenario was accepted"),
    }
}

#[test]
fn builtins_load_and_validate() {
    for name in Scenario::builtin_names() {
        let s = Scenario::builtin(name).unwrap();
        assert_eq!(s.name, name);
    }
    assert!(Scenario::builtin("nonexistent").is_err());
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    assert!(config_error(&format!("bogus = 1\n{FREE}")).contains("bogus"));
    let text = FREE.replace("[time]\n", "[time]\nstep_size = 0.1\n");
    assert!(config_error(&text).contains("step_size"));
    let text = format!("{FREE}\n[solver]\nclosed = 3\n");
    assert!(config_error(&text).contains("closed"));
    let text = FREE.replace("[time]\n", "[time]\nfree = { tol = 1e-9 }\n");
    assert!(config_error(&text).contains("tol"));
    let text = FREE.replace("[waveguide]\n", "[waveguide]\nheight = 1.0\n");
    assert!(config_error(&text).contains("height"));
}

#[test]
fn violated_invariants_are_named() {
    let cases = [
        (FREE.replace("extent = 96.0", "extent = 96.0\nr_max = 60.0"), "r_max"),
        (FREE.replace("dt = 2e-3", "dt = 4e-3"), "time.dt <= time.dx^2 / pi"),
        (FREE.replace("modes = 2", "modes = 0"), "modes"),
        (FREE.replace("center = 2.0, width = 0.13", "center = 0.1, width = 0.13"), "packet"),
        (format!("{FREE}\n[sweep.extra]\n"), "extra"),
    ];
    for (text, needle) in cases {
        let e = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(e.contains(needle), "{needle}: {e}");
    }
    let sweep = FREE.replace("energy_step = 0.05", "energy_step = 0.05\nlambda_min = 7.0\nlambda_max = 7.5");
    let e = Scenario::from_toml_str(&sweep).unwrap_err().to_string();
    assert!(e.contains("invariant `packet energy window within sweep range` violated"), "{e}");
}

#[test]
fn hash_ignores_output_dir_but_tracks_physics() {
    let a = Scenario::from_toml_str(FREE).unwrap();
    let b = Scenario::from_toml_str(&FREE.replace("output/free", "elsewhere")).unwrap();
    let c = Scenario::from_toml_str(&FREE.replace("center = 2.0", "center = 1.9")).unwrap();
    assert_eq!(a.config_hash(), b.config_hash());
    assert_ne!(a.config_hash(), c.config_hash());
    assert_eq!(a.config_hash().len(), 64);
    assert_eq!(a.config_hash(), Scenario::from_toml_str(FREE).unwrap().config_hash());
}

#[test]
fn missing_file_error_names_the_path() {
    let e = Scenario::load(std::path::Path::new("/nonexistent/scenario.toml")).unwrap_err().to_string();
    assert!(e.contains("/nonexistent/scenario.toml"), "{e}");
}

#[test]
fn csv_and_json_are_written_whole() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sojourn.csv");
    write_csv(&path, &SOJOURN_HEADER, &[(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)]).unwrap();
    write_csv(&path, &SOJOURN_HEADER, &[(1.5, 2.0, 3.0, 4.0, 5.0, 6.0), (2.0, 0.0, 0.0, 0.0, 0.0, 0.0)]).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,T_r,T0_phi,T0_S_phi,tau_r,tau_free");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.5,"));
    // nothing but the target is left behind
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);

    let json = dir.path().join("x.json");
    write_json(&json, &serde_json::json!({"a": 1})).unwrap();
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["a"], 1);
}
