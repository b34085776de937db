use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn polyspec(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Every file under `dir` by relative path.
fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

const SMALL_SPECTRA: &str = r#"{
  "name": "small",
  "model": { "preset": "two-level-continuous" },
  "action": {
    "kind": "spectra",
    "grid": { "kind": "linear", "from_ghz": 0, "to_ghz": 2, "points": 41 },
    "grid2": { "kind": "symmetric", "step_ghz": 0.25, "half_points": 4 },
    "orders": [2, 3, 4]
  }
}"#;

const SMALL_SIMULATE: &str = r#"{
  "name": "sim",
  "model": { "preset": "two-level-continuous" },
  "action": {
    "kind": "simulate",
    "sim": { "dt": 0.002, "duration": 2, "stride": 5, "observables": ["sz:s"] },
    "trajectories": 3
  },
  "seed": 7
}"#;

#[test]
fn lists_and_prints_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polyspec(&["presets"], tmp.path());
    assert!(o.status.success());
    let list = String::from_utf8(o.stdout).unwrap();
    for name in ["single-spin-spectrum", "zeno-sweep", "two-spin-compare", "two-level-estimate"] {
        assert!(list.contains(name), "{list}");
    }
    let o = polyspec(&["presets", "zeno-sweep"], tmp.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["name"], "zeno-sweep");
}

#[test]
fn spectra_run_writes_data_plots_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SPECTRA);
    let o = polyspec(&["run", &cfg, "--out", "res"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let files = contents(&tmp.path().join("res"));
    for f in ["config.json", "summary.json", "runtimes.json"] {
        assert!(files.contains_key(f), "{:?}", files.keys());
    }
    assert!(files.keys().any(|k| k.ends_with("_s2.csv")));
    assert!(files.keys().any(|k| k.ends_with(".svg")));
    let summary: serde_json::Value = serde_json::from_slice(&files["summary.json"]).unwrap();
    assert_eq!(summary["name"], "small");
    let s2 = files.iter().find(|(k, _)| k.ends_with("_s2.csv")).unwrap().1;
    let text = String::from_utf8_lossy(s2);
    // Header plus one row per grid point.
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 42);
}

#[test]
fn json_format_and_no_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SPECTRA);
    let o = polyspec(&["run", &cfg, "--out", "res", "--format", "json", "--no-plots"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let files = contents(&tmp.path().join("res"));
    assert!(!files.keys().any(|k| k.ends_with(".svg")));
    assert!(!files.keys().any(|k| k.ends_with(".csv")));
    let s3 = files.iter().find(|(k, _)| k.ends_with("_s3.json")).expect("s3 json").1;
    let v: serde_json::Value = serde_json::from_slice(s3).unwrap();
    assert_eq!(v["order"], 3);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", SMALL_SIMULATE);
    for dir in ["a", "b", "c"] {
        let seed = if dir == "c" { "8" } else { "7" };
        let o = polyspec(&["run", &cfg, "--out", dir, "--seed", seed], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let strip = |mut m: BTreeMap<String, Vec<u8>>| {
        m.remove("runtimes.json");
        m
    };
    let a = strip(contents(&tmp.path().join("a")));
    let b = strip(contents(&tmp.path().join("b")));
    let c = strip(contents(&tmp.path().join("c")));
    assert!(a.len() > 3);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_field_is_a_config_error_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL_SPECTRA.replace("\"points\": 41", "\"points\": 41, \"pionts\": 3");
    let cfg = write(tmp.path(), "bad.json", &bad);
    let o = polyspec(&["run", &cfg, "--out", "res"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("field `action`"), "{err}");
    assert!(err.contains("pionts"), "{err}");
}

#[test]
fn invalid_values_and_presets_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = polyspec(&["run", "--preset", "nope"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));

    let bad = SMALL_SPECTRA.replace("[2, 3, 4]", "[2, 5]");
    let cfg = write(tmp.path(), "bad.json", &bad);
    let o = polyspec(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = polyspec(&["run", "missing.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_model_is_a_numerical_failure() {
    // Without precession both s_z eigenstates are stationary.
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
      "name": "degenerate",
      "model": { "inline": {
        "system": { "kind": "single-spin", "omega_l": 0 },
        "measurement": { "scheme": "continuous", "beta2": 1 }
      } },
      "action": {
        "kind": "spectra",
        "grid": { "kind": "linear", "from_ghz": 0, "to_ghz": 1, "points": 5 }
      }
    }"#;
    let cfg = write(tmp.path(), "d.json", text);
    let o = polyspec(&["run", &cfg, "--out", "res"], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
}
