use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mpa_core::assumptions::catalog::catalog;
use serde_json::Value;

fn graphs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/graphs")
}

fn mpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpa")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Output with the manifest's timestamp line removed.
fn analytical(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp:") && !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn motivating_example_is_admissible() {
    let g = graphs();
    let o = mpa(&[
        "check",
        "--graph",
        path(&g.join("motivating.dag")),
        "--mods",
        path(&g.join("motivating.mods.toml")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let payload = text.split("# run manifest").next().unwrap();
    assert!(payload.trim_end().ends_with("admissible via CIT"), "{payload}");
}

#[test]
fn fig1_is_inadmissible_with_witness() {
    let g = graphs();
    let o = mpa(&[
        "check",
        "--graph",
        path(&g.join("fig1.dag")),
        "--mods",
        path(&g.join("fig1.mods.toml")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("Z <- U_Z -> R <- U_Y -> Y_z [open]"));

    let o = mpa(&["check", "--graph", path(&g.join("fig1.dag")), "--condition-on", "U_Z", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["payload"]["verdicts"][0]["holds"], Value::Bool(true));
}

#[test]
fn roles_can_be_given_inline() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.dag");
    fs::write(&g, "dag { X -> Z X -> Y Z -> Y Y -> R }").unwrap();
    let o = mpa(&[
        "check",
        "--graph",
        path(&g),
        "--roles",
        "treatment Z; outcome Y; confounder X partial; missing R of X",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("scenario I"));
}

#[test]
fn malformed_diagram_exits_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("bad.dag");
    fs::write(&g, "dag {\n  A -> \n}").unwrap();
    let o = mpa(&["check", "--graph", path(&g)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("3:1"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mpa(&["estimate"]).status.code(), Some(1));
    assert_eq!(mpa(&["--help"]).status.code(), Some(0));
}

#[test]
fn catalog_verdicts_through_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    for entry in catalog() {
        let g = dir.path().join(format!("{}.dag", entry.id));
        let m = dir.path().join(format!("{}.mods.toml", entry.id));
        fs::write(&g, entry.source()).unwrap();
        fs::write(&m, entry.mods_toml()).unwrap();
        let mut runs = vec![(None, false)];
        if let Some(r) = &entry.repair {
            runs.push((Some(r.clone()), true));
        }
        for (extra, expect) in runs {
            let mut args = vec!["check", "--graph", path(&g), "--mods", path(&m), "--format", "json"];
            if let Some(r) = &extra {
                args.extend(["--condition-on", r.as_str()]);
            }
            let o = mpa(&args);
            let v: Value = serde_json::from_slice(&o.stdout).unwrap_or_else(|_| panic!("{}: {}", entry.id, stderr(&o)));
            let name = entry.assumption.to_string();
            let verdict = v["payload"]["verdicts"]
                .as_array()
                .unwrap()
                .iter()
                .find(|q| q["assumption"] == name.as_str() && (name == "mSITA" || q["pattern"] == "0"))
                .unwrap();
            assert_eq!(verdict["holds"], Value::Bool(expect), "{} given {extra:?}", entry.id);
            assert_ne!(o.status.code(), Some(1));
        }
    }
}

#[test]
fn paths_in_fig1_template() {
    let g = graphs().join("fig1.dag");
    let o = mpa(&["paths", "--graph", path(&g), "Z", "Y_z", "--given", "X,R,z"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("2 paths, 1 open"), "{text}");
    assert!(text.contains("Z <- X -> Y_z [blocked @X]"));

    let dir = tempfile::tempdir().unwrap();
    let apart = dir.path().join("apart.dag");
    fs::write(&apart, "dag { A -> B C }").unwrap();
    let o = mpa(&["paths", "--graph", path(&apart), "A", "C"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("no paths"));

    let o = mpa(&["paths", "--graph", path(&g), "Z", "Y", "--given", "U_Z"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("latent"));
}

#[test]
fn simulate_is_deterministic_and_estimable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = mpa(&["simulate", "fig2", "--n", "1000", "--seed", "7", "--out", path(d)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["data.csv", "scenario.toml", "model.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    for f in ["oracle.json", "manifest.json"] {
        let (x, y) = (fs::read_to_string(a.join(f)).unwrap(), fs::read_to_string(b.join(f)).unwrap());
        assert_eq!(analytical(&x), analytical(&y), "{f}");
    }
    let oracle: Value = serde_json::from_str(&fs::read_to_string(a.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(oracle["payload"]["seed"], 7);
    assert_eq!(oracle["payload"]["y0"].as_array().unwrap().len(), 1000);

    let data = a.join("data.csv");
    let config = a.join("model.toml");
    let o = mpa(&["estimate", "--data", path(&data), "--config", path(&config), "--method", "crude"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(first.starts_with("Crude") && first.trim_end().ends_with('-'), "{first}");

    let o = mpa(&[
        "estimate", "--data", path(&data), "--config", path(&config), "--method", "mpa,mind", "--bootstrap", "30",
        "--seed", "5", "--format", "json",
    ]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = v["payload"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert!(results[0]["ci_low"].is_number());
    assert_eq!(results[0]["method"], "mpa");
}

#[test]
fn unknown_scenario_lists_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpa(&["simulate", "nope", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fig2") && stderr(&o).contains("motivating"));
}

#[test]
fn motivating_simulation_fills_four_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpa(&["simulate", "motivating", "--n", "100000", "--seed", "1", "--out", path(dir.path()), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let patterns = v["payload"]["patterns"].as_array().unwrap();
    assert_eq!(patterns.len(), 4);
    assert!(patterns.iter().all(|p| p[1].as_u64().unwrap() > 0));
}

#[test]
fn tiny_pattern_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("Z,Y,X\n");
    for i in 0..200 {
        let x = if i < 10 { "NA".to_string() } else { (i % 2).to_string() };
        csv.push_str(&format!("{},{},{x}\n", i % 3 % 2, i % 5 % 2));
    }
    let data = dir.path().join("d.csv");
    fs::write(&data, csv).unwrap();
    let config = dir.path().join("m.toml");
    fs::write(
        &config,
        "[data]\ntreatment = \"Z\"\noutcome = \"Y\"\n[[data.covariates]]\nname = \"X\"\ntype = \"binary\"\npartial = true\n",
    )
    .unwrap();
    let o = mpa(&["estimate", "--data", path(&data), "--config", path(&config)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("X missing"), "{}", stderr(&o));
}
