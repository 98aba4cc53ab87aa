use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ecozoom(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecozoom"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMOKE: &str = r#"
schema_version = 1
output_dir = "OUT"
workers = 2

[sim]
max_ticks = 100
grid_side = 40

[phase1]
configs = 20
seeds = [1, 2, 3]
design_seed = 1

[phase2]
configs = 20
seeds = [1, 2, 3]
design_seed = 2

[surrogate]
epochs = 150
hidden = [16, 16]
cv_folds = 3

[gsa]
n_base = 256
bootstrap = 20

[explain]
dims = ["BG", "PH"]
color_by = "BG"
grid = 10
ice = 15

[uq]
calibration_fraction = 0.5
trees = 20
"#;

fn write_config(dir: &Path, out: &str, extra: &str) -> PathBuf {
    let path = dir.join(format!("{out}.toml"));
    fs::write(&path, format!("{}{extra}", SMOKE.replace("OUT", out))).unwrap();
    path
}

/// Relative path -> contents, with the wall-time column dropped from datasets.
fn snapshot(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
                continue;
            }
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let mut text = fs::read_to_string(&p).unwrap();
            if rel.ends_with("dataset.csv") {
                text = text
                    .lines()
                    .map(|l| if l.starts_with('#') { l } else { l.rsplit_once(',').unwrap().0 })
                    .collect::<Vec<_>>()
                    .join("\n");
            }
            // the report names its own directory
            if rel == "report.txt" {
                text = text.lines().skip(1).collect::<Vec<_>>().join("\n");
            }
            out.insert(rel, text);
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn header_of(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# ecozoom "), "{} lacks provenance", path.display());
    lines.next().unwrap().to_string()
}

#[test]
fn pipeline_smoke_is_complete_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    for out in ["a", "b"] {
        let cfg = write_config(dir, out, "");
        let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap(), "--confirm-clips"], dir);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let a = dir.join("a");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["missing"].as_array().unwrap().len(), 0, "{manifest}");
    assert!(manifest["provenance"]["config_hash"].as_str().unwrap().len() == 64);

    // plotting interfaces
    assert_eq!(header_of(&a.join("regimes.csv")), "phase,regime,count,share");
    assert!(header_of(&a.join("phase2/gsa/sobol_indices.csv")).starts_with("dim,s1,st,"));
    assert_eq!(header_of(&a.join("phase2/gsa/sobol_pairs.csv")), "a,b,s2");
    assert!(header_of(&a.join("phase2/explain/pdp_ice_BG.csv")).starts_with("kind,instance_id,color_key,g0,"));
    assert!(header_of(&a.join("phase2/uq/uq_field.csv")).ends_with("p_hat,p_surrogate,sigma_aleatoric,sigma_epistemic,sigma_total"));
    assert_eq!(header_of(&a.join("phase2/uq/uq_profile_PH.csv")), "PH,p_hat,pdp,sigma_aleatoric,sigma_epistemic,sigma_total");
    let curves = fs::read_to_string(a.join("phase2/explain/pdp_ice_BG.csv")).unwrap();
    assert_eq!(curves.lines().filter(|l| l.starts_with("ice,")).count(), 15);

    // fresh directory: everything but the recorded output path matches
    let sa = snapshot(&a);
    let sb = snapshot(&dir.join("b"));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(k == "config.json" || v == &sb[k], "{k} differs between identical runs");
    }
    // rerun in place, reusing phase 1
    let cfg = dir.join("a.toml");
    let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap(), "--confirm-clips"], dir);
    assert!(stderr(&o).contains("reusing"));
    let again = snapshot(&a);
    for (k, v) in &sa {
        assert!(v == &again[k], "{k} changed on rerun");
    }

    let o = ecozoom(&["report", "a"], dir);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("Acc_max") && text.contains("Sobol") && !text.contains("missing artifacts"));
}

#[test]
fn pipeline_pauses_for_clip_confirmation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p", "");
    let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("clips await confirmation"));
    let out = tmp.path().join("p");
    assert!(out.join("phase1/screening/refinement.json").exists());
    assert!(!out.join("phase2").exists());

    // a gapped directory reports each missing artifact
    let o = ecozoom(&["report", "p"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("missing artifacts"));
    assert!(text.contains("phase2/surrogate/model.json"));
    assert!(text.contains("phase2/gsa/sobol.json"));
}

#[test]
fn explicit_clips_skip_the_pause() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "\n[refine]\nclips = [{ dim = \"PH\", lower = 0.0, upper = 30.0 }]\n";
    let cfg = write_config(tmp.path(), "c", extra);
    let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let refined: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("c/refined_space.json")).unwrap()).unwrap();
    assert_eq!(refined["source"], "config");
    let ph = refined["space"]["dims"].as_array().unwrap().iter().find(|d| d["name"] == "PH").unwrap();
    assert_eq!(ph["upper"], 30.0);
}

#[test]
fn missing_space_file_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "m", "");
    let text = fs::read_to_string(&cfg).unwrap().replace("workers = 2", "workers = 2\nspace_file = \"nowhere.json\"");
    fs::write(&cfg, text).unwrap();
    let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("nowhere.json") && err.contains("config"), "{err}");
}

#[test]
fn bad_config_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "x", "\n[uq]\nbogus = 1\n");
    let o = ecozoom(&["pipeline", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn usage_help_and_version_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&ecozoom(&["--help"], tmp.path())), 0);
    assert_eq!(code(&ecozoom(&["--version"], tmp.path())), 0);
    assert_eq!(code(&ecozoom(&["frobnicate"], tmp.path())), 1);
    assert_eq!(code(&ecozoom(&["design", "--n", "5"], tmp.path())), 1);
    assert_eq!(code(&ecozoom(&["design", "--n", "5", "--clip", "PH=oops", "--out", "d.csv"], tmp.path())), 1);
}

#[test]
fn empty_directory_report_lists_expected_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ecozoom(&["report", "."], tmp.path());
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("phase1/dataset.csv") && err.contains("phase2/uq/uq_summary.json"), "{err}");
}

#[test]
fn individual_subcommands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let run = |args: &[&str]| {
        let o = ecozoom(args, d);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        o
    };
    run(&["design", "--n", "24", "--seeds", "1,2,3", "--design-seed", "4", "--clip", "PH=0:50", "--out", "design.csv"]);
    run(&["simulate", "--design", "design.csv", "--out", "data.csv", "--workers", "2", "--ticks", "80", "--grid", "30"]);
    for a in ["aleatoric", "anova", "chi2"] {
        run(&["screen", a, "--data", "data.csv", "--out", &format!("{a}.json")]);
    }
    run(&["screen", "tree", "--data", "data.csv", "--out", "tree.json", "--min-leaf", "4"]);
    let o = run(&["screen", "nstar", "--data", "data.csv", "--out", "nstar.json", "--z", "1.96", "--eps", "0.1"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("n* ="));
    run(&["surrogate", "train", "--data", "data.csv", "--model", "model.json", "--epochs", "50", "--hidden", "8,8"]);
    run(&["surrogate", "cv", "--data", "data.csv", "--out", "cv.json", "--folds", "3", "--epochs", "20", "--hidden", "8,8"]);
    run(&["surrogate", "predict", "--model", "model.json", "--design", "design.csv", "--out", "pred.csv"]);
    assert_eq!(fs::read_to_string(d.join("pred.csv")).unwrap().lines().count(), 2 + 24);
    run(&["gsa", "sobol", "--model", "model.json", "-M", "128", "--order", "total", "--out", "gsa"]);
    assert!(d.join("gsa/sobol_indices.csv").exists());
    run(&["explain", "pdp-ice", "--model", "model.json", "--data", "data.csv", "--dim", "BG", "--grid", "5", "--ice", "6", "--out", "pdp.csv"]);
    run(&[
        "uq", "decompose", "--data", "data.csv", "--model", "model.json", "--calibration-fraction", "0.5",
        "--trees", "10", "--dim", "PH", "--grid", "6", "--ice", "5", "--out-dir", "uq",
    ]);
    assert!(d.join("uq/uq_profile_PH.csv").exists());

    // clipped design stays inside the clip
    let design = fs::read_to_string(d.join("design.csv")).unwrap();
    let mut lines = design.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ph = header.iter().position(|h| *h == "PH").unwrap();
    for l in lines {
        let v: f64 = l.split(',').nth(ph).unwrap().parse().unwrap();
        assert!((0.0..=50.0).contains(&v));
    }

    // numeric blow-up maps to its own exit code
    let o = ecozoom(&["surrogate", "train", "--data", "data.csv", "--model", "bad.json", "--lr", "1e300", "--epochs", "5"], d);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    // out-of-range clip is a data error
    let o = ecozoom(&["design", "--n", "5", "--clip", "PH=-5:50", "--out", "x.csv"], d);
    assert_eq!(code(&o), 2);
}
