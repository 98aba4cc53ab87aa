//! Plain-text summary of a pipeline output directory.

use std::fmt::Write as _;
use std::path::Path;

use ecozoom::io::read_json;
use ecozoom::{Error, Result};
use serde_json::Value;

pub const REPORT_FILE: &str = "report.txt";

/// Files a complete pipeline run leaves behind, relative to the output directory.
pub const EXPECTED: &[&str] = &[
    "config.json",
    "phase1/design.csv",
    "phase1/dataset.csv",
    "phase1/screening/aleatoric.json",
    "phase1/screening/anova.json",
    "phase1/screening/chi2.json",
    "phase1/screening/tree.json",
    "phase1/screening/nstar.json",
    "phase1/screening/refinement.json",
    "refined_space.json",
    "phase2/design.csv",
    "phase2/dataset.csv",
    "phase2/screening/aleatoric.json",
    "phase2/surrogate/model.json",
    "phase2/surrogate/cv.json",
    "phase2/gsa/sobol.json",
    "phase2/gsa/sobol_indices.csv",
    "phase2/gsa/sobol_pairs.csv",
    "phase2/uq/uq_field.csv",
    "phase2/uq/uq_summary.json",
    "phase2/uq/tipping_points.json",
    "regimes.csv",
];

pub struct Report {
    pub text: String,
    pub missing: Vec<String>,
}

fn load(dir: &Path, rel: &str) -> Option<Value> {
    let p = dir.join(rel);
    if p.exists() {
        read_json(&p).ok()
    } else {
        None
    }
}

fn f(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "?".into(), |x| format!("{x:.4}"))
}

pub fn render_report(dir: &Path) -> Result<Report> {
    let missing: Vec<String> = EXPECTED
        .iter()
        .filter(|rel| !dir.join(rel).exists())
        .map(|s| s.to_string())
        .collect();
    if missing.len() == EXPECTED.len() {
        return Err(Error::Precondition(format!(
            "{} holds no pipeline artifacts; expected:\n  {}",
            dir.display(),
            EXPECTED.join("\n  ")
        )));
    }

    let mut s = String::new();
    let _ = writeln!(s, "ecozoom report for {}", dir.display());
    if let Some(cfg) = load(dir, "config.json") {
        if let Some(h) = cfg.pointer("/provenance/config_hash").and_then(Value::as_str) {
            let _ = writeln!(s, "config hash {h}");
        }
    }

    let _ = writeln!(s, "\n== phase 1 screening ==");
    if let Some(a) = load(dir, "phase1/screening/aleatoric.json") {
        let _ = writeln!(s, "Acc_max {}", fmt(f(&a, "acc_max")));
    }
    if let Some(a) = load(dir, "phase1/screening/anova.json") {
        let mut rows: Vec<(String, f64)> = a["per_factor"]
            .as_array()
            .map(|rows| {
                rows.iter()
                    .map(|r| (r["name"].as_str().unwrap_or("?").to_string(), f(r, "variance_share").unwrap_or(0.0)))
                    .collect()
            })
            .unwrap_or_default();
        rows.sort_by(|x, y| y.1.total_cmp(&x.1));
        let top: Vec<String> = rows.iter().take(5).map(|(n, v)| format!("{n} {v:.3}")).collect();
        let _ = writeln!(s, "ANOVA top shares: {}", top.join(", "));
    }
    if let Some(c) = load(dir, "phase1/screening/chi2.json") {
        let _ = writeln!(s, "seed independence: chi2 {} p {}", fmt(f(&c, "chi2")), fmt(f(&c, "p")));
    }
    if let Some(n) = load(dir, "phase1/screening/nstar.json") {
        let _ = writeln!(
            s,
            "n* {} (recommended {})",
            fmt(f(&n, "mean_nstar")),
            n["recommended_n"].as_u64().map_or("?".into(), |v| v.to_string())
        );
    }
    if let Some(t) = load(dir, "phase1/screening/tree.json") {
        if let Some(text) = t["text"].as_str() {
            let _ = writeln!(s, "regression tree:\n{}", text.trim_end());
        }
    }
    if let Some(r) = load(dir, "refined_space.json") {
        let _ = writeln!(s, "\n== refinement ({}) ==", r["source"].as_str().unwrap_or("?"));
        for c in r["clips"].as_array().into_iter().flatten() {
            let _ = writeln!(
                s,
                "  {} -> [{}, {}]",
                c["dim"].as_str().unwrap_or("?"),
                fmt(f(c, "lower")),
                fmt(f(c, "upper"))
            );
        }
    }

    let _ = writeln!(s, "\n== phase 2 ==");
    if let Some(a) = load(dir, "phase2/screening/aleatoric.json") {
        let _ = writeln!(s, "Acc_max {}", fmt(f(&a, "acc_max")));
    }
    if let Some(m) = load(dir, "phase2/surrogate/model.json") {
        let _ = writeln!(s, "surrogate train accuracy {}", fmt(m.pointer("/meta/train_accuracy").and_then(Value::as_f64)));
    }
    if let Some(cv) = load(dir, "phase2/surrogate/cv.json") {
        let _ = writeln!(
            s,
            "{}-fold CV accuracy {} (majority share {})",
            cv["k"].as_u64().unwrap_or(0),
            fmt(f(&cv, "mean_accuracy")),
            fmt(f(&cv, "majority_share"))
        );
    }
    if let Some(g) = load(dir, "phase2/gsa/sobol.json") {
        let names: Vec<String> = g["names"]
            .as_array()
            .map(|a| a.iter().map(|v| v.as_str().unwrap_or("?").to_string()).collect())
            .unwrap_or_default();
        let s1: Vec<f64> = g["s1"].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default();
        let st: Vec<f64> = g["st"].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default();
        let mut order: Vec<usize> = (0..st.len().min(names.len())).collect();
        order.sort_by(|&a, &b| st[b].total_cmp(&st[a]));
        let _ = writeln!(s, "Sobol (sum S1 {:.4}):", s1.iter().sum::<f64>());
        for &i in order.iter().take(6) {
            let _ = writeln!(s, "  {:<4} S1 {:>7.4}  ST {:>7.4}", names[i], s1.get(i).copied().unwrap_or(f64::NAN), st[i]);
        }
    }
    if let Some(u) = load(dir, "phase2/uq/uq_summary.json") {
        let _ = writeln!(
            s,
            "uncertainty: mean sigma aleatoric {} epistemic {} total {} (alpha {})",
            fmt(f(&u, "mean_sigma_aleatoric")),
            fmt(f(&u, "mean_sigma_epistemic")),
            fmt(f(&u, "mean_sigma_total")),
            fmt(f(&u, "alpha"))
        );
    }
    if let Some(t) = load(dir, "phase2/uq/tipping_points.json") {
        let pts = t["points"].as_array().cloned().unwrap_or_default();
        let _ = writeln!(s, "tipping points: {}", pts.len());
        for p in pts.iter().take(8) {
            let _ = writeln!(
                s,
                "  {} {} at {} (magnitude {})",
                p["dim"].as_str().unwrap_or("?"),
                p["kind"].as_str().unwrap_or("?"),
                fmt(f(p, "value")),
                fmt(f(p, "magnitude"))
            );
        }
    }

    if !missing.is_empty() {
        let _ = writeln!(s, "\nmissing artifacts:");
        for m in &missing {
            let _ = writeln!(s, "  {m}");
        }
    }
    Ok(Report { text: s, missing })
}
