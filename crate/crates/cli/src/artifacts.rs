//! Provenance-stamped writers for every file the CLI emits.
//!
//! CSV files start with a `# ecozoom ...` comment line. JSON files carry a
//! top-level `provenance` object next to their payload.

use std::path::Path;

use ecozoom::analysis::{CurveSet, SobolIndices, UncertaintyField, UncertaintyProfile};
use ecozoom::io::{write_csv, write_json, Provenance};
use ecozoom::runner::Dataset;
use ecozoom::sim::Regime;
use ecozoom::space::ParameterSpace;
use ecozoom::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_artifact<T: Serialize>(path: &Path, provenance: &Provenance, body: &T) -> Result<()> {
    write_json(
        path,
        &Artifact {
            provenance: provenance.clone(),
            body,
        },
    )
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable config");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Run counts per regime, one block per labelled dataset.
pub fn write_regimes(path: &Path, provenance: &Provenance, sets: &[(&str, &Dataset)]) -> Result<()> {
    let mut rows = Vec::new();
    for (phase, ds) in sets {
        let shares = ds.class_shares();
        for regime in Regime::ALL {
            let count = ds.records.iter().filter(|r| r.outcome.label == regime).count();
            rows.push(vec![
                phase.to_string(),
                regime.to_string(),
                count.to_string(),
                num(shares[regime.index()]),
            ]);
        }
    }
    write_csv(path, &header(&["phase", "regime", "count", "share"]), &rows, Some(provenance))
}

/// First and total indices per dimension, ordered by decreasing total.
pub fn write_sobol_csv(path: &Path, provenance: &Provenance, s: &SobolIndices) -> Result<()> {
    let mut cols = vec!["dim", "s1", "st"];
    if s.bootstrap_ci.is_some() {
        cols.extend(["s1_lo", "s1_hi", "st_lo", "st_hi"]);
    }
    let rows = s
        .ranked_by_total()
        .into_iter()
        .map(|i| {
            let mut row = vec![s.names[i].clone(), num(s.s1[i]), num(s.st[i])];
            if let Some(ci) = &s.bootstrap_ci {
                row.extend([ci.s1[i].lo, ci.s1[i].hi, ci.st[i].lo, ci.st[i].hi].map(num));
            }
            row
        })
        .collect::<Vec<_>>();
    write_csv(path, &header(&cols), &rows, Some(provenance))
}

pub fn write_sobol_pairs(path: &Path, provenance: &Provenance, s: &SobolIndices) -> Result<()> {
    let rows = s.s2.iter().map(|p| vec![p.a.clone(), p.b.clone(), num(p.s2)]).collect::<Vec<_>>();
    write_csv(path, &header(&["a", "b", "s2"]), &rows, Some(provenance))
}

/// Wide curve table: a `grid` row with x values, a `pdp` row, then one
/// `ice` row per instance.
pub fn write_curves(path: &Path, provenance: &Provenance, c: &CurveSet) -> Result<()> {
    let mut cols = vec!["kind".to_string(), "instance_id".to_string(), "color_key".to_string()];
    cols.extend((0..c.grid.len()).map(|g| format!("g{g}")));
    let row = |kind: &str, id: String, color: String, ys: &[f64]| {
        let mut r = vec![kind.to_string(), id, color];
        r.extend(ys.iter().copied().map(num));
        r
    };
    let mut rows = vec![
        row("grid", String::new(), String::new(), &c.grid),
        row("pdp", String::new(), String::new(), &c.pdp),
    ];
    for (i, curve) in c.ice.iter().enumerate() {
        let color = c.color_key.as_ref().map_or(String::new(), |k| num(k[i]));
        rows.push(row("ice", c.instance_ids[i].to_string(), color, curve));
    }
    write_csv(path, &cols, &rows, Some(provenance))
}

pub fn write_field(path: &Path, provenance: &Provenance, space: &ParameterSpace, ids: &[usize], f: &UncertaintyField) -> Result<()> {
    let mut cols = vec!["config_id".to_string()];
    cols.extend(space.names().iter().map(|s| s.to_string()));
    cols.extend(["p_hat", "p_surrogate", "sigma_aleatoric", "sigma_epistemic", "sigma_total"].map(String::from));
    let rows = (0..f.points.len())
        .map(|k| {
            let mut r = vec![ids[k].to_string()];
            r.extend(f.points[k].0.iter().copied().map(num));
            r.push(num(f.p_hat[k]));
            r.push(f.p_surrogate.as_ref().map_or(String::new(), |p| num(p[k])));
            r.extend([f.sigma_aleatoric[k], f.sigma_epistemic[k], f.sigma_total[k]].map(num));
            r
        })
        .collect::<Vec<_>>();
    write_csv(path, &cols, &rows, Some(provenance))
}

pub fn write_profile(path: &Path, provenance: &Provenance, p: &UncertaintyProfile, pdp: Option<&[f64]>) -> Result<()> {
    let rows = (0..p.grid.len())
        .map(|g| {
            vec![
                num(p.grid[g]),
                num(p.p_hat[g]),
                pdp.map_or(String::new(), |v| num(v[g])),
                num(p.sigma_aleatoric[g]),
                num(p.sigma_epistemic[g]),
                num(p.sigma_total[g]),
            ]
        })
        .collect::<Vec<_>>();
    let cols = [p.dim.as_str(), "p_hat", "pdp", "sigma_aleatoric", "sigma_epistemic", "sigma_total"];
    write_csv(path, &header(&cols), &rows, Some(provenance))
}
