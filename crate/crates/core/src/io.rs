//! CSV and JSON persistence for designs, datasets and reports.
//!
//! CSV files may start with `#` comment lines carrying provenance; readers
//! skip them. Every CSV has a `<file>.meta.json` sidecar.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::{Dataset, DatasetMeta, RunRecord};
use crate::sim::{Outcome, Regime};
use crate::space::{Design, ParamVector, ParameterSpace, LHS_VARIANT};

/// Tool identity, configuration digest and seeds stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seeds: Vec<u64>) -> Self {
        Provenance {
            tool: "ecozoom".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            seeds,
        }
    }

    pub fn comment_line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# {} {} config={} seeds={}",
            self.tool,
            self.version,
            self.config_hash,
            seeds.join(";")
        )
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `bytes` through a temporary sibling file, removing it on failure.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders rows as CSV text with an optional provenance comment.
pub fn csv_text(header: &[String], rows: &[Vec<String>], provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        out.push_str(&p.comment_line());
        out.push('\n');
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv"));
    out
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>], provenance: Option<&Provenance>) -> Result<()> {
    write_atomic(path, csv_text(header, rows, provenance).as_bytes())
}

/// A parsed CSV table addressed by column name.
struct Table {
    path: PathBuf,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        let header = reader
            .headers()
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?
            .clone();
        let columns = header.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        let rows = reader
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|source| Error::Csv {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(Table {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn require(&self, names: &[&str]) -> Result<()> {
        for name in names {
            if !self.columns.contains_key(*name) {
                return Err(Error::schema(&self.path, format!("missing column {name:?}")));
            }
        }
        Ok(())
    }

    fn field<'r>(&self, row: &'r csv::StringRecord, line: usize, name: &str) -> Result<&'r str> {
        row.get(self.columns[name])
            .map(str::trim)
            .ok_or_else(|| Error::schema(&self.path, format!("row {line}: missing value for {name}")))
    }

    fn parse<T: std::str::FromStr>(&self, row: &csv::StringRecord, line: usize, name: &str) -> Result<T> {
        let raw = self.field(row, line, name)?;
        raw.parse()
            .map_err(|_| Error::schema(&self.path, format!("row {line}: cannot parse {name}={raw:?}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DesignMeta {
    space: ParameterSpace,
    seeds: Vec<u64>,
    design_seed: u64,
    sampler: String,
    lhs_variant: String,
    n_points: usize,
    replicates_per_point: usize,
    #[serde(default)]
    provenance: Option<Provenance>,
}

/// Writes the expanded design rows and the metadata sidecar.
pub fn save_design(path: &Path, design: &Design, provenance: Option<&Provenance>) -> Result<()> {
    let mut header = vec!["config_id".to_string(), "seed".to_string()];
    header.extend(design.space.dims.iter().map(|d| d.name.clone()));
    let rows: Vec<Vec<String>> = design
        .rows()
        .into_iter()
        .map(|row| {
            let mut cells = vec![row.config_id.to_string(), row.seed.to_string()];
            cells.extend(row.params.0.iter().map(f64::to_string));
            cells
        })
        .collect();
    write_csv(path, &header, &rows, provenance)?;
    let meta = DesignMeta {
        space: design.space.clone(),
        seeds: design.seeds.clone(),
        design_seed: design.design_seed,
        sampler: "latin-hypercube".into(),
        lhs_variant: LHS_VARIANT.into(),
        n_points: design.points.len(),
        replicates_per_point: design.replicates_per_point(),
        provenance: provenance.cloned(),
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn load_design(path: &Path) -> Result<Design> {
    let meta: DesignMeta = read_json(&sidecar_path(path))?;
    meta.space.validate()?;
    let table = Table::read(path)?;
    let names = meta.space.names();
    let mut required = vec!["config_id", "seed"];
    required.extend(names.iter().copied());
    table.require(&required)?;

    let mut points: Vec<Option<ParamVector>> = vec![None; meta.n_points];
    for (line, row) in table.rows.iter().enumerate() {
        let id: usize = table.parse(row, line + 1, "config_id")?;
        let values = names
            .iter()
            .map(|n| table.parse::<f64>(row, line + 1, n))
            .collect::<Result<Vec<_>>>()?;
        let p = ParamVector(values);
        if !meta.space.contains(&p) {
            return Err(Error::schema(path, format!("row {}: point outside the space", line + 1)));
        }
        let slot = points
            .get_mut(id)
            .ok_or_else(|| Error::schema(path, format!("row {}: config_id {id} out of range", line + 1)))?;
        match slot {
            Some(existing) if *existing != p => {
                return Err(Error::schema(path, format!("config_id {id} has conflicting values")))
            }
            _ => *slot = Some(p),
        }
    }
    let points = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| Error::schema(path, format!("config_id {i} has no rows"))))
        .collect::<Result<Vec<_>>>()?;
    if table.rows.len() != points.len() * meta.seeds.len() {
        return Err(Error::schema(path, "row count does not equal points x seeds"));
    }
    Ok(Design {
        space: meta.space,
        points,
        seeds: meta.seeds,
        design_seed: meta.design_seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetSidecar {
    space: ParameterSpace,
    #[serde(flatten)]
    meta: DatasetMeta,
    #[serde(default)]
    provenance: Option<Provenance>,
}

const RUN_COLUMNS: [&str; 7] = ["config_id", "seed", "label", "score", "final_prey", "final_pred", "end_tick"];

pub fn save_dataset(path: &Path, ds: &Dataset, provenance: Option<&Provenance>) -> Result<()> {
    let mut header: Vec<String> = RUN_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(ds.space.dims.iter().map(|d| d.name.clone()));
    header.push("wall_time_ms".into());
    let rows: Vec<Vec<String>> = ds
        .records
        .iter()
        .map(|r| {
            let mut cells = vec![
                r.config_id.to_string(),
                r.seed.to_string(),
                r.outcome.label.to_string(),
                r.outcome.score().to_string(),
                r.outcome.final_prey.to_string(),
                r.outcome.final_pred.to_string(),
                r.outcome.end_tick.to_string(),
            ];
            cells.extend(r.params.0.iter().map(f64::to_string));
            cells.push(format!("{:.3}", r.wall_time.as_secs_f64() * 1e3));
            cells
        })
        .collect();
    write_csv(path, &header, &rows, provenance)?;
    let sidecar = DatasetSidecar {
        space: ds.space.clone(),
        meta: ds.meta.clone(),
        provenance: provenance.cloned(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let sidecar: DatasetSidecar = read_json(&sidecar_path(path))?;
    sidecar.space.validate()?;
    let space = sidecar.space;
    let table = Table::read(path)?;
    let names = space.names();
    let mut required: Vec<&str> = RUN_COLUMNS.to_vec();
    required.extend(names.iter().copied());
    table.require(&required)?;

    let mut records = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let line = i + 1;
        let score: f64 = table.parse(row, line, "score")?;
        let by_score = Regime::from_score(score)
            .ok_or_else(|| Error::schema(path, format!("row {line}: score {score} is not one of 0, 0.5, 1")))?;
        let label: Regime = table
            .field(row, line, "label")?
            .parse()
            .map_err(|e: String| Error::schema(path, format!("row {line}: {e}")))?;
        if label != by_score {
            return Err(Error::schema(path, format!("row {line}: label {label} disagrees with score {score}")));
        }
        let final_prey: usize = table.parse(row, line, "final_prey")?;
        let final_pred: usize = table.parse(row, line, "final_pred")?;
        let outcome = Outcome::new(final_prey, final_pred, table.parse(row, line, "end_tick")?);
        if outcome.label != label {
            return Err(Error::schema(path, format!("row {line}: label {label} contradicts final counts")));
        }
        let params = ParamVector(
            names
                .iter()
                .map(|n| table.parse::<f64>(row, line, n))
                .collect::<Result<Vec<_>>>()?,
        );
        if !space.contains(&params) {
            return Err(Error::schema(path, format!("row {line}: parameters outside the space")));
        }
        let wall_time = match table.columns.get("wall_time_ms") {
            Some(_) => {
                let ms: f64 = table.parse(row, line, "wall_time_ms")?;
                Duration::from_secs_f64(ms.max(0.0) / 1e3)
            }
            None => Duration::ZERO,
        };
        records.push(RunRecord {
            config_id: table.parse(row, line, "config_id")?,
            seed: table.parse(row, line, "seed")?,
            params,
            outcome,
            wall_time,
        });
    }
    Dataset::new(space, records, sidecar.meta).map_err(|e| Error::schema(path, e.to_string()))
}
