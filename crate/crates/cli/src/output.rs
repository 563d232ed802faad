//! CSV and JSON report rendering. CSV files start with `#` comment lines that
//! echo the resolved configuration and the grid-spec hashes; the body is a
//! plain CSV table whose bytes depend only on the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridHash {
    pub p: usize,
    #[serde(rename = "K")]
    pub cells: usize,
    pub hash: String,
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub csv: String,
    pub json: Value,
    /// `false` when a verified property failed.
    pub passed: bool,
}

pub fn grid_hashes(config: &ExperimentConfig) -> Vec<GridHash> {
    config
        .sweep()
        .into_iter()
        .map(|(p, k)| GridHash { p, cells: k, hash: config.grid_spec(k, p).content_hash() })
        .collect()
}

/// Renders `rows` as CSV with the configuration header.
pub fn render_csv<R: Serialize>(config: &ExperimentConfig, rows: &[R]) -> Result<String> {
    let mut text = format!("# conga-hodge {}\n", config.kind.stem());
    text += &format!("# config: {}\n", serde_json::to_string(config)?);
    for g in grid_hashes(config) {
        text += &format!("# grid_hash p={} K={}: {}\n", g.p, g.cells, g.hash);
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let body = writer.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    text += &String::from_utf8(body).expect("csv output is utf-8");
    Ok(text)
}

/// JSON report with the configuration echo, rows and extra fields.
pub fn render_json<R: Serialize>(config: &ExperimentConfig, rows: &[R], extra: Value) -> Result<Value> {
    let mut report = json!({
        "kind": config.kind.stem(),
        "config": config,
        "grid_hashes": grid_hashes(config),
        "rows": rows,
    });
    if let (Value::Object(map), Value::Object(more)) = (&mut report, extra) {
        map.extend(more);
    }
    Ok(report)
}

/// Writes `<out>/<kind>_<timestamp>.csv` and `.json`, never overwriting.
pub fn write_outputs(output: &RunOutput, config: &ExperimentConfig, stamp: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&config.out)?;
    let base = unused_base(&config.out, &format!("{}_{stamp}", config.kind.stem()));
    let csv_path = base.with_extension("csv");
    let json_path = base.with_extension("json");
    fs::write(&csv_path, &output.csv)?;
    fs::write(&json_path, serde_json::to_string_pretty(&output.json)? + "\n")?;
    Ok((csv_path, json_path))
}

fn unused_base(dir: &Path, stem: &str) -> PathBuf {
    let taken = |b: &PathBuf| b.with_extension("csv").exists() || b.with_extension("json").exists();
    let mut base = dir.join(stem);
    let mut n = 1;
    while taken(&base) {
        base = dir.join(format!("{stem}_{n}"));
        n += 1;
    }
    base
}
