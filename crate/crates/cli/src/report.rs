//! `report`: summarizes the artifacts of a finished run directory.

use std::path::Path;

use locgibbs::gadget::log_log_slope;
use locgibbs::observables::correlation_length_fit;
use serde_json::{json, Map, Value};

use crate::output::{format_value, read_table, Table};
use crate::CliError;

/// Reads `manifest.json` and every CSV it lists, then writes `report.json`
/// next to them.
pub fn report(dir: &Path) -> Result<Value, CliError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let hash = manifest["config_sha256"].as_str().unwrap_or_default().to_string();
    let outputs: Vec<String> = manifest["outputs"].as_array().map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect()).unwrap_or_default();
    let mut tables = Map::new();
    for name in outputs.iter().filter(|n| n.ends_with(".csv")) {
        let (header, table) = read_table(&dir.join(name))?;
        if !header.contains(&format!("config_sha256={hash}")) {
            log::warn!("{name} was written by a different configuration than the manifest records");
        }
        tables.insert(name.clone(), summarize(name, &table)?);
    }
    let out = json!({
        "command": manifest["command"],
        "seed": manifest["seed"],
        "config_sha256": hash,
        "tables": tables,
    });
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&out).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(out)
}

fn summarize(name: &str, table: &Table) -> Result<Value, CliError> {
    let mut s = json!({ "rows": table.rows.len(), "columns": table.columns });
    if name == "gadget.csv" {
        s["slopes"] = json!(gadget_slopes(table));
        return Ok(s);
    }
    let Some(t_col) = table.column("t") else {
        return Ok(s);
    };
    // Sweep tables carry the grid coordinates before `t`; the last row of
    // each grid point is its final state.
    let mut finals: Vec<&Vec<f64>> = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let next_same = table.rows.get(i + 1).map_or(false, |n| n[..t_col] == row[..t_col]);
        if !next_same {
            finals.push(row);
        }
    }
    let corr: Vec<usize> = (1..).map_while(|l| table.column(&format!("corr_{l}"))).collect();
    let points: Vec<Value> = finals
        .iter()
        .map(|row| {
            let mut p = Map::new();
            for (c, v) in table.columns.iter().zip(row.iter()) {
                p.insert(c.clone(), json!(format_value(*v)));
            }
            if corr.len() >= 3 {
                let seps: Vec<f64> = (1..=corr.len()).map(|l| l as f64).collect();
                let deltas: Vec<f64> = corr.iter().map(|&c| row[c]).collect();
                match correlation_length_fit(&seps, &deltas) {
                    Ok(fit) => {
                        p.insert("correlation_length".into(), json!(format_value(fit.length)));
                        p.insert("correlation_fit_residual".into(), json!(fit.residual));
                    }
                    Err(e) => log::warn!("{name}: no correlation-length fit ({e})"),
                }
            }
            Value::Object(p)
        })
        .collect();
    s["final"] = Value::Array(points);
    Ok(s)
}

/// Log-log slope of the diamond upper bound against τ for each jump.
fn gadget_slopes(table: &Table) -> Vec<f64> {
    let (Some(tau), Some(alpha), Some(upper)) = (table.column("tau"), table.column("alpha"), table.column("diamond_upper")) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for a in 0.. {
        let rows: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[alpha] == a as f64).collect();
        if rows.is_empty() {
            break;
        }
        let x: Vec<f64> = rows.iter().map(|r| r[tau]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[upper]).collect();
        out.push(log_log_slope(&x, &y));
    }
    out
}
