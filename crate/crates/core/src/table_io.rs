//! On-disk format for extremal tables: a CSV with one row per rank and a
//! JSON sidecar with the run metadata.
//!
//! CSV header is `k,power,split,generator`; `split = 0` encodes a whole
//! generator row and `generator` is the 0-based generator index, or -1
//! for split rows. Powers are written with 17 significant digits so that
//! a round trip reproduces the stored doubles bit for bit.

use crate::error::{Error, Result};
use crate::extremal::{ExtremalTable, SplitRecord, TieMode};
use crate::spectrum::Bc;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Metadata sidecar, serialized as JSON next to the table CSV.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TableSidecar {
    pub bc: Bc,
    pub dimension: u32,
    pub k_max: usize,
    pub generators: Vec<String>,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_rel_tol: Option<f64>,
    pub tool_version: String,
}

impl TableSidecar {
    pub fn of(table: &ExtremalTable) -> Self {
        let (mode, tie_rel_tol) = match table.tie_mode {
            TieMode::Exact => ("exact".to_string(), None),
            TieMode::Float { rel_tol } => ("float".to_string(), Some(rel_tol)),
        };
        TableSidecar {
            bc: table.bc,
            dimension: table.dimension,
            k_max: table.k_max(),
            generators: table.generator_labels.clone(),
            mode,
            tie_rel_tol,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Path of the JSON sidecar belonging to a table CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_table(table: &ExtremalTable, csv_path: &Path) -> Result<()> {
    let file = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_table_csv(table, &mut w).map_err(|e| Error::io(csv_path, e))?;

    let sidecar = TableSidecar::of(table);
    let json_path = sidecar_path(csv_path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::numerical(format!("sidecar serialization failed: {e}")))?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn write_table_csv<W: Write>(table: &ExtremalTable, mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,power,split,generator")?;
    for k in 1..=table.k_max() {
        match table.splits[k] {
            SplitRecord::Whole { generator } => {
                writeln!(w, "{k},{:.16e},0,{generator}", table.powers[k])?;
            }
            SplitRecord::Split { j } => {
                writeln!(w, "{k},{:.16e},{j},-1", table.powers[k])?;
            }
        }
    }
    Ok(())
}

/// Read a table CSV and its sidecar back into memory, validating the
/// schema: contiguous ranks from 1, positive powers, split points within
/// `1..=k/2`, and consistent split/generator columns.
pub fn read_table(csv_path: &Path) -> Result<ExtremalTable> {
    let json_path = sidecar_path(csv_path);
    let json = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: TableSidecar = serde_json::from_str(&json)
        .map_err(|e| Error::format(&json_path, 1, format!("bad sidecar: {e}")))?;

    let file = std::fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let reader = BufReader::new(file);

    let mut powers = vec![0.0f64];
    let mut splits = vec![SplitRecord::Whole { generator: 0 }];
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(csv_path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 {
            if trimmed != "k,power,split,generator" {
                return Err(Error::format(csv_path, 1, "missing table header"));
            }
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(csv_path, line_no, "expected 4 columns"));
        }
        let k: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(csv_path, line_no, "bad rank"))?;
        if k != powers.len() {
            return Err(Error::format(
                csv_path,
                line_no,
                format!("ranks must be contiguous from 1, found {k}"),
            ));
        }
        let power: f64 = fields[1]
            .parse()
            .map_err(|_| Error::format(csv_path, line_no, "bad power"))?;
        if !power.is_finite() || power <= 0.0 {
            return Err(Error::format(csv_path, line_no, "power must be positive"));
        }
        let split: usize = fields[2]
            .parse()
            .map_err(|_| Error::format(csv_path, line_no, "bad split"))?;
        let generator: i64 = fields[3]
            .parse()
            .map_err(|_| Error::format(csv_path, line_no, "bad generator index"))?;
        let record = if split == 0 {
            if generator < 0 || generator as usize >= sidecar.generators.len() {
                return Err(Error::format(
                    csv_path,
                    line_no,
                    "whole rows need a valid generator index",
                ));
            }
            SplitRecord::Whole {
                generator: generator as usize,
            }
        } else {
            if generator != -1 {
                return Err(Error::format(
                    csv_path,
                    line_no,
                    "split rows must carry generator = -1",
                ));
            }
            if split > k / 2 {
                return Err(Error::format(
                    csv_path,
                    line_no,
                    format!("split point {split} exceeds k/2 = {}", k / 2),
                ));
            }
            SplitRecord::Split { j: split }
        };
        powers.push(power);
        splits.push(record);
    }

    let k_max = powers.len() - 1;
    if k_max == 0 {
        return Err(Error::format(csv_path, 1, "table has no ranks"));
    }
    if k_max != sidecar.k_max {
        return Err(Error::format(
            csv_path,
            1,
            format!("CSV has {k_max} ranks but sidecar says {}", sidecar.k_max),
        ));
    }

    let tie_mode = match sidecar.mode.as_str() {
        "exact" => TieMode::Exact,
        "float" => TieMode::Float {
            rel_tol: sidecar.tie_rel_tol.unwrap_or(crate::extremal::TIE_REL_TOL),
        },
        other => {
            return Err(Error::format(
                &json_path,
                1,
                format!("unknown mode '{other}'"),
            ))
        }
    };

    Ok(ExtremalTable {
        bc: sidecar.bc,
        dimension: sidecar.dimension,
        generator_labels: sidecar.generators,
        powers,
        splits,
        exact_powers: None,
        exact_scale: None,
        tie_mode,
    })
}
