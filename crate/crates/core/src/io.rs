//! Plain-text persistence for datasets: one whitespace-delimited matrix per
//! file (rows = matrix rows, 17 significant digits, enough to round-trip
//! f64 exactly) plus a JSON descriptor listing dimensions, the noise
//! variance, the seed and the matrix file paths.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataSet, ScenarioConfig};
use crate::stiefel::OrthonormalBasis;

#[derive(Debug, Serialize, Deserialize)]
struct DataSetDescriptor {
    config: ScenarioConfig,
    sigma2: f64,
    x_files: Vec<String>,
    h_true_files: Vec<String>,
}

/// Formats a value with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let malformed = |detail: String| Error::MalformedFile {
        path: path.display().to_string(),
        detail,
    };
    let text = fs::read_to_string(path)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut row_count = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut col_count = 0;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|e| malformed(format!("line {}: bad number {tok:?}: {e}", ln + 1)))?;
            data.push(v);
            col_count += 1;
        }
        if col_count != cols {
            return Err(malformed(format!(
                "line {}: expected {cols} columns, found {col_count}",
                ln + 1
            )));
        }
        row_count += 1;
    }
    if row_count != rows {
        return Err(malformed(format!(
            "expected {rows} rows, found {row_count}"
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Writes the descriptor at `descriptor_path` and the matrix files next to
/// it, named after the descriptor's stem.
pub fn write_dataset(data: &DataSet, descriptor_path: &Path) -> Result<()> {
    let dir = descriptor_path.parent().unwrap_or_else(|| Path::new("."));
    let stem = descriptor_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    let mut x_files = Vec::new();
    for (i, xk) in data.x.iter().enumerate() {
        let name = format!("{stem}_x{}.txt", i + 1);
        write_matrix(&dir.join(&name), xk)?;
        x_files.push(name);
    }
    let mut h_true_files = Vec::new();
    for (i, hk) in data.h_true.iter().enumerate() {
        let name = format!("{stem}_h{}.txt", i + 1);
        write_matrix(&dir.join(&name), hk.matrix())?;
        h_true_files.push(name);
    }

    let descriptor = DataSetDescriptor {
        config: data.config.clone(),
        sigma2: data.sigma2,
        x_files,
        h_true_files,
    };
    let json = serde_json::to_string_pretty(&descriptor)?;
    fs::write(descriptor_path, json)?;
    Ok(())
}

/// Loads a dataset from its JSON descriptor; matrix paths are resolved
/// relative to the descriptor's directory.
pub fn read_dataset(descriptor_path: &Path) -> Result<DataSet> {
    let text = fs::read_to_string(descriptor_path)?;
    let descriptor: DataSetDescriptor = serde_json::from_str(&text)?;
    descriptor.config.validate()?;
    let dir = descriptor_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |name: &str| -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            dir.join(p)
        }
    };

    let cfg = &descriptor.config;
    if descriptor.x_files.len() != cfg.k {
        return Err(Error::field(
            "x_files",
            format!("expected {} entries, got {}", cfg.k, descriptor.x_files.len()),
        ));
    }
    if descriptor.h_true_files.len() != cfg.k {
        return Err(Error::field(
            "h_true_files",
            format!(
                "expected {} entries, got {}",
                cfg.k,
                descriptor.h_true_files.len()
            ),
        ));
    }

    let mut x = Vec::with_capacity(cfg.k);
    for name in &descriptor.x_files {
        x.push(read_matrix(&resolve(name), cfg.m, cfg.t)?);
    }
    let mut h_true = Vec::with_capacity(cfg.k);
    for name in &descriptor.h_true_files {
        let mat = read_matrix(&resolve(name), cfg.m, cfg.r)?;
        let basis = OrthonormalBasis::new(mat).map_err(|e| Error::MalformedFile {
            path: resolve(name).display().to_string(),
            detail: format!("stored basis is not orthonormal: {e}"),
        })?;
        h_true.push(basis);
    }

    DataSet::new(x, h_true, descriptor.sigma2, descriptor.config)
}
