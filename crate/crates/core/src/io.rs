//! File formats: observation and matrix CSV, model and experiment JSON.
//!
//! Matrix CSV is row-major with no header, one matrix row per line.
//! Observation CSV carries the header `a,b,y` with 0-based indices. JSON
//! artifacts embed matrices as nested row-major arrays. All files are UTF-8
//! with `.` as the decimal separator; floats are printed in Rust's shortest
//! round-trip form, so writing and re-reading is bit-exact.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::completion::{Observation, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg::Subspace;
use crate::sim::ExperimentResult;
use crate::transfer::TransferModel;

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidInput("matrix must have at least one row and column".into()));
    }
    let cols = rows[0].len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} entries, expected {cols}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    msg: format!("expected a decimal number, got {tok:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("row has {} entries, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    matrix_from_rows(&rows)
}

pub fn write_observations_csv(path: &Path, obs: &ObservationSet) -> Result<()> {
    let mut out = String::from("a,b,y\n");
    for s in obs.samples() {
        out.push_str(&format!("{},{},{}\n", s.a, s.b, s.y));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads `a,b,y` observations against declared dimensions; index bounds are
/// checked per line so errors cite the offending row.
pub fn read_observations_csv(path: &Path, p: usize, q: usize) -> Result<ObservationSet> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r').trim() == "a,b,y" => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header 'a,b,y', got {header:?}"),
            })
        }
        None => return Err(Error::Parse { line: 1, msg: "file is empty".into() }),
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let a: usize = fields[0].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("expected a row index, got {:?}", fields[0]),
        })?;
        let b: usize = fields[1].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("expected a column index, got {:?}", fields[1]),
        })?;
        let y: f64 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("expected a decimal response, got {:?}", fields[2]),
        })?;
        if a >= p || b >= q {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("cell ({a}, {b}) is outside the declared {p}x{q} matrix"),
            });
        }
        if !y.is_finite() {
            return Err(Error::Parse { line: line_no, msg: "response is not finite".into() });
        }
        samples.push(Observation { a, b, y });
    }
    ObservationSet::new(p, q, samples)
}

/// Reads a vector as one decimal per line.
pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("expected a decimal number, got {line:?}"),
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::Parse { line: 1, msg: "vector file is empty".into() });
    }
    Ok(DVector::from_vec(values))
}

/// Serialized form of a fitted transfer model. `p0`/`q0` are the dimensions
/// the model actually used (after any gate fallback).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub p: usize,
    pub q: usize,
    pub p0: usize,
    pub q0: usize,
    pub u_basis: Vec<Vec<f64>>,
    pub v_basis: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub gate_u_used_transfer: bool,
    pub gate_v_used_transfer: bool,
    pub selected_u: Vec<String>,
    pub selected_v: Vec<String>,
    pub residual_ss: f64,
    /// Echo of the configuration the model was fitted with.
    pub config: serde_json::Value,
}

pub fn model_to_json(model: &TransferModel, config_echo: serde_json::Value) -> ModelJson {
    ModelJson {
        p: model.u_hat.ambient_dim(),
        q: model.v_hat.ambient_dim(),
        p0: model.u_hat.dim(),
        q0: model.v_hat.dim(),
        u_basis: matrix_to_rows(model.u_hat.basis()),
        v_basis: matrix_to_rows(model.v_hat.basis()),
        gamma: matrix_to_rows(&model.gamma),
        gate_u_used_transfer: model.gate_u_used_transfer,
        gate_v_used_transfer: model.gate_v_used_transfer,
        selected_u: model.selected_u.iter().cloned().collect(),
        selected_v: model.selected_v.iter().cloned().collect(),
        residual_ss: model.residual_ss,
        config: config_echo,
    }
}

pub fn model_from_json(json: &ModelJson) -> Result<TransferModel> {
    let u_hat = Subspace::new(matrix_from_rows(&json.u_basis)?)?;
    let v_hat = Subspace::new(matrix_from_rows(&json.v_basis)?)?;
    let gamma = matrix_from_rows(&json.gamma)?;
    if u_hat.ambient_dim() != json.p || v_hat.ambient_dim() != json.q {
        return Err(Error::InvalidInput("basis shapes disagree with declared p/q".into()));
    }
    if gamma.nrows() != u_hat.dim() || gamma.ncols() != v_hat.dim() {
        return Err(Error::InvalidInput(format!(
            "gamma is {}x{} but the bases have dims {} / {}",
            gamma.nrows(),
            gamma.ncols(),
            u_hat.dim(),
            v_hat.dim()
        )));
    }
    let theta_hat = u_hat.basis() * &gamma * v_hat.basis().transpose();
    Ok(TransferModel {
        u_hat,
        v_hat,
        gamma,
        theta_hat,
        gate_u_used_transfer: json.gate_u_used_transfer,
        gate_v_used_transfer: json.gate_v_used_transfer,
        selected_u: json.selected_u.iter().cloned().collect(),
        selected_v: json.selected_v.iter().cloned().collect(),
        residual_ss: json.residual_ss,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Flat per-replication table: `method,rep,rel_error`, successes only.
pub fn write_experiment_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut out = String::from("method,rep,rel_error\n");
    for summary in &result.methods {
        for (rep, err) in summary.per_rep.iter().enumerate() {
            if let Some(e) = err {
                out.push_str(&format!("{},{},{}\n", summary.method.label(), rep, e));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
