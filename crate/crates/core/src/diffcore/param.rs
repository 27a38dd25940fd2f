use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Flat parameter vector shared by the policy and value networks.
///
/// Length is fixed at construction; every binary operation checks that its
/// partner has the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Returns `self + alpha * x` without modifying either input.
    pub fn axpy(&self, alpha: f64, x: &ParamVector) -> Result<ParamVector> {
        check_len("axpy", self.len(), x.len())?;
        Ok(ParamVector(
            self.0
                .iter()
                .zip(&x.0)
                .map(|(y, x)| y + alpha * x)
                .collect(),
        ))
    }

    /// In-place `self += alpha * x`.
    pub fn add_scaled(&mut self, alpha: f64, x: &ParamVector) -> Result<()> {
        check_len("add_scaled", self.len(), x.len())?;
        for (y, x) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * x;
        }
        Ok(())
    }

    /// `self - other`.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| alpha * v).collect())
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_len("dot", self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> Result<f64> {
        check_len("max_abs_diff", self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Writes the raw binary form: a little-endian `u64` length followed by
    /// that many little-endian `f64` values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.0.len() as u64).to_le_bytes())?;
        for v in &self.0 {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> std::io::Result<ParamVector> {
        let mut len_buf = [0u8; 8];
        r.read_exact(&mut len_buf)?;
        let len = u64::from_le_bytes(len_buf) as usize;
        let mut values = Vec::with_capacity(len.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "trailing bytes after parameter payload",
            ));
        }
        Ok(ParamVector(values))
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// JSON sidecar stored next to a binary parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSidecar {
    pub spec: serde_json::Value,
    pub created_at: String,
    pub tag: String,
}

/// Path of the sidecar belonging to a parameter file (`x.params` -> `x.params.json`).
pub fn sidecar_path(params_path: &Path) -> PathBuf {
    let mut name = params_path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes `params` to `path` and its sidecar to `path.json`.
pub fn save_params(path: &Path, params: &ParamVector, sidecar: &ParamSidecar) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + 8 * params.len());
    params.write_binary(&mut bytes)?;
    fs::write(path, bytes)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)? + "\n")?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<(ParamVector, ParamSidecar)> {
    let bytes = fs::read(path)?;
    let params = ParamVector::read_binary(bytes.as_slice()).map_err(|e| Error::Format {
        path: path.to_owned(),
        reason: e.to_string(),
    })?;
    let sidecar: ParamSidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
    Ok((params, sidecar))
}
