//! Version-tagged JSON model files and gap recomputation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::model::{Dataset, DualMatrix, Problem};
use crate::regularizers::Regularizer;
use crate::structured::{maintained_dual, structured_primal, MulticlassOracle};

use super::write_atomic;

pub const FORMAT_NAME: &str = "proxsdca-model";
pub const FORMAT_VERSION: u32 = 1;

/// Stored and recomputed values may differ by this much before a model is
/// reported as inconsistent.
pub const INTEGRITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    /// `erm`, `l1l2`, `l1linf` or `struct`.
    pub task: String,
    /// Length of `w`.
    pub dim: usize,
    /// Scores per example: 1 for scalar losses, the class count otherwise.
    pub classes: usize,
    pub loss: Loss,
    pub regularizer: Regularizer,
    pub lambda: f64,
    pub sigma: Option<f64>,
    pub seed: u64,
    /// Update rule number, absent for structured training.
    pub option: Option<u8>,
}

impl ModelHeader {
    pub fn new(task: &str, dim: usize, classes: usize, loss: Loss, regularizer: Regularizer, lambda: f64) -> Self {
        ModelHeader {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            task: task.into(),
            dim,
            classes,
            loss,
            regularizer,
            lambda,
            sigma: None,
            seed: 0,
            option: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseWeights {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseWeights {
    pub fn from_dense(w: &[f64]) -> Self {
        let (indices, values) = w
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(j, &x)| (j, x))
            .unzip();
        SparseWeights { indices, values }
    }

    pub fn to_dense(&self, dim: usize) -> Result<Vec<f64>> {
        let mut w = vec![0.0; dim];
        for (&j, &x) in self.indices.iter().zip(&self.values) {
            *w.get_mut(j)
                .ok_or_else(|| Error::invalid(format!("weight index {j} out of range for {dim}")))? = x;
        }
        Ok(w)
    }
}

/// What the dual side of the certificate is rebuilt from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// The dual matrix, column-major with `k` rows.
    Dual { k: usize, n: usize, alpha: Vec<f64> },
    /// Per-example dual terms of structured training.
    Structured { dual_terms: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalStats {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub header: ModelHeader,
    pub weights: SparseWeights,
    pub payload: Payload,
    #[serde(rename = "final")]
    pub final_stats: FinalStats,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ModelFile = serde_json::from_str(text)?;
        if model.header.format != FORMAT_NAME {
            return Err(Error::invalid(format!("not a model file (format {:?})", model.header.format)));
        }
        if model.header.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model file version {}",
                model.header.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn w(&self) -> Result<Vec<f64>> {
        self.weights.to_dense(self.header.dim)
    }
}

/// Stored against recomputed objective values of a model on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub stored: FinalStats,
    /// Largest absolute difference between stored and recomputed `P`, `D`, gap.
    pub mismatch: f64,
    /// True when the dual value was rebuilt from structured dual terms.
    pub structured: bool,
}

impl GapCertificate {
    pub fn consistent(&self) -> bool {
        self.mismatch <= INTEGRITY_TOL
    }
}

/// Recomputes `P`, `D` and the gap of `model` on `data` from scratch.
pub fn gap_report(model: &ModelFile, data: &Dataset) -> Result<GapCertificate> {
    let h = &model.header;
    if data.dim() != h.dim || data.arity() != h.classes {
        return Err(Error::Dimension(format!(
            "model has d = {}, k = {}; dataset has d = {}, k = {}",
            h.dim,
            h.classes,
            data.dim(),
            data.arity()
        )));
    }
    let w = model.w()?;
    let (primal, dual, structured) = match &model.payload {
        Payload::Dual { k, n, alpha } => {
            if *k != data.arity() || *n != data.n() || alpha.len() != k * n {
                return Err(Error::Dimension(format!(
                    "dual payload is {k} x {n}, dataset has {} x {}",
                    data.arity(),
                    data.n()
                )));
            }
            let columns = alpha.chunks(*k).map(<[f64]>::to_vec).collect();
            let alpha = DualMatrix::from_columns(*k, columns)?;
            let problem = Problem::new(data, h.loss.clone(), h.regularizer.clone(), h.lambda)?;
            let report = problem.gap_at(&w, &alpha)?;
            (report.primal, report.dual, false)
        }
        Payload::Structured { dual_terms } => {
            let Loss::Multiclass(cost) = &h.loss else {
                return Err(Error::invalid("structured payload needs a multiclass loss"));
            };
            if dual_terms.len() != data.n() {
                return Err(Error::Dimension(format!(
                    "{} dual terms for {} examples",
                    dual_terms.len(),
                    data.n()
                )));
            }
            let oracle = MulticlassOracle::new(data, cost.clone())?;
            let primal = structured_primal(&oracle, &w, h.lambda);
            (primal, maintained_dual(dual_terms, &w, h.lambda), true)
        }
    };
    let gap = primal - dual;
    let s = &model.final_stats;
    let mismatch = [(primal, s.primal), (dual, s.dual), (gap, s.gap)]
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(GapCertificate {
        primal,
        dual,
        gap,
        stored: *s,
        mismatch,
        structured,
    })
}
