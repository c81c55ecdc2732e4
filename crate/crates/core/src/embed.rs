//! Embedding matrices and their expansion to a merged vocabulary.
//!
//! New rows are initialized either as the mean of the original embeddings of
//! the token's decomposition under the original tokenizer, or by sampling
//! from a normal distribution matched to the original matrix.
//!
//! The interchange format is `EMB1`, rows (u32 LE), dim (u32 LE), then
//! `rows * dim` little-endian f32 values in row-major order.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::tok::TokenizerModel;

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: u64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows.checked_mul(dim).ok_or(Error::DimensionOverflow {
            rows: rows as u64,
            dim: dim as u64,
        })?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{dim} matrix needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN as usize + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let found = bytes.len() as u64;
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                expected: HEADER_LEN,
                found,
            });
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN as usize {
            return Err(Error::Truncated {
                expected: HEADER_LEN,
                found,
            });
        }
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
        let payload = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .filter(|&n| usize::try_from(n).is_ok())
            .ok_or(Error::DimensionOverflow { rows, dim })?;
        let expected = HEADER_LEN + payload;
        if found < expected {
            return Err(Error::Truncated { expected, found });
        }
        if found > expected {
            return Err(Error::TrailingData(found - expected));
        }
        let data = bytes[HEADER_LEN as usize..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows as usize, dim as usize, data)
    }
}

pub fn save_matrix(matrix: &EmbeddingMatrix, path: &Path) -> Result<()> {
    atomic_write(path, &matrix.to_bytes())
}

pub fn load_matrix(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Averaged,
    Random,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "averaged" => Ok(Self::Averaged),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidParameter(format!(
                "unknown init mode {other:?} (expected averaged or random)"
            ))),
        }
    }
}

/// Expands `original` (one row per `original_tok` id) to one row per
/// `merged_tok` id. Rows below `original.rows()` are copied unchanged.
///
/// `merged_tok` must extend `original_tok`: every original surface keeps its
/// id. Applying this to an output projection as well as the input embedding
/// is the caller's call.
pub fn expand_embeddings(
    original: &EmbeddingMatrix,
    original_tok: &TokenizerModel,
    merged_tok: &TokenizerModel,
    mode: InitMode,
    seed: u64,
) -> Result<EmbeddingMatrix> {
    let old_rows = original.rows();
    if old_rows != original_tok.vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {old_rows} rows but the original tokenizer has {} tokens",
            original_tok.vocab_size()
        )));
    }
    if merged_tok.vocab_size() < old_rows {
        return Err(Error::ShapeMismatch(format!(
            "merged tokenizer ({}) is smaller than the original ({old_rows})",
            merged_tok.vocab_size()
        )));
    }
    for (id, surface) in original_tok.tokens().iter().enumerate() {
        if merged_tok.token(id as u32) != Some(surface.as_str()) {
            return Err(Error::ShapeMismatch(format!(
                "merged tokenizer does not preserve original id {id} ({surface:?})"
            )));
        }
    }

    let dim = original.dim();
    let new_tokens = &merged_tok.tokens()[old_rows..];
    let mut data = Vec::with_capacity(merged_tok.vocab_size() * dim);
    data.extend_from_slice(original.data());

    match mode {
        InitMode::Averaged => {
            let mut acc = vec![0f64; dim];
            for surface in new_tokens {
                let parts = original_tok.encode_surface(surface);
                acc.iter_mut().for_each(|a| *a = 0.0);
                for &id in &parts {
                    for (a, &v) in acc.iter_mut().zip(original.row(id as usize)) {
                        *a += v as f64;
                    }
                }
                let n = parts.len() as f64;
                data.extend(acc.iter().map(|a| (a / n) as f32));
            }
        }
        InitMode::Random => {
            if !new_tokens.is_empty() {
                let (means, std) = column_stats(original)?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let dists: Vec<Normal<f64>> = means
                    .iter()
                    .map(|&m| Normal::new(m, std).expect("finite, non-negative std"))
                    .collect();
                for _ in new_tokens {
                    data.extend(dists.iter().map(|d| d.sample(&mut rng) as f32));
                }
            }
        }
    }
    EmbeddingMatrix::new(merged_tok.vocab_size(), dim, data)
}

/// Per-column means and the population standard deviation of all values.
fn column_stats(m: &EmbeddingMatrix) -> Result<(Vec<f64>, f64)> {
    if m.rows() == 0 || m.dim() == 0 {
        return Err(Error::ShapeMismatch(
            "random initialization needs a non-empty original matrix".into(),
        ));
    }
    let mut means = vec![0f64; m.dim()];
    for r in 0..m.rows() {
        for (a, &v) in means.iter_mut().zip(m.row(r)) {
            *a += v as f64;
        }
    }
    let n = m.rows() as f64;
    means.iter_mut().for_each(|a| *a /= n);
    let total = m.data().len() as f64;
    let global_mean = m.data().iter().map(|&v| v as f64).sum::<f64>() / total;
    let var = m
        .data()
        .iter()
        .map(|&v| (v as f64 - global_mean).powi(2))
        .sum::<f64>()
        / total;
    Ok((means, var.sqrt()))
}
