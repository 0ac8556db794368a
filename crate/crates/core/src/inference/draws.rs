//! Posterior draw storage and the `draws.bin` file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "CGNDRAW1"
//! version    u32      1
//! chains     u32
//! draws      u32      per chain
//! dim        u32
//! names      dim x (u32 byte length, UTF-8 bytes)
//! meta       u32 byte length, UTF-8 JSON
//! values     chains x draws x dim f64, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nuts::SamplerConfig;
use super::variant::ModelSpec;
use crate::error::{Error, Result};
use crate::simulate::Group;

const MAGIC: &[u8; 8] = b"CGNDRAW1";
const VERSION: u32 = 1;

/// Per-chain adaptation and sampling record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub step_size: f64,
    pub inv_metric_min: f64,
    pub inv_metric_max: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub max_depth_hits: usize,
    pub mean_tree_depth: f64,
    pub mean_accept_stat: f64,
}

/// Run metadata stored alongside the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub spec: ModelSpec,
    pub config: SamplerConfig,
    pub participant_ids: Vec<u32>,
    pub groups: Vec<Group>,
    pub n_records: usize,
    pub chains: Vec<ChainMeta>,
    /// Post-warmup divergence rate over all chains.
    pub divergence_rate: f64,
    pub warnings: Vec<String>,
}

/// Constrained-scale draws, `chains x draws x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub values: Vec<f64>,
    pub meta: Option<DrawsMeta>,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, n_chains: usize, n_draws: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_chains * n_draws * names.len() {
            return Err(Error::Mismatch(format!(
                "{} values for {n_chains} chains x {n_draws} draws x {} names",
                values.len(),
                names.len()
            )));
        }
        Ok(Self {
            names,
            n_chains,
            n_draws,
            values,
            meta: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn total_draws(&self) -> usize {
        self.n_chains * self.n_draws
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Row `draw` of chain `chain`.
    pub fn row(&self, chain: usize, draw: usize) -> &[f64] {
        let d = self.dim();
        let start = (chain * self.n_draws + draw) * d;
        &self.values[start..start + d]
    }

    /// All rows in chain order.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim().max(1))
    }

    /// Per-chain draws of one coordinate.
    pub fn chains_of(&self, index: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains)
            .map(|c| (0..self.n_draws).map(|i| self.row(c, i)[index]).collect())
            .collect()
    }

    /// Pooled draws of one coordinate.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.rows().map(|r| r[index]).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.n_chains as u32, self.n_draws as u32, self.dim() as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for name in &self.names {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        let meta = match &self.meta {
            Some(m) => serde_json::to_vec(m).map_err(std::io::Error::other)?,
            None => b"null".to_vec(),
        };
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = DrawsReader::open(path)?;
        let mut values = Vec::with_capacity(reader.total_rows() * reader.dim());
        while let Some(row) = reader.next_row()? {
            values.extend_from_slice(row);
        }
        Ok(Self {
            names: reader.names,
            n_chains: reader.n_chains,
            n_draws: reader.n_draws,
            values,
            meta: reader.meta,
        })
    }
}

/// Streams a `draws.bin` file one row at a time.
pub struct DrawsReader {
    pub names: Vec<String>,
    pub n_chains: usize,
    pub n_draws: usize,
    pub meta: Option<DrawsMeta>,
    reader: BufReader<File>,
    row: Vec<f64>,
    buf: Vec<u8>,
    rows_read: usize,
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R, limit: usize) -> Result<String> {
    let len = read_u32(r).map_err(|e| Error::DrawsFormat(e.to_string()))? as usize;
    if len > limit {
        return Err(Error::DrawsFormat(format!("string of {len} bytes exceeds limit")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(|e| Error::DrawsFormat(e.to_string()))?;
    String::from_utf8(b).map_err(|e| Error::DrawsFormat(e.to_string()))
}

impl DrawsReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let fmt = |e: std::io::Error| Error::DrawsFormat(e.to_string());
        let mut magic = [0u8; 8];
        reader.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::DrawsFormat("bad magic bytes".into()));
        }
        let version = read_u32(&mut reader).map_err(fmt)?;
        if version != VERSION {
            return Err(Error::DrawsFormat(format!("unsupported version {version}")));
        }
        let n_chains = read_u32(&mut reader).map_err(fmt)? as usize;
        let n_draws = read_u32(&mut reader).map_err(fmt)? as usize;
        let dim = read_u32(&mut reader).map_err(fmt)? as usize;
        let names = (0..dim).map(|_| read_string(&mut reader, 1 << 16)).collect::<Result<Vec<_>>>()?;
        let meta_json = read_string(&mut reader, 1 << 30)?;
        let meta: Option<DrawsMeta> = serde_json::from_str(&meta_json)?;
        Ok(Self {
            names,
            n_chains,
            n_draws,
            meta,
            reader,
            row: vec![0.0; dim],
            buf: vec![0u8; dim * 8],
            rows_read: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn total_rows(&self) -> usize {
        self.n_chains * self.n_draws
    }

    /// The next row, or `None` after the last one.
    pub fn next_row(&mut self) -> Result<Option<&[f64]>> {
        if self.rows_read == self.total_rows() {
            return Ok(None);
        }
        self.reader
            .read_exact(&mut self.buf)
            .map_err(|e| Error::DrawsFormat(format!("row {}: {e}", self.rows_read)))?;
        for (v, b) in self.row.iter_mut().zip(self.buf.chunks_exact(8)) {
            *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
        }
        self.rows_read += 1;
        Ok(Some(&self.row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("draws.bin");
        let values: Vec<f64> = (0..2 * 3 * 2).map(|i| i as f64 * 0.5 - 1.0).collect();
        let d = PosteriorDraws::new(vec!["a".into(), "b[1]".into()], 2, 3, values).unwrap();
        d.write(&path).unwrap();
        let back = PosteriorDraws::read(&path).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.row(1, 2), &[4.0, 4.5]);
        assert_eq!(back.chains_of(0)[1], vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"not a draws file").unwrap();
        assert!(matches!(DrawsReader::open(&path), Err(Error::DrawsFormat(_))));
    }
}
