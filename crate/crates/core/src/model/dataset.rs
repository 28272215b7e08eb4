use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{HviError, Result};

/// Magic bytes of the binary dataset dump.
pub const DATASET_MAGIC: &[u8; 4] = b"HVID";

/// Observations stored row-major, with the per-dimension sample mean and
/// centred sum of squares cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    dim: usize,
    mean: Vec<f64>,
    centered_ss: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer. Requires `n >= 1`.
    pub fn from_flat(values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(HviError::Config("dataset dimension must be >= 1".into()));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(HviError::Config(format!(
                "dataset buffer of length {} is not a nonempty multiple of d = {dim}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(HviError::Domain("dataset contains non-finite values".into()));
        }
        let n = values.len() / dim;
        let mut mean = vec![0.0; dim];
        for row in values.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut centered_ss = vec![0.0; dim];
        for row in values.chunks_exact(dim) {
            for j in 0..dim {
                let r = row[j] - mean[j];
                centered_ss[j] += r * r;
            }
        }
        Ok(Self { values, n, dim, mean, centered_ss })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(HviError::Config("dataset rows have differing lengths".into()));
        }
        Self::from_flat(rows.concat(), dim)
    }

    /// A dataset with no observations; conditioning on it leaves the prior
    /// unchanged.
    pub fn empty(dim: usize) -> Self {
        Self {
            values: Vec::new(),
            n: 0,
            dim,
            mean: vec![0.0; dim],
            centered_ss: vec![0.0; dim],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// `sum_i (x_ij - mean_j)^2` per dimension.
    pub fn centered_ss(&self) -> &[f64] {
        &self.centered_ss
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut v = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            v.extend_from_slice(self.row(i));
        }
        Self::from_flat(v, self.dim)
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// FNV-1a over the raw bytes; used to tell datasets apart cheaply.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325_u64;
        for v in &self.values {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Reads one observation per line. A non-numeric first line is treated as
    /// a header and skipped.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut values = Vec::new();
        let mut dim = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            let row = match parsed {
                Ok(r) => r,
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(HviError::Format(format!("line {}: {e}", i + 1)));
                }
            };
            match dim {
                None => dim = Some(row.len()),
                Some(d) if d != row.len() => {
                    return Err(HviError::Format(format!(
                        "line {}: expected {d} columns, got {}",
                        i + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            values.extend(row);
        }
        Self::from_flat(values, dim.unwrap_or(0))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary dump: `"HVID"`, `u32` N, `u32` d, then N·d little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(HviError::Format(format!("bad dataset magic {magic:?}")));
        }
        let n = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let mut values = Vec::with_capacity(n * dim);
        let mut buf = [0u8; 8];
        for _ in 0..n * dim {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Self::from_flat(values, dim)
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }

    /// Dispatches on the file contents: binary if it starts with the magic,
    /// CSV otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut head = [0u8; 4];
        let is_binary = File::open(path)?.read_exact(&mut head).is_ok() && &head == DATASET_MAGIC;
        if is_binary {
            Self::load_binary(path)
        } else {
            Self::read_csv(path)
        }
    }
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
