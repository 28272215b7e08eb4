//! Binary checkpoints: `HVCK1` header, epoch, parameters, optimizer state and
//! an optional embedded dataset dump.

use std::io::{Read, Write};
use std::path::Path;

use super::optim::{OptimizerKind, OptimizerState};
use crate::error::{HviError, Result};
use crate::model::Dataset;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"HVCK1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u64,
    pub params: Vec<f64>,
    pub optimizer: OptimizerState,
    pub data: Option<Dataset>,
}

fn write_vec<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_vec<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let n = read_u64(r)?;
    if n > (1 << 32) {
        return Err(HviError::Format(format!("implausible vector length {n}")));
    }
    (0..n).map(|_| read_f64(r)).collect()
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&self.epoch.to_le_bytes())?;
        write_vec(&mut w, &self.params)?;
        let kind: u8 = match self.optimizer.kind {
            OptimizerKind::RmsProp => 0,
            OptimizerKind::Adamax => 1,
        };
        w.write_all(&[kind])?;
        w.write_all(&self.optimizer.lr.to_le_bytes())?;
        w.write_all(&self.optimizer.step.to_le_bytes())?;
        write_vec(&mut w, &self.optimizer.first)?;
        write_vec(&mut w, &self.optimizer.second)?;
        match &self.data {
            Some(d) => {
                w.write_all(&[1])?;
                d.write_binary(&mut w)?;
            }
            None => w.write_all(&[0])?,
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(HviError::Format("not an HVCK1 checkpoint".into()));
        }
        let epoch = read_u64(&mut r)?;
        let params = read_vec(&mut r)?;
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let kind = match byte[0] {
            0 => OptimizerKind::RmsProp,
            1 => OptimizerKind::Adamax,
            k => return Err(HviError::Format(format!("unknown optimizer tag {k}"))),
        };
        let lr = read_f64(&mut r)?;
        let step = read_u64(&mut r)?;
        let first = read_vec(&mut r)?;
        let second = read_vec(&mut r)?;
        if first.len() != params.len() || second.len() != params.len() {
            return Err(HviError::Format("optimizer state does not match parameters".into()));
        }
        r.read_exact(&mut byte)?;
        let data = match byte[0] {
            0 => None,
            1 => Some(Dataset::read_binary(&mut r)?),
            k => return Err(HviError::Format(format!("bad dataset flag {k}"))),
        };
        Ok(Self { epoch, params, optimizer: OptimizerState { kind, lr, step, first, second }, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
