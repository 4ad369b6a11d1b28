//! Labeled complex datasets and the `RFDS` container.
//!
//! Layout, little-endian: magic `RFDS`, `u32` version, `u64` sample count, `u32`
//! target width. Each sample is `u32` rank, `u32` axis sizes, `i32` label, the
//! `f64` targets, then the `(re, im)` `f64` payload.

use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{read_file, write_file, Error, Result};
use crate::linalg::{seeded_rng, C64};
use crate::model::ComplexArray;

pub const DATASET_MAGIC: &[u8; 4] = b"RFDS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<ComplexArray>,
    pub labels: Vec<i32>,
    /// Regression targets, `target_dim` values per sample.
    pub targets: Vec<Vec<f64>>,
    pub target_dim: usize,
}

/// Train, validation and test partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Dataset {
    pub fn new(samples: Vec<ComplexArray>, labels: Vec<i32>) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::LengthMismatch { left: samples.len(), right: labels.len() });
        }
        let targets = vec![Vec::new(); samples.len()];
        Ok(Self { samples, labels, targets, target_dim: 0 })
    }

    pub fn with_targets(mut self, targets: Vec<Vec<f64>>) -> Result<Self> {
        if targets.len() != self.samples.len() {
            return Err(Error::LengthMismatch { left: targets.len(), right: self.samples.len() });
        }
        let dim = targets.first().map_or(0, Vec::len);
        if targets.iter().any(|t| t.len() != dim) {
            return Err(Error::InvalidSpec("targets must share one width".into()));
        }
        self.targets = targets;
        self.target_dim = dim;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i32> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            target_dim: self.target_dim,
        }
    }

    /// 70/15/15 split after a seeded shuffle.
    pub fn split(&self, seed: u64) -> Splits {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut seeded_rng(seed));
        let n_train = self.len() * 70 / 100;
        let n_val = self.len() * 15 / 100;
        Splits {
            train: self.subset(&order[..n_train]),
            val: self.subset(&order[n_train..n_train + n_val]),
            test: self.subset(&order[n_train + n_val..]),
        }
    }
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(ds.target_dim as u32).to_le_bytes());
    for i in 0..ds.len() {
        let s = &ds.samples[i];
        buf.extend_from_slice(&(s.shape().len() as u32).to_le_bytes());
        for &dim in s.shape() {
            buf.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        buf.extend_from_slice(&ds.labels[i].to_le_bytes());
        for t in &ds.targets[i] {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        for z in s.data() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        if end > self.bytes.len() {
            return Err(Error::Format(format!("truncated at byte {}", self.pos)));
        }
        let out = self.bytes[self.pos..end].try_into().expect("sized slice");
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != DATASET_MAGIC {
        return Err(Error::Format("bad dataset magic".into()));
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = u64::from_le_bytes(r.take()?) as usize;
    let target_dim = r.u32()? as usize;
    // every sample needs at least a rank and a label
    if count > bytes.len() / 8 {
        return Err(Error::Format(format!("sample count {count} exceeds file size")));
    }
    let mut ds = Dataset { target_dim, ..Dataset::default() };
    for _ in 0..count {
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 16 {
            return Err(Error::Format(format!("implausible sample rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let label = i32::from_le_bytes(r.take()?);
        let target = (0..target_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        if n.saturating_mul(16) > bytes.len() - r.pos {
            return Err(Error::Format("truncated sample payload".into()));
        }
        let data = (0..n).map(|_| Ok(C64::new(r.f64()?, r.f64()?))).collect::<Result<Vec<_>>>()?;
        ds.samples.push(ComplexArray::new(shape, data)?);
        ds.labels.push(label);
        ds.targets.push(target);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after dataset".into()));
    }
    Ok(ds)
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_file(path, &encode_dataset(ds))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?)
}
