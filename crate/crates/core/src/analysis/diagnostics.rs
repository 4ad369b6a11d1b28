use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::Model;
use crate::rate::{ssr, subspace_density};
use crate::synth::Dataset;

/// Per-head subspace attention outputs of one block over an evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadFeatures {
    /// `samples[i][k]` is head `k`'s `p x N` output for sample `i`.
    pub samples: Vec<Vec<CMatrix>>,
    pub labels: Vec<i32>,
    pub block: usize,
}

impl HeadFeatures {
    pub fn heads(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    fn check(&self) -> Result<usize> {
        let k = self.heads();
        if k == 0 {
            return Err(Error::InvalidShape("no head features".into()));
        }
        if self.samples.iter().any(|s| s.len() != k) {
            return Err(Error::InvalidShape("samples disagree on head count".into()));
        }
        Ok(k)
    }
}

/// Runs the model and keeps the per-head outputs of `block` (default: last).
pub fn collect_head_features(model: &Model, data: &Dataset, block: Option<usize>) -> Result<HeadFeatures> {
    let depth = model.config.depth;
    if depth == 0 {
        return Err(Error::Config("model has no blocks".into()));
    }
    let block = block.unwrap_or(depth - 1);
    if block >= depth {
        return Err(Error::Config(format!("block {block} out of range for depth {depth}")));
    }
    let samples = data
        .samples
        .par_iter()
        .map(|x| Ok(model.forward(x, true)?.blocks.swap_remove(block).heads))
        .collect::<Result<Vec<_>>>()?;
    Ok(HeadFeatures { samples, labels: data.labels.clone(), block })
}

/// Per-token mean modulus over the head's dimensions, concatenated over samples.
fn token_profile(f: &HeadFeatures, k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for s in &f.samples {
        let v = &s[k];
        for t in 0..v.cols() {
            out.push((0..v.rows()).map(|i| v[(i, t)].norm()).sum::<f64>() / v.rows() as f64);
        }
    }
    out
}

/// `K x K` matrix of `|<a_j, a_k>| / (|a_j| |a_k|)` between head activation profiles.
pub fn subspace_correlation(f: &HeadFeatures) -> Result<Vec<Vec<f64>>> {
    let k = f.check()?;
    if f.samples.len() < 2 {
        return Err(Error::InvalidShape(format!("correlation needs >= 2 samples, got {}", f.samples.len())));
    }
    let profiles: Vec<Vec<f64>> = (0..k).map(|j| token_profile(f, j)).collect();
    let norms: Vec<f64> = profiles.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateFeatures(format!("head {j} profile is identically zero")));
    }
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        out[a][a] = 1.0;
        for b in a + 1..k {
            let dot: f64 = profiles[a].iter().zip(&profiles[b]).map(|(x, y)| x * y).sum();
            let c = (dot.abs() / (norms[a] * norms[b])).min(1.0);
            out[a][b] = c;
            out[b][a] = c;
        }
    }
    Ok(out)
}

/// Mean of the off-diagonal entries.
pub fn mean_off_diagonal(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    if k < 2 {
        return 0.0;
    }
    let total: f64 = (0..k).flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b))).map(|(a, b)| m[a][b]).sum();
    total / (k * (k - 1)) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparsityProfile {
    /// Mean modulus per feature dimension.
    pub mean_abs: Vec<f64>,
    /// Smallest fraction of dimensions holding 90% of the modulus mass.
    pub mass90_fraction: f64,
}

/// Fraction of entries, largest first, needed to reach 90% of the total.
pub fn mass90_fraction(values: &[f64]) -> f64 {
    let total: f64 = values.iter().sum();
    if values.is_empty() || total <= 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let goal = 0.9 * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, v) in sorted.iter().enumerate() {
        acc += v;
        if acc >= goal {
            return (i + 1) as f64 / values.len() as f64;
        }
    }
    1.0
}

/// Per head: mean modulus of each dimension over all samples and tokens.
pub fn sparsity_profile(f: &HeadFeatures) -> Result<Vec<SparsityProfile>> {
    let k = f.check()?;
    Ok((0..k)
        .map(|j| {
            let p = f.samples[0][j].rows();
            let mut sums = vec![0.0; p];
            let mut count = 0usize;
            for s in &f.samples {
                let v = &s[j];
                for t in 0..v.cols() {
                    for (i, acc) in sums.iter_mut().enumerate() {
                        *acc += v[(i, t)].norm();
                    }
                    count += 1;
                }
            }
            let mean_abs: Vec<f64> = sums.iter().map(|s| s / count.max(1) as f64).collect();
            let mass90_fraction = mass90_fraction(&mean_abs);
            SparsityProfile { mean_abs, mass90_fraction }
        })
        .collect())
}

/// Per-head densities averaged over a set of samples.
fn mean_densities<'a>(samples: impl Iterator<Item = &'a Vec<CMatrix>>, k: usize) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; k];
    let mut count = 0usize;
    for s in samples {
        for (j, v) in s.iter().enumerate() {
            acc[j] += subspace_density(v, v.cols())?;
        }
        count += 1;
    }
    Ok(acc.into_iter().map(|a| a / count.max(1) as f64).collect())
}

/// Regularizer gap `sum_k (rho_k - min rho)` of the evaluation-set densities.
pub fn ssr_gap(f: &HeadFeatures) -> Result<f64> {
    let k = f.check()?;
    Ok(ssr(&mean_densities(f.samples.iter(), k)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccupancyTable {
    pub classes: Vec<i32>,
    /// `classes x K` densities divided by the table maximum.
    pub values: Vec<Vec<f64>>,
    /// Densities before normalization.
    pub raw: Vec<Vec<f64>>,
    /// Classes whose densities are all zero.
    pub zero_rows: Vec<i32>,
}

/// Mean per-head density for each class, normalized so the table maximum is 1.
pub fn occupancy_by_class(f: &HeadFeatures) -> Result<OccupancyTable> {
    let k = f.check()?;
    if f.labels.len() != f.samples.len() {
        return Err(Error::LengthMismatch { left: f.labels.len(), right: f.samples.len() });
    }
    let mut classes = f.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    let raw = classes
        .iter()
        .map(|&c| {
            let members = f.samples.iter().zip(&f.labels).filter(|(_, &l)| l == c).map(|(s, _)| s);
            mean_densities(members, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let max = raw.iter().flatten().copied().fold(0.0, f64::max);
    let values = raw
        .iter()
        .map(|row| row.iter().map(|v| if max > 0.0 { v / max } else { 0.0 }).collect())
        .collect();
    let zero_rows = classes
        .iter()
        .zip(&raw)
        .filter(|(_, row)| row.iter().all(|&v| v == 0.0))
        .map(|(&c, _)| c)
        .collect();
    Ok(OccupancyTable { classes, values, raw, zero_rows })
}

/// Everything `analyze` reports for one block.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsBundle {
    pub block: usize,
    pub correlation: Vec<Vec<f64>>,
    pub sparsity: Vec<SparsityProfile>,
    pub occupancy: OccupancyTable,
    pub ssr_gap: f64,
}

impl DiagnosticsBundle {
    pub fn compute(f: &HeadFeatures) -> Result<Self> {
        Ok(Self {
            block: f.block,
            correlation: subspace_correlation(f)?,
            sparsity: sparsity_profile(f)?,
            occupancy: occupancy_by_class(f)?,
            ssr_gap: ssr_gap(f)?,
        })
    }

    /// Writes `correlation.csv`, `sparsity.csv`, `sparsity_summary.csv` and
    /// `occupancy.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let k = self.correlation.len();
        let head_cols: Vec<String> = (0..k).map(|j| format!("head{j}")).collect();
        let mut written = Vec::new();

        let path = dir.join("correlation.csv");
        let mut w = csv_writer(&path)?;
        let mut header = vec!["head".to_string()];
        header.extend(head_cols.iter().cloned());
        write_row(&mut w, &header)?;
        for (j, row) in self.correlation.iter().enumerate() {
            let mut r = vec![j.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            write_row(&mut w, &r)?;
        }
        finish(w)?;
        written.push(path);

        let path = dir.join("sparsity.csv");
        let mut w = csv_writer(&path)?;
        write_row(&mut w, &["head", "dim", "mean_abs"])?;
        for (j, prof) in self.sparsity.iter().enumerate() {
            for (i, v) in prof.mean_abs.iter().enumerate() {
                write_row(&mut w, &[j.to_string(), i.to_string(), v.to_string()])?;
            }
        }
        finish(w)?;
        written.push(path);

        let path = dir.join("sparsity_summary.csv");
        let mut w = csv_writer(&path)?;
        write_row(&mut w, &["head", "mass90_fraction"])?;
        for (j, prof) in self.sparsity.iter().enumerate() {
            write_row(&mut w, &[j.to_string(), prof.mass90_fraction.to_string()])?;
        }
        finish(w)?;
        written.push(path);

        let path = dir.join("occupancy.csv");
        let mut w = csv_writer(&path)?;
        let mut header = vec!["class".to_string()];
        header.extend(head_cols.iter().cloned());
        header.push("zero_row".into());
        write_row(&mut w, &header)?;
        for (c, row) in self.occupancy.classes.iter().zip(&self.occupancy.values) {
            let mut r = vec![c.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            r.push(self.occupancy.zero_rows.contains(c).to_string());
            write_row(&mut w, &r)?;
        }
        finish(w)?;
        written.push(path);
        Ok(written)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn write_row<I, S>(w: &mut csv::Writer<std::fs::File>, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(csv_err)
}

fn finish(mut w: csv::Writer<std::fs::File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}
