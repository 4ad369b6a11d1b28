use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns_from, seeded_rng, CMatrix};
use crate::model::ComplexArray;

/// Tokens drawn from a union of random subspaces; each class fixes which subspace
/// every token position uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceMixtureSpec {
    /// Number of subspaces `K`.
    pub k: usize,
    /// Ambient dimension `d`.
    pub d: usize,
    /// Subspace dimension `p`.
    pub p: usize,
    pub tokens_per_sample: usize,
    pub noise_std: f64,
    pub classes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
    /// Subspace index per token position for each class; cycled if shorter than the sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<Vec<Vec<usize>>>,
}

/// A generated mixture with the bases that produced it.
#[derive(Clone, Debug)]
pub struct Mixture {
    pub dataset: Dataset,
    pub bases: Vec<CMatrix>,
    pub templates: Vec<Vec<usize>>,
}

impl SubspaceMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.d == 0 || self.p == 0 || self.tokens_per_sample == 0 || self.classes == 0 {
            return Err(Error::InvalidSpec("mixture counts must be >= 1".into()));
        }
        if self.p > self.d {
            return Err(Error::InvalidSpec(format!("p = {} exceeds d = {}", self.p, self.d)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        self.class_templates().map(|_| ())
    }

    /// One subspace per class when `classes <= K`, otherwise alternating unordered pairs.
    pub fn class_templates(&self) -> Result<Vec<Vec<usize>>> {
        if let Some(t) = &self.templates {
            if t.len() != self.classes {
                return Err(Error::InvalidSpec(format!(
                    "{} templates for {} classes",
                    t.len(),
                    self.classes
                )));
            }
            if t.iter().any(|row| row.is_empty() || row.iter().any(|&s| s >= self.k)) {
                return Err(Error::InvalidSpec(format!("template index out of range for K = {}", self.k)));
            }
            return Ok(t.clone());
        }
        if self.classes <= self.k {
            return Ok((0..self.classes).map(|c| vec![c]).collect());
        }
        let pairs: Vec<Vec<usize>> = (0..self.k)
            .flat_map(|a| (a + 1..self.k).map(move |b| vec![a, b]))
            .collect();
        if self.classes > pairs.len() {
            return Err(Error::InvalidSpec(format!(
                "{} classes exceed the {} default templates for K = {}",
                self.classes,
                pairs.len(),
                self.k
            )));
        }
        Ok(pairs.into_iter().take(self.classes).collect())
    }
}

/// Per-sample generator derived from the dataset seed.
fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub fn gen_subspace_mixture(spec: &SubspaceMixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let templates = spec.class_templates()?;
    let mut rng = seeded_rng(spec.seed);
    let bases = (0..spec.k)
        .map(|_| orthonormal_columns_from(spec.d, spec.p, &mut rng))
        .collect::<Result<Vec<_>>>()?;

    let total = spec.classes * spec.samples_per_class;
    let (n, d) = (spec.tokens_per_sample, spec.d);
    let samples: Vec<ComplexArray> = (0..total)
        .into_par_iter()
        .map(|i| {
            let class = i / spec.samples_per_class;
            let mut rng = sample_rng(spec.seed, i);
            let mut tokens = CMatrix::zeros(n, d);
            for t in 0..n {
                let template = &templates[class];
                let u = &bases[template[t % template.len()]];
                let coeff = CMatrix::complex_gaussian(spec.p, 1, 1.0, &mut rng);
                let noise = CMatrix::complex_gaussian(d, 1, spec.noise_std, &mut rng);
                let z = u.matmul(&coeff).add(&noise);
                for j in 0..d {
                    tokens[(t, j)] = z[(j, 0)];
                }
            }
            ComplexArray::from_matrix(&tokens)
        })
        .collect();
    let labels = (0..total).map(|i| (i / spec.samples_per_class) as i32).collect();
    Ok(Mixture { dataset: Dataset::new(samples, labels)?, bases, templates })
}
