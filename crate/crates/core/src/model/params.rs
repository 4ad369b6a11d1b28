use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::Result;
use crate::layers::{MlpParams, ReluVariant};
use crate::linalg::{seeded_rng, CMatrix, C64};
use crate::rate::SubspaceBank;

/// Learnable tensors of one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockParams<T> {
    pub bases: Vec<T>,
    pub output: Option<Vec<T>>,
    pub norm_scale: T,
    pub norm_shift: T,
    pub mlp_weight: T,
    /// Real modReLU bias, present only for that activation.
    pub mlp_bias: Option<T>,
}

/// Every learnable tensor, generic over storage so the same layout holds
/// matrices, tape handles or optimizer moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    pub embed: T,
    pub pos: T,
    pub cls: T,
    pub blocks: Vec<BlockParams<T>>,
    /// Real `out x d` map on the class token modulus.
    pub head_weight: T,
    pub head_bias: T,
}

pub type ModelParams = Params<CMatrix>;

/// A tensor slot with its stable name and whether it is constrained to be real.
pub struct Slot<'a, T> {
    pub name: String,
    pub real: bool,
    pub value: &'a T,
}

impl<T> Params<T> {
    /// Visits tensors in declaration order.
    pub fn visit<'a>(&'a self, mut f: impl FnMut(Slot<'a, T>)) {
        let mut emit = |name: String, real: bool, value: &'a T| f(Slot { name, real, value });
        emit("embed".into(), false, &self.embed);
        emit("pos".into(), false, &self.pos);
        emit("cls".into(), false, &self.cls);
        for (l, b) in self.blocks.iter().enumerate() {
            for (k, u) in b.bases.iter().enumerate() {
                emit(format!("block{l}.basis{k}"), false, u);
            }
            if let Some(out) = &b.output {
                for (k, w) in out.iter().enumerate() {
                    emit(format!("block{l}.output{k}"), false, w);
                }
            }
            emit(format!("block{l}.norm_scale"), false, &b.norm_scale);
            emit(format!("block{l}.norm_shift"), false, &b.norm_shift);
            emit(format!("block{l}.mlp_weight"), false, &b.mlp_weight);
            if let Some(bias) = &b.mlp_bias {
                emit(format!("block{l}.mlp_bias"), true, bias);
            }
        }
        emit("head_weight".into(), true, &self.head_weight);
        emit("head_bias".into(), true, &self.head_bias);
    }

    pub fn iter(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.visit(|s| out.push(s.value));
        out
    }

    pub fn iter_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.embed, &mut self.pos, &mut self.cls];
        for b in &mut self.blocks {
            out.extend(b.bases.iter_mut());
            if let Some(o) = &mut b.output {
                out.extend(o.iter_mut());
            }
            out.push(&mut b.norm_scale);
            out.push(&mut b.norm_shift);
            out.push(&mut b.mlp_weight);
            if let Some(bias) = &mut b.mlp_bias {
                out.push(bias);
            }
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    /// Real-constraint flag per tensor, in declaration order.
    pub fn real_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        self.visit(|s| out.push(s.real));
        out
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(|s| out.push(s.name));
        out
    }

    /// Same layout with every tensor transformed.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Params<U> {
        let embed = f(&self.embed);
        let pos = f(&self.pos);
        let cls = f(&self.cls);
        let mut block = |b: &BlockParams<T>| BlockParams {
            bases: b.bases.iter().map(&mut f).collect(),
            output: b.output.as_ref().map(|o| o.iter().map(&mut f).collect()),
            norm_scale: f(&b.norm_scale),
            norm_shift: f(&b.norm_shift),
            mlp_weight: f(&b.mlp_weight),
            mlp_bias: b.mlp_bias.as_ref().map(&mut f),
        };
        let blocks = self.blocks.iter().map(&mut block).collect();
        Params {
            embed,
            pos,
            cls,
            blocks,
            head_weight: f(&self.head_weight),
            head_bias: f(&self.head_bias),
        }
    }
}

impl ModelParams {
    /// Seeded initialization for `config`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let (d, k, p) = (config.token_dim, config.heads, config.subspace_dim);
        let plen = config.patch.patch_len();
        let n = config.patch.num_patches();
        let out = config.head.out_dim();
        let mlp_cfg = config.mlp_config()?;

        let embed = CMatrix::complex_gaussian(d, plen, 1.0 / (plen as f64).sqrt(), &mut rng);
        let pos = CMatrix::complex_gaussian(d, n, 0.02, &mut rng);
        let cls = CMatrix::complex_gaussian(d, 1, 1.0, &mut rng);
        let mut blocks = Vec::with_capacity(config.depth);
        for _ in 0..config.depth {
            let bank = SubspaceBank::random(d, k, p, rand::Rng::random(&mut rng))?;
            let output = if config.untied_output {
                Some(bank.bases().to_vec())
            } else {
                None
            };
            let mlp = MlpParams::init(mlp_cfg, d, rand::Rng::random(&mut rng))?;
            blocks.push(BlockParams {
                bases: bank.into_bases(),
                output,
                norm_scale: CMatrix::filled(d, 1, C64::new(1.0, 0.0)),
                norm_shift: CMatrix::zeros(d, 1),
                mlp_weight: mlp.weight,
                mlp_bias: (config.relu_variant == ReluVariant::ModRelu).then(|| mlp.bias),
            });
        }
        let head_weight = CMatrix::real_gaussian(out, d, 1.0 / (d as f64).sqrt(), &mut rng);
        let head_bias = CMatrix::zeros(out, 1);
        Ok(Self { embed, pos, cls, blocks, head_weight, head_bias })
    }

    /// Real scalars across all tensors; complex entries count twice.
    pub fn scalar_count(&self) -> usize {
        let mut total = 0;
        self.visit(|s| total += if s.real { s.value.len() } else { 2 * s.value.len() });
        total
    }

    /// Complex entries across all tensors.
    pub fn entry_count(&self) -> usize {
        self.iter().iter().map(|m| m.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().iter().all(|m| m.is_finite())
    }

    /// Largest orthonormality residual over all attention banks.
    pub fn bank_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                b.bases
                    .iter()
                    .map(|u| u.adjoint_matmul(u).max_abs_diff(&CMatrix::identity(u.cols())))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}
