use super::config::ModelConfig;
use super::params::{ModelParams, Params};
use super::patch::{patchify, ComplexArray};
use crate::autodiff::{Eager, Graph};
use crate::error::{Error, Result};
use crate::layers::{attention_update_on, layernorm_on, mlp_eta, mlp_on, MlpConfig};
use crate::linalg::CMatrix;

/// Intermediate features of one block.
#[derive(Clone, Debug)]
pub struct BlockTrace<N> {
    pub input: N,
    /// Output of the attention step, before normalization.
    pub attention: N,
    /// Per-head subspace attention outputs, `p x (N+1)` each.
    pub heads: Vec<N>,
    pub normed: N,
    pub output: N,
}

#[derive(Clone, Debug)]
pub struct ForwardTrace<N> {
    /// Embedded sequence with the class token in column 0.
    pub tokens: N,
    pub features: N,
    /// Real head output as an `out x 1` column.
    pub head: N,
    /// Per-head attention outputs of the final block.
    pub last_heads: Vec<N>,
    /// Populated only when recording.
    pub blocks: Vec<BlockTrace<N>>,
}

/// `[cls, W_e P + PE]`.
pub fn embed_on<G: Graph>(g: &mut G, params: &Params<G::Node>, patches: &G::Node) -> G::Node {
    let projected = g.matmul(&params.embed, patches);
    let tokens = g.add(&projected, &params.pos);
    g.hstack(&[params.cls.clone(), tokens])
}

/// Runs the block stack on an embedded sequence.
pub fn blocks_on<G: Graph>(
    g: &mut G,
    config: &ModelConfig,
    params: &Params<G::Node>,
    seq: &G::Node,
    record: bool,
) -> Result<(G::Node, Vec<G::Node>, Vec<BlockTrace<G::Node>>)> {
    let n = g.value(seq).cols();
    let d = config.token_dim;
    if g.value(seq).rows() != d {
        return Err(Error::shape(format!("{d} rows"), g.value(seq).shape_string()));
    }
    let scale = n as f64 * config.epsilon * config.epsilon;
    let (alpha, beta) = (d as f64 / scale, config.subspace_dim as f64 / scale);
    let mlp_cfg = MlpConfig { eta: mlp_eta(alpha), ..config.mlp_config()? };

    let mut z = seq.clone();
    let mut last_heads = Vec::new();
    let mut traces = Vec::new();
    for block in &params.blocks {
        let att = attention_update_on(g, &z, &block.bases, block.output.as_deref(), config.kappa, beta);
        let normed = layernorm_on(g, &att.output, Some((&block.norm_scale, &block.norm_shift)));
        let out = mlp_on(g, &normed, &block.mlp_weight, block.mlp_bias.as_ref(), &mlp_cfg);
        if record {
            traces.push(BlockTrace {
                input: z.clone(),
                attention: att.output.clone(),
                heads: att.heads.clone(),
                normed: normed.clone(),
                output: out.clone(),
            });
        }
        last_heads = att.heads;
        z = out;
    }
    Ok((z, last_heads, traces))
}

/// `W |Z[:, 0]| + b`.
pub fn head_on<G: Graph>(g: &mut G, features: &G::Node, weight: &G::Node, bias: &G::Node) -> G::Node {
    let cls = g.columns(features, 0, 1);
    let modulus = g.abs(&cls);
    let lin = g.matmul(weight, &modulus);
    g.add(&lin, bias)
}

/// Embedding, blocks and head on a `patch_len x num_patches` matrix.
pub fn forward_on<G: Graph>(
    g: &mut G,
    config: &ModelConfig,
    params: &Params<G::Node>,
    patches: &CMatrix,
    record: bool,
) -> Result<ForwardTrace<G::Node>> {
    let expected = (config.patch.patch_len(), config.patch.num_patches());
    if patches.shape() != expected {
        return Err(Error::shape(format!("{}x{}", expected.0, expected.1), patches.shape_string()));
    }
    let p = g.constant(patches.clone());
    let tokens = embed_on(g, params, &p);
    let (features, last_heads, blocks) = blocks_on(g, config, params, &tokens, record)?;
    let head = head_on(g, &features, &params.head_weight, &params.head_bias);
    Ok(ForwardTrace { tokens, features, head, last_heads, blocks })
}

/// Real logits from the class-token modulus.
pub fn head_classify(features: &CMatrix, weight: &CMatrix, bias: &CMatrix) -> Vec<f64> {
    real_column(&head_on(&mut Eager, features, weight, bias))
}

/// Same construction as [`head_classify`] for regression outputs.
pub fn head_regress(features: &CMatrix, weight: &CMatrix, bias: &CMatrix) -> Vec<f64> {
    head_classify(features, weight, bias)
}

fn real_column(m: &CMatrix) -> Vec<f64> {
    m.as_slice().iter().map(|z| z.re).collect()
}

/// A configured network with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn patches(&self, x: &ComplexArray) -> Result<CMatrix> {
        patchify(x, &self.config.patch)
    }

    pub fn embed(&self, patches: &CMatrix) -> CMatrix {
        embed_on(&mut Eager, &self.params, patches)
    }

    /// Final features of an embedded sequence.
    pub fn features(&self, seq: &CMatrix) -> Result<CMatrix> {
        Ok(blocks_on(&mut Eager, &self.config, &self.params, seq, false)?.0)
    }

    pub fn forward(&self, x: &ComplexArray, record: bool) -> Result<ForwardTrace<CMatrix>> {
        let patches = self.patches(x)?;
        forward_on(&mut Eager, &self.config, &self.params, &patches, record)
    }

    /// Head outputs: logits or regression values.
    pub fn predict(&self, x: &ComplexArray) -> Result<Vec<f64>> {
        Ok(real_column(&self.forward(x, false)?.head))
    }
}
