//! Hypergraph encoder, projection head and linear classifier.
//!
//! The encoder is a two-stage set message-passing stack: each block
//! aggregates vertex states into hyperedges with a weighted mean, transforms
//! them with an MLP, then aggregates hyperedge states back into vertices
//! with a residual update. Incidence weights enter both aggregations, so
//! gradients reach them.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffnum::{SegmentIndex, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::math;
use crate::seed::Rng as SeedRng;

/// Named access to every tensor of a parameter collection, in a fixed order.
pub trait Parameters {
    fn named(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

/// `x·weight + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut SeedRng) -> Self {
        let a = math::sqrt(6.0 / (fan_in + fan_out).max(1) as f64);
        let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect();
        Self {
            weight: Tensor::matrix(fan_in, fan_out, data).expect("consistent shape"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Tensor::zeros(&[fan_in, fan_out]), bias: Tensor::zeros(&[fan_out]) }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, vars: &mut Vec<Var>) -> LinearVars {
        let weight = tape.leaf(self.weight.clone(), trainable);
        let bias = tape.leaf(self.bias.clone(), trainable);
        vars.extend([weight, bias]);
        LinearVars { weight, bias }
    }
}

/// Two affine layers with a ReLU in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut SeedRng) -> Self {
        Self { first: Linear::init(input, hidden, rng), second: Linear::init(hidden, output, rng) }
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.first.named(&format!("{prefix}.first"), out);
        self.second.named(&format!("{prefix}.second"), out);
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.first.tensors_mut(out);
        self.second.tensors_mut(out);
    }

    pub(crate) fn bind(&self, tape: &mut Tape, trainable: bool, vars: &mut Vec<Var>) -> MlpVars {
        MlpVars { first: self.first.bind(tape, trainable, vars), second: self.second.bind(tape, trainable, vars) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Applied to aggregated vertex states to form hyperedge states.
    pub vertex_to_edge: Mlp,
    /// Applied to aggregated hyperedge states before the residual update.
    pub edge_to_vertex: Mlp,
}

/// Input projection plus `L` message-passing blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub input: Linear,
    pub blocks: Vec<Block>,
}

impl EncoderParams {
    pub fn init(in_dim: usize, hidden: usize, num_blocks: usize, rng: &mut SeedRng) -> Self {
        let input = Linear::init(in_dim, hidden, rng);
        let blocks = (0..num_blocks)
            .map(|_| Block {
                vertex_to_edge: Mlp::init(hidden, hidden, hidden, rng),
                edge_to_vertex: Mlp::init(hidden, hidden, hidden, rng),
            })
            .collect();
        Self { input, blocks }
    }

    pub fn hidden(&self) -> usize {
        self.input.fan_out()
    }

    pub fn in_dim(&self) -> usize {
        self.input.fan_in()
    }

    pub(crate) fn named_into<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        self.input.named(&format!("{prefix}.input"), out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.vertex_to_edge.named(&format!("{prefix}.blocks.{i}.vertex_to_edge"), out);
            b.edge_to_vertex.named(&format!("{prefix}.blocks.{i}.edge_to_vertex"), out);
        }
    }

    pub(crate) fn tensors_mut_into<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        self.input.tensors_mut(out);
        for b in &mut self.blocks {
            b.vertex_to_edge.tensors_mut(out);
            b.edge_to_vertex.tensors_mut(out);
        }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool, vars: &mut Vec<Var>) -> EncoderVars {
        EncoderVars {
            input: self.input.bind(tape, trainable, vars),
            blocks: self
                .blocks
                .iter()
                .map(|b| (b.vertex_to_edge.bind(tape, trainable, vars), b.edge_to_vertex.bind(tape, trainable, vars)))
                .collect(),
        }
    }
}

/// Encoder `f`, projection head `h` and classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub projection: Mlp,
    pub classifier: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub in_dim: usize,
    pub hidden: usize,
    pub proj: usize,
    pub num_classes: usize,
    pub num_blocks: usize,
}

impl ModelParams {
    pub fn init(dims: ModelDims, rng: &mut SeedRng) -> Result<Self> {
        if dims.num_blocks == 0 || dims.hidden == 0 || dims.proj == 0 || dims.num_classes == 0 {
            return Err(Error::InvalidArgument(format!("invalid model dimensions {dims:?}")));
        }
        Ok(Self {
            encoder: EncoderParams::init(dims.in_dim, dims.hidden, dims.num_blocks, rng),
            projection: Mlp::init(dims.hidden, dims.hidden, dims.proj, rng),
            classifier: Linear::init(dims.hidden, dims.num_classes, rng),
        })
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            in_dim: self.encoder.in_dim(),
            hidden: self.encoder.hidden(),
            proj: self.projection.second.fan_out(),
            num_classes: self.classifier.fan_out(),
            num_blocks: self.encoder.blocks.len(),
        }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> ModelVars {
        let mut vars = Vec::new();
        let encoder = self.encoder.bind(tape, trainable, &mut vars);
        let projection = self.projection.bind(tape, trainable, &mut vars);
        let classifier = self.classifier.bind(tape, trainable, &mut vars);
        ModelVars { encoder, projection, classifier, all: vars }
    }

    /// Reassembles parameters from `(name, tensor)` pairs as produced by
    /// [`Parameters::named`].
    pub fn from_named(entries: &[(String, Tensor)]) -> Result<Self> {
        let mut it = NamedReader::new(entries);
        let encoder = it.encoder("encoder")?;
        let projection = it.mlp("projection")?;
        let classifier = it.linear("classifier")?;
        it.finish()?;
        Ok(Self { encoder, projection, classifier })
    }
}

impl Parameters for ModelParams {
    fn named(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.encoder.named_into("encoder", &mut out);
        self.projection.named(&String::from("projection"), &mut out);
        self.classifier.named(&String::from("classifier"), &mut out);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        self.encoder.tensors_mut_into(&mut out);
        self.projection.tensors_mut(&mut out);
        self.classifier.tensors_mut(&mut out);
        out
    }
}

/// Sequential reader over named tensors (used for checkpoints).
pub(crate) struct NamedReader<'a> {
    entries: &'a [(String, Tensor)],
    pos: usize,
}

impl<'a> NamedReader<'a> {
    pub(crate) fn new(entries: &'a [(String, Tensor)]) -> Self {
        Self { entries, pos: 0 }
    }

    fn peek_name(&self) -> Option<&str> {
        self.entries.get(self.pos).map(|(n, _)| n.as_str())
    }

    fn take(&mut self, name: &str) -> Result<Tensor> {
        match self.entries.get(self.pos) {
            Some((n, t)) if n == name => {
                self.pos += 1;
                Ok(t.clone())
            }
            Some((n, _)) => Err(Error::InvalidArgument(format!("expected tensor `{name}`, found `{n}`"))),
            None => Err(Error::InvalidArgument(format!("missing tensor `{name}`"))),
        }
    }

    pub(crate) fn linear(&mut self, prefix: &str) -> Result<Linear> {
        let weight = self.take(&format!("{prefix}.weight"))?;
        let bias = self.take(&format!("{prefix}.bias"))?;
        if weight.rank() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::Shape {
                op: "checkpoint",
                shapes: alloc::vec![weight.shape().to_vec(), bias.shape().to_vec()],
            });
        }
        Ok(Linear { weight, bias })
    }

    pub(crate) fn mlp(&mut self, prefix: &str) -> Result<Mlp> {
        Ok(Mlp { first: self.linear(&format!("{prefix}.first"))?, second: self.linear(&format!("{prefix}.second"))? })
    }

    pub(crate) fn encoder(&mut self, prefix: &str) -> Result<EncoderParams> {
        let input = self.linear(&format!("{prefix}.input"))?;
        let mut blocks = Vec::new();
        loop {
            let tag = format!("{prefix}.blocks.{}.", blocks.len());
            if !self.peek_name().is_some_and(|n| n.starts_with(&tag)) {
                break;
            }
            blocks.push(Block {
                vertex_to_edge: self.mlp(&format!("{tag}vertex_to_edge"))?,
                edge_to_vertex: self.mlp(&format!("{tag}edge_to_vertex"))?,
            });
        }
        if blocks.is_empty() {
            return Err(Error::InvalidArgument(format!("encoder `{prefix}` has no blocks")));
        }
        Ok(EncoderParams { input, blocks })
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.peek_name() {
            None => Ok(()),
            Some(n) => Err(Error::InvalidArgument(format!("unexpected tensor `{n}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

impl LinearVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        tape.affine(x, self.weight, self.bias)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpVars {
    pub first: LinearVars,
    pub second: LinearVars,
}

impl MlpVars {
    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.first.forward(tape, x)?;
        let h = tape.relu(h)?;
        self.second.forward(tape, h)
    }
}

#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub input: LinearVars,
    pub blocks: Vec<(MlpVars, MlpVars)>,
}

#[derive(Debug, Clone)]
pub struct ModelVars {
    pub encoder: EncoderVars,
    pub projection: MlpVars,
    pub classifier: LinearVars,
    /// Every bound tensor, in [`Parameters::named`] order.
    pub all: Vec<Var>,
}

/// Incidence bookkeeping shared by every forward pass over one hypergraph.
#[derive(Debug, Clone)]
pub struct Structure {
    pub num_vertices: usize,
    pub num_hyperedges: usize,
    vertex_rows: Arc<[usize]>,
    edge_rows: Arc<[usize]>,
    by_edge: SegmentIndex,
    by_vertex: SegmentIndex,
}

impl Structure {
    pub fn of(h: &Hypergraph) -> Self {
        let vertex_rows: Vec<usize> = h.incidences().iter().map(|i| i.vertex).collect();
        let edge_rows: Vec<usize> = h.incidences().iter().map(|i| i.hyperedge).collect();
        Self {
            num_vertices: h.num_vertices(),
            num_hyperedges: h.num_hyperedges(),
            by_edge: SegmentIndex::new(edge_rows.clone(), h.num_hyperedges()).expect("validated hypergraph"),
            by_vertex: SegmentIndex::new(vertex_rows.clone(), h.num_vertices()).expect("validated hypergraph"),
            vertex_rows: vertex_rows.into(),
            edge_rows: edge_rows.into(),
        }
    }

    pub fn num_incidences(&self) -> usize {
        self.vertex_rows.len()
    }

    pub fn vertex_rows(&self) -> Arc<[usize]> {
        self.vertex_rows.clone()
    }

    pub fn edge_rows(&self) -> Arc<[usize]> {
        self.edge_rows.clone()
    }
}

/// Differentiable encoder pass.
///
/// `weights` is a length-`|incidences|` vector; `dropout[l]`, when given,
/// multiplies the vertex states entering block `l`.
pub fn encode_on_tape(
    tape: &mut Tape,
    structure: &Structure,
    features: Var,
    weights: Var,
    params: &EncoderVars,
    dropout: Option<&[Var]>,
) -> Result<(Var, Var)> {
    let f = tape.value(features).shape().to_vec();
    let w_in = tape.value(params.input.weight).shape()[0];
    if f.len() != 2 || f[1] != w_in || f[0] != structure.num_vertices {
        return Err(Error::Shape { op: "encode", shapes: alloc::vec![f, alloc::vec![w_in]] });
    }
    let x = params.input.forward(tape, features)?;
    let mut xv = tape.relu(x)?;
    let mut xe = None;
    for (l, (v2e, e2v)) in params.blocks.iter().enumerate() {
        if let Some(mask) = dropout.and_then(|d| d.get(l)) {
            xv = tape.mul(xv, *mask)?;
        }
        let gathered = tape.gather_rows(xv, structure.vertex_rows())?;
        let agg_e = tape.segment_weighted_mean(gathered, weights, &structure.by_edge)?;
        let e = v2e.forward(tape, agg_e)?;
        let back = tape.gather_rows(e, structure.edge_rows())?;
        let agg_v = tape.segment_weighted_mean(back, weights, &structure.by_vertex)?;
        let upd = e2v.forward(tape, agg_v)?;
        let sum = tape.add(xv, upd)?;
        xv = tape.relu(sum)?;
        xe = Some(e);
    }
    let xe = match xe {
        Some(e) => e,
        None => return Err(Error::InvalidArgument("encoder has no blocks".into())),
    };
    Ok((xv, xe))
}

/// `l2_normalize_rows(W₂·relu(W₁·z + b₁) + b₂)`.
pub fn project_on_tape(tape: &mut Tape, z: Var, head: &MlpVars) -> Result<Var> {
    let p = head.forward(tape, z)?;
    tape.l2_normalize_rows(p)
}

pub fn classify_on_tape(tape: &mut Tape, z: Var, head: &LinearVars) -> Result<Var> {
    head.forward(tape, z)
}

/// Binds the hypergraph's features and weights (or ones) as constants.
pub fn bind_inputs(tape: &mut Tape, h: &Hypergraph) -> (Var, Var) {
    let x = tape.constant(h.features().clone());
    let w = tape.constant(Tensor::vector(h.weights_or_ones()));
    (x, w)
}

/// Non-differentiable encoder pass returning `(Z_V, Z_E)`.
pub fn encode(h: &Hypergraph, params: &EncoderParams, dropout: Option<&[Tensor]>) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false, &mut Vec::new());
    let (x, w) = bind_inputs(&mut tape, h);
    let masks: Option<Vec<Var>> = dropout.map(|d| d.iter().map(|m| tape.constant(m.clone())).collect());
    let (zv, ze) = encode_on_tape(&mut tape, &Structure::of(h), x, w, &vars, masks.as_deref())?;
    Ok((tape.value(zv).clone(), tape.value(ze).clone()))
}

pub fn project(z_v: &Tensor, head: &Mlp) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = head.bind(&mut tape, false, &mut Vec::new());
    let z = tape.constant(z_v.clone());
    let p = project_on_tape(&mut tape, z, &vars)?;
    Ok(tape.value(p).clone())
}

pub fn classify(z_v: &Tensor, head: &Linear) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = head.bind(&mut tape, false, &mut Vec::new());
    let z = tape.constant(z_v.clone());
    let logits = classify_on_tape(&mut tape, z, &vars)?;
    Ok(tape.value(logits).clone())
}

/// Inverted-dropout masks (`0` or `1/(1−rate)`), one per block.
pub fn dropout_masks(rows: usize, cols: usize, blocks: usize, rate: f64, rng: &mut SeedRng) -> Vec<Tensor> {
    let keep = 1.0 - rate;
    (0..blocks)
        .map(|_| {
            let data = (0..rows * cols)
                .map(|_| if rate > 0.0 && rng.random::<f64>() < rate { 0.0 } else { 1.0 / keep })
                .collect();
            Tensor::matrix(rows, cols, data).expect("consistent shape")
        })
        .collect()
}
