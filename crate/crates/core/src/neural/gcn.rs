//! Graph-convolutional network with a per-node classifier head or a pooled
//! scalar value head, plus its exact backward pass.
//!
//! Each convolution computes `H' = relu(A_hat H W + b)`. The classifier maps
//! the last embedding of every node through `sigmoid(h w + c)`; the value head
//! averages `h w` over nodes and adds `c`.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, NormalizedAdjacency};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    #[serde(rename = "classifier")]
    Classifier,
    #[serde(rename = "value")]
    Value,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Classifier => "classifier",
            Head::Value => "value",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub conv_layers: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            input: crate::features::NUM_FEATURES,
            hidden: 128,
            conv_layers: 3,
        }
    }
}

impl Architecture {
    /// Expected `(rows, cols)` of every parameter, in storage order:
    /// `W_0, b_0, ..., W_{L-1}, b_{L-1}, w_out, c_out`.
    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(2 * self.conv_layers + 2);
        for l in 0..self.conv_layers {
            let fan_in = if l == 0 { self.input } else { self.hidden };
            shapes.push((fan_in, self.hidden));
            shapes.push((1, self.hidden));
        }
        shapes.push((self.hidden, 1));
        shapes.push((1, 1));
        shapes
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug)]
pub struct GcnModel {
    arch: Architecture,
    head: Head,
    params: Vec<DenseMatrix>,
    /// Changes on every parameter mutation; ties caches to the weights that
    /// produced them.
    version: u64,
}

impl Clone for GcnModel {
    fn clone(&self) -> Self {
        GcnModel {
            arch: self.arch,
            head: self.head,
            params: self.params.clone(),
            version: fresh_version(),
        }
    }
}

impl PartialEq for GcnModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.head == other.head && self.params == other.params
    }
}

impl GcnModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(arch: Architecture, head: Head, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let params = arch
            .param_shapes()
            .into_iter()
            .enumerate()
            .map(|(idx, (r, c))| {
                // Weights and biases alternate.
                if idx % 2 == 1 {
                    DenseMatrix::zeros(r, c)
                } else {
                    let limit = (6.0 / (r + c) as f64).sqrt();
                    DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-limit..limit))
                }
            })
            .collect();
        GcnModel {
            arch,
            head,
            params,
            version: fresh_version(),
        }
    }

    pub fn zeros(arch: Architecture, head: Head) -> Self {
        let params = arch
            .param_shapes()
            .into_iter()
            .map(|(r, c)| DenseMatrix::zeros(r, c))
            .collect();
        GcnModel {
            arch,
            head,
            params,
            version: fresh_version(),
        }
    }

    pub fn from_params(arch: Architecture, head: Head, params: Vec<DenseMatrix>) -> Result<Self> {
        let shapes = arch.param_shapes();
        if params.len() != shapes.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                shapes.len(),
                params.len()
            )));
        }
        for (i, (p, s)) in params.iter().zip(&shapes).enumerate() {
            if p.shape() != *s {
                return Err(Error::Config(format!(
                    "parameter {i} has shape {:?}, architecture requires {s:?}",
                    p.shape()
                )));
            }
            if !p.is_finite() {
                return Err(Error::Config(format!("parameter {i} is not finite")));
            }
        }
        Ok(GcnModel {
            arch,
            head,
            params,
            version: fresh_version(),
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn params(&self) -> &[DenseMatrix] {
        &self.params
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [DenseMatrix] {
        self.version = fresh_version();
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(|p| p.data().len()).sum()
    }

    /// Order-sensitive hash of every parameter bit pattern.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for x in p.data() {
                h ^= x.to_bits();
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Overwrites parameters with another model's (target-network sync).
    pub fn copy_from(&mut self, other: &GcnModel) {
        assert_eq!(self.arch, other.arch);
        self.params.clone_from(&other.params);
        self.version = fresh_version();
    }

    pub fn require_head(&self, head: Head) -> Result<()> {
        if self.head != head {
            return Err(Error::Config(format!(
                "model has a {} head, a {} head is required",
                self.head.name(),
                head.name()
            )));
        }
        Ok(())
    }

    /// Runs the network; see [`gcn_forward`].
    pub fn forward(
        &self,
        features: &DenseMatrix,
        adj: &NormalizedAdjacency,
    ) -> Result<ForwardPass> {
        gcn_forward(self, features, adj)
    }

    /// Scalar value of a graph state; the model must carry a value head.
    pub fn value(&self, features: &DenseMatrix, adj: &NormalizedAdjacency) -> Result<f64> {
        self.require_head(Head::Value)?;
        Ok(self.forward(features, adj)?.output[0])
    }

    /// Per-node probabilities; the model must carry a classifier head.
    pub fn probabilities(
        &self,
        features: &DenseMatrix,
        adj: &NormalizedAdjacency,
    ) -> Result<Vec<f64>> {
        self.require_head(Head::Classifier)?;
        Ok(self.forward(features, adj)?.output)
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Per-node probabilities (classifier) or a single value.
    pub output: Vec<f64>,
    /// `A_hat H_l` for each convolution input.
    aggregated: Vec<DenseMatrix>,
    /// Pre-activations `A_hat H_l W_l + b_l`.
    pre_activations: Vec<DenseMatrix>,
    last_hidden: DenseMatrix,
    version: u64,
}

pub fn gcn_forward(
    model: &GcnModel,
    features: &DenseMatrix,
    adj: &NormalizedAdjacency,
) -> Result<ForwardPass> {
    let n = features.rows();
    if features.cols() != model.arch.input {
        return Err(Error::Config(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            model.arch.input
        )));
    }
    if adj.num_nodes() != n || n == 0 {
        return Err(Error::Config(format!(
            "adjacency covers {} nodes, features cover {n}",
            adj.num_nodes()
        )));
    }
    let layers = model.arch.conv_layers;
    let mut aggregated = Vec::with_capacity(layers);
    let mut pre_activations = Vec::with_capacity(layers);
    let mut h = features.clone();
    for l in 0..layers {
        let ax = adj.apply(&h);
        let mut z = ax.matmul(&model.params[2 * l]);
        z.add_row(model.params[2 * l + 1].data());
        let mut next = z.clone();
        next.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
        aggregated.push(ax);
        pre_activations.push(z);
        h = next;
    }
    let w_out = &model.params[2 * layers];
    let c_out = model.params[2 * layers + 1].data()[0];
    let scores = h.matmul(w_out);
    let output = match model.head {
        Head::Classifier => scores.data().iter().map(|&s| sigmoid(s + c_out)).collect(),
        Head::Value => vec![scores.data().iter().sum::<f64>() / n as f64 + c_out],
    };
    Ok(ForwardPass {
        output,
        aggregated,
        pre_activations,
        last_hidden: h,
        version: model.version,
    })
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Parameter gradients in the model's storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<DenseMatrix>,
}

impl Gradients {
    pub fn zeros_like(model: &GcnModel) -> Self {
        Gradients {
            tensors: model
                .params
                .iter()
                .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Exact gradients of a scalar loss given `d loss / d output`.
///
/// `output_grad` has one entry per node for the classifier head and a single
/// entry for the value head. The ReLU derivative at 0 is taken as 0.
pub fn gcn_backward(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    pass: &ForwardPass,
    output_grad: &[f64],
) -> Result<Gradients> {
    if pass.version != model.version {
        return Err(Error::Contract(
            "forward cache does not belong to the current parameters".into(),
        ));
    }
    if output_grad.len() != pass.output.len() {
        return Err(Error::Contract(format!(
            "output gradient has {} entries, forward produced {}",
            output_grad.len(),
            pass.output.len()
        )));
    }
    let layers = model.arch.conv_layers;
    let n = pass.last_hidden.rows();
    let mut grads = Gradients::zeros_like(model);

    // d loss / d score for every node, where score = h_i . w_out.
    let (d_scores, d_bias) = match model.head {
        Head::Classifier => {
            let d: Vec<f64> = pass
                .output
                .iter()
                .zip(output_grad)
                .map(|(&p, &g)| g * p * (1.0 - p))
                .collect();
            let total = d.iter().sum();
            (d, total)
        }
        Head::Value => (vec![output_grad[0] / n as f64; n], output_grad[0]),
    };
    let d_scores = DenseMatrix::from_vec(n, 1, d_scores);
    grads.tensors[2 * layers] = pass.last_hidden.t_matmul(&d_scores);
    grads.tensors[2 * layers + 1] = DenseMatrix::from_vec(1, 1, vec![d_bias]);

    let mut d_h = d_scores.matmul_t(&model.params[2 * layers]);
    for l in (0..layers).rev() {
        let z = &pass.pre_activations[l];
        for (g, &zv) in d_h.data_mut().iter_mut().zip(z.data()) {
            if zv <= 0.0 {
                *g = 0.0;
            }
        }
        let d_z = d_h;
        grads.tensors[2 * l] = pass.aggregated[l].t_matmul(&d_z);
        grads.tensors[2 * l + 1] = DenseMatrix::from_vec(1, d_z.cols(), d_z.column_sums());
        if l == 0 {
            break;
        }
        let d_ax = d_z.matmul_t(&model.params[2 * l]);
        // A_hat is symmetric, so its transpose is itself.
        d_h = adj.apply(&d_ax);
    }
    Ok(grads)
}
