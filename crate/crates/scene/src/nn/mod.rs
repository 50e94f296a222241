//! Minimal dense feed-forward networks with explicit reverse-mode differentiation.
//!
//! Networks are scalar-output: every architecture ends in a single unit whose
//! pre-activation goes through one of [`OutputActivation`]'s maps. Hidden layers
//! share one activation. Weights are plain row-major `Vec<f64>` matrices so the
//! whole state is inspectable, serializable, and deterministic.

mod optim;

pub use optim::{OptimizerKind, OptimizerState, StepMode};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    // Derivative from the pre-activation. ReLU at exactly 0 is 0.
    #[inline]
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Output-head activation. `Exp` clamps its pre-activation to [-30, 30] so the
/// forward value stays finite for any finite parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Exp,
    Sigmoid,
    Identity,
}

const EXP_CLAMP: f64 = 30.0;

impl OutputActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Exp => z.clamp(-EXP_CLAMP, EXP_CLAMP).exp(),
            OutputActivation::Sigmoid => sigmoid(z),
            OutputActivation::Identity => z,
        }
    }

    #[inline]
    fn grad(self, z: f64) -> f64 {
        match self {
            OutputActivation::Exp => {
                if z.abs() < EXP_CLAMP {
                    z.exp()
                } else {
                    0.0
                }
            }
            OutputActivation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            OutputActivation::Identity => 1.0,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// Dot product with four independent accumulators; fixed association so results
// are identical between the single-sample and batched paths. Plain mul/add
// keeps results bit-identical across targets with and without fused hardware.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

#[inline]
fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Dense feed-forward network with a scalar output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    hidden_activation: Activation,
    output_activation: OutputActivation,
    /// Row-major matrices, one per layer, shape `(layer_dims[l+1], layer_dims[l])`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    #[serde(skip)]
    revision: u64,
}

/// Per-layer gradients, shape-congruent with the [`Mlp`] they came from.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        ParamGrads {
            weights: mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: mlp.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= s;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v *= s;
            }
        }
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> f64 {
        let mut sq = 0.0;
        for w in &self.weights {
            for v in w {
                sq += v * v;
            }
        }
        for b in &self.biases {
            for v in b {
                sq += v * v;
            }
        }
        sq.sqrt()
    }

    pub(crate) fn congruent_with(&self, mlp: &Mlp) -> bool {
        self.weights.len() == mlp.weights.len()
            && self.biases.len() == mlp.biases.len()
            && self
                .weights
                .iter()
                .zip(&mlp.weights)
                .all(|(a, b)| a.len() == b.len())
            && self
                .biases
                .iter()
                .zip(&mlp.biases)
                .all(|(a, b)| a.len() == b.len())
    }
}

/// Intermediate state from a single-sample forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Inputs to each layer: `acts[0]` is the network input, `acts[l]` the
    /// activated output of layer `l-1`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    revision: u64,
}

/// Batched forward state: `k` samples processed layer-wise over flat row-major buffers.
#[derive(Debug, Clone)]
pub(crate) struct BatchCache {
    pub(crate) k: usize,
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    revision: u64,
}

impl Mlp {
    /// Builds a network with Glorot-uniform weights and zero biases,
    /// deterministic in `seed`.
    pub fn init(
        layer_dims: &[usize],
        hidden_activation: Activation,
        output_activation: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l];
            let fan_out = layer_dims[l + 1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new(-limit, limit);
            let mut w = vec![0.0; fan_in * fan_out];
            for v in &mut w {
                *v = dist.sample(&mut rng);
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            hidden_activation,
            output_activation,
            weights,
            biases,
            revision: 0,
        })
    }

    /// Builds a network from explicit weight and bias matrices.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        hidden_activation: Activation,
        output_activation: OutputActivation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(&layer_dims)?;
        let mlp = Mlp {
            layer_dims,
            hidden_activation,
            output_activation,
            weights,
            biases,
            revision: 0,
        };
        mlp.validate()?;
        Ok(mlp)
    }

    /// Checks the shape invariants; used after construction and deserialization.
    pub fn validate(&self) -> Result<()> {
        validate_dims(&self.layer_dims)?;
        let layers = self.layer_dims.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::InvalidArchitecture(format!(
                "expected {} weight/bias layers, got {}/{}",
                layers,
                self.weights.len(),
                self.biases.len()
            )));
        }
        for l in 0..layers {
            let rows = self.layer_dims[l + 1];
            let cols = self.layer_dims[l];
            if self.weights[l].len() != rows * cols {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} weights have {} entries, expected {}x{}",
                    l,
                    self.weights[l].len(),
                    rows,
                    cols
                )));
            }
            if self.biases[l].len() != rows {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} biases have {} entries, expected {}",
                    l,
                    self.biases[l].len(),
                    rows
                )));
            }
            if !self.weights[l].iter().chain(&self.biases[l]).all(|v| v.is_finite()) {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} contains non-finite parameters",
                    l
                )));
            }
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// Overwrites one weight (row-major index within its layer). Useful for
    /// constructing explicit networks and for finite-difference probes.
    pub fn set_weight(&mut self, layer: usize, index: usize, value: f64) -> Result<()> {
        let w = self
            .weights
            .get_mut(layer)
            .and_then(|w| w.get_mut(index))
            .ok_or_else(|| {
                Error::ShapeMismatch(format!("no weight ({}, {}) in this network", layer, index))
            })?;
        if !value.is_finite() {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        *w = value;
        self.revision += 1;
        Ok(())
    }

    /// Overwrites one bias.
    pub fn set_bias(&mut self, layer: usize, index: usize, value: f64) -> Result<()> {
        let b = self
            .biases
            .get_mut(layer)
            .and_then(|b| b.get_mut(index))
            .ok_or_else(|| {
                Error::ShapeMismatch(format!("no bias ({}, {}) in this network", layer, index))
            })?;
        if !value.is_finite() {
            return Err(Error::InvalidParameter("biases must be finite".into()));
        }
        *b = value;
        self.revision += 1;
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        self.revision += 1;
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        self.revision += 1;
        &mut self.biases
    }

    /// Zeroes the given input columns of the first-layer weight matrix.
    pub(crate) fn zero_input_columns(&mut self, cols: &[usize]) {
        let in_dim = self.layer_dims[0];
        let rows = self.layer_dims[1];
        let w = &mut self.weights_mut()[0];
        for &c in cols {
            debug_assert!(c < in_dim);
            for r in 0..rows {
                w[r * in_dim + c] = 0.0;
            }
        }
    }

    /// Runs the network on one input, returning the activated scalar output and
    /// the cache needed by [`Mlp::backward`].
    pub fn forward(&self, input: &[f64]) -> Result<(f64, ForwardCache)> {
        if input.len() != self.layer_dims[0] {
            return Err(Error::ShapeMismatch(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.layer_dims[0]
            )));
        }
        let layers = self.num_layers();
        let mut acts = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        acts.push(input.to_vec());
        for l in 0..layers {
            let in_dim = self.layer_dims[l];
            let out_dim = self.layer_dims[l + 1];
            let a = &acts[l];
            let mut z = vec![0.0; out_dim];
            for o in 0..out_dim {
                z[o] = self.biases[l][o] + dot(&self.weights[l][o * in_dim..(o + 1) * in_dim], a);
            }
            if l + 1 < layers {
                let mut a_next = vec![0.0; out_dim];
                for (an, &zo) in a_next.iter_mut().zip(&z) {
                    *an = self.hidden_activation.apply(zo);
                }
                acts.push(a_next);
            }
            pre.push(z);
        }
        let out = self.output_activation.apply(pre[layers - 1][0]);
        Ok((
            out,
            ForwardCache {
                acts,
                pre,
                revision: self.revision,
            },
        ))
    }

    /// Reverse-mode derivatives of the scalar output, scaled by `upstream_grad`.
    /// Returns parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, upstream_grad: f64) -> Result<(ParamGrads, Vec<f64>)> {
        self.check_cache(cache.revision, cache.acts.len(), cache.acts[0].len())?;
        let layers = self.num_layers();
        let mut grads = ParamGrads::zeros_like(self);
        let last = layers - 1;
        let mut dz = vec![upstream_grad * self.output_activation.grad(cache.pre[last][0])];
        for l in (0..layers).rev() {
            let in_dim = self.layer_dims[l];
            let out_dim = self.layer_dims[l + 1];
            let a = &cache.acts[l];
            let gw = &mut grads.weights[l];
            for o in 0..out_dim {
                let d = dz[o];
                grads.biases[l][o] = d;
                axpy(&mut gw[o * in_dim..(o + 1) * in_dim], d, a);
            }
            // Propagate to the previous layer's pre-activations.
            let mut da = vec![0.0; in_dim];
            for o in 0..out_dim {
                axpy(&mut da, dz[o], &self.weights[l][o * in_dim..(o + 1) * in_dim]);
            }
            if l == 0 {
                return Ok((grads, da));
            }
            let prev_pre = &cache.pre[l - 1];
            dz = da
                .iter()
                .zip(prev_pre)
                .map(|(&d, &z)| d * self.hidden_activation.grad(z))
                .collect();
        }
        unreachable!()
    }

    /// Runs `k` samples stored contiguously (`inputs.len() == k * input_dim`).
    /// The batched path reduces in tiled order, so per-sample outputs agree
    /// with [`Mlp::forward`] to rounding (well within 1e-12 relative).
    pub(crate) fn forward_batch(&self, inputs: &[f64], k: usize) -> Result<(Vec<f64>, BatchCache)> {
        let d0 = self.layer_dims[0];
        if inputs.len() != k * d0 {
            return Err(Error::ShapeMismatch(format!(
                "batch input has {} values, expected {}x{}",
                inputs.len(),
                k,
                d0
            )));
        }
        let layers = self.num_layers();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(layers);
        acts.push(inputs.to_vec());
        for l in 0..layers {
            let in_dim = self.layer_dims[l];
            let out_dim = self.layer_dims[l + 1];
            let a = &acts[l];
            // z[k x out] = a[k x in] * W^T + bias
            let mut z = vec![0.0; k * out_dim];
            for s in 0..k {
                z[s * out_dim..(s + 1) * out_dim].copy_from_slice(&self.biases[l]);
            }
            unsafe {
                matrixmultiply::dgemm(
                    k,
                    in_dim,
                    out_dim,
                    1.0,
                    a.as_ptr(),
                    in_dim as isize,
                    1,
                    self.weights[l].as_ptr(),
                    1,
                    in_dim as isize,
                    1.0,
                    z.as_mut_ptr(),
                    out_dim as isize,
                    1,
                );
            }
            if l + 1 < layers {
                let mut a_next = vec![0.0; k * out_dim];
                for (an, &zv) in a_next.iter_mut().zip(&z) {
                    *an = self.hidden_activation.apply(zv);
                }
                acts.push(a_next);
            }
            pre.push(z);
        }
        let last = &pre[layers - 1];
        let outs = (0..k)
            .map(|s| self.output_activation.apply(last[s]))
            .collect();
        Ok((
            outs,
            BatchCache {
                k,
                acts,
                pre,
                revision: self.revision,
            },
        ))
    }

    /// Accumulates parameter gradients for a batch: each sample's scalar output
    /// is weighted by its entry in `upstream`. Input gradients are not computed.
    pub(crate) fn backward_batch(
        &self,
        cache: &BatchCache,
        upstream: &[f64],
        grads: &mut ParamGrads,
    ) -> Result<()> {
        self.check_cache(cache.revision, cache.acts.len(), cache.acts[0].len() / cache.k)?;
        if upstream.len() != cache.k {
            return Err(Error::ShapeMismatch(format!(
                "upstream has {} entries for a batch of {}",
                upstream.len(),
                cache.k
            )));
        }
        if !grads.congruent_with(self) {
            return Err(Error::ShapeMismatch(
                "gradient buffers not congruent with network".into(),
            ));
        }
        let layers = self.num_layers();
        let k = cache.k;
        let last = layers - 1;
        let last_pre = &cache.pre[last];
        let mut dz: Vec<f64> = (0..k)
            .map(|s| upstream[s] * self.output_activation.grad(last_pre[s]))
            .collect();
        for l in (0..layers).rev() {
            let in_dim = self.layer_dims[l];
            let out_dim = self.layer_dims[l + 1];
            let a = &cache.acts[l];
            // dW[out x in] += dZ^T[out x k] * A[k x in]
            unsafe {
                matrixmultiply::dgemm(
                    out_dim,
                    k,
                    in_dim,
                    1.0,
                    dz.as_ptr(),
                    1,
                    out_dim as isize,
                    a.as_ptr(),
                    in_dim as isize,
                    1,
                    1.0,
                    grads.weights[l].as_mut_ptr(),
                    in_dim as isize,
                    1,
                );
            }
            for s in 0..k {
                let dzrow = &dz[s * out_dim..(s + 1) * out_dim];
                for (gb, &d) in grads.biases[l].iter_mut().zip(dzrow) {
                    *gb += d;
                }
            }
            if l == 0 {
                break;
            }
            // dA[k x in] = dZ[k x out] * W[out x in], then through the activation
            let prev_pre = &cache.pre[l - 1];
            let mut dz_prev = vec![0.0; k * in_dim];
            unsafe {
                matrixmultiply::dgemm(
                    k,
                    out_dim,
                    in_dim,
                    1.0,
                    dz.as_ptr(),
                    out_dim as isize,
                    1,
                    self.weights[l].as_ptr(),
                    in_dim as isize,
                    1,
                    0.0,
                    dz_prev.as_mut_ptr(),
                    in_dim as isize,
                    1,
                );
            }
            for (d, &z) in dz_prev.iter_mut().zip(prev_pre) {
                *d *= self.hidden_activation.grad(z);
            }
            dz = dz_prev;
        }
        Ok(())
    }

    fn check_cache(&self, revision: u64, n_acts: usize, d0: usize) -> Result<()> {
        if revision != self.revision || n_acts != self.num_layers() || d0 != self.layer_dims[0] {
            return Err(Error::ContractViolation(
                "cache does not match this network's current parameters".into(),
            ));
        }
        Ok(())
    }

    /// Serializes to the model JSON document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses the model JSON document and checks shape invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let mlp: Mlp = serde_json::from_str(text)?;
        mlp.validate()?;
        Ok(mlp)
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least input and output dims, got {:?}",
            dims
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArchitecture(format!(
            "all layer dims must be positive, got {:?}",
            dims
        )));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::InvalidArchitecture(format!(
            "output dim must be 1, got {:?}",
            dims
        )));
    }
    Ok(())
}
