//! Dense feed-forward networks with manual reverse-mode gradients.
//!
//! Networks are small (two hidden layers of 64-256 units) and topologies are
//! fixed, so there is no autodiff tape: the backward pass is written out
//! layer by layer. All numerics are `f64`.
//!
//! # Flattening order
//!
//! Several consumers (parameter perturbation, Polyak averaging, gradient
//! cosine similarity, checkpoints) rely on a single stable flattening order:
//! layers in forward order, weights before biases within a layer, weight
//! matrices row-major with the output neuron as the row index. Two flattens
//! of the same network are bitwise identical.

mod adam;
mod checkpoint;

pub use adam::{adam_step, adam_step_flat, AdamState};
pub use checkpoint::{read_params, write_params, SCHEMA_TAG};

use crate::error::{Error, Result};
use rand::Rng;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation z.
    fn derivative(self, z: f64) -> f64 {
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

/// Output-layer activation. `TanhScaled` bounds outputs to `[-scale, scale]`,
/// used by deterministic actors whose actions must stay inside env bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputActivation {
    Linear,
    TanhScaled { scale: f64 },
}

/// Layer widths and activations of a dense network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpArchitecture {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        hidden_activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Config("network dims must be positive".into()));
        }
        if hidden_dims.is_empty() || hidden_dims.contains(&0) {
            return Err(Error::Config(
                "hidden_dims must be non-empty with positive widths".into(),
            ));
        }
        Ok(MlpArchitecture {
            input_dim,
            hidden_dims,
            output_dim,
            hidden_activation,
            output_activation,
        })
    }

    /// (fan_in, fan_out) of every layer in forward order.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    /// Total number of parameters (weights + biases) across all layers.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| fan_in * fan_out + fan_out)
            .sum()
    }
}

/// One dense layer. `weights[row * fan_in + col]` with row = output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter set of one network. Immutable in practice: operations that
/// change parameters return a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: MlpArchitecture,
    layers: Vec<DenseLayer>,
}

/// Per-layer activations recorded by `forward_trace`, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Pre-activations z = W a + b per layer.
    pre_activations: Vec<Vec<f64>>,
    /// `activations[0]` is the input, `activations[k + 1]` the output of
    /// layer k after its activation.
    activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has activations")
    }
}

/// A gradient (or any vector) aligned to the flattening order of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGradient {
    values: Vec<f64>,
}

impl FlatGradient {
    pub fn zeros(param_count: usize) -> Self {
        FlatGradient {
            values: vec![0.0; param_count],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        FlatGradient { values }
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FlatGradient) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::Shape {
                what: "gradient dot product",
                expected: self.values.len(),
                got: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

impl MlpParams {
    /// All-zero parameters.
    pub fn zeros(arch: MlpArchitecture) -> Self {
        let layers = arch
            .layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| DenseLayer {
                weights: vec![0.0; fan_in * fan_out],
                biases: vec![0.0; fan_out],
            })
            .collect();
        MlpParams { arch, layers }
    }

    /// Glorot-uniform weights (U(-s, s) with s = sqrt(6 / (fan_in + fan_out)))
    /// and zero biases.
    pub fn glorot<R: Rng>(arch: MlpArchitecture, rng: &mut R) -> Self {
        let layers = arch
            .layer_dims()
            .iter()
            .map(|&(fan_in, fan_out)| {
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    weights: (0..fan_in * fan_out).map(|_| rng.gen_range(-s..s)).collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        MlpParams { arch, layers }
    }

    /// Build a network from explicit layers. Shapes must chain correctly.
    pub fn from_layers(arch: MlpArchitecture, layers: Vec<DenseLayer>) -> Result<Self> {
        let dims = arch.layer_dims();
        if layers.len() != dims.len() {
            return Err(Error::Shape {
                what: "layer count",
                expected: dims.len(),
                got: layers.len(),
            });
        }
        for (layer, &(fan_in, fan_out)) in layers.iter().zip(&dims) {
            if layer.weights.len() != fan_in * fan_out {
                return Err(Error::Shape {
                    what: "weight matrix",
                    expected: fan_in * fan_out,
                    got: layer.weights.len(),
                });
            }
            if layer.biases.len() != fan_out {
                return Err(Error::Shape {
                    what: "bias vector",
                    expected: fan_out,
                    got: layer.biases.len(),
                });
            }
        }
        Ok(MlpParams { arch, layers })
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Flatten into the documented order: per layer, weights (row-major)
    /// then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Inverse of `flatten`. Errors if the vector length does not match the
    /// architecture's parameter count.
    pub fn unflatten(arch: MlpArchitecture, flat: &[f64]) -> Result<Self> {
        if flat.len() != arch.param_count() {
            return Err(Error::Shape {
                what: "flattened parameters",
                expected: arch.param_count(),
                got: flat.len(),
            });
        }
        let mut layers = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in arch.layer_dims() {
            let w_len = fan_in * fan_out;
            let weights = flat[offset..offset + w_len].to_vec();
            offset += w_len;
            let biases = flat[offset..offset + fan_out].to_vec();
            offset += fan_out;
            layers.push(DenseLayer { weights, biases });
        }
        Ok(MlpParams { arch, layers })
    }

    /// Evaluate the network. Deterministic function of (params, input).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (output, _) = self.forward_trace(input)?;
        Ok(output)
    }

    /// Evaluate and record the activations needed for a backward pass.
    pub fn forward_trace(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardTrace)> {
        if input.len() != self.arch.input_dim {
            return Err(Error::Shape {
                what: "network input",
                expected: self.arch.input_dim,
                got: input.len(),
            });
        }
        let n_layers = self.layers.len();
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());

        for (k, layer) in self.layers.iter().enumerate() {
            let x = &activations[k];
            let fan_in = x.len();
            let fan_out = layer.biases.len();
            let mut z = layer.biases.clone();
            for (row, z_row) in z.iter_mut().enumerate() {
                let w_row = &layer.weights[row * fan_in..(row + 1) * fan_in];
                let mut acc = 0.0;
                for (w, xi) in w_row.iter().zip(x.iter()) {
                    acc += w * xi;
                }
                *z_row += acc;
            }
            let is_output = k == n_layers - 1;
            let a: Vec<f64> = if is_output {
                match self.arch.output_activation {
                    OutputActivation::Linear => z.clone(),
                    OutputActivation::TanhScaled { scale } => {
                        z.iter().map(|&v| scale * v.tanh()).collect()
                    }
                }
            } else {
                z.iter()
                    .map(|&v| self.arch.hidden_activation.apply(v))
                    .collect()
            };
            debug_assert_eq!(a.len(), fan_out);
            pre_activations.push(z);
            activations.push(a);
        }

        let output = activations.last().unwrap().clone();
        Ok((
            output,
            ForwardTrace {
                pre_activations,
                activations,
            },
        ))
    }

    /// Backward pass. Accumulates `weight * dL/dparam` into `acc` (flattening
    /// order) and returns dL/dinput. `d_output` is dL/doutput.
    pub fn accumulate_gradient(
        &self,
        trace: &ForwardTrace,
        d_output: &[f64],
        weight: f64,
        acc: &mut [f64],
    ) -> Result<Vec<f64>> {
        if d_output.len() != self.arch.output_dim {
            return Err(Error::Shape {
                what: "output gradient",
                expected: self.arch.output_dim,
                got: d_output.len(),
            });
        }
        if acc.len() < self.param_count() {
            return Err(Error::Shape {
                what: "gradient accumulator",
                expected: self.param_count(),
                got: acc.len(),
            });
        }

        let n_layers = self.layers.len();
        // Offsets of each layer's block in the flat vector.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for (fan_in, fan_out) in self.arch.layer_dims() {
            offsets.push(off);
            off += fan_in * fan_out + fan_out;
        }

        let mut delta = d_output.to_vec();
        for k in (0..n_layers).rev() {
            let layer = &self.layers[k];
            let x = &trace.activations[k];
            let z = &trace.pre_activations[k];
            let fan_in = x.len();
            let fan_out = layer.biases.len();
            let is_output = k == n_layers - 1;

            // Chain through the activation: delta becomes dL/dz.
            if is_output {
                if let OutputActivation::TanhScaled { scale } = self.arch.output_activation {
                    for (d, &zv) in delta.iter_mut().zip(z.iter()) {
                        let t = zv.tanh();
                        *d *= scale * (1.0 - t * t);
                    }
                }
            } else {
                for (d, &zv) in delta.iter_mut().zip(z.iter()) {
                    *d *= self.arch.hidden_activation.derivative(zv);
                }
            }

            let base = offsets[k];
            for row in 0..fan_out {
                let w_base = base + row * fan_in;
                let d = weight * delta[row];
                for (col, &xv) in x.iter().enumerate() {
                    acc[w_base + col] += d * xv;
                }
            }
            let b_base = base + fan_in * fan_out;
            for (row, &dv) in delta.iter().enumerate() {
                acc[b_base + row] += weight * dv;
            }

            // dL/dx for the layer below (or the network input).
            let mut delta_prev = vec![0.0; fan_in];
            for (row, &dv) in delta.iter().enumerate() {
                let w_row = &layer.weights[row * fan_in..(row + 1) * fan_in];
                for (col, w) in w_row.iter().enumerate() {
                    delta_prev[col] += w * dv;
                }
            }
            delta = delta_prev;
        }
        Ok(delta)
    }

    /// Exact gradient of the mean per-example loss over a batch.
    ///
    /// `per_example` maps (index, network output) to the example's loss and
    /// dloss/doutput. Returns the mean loss and its gradient in flattening
    /// order. A non-finite per-example loss is reported with its index.
    pub fn grad_batch_mean<F>(
        &self,
        inputs: &[Vec<f64>],
        mut per_example: F,
    ) -> Result<(f64, FlatGradient)>
    where
        F: FnMut(usize, &[f64]) -> (f64, Vec<f64>),
    {
        if inputs.is_empty() {
            return Err(Error::Usage("gradient over an empty batch".into()));
        }
        let scale = 1.0 / inputs.len() as f64;
        let mut acc = vec![0.0; self.param_count()];
        let mut total_loss = 0.0;
        for (i, input) in inputs.iter().enumerate() {
            let (output, trace) = self.forward_trace(input)?;
            let (loss, d_output) = per_example(i, &output);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss} at batch index {i}"
                )));
            }
            total_loss += loss;
            self.accumulate_gradient(&trace, &d_output, scale, &mut acc)?;
        }
        Ok((total_loss * scale, FlatGradient::from_values(acc)))
    }
}
