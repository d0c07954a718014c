use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use super::ParamSet;
use crate::error::{Error, Result};
use crate::seeds::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

/// `a = act(W x + b)` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// A stack of dense layers. Batched calls take one example per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
}

/// Per-layer inputs and outputs of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<DMatrix<f64>>,
    outputs: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.outputs.last().expect("nonempty net")
    }
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a dense net needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::invalid(format!("layer {i}: bias length does not match output width")));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].output_dim(),
                    i + 1,
                    w[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases. `sizes` lists widths from input to output;
    /// hidden layers use `hidden`, the last layer uses `output`.
    pub fn mlp(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "mlp needs input and output widths");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                DenseLayer {
                    weight: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..=limit)),
                    bias: DVector::zeros(fan_out),
                    activation: if i == last { output } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    /// Single identity layer `x ↦ x`.
    pub fn identity(dim: usize) -> Self {
        Self {
            layers: vec![DenseLayer {
                weight: DMatrix::identity(dim, dim),
                bias: DVector::zeros(dim),
                activation: Activation::Identity,
            }],
        }
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has dimension {}, net expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x.as_slice()));
        Ok(out.column(0).into_owned())
    }

    /// Forward pass on a batch without keeping intermediates. Panics on a shape
    /// mismatch; use [`DenseNet::forward`] for checked single inputs.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        for l in &self.layers {
            a = Self::layer_forward(l, &a);
        }
        a
    }

    fn layer_forward(l: &DenseLayer, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), l.input_dim(), "layer input width mismatch");
        let mut z = &l.weight * x;
        for mut col in z.column_iter_mut() {
            col += &l.bias;
        }
        z.apply(|v| *v = l.activation.apply(*v));
        z
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for l in &self.layers {
            let out = Self::layer_forward(l, &a);
            inputs.push(a);
            a = out.clone();
            outputs.push(out);
        }
        ForwardCache { inputs, outputs }
    }

    /// Reverse pass. Accumulates parameter gradients into `grads` (same shape as
    /// `self`) and returns the gradient with respect to the batch input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
        grads: &mut DenseNet,
    ) -> DMatrix<f64> {
        let mut delta = upstream.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let out = &cache.outputs[i];
            assert_eq!(delta.shape(), out.shape(), "upstream gradient shape mismatch");
            delta.zip_apply(out, |d, a| *d *= l.activation.derivative_from_output(a));
            let g = &mut grads.layers[i];
            g.weight.gemm(1.0, &delta, &cache.inputs[i].transpose(), 1.0);
            for col in delta.column_iter() {
                g.bias += col;
            }
            delta = l.weight.tr_mul(&delta);
        }
        delta
    }

    pub fn zeros_like(&self) -> DenseNet {
        DenseNet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

impl ParamSet for DenseNet {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}
