use std::fmt;

use crate::data::RngStream;
use crate::textfmt::{read_tensor, write_tensor, LineReader};
use crate::{Error, Result, Tensor2};

/// Stream id used for parameter initialisation draws.
pub const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative at the pre-activation `z`. The ReLU family uses 0 / `slope`
    /// at exactly `z = 0`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub(crate) fn has_kink(self) -> bool {
        !matches!(self, Activation::Tanh)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu({s})"),
            Activation::Tanh => f.write_str("tanh"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Linear,
    Tanh,
}

impl OutputActivation {
    fn as_activation(self) -> Option<Activation> {
        match self {
            OutputActivation::Linear => None,
            OutputActivation::Tanh => Some(Activation::Tanh),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    /// Input dim, hidden dims..., output dim.
    pub layer_sizes: Vec<usize>,
    pub hidden: Activation,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden: Activation,
        output: OutputActivation,
    ) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            hidden,
            output,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least input and output sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must be positive, got {:?}",
                self.layer_sizes
            )));
        }
        if let Activation::LeakyRelu(s) = self.hidden {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::Config(format!(
                    "leaky_relu slope must be in (0, 1), got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated spec")
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn activation_for(&self, layer: usize) -> Option<Activation> {
        if layer + 1 == self.n_layers() {
            self.output.as_activation()
        } else {
            Some(self.hidden)
        }
    }
}

/// One dense layer: `weight` is `out × in`, `bias` is `out × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            weight: Tensor2::zeros(self.weight.rows(), self.weight.cols()),
            bias: Tensor2::zeros(self.bias.rows(), 1),
        }
    }
}

/// Weights and biases of a network. [`Gradients`] and optimizer accumulators
/// share this shape tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<Layer>,
}

pub type Gradients = ParamSet;

impl ParamSet {
    /// Uniform `±1/sqrt(fan_in)` weights and zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (1.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_range(-bound, bound))
                    .collect();
                Layer {
                    weight: Tensor2::from_vec(fan_out, fan_in, data)
                        .expect("sized by construction"),
                    bias: Tensor2::zeros(fan_out, 1),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    /// Weight and bias tensors in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &Tensor2> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor2> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn n_params(&self) -> usize {
        self.tensors().map(Tensor2::len).sum()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.tensors()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors().fold(0.0, |m, t| m.max(t.max_abs()))
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .tensors()
                .zip(other.tensors())
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn matches_spec(&self, spec: &MlpSpec) -> bool {
        self.layers.len() == spec.n_layers()
            && self
                .layers
                .iter()
                .zip(spec.layer_sizes.windows(2))
                .all(|(l, w)| l.weight.shape() == (w[1], w[0]) && l.bias.shape() == (w[1], 1))
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| !(l.weight.is_finite() && l.bias.is_finite()))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: l.weight.scale(k),
                    bias: l.bias.scale(k),
                })
                .collect(),
        }
    }

    /// Elementwise `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::shape(
                "ParamSet::add_assign",
                "congruent shape trees",
                "different shapes",
            ));
        }
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Clamps every entry to `[-c, c]`.
    pub fn clip(&mut self, c: f64) {
        for t in self.tensors_mut() {
            for v in t.as_mut_slice() {
                *v = v.clamp(-c, c);
            }
        }
    }

    pub fn clipped(&self, c: f64) -> Self {
        let mut p = self.clone();
        p.clip(c);
        p
    }

    /// Serialises as `smallnet-v1` followed by `tensor w<i>` / `tensor b<i>`
    /// blocks, values with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    pub fn write_text(&self, out: &mut String) {
        out.push_str("smallnet-v1\n");
        for (i, l) in self.layers.iter().enumerate() {
            write_tensor(out, &format!("w{i}"), &l.weight);
            write_tensor(out, &format!("b{i}"), &l.bias);
        }
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut reader = LineReader::new(text);
        let p = Self::read_text(&mut reader)?;
        if let Some((n, line)) = reader.peek() {
            return Err(Error::format(n, format!("trailing content `{line}`")));
        }
        Ok(p)
    }

    /// Reads a parameter set, stopping at the first line that is not a
    /// `tensor` header.
    pub fn read_text(reader: &mut LineReader<'_>) -> Result<Self> {
        reader.expect_exact("smallnet-v1")?;
        let mut layers = Vec::new();
        while reader.peek().is_some_and(|(_, l)| l.starts_with("tensor ")) {
            let i = layers.len();
            let weight = read_tensor(reader, &format!("w{i}"))?;
            let (n, _) = reader.peek().unwrap_or((0, ""));
            let bias = read_tensor(reader, &format!("b{i}"))?;
            if bias.shape() != (weight.rows(), 1) {
                return Err(Error::format(
                    n,
                    format!(
                        "bias b{i} must be {}x1, got {}x{}",
                        weight.rows(),
                        bias.rows(),
                        bias.cols()
                    ),
                ));
            }
            layers.push(Layer { weight, bias });
        }
        if layers.is_empty() {
            let (n, _) = reader.peek().unwrap_or((0, ""));
            return Err(Error::format(n, "parameter set has no layers"));
        }
        Ok(Self { layers })
    }
}

/// Deterministic initialisation from a bare seed.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> Result<ParamSet> {
    ParamSet::init(spec, &mut RngStream::new(seed, INIT_STREAM))
}

/// Pre-activations and layer inputs recorded by [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Tensor2>,
    pre_activations: Vec<Tensor2>,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &[Tensor2] {
        &self.pre_activations
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Tensor2::rows)
    }
}

fn check_params(params: &ParamSet, spec: &MlpSpec) -> Result<()> {
    if !params.matches_spec(spec) {
        return Err(Error::shape(
            "parameter set",
            format!("layers {:?}", spec.layer_sizes),
            format!(
                "{} layers with weight shapes {:?}",
                params.layers.len(),
                params
                    .layers
                    .iter()
                    .map(|l| l.weight.shape())
                    .collect::<Vec<_>>()
            ),
        ));
    }
    Ok(())
}

/// Runs a `m × input_dim` batch through the network.
pub fn forward(
    params: &ParamSet,
    spec: &MlpSpec,
    batch: &Tensor2,
) -> Result<(Tensor2, ForwardCache)> {
    check_params(params, spec)?;
    if batch.cols() != spec.input_dim() {
        return Err(Error::shape(
            "forward input",
            format!("{} columns", spec.input_dim()),
            format!("{} columns", batch.cols()),
        ));
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    let mut a = batch.clone();
    for (i, layer) in params.layers.iter().enumerate() {
        let mut z = a.matmul_transposed(&layer.weight)?;
        let bias = layer.bias.as_slice();
        for r in 0..z.rows() {
            for (c, b) in bias.iter().enumerate() {
                z.set(r, c, z.get(r, c) + b);
            }
        }
        let next = match spec.activation_for(i) {
            Some(act) => z.map(|v| act.apply(v)),
            None => z.clone(),
        };
        inputs.push(std::mem::replace(&mut a, next));
        pre_activations.push(z);
    }
    Ok((
        a,
        ForwardCache {
            inputs,
            pre_activations,
        },
    ))
}

/// Reverse pass for the scalar `(1/m) Σ_i <output_grad_i, output_i>`.
///
/// Parameter gradients carry the `1/m` factor. The returned input gradient is
/// per sample (row `i` is `∂<output_grad_i, output_i>/∂input_i`, no `1/m`),
/// so it can be fed straight into the upstream network's `backward`.
pub fn backward(
    params: &ParamSet,
    spec: &MlpSpec,
    cache: &ForwardCache,
    output_grad: &Tensor2,
) -> Result<(Gradients, Tensor2)> {
    check_params(params, spec)?;
    let n_layers = params.layers.len();
    if cache.inputs.len() != n_layers || cache.pre_activations.len() != n_layers {
        return Err(Error::shape(
            "forward cache",
            format!("{n_layers} layers"),
            format!("{} layers", cache.inputs.len()),
        ));
    }
    let m = cache.batch_size();
    let last = &cache.pre_activations[n_layers - 1];
    if output_grad.shape() != last.shape() {
        return Err(Error::shape(
            "output gradient",
            format!("{}x{}", last.rows(), last.cols()),
            format!("{}x{}", output_grad.rows(), output_grad.cols()),
        ));
    }
    let inv_m = if m == 0 { 0.0 } else { 1.0 / m as f64 };

    let mut grads = params.zeros_like();
    let mut delta = output_grad.clone();
    for i in (0..n_layers).rev() {
        let z = &cache.pre_activations[i];
        if let Some(act) = spec.activation_for(i) {
            for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d *= act.derivative(zv);
            }
        }
        let input = &cache.inputs[i];
        if input.shape() != (z.rows(), params.layers[i].weight.cols()) {
            return Err(Error::shape(
                format!("forward cache layer {i}"),
                "matching input",
                "stale cache",
            ));
        }
        grads.layers[i].weight = delta.transposed_matmul(input)?.scale(inv_m);
        grads.layers[i].bias = delta.column_sums().scale(inv_m);
        delta = delta.matmul(&params.layers[i].weight)?;
    }
    Ok((grads, delta))
}
