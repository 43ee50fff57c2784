use ndarray::linalg::general_mat_mul;

use super::{Real, Tensor2};
use crate::error::{Error, Result};
use crate::rng::Prng;

/// Pre-activation clamp for the sigmoid so outputs stay strictly inside (0, 1).
const SIGMOID_LOGIT_LIMIT: f64 = 15.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
            Activation::Sigmoid => {
                let lim = T::of(SIGMOID_LOGIT_LIMIT);
                let x = x.max(-lim).min(lim);
                T::one() / (T::one() + (-x).exp())
            }
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "identity" => Activation::Identity,
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            "sigmoid" => Activation::Sigmoid,
            _ => return None,
        })
    }
}

/// One affine layer followed by an elementwise activation.
///
/// `weight` is stored `out x in` so that a batch `X` (rows = samples) maps
/// to `X * weight^T + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T = f32> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(weight: Tensor2<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!(
                "bias length {} does not match {} outputs",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn forward(&self, input: &Tensor2<T>) -> Tensor2<T> {
        let mut out = Tensor2::zeros(input.rows(), self.out_dim());
        general_mat_mul(
            T::one(),
            &input.view(),
            &self.weight.view().t(),
            T::zero(),
            &mut out.view_mut(),
        );
        let act = self.activation;
        for row in out.data_mut().chunks_mut(self.bias.len().max(1)) {
            for (o, &b) in row.iter_mut().zip(&self.bias) {
                *o = act.apply(*o + b);
            }
        }
        out
    }
}

/// Chain of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNet<T = f32> {
    layers: Vec<DenseLayer<T>>,
    generation: u64,
}

/// Activations recorded by a forward pass: `acts[0]` is the input and
/// `acts[k + 1]` the post-activation output of layer `k`.
#[derive(Clone, Debug)]
pub struct ForwardCache<T = f32> {
    acts: Vec<Tensor2<T>>,
    dims: Vec<(usize, usize)>,
    generation: u64,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Tensor2<T> {
        self.acts.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &Tensor2<T> {
        &self.acts[0]
    }

    pub fn activations(&self) -> &[Tensor2<T>] {
        &self.acts
    }
}

/// Per-layer `(weight, bias)` gradients, shaped like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    pub layers: Vec<(Tensor2<T>, Vec<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &DenseNet<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| {
                    (
                        Tensor2::zeros(l.out_dim(), l.in_dim()),
                        vec![T::zero(); l.out_dim()],
                    )
                })
                .collect(),
        }
    }

    /// Flat slices in parameter order: `w0, b0, w1, b1, ...`.
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.data(), b.as_slice()])
            .collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|(w, b)| [w.data_mut(), b.as_mut_slice()])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_zero()))
    }
}

/// Result of [`DenseNet::backward`].
#[derive(Clone, Debug)]
pub struct Backward<T = f32> {
    pub grads: Gradients<T>,
    /// Gradient with respect to the network input, `batch x in_dim`.
    pub input_grad: Tensor2<T>,
}

impl<T: Real> DenseNet<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self {
            layers,
            generation: 0,
        })
    }

    /// Glorot-uniform weights, zero biases. `dims` lists the layer widths
    /// from input to output; `activations` has one entry per layer.
    pub fn xavier(dims: &[usize], activations: &[Activation], rng: &mut Prng) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::shape(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = Tensor2::from_fn(fan_out, fan_in, |_, _| {
                    T::of((2.0 * rng.uniform() - 1.0) * limit)
                });
                DenseLayer::new(weight, vec![T::zero(); fan_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `(in, out)` per layer.
    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.in_dim(), l.out_dim())).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Flat parameter slices in order `w0, b0, w1, b1, ...`.
    pub fn params(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    /// Mutable parameter slices. Invalidates caches from earlier forward passes.
    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        self.generation += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn cast<U: Real>(&self) -> DenseNet<U> {
        DenseNet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: l.weight.cast(),
                    bias: l.bias.iter().map(|&b| U::of(b.f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
            generation: 0,
        }
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.in_dim() {
            return Err(Error::shape(format!(
                "input has {cols} features, network expects {}",
                self.in_dim()
            )));
        }
        Ok(())
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        let cache = self.forward_batch(Tensor2::row_vector(x))?;
        Ok((cache.output().data().to_vec(), cache))
    }

    /// Forward pass over a `batch x in_dim` matrix, keeping activations.
    pub fn forward_batch(&self, x: Tensor2<T>) -> Result<ForwardCache<T>> {
        self.check_input(x.cols())?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for layer in &self.layers {
            let next = layer.forward(acts.last().expect("non-empty"));
            acts.push(next);
        }
        Ok(ForwardCache {
            acts,
            dims: self.dims(),
            generation: self.generation,
        })
    }

    /// Forward pass without retaining intermediate activations.
    pub fn predict_batch(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        self.check_input(x.cols())?;
        let mut cur = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur);
        }
        Ok(cur)
    }

    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.predict_batch(&Tensor2::row_vector(x))?.into_data())
    }

    fn check_cache(&self, cache: &ForwardCache<T>, d_out: &Tensor2<T>) -> Result<()> {
        if cache.dims != self.dims() {
            return Err(Error::contract("forward cache belongs to a different network"));
        }
        if cache.generation != self.generation {
            return Err(Error::contract(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        let out = cache.output();
        if d_out.shape() != out.shape() {
            return Err(Error::shape(format!(
                "output gradient is {:?}, forward output was {:?}",
                d_out.shape(),
                out.shape()
            )));
        }
        Ok(())
    }

    /// Backpropagate `d_out` (gradient of the loss w.r.t. the network
    /// output) through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<T>, d_out: &Tensor2<T>) -> Result<Backward<T>> {
        let (grads, input_grad) = self.backprop(cache, d_out, true)?;
        Ok(Backward {
            grads,
            input_grad: input_grad.expect("requested"),
        })
    }

    /// Like [`DenseNet::backward`] but skips the input gradient.
    pub fn backward_params(
        &self,
        cache: &ForwardCache<T>,
        d_out: &Tensor2<T>,
    ) -> Result<Gradients<T>> {
        Ok(self.backprop(cache, d_out, false)?.0)
    }

    fn backprop(
        &self,
        cache: &ForwardCache<T>,
        d_out: &Tensor2<T>,
        want_input_grad: bool,
    ) -> Result<(Gradients<T>, Option<Tensor2<T>>)> {
        self.check_cache(cache, d_out)?;
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut upstream = d_out.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.acts[k];
            let output = &cache.acts[k + 1];
            // delta = upstream * f'(output), in place
            let act = layer.activation;
            if act != Activation::Identity {
                for (u, &y) in upstream.data_mut().iter_mut().zip(output.data()) {
                    *u = *u * act.derivative_from_output(y);
                }
            }
            let delta = upstream;

            let mut d_w = Tensor2::zeros(layer.out_dim(), layer.in_dim());
            general_mat_mul(
                T::one(),
                &delta.view().t(),
                &input.view(),
                T::zero(),
                &mut d_w.view_mut(),
            );
            let mut d_b = vec![T::zero(); layer.out_dim()];
            for row in delta.iter_rows() {
                for (b, &d) in d_b.iter_mut().zip(row) {
                    *b = *b + d;
                }
            }
            layer_grads.push((d_w, d_b));

            if k == 0 && !want_input_grad {
                return Ok((
                    Gradients {
                        layers: reversed(layer_grads),
                    },
                    None,
                ));
            }
            let mut d_in = Tensor2::zeros(delta.rows(), layer.in_dim());
            general_mat_mul(
                T::one(),
                &delta.view(),
                &layer.weight.view(),
                T::zero(),
                &mut d_in.view_mut(),
            );
            upstream = d_in;
        }
        Ok((
            Gradients {
                layers: reversed(layer_grads),
            },
            Some(upstream),
        ))
    }
}

fn reversed<X>(mut v: Vec<X>) -> Vec<X> {
    v.reverse();
    v
}
