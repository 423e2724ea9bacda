use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{mm_nn, mm_nt, mm_tn, Real, Tensor};

/// Fully-connected layer `y = W x + b` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[out_dim, in_dim]),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    /// Weights and biases uniform in `±1/sqrt(in_dim)`.
    pub fn uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for v in layer.weight.data_mut() {
            *v = T::from_f64(rng.random_range(-bound..=bound));
        }
        for v in layer.bias.data_mut() {
            *v = T::from_f64(rng.random_range(-bound..=bound));
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Applies the layer to `rows` row vectors stored contiguously in `x`.
    pub fn forward(&self, x: &[T], rows: usize) -> Vec<T> {
        let (i, o) = (self.in_dim(), self.out_dim());
        let mut y = vec![T::ZERO; rows * o];
        mm_nt(x, self.weight.data(), &mut y, rows, i, o, false);
        let b = self.bias.data();
        for row in y.chunks_exact_mut(o) {
            for (v, bj) in row.iter_mut().zip(b) {
                *v += *bj;
            }
        }
        y
    }

    /// Accumulates parameter gradients for pre-activation gradient `dz` and
    /// optionally returns the input gradient.
    pub fn backward(&self, x: &[T], dz: &[T], rows: usize, grad: &mut Linear<T>, need_dx: bool) -> Option<Vec<T>> {
        let (i, o) = (self.in_dim(), self.out_dim());
        mm_tn(dz, x, grad.weight.data_mut(), o, rows, i, true);
        let gb = grad.bias.data_mut();
        for row in dz.chunks_exact(o) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += *d;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![T::ZERO; rows * i];
            mm_nn(dz, self.weight.data(), &mut dx, rows, o, i, false);
            dx
        })
    }
}

/// Stack of linear layers with ReLU between them (and after the last one
/// when `relu_last`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    pub layers: Vec<Linear<T>>,
    pub relu_last: bool,
}

/// Activations recorded by [`Mlp::forward`]; `outputs[l]` is post-activation.
#[derive(Debug, Clone)]
pub struct MlpTrace<T> {
    pub rows: usize,
    pub input: Vec<T>,
    pub outputs: Vec<Vec<T>>,
}

impl<T> MlpTrace<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&self.input)
    }
}

impl<T: Real> Mlp<T> {
    pub fn uniform<R: Rng + ?Sized>(widths: &[usize], relu_last: bool, rng: &mut R) -> Self {
        Mlp {
            layers: widths
                .windows(2)
                .map(|w| Linear::uniform(w[0], w[1], rng))
                .collect(),
            relu_last,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Linear::zeros(l.in_dim(), l.out_dim()))
                .collect(),
            relu_last: self.relu_last,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    fn has_relu(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.relu_last
    }

    pub fn forward(&self, input: Vec<T>, rows: usize) -> MlpTrace<T> {
        let mut outputs: Vec<Vec<T>> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let x = outputs.last().unwrap_or(&input);
            let mut y = layer.forward(x, rows);
            if self.has_relu(l) {
                for v in &mut y {
                    if !(*v > T::ZERO) {
                        *v = T::ZERO;
                    }
                }
            }
            outputs.push(y);
        }
        MlpTrace { rows, input, outputs }
    }

    /// Backpropagates `d_out` (gradient w.r.t. the final post-activation output).
    pub fn backward(&self, trace: &MlpTrace<T>, d_out: Vec<T>, grad: &mut Mlp<T>, need_dx: bool) -> Option<Vec<T>> {
        let mut d = d_out;
        for l in (0..self.layers.len()).rev() {
            if self.has_relu(l) {
                for (dv, y) in d.iter_mut().zip(&trace.outputs[l]) {
                    if !(*y > T::ZERO) {
                        *dv = T::ZERO;
                    }
                }
            }
            let x = if l == 0 { &trace.input } else { &trace.outputs[l - 1] };
            let want_dx = l > 0 || need_dx;
            d = self.layers[l].backward(x, &d, trace.rows, &mut grad.layers[l], want_dx)?;
        }
        Some(d)
    }
}
