//! Fully connected perceptron with ReLU hidden layers and a linear output.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `out x in`.
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Intermediate values kept for the backward pass.
pub struct Trace<T> {
    /// Input of each layer (post-activation of the previous one).
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// He-uniform weights, zero biases.
    pub fn new(dims: &[usize], rng: &mut impl Rng) -> Self {
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                    T::of(rng.random_range(-bound..bound))
                });
                Dense {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn empty() -> Self {
        Mlp { layers: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weight.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weight.nrows())
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.weight.ncols()).collect();
        if let Some(last) = self.layers.last() {
            dims.push(last.weight.nrows());
        }
        dims
    }

    /// Rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut h = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            h = h.dot(&layer.weight.t()) + &layer.bias;
            if i < last {
                h.mapv_inplace(|v| v.max(T::zero()));
            }
        }
        h
    }

    pub fn forward_traced(&self, x: ArrayView2<T>) -> (Array2<T>, Trace<T>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.weight.t()) + &layer.bias;
            inputs.push(h);
            h = if i < last {
                z.mapv(|v| v.max(T::zero()))
            } else {
                z.clone()
            };
            pre.push(z);
        }
        (h, Trace { inputs, pre })
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, trace: &Trace<T>, grad_out: Array2<T>) -> (Grads<T>, Array2<T>) {
        let mut g = grad_out;
        let last = self.layers.len().saturating_sub(1);
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            if i < last {
                g.zip_mut_with(&trace.pre[i], |gv, &z| {
                    if z <= T::zero() {
                        *gv = T::zero();
                    }
                });
            }
            let dw = g.t().dot(&trace.inputs[i]);
            let db = g.sum_axis(Axis(0));
            let prev = g.dot(&self.layers[i].weight);
            grads.push(Dense { weight: dw, bias: db });
            g = prev;
        }
        grads.reverse();
        (Grads { layers: grads }, g)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Weights (row-major) then bias, layer by layer.
    pub fn params_flat(&self) -> Vec<T> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, values: &[T]) {
        assert_eq!(values.len(), self.param_count(), "parameter vector length");
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            layer.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            layer.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
    }
}

impl<T: Scalar> Grads<T> {
    pub fn flat(&self) -> Vec<T> {
        flatten(&self.layers)
    }
}

fn flatten<T: Scalar>(layers: &[Dense<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

/// Decoupled-weight-decay Adam state for one perceptron.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    m: Vec<Dense<T>>,
    v: Vec<Dense<T>>,
    step: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(mlp: &Mlp<T>, weight_decay: f64) -> Self {
        let zeros = |mlp: &Mlp<T>| {
            mlp.layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect::<Vec<_>>()
        };
        AdamW {
            m: zeros(mlp),
            v: zeros(mlp),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// One update; decay applies to weight matrices only.
    pub fn apply(&mut self, mlp: &mut Mlp<T>, grads: &Grads<T>, lr: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr_t = T::of(lr);
        let decay = T::of(1.0 - lr * self.weight_decay);
        let upd = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = T::of(b1) * *m + T::of(1.0 - b1) * g;
            *v = T::of(b2) * *v + T::of(1.0 - b2) * g * g;
            let mhat = *m / T::of(c1);
            let vhat = *v / T::of(c2);
            *p = *p - lr_t * mhat / (vhat.sqrt() + T::of(self.eps));
        };
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            let g = &grads.layers[i];
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            layer.weight.mapv_inplace(|w| w * decay);
            ndarray::Zip::from(&mut layer.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| upd(p, g, m, v));
        }
    }
}
