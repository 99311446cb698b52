//! Small dense networks in f32 with hand-written backprop and Adam.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: &mut [f32]) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => v.iter_mut().for_each(|x| *x = math::tanhf(*x)),
            Activation::Relu => v.iter_mut().for_each(|x| *x = x.max(0.0)),
        }
    }

    /// Multiplies `grad` by the derivative, given post-activation `y`.
    fn backprop(self, y: &[f32], grad: &mut [f32]) {
        match self {
            Activation::Identity => {}
            Activation::Tanh => grad.iter_mut().zip(y).for_each(|(g, y)| *g *= 1.0 - y * y),
            Activation::Relu => grad.iter_mut().zip(y).for_each(|(g, y)| {
                if *y <= 0.0 {
                    *g = 0.0
                }
            }),
        }
    }
}

/// `C = A * B + beta * C` for row-major `A: m x k`, `B: k x n`, with either
/// operand optionally stored transposed.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f32], a_t: bool, b: &[f32], b_t: bool, beta: f32, c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fully connected network with all parameters in one flat vector:
/// per layer a row-major `[in][out]` weight block followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dims: Vec<usize>,
    pub acts: Vec<Activation>,
    pub params: Vec<f32>,
}

#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub batch: usize,
    /// `outputs[0]` is the input; `outputs[l + 1]` is layer `l`'s activation.
    pub outputs: Vec<Vec<f32>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f32] {
        self.outputs.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Uniform `+-1/sqrt(fan_in)` init; the last layer is scaled by
    /// `last_scale`.
    pub fn new<R: Rng>(dims: &[usize], acts: &[Activation], last_scale: f32, rng: &mut R) -> Self {
        assert_eq!(dims.len(), acts.len() + 1);
        let mut params = Vec::with_capacity(Self::param_count(dims));
        let layers = dims.len() - 1;
        for (l, w) in dims.windows(2).enumerate() {
            let mut bound = 1.0 / math::sqrtf(w[0] as f32);
            if l + 1 == layers {
                bound *= last_scale;
            }
            for _ in 0..(w[0] * w[1] + w[1]) {
                params.push((rng.random::<f32>() * 2.0 - 1.0) * bound);
            }
        }
        Self {
            dims: dims.to_vec(),
            acts: acts.to_vec(),
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    fn offsets(&self, layer: usize) -> (usize, usize, usize) {
        let start: usize = self.dims[..layer + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.dims[layer], self.dims[layer + 1]);
        (start, start + i * o, start + i * o + o)
    }

    pub fn forward(&self, input: &[f32], batch: usize, cache: &mut MlpCache) {
        assert_eq!(input.len(), batch * self.input_dim());
        let layers = self.dims.len() - 1;
        cache.batch = batch;
        cache.outputs.resize_with(layers + 1, Vec::new);
        cache.outputs[0].clear();
        cache.outputs[0].extend_from_slice(input);
        for l in 0..layers {
            let (w0, b0, b1) = self.offsets(l);
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let (prev, rest) = cache.outputs.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut rest[0];
            y.clear();
            y.reserve(batch * o);
            let bias = &self.params[b0..b1];
            for _ in 0..batch {
                y.extend_from_slice(bias);
            }
            gemm(batch, i, o, x, false, &self.params[w0..b0], false, 1.0, y);
            self.acts[l].apply(y);
        }
    }

    /// Convenience forward returning the output.
    pub fn predict(&self, input: &[f32], batch: usize) -> Vec<f32> {
        let mut cache = MlpCache::default();
        self.forward(input, batch, &mut cache);
        cache.outputs.pop().unwrap_or_default()
    }

    /// Accumulates parameter gradients into `grads` given `grad_out` (the
    /// loss gradient w.r.t. the network output). Returns the gradient
    /// w.r.t. the input when `want_input` is set.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f32], grads: &mut [f32], want_input: bool) -> Option<Vec<f32>> {
        let batch = cache.batch;
        let layers = self.dims.len() - 1;
        assert_eq!(grads.len(), self.params.len());
        assert_eq!(grad_out.len(), batch * self.output_dim());
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (w0, b0, b1) = self.offsets(l);
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            self.acts[l].backprop(&cache.outputs[l + 1], &mut delta);
            let x = &cache.outputs[l];
            gemm(i, batch, o, x, true, &delta, false, 1.0, &mut grads[w0..b0]);
            let gb = &mut grads[b0..b1];
            for row in delta.chunks_exact(o) {
                gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
            }
            if l > 0 || want_input {
                let mut dx = alloc::vec![0.0f32; batch * i];
                gemm(batch, o, i, &delta, false, &self.params[w0..b0], true, 0.0, &mut dx);
                delta = dx;
            }
        }
        if want_input { Some(delta) } else { None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub t: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl Adam {
    pub fn new(lr: f32, n: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: alloc::vec![0.0; n],
            v: alloc::vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32]) {
        self.t += 1;
        let t = self.t.min(i32::MAX as u64) as i32;
        let c1 = 1.0 - math::powi_f32(self.beta1, t);
        let c2 = 1.0 - math::powi_f32(self.beta2, t);
        let step = self.lr * math::sqrtf(c2) / c1;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= step * *m / (math::sqrtf(*v) + self.eps);
        }
    }
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(target: &mut [f32], online: &[f32], tau: f32) {
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

pub fn all_finite(v: &[f32]) -> bool {
    v.iter().all(|x| x.is_finite())
}
