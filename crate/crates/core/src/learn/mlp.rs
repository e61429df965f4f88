//! Fully connected networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer: a row-major
//! `out x in` weight matrix followed by the `out` biases. Gradients use the
//! same layout, which keeps Adam, Polyak averaging and checkpoints trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    #[serde(skip)]
    version: u64,
}

/// Layer outputs recorded by [`Mlp::forward_cached`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[L]` the output.
    activations: Vec<Vec<f64>>,
    version: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache has at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "MLP needs >= 2 positive layer sizes, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params: vec![0.0; param_count(sizes)],
            version: 0,
        })
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialisation.
    pub fn random<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[1] * (w[0] + 1);
            for p in &mut net.params[off..off + n] {
                *p = rng.random_range(-bound..bound);
            }
            off += n;
        }
        Ok(net)
    }

    /// Multiplies the last layer's weights and biases by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let n = self.sizes[self.sizes.len() - 1] * (self.sizes[self.sizes.len() - 2] + 1);
        let len = self.params.len();
        for p in &mut self.params[len - n..] {
            *p *= factor;
        }
        self.version += 1;
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Number of weight multiplies in one forward pass (biases excluded).
    pub fn weight_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.sizes[0] {
            return Err(Error::Shape {
                context: "MLP input",
                expected: self.sizes[0],
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Output of one dense layer, activation applied unless it is the last.
    fn layer(&self, l: usize, off: usize, x: &[f64], out: &mut Vec<f64>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + n_out * n_in];
        let bias = &self.params[off + n_out * n_in..off + n_out * (n_in + 1)];
        let last = l + 2 == self.sizes.len();
        out.clear();
        out.extend(w.chunks_exact(n_in).zip(bias).map(|(row, b)| {
            let z = dot(row, x) + b;
            if last {
                z
            } else {
                self.activation.apply(z)
            }
        }));
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            self.layer(l, off, &cur, &mut next);
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            let mut out = Vec::with_capacity(self.sizes[l + 1]);
            self.layer(l, off, &activations[l], &mut out);
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
            activations.push(out);
        }
        Ok(ForwardCache {
            activations,
            version: self.version,
        })
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<()> {
        if cache.version != self.version {
            return Err(Error::StaleCache("parameters changed since the forward pass"));
        }
        if cache.activations.len() != self.sizes.len()
            || cache
                .activations
                .iter()
                .zip(&self.sizes)
                .any(|(a, &s)| a.len() != s)
        {
            return Err(Error::StaleCache("cache was produced by a different network"));
        }
        if grad_out.len() != self.output_size() {
            return Err(Error::Shape {
                context: "MLP output gradient",
                expected: self.output_size(),
                actual: grad_out.len(),
            });
        }
        Ok(())
    }

    /// Backpropagates `grad_out` (dL/d output). Parameter gradients are
    /// added into `grads` when given; the gradient w.r.t. the input is
    /// returned when `want_input` is set (empty otherwise).
    fn backprop(
        &self,
        cache: &ForwardCache,
        grad_out: &[f64],
        mut grads: Option<&mut [f64]>,
        want_input: bool,
    ) -> Result<Vec<f64>> {
        self.check_cache(cache, grad_out)?;
        if let Some(g) = grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Shape {
                    context: "gradient buffer",
                    expected: self.params.len(),
                    actual: g.len(),
                });
            }
        }
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < n_layers {
                for (d, &y) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    *d *= self.activation.derivative(y);
                }
            }
            let x = &cache.activations[l];
            let off = offsets[l];
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = g[off..off + n_out * (n_in + 1)].split_at_mut(n_out * n_in);
                for ((row, b), &d) in gw.chunks_exact_mut(n_in).zip(gb.iter_mut()).zip(&delta) {
                    if d != 0.0 {
                        for (gi, &xi) in row.iter_mut().zip(x) {
                            *gi += d * xi;
                        }
                    }
                    *b += d;
                }
            }
            if l == 0 && !want_input {
                return Ok(Vec::new());
            }
            let w = &self.params[off..off + n_out * n_in];
            let mut prev = vec![0.0; n_in];
            for (row, &d) in w.chunks_exact(n_in).zip(&delta) {
                if d != 0.0 {
                    for (p, &wi) in prev.iter_mut().zip(row) {
                        *p += d * wi;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Accumulates parameter gradients into `grads`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64], grads: &mut [f64]) -> Result<()> {
        self.backprop(cache, grad_out, Some(grads), false).map(|_| ())
    }

    /// dL/d input only, without touching parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        self.backprop(cache, grad_out, None, true)
    }

    /// Fresh parameter gradients for one sample.
    pub fn gradient(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.params.len()];
        self.backward(cache, grad_out, &mut g)?;
        Ok(g)
    }

    /// `self <- rate * source + (1 - rate) * self`.
    pub fn polyak_from(&mut self, source: &Mlp, rate: f64) -> Result<()> {
        if source.sizes != self.sizes {
            return Err(Error::Shape {
                context: "Polyak source network",
                expected: self.params.len(),
                actual: source.params.len(),
            });
        }
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = rate * s + (1.0 - rate) * *t;
        }
        self.version += 1;
        Ok(())
    }

    pub fn copy_from(&mut self, source: &Mlp) -> Result<()> {
        self.polyak_from(source, 1.0)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
