use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::kernels::{axpy, col2im, dot, gemm_acc, im2col};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Output squashing of the final dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Logistic sigmoid onto `[0, 1]` (actor).
    Logistic,
    /// Identity (critic, embeddings).
    Linear,
}

/// Image input geometry, channel-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Topology of a conv-pool tower followed by a dense stack.
///
/// Every convolution is valid-padded with stride 1 and followed by ReLU and a
/// 2×2 max-pool of stride 2. After flattening, `extra_inputs` scalars (the
/// action, for critics) are appended before the hidden dense layers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub conv_features: Vec<usize>,
    pub kernel: usize,
    pub extra_inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub head: Head,
}

impl NetworkSpec {
    /// Plain multilayer perceptron over a flat input vector.
    pub fn mlp(inputs: usize, hidden: Vec<usize>, outputs: usize, head: Head) -> Self {
        Self {
            input: InputShape { channels: 1, height: 1, width: inputs },
            conv_features: Vec::new(),
            kernel: 1,
            extra_inputs: 0,
            hidden,
            outputs,
            head,
        }
    }

    pub(crate) fn layers(&self) -> Result<Vec<Layer>> {
        if self.input.is_empty() {
            return Err(Error::Config("network input is empty".into()));
        }
        if self.outputs == 0 {
            return Err(Error::Config("network has no outputs".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) || self.conv_features.iter().any(|&f| f == 0) {
            return Err(Error::Config("zero-width layer".into()));
        }
        let mut layers = Vec::new();
        let (mut c, mut h, mut w) = (self.input.channels, self.input.height, self.input.width);
        for &features in &self.conv_features {
            let k = self.kernel;
            if k == 0 || k > h || k > w {
                return Err(Error::Config(format!("kernel {k} does not fit a {h}×{w} map")));
            }
            layers.push(Layer::Conv { in_c: c, in_h: h, in_w: w, out_c: features, k });
            c = features;
            h = h - k + 1;
            w = w - k + 1;
            layers.push(Layer::Relu);
            if h < 2 || w < 2 {
                return Err(Error::Config(format!("feature map {h}×{w} too small to pool")));
            }
            layers.push(Layer::MaxPool { c, in_h: h, in_w: w });
            h /= 2;
            w /= 2;
        }
        let mut width = c * h * w;
        if self.extra_inputs > 0 {
            layers.push(Layer::Concat { base: width, extra: self.extra_inputs });
            width += self.extra_inputs;
        }
        for &units in &self.hidden {
            layers.push(Layer::Dense { n_in: width, n_out: units });
            layers.push(Layer::Relu);
            width = units;
        }
        layers.push(Layer::Dense { n_in: width, n_out: self.outputs });
        if self.head == Head::Logistic {
            layers.push(Layer::Logistic);
        }
        Ok(layers)
    }

    /// Flattened width of the conv tower output.
    pub fn feature_width(&self) -> Result<usize> {
        let layers = self.layers()?;
        let mut width = self.input.len();
        for layer in &layers {
            match layer {
                Layer::Concat { base, .. } | Layer::Dense { n_in: base, .. } => return Ok(*base),
                _ => width = layer.out_len(width),
            }
        }
        Ok(width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Layer {
    Conv { in_c: usize, in_h: usize, in_w: usize, out_c: usize, k: usize },
    Relu,
    MaxPool { c: usize, in_h: usize, in_w: usize },
    Concat { base: usize, extra: usize },
    Dense { n_in: usize, n_out: usize },
    Logistic,
}

impl Layer {
    fn out_len(&self, in_len: usize) -> usize {
        match *self {
            Layer::Conv { in_h, in_w, out_c, k, .. } => out_c * (in_h - k + 1) * (in_w - k + 1),
            Layer::MaxPool { c, in_h, in_w } => c * (in_h / 2) * (in_w / 2),
            Layer::Concat { base, extra } => base + extra,
            Layer::Dense { n_out, .. } => n_out,
            Layer::Relu | Layer::Logistic => in_len,
        }
    }

    fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>, usize)> {
        match *self {
            Layer::Conv { in_c, out_c, k, .. } => Some((vec![out_c, in_c, k, k], vec![out_c], in_c * k * k)),
            Layer::Dense { n_in, n_out } => Some((vec![n_in, n_out], vec![n_out], n_in)),
            _ => None,
        }
    }
}

enum Cache<T> {
    Conv { input: Vec<T> },
    Relu { output: Vec<T> },
    Pool { argmax: Vec<u32> },
    Concat,
    Dense { input: Vec<T> },
    Logistic { output: Vec<T> },
}

/// Activation record of one batched forward pass.
pub struct Tape<T> {
    spec: NetworkSpec,
    version: u64,
    batch: usize,
    caches: Vec<Cache<T>>,
}

impl<T> Tape<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Result of a backward pass.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    /// One tensor per parameter, in [`Network::params`] order.
    pub params: Vec<Tensor<T>>,
    /// Gradient with respect to the image input (`None` unless requested).
    pub input: Option<Tensor<T>>,
    /// Gradient with respect to the extra inputs (the critic's action).
    pub extra: Option<Tensor<T>>,
}

/// What a backward pass should produce beyond the extra-input gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Want {
    pub params: bool,
    pub input: bool,
}

impl Want {
    pub const ALL: Want = Want { params: true, input: true };
    pub const PARAMS: Want = Want { params: true, input: false };
    pub const INPUTS: Want = Want { params: false, input: true };
    pub const EXTRA: Want = Want { params: false, input: false };
}

/// Network parameters together with their topology.
///
/// Parameters are stored as `[weight, bias]` pairs per conv/dense layer. Dense
/// weights are `[n_in, n_out]`, conv weights `[out_c, in_c, k, k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    params: Vec<Tensor<T>>,
    version: u64,
}

impl<T: Scalar> Network<T> {
    /// He-normal weights (variance `2 / fan_in`), zero biases.
    pub fn he_init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let layers = spec.layers()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for layer in &layers {
            if let Some((w_shape, b_shape, fan_in)) = layer.param_shapes() {
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                    .map_err(|e| Error::Config(e.to_string()))?;
                let n: usize = w_shape.iter().product();
                let data = (0..n).map(|_| T::of(normal.sample(&mut rng))).collect();
                params.push(Tensor::new(w_shape, data)?);
                params.push(Tensor::zeros(b_shape));
            }
        }
        Ok(Self { spec, layers, params, version: 0 })
    }

    /// All-zero parameters.
    pub fn zeros(spec: NetworkSpec) -> Result<Self> {
        let layers = spec.layers()?;
        let mut params = Vec::new();
        for layer in &layers {
            if let Some((w_shape, b_shape, _)) = layer.param_shapes() {
                params.push(Tensor::zeros(w_shape));
                params.push(Tensor::zeros(b_shape));
            }
        }
        Ok(Self { spec, layers, params, version: 0 })
    }

    /// Builds a network from explicit parameter tensors.
    pub fn from_params(spec: NetworkSpec, params: Vec<Tensor<T>>) -> Result<Self> {
        let template = Self::zeros(spec)?;
        if template.params.len() != params.len()
            || template.params.iter().zip(&params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Shape("parameter tensors do not match the network spec".into()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("network parameters".into()));
        }
        Ok(Self { params, ..template })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    /// Mutable parameter access. Invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        self.version += 1;
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Largest absolute elementwise difference between two networks' parameters.
    pub fn max_param_diff(&self, other: &Self) -> f64 {
        self.params
            .iter()
            .zip(&other.params)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    fn check_input(&self, input: &Tensor<T>, extra: Option<&Tensor<T>>) -> Result<usize> {
        let batch = input.rows();
        if input.row_len() != self.spec.input.len() || input.shape().len() < 2 {
            return Err(Error::Shape(format!(
                "input {:?} does not match network input {:?}",
                input.shape(),
                self.spec.input
            )));
        }
        match (self.spec.extra_inputs, extra) {
            (0, None) => {}
            (n, Some(e)) if n > 0 && e.rows() == batch && e.row_len() == n => {}
            (n, e) => {
                return Err(Error::Shape(format!(
                    "network takes {n} extra inputs, got {:?}",
                    e.map(|t| t.shape().to_vec())
                )))
            }
        }
        Ok(batch)
    }

    /// Batched forward pass without recording activations.
    pub fn predict(&self, input: &Tensor<T>, extra: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let batch = self.check_input(input, extra)?;
        let (out, _) = self.run(batch, input.data().to_vec(), extra, false);
        Tensor::new(vec![batch, self.spec.outputs], out)
    }

    /// Batched forward pass; the tape feeds [`Network::backward`].
    pub fn forward(&self, input: &Tensor<T>, extra: Option<&Tensor<T>>) -> Result<(Tensor<T>, Tape<T>)> {
        let batch = self.check_input(input, extra)?;
        let (out, caches) = self.run(batch, input.data().to_vec(), extra, true);
        let tape = Tape { spec: self.spec.clone(), version: self.version, batch, caches };
        Ok((Tensor::new(vec![batch, self.spec.outputs], out)?, tape))
    }

    fn run(&self, batch: usize, mut x: Vec<T>, extra: Option<&Tensor<T>>, record: bool) -> (Vec<T>, Vec<Cache<T>>) {
        let mut caches = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut p = 0;
        for layer in &self.layers {
            let (y, cache) = match *layer {
                Layer::Conv { in_c, in_h, in_w, out_c, k } => {
                    let y = conv_forward(&x, batch, in_c, in_h, in_w, out_c, k, &self.params[p], &self.params[p + 1]);
                    p += 2;
                    (y, record.then(|| Cache::Conv { input: std::mem::take(&mut x) }))
                }
                Layer::Relu => {
                    for v in x.iter_mut() {
                        if *v < T::zero() {
                            *v = T::zero();
                        }
                    }
                    let cache = record.then(|| Cache::Relu { output: x.clone() });
                    (x, cache)
                }
                Layer::MaxPool { c, in_h, in_w } => {
                    let (y, argmax) = pool_forward(&x, batch, c, in_h, in_w);
                    (y, record.then(|| Cache::Pool { argmax }))
                }
                Layer::Concat { base, extra: n } => {
                    let e = extra.expect("checked by check_input").data();
                    let mut y = Vec::with_capacity(batch * (base + n));
                    for b in 0..batch {
                        y.extend_from_slice(&x[b * base..(b + 1) * base]);
                        y.extend_from_slice(&e[b * n..(b + 1) * n]);
                    }
                    (y, record.then_some(Cache::Concat))
                }
                Layer::Dense { n_in, n_out } => {
                    let w = self.params[p].data();
                    let bias = self.params[p + 1].data();
                    p += 2;
                    let mut y = Vec::with_capacity(batch * n_out);
                    for _ in 0..batch {
                        y.extend_from_slice(bias);
                    }
                    gemm_acc(batch, n_in, n_out, &x, w, &mut y);
                    (y, record.then(|| Cache::Dense { input: std::mem::take(&mut x) }))
                }
                Layer::Logistic => {
                    for v in x.iter_mut() {
                        *v = logistic(*v);
                    }
                    let cache = record.then(|| Cache::Logistic { output: x.clone() });
                    (x, cache)
                }
            };
            x = y;
            if let Some(c) = cache {
                caches.push(c);
            }
        }
        (x, caches)
    }

    /// Reverse pass contracting `upstream` (`[batch, outputs]`) through the tape.
    pub fn backward(&self, tape: &Tape<T>, upstream: &Tensor<T>) -> Result<Gradients<T>> {
        self.backward_with(tape, upstream, Want::ALL)
    }

    pub fn backward_with(&self, tape: &Tape<T>, upstream: &Tensor<T>, want: Want) -> Result<Gradients<T>> {
        if tape.spec != self.spec {
            return Err(Error::StaleTape("tape was recorded by a different topology".into()));
        }
        if tape.version != self.version {
            return Err(Error::StaleTape("parameters changed since the forward pass".into()));
        }
        if tape.caches.len() != self.layers.len() {
            return Err(Error::StaleTape("tape was recorded without activations".into()));
        }
        let batch = tape.batch;
        if upstream.rows() != batch || upstream.row_len() != self.spec.outputs {
            return Err(Error::Shape(format!(
                "upstream {:?} does not match output [{batch}, {}]",
                upstream.shape(),
                self.spec.outputs
            )));
        }

        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.params.len()];
        let mut extra_grad = None;
        let mut dy = upstream.data().to_vec();
        let mut p = self.params.len();
        // needs_below[i]: some layer under i consumes the gradient flowing out of i.
        let mut needs_below = vec![want.input; self.layers.len()];
        for i in 1..self.layers.len() {
            let l = &self.layers[i - 1];
            let consumer = matches!(l, Layer::Concat { .. })
                || (want.params && matches!(l, Layer::Conv { .. } | Layer::Dense { .. }));
            needs_below[i] = needs_below[i - 1] || consumer;
        }

        for (idx, (layer, cache)) in self.layers.iter().zip(&tape.caches).enumerate().rev() {
            let need_dx = needs_below[idx];
            match (layer, cache) {
                (&Layer::Conv { in_c, in_h, in_w, out_c, k }, Cache::Conv { input }) => {
                    p -= 2;
                    let (dx, dw, db) = conv_backward(
                        input, &dy, batch, in_c, in_h, in_w, out_c, k, &self.params[p], want.params, need_dx,
                    );
                    if want.params {
                        grads[p] = Some(Tensor::new(self.params[p].shape().to_vec(), dw)?);
                        grads[p + 1] = Some(Tensor::new(vec![out_c], db)?);
                    }
                    if !need_dx {
                        dy.clear();
                        break;
                    }
                    dy = dx;
                }
                (Layer::Relu, Cache::Relu { output }) => {
                    for (g, &o) in dy.iter_mut().zip(output) {
                        if o <= T::zero() {
                            *g = T::zero();
                        }
                    }
                }
                (&Layer::MaxPool { c, in_h, in_w }, Cache::Pool { argmax }) => {
                    if !need_dx {
                        dy.clear();
                        break;
                    }
                    let in_len = c * in_h * in_w;
                    let out_len = argmax.len() / batch;
                    let mut dx = vec![T::zero(); batch * in_len];
                    for b in 0..batch {
                        for o in 0..out_len {
                            dx[b * in_len + argmax[b * out_len + o] as usize] += dy[b * out_len + o];
                        }
                    }
                    dy = dx;
                }
                (&Layer::Concat { base, extra }, Cache::Concat) => {
                    let width = base + extra;
                    let mut dx = Vec::with_capacity(batch * base);
                    let mut de = Vec::with_capacity(batch * extra);
                    for b in 0..batch {
                        dx.extend_from_slice(&dy[b * width..b * width + base]);
                        de.extend_from_slice(&dy[b * width + base..(b + 1) * width]);
                    }
                    extra_grad = Some(Tensor::new(vec![batch, extra], de)?);
                    if !need_dx {
                        dy.clear();
                        break;
                    }
                    dy = dx;
                }
                (&Layer::Dense { n_in, n_out }, Cache::Dense { input }) => {
                    p -= 2;
                    let w = self.params[p].data();
                    if want.params {
                        let mut dw = vec![T::zero(); n_in * n_out];
                        let mut db = vec![T::zero(); n_out];
                        for b in 0..batch {
                            let g = &dy[b * n_out..(b + 1) * n_out];
                            axpy(T::one(), g, &mut db);
                            let xb = &input[b * n_in..(b + 1) * n_in];
                            for (i, &xv) in xb.iter().enumerate() {
                                if xv != T::zero() {
                                    axpy(xv, g, &mut dw[i * n_out..(i + 1) * n_out]);
                                }
                            }
                        }
                        grads[p] = Some(Tensor::new(vec![n_in, n_out], dw)?);
                        grads[p + 1] = Some(Tensor::new(vec![n_out], db)?);
                    }
                    if !need_dx {
                        dy.clear();
                        break;
                    }
                    let mut dx = vec![T::zero(); batch * n_in];
                    for b in 0..batch {
                        let g = &dy[b * n_out..(b + 1) * n_out];
                        for i in 0..n_in {
                            dx[b * n_in + i] = dot(g, &w[i * n_out..(i + 1) * n_out]);
                        }
                    }
                    dy = dx;
                }
                (Layer::Logistic, Cache::Logistic { output }) => {
                    for (g, &o) in dy.iter_mut().zip(output) {
                        *g *= o * (T::one() - o);
                    }
                }
                _ => return Err(Error::StaleTape("cache does not match layer".into())),
            }
        }

        let params = if want.params {
            grads
                .into_iter()
                .map(|g| g.ok_or_else(|| Error::StaleTape("missing parameter gradient".into())))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        let input = if want.input {
            let mut shape = vec![batch];
            if self.spec.conv_features.is_empty() {
                shape.push(self.spec.input.len());
            } else {
                shape.extend([self.spec.input.channels, self.spec.input.height, self.spec.input.width]);
            }
            Some(Tensor::new(shape, dy)?)
        } else {
            None
        };
        Ok(Gradients { params, input, extra: extra_grad })
    }

    /// Elementwise `self = tau·source + (1−tau)·self`.
    pub fn polyak_update(&mut self, source: &Self, tau: f64) -> Result<()> {
        if self.spec != source.spec {
            return Err(Error::Shape("polyak update between different topologies".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau {tau} outside [0, 1]")));
        }
        let tau = T::of(tau);
        let keep = T::one() - tau;
        for (t, s) in self.params_mut().iter_mut().zip(&source.params) {
            for (tv, &sv) in t.data_mut().iter_mut().zip(s.data()) {
                *tv = tau * sv + keep * *tv;
            }
        }
        Ok(())
    }

    /// Overwrites all parameters with a copy of `source`'s.
    pub fn copy_from(&mut self, source: &Self) -> Result<()> {
        if self.spec != source.spec {
            return Err(Error::Shape("copy between different topologies".into()));
        }
        self.params = source.params.clone();
        self.version += 1;
        Ok(())
    }
}

#[inline]
fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward<T: Scalar>(
    x: &[T],
    batch: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    k: usize,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Vec<T> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    let q = c * k * k;
    let in_len = c * h * w;
    let mut cols = vec![T::zero(); q * p];
    let mut y = vec![T::zero(); batch * f * p];
    for b in 0..batch {
        im2col(&x[b * in_len..(b + 1) * in_len], c, h, w, k, &mut cols);
        let out = &mut y[b * f * p..(b + 1) * f * p];
        for (fi, &bv) in bias.data().iter().enumerate() {
            out[fi * p..(fi + 1) * p].fill(bv);
        }
        gemm_acc(f, q, p, weight.data(), &cols, out);
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    x: &[T],
    dy: &[T],
    batch: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    k: usize,
    weight: &Tensor<T>,
    want_params: bool,
    want_dx: bool,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let p = oh * ow;
    let q = c * k * k;
    let in_len = c * h * w;
    let wd = weight.data();
    let mut dw = if want_params { vec![T::zero(); f * q] } else { Vec::new() };
    let mut db = if want_params { vec![T::zero(); f] } else { Vec::new() };
    let mut dx = if want_dx { vec![T::zero(); batch * in_len] } else { Vec::new() };
    let mut cols = vec![T::zero(); q * p];
    let mut dcols = vec![T::zero(); q * p];
    for b in 0..batch {
        let g = &dy[b * f * p..(b + 1) * f * p];
        if want_params {
            im2col(&x[b * in_len..(b + 1) * in_len], c, h, w, k, &mut cols);
            for fi in 0..f {
                let gf = &g[fi * p..(fi + 1) * p];
                db[fi] += gf.iter().copied().sum::<T>();
                for qi in 0..q {
                    dw[fi * q + qi] += dot(gf, &cols[qi * p..(qi + 1) * p]);
                }
            }
        }
        if want_dx {
            dcols.fill(T::zero());
            for fi in 0..f {
                let gf = &g[fi * p..(fi + 1) * p];
                for qi in 0..q {
                    let wv = wd[fi * q + qi];
                    axpy(wv, gf, &mut dcols[qi * p..(qi + 1) * p]);
                }
            }
            col2im(&dcols, c, h, w, k, &mut dx[b * in_len..(b + 1) * in_len]);
        }
    }
    (dx, dw, db)
}

fn pool_forward<T: Scalar>(x: &[T], batch: usize, c: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let in_len = c * h * w;
    let out_len = c * oh * ow;
    let mut y = Vec::with_capacity(batch * out_len);
    let mut argmax = Vec::with_capacity(batch * out_len);
    for b in 0..batch {
        let xb = &x[b * in_len..(b + 1) * in_len];
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = ch * h * w + (2 * oy) * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ch * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                        if xb[idx] > xb[best] {
                            best = idx;
                        }
                    }
                    y.push(xb[best]);
                    argmax.push(best as u32);
                }
            }
        }
    }
    (y, argmax)
}
