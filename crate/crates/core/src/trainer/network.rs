//! Desk-scale classifiers with hand-written forward and backward passes.
//!
//! Parameters live in one flat `f32` buffer so the optimiser and the model
//! file format can treat every architecture the same way.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Logistic regression on raw pixels.
    LinearSoftmax,
    /// conv3x3(16) -> ReLU -> pool2 -> conv3x3(32) -> ReLU -> pool2 -> dense.
    SmallConvNet,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::LinearSoftmax => "linear-softmax",
            Architecture::SmallConvNet => "small-convnet",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "linear-softmax" => Ok(Architecture::LinearSoftmax),
            "small-convnet" => Ok(Architecture::SmallConvNet),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Architecture::LinearSoftmax => 0,
            Architecture::SmallConvNet => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(Architecture::LinearSoftmax),
            1 => Ok(Architecture::SmallConvNet),
            c => Err(Error::ModelFormat(format!("unknown architecture code {c}"))),
        }
    }
}

const C1: usize = 16;
const C2: usize = 32;

/// Offsets of each parameter block inside the flat buffer.
#[derive(Debug, Clone, Copy)]
struct Layout {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    dense_w: usize,
    dense_b: usize,
    features: usize,
    total: usize,
}

impl Layout {
    fn new(arch: Architecture, h: usize, w: usize, classes: usize) -> Self {
        match arch {
            Architecture::LinearSoftmax => {
                let features = h * w;
                Layout {
                    conv1_w: 0,
                    conv1_b: 0,
                    conv2_w: 0,
                    conv2_b: 0,
                    dense_w: 0,
                    dense_b: classes * features,
                    features,
                    total: classes * features + classes,
                }
            }
            Architecture::SmallConvNet => {
                let conv1_w = 0;
                let conv1_b = conv1_w + C1 * 9;
                let conv2_w = conv1_b + C1;
                let conv2_b = conv2_w + C2 * C1 * 9;
                let dense_w = conv2_b + C2;
                let features = C2 * (h / 4) * (w / 4);
                let dense_b = dense_w + classes * features;
                Layout { conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b, features, total: dense_b + classes }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    height: usize,
    width: usize,
    classes: usize,
    params: Vec<f32>,
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Default)]
pub struct Scratch {
    a1: Vec<f32>,
    p1: Vec<f32>,
    p1_idx: Vec<u32>,
    a2: Vec<f32>,
    p2: Vec<f32>,
    p2_idx: Vec<u32>,
    d_p2: Vec<f32>,
    d_a2: Vec<f32>,
    d_p1: Vec<f32>,
    d_a1: Vec<f32>,
}

impl Network {
    /// Fresh network. Linear models start at zero; the convnet uses He
    /// fan-in initialisation seeded by `init_seed`.
    pub fn new(arch: Architecture, height: usize, width: usize, classes: usize, init_seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config(format!("{classes} classes, need at least 2")));
        }
        if height == 0 || width == 0 {
            return Err(Error::Config("input extent must be non-zero".into()));
        }
        if arch == Architecture::SmallConvNet && (!height.is_multiple_of(4) || !width.is_multiple_of(4)) {
            return Err(Error::Config(format!("small-convnet input {height}x{width} must be divisible by 4")));
        }
        let layout = Layout::new(arch, height, width, classes);
        let mut params = vec![0.0f32; layout.total];
        if arch == Architecture::SmallConvNet {
            let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
            let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
                let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).unwrap();
                for p in &mut params[range] {
                    *p = normal.sample(&mut rng);
                }
            };
            fill(layout.conv1_w..layout.conv1_b, 9);
            fill(layout.conv2_w..layout.conv2_b, C1 * 9);
            fill(layout.dense_w..layout.dense_b, layout.features);
        }
        Ok(Self { arch, height, width, classes, params })
    }

    pub(crate) fn from_parts(
        arch: Architecture,
        height: usize,
        width: usize,
        classes: usize,
        params: Vec<f32>,
    ) -> Result<Self> {
        let mut net = Self::new(arch, height, width, classes, 0)?;
        if params.len() != net.params.len() {
            return Err(Error::ModelFormat(format!(
                "{} weights for a network with {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.arch, self.height, self.width, self.classes)
    }

    /// Class scores for one normalised input.
    pub fn forward(&self, input: &[f32], scratch: &mut Scratch) -> Vec<f32> {
        assert_eq!(input.len(), self.height * self.width, "input size");
        let l = self.layout();
        let p = &self.params;
        match self.arch {
            Architecture::LinearSoftmax => dense_forward(input, &p[l.dense_w..l.dense_b], &p[l.dense_b..], self.classes),
            Architecture::SmallConvNet => {
                let (h, w) = (self.height, self.width);
                let (h2, w2) = (h / 2, w / 2);
                scratch.a1.resize(C1 * h * w, 0.0);
                conv3x3_forward(input, 1, h, w, &p[l.conv1_w..l.conv1_b], &p[l.conv1_b..l.conv2_w], C1, &mut scratch.a1);
                relu(&mut scratch.a1);
                maxpool2_forward(&scratch.a1, C1, h, w, &mut scratch.p1, &mut scratch.p1_idx);
                scratch.a2.resize(C2 * h2 * w2, 0.0);
                conv3x3_forward(
                    &scratch.p1,
                    C1,
                    h2,
                    w2,
                    &p[l.conv2_w..l.conv2_b],
                    &p[l.conv2_b..l.dense_w],
                    C2,
                    &mut scratch.a2,
                );
                relu(&mut scratch.a2);
                maxpool2_forward(&scratch.a2, C2, h2, w2, &mut scratch.p2, &mut scratch.p2_idx);
                dense_forward(&scratch.p2, &p[l.dense_w..l.dense_b], &p[l.dense_b..], self.classes)
            }
        }
    }

    /// Accumulate parameter gradients for one example into `grads`, given
    /// the gradient of the loss with respect to the class scores. Must follow
    /// a [`Self::forward`] on the same input and scratch.
    pub fn backward(&self, input: &[f32], d_scores: &[f32], scratch: &mut Scratch, grads: &mut [f32]) {
        let l = self.layout();
        let p = &self.params;
        match self.arch {
            Architecture::LinearSoftmax => {
                let (gw, gb) = grads.split_at_mut(l.dense_b);
                dense_backward(input, &p[l.dense_w..l.dense_b], d_scores, gw, gb, None);
            }
            Architecture::SmallConvNet => {
                let (h, w) = (self.height, self.width);
                let (h2, w2) = (h / 2, w / 2);
                let Scratch { a1, p1, p1_idx, a2, p2, p2_idx, d_p2, d_a2, d_p1, d_a1 } = scratch;
                d_p2.clear();
                d_p2.resize(p2.len(), 0.0);
                {
                    let (head, gb) = grads.split_at_mut(l.dense_b);
                    let gw = &mut head[l.dense_w..];
                    dense_backward(p2, &p[l.dense_w..l.dense_b], d_scores, gw, gb, Some(d_p2));
                }
                maxpool2_backward(d_p2, p2_idx, a2.len(), d_a2);
                relu_backward(a2, d_a2);
                d_p1.clear();
                d_p1.resize(p1.len(), 0.0);
                {
                    let (head, tail) = grads.split_at_mut(l.conv2_b);
                    let gw = &mut head[l.conv2_w..];
                    let gb = &mut tail[..C2];
                    conv3x3_backward(p1, C1, h2, w2, &p[l.conv2_w..l.conv2_b], C2, d_a2, gw, gb, Some(d_p1));
                }
                maxpool2_backward(d_p1, p1_idx, a1.len(), d_a1);
                relu_backward(a1, d_a1);
                let (head, tail) = grads.split_at_mut(l.conv1_b);
                let gw = &mut head[l.conv1_w..];
                let gb = &mut tail[..C1];
                conv3x3_backward(input, 1, h, w, &p[l.conv1_w..l.conv1_b], C1, d_a1, gw, gb, None);
            }
        }
    }
}

fn relu(x: &mut [f32]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn relu_backward(activated: &[f32], grad: &mut [f32]) {
    for (g, a) in grad.iter_mut().zip(activated) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn dense_forward(input: &[f32], weights: &[f32], bias: &[f32], classes: usize) -> Vec<f32> {
    let d = input.len();
    (0..classes)
        .map(|c| {
            let row = &weights[c * d..(c + 1) * d];
            bias[c] + dot(row, input)
        })
        .collect()
}

fn dense_backward(
    input: &[f32],
    weights: &[f32],
    d_out: &[f32],
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    mut d_input: Option<&mut Vec<f32>>,
) {
    let d = input.len();
    for (c, &g) in d_out.iter().enumerate() {
        grad_b[c] += g;
        if g == 0.0 {
            continue;
        }
        for (gw, x) in grad_w[c * d..(c + 1) * d].iter_mut().zip(input) {
            *gw += g * x;
        }
        if let Some(di) = d_input.as_deref_mut() {
            for (dx, w) in di.iter_mut().zip(&weights[c * d..(c + 1) * d]) {
                *dx += g * w;
            }
        }
    }
}

/// Dot product with independent partial sums, which lets the compiler
/// vectorise the loop.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

#[inline]
fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

/// Patch matrix of a same-padded 3x3 convolution: row `(ic, ky, kx)` holds
/// the input shifted by `(ky - 1, kx - 1)`, zero outside the image.
fn im2col(input: &[f32], cin: usize, h: usize, w: usize, col: &mut Vec<f32>) {
    let plane = h * w;
    col.clear();
    col.resize(cin * 9 * plane, 0.0);
    for ic in 0..cin {
        let src = &input[ic * plane..(ic + 1) * plane];
        for k in 0..9 {
            let (dy, dx) = (k as isize / 3 - 1, k as isize % 3 - 1);
            let row = &mut col[(ic * 9 + k) * plane..(ic * 9 + k + 1) * plane];
            let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx.max(0)) as usize);
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let s0 = sy as usize * w + (x0 as isize + dx) as usize;
                row[y * w + x0..y * w + x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch gradients back onto the input.
fn col2im(col: &[f32], cin: usize, h: usize, w: usize, d_input: &mut [f32]) {
    let plane = h * w;
    for ic in 0..cin {
        let dst = &mut d_input[ic * plane..(ic + 1) * plane];
        for k in 0..9 {
            let (dy, dx) = (k as isize / 3 - 1, k as isize % 3 - 1);
            let row = &col[(ic * 9 + k) * plane..(ic * 9 + k + 1) * plane];
            let (x0, x1) = ((-dx).max(0) as usize, (w as isize - dx.max(0)) as usize);
            for y in 0..h {
                let sy = y as isize + dy;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let s0 = sy as usize * w + (x0 as isize + dx) as usize;
                for (d, g) in dst[s0..s0 + (x1 - x0)].iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                    *d += g;
                }
            }
        }
    }
}

/// Same-padded 3x3 convolution (zero padding), stride 1.
#[allow(clippy::too_many_arguments)]
fn conv3x3_forward(
    input: &[f32],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f32],
    bias: &[f32],
    cout: usize,
    out: &mut [f32],
) {
    let plane = h * w;
    let mut col = Vec::new();
    im2col(input, cin, h, w, &mut col);
    let k_len = cin * 9;
    for oc in 0..cout {
        let o = &mut out[oc * plane..(oc + 1) * plane];
        o.fill(bias[oc]);
        for k in 0..k_len {
            axpy(weights[oc * k_len + k], &col[k * plane..(k + 1) * plane], o);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f32],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f32],
    cout: usize,
    d_out: &[f32],
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    d_input: Option<&mut Vec<f32>>,
) {
    let plane = h * w;
    let mut col = Vec::new();
    im2col(input, cin, h, w, &mut col);
    let k_len = cin * 9;
    let mut d_col = if d_input.is_some() { vec![0.0f32; col.len()] } else { Vec::new() };
    for oc in 0..cout {
        let g = &d_out[oc * plane..(oc + 1) * plane];
        grad_b[oc] += g.iter().sum::<f32>();
        for k in 0..k_len {
            let row = &col[k * plane..(k + 1) * plane];
            grad_w[oc * k_len + k] += dot(g, row);
            if !d_col.is_empty() {
                axpy(weights[oc * k_len + k], g, &mut d_col[k * plane..(k + 1) * plane]);
            }
        }
    }
    if let Some(di) = d_input {
        col2im(&d_col, cin, h, w, di);
    }
}

/// 2x2 max pooling, stride 2. Records the flat index of each winner.
fn maxpool2_forward(input: &[f32], channels: usize, h: usize, w: usize, out: &mut Vec<f32>, idx: &mut Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    out.clear();
    idx.clear();
    for c in 0..channels {
        let base = c * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + 2 * y * w + 2 * x;
                for k in [best + 1, best + w, best + w + 1] {
                    if input[k] > input[best] {
                        best = k;
                    }
                }
                out.push(input[best]);
                idx.push(best as u32);
            }
        }
    }
}

fn maxpool2_backward(d_out: &[f32], idx: &[u32], input_len: usize, d_input: &mut Vec<f32>) {
    d_input.clear();
    d_input.resize(input_len, 0.0);
    for (g, &k) in d_out.iter().zip(idx) {
        d_input[k as usize] += g;
    }
}
