//! Tape-based reverse-mode differentiation over dense `f64` tensors.
//!
//! Every operation appends a node holding its forward value; `backward`
//! walks the tape in reverse and accumulates vector-Jacobian products.
//! Each op checks its output for NaN/Inf and fails with
//! [`NnError::NonFinite`].

use super::conv::{self, ConvShape};
use super::NnError;
use crate::dsp::{Complex64, StftPlan};
use std::sync::Arc;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MulConst(Var, Vec<f64>),
    MatMul { a: Var, b: Var, m: usize, k: usize, n: usize },
    Conv2d { input: Var, weight: Var, bias: Var, kernel: usize },
    Sigmoid(Var),
    Relu(Var),
    Abs(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Concat(Vec<Var>),
    AvgPoolLast { input: Var, factor: usize },
    MeanSpatial { input: Var, channels: usize },
    ComplexMask { mask: Var, re: Arc<Vec<f64>>, im: Arc<Vec<f64>> },
    CompressedMagnitude { spec: Var, exponent: f64, eps: f64 },
    Istft { spec: Var, plan: Arc<StftPlan>, frames: usize },
    Stft { wave: Var, plan: Arc<StftPlan> },
}

struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Magnitude floor keeping `(re² + im² + eps)^(c/2)` differentiable at 0.
pub const MAGNITUDE_EPS: f64 = 1e-12;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn leaf(&mut self, value: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Var, NnError> {
        if value.len() != numel(shape) {
            return Err(NnError::ShapeMismatch(format!(
                "leaf data has {} values for shape {:?}",
                value.len(),
                shape
            )));
        }
        self.push(value, shape.to_vec(), Op::Leaf, requires_grad, "leaf")
    }

    pub fn constant(&mut self, value: Vec<f64>, shape: &[usize]) -> Result<Var, NnError> {
        self.leaf(value, shape, false)
    }

    fn push(
        &mut self,
        value: Vec<f64>,
        shape: Vec<usize>,
        op: Op,
        needs_grad: bool,
        name: &'static str,
    ) -> Result<Var, NnError> {
        if value.iter().any(|x| !x.is_finite()) {
            return Err(NnError::NonFinite(name));
        }
        self.nodes.push(Node {
            value,
            shape,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::ShapeMismatch(format!(
                "{op}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_map(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var, NnError> {
        self.same_shape(a, b, name)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(&[a, b]);
        self.push(value, shape, op, ng, name)
    }

    fn map(&mut self, a: Var, op: Op, name: &'static str, f: impl Fn(f64) -> f64) -> Result<Var, NnError> {
        let value = self.value(a).iter().map(|x| f(*x)).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(&[a]);
        self.push(value, shape, op, ng, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_map(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_map(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.zip_map(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var, NnError> {
        self.map(a, Op::Scale(a, k), "scale", |x| x * k)
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var, NnError> {
        self.map(a, Op::AddScalar(a), "add_scalar", |x| x + k)
    }

    /// Elementwise product with a constant array.
    pub fn mul_const(&mut self, a: Var, k: Vec<f64>) -> Result<Var, NnError> {
        if k.len() != self.value(a).len() {
            return Err(NnError::ShapeMismatch(format!(
                "mul_const: {} vs {}",
                k.len(),
                self.value(a).len()
            )));
        }
        let value = self.value(a).iter().zip(&k).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.needs(&[a]);
        self.push(value, shape, Op::MulConst(a, k), ng, "mul_const")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, NnError> {
        self.map(a, Op::Sigmoid(a), "sigmoid", |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NnError> {
        self.map(a, Op::Relu(a), "relu", |x| x.max(0.0))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var, NnError> {
        self.map(a, Op::Abs(a), "abs", f64::abs)
    }

    pub fn square(&mut self, a: Var) -> Result<Var, NnError> {
        self.map(a, Op::Square(a), "square", |x| x * x)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NnError> {
        let s = self.value(a).iter().sum();
        let ng = self.needs(&[a]);
        self.push(vec![s], vec![1], Op::Sum(a), ng, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NnError> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(NnError::ShapeMismatch("mean of empty tensor".into()));
        }
        let s = self.value(a).iter().sum::<f64>() / n as f64;
        let ng = self.needs(&[a]);
        self.push(vec![s], vec![1], Op::Mean(a), ng, "mean")
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NnError> {
        if numel(shape) != self.value(a).len() {
            return Err(NnError::ShapeMismatch(format!(
                "reshape {:?} -> {:?}",
                self.shape(a),
                shape
            )));
        }
        let value = self.value(a).to_vec();
        let ng = self.needs(&[a]);
        self.push(value, shape.to_vec(), Op::Reshape(a), ng, "reshape")
    }

    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(NnError::ShapeMismatch(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av[i * k + p];
                let row = &bv[p * n..(p + 1) * n];
                for (o, y) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += x * y;
                }
            }
        }
        let ng = self.needs(&[a, b]);
        self.push(out, vec![m, n], Op::MatMul { a, b, m, k, n }, ng, "matmul")
    }

    /// Same-padded stride-1 convolution: input `[C, H, W]`, weight
    /// `[O, C, K, K]` with odd `K`, bias `[O]` → `[O, H, W]`.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var, NnError> {
        let (si, sw, sb) = (self.shape(input), self.shape(weight), self.shape(bias));
        if si.len() != 3 || sw.len() != 4 || sw[1] != si[0] || sw[2] != sw[3] || sw[2] % 2 == 0 || sb != [sw[0]] {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d input {si:?}, weight {sw:?}, bias {sb:?}"
            )));
        }
        let cs = ConvShape {
            in_ch: si[0],
            out_ch: sw[0],
            height: si[1],
            width: si[2],
            kernel: sw[2],
        };
        let out = conv::forward(&cs, self.value(input), self.value(weight), self.value(bias));
        let shape = vec![cs.out_ch, cs.height, cs.width];
        let ng = self.needs(&[input, weight, bias]);
        self.push(
            out,
            shape,
            Op::Conv2d {
                input,
                weight,
                bias,
                kernel: cs.kernel,
            },
            ng,
            "conv2d",
        )
    }

    /// Concatenation along the leading axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let first = parts
            .first()
            .ok_or_else(|| NnError::ShapeMismatch("concat of nothing".into()))?;
        let tail = self.shape(*first)[1..].to_vec();
        let mut lead = 0;
        let mut value = Vec::new();
        for &p in parts {
            if self.shape(p)[1..] != tail[..] {
                return Err(NnError::ShapeMismatch(format!(
                    "concat {:?} with {:?}",
                    self.shape(*first),
                    self.shape(p)
                )));
            }
            lead += self.shape(p)[0];
            value.extend_from_slice(self.value(p));
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        let ng = self.needs(parts);
        self.push(value, shape, Op::Concat(parts.to_vec()), ng, "concat")
    }

    /// Averages groups of `factor` along the last axis; a trailing partial
    /// group averages over its own length.
    pub fn avg_pool_last(&mut self, input: Var, factor: usize) -> Result<Var, NnError> {
        let shape = self.shape(input).to_vec();
        let w = *shape.last().ok_or_else(|| NnError::ShapeMismatch("pool of scalar".into()))?;
        if factor == 0 {
            return Err(NnError::ShapeMismatch("pool factor 0".into()));
        }
        let ow = w.div_ceil(factor);
        let rows = self.value(input).len() / w;
        let src = self.value(input);
        let mut out = vec![0.0; rows * ow];
        for r in 0..rows {
            for j in 0..ow {
                let lo = j * factor;
                let hi = (lo + factor).min(w);
                out[r * ow + j] = src[r * w + lo..r * w + hi].iter().sum::<f64>() / (hi - lo) as f64;
            }
        }
        let mut oshape = shape;
        *oshape.last_mut().unwrap() = ow;
        let ng = self.needs(&[input]);
        self.push(out, oshape, Op::AvgPoolLast { input, factor }, ng, "avg_pool")
    }

    /// `[C, ...]` → `[C]` by averaging each channel.
    pub fn mean_spatial(&mut self, input: Var) -> Result<Var, NnError> {
        let channels = self.shape(input)[0];
        let per = self.value(input).len() / channels;
        let out = self
            .value(input)
            .chunks(per)
            .map(|c| c.iter().sum::<f64>() / per as f64)
            .collect();
        let ng = self.needs(&[input]);
        self.push(out, vec![channels], Op::MeanSpatial { input, channels }, ng, "mean_spatial")
    }

    /// Applies a real mask `[T, F]` to a constant complex spectrogram given
    /// as planes, producing `[2, T, F]` (real plane then imaginary plane).
    pub fn complex_mask(&mut self, mask: Var, re: Arc<Vec<f64>>, im: Arc<Vec<f64>>) -> Result<Var, NnError> {
        let shape = self.shape(mask).to_vec();
        let n = self.value(mask).len();
        if re.len() != n || im.len() != n || shape.len() != 2 {
            return Err(NnError::ShapeMismatch(format!(
                "complex_mask {shape:?} against {} bins",
                re.len()
            )));
        }
        let m = self.value(mask);
        let mut out = Vec::with_capacity(2 * n);
        out.extend(m.iter().zip(re.iter()).map(|(a, b)| a * b));
        out.extend(m.iter().zip(im.iter()).map(|(a, b)| a * b));
        let ng = self.needs(&[mask]);
        self.push(out, vec![2, shape[0], shape[1]], Op::ComplexMask { mask, re, im }, ng, "complex_mask")
    }

    /// `(re² + im² + eps)^(exponent / 2)` for a `[2, T, F]` spectrogram.
    pub fn compressed_magnitude(&mut self, spec: Var, exponent: f64) -> Result<Var, NnError> {
        let shape = self.shape(spec).to_vec();
        if shape.len() != 3 || shape[0] != 2 {
            return Err(NnError::ShapeMismatch(format!("compressed_magnitude {shape:?}")));
        }
        let n = shape[1] * shape[2];
        let v = self.value(spec);
        let out = (0..n)
            .map(|i| (v[i] * v[i] + v[n + i] * v[n + i] + MAGNITUDE_EPS).powf(exponent / 2.0))
            .collect();
        let ng = self.needs(&[spec]);
        self.push(
            out,
            vec![shape[1], shape[2]],
            Op::CompressedMagnitude {
                spec,
                exponent,
                eps: MAGNITUDE_EPS,
            },
            ng,
            "compressed_magnitude",
        )
    }

    /// Differentiable inverse STFT of a `[2, T, F]` spectrogram.
    pub fn istft(&mut self, spec: Var, plan: Arc<StftPlan>, out_length: usize) -> Result<Var, NnError> {
        let shape = self.shape(spec).to_vec();
        if shape.len() != 3 || shape[0] != 2 || shape[2] != plan.params().n_bins() {
            return Err(NnError::ShapeMismatch(format!("istft input {shape:?}")));
        }
        let frames = shape[1];
        let bins = planes_to_complex(self.value(spec));
        let out = plan.synthesize(&bins, frames, out_length)?;
        let ng = self.needs(&[spec]);
        self.push(out, vec![out_length], Op::Istft { spec, plan, frames }, ng, "istft")
    }

    /// Differentiable STFT of a 1-D signal → `[2, T, F]`.
    pub fn stft(&mut self, wave: Var, plan: Arc<StftPlan>) -> Result<Var, NnError> {
        let len = self.value(wave).len();
        let frames = plan.n_frames(len)?;
        let bins = plan.analyze(self.value(wave))?;
        let out = complex_to_planes(&bins);
        let shape = vec![2, frames, plan.params().n_bins()];
        let ng = self.needs(&[wave]);
        self.push(out, shape, Op::Stft { wave, plan }, ng, "stft")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NnError::NotScalar(self.nodes[loss.0].shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<(), NnError> {
        let mut acc = |v: Var, contrib: Vec<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => {
                    for (e, c) in existing.iter_mut().zip(contrib) {
                        *e += c;
                    }
                }
                slot => *slot = Some(contrib),
            }
        };
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.iter().map(|x| -x).collect());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if needs(*a) {
                    acc(*a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                }
                if needs(*b) {
                    acc(*b, g.iter().zip(av).map(|(x, y)| x * y).collect());
                }
            }
            Op::Scale(a, k) => acc(*a, g.iter().map(|x| x * k).collect()),
            Op::AddScalar(a) => acc(*a, g.to_vec()),
            Op::MulConst(a, k) => acc(*a, g.iter().zip(k).map(|(x, y)| x * y).collect()),
            Op::MatMul { a, b, m, k, n } => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (*m, *k, *n);
                if needs(*a) {
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] = (0..n).map(|j| g[i * n + j] * bv[p * n + j]).sum();
                        }
                    }
                    acc(*a, ga);
                }
                if needs(*b) {
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let x = av[i * k + p];
                            for j in 0..n {
                                gb[p * n + j] += x * g[i * n + j];
                            }
                        }
                    }
                    acc(*b, gb);
                }
            }
            Op::Conv2d {
                input,
                weight,
                bias,
                kernel,
            } => {
                let si = self.shape(*input);
                let cs = ConvShape {
                    in_ch: si[0],
                    out_ch: node.shape[0],
                    height: si[1],
                    width: si[2],
                    kernel: *kernel,
                };
                if needs(*input) {
                    acc(*input, conv::backward_input(&cs, g, self.value(*weight)));
                }
                if needs(*weight) || needs(*bias) {
                    let (gw, gb) = conv::backward_params(&cs, g, self.value(*input));
                    acc(*weight, gw);
                    acc(*bias, gb);
                }
            }
            Op::Sigmoid(a) => acc(
                *a,
                g.iter().zip(&node.value).map(|(x, s)| x * s * (1.0 - s)).collect(),
            ),
            Op::Relu(a) => acc(
                *a,
                g.iter()
                    .zip(self.value(*a))
                    .map(|(x, v)| if *v > 0.0 { *x } else { 0.0 })
                    .collect(),
            ),
            Op::Abs(a) => acc(
                *a,
                g.iter()
                    .zip(self.value(*a))
                    .map(|(x, v)| if *v > 0.0 { *x } else if *v < 0.0 { -x } else { 0.0 })
                    .collect(),
            ),
            Op::Square(a) => acc(
                *a,
                g.iter().zip(self.value(*a)).map(|(x, v)| 2.0 * x * v).collect(),
            ),
            Op::Sum(a) => acc(*a, vec![g[0]; self.value(*a).len()]),
            Op::Mean(a) => {
                let n = self.value(*a).len();
                acc(*a, vec![g[0] / n as f64; n]);
            }
            Op::Reshape(a) => acc(*a, g.to_vec()),
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    acc(*p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::AvgPoolLast { input, factor } => {
                let w = *self.shape(*input).last().unwrap();
                let ow = *node.shape.last().unwrap();
                let rows = self.value(*input).len() / w;
                let mut gi = vec![0.0; rows * w];
                for r in 0..rows {
                    for j in 0..ow {
                        let lo = j * factor;
                        let hi = (lo + factor).min(w);
                        let share = g[r * ow + j] / (hi - lo) as f64;
                        gi[r * w + lo..r * w + hi].iter_mut().for_each(|x| *x = share);
                    }
                }
                acc(*input, gi);
            }
            Op::MeanSpatial { input, channels } => {
                let per = self.value(*input).len() / channels;
                let mut gi = Vec::with_capacity(per * channels);
                for c in 0..*channels {
                    gi.extend(std::iter::repeat(g[c] / per as f64).take(per));
                }
                acc(*input, gi);
            }
            Op::ComplexMask { mask, re, im } => {
                let n = re.len();
                acc(
                    *mask,
                    (0..n).map(|i| g[i] * re[i] + g[n + i] * im[i]).collect(),
                );
            }
            Op::CompressedMagnitude { spec, exponent, eps } => {
                let v = self.value(*spec);
                let n = node.value.len();
                let mut gs = vec![0.0; 2 * n];
                for i in 0..n {
                    let (re, im) = (v[i], v[n + i]);
                    let power = re * re + im * im + eps;
                    // d/dre (p^(c/2)) = c * p^(c/2 - 1) * re
                    let d = exponent * node.value[i] / power;
                    gs[i] = g[i] * d * re;
                    gs[n + i] = g[i] * d * im;
                }
                acc(*spec, gs);
            }
            Op::Istft { spec, plan, frames } => {
                let adj = plan.synthesize_adjoint(g, *frames)?;
                acc(*spec, complex_to_planes(&adj));
            }
            Op::Stft { wave, plan } => {
                let len = self.value(*wave).len();
                let adj = plan.analyze_adjoint(&planes_to_complex(g), len)?;
                acc(*wave, adj);
            }
        }
        Ok(())
    }
}

/// `[2, T, F]` planes → frame-major complex bins.
pub fn planes_to_complex(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect()
}

pub fn complex_to_planes(bins: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * bins.len());
    out.extend(bins.iter().map(|c| c.re));
    out.extend(bins.iter().map(|c| c.im));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::StftParams;

    #[test]
    fn square_derivative() {
        let mut t = Tape::new();
        let x = t.leaf(vec![3.0], &[1], true).unwrap();
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap(), &[6.0]);
    }

    #[test]
    fn sigmoid_of_zero() {
        let mut t = Tape::new();
        let x = t.constant(vec![0.0], &[1]).unwrap();
        let y = t.sigmoid(x).unwrap();
        assert_eq!(t.value(y), &[0.5]);
    }

    #[test]
    fn identity_matmul() {
        let mut t = Tape::new();
        let i = t.constant(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]).unwrap();
        let a = t.constant(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]).unwrap();
        let p = t.matmul(i, a).unwrap();
        assert_eq!(t.value(p), t.value(a));
        assert_eq!(t.shape(p), &[2, 3]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut t = Tape::new();
        let w = t.leaf(vec![0.5, -0.5], &[2], true).unwrap();
        let c = t.constant(vec![2.0, 3.0], &[2]).unwrap();
        let z = t.scale(w, 0.0).unwrap();
        let s = t.add(z, c).unwrap();
        let loss = t.sum(s).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn errors_surface() {
        let mut t = Tape::new();
        let a = t.constant(vec![1.0, 2.0], &[2]).unwrap();
        let b = t.constant(vec![1.0, 2.0, 3.0], &[3]).unwrap();
        assert!(matches!(t.add(a, b), Err(NnError::ShapeMismatch(_))));
        assert!(matches!(t.backward(a), Err(NnError::NotScalar(_))));
        let big = t.constant(vec![1e300], &[1]).unwrap();
        assert!(matches!(t.square(big), Err(NnError::NonFinite("square"))));
        assert!(t.leaf(vec![1.0], &[2], true).is_err());
    }

    #[test]
    fn pool_and_concat_shapes() {
        let mut t = Tape::new();
        let a = t.constant((0..10).map(f64::from).collect(), &[1, 2, 5]).unwrap();
        let p = t.avg_pool_last(a, 2).unwrap();
        assert_eq!(t.shape(p), &[1, 2, 3]);
        assert_eq!(t.value(p), &[0.5, 2.5, 4.0, 5.5, 7.5, 9.0]);
        let c = t.concat(&[a, a]).unwrap();
        assert_eq!(t.shape(c), &[2, 2, 5]);
        let m = t.mean_spatial(c).unwrap();
        assert_eq!(t.value(m), &[4.5, 4.5]);
    }

    #[test]
    fn stft_istft_ops_round_trip() {
        let plan = Arc::new(StftPlan::new(StftParams::new(64, 32, crate::dsp::Window::SqrtHann, true).unwrap()).unwrap());
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut t = Tape::new();
        let w = t.constant(x.clone(), &[300]).unwrap();
        let s = t.stft(w, plan.clone()).unwrap();
        let back = t.istft(s, plan, 300).unwrap();
        for (a, b) in t.value(back).iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
