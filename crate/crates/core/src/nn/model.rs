//! Forward and backward passes of the two reference architectures.

use super::kernels::{affine, affine_backward, axpy, dot, relu_backward, relu_in_place};
use super::params::Parameters;
use super::spec::{Arch, ModelSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub embedding: Vec<f64>,
}

/// Intermediate activations kept for backprop.
pub(crate) enum Cache {
    Mlp {
        z1: Vec<f64>,
        a1: Vec<f64>,
        z2: Vec<f64>,
    },
    Cnn {
        z1: Vec<f64>,
        a1: Vec<f64>,
        z2: Vec<f64>,
        pooled: Vec<f64>,
    },
}

pub(crate) struct Forward {
    pub out: Output,
    pub cache: Cache,
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

/// Probability floor applied before the logarithm in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = probs.get(label).ok_or_else(|| {
        Error::invalid(format!("label {label} out of range for {} classes", probs.len()))
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

fn views<'a>(params: &'a Parameters) -> Vec<&'a [f64]> {
    params
        .layout
        .iter()
        .map(|t| &params.data[t.offset..t.offset + t.len()])
        .collect()
}

/// Gradient slices of a weight tensor and the bias that follows it.
fn layer_mut<'a>(params: &Parameters, grad: &'a mut [f64], weight: usize) -> (&'a mut [f64], &'a mut [f64]) {
    let w = &params.layout[weight];
    let b = &params.layout[weight + 1];
    debug_assert_eq!(b.offset, w.offset + w.len());
    grad[w.offset..b.offset + b.len()].split_at_mut(w.len())
}

fn conv1d(
    w: &[f64],
    b: &[f64],
    x: &[f64],
    cin: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    lo: usize,
) -> Vec<f64> {
    let cout = b.len();
    let mut out = vec![0.0; cout * lo];
    for c in 0..cout {
        for t in 0..lo {
            let mut acc = b[c];
            for ci in 0..cin {
                let wk = &w[(c * cin + ci) * kernel..(c * cin + ci + 1) * kernel];
                let start = ci * len + t * stride;
                acc += dot(wk, &x[start..start + kernel]);
            }
            out[c * lo + t] = acc;
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    w: &[f64],
    x: &[f64],
    dz: &[f64],
    cin: usize,
    len: usize,
    kernel: usize,
    stride: usize,
    lo: usize,
    dw: &mut [f64],
    db: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    for (c, dbc) in db.iter_mut().enumerate() {
        for t in 0..lo {
            let g = dz[c * lo + t];
            if g == 0.0 {
                continue;
            }
            *dbc += g;
            for ci in 0..cin {
                let wi = (c * cin + ci) * kernel;
                let start = ci * len + t * stride;
                axpy(g, &x[start..start + kernel], &mut dw[wi..wi + kernel]);
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(g, &w[wi..wi + kernel], &mut dx[start..start + kernel]);
                }
            }
        }
    }
}

pub(crate) fn forward_cached(spec: &ModelSpec, params: &Parameters, x: &[f64]) -> Forward {
    let v = views(params);
    match spec.arch {
        Arch::Mlp { .. } => {
            let mut z1 = Vec::new();
            affine(v[0], v[1], x, &mut z1);
            let mut a1 = z1.clone();
            relu_in_place(&mut a1);
            let mut z2 = Vec::new();
            affine(v[2], v[3], &a1, &mut z2);
            let mut emb = z2.clone();
            relu_in_place(&mut emb);
            let mut logits = Vec::new();
            affine(v[4], v[5], &emb, &mut logits);
            let probs = softmax(&logits);
            Forward {
                out: Output {
                    logits,
                    probs,
                    embedding: emb,
                },
                cache: Cache::Mlp { z1, a1, z2 },
            }
        }
        Arch::Cnn1d {
            channels: [c1, c2],
            kernel,
            stride,
        } => {
            let (l1, l2) = spec.conv_lens().expect("cnn");
            let z1 = conv1d(v[0], v[1], x, 2, spec.frame_len, kernel, stride, l1);
            let mut a1 = z1.clone();
            relu_in_place(&mut a1);
            let z2 = conv1d(v[2], v[3], &a1, c1, l1, kernel, stride, l2);
            let pooled: Vec<f64> = (0..c2)
                .map(|c| {
                    z2[c * l2..(c + 1) * l2]
                        .iter()
                        .map(|&z| z.max(0.0))
                        .sum::<f64>()
                        / l2 as f64
                })
                .collect();
            let mut emb = Vec::new();
            affine(v[4], v[5], &pooled, &mut emb);
            let mut logits = Vec::new();
            affine(v[6], v[7], &emb, &mut logits);
            let probs = softmax(&logits);
            Forward {
                out: Output {
                    logits,
                    probs,
                    embedding: emb,
                },
                cache: Cache::Cnn { z1, a1, z2, pooled },
            }
        }
    }
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
pub(crate) fn backward(
    spec: &ModelSpec,
    params: &Parameters,
    x: &[f64],
    fwd: &Forward,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let v = views(params);
    let emb = &fwd.out.embedding;
    match (&spec.arch, &fwd.cache) {
        (Arch::Mlp { .. }, Cache::Mlp { z1, a1, z2 }) => {
            let mut d_emb = Vec::new();
            let (gw, gb) = layer_mut(params, grad, 4);
            affine_backward(v[4], emb, dlogits, gw, gb, Some(&mut d_emb));
            relu_backward(z2, &mut d_emb);
            let mut d_a1 = Vec::new();
            let (gw, gb) = layer_mut(params, grad, 2);
            affine_backward(v[2], a1, &d_emb, gw, gb, Some(&mut d_a1));
            relu_backward(z1, &mut d_a1);
            let (gw, gb) = layer_mut(params, grad, 0);
            affine_backward(v[0], x, &d_a1, gw, gb, None);
        }
        (
            Arch::Cnn1d {
                channels: [c1, _],
                kernel,
                stride,
            },
            Cache::Cnn { z1, a1, z2, pooled },
        ) => {
            let (l1, l2) = spec.conv_lens().expect("cnn");
            let mut d_emb = Vec::new();
            let (gw, gb) = layer_mut(params, grad, 6);
            affine_backward(v[6], emb, dlogits, gw, gb, Some(&mut d_emb));
            let mut d_pool = Vec::new();
            let (gw, gb) = layer_mut(params, grad, 4);
            affine_backward(v[4], pooled, &d_emb, gw, gb, Some(&mut d_pool));
            let mut d_z2 = vec![0.0; z2.len()];
            for (c, dp) in d_pool.iter().enumerate() {
                let share = dp / l2 as f64;
                for t in 0..l2 {
                    if z2[c * l2 + t] > 0.0 {
                        d_z2[c * l2 + t] = share;
                    }
                }
            }
            let mut d_a1 = vec![0.0; a1.len()];
            let (gw, gb) = layer_mut(params, grad, 2);
            conv1d_backward(
                v[2],
                a1,
                &d_z2,
                *c1,
                l1,
                *kernel,
                *stride,
                l2,
                gw,
                gb,
                Some(&mut d_a1),
            );
            relu_backward(z1, &mut d_a1);
            let (gw, gb) = layer_mut(params, grad, 0);
            conv1d_backward(
                v[0],
                x,
                &d_a1,
                2,
                spec.frame_len,
                *kernel,
                *stride,
                l1,
                gw,
                gb,
                None,
            );
        }
        _ => unreachable!("cache does not match architecture"),
    }
}

/// Runs the network on one 2 x L input laid out as the I rail followed by
/// the Q rail.
pub fn forward(spec: &ModelSpec, params: &Parameters, input: &[f64]) -> Result<Output> {
    if input.len() != spec.input_dim() {
        return Err(Error::invalid(format!(
            "input has {} values, model expects 2 x {}",
            input.len(),
            spec.frame_len
        )));
    }
    if params.len() != spec.num_params() {
        return Err(Error::invalid("parameters do not match model spec"));
    }
    Ok(forward_cached(spec, params, input).out)
}

/// Mean cross-entropy over a batch and its gradient.
pub fn loss_and_grad(
    spec: &ModelSpec,
    params: &Parameters,
    inputs: &[&[f64]],
    labels: &[usize],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let loss = accumulate_batch(spec, params, inputs, labels, &mut grad);
    (loss, grad)
}

pub(crate) fn accumulate_batch(
    spec: &ModelSpec,
    params: &Parameters,
    inputs: &[&[f64]],
    labels: &[usize],
    grad: &mut [f64],
) -> f64 {
    let scale = 1.0 / inputs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        let fwd = forward_cached(spec, params, x);
        loss += -fwd.out.probs[y].max(PROB_FLOOR).ln();
        let dlogits: Vec<f64> = fwd
            .out
            .probs
            .iter()
            .enumerate()
            .map(|(k, &p)| (p - if k == y { 1.0 } else { 0.0 }) * scale)
            .collect();
        backward(spec, params, x, &fwd, &dlogits, grad);
    }
    loss * scale
}

/// Mean cross-entropy only, used by the finite-difference oracle.
pub fn batch_loss(spec: &ModelSpec, params: &Parameters, inputs: &[&[f64]], labels: &[usize]) -> f64 {
    let total: f64 = inputs
        .iter()
        .zip(labels)
        .map(|(x, &y)| -forward_cached(spec, params, x).out.probs[y].max(PROB_FLOOR).ln())
        .sum();
    total / inputs.len() as f64
}
