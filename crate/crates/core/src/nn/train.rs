//! Mini-batch SGD with momentum.

use rand::seq::SliceRandom;

use super::model::{accumulate_batch, forward_cached, Output};
use super::params::{init_params, Parameters};
use super::spec::{ModelSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag, Rng};

/// Row-major inputs with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Examples {
    pub dim: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Examples {
    pub fn new(dim: usize) -> Self {
        Examples {
            dim,
            inputs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], label: usize) {
        assert_eq!(input.len(), self.dim);
        self.inputs.extend_from_slice(input);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.dim..(k + 1) * self.dim]
    }
}

/// Optimizer state carried between epochs.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub velocity: Vec<f64>,
    pub rng: Rng,
    pub epochs_done: usize,
}

impl TrainState {
    pub fn new(num_params: usize, cfg: &TrainConfig) -> Self {
        TrainState {
            velocity: vec![0.0; num_params],
            rng: rng_from_seed(derive_seed(cfg.seed, &[tag("shuffle")])),
            epochs_done: 0,
        }
    }
}

/// One pass over `data` in seeded-shuffled mini-batches. Returns the mean
/// training loss over the pass.
pub fn train_epoch(
    spec: &ModelSpec,
    params: &mut Parameters,
    data: &Examples,
    cfg: &TrainConfig,
    state: &mut TrainState,
) -> Result<f64> {
    cfg.validate()?;
    if data.dim != spec.input_dim() {
        return Err(Error::invalid("training inputs do not match model input shape"));
    }
    let epoch = state.epochs_done;
    let mut order: Vec<usize> = (0..data.len()).collect();
    if cfg.shuffle {
        order.shuffle(&mut state.rng);
    }
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
        let inputs: Vec<&[f64]> = chunk.iter().map(|&k| data.input(k)).collect();
        let labels: Vec<usize> = chunk.iter().map(|&k| data.labels[k]).collect();
        grad.fill(0.0);
        let loss = accumulate_batch(spec, params, &inputs, &labels, &mut grad);
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: b,
                what: "loss",
            });
        }
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite {
                epoch,
                batch: b,
                what: "gradient",
            });
        }
        total += loss * chunk.len() as f64;
        for ((p, v), g) in params.data.iter_mut().zip(&mut state.velocity).zip(&grad) {
            *v = cfg.momentum * *v + g;
            *p -= cfg.learning_rate * *v;
        }
        if !params.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: b,
                what: "parameter",
            });
        }
    }
    state.epochs_done += 1;
    Ok(if data.is_empty() {
        0.0
    } else {
        total / data.len() as f64
    })
}

/// Fresh seeded initialization followed by `cfg.epochs` epochs. Returns the
/// parameters and the per-epoch mean losses.
pub fn train(spec: &ModelSpec, data: &Examples, cfg: &TrainConfig) -> Result<(Parameters, Vec<f64>)> {
    let mut params = init_params(spec, cfg.seed)?;
    let mut state = TrainState::new(params.len(), cfg);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        losses.push(train_epoch(spec, &mut params, data, cfg, &mut state)?);
    }
    Ok((params, losses))
}

/// Forward pass over every example, in order.
pub fn predict_all(spec: &ModelSpec, params: &Parameters, data: &Examples) -> Vec<Output> {
    use rayon::prelude::*;
    (0..data.len())
        .into_par_iter()
        .map(|k| forward_cached(spec, params, data.input(k)).out)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::argmax;

    /// Two Gaussian blobs on opposite sides of a hyperplane.
    fn separable(n: usize, frame_len: usize, seed: u64) -> Examples {
        use rand_distr::{Distribution, Normal};
        let mut rng = rng_from_seed(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut ex = Examples::new(2 * frame_len);
        for k in 0..n {
            let label = k % 2;
            let sign = if label == 0 { 1.0 } else { -1.0 };
            let x: Vec<f64> = (0..2 * frame_len)
                .map(|_| sign + noise.sample(&mut rng))
                .collect();
            ex.push(&x, label);
        }
        ex
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = ModelSpec::mlp(8, 2);
        let data = separable(40, 8, 1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let mut params = init_params(&spec, 3).unwrap();
        let before = params.clone();
        let mut state = TrainState::new(params.len(), &cfg);
        train_epoch(&spec, &mut params, &data, &cfg, &mut state).unwrap();
        assert_eq!(params.data, before.data);
    }

    #[test]
    fn epochs_are_deterministic() {
        for spec in [ModelSpec::mlp(8, 2), ModelSpec::cnn1d(32, 2)] {
            let data = separable(50, spec.frame_len, 2);
            let cfg = TrainConfig {
                epochs: 3,
                batch_size: 16,
                ..TrainConfig::default()
            };
            let a = train(&spec, &data, &cfg).unwrap();
            let b = train(&spec, &data, &cfg).unwrap();
            assert_eq!(a.0.data, b.0.data);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn separable_toy_converges() {
        let spec = ModelSpec::mlp(8, 2);
        let data = separable(200, 8, 5);
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 16,
            ..TrainConfig::default()
        };
        let (params, losses) = train(&spec, &data, &cfg).unwrap();
        assert!(*losses.last().unwrap() < 0.1, "{losses:?}");
        let outs = predict_all(&spec, &params, &data);
        let acc = outs
            .iter()
            .zip(&data.labels)
            .filter(|(o, &y)| argmax(&o.probs) == y)
            .count();
        assert_eq!(acc, data.len());
    }

    #[test]
    fn divergence_is_reported_with_batch() {
        let spec = ModelSpec::mlp(8, 2);
        let mut data = separable(32, 8, 1);
        data.inputs[20 * 16] = f64::INFINITY;
        let cfg = TrainConfig {
            batch_size: 8,
            shuffle: false,
            ..TrainConfig::default()
        };
        let mut params = init_params(&spec, 0).unwrap();
        let mut state = TrainState::new(params.len(), &cfg);
        match train_epoch(&spec, &mut params, &data, &cfg, &mut state) {
            Err(Error::NonFinite { epoch: 0, batch: 2, .. }) => {}
            other => panic!("expected NonFinite at batch 2, got {other:?}"),
        }
    }
}
