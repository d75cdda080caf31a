//! Central finite differences against the analytic gradient.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::model::{batch_loss, loss_and_grad};
use super::params::init_params;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, tag};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub num_checks: usize,
    pub batch: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-4,
            num_checks: 50,
            batch: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter indices that were probed.
    pub checked: Vec<usize>,
    pub analytic: Vec<f64>,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn finite_diff_check(spec: &ModelSpec, seed: u64) -> Result<f64> {
    Ok(finite_diff_check_with(spec, seed, &GradCheckOptions::default(), |_| {})?.max_rel_error)
}

/// Like [`finite_diff_check`], with a hook that may tamper with the analytic
/// gradient before comparison (used to prove the check detects faults).
pub fn finite_diff_check_with(
    spec: &ModelSpec,
    seed: u64,
    opts: &GradCheckOptions,
    tamper: impl FnOnce(&mut Vec<f64>),
) -> Result<GradCheckReport> {
    let mut params = init_params(spec, seed)?;
    let n = params.len();
    if n > 1000 {
        return Err(Error::invalid(format!(
            "finite-difference check needs a small model, this one has {n} parameters"
        )));
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[tag("gradcheck")]));
    let dim = spec.input_dim();
    let inputs: Vec<Vec<f64>> = (0..opts.batch)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let labels: Vec<usize> = (0..opts.batch)
        .map(|_| rng.random_range(0..spec.num_classes))
        .collect();
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();

    let (_, mut grad) = loss_and_grad(spec, &params, &refs, &labels);
    tamper(&mut grad);

    let mut checked = sample(&mut rng, n, opts.num_checks.min(n)).into_vec();
    checked.sort_unstable();
    let mut max_rel: f64 = 0.0;
    for &k in &checked {
        let orig = params.data[k];
        params.data[k] = orig + opts.step;
        let up = batch_loss(spec, &params, &refs, &labels);
        params.data[k] = orig - opts.step;
        let down = batch_loss(spec, &params, &refs, &labels);
        params.data[k] = orig;
        let numeric = (up - down) / (2.0 * opts.step);
        max_rel = max_rel.max(relative_error(grad[k], numeric));
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked,
        analytic: grad,
    })
}

/// Small variants of the reference architectures (under 1000 parameters).
pub fn small_mlp() -> ModelSpec {
    ModelSpec {
        arch: super::spec::Arch::Mlp { hidden: 16 },
        frame_len: 16,
        num_classes: 3,
        embedding_dim: 8,
    }
}

pub fn small_cnn1d() -> ModelSpec {
    ModelSpec {
        arch: super::spec::Arch::Cnn1d {
            channels: [4, 8],
            kernel: 5,
            stride: 2,
        },
        frame_len: 32,
        num_classes: 3,
        embedding_dim: 8,
    }
}
