use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::spec::{ModelSpec, TensorInfo};
use crate::error::Result;
use crate::rng::rng_from_seed;

/// Named tensors stored back to back in one flat vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub layout: Vec<TensorInfo>,
    pub data: Vec<f64>,
}

impl Parameters {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let n = layout.iter().map(TensorInfo::len).sum();
        Ok(Parameters {
            layout,
            data: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn info(&self, name: &str) -> Option<&TensorInfo> {
        self.layout.iter().find(|t| t.name == name)
    }

    pub fn tensor(&self, name: &str) -> &[f64] {
        let t = self.info(name).unwrap_or_else(|| panic!("no tensor {name}"));
        &self.data[t.offset..t.offset + t.len()]
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut [f64] {
        let t = self
            .info(name)
            .unwrap_or_else(|| panic!("no tensor {name}"))
            .clone();
        &mut self.data[t.offset..t.offset + t.len()]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// He-style uniform initialization: weights ~ U(-a, a) with
/// a = sqrt(6 / fan_in), so Var = 2 / fan_in; biases are zero.
pub fn init_params(spec: &ModelSpec, seed: u64) -> Result<Parameters> {
    let mut params = Parameters::zeros(spec)?;
    let mut rng = rng_from_seed(seed);
    for t in &params.layout {
        if t.is_bias() {
            continue;
        }
        let a = (6.0 / t.fan_in as f64).sqrt();
        for v in &mut params.data[t.offset..t.offset + t.len()] {
            *v = rng.random_range(-a..a);
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_zero_bias() {
        let spec = ModelSpec::mlp(128, 6);
        let a = init_params(&spec, 7).unwrap();
        let b = init_params(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(&spec, 8).unwrap());
        for t in a.layout.iter().filter(|t| t.is_bias()) {
            assert!(a.tensor(&t.name).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn he_variance() {
        // fc1 of the reference MLP: fan-in 256, 32768 weights.
        let p = init_params(&ModelSpec::mlp(128, 6), 3).unwrap();
        let w = p.tensor("fc1.weight");
        assert!(w.len() >= 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (w.len() - 1) as f64;
        let expected = 2.0 / 256.0;
        assert!((var - expected).abs() / expected < 0.2, "var {var}");
    }

    #[test]
    fn zero_width_rejected() {
        let mut spec = ModelSpec::mlp(8, 2);
        spec.num_classes = 0;
        assert!(init_params(&spec, 0).is_err());
    }
}
