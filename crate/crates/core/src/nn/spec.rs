use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Arch {
    /// flatten(2xL) -> dense(hidden) -> ReLU -> dense(E) -> ReLU -> dense(C)
    Mlp { hidden: usize },
    /// conv(c0, k, s) -> ReLU -> conv(c1, k, s) -> ReLU -> global average
    /// pool -> dense(E) -> dense(C)
    Cnn1d {
        channels: [usize; 2],
        kernel: usize,
        stride: usize,
    },
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::Mlp { .. } => "mlp",
            Arch::Cnn1d { .. } => "cnn1d",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub arch: Arch,
    /// Samples per rail; the input is 2 x frame_len.
    pub frame_len: usize,
    pub num_classes: usize,
    pub embedding_dim: usize,
}

/// A tensor in the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    #[serde(skip)]
    pub offset: usize,
    #[serde(skip)]
    pub fan_in: usize,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_bias(&self) -> bool {
        self.shape.len() == 1
    }
}

pub fn conv_out_len(len: usize, kernel: usize, stride: usize) -> usize {
    if len < kernel {
        0
    } else {
        (len - kernel) / stride + 1
    }
}

impl ModelSpec {
    pub fn mlp(frame_len: usize, num_classes: usize) -> Self {
        ModelSpec {
            arch: Arch::Mlp { hidden: 128 },
            frame_len,
            num_classes,
            embedding_dim: 64,
        }
    }

    pub fn cnn1d(frame_len: usize, num_classes: usize) -> Self {
        ModelSpec {
            arch: Arch::Cnn1d {
                channels: [16, 32],
                kernel: 7,
                stride: 2,
            },
            frame_len,
            num_classes,
            embedding_dim: 64,
        }
    }

    pub fn input_dim(&self) -> usize {
        2 * self.frame_len
    }

    /// Output lengths of the two convolutions.
    pub(crate) fn conv_lens(&self) -> Option<(usize, usize)> {
        match self.arch {
            Arch::Cnn1d { kernel, stride, .. } => {
                let l1 = conv_out_len(self.frame_len, kernel, stride);
                Some((l1, conv_out_len(l1, kernel, stride)))
            }
            Arch::Mlp { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.num_classes == 0 || self.embedding_dim == 0 {
            return Err(Error::invalid("model has a zero-width layer"));
        }
        match self.arch {
            Arch::Mlp { hidden } => {
                if hidden == 0 {
                    return Err(Error::invalid("model has a zero-width layer"));
                }
            }
            Arch::Cnn1d {
                channels,
                kernel,
                stride,
            } => {
                if channels.contains(&0) || kernel == 0 || stride == 0 {
                    return Err(Error::invalid("model has a zero-width layer"));
                }
                let (_, l2) = self.conv_lens().unwrap();
                if l2 == 0 {
                    return Err(Error::invalid(format!(
                        "frame_len {} is too short for two kernel-{kernel} stride-{stride} convolutions",
                        self.frame_len
                    )));
                }
            }
        }
        Ok(())
    }

    /// Tensors in declaration order.
    pub fn layout(&self) -> Vec<TensorInfo> {
        let (c, e) = (self.num_classes, self.embedding_dim);
        let mut raw: Vec<(&str, Vec<usize>, usize)> = Vec::new();
        match self.arch {
            Arch::Mlp { hidden } => {
                let d = self.input_dim();
                raw.push(("fc1.weight", vec![hidden, d], d));
                raw.push(("fc1.bias", vec![hidden], d));
                raw.push(("fc2.weight", vec![e, hidden], hidden));
                raw.push(("fc2.bias", vec![e], hidden));
            }
            Arch::Cnn1d {
                channels: [c1, c2],
                kernel,
                ..
            } => {
                raw.push(("conv1.weight", vec![c1, 2, kernel], 2 * kernel));
                raw.push(("conv1.bias", vec![c1], 2 * kernel));
                raw.push(("conv2.weight", vec![c2, c1, kernel], c1 * kernel));
                raw.push(("conv2.bias", vec![c2], c1 * kernel));
                raw.push(("fc.weight", vec![e, c2], c2));
                raw.push(("fc.bias", vec![e], c2));
            }
        }
        raw.push(("out.weight", vec![c, e], e));
        raw.push(("out.bias", vec![c], e));

        let mut offset = 0;
        raw.into_iter()
            .map(|(name, shape, fan_in)| {
                let t = TensorInfo {
                    name: name.to_string(),
                    shape,
                    offset,
                    fan_in,
                };
                offset += t.len();
                t
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(TensorInfo::len).sum()
    }

    pub fn digest(&self) -> String {
        crate::digest::json_digest(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning_rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0,1)"));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        crate::digest::json_digest(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layouts() {
        let mlp = ModelSpec::mlp(128, 6);
        mlp.validate().unwrap();
        assert_eq!(mlp.num_params(), 256 * 128 + 128 + 128 * 64 + 64 + 64 * 6 + 6);

        let cnn = ModelSpec::cnn1d(128, 6);
        cnn.validate().unwrap();
        assert_eq!(cnn.conv_lens(), Some((61, 28)));
        let layout = cnn.layout();
        assert_eq!(layout.last().unwrap().shape, vec![6]);
        assert_eq!(layout[4].shape, vec![64, 32]);
    }

    #[test]
    fn zero_width_rejected() {
        let mut s = ModelSpec::mlp(16, 3);
        s.embedding_dim = 0;
        assert!(s.validate().is_err());
        let s = ModelSpec {
            arch: Arch::Mlp { hidden: 0 },
            ..ModelSpec::mlp(16, 3)
        };
        assert!(s.validate().is_err());
        assert!(ModelSpec::cnn1d(10, 3).validate().is_err());
    }
}
