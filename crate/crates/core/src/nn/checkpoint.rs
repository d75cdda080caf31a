//! Checkpoint files: one JSON header line, then every tensor as
//! little-endian f32 in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Parameters;
use super::spec::{Arch, ModelSpec};
use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub arch: Arch,
    pub frame_len: usize,
    pub shapes: Vec<(String, Vec<usize>)>,
    #[serde(rename = "C")]
    pub num_classes: usize,
    #[serde(rename = "E")]
    pub embedding_dim: usize,
    pub seed: u64,
}

pub fn encode_checkpoint(spec: &ModelSpec, params: &Parameters, seed: u64) -> Vec<u8> {
    let header = CheckpointHeader {
        version: 1,
        arch: spec.arch.clone(),
        frame_len: spec.frame_len,
        shapes: params
            .layout
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect(),
        num_classes: spec.num_classes,
        embedding_dim: spec.embedding_dim,
        seed,
    };
    let mut out = Vec::with_capacity(params.len() * 4 + 256);
    jsonl::push_line(&mut out, &header);
    for &v in &params.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Returns the model shape, parameters (widened from f32) and the recorded seed.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelSpec, Parameters, u64)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::invalid("checkpoint has no header line"))?;
    let header: CheckpointHeader = jsonl::parse_line(
        "checkpoint",
        1,
        std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::invalid(e.to_string()))?,
    )?;
    if header.version != 1 {
        return Err(Error::invalid(format!("unsupported checkpoint version {}", header.version)));
    }
    let spec = ModelSpec {
        arch: header.arch,
        frame_len: header.frame_len,
        num_classes: header.num_classes,
        embedding_dim: header.embedding_dim,
    };
    let mut params = Parameters::zeros(&spec)?;
    let expected: Vec<(String, Vec<usize>)> = params
        .layout
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if expected != header.shapes {
        return Err(Error::invalid("checkpoint shapes do not match its architecture"));
    }
    let payload = &bytes[nl + 1..];
    if payload.len() != params.len() * 4 {
        return Err(Error::invalid(format!(
            "checkpoint payload has {} bytes, expected {}",
            payload.len(),
            params.len() * 4
        )));
    }
    for (v, chunk) in params.data.iter_mut().zip(payload.chunks_exact(4)) {
        *v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
    }
    if !params.is_finite() {
        return Err(Error::invalid("checkpoint contains non-finite values"));
    }
    Ok((spec, params, header.seed))
}

pub fn write_checkpoint(path: &Path, spec: &ModelSpec, params: &Parameters, seed: u64, force: bool) -> Result<()> {
    jsonl::write_atomic(path, &encode_checkpoint(spec, params, seed), force)
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelSpec, Parameters, u64)> {
    decode_checkpoint(&std::fs::read(path)?)
}
