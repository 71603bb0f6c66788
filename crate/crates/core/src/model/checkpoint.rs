//! `TSCK` checkpoint files.
//!
//! Layout: magic `TSCK`, `u32` LE version, `u32` LE header length, the JSON
//! header (layer shape table, skip wiring, metadata, optimizer settings),
//! then the flat `f32` LE parameter payload in layer order (kernels, then
//! biases). When optimizer state is present its first and second moments
//! follow the parameters in the same order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{AdamState, LossKind};

use super::{EncoderDecoder, Topology};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"TSCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epoch: usize,
    pub phase: LossKind,
    pub validation_loss: f64,
}

pub struct ModelCheckpoint {
    pub model: EncoderDecoder<f32>,
    pub optimizer: Option<AdamState<f32>>,
    pub metadata: Option<TrainingMetadata>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerShape {
    kernel: [usize; 4],
    biases: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerHeader {
    step_count: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    topology: Topology,
    shapes: Vec<LayerShape>,
    parameter_count: usize,
    metadata: Option<TrainingMetadata>,
    optimizer: Option<OptimizerHeader>,
}

pub fn save_checkpoint(checkpoint: &ModelCheckpoint, path: &Path) -> Result<()> {
    let model = &checkpoint.model;
    let header = Header {
        topology: model.topology().clone(),
        shapes: model
            .layers()
            .iter()
            .map(|l| LayerShape {
                kernel: [l.out_channels, l.in_channels, 3, 3],
                biases: l.biases.len(),
            })
            .collect(),
        parameter_count: model.param_count(),
        metadata: checkpoint.metadata.clone(),
        optimizer: checkpoint.optimizer.as_ref().map(|s| OptimizerHeader {
            step_count: s.step_count,
            learning_rate: s.learning_rate,
            beta1: s.beta1,
            beta2: s.beta2,
            epsilon: s.epsilon,
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(12 + json.len() + 4 * model.param_count() * 3);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    let push = |bytes: &mut Vec<u8>, vals: &[f32]| {
        for v in vals {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    };
    push(&mut bytes, &model.flat_params());
    if let Some(state) = &checkpoint.optimizer {
        for group in &state.first_moment {
            push(&mut bytes, group);
        }
        for group in &state.second_moment {
            push(&mut bytes, group);
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let bytes = fs::read(path)?;
    parse(&bytes)
}

fn parse(bytes: &[u8]) -> Result<ModelCheckpoint> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing TSCK magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() < header_len {
        return Err(Error::Format("truncated checkpoint header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])
        .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
    let payload = &body[header_len..];

    let mut model = EncoderDecoder::<f32>::new(header.topology, 0)?;
    let count = model.param_count();
    if header.parameter_count != count || header.shapes.len() != model.layers().len() {
        return Err(Error::Format(format!(
            "header declares {} parameters, topology has {count}",
            header.parameter_count
        )));
    }
    for (shape, layer) in header.shapes.iter().zip(model.layers()) {
        if shape.kernel != [layer.out_channels, layer.in_channels, 3, 3] || shape.biases != layer.biases.len() {
            return Err(Error::Format(format!("layer shape {shape:?} disagrees with topology")));
        }
    }
    let blocks = if header.optimizer.is_some() { 3 } else { 1 };
    let expected = 4 * count * blocks;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    model.set_flat_params(&values[..count])?;

    let optimizer = header.optimizer.map(|h| {
        let sizes = model.group_sizes();
        let mut state = AdamState::with_learning_rate(&sizes, h.learning_rate);
        state.step_count = h.step_count;
        state.beta1 = h.beta1;
        state.beta2 = h.beta2;
        state.epsilon = h.epsilon;
        let mut at = count;
        for moments in [&mut state.first_moment, &mut state.second_moment] {
            for group in moments.iter_mut() {
                let n = group.len();
                group.copy_from_slice(&values[at..at + n]);
                at += n;
            }
        }
        state
    });
    Ok(ModelCheckpoint {
        model,
        optimizer,
        metadata: header.metadata,
    })
}
