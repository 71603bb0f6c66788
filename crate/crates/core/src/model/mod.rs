//! Symmetric convolutional encoder-decoder with additive skip connections.
//!
//! Thirteen 3x3 layers: six encoder convolutions (1-16-16-32-32-64-64), a
//! 64-channel bottleneck convolution, and six decoder transposed
//! convolutions (64-64-32-32-16-16-1). Every second decoder layer receives
//! the output of its mirror encoder layer, summed in before the activation.
//! All layers use ReLU except the final one, which is linear.

mod checkpoint;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::{relu_backward, skip_add_assign, ConvGrads, ConvLayerParams, ConvMode, Real, Tensor4, KERNEL};

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, TrainingMetadata, CHECKPOINT_VERSION};

/// Trainable parameters of the published encoder-decoder.
pub const PARAMETER_COUNT: usize = 180_449;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub mode: ConvMode,
    pub activation: bool,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        KERNEL * KERNEL * self.in_channels * self.out_channels + self.out_channels
    }
}

/// Output of layer `source` is added to the pre-activation output of layer `destination`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub source: usize,
    pub destination: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub layers: Vec<LayerSpec>,
    pub skips: Vec<Skip>,
}

impl Topology {
    /// The 13-layer shockwave predictor.
    pub fn encoder_decoder() -> Self {
        let conv = |i, o| LayerSpec {
            in_channels: i,
            out_channels: o,
            mode: ConvMode::Conv,
            activation: true,
        };
        let deconv = |i, o| LayerSpec {
            in_channels: i,
            out_channels: o,
            mode: ConvMode::Deconv,
            activation: true,
        };
        let mut layers = vec![
            conv(1, 16),
            conv(16, 16),
            conv(16, 32),
            conv(32, 32),
            conv(32, 64),
            conv(64, 64),
            conv(64, 64),
            deconv(64, 64),
            deconv(64, 32),
            deconv(32, 32),
            deconv(32, 16),
            deconv(16, 16),
            deconv(16, 1),
        ];
        layers.last_mut().unwrap().activation = false;
        let skips = vec![
            Skip { source: 5, destination: 7 },
            Skip { source: 3, destination: 9 },
            Skip { source: 1, destination: 11 },
        ];
        Self { layers, skips }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.layers.first() else {
            return Err(Error::Invalid("topology has no layers".into()));
        };
        if first.in_channels != 1 || self.layers.last().unwrap().out_channels != 1 {
            return Err(Error::Invalid("model must map one channel to one channel".into()));
        }
        for (k, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::Invalid(format!("layer {k} -> {} channel mismatch", k + 1)));
            }
        }
        for s in &self.skips {
            if s.source >= s.destination || s.destination >= self.layers.len() {
                return Err(Error::Invalid(format!("bad skip {s:?}")));
            }
            if self.layers[s.source].out_channels != self.layers[s.destination].out_channels {
                return Err(Error::Invalid(format!("skip {s:?} joins different channel counts")));
            }
        }
        Ok(())
    }

    fn skip_into(&self, destination: usize) -> Option<usize> {
        self.skips.iter().find(|s| s.destination == destination).map(|s| s.source)
    }
}

struct ForwardCache<T> {
    /// Input of every layer.
    inputs: Vec<Tensor4<T>>,
    /// Post-activation output of every layer.
    outputs: Vec<Tensor4<T>>,
}

pub struct EncoderDecoder<T> {
    topology: Topology,
    layers: Vec<ConvLayerParams<T>>,
    grads: Vec<ConvGrads<T>>,
    cache: Option<ForwardCache<T>>,
}

/// Builds the shockwave predictor with seeded initial weights.
pub fn build_model(seed: u64) -> Result<EncoderDecoder<f32>> {
    let model = EncoderDecoder::new(Topology::encoder_decoder(), seed)?;
    if model.param_count() != PARAMETER_COUNT {
        return Err(Error::Invalid(format!(
            "topology has {} parameters, expected {PARAMETER_COUNT}",
            model.param_count()
        )));
    }
    Ok(model)
}

impl<T: Real> EncoderDecoder<T> {
    /// Kernels ~ U(-r, r) with `r = sqrt(6 / (9 in + 9 out))`; biases zero.
    pub fn new(topology: Topology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers: Vec<ConvLayerParams<T>> = topology
            .layers
            .iter()
            .map(|spec| {
                let mut p = ConvLayerParams::zeros(spec.in_channels, spec.out_channels, spec.mode);
                let taps = (KERNEL * KERNEL) as f64;
                let r = (6.0 / (taps * spec.in_channels as f64 + taps * spec.out_channels as f64)).sqrt();
                for k in p.kernels.iter_mut() {
                    *k = T::from_f64(rng.gen_range(-r..r));
                }
                p
            })
            .collect();
        let grads = layers.iter().map(ConvGrads::zeros_like).collect();
        Ok(Self {
            topology,
            layers,
            grads,
            cache: None,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> &[ConvLayerParams<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayerParams<T>] {
        &mut self.layers
    }

    pub fn grads(&self) -> &[ConvGrads<T>] {
        &self.grads
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayerParams::param_count).sum()
    }

    /// Parameter group sizes in the order used by the optimizer (kernels then biases per layer).
    pub fn group_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.kernels.len(), l.biases.len()]).collect()
    }

    pub fn param_groups_mut(&mut self) -> (Vec<&mut [T]>, Vec<&[T]>) {
        let params = self
            .layers
            .iter_mut()
            .flat_map(|l| [l.kernels.as_mut_slice(), l.biases.as_mut_slice()])
            .collect();
        let grads = self
            .grads
            .iter()
            .flat_map(|g| [g.kernels.as_slice(), g.biases.as_slice()])
            .collect();
        (params, grads)
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend_from_slice(&l.kernels);
            v.extend_from_slice(&l.biases);
        }
        v
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let k = l.kernels.len();
            l.kernels.copy_from_slice(&flat[at..at + k]);
            at += k;
            let b = l.biases.len();
            l.biases.copy_from_slice(&flat[at..at + b]);
            at += b;
        }
        Ok(())
    }

    pub fn flat_grads(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.param_count());
        for g in &self.grads {
            v.extend_from_slice(&g.kernels);
            v.extend_from_slice(&g.biases);
        }
        v
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(ConvGrads::clear);
    }

    /// Scales every accumulated gradient.
    pub fn scale_grads(&mut self, factor: f64) {
        let f = T::from_f64(factor);
        for g in &mut self.grads {
            g.kernels.iter_mut().chain(g.biases.iter_mut()).for_each(|v| *v = *v * f);
        }
    }

    /// Raw (unclamped) output without recording activations.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.run(x, true, None)
    }

    /// Inference: raw output clamped to `[0, 1]`.
    pub fn predict(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(self.forward(x)?.map(|v| v.max(T::zero()).min(T::one())))
    }

    /// Ablation pass with every skip contribution removed.
    pub fn forward_without_skips(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.run(x, false, None)
    }

    /// Forward pass that records activations for [`EncoderDecoder::backward`].
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            outputs: Vec::with_capacity(self.layers.len()),
        };
        let out = self.run(x, true, Some(&mut cache))?;
        self.cache = Some(cache);
        Ok(out)
    }

    fn run(&self, x: &Tensor4<T>, skips: bool, mut cache: Option<&mut ForwardCache<T>>) -> Result<Tensor4<T>> {
        if x.channels() != 1 {
            return Err(Error::Shape(format!("model input must be single-channel, got {}", x.channels())));
        }
        let n = self.layers.len();
        // Outputs kept for later skip consumers when not caching everything.
        let mut kept: Vec<Option<Tensor4<T>>> = vec![None; n];
        let mut h = x.clone();
        for (k, (layer, spec)) in self.layers.iter().zip(&self.topology.layers).enumerate() {
            let mut y = layer.forward(&h)?;
            if let Some(src) = self.topology.skip_into(k) {
                let source = match &cache {
                    Some(c) => &c.outputs[src],
                    None => kept[src].as_ref().expect("skip source evaluated"),
                };
                if skips {
                    skip_add_assign(&mut y, source)?;
                }
                kept[src] = None;
            }
            if spec.activation {
                y = crate::netcore::relu(&y);
            }
            let input = std::mem::replace(&mut h, y);
            match cache.as_deref_mut() {
                Some(c) => {
                    c.inputs.push(input);
                    c.outputs.push(h.clone());
                }
                None => {
                    if self.topology.skips.iter().any(|s| s.source == k) {
                        kept[k] = Some(h.clone());
                    }
                }
            }
        }
        Ok(h)
    }

    /// Back-propagates `d_output` through the last recorded forward pass,
    /// accumulating parameter gradients. Returns the gradient of the input.
    pub fn backward(&mut self, d_output: &Tensor4<T>) -> Result<Tensor4<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a recorded forward pass".into()))?;
        let n = self.layers.len();
        d_output.ensure_same_dims(&cache.outputs[n - 1], "output gradient")?;
        let mut upstream: Vec<Option<Tensor4<T>>> = vec![None; n];
        upstream[n - 1] = Some(d_output.clone());
        let mut d_input = None;
        for k in (0..n).rev() {
            let mut g = upstream[k].take().expect("every layer output feeds the loss");
            if self.topology.layers[k].activation {
                relu_backward(&cache.outputs[k], &mut g);
            }
            if let Some(src) = self.topology.skip_into(k) {
                accumulate(&mut upstream[src], &g)?;
            }
            let dx = self.layers[k].backward(&cache.inputs[k], &g, &mut self.grads[k])?;
            if k == 0 {
                d_input = Some(dx);
            } else {
                accumulate(&mut upstream[k - 1], &dx)?;
            }
        }
        Ok(d_input.expect("model has at least one layer"))
    }
}

fn accumulate<T: Real>(slot: &mut Option<Tensor4<T>>, g: &Tensor4<T>) -> Result<()> {
    match slot {
        Some(acc) => skip_add_assign(acc, g),
        None => {
            *slot = Some(g.clone());
            Ok(())
        }
    }
}
