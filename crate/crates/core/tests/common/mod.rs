#![allow(dead_code)]

use rand::Rng;
use shockwave::netcore::{ConvMode, Tensor4};
use shockwave::model::{EncoderDecoder, LayerSpec, Skip, Topology};

/// Double-loop sliding mean: window offsets `-w/2 ..= w - 1 - w/2`, zeros
/// outside the grid, divisor `w * w`.
pub fn naive_box_mean(src: &[f64], rows: usize, cols: usize, w: usize) -> Vec<f64> {
    let lo = -((w / 2) as i64);
    let hi = (w - 1 - w / 2) as i64;
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows as i64 {
        for j in 0..cols as i64 {
            let mut sum = 0.0;
            for di in lo..=hi {
                for dj in lo..=hi {
                    let (r, c) = (i + di, j + dj);
                    if r >= 0 && r < rows as i64 && c >= 0 && c < cols as i64 {
                        sum += src[(r * cols as i64 + c) as usize];
                    }
                }
            }
            out[(i * cols as i64 + j) as usize] = sum / (w * w) as f64;
        }
    }
    out
}

/// Mean squared sliding-mean difference, computed directly.
pub fn naive_smoothed_mse(pred: &[f64], target: &[f64], rows: usize, cols: usize, w: usize) -> f64 {
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let s = naive_box_mean(&diff, rows, cols, w);
    s.iter().map(|d| d * d).sum::<f64>() / s.len() as f64
}

pub fn random_tensor(rng: &mut impl Rng, dims: [usize; 4], lo: f64, hi: f64) -> Tensor4<f64> {
    let n = dims.iter().product();
    Tensor4::from_vec(dims, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

pub fn layer(i: usize, o: usize, mode: ConvMode, activation: bool) -> LayerSpec {
    LayerSpec {
        in_channels: i,
        out_channels: o,
        mode,
        activation,
    }
}

/// Conv 1->3 with ReLU, then a linear deconv 3->1.
pub fn micro_topology() -> Topology {
    Topology {
        layers: vec![layer(1, 3, ConvMode::Conv, true), layer(3, 1, ConvMode::Deconv, false)],
        skips: vec![],
    }
}

/// Four layers with a skip from the first into the third.
pub fn micro_skip_topology() -> Topology {
    Topology {
        layers: vec![
            layer(1, 2, ConvMode::Conv, true),
            layer(2, 3, ConvMode::Conv, true),
            layer(3, 2, ConvMode::Deconv, true),
            layer(2, 1, ConvMode::Deconv, false),
        ],
        skips: vec![Skip {
            source: 0,
            destination: 2,
        }],
    }
}

/// Largest relative error between analytic and central-difference gradients
/// of `loss(model(x), target)` over every parameter.
pub fn max_gradient_error(
    model: &mut EncoderDecoder<f64>,
    x: &Tensor4<f64>,
    loss: impl Fn(&Tensor4<f64>) -> (f64, Tensor4<f64>),
    h: f64,
) -> f64 {
    model.zero_grad();
    let out = model.forward_train(x).unwrap();
    let (_, d_out) = loss(&out);
    model.backward(&d_out).unwrap();
    let analytic = model.flat_grads();
    let base = model.flat_params();
    let mut worst: f64 = 0.0;
    for k in 0..base.len() {
        let mut probe = base.clone();
        probe[k] = base[k] + h;
        model.set_flat_params(&probe).unwrap();
        let up = loss(&model.forward(x).unwrap()).0;
        probe[k] = base[k] - h;
        model.set_flat_params(&probe).unwrap();
        let down = loss(&model.forward(x).unwrap()).0;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    model.set_flat_params(&base).unwrap();
    worst
}
