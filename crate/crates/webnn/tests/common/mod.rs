//! Instance builders shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webnn::models::{ConvLayer, ConvSpec, MnistArch, MnistModel};
use webnn::tensor::ops;
use webnn::web::{inject_input, step_vectorized, InputSeries, WebConfig, WebParams, WebState};
use webnn::{Real, Tensor};

pub fn uniform<T: Real>(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor<T> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::from_f64(shape.to_vec(), &data).unwrap()
}

pub fn uniform_in(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape.to_vec(), &data).unwrap()
}

/// Seeded web parameters with a symmetric bias.
pub fn random_params<T: Real>(config: &WebConfig, seed: u64) -> WebParams<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = config.neurons;
    let bound = 1.0 / (q as f64).sqrt();
    WebParams::from_tensors(
        config,
        uniform(&mut rng, &[q, q, q], bound),
        uniform(&mut rng, &[q, q], 0.5),
    )
    .unwrap()
}

/// Gradient-check parameters: mixed-sign weights and a bias in
/// `[0.4, 1)`. With a symmetric bias most pre-activations turn negative
/// after a few steps, the `α⁴`-scaled gradients fall to ~1e−9 and central
/// differences at `h = 1e−5` drown in f64 roundoff.
pub fn gradcheck_params(config: &WebConfig, seed: u64) -> WebParams<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = config.neurons;
    let w = uniform(&mut rng, &[q, q, q], 1.0 / (q as f64).sqrt());
    WebParams::from_tensors(config, w, uniform_in(&mut rng, &[q, q], 0.4, 1.0)).unwrap()
}

/// Number of negative pre-activations over a rollout.
pub fn negative_activations(params: &WebParams<f64>, config: &WebConfig, x: &Tensor<f64>) -> usize {
    let inputs = InputSeries::new(x.clone()).unwrap();
    let mut state = WebState::zeros(inputs.batch(), config.neurons);
    let mut count = 0;
    for t in 0..config.timesteps {
        state = inject_input(&state, &inputs.at(t).unwrap(), config).unwrap();
        state = step_vectorized(&state, params, config).unwrap();
        count += state.tensor().data().iter().filter(|&&v| v < 0.0).count();
    }
    count
}

/// The reduced digit model scaled to 8×8 inputs: three stride-1 3×3
/// convs (1→2→2→1) leave a 2×2 map, so `I = 4`; `Q = 16`, `O = 10`,
/// `T = 3`.
pub fn shrunk_mnist_arch() -> MnistArch {
    let convs = vec![
        ConvSpec::new(1, 2, 3, 1),
        ConvSpec::new(2, 2, 3, 1),
        ConvSpec::new(2, 1, 3, 1),
    ];
    MnistArch::new(8, convs, 16, 3).unwrap()
}

/// Smallest distance of any leaky-ReLU pre-activation from the kink
/// over a forward pass of `model` on `image`.
pub fn kink_margin(model: &MnistModel<f64>, image: &Tensor<f64>) -> f64 {
    let config = &model.arch.web;
    let mut margin = f64::INFINITY;
    let mut x = image.clone();
    for layer in &model.convs {
        let z = ops::conv2d(&x, &layer.kernel, &layer.bias, layer.spec.stride).unwrap();
        margin = margin.min(z.data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())));
        x = ops::leaky_relu(&z, config.slope);
    }
    let n = image.shape()[0];
    let inputs = InputSeries::new(x.reshape(vec![n, 1, config.inputs]).unwrap()).unwrap();
    let mut state = WebState::zeros(n, config.neurons);
    for t in 0..config.timesteps {
        state = inject_input(&state, &inputs.at(t).unwrap(), config).unwrap();
        state = step_vectorized(&state, &model.web, config).unwrap();
        for &v in state.tensor().data() {
            let z = if v >= 0.0 { v } else { v / config.slope };
            margin = margin.min(z.abs());
        }
    }
    margin
}

/// Shrunk model with conditioned parameters and one image in `[0, 1)`.
/// Web weights are drawn from `[−0.5, 1.5)/√Q` so activations stay away
/// from zero; draws whose pre-activations come within `1e−3` of a kink
/// are discarded, since a central difference across the kink is not a
/// derivative.
pub fn shrunk_mnist_instance(seed: u64) -> (MnistModel<f64>, Tensor<f64>) {
    let arch = shrunk_mnist_arch();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = arch.web.neurons;
    let scale = 1.0 / (q as f64).sqrt();
    loop {
        let convs = arch
            .convs
            .iter()
            .map(|&spec| {
                let fan_in = (spec.in_channels * spec.kernel * spec.kernel) as f64;
                ConvLayer {
                    spec,
                    kernel: uniform(
                        &mut rng,
                        &[spec.out_channels, spec.in_channels, spec.kernel, spec.kernel],
                        1.0 / fan_in.sqrt(),
                    ),
                    bias: uniform_in(&mut rng, &[spec.out_channels], 0.1, 0.5),
                }
            })
            .collect();
        let weights = uniform_in(&mut rng, &[q, q, q], -0.5 * scale, 1.5 * scale);
        let web = WebParams::from_tensors(&arch.web, weights, uniform_in(&mut rng, &[q, q], 0.4, 1.0)).unwrap();
        let image = uniform_in(&mut rng, &[1, 1, 8, 8], 0.0, 1.0);
        let model = MnistModel::from_parts(arch.clone(), convs, web).unwrap();
        if kink_margin(&model, &image) >= 1e-3 {
            return (model, image);
        }
    }
}
