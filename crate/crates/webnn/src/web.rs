//! The web layer: `Q` neurons wired as a complete directed graph.
//!
//! The network state for one sample is a `Q×Q` matrix `S` where `S[i, j]` is
//! the value neuron `i` sent to neuron `j` at the last timestep. Row `i`
//! holds neuron `i`'s outputs and column `j` holds neuron `j`'s inputs.
//!
//! One timestep:
//!
//! 1. inject: each input feature `k < I` is added down column `k`;
//! 2. update: every neuron `i` maps its incoming column through its own
//!    affine map `W[i]·u + b[i]`, applies leaky ReLU, and writes the result
//!    into row `i`;
//! 3. readout: output neuron `Q−O+j` reports the mean of its incoming
//!    column.
//!
//! Two update implementations are provided. [`step_naive`] loops over
//! neurons; [`step_vectorized`] applies all `Q` maps with one broadcast
//! batched product `(Q,Q,Q)·(N,Q,Q,1)`.

use std::ops::Range;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ops, Real, Tape, Tensor, Var};

pub const DEFAULT_SLOPE: f64 = 0.01;

/// Hyperparameters of one web layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WebConfig {
    /// Total neuron count `Q`.
    pub neurons: usize,
    /// Input neuron count `I`; input neurons are `[0, I)`.
    pub inputs: usize,
    /// Output neuron count `O`; output neurons are `[Q−O, Q)`.
    pub outputs: usize,
    /// Number of update sweeps `T`.
    pub timesteps: usize,
    /// Negative-side slope of the leaky ReLU.
    #[serde(default = "default_slope")]
    pub slope: f64,
}

fn default_slope() -> f64 {
    DEFAULT_SLOPE
}

impl WebConfig {
    pub fn new(neurons: usize, inputs: usize, outputs: usize, timesteps: usize) -> Result<Self> {
        let config = Self {
            neurons,
            inputs,
            outputs,
            timesteps,
            slope: DEFAULT_SLOPE,
        };
        config.validate()?;
        Ok(config)
    }

    /// `Q=15, I=8, O=1, T=30`.
    pub fn titanic() -> Self {
        Self::new(15, 8, 1, 30).expect("valid preset")
    }

    pub fn with_slope(mut self, slope: f64) -> Result<Self> {
        self.slope = slope;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            neurons: q,
            inputs: i,
            outputs: o,
            timesteps: t,
            slope,
        } = *self;
        if q == 0 || i == 0 || o == 0 || t == 0 {
            return Err(Error::Config(format!(
                "Q, I, O, T must all be >= 1 (got Q={q}, I={i}, O={o}, T={t})"
            )));
        }
        if q < i + o {
            return Err(Error::Config(format!("need Q >= I + O, got Q={q} < {i} + {o}")));
        }
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::Config(format!("leaky ReLU slope must be >= 0, got {slope}")));
        }
        Ok(())
    }

    pub fn input_neurons(&self) -> Range<usize> {
        0..self.inputs
    }

    pub fn output_neurons(&self) -> Range<usize> {
        self.neurons - self.outputs..self.neurons
    }

    /// `Q³ + Q²`
    pub fn param_count(&self) -> usize {
        self.neurons.pow(3) + self.neurons.pow(2)
    }
}

/// Per-neuron maps: `weights[i]` is neuron `i`'s `Q×Q` matrix and
/// `bias[i]` its `Q`-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct WebParams<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> WebParams<T> {
    /// Weights uniform in `[−1/√Q, 1/√Q]` from a seeded ChaCha stream; zero bias.
    pub fn init(config: &WebConfig, seed: u64) -> Self {
        let q = config.neurons;
        let bound = 1.0 / (q as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..q * q * q)
            .map(|_| T::of(rng.random_range(-bound..=bound)))
            .collect();
        Self {
            weights: Tensor::from_parts(vec![q, q, q], weights),
            bias: Tensor::zeros([q, q]),
        }
    }

    pub fn zeros(config: &WebConfig) -> Self {
        let q = config.neurons;
        Self {
            weights: Tensor::zeros([q, q, q]),
            bias: Tensor::zeros([q, q]),
        }
    }

    pub fn from_tensors(config: &WebConfig, weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let params = Self { weights, bias };
        params.check(config)?;
        Ok(params)
    }

    pub fn check(&self, config: &WebConfig) -> Result<()> {
        let q = config.neurons;
        if self.weights.shape() != [q, q, q] {
            return Err(Error::shape("web weights", self.weights.shape(), &[q, q, q]));
        }
        if self.bias.shape() != [q, q] {
            return Err(Error::shape("web bias", self.bias.shape(), &[q, q]));
        }
        if !self.weights.all_finite() || !self.bias.all_finite() {
            return Err(Error::NonFinite("web parameters".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Batched state matrices, shape `(N, Q, Q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WebState<T> {
    matrix: Tensor<T>,
}

impl<T: Real> WebState<T> {
    pub fn zeros(batch: usize, neurons: usize) -> Self {
        Self {
            matrix: Tensor::zeros([batch, neurons, neurons]),
        }
    }

    pub fn new(matrix: Tensor<T>) -> Result<Self> {
        match *matrix.shape() {
            [_, q, q2] if q == q2 => Ok(Self { matrix }),
            _ => Err(Error::InvalidShape {
                shape: matrix.shape().to_vec(),
                reason: "state must be (N, Q, Q)".into(),
            }),
        }
    }

    pub fn batch(&self) -> usize {
        self.matrix.shape()[0]
    }

    pub fn neurons(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.matrix
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.matrix
    }

    fn expect_neurons(&self, config: &WebConfig) -> Result<()> {
        let q = config.neurons;
        if self.neurons() != q {
            return Err(Error::shape("web state", self.matrix.shape(), &[self.batch(), q, q]));
        }
        Ok(())
    }
}

/// External input of shape `(N, T_i, I)` with `T_i ∈ {1, T}`.
///
/// `T_i = 1` is a constant input replicated at every timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSeries<T> {
    data: Tensor<T>,
}

impl<T: Real> InputSeries<T> {
    pub fn new(data: Tensor<T>) -> Result<Self> {
        if data.rank() != 3 {
            return Err(Error::InvalidShape {
                shape: data.shape().to_vec(),
                reason: "input series must be (N, T_i, I)".into(),
            });
        }
        Ok(Self { data })
    }

    /// Stretches a static `(N, I)` input over every timestep.
    pub fn constant(features: &Tensor<T>) -> Result<Self> {
        let &[n, i] = features.shape() else {
            return Err(Error::InvalidShape {
                shape: features.shape().to_vec(),
                reason: "constant input must be (N, I)".into(),
            });
        };
        Self::new(features.reshape([n, 1, i])?)
    }

    pub fn batch(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn steps(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.data
    }

    pub fn validate(&self, config: &WebConfig) -> Result<()> {
        let ti = self.steps();
        if ti != 1 && ti != config.timesteps {
            return Err(Error::Validation(format!(
                "input has {ti} timesteps; expected 1 or T={}",
                config.timesteps
            )));
        }
        let width = self.data.shape()[2];
        if width != config.inputs {
            return Err(Error::shape(
                "input series",
                self.data.shape(),
                &[self.batch(), ti, config.inputs],
            ));
        }
        Ok(())
    }

    /// Input for timestep `t` (0-based), shape `(N, I)`.
    pub fn at(&self, t: usize) -> Result<Tensor<T>> {
        let idx = if self.steps() == 1 { 0 } else { t };
        ops::select(&self.data, 1, idx)
    }
}

/// Which update implementation a forward pass uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepKind {
    Naive,
    #[default]
    Vectorized,
}

/// Adds feature `k` of `x_t` down input neuron `k`'s incoming column.
pub fn inject_input<T: Real>(state: &WebState<T>, x_t: &Tensor<T>, config: &WebConfig) -> Result<WebState<T>> {
    state.expect_neurons(config)?;
    let (n, q) = (state.batch(), config.neurons);
    if x_t.shape() != [n, config.inputs] {
        return Err(Error::shape("inject_input", x_t.shape(), &[n, config.inputs]));
    }
    let padded = ops::pad_axis(x_t, 1, q)?.reshape([n, 1, q])?;
    WebState::new(ops::add(state.tensor(), &padded)?)
}

/// One timestep by looping over neurons: neuron `i` reads column `i`,
/// applies `leaky_relu(W[i]·u + b[i])`, and writes row `i`.
pub fn step_naive<T: Real>(state: &WebState<T>, params: &WebParams<T>, config: &WebConfig) -> Result<WebState<T>> {
    state.expect_neurons(config)?;
    params.check_shapes(config)?;
    let (n, q) = (state.batch(), config.neurons);
    let alpha = T::of(config.slope);
    let s = state.tensor().data();
    let w = params.weights.data();
    let b = params.bias.data();
    let mut out = vec![T::zero(); n * q * q];
    let mut column = vec![T::zero(); q];
    for sample in 0..n {
        let src = &s[sample * q * q..(sample + 1) * q * q];
        for node in 0..q {
            for (r, c) in column.iter_mut().enumerate() {
                *c = src[r * q + node];
            }
            for j in 0..q {
                let mut z = b[node * q + j];
                for (t, &u) in column.iter().enumerate() {
                    z += w[(node * q + j) * q + t] * u;
                }
                out[(sample * q + node) * q + j] = ops::leaky_relu_scalar(z, alpha);
            }
        }
    }
    WebState::new(Tensor::from_parts(vec![n, q, q], out))
}

/// One timestep as a single broadcast batched product: the transposed
/// state viewed as `(N,Q,Q,1)` is multiplied by `W` of shape `(Q,Q,Q)`.
pub fn step_vectorized<T: Real>(state: &WebState<T>, params: &WebParams<T>, config: &WebConfig) -> Result<WebState<T>> {
    state.expect_neurons(config)?;
    params.check_shapes(config)?;
    let (n, q) = (state.batch(), config.neurons);
    let columns = ops::transpose_last(state.tensor())?.reshape([n, q, q, 1])?;
    let z = ops::batched_matmul(&params.weights, &columns)?;
    let z = ops::add(&z, &params.bias.reshape([q, q, 1])?)?;
    WebState::new(ops::leaky_relu(&z, T::of(config.slope)).reshape([n, q, q])?)
}

pub fn step<T: Real>(
    kind: StepKind,
    state: &WebState<T>,
    params: &WebParams<T>,
    config: &WebConfig,
) -> Result<WebState<T>> {
    match kind {
        StepKind::Naive => step_naive(state, params, config),
        StepKind::Vectorized => step_vectorized(state, params, config),
    }
}

/// Mean of each output neuron's incoming column, shape `(N, O)`.
pub fn readout<T: Real>(state: &WebState<T>, config: &WebConfig) -> Result<Tensor<T>> {
    state.expect_neurons(config)?;
    let cols = ops::narrow(state.tensor(), 2, config.neurons - config.outputs, config.outputs)?;
    ops::mean_axis(&cols, 1)
}

/// Runs `T` timesteps from a zero state and returns the `(N, T, O)` history.
pub fn forward<T: Real>(
    params: &WebParams<T>,
    config: &WebConfig,
    inputs: &InputSeries<T>,
    kind: StepKind,
) -> Result<Tensor<T>> {
    inputs.validate(config)?;
    let mut state = WebState::zeros(inputs.batch(), config.neurons);
    let mut outputs = Vec::with_capacity(config.timesteps);
    for t in 0..config.timesteps {
        state = inject_input(&state, &inputs.at(t)?, config)?;
        state = step(kind, &state, params, config)?;
        outputs.push(readout(&state, config)?);
    }
    let refs: Vec<_> = outputs.iter().collect();
    ops::stack(&refs, 1)
}

impl<T: Real> WebParams<T> {
    fn check_shapes(&self, config: &WebConfig) -> Result<()> {
        let q = config.neurons;
        if self.weights.shape() != [q, q, q] || self.bias.shape() != [q, q] {
            return Err(Error::shape("web params", self.weights.shape(), &[q, q, q]));
        }
        Ok(())
    }
}

/// Web parameters recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct WebVars<'t, T: Real> {
    pub weights: Var<'t, T>,
    pub bias: Var<'t, T>,
}

fn tape_step<'t, T: Real>(
    kind: StepKind,
    state: Var<'t, T>,
    params: WebVars<'t, T>,
    config: &WebConfig,
) -> Result<Var<'t, T>> {
    let q = config.neurons;
    let n = state.shape()[0];
    let alpha = T::of(config.slope);
    match kind {
        StepKind::Vectorized => {
            let columns = state.transpose_last()?.reshape([n, q, q, 1])?;
            let z = params.weights.matmul(columns)?;
            let z = z.add(params.bias.reshape([q, q, 1])?)?;
            z.leaky_relu(alpha).reshape([n, q, q])
        }
        StepKind::Naive => {
            let mut rows = Vec::with_capacity(q);
            for node in 0..q {
                let column = state.select(2, node)?.reshape([n, q, 1])?;
                let w = params.weights.select(0, node)?;
                let b = params.bias.select(0, node)?.reshape([q, 1])?;
                let z = w.matmul(column)?.add(b)?;
                rows.push(z.leaky_relu(alpha).reshape([n, q])?);
            }
            Var::stack(&rows, 1)
        }
    }
}

/// Differentiable `T`-step forward pass.
///
/// `inputs` is a `(N, T_i, I)` variable; gradients flow through every
/// timestep back into the parameters and the inputs.
pub fn forward_on_tape<'t, T: Real>(
    params: WebVars<'t, T>,
    config: &WebConfig,
    inputs: Var<'t, T>,
    kind: StepKind,
) -> Result<Var<'t, T>> {
    let tape = inputs.tape();
    let shape = inputs.shape();
    let &[n, ti, width] = shape.as_slice() else {
        return Err(Error::InvalidShape {
            shape,
            reason: "input series must be (N, T_i, I)".into(),
        });
    };
    if ti != 1 && ti != config.timesteps {
        return Err(Error::Validation(format!(
            "input has {ti} timesteps; expected 1 or T={}",
            config.timesteps
        )));
    }
    if width != config.inputs {
        return Err(Error::shape("input series", &shape, &[n, ti, config.inputs]));
    }
    let q = config.neurons;
    let out_start = q - config.outputs;

    let constant = (ti == 1)
        .then(|| inputs.select(1, 0)?.pad_axis(1, q)?.reshape([n, 1, q]))
        .transpose()?;
    let mut state = tape.constant(Tensor::zeros([n, q, q]));
    let mut history = Vec::with_capacity(config.timesteps);
    for t in 0..config.timesteps {
        let injected = match constant {
            Some(c) => c,
            None => inputs.select(1, t)?.pad_axis(1, q)?.reshape([n, 1, q])?,
        };
        state = tape_step(kind, state.add(injected)?, params, config)?;
        history.push(state.narrow(2, out_start, config.outputs)?.mean_axis(1)?);
    }
    Var::stack(&history, 1)
}

/// Records `params` on `tape` as trainable leaves.
pub fn params_on_tape<'t, T: Real>(tape: &'t Tape<T>, params: &WebParams<T>) -> WebVars<'t, T> {
    WebVars {
        weights: tape.param(params.weights.clone()),
        bias: tape.param(params.bias.clone()),
    }
}

/// Median per-step timings of the two update implementations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub q: usize,
    pub batch: usize,
    pub timesteps: usize,
    pub iterations: usize,
    pub naive_ms: f64,
    pub vectorized_ms: f64,
    /// `naive_ms / vectorized_ms`
    pub ratio: f64,
    pub max_abs_diff: f64,
}

pub const BENCH_TOLERANCE: f64 = 1e-5;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Times `T`-step f32 rollouts of both implementations from the same
/// seeded state, parameters and input.
///
/// The final states are compared first; a difference above
/// [`BENCH_TOLERANCE`] aborts with [`Error::Equivalence`]. Each
/// implementation gets two untimed warmup rollouts.
pub fn bench_step(config: &WebConfig, batch: usize, iterations: usize, seed: u64) -> Result<BenchReport> {
    config.validate()?;
    if batch == 0 || iterations == 0 {
        return Err(Error::Config("batch and iterations must be >= 1".into()));
    }
    let q = config.neurons;
    let params = WebParams::<f32>::init(config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut uniform = |len: usize| -> Vec<f32> { (0..len).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let start = WebState::new(Tensor::from_parts(vec![batch, q, q], uniform(batch * q * q)))?;
    let x = Tensor::from_parts(vec![batch, config.inputs], uniform(batch * config.inputs));

    let rollout = |kind: StepKind| -> Result<WebState<f32>> {
        let mut s = start.clone();
        for _ in 0..config.timesteps {
            s = step(kind, &inject_input(&s, &x, config)?, &params, config)?;
        }
        Ok(s)
    };

    let naive = rollout(StepKind::Naive)?;
    let vectorized = rollout(StepKind::Vectorized)?;
    let max_abs_diff = naive.tensor().max_abs_diff(vectorized.tensor())? as f64;
    if max_abs_diff.is_nan() || max_abs_diff > BENCH_TOLERANCE {
        return Err(Error::Equivalence {
            max_diff: max_abs_diff,
            tolerance: BENCH_TOLERANCE,
        });
    }

    let time = |kind: StepKind| -> Result<f64> {
        for _ in 0..2 {
            rollout(kind)?;
        }
        let mut per_step = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let t0 = Instant::now();
            let s = rollout(kind)?;
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            std::hint::black_box(s);
            per_step.push(ms / config.timesteps as f64);
        }
        Ok(median(&mut per_step))
    };
    let naive_ms = time(StepKind::Naive)?;
    let vectorized_ms = time(StepKind::Vectorized)?;
    Ok(BenchReport {
        q,
        batch,
        timesteps: config.timesteps,
        iterations,
        naive_ms,
        vectorized_ms,
        ratio: naive_ms / vectorized_ms.max(f64::MIN_POSITIVE),
        max_abs_diff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> (WebConfig, WebParams<f64>, WebState<f64>) {
        let config = WebConfig::new(2, 1, 1, 1).unwrap();
        let weights = Tensor::from_f64([2, 2, 2], &[1., 0., 0., 1., 0., 1., 1., 0.]).unwrap();
        let params = WebParams::from_tensors(&config, weights, Tensor::zeros([2, 2])).unwrap();
        let state = WebState::new(Tensor::from_f64([1, 2, 2], &[1., 2., 3., 4.]).unwrap()).unwrap();
        (config, params, state)
    }

    #[test]
    fn config_rejects_too_few_neurons() {
        assert!(matches!(WebConfig::new(8, 8, 1, 30), Err(Error::Config(_))));
        assert!(WebConfig::new(9, 8, 1, 30).is_ok());
        assert!(WebConfig::new(3, 0, 1, 1).is_err());
        assert!(WebConfig::new(3, 1, 1, 0).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let config = WebConfig::titanic();
        let a = WebParams::<f32>::init(&config, 7);
        let b = WebParams::<f32>::init(&config, 7);
        assert_eq!(a, b);
        assert_eq!(a.weights.len(), 3375);
        assert_eq!(a.bias.len(), 225);
        assert_eq!(a.param_count(), config.param_count());
        assert_ne!(a, WebParams::init(&config, 8));

        let small = WebConfig::new(3, 1, 1, 1).unwrap();
        let p = WebParams::<f64>::init(&small, 3);
        assert!(p.weights.data().iter().all(|w| w.abs() <= 1.0 / 3f64.sqrt()));
    }

    #[test]
    fn injection_broadcasts_down_columns() {
        let config = WebConfig::new(3, 2, 1, 1).unwrap();
        let s = WebState::<f64>::zeros(1, 3);
        let x = Tensor::from_f64([1, 2], &[5., -1.]).unwrap();
        let out = inject_input(&s, &x, &config).unwrap();
        assert_eq!(out.tensor().data(), &[5., -1., 0., 5., -1., 0., 5., -1., 0.]);

        let back = inject_input(&out, &x.map(|v| -v), &config).unwrap();
        assert_eq!(back, s);
        assert_eq!(inject_input(&s, &Tensor::zeros([1, 2]), &config).unwrap(), s);
        assert!(inject_input(&s, &Tensor::zeros([1, 3]), &config).is_err());
    }

    #[test]
    fn worked_example_both_steps() {
        let (config, params, state) = worked_example();
        let want = [1., 3., 4., 2.];
        assert_eq!(step_naive(&state, &params, &config).unwrap().tensor().data(), &want);
        assert_eq!(
            step_vectorized(&state, &params, &config).unwrap().tensor().data(),
            &want
        );
    }

    #[test]
    fn negative_preactivations_are_scaled() {
        let (config, params, _) = worked_example();
        let state = WebState::new(Tensor::from_f64([1, 2, 2], &[-1., 2., 3., -4.]).unwrap()).unwrap();
        // col0 = [-1, 3] -> row0 = [-1, 3]; col1 = [2, -4] swapped -> row1 = [-4, 2]
        let out = step_naive(&state, &params, &config).unwrap();
        let want = [-0.01, 3.0, -0.04, 2.0];
        for (a, b) in out.tensor().data().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_state_is_fixpoint() {
        let config = WebConfig::new(4, 1, 1, 3).unwrap();
        let params = WebParams::<f64>::init(&config, 1);
        let s = WebState::zeros(2, 4);
        assert_eq!(step_naive(&s, &params, &config).unwrap(), s);
        assert_eq!(step_vectorized(&s, &params, &config).unwrap(), s);
    }

    #[test]
    fn readout_means_output_columns() {
        let (config, params, state) = worked_example();
        let next = step_naive(&state, &params, &config).unwrap();
        assert_eq!(readout(&next, &config).unwrap().data(), &[2.5]);

        let zero = WebState::<f64>::zeros(3, 2);
        assert_eq!(readout(&zero, &config).unwrap(), Tensor::zeros([3, 1]));
    }

    #[test]
    fn forward_shapes_and_fixpoint() {
        let config = WebConfig::titanic();
        let params = WebParams::<f32>::init(&config, 0);
        let x = InputSeries::constant(&Tensor::zeros([3, 8])).unwrap();
        let y = forward(&params, &config, &x, StepKind::Vectorized).unwrap();
        assert_eq!(y.shape(), &[3, 30, 1]);
        assert!(y.data().iter().all(|&v| v == 0.0));

        let bad = InputSeries::new(Tensor::<f32>::zeros([3, 4, 8])).unwrap();
        assert!(matches!(
            forward(&params, &config, &bad, StepKind::Naive),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn bench_degenerate_graph() {
        let config = WebConfig::new(2, 1, 1, 2).unwrap();
        let report = bench_step(&config, 1, 1, 0).unwrap();
        assert!(report.naive_ms >= 0.0 && report.vectorized_ms >= 0.0);
        assert_eq!(report.q, 2);
    }
}
