//! Task models built around the web layer.
//!
//! Both models read their prediction from the final timestep of the
//! `(N, T, O)` output history; earlier timesteps are kept for
//! [`predict_history`] traces.

mod checkpoint;
mod mnist;
mod titanic;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ops, Real, Tape, Tensor, Var};
use crate::web::WebConfig;

pub use checkpoint::{AnyModel, Checkpoint, ModelSpec, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mnist::{MnistArch, MnistModel, MNIST_CLASSES};
pub use titanic::{TitanicModel, TitanicOutput, TITANIC_INPUTS};

/// A model mapping a batch of inputs to an `(N, T, O)` output history.
pub trait Classifier<T: Real> {
    fn web_config(&self) -> &WebConfig;

    /// Trainable tensors in a fixed order.
    fn parameters(&self) -> Vec<&Tensor<T>>;

    /// Same order as [`Classifier::parameters`].
    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>>;

    /// Validates the shape of one input batch.
    fn check_input(&self, shape: &[usize]) -> Result<()>;

    /// Differentiable forward pass. `params` are this model's parameters
    /// recorded on the same tape as `input`, in [`Classifier::parameters`]
    /// order.
    fn history_on_tape<'t>(&self, params: &[Var<'t, T>], input: Var<'t, T>) -> Result<Var<'t, T>>;

    /// Inference-only forward pass returning the `(N, T, O)` history.
    fn history(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input.shape())?;
        let tape = Tape::new();
        let params: Vec<_> = self
            .parameters()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let x = tape.constant(input.clone());
        let history = self.history_on_tape(&params, x)?;
        Ok(history.value().as_ref().clone())
    }
}

/// Kernel size, stride and channel counts of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub const fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
        }
    }

    pub fn output_extent(&self, input: usize) -> Option<usize> {
        ops::conv_output_extent(input, self.kernel, self.stride)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub spec: ConvSpec,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> ConvLayer<T> {
    /// Kernel uniform in `±1/√(C_in·K²)`, zero bias.
    pub fn init(spec: ConvSpec, rng: &mut ChaCha8Rng) -> Self {
        let ConvSpec {
            in_channels: ci,
            out_channels: co,
            kernel: k,
            ..
        } = spec;
        let bound = 1.0 / ((ci * k * k) as f64).sqrt();
        let data = (0..co * ci * k * k)
            .map(|_| T::of(rng.random_range(-bound..=bound)))
            .collect();
        Self {
            spec,
            kernel: Tensor::from_parts(vec![co, ci, k, k], data),
            bias: Tensor::zeros([co]),
        }
    }

    fn check(&self) -> Result<()> {
        let s = self.spec;
        let want = [s.out_channels, s.in_channels, s.kernel, s.kernel];
        if self.kernel.shape() != want {
            return Err(Error::shape("conv kernel", self.kernel.shape(), &want));
        }
        if self.bias.shape() != [s.out_channels] {
            return Err(Error::shape("conv bias", self.bias.shape(), &[s.out_channels]));
        }
        Ok(())
    }
}

pub(crate) fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Final-timestep slice `history[:, T−1, :]`, shape `(N, O)`.
pub fn final_logits<'t, T: Real>(history: Var<'t, T>) -> Result<Var<'t, T>> {
    let t = history.shape()[1];
    history.select(1, t - 1)
}

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Class predicted from one row of readout values.
///
/// With one output the value is a logit and the class is `1` when
/// `sigmoid(logit) ≥ 0.5`, i.e. `logit ≥ 0`. With several outputs it is
/// the argmax (first index on ties), which equals the argmax of the
/// softmax.
pub fn predict_row<T: Real>(row: &[T]) -> usize {
    match row {
        [logit] => usize::from(*logit >= T::zero()),
        _ => argmax(row),
    }
}

/// Per-timestep predictions `(N, T)` from an `(N, T, O)` history.
pub fn predict_history<T: Real>(history: &Tensor<T>) -> Result<Vec<Vec<usize>>> {
    let &[n, t, o] = history.shape() else {
        return Err(Error::InvalidShape {
            shape: history.shape().to_vec(),
            reason: "history must be (N, T, O)".into(),
        });
    };
    let data = history.data();
    Ok((0..n)
        .map(|i| {
            (0..t)
                .map(|s| predict_row(&data[(i * t + s) * o..(i * t + s + 1) * o]))
                .collect()
        })
        .collect())
}

/// Final-timestep prediction for every sample.
pub fn final_predictions<T: Real>(history: &Tensor<T>) -> Result<Vec<usize>> {
    Ok(predict_history(history)?
        .into_iter()
        .map(|trace| *trace.last().expect("T >= 1"))
        .collect())
}
