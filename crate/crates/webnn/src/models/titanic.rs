use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor, Var};
use crate::web::{forward_on_tape, StepKind, WebConfig, WebParams, WebVars};

use super::Classifier;

/// Width of the preprocessed Titanic feature vector.
pub const TITANIC_INPUTS: usize = 8;

/// Binary survival classifier: eight standardized features held constant
/// over all timesteps, one output neuron read as a logit.
#[derive(Clone, Debug, PartialEq)]
pub struct TitanicModel<T> {
    pub config: WebConfig,
    pub web: WebParams<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TitanicOutput<T> {
    /// `sigmoid` of the final-timestep logit, shape `(N, 1)`.
    pub probability: Tensor<T>,
    /// Raw readout logits, shape `(N, T, 1)`.
    pub history: Tensor<T>,
}

fn check_config(config: &WebConfig) -> Result<()> {
    config.validate()?;
    if config.inputs != TITANIC_INPUTS || config.outputs != 1 {
        return Err(Error::Config(format!(
            "titanic model needs I={TITANIC_INPUTS} and O=1, got I={} O={}",
            config.inputs, config.outputs
        )));
    }
    Ok(())
}

impl<T: Real> TitanicModel<T> {
    pub fn new(config: WebConfig, seed: u64) -> Result<Self> {
        check_config(&config)?;
        Ok(Self {
            web: WebParams::init(&config, seed),
            config,
        })
    }

    pub fn from_params(config: WebConfig, web: WebParams<T>) -> Result<Self> {
        check_config(&config)?;
        web.check(&config)?;
        Ok(Self { config, web })
    }

    pub fn forward(&self, features: &Tensor<T>) -> Result<TitanicOutput<T>> {
        let history = self.history(features)?;
        let n = features.shape()[0];
        let t = self.config.timesteps;
        let last = (0..n)
            .map(|i| crate::tensor::ops::sigmoid_scalar(history.data()[i * t + t - 1]))
            .collect();
        Ok(TitanicOutput {
            probability: Tensor::new([n, 1], last)?,
            history,
        })
    }
}

impl<T: Real> Classifier<T> for TitanicModel<T> {
    fn web_config(&self) -> &WebConfig {
        &self.config
    }

    fn parameters(&self) -> Vec<&Tensor<T>> {
        vec![&self.web.weights, &self.web.bias]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.web.weights, &mut self.web.bias]
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        match shape {
            [n, TITANIC_INPUTS] if *n > 0 => Ok(()),
            _ => Err(Error::shape(
                "titanic features",
                shape,
                &[shape.first().copied().unwrap_or(0), TITANIC_INPUTS],
            )),
        }
    }

    fn history_on_tape<'t>(&self, params: &[Var<'t, T>], input: Var<'t, T>) -> Result<Var<'t, T>> {
        let &[weights, bias] = params else {
            return Err(Error::Validation(format!(
                "titanic model takes 2 parameters, got {}",
                params.len()
            )));
        };
        self.check_input(&input.shape())?;
        let n = input.shape()[0];
        let series = input.reshape([n, 1, TITANIC_INPUTS])?;
        forward_on_tape(WebVars { weights, bias }, &self.config, series, StepKind::Vectorized)
    }
}
