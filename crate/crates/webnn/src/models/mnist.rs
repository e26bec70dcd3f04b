use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor, Var};
use crate::web::{forward_on_tape, StepKind, WebConfig, WebParams, WebVars};

use super::{seeded_rng, Classifier, ConvLayer, ConvSpec};

/// Digit classes.
pub const MNIST_CLASSES: usize = 10;

/// Convolution stack feeding a web layer. Every convolution is followed by
/// a leaky ReLU with the web layer's slope; the last one must produce a
/// single channel whose flattened size equals the web input count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MnistArch {
    /// Side length of the square input images.
    pub image_size: usize,
    pub convs: Vec<ConvSpec>,
    pub web: WebConfig,
}

impl MnistArch {
    pub fn new(image_size: usize, convs: Vec<ConvSpec>, neurons: usize, timesteps: usize) -> Result<Self> {
        let mut arch = Self {
            image_size,
            convs,
            web: WebConfig {
                neurons,
                inputs: 1,
                outputs: MNIST_CLASSES,
                timesteps,
                slope: crate::web::DEFAULT_SLOPE,
            },
        };
        arch.web.inputs = arch.flatten_width()?;
        arch.validate()?;
        Ok(arch)
    }

    /// Full-size stack: stride-1 convs 1→16→4→1, `22×22 = 484` inputs,
    /// `Q = 500`, `T = 5`.
    pub fn paper() -> Self {
        let convs = vec![
            ConvSpec::new(1, 16, 3, 1),
            ConvSpec::new(16, 4, 3, 1),
            ConvSpec::new(4, 1, 3, 1),
        ];
        Self::new(28, convs, 500, 5).expect("valid preset")
    }

    /// Reduced stack for a single CPU core: the first conv has stride 2,
    /// leaving `9×9 = 81` inputs, `Q = 100`, `T = 5`.
    pub fn desk() -> Self {
        let convs = vec![
            ConvSpec::new(1, 16, 3, 2),
            ConvSpec::new(16, 4, 3, 1),
            ConvSpec::new(4, 1, 3, 1),
        ];
        Self::new(28, convs, 100, 5).expect("valid preset")
    }

    /// Side length after each convolution.
    pub fn extents(&self) -> Result<Vec<usize>> {
        let mut side = self.image_size;
        let mut out = Vec::with_capacity(self.convs.len());
        for (i, c) in self.convs.iter().enumerate() {
            side = c.output_extent(side).ok_or_else(|| {
                Error::Config(format!(
                    "conv {i} (kernel {}, stride {}) does not fit a {side}×{side} input",
                    c.kernel, c.stride
                ))
            })?;
            out.push(side);
        }
        Ok(out)
    }

    pub fn flatten_width(&self) -> Result<usize> {
        let side = *self
            .extents()?
            .last()
            .ok_or_else(|| Error::Config("at least one conv required".into()))?;
        let channels = self.convs.last().map_or(0, |c| c.out_channels);
        Ok(channels * side * side)
    }

    pub fn validate(&self) -> Result<()> {
        self.web.validate()?;
        if self.web.outputs != MNIST_CLASSES {
            return Err(Error::Config(format!(
                "mnist model needs O={MNIST_CLASSES}, got {}",
                self.web.outputs
            )));
        }
        let mut channels = 1;
        for (i, c) in self.convs.iter().enumerate() {
            if c.in_channels != channels || c.out_channels == 0 {
                return Err(Error::Config(format!(
                    "conv {i} expects {} input channels but receives {channels}",
                    c.in_channels
                )));
            }
            channels = c.out_channels;
        }
        let width = self.flatten_width()?;
        if width != self.web.inputs {
            return Err(Error::Config(format!(
                "flattened conv output has {width} values but the web layer has I={}",
                self.web.inputs
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MnistModel<T> {
    pub arch: MnistArch,
    pub convs: Vec<ConvLayer<T>>,
    pub web: WebParams<T>,
}

impl<T: Real> MnistModel<T> {
    pub fn new(arch: MnistArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seeded_rng(seed);
        let convs = arch.convs.iter().map(|&s| ConvLayer::init(s, &mut rng)).collect();
        let web = WebParams::init(&arch.web, seed.wrapping_add(1));
        Ok(Self { arch, convs, web })
    }

    pub fn from_parts(arch: MnistArch, convs: Vec<ConvLayer<T>>, web: WebParams<T>) -> Result<Self> {
        arch.validate()?;
        if convs.len() != arch.convs.len() || convs.iter().zip(&arch.convs).any(|(l, s)| l.spec != *s) {
            return Err(Error::Config("conv layers do not match the architecture".into()));
        }
        for layer in &convs {
            layer.check()?;
        }
        web.check(&arch.web)?;
        Ok(Self { arch, convs, web })
    }

    /// Logit history `(N, T, 10)` for images `(N, 1, H, W)`.
    pub fn forward(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.history(images)
    }
}

impl<T: Real> Classifier<T> for MnistModel<T> {
    fn web_config(&self) -> &WebConfig {
        &self.arch.web
    }

    /// Conv kernels, conv biases, web weights, web bias.
    fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out: Vec<&Tensor<T>> = self.convs.iter().map(|c| &c.kernel).collect();
        out.extend(self.convs.iter().map(|c| &c.bias));
        out.extend([&self.web.weights, &self.web.bias]);
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let (kernels, biases): (Vec<_>, Vec<_>) = self.convs.iter_mut().map(|c| (&mut c.kernel, &mut c.bias)).unzip();
        let mut out = kernels;
        out.extend(biases);
        out.extend([&mut self.web.weights, &mut self.web.bias]);
        out
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let s = self.arch.image_size;
        match shape {
            [n, 1, h, w] if *n > 0 && *h == s && *w == s => Ok(()),
            _ => Err(Error::shape(
                "mnist images",
                shape,
                &[shape.first().copied().unwrap_or(0), 1, s, s],
            )),
        }
    }

    fn history_on_tape<'t>(&self, params: &[Var<'t, T>], input: Var<'t, T>) -> Result<Var<'t, T>> {
        let layers = self.convs.len();
        if params.len() != 2 * layers + 2 {
            return Err(Error::Validation(format!(
                "mnist model takes {} parameters, got {}",
                2 * layers + 2,
                params.len()
            )));
        }
        self.check_input(&input.shape())?;
        let n = input.shape()[0];
        let alpha = T::of(self.arch.web.slope);
        let mut x = input;
        for (i, layer) in self.convs.iter().enumerate() {
            x = x
                .conv2d(params[i], params[layers + i], layer.spec.stride)?
                .leaky_relu(alpha);
        }
        let series = x.reshape([n, 1, self.arch.web.inputs])?;
        let web = WebVars {
            weights: params[2 * layers],
            bias: params[2 * layers + 1],
        };
        forward_on_tape(web, &self.arch.web, series, StepKind::Vectorized)
    }
}
