//! Mini-batch training with AdamW and per-epoch exponential learning-rate
//! decay. Loss and accuracy use only the final timestep of the history.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{final_logits, predict_row, Classifier};
use crate::tensor::{finite_difference_gradcheck, GradCheckReport, Real, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy on a single logit.
    Bce,
    /// Softmax cross-entropy over `O ≥ 2` logits.
    Ce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub scheduler_gamma: f64,
    pub seed: u64,
    pub loss: LossKind,
    /// Clip the global gradient norm to this value when set.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
}

impl TrainConfig {
    /// 40 epochs, batch 64, lr 0.01, weight decay 0.001, decay 0.9 per epoch.
    pub fn titanic() -> Self {
        Self {
            epochs: 40,
            batch_size: 64,
            lr: 0.01,
            weight_decay: 0.001,
            scheduler_gamma: 0.9,
            seed: 42,
            loss: LossKind::Bce,
            max_grad_norm: None,
        }
    }

    /// 5 epochs, batch 128, lr 0.001, weight decay 0.01, constant lr.
    pub fn mnist() -> Self {
        Self {
            epochs: 5,
            batch_size: 128,
            lr: 0.001,
            weight_decay: 0.01,
            scheduler_gamma: 1.0,
            seed: 42,
            loss: LossKind::Ce,
            max_grad_norm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch size must be >= 1".into());
        }
        // lr = 0 is accepted so that a run can be frozen for testing.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!(
                "weight decay must be finite and >= 0, got {}",
                self.weight_decay
            ));
        }
        if !(self.scheduler_gamma > 0.0 && self.scheduler_gamma <= 1.0) {
            return fail(format!(
                "scheduler gamma must be in (0, 1], got {}",
                self.scheduler_gamma
            ));
        }
        if let Some(c) = self.max_grad_norm {
            if !(c > 0.0 && c.is_finite()) {
                return fail(format!("max grad norm must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

/// `lr0 · gamma^epoch`.
pub fn exponential_lr(lr0: f64, gamma: f64, epoch: usize) -> f64 {
    lr0 * gamma.powi(epoch as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWHyper {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Moment estimates for each parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Real> AdamWState<T> {
    pub fn new(params: &[&Tensor<T>]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One decoupled-weight-decay Adam update:
/// `p ← p·(1 − lr·λ) − lr·m̂/(√v̂ + ε)`.
pub fn adamw_step<T: Real>(
    params: &mut [&mut Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamWState<T>,
    lr: f64,
    hyper: &AdamWHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Validation(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::shape("adamw", p.shape(), g.shape()));
        }
        if let Some(at) = g.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of parameter {i} (shape {:?}) at element {at} is {}",
                g.shape(),
                g.data()[at].as_f64()
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(hyper.beta1), T::of(hyper.beta2));
    let (one_b1, one_b2) = (T::of(1.0 - hyper.beta1), T::of(1.0 - hyper.beta2));
    let c1 = T::of(1.0 - hyper.beta1.powi(t));
    let c2 = T::of(1.0 - hyper.beta2.powi(t));
    let eps = T::of(hyper.eps);
    let step = T::of(lr);
    let shrink = T::of(1.0 - lr * hyper.weight_decay);
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (j, pj) in p.data_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + one_b1 * g[j];
            v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *pj = *pj * shrink - step * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Scales `grads` so that their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Real>(grads: &mut [Tensor<T>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.data())
        .map(|v| v.as_f64() * v.as_f64())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = T::of(max_norm / norm);
        for g in grads {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

/// Training and validation figures for one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    /// 1-based epoch index.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Loss and accuracy on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    /// Final-timestep prediction per sample.
    pub predictions: Vec<usize>,
}

/// Mean loss of final-timestep `logits` `(N, O)` against `labels`.
pub fn loss_on_tape<'t, T: Real>(logits: Var<'t, T>, labels: &[usize], kind: LossKind) -> Result<Var<'t, T>> {
    match kind {
        LossKind::Bce => {
            let n = labels.len();
            let targets = labels.iter().map(|&l| T::of(l as f64)).collect();
            logits.bce_with_logits(&Tensor::new([n, 1], targets)?)
        }
        LossKind::Ce => logits.cross_entropy(labels),
    }
}

fn count_correct<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> (usize, Vec<usize>) {
    let o = logits.shape()[1];
    let preds: Vec<usize> = logits.data().chunks(o).map(predict_row).collect();
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    (correct, preds)
}

/// Mean loss and accuracy of final-timestep predictions, in batches of
/// `batch_size`. The loss is averaged over samples.
pub fn evaluate<T: Real, M: Classifier<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    batch_size: usize,
    kind: LossKind,
) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Validation("cannot evaluate an empty split".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0;
    let mut predictions = Vec::with_capacity(data.len());
    for batch in data.batches(batch_size, None)? {
        let tape = Tape::new();
        let params: Vec<_> = model
            .parameters()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let logits = final_logits(model.history_on_tape(&params, tape.constant(batch.features.clone()))?)?;
        let loss = loss_on_tape(logits, &batch.labels, kind)?.value().item()?.as_f64();
        loss_sum += loss * batch.len() as f64;
        let (c, preds) = count_correct(&logits.value(), &batch.labels);
        correct += c;
        predictions.extend(preds);
    }
    Ok(Evaluation {
        loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        predictions,
    })
}

/// Training-side figures for one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochTrain {
    pub lr: f64,
    /// Mean of per-batch losses.
    pub loss: f64,
    /// Accuracy of predictions made before each batch's update.
    pub accuracy: f64,
}

/// Owns the optimizer state and the shuffling stream of one run.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    pub config: TrainConfig,
    optimizer: AdamWState<T>,
    hyper: AdamWHyper,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new<M: Classifier<T> + ?Sized>(config: TrainConfig, model: &M) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            optimizer: AdamWState::new(&model.parameters()),
            hyper: AdamWHyper::new(config.weight_decay),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            epoch: 0,
            config,
        })
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn train_epoch<M: Classifier<T> + ?Sized>(&mut self, model: &mut M, data: &Dataset<T>) -> Result<EpochTrain> {
        if data.is_empty() {
            return Err(Error::Validation("cannot train on an empty split".into()));
        }
        let lr = exponential_lr(self.config.lr, self.config.scheduler_gamma, self.epoch);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);

        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        let mut correct = 0usize;
        for (index, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let batch = data.subset(chunk)?;
            let tape = Tape::new();
            let params: Vec<_> = model.parameters().into_iter().map(|p| tape.param(p.clone())).collect();
            let logits = final_logits(model.history_on_tape(&params, tape.constant(batch.features))?)?;
            let loss = loss_on_tape(logits, &batch.labels, self.config.loss)?;
            let value = loss.value().item()?.as_f64();
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss {value} at epoch {} batch {index}",
                    self.epoch + 1
                )));
            }
            correct += count_correct(&logits.value(), &batch.labels).0;
            let mut grads = tape.backward(loss)?;
            let mut grads: Vec<_> = params
                .iter()
                .map(|&p| grads.take(p).expect("every parameter receives a gradient"))
                .collect();
            drop(tape);
            if let Some(c) = self.config.max_grad_norm {
                clip_grad_norm(&mut grads, c);
            }
            adamw_step(
                &mut model.parameters_mut(),
                &grads,
                &mut self.optimizer,
                lr,
                &self.hyper,
            )?;
            loss_sum += value;
            batches += 1;
        }
        self.epoch += 1;
        Ok(EpochTrain {
            lr,
            loss: loss_sum / batches as f64,
            accuracy: correct as f64 / data.len() as f64,
        })
    }
}

/// Trains for `config.epochs` epochs, evaluating on `val` after each one.
/// `on_epoch` sees the model after every epoch, e.g. to checkpoint it.
pub fn fit<T: Real, M: Classifier<T> + ?Sized>(
    model: &mut M,
    train: &Dataset<T>,
    val: &Dataset<T>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics, &M) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    let mut trainer = Trainer::new(config.clone(), model)?;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let t = trainer.train_epoch(model, train)?;
        let v = evaluate(model, val, config.batch_size, config.loss)?;
        let metrics = EpochMetrics {
            epoch: trainer.epoch(),
            lr: t.lr,
            train_loss: t.loss,
            train_acc: t.accuracy,
            val_loss: v.loss,
            val_acc: v.accuracy,
        };
        on_epoch(&metrics, model)?;
        history.push(metrics);
    }
    Ok(history)
}

/// Compares backpropagated gradients of the final-timestep loss with
/// central finite differences for every parameter coordinate of `model`.
pub fn gradcheck_classifier<M: Classifier<f64> + ?Sized>(
    model: &M,
    input: &Tensor<f64>,
    labels: &[usize],
    kind: LossKind,
    h: f64,
) -> Result<GradCheckReport> {
    model.check_input(input.shape())?;
    let params: Vec<Tensor<f64>> = model.parameters().into_iter().cloned().collect();
    finite_difference_gradcheck(
        |tape, vars| {
            let history = model.history_on_tape(vars, tape.constant(input.clone()))?;
            loss_on_tape(final_logits(history)?, labels, kind)
        },
        &params,
        h,
    )
}
