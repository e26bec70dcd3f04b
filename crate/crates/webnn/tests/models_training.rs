mod common;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webnn::data::Dataset;
use webnn::models::{
    final_logits, final_predictions, predict_history, AnyModel, Checkpoint, Classifier, MnistArch, MnistModel,
    TitanicModel,
};
use webnn::training::{
    adamw_step, evaluate, fit, gradcheck_classifier, loss_on_tape, AdamWHyper, AdamWState, LossKind, TrainConfig,
    Trainer,
};
use webnn::web::{WebConfig, WebParams};
use webnn::{Error, Tape, Tensor};

fn toy_titanic(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = common::uniform(&mut rng, &[n, 8], 1.0);
    let labels = (0..n).map(|_| rng.random_range(0..2)).collect();
    Dataset::new(features, labels).unwrap()
}

fn small_titanic(seed: u64) -> TitanicModel<f64> {
    TitanicModel::new(WebConfig::new(12, 8, 1, 4).unwrap(), seed).unwrap()
}

fn toy_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        ..TrainConfig::titanic()
    }
}

#[test]
fn titanic_zero_parameters_give_one_half() {
    let config = WebConfig::titanic();
    let model = TitanicModel::from_params(config, WebParams::<f64>::zeros(&config)).unwrap();
    let out = model.forward(&toy_titanic(3, 0).features).unwrap();
    assert_eq!(out.probability.shape(), &[3, 1]);
    assert_eq!(out.history.shape(), &[3, 30, 1]);
    assert!(out.probability.data().iter().all(|&p| p == 0.5));
}

#[test]
fn mnist_presets_and_history_shape() {
    assert_eq!(MnistArch::paper().extents().unwrap(), vec![26, 24, 22]);
    assert_eq!(MnistArch::paper().web.inputs, 484);
    assert_eq!(MnistArch::desk().extents().unwrap(), vec![13, 11, 9]);
    let model = MnistModel::<f32>::new(MnistArch::desk(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let images = common::uniform::<f32>(&mut rng, &[2, 1, 28, 28], 1.0);
    assert_eq!(model.forward(&images).unwrap().shape(), &[2, 5, 10]);
    assert!(model.forward(&Tensor::zeros([2, 1, 27, 27])).is_err());
}

#[test]
fn mnist_arch_with_wrong_width_fails_at_construction() {
    let mut arch = MnistArch::desk();
    arch.web = WebConfig::new(100, 80, 10, 5).unwrap();
    assert!(MnistModel::<f32>::from_parts(arch.clone(), vec![], WebParams::zeros(&arch.web)).is_err());
    assert!(MnistModel::<f32>::new(arch, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn final_trace_entry_is_last_argmax(n in 1usize..4, t in 1usize..6, o in 2usize..11, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let history = common::uniform::<f64>(&mut rng, &[n, t, o], 3.0);
        let traces = predict_history(&history).unwrap();
        let finals = final_predictions(&history).unwrap();
        for (i, trace) in traces.iter().enumerate() {
            prop_assert_eq!(trace.len(), t);
            let last = &history.data()[(i * t + t - 1) * o..(i * t + t) * o];
            let best = (0..o).fold(0, |b, k| if last[k] > last[b] { k } else { b });
            prop_assert_eq!(trace[t - 1], best);
            prop_assert_eq!(finals[i], best);
        }
    }

    #[test]
    fn binary_prediction_is_invariant_under_monotone_maps(logit in -20.0f64..20.0) {
        let history = Tensor::new([1, 1, 1], vec![logit]).unwrap();
        let class = final_predictions(&history).unwrap()[0];
        let probability = 1.0 / (1.0 + (-logit).exp());
        prop_assert_eq!(class, usize::from(probability >= 0.5));
        let cubed = Tensor::new([1, 1, 1], vec![logit.powi(3)]).unwrap();
        prop_assert_eq!(class, final_predictions(&cubed).unwrap()[0]);
        let shrunk = Tensor::new([1, 1, 1], vec![logit.atan()]).unwrap();
        prop_assert_eq!(class, final_predictions(&shrunk).unwrap()[0]);
    }
}

#[test]
fn shrunk_mnist_gradients_reach_conv_kernels() {
    let (model, image) = common::shrunk_mnist_instance(0);
    let report = gradcheck_classifier(&model, &image, &[3], LossKind::Ce, 1e-5).unwrap();
    assert!(report.max_rel_error <= 1e-4, "{report:?}");

    let tape = Tape::new();
    let params: Vec<_> = model.parameters().into_iter().map(|p| tape.param(p.clone())).collect();
    let logits = final_logits(model.history_on_tape(&params, tape.constant(image)).unwrap()).unwrap();
    let grads = tape
        .backward(loss_on_tape(logits, &[3], LossKind::Ce).unwrap())
        .unwrap();
    for &kernel in &params[..3] {
        assert!(grads.get(kernel).unwrap().data().iter().any(|&g| g.abs() > 1e-6));
    }
}

/// Central differences over many instances. Coordinates whose true
/// gradient is within ~1e−7 of zero measure f64 roundoff of the loss
/// (about 1e−11 absolute at h = 1e−5), so the bound here is mixed.
#[test]
fn shrunk_mnist_gradients_match_across_instances() {
    let h = 1e-5;
    for seed in 1..9 {
        let (model, image) = common::shrunk_mnist_instance(seed);
        let label = [(seed % 10) as usize];
        let loss = |m: &MnistModel<f64>| {
            let tape = Tape::new();
            let params: Vec<_> = m.parameters().into_iter().map(|p| tape.constant(p.clone())).collect();
            let logits = final_logits(m.history_on_tape(&params, tape.constant(image.clone())).unwrap()).unwrap();
            loss_on_tape(logits, &label, LossKind::Ce)
                .unwrap()
                .value()
                .item()
                .unwrap()
        };
        let tape = Tape::new();
        let params: Vec<_> = model.parameters().into_iter().map(|p| tape.param(p.clone())).collect();
        let logits = final_logits(model.history_on_tape(&params, tape.constant(image.clone())).unwrap()).unwrap();
        let grads = tape
            .backward(loss_on_tape(logits, &label, LossKind::Ce).unwrap())
            .unwrap();
        let analytic: Vec<Vec<f64>> = params.iter().map(|&p| grads.get(p).unwrap().data().to_vec()).collect();

        let mut probe = model.clone();
        for (k, a) in analytic.iter().enumerate() {
            for (j, &a) in a.iter().enumerate() {
                let orig = probe.parameters()[k].data()[j];
                probe.parameters_mut()[k].data_mut()[j] = orig + h;
                let up = loss(&probe);
                probe.parameters_mut()[k].data_mut()[j] = orig - h;
                let down = loss(&probe);
                probe.parameters_mut()[k].data_mut()[j] = orig;
                let numeric = (up - down) / (2.0 * h);
                assert!(
                    (a - numeric).abs() <= 1e-4 * a.abs().max(numeric.abs()) + 1e-9,
                    "seed {seed} param {k}[{j}]: {a} vs {numeric}"
                );
            }
        }
    }
}

#[test]
fn checkpoint_file_roundtrip_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.wnn");
    let model = AnyModel::Mnist(MnistModel::new(MnistArch::desk(), 7).unwrap());
    model
        .to_checkpoint(serde_json::json!({"note": "x"}))
        .save(&path)
        .unwrap();
    let ckpt = Checkpoint::load(&path).unwrap();
    assert_eq!(ckpt.run["note"], "x");
    let back = AnyModel::from_checkpoint(ckpt).unwrap();
    assert_eq!(back.named_tensors(), model.named_tensors());

    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
}

#[test]
fn zero_learning_rate_leaves_parameters_bit_identical() {
    let data = toy_titanic(20, 1);
    let mut model = small_titanic(2);
    let before = model.clone();
    let config = TrainConfig {
        lr: 0.0,
        ..toy_config(1)
    };
    Trainer::new(config, &model)
        .unwrap()
        .train_epoch(&mut model, &data)
        .unwrap();
    assert_eq!(model, before);
}

#[test]
fn seeded_training_is_reproducible() {
    let (train, val) = (toy_titanic(30, 3), toy_titanic(10, 4));
    let run = || {
        let mut model = small_titanic(5);
        let metrics = fit(&mut model, &train, &val, &toy_config(3), |_, _| Ok(())).unwrap();
        (metrics, model)
    };
    assert_eq!(run(), run());
}

/// Titanic-shaped samples labelled by the sign of a hidden linear rule.
fn rule_titanic(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = common::uniform(&mut rng, &[n, 8], 1.0);
    let rule = common::uniform::<f64>(&mut rng, &[8], 1.0);
    let labels = features
        .data()
        .chunks(8)
        .map(|x| usize::from(x.iter().zip(rule.data()).map(|(a, b)| a * b).sum::<f64>() > 0.0))
        .collect();
    Dataset::new(features, labels).unwrap()
}

#[test]
fn sixteen_samples_are_memorized() {
    let data = rule_titanic(16, 8);
    let mut model = TitanicModel::<f64>::new(WebConfig::titanic(), 42).unwrap();
    let config = TrainConfig {
        epochs: 200,
        batch_size: 16,
        weight_decay: 0.0,
        scheduler_gamma: 1.0,
        ..TrainConfig::titanic()
    };
    let metrics = fit(&mut model, &data, &data, &config, |_, _| Ok(())).unwrap();
    let best = metrics.iter().map(|m| m.val_loss).fold(f64::INFINITY, f64::min);
    assert!(best < 0.05, "best loss {best}");
}

#[test]
fn evaluate_is_pure() {
    let data = toy_titanic(25, 9);
    let model = small_titanic(10);
    let a = evaluate(&model, &data, 7, LossKind::Bce).unwrap();
    assert_eq!(a, evaluate(&model, &data, 7, LossKind::Bce).unwrap());
    assert_eq!(a.predictions.len(), 25);
}

#[test]
fn constant_negative_logit_scores_the_majority_fraction() {
    let config = WebConfig::new(12, 8, 1, 4).unwrap();
    let web = WebParams::from_tensors(&config, Tensor::zeros([12, 12, 12]), Tensor::full([12, 12], -1.0)).unwrap();
    let model = TitanicModel::from_params(config, web).unwrap();
    let data = toy_titanic(40, 11);
    let zeros = data.labels.iter().filter(|&&l| l == 0).count();
    let e = evaluate(&model, &data, 16, LossKind::Bce).unwrap();
    assert!(e.predictions.iter().all(|&p| p == 0));
    assert_relative_eq!(e.accuracy, zeros as f64 / 40.0);
}

#[test]
fn two_separable_points_reach_full_accuracy() {
    let features = Tensor::new([2, 8], [vec![1.0; 8], vec![-1.0; 8]].concat()).unwrap();
    let data = Dataset::new(features, vec![1, 0]).unwrap();
    let mut model = small_titanic(12);
    let config = TrainConfig {
        epochs: 60,
        batch_size: 2,
        ..TrainConfig::titanic()
    };
    fit(&mut model, &data, &data, &config, |_, _| Ok(())).unwrap();
    assert_eq!(evaluate(&model, &data, 2, LossKind::Bce).unwrap().accuracy, 1.0);
}

#[test]
fn empty_split_is_a_validation_error() {
    let empty = Dataset::new(Tensor::<f64>::zeros([0, 8]), vec![]).unwrap();
    assert!(matches!(
        evaluate(&small_titanic(0), &empty, 4, LossKind::Bce),
        Err(Error::Validation(_))
    ));
}

/// Textbook Adam, written out independently.
fn adam_oracle(p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], t: i32, lr: f64) {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    for j in 0..p.len() {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
        let m_hat = m[j] / (1.0 - b1.powi(t));
        let v_hat = v[j] / (1.0 - b2.powi(t));
        p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adamw_without_decay_is_adam(seed in any::<u64>(), lr in 1e-4f64..0.1, steps in 1i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = common::uniform::<f64>(&mut rng, &[6], 1.0);
        let mut want = p.data().to_vec();
        let (mut m, mut v) = (vec![0.0; 6], vec![0.0; 6]);
        let mut state = AdamWState::new(&[&p]);
        for t in 1..=steps {
            let g = common::uniform::<f64>(&mut rng, &[6], 2.0);
            adamw_step(&mut [&mut p], std::slice::from_ref(&g), &mut state, lr, &AdamWHyper::new(0.0)).unwrap();
            adam_oracle(&mut want, &mut m, &mut v, g.data(), t, lr);
            prop_assert!(state.v[0].data().iter().all(|&x| x >= 0.0));
        }
        for (a, b) in p.data().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
