mod common;

use common::{gradcheck_params, negative_activations, random_params, uniform};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use webnn::tensor::finite_difference_gradcheck;
use webnn::web::{
    forward, forward_on_tape, inject_input, params_on_tape, readout, step_naive, step_vectorized, InputSeries,
    StepKind, WebConfig, WebParams, WebState, WebVars,
};
use webnn::{Real, Tape, Tensor};

fn max_step_diff<T: Real>(q: usize, n: usize, seed: u64) -> f64 {
    let config = WebConfig::new(q, 1, 1, 1).unwrap();
    let params = random_params::<T>(&config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let state = WebState::new(uniform(&mut rng, &[n, q, q], 1.0)).unwrap();
    let a = step_naive(&state, &params, &config).unwrap();
    let b = step_vectorized(&state, &params, &config).unwrap();
    a.tensor().max_abs_diff(b.tensor()).unwrap().as_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn naive_matches_vectorized(q in 2usize..=24, n in 1usize..=8, seed in any::<u64>()) {
        prop_assert!(max_step_diff::<f64>(q, n, seed) <= 1e-10);
        prop_assert!(max_step_diff::<f32>(q, n, seed) <= 1e-5);
    }

    #[test]
    fn zero_state_is_a_fixpoint_for_any_weights(q in 2usize..=12, t in 1usize..=6, seed in any::<u64>()) {
        let config = WebConfig::new(q, 1, 1, t).unwrap();
        let params = WebParams::<f64>::init(&config, seed);
        let inputs = InputSeries::constant(&Tensor::zeros([3, 1])).unwrap();
        for kind in [StepKind::Naive, StepKind::Vectorized] {
            let y = forward(&params, &config, &inputs, kind).unwrap();
            prop_assert!(y.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn history_shape_is_n_t_o(
        (q, i, o) in (2usize..=12).prop_flat_map(|q| (Just(q), 1..q)).prop_flat_map(|(q, i)| (Just(q), Just(i), 1..=q - i)),
        t in 1usize..=6,
        n in 1usize..=4,
        stretched in any::<bool>(),
    ) {
        let config = WebConfig::new(q, i, o, t).unwrap();
        let params = WebParams::<f32>::init(&config, 1);
        let steps = if stretched { 1 } else { t };
        let inputs = InputSeries::new(Tensor::full([n, steps, i], 0.5f32)).unwrap();
        let y = forward(&params, &config, &inputs, StepKind::Vectorized).unwrap();
        prop_assert_eq!(y.shape(), &[n, t, o]);
    }

    #[test]
    fn too_few_neurons_rejected(i in 1usize..10, o in 1usize..10, short in 1usize..10) {
        let q = (i + o).saturating_sub(short);
        prop_assert!(WebConfig::new(q, i, o, 1).is_err());
    }

    #[test]
    fn injecting_x_then_minus_x_restores_state(q in 2usize..=10, n in 1usize..=4, seed in any::<u64>()) {
        let config = WebConfig::new(q, q - 1, 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = WebState::new(uniform::<f64>(&mut rng, &[n, q, q], 1.0)).unwrap();
        let x = uniform::<f64>(&mut rng, &[n, q - 1], 1.0);
        let back = inject_input(&inject_input(&state, &x, &config).unwrap(), &x.map(|v| -v), &config).unwrap();
        prop_assert!(back.tensor().max_abs_diff(state.tensor()).unwrap() <= 1e-15);
    }

    #[test]
    fn init_is_reproducible(q in 1usize..=10, seed in any::<u64>()) {
        let config = WebConfig::new(q.max(2), 1, 1, 1).unwrap();
        prop_assert_eq!(WebParams::<f32>::init(&config, seed), WebParams::<f32>::init(&config, seed));
    }
}

#[test]
fn rows_hold_each_neurons_latest_output() {
    let config = WebConfig::new(5, 2, 1, 1).unwrap();
    let params = random_params::<f64>(&config, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let state = WebState::new(uniform(&mut rng, &[2, 5, 5], 1.0)).unwrap();
    let next = step_vectorized(&state, &params, &config).unwrap();
    let (s, w, b) = (state.tensor(), &params.weights, &params.bias);
    for n in 0..2 {
        for i in 0..5 {
            for j in 0..5 {
                let z: f64 = b.at(&[i, j]) + (0..5).map(|r| w.at(&[i, j, r]) * s.at(&[n, r, i])).sum::<f64>();
                let want = if z >= 0.0 { z } else { 0.01 * z };
                assert!((next.tensor().at(&[n, i, j]) - want).abs() < 1e-14);
            }
        }
    }
    assert_eq!(readout(&next, &config).unwrap().shape(), &[2, 1]);
}

#[test]
fn taped_forward_matches_plain_forward() {
    for (ti, kind) in [
        (1, StepKind::Vectorized),
        (4, StepKind::Naive),
        (4, StepKind::Vectorized),
    ] {
        let config = WebConfig::new(7, 3, 2, 4).unwrap();
        let params = random_params::<f64>(&config, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = uniform::<f64>(&mut rng, &[3, ti, 3], 1.0);
        let plain = forward(&params, &config, &InputSeries::new(x.clone()).unwrap(), kind).unwrap();
        let tape = Tape::new();
        let taped = forward_on_tape(params_on_tape(&tape, &params), &config, tape.constant(x), kind).unwrap();
        assert!(taped.value().max_abs_diff(&plain).unwrap() <= 1e-12, "{kind:?}");
    }
}

#[test]
fn input_series_length_must_be_one_or_t() {
    let config = WebConfig::new(4, 1, 1, 3).unwrap();
    let params = WebParams::<f32>::init(&config, 0);
    let inputs = InputSeries::new(Tensor::zeros([1, 2, 1])).unwrap();
    assert!(forward(&params, &config, &inputs, StepKind::Vectorized).is_err());
}

/// Returns the worst relative error and the number of negative
/// pre-activations in the rollout.
fn bptt_gradcheck(config: &WebConfig, ti: usize, kind: StepKind, seed: u64) -> (f64, usize) {
    let params = gradcheck_params(config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let x = uniform::<f64>(&mut rng, &[2, ti, config.inputs], 1.0);
    let mix = uniform::<f64>(&mut rng, &[2, config.timesteps, config.outputs], 1.0);
    let negatives = negative_activations(&params, config, &x);
    let report = finite_difference_gradcheck(
        |tape, v| {
            let web = WebVars {
                weights: v[0],
                bias: v[1],
            };
            let y = forward_on_tape(web, config, v[2], kind)?;
            Ok(y.mul(tape.constant(mix.clone()))?.sum())
        },
        &[params.weights, params.bias, x],
        1e-5,
    )
    .unwrap();
    (report.max_rel_error, negatives)
}

#[test]
fn bptt_matches_finite_differences() {
    let config = WebConfig::new(6, 2, 1, 4).unwrap();
    for seed in 0..4 {
        for (ti, kind) in [
            (1, StepKind::Vectorized),
            (4, StepKind::Vectorized),
            (4, StepKind::Naive),
        ] {
            let (err, negatives) = bptt_gradcheck(&config, ti, kind, seed);
            assert!(err <= 1e-4, "seed {seed} T_i={ti} {kind:?}: {err}");
            assert!(negatives > 0, "seed {seed}: leaky branch never exercised");
        }
    }
    let q4 = WebConfig::new(4, 2, 1, 3).unwrap();
    assert!(bptt_gradcheck(&q4, 1, StepKind::Vectorized, 6).0 <= 1e-4);
}

#[test]
fn two_neuron_three_step_unroll_is_tight() {
    let config = WebConfig::new(2, 1, 1, 3).unwrap();
    let params = random_params::<f64>(&config, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = uniform::<f64>(&mut rng, &[2, 3, 1], 1.0);
    let report = finite_difference_gradcheck(
        |_, v| {
            let web = WebVars {
                weights: v[0],
                bias: v[1],
            };
            Ok(forward_on_tape(web, &config, v[2], StepKind::Vectorized)?.sum())
        },
        &[params.weights, params.bias, x],
        1e-5,
    )
    .unwrap();
    assert!(report.max_rel_error <= 1e-6, "{report:?}");
}
