//! Builds a small web layer, injects an input and prints the state matrix
//! and readout after each timestep.
//!
//! cargo run --example web_layer

use webnn::web::{inject_input, readout, step_vectorized, WebConfig, WebParams, WebState};
use webnn::Tensor;

fn print_state(state: &WebState<f64>) {
    let q = state.neurons();
    for row in state.tensor().data().chunks(q) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:7.3}")).collect();
        println!("  {}", cells.join(" "));
    }
}

fn main() -> webnn::Result<()> {
    // Neurons 0..2 take the input, neuron 4 is the output.
    let config = WebConfig::new(5, 2, 1, 3)?;
    let params = WebParams::<f64>::init(&config, 7);
    let x = Tensor::new([1, 2], vec![0.5, -1.0])?;

    let mut state = WebState::zeros(1, config.neurons);
    for t in 0..config.timesteps {
        state = inject_input(&state, &x, &config)?;
        state = step_vectorized(&state, &params, &config)?;
        println!("t = {t}, readout {:.4}", readout(&state, &config)?.data()[0]);
        print_state(&state);
    }
    Ok(())
}
