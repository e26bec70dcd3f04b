//! Times the per-neuron loop against the batched matrix update over a
//! range of neuron counts.
//!
//! cargo run --release --example bench

use webnn::web::{bench_step, WebConfig};

fn main() -> webnn::Result<()> {
    println!(
        "{:>5} {:>12} {:>14} {:>7} {:>10}",
        "Q", "naive ms", "vectorized ms", "ratio", "max diff"
    );
    for q in [10, 25, 50, 100, 200] {
        let r = bench_step(&WebConfig::new(q, 1, 1, 5)?, 64, 5, 0)?;
        println!(
            "{:>5} {:>12.3} {:>14.3} {:>7.2} {:>10.2e}",
            q, r.naive_ms, r.vectorized_ms, r.ratio, r.max_abs_diff
        );
    }
    Ok(())
}
