//! Compares backpropagation through time with central finite differences
//! on a Titanic-shaped model and a reduced digit model.
//!
//! Freshly initialized biases are zero, which puts every untouched neuron
//! exactly on the leaky-ReLU kink where a central difference is not a
//! derivative, so the biases are redrawn away from zero first.
//!
//! cargo run --release --example gradcheck

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webnn::models::{ConvSpec, MnistArch, MnistModel, TitanicModel};
use webnn::training::{gradcheck_classifier, LossKind};
use webnn::web::WebConfig;
use webnn::Tensor;

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> webnn::Result<Tensor<f64>> {
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_f64(shape.to_vec(), &data)
}

fn main() -> webnn::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let mut titanic = TitanicModel::<f64>::new(WebConfig::new(10, 8, 1, 4)?, 1)?;
    titanic.web.bias = uniform(&mut rng, &[10, 10], 0.4, 1.0)?;
    let features = uniform(&mut rng, &[3, 8], -1.0, 1.0)?;
    let report = gradcheck_classifier(&titanic, &features, &[0, 1, 1], LossKind::Bce, 1e-5)?;
    println!(
        "titanic Q=10 T=4: {} coordinates, max relative error {:.2e}",
        report.coordinates, report.max_rel_error
    );

    let convs = vec![
        ConvSpec::new(1, 2, 3, 1),
        ConvSpec::new(2, 2, 3, 1),
        ConvSpec::new(2, 1, 3, 1),
    ];
    let mut digits = MnistModel::<f64>::new(MnistArch::new(8, convs, 16, 3)?, 2)?;
    for layer in &mut digits.convs {
        layer.bias = uniform(&mut rng, &[layer.spec.out_channels], 0.1, 0.5)?;
    }
    digits.web.bias = uniform(&mut rng, &[16, 16], 0.4, 1.0)?;
    let image = uniform(&mut rng, &[1, 1, 8, 8], 0.0, 1.0)?;
    let report = gradcheck_classifier(&digits, &image, &[3], LossKind::Ce, 1e-5)?;
    println!(
        "8x8 digits Q=16 T=3: {} coordinates, max relative error {:.2e} at {:?} ({:.3e} vs {:.3e})",
        report.coordinates, report.max_rel_error, report.worst, report.analytic, report.numeric
    );
    Ok(())
}
