//! Trains the Titanic model briefly, then prints how the predicted class
//! of each validation passenger evolves over the timesteps.
//!
//! cargo run --release --example history -- [path/to/train.csv]

use webnn::data::{load_titanic_csv, prepare_titanic};
use webnn::models::{predict_history, Classifier, TitanicModel};
use webnn::training::{fit, TrainConfig};
use webnn::web::WebConfig;

fn main() -> webnn::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/titanic/train.csv").into());
    let (data, _) = prepare_titanic::<f32>(&load_titanic_csv(&path)?, 0.2, 42, None)?;
    let mut model = TitanicModel::<f32>::new(WebConfig::titanic(), 42)?;
    let config = TrainConfig {
        epochs: 10,
        ..TrainConfig::titanic()
    };
    fit(&mut model, &data.train, &data.val, &config, |_, _| Ok(()))?;

    let history = model.history(&data.val.features)?;
    let traces = predict_history(&history)?;
    let changing: Vec<usize> = (0..traces.len())
        .filter(|&i| traces[i].windows(2).any(|w| w[0] != w[1]))
        .collect();
    println!(
        "{} of {} validation traces change over time",
        changing.len(),
        traces.len()
    );
    for &i in changing.iter().take(5) {
        let trace: String = traces[i].iter().map(|c| c.to_string()).collect();
        println!("passenger {i:3}  label {}  trace {trace}", data.val.labels[i]);
    }
    Ok(())
}
