//! Trains the 15-neuron web classifier on the Titanic passenger list.
//!
//! cargo run --release --example titanic -- [path/to/train.csv] [seed]

use std::time::Instant;

use webnn::data::{load_titanic_csv, prepare_titanic};
use webnn::models::TitanicModel;
use webnn::training::{fit, TrainConfig};
use webnn::web::WebConfig;

fn main() -> webnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/titanic/train.csv").into());
    let seed: u64 = args.next().map_or(42, |s| s.parse().expect("seed must be an integer"));

    let records = load_titanic_csv(&path)?;
    let (data, _stats) = prepare_titanic::<f32>(&records, 0.2, seed, None)?;
    println!("{} train / {} validation passengers", data.train.len(), data.val.len());

    let mut model = TitanicModel::<f32>::new(WebConfig::titanic(), seed)?;
    let config = TrainConfig {
        seed,
        ..TrainConfig::titanic()
    };
    let start = Instant::now();
    fit(&mut model, &data.train, &data.val, &config, |m, _| {
        println!(
            "epoch {:2}  lr {:.5}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            m.epoch, m.lr, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
        Ok(())
    })?;
    println!("trained in {:.1?}", start.elapsed());
    Ok(())
}
