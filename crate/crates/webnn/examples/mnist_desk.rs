//! Trains the reduced conv + web digit classifier on 8,000 images and
//! validates on 2,000.
//!
//! cargo run --release --example mnist_desk -- [images.idx] [labels.idx] [epochs]

use std::time::Instant;

use webnn::data::{load_mnist_idx, prepare_mnist};
use webnn::models::{MnistArch, MnistModel};
use webnn::training::{fit, TrainConfig};

fn main() -> webnn::Result<()> {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mnist");
    let mut args = std::env::args().skip(1);
    let images = args
        .next()
        .unwrap_or_else(|| format!("{root}/mnist10k-images-idx3-ubyte"));
    let labels = args
        .next()
        .unwrap_or_else(|| format!("{root}/mnist10k-labels-idx1-ubyte"));
    let epochs = args.next().map_or(5, |s| s.parse().expect("epochs must be an integer"));

    let data = prepare_mnist(load_mnist_idx::<f32>(&images, &labels)?, Some(10_000), 0.2, 42)?;
    println!("{} train / {} validation images", data.train.len(), data.val.len());

    let arch = MnistArch::desk();
    println!(
        "conv extents {:?}, web Q={} I={} O={} T={}",
        arch.extents()?,
        arch.web.neurons,
        arch.web.inputs,
        arch.web.outputs,
        arch.web.timesteps
    );
    let mut model = MnistModel::<f32>::new(arch, 42)?;
    let config = TrainConfig {
        epochs,
        ..TrainConfig::mnist()
    };
    let start = Instant::now();
    fit(&mut model, &data.train, &data.val, &config, |m, _| {
        println!(
            "epoch {}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  ({:.0?})",
            m.epoch,
            m.train_loss,
            m.train_acc,
            m.val_loss,
            m.val_acc,
            start.elapsed()
        );
        Ok(())
    })?;
    Ok(())
}
