//! Saves a model to the binary checkpoint format, reloads it and checks
//! that the reloaded model predicts identically.
//!
//! cargo run --example checkpoint

use webnn::models::{AnyModel, Checkpoint, MnistArch, MnistModel};
use webnn::Tensor;

fn main() -> webnn::Result<()> {
    let model = AnyModel::Mnist(MnistModel::new(MnistArch::desk(), 3)?);
    let path = std::env::temp_dir().join("webnn-example.wnn");
    model
        .to_checkpoint(serde_json::json!({ "note": "example" }))
        .save(&path)?;

    let ckpt = Checkpoint::load(&path)?;
    for (name, tensor) in &ckpt.tensors {
        println!("{name:>16} {:?}", tensor.shape());
    }
    let reloaded = AnyModel::from_checkpoint(ckpt)?;

    let images = Tensor::<f32>::full([2, 1, 28, 28], 0.5);
    let a = model.classifier().history(&images)?;
    let b = reloaded.classifier().history(&images)?;
    println!(
        "{} bytes, max history difference after reload {}",
        std::fs::metadata(&path).map_or(0, |m| m.len()),
        a.max_abs_diff(&b)?
    );
    std::fs::remove_file(&path).ok();
    Ok(())
}
