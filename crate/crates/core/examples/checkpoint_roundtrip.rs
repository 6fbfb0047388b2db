//! Saves a model to a versioned JSON checkpoint and loads it back.

use learngraph::model::{forward, Mode};
use learngraph::{checkpoint, Architecture, Matrix, ModelParams};

fn main() -> learngraph::Result<()> {
    let params = ModelParams::init(&Architecture::tiny(3), 7)?;
    let path = std::env::temp_dir().join("learngraph-example-checkpoint.json");
    checkpoint::save(&path, &params)?;
    let loaded = checkpoint::load(&path)?;
    println!("saved {} scalars to {}", params.num_scalars(), path.display());
    println!("round trip exact: {}", loaded == params);

    let x = Matrix::from_rows(&[[1.0, 2.0, 0.5], [2.0, 1.0, 1.5], [1.5, 1.5, 1.0]]);
    let a = forward(&params, &x, Mode::Eval, 0)?.probabilities;
    let b = forward(&loaded, &x, Mode::Eval, 0)?.probabilities;
    println!("same predictions: {}", a == b);

    let text = checkpoint::to_json(&params)?;
    let tampered = text.replacen("\"version\": 1", "\"version\": 99", 1);
    match checkpoint::from_json(&tampered) {
        Ok(_) => println!("tampered checkpoint accepted"),
        Err(e) => println!("tampered checkpoint: {e}"),
    }
    let _ = std::fs::remove_file(&path);
    Ok(())
}
