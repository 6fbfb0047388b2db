//! Trains the full model on a small two-cluster dataset with a handful of
//! labels and reports metrics on the unlabeled nodes.

use learngraph::experiment::{benchmark_spec, generate_synthetic, sample_labeled, SyntheticSpec};
use learngraph::model::{forward, Mode};
use learngraph::training::{train_from, TrainConfig};
use learngraph::{metrics, Architecture, ModelParams};

fn main() -> learngraph::Result<()> {
    let spec = SyntheticSpec {
        n_per_class: 60,
        ..benchmark_spec(2)
    };
    let (features, truth) = generate_synthetic(&spec)?;
    let pool: Vec<usize> = (0..truth.len()).collect();
    let labeled = sample_labeled(&pool, &truth, 12, 9)?;
    let labels = truth.with_labeled(&labeled);

    let config = TrainConfig {
        seed: 4,
        ..TrainConfig::default()
    };
    let arch = Architecture::standard(spec.dim);
    let init = ModelParams::init(&arch, config.init_seed())?;
    let outcome = train_from(init, &features, &labels, &config, |view| {
        if view.epoch % 50 == 0 {
            let min_degree = view.degree.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
            println!("epoch {:>3}  loss {:8.4}  min degree {:7.2}", view.epoch, view.loss, min_degree);
        }
    })?;

    let out = forward(&outcome.params, &features, Mode::Eval, 0)?;
    let unlabeled: Vec<bool> = (0..labels.len()).map(|i| !labels.is_labeled(i)).collect();
    let report = metrics::evaluate(&out.probabilities, &truth, &unlabeled)?;
    println!(
        "{} unlabeled nodes: AUC {:.4}, accuracy {:.4}, sensitivity {:.4}, specificity {:.4}",
        report.n_eval,
        report.auc,
        report.accuracy,
        report.sensitivity.unwrap_or(f64::NAN),
        report.specificity.unwrap_or(f64::NAN)
    );
    Ok(())
}
