//! Accuracy of the full model as the label budget grows.

use learngraph::experiment::{benchmark_spec, run_label_sweep, DataSource, SyntheticSpec};
use learngraph::ExperimentPlan;

fn main() -> learngraph::Result<()> {
    let source = DataSource::Synthetic(SyntheticSpec {
        n_per_class: 60,
        ..benchmark_spec(5)
    });
    let data = source.load()?;
    let mut plan = ExperimentPlan::new(source);
    plan.folds = 4;
    plan.repeats = 1;

    let report = run_label_sweep(&plan, &data, &[4, 16, 64])?;
    for c in &report.cells {
        println!(
            "budget {:>3}: accuracy {:.3} ± {:.3}, AUC {:.3} ± {:.3}",
            c.budget, c.accuracy.mean, c.accuracy.std, c.auc.mean, c.auc.std
        );
    }
    Ok(())
}
