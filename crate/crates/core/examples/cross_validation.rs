//! Repeated k-fold cross-validation of the full model on a small
//! synthetic dataset, with the per-cell summary and one CSV row per run.

use learngraph::experiment::{benchmark_spec, run_cross_validation, DataSource, SyntheticSpec};
use learngraph::ExperimentPlan;

fn main() -> learngraph::Result<()> {
    let source = DataSource::Synthetic(SyntheticSpec {
        n_per_class: 60,
        ..benchmark_spec(1)
    });
    let data = source.load()?;
    let mut plan = ExperimentPlan::new(source);
    plan.label_budget = 10;
    plan.folds = 4;
    plan.repeats = 1;
    plan.master_seed = 17;

    let report = run_cross_validation(&plan, &data)?;
    for c in &report.cells {
        println!(
            "{} budget {} gamma {}: {} runs, AUC {:.3} ± {:.3}, accuracy {:.3} ± {:.3}",
            c.variant, c.budget, c.gamma, c.runs, c.auc.mean, c.auc.std, c.accuracy.mean, c.accuracy.std
        );
    }
    print!("{}", report.to_csv()?);
    Ok(())
}
