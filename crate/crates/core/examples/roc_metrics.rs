//! Binary metrics from class-1 probabilities: AUC two ways, the ROC curve,
//! and the confusion counts at the 0.5 threshold.

use learngraph::metrics::{self, auc_mann_whitney, auc_trapezoid, roc_curve};
use learngraph::training::LabelSet;
use learngraph::Matrix;

fn main() -> learngraph::Result<()> {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let positive = [false, false, true, true];
    let roc = roc_curve(&scores, &positive)?;
    println!("pair-count AUC {}", auc_mann_whitney(&scores, &positive)?);
    println!("trapezoid AUC  {}", auc_trapezoid(&roc));
    println!("ROC points {roc:?}");

    let probs = Matrix::from_rows(&[[0.1, 0.9], [0.55, 0.45], [0.5, 0.5], [0.8, 0.2], [0.3, 0.7]]);
    let labels = LabelSet::fully_labeled(vec![1, 1, 0, 0, 0]);
    let mask = [true; 5];
    let c = metrics::confusion(&probs, &labels, &mask, metrics::DECISION_THRESHOLD)?;
    println!("confusion {c:?}");
    let report = metrics::evaluate(&probs, &labels, &mask)?;
    println!("{}", report.to_json()?);
    print!("{}", report.roc_csv());
    Ok(())
}
