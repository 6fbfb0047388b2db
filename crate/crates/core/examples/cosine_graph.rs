//! Builds the cosine-similarity graph of a few feature vectors and its
//! renormalized form.

use learngraph::{GraphPair, Matrix};

fn show(name: &str, m: &Matrix) {
    println!("{name}:");
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:7.4}")).collect();
        println!("  [{}]", row.join(" "));
    }
}

fn main() -> learngraph::Result<()> {
    let x = Matrix::from_rows(&[
        [1.0, 0.0, 0.2],
        [0.9, 0.1, 0.0],
        [0.1, 1.0, 0.3],
        [0.0, 0.8, 0.5],
    ]);
    let g = GraphPair::from_features(&x)?;
    show("A (cosine similarities)", &g.raw);
    show("degrees of A + I", &g.degree);
    show("normalized adjacency", &g.normalized);

    // An all-zero graph normalizes to the identity.
    let empty = GraphPair::from_raw(&Matrix::zeros(2, 2))?;
    show("normalized zero graph", &empty.normalized);

    // Two rows opposing the first cancel its degree, which is refused.
    let bad = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]]);
    if let Err(e) = GraphPair::from_features(&bad) {
        println!("opposed rows: {e}");
    }
    Ok(())
}
