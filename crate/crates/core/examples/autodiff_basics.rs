//! Records `f(W) = sum(tanh(X W))` on a tape, differentiates it and compares
//! one gradient entry against a central difference.

use learngraph::{Matrix, Tape};

fn loss(x: &Matrix, w: &Matrix) -> f64 {
    x.matmul(w).unwrap().map(f64::tanh).sum()
}

fn main() -> learngraph::Result<()> {
    let x = Matrix::from_rows(&[[0.5, -1.0, 2.0], [1.5, 0.25, -0.75]]);
    let w = Matrix::from_rows(&[[0.1, 0.2], [-0.3, 0.4], [0.05, -0.6]]);

    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let wv = tape.param(w.clone());
    let h = tape.matmul(xv, wv)?;
    let t = tape.tanh(h);
    let f = tape.sum(t);
    let grads = tape.backward(f)?;
    let dw = grads.get(wv).expect("W is a parameter");

    println!("f(W) = {:.6}", tape.value(f).as_slice()[0]);
    println!("df/dW =");
    for r in 0..dw.rows() {
        println!("  {:?}", dw.row(r));
    }

    let h = 1e-6;
    let (mut plus, mut minus) = (w.clone(), w.clone());
    plus.set(2, 1, w.get(2, 1) + h);
    minus.set(2, 1, w.get(2, 1) - h);
    let numeric = (loss(&x, &plus) - loss(&x, &minus)) / (2.0 * h);
    println!(
        "entry (2, 1): tape {:.10}, central difference {:.10}",
        dw.get(2, 1),
        numeric
    );
    Ok(())
}
