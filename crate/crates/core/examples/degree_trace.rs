//! Tracks the smallest renormalization degree of the learned graph while
//! training on the benchmark, to see how close a run comes to a degenerate
//! degree.
//!
//! Usage: `degree_trace [offset] [gamma] [separation]`, defaulting to the
//! benchmark offset and separation with no penalty.

use learngraph::experiment::{benchmark_spec, generate_synthetic, sample_labeled};
use learngraph::training::{train_from, TrainConfig};
use learngraph::{Architecture, ModelParams};

fn arg(i: usize, default: f64) -> f64 {
    std::env::args()
        .nth(i)
        .map_or(default, |a| a.parse().expect("numeric argument"))
}

fn main() {
    let base = benchmark_spec(0);
    let spec = learngraph::SyntheticSpec {
        offset: arg(1, base.offset),
        separation: arg(3, base.separation),
        ..base
    };
    let gamma = arg(2, 0.0);
    let (features, truth) = generate_synthetic(&spec).expect("valid spec");
    let pool: Vec<usize> = (0..truth.len()).collect();
    let labels = truth.with_labeled(&sample_labeled(&pool, &truth, 50, 1).expect("budget fits"));
    let config = TrainConfig {
        gamma,
        seed: 1,
        ..TrainConfig::default()
    };
    let params = ModelParams::init(&Architecture::standard(spec.dim), config.init_seed()).unwrap();
    println!(
        "separation {} offset {} gamma {gamma}",
        spec.separation, spec.offset
    );
    println!("epoch,loss,min_degree,mean_degree");
    let result = train_from(params, &features, &labels, &config, |view| {
        if view.epoch % 10 == 0 {
            let d = view.degree.as_slice();
            let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            println!("{},{:.4},{min:.3},{mean:.3}", view.epoch, view.loss);
        }
    });
    match result {
        Ok(out) => println!("finished, final loss {:.4}", out.loss_history.last().unwrap()),
        Err(e) => println!("stopped: {e}"),
    }
}
