//! Scores desk-scale checkpoints on the held-out clouds (clean icosphere and
//! σ = 0.024 sphere) next to PCA with 18 neighbors.
//!
//! ```text
//! cargo run --release --example desk_eval -- <checkpoint>...
//! ```

use pcpnet::baselines::Method;
use pcpnet::evaluation::{evaluate, BaselineEstimator, EvalCase, Estimator, ModelEstimator};
use pcpnet::network::checkpoint;
use pcpnet::training::desk::desk_holdout;

fn main() {
    let cases: Vec<EvalCase> = desk_holdout().unwrap().into_iter().map(EvalCase::new).collect();
    let pca = BaselineEstimator { method: Method::Pca, neighbors: 18, orient: None, label: None };
    let models: Vec<ModelEstimator> = std::env::args()
        .skip(1)
        .map(|path| ModelEstimator { model: checkpoint::load::<f32>(path.as_ref()).unwrap().0, label: path })
        .collect();
    let mut estimators: Vec<&dyn Estimator> = models.iter().map(|m| m as &dyn Estimator).collect();
    estimators.push(&pca);
    let report = evaluate(&estimators, &cases, 6).unwrap();
    for r in &report.records {
        println!("{:<20} {:<40} {:>8.3}°", r.stem, r.method, r.rms_angle.unwrap_or(f64::NAN));
    }
}
