//! Scores ground truth, a fixed normal and two baselines on noisy analytic
//! shapes and writes report.csv, summary.csv and summary.svg.
//!
//! ```text
//! cargo run --release --example evaluate -- [out_dir]
//! ```

use std::path::PathBuf;

use pcpnet::baselines::Method;
use pcpnet::dataset::{add_gaussian_noise, analytic_shape, AnalyticShape, NOISE_LEVELS};
use pcpnet::evaluation::{emit_report, evaluate, BaselineEstimator, EvalCase, Estimator, FixedNormal, GroundTruth};
use pcpnet::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_report".into()));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = Vec::new();
    for (name, shape) in [
        ("sphere", AnalyticShape::Sphere { radius: 1.0 }),
        ("cylinder", AnalyticShape::Cylinder { radius: 1.0, height: 2.0 }),
    ] {
        let clean = analytic_shape(&shape, 20_000, name, &mut rng).unwrap();
        for level in NOISE_LEVELS {
            let mut noisy = add_gaussian_noise(&clean, level, &mut rng).unwrap();
            noisy.name = format!("{name}_noise_{level}");
            cases.push(EvalCase::new(noisy));
        }
        cases.push(EvalCase::new(clean));
    }
    let pca = BaselineEstimator { method: Method::Pca, neighbors: 18, orient: None, label: None };
    let jet = BaselineEstimator { method: Method::Jet, neighbors: 112, orient: Some(6), label: None };
    let fixed = FixedNormal(Vec3::z());
    let estimators: [&dyn Estimator; 4] = [&GroundTruth, &fixed, &pca, &jet];
    let report = evaluate(&estimators, &cases, 1).unwrap();
    emit_report(&report, &out).unwrap();
    for row in report.summary.iter().filter(|r| r.metric == "rms_angle_deg") {
        println!("{:<10} {:<8} {:>8.3}°", row.method, row.category, row.value);
    }
    println!("report written to {}", out.display());
}
