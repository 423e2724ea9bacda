//! PCA and jet estimates on a noisy sphere at the three named scales, with
//! and without MST orientation.
//!
//! ```text
//! cargo run --release --example baselines
//! ```

use pcpnet::baselines::{baseline_estimate, orient_output, Method, Scale};
use pcpnet::dataset::{add_gaussian_noise, analytic_shape, AnalyticShape};
use pcpnet::evaluation::{flip_fraction, rms_angle_error};
use pcpnet::{SpatialIndex, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let clean = analytic_shape(&AnalyticShape::Sphere { radius: 1.0 }, 20_000, "sphere", &mut rng).unwrap();
    let cloud = add_gaussian_noise(&clean, 0.006, &mut rng).unwrap();
    let index = SpatialIndex::build(&cloud).unwrap();
    let queries: Vec<usize> = (0..cloud.len()).step_by(10).collect();
    let gt: Vec<Vec3> = queries.iter().map(|&q| cloud.gt_normals.as_ref().unwrap()[q]).collect();
    println!("{:<6} {:<7} {:>10} {:>10} {:>8} {:>10}", "method", "scale", "unoriented", "oriented", "flips", "mean κ1");
    for method in [Method::Pca, Method::Jet] {
        for scale in [Scale::Small, Scale::Medium, Scale::Large] {
            let mut out = baseline_estimate(&cloud, &index, method, scale.neighbors(), &queries).unwrap();
            let normals = |o: &pcpnet::baselines::BaselineOutput| -> Vec<Vec3> {
                o.estimates.iter().map(|e| e.unwrap().normal.unwrap()).collect()
            };
            let unoriented = rms_angle_error(&normals(&out), &gt, false).unwrap();
            orient_output(&cloud, &mut out, 6).unwrap();
            let oriented = rms_angle_error(&normals(&out), &gt, true).unwrap();
            let flips = flip_fraction(&normals(&out), &gt).unwrap();
            let k1: Vec<f64> = out.estimates.iter().filter_map(|e| e.unwrap().curvature).map(|c| c.k1).collect();
            let k1 = if k1.is_empty() { "-".to_string() } else { format!("{:.3}", k1.iter().sum::<f64>() / k1.len() as f64) };
            println!("{method:<6} {scale:<7} {unoriented:>9.2}° {oriented:>9.2}° {flips:>8.3} {k1:>10}");
        }
    }
}
