//! Trains a small joint normal and curvature network for a few epochs on two
//! analytic shapes, then estimates a held-out sphere and compares with PCA.
//!
//! ```text
//! cargo run --release --example train_and_estimate -- [out_dir] [epochs]
//! ```

use std::path::PathBuf;

use pcpnet::dataset::{analytic_shape, AnalyticShape};
use pcpnet::evaluation::{curvature_rms, rms_angle_error};
use pcpnet::network::{checkpoint, estimate_cloud, OutputSpec, PcpModel};
use pcpnet::training::{train, TrainConfig};
use pcpnet::{PatchSampler, Vec3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "example_model".into()));
    let epochs: usize = args.next().map(|s| s.parse().expect("epochs")).unwrap_or(5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let clouds = vec![
        analytic_shape(&AnalyticShape::Sphere { radius: 1.0 }, 5000, "sphere", &mut rng).unwrap(),
        analytic_shape(&AnalyticShape::Cylinder { radius: 0.5, height: 2.0 }, 5000, "cylinder", &mut rng).unwrap(),
    ];
    let config = TrainConfig {
        output: OutputSpec::Joint,
        patches_per_cloud: 128,
        n_points: 200,
        max_epochs: epochs,
        convergence_window: 0,
        seed: 2,
        ..TrainConfig::default()
    };
    let outcome = train(clouds, config, &out).unwrap();
    println!("trained {} epochs, final loss {:.4}", outcome.epochs, outcome.final_loss);

    let (model, _) = checkpoint::load::<f32>(&outcome.final_checkpoint).unwrap();
    let test = analytic_shape(&AnalyticShape::Sphere { radius: 2.0 }, 5000, "test", &mut rng).unwrap();
    let queries: Vec<usize> = (0..test.len()).step_by(5).collect();
    let sampler = PatchSampler::new(test).unwrap();
    let estimates = estimate_cloud::<f32>(&model as &PcpModel<f32>, &sampler, &queries, 0).unwrap();
    let gt_n = sampler.cloud.gt_normals.as_ref().unwrap();
    let gt_k = sampler.cloud.gt_curvatures.as_ref().unwrap();
    let (mut pn, mut gn, mut pk, mut gk) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (e, &q) in estimates.iter().zip(&queries) {
        let Some(e) = e else { continue };
        let e = if e.normal.unwrap().dot(&gt_n[q]) < 0.0 { e.flipped() } else { *e };
        pn.push(e.normal.unwrap());
        gn.push(gt_n[q]);
        pk.push(e.curvature.unwrap());
        gk.push(gt_k[q]);
    }
    let fixed = vec![Vec3::z(); gn.len()];
    println!("network unoriented RMS angle {:.2}°", rms_angle_error(&pn, &gn, false).unwrap());
    println!("fixed-normal reference     {:.2}°", rms_angle_error(&fixed, &gn, false).unwrap());
    let (k1, k2) = curvature_rms(&pk, &gk).unwrap();
    println!("curvature RMS (rectified)  κ1 {k1:.3}  κ2 {k2:.3}");
}
