//! Desk-scale experiment: a single-scale unoriented-normal network trained on
//! clean and noisy samples of an analytic sphere, an analytic cylinder and a
//! cube mesh, scored on a held-out icosphere and a noisier sphere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{add_gaussian_noise, analytic_shape, sample_mesh_uniform, shapes, AnalyticShape};
use crate::error::Result;
use crate::training::TrainConfig;
use crate::{PointCloud, Vec3};

pub const DESK_POINTS: usize = 10_000;
pub const DESK_TRAIN_NOISE: f64 = 0.012;
pub const DESK_TEST_NOISE: f64 = 0.024;
pub const DESK_EPOCHS: usize = 200;
pub const DESK_PATCHES_PER_CLOUD: usize = 200;
/// Seed of the held-out clouds, shared by every training seed.
pub const DESK_HOLDOUT_SEED: u64 = 0x005e_ed0f_7e57;
pub const HOLDOUT_ICOSPHERE: &str = "icosphere";
pub const HOLDOUT_NOISY_SPHERE: &str = "sphere_noise_0.024";

/// Six training clouds: each shape clean and with σ = 0.012 noise.
pub fn desk_clouds(seed: u64) -> Result<Vec<PointCloud>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = DESK_POINTS;
    let sphere = analytic_shape(&AnalyticShape::Sphere { radius: 1.0 }, n, "sphere", &mut rng)?;
    let cylinder = analytic_shape(&AnalyticShape::Cylinder { radius: 1.0, height: 2.0 }, n, "cylinder", &mut rng)?;
    let cube = sample_mesh_uniform(&shapes::cuboid(Vec3::new(1.0, 1.0, 1.0), 8), n, "cube", &mut rng)?.0;
    let mut clouds = Vec::new();
    for clean in [sphere, cylinder, cube] {
        let mut noisy = add_gaussian_noise(&clean, DESK_TRAIN_NOISE, &mut rng)?;
        noisy.name = format!("{}_noise_{DESK_TRAIN_NOISE}", clean.name);
        clouds.push(clean);
        clouds.push(noisy);
    }
    Ok(clouds)
}

pub fn desk_config(seed: u64, max_epochs: usize) -> TrainConfig {
    TrainConfig {
        patches_per_cloud: DESK_PATCHES_PER_CLOUD,
        max_epochs,
        seed,
        convergence_window: 0,
        ..TrainConfig::default()
    }
}

/// Held-out clouds: a clean sample of a subdivided icosphere mesh and an
/// analytic unit sphere with σ = 0.024 noise.
pub fn desk_holdout() -> Result<Vec<PointCloud>> {
    let mut rng = ChaCha8Rng::seed_from_u64(DESK_HOLDOUT_SEED);
    let ico = sample_mesh_uniform(&shapes::icosphere(1.0, 4), DESK_POINTS, HOLDOUT_ICOSPHERE, &mut rng)?.0;
    let sphere = analytic_shape(&AnalyticShape::Sphere { radius: 1.0 }, DESK_POINTS, "sphere", &mut rng)?;
    let mut noisy = add_gaussian_noise(&sphere, DESK_TEST_NOISE, &mut rng)?;
    noisy.name = HOLDOUT_NOISY_SPHERE.into();
    Ok(vec![ico, noisy])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_data_shapes() {
        let clouds = desk_clouds(1).unwrap();
        assert_eq!(clouds.len(), 6);
        assert!(clouds.iter().all(|c| c.len() == DESK_POINTS && c.gt_normals.is_some()));
        assert_eq!(clouds[1].name, "sphere_noise_0.012");
        assert_eq!(desk_clouds(1).unwrap()[5].points, clouds[5].points);
        let held = desk_holdout().unwrap();
        assert_eq!(held[1].name, HOLDOUT_NOISY_SPHERE);
        assert!(held.iter().all(|c| c.gt_normals.is_some()));
        desk_config(3, DESK_EPOCHS).validate().unwrap();
    }
}
