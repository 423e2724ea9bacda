use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{partial_objective, Target};
use super::sgd::{sgd_step, OptimizerState};
use crate::cloud::{PatchSampler, PointCloud};
use crate::error::{Error, Result};
use crate::network::checkpoint;
use crate::network::{ModelConfig, OutputSpec, PatchInput, PcpModel};

/// Samples per work unit inside a batch. Gradients are reduced in unit order,
/// so results do not depend on the number of threads.
const CHUNK: usize = 8;

pub const PROGRESS_FILE: &str = "progress.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const BEST_CHECKPOINT: &str = "best.ckpt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub patches_per_cloud: usize,
    pub max_epochs: usize,
    pub n_points: usize,
    /// Patch radii relative to the bounding-box diagonal.
    pub scales: Vec<f64>,
    pub output: OutputSpec,
    /// Weight of the curvature term in the joint loss.
    pub lambda: f64,
    pub seed: u64,
    /// Write `epoch_NNNN.ckpt` every this many epochs (0 disables).
    pub checkpoint_every: usize,
    /// Stop when the best loss of the last `convergence_window` epochs improves
    /// on the best loss before them by less than `convergence_tolerance`
    /// (relative). A window of 0 disables the check.
    pub convergence_window: usize,
    pub convergence_tolerance: f64,
    /// Architecture override. Its scales, patch size and output are replaced
    /// by the fields above; when absent the standard network is used.
    pub model: Option<ModelConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-4,
            momentum: 0.9,
            patches_per_cloud: 1000,
            max_epochs: 2000,
            n_points: 500,
            scales: vec![0.05],
            output: OutputSpec::UnorientedNormal,
            lambda: 1.0,
            seed: 0,
            checkpoint_every: 50,
            convergence_window: 50,
            convergence_tolerance: 1e-4,
            model: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("patches_per_cloud", self.patches_per_cloud),
            ("max_epochs", self.max_epochs),
            ("n_points", self.n_points),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.learning_rate > 0.0) || !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config("learning_rate must be positive and momentum in [0, 1)".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("scales must be positive".into()));
        }
        self.model_config().validate()
    }

    pub fn model_config(&self) -> ModelConfig {
        let base = self.model.clone().unwrap_or_else(|| {
            if self.scales.len() == 1 {
                ModelConfig::single_scale(self.output)
            } else {
                ModelConfig::multi_scale(self.output)
            }
        });
        ModelConfig {
            output: self.output,
            scales: self.scales.clone(),
            n_points: self.n_points,
            ..base
        }
    }
}

/// Checks that every cloud carries the ground truth the output needs.
pub fn check_ground_truth(clouds: &[PointCloud], output: OutputSpec) -> Result<()> {
    for c in clouds {
        if output.has_normal() && c.gt_normals.is_none() {
            return Err(Error::Config(format!("cloud `{}` has no ground-truth normals", c.name)));
        }
        if output.has_curvature() && c.gt_curvatures.is_none() {
            return Err(Error::Config(format!("cloud `{}` has no ground-truth curvatures", c.name)));
        }
        c.validate()?;
    }
    Ok(())
}

/// Regression target for the patch set centered at `center`. Curvatures are
/// multiplied by the reference radius (the largest scale in world units).
pub fn training_target(sampler: &PatchSampler, center: usize, scales: &[f64], output: OutputSpec) -> Target {
    let cloud = &sampler.cloud;
    let normal = output
        .has_normal()
        .then(|| cloud.gt_normals.as_ref().map(|n| [n[center].x, n[center].y, n[center].z]))
        .flatten();
    let r = sampler.reference_radius(scales);
    let curvature = output
        .has_curvature()
        .then(|| cloud.gt_curvatures.as_ref().map(|k| [k[center].k1 * r, k[center].k2 * r]))
        .flatten();
    Target { normal, curvature }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-patch loss over the epoch.
    pub loss: f64,
    pub batches: usize,
    pub patches: usize,
}

/// Stateful epoch loop over a fixed set of training clouds.
pub struct Trainer {
    config: TrainConfig,
    model: PcpModel<f32>,
    state: OptimizerState<f32>,
    samplers: Vec<PatchSampler>,
    rng: ChaCha8Rng,
    epoch: usize,
    history: Vec<f64>,
}

impl Trainer {
    pub fn new(clouds: Vec<PointCloud>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if clouds.is_empty() {
            return Err(Error::Config("no training clouds".into()));
        }
        check_ground_truth(&clouds, config.output)?;
        let samplers = clouds.into_iter().map(PatchSampler::new).collect::<Result<Vec<_>>>()?;
        let model = PcpModel::build(config.model_config(), config.seed)?;
        let state = OptimizerState::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Trainer {
            config,
            model,
            state,
            samplers,
            rng,
            epoch: 0,
            history: Vec::new(),
        })
    }

    pub fn model(&self) -> &PcpModel<f32> {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Mean loss of every completed epoch.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// `(cloud, center)` pairs for the next epoch: `patches_per_cloud` random
    /// centers per cloud, globally shuffled.
    pub fn epoch_plan(&mut self) -> Vec<(usize, usize)> {
        let mut plan = Vec::with_capacity(self.samplers.len() * self.config.patches_per_cloud);
        for (c, s) in self.samplers.iter().enumerate() {
            for _ in 0..self.config.patches_per_cloud {
                plan.push((c, self.rng.random_range(0..s.cloud.len())));
            }
        }
        plan.shuffle(&mut self.rng);
        plan
    }

    fn sample_rng(&self, position: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(2 + (((self.epoch as u64) << 32) | position as u64));
        rng
    }

    /// Assembles the network input and target of one plan entry.
    pub fn assemble(&self, (cloud, center): (usize, usize), position: usize) -> Result<(PatchInput<f32>, Target)> {
        let sampler = &self.samplers[cloud];
        let mut rng = self.sample_rng(position);
        let patches = sampler.patch_set(center, &self.config.scales, self.config.n_points, &mut rng)?;
        let target = training_target(sampler, center, &self.config.scales, self.config.output);
        Ok((PatchInput::from_patches(&patches), target))
    }

    /// Mean loss and summed gradient of one batch, without updating the model.
    pub fn batch_gradient(&self, batch: &[(usize, usize)], first_position: usize) -> Result<(f64, PcpModel<f32>)> {
        let n = batch.len();
        let parts: Vec<Result<(f64, PcpModel<f32>)>> = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, chunk)| {
                let mut inputs = Vec::with_capacity(chunk.len());
                let mut targets = Vec::with_capacity(chunk.len());
                for (k, &entry) in chunk.iter().enumerate() {
                    let (input, target) = self.assemble(entry, first_position + ci * CHUNK + k)?;
                    inputs.push(input);
                    targets.push(target);
                }
                let (_, cache) = self.model.forward(&inputs)?;
                let obj = partial_objective(self.config.output, &cache, &targets, self.config.lambda, n);
                let mut grads = self.model.zeros_like();
                self.model.backward(&cache, &obj.grads, &mut grads)?;
                Ok((obj.loss, grads))
            })
            .collect();
        let mut loss = 0.0;
        let mut total: Option<PcpModel<f32>> = None;
        for part in parts {
            let (l, g) = part?;
            loss += l;
            match &mut total {
                Some(t) => t.accumulate(&g),
                None => total = Some(g),
            }
        }
        Ok((loss, total.unwrap_or_else(|| self.model.zeros_like())))
    }

    /// One optimizer step on `batch`; returns the batch loss before the step.
    pub fn step(&mut self, batch: &[(usize, usize)], first_position: usize) -> Result<f64> {
        let (loss, grads) = self.batch_gradient(batch, first_position)?;
        sgd_step(&mut self.model, &grads, &mut self.state, self.config.learning_rate, self.config.momentum)?;
        Ok(loss)
    }

    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        let plan = self.epoch_plan();
        let mut weighted = 0.0;
        let mut batches = 0;
        for (b, batch) in plan.chunks(self.config.batch_size).enumerate() {
            let loss = self.step(batch, b * self.config.batch_size)?;
            weighted += loss * batch.len() as f64;
            batches += 1;
        }
        self.epoch += 1;
        let loss = weighted / plan.len() as f64;
        self.history.push(loss);
        Ok(EpochStats {
            epoch: self.epoch,
            loss,
            batches,
            patches: plan.len(),
        })
    }

    /// True when the convergence criterion of the config is met.
    pub fn converged(&self) -> bool {
        let w = self.config.convergence_window;
        let h = &self.history;
        if w == 0 || h.len() <= w {
            return false;
        }
        let (before, recent) = h.split_at(h.len() - w);
        let best_before = before.iter().copied().fold(f64::INFINITY, f64::min);
        let best_recent = recent.iter().copied().fold(f64::INFINITY, f64::min);
        (best_before - best_recent) / best_before.abs().max(f64::MIN_POSITIVE) < self.config.convergence_tolerance
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let meta = serde_json::json!({
            "epoch": self.epoch,
            "loss": self.history.last(),
            "train_config": self.config,
        });
        checkpoint::save(path, &self.model, meta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs: usize,
    pub final_loss: f64,
    pub best_loss: f64,
    pub converged: bool,
    pub final_checkpoint: PathBuf,
}

/// Full training run writing `progress.csv` (epoch, loss, wall time in
/// seconds), periodic `epoch_NNNN.ckpt` files, `best.ckpt` and `final.ckpt`
/// into `out_dir`.
pub fn train(clouds: Vec<PointCloud>, config: TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(clouds, config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let progress_path = out_dir.join(PROGRESS_FILE);
    let mut progress = String::from("epoch,loss,wall_time_s\n");
    let start = Instant::now();
    let mut best = f64::INFINITY;
    let mut converged = false;
    while trainer.epoch() < trainer.config().max_epochs {
        let stats = trainer.run_epoch()?;
        let _ = writeln!(progress, "{},{:.9e},{:.3}", stats.epoch, stats.loss, start.elapsed().as_secs_f64());
        fs::write(&progress_path, &progress).map_err(|e| Error::io(format!("writing {}", progress_path.display()), e))?;
        log::info!("epoch {} loss {:.6e}", stats.epoch, stats.loss);
        if stats.loss < best {
            best = stats.loss;
            trainer.save_checkpoint(&out_dir.join(BEST_CHECKPOINT))?;
        }
        let every = trainer.config().checkpoint_every;
        if every > 0 && stats.epoch % every == 0 {
            trainer.save_checkpoint(&out_dir.join(format!("epoch_{:04}.ckpt", stats.epoch)))?;
        }
        if trainer.converged() {
            converged = true;
            break;
        }
    }
    let final_checkpoint = out_dir.join(FINAL_CHECKPOINT);
    trainer.save_checkpoint(&final_checkpoint)?;
    Ok(TrainOutcome {
        epochs: trainer.epoch(),
        final_loss: *trainer.history().last().expect("at least one epoch"),
        best_loss: best,
        converged,
        final_checkpoint,
    })
}
