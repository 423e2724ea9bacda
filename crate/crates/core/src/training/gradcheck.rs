//! Analytic-versus-numeric gradient verification in 64-bit mode.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::objective::{batch_objective, Target};
use super::sgd::{sgd_step, OptimizerState};
use crate::error::Result;
use crate::network::{ModelConfig, OutputSpec, PatchInput, PcpModel};

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckConfig {
    pub model: ModelConfig,
    pub seed: u64,
    pub batch: usize,
    /// Real (non-padding) points per patch; the rest is zero padding.
    pub valid_points: usize,
    pub epsilon: f64,
    /// SGD steps taken on the probe problem before checking.
    pub train_steps: usize,
    /// Replace the zero-initialized transformer heads by random weights so
    /// every parameter receives a nonzero gradient.
    pub randomize: bool,
    pub lambda: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            model: ModelConfig::tiny(OutputSpec::Joint),
            seed: 8,
            batch: 2,
            valid_points: 4,
            epsilon: 1e-5,
            train_steps: 0,
            randomize: true,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerError {
    pub layer: String,
    pub params: usize,
    /// Parameters whose analytic gradient is nonzero.
    pub nonzero: usize,
    /// `|analytic - numeric| / max(|analytic|, |numeric|)`, norms taken per
    /// parameter tensor, maximized over the tensors of this layer type.
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub layers: Vec<LayerError>,
    /// Coordinates skipped because the perturbation crossed a ReLU or loss-branch kink.
    pub skipped: usize,
    pub checked: usize,
}

impl GradcheckReport {
    /// Layer types whose analytic gradient is identically zero on the probe,
    /// i.e. not actually exercised by the check.
    pub fn unexercised(&self) -> Vec<&str> {
        self.layers.iter().filter(|l| l.nonzero == 0).map(|l| l.layer.as_str()).collect()
    }

    pub fn max_error(&self) -> f64 {
        self.layers.iter().map(|l| l.max_relative_error).fold(0.0, f64::max)
    }
}

/// A fixed batch plus targets that defines the scalar probed by the check.
#[derive(Debug, Clone)]
pub struct Probe {
    pub inputs: Vec<PatchInput<f64>>,
    pub targets: Vec<Target>,
    pub lambda: f64,
}

impl Probe {
    pub fn random(config: &ModelConfig, batch: usize, valid: usize, lambda: f64, rng: &mut impl Rng) -> Self {
        let inputs = (0..batch)
            .map(|_| {
                PatchInput::from_points(
                    config
                        .scales
                        .iter()
                        .map(|_| {
                            let mut pts: Vec<[f64; 3]> = (0..valid.min(config.n_points))
                                .map(|_| [0, 1, 2].map(|_| rng.random_range(-0.7..0.7)))
                                .collect();
                            pts.resize(config.n_points, [0.0; 3]);
                            pts
                        })
                        .collect(),
                )
            })
            .collect();
        let targets = (0..batch)
            .map(|_| {
                let v = [0, 1, 2].map(|_| rng.random_range(-1.0..1.0f64));
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-3);
                Target {
                    normal: Some(v.map(|c| c / n)),
                    curvature: Some([rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]),
                }
            })
            .collect();
        Probe { inputs, targets, lambda }
    }

    /// Loss value plus a signature of every non-smooth branch taken.
    pub fn evaluate(&self, model: &PcpModel<f64>) -> Result<(f64, Vec<bool>)> {
        let (_, cache) = model.forward(&self.inputs)?;
        let obj = batch_objective(model.config.output, &cache, &self.targets, self.lambda);
        let mut signature = obj.flips.clone();
        for s in &cache.samples {
            signature.extend(s.relu_pattern());
        }
        Ok((obj.loss, signature))
    }

    pub fn analytic_gradients(&self, model: &PcpModel<f64>) -> Result<PcpModel<f64>> {
        let (_, cache) = model.forward(&self.inputs)?;
        let obj = batch_objective(model.config.output, &cache, &self.targets, self.lambda);
        let mut grads = model.zeros_like();
        model.backward(&cache, &obj.grads, &mut grads)?;
        Ok(grads)
    }
}

fn layer_type(name: &str) -> String {
    let parts: Vec<&str> = name.split('.').collect();
    let cut = parts.iter().position(|p| p.parse::<usize>().is_ok()).unwrap_or(parts.len());
    parts[..cut].join(".")
}

/// Compares `analytic` against central differences of `probe` around `model`.
pub fn compare_gradients(model: &PcpModel<f64>, probe: &Probe, analytic: &PcpModel<f64>, epsilon: f64) -> Result<GradcheckReport> {
    let (_, base_sig) = probe.evaluate(model)?;
    let mut work = model.clone();
    let mut per_layer: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    let mut skipped = 0;
    let mut checked = 0;
    let analytic_params = analytic.params();
    for (t, (name, a_tensor)) in analytic_params.iter().enumerate() {
        let len = a_tensor.len();
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for j in 0..len {
            let orig = work.params()[t].1.data()[j];
            work.params_mut()[t].1.data_mut()[j] = orig + epsilon;
            let (lp, sp) = probe.evaluate(&work)?;
            work.params_mut()[t].1.data_mut()[j] = orig - epsilon;
            let (lm, sm) = probe.evaluate(&work)?;
            work.params_mut()[t].1.data_mut()[j] = orig;
            if sp != base_sig || sm != base_sig {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (lp - lm) / (2.0 * epsilon);
            let a = a_tensor.data()[j];
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        let denom = a2.sqrt().max(n2.sqrt());
        let rel = if denom > 0.0 { diff2.sqrt() / denom } else { 0.0 };
        let entry = per_layer.entry(layer_type(name)).or_insert((0, 0, 0.0));
        entry.0 += len;
        entry.1 += a_tensor.data().iter().filter(|v| **v != 0.0).count();
        entry.2 = entry.2.max(rel);
    }
    Ok(GradcheckReport {
        layers: per_layer
            .into_iter()
            .map(|(layer, (params, nonzero, max_relative_error))| LayerError {
                layer,
                params,
                nonzero,
                max_relative_error,
            })
            .collect(),
        skipped,
        checked,
    })
}

/// Builds the reduced model and probe, optionally trains a few steps, and
/// checks every parameter gradient.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let (model, probe) = prepare(config)?;
    let analytic = probe.analytic_gradients(&model)?;
    compare_gradients(&model, &probe, &analytic, config.epsilon)
}

/// Model and probe exactly as [`gradcheck`] uses them.
pub fn prepare(config: &GradcheckConfig) -> Result<(PcpModel<f64>, Probe)> {
    let mut model = PcpModel::<f64>::build(config.model.clone(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37));
    if config.randomize {
        for (name, t) in model.params_mut() {
            if name.contains("stn.head") {
                let fan_in = if t.shape().len() == 2 { t.shape()[1] } else { 4 };
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in t.data_mut() {
                    *v += rng.random_range(-bound..bound);
                }
            }
        }
    }
    let probe = Probe::random(&config.model, config.batch, config.valid_points, config.lambda, &mut rng);
    let mut state = OptimizerState::new(&model);
    for _ in 0..config.train_steps {
        let grads = probe.analytic_gradients(&model)?;
        sgd_step(&mut model, &grads, &mut state, 1e-2, 0.9)?;
    }
    Ok((model, probe))
}
