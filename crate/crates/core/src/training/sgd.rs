use crate::error::{Error, Result};
use crate::network::{PcpModel, Real, Tensor};

/// Momentum buffers, one per parameter tensor, zero-initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub velocities: Vec<Tensor<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(model: &PcpModel<T>) -> Self {
        OptimizerState {
            velocities: model
                .params()
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }
}

/// One step of SGD with momentum: `v ← m·v − lr·g`, `w ← w + v`.
///
/// The gradient is checked for non-finite values before anything is
/// modified, so a failed step leaves parameters and state untouched.
pub fn sgd_step<T: Real>(
    params: &mut PcpModel<T>,
    grads: &PcpModel<T>,
    state: &mut OptimizerState<T>,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let grad_list = grads.params();
    if grad_list.len() != state.velocities.len() {
        return Err(Error::ShapeMismatch("optimizer state does not match model".into()));
    }
    for (name, g) in &grad_list {
        if !g.is_finite() {
            return Err(Error::Divergence(name.clone()));
        }
    }
    let lr = T::from_f64(lr);
    let m = T::from_f64(momentum);
    for (((name, w), (_, g)), v) in params
        .params_mut()
        .into_iter()
        .zip(grad_list)
        .zip(state.velocities.iter_mut())
    {
        if w.shape() != g.shape() || v.shape() != g.shape() {
            return Err(Error::ShapeMismatch(format!("parameter {name}")));
        }
        for ((wi, gi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vi = m * *vi - lr * *gi;
            *wi += *vi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Linear, Mlp, ModelConfig, OutputSpec};

    /// A model with a single scalar parameter in the regressor; everything else empty-ish.
    fn scalar_model(w: f64) -> PcpModel<f64> {
        let mut cfg = ModelConfig::tiny(OutputSpec::Curvature);
        cfg.use_point_stn = false;
        cfg.use_feature_stn = false;
        let mut m = PcpModel::<f64>::build(cfg, 0).unwrap();
        for (_, t) in m.params_mut() {
            t.fill(0.0);
        }
        m.regressor = Mlp {
            layers: vec![Linear {
                weight: Tensor::from_vec(&[1, 1], vec![w]).unwrap(),
                bias: Tensor::zeros(&[1]),
            }],
            relu_last: false,
        };
        m
    }

    fn first_weight(m: &PcpModel<f64>) -> f64 {
        m.regressor.layers[0].weight.data()[0]
    }

    #[test]
    fn momentum_recurrence() {
        let mut w = scalar_model(1.0);
        let g = scalar_model(1.0);
        let mut state = OptimizerState::new(&w);
        sgd_step(&mut w, &g, &mut state, 0.1, 0.9).unwrap();
        assert!((first_weight(&w) - 0.9).abs() < 1e-12);
        let vi = state.velocities.len() - 2;
        assert!((state.velocities[vi].data()[0] + 0.1).abs() < 1e-12);
        sgd_step(&mut w, &g, &mut state, 0.1, 0.9).unwrap();
        assert!((state.velocities[vi].data()[0] + 0.19).abs() < 1e-12);
        assert!((first_weight(&w) - 0.71).abs() < 1e-12);
    }

    #[test]
    fn velocity_decays_without_gradient() {
        let mut w = scalar_model(1.0);
        let mut state = OptimizerState::new(&w);
        sgd_step(&mut w, &scalar_model(1.0), &mut state, 0.1, 0.9).unwrap();
        let zero = scalar_model(0.0);
        let vi = state.velocities.len() - 2;
        let mut prev = state.velocities[vi].data()[0];
        for _ in 0..200 {
            sgd_step(&mut w, &zero, &mut state, 0.1, 0.9).unwrap();
            let v = state.velocities[vi].data()[0];
            assert!((v - 0.9 * prev).abs() < 1e-15);
            prev = v;
        }
        // 1 + v0 / (1 - m) with v0 = -0.1
        assert!((first_weight(&w) - 0.0).abs() < 1e-8);
    }

    #[test]
    fn zero_momentum_is_plain_gradient_descent() {
        let mut w = scalar_model(0.7);
        let mut state = OptimizerState::new(&w);
        sgd_step(&mut w, &scalar_model(0.3), &mut state, 0.5, 0.0).unwrap();
        assert_eq!(first_weight(&w), 0.7 - 0.5 * 0.3);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut w = scalar_model(1.0);
        let mut state = OptimizerState::new(&w);
        let err = sgd_step(&mut w, &scalar_model(f64::NAN), &mut state, 0.1, 0.9).unwrap_err();
        assert!(err.to_string().contains("divergence detected"));
        assert!(err.to_string().contains("regressor.0.weight"));
        assert_eq!(first_weight(&w), 1.0);
    }
}
