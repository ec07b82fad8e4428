use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

use super::backprop::ParamGrads;

/// Adam moments plus hyperparameters for decoupled weight decay.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub first_moment: ModelParams<T>,
    pub second_moment: ModelParams<T>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>, lr: f64, weight_decay: f64) -> Self {
        Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// One AdamW update: `p -= lr * wd * p`, then `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn adamw_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ParamGrads<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    let p_arrays = params.arrays_mut();
    let g_arrays = grads.arrays();
    let m_arrays = state.first_moment.arrays_mut();
    let v_arrays = state.second_moment.arrays_mut();
    if p_arrays.len() != g_arrays.len() || p_arrays.len() != m_arrays.len() || p_arrays.len() != v_arrays.len() {
        return Err(Error::Config(format!(
            "optimizer: {} parameter arrays vs {} gradient arrays",
            p_arrays.len(),
            g_arrays.len()
        )));
    }
    for ((pn, p), (gn, g)) in p_arrays.iter().zip(&g_arrays) {
        if pn != gn || p.shape() != g.shape() {
            return Err(Error::dim("adamw_step", p.shape(), g.shape()));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let lr = T::lit(state.lr);
    let b1 = T::lit(state.beta1);
    let b2 = T::lit(state.beta2);
    let eps = T::lit(state.eps);
    let decay = T::one() - lr * T::lit(state.weight_decay);
    let bc1 = T::one() - T::lit(state.beta1.powi(t));
    let bc2 = T::one() - T::lit(state.beta2.powi(t));

    for (((_, p), (_, g)), ((_, m), (_, v))) in p_arrays
        .into_iter()
        .zip(g_arrays)
        .zip(m_arrays.into_iter().zip(v_arrays))
    {
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *pv *= decay;
            *mv = b1 * *mv + (T::one() - b1) * gv;
            *vv = b2 * *vv + (T::one() - b2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MixerConfig, NormKind, TokenMixerKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config() -> MixerConfig {
        crate::training::gradcheck::tiny_config(TokenMixerKind::Ccs, NormKind::Affine)
    }

    fn params() -> ModelParams<f64> {
        ModelParams::init(&config(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = params();
        let before = p.clone();
        let mut state = OptimizerState::new(&p, 1e-2, 0.0);
        adamw_step(&mut p, &before.zeros_like(), &mut state).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_matches_closed_form() {
        let mut p = params();
        let before = p.clone();
        let mut grads = p.zeros_like();
        for (k, (_, t)) in grads.arrays_mut().into_iter().enumerate() {
            for (j, v) in t.data_mut().iter_mut().enumerate() {
                *v = ((k * 31 + j * 7) % 13) as f64 * 0.1 - 0.6;
            }
        }
        let lr = 1e-3;
        let mut state = OptimizerState::new(&p, lr, 0.0);
        adamw_step(&mut p, &grads, &mut state).unwrap();
        for (((_, after), (_, b)), (_, g)) in p.arrays().into_iter().zip(before.arrays()).zip(grads.arrays()) {
            for ((&a, &b), &g) in after.data().iter().zip(b.data()).zip(g.data()) {
                let expected = b - lr * g / (g.abs() + 1e-8);
                assert!((a - expected).abs() < 1e-15, "{a} vs {expected}");
            }
        }
    }

    #[test]
    fn decay_alone_shrinks_by_lr_times_wd() {
        let mut p = params();
        let before = p.clone();
        let (lr, wd) = (1e-2, 0.05);
        let mut state = OptimizerState::new(&p, lr, wd);
        adamw_step(&mut p, &before.zeros_like(), &mut state).unwrap();
        for ((_, a), (_, b)) in p.arrays().into_iter().zip(before.arrays()) {
            for (&a, &b) in a.data().iter().zip(b.data()) {
                assert_eq!(a, b * (1.0 - lr * wd));
            }
        }
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let mut p = params();
        let other = ModelParams::<f64>::zeros(&crate::training::gradcheck::tiny_config(
            TokenMixerKind::Simplified,
            NormKind::Affine,
        ))
        .unwrap();
        let mut state = OptimizerState::new(&p, 1e-3, 0.0);
        assert!(adamw_step(&mut p, &other, &mut state).is_err());
    }
}
