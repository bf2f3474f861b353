use serde::{Deserialize, Serialize};

use super::{ModelError, ParamVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn steps(&self) -> u64 {
        self.t
    }
}

fn shape_check(params: usize, grad: usize) -> Result<(), ModelError> {
    if params != grad {
        return Err(ModelError::Shape(format!("{params} parameters vs {grad} gradient entries")));
    }
    Ok(())
}

/// `params -= alpha * grad` over a raw slice.
pub fn sgd_update(params: &mut [f64], grad: &[f64], alpha: f64) -> Result<(), ModelError> {
    shape_check(params.len(), grad.len())?;
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= alpha * g;
    }
    Ok(())
}

/// Gradient-descent step. A gradient as long as the head updates only the head.
pub fn sgd_step(params: &ParamVector, gradient: &[f64], alpha: f64) -> Result<ParamVector, ModelError> {
    let mut out = params.clone();
    if gradient.len() == params.len() {
        sgd_update(out.values_mut(), gradient, alpha)?;
    } else {
        sgd_update(out.head_mut(), gradient, alpha)?;
    }
    Ok(out)
}

/// Bias-corrected Adam update over a raw slice; a fresh state is sized on first use.
pub fn adam_update(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &[f64],
    alpha: f64,
    hp: AdamParams,
) -> Result<(), ModelError> {
    shape_check(params.len(), grad.len())?;
    if state.t == 0 && state.m.is_empty() {
        state.m = vec![0.0; params.len()];
        state.v = vec![0.0; params.len()];
    }
    shape_check(state.m.len(), params.len())?;
    state.t += 1;
    let c1 = 1.0 - hp.beta1.powi(state.t as i32);
    let c2 = 1.0 - hp.beta2.powi(state.t as i32);
    for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        *p -= alpha * (*m / c1) / ((*v / c2).sqrt() + hp.eps);
    }
    Ok(())
}

pub fn adam_step(
    state: &AdamState,
    params: &ParamVector,
    gradient: &[f64],
    alpha: f64,
    hp: AdamParams,
) -> Result<(ParamVector, AdamState), ModelError> {
    let mut out = params.clone();
    let mut st = state.clone();
    if gradient.len() == params.len() {
        adam_update(&mut st, out.values_mut(), gradient, alpha, hp)?;
    } else {
        adam_update(&mut st, out.head_mut(), gradient, alpha, hp)?;
    }
    Ok((out, st))
}

/// Stateful optimizer over a fixed-length parameter slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd { alpha: f64 },
    Adam { alpha: f64, hp: AdamParams, state: AdamState },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, alpha: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { alpha },
            OptimizerKind::Adam => Optimizer::Adam {
                alpha,
                hp: AdamParams::default(),
                state: AdamState::default(),
            },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<(), ModelError> {
        match self {
            Optimizer::Sgd { alpha } => sgd_update(params, grad, *alpha),
            Optimizer::Adam { alpha, hp, state } => adam_update(state, params, grad, *alpha, *hp),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NetworkSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> NetworkSpec {
        NetworkSpec::new(vec![3, 2], 0).unwrap()
    }

    #[test]
    fn sgd_examples() {
        let s = spec();
        let p = ParamVector::zeros(&s);
        let g: Vec<f64> = (0..s.param_count()).map(|i| i as f64 - 3.0).collect();
        assert_eq!(sgd_step(&p, &g, 0.0).unwrap(), p);
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        assert_eq!(sgd_step(&p, &g, 1.0).unwrap().values(), &neg[..]);
        let half = sgd_step(&sgd_step(&p, &g, 0.25).unwrap(), &g, 0.25).unwrap();
        let full = sgd_step(&p, &g, 0.5).unwrap();
        assert_eq!(half, full);
        assert!(sgd_step(&p, &g[..3], 1.0).is_err());
    }

    #[test]
    fn head_only_step_leaves_base() {
        let s = NetworkSpec::new(vec![3, 2, 2], 1).unwrap();
        let p = ParamVector::glorot(&s, &mut ChaCha8Rng::seed_from_u64(0));
        let g = vec![1.0; s.head_param_count()];
        let q = sgd_step(&p, &g, 0.1).unwrap();
        assert_eq!(q.base(), p.base());
        assert_ne!(q.head(), p.head());
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let s = spec();
        let mut p = ParamVector::glorot(&s, &mut ChaCha8Rng::seed_from_u64(1));
        let orig = p.clone();
        let mut st = AdamState::default();
        for _ in 0..50 {
            let (np, ns) = adam_step(&st, &p, &vec![0.0; p.len()], 0.01, AdamParams::default()).unwrap();
            p = np;
            st = ns;
        }
        assert_eq!(p, orig);
        assert_eq!(st.steps(), 50);
    }

    #[test]
    fn adam_first_step_magnitude_is_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let alpha = 1e-3;
        for _ in 0..20 {
            let g: Vec<f64> = (0..8)
                .map(|_| {
                    let mag = 10f64.powf(rng.gen_range(-3.0..2.0));
                    if rng.gen() { mag } else { -mag }
                })
                .collect();
            let mut p = vec![0.0; 8];
            adam_update(&mut AdamState::default(), &mut p, &g, alpha, AdamParams::default()).unwrap();
            for d in p {
                assert!(d.abs() > 0.9 * alpha && d.abs() <= alpha, "{d}");
            }
        }
    }

    #[test]
    fn adam_is_deterministic_and_checks_state_shape() {
        let s = spec();
        let p = ParamVector::glorot(&s, &mut ChaCha8Rng::seed_from_u64(4));
        let g = vec![0.3; p.len()];
        let a = adam_step(&AdamState::default(), &p, &g, 0.01, AdamParams::default()).unwrap();
        let b = adam_step(&AdamState::default(), &p, &g, 0.01, AdamParams::default()).unwrap();
        assert_eq!(a, b);
        let mut wrong = a.1.clone();
        assert!(adam_update(&mut wrong, &mut [0.0; 3], &[0.0; 3], 0.1, AdamParams::default()).is_err());
    }
}
