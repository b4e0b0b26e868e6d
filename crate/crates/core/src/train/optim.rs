use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParamGrads, ParamStore};

/// Adam moments, one buffer per parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

/// One bias-corrected Adam update of the trainable arrays.
pub fn adam_step(params: &mut ParamStore, grads: &ParamGrads, state: &mut AdamState, hp: &AdamParams) -> Result<()> {
    if grads.values.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape("gradients or optimizer state do not match the parameters"));
    }
    for (id, g) in grads.values.iter().enumerate() {
        if g.len() != params.get(id).len() || state.m[id].len() != g.len() {
            return Err(Error::shape(format!("gradient for `{}` has the wrong size", params.param(id).name)));
        }
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (id, g) in grads.values.iter().enumerate() {
        if !params.param(id).trainable {
            continue;
        }
        let (m, v) = (&mut state.m[id], &mut state.v[id]);
        for (i, p) in params.get_mut(id).iter_mut().enumerate() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            *p -= hp.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + hp.eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Rescale everything when the global L2 norm exceeds the bound.
    #[default]
    GlobalNorm,
    /// Clamp each component to `[-bound, bound]`.
    Elementwise,
}

/// Clips in place and returns the norm before clipping.
pub fn clip_gradients(grads: &mut ParamGrads, max_norm: f64, mode: ClipMode) -> f64 {
    let norm = grads.global_norm();
    match mode {
        ClipMode::GlobalNorm => {
            if norm > max_norm {
                grads.scale(max_norm / norm);
                // rounding can leave the rescaled norm an ulp above the cap
                let mut after = grads.global_norm();
                while after > max_norm {
                    grads.scale((max_norm / after) * (1.0 - f64::EPSILON));
                    after = grads.global_norm();
                }
            }
        }
        ClipMode::Elementwise => grads.values.iter_mut().flatten().for_each(|g| *g = g.clamp(-max_norm, max_norm)),
    }
    norm
}

/// Multiplies the learning rate by `factor` once `patience` consecutive
/// epochs fail to beat the best loss by more than `min_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    min_delta: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, factor: f64, patience: usize, min_delta: f64) -> Self {
        Self {
            lr,
            factor,
            patience,
            min_delta,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records an epoch's loss and returns the rate for the next epoch.
    pub fn step(&mut self, loss: f64) -> f64 {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                self.lr *= self.factor;
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(vals: &[f64]) -> ParamStore {
        let mut s = ParamStore::default();
        s.push("x", vec![vals.len()], vals.to_vec(), true);
        s
    }

    fn hp(lr: f64) -> AdamParams {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = store(&[1.0, -2.0]);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &ParamGrads { values: vec![vec![0.0, 0.0]] }, &mut st, &hp(0.1)).unwrap();
        assert_eq!(s.get(0), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store(&[0.0, 0.0]);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &ParamGrads { values: vec![vec![3.0, -0.5]] }, &mut st, &hp(0.01)).unwrap();
        assert!((s.get(0)[0] + 0.01).abs() < 1e-9);
        assert!((s.get(0)[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn quadratic_bowl_descends() {
        let mut s = store(&[2.0]);
        let mut st = AdamState::new(&s);
        let mut f = 0.5 * 4.0;
        for _ in 0..10 {
            let x = s.get(0)[0];
            adam_step(&mut s, &ParamGrads { values: vec![vec![x]] }, &mut st, &hp(0.1)).unwrap();
            let nf = 0.5 * s.get(0)[0].powi(2);
            assert!(nf < f);
            f = nf;
        }
    }

    #[test]
    fn buffers_and_nan() {
        let mut s = ParamStore::default();
        s.push("mean", vec![1], vec![5.0], false);
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &ParamGrads { values: vec![vec![1.0]] }, &mut st, &hp(0.1)).unwrap();
        assert_eq!(s.get(0), &[5.0]);
        let err = adam_step(&mut s, &ParamGrads { values: vec![vec![f64::NAN]] }, &mut st, &hp(0.1));
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }

    #[test]
    fn clipping() {
        let mut g = ParamGrads { values: vec![vec![6.0, 8.0]] };
        assert_eq!(clip_gradients(&mut g, 5.0, ClipMode::GlobalNorm), 10.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
        assert_eq!(g.values[0], vec![3.0, 4.0]);
        let mut g = ParamGrads { values: vec![vec![1.8, 2.4]] };
        clip_gradients(&mut g, 5.0, ClipMode::GlobalNorm);
        assert_eq!(g.values[0], vec![1.8, 2.4]);
        let mut g = ParamGrads { values: vec![vec![7.0, -0.5, -9.0]] };
        clip_gradients(&mut g, 5.0, ClipMode::Elementwise);
        assert_eq!(g.values[0], vec![5.0, -0.5, -5.0]);
    }

    #[test]
    fn plateau_halves_after_five_flat_epochs() {
        let mut s = PlateauScheduler::new(5e-4, 0.5, 5, 1e-4);
        let lrs: Vec<f64> = [1.0; 6].iter().map(|&l| s.step(l)).collect();
        assert_eq!(&lrs[..5], &[5e-4; 5]);
        assert_eq!(lrs[5], 2.5e-4);
        // improvement resets the count
        let mut s = PlateauScheduler::new(1.0, 0.5, 2, 0.0);
        for l in [1.0, 1.0, 0.5, 0.5] {
            s.step(l);
        }
        assert_eq!(s.lr(), 1.0);
    }
}
