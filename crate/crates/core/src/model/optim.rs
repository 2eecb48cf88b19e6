use super::weights::ModelWeights;
use crate::error::{Error, Result};

/// Added to the root-mean-square in the update denominator.
pub const RMSPROP_EPSILON: f64 = 1e-10;

/// One RMSProp update on flat slices.
///
/// `acc ← ρ·acc + (1−ρ)·g²`, then `w ← w − lr·g/(√acc + ε)`; with momentum
/// `μ > 0` the step goes through a velocity `v ← μ·v − lr·g/(√acc + ε)`.
pub fn rmsprop_update(
    w: &mut [f64],
    g: &[f64],
    acc: &mut [f64],
    velocity: &mut [f64],
    learning_rate: f64,
    decay: f64,
    momentum: f64,
) {
    for i in 0..w.len() {
        acc[i] = decay * acc[i] + (1.0 - decay) * g[i] * g[i];
        let step = learning_rate * g[i] / (acc[i].sqrt() + RMSPROP_EPSILON);
        if momentum > 0.0 {
            velocity[i] = momentum * velocity[i] - step;
            w[i] += velocity[i];
        } else {
            w[i] -= step;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RmsProp {
    learning_rate: f64,
    decay: f64,
    momentum: f64,
    acc: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(weights: &ModelWeights, learning_rate: f64, decay: f64, momentum: f64) -> Self {
        let zeros: Vec<Vec<f64>> = weights.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            learning_rate,
            decay,
            momentum,
            velocity: zeros.clone(),
            acc: zeros,
        }
    }

    /// Applies one update. Non-finite gradients leave the weights untouched
    /// and report divergence at `step`.
    pub fn step(&mut self, weights: &mut ModelWeights, grads: &[Vec<f64>], step: usize) -> Result<()> {
        for (t, g) in weights.tensors().iter().zip(grads) {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step,
                    detail: format!("non-finite gradient in `{}` at index {i}", t.name),
                });
            }
        }
        for (i, t) in weights.tensors_mut().iter_mut().enumerate() {
            rmsprop_update(
                &mut t.data,
                &grads[i],
                &mut self.acc[i],
                &mut self.velocity[i],
                self.learning_rate,
                self.decay,
                self.momentum,
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_step_by_hand() {
        let (mut w, mut acc, mut v) = ([1.0], [0.0], [0.0]);
        rmsprop_update(&mut w, &[1.0], &mut acc, &mut v, 0.1, 0.9, 0.0);
        assert!((acc[0] - 0.1).abs() < 1e-15);
        let expected = 1.0 - 0.1 / (0.1f64.sqrt() + 1e-10);
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((w[0] - 0.683_772_234).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let (mut w, mut acc, mut v) = ([0.3, -2.0], [0.5, 0.0], [0.0, 0.0]);
        rmsprop_update(&mut w, &[0.0, 0.0], &mut acc, &mut v, 0.1, 0.9, 0.0);
        assert_eq!(w, [0.3, -2.0]);
    }

    #[test]
    fn zero_decay_is_sign_descent() {
        let (mut w, mut acc, mut v) = ([0.0, 0.0], [0.0, 0.0], [0.0, 0.0]);
        for _ in 0..2 {
            rmsprop_update(&mut w, &[3.0, -0.02], &mut acc, &mut v, 0.01, 0.0, 0.0);
        }
        assert!((w[0] + 0.02).abs() < 1e-9);
        assert!((w[1] - 0.02).abs() < 1e-9);
    }

    #[test]
    fn momentum_accumulates_velocity() {
        let (mut w, mut acc, mut v) = ([0.0], [0.0], [0.0]);
        rmsprop_update(&mut w, &[1.0], &mut acc, &mut v, 0.1, 0.0, 0.5);
        rmsprop_update(&mut w, &[1.0], &mut acc, &mut v, 0.1, 0.0, 0.5);
        assert!((w[0] + 0.1 + 0.15).abs() < 1e-9);
    }
}
