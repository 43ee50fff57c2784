use super::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a list of parameter slices.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    /// Fresh state for parameters with the given slice lengths.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&[T]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.lr
    }

    /// Change the step size for subsequent updates (for schedules).
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::shape(format!(
                    "tensor {i}: optimizer holds {} values, params {}, grads {}",
                    self.m[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        // p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
        let step_size = T::of(c.lr / bc1);
        let inv_sqrt_bc2 = T::of(1.0 / bc2.sqrt());
        let eps = T::of(c.eps);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p = *p - step_size * *m / ((*v).sqrt() * inv_sqrt_bc2 + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        let mut p = [1.0f64, -2.0];
        let mut st = AdamState::new(AdamConfig::default(), &[2]);
        st.step(&mut [&mut p[..]], &[&[0.3, -5.0]]).unwrap();
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-8);
        assert!((p[1] - (-2.0 + 1e-3)).abs() < 1e-8);
        assert_eq!(st.step_count(), 1);
    }

    /// Closed-form recursion: with constant gradient g the bias-corrected
    /// moments are exactly g and g^2, so every step moves by lr * g/(|g|+eps).
    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut p = [0.5f64];
        let mut st = AdamState::new(AdamConfig::default(), &[1]);
        let mut prev = p[0];
        for _ in 0..2 {
            st.step(&mut [&mut p[..]], &[&[0.7]]).unwrap();
            assert!(p[0] < prev);
            let expected = prev - 1e-3 * 0.7 / (0.7 + 1e-8);
            assert!((p[0] - expected).abs() < 1e-10);
            prev = p[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = [0.0f32; 3];
        let mut st = AdamState::new(AdamConfig::default(), &[3]);
        assert!(st.step(&mut [&mut p[..]], &[&[0.0; 2]]).is_err());
        assert!(st.step(&mut [], &[]).is_err());
    }

    proptest! {
        #[test]
        fn zero_gradients_leave_params_unchanged(
            vals in prop::collection::vec(-10.0f32..10.0, 1..40),
            steps in 1usize..5,
        ) {
            let mut p = vals.clone();
            let zeros = vec![0.0f32; vals.len()];
            let mut st = AdamState::new(AdamConfig::default(), &[vals.len()]);
            for _ in 0..steps {
                st.step(&mut [&mut p[..]], &[&zeros[..]]).unwrap();
            }
            prop_assert_eq!(p, vals);
            prop_assert!(st.moments().1.iter().flatten().all(|&v| v >= 0.0));
        }
    }
}
