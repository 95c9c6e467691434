use crate::Real;

/// Adam optimizer; defaults follow the original recommendation except for the
/// learning rate, which callers set per training phase.
#[derive(Clone, Copy, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for one parameter vector, kept in f64.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

impl Adam {
    /// One bias-corrected update of `params` in place.
    pub fn step<T: Real>(&self, params: &mut [T], grads: &[T], state: &mut AdamState) {
        assert_eq!(params.len(), grads.len(), "param/grad length mismatch");
        assert_eq!(params.len(), state.m.len(), "param/state length mismatch");
        state.step += 1;
        let t = state.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            let g = grads[i].as_f64();
            state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
            state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = state.m[i] / bc1;
            let v_hat = state.v[i] / bc2;
            let update = self.lr * m_hat / (v_hat.sqrt() + self.eps);
            params[i] = T::from_f64(params[i].as_f64() - update);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descends_a_quadratic() {
        let mut x = vec![5.0f64];
        let mut state = AdamState::new(1);
        let adam = Adam::with_lr(0.1);
        for _ in 0..500 {
            let g = vec![2.0 * x[0]];
            adam.step(&mut x, &g, &mut state);
        }
        assert!(x[0].abs() < 1e-2, "x = {}", x[0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(gradient).
        let mut x = vec![1.0f64];
        let mut state = AdamState::new(1);
        Adam::with_lr(0.01).step(&mut x, &[0.3], &mut state);
        assert!((x[0] - 0.99).abs() < 1e-6);
    }
}
