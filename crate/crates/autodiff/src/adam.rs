use crate::error::{AutodiffError, Result};
use crate::scalar::Real;

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Real> AdamState<T> {
    /// Fresh state for `len` parameters with the usual defaults (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`).
    pub fn new(len: usize, lr: T) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }

    /// Applies one update to `theta` in place.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adam",
                lhs: vec![theta.len()],
                rhs: vec![grad.len()],
            });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(AutodiffError::NonFinite("adam gradient"));
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] = theta[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = AdamState::new(3, 0.01);
        let mut theta = vec![1.0, -2.0, 0.5];
        s.step(&mut theta, &[0.0; 3]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn first_step_bounded_by_learning_rate() {
        let mut s = AdamState::new(4, 0.01);
        let mut theta = vec![0.0_f64; 4];
        s.step(&mut theta, &[1e-3, -5.0, 200.0, 0.3]).unwrap();
        for d in theta {
            assert!(d.abs() <= 0.01 * (1.0 + 1e-6));
            assert!(d.abs() > 0.009);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut s = AdamState::new(1, 0.01);
        let mut theta = vec![1.0_f64];
        for _ in 0..1000 {
            let g = [2.0 * theta[0]];
            s.step(&mut theta, &g).unwrap();
        }
        assert!(theta[0].abs() < 1e-3, "theta = {}", theta[0]);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let mut s = AdamState::new(2, 0.01);
        let mut theta = vec![0.0; 2];
        assert!(s.step(&mut theta, &[1.0]).is_err());
    }
}
