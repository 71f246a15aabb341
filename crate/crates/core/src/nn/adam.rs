use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam moment accumulators for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Network<T>) -> Self {
        let zeros = || net.params().iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        Self { m: zeros(), v: zeros(), t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// Number of steps taken.
    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam step. Non-finite gradients leave the
    /// parameters and moments untouched.
    pub fn step(&mut self, net: &mut Network<T>, grads: &[Tensor<T>], lr: f64) -> Result<()> {
        if grads.len() != self.m.len()
            || grads.iter().zip(&self.m).any(|(g, m)| g.shape() != m.shape())
        {
            return Err(Error::Shape("gradients do not match optimizer state".into()));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("gradient tensor {i}")));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() - T::of(self.beta1.powi(t));
        let c2 = T::one() - T::of(self.beta2.powi(t));
        let lr = T::of(lr);
        let eps = T::of(self.eps);
        for (((p, g), m), v) in net.params_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (T::one() - b1) * gv;
                *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
