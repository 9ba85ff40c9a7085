use ndarray::Zip;

use super::mlp::{Gradients, Mlp};
use super::NnError;
use crate::codec::{Reader, Writer};

/// First/second moment accumulators and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub state: AdamState,
    skipped: u64,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            state: AdamState { m: Gradients::zeros_like(net), v: Gradients::zeros_like(net), step: 0 },
            skipped: 0,
        }
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    /// Applies one bias-corrected update. Non-finite gradients leave `net` untouched.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        if !grads.is_finite() {
            self.skipped += 1;
            return Err(NnError::NonFiniteGradient);
        }
        for (a, b) in net.weights.iter().zip(&grads.weights) {
            if a.dim() != b.dim() {
                return Err(NnError::DimensionMismatch { expected: a.len(), got: b.len() });
            }
        }
        let s = &mut self.state;
        s.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(s.step as i32);
        let c2 = 1.0 - b2.powi(s.step as i32);
        let lr = self.lr;
        let update = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..net.weights.len() {
            Zip::from(&mut net.weights[l])
                .and(&grads.weights[l])
                .and(&mut s.m.weights[l])
                .and(&mut s.v.weights[l])
                .for_each(update);
            Zip::from(&mut net.biases[l])
                .and(&grads.biases[l])
                .and(&mut s.m.biases[l])
                .and(&mut s.v.biases[l])
                .for_each(update);
        }
        Ok(())
    }

    pub(crate) fn write_into(&self, w: &mut Writer) {
        for x in [self.lr, self.beta1, self.beta2, self.eps] {
            w.f64(x);
        }
        w.u64(self.state.step);
        w.u64(self.skipped);
        w.f64s(&self.state.m.flat());
        w.f64s(&self.state.v.flat());
    }

    pub(crate) fn read_from(r: &mut Reader, net: &Mlp) -> Result<Self, String> {
        let mut opt = Adam::new(net, r.f64()?);
        opt.beta1 = r.f64()?;
        opt.beta2 = r.f64()?;
        opt.eps = r.f64()?;
        opt.state.step = r.u64()?;
        opt.skipped = r.u64()?;
        for target in [&mut opt.state.m, &mut opt.state.v] {
            let flat = r.f64s()?;
            let mut shadow = net.clone();
            shadow.set_params_flat(&flat).map_err(|e| e.to_string())?;
            *target = Gradients { weights: shadow.weights, biases: shadow.biases };
        }
        Ok(opt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> Mlp {
        Mlp::new(MlpSpec::new(3, &[4], 2, Activation::Identity), 1.0, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut n = net();
        let before = n.clone();
        let mut opt = Adam::new(&n, 1e-3);
        opt.step(&mut n, &Gradients::zeros_like(&before)).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut n = net();
        let before = n.params_flat();
        let mut opt = Adam::new(&n, 1e-2);
        let mut g = Gradients::zeros_like(&n);
        g.weights[0].fill(0.5);
        g.biases[1].fill(-2.0);
        for _ in 0..100 {
            opt.step(&mut n, &g).unwrap();
        }
        assert!(n.weights[0].iter().zip(net().weights[0].iter()).all(|(a, b)| a < b));
        assert!(n.biases[1].iter().zip(net().biases[1].iter()).all(|(a, b)| a > b));
        assert_eq!(n.weights[1], net().weights[1]);
        assert_ne!(n.params_flat(), before);
    }

    #[test]
    fn first_step_size_equals_lr() {
        let mut n = net();
        let mut opt = Adam::new(&n, 1e-3);
        let mut g = Gradients::zeros_like(&n);
        g.weights[0][[0, 0]] = 3.7;
        let w0 = n.weights[0][[0, 0]];
        opt.step(&mut n, &g).unwrap();
        assert!((w0 - n.weights[0][[0, 0]] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_skipped() {
        let mut n = net();
        let before = n.clone();
        let mut opt = Adam::new(&n, 1e-3);
        let mut g = Gradients::zeros_like(&n);
        g.biases[0][0] = f64::NAN;
        assert_eq!(opt.step(&mut n, &g), Err(NnError::NonFiniteGradient));
        assert_eq!(n, before);
        assert_eq!(opt.skipped(), 1);
        assert_eq!(opt.state.step, 0);
    }

    #[test]
    fn identical_runs_bitwise_equal() {
        let run = || {
            let mut n = net();
            let mut opt = Adam::new(&n, 1e-2);
            let mut g = Gradients::zeros_like(&n);
            for i in 0..20 {
                g.weights[0].fill((i as f64).sin());
                opt.step(&mut n, &g).unwrap();
            }
            n.params_flat()
        };
        assert_eq!(run(), run());
    }
}
