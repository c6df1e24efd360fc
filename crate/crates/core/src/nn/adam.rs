use super::{Grads, NnError, Params};

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Advances the moments and returns the parameter delta.
    pub fn update(&mut self, grads: &[f64]) -> Result<Vec<f64>, NnError> {
        if grads.len() != self.m.len() {
            return Err(NnError::Shape {
                expected: self.m.len(),
                got: grads.len(),
            });
        }
        self.steps += 1;
        let c1 = 1.0 - self.beta1.powi(self.steps as i32);
        let c2 = 1.0 - self.beta2.powi(self.steps as i32);
        Ok(grads
            .iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(&g, (m, v))| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                -self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps)
            })
            .collect())
    }

    pub fn step(&mut self, params: &mut Params, grads: &Grads) -> Result<(), NnError> {
        let delta = self.update(&grads.flatten())?;
        params.apply_update(&delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, NetSpec};

    #[test]
    fn zero_grads_leave_params() {
        let spec = NetSpec::new(vec![3, 4, 2], Activation::Relu).unwrap();
        let mut p = Params::init(&spec, 0).unwrap();
        let before = p.clone();
        let mut opt = Adam::new(p.len(), 1e-3);
        let g = p.zero_grads();
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn scalar_quadratic_converges() {
        // L = (x - 3)^2
        let mut x = -2.0;
        let mut opt = Adam::new(1, 0.1);
        for _ in 0..200 {
            x += opt.update(&[2.0 * (x - 3.0)]).unwrap()[0];
        }
        assert!((x - 3.0f64).abs() < 1e-3, "{x}");
    }

    #[test]
    fn first_step_is_scale_consistent() {
        // eps is the only scale-dependent term, so keep |g| well above it
        let g: Vec<f64> = (0..20)
            .map(|i| if i % 3 == 0 { -1.0 } else { 1.0 } * (1.0 + (i * 37 % 11) as f64 * 0.4))
            .collect();
        let g2: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        let a = Adam::new(20, 1e-2).update(&g).unwrap();
        let b = Adam::new(20, 5e-3).update(&g2).unwrap();
        let unit = |v: &[f64]| {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect::<Vec<_>>()
        };
        for (x, y) in unit(&a).iter().zip(unit(&b)) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut opt = Adam::new(3, 0.05);
            let mut x = vec![1.0, -1.0, 0.5];
            for k in 0..50 {
                let g: Vec<f64> = x.iter().map(|v| v * (k as f64 + 1.0).sin()).collect();
                let d = opt.update(&g).unwrap();
                x.iter_mut().zip(d).for_each(|(a, b)| *a += b);
            }
            x
        };
        assert_eq!(run(), run());
    }
}
