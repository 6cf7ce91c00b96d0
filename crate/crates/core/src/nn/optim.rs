use serde::{Deserialize, Serialize};

use super::params::{Grads, Params};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Adam moments (or nothing, for plain SGD) kept alongside one parameter set.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn adam(params: &Params, lr: f64, beta1: f64, beta2: f64) -> Self {
        Self::new(OptimizerKind::Adam, params, lr, beta1, beta2)
    }

    pub fn new(kind: OptimizerKind, params: &Params, lr: f64, beta1: f64, beta2: f64) -> Self {
        let zeros = || params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
        Optimizer {
            kind,
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, params: &mut Params, grads: &Grads) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.tensors.iter_mut().zip(&grads.tensors) {
                    for (w, d) in p.data.iter_mut().zip(g) {
                        *w -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for (k, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..g.len() {
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = Params::default();
        p.push("x", vec![2], vec![3.0, -2.0]);
        let mut opt = Optimizer::adam(&p, 0.1, 0.9, 0.999);
        for _ in 0..500 {
            let g = Grads {
                tensors: vec![p.tensors[0].data.iter().map(|x| 2.0 * x).collect()],
            };
            opt.apply(&mut p, &g);
        }
        assert!(p.tensors[0].data.iter().all(|x| x.abs() < 1e-2));
    }
}
