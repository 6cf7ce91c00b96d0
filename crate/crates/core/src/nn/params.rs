use rand::Rng;
use rand_distr::{Distribution, Normal};

/// A named, shaped block of trainable scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered collection of parameter tensors. Layers refer to entries by index,
/// the checkpoint archive by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    pub tensors: Vec<ParamTensor>,
}

impl Params {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> usize {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(ParamTensor {
            name: name.into(),
            shape,
            data,
        });
        self.tensors.len() - 1
    }

    /// He-normal weight of `fan_in` inputs followed by a zero bias.
    /// Returns the weight index; the bias is at `index + 1`.
    pub fn push_layer<R: Rng>(
        &mut self,
        name: &str,
        weight_shape: Vec<usize>,
        fan_in: usize,
        bias_len: usize,
        rng: &mut R,
    ) -> usize {
        let n: usize = weight_shape.iter().product();
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
        let w: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let idx = self.push(format!("{name}.weight"), weight_shape, w);
        self.push(format!("{name}.bias"), vec![bias_len], vec![0.0; bias_len]);
        idx
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn zeros_like(&self) -> Grads {
        Grads {
            tensors: self.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flat read of scalar `i` across all tensors in order.
    pub fn flat_get(&self, mut i: usize) -> f64 {
        for t in &self.tensors {
            if i < t.data.len() {
                return t.data[i];
            }
            i -= t.data.len();
        }
        panic!("flat parameter index out of range")
    }

    pub fn flat_set(&mut self, mut i: usize, v: f64) {
        for t in &mut self.tensors {
            if i < t.data.len() {
                t.data[i] = v;
                return;
            }
            i -= t.data.len();
        }
        panic!("flat parameter index out of range")
    }

    /// Same names and shapes, in the same order.
    pub fn same_layout(&self, other: &Params) -> bool {
        self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }
}

/// Gradient buffers laid out like a [`Params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub tensors: Vec<Vec<f64>>,
}

impl Grads {
    pub fn pair_mut(&mut self, weight_idx: usize) -> (&mut [f64], &mut [f64]) {
        let (a, b) = self.tensors.split_at_mut(weight_idx + 1);
        (&mut a[weight_idx], &mut b[0])
    }

    pub fn flat_get(&self, mut i: usize) -> f64 {
        for t in &self.tensors {
            if i < t.len() {
                return t[i];
            }
            i -= t.len();
        }
        panic!("flat gradient index out of range")
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors
            .iter_mut()
            .flat_map(|t| t.iter_mut())
            .for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, other: &Grads, s: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }
}
