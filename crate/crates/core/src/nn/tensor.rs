/// Dense batch tensor in NCHW order. Fully-connected activations use
/// `[n, features, 1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length does not match shape {shape:?}"
        );
        Tensor { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Number of scalars per batch element.
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let len = self.sample_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn reshape(self, shape: [usize; 4]) -> Self {
        Tensor::from_vec(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks single-sample slices into a batch.
    pub fn stack(sample_shape: [usize; 3], samples: &[&[f64]]) -> Self {
        let len: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(len * samples.len());
        for s in samples {
            assert_eq!(s.len(), len, "sample length mismatch");
            data.extend_from_slice(s);
        }
        Tensor::from_vec(
            [samples.len(), sample_shape[0], sample_shape[1], sample_shape[2]],
            data,
        )
    }

    /// Concatenates two tensors along the channel axis.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
        assert_eq!(a.shape[0], b.shape[0]);
        assert_eq!(a.shape[2..], b.shape[2..]);
        let (la, lb) = (a.sample_len(), b.sample_len());
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        for i in 0..a.shape[0] {
            data.extend_from_slice(&a.data[i * la..(i + 1) * la]);
            data.extend_from_slice(&b.data[i * lb..(i + 1) * lb]);
        }
        Tensor::from_vec(
            [a.shape[0], a.shape[1] + b.shape[1], a.shape[2], a.shape[3]],
            data,
        )
    }

    /// Inverse of [`Tensor::concat_channels`].
    pub fn split_channels(&self, first: usize) -> (Tensor, Tensor) {
        assert!(first <= self.shape[1]);
        let plane = self.shape[2] * self.shape[3];
        let la = first * plane;
        let ls = self.sample_len();
        let mut a = Vec::with_capacity(self.shape[0] * la);
        let mut b = Vec::with_capacity(self.shape[0] * (ls - la));
        for i in 0..self.shape[0] {
            let s = &self.data[i * ls..(i + 1) * ls];
            a.extend_from_slice(&s[..la]);
            b.extend_from_slice(&s[la..]);
        }
        (
            Tensor::from_vec([self.shape[0], first, self.shape[2], self.shape[3]], a),
            Tensor::from_vec(
                [self.shape[0], self.shape[1] - first, self.shape[2], self.shape[3]],
                b,
            ),
        )
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
