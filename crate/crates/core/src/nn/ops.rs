//! Differentiable primitives. Every forward function returns what its
//! backward needs; nothing is cached inside parameter objects, so a network
//! can be applied several times in one step (the translator's cycle pass).

use super::tensor::Tensor;

/// `c = a · b + beta · c` with row-major operands. `a` is `m×k` (or `k×m`
/// when `a_t`), `b` is `k×n` (or `n×k` when `b_t`), `c` is `m×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: bounds asserted above; strides describe row-major layouts of
    // exactly those extents.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Static geometry of a 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.padding - self.kernel) / self.stride + 1,
            (w + 2 * self.padding - self.kernel) / self.stride + 1,
        )
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    fn im2col(&self, input: &[f64], h: usize, w: usize, col: &mut [f64]) {
        let (oh, ow) = self.output_size(h, w);
        let k = self.kernel;
        let pad = self.padding as isize;
        let s = self.stride as isize;
        let mut row = 0;
        for c in 0..self.in_channels {
            let plane = &input[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let dst = &mut col[row * oh * ow..(row + 1) * oh * ow];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ki as isize - pad;
                        let line = &mut dst[oy * ow..(oy + 1) * ow];
                        if iy < 0 || iy >= h as isize {
                            line.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = ox as isize * s + kj as isize - pad;
                            *v = if ix < 0 || ix >= w as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im(&self, col: &[f64], h: usize, w: usize, out: &mut [f64]) {
        let (oh, ow) = self.output_size(h, w);
        let k = self.kernel;
        let pad = self.padding as isize;
        let s = self.stride as isize;
        let mut row = 0;
        for c in 0..self.in_channels {
            let plane = &mut out[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let src = &col[row * oh * ow..(row + 1) * oh * ow];
                    for oy in 0..oh {
                        let iy = oy as isize * s + ki as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..ow {
                            let ix = ox as isize * s + kj as isize - pad;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += src[oy * ow + ox];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

pub fn conv2d_forward(geo: &ConvGeometry, x: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
    assert_eq!(x.channels(), geo.in_channels, "conv input channel mismatch");
    let (h, w) = (x.height(), x.width());
    let (oh, ow) = geo.output_size(h, w);
    let rows = geo.in_channels * geo.kernel * geo.kernel;
    let mut out = Tensor::zeros([x.batch(), geo.out_channels, oh, ow]);
    let mut col = vec![0.0; rows * oh * ow];
    for i in 0..x.batch() {
        geo.im2col(x.sample(i), h, w, &mut col);
        let y = out.sample_mut(i);
        for (c, b) in bias.iter().enumerate() {
            y[c * oh * ow..(c + 1) * oh * ow].iter_mut().for_each(|v| *v = *b);
        }
        gemm(geo.out_channels, rows, oh * ow, weight, false, &col, false, y, 1.0);
    }
    out
}

/// Returns the input gradient; accumulates into `dw`/`db` when given.
pub fn conv2d_backward(
    geo: &ConvGeometry,
    x: &Tensor,
    weight: &[f64],
    dy: &Tensor,
    mut param_grads: Option<(&mut [f64], &mut [f64])>,
    need_input_grad: bool,
) -> Option<Tensor> {
    let (h, w) = (x.height(), x.width());
    let (oh, ow) = geo.output_size(h, w);
    let rows = geo.in_channels * geo.kernel * geo.kernel;
    let mut col = vec![0.0; rows * oh * ow];
    let mut dcol = vec![0.0; rows * oh * ow];
    let mut dx = need_input_grad.then(|| Tensor::zeros(x.shape()));
    for i in 0..x.batch() {
        let g = dy.sample(i);
        if let Some((dw, db)) = param_grads.as_mut() {
            geo.im2col(x.sample(i), h, w, &mut col);
            gemm(geo.out_channels, oh * ow, rows, g, false, &col, true, dw, 1.0);
            for (c, d) in db.iter_mut().enumerate() {
                *d += g[c * oh * ow..(c + 1) * oh * ow].iter().sum::<f64>();
            }
        }
        if let Some(dx) = dx.as_mut() {
            gemm(rows, geo.out_channels, oh * ow, weight, true, g, false, &mut dcol, 0.0);
            geo.col2im(&dcol, h, w, dx.sample_mut(i));
        }
    }
    dx
}

/// `x` is viewed as `[n, in]`; `weight` is `[in, out]`.
pub fn dense_forward(x: &Tensor, weight: &[f64], bias: &[f64]) -> Tensor {
    let (n, fin) = (x.batch(), x.sample_len());
    let fout = bias.len();
    assert_eq!(weight.len(), fin * fout, "dense weight shape mismatch");
    let mut out = Tensor::zeros([n, fout, 1, 1]);
    for row in out.data_mut().chunks_mut(fout) {
        row.copy_from_slice(bias);
    }
    gemm(n, fin, fout, x.data(), false, weight, false, out.data_mut(), 1.0);
    out
}

pub fn dense_backward(
    x: &Tensor,
    weight: &[f64],
    dy: &Tensor,
    param_grads: Option<(&mut [f64], &mut [f64])>,
    need_input_grad: bool,
) -> Option<Tensor> {
    let (n, fin) = (x.batch(), x.sample_len());
    let fout = dy.sample_len();
    if let Some((dw, db)) = param_grads {
        gemm(fin, n, fout, x.data(), true, dy.data(), false, dw, 1.0);
        for row in dy.data().chunks(fout) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
    }
    need_input_grad.then(|| {
        let mut dx = Tensor::zeros(x.shape());
        gemm(n, fout, fin, dy.data(), false, weight, true, dx.data_mut(), 0.0);
        dx
    })
}

/// 2×2 max pooling with stride 2. Returns the output and the flat argmax
/// index (within each sample) of every output cell.
pub fn maxpool2_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let [n, c, h, w] = x.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for i in 0..n {
        let src = x.sample(i);
        let dst = out.sample_mut(i);
        for ch in 0..c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = ch * h * w + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ch * h * w + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    dst[ch * oh * ow + oy * ow + ox] = src[best];
                    arg.push(best);
                }
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(in_shape: [usize; 4], arg: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(in_shape);
    let per = dy.sample_len();
    for i in 0..in_shape[0] {
        let g = dy.sample(i);
        let idx = &arg[i * per..(i + 1) * per];
        let d = dx.sample_mut(i);
        for (gv, &j) in g.iter().zip(idx) {
            d[j] += gv;
        }
    }
    dx
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2_forward(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape();
    let mut out = Tensor::zeros([n, c, 2 * h, 2 * w]);
    for i in 0..n {
        let src = x.sample(i);
        let dst = out.sample_mut(i);
        for ch in 0..c {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    dst[ch * 4 * h * w + y * 2 * w + xx] = src[ch * h * w + (y / 2) * w + xx / 2];
                }
            }
        }
    }
    out
}

pub fn upsample2_backward(dy: &Tensor) -> Tensor {
    let [n, c, h2, w2] = dy.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros([n, c, h, w]);
    for i in 0..n {
        let src = dy.sample(i);
        let dst = dx.sample_mut(i);
        for ch in 0..c {
            for y in 0..h2 {
                for xx in 0..w2 {
                    dst[ch * h * w + (y / 2) * w + xx / 2] += src[ch * h2 * w2 + y * w2 + xx];
                }
            }
        }
    }
    dx
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

/// Gradient of `leaky_relu` given the pre-activation input.
pub fn leaky_relu_backward(x: &Tensor, dy: &Tensor, slope: f64) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { slope * g })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Gradient of `tanh` given its output.
pub fn tanh_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&t, &g)| g * (1.0 - t * t))
        .collect();
    Tensor::from_vec(y.shape(), data)
}

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean categorical cross-entropy over rows of `logits` (`[n, classes]`).
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> (f64, Tensor) {
    let n = logits.batch();
    let k = logits.sample_len();
    assert_eq!(targets.len(), n);
    let mut grad = Tensor::zeros(logits.shape());
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let z = logits.sample(i);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[t];
        let p = softmax(z);
        let g = grad.sample_mut(i);
        for j in 0..k {
            g[j] = (p[j] - if j == t { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (loss / n as f64, grad)
}
