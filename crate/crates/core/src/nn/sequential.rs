use rand::{Rng, RngCore};

use super::ops::{self, ConvGeometry};
use super::params::{Grads, Params};
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// Weight at `param`, bias at `param + 1`.
    Conv { geo: ConvGeometry, param: usize },
    Dense { param: usize },
    Relu,
    LeakyRelu(f64),
    Tanh,
    MaxPool2,
    Dropout(f64),
    Flatten,
    Upsample2,
}

enum Saved {
    Input(Tensor),
    Output(Tensor),
    Pool { in_shape: [usize; 4], arg: Vec<usize> },
    Mask(Option<Vec<f64>>),
    Shape([usize; 4]),
    Nothing,
}

/// Activations recorded during a forward pass, consumed by `backward`.
pub struct Tape {
    saved: Vec<Saved>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Sequential { layers }
    }

    /// Inference pass: dropout disabled, nothing recorded.
    pub fn infer(&self, params: &Params, x: &Tensor) -> Tensor {
        let mut x = x.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv { geo, param } => ops::conv2d_forward(
                    geo,
                    &x,
                    &params.tensors[*param].data,
                    &params.tensors[param + 1].data,
                ),
                Layer::Dense { param } => ops::dense_forward(
                    &x,
                    &params.tensors[*param].data,
                    &params.tensors[param + 1].data,
                ),
                Layer::Relu => x.map(|v| v.max(0.0)),
                Layer::LeakyRelu(s) => ops::leaky_relu(&x, *s),
                Layer::Tanh => x.map(f64::tanh),
                Layer::MaxPool2 => ops::maxpool2_forward(&x).0,
                Layer::Dropout(_) => x,
                Layer::Flatten => {
                    let n = x.batch();
                    let f = x.sample_len();
                    x.reshape([n, f, 1, 1])
                }
                Layer::Upsample2 => ops::upsample2_forward(&x),
            };
        }
        x
    }

    /// Recording pass. Dropout is active only when `rng` is supplied.
    pub fn forward(
        &self,
        params: &Params,
        x: &Tensor,
        mut rng: Option<&mut dyn RngCore>,
    ) -> (Tensor, Tape) {
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut x = x.clone();
        for layer in &self.layers {
            let (y, s) = match layer {
                Layer::Conv { geo, param } => {
                    let y = ops::conv2d_forward(
                        geo,
                        &x,
                        &params.tensors[*param].data,
                        &params.tensors[param + 1].data,
                    );
                    (y, Saved::Input(x))
                }
                Layer::Dense { param } => {
                    let y = ops::dense_forward(
                        &x,
                        &params.tensors[*param].data,
                        &params.tensors[param + 1].data,
                    );
                    (y, Saved::Input(x))
                }
                Layer::Relu => (x.map(|v| v.max(0.0)), Saved::Input(x)),
                Layer::LeakyRelu(s) => (ops::leaky_relu(&x, *s), Saved::Input(x)),
                Layer::Tanh => {
                    let y = x.map(f64::tanh);
                    (y.clone(), Saved::Output(y))
                }
                Layer::MaxPool2 => {
                    let in_shape = x.shape();
                    let (y, arg) = ops::maxpool2_forward(&x);
                    (y, Saved::Pool { in_shape, arg })
                }
                Layer::Dropout(p) => match rng.as_deref_mut() {
                    Some(r) if *p > 0.0 => {
                        let keep = 1.0 - p;
                        let mask: Vec<f64> = (0..x.data().len())
                            .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        let mut y = x;
                        y.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                        (y, Saved::Mask(Some(mask)))
                    }
                    _ => (x, Saved::Mask(None)),
                },
                Layer::Flatten => {
                    let shape = x.shape();
                    let f = x.sample_len();
                    (x.reshape([shape[0], f, 1, 1]), Saved::Shape(shape))
                }
                Layer::Upsample2 => (ops::upsample2_forward(&x), Saved::Nothing),
            };
            saved.push(s);
            x = y;
        }
        (x, Tape { saved })
    }

    /// Backpropagates `dy` through the recorded pass. Parameter gradients are
    /// accumulated into `grads` when given; the input gradient is returned.
    pub fn backward(
        &self,
        params: &Params,
        tape: Tape,
        dy: Tensor,
        grads: Option<&mut Grads>,
    ) -> Tensor {
        self.backward_inner(params, tape, dy, grads, true)
            .expect("input gradient requested")
    }

    /// Like [`Sequential::backward`] but skips the input gradient of the
    /// first layer when only parameter gradients are wanted.
    pub fn backward_params(&self, params: &Params, tape: Tape, dy: Tensor, grads: &mut Grads) {
        self.backward_inner(params, tape, dy, Some(grads), false);
    }

    fn backward_inner(
        &self,
        params: &Params,
        tape: Tape,
        dy: Tensor,
        mut grads: Option<&mut Grads>,
        need_input_grad: bool,
    ) -> Option<Tensor> {
        let mut g = dy;
        for (i, (layer, saved)) in self.layers.iter().zip(tape.saved).enumerate().rev() {
            let need_input = i > 0 || need_input_grad;
            g = match (layer, saved) {
                (Layer::Conv { geo, param }, Saved::Input(x)) => ops::conv2d_backward(
                    geo,
                    &x,
                    &params.tensors[*param].data,
                    &g,
                    grads.as_deref_mut().map(|gr| gr.pair_mut(*param)),
                    need_input,
                )
                .unwrap_or_else(|| Tensor::zeros([0, 0, 0, 0])),
                (Layer::Dense { param }, Saved::Input(x)) => ops::dense_backward(
                    &x,
                    &params.tensors[*param].data,
                    &g,
                    grads.as_deref_mut().map(|gr| gr.pair_mut(*param)),
                    need_input,
                )
                .unwrap_or_else(|| Tensor::zeros([0, 0, 0, 0])),
                (Layer::Relu, Saved::Input(x)) => {
                    let data = x
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                        .collect();
                    Tensor::from_vec(x.shape(), data)
                }
                (Layer::LeakyRelu(s), Saved::Input(x)) => ops::leaky_relu_backward(&x, &g, *s),
                (Layer::Tanh, Saved::Output(y)) => ops::tanh_backward(&y, &g),
                (Layer::MaxPool2, Saved::Pool { in_shape, arg }) => {
                    ops::maxpool2_backward(in_shape, &arg, &g)
                }
                (Layer::Dropout(_), Saved::Mask(mask)) => {
                    if let Some(mask) = mask {
                        g.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
                    }
                    g
                }
                (Layer::Flatten, Saved::Shape(shape)) => g.reshape(shape),
                (Layer::Upsample2, Saved::Nothing) => ops::upsample2_backward(&g),
                _ => unreachable!("tape does not match layer sequence"),
            };
        }
        need_input_grad.then_some(g)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    use super::*;

    fn random(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| StandardNormal.sample(rng)).collect())
    }

    /// Central-difference oracle for `L = <net(x), probe>` with a replayed
    /// dropout mask.
    #[test]
    fn every_layer_kind_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = Params::default();
        let c1 = params.push_layer("c1", vec![3, 2 * 9], 18, 3, &mut rng);
        let c2 = params.push_layer("c2", vec![4, 3 * 16], 48, 4, &mut rng);
        let c3 = params.push_layer("c3", vec![2, 4 * 9], 36, 2, &mut rng);
        let d = params.push_layer("d", vec![2 * 4 * 4, 5], 32, 5, &mut rng);
        for t in &mut params.tensors {
            if t.name.ends_with("bias") {
                t.data.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            }
        }
        let geo = |cin, cout, k, s, p| ConvGeometry {
            in_channels: cin,
            out_channels: cout,
            kernel: k,
            stride: s,
            padding: p,
        };
        let net = Sequential::new(vec![
            Layer::Conv { geo: geo(2, 3, 3, 1, 1), param: c1 },
            Layer::LeakyRelu(0.2),
            Layer::Conv { geo: geo(3, 4, 4, 2, 1), param: c2 },
            Layer::Tanh,
            Layer::Upsample2,
            Layer::Conv { geo: geo(4, 2, 3, 1, 1), param: c3 },
            Layer::Relu,
            Layer::MaxPool2,
            Layer::Dropout(0.3),
            Layer::Flatten,
            Layer::Dense { param: d },
        ]);
        let x = random([2, 2, 8, 8], &mut rng);
        let probe = random([2, 5, 1, 1], &mut rng);
        let loss = |p: &Params, x: &Tensor| {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let (y, _) = net.forward(p, x, Some(&mut r));
            y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let (_, tape) = net.forward(&params, &x, Some(&mut r));
        let mut grads = params.zeros_like();
        let dx = net.backward(&params, tape, probe.clone(), Some(&mut grads));

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in (0..params.scalar_count()).step_by(7) {
            let orig = params.flat_get(i);
            let mut p = params.clone();
            p.flat_set(i, orig + h);
            let up = loss(&p, &x);
            p.flat_set(i, orig - h);
            let down = loss(&p, &x);
            let fd = (up - down) / (2.0 * h);
            let an = grads.flat_get(i);
            worst = worst.max((fd - an).abs() / (fd.abs().max(an.abs()).max(1e-4)));
        }
        for i in (0..x.data().len()).step_by(5) {
            let mut xp = x.clone();
            xp.data_mut()[i] += h;
            let up = loss(&params, &xp);
            xp.data_mut()[i] -= 2.0 * h;
            let down = loss(&params, &xp);
            let fd = (up - down) / (2.0 * h);
            let an = dx.data()[i];
            worst = worst.max((fd - an).abs() / (fd.abs().max(an.abs()).max(1e-4)));
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn infer_matches_forward_without_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = Params::default();
        let d = params.push_layer("d", vec![12, 3], 12, 3, &mut rng);
        let net = Sequential::new(vec![Layer::Dropout(0.5), Layer::Flatten, Layer::Dense { param: d }]);
        let x = random([2, 3, 2, 2], &mut rng);
        let (a, _) = net.forward(&params, &x, None);
        assert_eq!(a, net.infer(&params, &x));
    }
}
