//! Translator networks. The generator is a small encoder/decoder with two
//! skip connections conditioned by six constant one-hot planes; the
//! discriminator is a strided convolutional trunk with a 7-way linear head
//! (one realness score, six class logits).

use rand::Rng;

use crate::emotion::NUM_EMOTIONS;
use crate::nn::ops::ConvGeometry;
use crate::nn::{Grads, Layer, Params, Sequential, Tape, Tensor};

const SLOPE: f64 = 0.2;

fn conv(cin: usize, cout: usize, kernel: usize, stride: usize, param: usize) -> Layer {
    Layer::Conv {
        geo: ConvGeometry {
            in_channels: cin,
            out_channels: cout,
            kernel,
            stride,
            padding: 1,
        },
        param,
    }
}

fn push_conv<R: Rng>(p: &mut Params, name: &str, cin: usize, cout: usize, k: usize, rng: &mut R) -> usize {
    p.push_layer(name, vec![cout, cin * k * k], cin * k * k, cout, rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub image_size: usize,
    pub identity: bool,
    enc1: Sequential,
    enc2: Sequential,
    mid: Sequential,
    dec: Sequential,
    out: Sequential,
    width: usize,
}

/// Records of one generator pass.
pub struct GeneratorTape {
    enc1: Tape,
    enc2: Tape,
    mid: Tape,
    dec: Tape,
    out: Tape,
}

impl Generator {
    /// Builds the architecture and freshly initialized parameters.
    pub fn build<R: Rng>(image_size: usize, width: usize, identity: bool, rng: &mut R) -> (Generator, Params) {
        let w = width;
        let c = 1 + NUM_EMOTIONS;
        let mut p = Params::default();
        let e1 = push_conv(&mut p, "enc1", c, w, 3, rng);
        let e2 = push_conv(&mut p, "enc2", w, 2 * w, 4, rng);
        let e3 = push_conv(&mut p, "enc3", 2 * w, 4 * w, 4, rng);
        let r1 = push_conv(&mut p, "res1", 4 * w, 4 * w, 3, rng);
        let r2 = push_conv(&mut p, "res2", 4 * w, 4 * w, 3, rng);
        let d1 = push_conv(&mut p, "dec1", 4 * w, 2 * w, 3, rng);
        let d2 = push_conv(&mut p, "dec2", 4 * w, w, 3, rng);
        let o = push_conv(&mut p, "out", 2 * w, 1, 3, rng);
        // Start near the zero image so early cycle errors are not saturated.
        for t in &mut p.tensors {
            if t.name == "out.weight" {
                t.data.iter_mut().for_each(|v| *v *= 0.1);
            }
        }
        let g = Generator {
            image_size,
            identity,
            enc1: Sequential::new(vec![conv(c, w, 3, 1, e1), Layer::LeakyRelu(SLOPE)]),
            enc2: Sequential::new(vec![conv(w, 2 * w, 4, 2, e2), Layer::LeakyRelu(SLOPE)]),
            mid: Sequential::new(vec![
                conv(2 * w, 4 * w, 4, 2, e3),
                Layer::LeakyRelu(SLOPE),
                conv(4 * w, 4 * w, 3, 1, r1),
                Layer::LeakyRelu(SLOPE),
                conv(4 * w, 4 * w, 3, 1, r2),
                Layer::LeakyRelu(SLOPE),
                Layer::Upsample2,
                conv(4 * w, 2 * w, 3, 1, d1),
                Layer::LeakyRelu(SLOPE),
            ]),
            dec: Sequential::new(vec![Layer::Upsample2, conv(4 * w, w, 3, 1, d2), Layer::LeakyRelu(SLOPE)]),
            out: Sequential::new(vec![conv(2 * w, 1, 3, 1, o), Layer::Tanh]),
            width,
        };
        (g, p)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    fn condition(x: &Tensor, targets: &[usize]) -> Tensor {
        let [n, _, h, w] = x.shape();
        let mut planes = Tensor::zeros([n, NUM_EMOTIONS, h, w]);
        for (i, &t) in targets.iter().enumerate() {
            planes.sample_mut(i)[t * h * w..(t + 1) * h * w]
                .iter_mut()
                .for_each(|v| *v = 1.0);
        }
        Tensor::concat_channels(x, &planes)
    }

    /// `x` is `[n, 1, S, S]` in [-1, 1]; output has the same shape.
    pub fn infer(&self, p: &Params, x: &Tensor, targets: &[usize]) -> Tensor {
        if self.identity {
            return x.clone();
        }
        let input = Self::condition(x, targets);
        let e1 = self.enc1.infer(p, &input);
        let e2 = self.enc2.infer(p, &e1);
        let m = self.mid.infer(p, &e2);
        let d = self.dec.infer(p, &Tensor::concat_channels(&m, &e2));
        self.out.infer(p, &Tensor::concat_channels(&d, &e1))
    }

    pub fn forward(&self, p: &Params, x: &Tensor, targets: &[usize]) -> (Tensor, Option<GeneratorTape>) {
        if self.identity {
            return (x.clone(), None);
        }
        let input = Self::condition(x, targets);
        let (e1, t1) = self.enc1.forward(p, &input, None);
        let (e2, t2) = self.enc2.forward(p, &e1, None);
        let (m, tm) = self.mid.forward(p, &e2, None);
        let (d, td) = self.dec.forward(p, &Tensor::concat_channels(&m, &e2), None);
        let (y, to) = self.out.forward(p, &Tensor::concat_channels(&d, &e1), None);
        (
            y,
            Some(GeneratorTape {
                enc1: t1,
                enc2: t2,
                mid: tm,
                dec: td,
                out: to,
            }),
        )
    }

    /// Returns the gradient with respect to the image input.
    pub fn backward(&self, p: &Params, tape: Option<GeneratorTape>, dy: Tensor, grads: &mut Grads) -> Tensor {
        let Some(t) = tape else {
            return dy;
        };
        let w = self.width;
        let g = self.out.backward(p, t.out, dy, Some(grads));
        let (gd, ge1_skip) = g.split_channels(w);
        let g = self.dec.backward(p, t.dec, gd, Some(grads));
        let (gm, ge2_skip) = g.split_channels(2 * w);
        let mut ge2 = self.mid.backward(p, t.mid, gm, Some(grads));
        ge2.add_assign(&ge2_skip);
        let mut ge1 = self.enc2.backward(p, t.enc2, ge2, Some(grads));
        ge1.add_assign(&ge1_skip);
        let gin = self.enc1.backward(p, t.enc1, ge1, Some(grads));
        gin.split_channels(1).0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub image_size: usize,
    net: Sequential,
}

impl Discriminator {
    pub fn build<R: Rng>(image_size: usize, width: usize, rng: &mut R) -> (Discriminator, Params) {
        let w = width;
        let mut p = Params::default();
        let c1 = push_conv(&mut p, "conv1", 1, w, 4, rng);
        let c2 = push_conv(&mut p, "conv2", w, 2 * w, 4, rng);
        let c3 = push_conv(&mut p, "conv3", 2 * w, 4 * w, 4, rng);
        let side = image_size / 8;
        let features = 4 * w * side * side;
        let head = p.push_layer("head", vec![features, 1 + NUM_EMOTIONS], features, 1 + NUM_EMOTIONS, rng);
        let net = Sequential::new(vec![
            conv(1, w, 4, 2, c1),
            Layer::LeakyRelu(SLOPE),
            conv(w, 2 * w, 4, 2, c2),
            Layer::LeakyRelu(SLOPE),
            conv(2 * w, 4 * w, 4, 2, c3),
            Layer::LeakyRelu(SLOPE),
            Layer::Flatten,
            Layer::Dense { param: head },
        ]);
        (Discriminator { image_size, net }, p)
    }

    /// `[n, 7]` rows: realness score then six class logits.
    pub fn infer(&self, p: &Params, x: &Tensor) -> Tensor {
        self.net.infer(p, x)
    }

    pub fn forward(&self, p: &Params, x: &Tensor) -> (Tensor, Tape) {
        self.net.forward(p, x, None)
    }

    /// Parameter gradients go to `grads` when given; returns the input
    /// gradient.
    pub fn backward(&self, p: &Params, tape: Tape, dy: Tensor, grads: Option<&mut Grads>) -> Tensor {
        self.net.backward(p, tape, dy, grads)
    }

    pub fn backward_params(&self, p: &Params, tape: Tape, dy: Tensor, grads: &mut Grads) {
        self.net.backward_params(p, tape, dy, grads)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn shapes_are_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (g, gp) = Generator::build(32, 4, false, &mut rng);
        let (d, dp) = Discriminator::build(32, 4, &mut rng);
        let x = Tensor::zeros([3, 1, 32, 32]);
        let y = g.infer(&gp, &x, &[0, 3, 5]);
        assert_eq!(y.shape(), [3, 1, 32, 32]);
        assert_eq!(d.infer(&dp, &y).shape(), [3, 7, 1, 1]);
        let (y2, _) = g.forward(&gp, &x, &[0, 3, 5]);
        assert_eq!(y, y2);
    }

    #[test]
    fn width_one_nets_are_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, gp) = Generator::build(32, 1, false, &mut rng);
        let (_, dp) = Discriminator::build(32, 1, &mut rng);
        assert!(gp.scalar_count() <= 1000, "{}", gp.scalar_count());
        assert!(dp.scalar_count() <= 1000, "{}", dp.scalar_count());
    }
}
