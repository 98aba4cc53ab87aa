//! Dense ReLU network with a softmax head, trained by Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One fully connected layer; `w` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.w.chunks_exact(self.inputs)) {
            *o = row.iter().zip(x).map(|(w, x)| w * x).sum();
        }
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Gradients laid out like the network's parameters.
#[derive(Debug, Clone)]
pub struct Grads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros(net: &Mlp) -> Self {
        Grads {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl Mlp {
    /// Uniform fan-in initialisation, limit sqrt(6 / fan_in); zero biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let layers = sizes
            .windows(2)
            .map(|p| {
                let limit = (6.0 / p[0] as f64).sqrt();
                Layer {
                    inputs: p[0],
                    outputs: p[1],
                    w: (0..p[0] * p[1]).map(|_| rng.gen_range(-limit..limit)).collect(),
                    b: vec![0.0; p[1]],
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    /// Activations of every layer; the last entry holds probabilities.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            layer.forward(&acts[k], &mut z);
            if k == last {
                softmax_in_place(&mut z);
            } else {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().expect("network has layers")
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers.iter().flat_map(|l| &l.w).map(|w| w * w).sum()
    }

    /// Weighted mean cross-entropy plus `l2 * ||W||^2`, and its gradient.
    ///
    /// `weights` scales each sample's term; the mean divides by their sum.
    pub fn loss_and_grad(&self, xs: &[&[f64]], ys: &[usize], weights: &[f64], l2: f64) -> (f64, Grads) {
        let mut g = Grads::zeros(self);
        let total_w: f64 = weights.iter().sum();
        let mut loss = 0.0;
        for ((x, &y), &sw) in xs.iter().zip(ys).zip(weights) {
            let acts = self.activations(x);
            let probs = acts.last().unwrap();
            loss += -sw * probs[y].max(1e-300).ln();
            let scale = sw / total_w;
            let mut delta: Vec<f64> = probs.iter().enumerate().map(|(c, p)| scale * (p - f64::from(u8::from(c == y)))).collect();
            for k in (0..self.layers.len()).rev() {
                let layer = &self.layers[k];
                let input = &acts[k];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    g.b[k][o] += d;
                    let row = &mut g.w[k][o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, xi) in row.iter_mut().zip(input) {
                        *gw += d * xi;
                    }
                }
                if k == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &layer.w[o * layer.inputs..(o + 1) * layer.inputs];
                    for (bk, w) in back.iter_mut().zip(row) {
                        *bk += d * w;
                    }
                }
                for (bk, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *bk = 0.0;
                    }
                }
                delta = back;
            }
        }
        loss /= total_w;
        loss += l2 * self.weight_norm_sq();
        for (gw, layer) in g.w.iter_mut().zip(&self.layers) {
            for (gi, w) in gw.iter_mut().zip(&layer.w) {
                *gi += 2.0 * l2 * w;
            }
        }
        (loss, g)
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }
}

impl Grads {
    pub(crate) fn flat(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().zip(&self.b).flat_map(|(w, b)| w.iter().chain(b.iter()))
    }
}

/// Adam optimiser state over the flattened parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let n = net.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in net.params_mut().zip(grads.flat()).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::{Adam, Mlp};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
        let xs = (0..n).map(|_| (0..13).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let ys = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let ws = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        (xs, ys, ws)
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Mlp::new(&[13, 8, 8, 3], &mut rng);
        // Non-zero biases keep every pre-activation away from the ReLU kink.
        for layer in &mut net.layers {
            layer.b.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let (xs, ys, ws) = batch(&mut rng, 6);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let l2 = 1e-3;
        let (_, grads) = net.loss_and_grad(&refs, &ys, &ws, l2);
        let analytic: Vec<f64> = grads.flat().copied().collect();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (i, a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            let numeric = (plus.loss_and_grad(&refs, &ys, &ws, l2).0 - minus.loss_and_grad(&refs, &ys, &ws, l2).0) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-7);
            worst = worst.max(rel);
        }
        assert_eq!(analytic.len(), 13 * 8 + 8 + 8 * 8 + 8 + 8 * 3 + 3);
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn adam_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::new(&[13, 16, 3], &mut rng);
        let (xs, ys, _) = batch(&mut rng, 32);
        let ws = vec![1.0; 32];
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let mut opt = Adam::new(&net, 1e-2);
        let before = net.loss_and_grad(&refs, &ys, &ws, 0.0).0;
        for _ in 0..200 {
            let (_, g) = net.loss_and_grad(&refs, &ys, &ws, 0.0);
            opt.step(&mut net, &g);
        }
        assert!(net.loss_and_grad(&refs, &ys, &ws, 0.0).0 < 0.5 * before);
    }

    proptest! {
        #[test]
        fn outputs_form_a_simplex(seed in 0u64..1000, xs in prop::collection::vec(-50.0f64..50.0, 13)) {
            let net = Mlp::new(&[13, 8, 8, 3], &mut ChaCha8Rng::seed_from_u64(seed));
            let p = net.forward(&xs);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
