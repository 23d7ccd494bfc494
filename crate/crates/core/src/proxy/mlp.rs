//! A small fully connected network with hand-written backpropagation.
//!
//! Hidden layers are `dense → [batch norm] → dropout → ReLU`; the output
//! layer is `dense → ReLU → mask`, so outputs are nonnegative and zero on
//! masked cells.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    /// He-initialized layer.
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / inputs as f64).sqrt();
        let normal = rand_distr::Normal::new(0.0, std).expect("positive std");
        let weights = (0..inputs * outputs).map(|_| rng.sample(normal)).collect();
        Self { inputs, outputs, weights, biases: vec![0.0; outputs] }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            *o = self.biases[j] + dot(row, x);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

impl BatchNorm {
    fn new(n: usize) -> Self {
        Self { scale: vec![1.0; n], shift: vec![0.0; n], running_mean: vec![0.0; n], running_var: vec![1.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    /// One per hidden layer when enabled.
    pub batch_norm: Option<Vec<BatchNorm>>,
    pub dropout: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smooth-L1 loss of one element and its derivative.
#[inline]
pub fn smooth_l1(diff: f64, beta: f64) -> (f64, f64) {
    let a = diff.abs();
    if a < beta {
        (0.5 * diff * diff / beta, diff / beta)
    } else {
        (a - 0.5 * beta, diff.signum())
    }
}

/// Parameter gradients, laid out like [`Mlp::params`].
pub type Gradient = Vec<f64>;

struct LayerCache {
    input: Vec<f64>,
    /// Pre-activation after dense (and batch norm, if any).
    pre: Vec<f64>,
    /// Normalized values before scale/shift, for batch-norm backward.
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    drop_mask: Vec<f64>,
}

impl Mlp {
    /// `sizes` lists layer widths from input to output.
    pub fn new(sizes: &[usize], dropout: f64, batch_norm: bool, rng: &mut ChaCha8Rng) -> Self {
        let layers: Vec<Dense> = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        let hidden = layers.len().saturating_sub(1);
        let batch_norm = batch_norm.then(|| layers[..hidden].iter().map(|l| BatchNorm::new(l.outputs)).collect());
        Self { layers, batch_norm, dropout }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn num_params(&self) -> usize {
        let dense: usize = self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum();
        let bn: usize = self.batch_norm.iter().flatten().map(|b| 2 * b.scale.len()).sum();
        dense + bn
    }

    /// Flattened trainable parameters: per layer weights then biases, then
    /// batch-norm scales and shifts.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        for b in self.batch_norm.iter().flatten() {
            out.extend_from_slice(&b.scale);
            out.extend_from_slice(&b.shift);
        }
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&p[at..at + dst.len()]);
            at += dst.len();
        };
        for l in &mut self.layers {
            take(&mut l.weights);
            take(&mut l.biases);
        }
        for b in self.batch_norm.iter_mut().flatten() {
            take(&mut b.scale);
            take(&mut b.shift);
        }
    }

    /// Inference: no dropout, batch norm uses running statistics.
    pub fn forward(&self, x: &[f64], mask: &[bool]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; l.outputs];
            l.forward(&cur, &mut out);
            if i < last {
                if let Some(bn) = &self.batch_norm {
                    let b = &bn[i];
                    for (j, o) in out.iter_mut().enumerate() {
                        let xh = (*o - b.running_mean[j]) / (b.running_var[j] + BN_EPS).sqrt();
                        *o = b.scale[j] * xh + b.shift[j];
                    }
                }
            }
            for o in &mut out {
                *o = o.max(0.0);
            }
            cur = out;
        }
        for (o, &m) in cur.iter_mut().zip(mask) {
            if !m {
                *o = 0.0;
            }
        }
        cur
    }

    /// Mean smooth-L1 loss over all elements of a batch and its gradient.
    ///
    /// With `rng` set, the pass runs in training mode: dropout is sampled
    /// and batch norm uses (and updates) batch statistics.
    pub fn loss_and_grad(
        &mut self,
        xs: &[&[f64]],
        ys: &[&[f64]],
        mask: &[bool],
        beta: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> (f64, Gradient) {
        let n = xs.len();
        let nl = self.layers.len();
        let training = rng.is_some();
        let keep = 1.0 - self.dropout;

        // Forward, layer by layer over the whole batch.
        let mut caches: Vec<Vec<LayerCache>> = Vec::with_capacity(nl);
        let mut acts: Vec<Vec<f64>> = xs.iter().map(|x| x.to_vec()).collect();
        for li in 0..nl {
            let l = &self.layers[li];
            let hidden = li + 1 < nl;
            let mut layer_cache: Vec<LayerCache> = acts
                .iter()
                .map(|a| {
                    let mut pre = vec![0.0; l.outputs];
                    l.forward(a, &mut pre);
                    LayerCache { input: a.clone(), pre, xhat: Vec::new(), inv_std: Vec::new(), drop_mask: Vec::new() }
                })
                .collect();
            if hidden {
                if let Some(bn) = self.batch_norm.as_mut() {
                    let b = &mut bn[li];
                    let m = l.outputs;
                    let (mean, var) = if training {
                        let mut mean = vec![0.0; m];
                        let mut var = vec![0.0; m];
                        for c in &layer_cache {
                            for j in 0..m {
                                mean[j] += c.pre[j] / n as f64;
                            }
                        }
                        for c in &layer_cache {
                            for j in 0..m {
                                var[j] += (c.pre[j] - mean[j]).powi(2) / n as f64;
                            }
                        }
                        for j in 0..m {
                            b.running_mean[j] = (1.0 - BN_MOMENTUM) * b.running_mean[j] + BN_MOMENTUM * mean[j];
                            b.running_var[j] = (1.0 - BN_MOMENTUM) * b.running_var[j] + BN_MOMENTUM * var[j];
                        }
                        (mean, var)
                    } else {
                        (b.running_mean.clone(), b.running_var.clone())
                    };
                    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                    for c in &mut layer_cache {
                        c.xhat = (0..m).map(|j| (c.pre[j] - mean[j]) * inv_std[j]).collect();
                        c.pre = (0..m).map(|j| b.scale[j] * c.xhat[j] + b.shift[j]).collect();
                        c.inv_std = inv_std.clone();
                    }
                }
                for c in &mut layer_cache {
                    c.drop_mask = match rng.as_deref_mut() {
                        Some(r) if self.dropout > 0.0 => (0..l.outputs)
                            .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect(),
                        _ => vec![1.0; l.outputs],
                    };
                }
            }
            acts = layer_cache
                .iter()
                .map(|c| {
                    let dm = &c.drop_mask;
                    c.pre
                        .iter()
                        .enumerate()
                        .map(|(j, &p)| (if hidden { p * dm[j] } else { p }).max(0.0))
                        .collect()
                })
                .collect();
            caches.push(layer_cache);
        }

        // Loss over masked outputs.
        let out_dim = self.output_dim();
        let denom = (n * out_dim) as f64;
        let mut loss = 0.0;
        let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(n);
        for (s, a) in acts.iter().enumerate() {
            let mut d = vec![0.0; out_dim];
            for j in 0..out_dim {
                let pred = if mask[j] { a[j] } else { 0.0 };
                let (lv, g) = smooth_l1(pred - ys[s][j], beta);
                loss += lv / denom;
                // Through the mask and the output ReLU.
                let pre = caches[nl - 1][s].pre[j];
                d[j] = if mask[j] && pre > 0.0 { g / denom } else { 0.0 };
            }
            deltas.push(d);
        }

        // Backward.
        let mut grad_layers: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()])).collect();
        let mut grad_bn: Vec<(Vec<f64>, Vec<f64>)> = self
            .batch_norm
            .iter()
            .flatten()
            .map(|b| (vec![0.0; b.scale.len()], vec![0.0; b.scale.len()]))
            .collect();
        for li in (0..nl).rev() {
            let l = &self.layers[li];
            let hidden = li + 1 < nl;
            if hidden {
                // deltas currently hold dL/d(activation); push through ReLU
                // and dropout to dL/d(pre).
                for (s, d) in deltas.iter_mut().enumerate() {
                    let c = &caches[li][s];
                    for j in 0..l.outputs {
                        let v = c.pre[j] * c.drop_mask[j];
                        d[j] = if v > 0.0 { d[j] * c.drop_mask[j] } else { 0.0 };
                    }
                }
                if let Some(bn) = &self.batch_norm {
                    let b = &bn[li];
                    let (gs, gb) = &mut grad_bn[li];
                    let m = l.outputs;
                    for (s, d) in deltas.iter().enumerate() {
                        for j in 0..m {
                            gs[j] += d[j] * caches[li][s].xhat[j];
                            gb[j] += d[j];
                        }
                    }
                    if training {
                        // dL/dz through batch statistics.
                        let mut sum_d = vec![0.0; m];
                        let mut sum_dx = vec![0.0; m];
                        for (s, d) in deltas.iter().enumerate() {
                            for j in 0..m {
                                let dxh = d[j] * b.scale[j];
                                sum_d[j] += dxh;
                                sum_dx[j] += dxh * caches[li][s].xhat[j];
                            }
                        }
                        let nf = n as f64;
                        for (s, d) in deltas.iter_mut().enumerate() {
                            let c = &caches[li][s];
                            for j in 0..m {
                                let dxh = d[j] * b.scale[j];
                                d[j] = c.inv_std[j] / nf * (nf * dxh - sum_d[j] - c.xhat[j] * sum_dx[j]);
                            }
                        }
                    } else {
                        for (s, d) in deltas.iter_mut().enumerate() {
                            let c = &caches[li][s];
                            for j in 0..m {
                                d[j] *= b.scale[j] * c.inv_std[j];
                            }
                        }
                    }
                }
            }
            let (gw, gb) = &mut grad_layers[li];
            let mut next: Vec<Vec<f64>> = Vec::with_capacity(if li > 0 { n } else { 0 });
            for (s, d) in deltas.iter().enumerate() {
                let input = &caches[li][s].input;
                let mut back = if li > 0 { vec![0.0; l.inputs] } else { Vec::new() };
                for j in 0..l.outputs {
                    let dj = d[j];
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    let row = j * l.inputs..(j + 1) * l.inputs;
                    for (g, &x) in gw[row.clone()].iter_mut().zip(input) {
                        *g += dj * x;
                    }
                    if li > 0 {
                        for (bk, &w) in back.iter_mut().zip(&l.weights[row]) {
                            *bk += dj * w;
                        }
                    }
                }
                if li > 0 {
                    next.push(back);
                }
            }
            deltas = next;
        }

        let mut grad = Vec::with_capacity(self.num_params());
        for (gw, gb) in grad_layers {
            grad.extend(gw);
            grad.extend(gb);
        }
        for (gs, gb) in grad_bn {
            grad.extend(gs);
            grad.extend(gb);
        }
        (loss, grad)
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn toy(batch_norm: bool) -> (Mlp, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = Mlp::new(&[3, 5, 4], 0.0, batch_norm, &mut rng);
        // Positive biases keep units away from the ReLU kink.
        for l in &mut net.layers {
            for b in &mut l.biases {
                *b = 0.3;
            }
        }
        let xs = vec![vec![0.5, -1.0, 2.0], vec![1.5, 0.2, -0.7], vec![-0.3, 0.8, 0.1]];
        let ys = vec![vec![1.0, 0.0, 2.0, 3.0], vec![0.0, 1.0, 0.5, 0.2], vec![2.0, 2.0, 0.0, 0.0]];
        (net, xs, ys, vec![true, true, false, true])
    }

    fn check_gradient(batch_norm: bool, training: bool) {
        let (mut net, xs, ys, mask) = toy(batch_norm);
        let xr: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let yr: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
        // Dropout is off, so training mode only switches batch norm to batch
        // statistics; a fresh generator per pass keeps passes identical.
        let pass = |net: &mut Mlp| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            net.loss_and_grad(&xr, &yr, &mask, 1.0, training.then_some(&mut rng))
        };
        let (_, grad) = pass(&mut net);
        let p0 = net.params();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            net.set_params(&p);
            let (lp, _) = pass(&mut net);
            p[i] -= 2.0 * h;
            net.set_params(&p);
            let (lm, _) = pass(&mut net);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - grad[i]).abs() / (fd.abs().max(grad[i].abs()).max(1e-6));
            worst = worst.max(rel);
        }
        net.set_params(&p0);
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(false, false);
        check_gradient(true, false);
        check_gradient(true, true);
    }

    #[test]
    fn mask_and_nonnegativity() {
        let (net, xs, _, mask) = toy(false);
        for x in &xs {
            let out = net.forward(x, &mask);
            assert_eq!(out[2], 0.0);
            assert!(out.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp { layers: vec![Dense::zeros(3, 4), Dense::zeros(4, 2)], batch_norm: None, dropout: 0.0 };
        assert_eq!(net.forward(&[1.0, 2.0, 3.0], &[true, true]), vec![0.0, 0.0]);
    }

    #[test]
    fn smooth_l1_pieces() {
        assert_eq!(smooth_l1(0.5, 1.0), (0.125, 0.5));
        assert_eq!(smooth_l1(-3.0, 1.0), (2.5, -1.0));
    }
}
