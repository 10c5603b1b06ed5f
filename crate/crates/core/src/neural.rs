//! Dense-network substrate shared by the diffusion actor and the critics:
//! multilayer perceptrons with exact reverse-mode gradients (including the
//! gradient with respect to the input, needed to chain networks together)
//! and an adaptive-moment optimizer.
//!
//! Parameters are stored as f32; all arithmetic runs in f64 so reductions
//! stay deterministic across platforms.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NeuralError {
    #[error("expected input of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("tape does not match this network")]
    StaleTape,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Fully-connected network. `weights[l]` is row-major with shape
/// (sizes[l+1], sizes[l]); hidden layers are relu, the output is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub weights: Vec<Vec<f32>>,
    pub biases: Vec<Vec<f32>>,
    pub acts: Vec<Activation>,
}

impl Mlp {
    /// Seeded init: every weight and bias uniform in ±1/√fan_in.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        assert!(sizes.iter().all(|&s| s > 0), "zero-width layer");
        let layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let mut acts = Vec::with_capacity(layers);
        for l in 0..layers {
            let fan_in = sizes[l];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..sizes[l + 1] * fan_in)
                    .map(|_| rng.gen_range(-bound..bound) as f32)
                    .collect(),
            );
            biases.push((0..sizes[l + 1]).map(|_| rng.gen_range(-bound..bound) as f32).collect());
            acts.push(if l + 1 == layers { Activation::Linear } else { Activation::Relu });
        }
        Mlp { sizes: sizes.to_vec(), weights, biases, acts }
    }

    /// All parameters zero; useful as a known-output network.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2);
        let layers = sizes.len() - 1;
        let weights = (0..layers).map(|l| vec![0.0f32; sizes[l + 1] * sizes[l]]).collect();
        let biases = (0..layers).map(|l| vec![0.0f32; sizes[l + 1]]).collect();
        let acts = (0..layers)
            .map(|l| if l + 1 == layers { Activation::Linear } else { Activation::Relu })
            .collect();
        Mlp { sizes: sizes.to_vec(), weights, biases, acts }
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flat parameter view, weights then biases per layer. Used by the
    /// finite-difference checks and the soft target blend.
    pub fn get_param(&self, mut idx: usize) -> f32 {
        for l in 0..self.weights.len() {
            if idx < self.weights[l].len() {
                return self.weights[l][idx];
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                return self.biases[l][idx];
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f32) {
        for l in 0..self.weights.len() {
            if idx < self.weights[l].len() {
                self.weights[l][idx] = value;
                return;
            }
            idx -= self.weights[l].len();
            if idx < self.biases[l].len() {
                self.biases[l][idx] = value;
                return;
            }
            idx -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let (out, _) = self.forward_tape(input)?;
        Ok(out)
    }

    /// Forward pass that records the intermediates `backward` needs.
    pub fn forward_tape(&self, input: &[f64]) -> Result<(Vec<f64>, GradTape), NeuralError> {
        if input.len() != self.sizes[0] {
            return Err(NeuralError::ShapeMismatch { expected: self.sizes[0], got: input.len() });
        }
        let layers = self.weights.len();
        let mut pre = Vec::with_capacity(layers);
        let mut post = Vec::with_capacity(layers);
        let mut a: Vec<f64> = input.to_vec();
        for l in 0..layers {
            let rows = self.sizes[l + 1];
            let cols = self.sizes[l];
            let w = &self.weights[l];
            let mut z = vec![0.0f64; rows];
            for o in 0..rows {
                let row = &w[o * cols..(o + 1) * cols];
                let mut acc = self.biases[l][o] as f64;
                for (wi, ai) in row.iter().zip(a.iter()) {
                    acc += *wi as f64 * ai;
                }
                z[o] = acc;
            }
            let act = self.acts[l];
            let out: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            a = out.clone();
            post.push(out);
        }
        let tape = GradTape { input: input.to_vec(), pre, post };
        Ok((a, tape))
    }

    /// Exact reverse-mode gradients of a scalar loss, given dL/doutput.
    pub fn backward(&self, tape: &GradTape, dloss_dout: &[f64]) -> Result<Gradients, NeuralError> {
        let layers = self.weights.len();
        if tape.pre.len() != layers
            || tape.input.len() != self.sizes[0]
            || tape.pre.iter().enumerate().any(|(l, z)| z.len() != self.sizes[l + 1])
        {
            return Err(NeuralError::StaleTape);
        }
        if dloss_dout.len() != self.output_len() {
            return Err(NeuralError::ShapeMismatch {
                expected: self.output_len(),
                got: dloss_dout.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = dloss_dout
            .iter()
            .zip(tape.pre[layers - 1].iter())
            .map(|(&g, &z)| g * self.acts[layers - 1].derivative(z))
            .collect();
        for l in (0..layers).rev() {
            let cols = self.sizes[l];
            let below: &[f64] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                let row = &mut grads.weights[l][o * cols..(o + 1) * cols];
                for (gw, &a) in row.iter_mut().zip(below.iter()) {
                    *gw += d * a;
                }
            }
            let mut next = vec![0.0f64; cols];
            let w = &self.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                let row = &w[o * cols..(o + 1) * cols];
                for (n, &wi) in next.iter_mut().zip(row.iter()) {
                    *n += wi as f64 * d;
                }
            }
            if l > 0 {
                for (n, &z) in next.iter_mut().zip(tape.pre[l - 1].iter()) {
                    *n *= self.acts[l - 1].derivative(z);
                }
            }
            delta = next;
        }
        grads.input = delta;
        Ok(grads)
    }

    /// θ_self ← ψ·θ_other + (1−ψ)·θ_self, the soft target blend.
    pub fn blend_from(&mut self, other: &Mlp, psi: f64) {
        assert_eq!(self.sizes, other.sizes, "blend needs matching shapes");
        for l in 0..self.weights.len() {
            for (t, &o) in self.weights[l].iter_mut().zip(other.weights[l].iter()) {
                *t = (psi * o as f64 + (1.0 - psi) * *t as f64) as f32;
            }
            for (t, &o) in self.biases[l].iter_mut().zip(other.biases[l].iter()) {
                *t = (psi * o as f64 + (1.0 - psi) * *t as f64) as f32;
            }
        }
    }

    /// Checkpoint: magic, layer sizes, activation codes, then all parameters
    /// as little-endian f32 (weights then biases, layer by layer).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MLP1");
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &a in &self.acts {
            out.push(a.code());
        }
        for l in 0..self.weights.len() {
            for &w in &self.weights[l] {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for &b in &self.biases[l] {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Mlp, NeuralError> {
        let bad = |m: &str| NeuralError::BadCheckpoint(String::from(m));
        if bytes.len() < 8 || &bytes[..4] != b"MLP1" {
            return Err(bad("missing MLP1 magic"));
        }
        let mut off = 4usize;
        let read_u32 = |off: &mut usize| -> Result<u32, NeuralError> {
            if *off + 4 > bytes.len() {
                return Err(NeuralError::BadCheckpoint(String::from("truncated header")));
            }
            let v = u32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap());
            *off += 4;
            Ok(v)
        };
        let n_sizes = read_u32(&mut off)? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(bad("implausible layer count"));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            sizes.push(read_u32(&mut off)? as usize);
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(bad("zero-width layer"));
        }
        let layers = n_sizes - 1;
        if off + layers > bytes.len() {
            return Err(bad("truncated activation codes"));
        }
        let mut acts = Vec::with_capacity(layers);
        for l in 0..layers {
            acts.push(Activation::from_code(bytes[off + l]).ok_or_else(|| {
                NeuralError::BadCheckpoint(format!("unknown activation code {}", bytes[off + l]))
            })?);
        }
        off += layers;
        let param_count: usize =
            (0..layers).map(|l| sizes[l + 1] * sizes[l] + sizes[l + 1]).sum();
        if bytes.len() - off != param_count * 4 {
            return Err(bad("parameter payload length mismatch"));
        }
        let next_f32 = |off: &mut usize| {
            let v = f32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap());
            *off += 4;
            v
        };
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            weights.push((0..sizes[l + 1] * sizes[l]).map(|_| next_f32(&mut off)).collect());
            biases.push((0..sizes[l + 1]).map(|_| next_f32(&mut off)).collect());
        }
        let net = Mlp { sizes, weights, biases, acts };
        if net
            .weights
            .iter()
            .chain(net.biases.iter())
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }
}

/// Forward intermediates: the input, pre-activations and post-activations
/// per layer. Consumed by `backward`.
#[derive(Debug, Clone)]
pub struct GradTape {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

/// Parameter gradients mirroring the network layout, plus the gradient with
/// respect to the input vector.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            input: vec![0.0; net.sizes[0]],
        }
    }

    /// self += scale · other (input gradient excluded; it is per-sample).
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (sw, ow) in self.weights.iter_mut().zip(other.weights.iter()) {
            for (s, &o) in sw.iter_mut().zip(ow.iter()) {
                *s += scale * o;
            }
        }
        for (sb, ob) in self.biases.iter_mut().zip(other.biases.iter()) {
            for (s, &o) in sb.iter_mut().zip(ob.iter()) {
                *s += scale * o;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in self.weights.iter_mut() {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in self.biases.iter_mut() {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for w in &self.weights {
            for &v in w {
                m = m.max(v.abs());
            }
        }
        for b in &self.biases {
            for &v in b {
                m = m.max(v.abs());
            }
        }
        m
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment accumulators, one slot per parameter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        AdamState {
            m_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One adaptive-moment descent step over all parameters.
pub fn adam_step(net: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    let update = |p: &mut f32, g: f64, m: &mut f64, v: &mut f64| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let mh = *m / bc1;
        let vh = *v / bc2;
        *p = (*p as f64 - lr * mh / (vh.sqrt() + ADAM_EPS)) as f32;
    };
    for l in 0..net.weights.len() {
        for i in 0..net.weights[l].len() {
            update(
                &mut net.weights[l][i],
                grads.weights[l][i],
                &mut state.m_w[l][i],
                &mut state.v_w[l][i],
            );
        }
        for i in 0..net.biases[l].len() {
            update(
                &mut net.biases[l][i],
                grads.biases[l][i],
                &mut state.m_b[l][i],
                &mut state.v_b[l][i],
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, tag};
    use rand::Rng;

    #[test]
    fn zero_net_maps_to_zero() {
        let net = Mlp::zeros(&[3, 4, 2]);
        let out = net.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn one_by_one_relu_hand_value() {
        let mut net = Mlp::zeros(&[1, 1]);
        net.acts[0] = Activation::Relu;
        net.weights[0][0] = 2.0;
        net.biases[0][0] = 1.0;
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = stream(3, &[tag::INIT, 1]);
        let net = Mlp::new(&[4, 8, 3], &mut rng);
        let x = [0.3, -0.1, 0.9, 0.0];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
        assert_eq!(
            net.forward(&[1.0]),
            Err(NeuralError::ShapeMismatch { expected: 4, got: 1 })
        );
    }

    #[test]
    fn linear_layer_analytic_gradient() {
        // y = w·x + b, L = (y − target)², dL/dw = 2 err x, dL/db = 2 err.
        let mut net = Mlp::zeros(&[1, 1]);
        net.acts[0] = Activation::Linear;
        net.weights[0][0] = 1.5;
        net.biases[0][0] = 0.25;
        let x = 2.0;
        let target = 0.5;
        let (y, tape) = net.forward_tape(&[x]).unwrap();
        let err = y[0] - target;
        let g = net.backward(&tape, &[2.0 * err]).unwrap();
        assert!((g.weights[0][0] - 2.0 * err * x).abs() < 1e-12);
        assert!((g.biases[0][0] - 2.0 * err).abs() < 1e-12);
        assert!((g.input[0] - 2.0 * err * 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_upstream_gradient_zero_params() {
        let mut rng = stream(4, &[tag::INIT, 2]);
        let net = Mlp::new(&[3, 5, 2], &mut rng);
        let (_, tape) = net.forward_tape(&[0.1, 0.2, 0.3]).unwrap();
        let g = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    fn relu_pattern(tape: &GradTape) -> Vec<bool> {
        tape.pre.iter().flat_map(|layer| layer.iter().map(|&z| z > 0.0)).collect()
    }

    /// Central differences against `backward` for L = Σ c_k y_k. The step is
    /// measured after f32 rounding so the quotient is exact in the step, and
    /// probes whose perturbation flips a relu's side (where the loss is not
    /// twice differentiable, so central differences are invalid) are skipped.
    fn finite_diff_check(sizes: &[usize], seed_lane: u64) -> f64 {
        let mut rng = stream(9, &[tag::ORACLE, seed_lane]);
        let mut net = Mlp::new(sizes, &mut rng);
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let coeff: Vec<f64> =
            (0..*sizes.last().unwrap()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, tape) = net.forward_tape(&x).unwrap();
        let base_pattern = relu_pattern(&tape);
        let g = net.backward(&tape, &coeff).unwrap();
        let h = 1e-3f64;
        let mut worst: f64 = 0.0;
        let n = net.param_count();
        let probes: Vec<usize> = if n > 80 {
            (0..80).map(|k| k * n / 80).collect()
        } else {
            (0..n).collect()
        };
        let loss = |net: &Mlp| -> (f64, Vec<bool>) {
            let (y, t) = net.forward_tape(&x).unwrap();
            (y.iter().zip(coeff.iter()).map(|(y, c)| y * c).sum(), relu_pattern(&t))
        };
        for idx in probes {
            let orig = net.get_param(idx);
            let plus = ((orig as f64) + h) as f32;
            let minus = ((orig as f64) - h) as f32;
            net.set_param(idx, plus);
            let (lp, pat_p) = loss(&net);
            net.set_param(idx, minus);
            let (lm, pat_m) = loss(&net);
            net.set_param(idx, orig);
            if pat_p != base_pattern || pat_m != base_pattern {
                continue;
            }
            let step = plus as f64 - minus as f64;
            let num = (lp - lm) / step;
            let ana = {
                let mut flat = Vec::new();
                for l in 0..net.weights.len() {
                    flat.extend(g.weights[l].iter().copied());
                    flat.extend(g.biases[l].iter().copied());
                }
                flat[idx]
            };
            let denom = ana.abs().max(num.abs()).max(1e-6);
            worst = worst.max((num - ana).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        assert!(finite_diff_check(&[3, 8, 2], 1) < 1e-4);
        assert!(finite_diff_check(&[5, 16, 4], 2) < 1e-4);
        assert!(finite_diff_check(&[6, 32, 32, 3], 3) < 1e-4);
    }

    #[test]
    fn adam_zero_grad_and_zero_lr_are_identity() {
        let mut rng = stream(5, &[tag::INIT, 3]);
        let mut net = Mlp::new(&[2, 4, 1], &mut rng);
        let snapshot = net.clone();
        let mut st = AdamState::new(&net);
        let zeros = Gradients::zeros_like(&net);
        adam_step(&mut net, &zeros, &mut st, 1e-2);
        assert_eq!(net, snapshot);
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][0] = 3.0;
        adam_step(&mut net, &g, &mut st, 0.0);
        assert_eq!(net, snapshot);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut net = Mlp::zeros(&[1, 1]);
        let mut st = AdamState::new(&net);
        let mut g = Gradients::zeros_like(&net);
        g.weights[0][0] = 0.37;
        let lr = 1e-3;
        adam_step(&mut net, &g, &mut st, lr);
        // bias-corrected first step is lr·g/(|g| + ε') ≈ lr·sign(g)
        assert!((net.weights[0][0] as f64 + lr).abs() < 1e-6);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn soft_blend_points() {
        let mut a = Mlp::zeros(&[1, 1]);
        let mut b = Mlp::zeros(&[1, 1]);
        b.weights[0][0] = 2.0;
        a.blend_from(&b, 0.5);
        assert_eq!(a.weights[0][0], 1.0);
        let mut c = Mlp::zeros(&[1, 1]);
        c.blend_from(&b, 1.0);
        assert_eq!(c.weights[0][0], 2.0);
        let mut d = Mlp::zeros(&[1, 1]);
        d.blend_from(&b, 0.0);
        assert_eq!(d.weights[0][0], 0.0);
    }

    #[test]
    fn checkpoint_roundtrip_and_corruption() {
        let mut rng = stream(6, &[tag::INIT, 4]);
        let net = Mlp::new(&[7, 16, 5], &mut rng);
        let bytes = net.to_bytes();
        let back = Mlp::from_bytes(&bytes).unwrap();
        assert_eq!(net, back);
        assert!(Mlp::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Mlp::from_bytes(&bad).is_err());
    }

    #[test]
    fn sin_regression_smoke() {
        let mut rng = stream(11, &[tag::INIT, 5]);
        let mut net = Mlp::new(&[1, 64, 1], &mut rng);
        let mut st = AdamState::new(&net);
        let xs: Vec<f64> = (0..100).map(|i| -3.0 + 6.0 * i as f64 / 99.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let mut mse = f64::INFINITY;
        for _ in 0..5000 {
            let mut grads = Gradients::zeros_like(&net);
            let mut loss = 0.0;
            for (&x, &y) in xs.iter().zip(ys.iter()) {
                let (out, tape) = net.forward_tape(&[x]).unwrap();
                let err = out[0] - y;
                loss += err * err;
                let g = net.backward(&tape, &[2.0 * err / xs.len() as f64]).unwrap();
                grads.add_scaled(&g, 1.0);
            }
            mse = loss / xs.len() as f64;
            if mse < 5e-3 {
                break;
            }
            adam_step(&mut net, &grads, &mut st, 1e-3);
        }
        assert!(mse < 1e-2, "sin fit stalled at mse {mse}");
    }
}
