//! Conditional denoising actor: a linear noise schedule, the reverse
//! sampling chain that turns Gaussian noise into an action vector given an
//! observation, and the denoising regression loss.
//!
//! Sampling runs x_T ~ N(0,I), then for t = T..1
//!   x_{t−1} = x_t/√α_t − β_t/(√α_t(1−ᾱ_t))·ε̂(x_t, g, t) + √β_t·ε
//! with fresh ε per step except the final one, which adds no noise so
//! evaluation at zero noise scale is a deterministic action mean.

use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::neural::{GradTape, Gradients, Mlp, NeuralError};

pub const DEFAULT_STEPS: usize = 5;
pub const DEFAULT_BETA_START: f64 = 0.1;
pub const DEFAULT_BETA_END: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DiffusionError {
    #[error("schedule needs steps >= 1 and 0 < beta_start <= beta_end < 1")]
    InvalidRange,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        make_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).unwrap()
    }
}

/// Linear β interpolation from β_start to β_end over `steps` values, with
/// ᾱ_t as the running product of α_t = 1−β_t.
pub fn make_schedule(
    steps: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule, DiffusionError> {
    if steps < 1 || beta_start <= 0.0 || beta_end >= 1.0 || beta_start > beta_end {
        return Err(DiffusionError::InvalidRange);
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for &a in &alphas {
        acc *= a;
        alpha_bars.push(acc);
    }
    Ok(NoiseSchedule { betas, alphas, alpha_bars })
}

/// Noise-prediction network over the concatenation (x_t, condition,
/// one-hot timestep); output has the action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet {
    pub net: Mlp,
    pub x_dim: usize,
    pub cond_dim: usize,
    pub steps: usize,
}

impl EpsilonNet {
    pub fn new<R: Rng>(
        x_dim: usize,
        cond_dim: usize,
        steps: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let net = Mlp::new(&[x_dim + cond_dim + steps, hidden, x_dim], rng);
        EpsilonNet { net, x_dim, cond_dim, steps }
    }

    /// Input layout: x_t, then condition, then one-hot of t (1-based).
    pub fn assemble_input(&self, x: &[f64], cond: &[f64], t: usize) -> Vec<f64> {
        debug_assert!(t >= 1 && t <= self.steps);
        let mut v = Vec::with_capacity(self.x_dim + self.cond_dim + self.steps);
        v.extend_from_slice(x);
        v.extend_from_slice(cond);
        let mut onehot = vec![0.0; self.steps];
        onehot[t - 1] = 1.0;
        v.extend(onehot);
        v
    }

    pub fn predict(&self, x: &[f64], cond: &[f64], t: usize) -> Result<Vec<f64>, NeuralError> {
        self.net.forward(&self.assemble_input(x, cond, t))
    }
}

/// The random draws a chain run consumes: the initial x_T plus one ε per
/// step except the last. Scaling these is the exploration knob; zeros give
/// the deterministic evaluation action.
#[derive(Debug, Clone, PartialEq)]
pub struct Noises {
    pub x_init: Vec<f64>,
    pub step_eps: Vec<Vec<f64>>,
}

impl Noises {
    pub fn draw<R: Rng>(x_dim: usize, steps: usize, rng: &mut R) -> Self {
        let x_init = (0..x_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let step_eps = (0..steps.saturating_sub(1))
            .map(|_| (0..x_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        Noises { x_init, step_eps }
    }

    pub fn zeros(x_dim: usize, steps: usize) -> Self {
        Noises {
            x_init: vec![0.0; x_dim],
            step_eps: vec![vec![0.0; x_dim]; steps.saturating_sub(1)],
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        for v in self.x_init.iter_mut() {
            *v *= scale;
        }
        for eps in self.step_eps.iter_mut() {
            for v in eps.iter_mut() {
                *v *= scale;
            }
        }
        self
    }
}

/// Forward records of one chain run, enough to push a gradient at x₀ back
/// through every denoising step to the network parameters.
#[derive(Debug, Clone)]
pub struct ChainTape {
    /// Net tapes in sampling order (t = T first).
    pub tapes: Vec<GradTape>,
    /// The timestep each tape belongs to.
    pub ts: Vec<usize>,
    pub x0: Vec<f64>,
}

/// Run the reverse chain with the given frozen noises. Deterministic in
/// (parameters, condition, noises); this is the reparameterized form the
/// actor update differentiates through.
pub fn reverse_sample_with_noises(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    cond: &[f64],
    noises: &Noises,
) -> Result<(Vec<f64>, ChainTape), NeuralError> {
    let steps = sch.steps();
    assert_eq!(net.steps, steps, "network embeds a different step count");
    assert_eq!(noises.x_init.len(), net.x_dim);
    assert_eq!(noises.step_eps.len(), steps.saturating_sub(1));
    let mut x = noises.x_init.clone();
    let mut tapes = Vec::with_capacity(steps);
    let mut ts = Vec::with_capacity(steps);
    for t in (1..=steps).rev() {
        let a = sch.alphas[t - 1];
        let b = sch.betas[t - 1];
        let coeff = b / (a.sqrt() * (1.0 - sch.alpha_bars[t - 1]));
        let input = net.assemble_input(&x, cond, t);
        let (eps_hat, tape) = net.net.forward_tape(&input)?;
        let mut next = vec![0.0; net.x_dim];
        for i in 0..net.x_dim {
            next[i] = x[i] / a.sqrt() - coeff * eps_hat[i];
        }
        if t > 1 {
            let eps = &noises.step_eps[steps - t];
            for i in 0..net.x_dim {
                next[i] += b.sqrt() * eps[i];
            }
        }
        tapes.push(tape);
        ts.push(t);
        x = next;
    }
    Ok((x.clone(), ChainTape { tapes, ts, x0: x }))
}

/// Sample an action vector from fresh noise.
pub fn reverse_sample<R: Rng>(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    cond: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>, NeuralError> {
    let noises = Noises::draw(net.x_dim, sch.steps(), rng);
    Ok(reverse_sample_with_noises(net, sch, cond, &noises)?.0)
}

/// Reverse-mode pass through the whole chain: given dL/dx₀, returns the
/// accumulated parameter gradients and dL/dx_T.
pub fn chain_backward(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    tape: &ChainTape,
    dloss_dx0: &[f64],
) -> Result<(Gradients, Vec<f64>), NeuralError> {
    assert_eq!(dloss_dx0.len(), net.x_dim);
    let mut acc = Gradients::zeros_like(&net.net);
    let mut gx = dloss_dx0.to_vec();
    for (tape_step, &t) in tape.tapes.iter().zip(tape.ts.iter()).rev() {
        let a = sch.alphas[t - 1];
        let coeff = sch.betas[t - 1] / (a.sqrt() * (1.0 - sch.alpha_bars[t - 1]));
        let upstream: Vec<f64> = gx.iter().map(|&v| -coeff * v).collect();
        let g = net.net.backward(tape_step, &upstream)?;
        let mut prev = vec![0.0; net.x_dim];
        for i in 0..net.x_dim {
            prev[i] = gx[i] / a.sqrt() + g.input[i];
        }
        acc.add_scaled(&g, 1.0);
        gx = prev;
    }
    Ok((acc, gx))
}

/// The frozen draws behind one denoising-loss evaluation: a uniform t and a
/// unit Gaussian ε per sample.
#[derive(Debug, Clone)]
pub struct NoisedBatch {
    pub ts: Vec<usize>,
    pub eps: Vec<Vec<f64>>,
}

pub fn draw_noised<R: Rng>(sch: &NoiseSchedule, batch: usize, x_dim: usize, rng: &mut R) -> NoisedBatch {
    let ts = (0..batch).map(|_| rng.gen_range(1..=sch.steps())).collect();
    let eps = (0..batch)
        .map(|_| (0..x_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    NoisedBatch { ts, eps }
}

/// Mean squared noise-prediction error on frozen draws:
/// mean_k ‖ε_k − ε̂(√ᾱ_t·x0_k + √(1−ᾱ_t)·ε_k, g_k, t_k)‖².
pub fn denoising_loss_on(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    x0s: &[Vec<f64>],
    conds: &[Vec<f64>],
    drawn: &NoisedBatch,
) -> Result<f64, NeuralError> {
    Ok(denoising_loss_grads_on(net, sch, x0s, conds, drawn)?.0)
}

/// Loss plus parameter gradients, shared with the behavior-cloning term.
pub fn denoising_loss_grads_on(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    x0s: &[Vec<f64>],
    conds: &[Vec<f64>],
    drawn: &NoisedBatch,
) -> Result<(f64, Gradients), NeuralError> {
    assert!(!x0s.is_empty(), "denoising loss needs a non-empty batch");
    assert_eq!(x0s.len(), conds.len());
    assert_eq!(x0s.len(), drawn.ts.len());
    let batch = x0s.len();
    let mut loss = 0.0;
    let mut acc = Gradients::zeros_like(&net.net);
    for k in 0..batch {
        let t = drawn.ts[k];
        let ab = sch.alpha_bars[t - 1];
        let xt: Vec<f64> = x0s[k]
            .iter()
            .zip(drawn.eps[k].iter())
            .map(|(&x0, &e)| ab.sqrt() * x0 + (1.0 - ab).sqrt() * e)
            .collect();
        let input = net.assemble_input(&xt, &conds[k], t);
        let (eps_hat, tape) = net.net.forward_tape(&input)?;
        let resid: Vec<f64> =
            drawn.eps[k].iter().zip(eps_hat.iter()).map(|(&e, &p)| e - p).collect();
        loss += resid.iter().map(|r| r * r).sum::<f64>();
        // d/dε̂ of ‖ε−ε̂‖² is −2(ε−ε̂); averaged over the batch
        let upstream: Vec<f64> = resid.iter().map(|r| -2.0 * r / batch as f64).collect();
        let g = net.net.backward(&tape, &upstream)?;
        acc.add_scaled(&g, 1.0);
    }
    Ok((loss / batch as f64, acc))
}

/// Convenience wrapper drawing fresh (t, ε) pairs.
pub fn denoising_loss<R: Rng>(
    net: &EpsilonNet,
    sch: &NoiseSchedule,
    x0s: &[Vec<f64>],
    conds: &[Vec<f64>],
    rng: &mut R,
) -> Result<f64, NeuralError> {
    let drawn = draw_noised(sch, x0s.len(), net.x_dim, rng);
    denoising_loss_on(net, sch, x0s, conds, &drawn)
}

/// Var(x₀) of the zero-predictor chain with unit-variance injected noise:
/// v ← v/α_t + β_t for t = T..2, then v ← v/α_1 (no noise on the last step).
pub fn zero_net_variance(sch: &NoiseSchedule) -> f64 {
    let mut v = 1.0;
    for t in (2..=sch.steps()).rev() {
        v = v / sch.alphas[t - 1] + sch.betas[t - 1];
    }
    v / sch.alphas[0]
}
