//! Fully-connected ReLU networks with explicit backpropagation and Adam.
//!
//! Two model shapes are provided. [`Mlp`] is a plain feedforward network
//! (ReLU hidden layers, linear output) used by the value-based and
//! fixed-level estimators. [`QuantileNet`] is the quantile-process model
//! `f(s, a, tau)`: the quantile level is either appended to the input
//! (`concat-scalar`) or passed through a cosine embedding whose output
//! multiplies the state-action features element-wise (`cosine`).
//!
//! Gradients are exact up to the ReLU subgradient convention (0 at the kink)
//! and the clip subgradient (0 outside the clamp range).

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};

const PI: f64 = core::f64::consts::PI;

/// Dense layer `y = W x + b` with `W` stored row-major (`out x in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Glorot-uniform initialization: weights from
    /// U(-sqrt(6/(in+out)), sqrt(6/(in+out))), zero biases.
    pub fn glorot_uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = libm::sqrt(6.0 / (in_dim + out_dim) as f64);
        let w = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            w,
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut y = self.b.clone();
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *out += acc;
        }
        y
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn zero_grad(&self) -> LinearGrad {
        LinearGrad {
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    /// Accumulates `delta (x) input` into the gradient and returns
    /// `W^T delta` for the upstream layer.
    fn backward(&self, input: &[f64], delta: &[f64], grad: &mut LinearGrad) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (o, d) in delta.iter().enumerate() {
            grad.b[o] += d;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad.w[row + i] += d * input[i];
                dx[i] += self.w[row + i] * d;
            }
        }
        dx
    }
}

/// Gradient buffer matching one [`Linear`].
#[derive(Debug, Clone)]
pub struct LinearGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

fn relu_inplace(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Masks `delta` by the ReLU subgradient of the matching activation
/// (1 where the activation is strictly positive, 0 otherwise).
fn relu_mask(delta: &mut [f64], activation: &[f64]) {
    for (d, a) in delta.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Plain feedforward network: ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer gradients for an [`Mlp`].
pub type MlpGrads = Vec<LinearGrad>;

impl Mlp {
    /// Builds the chain `widths[0] -> widths[1] -> ... -> widths.last()`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|w| *w == 0) {
            return Err(Error::Config("layer widths must chain >= 2 positive sizes".into()));
        }
        let layers = widths
            .windows(2)
            .map(|w| Linear::glorot_uniform(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum()
    }

    pub fn zero_grads(&self) -> MlpGrads {
        self.layers.iter().map(Linear::zero_grad).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                relu_inplace(&mut h);
            }
        }
        h
    }

    /// Forward pass keeping every layer input; needed for backprop.
    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            acts.push(h.clone());
            h = layer.forward(&h);
            if i < last {
                relu_inplace(&mut h);
            }
        }
        (h, acts)
    }

    /// Accumulates gradients of `sum_o out_grad[o] * output[o]` for one
    /// sample whose layer inputs were cached by [`Mlp::forward_cached`].
    pub fn backward_cached(&self, acts: &[Vec<f64>], out_grad: &[f64], grads: &mut MlpGrads) {
        let mut delta = out_grad.to_vec();
        for i in (0..self.layers.len()).rev() {
            let dx = self.layers[i].backward(&acts[i], &delta, &mut grads[i]);
            delta = dx;
            if i > 0 {
                relu_mask(&mut delta, &acts[i]);
            }
        }
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }
}

/// How the quantile level enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingMode {
    /// Append tau as one extra input component.
    ConcatScalar,
    /// Cosine features cos(i pi tau), i = 1..order, mapped through a linear
    /// layer + ReLU and multiplied element-wise into the first-layer
    /// state-action features.
    Cosine { order: usize },
}

/// Quantile-process model `f(state, action, tau) -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileNet {
    pub mode: EmbeddingMode,
    pub state_dim: usize,
    pub action_count: usize,
    /// When set to `F`, outputs are clamped to `[-F, F]`.
    pub output_clip: Option<f64>,
    /// Main chain; in cosine mode `layers[0]` is the state-action feature
    /// layer whose ReLU output is multiplied by the tau embedding.
    pub layers: Vec<Linear>,
    /// Cosine mode only: `order -> layers[0].out_dim`.
    pub embed: Option<Linear>,
}

/// Gradient buffers matching one [`QuantileNet`].
#[derive(Debug, Clone)]
pub struct QuantileGrads {
    pub layers: Vec<LinearGrad>,
    pub embed: Option<LinearGrad>,
}

/// Cached intermediate values of one quantile-net forward pass.
#[derive(Debug, Clone)]
pub struct QuantileCache {
    acts: Vec<Vec<f64>>,
    trunk: Option<Vec<f64>>,
    phi: Option<Vec<f64>>,
    cos_feat: Option<Vec<f64>>,
    out_pre_clip: f64,
}

impl QuantileNet {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_count: usize,
        hidden: &[usize],
        mode: EmbeddingMode,
        output_clip: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if state_dim == 0 || action_count == 0 {
            return Err(Error::Config("state_dim and action_count must be positive".into()));
        }
        if hidden.is_empty() || hidden.iter().any(|w| *w == 0) {
            return Err(Error::Config("at least one positive hidden width required".into()));
        }
        if let Some(f) = output_clip {
            if !(f > 0.0) {
                return Err(Error::Config("output clip bound must be positive".into()));
            }
        }
        let (input_dim, embed) = match mode {
            EmbeddingMode::ConcatScalar => (state_dim + action_count + 1, None),
            EmbeddingMode::Cosine { order } => {
                if order == 0 {
                    return Err(Error::Config("cosine order must be positive".into()));
                }
                let embed = Linear::glorot_uniform(order, hidden[0], rng);
                (state_dim + action_count, Some(embed))
            }
        };
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| Linear::glorot_uniform(w[0], w[1], rng))
            .collect();
        Ok(Self {
            mode,
            state_dim,
            action_count,
            output_clip,
            layers,
            embed,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Linear::param_count).sum::<usize>()
            + self.embed.as_ref().map_or(0, Linear::param_count)
    }

    pub fn zero_grads(&self) -> QuantileGrads {
        QuantileGrads {
            layers: self.layers.iter().map(Linear::zero_grad).collect(),
            embed: self.embed.as_ref().map(Linear::zero_grad),
        }
    }

    pub fn same_shape(&self, other: &QuantileNet) -> bool {
        self.mode == other.mode
            && self.state_dim == other.state_dim
            && self.action_count == other.action_count
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    fn check_inputs(&self, state: &[f64], action: usize, tau: f64) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::Input(alloc::format!(
                "state length {} != {}",
                state.len(),
                self.state_dim
            )));
        }
        if action >= self.action_count {
            return Err(Error::Input(alloc::format!(
                "action {action} out of range ({})",
                self.action_count
            )));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Input(alloc::format!(
                "quantile level must lie in (0,1), got {tau}"
            )));
        }
        Ok(())
    }

    fn base_input(&self, state: &[f64], action: usize, tau: f64) -> Vec<f64> {
        let extra = matches!(self.mode, EmbeddingMode::ConcatScalar) as usize;
        let mut x = Vec::with_capacity(self.state_dim + self.action_count + extra);
        x.extend_from_slice(state);
        for a in 0..self.action_count {
            x.push(if a == action { 1.0 } else { 0.0 });
        }
        if extra == 1 {
            x.push(tau);
        }
        x
    }

    fn cosine_features(order: usize, tau: f64) -> Vec<f64> {
        (1..=order).map(|i| libm::cos(i as f64 * PI * tau)).collect()
    }

    /// Scalar quantile estimate at level `tau`.
    pub fn forward(&self, state: &[f64], action: usize, tau: f64) -> Result<f64> {
        Ok(self.forward_cached(state, action, tau)?.0)
    }

    /// Forward pass retaining intermediates for [`QuantileNet::backward_cached`].
    pub fn forward_cached(
        &self,
        state: &[f64],
        action: usize,
        tau: f64,
    ) -> Result<(f64, QuantileCache)> {
        self.check_inputs(state, action, tau)?;
        let x = self.base_input(state, action, tau);
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut trunk = None;
        let mut phi = None;
        let mut cos_feat = None;

        acts.push(x);
        let mut h = self.layers[0].forward(&acts[0]);
        relu_inplace(&mut h);
        if let EmbeddingMode::Cosine { order } = self.mode {
            let feats = Self::cosine_features(order, tau);
            let embed = self.embed.as_ref().expect("cosine net has embed layer");
            let mut p = embed.forward(&feats);
            relu_inplace(&mut p);
            trunk = Some(h.clone());
            let merged: Vec<f64> = h.iter().zip(&p).map(|(a, b)| a * b).collect();
            phi = Some(p);
            cos_feat = Some(feats);
            h = merged;
        }

        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            acts.push(h.clone());
            h = layer.forward(&h);
            if i < last {
                relu_inplace(&mut h);
            }
        }
        let out_pre_clip = h[0];
        let out = match self.output_clip {
            Some(f) => out_pre_clip.clamp(-f, f),
            None => out_pre_clip,
        };
        Ok((
            out,
            QuantileCache {
                acts,
                trunk,
                phi,
                cos_feat,
                out_pre_clip,
            },
        ))
    }

    /// Accumulates gradients of `upstream * f(state, action, tau)` for one
    /// cached forward pass.
    pub fn backward_cached(&self, cache: &QuantileCache, upstream: f64, grads: &mut QuantileGrads) {
        let mut up = upstream;
        if let Some(f) = self.output_clip {
            if cache.out_pre_clip > f || cache.out_pre_clip < -f {
                up = 0.0;
            }
        }
        if up == 0.0 {
            return;
        }
        let mut delta = vec![up];
        for i in (1..self.layers.len()).rev() {
            let dx = self.layers[i].backward(&cache.acts[i], &delta, &mut grads.layers[i]);
            delta = dx;
            if i > 1 {
                relu_mask(&mut delta, &cache.acts[i]);
            }
        }
        // delta is now the gradient w.r.t. the input of layers[1], i.e. the
        // merged features in cosine mode or relu(L0 x) in concat mode.
        match self.mode {
            EmbeddingMode::ConcatScalar => {
                relu_mask(&mut delta, &cache.acts[1]);
                self.layers[0].backward(&cache.acts[0], &delta, &mut grads.layers[0]);
            }
            EmbeddingMode::Cosine { .. } => {
                let trunk = cache.trunk.as_ref().unwrap();
                let phi = cache.phi.as_ref().unwrap();
                let mut d_trunk: Vec<f64> = delta.iter().zip(phi).map(|(d, p)| d * p).collect();
                let mut d_phi: Vec<f64> = delta.iter().zip(trunk).map(|(d, t)| d * t).collect();
                relu_mask(&mut d_trunk, trunk);
                relu_mask(&mut d_phi, phi);
                self.layers[0].backward(&cache.acts[0], &d_trunk, &mut grads.layers[0]);
                let embed = self.embed.as_ref().unwrap();
                let embed_grads = grads.embed.as_mut().unwrap();
                embed.backward(cache.cos_feat.as_ref().unwrap(), &d_phi, embed_grads);
            }
        }
    }

    /// Exact gradients of `sum_i upstream_i * f(state_i, action_i, tau_i)`
    /// with respect to every parameter.
    pub fn backward(&self, batch: &[(&[f64], usize, f64, f64)]) -> Result<QuantileGrads> {
        if batch.is_empty() {
            return Err(Error::Input("backward needs a non-empty batch".into()));
        }
        let mut grads = self.zero_grads();
        for (state, action, tau, upstream) in batch {
            let (_, cache) = self.forward_cached(state, *action, *tau)?;
            self.backward_cached(&cache, *upstream, &mut grads);
        }
        Ok(grads)
    }
}

/// Adam optimizer state with bias correction. One instance drives exactly
/// one model; moment buffers are laid out in the model's parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn apply(&mut self, pairs: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        let total: usize = pairs.iter().map(|(p, _)| p.len()).sum();
        if total != self.m.len() || pairs.iter().any(|(p, g)| p.len() != g.len()) {
            return Err(Error::Internal(alloc::format!(
                "adam state sized for {} parameters, got {total}",
                self.m.len()
            )));
        }
        self.step += 1;
        self.beta1_pow *= self.beta1;
        self.beta2_pow *= self.beta2;
        let bc1 = 1.0 - self.beta1_pow;
        let bc2 = 1.0 - self.beta2_pow;
        let mut idx = 0;
        for (params, grads) in pairs.iter_mut() {
            for (p, g) in params.iter_mut().zip(grads.iter()) {
                self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * g;
                self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[idx] / bc1;
                let v_hat = self.v[idx] / bc2;
                *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
                idx += 1;
            }
        }
        Ok(())
    }
}

/// Which first-order optimizer drives training.
///
/// Adam's per-parameter normalization equalizes step sizes across losses,
/// which erases the robustness gap between bounded pinball gradients and
/// residual-proportional squared-loss gradients; gradient-proportional SGD
/// (with optional heavy-ball momentum) preserves it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Adam,
    Sgd { momentum: f64 },
}

/// Optimizer state for one model.
#[derive(Debug, Clone)]
pub enum Optim {
    Adam(AdamState),
    Sgd {
        lr: f64,
        momentum: f64,
        velocity: Vec<f64>,
    },
}

impl Optim {
    pub fn new(kind: OptimizerKind, param_count: usize, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optim::Adam(AdamState::new(param_count, lr)),
            OptimizerKind::Sgd { momentum } => Optim::Sgd {
                lr,
                momentum,
                velocity: vec![0.0; param_count],
            },
        }
    }

    fn apply(&mut self, pairs: &mut [(&mut [f64], &[f64])]) -> Result<()> {
        match self {
            Optim::Adam(state) => state.apply(pairs),
            Optim::Sgd {
                lr,
                momentum,
                velocity,
            } => {
                let total: usize = pairs.iter().map(|(p, _)| p.len()).sum();
                if total != velocity.len() || pairs.iter().any(|(p, g)| p.len() != g.len()) {
                    return Err(Error::Internal(alloc::format!(
                        "optimizer sized for {} parameters, got {total}",
                        velocity.len()
                    )));
                }
                let mut idx = 0;
                for (params, grads) in pairs.iter_mut() {
                    for (p, g) in params.iter_mut().zip(grads.iter()) {
                        velocity[idx] = *momentum * velocity[idx] + g;
                        *p -= *lr * velocity[idx];
                        idx += 1;
                    }
                }
                Ok(())
            }
        }
    }
}

fn quantile_pairs<'a>(
    net: &'a mut QuantileNet,
    grads: &'a QuantileGrads,
) -> Result<Vec<(&'a mut [f64], &'a [f64])>> {
    if net.layers.len() != grads.layers.len() || net.embed.is_some() != grads.embed.is_some() {
        return Err(Error::Internal("gradient layout does not match net".into()));
    }
    let mut pairs: Vec<(&mut [f64], &[f64])> = Vec::new();
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        pairs.push((&mut layer.w, &g.w));
        pairs.push((&mut layer.b, &g.b));
    }
    if let (Some(e), Some(g)) = (net.embed.as_mut(), grads.embed.as_ref()) {
        pairs.push((&mut e.w, &g.w));
        pairs.push((&mut e.b, &g.b));
    }
    Ok(pairs)
}

fn mlp_pairs<'a>(net: &'a mut Mlp, grads: &'a MlpGrads) -> Result<Vec<(&'a mut [f64], &'a [f64])>> {
    if net.layers.len() != grads.len() {
        return Err(Error::Internal("gradient layout does not match net".into()));
    }
    let mut pairs: Vec<(&mut [f64], &[f64])> = Vec::new();
    for (layer, g) in net.layers.iter_mut().zip(grads) {
        pairs.push((&mut layer.w, &g.w));
        pairs.push((&mut layer.b, &g.b));
    }
    Ok(pairs)
}

/// One Adam update of a quantile net.
pub fn adam_step_quantile(
    net: &mut QuantileNet,
    grads: &QuantileGrads,
    opt: &mut AdamState,
) -> Result<()> {
    let mut pairs = quantile_pairs(net, grads)?;
    opt.apply(&mut pairs)
}

/// One Adam update of a plain MLP.
pub fn adam_step_mlp(net: &mut Mlp, grads: &MlpGrads, opt: &mut AdamState) -> Result<()> {
    let mut pairs = mlp_pairs(net, grads)?;
    opt.apply(&mut pairs)
}

/// One update of a quantile net under the configured optimizer.
pub fn optim_step_quantile(
    net: &mut QuantileNet,
    grads: &QuantileGrads,
    opt: &mut Optim,
) -> Result<()> {
    let mut pairs = quantile_pairs(net, grads)?;
    opt.apply(&mut pairs)
}

/// One update of a plain MLP under the configured optimizer.
pub fn optim_step_mlp(net: &mut Mlp, grads: &MlpGrads, opt: &mut Optim) -> Result<()> {
    let mut pairs = mlp_pairs(net, grads)?;
    opt.apply(&mut pairs)
}

/// Polyak update `target <- (1 - rho) * target + rho * online`.
pub fn soft_update(target: &mut QuantileNet, online: &QuantileNet, rho: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::Internal("target/online architectures differ".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Input(alloc::format!("rho must lie in [0,1], got {rho}")));
    }
    let blend = |t: &mut Vec<f64>, o: &[f64]| {
        for (a, b) in t.iter_mut().zip(o) {
            *a = (1.0 - rho) * *a + rho * b;
        }
    };
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        blend(&mut tl.w, &ol.w);
        blend(&mut tl.b, &ol.b);
    }
    if let (Some(te), Some(oe)) = (target.embed.as_mut(), online.embed.as_ref()) {
        blend(&mut te.w, &oe.w);
        blend(&mut te.b, &oe.b);
    }
    Ok(())
}

/// Polyak update for plain MLPs.
pub fn soft_update_mlp(target: &mut Mlp, online: &Mlp, rho: f64) -> Result<()> {
    if !target.same_shape(online) {
        return Err(Error::Internal("target/online architectures differ".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Input(alloc::format!("rho must lie in [0,1], got {rho}")));
    }
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        for (a, b) in tl.w.iter_mut().zip(&ol.w) {
            *a = (1.0 - rho) * *a + rho * b;
        }
        for (a, b) in tl.b.iter_mut().zip(&ol.b) {
            *a = (1.0 - rho) * *a + rho * b;
        }
    }
    Ok(())
}
