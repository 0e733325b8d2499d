use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bce_loss, sigmoid};
use super::pooling::AttentivePooling;
use crate::error::{Error, Result};
use crate::scoring::{dot, pairwise_sum};
use crate::store::Frames;

/// Widths of the attack networks. `q` comes from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    /// Attention width.
    #[serde(default = "default_p")]
    pub p: usize,
    /// Hidden (utterance) or projection (speaker) width.
    #[serde(default = "default_r")]
    pub r: usize,
}

fn default_p() -> usize {
    128
}

fn default_r() -> usize {
    256
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape {
            p: default_p(),
            r: default_r(),
        }
    }
}

/// Flat access to a network's parameter tensors, in checkpoint order.
pub trait Parameters: Clone {
    /// Tensor names in checkpoint order.
    fn tensor_names(&self) -> &'static [&'static str];
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for t in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

fn fill_uniform<R: Rng>(rng: &mut R, xs: &mut [f64], fan_in: usize) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for x in xs {
        *x = rng.random_range(-bound..=bound);
    }
}

fn init_pooling<R: Rng>(rng: &mut R, q: usize, p: usize) -> AttentivePooling {
    let mut pool = AttentivePooling::zeros(q, p);
    fill_uniform(rng, &mut pool.w, q);
    fill_uniform(rng, &mut pool.u, p);
    pool
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let q = x.len();
    b.iter()
        .enumerate()
        .map(|(j, bj)| dot(&w[j * q..(j + 1) * q], x) + bj)
        .collect()
}

fn check_finite<P: Parameters>(net: &P) -> Result<()> {
    if net.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
        Ok(())
    } else {
        Err(Error::Validation("network has non-finite parameters".into()))
    }
}

/// Utterance-level attack network: attentive pooling, a ReLU hidden layer
/// and a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceNet {
    pub pooling: AttentivePooling,
    /// `r × q`.
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

impl UtteranceNet {
    pub fn zeros(q: usize, shape: NetShape) -> Self {
        UtteranceNet {
            pooling: AttentivePooling::zeros(q, shape.p),
            hidden_w: vec![0.0; shape.r * q],
            hidden_b: vec![0.0; shape.r],
            out_w: vec![0.0; shape.r],
            out_b: 0.0,
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero. Draw order follows
    /// the parameter order.
    pub fn init<R: Rng>(q: usize, shape: NetShape, rng: &mut R) -> Self {
        let mut net = UtteranceNet::zeros(q, shape);
        net.pooling = init_pooling(rng, q, shape.p);
        fill_uniform(rng, &mut net.hidden_w, q);
        fill_uniform(rng, &mut net.out_w, shape.r);
        net
    }

    pub fn q(&self) -> usize {
        self.pooling.q
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            p: self.pooling.p,
            r: self.hidden_b.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (q, NetShape { p, r }) = (self.q(), self.shape());
        let ok = self.pooling.w.len() == p * q
            && self.pooling.b.len() == p
            && self.pooling.u.len() == p
            && self.hidden_w.len() == r * q
            && self.out_w.len() == r;
        if !ok {
            return Err(Error::Config("inconsistent utterance network shapes".into()));
        }
        check_finite(self)
    }

    /// Membership logit for one utterance.
    pub fn forward(&self, frames: &Frames) -> Result<f64> {
        let pooled = self.pooling.forward(frames)?.pooled;
        let hidden = affine(&self.hidden_w, &self.hidden_b, &pooled);
        Ok(hidden.iter().zip(&self.out_w).map(|(s, w)| s.max(0.0) * w).sum::<f64>() + self.out_b)
    }

    /// Adds `d bce(forward(frames), label) / d params` into `grads` and
    /// returns the loss.
    pub fn accumulate_gradient(&self, frames: &Frames, label: f64, grads: &mut UtteranceNet) -> Result<f64> {
        let cache = self.pooling.forward(frames)?;
        let pre = affine(&self.hidden_w, &self.hidden_b, &cache.pooled);
        let act: Vec<f64> = pre.iter().map(|s| s.max(0.0)).collect();
        let logit = dot(&act, &self.out_w) + self.out_b;
        let g = sigmoid(logit) - label;

        grads.out_b += g;
        let q = self.q();
        let mut grad_pooled = vec![0.0; q];
        for j in 0..act.len() {
            grads.out_w[j] += g * act[j];
            if pre[j] <= 0.0 {
                continue;
            }
            let ds = g * self.out_w[j];
            grads.hidden_b[j] += ds;
            let w = &self.hidden_w[j * q..(j + 1) * q];
            let gw = &mut grads.hidden_w[j * q..(j + 1) * q];
            for k in 0..q {
                gw[k] += ds * cache.pooled[k];
                grad_pooled[k] += ds * w[k];
            }
        }
        self.pooling.backward(frames, &cache, &grad_pooled, &mut grads.pooling);
        Ok(bce_loss(logit, label))
    }

    pub fn loss(&self, frames: &Frames, label: f64) -> Result<f64> {
        Ok(bce_loss(self.forward(frames)?, label))
    }
}

impl Parameters for UtteranceNet {
    fn tensor_names(&self) -> &'static [&'static str] {
        &[
            "pooling.w",
            "pooling.b",
            "pooling.u",
            "hidden.w",
            "hidden.b",
            "out.w",
            "out.b",
        ]
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.pooling.w,
            &self.pooling.b,
            &self.pooling.u,
            &self.hidden_w,
            &self.hidden_b,
            &self.out_w,
            std::slice::from_ref(&self.out_b),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.pooling.w,
            &mut self.pooling.b,
            &mut self.pooling.u,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.out_w,
            std::slice::from_mut(&mut self.out_b),
        ]
    }
}

/// Speaker-level attack network: both utterances pass through shared
/// attentive pooling and a linear projection; the logit is the dot product
/// of the projections.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerNet {
    pub pooling: AttentivePooling,
    /// `r × q`.
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl SpeakerNet {
    pub fn zeros(q: usize, shape: NetShape) -> Self {
        SpeakerNet {
            pooling: AttentivePooling::zeros(q, shape.p),
            proj_w: vec![0.0; shape.r * q],
            proj_b: vec![0.0; shape.r],
        }
    }

    pub fn init<R: Rng>(q: usize, shape: NetShape, rng: &mut R) -> Self {
        let mut net = SpeakerNet::zeros(q, shape);
        net.pooling = init_pooling(rng, q, shape.p);
        fill_uniform(rng, &mut net.proj_w, q);
        net
    }

    pub fn q(&self) -> usize {
        self.pooling.q
    }

    pub fn shape(&self) -> NetShape {
        NetShape {
            p: self.pooling.p,
            r: self.proj_b.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (q, NetShape { p, r }) = (self.q(), self.shape());
        let ok = self.pooling.w.len() == p * q
            && self.pooling.b.len() == p
            && self.pooling.u.len() == p
            && self.proj_w.len() == r * q;
        if !ok {
            return Err(Error::Config("inconsistent speaker network shapes".into()));
        }
        check_finite(self)
    }

    /// Projected utterance embedding `W pool(frames) + b`.
    pub fn embed(&self, frames: &Frames) -> Result<Vec<f64>> {
        let pooled = self.pooling.forward(frames)?.pooled;
        Ok(affine(&self.proj_w, &self.proj_b, &pooled))
    }

    /// Pairwise same-speaker logit.
    pub fn forward(&self, a: &Frames, b: &Frames) -> Result<f64> {
        Ok(dot(&self.embed(a)?, &self.embed(b)?))
    }

    pub fn accumulate_gradient(&self, a: &Frames, b: &Frames, label: f64, grads: &mut SpeakerNet) -> Result<f64> {
        let cache_a = self.pooling.forward(a)?;
        let cache_b = self.pooling.forward(b)?;
        let za = affine(&self.proj_w, &self.proj_b, &cache_a.pooled);
        let zb = affine(&self.proj_w, &self.proj_b, &cache_b.pooled);
        let logit = dot(&za, &zb);
        let g = sigmoid(logit) - label;

        let q = self.q();
        let mut grad_a = vec![0.0; q];
        let mut grad_b = vec![0.0; q];
        for j in 0..za.len() {
            let (dza, dzb) = (g * zb[j], g * za[j]);
            grads.proj_b[j] += dza + dzb;
            let w = &self.proj_w[j * q..(j + 1) * q];
            let gw = &mut grads.proj_w[j * q..(j + 1) * q];
            for k in 0..q {
                gw[k] += dza * cache_a.pooled[k] + dzb * cache_b.pooled[k];
                grad_a[k] += dza * w[k];
                grad_b[k] += dzb * w[k];
            }
        }
        self.pooling.backward(a, &cache_a, &grad_a, &mut grads.pooling);
        self.pooling.backward(b, &cache_b, &grad_b, &mut grads.pooling);
        Ok(bce_loss(logit, label))
    }

    pub fn loss(&self, a: &Frames, b: &Frames, label: f64) -> Result<f64> {
        Ok(bce_loss(self.forward(a, b)?, label))
    }
}

impl Parameters for SpeakerNet {
    fn tensor_names(&self) -> &'static [&'static str] {
        &["pooling.w", "pooling.b", "pooling.u", "proj.w", "proj.b"]
    }

    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.pooling.w,
            &self.pooling.b,
            &self.pooling.u,
            &self.proj_w,
            &self.proj_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.pooling.w,
            &mut self.pooling.b,
            &mut self.pooling.u,
            &mut self.proj_w,
            &mut self.proj_b,
        ]
    }
}

/// Improved utterance score: `sigmoid(f_uttr(frames))`.
pub fn improved_utterance_score(net: &UtteranceNet, frames: &Frames) -> Result<f64> {
    net.forward(frames).map(sigmoid)
}

/// Improved speaker score: mean of `sigmoid(f_spkr(x_i, x_j))` over all
/// unordered utterance pairs.
pub fn improved_speaker_score(net: &SpeakerNet, utterances: &[&Frames]) -> Result<f64> {
    if utterances.len() < 2 {
        return Err(Error::TooFewUtterances {
            required: 2,
            actual: utterances.len(),
        });
    }
    let embeddings = utterances.iter().map(|f| net.embed(f)).collect::<Result<Vec<_>>>()?;
    let n = embeddings.len();
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            terms.push(sigmoid(dot(&embeddings[i], &embeddings[j])));
        }
    }
    Ok(pairwise_sum(&terms) / terms.len() as f64)
}
