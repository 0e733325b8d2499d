use crate::error::{Error, Result};
use crate::scoring::dot;
use crate::store::Frames;

/// Single-head attentive pooling:
/// `e_i = u · tanh(W h_i + b)`, `a = softmax(e)`, `c = Σ a_i h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentivePooling {
    pub q: usize,
    pub p: usize,
    /// `p × q`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct PoolingCache {
    /// `tanh(W h_i + b)`, `m × p`.
    pub activations: Vec<f64>,
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
}

pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

impl AttentivePooling {
    pub fn zeros(q: usize, p: usize) -> Self {
        AttentivePooling {
            q,
            p,
            w: vec![0.0; p * q],
            b: vec![0.0; p],
            u: vec![0.0; p],
        }
    }

    pub(crate) fn check_input(&self, frames: &Frames) -> Result<()> {
        if frames.dim() != self.q {
            return Err(Error::Config(format!(
                "input has q={}, network expects q={}",
                frames.dim(),
                self.q
            )));
        }
        if frames.is_empty() {
            return Err(Error::TooFewFrames { required: 1, actual: 0 });
        }
        Ok(())
    }

    pub fn forward(&self, frames: &Frames) -> Result<PoolingCache> {
        self.check_input(frames)?;
        let (m, p, q) = (frames.len(), self.p, self.q);
        let mut activations = vec![0.0; m * p];
        let mut weights = vec![0.0; m];
        for (i, h) in frames.iter_rows().enumerate() {
            let t = &mut activations[i * p..(i + 1) * p];
            for (j, tj) in t.iter_mut().enumerate() {
                *tj = (dot(&self.w[j * q..(j + 1) * q], h) + self.b[j]).tanh();
            }
            weights[i] = dot(&self.u, t);
        }
        softmax_in_place(&mut weights);
        let mut pooled = vec![0.0; q];
        for (a, h) in weights.iter().zip(frames.iter_rows()) {
            for (c, x) in pooled.iter_mut().zip(h) {
                *c += a * x;
            }
        }
        Ok(PoolingCache {
            activations,
            weights,
            pooled,
        })
    }

    /// Accumulates parameter gradients into `grads` given `dL/dc`.
    pub fn backward(&self, frames: &Frames, cache: &PoolingCache, grad_pooled: &[f64], grads: &mut AttentivePooling) {
        let (p, q) = (self.p, self.q);
        // dL/da_i = g · h_i, then through the softmax Jacobian.
        let ga: Vec<f64> = frames.iter_rows().map(|h| dot(grad_pooled, h)).collect();
        let mean: f64 = cache.weights.iter().zip(&ga).map(|(a, g)| a * g).sum();
        for (i, h) in frames.iter_rows().enumerate() {
            let de = cache.weights[i] * (ga[i] - mean);
            if de == 0.0 {
                continue;
            }
            let t = &cache.activations[i * p..(i + 1) * p];
            for (j, &tj) in t.iter().enumerate() {
                grads.u[j] += de * tj;
                let dpre = de * self.u[j] * (1.0 - tj * tj);
                grads.b[j] += dpre;
                let row = &mut grads.w[j * q..(j + 1) * q];
                for (gw, x) in row.iter_mut().zip(h) {
                    *gw += dpre * x;
                }
            }
        }
    }
}
