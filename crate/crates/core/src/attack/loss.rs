/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy on a logit, `softplus(x) - y x`.
///
/// Written as `y softplus(-x) + (1 - y) softplus(x)`, which is the same
/// quantity without the cancellation that loses tiny losses at large `|x|`.
pub fn bce_loss(logit: f64, label: f64) -> f64 {
    label * softplus(-logit) + (1.0 - label) * softplus(logit)
}

/// `d bce / d logit = sigmoid(logit) - label`.
pub fn bce_grad(logit: f64, label: f64) -> f64 {
    sigmoid(logit) - label
}
