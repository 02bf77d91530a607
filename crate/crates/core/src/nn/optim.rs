use super::ParamTensor;
use crate::{Error, Result};

/// Plain SGD with optional heavy-ball momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    learning_rate: f32,
    momentum: f32,
    /// One buffer per parameter tensor, allocated on first use.
    buffers: Vec<Vec<f32>>,
}

impl OptimizerState {
    pub fn sgd(learning_rate: f32) -> Result<Self> {
        Self::with_momentum(learning_rate, 0.0)
    }

    pub fn with_momentum(learning_rate: f32, momentum: f32) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(OptimizerState {
            learning_rate,
            momentum,
            buffers: Vec::new(),
        })
    }

    pub fn learning_rate(&self) -> f32 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f32 {
        self.momentum
    }
}

/// `values -= lr * grad` (through the momentum buffer when enabled), then
/// clears every gradient. A non-finite result aborts with a training fault
/// and leaves the offending tensor untouched.
pub fn apply_update<'a>(params: impl IntoIterator<Item = &'a mut ParamTensor>, opt: &mut OptimizerState) -> Result<()> {
    let lr = opt.learning_rate;
    let mu = opt.momentum;
    for (idx, p) in params.into_iter().enumerate() {
        if mu == 0.0 {
            if p.grad_is_zero() {
                continue;
            }
            let updated: Vec<f32> = p.values.iter().zip(&p.grad).map(|(v, g)| v - lr * g).collect();
            commit(p, updated)?;
        } else {
            if opt.buffers.len() <= idx {
                opt.buffers.resize_with(idx + 1, Vec::new);
            }
            if opt.buffers[idx].is_empty() {
                opt.buffers[idx] = vec![0.0; p.len()];
            }
            let buf = &mut opt.buffers[idx];
            if buf.len() != p.len() {
                return Err(Error::Config(format!("momentum buffer shape mismatch for {}", p.name)));
            }
            buf.iter_mut().zip(&p.grad).for_each(|(b, g)| *b = mu * *b + g);
            let updated: Vec<f32> = p.values.iter().zip(buf.iter()).map(|(v, b)| v - lr * b).collect();
            commit(p, updated)?;
        }
        p.zero_grad();
    }
    Ok(())
}

fn commit(p: &mut ParamTensor, updated: Vec<f32>) -> Result<()> {
    if updated.iter().any(|v| !v.is_finite()) {
        return Err(Error::TrainingFault(format!(
            "non-finite value in {} after update",
            p.name
        )));
    }
    p.values = updated;
    Ok(())
}
