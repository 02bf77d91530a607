use rand::Rng;

use super::ParamTensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// One categorical distribution over all output units.
    Softmax,
    /// An independent Bernoulli per output unit.
    Sigmoid,
}

impl Head {
    pub fn tag(self) -> &'static str {
        match self {
            Head::Softmax => "softmax",
            Head::Sigmoid => "sigmoid",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "softmax" => Some(Head::Softmax),
            "sigmoid" => Some(Head::Sigmoid),
            _ => None,
        }
    }
}

/// Dense layer `act(W x + b)`; `weight` has shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape[0]
    }
}

/// What a backward pass is measured against.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// A single class of a softmax head.
    Class(usize),
    /// One bit per sigmoid unit.
    Bits(&'a [bool]),
    /// A target distribution (softmax) or per-unit probabilities (sigmoid).
    Soft(&'a [f32]),
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl Trace {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    head: Head,
}

impl Network {
    pub fn from_layers(layers: Vec<Layer>, head: Head) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Config("network needs at least one layer".into()));
        };
        if last.activation != Activation::Identity {
            return Err(Error::Config("final layer must feed the head directly".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.weight.shape.len() != 2 || layer.bias.shape != [layer.outputs()] {
                return Err(Error::Config(format!("layer {i}: malformed tensor shapes")));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Dimension {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        Ok(Network { layers, head })
    }

    /// All-zero network; its softmax head is exactly uniform for any input.
    pub fn zeros(sizes: &[usize], hidden: Activation, head: Head) -> Result<Self> {
        Self::build(sizes, hidden, head, |_, _, _| 0.0)
    }

    /// Glorot-uniform weights, zero biases. The output layer is shrunk by
    /// `output_gain` so a fresh policy starts close to uniform.
    pub fn random<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        head: Head,
        output_gain: f32,
        rng: &mut R,
    ) -> Result<Self> {
        let last = sizes.len().saturating_sub(2);
        Self::build(sizes, hidden, head, |layer, fan_in, fan_out| {
            let limit = (6.0 / (fan_in + fan_out) as f32).sqrt();
            let gain = if layer == last { output_gain } else { 1.0 };
            rng.gen_range(-limit..=limit) * gain
        })
    }

    fn build(
        sizes: &[usize],
        hidden: Activation,
        head: Head,
        mut init: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let n_layers = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let activation = if l + 1 == n_layers {
                    Activation::Identity
                } else {
                    hidden
                };
                let mut weight = ParamTensor::zeros(
                    tensor_name(l, activation, head, n_layers, "weight"),
                    vec![fan_out, fan_in],
                );
                weight.values.iter_mut().for_each(|v| *v = init(l, fan_in, fan_out));
                let bias = ParamTensor::zeros(tensor_name(l, activation, head, n_layers, "bias"), vec![fan_out]);
                Layer {
                    weight,
                    bias,
                    activation,
                }
            })
            .collect();
        Network::from_layers(layers, head)
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamTensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().for_each(ParamTensor::zero_grad);
    }

    /// Action distribution for `x`.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.probs)
    }

    /// Forward pass keeping every activation for a later backward pass.
    pub fn trace(&self, x: &[f32]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.iter().map(|&v| f64::from(v)).collect());
        for layer in &self.layers {
            let input = acts.last().expect("input present");
            let active: Vec<usize> = (0..input.len()).filter(|&i| input[i] != 0.0).collect();
            let n_in = layer.inputs();
            let out = (0..layer.outputs())
                .map(|o| {
                    let row = &layer.weight.values[o * n_in..(o + 1) * n_in];
                    let z = active.iter().fold(f64::from(layer.bias.values[o]), |acc, &i| {
                        acc + f64::from(row[i]) * input[i]
                    });
                    layer.activation.apply(z)
                })
                .collect();
            acts.push(out);
        }
        let logits = acts.pop().expect("output present");
        let probs = match self.head {
            Head::Softmax => softmax(&logits),
            Head::Sigmoid => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Ok(Trace { acts, logits, probs })
    }

    /// `ln pi(a|s)` of a hard target under the traced distribution.
    pub fn log_prob(&self, trace: &Trace, action: Target<'_>) -> Result<f64> {
        self.check_target(action)?;
        Ok(match (self.head, action) {
            (Head::Softmax, Target::Class(a)) => trace.logits[a] - log_sum_exp(&trace.logits),
            (Head::Sigmoid, Target::Bits(bits)) => bits
                .iter()
                .zip(&trace.logits)
                .map(|(&b, &z)| if b { -softplus(-z) } else { -softplus(z) })
                .sum(),
            (Head::Softmax, Target::Soft(q)) => {
                let lse = log_sum_exp(&trace.logits);
                q.iter()
                    .zip(&trace.logits)
                    .map(|(&q, &z)| f64::from(q) * (z - lse))
                    .sum()
            }
            (Head::Sigmoid, Target::Soft(q)) => q
                .iter()
                .zip(&trace.logits)
                .map(|(&q, &z)| {
                    let q = f64::from(q);
                    -q * softplus(-z) - (1.0 - q) * softplus(z)
                })
                .sum(),
            _ => unreachable!("rejected by check_target"),
        })
    }

    /// Cross-entropy of `target` under the traced distribution.
    pub fn loss(&self, trace: &Trace, target: Target<'_>) -> Result<f64> {
        Ok(-self.log_prob(trace, target)?)
    }

    /// Accumulates the gradient of `-reward * ln pi(action|x)`.
    ///
    /// A zero reward leaves every gradient untouched.
    pub fn reinforce_backward(&mut self, trace: &Trace, action: Target<'_>, reward: f32) -> Result<()> {
        if matches!(action, Target::Soft(_)) {
            return Err(Error::Contract(
                "a sampled action must be a class or a bit vector".into(),
            ));
        }
        self.check_target(action)?;
        if reward == 0.0 {
            return Ok(());
        }
        let dlogits = self.ce_logit_grad(trace, action, f64::from(reward));
        self.backward_from_logits(trace, &dlogits);
        Ok(())
    }

    /// Accumulates the gradient of the cross-entropy against `label`.
    pub fn supervised_backward(&mut self, trace: &Trace, label: Target<'_>) -> Result<()> {
        self.check_target(label)?;
        let dlogits = self.ce_logit_grad(trace, label, 1.0);
        self.backward_from_logits(trace, &dlogits);
        Ok(())
    }

    fn check_target(&self, target: Target<'_>) -> Result<()> {
        let k = self.output_dim();
        match (self.head, target) {
            (Head::Softmax, Target::Class(a)) if a >= k => {
                Err(Error::Contract(format!("action {a} out of range for {k} classes")))
            }
            (Head::Softmax, Target::Class(_)) => Ok(()),
            (Head::Sigmoid, Target::Class(_)) => Err(Error::Contract("sigmoid heads take bit-vector targets".into())),
            (Head::Softmax, Target::Bits(_)) => Err(Error::Contract("softmax heads take class targets".into())),
            (_, Target::Bits(b)) if b.len() != k => Err(len_error(b.len(), k)),
            (_, Target::Soft(q)) if q.len() != k => Err(len_error(q.len(), k)),
            _ => Ok(()),
        }
    }

    /// d(-scale * ln pi(target)) / d logits = scale * (p - target).
    fn ce_logit_grad(&self, trace: &Trace, target: Target<'_>, scale: f64) -> Vec<f64> {
        let mut g = trace.probs.clone();
        match target {
            Target::Class(a) => g[a] -= 1.0,
            Target::Bits(bits) => g
                .iter_mut()
                .zip(bits)
                .for_each(|(g, &b)| *g -= if b { 1.0 } else { 0.0 }),
            Target::Soft(q) => g.iter_mut().zip(q).for_each(|(g, &q)| *g -= f64::from(q)),
        }
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    fn backward_from_logits(&mut self, trace: &Trace, dlogits: &[f64]) {
        let mut delta = dlogits.to_vec();
        for l in (0..self.layers.len()).rev() {
            let input = &trace.acts[l];
            let layer = &mut self.layers[l];
            let n_in = layer.inputs();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                layer.bias.grad[o] += d as f32;
                let row = &mut layer.weight.grad[o * n_in..(o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    if a != 0.0 {
                        *g += (d * a) as f32;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let below = self.layers[l - 1].activation;
            let layer = &self.layers[l];
            delta = (0..n_in)
                .map(|i| {
                    let back = delta.iter().enumerate().fold(0.0f64, |acc, (o, &d)| {
                        acc + d * f64::from(layer.weight.values[o * n_in + i])
                    });
                    back * below.derivative_at_output(input[i])
                })
                .collect();
        }
    }

    /// Serializable tensor list; names carry layer index, activation and head.
    pub fn to_tensors(&self) -> Vec<ParamTensor> {
        let n = self.layers.len();
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                let mut w = layer.weight.clone();
                let mut b = layer.bias.clone();
                w.name = tensor_name(l, layer.activation, self.head, n, "weight");
                b.name = tensor_name(l, layer.activation, self.head, n, "bias");
                w.zero_grad();
                b.zero_grad();
                [w, b]
            })
            .collect()
    }

    pub fn from_tensors(tensors: Vec<ParamTensor>) -> Result<Self> {
        if tensors.is_empty() || !tensors.len().is_multiple_of(2) {
            return Err(Error::Checkpoint("expected weight/bias tensor pairs".into()));
        }
        let n = tensors.len() / 2;
        let mut head = None;
        let mut layers = Vec::with_capacity(n);
        let mut it = tensors.into_iter();
        for l in 0..n {
            let (w, b) = (it.next().expect("pair"), it.next().expect("pair"));
            let (wl, wtag, wkind) = parse_name(&w.name)?;
            let (bl, btag, bkind) = parse_name(&b.name)?;
            if wl != l || bl != l || wkind != "weight" || bkind != "bias" || wtag != btag {
                return Err(Error::Checkpoint(format!(
                    "unexpected tensor pair {} / {}",
                    w.name, b.name
                )));
            }
            let activation = if l + 1 == n {
                head = Head::from_tag(&wtag);
                if head.is_none() {
                    return Err(Error::Checkpoint(format!("unknown head {wtag}")));
                }
                Activation::Identity
            } else {
                Activation::from_tag(&wtag).ok_or_else(|| Error::Checkpoint(format!("unknown activation {wtag}")))?
            };
            if w.shape.len() != 2 || b.shape.len() != 1 {
                return Err(Error::Checkpoint(format!("layer {l}: bad tensor rank")));
            }
            layers.push(Layer {
                weight: w,
                bias: b,
                activation,
            });
        }
        Network::from_layers(layers, head.expect("set on last layer")).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

fn len_error(got: usize, k: usize) -> Error {
    Error::Contract(format!("target has {got} entries, head has {k}"))
}

fn tensor_name(layer: usize, act: Activation, head: Head, n_layers: usize, kind: &str) -> String {
    let tag = if layer + 1 == n_layers { head.tag() } else { act.tag() };
    format!("layer{layer}.{tag}.{kind}")
}

fn parse_name(name: &str) -> Result<(usize, String, String)> {
    let bad = || Error::Checkpoint(format!("unrecognized tensor name {name:?}"));
    let mut parts = name.split('.');
    let idx = parts
        .next()
        .and_then(|p| p.strip_prefix("layer"))
        .and_then(|p| p.parse().ok())
        .ok_or_else(bad)?;
    let tag = parts.next().ok_or_else(bad)?.to_string();
    let kind = parts.next().ok_or_else(bad)?.to_string();
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((idx, tag, kind))
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
