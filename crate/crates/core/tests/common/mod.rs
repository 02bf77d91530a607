//! Test-only oracles, independent of the library's forward/backward code.

#![allow(dead_code)]

use narle::nn::{Activation, Head, Network};

/// f64 copy of a network's parameters, in `params()` order.
#[derive(Clone)]
pub struct ScalarNet {
    /// (weight [out][in], bias [out], activation)
    pub layers: Vec<(Vec<Vec<f64>>, Vec<f64>, Activation)>,
    pub head: Head,
}

impl ScalarNet {
    pub fn from_network(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| {
                let (out, inp) = (l.outputs(), l.inputs());
                let w = (0..out)
                    .map(|o| (0..inp).map(|i| f64::from(l.weight.values[o * inp + i])).collect())
                    .collect();
                let b = l.bias.values.iter().map(|&v| f64::from(v)).collect();
                (w, b, l.activation)
            })
            .collect();
        ScalarNet {
            layers,
            head: net.head(),
        }
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f64> {
        let mut a: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        for (w, b, act) in &self.layers {
            let mut next = Vec::with_capacity(b.len());
            for o in 0..b.len() {
                let mut z = b[o];
                for i in 0..a.len() {
                    z += w[o][i] * a[i];
                }
                next.push(match act {
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                });
            }
            a = next;
        }
        a
    }

    pub fn probs(&self, x: &[f32]) -> Vec<f64> {
        let z = self.logits(x);
        match self.head {
            Head::Softmax => {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
            Head::Sigmoid => z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
        }
    }

    /// ln pi(a|s) for a class (softmax) or bit vector (sigmoid).
    pub fn log_prob(&self, x: &[f32], class: Option<usize>, bits: Option<&[bool]>) -> f64 {
        let p = self.probs(x);
        match (class, bits) {
            (Some(a), _) => p[a].ln(),
            (None, Some(b)) => b
                .iter()
                .zip(&p)
                .map(|(&bit, &pi)| if bit { pi.ln() } else { (1.0 - pi).ln() })
                .sum(),
            _ => panic!("need a target"),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|(w, b, _)| w.len() * w.first().map_or(0, Vec::len) + b.len())
            .sum()
    }

    /// Mutable reference to the k-th scalar in `params()` order
    /// (layer weight row-major, then bias).
    pub fn param_mut(&mut self, mut k: usize) -> &mut f64 {
        for (w, b, _) in &mut self.layers {
            let nw = w.len() * w[0].len();
            if k < nw {
                let cols = w[0].len();
                return &mut w[k / cols][k % cols];
            }
            k -= nw;
            if k < b.len() {
                return &mut b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range")
    }
}

/// Central finite differences of `loss` over every parameter.
pub fn finite_difference(net: &ScalarNet, h: f64, loss: impl Fn(&ScalarNet) -> f64) -> Vec<f64> {
    let mut work = net.clone();
    (0..net.param_count())
        .map(|k| {
            let orig = *work.param_mut(k);
            *work.param_mut(k) = orig + h;
            let plus = loss(&work);
            *work.param_mut(k) = orig - h;
            let minus = loss(&work);
            *work.param_mut(k) = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a floor so vanishing gradients compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Whether any pre-activation of a ReLU layer sits within `margin` of the kink.
pub fn near_relu_kink(net: &ScalarNet, x: &[f32], margin: f64) -> bool {
    let mut a: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
    for (w, b, act) in &net.layers {
        let z: Vec<f64> = (0..b.len())
            .map(|o| b[o] + (0..a.len()).map(|i| w[o][i] * a[i]).sum::<f64>())
            .collect();
        if *act == Activation::Relu && z.iter().any(|v| v.abs() < margin) {
            return true;
        }
        a = z
            .iter()
            .map(|&v| match act {
                Activation::Relu => v.max(0.0),
                Activation::Tanh => v.tanh(),
                Activation::Identity => v,
            })
            .collect();
    }
    false
}

pub struct GradCase {
    pub net: Network,
    pub x: Vec<f32>,
    pub class: Option<usize>,
    pub bits: Option<Vec<bool>>,
    pub reward: f32,
}

/// Draws a random network/input/action/reward case with no ReLU
/// pre-activation near its kink.
pub fn random_grad_case(seed: u64) -> GradCase {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let input = rng.gen_range(2..8);
        let hidden: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(2..7)).collect();
        let head = if rng.gen_bool(0.5) {
            Head::Softmax
        } else {
            Head::Sigmoid
        };
        let out = match head {
            Head::Softmax => rng.gen_range(2..6),
            Head::Sigmoid => rng.gen_range(1..7),
        };
        let act = [Activation::Tanh, Activation::Relu, Activation::Identity][rng.gen_range(0..3)];
        let mut sizes = vec![input];
        sizes.extend(&hidden);
        sizes.push(out);
        let net = Network::random(&sizes, act, head, 1.0, &mut rng).unwrap();
        let x: Vec<f32> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if near_relu_kink(&ScalarNet::from_network(&net), &x, 1e-2) {
            continue;
        }
        let (class, bits) = match head {
            Head::Softmax => (Some(rng.gen_range(0..out)), None),
            Head::Sigmoid => (None, Some((0..out).map(|_| rng.gen_bool(0.5)).collect())),
        };
        let reward = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        return GradCase {
            net,
            x,
            class,
            bits,
            reward,
        };
    }
}

/// Flattened gradients in `params()` order.
pub fn flat_grads(net: &Network) -> Vec<f64> {
    net.params()
        .flat_map(|p| p.grad.iter().map(|&g| f64::from(g)))
        .collect()
}

/// Max relative error between analytic and finite-difference gradients for
/// the REINFORCE loss `-R ln pi(a|s)` and the cross-entropy loss.
pub fn grad_check(case: &GradCase) -> (f64, f64) {
    use narle::nn::Target;
    let h = 1e-4;
    let target = match (&case.class, &case.bits) {
        (Some(a), _) => Target::Class(*a),
        (None, Some(b)) => Target::Bits(b),
        _ => unreachable!(),
    };
    let scalar = ScalarNet::from_network(&case.net);
    let bits = case.bits.as_deref();
    let lp = |n: &ScalarNet| n.log_prob(&case.x, case.class, bits);

    let mut rl = case.net.clone();
    let trace = rl.trace(&case.x).unwrap();
    rl.reinforce_backward(&trace, target, case.reward).unwrap();
    let r = f64::from(case.reward);
    let numeric = finite_difference(&scalar, h, |n| -r * lp(n));
    let rl_err = flat_grads(&rl)
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);

    let mut sup = case.net.clone();
    sup.supervised_backward(&trace, target).unwrap();
    let numeric = finite_difference(&scalar, h, |n| -lp(n));
    let sup_err = flat_grads(&sup)
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max);
    (rl_err, sup_err)
}
