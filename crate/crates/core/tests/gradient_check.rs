mod common;

use common::{grad_check, random_grad_case, ScalarNet};
use narle::nn::{Activation, Head, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_scalar_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let net = Network::random(&[7, 5, 4], Activation::Tanh, Head::Softmax, 1.0, &mut rng).unwrap();
        let x: Vec<f32> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = net.forward(&x).unwrap();
        let want = ScalarNet::from_network(&net).probs(&x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..40 {
        let case = random_grad_case(1000 + seed);
        let (rl, sup) = grad_check(&case);
        assert!(rl < 1e-4, "seed {seed}: reinforce rel err {rl}");
        assert!(sup < 1e-4, "seed {seed}: supervised rel err {sup}");
    }
}

#[test]
fn sparse_inputs_give_same_result_as_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let net = Network::random(&[50, 8, 3], Activation::Relu, Head::Softmax, 1.0, &mut rng).unwrap();
    let mut x = vec![0.0f32; 50];
    x[3] = 0.5;
    x[41] = 0.25;
    x[17] = 0.25;
    let got = net.forward(&x).unwrap();
    let want = ScalarNet::from_network(&net).probs(&x);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9);
    }
}
