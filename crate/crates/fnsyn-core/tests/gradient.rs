use fnsyn_core::learning::{Activation, Mlp, MlpConfig};
use fnsyn_core::rng;
use rand::Rng;

fn toy() -> (Mlp<f64>, Vec<f64>, Vec<u8>) {
    let cfg = MlpConfig { layer_sizes: vec![6, 4, 2], activation: Activation::Relu };
    let mut r = rng::stream(11, 0);
    let mut net = Mlp::<f64>::glorot(cfg, &mut r).unwrap();
    for b in net.params.iter_mut() {
        *b += 0.05 * (r.random::<f64>() - 0.5);
    }
    let n = 7;
    let x: Vec<f64> = (0..n * 6).map(|_| 2.0 * r.random::<f64>() - 1.0).collect();
    let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
    (net, x, y)
}

#[test]
fn backprop_matches_finite_differences() {
    let (mut net, x, y) = toy();
    let mut ws = net.workspace(y.len());
    let mut grad = vec![0.0; net.n_params()];
    net.loss_and_grad(&x, &y, &mut ws, &mut grad).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..net.n_params() {
        let orig = net.params[i];
        net.params[i] = orig + h;
        let up = net.loss(&x, &y, &mut ws).unwrap();
        net.params[i] = orig - h;
        let dn = net.loss(&x, &y, &mut ws).unwrap();
        net.params[i] = orig;
        let num = (up - dn) / (2.0 * h);
        let denom = num.abs().max(grad[i].abs()).max(1e-7);
        worst = worst.max((num - grad[i]).abs() / denom);
    }
    assert!(worst < 1e-5, "max relative error {worst:e}");
}

#[test]
fn zero_batch_has_zero_gradient() {
    let (net, _, _) = toy();
    let mut ws = net.workspace(1);
    let mut grad = vec![1.0; net.n_params()];
    assert_eq!(net.loss_and_grad(&[], &[], &mut ws, &mut grad).unwrap(), 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}
