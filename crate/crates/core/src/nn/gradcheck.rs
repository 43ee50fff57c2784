//! Central-difference verification of analytic gradients.

use super::{mse, mse_grad, softmax_cross_entropy, softmax_cross_entropy_grad, DenseNet, Gradients, Tensor2};
use crate::error::{Error, Result};

/// Finite-difference step.
pub const GRADCHECK_H: f64 = 1e-4;

const MAX_CHECKED_PARAMS: usize = 10_000;

/// Loss applied to a network output during a gradient check.
#[derive(Clone, Debug, PartialEq)]
pub enum LossSpec {
    Mse { target: Vec<f64> },
    /// Output split into consecutive blocks of `alphabet` logits, one per
    /// target; the loss is the summed cross-entropy.
    SoftmaxCrossEntropy { alphabet: usize, targets: Vec<usize> },
}

impl LossSpec {
    pub fn value(&self, y: &[f64]) -> Result<f64> {
        match self {
            LossSpec::Mse { target } => mse(y, target),
            LossSpec::SoftmaxCrossEntropy { alphabet, targets } => {
                self.check_blocks(y.len())?;
                targets
                    .iter()
                    .zip(y.chunks(*alphabet))
                    .map(|(&t, logits)| softmax_cross_entropy(logits, t))
                    .sum()
            }
        }
    }

    pub fn grad(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        match self {
            LossSpec::Mse { target } => {
                mse(y, target)?;
                mse_grad(y, target, 1.0, &mut out);
            }
            LossSpec::SoftmaxCrossEntropy { alphabet, targets } => {
                self.check_blocks(y.len())?;
                for ((&t, logits), o) in targets
                    .iter()
                    .zip(y.chunks(*alphabet))
                    .zip(out.chunks_mut(*alphabet))
                {
                    softmax_cross_entropy_grad(logits, t, o);
                }
            }
        }
        Ok(out)
    }

    fn check_blocks(&self, len: usize) -> Result<()> {
        if let LossSpec::SoftmaxCrossEntropy { alphabet, targets } = self {
            if *alphabet == 0 || len != alphabet * targets.len() {
                return Err(Error::shape(format!(
                    "{len} logits cannot hold {} steps of {alphabet} tokens",
                    targets.len()
                )));
            }
        }
        Ok(())
    }
}

/// `|a - n| / max(|a| + |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Maximum relative error between backprop gradients and central
/// differences over every parameter of `net`.
pub fn grad_check(net: &DenseNet<f64>, loss: &LossSpec, x: &[f64]) -> Result<f64> {
    let (y, cache) = net.forward(x)?;
    let d_out = Tensor2::row_vector(&loss.grad(&y)?);
    let grads = net.backward_params(&cache, &d_out)?;
    grad_check_against(net, loss, x, &grads)
}

/// Compare caller-supplied analytic gradients against central differences.
pub fn grad_check_against(
    net: &DenseNet<f64>,
    loss: &LossSpec,
    x: &[f64],
    analytic: &Gradients<f64>,
) -> Result<f64> {
    if net.param_count() > MAX_CHECKED_PARAMS {
        return Err(Error::contract(format!(
            "gradient check limited to {MAX_CHECKED_PARAMS} parameters, network has {}",
            net.param_count()
        )));
    }
    let shapes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let analytic = analytic.slices();
    if analytic.iter().map(|s| s.len()).collect::<Vec<_>>() != shapes {
        return Err(Error::shape("analytic gradients do not mirror the network"));
    }

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (s, &len) in shapes.iter().enumerate() {
        for (i, &a) in analytic[s].iter().enumerate().take(len) {
            let original = probe.params()[s][i];
            probe.params_mut()[s][i] = original + GRADCHECK_H;
            let plus = loss.value(&probe.predict(x)?)?;
            probe.params_mut()[s][i] = original - GRADCHECK_H;
            let minus = loss.value(&probe.predict(x)?)?;
            probe.params_mut()[s][i] = original;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_H);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::rng::Prng;

    fn random_input(rng: &mut Prng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gaussian()).collect()
    }

    #[test]
    fn linear_net_with_mse_is_exact() {
        let mut rng = Prng::new(1);
        let net = DenseNet::<f64>::xavier(&[4, 3], &[Activation::Identity], &mut rng).unwrap();
        let x = random_input(&mut rng, 4);
        let loss = LossSpec::Mse {
            target: random_input(&mut rng, 3),
        };
        assert!(grad_check(&net, &loss, &x).unwrap() < 1e-6);
    }

    #[test]
    fn random_tanh_nets_pass() {
        let mut rng = Prng::new(42);
        for depth in 1..=3 {
            let mut dims = vec![6];
            for _ in 0..depth {
                dims.push(5 + rng.range_inclusive(0, 6) as usize);
            }
            let acts = vec![Activation::Tanh; depth];
            let net = DenseNet::<f64>::xavier(&dims, &acts, &mut rng).unwrap();
            let x = random_input(&mut rng, 6);
            let loss = LossSpec::Mse {
                target: random_input(&mut rng, *dims.last().unwrap()),
            };
            let err = grad_check(&net, &loss, &x).unwrap();
            assert!(err < 1e-4, "depth {depth}: {err}");
        }
    }

    #[test]
    fn cross_entropy_blocks_pass() {
        let mut rng = Prng::new(8);
        let net = DenseNet::<f64>::xavier(
            &[5, 8, 12],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let loss = LossSpec::SoftmaxCrossEntropy {
            alphabet: 4,
            targets: vec![0, 3, 2],
        };
        let x = random_input(&mut rng, 5);
        assert!(grad_check(&net, &loss, &x).unwrap() < 1e-4);
    }

    #[test]
    fn corrupted_backward_is_detected() {
        let mut rng = Prng::new(4);
        let net = DenseNet::<f64>::xavier(&[3, 4, 2], &[Activation::Tanh, Activation::Tanh], &mut rng)
            .unwrap();
        let x = random_input(&mut rng, 3);
        let loss = LossSpec::Mse {
            target: vec![0.3, -0.2],
        };
        let (y, cache) = net.forward(&x).unwrap();
        let mut grads = net
            .backward_params(&cache, &Tensor2::row_vector(&loss.grad(&y).unwrap()))
            .unwrap();
        for s in grads.slices_mut() {
            for g in s.iter_mut() {
                *g *= 1.1;
            }
        }
        assert!(grad_check_against(&net, &loss, &x, &grads).unwrap() > 1e-2);
    }

    #[test]
    fn oversized_net_is_refused() {
        let mut rng = Prng::new(0);
        let net = DenseNet::<f64>::xavier(&[200, 60], &[Activation::Tanh], &mut rng).unwrap();
        let loss = LossSpec::Mse { target: vec![0.0; 60] };
        assert!(matches!(
            grad_check(&net, &loss, &vec![0.0; 200]),
            Err(Error::Contract(_))
        ));
    }
}
