use super::Vae;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Tensor2};
use crate::rng::{stream, Prng};

/// Optimisation settings for VAE training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// KL weight once warm-up is over.
    pub beta: f64,
    /// Fraction of all optimiser steps over which the KL weight ramps
    /// linearly from 0 to `beta`.
    pub kl_warmup_frac: f64,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            seed: 7,
            beta: 1.0,
            kl_warmup_frac: 0.2,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta must be a finite value >= 0"));
        }
        if !(0.0..=1.0).contains(&self.kl_warmup_frac) {
            return Err(Error::config("KL warm-up fraction must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }

    /// KL weight at optimiser step `step` (0-based) of `total_steps`.
    pub fn beta_at(&self, step: usize, total_steps: usize) -> f64 {
        let warmup = (self.kl_warmup_frac * total_steps as f64).ceil() as usize;
        if warmup == 0 {
            self.beta
        } else {
            self.beta * (step as f64 / warmup as f64).min(1.0)
        }
    }
}

/// Sample-weighted means over one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
    /// KL weight in effect at the end of the epoch.
    pub beta: f64,
}

/// Minibatch Adam on the ELBO. Rows of `data` are samples. Shuffling and
/// sampling noise come from `config.seed`, so identical inputs give
/// bit-identical weights.
pub fn train_vae(vae: &mut Vae<f32>, data: &Tensor2<f32>, config: &TrainConfig) -> Result<Vec<EpochLoss>> {
    config.validate()?;
    let n = data.rows();
    if n == 0 {
        return Err(Error::config("training set is empty"));
    }
    if n < config.batch_size {
        return Err(Error::config(format!(
            "training set has {n} samples, fewer than the batch size {}",
            config.batch_size
        )));
    }
    if data.cols() != vae.arch().input {
        return Err(Error::shape(format!(
            "samples have {} values, model expects {}",
            data.cols(),
            vae.arch().input
        )));
    }

    let root = Prng::new(config.seed);
    let mut shuffle_rng = root.fork(stream::SHUFFLE);
    let mut noise_rng = root.fork(stream::NOISE);
    let adam = AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    };
    let mut enc_opt = AdamState::for_params(adam, &vae.encoder().params());
    let mut dec_opt = AdamState::for_params(adam, &vae.decoder().params());

    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let latent = vae.latent_dim();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut step = 0;

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        let mut beta = 0.0;
        for idx in order.chunks(config.batch_size) {
            beta = config.beta_at(step, total_steps);
            let x = data.gather_rows(idx);
            let eps = Tensor2::from_fn(idx.len(), latent, |_, _| noise_rng.gaussian() as f32);
            let (loss, grads) = vae.loss_and_grads(&x, &eps, beta)?;
            if !loss.total.is_finite() {
                return Err(Error::contract(format!(
                    "training diverged at epoch {epoch}, step {step}"
                )));
            }
            enc_opt.step(&mut vae.encoder_mut().params_mut(), &grads.encoder.slices())?;
            dec_opt.step(&mut vae.decoder_mut().params_mut(), &grads.decoder.slices())?;
            let w = idx.len() as f64;
            total += loss.total * w;
            recon += loss.recon * w;
            kl += loss.kl * w;
            step += 1;
        }
        let n = n as f64;
        trace.push(EpochLoss {
            epoch,
            total: total / n,
            recon: recon / n,
            kl: kl / n,
            beta,
        });
    }
    vae.mark_trained(config.epochs as u64);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vae::{ReconKind, VaeArch};

    fn toy() -> (Vae<f32>, Tensor2<f32>) {
        let vae = Vae::new(
            VaeArch {
                input: 48,
                hidden: 16,
                latent: 3,
                recon: ReconKind::SigmoidMse,
            },
            5,
        )
        .unwrap();
        let data = Tensor2::from_fn(40, 48, |r, c| if (r + c / 12) % 4 == 0 { 0.95 } else { 0.05 });
        (vae, data)
    }

    #[test]
    fn warmup_schedule() {
        let cfg = TrainConfig {
            kl_warmup_frac: 0.2,
            beta: 2.0,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.beta_at(0, 100), 0.0);
        assert!((cfg.beta_at(10, 100) - 1.0).abs() < 1e-12);
        assert_eq!(cfg.beta_at(20, 100), 2.0);
        assert_eq!(cfg.beta_at(99, 100), 2.0);
        let no_warmup = TrainConfig {
            kl_warmup_frac: 0.0,
            ..cfg
        };
        assert_eq!(no_warmup.beta_at(0, 100), 2.0);
    }

    #[test]
    fn training_is_bit_deterministic_and_reduces_loss() {
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 8,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let (mut a, data) = toy();
        let (mut b, _) = toy();
        let ta = train_vae(&mut a, &data, &cfg).unwrap();
        let tb = train_vae(&mut b, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(a.epochs_trained(), 30);
        assert!(ta.last().unwrap().total < 0.7 * ta[0].total, "{ta:?}");
    }

    #[test]
    fn config_errors() {
        let (mut vae, data) = toy();
        let empty = Tensor2::zeros(0, 48);
        assert!(matches!(
            train_vae(&mut vae, &empty, &TrainConfig::default()),
            Err(Error::Config(_))
        ));
        let big_batch = TrainConfig {
            batch_size: 41,
            ..TrainConfig::default()
        };
        assert!(train_vae(&mut vae, &data, &big_batch).is_err());
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(train_vae(&mut vae, &data, &zero_epochs).is_err());
        assert!(!vae.is_trained());
    }
}
