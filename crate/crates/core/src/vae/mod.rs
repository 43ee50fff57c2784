//! Variational autoencoders for 64x64 images and grid melodies.
//!
//! Both models share [`Vae`]: a dense encoder producing `mu | logvar`
//! (one tanh hidden layer, linear heads) and a dense decoder (one tanh
//! hidden layer) with either a sigmoid image output trained by summed
//! squared error, or per-step token logits trained by summed cross-entropy.

mod image;
mod melody;
mod train;

pub use image::ImageVae;
pub use melody::MelodyVae;
pub use train::{train_vae, EpochLoss, TrainConfig};

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::error::{Error, Result};
use crate::nn::{
    gaussian_kl, kl_grad, relative_error, softmax_cross_entropy, softmax_cross_entropy_grad,
    Activation, DenseNet, GaussianLatent, Gradients, Real, Tensor2, LOGVAR_MAX, LOGVAR_MIN,
};
use crate::rng::{stream, Prng};

pub const DEFAULT_HIDDEN: usize = 512;
pub const DEFAULT_LATENT: usize = 32;

/// How the decoder output is scored against the input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReconKind {
    /// Sigmoid outputs, summed squared error over all values.
    SigmoidMse,
    /// `steps` blocks of `alphabet` logits; the input is the matching
    /// one-hot encoding. Summed cross-entropy over steps.
    Categorical { steps: usize, alphabet: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VaeArch {
    pub input: usize,
    pub hidden: usize,
    pub latent: usize,
    pub recon: ReconKind,
}

/// Batch-mean loss terms. `total = recon + beta * kl`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboLoss {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Gradients of the ELBO for both halves of a [`Vae`].
#[derive(Clone, Debug)]
pub struct VaeGradients<T = f32> {
    pub encoder: Gradients<T>,
    pub decoder: Gradients<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vae<T = f32> {
    arch: VaeArch,
    encoder: DenseNet<T>,
    decoder: DenseNet<T>,
    seed: u64,
    epochs_trained: u64,
}

impl<T: Real> Vae<T> {
    /// Glorot-initialised model; weights depend only on `seed`.
    pub fn new(arch: VaeArch, seed: u64) -> Result<Self> {
        if let ReconKind::Categorical { steps, alphabet } = arch.recon {
            if steps * alphabet != arch.input {
                return Err(Error::shape(format!(
                    "{steps} steps of {alphabet} tokens do not make {} inputs",
                    arch.input
                )));
            }
        }
        if arch.input == 0 || arch.hidden == 0 || arch.latent == 0 {
            return Err(Error::config("VAE dimensions must be positive"));
        }
        let mut rng = Prng::new(seed).fork(stream::INIT);
        let encoder = DenseNet::xavier(
            &[arch.input, arch.hidden, 2 * arch.latent],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )?;
        let out_act = match arch.recon {
            ReconKind::SigmoidMse => Activation::Sigmoid,
            ReconKind::Categorical { .. } => Activation::Identity,
        };
        let decoder = DenseNet::xavier(
            &[arch.latent, arch.hidden, arch.input],
            &[Activation::Tanh, out_act],
            &mut rng,
        )?;
        Ok(Self {
            arch,
            encoder,
            decoder,
            seed,
            epochs_trained: 0,
        })
    }

    /// Assemble from existing networks (e.g. a checkpoint).
    pub fn from_parts(
        arch: VaeArch,
        encoder: DenseNet<T>,
        decoder: DenseNet<T>,
        seed: u64,
        epochs_trained: u64,
    ) -> Result<Self> {
        let expect = |what: &str, got: Vec<(usize, usize)>, want: Vec<(usize, usize)>| {
            if got == want {
                Ok(())
            } else {
                Err(Error::mismatch(what, format!("layers {got:?}, expected {want:?}")))
            }
        };
        expect(
            "encoder",
            encoder.dims(),
            vec![(arch.input, arch.hidden), (arch.hidden, 2 * arch.latent)],
        )?;
        expect(
            "decoder",
            decoder.dims(),
            vec![(arch.latent, arch.hidden), (arch.hidden, arch.input)],
        )?;
        Ok(Self {
            arch,
            encoder,
            decoder,
            seed,
            epochs_trained,
        })
    }

    pub fn arch(&self) -> VaeArch {
        self.arch
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent
    }

    pub fn encoder(&self) -> &DenseNet<T> {
        &self.encoder
    }

    pub fn decoder(&self) -> &DenseNet<T> {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> &mut DenseNet<T> {
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut DenseNet<T> {
        &mut self.decoder
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epochs_trained(&self) -> u64 {
        self.epochs_trained
    }

    pub fn is_trained(&self) -> bool {
        self.epochs_trained > 0
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn cast<U: Real>(&self) -> Vae<U> {
        Vae {
            arch: self.arch,
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            seed: self.seed,
            epochs_trained: self.epochs_trained,
        }
    }

    fn split_heads(&self, h: &Tensor2<T>) -> (Tensor2<T>, Tensor2<T>) {
        let d = self.arch.latent;
        let lo = T::of(LOGVAR_MIN);
        let hi = T::of(LOGVAR_MAX);
        let mu = Tensor2::from_fn(h.rows(), d, |r, c| h.get(r, c));
        let lv = Tensor2::from_fn(h.rows(), d, |r, c| h.get(r, d + c).max(lo).min(hi));
        (mu, lv)
    }

    /// Posterior parameters for each row of `x`.
    pub fn encode_batch(&self, x: &Tensor2<T>) -> Result<(Tensor2<T>, Tensor2<T>)> {
        let h = self.encoder.predict_batch(x)?;
        Ok(self.split_heads(&h))
    }

    pub fn encode(&self, x: &[T]) -> Result<GaussianLatent<T>> {
        let (mu, lv) = self.encode_batch(&Tensor2::row_vector(x))?;
        GaussianLatent::new(mu.into_data(), lv.into_data())
    }

    /// Raw decoder output: sigmoid intensities or per-step logits.
    pub fn decode_batch(&self, z: &Tensor2<T>) -> Result<Tensor2<T>> {
        if z.cols() != self.arch.latent {
            return Err(Error::shape(format!(
                "latent has {} entries, model expects {}",
                z.cols(),
                self.arch.latent
            )));
        }
        self.decoder.predict_batch(z)
    }

    fn check_batch(&self, x: &Tensor2<T>, eps: &Tensor2<T>) -> Result<()> {
        if x.rows() == 0 {
            return Err(Error::config("empty batch"));
        }
        if x.cols() != self.arch.input {
            return Err(Error::shape(format!(
                "sample has {} values, model expects {}",
                x.cols(),
                self.arch.input
            )));
        }
        if eps.shape() != (x.rows(), self.arch.latent) {
            return Err(Error::shape(format!(
                "noise is {:?}, expected ({}, {})",
                eps.shape(),
                x.rows(),
                self.arch.latent
            )));
        }
        Ok(())
    }

    /// Reconstruction loss per sample and its gradient w.r.t. the decoder
    /// output, scaled by `scale`.
    fn recon_terms(&self, out: &Tensor2<T>, x: &Tensor2<T>, scale: T) -> Result<(f64, Tensor2<T>)> {
        let mut grad = Tensor2::zeros(out.rows(), out.cols());
        let mut total = 0.0;
        match self.arch.recon {
            ReconKind::SigmoidMse => {
                for ((g, &y), &t) in grad.data_mut().iter_mut().zip(out.data()).zip(x.data()) {
                    let diff = y - t;
                    total += diff.f64() * diff.f64();
                    *g = T::of(2.0) * diff * scale;
                }
            }
            ReconKind::Categorical { alphabet, .. } => {
                for r in 0..out.rows() {
                    let logits_row = out.row(r);
                    let target_row = x.row(r);
                    let grad_row = grad.row_mut(r);
                    for ((logits, onehot), g) in logits_row
                        .chunks(alphabet)
                        .zip(target_row.chunks(alphabet))
                        .zip(grad_row.chunks_mut(alphabet))
                    {
                        let target = argmax(onehot);
                        total += softmax_cross_entropy(logits, target)?;
                        softmax_cross_entropy_grad(logits, target, g);
                        for v in g.iter_mut() {
                            *v = *v * scale;
                        }
                    }
                }
            }
        }
        Ok((total, grad))
    }

    /// Batch-mean ELBO terms and gradients with the sampling noise `eps`
    /// held fixed (`batch x latent`).
    pub fn loss_and_grads(
        &self,
        x: &Tensor2<T>,
        eps: &Tensor2<T>,
        beta: f64,
    ) -> Result<(ElboLoss, VaeGradients<T>)> {
        self.check_batch(x, eps)?;
        let n = x.rows();
        let d = self.arch.latent;
        let inv_n = T::of(1.0 / n as f64);
        let beta_t = T::of(beta);

        let enc = self.encoder.forward_batch(x.clone())?;
        let heads = enc.output();
        let (mu, lv) = self.split_heads(heads);
        let mut z = Tensor2::zeros(n, d);
        for i in 0..n * d {
            let s = (lv.data()[i] * T::of(0.5)).exp();
            z.data_mut()[i] = mu.data()[i] + s * eps.data()[i];
        }

        let dec = self.decoder.forward_batch(z)?;
        let (recon_sum, d_out) = self.recon_terms(dec.output(), x, inv_n)?;
        let dz = self.decoder.backward(&dec, &d_out)?;

        let mut kl_sum = 0.0;
        let mut d_heads = Tensor2::zeros(n, 2 * d);
        for r in 0..n {
            let latent = GaussianLatent {
                mu: mu.row(r).to_vec(),
                logvar: lv.row(r).to_vec(),
            };
            kl_sum += gaussian_kl(&latent);
            for c in 0..d {
                let (m, l) = (mu.get(r, c), lv.get(r, c));
                let raw_lv = heads.get(r, d + c);
                let (kl_m, kl_l) = kl_grad(m, l);
                let g_z = dz.input_grad.get(r, c);
                d_heads.set(r, c, g_z + beta_t * kl_m * inv_n);
                let clamped = raw_lv < T::of(LOGVAR_MIN) || raw_lv > T::of(LOGVAR_MAX);
                let g_l = if clamped {
                    T::zero()
                } else {
                    g_z * eps.get(r, c) * T::of(0.5) * (l * T::of(0.5)).exp() + beta_t * kl_l * inv_n
                };
                d_heads.set(r, d + c, g_l);
            }
        }
        let enc_grads = self.encoder.backward_params(&enc, &d_heads)?;

        let recon = recon_sum / n as f64;
        let kl = kl_sum / n as f64;
        Ok((
            ElboLoss {
                total: recon + beta * kl,
                recon,
                kl,
            },
            VaeGradients {
                encoder: enc_grads,
                decoder: dz.grads,
            },
        ))
    }

    /// Batch-mean ELBO terms. `eps = None` evaluates at the posterior mean.
    pub fn elbo_loss(&self, x: &Tensor2<T>, beta: f64, eps: Option<&Tensor2<T>>) -> Result<ElboLoss> {
        let zeros;
        let eps = match eps {
            Some(e) => e,
            None => {
                zeros = Tensor2::zeros(x.rows(), self.arch.latent);
                &zeros
            }
        };
        self.check_batch(x, eps)?;
        let (mu, lv) = self.encode_batch(x)?;
        let mut z = mu.clone();
        for (i, v) in z.data_mut().iter_mut().enumerate() {
            *v = *v + (lv.data()[i] * T::of(0.5)).exp() * eps.data()[i];
        }
        let out = self.decoder.predict_batch(&z)?;
        let (recon_sum, _) = self.recon_terms(&out, x, T::one())?;
        let kl_sum: f64 = (0..x.rows())
            .map(|r| {
                gaussian_kl(&GaussianLatent {
                    mu: mu.row(r).to_vec(),
                    logvar: lv.row(r).to_vec(),
                })
            })
            .sum();
        let n = x.rows() as f64;
        let (recon, kl) = (recon_sum / n, kl_sum / n);
        Ok(ElboLoss {
            total: recon + beta * kl,
            recon,
            kl,
        })
    }

    pub(crate) fn mark_trained(&mut self, epochs: u64) {
        self.epochs_trained += epochs;
    }
}

pub(crate) fn vae_checkpoint(kind: ModelKind, vae: &Vae<f32>, extra: &[(&str, String)]) -> Checkpoint {
    let mut c = Checkpoint::new(kind);
    for (k, v) in extra {
        c.set(k, v);
    }
    c.set("latent_dim", vae.arch.latent);
    c.set("hidden", vae.arch.hidden);
    c.set("seed", vae.seed);
    c.set("epochs", vae.epochs_trained);
    c.push_net("encoder", &vae.encoder);
    c.push_net("decoder", &vae.decoder);
    c
}

pub(crate) fn vae_from_checkpoint(
    ckpt: &Checkpoint,
    kind: ModelKind,
    recon: impl FnOnce(&Checkpoint) -> Result<ReconKind>,
) -> Result<Vae<f32>> {
    ckpt.expect_kind(kind)?;
    let latent: usize = ckpt.parse_field("latent_dim")?;
    let hidden: usize = ckpt.parse_field("hidden")?;
    let mut reader = ckpt.reader();
    let encoder = ckpt.read_net("encoder", &mut reader)?;
    let decoder = ckpt.read_net("decoder", &mut reader)?;
    reader.finish()?;
    let arch = VaeArch {
        input: encoder.in_dim(),
        hidden,
        latent,
        recon: recon(ckpt)?,
    };
    if let ReconKind::Categorical { steps, alphabet } = arch.recon {
        if steps * alphabet != arch.input {
            return Err(Error::mismatch("encoder", "input width does not match the bar count"));
        }
    }
    Vae::from_parts(
        arch,
        encoder,
        decoder,
        ckpt.parse_field("seed")?,
        ckpt.parse_field("epochs")?,
    )
}

pub(crate) fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Maximum relative error between [`Vae::loss_and_grads`] and central
/// differences of the ELBO over every encoder and decoder parameter, with
/// the noise `eps` frozen.
pub fn vae_grad_check(vae: &Vae<f64>, x: &Tensor2<f64>, eps: &Tensor2<f64>, beta: f64) -> Result<f64> {
    use crate::nn::GRADCHECK_H as H;
    if vae.param_count() > 10_000 {
        return Err(Error::contract("gradient check limited to 10000 parameters"));
    }
    let (_, grads) = vae.loss_and_grads(x, eps, beta)?;
    let analytic: Vec<Vec<f64>> = grads
        .encoder
        .slices()
        .into_iter()
        .chain(grads.decoder.slices())
        .map(<[f64]>::to_vec)
        .collect();

    let mut probe = vae.clone();
    let n_enc = probe.encoder.params().len();
    let mut worst: f64 = 0.0;
    for (s, grad) in analytic.iter().enumerate() {
        for (i, &g) in grad.iter().enumerate() {
            let set = |probe: &mut Vae<f64>, value: f64| {
                if s < n_enc {
                    probe.encoder.params_mut()[s][i] = value;
                } else {
                    probe.decoder.params_mut()[s - n_enc][i] = value;
                }
            };
            let original = if s < n_enc {
                probe.encoder.params()[s][i]
            } else {
                probe.decoder.params()[s - n_enc][i]
            };
            set(&mut probe, original + H);
            let plus = probe.elbo_loss(x, beta, Some(eps))?.total;
            set(&mut probe, original - H);
            let minus = probe.elbo_loss(x, beta, Some(eps))?.total;
            set(&mut probe, original);
            worst = worst.max(relative_error(g, (plus - minus) / (2.0 * H)));
        }
    }
    Ok(worst)
}
