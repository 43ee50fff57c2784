use super::{train_vae, EpochLoss, ReconKind, TrainConfig, Vae, VaeArch};
use crate::checkpoint::{Checkpoint, ModelKind};
use crate::error::{Error, Result};
use crate::imaging::{ImageRgb64, IMAGE_VALUES};
use crate::nn::{GaussianLatent, Tensor2};
use crate::rng::{stream, Prng};

/// Rows pushed through the encoder or decoder at once.
const CHUNK: usize = 256;

/// VAE over flattened 64x64 RGB images with a sigmoid output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVae {
    vae: Vae<f32>,
}

impl ImageVae {
    pub fn new(latent: usize, hidden: usize, seed: u64) -> Result<Self> {
        let arch = VaeArch {
            input: IMAGE_VALUES,
            hidden,
            latent,
            recon: ReconKind::SigmoidMse,
        };
        Ok(Self {
            vae: Vae::new(arch, seed)?,
        })
    }

    pub fn vae(&self) -> &Vae<f32> {
        &self.vae
    }

    pub fn vae_mut(&mut self) -> &mut Vae<f32> {
        &mut self.vae
    }

    pub fn latent_dim(&self) -> usize {
        self.vae.latent_dim()
    }

    pub fn is_trained(&self) -> bool {
        self.vae.is_trained()
    }

    pub fn dataset(images: &[ImageRgb64]) -> Tensor2<f32> {
        let mut data = Vec::with_capacity(images.len() * IMAGE_VALUES);
        for img in images {
            data.extend_from_slice(img.data());
        }
        Tensor2::new(images.len(), IMAGE_VALUES, data).expect("images have fixed size")
    }

    pub fn encode(&self, image: &ImageRgb64) -> Result<GaussianLatent> {
        self.vae.encode(image.data())
    }

    /// Posterior means, one per image.
    pub fn encode_means(&self, images: &[ImageRgb64]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(CHUNK) {
            let (mu, _) = self.vae.encode_batch(&Self::dataset(chunk))?;
            out.extend(mu.iter_rows().map(<[f32]>::to_vec));
        }
        Ok(out)
    }

    pub fn decode(&self, z: &[f32]) -> Result<ImageRgb64> {
        Ok(self.decode_many(&[z.to_vec()])?.remove(0))
    }

    pub fn decode_many(&self, zs: &[Vec<f32>]) -> Result<Vec<ImageRgb64>> {
        let mut out = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(CHUNK) {
            let y = self.vae.decode_batch(&Tensor2::from_rows(chunk)?)?;
            for row in y.iter_rows() {
                out.push(ImageRgb64::new(row.to_vec())?);
            }
        }
        Ok(out)
    }

    pub fn train(&mut self, images: &[ImageRgb64], config: &TrainConfig) -> Result<Vec<EpochLoss>> {
        if images.is_empty() {
            return Err(Error::config("image dataset is empty"));
        }
        train_vae(&mut self.vae, &Self::dataset(images), config)
    }

    /// Decode `count` draws from the standard normal prior.
    pub fn sample_prior(&self, seed: u64, count: usize) -> Result<Vec<ImageRgb64>> {
        self.decode_many(&prior_draws(seed, count, self.latent_dim()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        super::vae_checkpoint(ModelKind::ImageVae, &self.vae, &[])
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let vae = super::vae_from_checkpoint(ckpt, ModelKind::ImageVae, |_| Ok(ReconKind::SigmoidMse))?;
        if vae.arch().input != IMAGE_VALUES {
            return Err(Error::mismatch("encoder", "image VAE input must be 12288 values"));
        }
        Ok(Self { vae })
    }
}

pub(crate) fn prior_draws(seed: u64, count: usize, dim: usize) -> Vec<Vec<f32>> {
    let mut rng = Prng::new(seed).fork(stream::PRIOR);
    (0..count)
        .map(|_| rng.gaussian_vec(dim).into_iter().map(|v| v as f32).collect())
        .collect()
}
