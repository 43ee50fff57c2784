use super::image::prior_draws;
use super::{argmax, train_vae, EpochLoss, ReconKind, TrainConfig, Vae, VaeArch};
use crate::checkpoint::{Checkpoint, ModelKind};
use crate::error::{Error, Result};
use crate::melody::{check_bars, Token, TokenGrid, ALPHABET, STEPS_PER_BAR};
use crate::nn::{GaussianLatent, Tensor2};

const CHUNK: usize = 512;

/// VAE over one-hot token grids with per-step categorical outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MelodyVae {
    vae: Vae<f32>,
    bars: usize,
}

impl MelodyVae {
    pub fn new(bars: usize, latent: usize, hidden: usize, seed: u64) -> Result<Self> {
        check_bars(bars)?;
        let steps = STEPS_PER_BAR * bars;
        let arch = VaeArch {
            input: steps * ALPHABET,
            hidden,
            latent,
            recon: ReconKind::Categorical {
                steps,
                alphabet: ALPHABET,
            },
        };
        Ok(Self {
            vae: Vae::new(arch, seed)?,
            bars,
        })
    }

    pub fn bars(&self) -> usize {
        self.bars
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

    fn check(&self, grid: &TokenGrid) -> Result<()> {
        if grid.bars() != self.bars {
            return Err(Error::shape(format!(
                "melody has {} bars, model expects {}",
                grid.bars(),
                self.bars
            )));
        }
        Ok(())
    }

    pub fn dataset(&self, grids: &[TokenGrid]) -> Result<Tensor2<f32>> {
        let mut data = Vec::with_capacity(grids.len() * self.vae.arch().input);
        for g in grids {
            self.check(g)?;
            data.extend(g.one_hot());
        }
        Tensor2::new(grids.len(), self.vae.arch().input, data)
    }

    pub fn encode(&self, grid: &TokenGrid) -> Result<GaussianLatent> {
        self.check(grid)?;
        self.vae.encode(&grid.one_hot())
    }

    pub fn encode_means(&self, grids: &[TokenGrid]) -> Result<Vec<Vec<f32>>> {
        let mut out = Vec::with_capacity(grids.len());
        for chunk in grids.chunks(CHUNK) {
            let (mu, _) = self.vae.encode_batch(&self.dataset(chunk)?)?;
            out.extend(mu.iter_rows().map(<[f32]>::to_vec));
        }
        Ok(out)
    }

    /// Greedy per-step decode, normalised into a valid grid.
    pub fn decode(&self, z: &[f32]) -> Result<TokenGrid> {
        Ok(self.decode_many(&[z.to_vec()])?.remove(0))
    }

    pub fn decode_many(&self, zs: &[Vec<f32>]) -> Result<Vec<TokenGrid>> {
        let mut out = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(CHUNK) {
            let logits = self.vae.decode_batch(&Tensor2::from_rows(chunk)?)?;
            for row in logits.iter_rows() {
                let steps = row
                    .chunks_exact(ALPHABET)
                    .map(|step| Token::from_index(argmax(step)))
                    .collect::<Result<Vec<_>>>()?;
                out.push(TokenGrid::normalized(self.bars, steps)?);
            }
        }
        Ok(out)
    }

    pub fn train(&mut self, grids: &[TokenGrid], config: &TrainConfig) -> Result<Vec<EpochLoss>> {
        if grids.is_empty() {
            return Err(Error::config("melody dataset is empty"));
        }
        let data = self.dataset(grids)?;
        train_vae(&mut self.vae, &data, config)
    }

    pub fn sample_prior(&self, seed: u64, count: usize) -> Result<Vec<TokenGrid>> {
        self.decode_many(&prior_draws(seed, count, self.latent_dim()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        super::vae_checkpoint(ModelKind::MelodyVae, &self.vae, &[("bars", self.bars.to_string())])
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(ModelKind::MelodyVae)?;
        let bars: usize = ckpt.parse_field("bars")?;
        check_bars(bars).map_err(|e| Error::mismatch("bars", e.to_string()))?;
        let steps = STEPS_PER_BAR * bars;
        let vae = super::vae_from_checkpoint(ckpt, ModelKind::MelodyVae, |_| {
            Ok(ReconKind::Categorical {
                steps,
                alphabet: ALPHABET,
            })
        })?;
        Ok(Self { vae, bars })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::steps_are_valid;

    #[test]
    fn decoded_prior_samples_are_valid_grids() {
        let vae = MelodyVae::new(2, 8, 16, 5).unwrap();
        let grids = vae.sample_prior(9, 1000).unwrap();
        assert_eq!(grids.len(), 1000);
        assert!(grids.iter().all(|g| g.len() == 32 && steps_are_valid(g.steps())));
        assert_eq!(grids, vae.sample_prior(9, 1000).unwrap());
    }

    #[test]
    fn wrong_bar_count_is_a_shape_error() {
        let vae = MelodyVae::new(2, 4, 8, 5).unwrap();
        let long = TokenGrid::rest(16).unwrap();
        assert!(matches!(vae.encode(&long), Err(Error::Shape(_))));
        assert!(MelodyVae::new(3, 4, 8, 5).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let vae = MelodyVae::new(2, 4, 8, 5).unwrap();
        let back = MelodyVae::from_checkpoint(&Checkpoint::from_bytes(&vae.to_checkpoint().to_bytes()).unwrap())
            .unwrap();
        assert_eq!(back, vae);
    }
}
