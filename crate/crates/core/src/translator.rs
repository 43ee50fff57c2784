//! Translation networks between the image and melody latent spaces, their
//! two-stage training, and the end-to-end translation pipelines.

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::codec::melody_to_image;
use crate::error::{Error, Result};
use crate::imaging::{downsample64, ImageRgb64, ImageRgbFull};
use crate::melody::{check_bars, TokenGrid};
use crate::nn::{mse_grad, Activation, AdamConfig, AdamState, DenseNet, Tensor2};
use crate::rng::{stream, Prng};
use crate::vae::{ImageVae, MelodyVae};

pub const TRANSLATOR_HIDDEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairOrigin {
    /// Prior melody rendered through the note-color map.
    Synthetic,
    /// Artwork tile paired with the melody the translator assigns it.
    Tile,
}

/// Corresponding posterior means in the two latent spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPair {
    pub z_image: Vec<f32>,
    pub z_melody: Vec<f32>,
    pub origin: PairOrigin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranslatorConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// The step size decays linearly to `learning_rate * final_lr_frac`
    /// over the run.
    pub final_lr_frac: f64,
    /// Share of pairs held back to pick, per direction, the weights of the
    /// epoch with the lowest validation error. 0 keeps the last epoch.
    pub validation_frac: f64,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            seed: 7,
            learning_rate: 1e-3,
            final_lr_frac: 0.1,
            validation_frac: 0.1,
        }
    }
}

impl TranslatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("translator epochs and batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.final_lr_frac) {
            return Err(Error::config("final learning-rate fraction must lie in [0, 1]"));
        }
        if !(0.0..0.5).contains(&self.validation_frac) {
            return Err(Error::config("validation fraction must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// Per-epoch mean squared errors (mean over latent components) on the
/// training and validation pairs. Validation errors are NaN without a
/// validation split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslatorEpoch {
    pub epoch: usize,
    pub i2m: f64,
    pub m2i: f64,
    pub val_i2m: f64,
    pub val_m2i: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Translator {
    i2m: DenseNet<f32>,
    m2i: DenseNet<f32>,
    bars: usize,
    seed: u64,
    stage: u8,
    synthetic_pairs: usize,
    tile_pairs: usize,
}

fn mlp(input: usize, output: usize, rng: &mut Prng) -> Result<DenseNet<f32>> {
    DenseNet::xavier(
        &[input, TRANSLATOR_HIDDEN, TRANSLATOR_HIDDEN, output],
        &[Activation::Tanh, Activation::Tanh, Activation::Identity],
        rng,
    )
}

impl Translator {
    pub fn new(d_img: usize, d_mel: usize, bars: usize, seed: u64) -> Result<Self> {
        check_bars(bars)?;
        if d_img == 0 || d_mel == 0 {
            return Err(Error::config("latent dimensions must be positive"));
        }
        let mut rng = Prng::new(seed).fork(stream::INIT);
        Ok(Self {
            i2m: mlp(d_img, d_mel, &mut rng)?,
            m2i: mlp(d_mel, d_img, &mut rng)?,
            bars,
            seed,
            stage: 0,
            synthetic_pairs: 0,
            tile_pairs: 0,
        })
    }

    /// Translator sized for a pair of VAEs.
    pub fn for_models(image: &ImageVae, melody: &MelodyVae, seed: u64) -> Result<Self> {
        Self::new(image.latent_dim(), melody.latent_dim(), melody.bars(), seed)
    }

    pub fn d_img(&self) -> usize {
        self.i2m.in_dim()
    }

    pub fn d_mel(&self) -> usize {
        self.i2m.out_dim()
    }

    pub fn bars(&self) -> usize {
        self.bars
    }

    /// 0 untrained, 1 after stage 1, 2 after refinement.
    pub fn stage(&self) -> u8 {
        self.stage
    }

    /// Pairs seen in the latest training run, by origin.
    pub fn pair_counts(&self) -> (usize, usize) {
        (self.synthetic_pairs, self.tile_pairs)
    }

    pub fn i2m_net(&self) -> &DenseNet<f32> {
        &self.i2m
    }

    pub fn m2i_net(&self) -> &DenseNet<f32> {
        &self.m2i
    }

    pub fn image_to_melody(&self, z_image: &[f32]) -> Result<Vec<f32>> {
        self.i2m.predict(z_image)
    }

    pub fn melody_to_image(&self, z_melody: &[f32]) -> Result<Vec<f32>> {
        self.m2i.predict(z_melody)
    }

    pub fn image_to_melody_many(&self, zs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        predict_rows(&self.i2m, zs)
    }

    pub fn melody_to_image_many(&self, zs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
        predict_rows(&self.m2i, zs)
    }

    /// Distance of each image latent from its own round trip through both
    /// directions.
    pub fn cycle_errors(&self, z_images: &[Vec<f32>]) -> Result<Vec<f64>> {
        let back = self.melody_to_image_many(&self.image_to_melody_many(z_images)?)?;
        Ok(back.iter().zip(z_images).map(|(a, b)| distance(a, b)).collect())
    }

    fn check_pairs(&self, pairs: &[LatentPair]) -> Result<()> {
        for p in pairs {
            if p.z_image.len() != self.d_img() || p.z_melody.len() != self.d_mel() {
                return Err(Error::shape(format!(
                    "pair has dims ({}, {}), translator binds ({}, {})",
                    p.z_image.len(),
                    p.z_melody.len(),
                    self.d_img(),
                    self.d_mel()
                )));
            }
            if !p.z_image.iter().chain(&p.z_melody).all(|v| v.is_finite()) {
                return Err(Error::domain("latent pair has non-finite entries"));
            }
        }
        Ok(())
    }

    /// Fit both directions on `pairs` by minibatch Adam on the squared error.
    pub fn train_stage1(&mut self, pairs: &[LatentPair], config: &TranslatorConfig) -> Result<Vec<TranslatorEpoch>> {
        if pairs.is_empty() {
            return Err(Error::config("no latent pairs to train on"));
        }
        let trace = self.fit(pairs, config)?;
        self.stage = self.stage.max(1);
        self.record(pairs);
        Ok(trace)
    }

    /// Second stage: pair every tile with the melody the current translator
    /// assigns it, then retrain both directions on `synthetic` plus those
    /// tile pairs. Returns the tile pairs that were added.
    pub fn refine_stage2(
        &mut self,
        synthetic: &[LatentPair],
        tiles: &[ImageRgb64],
        image_vae: &ImageVae,
        melody_vae: &MelodyVae,
        config: &TranslatorConfig,
    ) -> Result<(Vec<LatentPair>, Vec<TranslatorEpoch>)> {
        if self.stage < 1 {
            return Err(Error::contract("stage-2 refinement needs a stage-1 translator"));
        }
        check_models(image_vae, melody_vae, self)?;
        if tiles.is_empty() {
            self.stage = 2;
            self.synthetic_pairs = synthetic.len();
            self.tile_pairs = 0;
            return Ok((Vec::new(), Vec::new()));
        }
        let tile_pairs = self.tile_pairs(tiles, image_vae, melody_vae)?;
        let mut all = synthetic.to_vec();
        all.extend(tile_pairs.iter().cloned());
        let trace = self.fit(&all, config)?;
        self.stage = 2;
        self.record(&all);
        Ok((tile_pairs, trace))
    }

    /// Ground-truth pairs for tiles under the current translator.
    pub fn tile_pairs(
        &self,
        tiles: &[ImageRgb64],
        image_vae: &ImageVae,
        melody_vae: &MelodyVae,
    ) -> Result<Vec<LatentPair>> {
        let z_t = image_vae.encode_means(tiles)?;
        let melodies = melody_vae.decode_many(&self.image_to_melody_many(&z_t)?)?;
        let z_m = melody_vae.encode_means(&melodies)?;
        Ok(z_t
            .into_iter()
            .zip(z_m)
            .map(|(z_image, z_melody)| LatentPair {
                z_image,
                z_melody,
                origin: PairOrigin::Tile,
            })
            .collect())
    }

    fn record(&mut self, pairs: &[LatentPair]) {
        self.synthetic_pairs = pairs.iter().filter(|p| p.origin == PairOrigin::Synthetic).count();
        self.tile_pairs = pairs.len() - self.synthetic_pairs;
    }

    fn fit(&mut self, pairs: &[LatentPair], config: &TranslatorConfig) -> Result<Vec<TranslatorEpoch>> {
        config.validate()?;
        self.check_pairs(pairs)?;
        let mut rng = Prng::new(config.seed).fork(stream::SHUFFLE);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let n_val = (config.validation_frac * pairs.len() as f64).floor() as usize;
        let val_idx = if n_val > 0 {
            rng.shuffle(&mut order);
            order.split_off(pairs.len() - n_val)
        } else {
            Vec::new()
        };
        let zi = Tensor2::from_rows(&pairs.iter().map(|p| &p.z_image[..]).collect::<Vec<_>>())?;
        let zm = Tensor2::from_rows(&pairs.iter().map(|p| &p.z_melody[..]).collect::<Vec<_>>())?;
        let (val_i, val_m) = (zi.gather_rows(&val_idx), zm.gather_rows(&val_idx));
        let adam = AdamConfig {
            lr: config.learning_rate,
            ..AdamConfig::default()
        };
        let mut opt_i2m = AdamState::for_params(adam, &self.i2m.params());
        let mut opt_m2i = AdamState::for_params(adam, &self.m2i.params());
        let mut best_i2m = (f64::INFINITY, self.i2m.clone());
        let mut best_m2i = (f64::INFINITY, self.m2i.clone());
        let n_train = order.len();
        let total_steps = n_train.div_ceil(config.batch_size) * config.epochs;
        let mut step = 0;
        let mut trace = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            rng.shuffle(&mut order);
            let (mut e_i2m, mut e_m2i) = (0.0, 0.0);
            for idx in order.chunks(config.batch_size) {
                let progress = step as f64 / total_steps as f64;
                let lr = config.learning_rate * (1.0 - (1.0 - config.final_lr_frac) * progress);
                opt_i2m.set_learning_rate(lr);
                opt_m2i.set_learning_rate(lr);
                let (x, y) = (zi.gather_rows(idx), zm.gather_rows(idx));
                e_i2m += mse_step(&mut self.i2m, &mut opt_i2m, x.clone(), &y)? * idx.len() as f64;
                e_m2i += mse_step(&mut self.m2i, &mut opt_m2i, y, &x)? * idx.len() as f64;
                step += 1;
            }
            let (mut v_i2m, mut v_m2i) = (f64::NAN, f64::NAN);
            if n_val > 0 {
                v_i2m = batch_mse(&self.i2m, &val_i, &val_m)?;
                v_m2i = batch_mse(&self.m2i, &val_m, &val_i)?;
                if v_i2m < best_i2m.0 {
                    best_i2m = (v_i2m, self.i2m.clone());
                }
                if v_m2i < best_m2i.0 {
                    best_m2i = (v_m2i, self.m2i.clone());
                }
            }
            let n = n_train as f64;
            trace.push(TranslatorEpoch {
                epoch,
                i2m: e_i2m / n,
                m2i: e_m2i / n,
                val_i2m: v_i2m,
                val_m2i: v_m2i,
            });
        }
        if n_val > 0 {
            self.i2m = best_i2m.1;
            self.m2i = best_m2i.1;
        }
        Ok(trace)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(ModelKind::Translator);
        c.set("bars", self.bars);
        c.set("d_img", self.d_img());
        c.set("d_mel", self.d_mel());
        c.set("seed", self.seed);
        c.set("stage", self.stage);
        c.set("synthetic_pairs", self.synthetic_pairs);
        c.set("tile_pairs", self.tile_pairs);
        c.push_net("i2m", &self.i2m);
        c.push_net("m2i", &self.m2i);
        c
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.expect_kind(ModelKind::Translator)?;
        let bars: usize = ckpt.parse_field("bars")?;
        check_bars(bars).map_err(|e| Error::mismatch("bars", e.to_string()))?;
        let d_img: usize = ckpt.parse_field("d_img")?;
        let d_mel: usize = ckpt.parse_field("d_mel")?;
        let mut reader = ckpt.reader();
        let i2m = ckpt.read_net("i2m", &mut reader)?;
        let m2i = ckpt.read_net("m2i", &mut reader)?;
        reader.finish()?;
        if i2m.in_dim() != d_img || m2i.out_dim() != d_img {
            return Err(Error::mismatch("d_img", "network widths disagree with the header"));
        }
        if i2m.out_dim() != d_mel || m2i.in_dim() != d_mel {
            return Err(Error::mismatch("d_mel", "network widths disagree with the header"));
        }
        Ok(Self {
            i2m,
            m2i,
            bars,
            seed: ckpt.parse_field("seed")?,
            stage: ckpt.parse_field("stage")?,
            synthetic_pairs: ckpt.parse_field("synthetic_pairs")?,
            tile_pairs: ckpt.parse_field("tile_pairs")?,
        })
    }
}

fn predict_rows(net: &DenseNet<f32>, zs: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    if zs.is_empty() {
        return Ok(Vec::new());
    }
    let y = net.predict_batch(&Tensor2::from_rows(zs)?)?;
    Ok(y.iter_rows().map(<[f32]>::to_vec).collect())
}

fn batch_mse(net: &DenseNet<f32>, x: &Tensor2<f32>, target: &Tensor2<f32>) -> Result<f64> {
    let y = net.predict_batch(x)?;
    let mut total = 0.0;
    for r in 0..y.rows() {
        total += crate::nn::mse(y.row(r), target.row(r))?;
    }
    Ok(total / y.rows().max(1) as f64)
}

/// One Adam step on the batch-mean squared error; returns the loss.
fn mse_step(net: &mut DenseNet<f32>, opt: &mut AdamState<f32>, x: Tensor2<f32>, target: &Tensor2<f32>) -> Result<f64> {
    let cache = net.forward_batch(x)?;
    let y = cache.output();
    let rows = y.rows() as f32;
    let mut d = Tensor2::zeros(y.rows(), y.cols());
    let mut loss = 0.0;
    for r in 0..y.rows() {
        loss += crate::nn::mse(y.row(r), target.row(r))?;
        mse_grad(y.row(r), target.row(r), 1.0 / rows, d.row_mut(r));
    }
    let grads = net.backward_params(&cache, &d)?;
    opt.step(&mut net.params_mut(), &grads.slices())?;
    Ok(loss / y.rows() as f64)
}

pub fn distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_models(image: &ImageVae, melody: &MelodyVae, translator: &Translator) -> Result<()> {
    if translator.d_img() != image.latent_dim() {
        return Err(Error::mismatch(
            "d_img",
            format!(
                "translator binds {}, image VAE has {}",
                translator.d_img(),
                image.latent_dim()
            ),
        ));
    }
    if translator.d_mel() != melody.latent_dim() {
        return Err(Error::mismatch(
            "d_mel",
            format!(
                "translator binds {}, melody VAE has {}",
                translator.d_mel(),
                melody.latent_dim()
            ),
        ));
    }
    if translator.bars() != melody.bars() {
        return Err(Error::mismatch(
            "bars",
            format!("translator uses {}, melody VAE {}", translator.bars(), melody.bars()),
        ));
    }
    Ok(())
}

/// Sample `count` melodies from the melody prior, render each through the
/// note-color map and pair the two posterior means.
pub fn make_synthetic_pairs(
    melody_vae: &MelodyVae,
    image_vae: &ImageVae,
    count: usize,
    seed: u64,
) -> Result<Vec<LatentPair>> {
    if !melody_vae.is_trained() || !image_vae.is_trained() {
        return Err(Error::contract("synthetic pairs need trained VAEs"));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let seed = Prng::new(seed).fork(stream::PAIRS).seed();
    let melodies = melody_vae.sample_prior(seed, count)?;
    let images: Vec<ImageRgb64> = melodies.iter().map(melody_to_image).collect();
    let z_image = image_vae.encode_means(&images)?;
    let z_melody = melody_vae.encode_means(&melodies)?;
    Ok(z_image
        .into_iter()
        .zip(z_melody)
        .map(|(z_image, z_melody)| LatentPair {
            z_image,
            z_melody,
            origin: PairOrigin::Synthetic,
        })
        .collect())
}

pub fn pairs_to_checkpoint(pairs: &[LatentPair], d_img: usize, d_mel: usize) -> Result<Checkpoint> {
    let mut c = Checkpoint::new(ModelKind::Pairs);
    c.set("count", pairs.len());
    c.set("d_img", d_img);
    c.set("d_mel", d_mel);
    let origins: String = pairs
        .iter()
        .map(|p| match p.origin {
            PairOrigin::Synthetic => 's',
            PairOrigin::Tile => 't',
        })
        .collect();
    c.set("origins", origins);
    for p in pairs {
        if p.z_image.len() != d_img || p.z_melody.len() != d_mel {
            return Err(Error::shape("pair dims differ from the declared dims"));
        }
        c.push_floats(&p.z_image);
        c.push_floats(&p.z_melody);
    }
    Ok(c)
}

pub fn pairs_from_checkpoint(ckpt: &Checkpoint) -> Result<Vec<LatentPair>> {
    ckpt.expect_kind(ModelKind::Pairs)?;
    let count: usize = ckpt.parse_field("count")?;
    let d_img: usize = ckpt.parse_field("d_img")?;
    let d_mel: usize = ckpt.parse_field("d_mel")?;
    let origins = ckpt.require("origins")?;
    if origins.len() != count {
        return Err(Error::mismatch("origins", "length differs from count"));
    }
    let mut reader = ckpt.reader();
    let mut out = Vec::with_capacity(count);
    for o in origins.chars() {
        let origin = match o {
            's' => PairOrigin::Synthetic,
            't' => PairOrigin::Tile,
            _ => return Err(Error::mismatch("origins", format!("unknown origin tag `{o}`"))),
        };
        out.push(LatentPair {
            z_image: reader.take(d_img)?.to_vec(),
            z_melody: reader.take(d_mel)?.to_vec(),
            origin,
        });
    }
    reader.finish()?;
    Ok(out)
}

/// A compatible image VAE, melody VAE and translator.
#[derive(Clone, Debug)]
pub struct Models {
    pub image: ImageVae,
    pub melody: MelodyVae,
    pub translator: Translator,
}

impl Models {
    pub fn new(image: ImageVae, melody: MelodyVae, translator: Translator) -> Result<Self> {
        check_models(&image, &melody, &translator)?;
        Ok(Self {
            image,
            melody,
            translator,
        })
    }

    pub fn bars(&self) -> usize {
        self.melody.bars()
    }

    /// Translation needs trained VAEs and a translator of stage 1 or later.
    pub fn require_trained(&self) -> Result<()> {
        if !self.image.is_trained() || !self.melody.is_trained() || self.translator.stage() == 0 {
            return Err(Error::contract("translation needs trained VAEs and translator"));
        }
        Ok(())
    }

    /// Melody latent assigned to an image.
    pub fn melody_latent_of(&self, image: &ImageRgb64) -> Result<Vec<f32>> {
        self.require_trained()?;
        self.translator.image_to_melody(&self.image.encode(image)?.mu)
    }

    /// Image latent assigned to a melody.
    pub fn image_latent_of(&self, grid: &TokenGrid) -> Result<Vec<f32>> {
        self.require_trained()?;
        self.translator.melody_to_image(&self.melody.encode(grid)?.mu)
    }

    pub fn translate_image_to_melody(&self, image: &ImageRgb64) -> Result<TokenGrid> {
        self.melody.decode(&self.melody_latent_of(image)?)
    }

    /// Like [`Models::translate_image_to_melody`] for an image of any size,
    /// which is box-filtered to 64x64 first.
    pub fn translate_full_image(&self, image: &ImageRgbFull) -> Result<TokenGrid> {
        self.translate_image_to_melody(&downsample64(image))
    }

    pub fn translate_melody_to_image(&self, grid: &TokenGrid) -> Result<ImageRgb64> {
        self.image.decode(&self.image_latent_of(grid)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_pairs(a: &[Vec<f64>], n: usize, rng: &mut Prng) -> Vec<LatentPair> {
        (0..n)
            .map(|_| {
                let zi = rng.gaussian_vec(a[0].len());
                let zm: Vec<f32> = a
                    .iter()
                    .map(|row| row.iter().zip(&zi).map(|(w, x)| w * x).sum::<f64>() as f32)
                    .collect();
                LatentPair {
                    z_image: zi.into_iter().map(|v| v as f32).collect(),
                    z_melody: zm,
                    origin: PairOrigin::Synthetic,
                }
            })
            .collect()
    }

    fn held_out_mse(t: &Translator, pairs: &[LatentPair]) -> f64 {
        pairs
            .iter()
            .map(|p| crate::nn::mse(&t.image_to_melody(&p.z_image).unwrap(), &p.z_melody).unwrap())
            .sum::<f64>()
            / pairs.len() as f64
    }

    #[test]
    fn training_reduces_error_and_is_deterministic() {
        let mut rng = Prng::new(1);
        let d = 6;
        let a: Vec<Vec<f64>> = (0..d).map(|_| rng.gaussian_vec(d).iter().map(|v| v / (d as f64).sqrt()).collect()).collect();
        let pairs = linear_pairs(&a, 200, &mut rng);
        let cfg = TranslatorConfig {
            epochs: 20,
            ..TranslatorConfig::default()
        };
        let mut t1 = Translator::new(d, d, 2, 3).unwrap();
        let mut t2 = t1.clone();
        let tr = t1.train_stage1(&pairs, &cfg).unwrap();
        t2.train_stage1(&pairs, &cfg).unwrap();
        assert_eq!(t1, t2);
        assert!(tr.last().unwrap().i2m <= 0.5 * tr[0].i2m);
        assert!(tr.last().unwrap().m2i <= 0.5 * tr[0].m2i);
        assert_eq!(t1.stage(), 1);
        assert_eq!(t1.pair_counts(), (200, 0));
    }

    #[test]
    fn empty_pairs_and_wrong_dims_are_rejected() {
        let mut t = Translator::new(4, 3, 2, 0).unwrap();
        assert!(matches!(
            t.train_stage1(&[], &TranslatorConfig::default()),
            Err(Error::Config(_))
        ));
        let bad = LatentPair {
            z_image: vec![0.0; 3],
            z_melody: vec![0.0; 3],
            origin: PairOrigin::Tile,
        };
        assert!(matches!(
            t.train_stage1(&[bad], &TranslatorConfig::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn stage2_requires_stage1_and_zero_tiles_only_bookkeeps() {
        let image = ImageVae::new(4, 8, 1).unwrap();
        let melody = MelodyVae::new(2, 3, 8, 1).unwrap();
        let mut t = Translator::for_models(&image, &melody, 2).unwrap();
        let cfg = TranslatorConfig::default();
        assert!(matches!(
            t.refine_stage2(&[], &[], &image, &melody, &cfg),
            Err(Error::Contract(_))
        ));
        let mut rng = Prng::new(4);
        let pairs: Vec<LatentPair> = (0..8)
            .map(|_| LatentPair {
                z_image: rng.gaussian_vec(4).iter().map(|&v| v as f32).collect(),
                z_melody: rng.gaussian_vec(3).iter().map(|&v| v as f32).collect(),
                origin: PairOrigin::Synthetic,
            })
            .collect();
        t.train_stage1(&pairs, &TranslatorConfig { epochs: 2, ..cfg.clone() }).unwrap();
        let before = t.clone();
        let (added, trace) = t.refine_stage2(&pairs, &[], &image, &melody, &cfg).unwrap();
        assert!(added.is_empty() && trace.is_empty());
        assert_eq!(t.i2m_net(), before.i2m_net());
        assert_eq!(t.m2i_net(), before.m2i_net());
        assert_eq!(t.stage(), 2);
        assert_eq!(t.pair_counts(), (8, 0));

        let tiles = vec![ImageRgb64::filled([0.3, 0.6, 0.1]).unwrap(); 3];
        let small = TranslatorConfig { epochs: 1, ..cfg };
        let (added, _) = t.refine_stage2(&pairs, &tiles, &image, &melody, &small).unwrap();
        assert_eq!(added.len(), 3);
        assert!(added.iter().all(|p| p.origin == PairOrigin::Tile));
        assert_eq!(t.pair_counts(), (8, 3));
    }

    #[test]
    fn synthetic_pairs_need_trained_models() {
        let image = ImageVae::new(4, 8, 1).unwrap();
        let melody = MelodyVae::new(2, 3, 8, 1).unwrap();
        assert!(matches!(
            make_synthetic_pairs(&melody, &image, 5, 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mismatched_models_are_rejected_by_field() {
        let image = ImageVae::new(4, 8, 1).unwrap();
        let melody = MelodyVae::new(2, 3, 8, 1).unwrap();
        let t = Translator::new(5, 3, 2, 0).unwrap();
        match Models::new(image, melody, t) {
            Err(Error::CheckpointMismatch { field, .. }) => assert_eq!(field, "d_img"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkpoints_round_trip() {
        let t = Translator::new(4, 3, 2, 9).unwrap();
        let back = Translator::from_checkpoint(&Checkpoint::from_bytes(&t.to_checkpoint().to_bytes()).unwrap()).unwrap();
        assert_eq!(back, t);
        let pairs = vec![
            LatentPair {
                z_image: vec![1.0, 2.0],
                z_melody: vec![3.0],
                origin: PairOrigin::Synthetic,
            },
            LatentPair {
                z_image: vec![-1.0, 0.5],
                z_melody: vec![0.25],
                origin: PairOrigin::Tile,
            },
        ];
        let c = pairs_to_checkpoint(&pairs, 2, 1).unwrap();
        let back = pairs_from_checkpoint(&Checkpoint::from_bytes(&c.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn held_out_error_helper_is_zero_for_exact_fit() {
        let t = Translator::new(2, 2, 2, 0).unwrap();
        let p = LatentPair {
            z_image: vec![0.5, 0.5],
            z_melody: t.image_to_melody(&[0.5, 0.5]).unwrap(),
            origin: PairOrigin::Synthetic,
        };
        assert_eq!(held_out_mse(&t, &[p]), 0.0);
    }
}
