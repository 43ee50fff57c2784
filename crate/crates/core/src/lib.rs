//! Image-melody translation through two grounded variational autoencoders.
//!
//! A deterministic note-color map ([`codec`]) turns melodies into images
//! and back. Two small VAEs ([`vae`]) learn compressed representations of
//! each modality, and dense translation networks ([`translator`]) connect
//! the two latent spaces. [`analysis`] provides spherical interpolation
//! sequences and a latent heterogeneity metric.

pub mod analysis;
pub mod checkpoint;
pub mod codec;
pub mod error;
pub mod imaging;
pub mod melody;
pub mod nn;
pub mod rng;
pub mod translator;
pub mod vae;

pub use analysis::{heterogeneity, slerp, InterpSpec, Interpolation, SeriesStats};
pub use codec::{color_to_token, image_to_melody, melody_to_image, pitch_to_color, HcvColor};
pub use error::{Error, Result};
pub use imaging::{ImageRgb64, ImageRgbFull};
pub use melody::{NoteEvent, Pitch, Token, TokenGrid};
pub use nn::{DenseNet, GaussianLatent, Tensor2};
pub use rng::Prng;
pub use translator::{LatentPair, Models, PairOrigin, Translator};
pub use vae::{ImageVae, MelodyVae, TrainConfig};
