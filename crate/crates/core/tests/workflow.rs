//! Cross-module behaviour through the public API.

use proptest::prelude::*;
use synesthete_core::checkpoint::{identity, Checkpoint};
use synesthete_core::imaging::{load_png, save_png};
use synesthete_core::melody::{parse_midi, procedural_generate, segment_midi, write_midi_steps};
use synesthete_core::translator::{make_synthetic_pairs, TranslatorConfig};
use synesthete_core::{
    heterogeneity, image_to_melody, melody_to_image, Error, ImageRgb64, ImageVae, MelodyVae, Models, Token,
    TokenGrid, TrainConfig, Translator,
};

fn tiny_models() -> Models {
    let melodies = procedural_generate(3, 2, 64).unwrap();
    let images: Vec<ImageRgb64> = melodies.iter().map(melody_to_image).collect();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut melody = MelodyVae::new(2, 6, 24, 3).unwrap();
    melody.train(&melodies, &cfg).unwrap();
    let mut image = ImageVae::new(5, 24, 3).unwrap();
    image.train(&images, &cfg).unwrap();
    let pairs = make_synthetic_pairs(&melody, &image, 40, 3).unwrap();
    let mut translator = Translator::for_models(&image, &melody, 3).unwrap();
    let t_cfg = TranslatorConfig {
        epochs: 3,
        ..TranslatorConfig::default()
    };
    translator.train_stage1(&pairs, &t_cfg).unwrap();
    Models::new(image, melody, translator).unwrap()
}

#[test]
fn melodies_survive_png_files() {
    for grid in procedural_generate(9, 16, 5).unwrap() {
        let png = save_png(&melody_to_image(&grid).to_full()).unwrap();
        let image = ImageRgb64::from_full(&load_png(&png).unwrap()).unwrap();
        assert_eq!(image_to_melody(&image, 16).unwrap(), grid);
    }
}

#[test]
fn concatenated_melodies_segment_back_into_windows() {
    let grids = procedural_generate(4, 2, 6).unwrap();
    let steps: Vec<Token> = grids.iter().flat_map(|g| g.steps().iter().copied()).collect();
    let midi = parse_midi(&write_midi_steps(&steps)).unwrap();
    let windows = segment_midi(&midi.events, midi.ticks_per_quarter, 2).unwrap();
    // A trailing rest carries no events, so the last window may be dropped.
    assert!(windows.len() >= 5);
    for (w, g) in windows.iter().zip(&grids) {
        assert_eq!(w, g);
    }
}

#[test]
fn trained_models_translate_and_checkpoint() {
    let models = tiny_models();
    let grid = procedural_generate(5, 2, 1).unwrap().remove(0);
    let image = models.translate_melody_to_image(&grid).unwrap();
    assert!(image.data().iter().all(|v| (0.0..=1.0).contains(v)));
    let back: TokenGrid = models.translate_image_to_melody(&image).unwrap();
    assert_eq!(back.bars(), 2);

    let bytes = models.translator.to_checkpoint().to_bytes();
    let restored = Translator::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(identity(&bytes), identity(&restored.to_checkpoint().to_bytes()));
    let z = vec![0.3; models.translator.d_img()];
    assert_eq!(restored.image_to_melody(&z).unwrap(), models.translator.image_to_melody(&z).unwrap());

    let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
    assert!(matches!(err, Error::CheckpointParse(_)));
    let err = ImageVae::from_checkpoint(&Checkpoint::from_bytes(&bytes).unwrap()).unwrap_err();
    assert!(matches!(err, Error::CheckpointMismatch { ref field, .. } if field == "kind"));
}

#[test]
fn untrained_models_are_refused() {
    let image = ImageVae::new(4, 8, 1).unwrap();
    let melody = MelodyVae::new(2, 4, 8, 1).unwrap();
    let translator = Translator::for_models(&image, &melody, 1).unwrap();
    let models = Models::new(image, melody, translator).unwrap();
    let grid = TokenGrid::rest(2).unwrap();
    assert!(matches!(models.translate_melody_to_image(&grid), Err(Error::Contract(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heterogeneity_of_repeated_latent_is_zero(v in proptest::collection::vec(-5.0f32..5.0, 1..16), n in 1usize..6) {
        prop_assert_eq!(heterogeneity(&vec![v; n]).unwrap(), 0.0);
    }
}
