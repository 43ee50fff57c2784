//! Spherical latent interpolation, interpolation audio/frame sequences and
//! the latent heterogeneity metric.

use crate::error::{Error, Result};
use crate::imaging::ImageRgb64;
use crate::melody::{parse_midi, segment_midi, write_midi_steps, TokenGrid, STEPS_PER_BAR};
use crate::translator::Models;

const SLERP_MIN_ANGLE: f64 = 1e-6;
const SLERP_MIN_NORM: f64 = 1e-9;
const HETEROGENEITY_MIN_SCALE: f64 = 1e-12;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spherical interpolation between `z0` (t = 0) and `z1` (t = 1). Falls
/// back to linear interpolation for nearly parallel or near-zero inputs.
pub fn slerp(z0: &[f32], z1: &[f32], t: f64) -> Result<Vec<f32>> {
    if z0.len() != z1.len() {
        return Err(Error::shape(format!(
            "cannot interpolate between {} and {} dimensions",
            z0.len(),
            z1.len()
        )));
    }
    let a: Vec<f64> = z0.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = z1.iter().map(|&v| v as f64).collect();
    let (na, nb) = (norm(&a), norm(&b));
    let lerp = || {
        a.iter()
            .zip(&b)
            .map(|(x, y)| ((1.0 - t) * x + t * y) as f32)
            .collect()
    };
    if na < SLERP_MIN_NORM || nb < SLERP_MIN_NORM {
        return Ok(lerp());
    }
    let cos = (a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)).clamp(-1.0, 1.0);
    let omega = cos.acos();
    // sin(omega) also vanishes for antipodal inputs, where the great
    // circle is undefined.
    if omega < SLERP_MIN_ANGLE || omega.sin() < SLERP_MIN_ANGLE {
        return Ok(lerp());
    }
    let s = omega.sin();
    let (wa, wb) = (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s);
    Ok(a.iter().zip(&b).map(|(x, y)| (wa * x + wb * y) as f32).collect())
}

/// Mean distance of a series from its centroid, divided by the mean norm
/// of its members. Zero for constant series and for all-zero series.
pub fn heterogeneity(latents: &[Vec<f32>]) -> Result<f64> {
    let Some(first) = latents.first() else {
        return Err(Error::domain("heterogeneity of an empty series"));
    };
    let d = first.len();
    if latents.iter().any(|z| z.len() != d) {
        return Err(Error::shape("series members differ in dimension"));
    }
    let n = latents.len() as f64;
    let mut mean = vec![0.0f64; d];
    for z in latents {
        for (m, &v) in mean.iter_mut().zip(z) {
            *m += v as f64 / n;
        }
    }
    let mut spread = 0.0;
    let mut scale = 0.0;
    for z in latents {
        let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let diff: Vec<f64> = zf.iter().zip(&mean).map(|(a, b)| a - b).collect();
        spread += norm(&diff) / n;
        scale += norm(&zf) / n;
    }
    if scale < HETEROGENEITY_MIN_SCALE {
        return Ok(0.0);
    }
    Ok(spread / scale)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesStats {
    pub n: usize,
    pub heterogeneity: f64,
}

impl SeriesStats {
    pub fn of(latents: &[Vec<f32>]) -> Result<Self> {
        Ok(Self {
            n: latents.len(),
            heterogeneity: heterogeneity(latents)?,
        })
    }
}

/// Heterogeneity of a melody series in melody space and of its translated
/// pictures in image space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPair {
    pub melody: SeriesStats,
    pub image: SeriesStats,
}

/// Statistics for an explicit list of melody segments.
pub fn series_stats(segments: &[TokenGrid], models: &Models) -> Result<SeriesPair> {
    if segments.len() < 2 {
        return Err(Error::domain(format!(
            "a series needs at least 2 segments, got {}",
            segments.len()
        )));
    }
    let z_mel = models.melody.encode_means(segments)?;
    let images = segments
        .iter()
        .map(|g| models.translate_melody_to_image(g))
        .collect::<Result<Vec<_>>>()?;
    let z_img = models.image.encode_means(&images)?;
    Ok(SeriesPair {
        melody: SeriesStats::of(&z_mel)?,
        image: SeriesStats::of(&z_img)?,
    })
}

/// Segment a MIDI file into `bars`-bar windows and measure the series.
pub fn midi_series_stats(midi: &[u8], models: &Models, bars: usize) -> Result<SeriesPair> {
    if bars != models.bars() {
        return Err(Error::mismatch(
            "bars",
            format!("requested {bars}, models use {}", models.bars()),
        ));
    }
    let file = parse_midi(midi)?;
    let segments = segment_midi(&file.events, file.ticks_per_quarter, bars)?;
    series_stats(&segments, models)
}

/// Series statistics for two MIDI files side by side.
pub fn series_compare(
    midi_a: &[u8],
    midi_b: &[u8],
    models: &Models,
    bars: usize,
) -> Result<(SeriesPair, SeriesPair)> {
    Ok((
        midi_series_stats(midi_a, models, bars)?,
        midi_series_stats(midi_b, models, bars)?,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpSpec {
    pub image_a: ImageRgb64,
    pub image_b: ImageRgb64,
    /// Melodies strictly between the two endpoint translations.
    pub intermediate_count: usize,
    pub bars: usize,
    pub fps: u32,
    pub tempo_bpm: u32,
}

impl InterpSpec {
    pub fn new(image_a: ImageRgb64, image_b: ImageRgb64) -> Self {
        Self {
            image_a,
            image_b,
            intermediate_count: 7,
            bars: 2,
            fps: 24,
            tempo_bpm: 120,
        }
    }

    pub fn segments(&self) -> usize {
        self.intermediate_count + 2
    }

    /// Seconds of music per segment in 4/4.
    pub fn seconds_per_segment(&self) -> f64 {
        self.bars as f64 * 4.0 * 60.0 / self.tempo_bpm as f64
    }

    pub fn frame_count(&self) -> usize {
        (self.fps as f64 * self.segments() as f64 * self.seconds_per_segment()).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.intermediate_count == 0 {
            return Err(Error::config("at least one intermediate melody is required"));
        }
        if self.fps == 0 {
            return Err(Error::config("fps must be at least 1"));
        }
        if self.tempo_bpm != 120 {
            return Err(Error::config("melodies are written at 120 BPM"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interpolation {
    pub melodies: Vec<TokenGrid>,
    /// All melodies back to back in one format-0 file.
    pub midi: Vec<u8>,
    pub frames: Vec<ImageRgb64>,
}

impl Interpolation {
    pub fn midi_ticks(&self) -> u64 {
        self.melodies.iter().map(|m| m.len() as u64).sum::<u64>() * crate::melody::TICKS_PER_STEP
    }
}

/// Translate both images to melody latents, decode melodies along the
/// great circle between them, and decode image frames along the great
/// circle between the image latents.
pub fn interpolation_sequence(spec: &InterpSpec, models: &Models) -> Result<Interpolation> {
    spec.validate()?;
    if spec.bars != models.bars() {
        return Err(Error::mismatch(
            "bars",
            format!("interpolation uses {}, models use {}", spec.bars, models.bars()),
        ));
    }
    let m_a = models.melody_latent_of(&spec.image_a)?;
    let m_b = models.melody_latent_of(&spec.image_b)?;
    let last = (spec.segments() - 1) as f64;
    let mel_z = (0..spec.segments())
        .map(|k| slerp(&m_a, &m_b, k as f64 / last))
        .collect::<Result<Vec<_>>>()?;
    let melodies = models.melody.decode_many(&mel_z)?;
    let steps: Vec<_> = melodies.iter().flat_map(|m| m.steps().iter().copied()).collect();
    debug_assert_eq!(steps.len(), spec.segments() * spec.bars * STEPS_PER_BAR);
    let midi = write_midi_steps(&steps);

    let z_a = models.image.encode(&spec.image_a)?.mu;
    let z_b = models.image.encode(&spec.image_b)?.mu;
    let frames_n = spec.frame_count();
    let denom = frames_n.saturating_sub(1).max(1) as f64;
    let img_z = (0..frames_n)
        .map(|j| slerp(&z_a, &z_b, j as f64 / denom))
        .collect::<Result<Vec<_>>>()?;
    let frames = models.image.decode_many(&img_z)?;
    Ok(Interpolation {
        melodies,
        midi,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f32], b: &[f32], tol: f32) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn slerp_endpoints_and_orthonormal_midpoint() {
        let z0 = [1.0f32, 0.0, 0.0];
        let z1 = [0.0f32, 1.0, 0.0];
        assert!(close(&slerp(&z0, &z1, 0.0).unwrap(), &z0, 1e-7));
        assert!(close(&slerp(&z0, &z1, 1.0).unwrap(), &z1, 1e-7));
        let mid = slerp(&z0, &z1, 0.5).unwrap();
        let h = std::f32::consts::FRAC_1_SQRT_2;
        assert!(close(&mid, &[h, h, 0.0], 1e-6));
    }

    #[test]
    fn slerp_fallbacks() {
        let z = [0.3f32, -0.2];
        for t in [0.0, 0.3, 1.0] {
            assert!(close(&slerp(&z, &z, t).unwrap(), &z, 1e-7));
        }
        assert_eq!(slerp(&[0.0, 0.0], &[2.0, 0.0], 0.5).unwrap(), vec![1.0, 0.0]);
        assert!(slerp(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn heterogeneity_cases() {
        assert_eq!(heterogeneity(&vec![vec![1.0, 2.0]; 4]).unwrap(), 0.0);
        let h = heterogeneity(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
        assert_eq!(heterogeneity(&vec![vec![0.0; 3]; 2]).unwrap(), 0.0);
        assert!(matches!(heterogeneity(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn default_spec_arithmetic() {
        let img = ImageRgb64::filled([0.0; 3]).unwrap();
        let spec = InterpSpec::new(img.clone(), img);
        assert_eq!(spec.segments(), 9);
        assert_eq!(spec.seconds_per_segment(), 4.0);
        assert_eq!(spec.frame_count(), 864);
    }

    fn unit(v: Vec<f32>) -> Vec<f32> {
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f32>, Vec<f32>)> {
        (2usize..16).prop_flat_map(|d| {
            (
                prop::collection::vec(-1.0f32..1.0, d),
                prop::collection::vec(-1.0f32..1.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn slerp_keeps_unit_norm((a, b) in vec_pair(), t in 0.0f64..=1.0) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let (a, b) = (unit(a), unit(b));
            let cos: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            // Near-antipodal inputs take the linear fallback.
            prop_assume!(cos > -0.999);
            let z = slerp(&a, &b, t).unwrap();
            let n = z.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6, "norm {}", n);
        }

        #[test]
        fn slerp_is_symmetric((a, b) in vec_pair(), t in 0.0f64..=1.0) {
            let x = slerp(&a, &b, t).unwrap();
            let y = slerp(&b, &a, 1.0 - t).unwrap();
            prop_assert!(close(&x, &y, 1e-6));
        }

        #[test]
        fn heterogeneity_is_scale_invariant(
            series in prop::collection::vec(prop::collection::vec(-5.0f32..5.0, 4), 1..8),
            alpha in 0.01f32..100.0,
        ) {
            let h = heterogeneity(&series).unwrap();
            let scaled: Vec<Vec<f32>> = series.iter().map(|z| z.iter().map(|v| v * alpha).collect()).collect();
            let hs = heterogeneity(&scaled).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!((h - hs).abs() <= 1e-5 * h.max(1.0));
        }
    }
}
