//! The deterministic note-color map and melody/image transposition.
//!
//! Hue carries the chromatic class (C = red at 0 degrees, rising in 30 degree
//! bins to B = violet at 330 degrees). Value carries the octave: levels
//! 0.25, 0.5, 0.75 and 1.0 are octaves 2 to 5, and black is a rest.
//! Saturation is fixed at 1 for every note.
//!
//! A melody becomes an image one pixel per 16th step, laid row-major and
//! repeated cyclically to fill the 64x64 canvas. A HOLD repeats the colour of
//! the sounding note. When a note is struck again at the pitch already
//! sounding, its first pixel is drawn a quarter level darker so the image
//! still separates the two notes; [`image_to_melody`] reads that shade back
//! as a fresh onset.

use crate::error::{Error, Result};
use crate::imaging::{unit_to_u8, ImageRgb64, SIDE};
use crate::melody::{normalize_steps, Pitch, Token, TokenGrid, MIN_PITCH, STEPS_PER_BAR};

pub const HUE_PER_CLASS: f64 = 30.0;
/// Value levels above black; level `L` renders at value `L / 4`.
pub const VALUE_LEVELS: f64 = 4.0;
pub const NOTE_SATURATION: f64 = 1.0;
/// Value offset of the re-struck-note shade.
const ONSET_SHADE: f64 = 1.0 / 16.0;

/// Colour in hue (degrees), saturation and value coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HcvColor {
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

impl HcvColor {
    pub const BLACK: HcvColor = HcvColor {
        hue: 0.0,
        saturation: 0.0,
        value: 0.0,
    };

    /// Hexcone conversion. Achromatic colours get hue 0.
    pub fn from_rgb(rgb: [f32; 3]) -> Self {
        let [r, g, b] = rgb.map(|c| f64::from(c).clamp(0.0, 1.0));
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let hue = if delta <= 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / delta).rem_euclid(6.0)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        let saturation = if max <= 0.0 { 0.0 } else { delta / max };
        HcvColor {
            hue: hue.rem_euclid(360.0),
            saturation,
            value: max,
        }
    }

    pub fn to_rgb(self) -> [f32; 3] {
        let c = self.value * self.saturation;
        let h = self.hue.rem_euclid(360.0) / 60.0;
        let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
        let (r, g, b) = match h as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = self.value - c;
        [r + m, g + m, b + m].map(|v| v.clamp(0.0, 1.0) as f32)
    }
}

/// Nearest integer with exact halves going down.
fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

/// Colour of a pitch: hue `30 * class`, value `(octave - 1) / 4`, saturation 1.
pub fn pitch_color(pitch: Pitch) -> HcvColor {
    HcvColor {
        hue: HUE_PER_CLASS * f64::from(pitch.class()),
        saturation: NOTE_SATURATION,
        value: f64::from(pitch.octave() - 1) / VALUE_LEVELS,
    }
}

/// [`pitch_color`] for a raw MIDI number; errors outside `[36, 83]`.
pub fn pitch_to_color(midi: u8) -> Result<HcvColor> {
    Ok(pitch_color(Pitch::new(midi)?))
}

pub fn note_rgb(pitch: Pitch) -> [f32; 3] {
    pitch_color(pitch).to_rgb()
}

fn onset_shade_rgb(pitch: Pitch) -> [f32; 3] {
    let mut c = pitch_color(pitch);
    c.value -= ONSET_SHADE;
    c.to_rgb()
}

fn is_onset_shade(rgb: [f32; 3], pitch: Pitch) -> bool {
    rgb.map(unit_to_u8) == onset_shade_rgb(pitch).map(unit_to_u8)
}

/// Nearest note (or rest) for a pixel: `level = round(4 * value)`, level 0
/// is a rest, otherwise octave `level + 1` and class `round(hue / 30) mod 12`.
pub fn color_to_token(rgb: [f32; 3]) -> Token {
    let hcv = HcvColor::from_rgb(rgb);
    let level = round_half_down(VALUE_LEVELS * hcv.value) as i64;
    if level <= 0 {
        return Token::Rest;
    }
    let class = (round_half_down(hcv.hue / HUE_PER_CLASS) as i64).rem_euclid(12);
    let pitch = 12 * (level.min(4) + 2) + class;
    debug_assert!(pitch >= i64::from(MIN_PITCH));
    Token::Note(Pitch::new(pitch as u8).expect("levels 1..=4 map into range"))
}

fn token_rgb(token: Token) -> [f32; 3] {
    match token {
        Token::Note(p) => note_rgb(p),
        _ => [0.0; 3],
    }
}

/// Snap a colour onto the 49-colour lattice (48 note colours and black).
pub fn quantize_color(rgb: [f32; 3]) -> [f32; 3] {
    token_rgb(color_to_token(rgb))
}

/// Per-step pixel colours of a token sequence.
fn step_colors(steps: &[Token]) -> Vec<[f32; 3]> {
    let mut sounding: Option<Pitch> = None;
    steps
        .iter()
        .map(|&t| match t {
            Token::Rest => {
                sounding = None;
                [0.0; 3]
            }
            Token::Hold => sounding.map_or([0.0; 3], note_rgb),
            Token::Note(p) => {
                let restruck = sounding == Some(p);
                sounding = Some(p);
                if restruck {
                    onset_shade_rgb(p)
                } else {
                    note_rgb(p)
                }
            }
        })
        .collect()
}

/// Render a melody one pixel per step, repeated cyclically over the canvas.
pub fn melody_to_image(grid: &TokenGrid) -> ImageRgb64 {
    let colors = step_colors(grid.steps());
    let len = colors.len();
    ImageRgb64::from_fn(|x, y| colors[(y * SIDE + x) % len]).expect("lattice colours lie in [0, 1]")
}

/// Read the first `16 * bars` pixels row by row, one step per pixel.
/// Consecutive pixels of the same note merge into NOTE + HOLDs.
pub fn image_to_melody(image: &ImageRgb64, bars: usize) -> Result<TokenGrid> {
    let len = bars * STEPS_PER_BAR;
    if len > SIDE * SIDE {
        return Err(Error::domain(format!("{bars} bars do not fit on the canvas")));
    }
    let mut sounding: Option<Pitch> = None;
    let mut steps: Vec<Token> = image
        .scan()
        .take(len)
        .map(|px| match color_to_token(px) {
            Token::Note(p) if sounding == Some(p) && !is_onset_shade(px, p) => Token::Hold,
            Token::Note(p) => {
                sounding = Some(p);
                Token::Note(p)
            }
            _ => {
                sounding = None;
                Token::Rest
            }
        })
        .collect();
    normalize_steps(&mut steps);
    TokenGrid::new(bars, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::testing::random_grid;
    use crate::rng::Prng;
    use proptest::prelude::*;

    fn p(m: u8) -> Pitch {
        Pitch::new(m).unwrap()
    }

    #[test]
    fn anchor_colours() {
        let c2 = pitch_to_color(36).unwrap();
        assert_eq!((c2.hue, c2.value, c2.saturation), (0.0, 0.25, 1.0));
        let b5 = pitch_to_color(83).unwrap();
        assert_eq!((b5.hue, b5.value), (330.0, 1.0));
        let c4 = pitch_to_color(60).unwrap();
        assert_eq!((c4.hue, c4.value), (0.0, 0.75));
        assert!(matches!(pitch_to_color(35), Err(Error::Domain(_))));
        assert!(pitch_to_color(84).is_err());
    }

    #[test]
    fn black_is_rest_and_red_is_low_c() {
        assert_eq!(color_to_token([0.0; 3]), Token::Rest);
        assert_eq!(color_to_token([0.25, 0.0, 0.0]), Token::Note(p(36)));
    }

    #[test]
    fn all_pitches_round_trip_through_rgb_and_bytes() {
        for pitch in Pitch::all() {
            let rgb = note_rgb(pitch);
            assert_eq!(color_to_token(rgb), Token::Note(pitch));
            let bytes = rgb.map(|v| f32::from(unit_to_u8(v)) / 255.0);
            assert_eq!(color_to_token(bytes), Token::Note(pitch));
            let shade = onset_shade_rgb(pitch).map(|v| f32::from(unit_to_u8(v)) / 255.0);
            assert_eq!(color_to_token(shade), Token::Note(pitch));
            assert!(is_onset_shade(shade, pitch));
            assert!(!is_onset_shade(bytes, pitch));
        }
    }

    #[test]
    fn semitone_rotates_hue() {
        for m in 36..83u8 {
            if m % 12 == 11 {
                continue;
            }
            let a = pitch_to_color(m).unwrap();
            let b = pitch_to_color(m + 1).unwrap();
            assert_eq!(b.hue - a.hue, 30.0);
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn quantize_color_cases() {
        let c3 = quantize_color([0.5, 0.5, 0.5]);
        assert_eq!(c3, note_rgb(p(48)));
        assert_eq!(c3, [0.5, 0.0, 0.0]);
        assert_eq!(quantize_color([0.01; 3]), [0.0; 3]);
        for pitch in Pitch::all() {
            assert_eq!(quantize_color(note_rgb(pitch)), note_rgb(pitch));
        }
    }

    #[test]
    fn ties_round_down() {
        // value 0.125 sits between rest and level 1
        assert_eq!(color_to_token([0.125, 0.0, 0.0]), Token::Rest);
        // hue 15 sits between C and C#
        let c = HcvColor { hue: 15.0, saturation: 1.0, value: 1.0 }.to_rgb();
        assert_eq!(color_to_token(c), Token::Note(p(72)));
    }

    #[test]
    fn rest_grid_is_black() {
        let img = melody_to_image(&TokenGrid::rest(2).unwrap());
        assert!(img.data().iter().all(|&v| v == 0.0));
        assert!(image_to_melody(&img, 2).unwrap().is_all_rest());
    }

    #[test]
    fn sustained_note_fills_canvas() {
        let mut steps = vec![Token::Hold; 32];
        steps[0] = Token::Note(p(36));
        let img = melody_to_image(&TokenGrid::new(2, steps).unwrap());
        assert!(img.scan().all(|px| px == [0.25, 0.0, 0.0]));
    }

    #[test]
    fn two_bar_canvas_repeats_every_half_row() {
        let mut rng = Prng::new(5);
        let g = random_grid(&mut rng, 2);
        let img = melody_to_image(&g);
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(img.pixel(x, y), img.pixel(x % 32, 0));
            }
        }
    }

    #[test]
    fn alternating_row_reads_as_alternating_notes() {
        let img = ImageRgb64::from_fn(|x, _| if x % 2 == 0 { [0.25, 0.0, 0.0] } else { [0.0; 3] }).unwrap();
        let g = image_to_melody(&img, 2).unwrap();
        for (i, &t) in g.steps().iter().enumerate() {
            assert_eq!(t, if i % 2 == 0 { Token::Note(p(36)) } else { Token::Rest });
        }
    }

    #[test]
    fn restruck_notes_survive() {
        let mut steps = vec![Token::Note(p(60)), Token::Note(p(60)), Token::Hold, Token::Note(p(60))];
        steps.resize(32, Token::Rest);
        let g = TokenGrid::new(2, steps).unwrap();
        assert_eq!(image_to_melody(&melody_to_image(&g), 2).unwrap(), g);
    }

    #[test]
    fn random_grids_round_trip() {
        let mut rng = Prng::new(77);
        for i in 0..1000 {
            let bars = if i % 4 == 0 { 16 } else { 2 };
            let g = random_grid(&mut rng, bars);
            assert_eq!(image_to_melody(&melody_to_image(&g), bars).unwrap(), g);
            // also through 8-bit storage
            if i % 50 == 0 {
                let stored = ImageRgb64::from_full(&melody_to_image(&g).to_full()).unwrap();
                assert_eq!(image_to_melody(&stored, bars).unwrap(), g);
            }
        }
    }

    #[test]
    fn lattice_image_round_trips() {
        // a cyclic lattice image whose runs fit the 32-step cycle
        let colours: Vec<[f32; 3]> = (0..32)
            .map(|i| match i / 4 {
                0 | 5 => [0.0; 3],
                k => note_rgb(p(40 + 3 * k as u8)),
            })
            .collect();
        let img = ImageRgb64::from_fn(|x, y| colours[(y * 64 + x) % 32]).unwrap();
        let g = image_to_melody(&img, 2).unwrap();
        assert_eq!(melody_to_image(&g), img);
    }

    proptest! {
        #[test]
        fn quantize_color_is_idempotent(r in 0.0f32..=1.0, g in 0.0f32..=1.0, b in 0.0f32..=1.0) {
            let once = quantize_color([r, g, b]);
            prop_assert_eq!(quantize_color(once), once);
        }

        #[test]
        fn hsv_round_trip(h in 0.0f64..360.0, s in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let rgb = HcvColor { hue: h, saturation: s, value: v }.to_rgb();
            let back = HcvColor::from_rgb(rgb);
            prop_assert!((back.value - v).abs() < 1e-6);
            if s * v > 1e-3 {
                prop_assert!((back.saturation - s).abs() < 1e-4);
                let dh = (back.hue - h).abs();
                prop_assert!(dh.min(360.0 - dh) < 1e-2);
            }
        }
    }
}
