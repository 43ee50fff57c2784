use super::{check_bars, Pitch, Token, TokenGrid, MAX_PITCH, MIN_PITCH, STEPS_PER_BAR};
use crate::error::{Error, Result};
use crate::rng::{stream, Prng};

const START_LOW: i64 = 48;
const START_HIGH: i64 = 71;
const MAX_LEAP: i64 = 7;
const DURATIONS: [usize; 4] = [1, 2, 4, 8];
const DURATION_WEIGHTS: [f64; 4] = [4.0, 3.0, 2.0, 1.0];
const REST_PROBABILITY: f64 = 0.1;

fn reflect(mut p: i64) -> i64 {
    let (lo, hi) = (i64::from(MIN_PITCH), i64::from(MAX_PITCH));
    loop {
        if p > hi {
            p = 2 * hi - p;
        } else if p < lo {
            p = 2 * lo - p;
        } else {
            return p;
        }
    }
}

fn random_walk(rng: &mut Prng, len: usize, leap_weights: &[f64]) -> Vec<Token> {
    let mut steps = Vec::with_capacity(len);
    let mut pitch = rng.range_inclusive(START_LOW, START_HIGH);
    while steps.len() < len {
        let dur = DURATIONS[rng.weighted(&DURATION_WEIGHTS)].min(len - steps.len());
        if rng.bernoulli(REST_PROBABILITY) {
            steps.extend(std::iter::repeat_n(Token::Rest, dur));
            continue;
        }
        let p = Pitch::new(pitch as u8).expect("walk stays in range");
        steps.push(Token::Note(p));
        steps.extend(std::iter::repeat_n(Token::Hold, dur - 1));
        let leap = rng.weighted(leap_weights) as i64 - MAX_LEAP;
        pitch = reflect(pitch + leap);
    }
    steps
}

/// Random-walk melodies: start pitch uniform in `[48, 71]`, leaps in
/// `-7..=7` semitones weighted by `exp(-|leap| / 2)`, durations of 1, 2, 4
/// or 8 sixteenths weighted 4:3:2:1, and a 10% chance that a slot rests.
/// Pitches reflect off the `[36, 83]` boundaries.
///
/// Melody `i` depends only on `seed` and `i`.
pub fn procedural_generate(seed: u64, bars: usize, count: usize) -> Result<Vec<TokenGrid>> {
    check_bars(bars)?;
    if count == 0 {
        return Err(Error::domain("melody count must be at least 1"));
    }
    let leap_weights: Vec<f64> = (-MAX_LEAP..=MAX_LEAP)
        .map(|d| (-(d.abs() as f64) / 2.0).exp())
        .collect();
    let base = Prng::new(seed).fork(stream::MELODY);
    (0..count)
        .map(|i| {
            let mut rng = base.fork(i as u64);
            TokenGrid::new(bars, random_walk(&mut rng, bars * STEPS_PER_BAR, &leap_weights))
        })
        .collect()
}
