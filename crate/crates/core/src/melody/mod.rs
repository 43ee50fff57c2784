//! Monophonic melodies on a 16th-note grid, Standard MIDI File I/O and a
//! procedural melody generator.

mod midi;
mod procedural;
mod quantize;

use std::fmt;

pub use midi::{parse_midi, write_midi, write_midi_steps, MidiFile, NoteEvent, TICKS_PER_QUARTER, TICKS_PER_STEP};
pub use procedural::procedural_generate;
pub use quantize::{fold_into_range, quantize, segment_midi};

use crate::error::{Error, Result};

pub const STEPS_PER_BAR: usize = 16;
/// Lowest representable pitch, C2 with C4 = 60.
pub const MIN_PITCH: u8 = 36;
/// Highest representable pitch, B5.
pub const MAX_PITCH: u8 = 83;
pub const PITCH_COUNT: usize = (MAX_PITCH - MIN_PITCH + 1) as usize;
/// REST, HOLD and one token per pitch.
pub const ALPHABET: usize = 2 + PITCH_COUNT;

/// MIDI pitch in `[36, 83]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pitch(u8);

impl Pitch {
    pub fn new(midi: u8) -> Result<Self> {
        if (MIN_PITCH..=MAX_PITCH).contains(&midi) {
            Ok(Pitch(midi))
        } else {
            Err(Error::domain(format!(
                "pitch {midi} outside [{MIN_PITCH}, {MAX_PITCH}]"
            )))
        }
    }

    pub fn midi(self) -> u8 {
        self.0
    }

    /// Chromatic class, C = 0 .. B = 11.
    pub fn class(self) -> u8 {
        self.0 % 12
    }

    /// Octave number under the C4 = 60 convention (2..=5).
    pub fn octave(self) -> u8 {
        self.0 / 12 - 1
    }

    pub fn all() -> impl Iterator<Item = Pitch> {
        (MIN_PITCH..=MAX_PITCH).map(Pitch)
    }
}

/// One 16th-note step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Rest,
    /// Continuation of the sounding note.
    Hold,
    Note(Pitch),
}

impl Token {
    /// Position in the 50-token alphabet: REST, HOLD, then pitches upward.
    pub fn index(self) -> usize {
        match self {
            Token::Rest => 0,
            Token::Hold => 1,
            Token::Note(p) => 2 + (p.midi() - MIN_PITCH) as usize,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Token::Rest),
            1 => Ok(Token::Hold),
            i if i < ALPHABET => Ok(Token::Note(Pitch(MIN_PITCH + (i - 2) as u8))),
            _ => Err(Error::domain(format!("token index {i} outside alphabet"))),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Rest => f.write_str("."),
            Token::Hold => f.write_str("-"),
            Token::Note(p) => write!(f, "{}", p.midi()),
        }
    }
}

/// A sounding note recovered from a token sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridNote {
    pub pitch: Pitch,
    pub start: usize,
    pub steps: usize,
}

/// Fixed-length monophonic melody of `16 * bars` steps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    bars: usize,
    steps: Vec<Token>,
}

pub fn check_bars(bars: usize) -> Result<()> {
    if bars == 2 || bars == 16 {
        Ok(())
    } else {
        Err(Error::domain(format!("bars must be 2 or 16, got {bars}")))
    }
}

/// True when no HOLD opens the sequence or follows a REST.
pub fn steps_are_valid(steps: &[Token]) -> bool {
    let mut prev = Token::Rest;
    for &t in steps {
        if t == Token::Hold && prev == Token::Rest {
            return false;
        }
        prev = t;
    }
    true
}

/// Rewrites leading and post-REST HOLDs to REST.
pub fn normalize_steps(steps: &mut [Token]) {
    let mut prev = Token::Rest;
    for t in steps.iter_mut() {
        if *t == Token::Hold && prev == Token::Rest {
            *t = Token::Rest;
        }
        prev = *t;
    }
}

impl TokenGrid {
    pub fn new(bars: usize, steps: Vec<Token>) -> Result<Self> {
        check_bars(bars)?;
        if steps.len() != bars * STEPS_PER_BAR {
            return Err(Error::shape(format!(
                "{bars} bars need {} steps, got {}",
                bars * STEPS_PER_BAR,
                steps.len()
            )));
        }
        if !steps_are_valid(&steps) {
            return Err(Error::domain("HOLD at step 0 or directly after REST"));
        }
        Ok(Self { bars, steps })
    }

    /// Builds a grid after rewriting invalid HOLDs to REST.
    pub fn normalized(bars: usize, mut steps: Vec<Token>) -> Result<Self> {
        normalize_steps(&mut steps);
        Self::new(bars, steps)
    }

    pub fn rest(bars: usize) -> Result<Self> {
        Self::new(bars, vec![Token::Rest; bars * STEPS_PER_BAR])
    }

    pub fn bars(&self) -> usize {
        self.bars
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Token] {
        &self.steps
    }

    pub fn is_all_rest(&self) -> bool {
        self.steps.iter().all(|&t| t == Token::Rest)
    }

    /// Notes as (pitch, onset step, length in steps).
    pub fn notes(&self) -> Vec<GridNote> {
        notes_of(&self.steps)
    }

    /// Alphabet index per step.
    pub fn indices(&self) -> Vec<usize> {
        self.steps.iter().map(|t| t.index()).collect()
    }

    /// Flattened one-hot encoding, `len * ALPHABET` values.
    pub fn one_hot(&self) -> Vec<f32> {
        let mut v = vec![0.0; self.steps.len() * ALPHABET];
        for (i, t) in self.steps.iter().enumerate() {
            v[i * ALPHABET + t.index()] = 1.0;
        }
        v
    }

    /// Fraction of steps on which the two grids agree.
    pub fn step_accuracy(&self, other: &TokenGrid) -> f64 {
        let n = self.steps.len().max(other.steps.len());
        if n == 0 {
            return 1.0;
        }
        let hits = self
            .steps
            .iter()
            .zip(&other.steps)
            .filter(|(a, b)| a == b)
            .count();
        hits as f64 / n as f64
    }
}

impl fmt::Display for TokenGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(if i % STEPS_PER_BAR == 0 { " | " } else { " " })?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

pub(crate) fn notes_of(steps: &[Token]) -> Vec<GridNote> {
    let mut notes: Vec<GridNote> = Vec::new();
    let mut open: Option<GridNote> = None;
    for (i, &t) in steps.iter().enumerate() {
        match t {
            Token::Hold => {
                if let Some(n) = open.as_mut() {
                    n.steps += 1;
                }
            }
            Token::Rest => notes.extend(open.take()),
            Token::Note(pitch) => {
                notes.extend(open.take());
                open = Some(GridNote {
                    pitch,
                    start: i,
                    steps: 1,
                });
            }
        }
    }
    notes.extend(open);
    notes
}


#[cfg(test)]
mod tests {
    use super::*;

    fn note(p: u8) -> Token {
        Token::Note(Pitch::new(p).unwrap())
    }

    #[test]
    fn pitch_range_and_octaves() {
        assert!(Pitch::new(35).is_err());
        assert!(Pitch::new(84).is_err());
        assert_eq!(Pitch::new(36).unwrap().octave(), 2);
        assert_eq!(Pitch::new(83).unwrap().octave(), 5);
        assert_eq!(Pitch::new(83).unwrap().class(), 11);
        assert_eq!(Pitch::all().count(), 48);
    }

    #[test]
    fn token_index_round_trip() {
        for i in 0..ALPHABET {
            assert_eq!(Token::from_index(i).unwrap().index(), i);
        }
        assert!(Token::from_index(ALPHABET).is_err());
    }

    #[test]
    fn grid_invariants_enforced() {
        let mut steps = vec![Token::Rest; 32];
        assert!(TokenGrid::new(2, steps.clone()).is_ok());
        assert!(TokenGrid::new(3, vec![Token::Rest; 48]).is_err());
        assert!(TokenGrid::new(2, vec![Token::Rest; 31]).is_err());
        steps[0] = Token::Hold;
        assert!(TokenGrid::new(2, steps.clone()).is_err());
        steps[0] = note(60);
        steps[1] = Token::Hold;
        assert!(TokenGrid::new(2, steps.clone()).is_ok());
        steps[5] = Token::Hold;
        assert!(TokenGrid::new(2, steps.clone()).is_err());
    }

    #[test]
    fn normalization_rewrites_orphan_holds() {
        let mut steps = vec![Token::Hold, Token::Hold, note(40), Token::Hold, Token::Rest, Token::Hold];
        steps.resize(32, Token::Hold);
        let g = TokenGrid::normalized(2, steps).unwrap();
        assert_eq!(&g.steps()[..6], &[Token::Rest, Token::Rest, note(40), Token::Hold, Token::Rest, Token::Rest]);
        assert!(g.steps()[6..].iter().all(|&t| t == Token::Rest));
    }

    #[test]
    fn notes_from_runs() {
        let mut steps = vec![note(60), Token::Hold, Token::Hold, note(60), Token::Rest, note(62)];
        steps.resize(32, Token::Rest);
        let g = TokenGrid::new(2, steps).unwrap();
        let notes = g.notes();
        assert_eq!(notes.len(), 3);
        assert_eq!((notes[0].start, notes[0].steps), (0, 3));
        assert_eq!((notes[1].start, notes[1].steps), (3, 1));
        assert_eq!((notes[2].pitch.midi(), notes[2].start), (62, 5));
    }
}
