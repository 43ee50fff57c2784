use super::{check_bars, NoteEvent, Pitch, Token, TokenGrid, MAX_PITCH, MIN_PITCH, STEPS_PER_BAR};
use crate::error::{Error, Result};

const MIN_TPQ: u16 = 24;

/// Octave-transpose any MIDI pitch into `[36, 83]`.
pub fn fold_into_range(midi: u8) -> Pitch {
    let mut p = midi;
    while p < MIN_PITCH {
        p += 12;
    }
    while p > MAX_PITCH {
        p -= 12;
    }
    Pitch::new(p).expect("folded into range")
}

fn step_ticks(tpq: u16) -> Result<f64> {
    if tpq < MIN_TPQ {
        return Err(Error::domain(format!(
            "ticks per quarter must be at least {MIN_TPQ}, got {tpq}"
        )));
    }
    Ok(f64::from(tpq) / 4.0)
}

fn to_step(tick: u64, step: f64) -> usize {
    (tick as f64 / step).round() as usize
}

/// For each of the first `total` steps, the event sounding on top:
/// highest folded pitch, then earliest onset, then list order.
fn topmost_per_step(events: &[NoteEvent], step: f64, total: usize) -> Vec<Option<(usize, Pitch)>> {
    let mut owner: Vec<Option<(usize, Pitch)>> = vec![None; total];
    let mut onset_of = vec![0usize; events.len()];
    for (i, e) in events.iter().enumerate() {
        let start = to_step(e.onset_tick, step);
        let end = to_step(e.end_tick(), step).max(start + 1).min(total);
        onset_of[i] = start;
        let pitch = fold_into_range(e.pitch);
        for slot in owner.iter_mut().take(end).skip(start) {
            let wins = match *slot {
                None => true,
                Some((j, q)) => pitch > q || (pitch == q && start < onset_of[j]),
            };
            if wins {
                *slot = Some((i, pitch));
            }
        }
    }
    owner
}

fn tokens_for_window(owner: &[Option<(usize, Pitch)>]) -> Vec<Token> {
    let mut prev: Option<usize> = None;
    owner
        .iter()
        .map(|slot| {
            let t = match *slot {
                None => Token::Rest,
                Some((i, _)) if prev == Some(i) => Token::Hold,
                Some((_, p)) => Token::Note(p),
            };
            prev = slot.map(|(i, _)| i);
            t
        })
        .collect()
}

/// Quantize note events onto a `16 * bars` grid of 16th steps starting at
/// tick 0. Polyphony keeps the highest sounding pitch; out-of-range pitches
/// are octave-folded into `[36, 83]`.
pub fn quantize(events: &[NoteEvent], tpq: u16, bars: usize) -> Result<TokenGrid> {
    check_bars(bars)?;
    let step = step_ticks(tpq)?;
    let owner = topmost_per_step(events, step, bars * STEPS_PER_BAR);
    TokenGrid::new(bars, tokens_for_window(&owner))
}

/// Split a long event stream into consecutive, non-overlapping grids of
/// `bars` bars each from tick 0. A trailing partial window is dropped.
/// Notes crossing a window boundary restart as NOTE in the next window.
pub fn segment_midi(events: &[NoteEvent], tpq: u16, bars: usize) -> Result<Vec<TokenGrid>> {
    check_bars(bars)?;
    let step = step_ticks(tpq)?;
    let total_steps = events
        .iter()
        .map(|e| to_step(e.end_tick(), step))
        .max()
        .unwrap_or(0);
    let window = bars * STEPS_PER_BAR;
    let count = total_steps / window;
    let owner = topmost_per_step(events, step, count * window);
    owner
        .chunks(window)
        .map(|w| TokenGrid::new(bars, tokens_for_window(w)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::testing::random_grid;
    use crate::melody::{parse_midi, steps_are_valid, write_midi};
    use crate::rng::Prng;
    use proptest::prelude::*;

    fn ev(onset: u64, dur: u64, pitch: u8) -> NoteEvent {
        NoteEvent {
            onset_tick: onset,
            duration_ticks: dur,
            pitch,
            velocity: 80,
        }
    }

    fn n(p: u8) -> Token {
        Token::Note(Pitch::new(p).unwrap())
    }

    #[test]
    fn single_note_holds() {
        let g = quantize(&[ev(0, 480, 60)], 480, 2).unwrap();
        assert_eq!(&g.steps()[..5], &[n(60), Token::Hold, Token::Hold, Token::Hold, Token::Rest]);
        assert!(g.steps()[4..].iter().all(|&t| t == Token::Rest));
    }

    #[test]
    fn no_events_all_rest() {
        assert!(quantize(&[], 96, 16).unwrap().is_all_rest());
    }

    #[test]
    fn chord_keeps_highest() {
        let g = quantize(&[ev(0, 240, 60), ev(0, 240, 64)], 480, 2).unwrap();
        assert_eq!(&g.steps()[..3], &[n(64), Token::Hold, Token::Rest]);
    }

    #[test]
    fn out_of_range_pitches_fold_by_octave() {
        let g = quantize(&[ev(0, 120, 24), ev(120, 120, 100)], 480, 2).unwrap();
        assert_eq!(&g.steps()[..2], &[n(36), n(76)]);
    }

    #[test]
    fn lower_voice_resumes_as_new_onset() {
        let g = quantize(&[ev(0, 480, 60), ev(0, 120, 67)], 480, 2).unwrap();
        assert_eq!(&g.steps()[..4], &[n(67), n(60), Token::Hold, Token::Hold]);
    }

    #[test]
    fn tiny_resolution_is_rejected() {
        assert!(quantize(&[], 12, 2).is_err());
    }

    #[test]
    fn segment_counts() {
        let bar = 4 * 480;
        let eight: Vec<_> = (0..8).map(|b| ev(b * bar, bar, 60)).collect();
        assert_eq!(segment_midi(&eight, 480, 2).unwrap().len(), 4);
        let three: Vec<_> = (0..3).map(|b| ev(b * bar, bar, 60)).collect();
        assert_eq!(segment_midi(&three, 480, 2).unwrap().len(), 1);
        assert!(segment_midi(&[], 480, 2).unwrap().is_empty());
    }

    /// Oracle: quantize the whole stream as one long sequence and compare
    /// note sequences with the concatenated windows.
    #[test]
    fn segments_concatenate_to_whole() {
        let scale = [60u8, 62, 64, 65, 67, 69, 71, 72];
        let events: Vec<_> = (0..32)
            .map(|i| ev(i as u64 * 240, 240, scale[i % scale.len()]))
            .collect();
        let windows = segment_midi(&events, 480, 2).unwrap();
        assert_eq!(windows.len(), 2);
        let joined: Vec<Token> = windows.iter().flat_map(|g| g.steps().to_vec()).collect();
        let whole = tokens_for_window(&topmost_per_step(&events, 120.0, 64));
        let notes = |s: &[Token]| -> Vec<(u8, usize, usize)> {
            super::super::notes_of(s)
                .into_iter()
                .map(|n| (n.pitch.midi(), n.start, n.steps))
                .collect()
        };
        assert_eq!(notes(&joined), notes(&whole));
    }

    #[test]
    fn midi_round_trip_random_grids() {
        let mut rng = Prng::new(99);
        for i in 0..1000 {
            let bars = if i % 10 == 0 { 16 } else { 2 };
            let g = random_grid(&mut rng, bars);
            let midi = parse_midi(&write_midi(&g)).unwrap();
            assert_eq!(quantize(&midi.events, midi.ticks_per_quarter, bars).unwrap(), g);
        }
    }

    proptest! {
        #[test]
        fn quantize_always_valid(
            raw in prop::collection::vec((0u64..8000, 0u64..3000, 0u8..128), 0..40),
            tpq in 24u16..1000,
        ) {
            let events: Vec<_> = raw.into_iter().map(|(o, d, p)| ev(o, d, p)).collect();
            let g = quantize(&events, tpq, 2).unwrap();
            prop_assert_eq!(g.len(), 32);
            prop_assert!(steps_are_valid(g.steps()));
        }
    }
}
