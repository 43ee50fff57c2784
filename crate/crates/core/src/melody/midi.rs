//! Standard MIDI File reading (format 0 and 1) and format-0 writing.

use std::collections::HashMap;

use super::{notes_of, Token, TokenGrid};
use crate::error::{Error, Result};

pub const TICKS_PER_QUARTER: u16 = 480;
pub const TICKS_PER_STEP: u64 = TICKS_PER_QUARTER as u64 / 4;
/// 120 BPM.
const TEMPO_US_PER_QUARTER: u32 = 500_000;
const VELOCITY: u8 = 80;

/// A resolved note: onset and duration in ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoteEvent {
    pub onset_tick: u64,
    pub duration_ticks: u64,
    pub pitch: u8,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn end_tick(&self) -> u64 {
        self.onset_tick + self.duration_ticks
    }
}

/// Notes of every track merged onto one timeline, sorted by onset.
#[derive(Clone, Debug, PartialEq)]
pub struct MidiFile {
    pub format: u16,
    pub ticks_per_quarter: u16,
    /// First tempo meta event, if any.
    pub tempo_us_per_quarter: Option<u32>,
    pub events: Vec<NoteEvent>,
    /// Latest end-of-track (or last event) tick over all tracks.
    pub end_tick: u64,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    /// Absolute offset of `bytes[0]` in the file.
    base: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], base: usize) -> Self {
        Self { bytes, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::midi(self.offset(), msg)
    }

    fn u8(&mut self) -> Result<u8> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of data"))?;
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Result<u8> {
        self.bytes
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of data"))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!(
                "need {n} bytes, only {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn vlq(&mut self) -> Result<u32> {
        let start = self.offset();
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::midi(start, "variable-length quantity longer than 4 bytes"))
    }
}

/// Parse a Standard MIDI File into note events.
///
/// Note-on with velocity 0 counts as note-off, running status is honored,
/// unmatched note-offs are ignored, and notes still sounding at the end of
/// a track are closed there.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiFile> {
    let mut cur = Cursor::new(bytes, 0);
    if cur.take(4).map_err(|_| Error::midi(0, "file too short"))? != b"MThd" {
        return Err(Error::midi(0, "missing MThd header"));
    }
    let header_len = cur.u32()? as usize;
    if header_len < 6 {
        return Err(Error::midi(4, format!("header length {header_len} < 6")));
    }
    let header_at = cur.offset();
    let mut header = Cursor::new(cur.take(header_len)?, header_at);
    let format = header.u16()?;
    if format > 1 {
        return Err(Error::midi(header_at, format!("unsupported SMF format {format}")));
    }
    let _ntracks = header.u16()?;
    let division = header.u16()?;
    if division & 0x8000 != 0 {
        return Err(Error::midi(header_at + 4, "SMPTE time division is not supported"));
    }
    if division == 0 {
        return Err(Error::midi(header_at + 4, "ticks per quarter must be positive"));
    }

    let mut events = Vec::new();
    let mut tempo = None;
    let mut end_tick = 0;
    while !cur.at_end() {
        let chunk_at = cur.offset();
        let id = cur.take(4)?;
        let len = cur.u32()? as usize;
        let body_at = cur.offset();
        let body = cur
            .take(len)
            .map_err(|_| Error::midi(chunk_at, format!("chunk declares {len} bytes past end of file")))?;
        if id == b"MTrk" {
            let track = parse_track(Cursor::new(body, body_at), &mut events, &mut tempo)?;
            end_tick = end_tick.max(track);
        }
    }
    events.sort_by_key(|e: &NoteEvent| (e.onset_tick, e.pitch, e.duration_ticks));
    Ok(MidiFile {
        format,
        ticks_per_quarter: division,
        tempo_us_per_quarter: tempo,
        events,
        end_tick,
    })
}

fn parse_track(
    mut cur: Cursor<'_>,
    events: &mut Vec<NoteEvent>,
    tempo: &mut Option<u32>,
) -> Result<u64> {
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;
    // (channel, pitch) -> (onset, velocity)
    let mut sounding: HashMap<(u8, u8), (u64, u8)> = HashMap::new();

    let close = |events: &mut Vec<NoteEvent>, pitch: u8, onset: u64, velocity: u8, at: u64| {
        events.push(NoteEvent {
            onset_tick: onset,
            duration_ticks: (at - onset).max(1),
            pitch,
            velocity,
        });
    };

    while !cur.at_end() {
        tick += u64::from(cur.vlq()?);
        let status_at = cur.offset();
        let status = if cur.peek()? & 0x80 != 0 {
            cur.u8()?
        } else {
            running.ok_or_else(|| Error::midi(status_at, "data byte without running status"))?
        };

        match status {
            0xFF => {
                running = None;
                let kind = cur.u8()?;
                let len = cur.vlq()? as usize;
                let data = cur.take(len)?;
                match kind {
                    0x2F => break,
                    0x51 if len == 3 && tempo.is_none() => {
                        *tempo = Some(u32::from_be_bytes([0, data[0], data[1], data[2]]));
                    }
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = cur.vlq()? as usize;
                cur.take(len)?;
            }
            0x80..=0xEF => {
                running = Some(status);
                let channel = status & 0x0F;
                match status & 0xF0 {
                    0x80 | 0x90 => {
                        let pitch = cur.u8()?;
                        let velocity = cur.u8()?;
                        if pitch > 0x7F || velocity > 0x7F {
                            return Err(Error::midi(status_at, "note data byte has high bit set"));
                        }
                        let key = (channel, pitch);
                        let is_on = status & 0xF0 == 0x90 && velocity > 0;
                        if let Some((onset, vel)) = sounding.remove(&key) {
                            close(events, pitch, onset, vel, tick);
                        }
                        if is_on {
                            sounding.insert(key, (tick, velocity));
                        }
                    }
                    0xC0 | 0xD0 => {
                        cur.u8()?;
                    }
                    _ => {
                        cur.take(2)?;
                    }
                }
            }
            other => {
                return Err(Error::midi(status_at, format!("unexpected status byte {other:#04x}")));
            }
        }
    }

    let mut hanging: Vec<_> = sounding.into_iter().collect();
    hanging.sort_unstable();
    for ((_, pitch), (onset, vel)) in hanging {
        close(events, pitch, onset, vel, tick);
    }
    Ok(tick)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Format-0 file for `grid`: 480 ticks per quarter, 120 BPM, channel 0,
/// program 0, velocity 80. Each NOTE and its HOLDs become one note.
pub fn write_midi(grid: &TokenGrid) -> Vec<u8> {
    write_midi_steps(grid.steps())
}

/// Like [`write_midi`] for an arbitrary-length step sequence, e.g. several
/// grids concatenated. End-of-track sits at `steps.len() * 120` ticks.
pub fn write_midi_steps(steps: &[Token]) -> Vec<u8> {
    let mut track = Vec::new();
    let mut last_tick: u64 = 0;
    let mut emit = |track: &mut Vec<u8>, tick: u64, bytes: &[u8]| {
        push_vlq(track, (tick - last_tick) as u32);
        track.extend_from_slice(bytes);
        last_tick = tick;
    };

    let t = TEMPO_US_PER_QUARTER.to_be_bytes();
    emit(&mut track, 0, &[0xFF, 0x51, 0x03, t[1], t[2], t[3]]);
    let notes = notes_of(steps);
    if !notes.is_empty() {
        emit(&mut track, 0, &[0xC0, 0x00]);
    }
    for n in notes {
        let on = n.start as u64 * TICKS_PER_STEP;
        let off = (n.start + n.steps) as u64 * TICKS_PER_STEP;
        emit(&mut track, on, &[0x90, n.pitch.midi(), VELOCITY]);
        emit(&mut track, off, &[0x80, n.pitch.midi(), 0x00]);
    }
    emit(&mut track, steps.len() as u64 * TICKS_PER_STEP, &[0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&TICKS_PER_QUARTER.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::{Pitch, TokenGrid};

    fn smf(division: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&(if tracks.len() > 1 { 1u16 } else { 0 }).to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&division.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    #[test]
    fn vlq_encoding() {
        for (v, bytes) in [
            (0u32, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (0x3FFF, vec![0xFF, 0x7F]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            push_vlq(&mut out, v);
            assert_eq!(out, bytes);
            assert_eq!(Cursor::new(&bytes, 0).vlq().unwrap(), v);
        }
    }

    #[test]
    fn empty_track_has_no_events() {
        let bytes = smf(96, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        let midi = parse_midi(&bytes).unwrap();
        assert!(midi.events.is_empty());
        assert_eq!(midi.ticks_per_quarter, 96);
    }

    #[test]
    fn simultaneous_notes_both_parsed() {
        let track = vec![
            0x00, 0x90, 60, 100, // C on
            0x00, 64, 100, // E on, running status
            0x60, 0x80, 60, 0, // C off after 96
            0x00, 0x90, 64, 0, // E off via velocity 0
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let midi = parse_midi(&smf(96, &[track])).unwrap();
        assert_eq!(midi.events.len(), 2);
        assert_eq!(midi.events[0].pitch, 60);
        assert_eq!(midi.events[1].pitch, 64);
        assert!(midi.events.iter().all(|e| e.onset_tick == 0 && e.duration_ticks == 96));
    }

    #[test]
    fn stray_note_off_is_ignored() {
        let track = vec![0x00, 0x80, 62, 0, 0x10, 0x90, 62, 90, 0x10, 0x80, 62, 0, 0x00, 0xFF, 0x2F, 0x00];
        let midi = parse_midi(&smf(480, &[track])).unwrap();
        assert_eq!(midi.events.len(), 1);
        assert_eq!((midi.events[0].onset_tick, midi.events[0].duration_ticks), (16, 16));
    }

    #[test]
    fn format1_tracks_are_merged_and_tempo_read() {
        let tempo = vec![0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x2F, 0x00];
        let notes = vec![0x00, 0x91, 70, 80, 0x83, 0x60, 0x81, 70, 0, 0x00, 0xFF, 0x2F, 0x00];
        let midi = parse_midi(&smf(480, &[tempo, notes])).unwrap();
        assert_eq!(midi.format, 1);
        assert_eq!(midi.tempo_us_per_quarter, Some(500_000));
        assert_eq!(midi.events.len(), 1);
        assert_eq!(midi.events[0].duration_ticks, 480);
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        assert!(matches!(parse_midi(b"RIFF"), Err(Error::Midi { offset: 0, .. })));
        let mut bytes = smf(480, &[vec![0x00, 0xFF, 0x2F, 0x00]]);
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(parse_midi(&bytes), Err(Error::Midi { offset: 14, .. })));
        // data byte with no status to run from
        let bad = smf(480, &[vec![0x00, 0x40, 0x40]]);
        match parse_midi(&bad) {
            Err(Error::Midi { offset, .. }) => assert_eq!(offset, 23),
            other => panic!("expected parse error, got {other:?}"),
        }
        let smpte = smf(0xE728, &[]);
        assert!(parse_midi(&smpte).is_err());
    }

    #[test]
    fn all_rest_grid_writes_tempo_and_end_only() {
        let bytes = write_midi(&TokenGrid::rest(2).unwrap());
        let track = &bytes[22..];
        assert_eq!(
            track,
            &[0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x9E, 0x00, 0xFF, 0x2F, 0x00]
        );
        let midi = parse_midi(&bytes).unwrap();
        assert!(midi.events.is_empty());
        assert_eq!(midi.end_tick, 32 * 120);
    }

    #[test]
    fn sustained_note_duration() {
        let mut steps = vec![Token::Note(Pitch::new(36).unwrap()), Token::Hold, Token::Hold, Token::Hold];
        steps.resize(32, Token::Rest);
        let midi = parse_midi(&write_midi(&TokenGrid::new(2, steps).unwrap())).unwrap();
        assert_eq!(midi.events.len(), 1);
        let e = midi.events[0];
        assert_eq!((e.pitch, e.onset_tick, e.duration_ticks, e.velocity), (36, 0, 480, 80));
        assert_eq!(midi.ticks_per_quarter, 480);
    }
}
