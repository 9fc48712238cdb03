//! Standard MIDI File (format 1) output and a strict reader for the same subset.

use thiserror::Error;

use crate::compose::Score;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum MidiError {
    #[error("value {0:#x} does not fit in a variable-length quantity")]
    ValueTooLarge(u32),
    #[error("malformed MIDI data at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: &'static str },
}

const VLQ_MAX: u32 = 0x0FFF_FFFF;

pub fn encode_vlq(value: u32) -> Result<Vec<u8>, MidiError> {
    if value > VLQ_MAX {
        return Err(MidiError::ValueTooLarge(value));
    }
    let mut out = vec![(value & 0x7F) as u8];
    let mut v = value >> 7;
    while v > 0 {
        out.push(0x80 | (v & 0x7F) as u8);
        v >>= 7;
    }
    out.reverse();
    Ok(out)
}

/// `round(t * tempo / 60 * ppq)`, halves rounding up.
pub fn ticks(t: f64, tempo_bpm: f64, ppq: u16) -> u32 {
    (t * tempo_bpm / 60.0 * ppq as f64 + 0.5).floor().max(0.0) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    NoteOff,
    Control,
    NoteOn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TrackEvent {
    pub tick: u32,
    pub kind: EventKind,
    pub channel: u8,
    pub data1: u8,
    pub data2: u8,
}

impl TrackEvent {
    fn status(&self) -> u8 {
        let high = match self.kind {
            EventKind::NoteOff => 0x80,
            EventKind::NoteOn => 0x90,
            EventKind::Control => 0xB0,
        };
        high | (self.channel & 0x0F)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSmf {
    pub ppq: u16,
    pub tempo_us: u32,
    pub events: Vec<TrackEvent>,
    pub end_tick: u32,
}

/// Absolute-tick events of the score, in file order.
///
/// A note still sounding when the same pitch is struck again is cut at the new
/// onset; a second strike on the same tick is dropped.
pub fn score_events(score: &Score) -> Vec<TrackEvent> {
    let tk = |t: f64| ticks(t, score.tempo_bpm, score.ppq);
    let mut spans: Vec<(u32, u32, u8, u8, u8)> = score
        .notes
        .iter()
        .map(|n| {
            let on = tk(n.onset);
            // zero-length notes would close before they open
            (on, tk(n.end()).max(on + 1), n.channel & 0x0F, n.pitch & 0x7F, n.velocity)
        })
        .collect();
    spans.sort_by_key(|&(on, _, ch, pitch, _)| (ch, pitch, on));
    let mut keep = vec![true; spans.len()];
    let mut last: Option<usize> = None;
    for i in 0..spans.len() {
        let cur = spans[i];
        match last {
            Some(j) if (spans[j].2, spans[j].3) == (cur.2, cur.3) => {
                if spans[j].0 == cur.0 {
                    keep[i] = false;
                    continue;
                }
                spans[j].1 = spans[j].1.min(cur.0);
            }
            _ => {}
        }
        last = Some(i);
    }

    let mut events = Vec::with_capacity(spans.len() * 2 + score.controls.len());
    for (&(on, off, channel, pitch, velocity), _) in spans.iter().zip(&keep).filter(|(_, k)| **k) {
        events.push(TrackEvent { tick: on, kind: EventKind::NoteOn, channel, data1: pitch, data2: velocity });
        events.push(TrackEvent { tick: off, kind: EventKind::NoteOff, channel, data1: pitch, data2: 0 });
    }
    for c in &score.controls {
        events.push(TrackEvent {
            tick: tk(c.time),
            kind: EventKind::Control,
            channel: score.channel,
            data1: c.controller,
            data2: c.value,
        });
    }
    events.sort_by_key(|e| (e.tick, e.kind, e.data1));
    events
}

fn push_track(out: &mut Vec<u8>, body: &[u8]) {
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn push_delta(body: &mut Vec<u8>, delta: u32) {
    body.extend(encode_vlq(delta.min(VLQ_MAX)).expect("clamped"));
}

pub fn tempo_micros(tempo_bpm: f64) -> u32 {
    (60e6 / tempo_bpm).round().clamp(1.0, 0xFF_FFFF as f64) as u32
}

pub fn write_smf(score: &Score) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&2u16.to_be_bytes());
    out.extend_from_slice(&score.ppq.to_be_bytes());

    let us = tempo_micros(score.tempo_bpm).to_be_bytes();
    push_track(&mut out, &[0x00, 0xFF, 0x51, 0x03, us[1], us[2], us[3], 0x00, 0xFF, 0x2F, 0x00]);

    let mut body = Vec::new();
    let mut last = 0u32;
    for e in score_events(score) {
        push_delta(&mut body, e.tick - last);
        last = e.tick;
        body.extend_from_slice(&[e.status(), e.data1, e.data2]);
    }
    body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    push_track(&mut out, &body);
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn fail<T>(&self, reason: &'static str) -> Result<T, MidiError> {
        Err(MidiError::Malformed { offset: self.pos, reason })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.data.len() - self.pos < n {
            return self.fail("unexpected end of data");
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn expect(&mut self, bytes: &[u8], reason: &'static str) -> Result<(), MidiError> {
        let start = self.pos;
        if self.take(bytes.len())? != bytes {
            self.pos = start;
            return self.fail(reason);
        }
        Ok(())
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let mut v = 0u32;
        for i in 0..4 {
            let b = self.u8()?;
            if i == 0 && b == 0x80 {
                return self.fail("non-minimal variable-length quantity");
            }
            v = (v << 7) | (b & 0x7F) as u32;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        self.fail("variable-length quantity longer than 4 bytes")
    }

    fn track(&mut self) -> Result<Cursor<'a>, MidiError> {
        self.expect(b"MTrk", "missing MTrk")?;
        let len = self.u32()? as usize;
        Ok(Cursor { data: self.take(len)?, pos: 0 })
    }
}

/// Parses files in the exact layout produced by `write_smf`.
pub fn read_smf(data: &[u8]) -> Result<ParsedSmf, MidiError> {
    let mut c = Cursor { data, pos: 0 };
    c.expect(b"MThd", "missing MThd")?;
    c.expect(&[0, 0, 0, 6], "header length must be 6")?;
    c.expect(&[0, 1], "only format 1 is supported")?;
    c.expect(&[0, 2], "expected two tracks")?;
    let ppq = c.u16()?;
    if ppq & 0x8000 != 0 || ppq == 0 {
        return c.fail("division must be ticks per quarter");
    }

    let mut t0 = c.track()?;
    t0.expect(&[0x00, 0xFF, 0x51, 0x03], "expected tempo meta event")?;
    let b = t0.take(3)?;
    let tempo_us = u32::from_be_bytes([0, b[0], b[1], b[2]]);
    t0.expect(&[0x00, 0xFF, 0x2F, 0x00], "expected end of track")?;
    if t0.pos != t0.data.len() {
        return t0.fail("trailing bytes in tempo track");
    }

    let mut t1 = c.track()?;
    let mut events = Vec::new();
    let mut tick = 0u32;
    loop {
        tick += t1.vlq()?;
        let status = t1.u8()?;
        if status == 0xFF {
            t1.expect(&[0x2F, 0x00], "expected end of track")?;
            break;
        }
        let kind = match status & 0xF0 {
            0x80 => EventKind::NoteOff,
            0x90 => EventKind::NoteOn,
            0xB0 => EventKind::Control,
            _ => return t1.fail("unsupported status byte"),
        };
        let (data1, data2) = (t1.u8()?, t1.u8()?);
        if data1 > 0x7F || data2 > 0x7F {
            return t1.fail("data byte out of range");
        }
        events.push(TrackEvent { tick, kind, channel: status & 0x0F, data1, data2 });
    }
    if t1.pos != t1.data.len() {
        return t1.fail("bytes after end of track");
    }
    if c.pos != data.len() {
        return c.fail("trailing bytes after last track");
    }
    Ok(ParsedSmf { ppq, tempo_us, events, end_tick: tick })
}

/// Checks every note-on is closed exactly once, in order.
pub fn notes_balanced(events: &[TrackEvent]) -> bool {
    let mut open = [[0i32; 128]; 16];
    for e in events {
        let slot = &mut open[e.channel as usize][e.data1 as usize];
        match e.kind {
            EventKind::NoteOn => *slot += 1,
            EventKind::NoteOff => {
                *slot -= 1;
                if *slot < 0 {
                    return false;
                }
            }
            EventKind::Control => {}
        }
    }
    open.iter().flatten().all(|&n| n == 0)
}
