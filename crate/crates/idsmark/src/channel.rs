//! Event-level simulation of the 3-state synchronisation channel.
//!
//! Each transmitted bit is consumed by exactly one step. Within a step the
//! chain may first emit up to `i_m` inserted (random) bits, then either
//! transmits the queued bit (possibly substituted) or deletes it. The chain
//! is a single walk over events: every draw uses the row of the previous
//! event's state, starting from the transmission row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::markov::{cap_insertion_row, TransitionMatrix3, D3, I3, T};
use crate::{Bit, Error, Result};

/// One channel event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    /// The queued bit was emitted; `substituted` marks a flipped emission.
    Transmit { substituted: bool },
    /// The queued bit was dropped.
    Delete,
    /// A uniform random bit was emitted ahead of the queued bit.
    Insert,
}

impl Event {
    /// Row index of this event's state in the 3-state matrix.
    pub fn state_index(self) -> usize {
        match self {
            Event::Transmit { .. } => T,
            Event::Delete => D3,
            Event::Insert => I3,
        }
    }
}

/// Tallies over one transmission.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub transmissions: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

/// Everything the channel did to one transmitted sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransmissionRecord {
    /// The queued input bits.
    pub transmitted: Vec<Bit>,
    /// The bits that came out of the channel.
    pub received: Vec<Bit>,
    /// The events of each step, in order.
    pub steps: Vec<Vec<Event>>,
    /// Drift (insertions minus deletions so far) before each bit entered.
    pub drift: Vec<i32>,
    /// Drift after the last step: `received.len() − transmitted.len()`.
    pub final_offset: i32,
    pub counts: EventCounts,
}

impl TransmissionRecord {
    pub fn realized_pd(&self) -> f64 {
        self.counts.deletions as f64 / self.transmitted.len() as f64
    }

    pub fn realized_pi(&self) -> f64 {
        self.counts.insertions as f64 / self.transmitted.len() as f64
    }

    pub fn realized_ps(&self) -> f64 {
        self.counts.substitutions as f64 / self.transmitted.len() as f64
    }
}

fn draw(row: &[f64; 3], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = T;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // Round-off can leave the cumulative sum marginally below 1.
    last_positive
}

/// Walks the queued bits through the channel.
pub fn transmit(
    a3: &TransitionMatrix3,
    p_s: f64,
    i_m: usize,
    bits: &[Bit],
    rng: &mut impl Rng,
) -> Result<TransmissionRecord> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(Error::InvalidConfig(format!(
            "p_s must be in [0, 1], got {p_s}"
        )));
    }
    if i_m == 0 {
        return Err(Error::InvalidConfig("i_m must be at least 1".into()));
    }
    if bits.is_empty() {
        return Err(Error::EmptyInput(
            "cannot transmit an empty sequence".into(),
        ));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidBits(format!("bit value {b} is not 0 or 1")));
    }

    let capped = cap_insertion_row(a3)?;
    let mut received = Vec::with_capacity(bits.len() + bits.len() / 8);
    let mut steps = Vec::with_capacity(bits.len());
    let mut drift = Vec::with_capacity(bits.len());
    let mut counts = EventCounts::default();

    let mut prev_state = T;
    let mut offset = 0i32;
    for &bit in bits {
        drift.push(offset);
        let mut events = Vec::with_capacity(1);
        let mut consecutive_inserts = 0usize;
        loop {
            let row = if consecutive_inserts == i_m {
                &capped
            } else {
                &a3.rows()[prev_state]
            };
            let next = draw(row, rng);
            prev_state = next;
            match next {
                s if s == I3 => {
                    received.push(rng.random_range(0..=1) as Bit);
                    counts.insertions += 1;
                    offset += 1;
                    consecutive_inserts += 1;
                    events.push(Event::Insert);
                }
                s if s == D3 => {
                    counts.deletions += 1;
                    offset -= 1;
                    events.push(Event::Delete);
                    break;
                }
                _ => {
                    let substituted = rng.random::<f64>() < p_s;
                    received.push(bit ^ substituted as Bit);
                    counts.transmissions += 1;
                    counts.substitutions += usize::from(substituted);
                    events.push(Event::Transmit { substituted });
                    break;
                }
            }
        }
        steps.push(events);
    }

    let final_offset = received.len() as i32 - bits.len() as i32;
    Ok(TransmissionRecord {
        transmitted: bits.to_vec(),
        received,
        steps,
        drift,
        final_offset,
        counts,
    })
}
