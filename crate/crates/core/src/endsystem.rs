//! End system model: regulated frame generation, CRC corruption, redundant
//! emission onto networks A and B, and first-valid-wins reception.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::netmodel::{CopyId, ResolvedVl, VlId};
use crate::rng::{self, Purpose, StreamRng};
use crate::time::SimTime;

/// Accepted sequence numbers remembered per virtual link.
pub const RX_WINDOW: u64 = 256;

/// One copy of a frame travelling through the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub vl: VlId,
    pub seq: u64,
    pub copy: CopyId,
    pub length_bytes: u32,
    pub crc_valid: bool,
    pub generated_at: SimTime,
}

/// A generated frame before it is duplicated onto the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogicalFrame {
    pub vl: VlId,
    pub seq: u64,
    pub length_bytes: u32,
    pub generated_at: SimTime,
}

/// Transmit-side state of one virtual link.
#[derive(Debug, Clone)]
pub struct VlTxState {
    pub next_seq: u64,
    pub last_departure: Option<SimTime>,
    length_rng: StreamRng,
    jitter_rng: StreamRng,
    crc_rng_a: StreamRng,
    crc_rng_b: StreamRng,
}

impl VlTxState {
    pub fn new(global_seed: u64, vl: VlId) -> Self {
        let entity = u64::from(vl.0);
        VlTxState {
            next_seq: 0,
            last_departure: None,
            length_rng: rng::stream(global_seed, entity, Purpose::FrameLength),
            jitter_rng: rng::stream(global_seed, entity, Purpose::DepartureJitter),
            crc_rng_a: rng::stream(global_seed, entity, Purpose::CorruptionA),
            crc_rng_b: rng::stream(global_seed, entity, Purpose::CorruptionB),
        }
    }
}

/// Time of the next departure of `vl`.
///
/// The first departure is the start offset; every later one follows the
/// previous departure by the BAG (or Ethernet periodicity) plus an optional
/// uniform extra gap in `[0, jitter]`, so the spacing never drops below the
/// BAG.
pub fn next_departure(state: &mut VlTxState, vl: &ResolvedVl, start_offset: SimTime) -> SimTime {
    match state.last_departure {
        None => start_offset,
        Some(last) => {
            let extra = if vl.jitter > SimTime::ZERO {
                SimTime::from_nanos(state.jitter_rng.random_range(0..=vl.jitter.as_nanos()))
            } else {
                SimTime::ZERO
            };
            last + vl.bag + extra
        }
    }
}

/// Generates the frame departing at `now`. The length is drawn uniformly in
/// `[min_frame_bytes, max_frame_bytes]` from the VL's own stream.
pub fn generate_frame(state: &mut VlTxState, vl: &ResolvedVl, now: SimTime) -> LogicalFrame {
    let length_bytes = if vl.min_frame_bytes == vl.max_frame_bytes {
        vl.min_frame_bytes
    } else {
        state.length_rng.random_range(vl.min_frame_bytes..=vl.max_frame_bytes)
    };
    let frame = LogicalFrame {
        vl: vl.id,
        seq: state.next_seq,
        length_bytes,
        generated_at: now,
    };
    state.next_seq += 1;
    state.last_departure = Some(now);
    frame
}

/// Probability that a frame of `length_bytes` has at least one bit error.
pub fn corruption_probability(length_bytes: u32, ber: f64) -> f64 {
    if ber <= 0.0 {
        return 0.0;
    }
    let bits = 8.0 * f64::from(length_bytes);
    // 1 - (1 - ber)^bits without cancellation for tiny ber
    -(bits * (-ber).ln_1p()).exp_m1()
}

/// Draws whether a frame copy arrives with a valid CRC.
pub fn corrupt_decision(length_bytes: u32, ber: f64, rng: &mut StreamRng) -> bool {
    let p = corruption_probability(length_bytes, ber);
    if p == 0.0 {
        return true;
    }
    rng.random::<f64>() >= p
}

/// Duplicates a generated frame onto every route of the VL (A only, or A and
/// B when redundancy is on). Each copy gets an independent CRC decision.
pub fn emit(frame: &LogicalFrame, vl: &ResolvedVl, state: &mut VlTxState, ber: f64) -> Vec<Frame> {
    vl.copies()
        .map(|copy| {
            let rng = match copy {
                CopyId::A => &mut state.crc_rng_a,
                CopyId::B => &mut state.crc_rng_b,
            };
            Frame {
                vl: frame.vl,
                seq: frame.seq,
                copy,
                length_bytes: frame.length_bytes,
                crc_valid: corrupt_decision(frame.length_bytes, ber, rng),
                generated_at: frame.generated_at,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOutcome {
    Accepted,
    DuplicateDiscarded,
    CorruptDiscarded,
}

#[derive(Debug, Clone, Default)]
struct SeqWindow {
    accepted: BTreeSet<u64>,
    highest: Option<u64>,
}

impl SeqWindow {
    /// Records `seq` and returns whether it is new. Sequence numbers that
    /// fell out of the window are treated as already seen.
    fn accept(&mut self, seq: u64) -> bool {
        if let Some(high) = self.highest {
            if seq + RX_WINDOW <= high || self.accepted.contains(&seq) {
                return false;
            }
        }
        self.accepted.insert(seq);
        let high = self.highest.map_or(seq, |h| h.max(seq));
        self.highest = Some(high);
        if high >= RX_WINDOW {
            let floor = high + 1 - RX_WINDOW;
            self.accepted = self.accepted.split_off(&floor);
        }
        true
    }
}

/// Receive-side state of one end system.
#[derive(Debug, Clone, Default)]
pub struct RxState {
    windows: HashMap<VlId, SeqWindow>,
    pub accepted: u64,
    pub duplicate_discarded: u64,
    pub corrupt_discarded: u64,
}

impl RxState {
    /// First-valid-wins reception.
    pub fn receive(&mut self, frame: &Frame) -> RxOutcome {
        if !frame.crc_valid {
            self.corrupt_discarded += 1;
            return RxOutcome::CorruptDiscarded;
        }
        if self.windows.entry(frame.vl).or_default().accept(frame.seq) {
            self.accepted += 1;
            RxOutcome::Accepted
        } else {
            self.duplicate_discarded += 1;
            RxOutcome::DuplicateDiscarded
        }
    }
}
