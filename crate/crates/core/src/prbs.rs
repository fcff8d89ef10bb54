//! Maximal-length PRBS generation.
//!
//! The transmitter payload is one period of a maximal-length LFSR sequence
//! (an m-sequence): order `n` gives a period of `2^n - 1` bits containing
//! `2^(n-1)` ones and `2^(n-1) - 1` zeros, and every non-zero cyclic shift
//! differs from the original.

use crate::error::{Error, Result};

/// PRBS payload together with its line rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BitSequence {
    /// Bit values, each 0 or 1.
    pub bits: Vec<u8>,
    /// Bits per second.
    pub bitrate_hz: f64,
}

impl BitSequence {
    /// One full m-sequence period at the given line rate.
    pub fn prbs(order: u32, seed: u32, bitrate_hz: f64) -> Result<Self> {
        if !(bitrate_hz > 0.0) {
            return Err(Error::param("bitrate_hz must be positive"));
        }
        Ok(Self { bits: generate_prbs(order, seed)?, bitrate_hz })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Rectangular NRZ drive (0/1 levels), `samples_per_bit` samples per bit,
    /// tiled over `periods` repetitions of the payload.
    pub fn nrz_drive(&self, samples_per_bit: usize, periods: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.bits.len() * samples_per_bit * periods);
        for _ in 0..periods {
            for &b in &self.bits {
                let level = f64::from(b);
                out.extend(std::iter::repeat(level).take(samples_per_bit));
            }
        }
        out
    }

    /// Ground-truth labels for a window of `periods` repetitions.
    pub fn tiled_labels(&self, periods: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bits.len() * periods);
        for _ in 0..periods {
            out.extend_from_slice(&self.bits);
        }
        out
    }
}

/// Feedback tap positions (1-indexed) of a primitive polynomial per order.
/// Order 10 uses x^10 + x^7 + 1.
fn taps_for_order(order: u32) -> Option<&'static [u32]> {
    let taps: &[u32] = match order {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 6, 4, 1],
        13 => &[13, 4, 3, 1],
        14 => &[14, 5, 3, 1],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 6, 2, 1],
        20 => &[20, 17],
        21 => &[21, 19],
        22 => &[22, 21],
        23 => &[23, 18],
        24 => &[24, 23, 22, 17],
        25 => &[25, 22],
        26 => &[26, 6, 2, 1],
        27 => &[27, 5, 2, 1],
        28 => &[28, 25],
        29 => &[29, 27],
        30 => &[30, 6, 4, 1],
        31 => &[31, 28],
        _ => return None,
    };
    Some(taps)
}

/// One LFSR step for the polynomial x^n + sum x^t + 1 (Fibonacci form,
/// shift left): the new bit is the XOR of the state bits (t - 1).
fn lfsr_step(state: u32, taps: &[u32], mask: u32) -> u32 {
    let feedback = taps.iter().fold(0u32, |acc, &t| acc ^ (state >> (t - 1))) & 1;
    ((state << 1) | feedback) & mask
}

/// Generate one full period (`2^order - 1` bits) of a maximal-length LFSR
/// sequence. Deterministic in `(order, seed)`; the seed selects the cyclic
/// phase of the sequence.
pub fn generate_prbs(order: u32, seed: u32) -> Result<Vec<u8>> {
    let taps = taps_for_order(order)
        .ok_or_else(|| Error::param(format!("PRBS order {order} outside supported range 2..=31")))?;
    let mask: u32 = if order == 31 { 0x7fff_ffff } else { (1u32 << order) - 1 };
    let mut state = seed & mask;
    if state == 0 {
        return Err(Error::param("PRBS seed must be a nonzero LFSR state"));
    }
    let period = (1u64 << order) - 1;
    let mut bits = Vec::with_capacity(period as usize);
    for _ in 0..period {
        state = lfsr_step(state, taps, mask);
        bits.push((state & 1) as u8);
    }
    Ok(bits)
}
