//! 256-bit presence bitmap used by the largest node kind and by compressed
//! leaves whose entries differ only in the last key byte. Bit scans use a
//! portable word-at-a-time loop.

/// Four 64-bit words covering byte values 0..=255.
pub type Bits256 = [u64; 4];

pub const EMPTY: Bits256 = [0; 4];

#[inline]
pub fn set(bits: &mut Bits256, b: u8) {
    bits[(b >> 6) as usize] |= 1u64 << (b & 63);
}

#[inline]
pub fn test(bits: &Bits256, b: u8) -> bool {
    bits[(b >> 6) as usize] & (1u64 << (b & 63)) != 0
}

#[inline]
pub fn count(bits: &Bits256) -> u32 {
    bits.iter().map(|w| w.count_ones()).sum()
}

/// Number of set bits strictly below `b` (the rank of `b` among set bits).
#[inline]
pub fn rank(bits: &Bits256, b: u8) -> u32 {
    let word = (b >> 6) as usize;
    let mut r = 0;
    for w in &bits[..word] {
        r += w.count_ones();
    }
    let shift = b & 63;
    if shift != 0 {
        r += (bits[word] & ((1u64 << shift) - 1)).count_ones();
    }
    r
}

/// Smallest set bit with value > `after`, or `None`. Pass `-1` to start.
#[inline]
pub fn next_one(bits: &Bits256, after: i16) -> Option<u8> {
    let start = (after + 1) as u16;
    if start > 255 {
        return None;
    }
    let mut word = (start >> 6) as usize;
    let mut w = bits[word] & (!0u64 << (start & 63));
    loop {
        if w != 0 {
            return Some(((word as u16) << 6) as u8 | w.trailing_zeros() as u8);
        }
        word += 1;
        if word == 4 {
            return None;
        }
        w = bits[word];
    }
}
