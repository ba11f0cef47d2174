//! Sparse codebook, watermark generation, and the XOR combine/strip steps.
//!
//! Data enters as 4-bit symbols and leaves as 5-bit codewords chosen to be
//! as sparse as possible; the sparse stream is then XORed onto a
//! pseudo-random watermark known to the receiver. The receiver undoes the
//! XOR after resynchronisation and maps each 5-bit block back to the
//! nearest codeword.

use rand::Rng;

use crate::{Bit, Error, Result};

/// Bits per input symbol.
pub const SYMBOL_BITS: usize = 4;
/// Bits per output codeword.
pub const CODEWORD_BITS: usize = 5;

/// The 4-to-5 sparse codebook.
///
/// The sixteen 5-bit words of lowest Hamming weight, ordered by weight and
/// then by numeric value, indexed by symbol. Symbol 0 maps to `00000` and
/// symbol 15 to `11000`; the mean codeword density is 25/80 = 0.3125.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codebook {
    words: [u8; 1 << SYMBOL_BITS],
}

impl Codebook {
    pub fn standard() -> Self {
        let mut all: Vec<u8> = (0..1u8 << CODEWORD_BITS).collect();
        all.sort_by_key(|w| (w.count_ones(), *w));
        let mut words = [0u8; 1 << SYMBOL_BITS];
        words.copy_from_slice(&all[..1 << SYMBOL_BITS]);
        Self { words }
    }

    /// The codeword for `symbol`, most significant bit first.
    pub fn codeword(&self, symbol: usize) -> [Bit; CODEWORD_BITS] {
        let w = self.words[symbol];
        std::array::from_fn(|i| (w >> (CODEWORD_BITS - 1 - i)) & 1)
    }

    /// Mean fraction of ones across all codewords.
    pub fn mean_density(&self) -> f64 {
        let ones: u32 = self.words.iter().map(|w| w.count_ones()).sum();
        f64::from(ones) / (self.words.len() * CODEWORD_BITS) as f64
    }

    /// Maps 4-bit symbols (most significant bit first) to 5-bit codewords.
    pub fn sparsify(&self, data: &[Bit]) -> Result<Vec<Bit>> {
        check_bits(data)?;
        if data.len() % SYMBOL_BITS != 0 {
            return Err(Error::LengthMismatch(format!(
                "data length {} is not a multiple of {SYMBOL_BITS}",
                data.len()
            )));
        }
        let mut out = Vec::with_capacity(data.len() / SYMBOL_BITS * CODEWORD_BITS);
        for chunk in data.chunks(SYMBOL_BITS) {
            let symbol = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
            out.extend_from_slice(&self.codeword(symbol));
        }
        Ok(out)
    }

    /// Maps each 5-bit block to the symbol of the nearest codeword by
    /// Hamming distance, breaking ties toward the lowest symbol.
    pub fn desparsify(&self, sparse: &[Bit]) -> Result<Vec<Bit>> {
        check_bits(sparse)?;
        if sparse.len() % CODEWORD_BITS != 0 {
            return Err(Error::LengthMismatch(format!(
                "sparse length {} is not a multiple of {CODEWORD_BITS}",
                sparse.len()
            )));
        }
        let mut out = Vec::with_capacity(sparse.len() / CODEWORD_BITS * SYMBOL_BITS);
        for chunk in sparse.chunks(CODEWORD_BITS) {
            let block = chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b);
            let symbol = self
                .words
                .iter()
                .enumerate()
                .min_by_key(|(i, w)| ((block ^ **w).count_ones(), *i))
                .map(|(i, _)| i)
                .expect("codebook is non-empty");
            for i in 0..SYMBOL_BITS {
                out.push(((symbol >> (SYMBOL_BITS - 1 - i)) & 1) as Bit);
            }
        }
        Ok(out)
    }
}

impl Default for Codebook {
    fn default() -> Self {
        Self::standard()
    }
}

fn check_bits(bits: &[Bit]) -> Result<()> {
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidBits(format!("bit value {b} is not 0 or 1")));
    }
    Ok(())
}

/// Draws `len` fair pseudo-random watermark bits.
pub fn generate_watermark(len: usize, rng: &mut impl Rng) -> Vec<Bit> {
    (0..len).map(|_| rng.random_range(0..=1) as Bit).collect()
}

fn xor_bits(a: &[Bit], b: &[Bit]) -> Result<Vec<Bit>> {
    check_bits(a)?;
    check_bits(b)?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(format!(
            "cannot XOR {} bits with {} bits",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// XORs the sparse stream onto the watermark, producing the transmitted
/// sequence.
pub fn apply_watermark(sparse: &[Bit], watermark: &[Bit]) -> Result<Vec<Bit>> {
    xor_bits(sparse, watermark)
}

/// Removes the watermark from a resynchronised received sequence.
pub fn strip_watermark(received: &[Bit], watermark: &[Bit]) -> Result<Vec<Bit>> {
    xor_bits(received, watermark)
}
