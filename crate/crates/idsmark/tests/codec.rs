use idsmark::codec::{
    apply_watermark, generate_watermark, strip_watermark, Codebook, CODEWORD_BITS, SYMBOL_BITS,
};
use idsmark::{Bit, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The sixteen lowest-weight 5-bit words in (weight, value) order.
const WORDS: [u8; 16] = [0, 1, 2, 4, 8, 16, 3, 5, 6, 9, 10, 12, 17, 18, 20, 24];

fn bits_of(word: u8, width: usize) -> Vec<Bit> {
    (0..width).map(|i| (word >> (width - 1 - i)) & 1).collect()
}

#[test]
fn codebook_is_the_frozen_low_weight_table() {
    let book = Codebook::standard();
    for (symbol, &word) in WORDS.iter().enumerate() {
        assert_eq!(
            book.codeword(symbol).to_vec(),
            bits_of(word, CODEWORD_BITS),
            "symbol {symbol}"
        );
    }
}

#[test]
fn mean_density_is_twenty_five_over_eighty() {
    assert_eq!(Codebook::standard().mean_density(), 0.3125);
}

#[test]
fn sparsify_expands_symbols_most_significant_bit_first() {
    let book = Codebook::standard();
    // Symbol 6 → word 3 → 00011.
    assert_eq!(book.sparsify(&[0, 1, 1, 0]).unwrap(), vec![0, 0, 0, 1, 1]);
    // Symbol 0 → 00000, symbol 15 → word 24 → 11000.
    assert_eq!(
        book.sparsify(&[0, 0, 0, 0, 1, 1, 1, 1]).unwrap(),
        vec![0, 0, 0, 0, 0, 1, 1, 0, 0, 0]
    );
    // Symbol 5 → word 16 → 10000.
    assert_eq!(book.sparsify(&[0, 1, 0, 1]).unwrap(), vec![1, 0, 0, 0, 0]);
}

#[test]
fn all_symbols_round_trip() {
    let book = Codebook::standard();
    for symbol in 0..16usize {
        let data = bits_of(symbol as u8, SYMBOL_BITS);
        let sparse = book.sparsify(&data).unwrap();
        assert_eq!(sparse.len(), CODEWORD_BITS);
        assert_eq!(book.desparsify(&sparse).unwrap(), data);
    }
}

#[test]
fn long_messages_round_trip() {
    let book = Codebook::standard();
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let data = generate_watermark(480, &mut rng);
    let sparse = book.sparsify(&data).unwrap();
    assert_eq!(sparse.len(), 600);
    assert_eq!(book.desparsify(&sparse).unwrap(), data);
}

#[test]
fn desparsify_picks_the_nearest_codeword() {
    let book = Codebook::standard();
    // An exact codeword decodes to its own symbol.
    assert_eq!(book.desparsify(&[0, 0, 0, 0, 0]).unwrap(), vec![0, 0, 0, 0]);
    // 00111 is distance 1 from 00011, 00101, and 00110 (symbols 6, 7, 8);
    // the lowest symbol wins the tie.
    assert_eq!(book.desparsify(&[0, 0, 1, 1, 1]).unwrap(), vec![0, 1, 1, 0]);
}

#[test]
fn all_ones_block_resolves_to_symbol_six() {
    // 11111 is Hamming distance 3 from every weight-2 codeword; the
    // tie-break selects the lowest such symbol, 6 (word 00011).
    let book = Codebook::standard();
    assert_eq!(book.desparsify(&[1, 1, 1, 1, 1]).unwrap(), vec![0, 1, 1, 0]);
    let d = |a: u8, b: u8| (a ^ b).count_ones();
    assert_eq!(d(0b11111, WORDS[6]), 3);
    let min = WORDS.iter().map(|&w| d(0b11111, w)).min().unwrap();
    assert_eq!(min, 3);
}

#[test]
fn length_and_bit_validation() {
    let book = Codebook::standard();
    assert!(matches!(
        book.sparsify(&[0, 1, 0]),
        Err(Error::LengthMismatch(_))
    ));
    assert!(matches!(
        book.sparsify(&[0, 1, 0, 2]),
        Err(Error::InvalidBits(_))
    ));
    assert!(matches!(
        book.desparsify(&[0, 1, 0, 1]),
        Err(Error::LengthMismatch(_))
    ));
    assert!(matches!(
        book.desparsify(&[0, 1, 0, 1, 9]),
        Err(Error::InvalidBits(_))
    ));
}

#[test]
fn watermark_application_is_an_involution() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let watermark = generate_watermark(600, &mut rng);
    let sparse = generate_watermark(600, &mut rng);
    let combined = apply_watermark(&sparse, &watermark).unwrap();
    assert_eq!(strip_watermark(&combined, &watermark).unwrap(), sparse);
    assert!(combined.iter().all(|&b| b <= 1));
}

#[test]
fn watermark_generation_is_seeded_and_fair_ish() {
    let a = generate_watermark(600, &mut ChaCha12Rng::seed_from_u64(3));
    let b = generate_watermark(600, &mut ChaCha12Rng::seed_from_u64(3));
    assert_eq!(a, b);
    let ones: usize = a.iter().map(|&b| b as usize).sum();
    assert!(
        (200..400).contains(&ones),
        "suspicious bias: {ones} ones in 600"
    );
}

#[test]
fn xor_validates_lengths_and_bits() {
    assert!(matches!(
        apply_watermark(&[0, 1], &[0, 1, 1]),
        Err(Error::LengthMismatch(_))
    ));
    assert!(matches!(
        strip_watermark(&[0, 2], &[0, 1]),
        Err(Error::InvalidBits(_))
    ));
}
