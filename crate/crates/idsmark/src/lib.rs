//! Watermark codes over a finite-state Markov channel with synchronisation errors.
//!
//! The crate simulates a binary channel whose error behaviour (bit
//! transmission, deletion, insertion, plus IID substitutions) is driven by a
//! small Markov chain, and provides the full coding pipeline around it:
//!
//! * [`markov`] — transition-matrix algebra: stationary distributions,
//!   4-state to 3-state reduction, entropy, and seeded matrix generation.
//! * [`codec`] — the 4-to-5 sparse codebook, watermark generation, and the
//!   XOR combine/strip steps.
//! * [`channel`] — the event-level channel walk producing a received
//!   sequence together with the true drift path.
//! * [`decoder`] — three forward-backward decoders over the drift lattice:
//!   the first- and second-order memoryless constructions and the
//!   Markov-memory variant, plus path extraction and resynchronisation.
//! * [`metrics`] — bit error rate, incorrectly-identified-state rate, and
//!   sum of absolute offsets.
//! * [`oracle`] — slow reference implementations (exhaustive enumeration,
//!   exact-rational recursion) used by the test suite to validate the
//!   production decoders.
//! * [`experiment`] — seeded, reproducible Monte-Carlo sweeps and their
//!   CSV/SVG outputs.

pub mod channel;
pub mod codec;
pub mod decoder;
pub mod experiment;
pub mod markov;
pub mod metrics;
pub mod oracle;

/// A single bit, stored as `0` or `1`.
pub type Bit = u8;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid transition matrix: {0}")]
    InvalidMatrix(String),

    #[error("degenerate row: {0}")]
    DegenerateRow(String),

    #[error("singular linear system while solving for the stationary distribution")]
    SingularSystem,

    #[error(
        "no matrix within {tol} of entropy {target} after {attempts} attempts \
         (best achieved {best_entropy})"
    )]
    EntropyTargetNotFound {
        target: f64,
        tol: f64,
        attempts: usize,
        best_entropy: f64,
        best: Box<crate::markov::TransitionMatrix4>,
    },

    #[error("invalid bit input: {0}")]
    InvalidBits(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("decoder failure: column {column} of the {pass} pass is all zero")]
    DecoderFailure { pass: &'static str, column: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Converts an ASCII string of `'0'`/`'1'` characters into bits.
pub fn bits_from_str(s: &str) -> Result<Vec<Bit>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidBits(format!(
                "expected '0' or '1', found {other:?}"
            ))),
        })
        .collect()
}

/// Renders bits as an ASCII string of `'0'`/`'1'` characters.
pub fn bits_to_string(bits: &[Bit]) -> String {
    bits.iter()
        .map(|b| if *b == 0 { '0' } else { '1' })
        .collect()
}
