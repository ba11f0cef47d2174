//! Error metrics comparing decoder output against ground truth: message
//! bit-error rate, the fraction of misidentified drift states, and the
//! summed absolute offset between the true and inferred drift paths.

use crate::{Bit, Error, Result};

fn check_lengths<T>(actual: &[T], derived: &[T], what: &str) -> Result<()> {
    if actual.len() != derived.len() {
        return Err(Error::LengthMismatch(format!(
            "{what}: actual has {} elements, derived has {}",
            actual.len(),
            derived.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput(format!("{what} over empty sequences")));
    }
    Ok(())
}

/// Fraction of positions where the two bit sequences differ.
pub fn ber(reference: &[Bit], decoded: &[Bit]) -> Result<f64> {
    check_lengths(reference, decoded, "ber")?;
    let errors = reference
        .iter()
        .zip(decoded)
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / reference.len() as f64)
}

/// Fraction of steps where the inferred drift path departs from the true one.
pub fn niis(actual: &[i32], derived: &[i32]) -> Result<f64> {
    check_lengths(actual, derived, "niis")?;
    let wrong = actual.iter().zip(derived).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / actual.len() as f64)
}

/// Sum of absolute differences between the two drift paths.
pub fn sao(actual: &[i32], derived: &[i32]) -> Result<u64> {
    check_lengths(actual, derived, "sao")?;
    Ok(actual
        .iter()
        .zip(derived)
        .map(|(a, b)| u64::from(a.abs_diff(*b)))
        .sum())
}

/// Per-run metric bundle.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunMetrics {
    pub ber: f64,
    pub niis: f64,
    pub sao: u64,
}

impl RunMetrics {
    pub fn compute(
        message: &[Bit],
        decoded_message: &[Bit],
        true_drift: &[i32],
        inferred_drift: &[i32],
    ) -> Result<Self> {
        Ok(RunMetrics {
            ber: ber(message, decoded_message)?,
            niis: niis(true_drift, inferred_drift)?,
            sao: sao(true_drift, inferred_drift)?,
        })
    }
}
