//! Python bindings over the core simulator: codec, channel, decoding, and
//! matrix generation with plain lists and tuples at the boundary.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use idsmark::codec::{self, Codebook};
use idsmark::decoder::{self, DecoderKind};
use idsmark::experiment::{derive_rng, MatrixBundle, Stream};
use idsmark::markov::{
    self, band_for_target, generate_matrix_for_entropy, TransitionMatrix3, TransitionMatrix4,
};
use idsmark::{Bit, Error};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix4(rows: Vec<Vec<f64>>) -> PyResult<TransitionMatrix4> {
    let mut arr = [[0.0f64; 4]; 4];
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("expected a 4x4 matrix"));
    }
    for (dst, src) in arr.iter_mut().zip(rows) {
        dst.copy_from_slice(&src);
    }
    TransitionMatrix4::new(arr).map_err(err)
}

fn matrix3(rows: Vec<Vec<f64>>) -> PyResult<TransitionMatrix3> {
    let mut arr = [[0.0f64; 3]; 3];
    if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
        return Err(PyValueError::new_err("expected a 3x3 matrix"));
    }
    for (dst, src) in arr.iter_mut().zip(rows) {
        dst.copy_from_slice(&src);
    }
    TransitionMatrix3::new(arr).map_err(err)
}

/// Maps 4-bit data symbols to 5-bit low-weight codewords.
#[pyfunction]
fn sparsify(message: Vec<Bit>) -> PyResult<Vec<Bit>> {
    Codebook::standard().sparsify(&message).map_err(err)
}

/// Inverts `sparsify`, picking the nearest codeword for corrupted blocks.
#[pyfunction]
fn desparsify(sparse: Vec<Bit>) -> PyResult<Vec<Bit>> {
    Codebook::standard().desparsify(&sparse).map_err(err)
}

/// XORs the sparse sequence with the watermark.
#[pyfunction]
fn apply_watermark(sparse: Vec<Bit>, watermark: Vec<Bit>) -> PyResult<Vec<Bit>> {
    codec::apply_watermark(&sparse, &watermark).map_err(err)
}

/// XORs the watermark back off a resynchronized sequence.
#[pyfunction]
fn strip_watermark(received: Vec<Bit>, watermark: Vec<Bit>) -> PyResult<Vec<Bit>> {
    codec::strip_watermark(&received, &watermark).map_err(err)
}

/// Draws 4-state transition matrices until the 3-state average entropy lands
/// within `tol` of `target`; returns the matrix rows and achieved entropy.
#[pyfunction]
#[pyo3(signature = (target, tol=0.001, seed=42, max_attempts=100_000))]
fn generate_matrix(
    target: f64,
    tol: f64,
    seed: u64,
    max_attempts: usize,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let band = band_for_target(target)
        .ok_or_else(|| PyValueError::new_err(format!("target {target} is outside every band")))?;
    let mut rng = derive_rng(seed, 0, 0, Stream::Matrix, 0);
    let (a4, _, entropy) =
        generate_matrix_for_entropy(target, tol, &band, &mut rng, max_attempts).map_err(err)?;
    let rows = a4.rows().iter().map(|r| r.to_vec()).collect();
    Ok((rows, entropy))
}

/// Folds the substitution state into transmission, yielding the 3-state
/// matrix the channel and decoders run on.
#[pyfunction]
fn reduce_matrix(rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let a3 = markov::reduce_to_three_state(&matrix4(rows)?).map_err(err)?;
    Ok(a3.rows().iter().map(|r| r.to_vec()).collect())
}

/// Stationary-weighted average of the per-row entropies of a 3-state matrix.
#[pyfunction]
fn average_entropy(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    markov::average_entropy(&matrix3(rows)?).map_err(err)
}

/// Sends bits through the insertion/deletion/substitution channel derived
/// from a 4-state matrix; returns (received bits, per-bit drift, final
/// offset).
#[pyfunction]
fn transmit(
    rows: Vec<Vec<f64>>,
    i_m: usize,
    bits: Vec<Bit>,
    seed: u64,
) -> PyResult<(Vec<Bit>, Vec<i32>, i32)> {
    let bundle = MatrixBundle::new(matrix4(rows)?, i_m).map_err(err)?;
    let mut rng = derive_rng(seed, 0, 0, Stream::Channel, 0);
    let record = idsmark::channel::transmit(&bundle.a3, bundle.params.p_s, i_m, &bits, &mut rng)
        .map_err(err)?;
    Ok((record.received, record.drift, record.final_offset))
}

/// Posterior columns, drift path, resynchronized bits.
type DecodeOutput = (Vec<Vec<f64>>, Vec<i32>, Vec<Bit>);

/// Runs one decoder ("dm1", "dm2", or "fsmc") over a received sequence;
/// returns (posterior columns, drift path, resynchronized bits).
#[pyfunction]
fn decode(
    rows: Vec<Vec<f64>>,
    i_m: usize,
    decoder: &str,
    received: Vec<Bit>,
    watermark: Vec<Bit>,
) -> PyResult<DecodeOutput> {
    let kind: DecoderKind = decoder.parse().map_err(err)?;
    let bundle = MatrixBundle::new(matrix4(rows)?, i_m).map_err(err)?;
    let lattice =
        decoder::decode(kind, &bundle.params, &bundle.a3, &received, &watermark).map_err(err)?;
    let path = decoder::extract_path(&lattice, i_m);
    let final_offset = received.len() as i32 - watermark.len() as i32;
    let resynced = decoder::resynchronize(&received, &path, final_offset).map_err(err)?;
    Ok((lattice.posterior, path, resynced))
}

#[pymodule]
fn idsmark_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sparsify, m)?)?;
    m.add_function(wrap_pyfunction!(desparsify, m)?)?;
    m.add_function(wrap_pyfunction!(apply_watermark, m)?)?;
    m.add_function(wrap_pyfunction!(strip_watermark, m)?)?;
    m.add_function(wrap_pyfunction!(generate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(average_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    Ok(())
}
