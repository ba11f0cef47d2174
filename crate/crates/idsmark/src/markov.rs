//! Transition-matrix algebra for the synchronisation channel.
//!
//! The channel's error behaviour is governed by a four-state Markov chain
//! over {Transmission, Substitution, Deletion, Insertion}. Substitutions are
//! memoryless from the decoder's point of view, so the 4-state matrix is
//! reduced to a 3-state matrix over {T, D, I} by deleting the substitution
//! row and column and renormalising the remaining rows. Channel harshness is
//! summarised by the average entropy of the 3-state chain,
//! `H = Σ_i ρ_i · H_i` with `H_i = −Σ_j a_ij·log2(a_ij)` and `ρ` the
//! stationary distribution.
//!
//! Matrices are generated by drawing the error-destination entries of each
//! row uniformly from a band of predefined ranges and assigning the
//! remainder to the transmission destination; rejection sampling then pins
//! the achieved entropy to a target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row/column order of the 4-state matrix.
pub const STATES4: [&str; 4] = ["T", "S", "D", "I"];
/// Row/column order of the 3-state matrix.
pub const STATES3: [&str; 3] = ["T", "D", "I"];

/// Index of the transmission state in both matrix forms.
pub const T: usize = 0;
/// Index of the substitution state in the 4-state matrix.
pub const S4: usize = 1;
/// Indices of deletion and insertion in the 3-state matrix.
pub const D3: usize = 1;
pub const I3: usize = 2;

const ROW_SUM_TOL: f64 = 1e-9;

fn validate_rows<const N: usize>(rows: &[[f64; N]; N]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidMatrix(format!(
                    "entry {p} in row {i} is outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidMatrix(format!(
                "row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Serialized form shared by both matrix sizes.
#[derive(Serialize, Deserialize)]
struct MatrixWire {
    states: Vec<String>,
    rows: Vec<Vec<f64>>,
}

macro_rules! matrix_type {
    ($name:ident, $n:expr, $labels:expr) => {
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "MatrixWire", into = "MatrixWire")]
        pub struct $name {
            rows: [[f64; $n]; $n],
        }

        impl $name {
            /// Validates entries and row sums before accepting the matrix.
            pub fn new(rows: [[f64; $n]; $n]) -> Result<Self> {
                validate_rows(&rows)?;
                Ok(Self { rows })
            }

            pub fn rows(&self) -> &[[f64; $n]; $n] {
                &self.rows
            }

            /// Entry `a_ij`: probability of moving from state `i` to `j`.
            pub fn a(&self, i: usize, j: usize) -> f64 {
                self.rows[i][j]
            }
        }

        impl TryFrom<MatrixWire> for $name {
            type Error = Error;

            fn try_from(w: MatrixWire) -> Result<Self> {
                if w.states != $labels {
                    return Err(Error::InvalidMatrix(format!(
                        "expected states {:?}, found {:?}",
                        $labels, w.states
                    )));
                }
                let mut rows = [[0.0; $n]; $n];
                if w.rows.len() != $n {
                    return Err(Error::InvalidMatrix(format!(
                        "expected {} rows, found {}",
                        $n,
                        w.rows.len()
                    )));
                }
                for (i, row) in w.rows.iter().enumerate() {
                    if row.len() != $n {
                        return Err(Error::InvalidMatrix(format!(
                            "row {i} has {} entries, expected {}",
                            row.len(),
                            $n
                        )));
                    }
                    rows[i].copy_from_slice(row);
                }
                Self::new(rows)
            }
        }

        impl From<$name> for MatrixWire {
            fn from(m: $name) -> MatrixWire {
                MatrixWire {
                    states: $labels.iter().map(|s| s.to_string()).collect(),
                    rows: m.rows.iter().map(|r| r.to_vec()).collect(),
                }
            }
        }
    };
}

matrix_type!(TransitionMatrix4, 4, STATES4);
matrix_type!(TransitionMatrix3, 3, STATES3);

/// IID channel probabilities derived from the 4-state stationary
/// distribution, as consumed by the memoryless decoders and the channel
/// simulator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmission probability (stationary mass of T).
    pub p_t: f64,
    /// Substitution probability (stationary mass of S).
    pub p_s: f64,
    /// Deletion probability (stationary mass of D).
    pub p_d: f64,
    /// Insertion probability (stationary mass of I).
    pub p_i: f64,
    /// Transmission probability once the insertion cap is reached: `1 − p_d`.
    pub p_hat_t: f64,
    /// Probability a received (transmitted) bit differs from the watermark
    /// bit: `f·(1−p_s) + (1−f)·p_s` with `f` the sparse-codeword density.
    pub p_f: f64,
    /// Maximum number of consecutive insertions within one time step.
    pub i_m: usize,
}

/// Solves `ρA = ρ, Σρ = 1` directly.
///
/// The transposed system `(Aᵀ − I)ρ = 0` has a one-dimensional null space
/// for an irreducible chain; replacing the first equation with the
/// normalisation constraint makes it square and solvable by elimination.
pub fn stationary_distribution<const N: usize>(rows: &[[f64; N]; N]) -> Result<[f64; N]> {
    validate_rows(rows)?;

    let mut m = [[0.0; N]; N];
    let mut b = [0.0; N];
    m[0] = [1.0; N];
    b[0] = 1.0;
    for i in 1..N {
        for (j, row) in rows.iter().enumerate() {
            m[i][j] = row[i] - if i == j { 1.0 } else { 0.0 };
        }
    }

    // Gaussian elimination with partial pivoting.
    for col in 0..N {
        let pivot = (col..N)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-13 {
            return Err(Error::SingularSystem);
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        let pivot_row = m[col];
        for row in col + 1..N {
            let factor = m[row][col] / pivot_row[col];
            for (j, pv) in pivot_row.iter().enumerate().skip(col) {
                m[row][j] -= factor * pv;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let mut acc = b[row];
        for j in row + 1..N {
            acc -= m[row][j] * x[j];
        }
        x[row] = acc / m[row][row];
    }

    // Elimination round-off can leave a vanishing mass marginally negative.
    for v in &mut x {
        if *v < 0.0 {
            if *v < -1e-9 {
                return Err(Error::SingularSystem);
            }
            *v = 0.0;
        }
    }
    let total: f64 = x.iter().sum();
    for v in &mut x {
        *v /= total;
    }
    Ok(x)
}

/// Derives the IID probabilities used by the memoryless decoders from the
/// 4-state stationary distribution. `f` is the mean density of the sparse
/// codebook.
pub fn derive_iid_params(a4: &TransitionMatrix4, i_m: usize, f: f64) -> Result<ChannelParams> {
    if i_m == 0 {
        return Err(Error::InvalidConfig("i_m must be at least 1".into()));
    }
    let rho = stationary_distribution(a4.rows())?;
    let p_s = rho[S4];
    Ok(ChannelParams {
        p_t: rho[0],
        p_s,
        p_d: rho[2],
        p_i: rho[3],
        p_hat_t: 1.0 - rho[2],
        p_f: f * (1.0 - p_s) + (1.0 - f) * p_s,
        i_m,
    })
}

/// Removes the substitution state: deletes its row and column and
/// renormalises each remaining row to sum 1.
pub fn reduce_to_three_state(a4: &TransitionMatrix4) -> Result<TransitionMatrix3> {
    let keep = [0, 2, 3];
    let mut rows = [[0.0; 3]; 3];
    for (i, &ri) in keep.iter().enumerate() {
        let mass: f64 = keep.iter().map(|&rj| a4.a(ri, rj)).sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateRow(format!(
                "row {} has no mass outside the substitution column",
                STATES4[ri]
            )));
        }
        for (j, &rj) in keep.iter().enumerate() {
            rows[i][j] = a4.a(ri, rj) / mass;
        }
    }
    TransitionMatrix3::new(rows)
}

/// Entropy in bits of one matrix row, with the `0·log2(0) = 0` convention.
pub fn state_entropy(row: &[f64]) -> Result<f64> {
    let mut h = 0.0;
    for &p in row {
        if p < 0.0 {
            return Err(Error::InvalidMatrix(format!("negative probability {p}")));
        }
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    Ok(h)
}

/// Average entropy of the 3-state chain: `Σ_i ρ_i · H_i` in bits per symbol.
pub fn average_entropy(a3: &TransitionMatrix3) -> Result<f64> {
    let rho = stationary_distribution(a3.rows())?;
    let mut h = 0.0;
    for (mass, row) in rho.iter().zip(a3.rows()) {
        h += mass * state_entropy(row)?;
    }
    Ok(h)
}

/// Entry-magnitude ranges used to generate matrices for one entropy band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBand {
    pub id: u8,
    /// Average-entropy range this band is used for (bits/symbol).
    pub entropy: (f64, f64),
    /// Range for transmission-row error-destination entries.
    pub transmission_to_error: (f64, f64),
    /// Range for error-row error-destination entries.
    pub error_to_error: (f64, f64),
}

/// The three published bands.
pub const BANDS: [EntropyBand; 3] = [
    EntropyBand {
        id: 1,
        entropy: (0.01, 0.1),
        transmission_to_error: (0.0001, 0.005),
        error_to_error: (0.001, 0.05),
    },
    EntropyBand {
        id: 2,
        entropy: (0.1, 0.2),
        transmission_to_error: (0.001, 0.05),
        error_to_error: (0.01, 0.05),
    },
    EntropyBand {
        id: 3,
        entropy: (0.2, 0.3),
        transmission_to_error: (0.01, 0.05),
        error_to_error: (0.001, 0.05),
    },
];

/// Looks up a band by its 1-based id.
pub fn band_by_id(id: u8) -> Option<EntropyBand> {
    BANDS.iter().copied().find(|b| b.id == id)
}

/// Picks the band whose entropy range contains `target`. Boundaries belong
/// to the higher band, except the topmost which is closed.
pub fn band_for_target(target: f64) -> Option<EntropyBand> {
    band_for_target_in(&BANDS, target)
}

/// [`band_for_target`] over a caller-supplied table of ascending bands.
pub fn band_for_target_in(bands: &[EntropyBand], target: f64) -> Option<EntropyBand> {
    let (first, last) = (bands.first()?, bands.last()?);
    if !(first.entropy.0..=last.entropy.1).contains(&target) {
        return None;
    }
    bands.iter().copied().rev().find(|b| target >= b.entropy.0)
}

impl EntropyBand {
    pub fn validate(&self) -> Result<()> {
        if self.entropy.0 >= self.entropy.1 {
            return Err(Error::InvalidConfig(format!(
                "band {}: empty entropy range {:?}",
                self.id, self.entropy
            )));
        }
        for (lo, hi) in [self.transmission_to_error, self.error_to_error] {
            if !(0.0 < lo && lo <= hi && hi < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "band {}: invalid entry range ({lo}, {hi})",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Draws one raw 4-state matrix from a band: each row's three
/// error-destination entries are uniform in the band's applicable range and
/// the transmission-destination entry takes the remainder.
pub fn generate_matrix(band: &EntropyBand, rng: &mut impl Rng) -> Result<TransitionMatrix4> {
    band.validate()?;
    let mut rows = [[0.0; 4]; 4];
    for (i, row) in rows.iter_mut().enumerate() {
        let (lo, hi) = if i == T {
            band.transmission_to_error
        } else {
            band.error_to_error
        };
        let mut accepted = false;
        for _ in 0..1000 {
            let mut sum = 0.0;
            for entry in &mut row[1..] {
                *entry = rng.random_range(lo..hi);
                sum += *entry;
            }
            // Cannot go negative with the published ranges (3·hi < 1), but
            // guard against caller-supplied bands.
            if sum < 1.0 {
                row[0] = 1.0 - sum;
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::InvalidConfig(format!(
                "band {} ranges leave no transmission mass",
                band.id
            )));
        }
        // Nudge the remainder entry so the floating-point row sum is exact.
        for _ in 0..4 {
            let total: f64 = row.iter().sum();
            if total == 1.0 {
                break;
            }
            row[0] += 1.0 - total;
        }
    }
    TransitionMatrix4::new(rows)
}

/// Rejection-samples [`generate_matrix`] until the reduced matrix's average
/// entropy is within `tol` of `target`. Returns the 4-state matrix, its
/// 3-state reduction, and the achieved entropy.
pub fn generate_matrix_for_entropy(
    target: f64,
    tol: f64,
    band: &EntropyBand,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<(TransitionMatrix4, TransitionMatrix3, f64)> {
    if tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if !(band.entropy.0..=band.entropy.1).contains(&target) {
        return Err(Error::InvalidConfig(format!(
            "target {target} is outside band {}'s entropy range {:?}",
            band.id, band.entropy
        )));
    }
    if max_attempts == 0 {
        return Err(Error::InvalidConfig(
            "max_attempts must be at least 1".into(),
        ));
    }
    let mut best: Option<(TransitionMatrix4, TransitionMatrix3, f64)> = None;
    for _ in 0..max_attempts {
        let a4 = generate_matrix(band, rng)?;
        let a3 = reduce_to_three_state(&a4)?;
        let h = average_entropy(&a3)?;
        if (h - target).abs() <= tol {
            return Ok((a4, a3, h));
        }
        if best
            .as_ref()
            .map(|(_, _, bh)| (h - target).abs() < (bh - target).abs())
            .unwrap_or(true)
        {
            best = Some((a4, a3, h));
        }
    }
    let (best_m, _, best_entropy) = best.expect("max_attempts is at least 1");
    Err(Error::EntropyTargetNotFound {
        target,
        tol,
        attempts: max_attempts,
        best_entropy,
        best: Box::new(best_m),
    })
}

/// Rejection-samples [`generate_matrix`] until the achieved average entropy
/// lies anywhere inside the band's own entropy range.
///
/// The raw per-entry draws land well outside the band's nominal range more
/// often than not for the upper bands, so "a band-2 matrix" always means a
/// matrix constrained this way (or pinned tighter via
/// [`generate_matrix_for_entropy`]).
pub fn generate_matrix_in_band(
    band: &EntropyBand,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<(TransitionMatrix4, TransitionMatrix3, f64)> {
    let (lo, hi) = band.entropy;
    generate_matrix_for_entropy((lo + hi) / 2.0, (hi - lo) / 2.0, band, rng, max_attempts)
}

/// The insertion row once the per-step insertion cap is reached: the
/// insertion-to-insertion entry is zeroed and the remaining mass is
/// renormalised between transmission and deletion.
pub fn cap_insertion_row(a3: &TransitionMatrix3) -> Result<[f64; 3]> {
    let row = a3.rows()[I3];
    let keep = row[T] + row[D3];
    if keep <= 0.0 {
        return Err(Error::DegenerateRow(
            "insertion row has no transmission or deletion mass".into(),
        ));
    }
    Ok([row[T] / keep, row[D3] / keep, 0.0])
}
