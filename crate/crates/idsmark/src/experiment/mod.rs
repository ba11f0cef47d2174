//! Seeded experiment harness: matrix generation, end-to-end runs, entropy
//! sweeps, post-hoc analyses, and CSV input/output.
//!
//! Every random draw comes from a ChaCha stream derived from
//! `(base seed, entropy index, matrix index, stream tag, run index)`, so any
//! run can be reproduced in isolation and results are independent of worker
//! scheduling. Sweeps fan out over a task list in parallel, collect in task
//! order, and aggregate sequentially, which keeps output files byte-identical
//! across thread counts.

pub mod plots;

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::codec::{Codebook, CODEWORD_BITS, SYMBOL_BITS};
use crate::decoder::{self, DecoderKind, WindowTable};
use crate::markov::{
    self, band_for_target_in, ChannelParams, EntropyBand, TransitionMatrix3, TransitionMatrix4,
    BANDS,
};
use crate::metrics::RunMetrics;
use crate::{Bit, Error, Result};

/// Full description of a sweep; serializable so a JSON file can override any
/// subset of the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    /// Message length in bits; the sparsified length is `5/4` of this.
    pub message_bits: usize,
    pub i_m: usize,
    pub entropy_targets: Vec<f64>,
    pub entropy_tol: f64,
    pub matrices_per_entropy: usize,
    pub runs_per_matrix: usize,
    pub constant_iterations: usize,
    pub max_attempts: usize,
    pub decoders: Vec<DecoderKind>,
    pub bands: Vec<EntropyBand>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    /// Full-scale sweep: entropy grid 0.01..=0.30 step 0.01, 20 matrices of
    /// 100 runs each, 5000 constant-entropy iterations.
    pub fn paper() -> Self {
        ExperimentConfig {
            base_seed: 42,
            message_bits: 480,
            i_m: 1,
            entropy_targets: (1..=30).map(|i| i as f64 / 100.0).collect(),
            entropy_tol: 0.001,
            matrices_per_entropy: 20,
            runs_per_matrix: 100,
            constant_iterations: 5000,
            max_attempts: 100_000,
            decoders: DecoderKind::ALL.to_vec(),
            bands: BANDS.to_vec(),
            out_dir: PathBuf::from("out"),
        }
    }

    /// Reduced sweep sized for interactive use and the acceptance suite:
    /// four representative targets, 5 matrices of 50 runs, 500 iterations.
    pub fn desk() -> Self {
        ExperimentConfig {
            entropy_targets: vec![0.02, 0.074, 0.15, 0.25],
            matrices_per_entropy: 5,
            runs_per_matrix: 50,
            constant_iterations: 500,
            ..Self::paper()
        }
    }

    /// Watermark length Γ implied by the message length.
    pub fn gamma(&self) -> usize {
        self.message_bits / SYMBOL_BITS * CODEWORD_BITS
    }

    pub fn validate(&self) -> Result<()> {
        if self.message_bits == 0 || self.message_bits % SYMBOL_BITS != 0 {
            return Err(Error::InvalidConfig(format!(
                "message_bits must be a positive multiple of {SYMBOL_BITS}, got {}",
                self.message_bits
            )));
        }
        if self.i_m == 0 {
            return Err(Error::InvalidConfig("i_m must be at least 1".into()));
        }
        if self.entropy_tol <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "entropy_tol must be positive, got {}",
                self.entropy_tol
            )));
        }
        for (name, count) in [
            ("matrices_per_entropy", self.matrices_per_entropy),
            ("runs_per_matrix", self.runs_per_matrix),
            ("constant_iterations", self.constant_iterations),
            ("max_attempts", self.max_attempts),
        ] {
            if count == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.decoders.is_empty() {
            return Err(Error::InvalidConfig("no decoders selected".into()));
        }
        let mut seen = Vec::new();
        for d in &self.decoders {
            if seen.contains(d) {
                return Err(Error::InvalidConfig(format!("decoder {d} listed twice")));
            }
            seen.push(*d);
        }
        if self.bands.is_empty() {
            return Err(Error::InvalidConfig("band table is empty".into()));
        }
        for band in &self.bands {
            band.validate()?;
        }
        for pair in self.bands.windows(2) {
            if pair[0].entropy.1 > pair[1].entropy.0 {
                return Err(Error::InvalidConfig(format!(
                    "bands {} and {} overlap or are out of order",
                    pair[0].id, pair[1].id
                )));
            }
        }
        if self.entropy_targets.is_empty() {
            return Err(Error::InvalidConfig("no entropy targets".into()));
        }
        for &t in &self.entropy_targets {
            if band_for_target_in(&self.bands, t).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "entropy target {t} is outside every band"
                )));
            }
        }
        Ok(())
    }
}

/// Independent random streams hanging off one `(seed, entropy, matrix, run)`
/// coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Matrix = 1,
    Data = 2,
    Watermark = 3,
    Channel = 4,
}

/// Derives the ChaCha stream for one coordinate. The matrix index and stream
/// tag share a word (tag in the low byte), leaving full words for the other
/// coordinates.
pub fn derive_rng(
    base_seed: u64,
    entropy_idx: usize,
    matrix_idx: usize,
    stream: Stream,
    run_idx: usize,
) -> ChaCha12Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&base_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&(entropy_idx as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&(((matrix_idx as u64) << 8) | stream as u64).to_le_bytes());
    seed[24..32].copy_from_slice(&(run_idx as u64).to_le_bytes());
    ChaCha12Rng::from_seed(seed)
}

/// One generated matrix with everything the pipeline needs to use it.
#[derive(Clone, Debug)]
pub struct MatrixBundle {
    pub a4: TransitionMatrix4,
    pub a3: TransitionMatrix3,
    pub params: ChannelParams,
    pub window: WindowTable,
    pub entropy: f64,
}

impl MatrixBundle {
    pub fn new(a4: TransitionMatrix4, i_m: usize) -> Result<Self> {
        let a3 = markov::reduce_to_three_state(&a4)?;
        let entropy = markov::average_entropy(&a3)?;
        let params = markov::derive_iid_params(&a4, i_m, Codebook::standard().mean_density())?;
        let window = decoder::build_window_table(&a3, i_m)?;
        Ok(MatrixBundle {
            a4,
            a3,
            params,
            window,
            entropy,
        })
    }

    /// Generates the bundle for one `(entropy, matrix)` coordinate of a
    /// sweep.
    pub fn generate(cfg: &ExperimentConfig, entropy_idx: usize, matrix_idx: usize) -> Result<Self> {
        let target = cfg.entropy_targets[entropy_idx];
        let band = band_for_target_in(&cfg.bands, target).ok_or_else(|| {
            Error::InvalidConfig(format!("entropy target {target} is outside every band"))
        })?;
        let mut rng = derive_rng(cfg.base_seed, entropy_idx, matrix_idx, Stream::Matrix, 0);
        let (a4, _, _) = markov::generate_matrix_for_entropy(
            target,
            cfg.entropy_tol,
            &band,
            &mut rng,
            cfg.max_attempts,
        )?;
        Self::new(a4, cfg.i_m)
    }
}

/// Outcome of one decoder on one transmission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub entropy_target: f64,
    pub entropy_achieved: f64,
    pub matrix_id: usize,
    pub run_id: usize,
    pub decoder: DecoderKind,
    pub ber: f64,
    pub niis: f64,
    pub sao: u64,
    pub realized_pd: f64,
    pub realized_pi: f64,
    pub realized_ps: f64,
    pub final_offset: i32,
    pub failed: bool,
}

/// Coordinates identifying a run within a sweep.
#[derive(Clone, Copy, Debug)]
pub struct RunIds {
    pub entropy_target: f64,
    pub matrix_id: usize,
    pub run_id: usize,
}

fn random_bits(len: usize, rng: &mut impl Rng) -> Vec<Bit> {
    (0..len).map(|_| rng.random_range(0..=1) as Bit).collect()
}

/// Encodes one fresh message, sends it through one channel realisation, and
/// decodes the same received sequence with every selected decoder.
///
/// A decoder failure (a zero lattice column) is recorded in the result with
/// the all-zero drift path standing in for the estimate; it does not abort
/// the run.
pub fn run_single(
    bundle: &MatrixBundle,
    message_bits: usize,
    watermark: &[Bit],
    decoders: &[DecoderKind],
    data_rng: &mut ChaCha12Rng,
    channel_rng: &mut ChaCha12Rng,
    ids: RunIds,
) -> Result<Vec<RunResult>> {
    let codebook = Codebook::standard();
    let message = random_bits(message_bits, data_rng);
    let sparse = codebook.sparsify(&message)?;
    if sparse.len() != watermark.len() {
        return Err(Error::LengthMismatch(format!(
            "sparsified message has {} bits but watermark has {}",
            sparse.len(),
            watermark.len()
        )));
    }
    let transmitted = crate::codec::apply_watermark(&sparse, watermark)?;
    let record = channel::transmit(
        &bundle.a3,
        bundle.params.p_s,
        bundle.params.i_m,
        &transmitted,
        channel_rng,
    )?;

    let mut results = Vec::with_capacity(decoders.len());
    for &kind in decoders {
        let decoded = match kind {
            DecoderKind::Dm1 => {
                decoder::forward_backward_dm1(&bundle.params, &record.received, watermark)
            }
            DecoderKind::Dm2 => {
                decoder::forward_backward_dm2(&bundle.params, &record.received, watermark)
            }
            DecoderKind::Fsmc => decoder::forward_backward_fsmc(
                &bundle.params,
                &bundle.window,
                &record.received,
                watermark,
            ),
        };
        let (path, failed) = match decoded {
            Ok(lattice) => (decoder::extract_path(&lattice, bundle.params.i_m), false),
            Err(Error::DecoderFailure { .. }) => (vec![0; watermark.len()], true),
            Err(e) => return Err(e),
        };
        let resynced = decoder::resynchronize(&record.received, &path, record.final_offset)?;
        let stripped = crate::codec::strip_watermark(&resynced, watermark)?;
        let decoded_message = codebook.desparsify(&stripped)?;
        let m = RunMetrics::compute(&message, &decoded_message, &record.drift, &path)?;
        results.push(RunResult {
            entropy_target: ids.entropy_target,
            entropy_achieved: bundle.entropy,
            matrix_id: ids.matrix_id,
            run_id: ids.run_id,
            decoder: kind,
            ber: m.ber,
            niis: m.niis,
            sao: m.sao,
            realized_pd: record.realized_pd(),
            realized_pi: record.realized_pi(),
            realized_ps: record.realized_ps(),
            final_offset: record.final_offset,
            failed,
        });
    }
    Ok(results)
}

/// One `overall.csv` row: metric means for one `(entropy target, decoder)`
/// cell, or an empty-means warning row when matrix generation failed for the
/// target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub entropy_target: f64,
    pub entropy_achieved_mean: Option<f64>,
    pub decoder: DecoderKind,
    pub mean_ber: Option<f64>,
    pub mean_niis: Option<f64>,
    pub mean_sao: Option<f64>,
    pub n_matrices: usize,
    pub n_runs: usize,
    pub base_seed: u64,
}

/// Fresh matrices and messages per target: the trend experiment.
pub fn sweep_overall(cfg: &ExperimentConfig) -> Result<Vec<OverallRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (e_idx, &target) in cfg.entropy_targets.iter().enumerate() {
        let mut bundles = Vec::with_capacity(cfg.matrices_per_entropy);
        let mut generation_failed = false;
        for m_idx in 0..cfg.matrices_per_entropy {
            match MatrixBundle::generate(cfg, e_idx, m_idx) {
                Ok(b) => bundles.push(b),
                Err(Error::EntropyTargetNotFound { best_entropy, .. }) => {
                    eprintln!(
                        "warning: no matrix within {} of entropy {target} \
                         (best attempt {best_entropy}); target skipped",
                        cfg.entropy_tol
                    );
                    generation_failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if generation_failed {
            for &decoder in &cfg.decoders {
                rows.push(OverallRow {
                    entropy_target: target,
                    entropy_achieved_mean: None,
                    decoder,
                    mean_ber: None,
                    mean_niis: None,
                    mean_sao: None,
                    n_matrices: 0,
                    n_runs: 0,
                    base_seed: cfg.base_seed,
                });
            }
            continue;
        }

        let tasks: Vec<(usize, usize)> = (0..cfg.matrices_per_entropy)
            .flat_map(|m| (0..cfg.runs_per_matrix).map(move |r| (m, r)))
            .collect();
        let per_run: Vec<Vec<RunResult>> = tasks
            .par_iter()
            .map(|&(m_idx, run_idx)| {
                let mut data_rng = derive_rng(cfg.base_seed, e_idx, m_idx, Stream::Data, run_idx);
                let mut channel_rng =
                    derive_rng(cfg.base_seed, e_idx, m_idx, Stream::Channel, run_idx);
                let mut watermark_rng =
                    derive_rng(cfg.base_seed, e_idx, m_idx, Stream::Watermark, run_idx);
                let watermark = random_bits(cfg.gamma(), &mut watermark_rng);
                run_single(
                    &bundles[m_idx],
                    cfg.message_bits,
                    &watermark,
                    &cfg.decoders,
                    &mut data_rng,
                    &mut channel_rng,
                    RunIds {
                        entropy_target: target,
                        matrix_id: m_idx,
                        run_id: run_idx,
                    },
                )
            })
            .collect::<Result<_>>()?;

        let achieved_mean = bundles.iter().map(|b| b.entropy).sum::<f64>() / bundles.len() as f64;
        let n = tasks.len() as f64;
        for &decoder in &cfg.decoders {
            let (mut ber, mut niis, mut sao) = (0.0, 0.0, 0.0);
            for result in per_run.iter().flatten().filter(|r| r.decoder == decoder) {
                ber += result.ber;
                niis += result.niis;
                sao += result.sao as f64;
            }
            rows.push(OverallRow {
                entropy_target: target,
                entropy_achieved_mean: Some(achieved_mean),
                decoder,
                mean_ber: Some(ber / n),
                mean_niis: Some(niis / n),
                mean_sao: Some(sao / n),
                n_matrices: cfg.matrices_per_entropy,
                n_runs: cfg.runs_per_matrix,
                base_seed: cfg.base_seed,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.entropy_target
            .total_cmp(&b.entropy_target)
            .then(a.decoder.cmp(&b.decoder))
    });
    Ok(rows)
}

/// One `constant.csv` row: a single run at a fixed matrix and watermark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub entropy: f64,
    pub matrix_id: usize,
    pub run_id: usize,
    pub decoder: DecoderKind,
    pub ber: f64,
    pub niis: f64,
    pub sao: u64,
    pub realized_pd: f64,
    pub realized_pi: f64,
    pub realized_ps: f64,
    pub final_offset: i32,
    pub failed: bool,
}

impl ConstantRow {
    fn from_result(r: &RunResult) -> Self {
        ConstantRow {
            entropy: r.entropy_target,
            matrix_id: r.matrix_id,
            run_id: r.run_id,
            decoder: r.decoder,
            ber: r.ber,
            niis: r.niis,
            sao: r.sao,
            realized_pd: r.realized_pd,
            realized_pi: r.realized_pi,
            realized_ps: r.realized_ps,
            final_offset: r.final_offset,
            failed: r.failed,
        }
    }
}

/// The watermark shared by every constant-entropy iteration, at every
/// target: stream coordinate `(base seed, 0, 0, Watermark, 0)`.
pub fn constant_watermark(cfg: &ExperimentConfig) -> Vec<Bit> {
    let mut rng = derive_rng(cfg.base_seed, 0, 0, Stream::Watermark, 0);
    random_bits(cfg.gamma(), &mut rng)
}

/// One matrix per target, one watermark everywhere, per-run rows: the
/// realized-rate experiment.
pub fn sweep_constant(cfg: &ExperimentConfig) -> Result<Vec<ConstantRow>> {
    cfg.validate()?;
    let watermark = constant_watermark(cfg);
    let mut rows = Vec::new();
    for (e_idx, &target) in cfg.entropy_targets.iter().enumerate() {
        let bundle = match MatrixBundle::generate(cfg, e_idx, 0) {
            Ok(b) => b,
            Err(Error::EntropyTargetNotFound { best_entropy, .. }) => {
                eprintln!(
                    "warning: no matrix within {} of entropy {target} \
                     (best attempt {best_entropy}); target skipped",
                    cfg.entropy_tol
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        let per_run: Vec<Vec<RunResult>> = (0..cfg.constant_iterations)
            .into_par_iter()
            .map(|run_idx| {
                let mut data_rng = derive_rng(cfg.base_seed, e_idx, 0, Stream::Data, run_idx);
                let mut channel_rng = derive_rng(cfg.base_seed, e_idx, 0, Stream::Channel, run_idx);
                run_single(
                    &bundle,
                    cfg.message_bits,
                    &watermark,
                    &cfg.decoders,
                    &mut data_rng,
                    &mut channel_rng,
                    RunIds {
                        entropy_target: target,
                        matrix_id: 0,
                        run_id: run_idx,
                    },
                )
            })
            .collect::<Result<_>>()?;
        rows.extend(per_run.iter().flatten().map(ConstantRow::from_result));
    }
    rows.sort_by(|a, b| {
        a.entropy
            .total_cmp(&b.entropy)
            .then(a.matrix_id.cmp(&b.matrix_id))
            .then(a.run_id.cmp(&b.run_id))
            .then(a.decoder.cmp(&b.decoder))
    });
    Ok(rows)
}

/// One row of the decoder-comparison histogram: for runs whose realized
/// parameter landed on `value`, how often each decoder had strictly lower
/// NIIS. `stationary` is the parameter's expected value under the target's
/// generating matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLevelRow {
    pub entropy: f64,
    pub parameter: String,
    pub value: f64,
    pub dm1_better: u64,
    pub fsmc_better: u64,
    pub tie: u64,
    pub stationary: f64,
}

/// Compares DM1 and FSMC per realized error level.
///
/// Needs both decoders present in the rows; ties are exact NIIS equality.
/// The stationary reference values are recomputed from the config's
/// deterministic per-target matrices, so the config must be the one that
/// produced the rows.
pub fn error_level_analysis(
    cfg: &ExperimentConfig,
    rows: &[ConstantRow],
) -> Result<Vec<ErrorLevelRow>> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no constant-entropy rows".into()));
    }
    use std::collections::BTreeMap;

    struct RunPair {
        dm1: Option<f64>,
        fsmc: Option<f64>,
        realized: [f64; 3],
    }
    let mut pairs: BTreeMap<(u64, usize, usize), RunPair> = BTreeMap::new();
    for row in rows {
        let entry = pairs
            .entry((row.entropy.to_bits(), row.matrix_id, row.run_id))
            .or_insert(RunPair {
                dm1: None,
                fsmc: None,
                realized: [row.realized_pd, row.realized_pi, row.realized_ps],
            });
        match row.decoder {
            DecoderKind::Dm1 => entry.dm1 = Some(row.niis),
            DecoderKind::Fsmc => entry.fsmc = Some(row.niis),
            DecoderKind::Dm2 => {}
        }
    }

    let mut stationary_by_entropy: BTreeMap<u64, [f64; 3]> = BTreeMap::new();
    for &(entropy_bits, _, _) in pairs.keys() {
        if stationary_by_entropy.contains_key(&entropy_bits) {
            continue;
        }
        let entropy = f64::from_bits(entropy_bits);
        let e_idx = cfg
            .entropy_targets
            .iter()
            .position(|&t| t == entropy)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "rows mention entropy {entropy}, which is not among the \
                     config's targets; pass the config that produced them"
                ))
            })?;
        let bundle = MatrixBundle::generate(cfg, e_idx, 0)?;
        stationary_by_entropy.insert(
            entropy_bits,
            [bundle.params.p_d, bundle.params.p_i, bundle.params.p_s],
        );
    }

    // (entropy, parameter, value) → (dm1 wins, fsmc wins, ties)
    let mut counts: BTreeMap<(u64, usize, u64), (u64, u64, u64)> = BTreeMap::new();
    let mut compared = false;
    for ((entropy_bits, _, _), pair) in &pairs {
        let (Some(dm1), Some(fsmc)) = (pair.dm1, pair.fsmc) else {
            continue;
        };
        compared = true;
        for (p_idx, &value) in pair.realized.iter().enumerate() {
            let slot = counts
                .entry((*entropy_bits, p_idx, value.to_bits()))
                .or_insert((0, 0, 0));
            if dm1 < fsmc {
                slot.0 += 1;
            } else if fsmc < dm1 {
                slot.1 += 1;
            } else {
                slot.2 += 1;
            }
        }
    }
    if !compared {
        return Err(Error::EmptyInput(
            "error-level analysis needs runs decoded by both dm1 and fsmc".into(),
        ));
    }

    const PARAMETERS: [&str; 3] = ["pd", "pi", "ps"];
    Ok(counts
        .into_iter()
        .map(
            |((entropy_bits, p_idx, value_bits), (dm1, fsmc, tie))| ErrorLevelRow {
                entropy: f64::from_bits(entropy_bits),
                parameter: PARAMETERS[p_idx].to_string(),
                value: f64::from_bits(value_bits),
                dm1_better: dm1,
                fsmc_better: fsmc,
                tie,
                stationary: stationary_by_entropy[&entropy_bits][p_idx],
            },
        )
        .collect())
}

/// One row of the substitution-effect table: mean NIIS of one decoder over
/// runs with exactly `substitutions` substituted bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsEffectRow {
    pub entropy: f64,
    pub substitutions: u64,
    pub p_s_value: f64,
    pub decoder: DecoderKind,
    pub mean_niis: Option<f64>,
    pub n_runs: u64,
}

/// Bins runs by realized substitution count (0 through 4) and averages NIIS
/// per decoder per bin. Empty bins are reported with a count of 0.
pub fn ps_effect_analysis(
    cfg: &ExperimentConfig,
    rows: &[ConstantRow],
) -> Result<Vec<PsEffectRow>> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput("no constant-entropy rows".into()));
    }
    let gamma = cfg.gamma() as f64;
    let mut entropies: Vec<u64> = rows.iter().map(|r| r.entropy.to_bits()).collect();
    entropies.sort_unstable();
    entropies.dedup();
    let decoders: Vec<DecoderKind> = DecoderKind::ALL
        .into_iter()
        .filter(|d| rows.iter().any(|r| r.decoder == *d))
        .collect();

    let mut out = Vec::new();
    for &entropy_bits in &entropies {
        let entropy = f64::from_bits(entropy_bits);
        for substitutions in 0..=4u64 {
            for &decoder in &decoders {
                let mut total = 0.0;
                let mut n = 0u64;
                for row in rows {
                    if row.entropy.to_bits() != entropy_bits || row.decoder != decoder {
                        continue;
                    }
                    if (row.realized_ps * gamma).round() as u64 == substitutions {
                        total += row.niis;
                        n += 1;
                    }
                }
                out.push(PsEffectRow {
                    entropy,
                    substitutions,
                    p_s_value: substitutions as f64 / gamma,
                    decoder,
                    mean_niis: (n > 0).then(|| total / n as f64),
                    n_runs: n,
                });
            }
        }
    }
    Ok(out)
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)?;
    Ok((writer, path))
}

pub fn write_overall_csv(dir: &Path, rows: &[OverallRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "overall.csv")?;
    w.write_record([
        "entropy_target",
        "entropy_achieved_mean",
        "decoder",
        "mean_ber",
        "mean_niis",
        "mean_sao",
        "n_matrices",
        "n_runs",
        "base_seed",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_constant_csv(dir: &Path, rows: &[ConstantRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "constant.csv")?;
    w.write_record([
        "entropy",
        "matrix_id",
        "run_id",
        "decoder",
        "ber",
        "niis",
        "sao",
        "realized_pd",
        "realized_pi",
        "realized_ps",
        "final_offset",
        "failed",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_error_level_csv(dir: &Path, rows: &[ErrorLevelRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "errors.csv")?;
    w.write_record([
        "entropy",
        "parameter",
        "value",
        "dm1_better",
        "fsmc_better",
        "tie",
        "stationary",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_ps_effect_csv(dir: &Path, rows: &[PsEffectRow]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, "ps_effect.csv")?;
    w.write_record([
        "entropy",
        "substitutions",
        "p_s_value",
        "decoder",
        "mean_niis",
        "n_runs",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn read_overall_csv(path: &Path) -> Result<Vec<OverallRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn read_constant_csv(path: &Path) -> Result<Vec<ConstantRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// On-disk form of a generated matrix, as written by matrix generation and
/// consumed by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub matrix: TransitionMatrix4,
    pub entropy: f64,
    pub target: f64,
    pub band: u8,
}

pub fn write_matrix_file(path: &Path, file: &MatrixFile) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, serde_json::to_string_pretty(file)?)?;
    Ok(())
}

pub fn read_matrix_file(path: &Path) -> Result<MatrixFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Runs `runs` independent transmissions of a stored matrix and reports
/// per-run rows labelled with its achieved entropy.
pub fn simulate(
    file: &MatrixFile,
    runs: usize,
    base_seed: u64,
    message_bits: usize,
    i_m: usize,
    decoders: &[DecoderKind],
) -> Result<Vec<ConstantRow>> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    if decoders.is_empty() {
        return Err(Error::InvalidConfig("no decoders selected".into()));
    }
    let bundle = MatrixBundle::new(file.matrix.clone(), i_m)?;
    let gamma = message_bits / SYMBOL_BITS * CODEWORD_BITS;
    let per_run: Vec<Vec<RunResult>> = (0..runs)
        .into_par_iter()
        .map(|run_idx| {
            let mut data_rng = derive_rng(base_seed, 0, 0, Stream::Data, run_idx);
            let mut channel_rng = derive_rng(base_seed, 0, 0, Stream::Channel, run_idx);
            let mut watermark_rng = derive_rng(base_seed, 0, 0, Stream::Watermark, run_idx);
            let watermark = random_bits(gamma, &mut watermark_rng);
            run_single(
                &bundle,
                message_bits,
                &watermark,
                decoders,
                &mut data_rng,
                &mut channel_rng,
                RunIds {
                    entropy_target: bundle.entropy,
                    matrix_id: 0,
                    run_id: run_idx,
                },
            )
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<ConstantRow> = per_run
        .iter()
        .flatten()
        .map(ConstantRow::from_result)
        .collect();
    rows.sort_by(|a, b| a.run_id.cmp(&b.run_id).then(a.decoder.cmp(&b.decoder)));
    Ok(rows)
}

/// Rebuilds the exact transmission of one [`simulate`] run so callers can
/// inspect the received sequence a reported row came from.
pub fn replay_run(
    file: &MatrixFile,
    base_seed: u64,
    message_bits: usize,
    i_m: usize,
    run_idx: usize,
) -> Result<(MatrixBundle, Vec<Bit>, channel::TransmissionRecord)> {
    let bundle = MatrixBundle::new(file.matrix.clone(), i_m)?;
    let gamma = message_bits / SYMBOL_BITS * CODEWORD_BITS;
    let mut watermark_rng = derive_rng(base_seed, 0, 0, Stream::Watermark, run_idx);
    let watermark = random_bits(gamma, &mut watermark_rng);
    let mut data_rng = derive_rng(base_seed, 0, 0, Stream::Data, run_idx);
    let message = random_bits(message_bits, &mut data_rng);
    let sparse = Codebook::standard().sparsify(&message)?;
    let transmitted = crate::codec::apply_watermark(&sparse, &watermark)?;
    let mut channel_rng = derive_rng(base_seed, 0, 0, Stream::Channel, run_idx);
    let record = channel::transmit(
        &bundle.a3,
        bundle.params.p_s,
        i_m,
        &transmitted,
        &mut channel_rng,
    )?;
    Ok((bundle, watermark, record))
}
