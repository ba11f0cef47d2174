//! Forward-backward decoders over the synchronisation drift lattice.
//!
//! The hidden state at time `n` is the drift `ψ_n` (insertions minus
//! deletions) accumulated before bit `n` entered the channel. All three
//! decoders share the lattice shape: states `−x_max..=x_max`, a forward pass
//! pinned to drift 0 at time 1, a backward pass pinned to the observed final
//! offset at time Γ, and per-column normalisation. They differ in the step
//! weight:
//!
//! * `dm1` uses the first-order step `α_jk + β_jk·ζ`, where `α`/`β` are the
//!   IID deletion/transmission weights for a drift change of `k−j` and `ζ`
//!   scores the received bit against the watermark.
//! * `dm2` extends each step with an unweighted sum of first-order weights
//!   over a second, earlier interval.
//! * `fsmc` replaces the IID weights with window-table terms built from the
//!   3-state transition matrix, coupling two adjacent intervals through the
//!   chain's memory.
//!
//! A step's transmitted bit always lives at received index `n + k` where `n`
//! is the queued-bit index and `k` the drift *after* the step; both passes
//! score it there. Steps whose transmitted bit falls outside the received
//! sequence contribute nothing.

use serde::{Deserialize, Serialize};

use crate::markov::{ChannelParams, TransitionMatrix3, T};
use crate::{Bit, Error, Result};

/// Which forward-backward variant to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Dm1,
    Dm2,
    Fsmc,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 3] = [DecoderKind::Dm1, DecoderKind::Dm2, DecoderKind::Fsmc];

    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Dm1 => "dm1",
            DecoderKind::Dm2 => "dm2",
            DecoderKind::Fsmc => "fsmc",
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dm1" => Ok(DecoderKind::Dm1),
            "dm2" => Ok(DecoderKind::Dm2),
            "fsmc" => Ok(DecoderKind::Fsmc),
            other => Err(Error::InvalidConfig(format!(
                "unknown decoder {other:?} (expected dm1, dm2, or fsmc)"
            ))),
        }
    }
}

/// Half-width of the drift lattice: five times the absolute final offset,
/// or five when the offset is zero.
pub fn x_max_for_offset(final_offset: i32) -> usize {
    if final_offset == 0 {
        5
    } else {
        5 * final_offset.unsigned_abs() as usize
    }
}

/// The filled lattice: forward, backward, and posterior probabilities per
/// time column, each column normalised to sum 1.
#[derive(Clone, Debug)]
pub struct DriftLattice {
    x_max: usize,
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
    pub posterior: Vec<Vec<f64>>,
}

impl DriftLattice {
    pub fn gamma(&self) -> usize {
        self.forward.len()
    }

    pub fn x_max(&self) -> usize {
        self.x_max
    }

    pub fn n_states(&self) -> usize {
        2 * self.x_max + 1
    }

    pub fn drift_at(&self, state: usize) -> i32 {
        state as i32 - self.x_max as i32
    }

    pub fn state_of(&self, drift: i32) -> Option<usize> {
        let s = drift + self.x_max as i32;
        (0..self.n_states() as i32)
            .contains(&s)
            .then_some(s as usize)
    }

    /// Debug dump: one CSV row per (pass, drift state), one column per time
    /// step.
    pub fn dump_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        write!(out, "pass,drift")?;
        for n in 1..=self.gamma() {
            write!(out, ",t{n}")?;
        }
        writeln!(out)?;
        for (pass, columns) in [
            ("forward", &self.forward),
            ("backward", &self.backward),
            ("posterior", &self.posterior),
        ] {
            for s in 0..self.n_states() {
                write!(out, "{pass},{}", self.drift_at(s))?;
                for col in columns {
                    write!(out, ",{}", col[s])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// One multiplicative term of a window-table cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowTerm {
    pub coeff: f64,
    /// Whether the second interval's sequence ends in a transmission, in
    /// which case the watermark factor applies to this term.
    pub ends_in_transmission: bool,
}

/// Second-order transition terms over two adjacent time intervals, keyed by
/// the number of bits each interval emitted (drift change plus one).
#[derive(Clone, Debug)]
pub struct WindowTable {
    i_m: usize,
    cells: Vec<Vec<Vec<WindowTerm>>>,
}

impl WindowTable {
    pub fn i_m(&self) -> usize {
        self.i_m
    }

    /// Terms for `b1` bits in the first interval and `b2` in the second;
    /// empty outside `0..=i_m+1`.
    pub fn terms(&self, b1: i32, b2: i32) -> &[WindowTerm] {
        if b1 < 0 || b2 < 0 {
            return &[];
        }
        self.cells
            .get(b1 as usize)
            .and_then(|row| row.get(b2 as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Total weight of a cell with flagged terms scaled by `xi`.
    fn eval(&self, b1: i32, b2: i32, xi: Option<f64>) -> f64 {
        self.terms(b1, b2)
            .iter()
            .map(|t| {
                if t.ends_in_transmission {
                    xi.map_or(0.0, |x| t.coeff * x)
                } else {
                    t.coeff
                }
            })
            .sum()
    }
}

/// Event sequences that emit `bits` bits within one interval: `bits−1`
/// insertions followed by a transmission, and `bits` insertions followed by
/// a deletion, state-indexed and capped at `i_m` insertions.
fn sequences_for_bits(bits: usize, i_m: usize) -> Vec<Vec<usize>> {
    use crate::markov::{D3, I3};
    let mut seqs = Vec::new();
    if bits >= 1 && bits - 1 <= i_m {
        let mut s = vec![I3; bits - 1];
        s.push(T);
        seqs.push(s);
    }
    if bits <= i_m {
        let mut s = vec![I3; bits];
        s.push(D3);
        seqs.push(s);
    }
    seqs
}

/// Builds the window table from the 3-state matrix.
///
/// Each cell `(b1, b2)` sums over the event-sequence pairs of the two
/// intervals; a term multiplies the transitions internal to the first
/// sequence, the bridging transition from its last event to the second
/// sequence's first, the transitions internal to the second sequence, and
/// `2^{−m}` for the `m` insertions of the second interval.
pub fn build_window_table(a3: &TransitionMatrix3, i_m: usize) -> Result<WindowTable> {
    if i_m == 0 {
        return Err(Error::InvalidConfig("i_m must be at least 1".into()));
    }
    let internal = |seq: &[usize]| -> f64 { seq.windows(2).map(|w| a3.a(w[0], w[1])).product() };
    let mut cells = Vec::with_capacity(i_m + 2);
    for b1 in 0..=i_m + 1 {
        let mut row = Vec::with_capacity(i_m + 2);
        for b2 in 0..=i_m + 1 {
            let mut terms = Vec::new();
            for seq1 in sequences_for_bits(b1, i_m) {
                for seq2 in sequences_for_bits(b2, i_m) {
                    let inserts2 = seq2.iter().filter(|&&s| s == crate::markov::I3).count();
                    let coeff = internal(&seq1)
                        * a3.a(*seq1.last().unwrap(), seq2[0])
                        * internal(&seq2)
                        * 0.5f64.powi(inserts2 as i32);
                    terms.push(WindowTerm {
                        coeff,
                        ends_in_transmission: *seq2.last().unwrap() == T,
                    });
                }
            }
            row.push(terms);
        }
        cells.push(row);
    }
    Ok(WindowTable { i_m, cells })
}

/// Deletion weight for a drift change of `d = k − j`: `d + 1` insertions
/// followed by a deletion.
fn alpha(p: &ChannelParams, d: i32) -> f64 {
    if d < -1 || d >= p.i_m as i32 {
        return 0.0;
    }
    let m = d + 1;
    p.p_i.powi(m) * p.p_d / 2f64.powi(m)
}

/// Transmission weight for a drift change of `d = k − j`: `d` insertions
/// followed by a transmission, with the capped transmission probability
/// once all `i_m` insertions are spent.
fn beta(p: &ChannelParams, d: i32) -> f64 {
    if d < 0 || d > p.i_m as i32 {
        return 0.0;
    }
    let t = if d as usize == p.i_m {
        p.p_hat_t
    } else {
        p.p_t
    };
    p.p_i.powi(d) * t / 2f64.powi(d)
}

struct Ctx<'a> {
    p: &'a ChannelParams,
    received: &'a [Bit],
    watermark: &'a [Bit],
    gamma: usize,
    x_max: usize,
    final_offset: i32,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a ChannelParams, received: &'a [Bit], watermark: &'a [Bit]) -> Result<Self> {
        for (label, probability) in [
            ("p_t", p.p_t),
            ("p_s", p.p_s),
            ("p_d", p.p_d),
            ("p_i", p.p_i),
            ("p_hat_t", p.p_hat_t),
            ("p_f", p.p_f),
        ] {
            if !(0.0..=1.0).contains(&probability) {
                return Err(Error::InvalidConfig(format!(
                    "{label} must be in [0, 1], got {probability}"
                )));
            }
        }
        if p.i_m == 0 {
            return Err(Error::InvalidConfig("i_m must be at least 1".into()));
        }
        let gamma = watermark.len();
        if gamma < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 watermark bits, got {gamma}"
            )));
        }
        for bits in [received, watermark] {
            if let Some(b) = bits.iter().find(|&&b| b > 1) {
                return Err(Error::InvalidBits(format!("bit value {b} is not 0 or 1")));
            }
        }
        let final_offset = received.len() as i32 - gamma as i32;
        Ok(Self {
            p,
            received,
            watermark,
            gamma,
            x_max: x_max_for_offset(final_offset),
            final_offset,
        })
    }

    fn n_states(&self) -> usize {
        2 * self.x_max + 1
    }

    fn drift(&self, state: usize) -> i32 {
        state as i32 - self.x_max as i32
    }

    fn state(&self, drift: i32) -> Option<usize> {
        let s = drift + self.x_max as i32;
        (0..self.n_states() as i32)
            .contains(&s)
            .then_some(s as usize)
    }

    /// Watermark factor for queued bit `n` (1-based) with post-step drift
    /// `k`, or `None` when received index `n + k` is out of range.
    fn zeta(&self, n: usize, k: i32) -> Option<f64> {
        let idx = n as i64 + k as i64;
        if idx < 1 || idx > self.received.len() as i64 {
            return None;
        }
        Some(
            if self.received[idx as usize - 1] == self.watermark[n - 1] {
                1.0 - self.p.p_f
            } else {
                self.p.p_f
            },
        )
    }

    /// First-order step weight for queued bit `n` moving drift `j → k`.
    fn first_order(&self, n: usize, j: i32, k: i32) -> f64 {
        let b = beta(self.p, k - j);
        let transmission = if b > 0.0 {
            self.zeta(n, k).map_or(0.0, |z| b * z)
        } else {
            0.0
        };
        alpha(self.p, k - j) + transmission
    }

    fn point_mass(&self, drift: i32) -> Result<Vec<f64>> {
        let mut col = vec![0.0; self.n_states()];
        match self.state(drift) {
            Some(s) => col[s] = 1.0,
            None => {
                return Err(Error::InvalidConfig(format!(
                    "drift {drift} is outside the lattice (x_max {})",
                    self.x_max
                )))
            }
        }
        Ok(col)
    }
}

fn normalize(col: &mut [f64], pass: &'static str, time: usize) -> Result<()> {
    let sum: f64 = col.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::DecoderFailure { pass, column: time });
    }
    for v in col.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

/// Shared lattice assembly: the two boundary columns and the first-order
/// columns adjacent to them are identical across the decoders; `forward_step`
/// and `backward_step` fill the interior columns.
fn run_lattice(
    ctx: &Ctx,
    forward_step: impl Fn(&Ctx, &[f64], usize, i32) -> f64,
    backward_step: impl Fn(&Ctx, &[f64], usize, i32) -> f64,
) -> Result<DriftLattice> {
    let gamma = ctx.gamma;
    let ns = ctx.n_states();
    let i_m = ctx.p.i_m as i32;

    let mut forward = vec![vec![0.0; ns]; gamma];
    forward[0] = ctx.point_mass(0)?;
    for n in 1..gamma {
        let (done, rest) = forward.split_at_mut(n);
        let prev = done[n - 1].as_slice();
        let col = &mut rest[0];
        if n == 1 {
            for (s, v) in col.iter_mut().enumerate() {
                let k = ctx.drift(s);
                let mut acc = 0.0;
                for j in k - i_m..=k + 1 {
                    if let Some(js) = ctx.state(j) {
                        acc += prev[js] * ctx.first_order(n, j, k);
                    }
                }
                *v = acc;
            }
        } else {
            for (s, v) in col.iter_mut().enumerate() {
                *v = forward_step(ctx, prev, n, ctx.drift(s));
            }
        }
        normalize(col, "forward", n + 1)?;
    }

    let mut backward = vec![vec![0.0; ns]; gamma];
    backward[gamma - 1] = ctx.point_mass(ctx.final_offset)?;
    for n in (0..gamma - 1).rev() {
        let (rest, done) = backward.split_at_mut(n + 1);
        let next = done[0].as_slice();
        let col = &mut rest[n];
        if n == gamma - 2 {
            for (s, v) in col.iter_mut().enumerate() {
                let k = ctx.drift(s);
                let mut acc = 0.0;
                for j in k - 1..=k + i_m {
                    if let Some(js) = ctx.state(j) {
                        acc += next[js] * ctx.first_order(n + 1, k, j);
                    }
                }
                *v = acc;
            }
        } else {
            for (s, v) in col.iter_mut().enumerate() {
                *v = backward_step(ctx, next, n, ctx.drift(s));
            }
        }
        normalize(col, "backward", n + 1)?;
    }

    let mut posterior = vec![vec![0.0; ns]; gamma];
    for n in 0..gamma {
        for s in 0..ns {
            posterior[n][s] = forward[n][s] * backward[n][s];
        }
        normalize(&mut posterior[n], "posterior", n + 1)?;
    }

    Ok(DriftLattice {
        x_max: ctx.x_max,
        forward,
        backward,
        posterior,
    })
}

/// First-order memoryless decoder.
pub fn forward_backward_dm1(
    params: &ChannelParams,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<DriftLattice> {
    let ctx = Ctx::new(params, received, watermark)?;
    let i_m = params.i_m as i32;
    run_lattice(
        &ctx,
        |ctx, prev, n, k| {
            let mut acc = 0.0;
            for j in k - i_m..=k + 1 {
                if let Some(js) = ctx.state(j) {
                    acc += prev[js] * ctx.first_order(n, j, k);
                }
            }
            acc
        },
        |ctx, next, n, k| {
            let mut acc = 0.0;
            for j in k - 1..=k + i_m {
                if let Some(js) = ctx.state(j) {
                    acc += next[js] * ctx.first_order(n + 1, k, j);
                }
            }
            acc
        },
    )
}

/// Second-order memoryless decoder: each first-order step is preceded by an
/// unweighted sum of first-order weights over the adjacent earlier interval.
pub fn forward_backward_dm2(
    params: &ChannelParams,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<DriftLattice> {
    let ctx = Ctx::new(params, received, watermark)?;
    let i_m = params.i_m as i32;
    run_lattice(
        &ctx,
        |ctx, prev, n, k| {
            let mut acc = 0.0;
            for j in k - i_m..=k + 1 {
                let Some(js) = ctx.state(j) else { continue };
                let mut inner = 0.0;
                for i in j - i_m..=j + 1 {
                    if ctx.state(i).is_some() {
                        inner += alpha(ctx.p, j - i) + beta(ctx.p, j - i);
                    }
                }
                acc += prev[js] * inner * ctx.first_order(n, j, k);
            }
            acc
        },
        |ctx, next, n, k| {
            let mut acc = 0.0;
            for j in k - 1..=k + i_m {
                let Some(js) = ctx.state(j) else { continue };
                let mut inner = 0.0;
                for i in j - 1..=j + i_m {
                    if ctx.state(i).is_some() {
                        inner += alpha(ctx.p, i - j) + beta(ctx.p, i - j);
                    }
                }
                acc += next[js] * inner * ctx.first_order(n + 1, k, j);
            }
            acc
        },
    )
}

/// Markov-memory decoder driven by the window table.
pub fn forward_backward_fsmc(
    params: &ChannelParams,
    table: &WindowTable,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<DriftLattice> {
    if table.i_m() != params.i_m {
        return Err(Error::InvalidConfig(format!(
            "window table built for i_m {} but params use {}",
            table.i_m(),
            params.i_m
        )));
    }
    let ctx = Ctx::new(params, received, watermark)?;
    let i_m = params.i_m as i32;
    run_lattice(
        &ctx,
        |ctx, prev, n, k| {
            let xi = ctx.zeta(n, k);
            let mut acc = 0.0;
            for j in k - i_m..=k + 1 {
                let Some(js) = ctx.state(j) else { continue };
                let mut inner = 0.0;
                for i in j - i_m..=j + 1 {
                    if ctx.state(i).is_some() {
                        inner += table.eval(j - i + 1, k - j + 1, xi);
                    }
                }
                acc += prev[js] * inner;
            }
            acc
        },
        |ctx, next, n, k| {
            let mut acc = 0.0;
            for j in k - 1..=k + i_m {
                let Some(js) = ctx.state(j) else { continue };
                let xi = ctx.zeta(n + 1, j);
                let mut inner = 0.0;
                for i in j - 1..=j + i_m {
                    if ctx.state(i).is_some() {
                        inner += table.eval(i - j + 1, j - k + 1, xi);
                    }
                }
                acc += next[js] * inner;
            }
            acc
        },
    )
}

/// Runs the requested decoder, building the window table when needed.
pub fn decode(
    kind: DecoderKind,
    params: &ChannelParams,
    a3: &TransitionMatrix3,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<DriftLattice> {
    match kind {
        DecoderKind::Dm1 => forward_backward_dm1(params, received, watermark),
        DecoderKind::Dm2 => forward_backward_dm2(params, received, watermark),
        DecoderKind::Fsmc => {
            let table = build_window_table(a3, params.i_m)?;
            forward_backward_fsmc(params, &table, received, watermark)
        }
    }
}

/// Most likely drift path under a per-step reachability constraint.
///
/// The first state maximises column 1; each following state maximises its
/// column within `[previous − 1, previous + i_m]`. Ties prefer the smaller
/// drift change, then the smaller drift.
pub fn extract_path(lattice: &DriftLattice, i_m: usize) -> Vec<i32> {
    let mut path = Vec::with_capacity(lattice.gamma());
    let mut prev: i32 = 0;
    for (n, col) in lattice.posterior.iter().enumerate() {
        let (lo, hi) = if n == 0 {
            (-(lattice.x_max() as i32), lattice.x_max() as i32)
        } else {
            (prev - 1, prev + i_m as i32)
        };
        let mut best: Option<(f64, i32)> = None;
        for k in lo..=hi {
            let Some(s) = lattice.state_of(k) else {
                continue;
            };
            let p = col[s];
            let better = match best {
                None => true,
                Some((bp, bk)) => {
                    p > bp
                        || (p == bp
                            && ((k - prev).abs() < (bk - prev).abs()
                                || ((k - prev).abs() == (bk - prev).abs() && k < bk)))
                }
            };
            if better {
                best = Some((p, k));
            }
        }
        let k = best.map(|(_, k)| k).unwrap_or(prev);
        path.push(k);
        prev = k;
    }
    path
}

/// Rebuilds a Γ-bit sequence from the received bits and an inferred drift
/// path. A step inferred as a deletion contributes a `0`; otherwise the bit
/// at the inferred position is copied, with out-of-range positions reading
/// as `0`.
///
/// Steps within the path must not drop by more than one. The closing step
/// onto `final_offset` is exempt, so the all-zero fallback path is always
/// accepted.
pub fn resynchronize(received: &[Bit], path: &[i32], final_offset: i32) -> Result<Vec<Bit>> {
    if let Some(n) = path.windows(2).position(|w| w[1] - w[0] < -1) {
        return Err(Error::InvalidConfig(format!(
            "inferred path drops from {} to {} at step {}; at most one \
             deletion fits in a step",
            path[n],
            path[n + 1],
            n + 1
        )));
    }
    let gamma = path.len();
    let mut out = Vec::with_capacity(gamma);
    for n in 1..=gamma {
        let next = if n < gamma { path[n] } else { final_offset };
        let delta = next - path[n - 1];
        if delta <= -1 {
            out.push(0);
            continue;
        }
        let idx = n as i64 + next as i64;
        if idx >= 1 && idx <= received.len() as i64 {
            out.push(received[idx as usize - 1]);
        } else {
            out.push(0);
        }
    }
    Ok(out)
}
