//! Brute-force reference computations used only by tests.
//!
//! Two independent routes to the decoders' answers:
//!
//! * [`exact_dm1_posteriors`] enumerates every per-step event sequence
//!   (insertions, then a transmission or a deletion) consistent with the
//!   boundary drifts, weighs each from first principles, and accumulates
//!   exact per-time drift marginals. No recursion shortcuts, no
//!   normalisation tricks.
//! * [`naive_lattice`] re-evaluates the forward-backward recursions
//!   literally in arbitrary-precision rational arithmetic, with no
//!   intermediate normalisation, normalising each column only at the end.
//!
//! Both are deliberately written without reusing the production decoder's
//! step helpers.

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::decoder::{x_max_for_offset, DecoderKind};
use crate::markov::{ChannelParams, TransitionMatrix3, D3, I3, T};
use crate::{Bit, Error, Result};

/// Exact per-time drift posteriors for the first-order memoryless law,
/// computed by full event-sequence enumeration.
///
/// Columns are indexed like the decoder lattice: state `s` holds drift
/// `s − x_max`. The enumeration walks all `(insertions, outcome)` choices
/// per step, so it is exponential in Γ; it also refuses instances whose
/// pin-consistent paths could leave the `±x_max` lattice, since there the
/// clipped recursion and the unclipped law genuinely differ.
pub fn exact_dm1_posteriors(
    params: &ChannelParams,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<Vec<Vec<f64>>> {
    let gamma = watermark.len();
    if !(2..=10).contains(&gamma) {
        return Err(Error::InvalidConfig(format!(
            "enumeration handles 2 to 10 watermark bits, got {gamma}"
        )));
    }
    let psi = received.len() as i32 - gamma as i32;
    if psi.abs() > 3 {
        return Err(Error::InvalidConfig(format!(
            "enumeration handles final offsets up to ±3, got {psi}"
        )));
    }
    if params.i_m != 1 {
        return Err(Error::InvalidConfig(format!(
            "enumeration handles i_m = 1 only, got {}",
            params.i_m
        )));
    }
    let x_max = x_max_for_offset(psi) as i32;
    let i_m = params.i_m as i32;

    for n in 1..=gamma as i32 {
        let hi = ((n - 1) * i_m).min(psi + (gamma as i32 - n));
        let lo = (-(n - 1)).max(psi - (gamma as i32 - n) * i_m);
        if hi > x_max || lo < -x_max {
            return Err(Error::InvalidConfig(format!(
                "pin-consistent drifts at time {n} span [{lo}, {hi}], outside x_max {x_max}"
            )));
        }
    }

    let ns = (2 * x_max + 1) as usize;
    let mut walker = Walker {
        p: params,
        received,
        watermark,
        gamma,
        psi,
        x_max,
        acc: vec![vec![0.0; ns]; gamma],
    };
    let mut path = vec![0i32];
    walker.walk(&mut path, 1.0);

    let mut acc = walker.acc;
    for (n, col) in acc.iter_mut().enumerate() {
        let sum: f64 = col.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::DecoderFailure {
                pass: "exact enumeration",
                column: n + 1,
            });
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
    }
    Ok(acc)
}

struct Walker<'a> {
    p: &'a ChannelParams,
    received: &'a [Bit],
    watermark: &'a [Bit],
    gamma: usize,
    psi: i32,
    x_max: i32,
    acc: Vec<Vec<f64>>,
}

impl Walker<'_> {
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

    fn walk(&mut self, path: &mut Vec<i32>, weight: f64) {
        let n = path.len();
        if n == self.gamma {
            if *path.last().unwrap() == self.psi {
                for (t, &d) in path.iter().enumerate() {
                    self.acc[t][(d + self.x_max) as usize] += weight;
                }
            }
            return;
        }
        let drift = *path.last().unwrap();
        for m in 0..=self.p.i_m as i32 {
            let inserts = self.p.p_i.powi(m) * 0.5f64.powi(m);

            path.push(drift + m - 1);
            self.walk(path, weight * inserts * self.p.p_d);
            path.pop();

            let transmit = if m == self.p.i_m as i32 {
                self.p.p_hat_t
            } else {
                self.p.p_t
            };
            if let Some(z) = self.zeta(n, drift + m) {
                path.push(drift + m);
                self.walk(path, weight * inserts * transmit * z);
                path.pop();
            }
        }
    }
}

/// Number of distinct drift paths from drift 0 at time 1 to `psi` at time
/// `gamma` with per-step changes in `[−1, i_m]`. Cross-checks the
/// enumeration walker against closed-form counts.
pub fn count_drift_paths(gamma: usize, psi: i32, i_m: usize) -> u128 {
    fn walk(steps_left: usize, drift: i32, psi: i32, i_m: i32) -> u128 {
        if steps_left == 0 {
            return u128::from(drift == psi);
        }
        (-1..=i_m)
            .map(|d| walk(steps_left - 1, drift + d, psi, i_m))
            .sum()
    }
    if gamma == 0 {
        return 0;
    }
    walk(gamma - 1, 0, psi, i_m as i32)
}

/// Forward, backward, and posterior columns computed the slow way.
#[derive(Clone, Debug)]
pub struct NaiveLattice {
    pub forward: Vec<Vec<f64>>,
    pub backward: Vec<Vec<f64>>,
    pub posterior: Vec<Vec<f64>>,
}

fn rat(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidConfig(format!("non-finite parameter {x}")))
}

fn rpow(x: &BigRational, e: i32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

/// Cell-indexed window terms: `[b1][b2]` → (coefficient, scaled-by-ξ flag).
type RationalWindow = Vec<Vec<Vec<(BigRational, bool)>>>;

struct RatCtx<'a> {
    i_m: i32,
    p_t: BigRational,
    p_d: BigRational,
    p_i: BigRational,
    p_hat_t: BigRational,
    p_f: BigRational,
    half: BigRational,
    received: &'a [Bit],
    watermark: &'a [Bit],
    x_max: i32,
    window: RationalWindow,
}

impl RatCtx<'_> {
    fn in_lattice(&self, drift: i32) -> bool {
        drift.abs() <= self.x_max
    }

    fn state(&self, drift: i32) -> usize {
        (drift + self.x_max) as usize
    }

    fn alpha(&self, d: i32) -> BigRational {
        if d < -1 || d >= self.i_m {
            return BigRational::zero();
        }
        rpow(&self.p_i, d + 1) * &self.p_d * rpow(&self.half, d + 1)
    }

    fn beta(&self, d: i32) -> BigRational {
        if d < 0 || d > self.i_m {
            return BigRational::zero();
        }
        let t = if d == self.i_m {
            &self.p_hat_t
        } else {
            &self.p_t
        };
        rpow(&self.p_i, d) * t * rpow(&self.half, d)
    }

    fn zeta(&self, n: usize, k: i32) -> Option<BigRational> {
        let idx = n as i64 + k as i64;
        if idx < 1 || idx > self.received.len() as i64 {
            return None;
        }
        Some(
            if self.received[idx as usize - 1] == self.watermark[n - 1] {
                BigRational::one() - &self.p_f
            } else {
                self.p_f.clone()
            },
        )
    }

    fn first_order(&self, n: usize, j: i32, k: i32) -> BigRational {
        let mut w = self.alpha(k - j);
        let b = self.beta(k - j);
        if !b.is_zero() {
            if let Some(z) = self.zeta(n, k) {
                w += b * z;
            }
        }
        w
    }

    fn window_cell(&self, b1: i32, b2: i32, xi: &Option<BigRational>) -> BigRational {
        let mut total = BigRational::zero();
        if b1 < 0 || b2 < 0 {
            return total;
        }
        let Some(row) = self.window.get(b1 as usize) else {
            return total;
        };
        let Some(cell) = row.get(b2 as usize) else {
            return total;
        };
        for (coeff, flagged) in cell {
            if *flagged {
                if let Some(x) = xi {
                    total += coeff * x;
                }
            } else {
                total += coeff;
            }
        }
        total
    }
}

/// Window-table terms rebuilt as one merged event chain per term: each term
/// is the product of transitions along `[I^{m1}, end1, I^{m2}, end2]` times
/// `2^{−m2}`, flagged when `end2` is a transmission.
fn rational_window(a3: &TransitionMatrix3, i_m: i32) -> Result<RationalWindow> {
    let half = rat(0.5)?;
    let mut a = [
        [
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ],
        [
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ],
        [
            BigRational::zero(),
            BigRational::zero(),
            BigRational::zero(),
        ],
    ];
    for (r, row) in a.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = rat(a3.a(r, c))?;
        }
    }
    let mut cells = Vec::new();
    for b1 in 0..=i_m + 1 {
        let mut row = Vec::new();
        for b2 in 0..=i_m + 1 {
            let mut terms: Vec<(BigRational, bool)> = Vec::new();
            for end1 in [T, D3] {
                let m1 = if end1 == T { b1 - 1 } else { b1 };
                if m1 < 0 || m1 > i_m {
                    continue;
                }
                for end2 in [T, D3] {
                    let m2 = if end2 == T { b2 - 1 } else { b2 };
                    if m2 < 0 || m2 > i_m {
                        continue;
                    }
                    let mut chain: Vec<usize> = Vec::new();
                    chain.extend(std::iter::repeat(I3).take(m1 as usize));
                    chain.push(end1);
                    chain.extend(std::iter::repeat(I3).take(m2 as usize));
                    chain.push(end2);
                    let mut coeff = rpow(&half, m2);
                    for pair in chain.windows(2) {
                        coeff *= &a[pair[0]][pair[1]];
                    }
                    terms.push((coeff, end2 == T));
                }
            }
            row.push(terms);
        }
        cells.push(row);
    }
    Ok(cells)
}

/// Literal rational-arithmetic evaluation of a decoder's recursions with no
/// intermediate normalisation; columns are normalised only at the end.
pub fn naive_lattice(
    kind: DecoderKind,
    params: &ChannelParams,
    a3: &TransitionMatrix3,
    received: &[Bit],
    watermark: &[Bit],
) -> Result<NaiveLattice> {
    let gamma = watermark.len();
    if !(2..=12).contains(&gamma) {
        return Err(Error::InvalidConfig(format!(
            "naive evaluation handles 2 to 12 watermark bits, got {gamma}"
        )));
    }
    let psi = received.len() as i32 - gamma as i32;
    let x_max = x_max_for_offset(psi) as i32;
    let i_m = params.i_m as i32;
    let ctx = RatCtx {
        i_m,
        p_t: rat(params.p_t)?,
        p_d: rat(params.p_d)?,
        p_i: rat(params.p_i)?,
        p_hat_t: rat(params.p_hat_t)?,
        p_f: rat(params.p_f)?,
        half: rat(0.5)?,
        received,
        watermark,
        x_max,
        window: if kind == DecoderKind::Fsmc {
            rational_window(a3, i_m)?
        } else {
            Vec::new()
        },
    };

    let ns = (2 * x_max + 1) as usize;
    let zero_col = || vec![BigRational::zero(); ns];

    let mut forward: Vec<Vec<BigRational>> = (0..gamma).map(|_| zero_col()).collect();
    forward[0][ctx.state(0)] = BigRational::one();
    for n in 1..gamma {
        for s in 0..ns {
            let k = s as i32 - x_max;
            let mut acc = BigRational::zero();
            for j in k - i_m..=k + 1 {
                if !ctx.in_lattice(j) {
                    continue;
                }
                let fp = &forward[n - 1][ctx.state(j)];
                if fp.is_zero() {
                    continue;
                }
                let step = if n == 1 {
                    ctx.first_order(n, j, k)
                } else {
                    match kind {
                        DecoderKind::Dm1 => ctx.first_order(n, j, k),
                        DecoderKind::Dm2 => {
                            let mut inner = BigRational::zero();
                            for i in j - i_m..=j + 1 {
                                if ctx.in_lattice(i) {
                                    inner += ctx.alpha(j - i) + ctx.beta(j - i);
                                }
                            }
                            inner * ctx.first_order(n, j, k)
                        }
                        DecoderKind::Fsmc => {
                            let xi = ctx.zeta(n, k);
                            let mut inner = BigRational::zero();
                            for i in j - i_m..=j + 1 {
                                if ctx.in_lattice(i) {
                                    inner += ctx.window_cell(j - i + 1, k - j + 1, &xi);
                                }
                            }
                            inner
                        }
                    }
                };
                acc += fp * step;
            }
            forward[n][s] = acc;
        }
    }

    let mut backward: Vec<Vec<BigRational>> = (0..gamma).map(|_| zero_col()).collect();
    if !ctx.in_lattice(psi) {
        return Err(Error::InvalidConfig(format!(
            "final offset {psi} is outside the lattice (x_max {x_max})"
        )));
    }
    backward[gamma - 1][ctx.state(psi)] = BigRational::one();
    for n in (0..gamma - 1).rev() {
        for s in 0..ns {
            let k = s as i32 - x_max;
            let mut acc = BigRational::zero();
            for j in k - 1..=k + i_m {
                if !ctx.in_lattice(j) {
                    continue;
                }
                let bn = &backward[n + 1][ctx.state(j)];
                if bn.is_zero() {
                    continue;
                }
                let step = if n == gamma - 2 {
                    ctx.first_order(n + 1, k, j)
                } else {
                    match kind {
                        DecoderKind::Dm1 => ctx.first_order(n + 1, k, j),
                        DecoderKind::Dm2 => {
                            let mut inner = BigRational::zero();
                            for i in j - 1..=j + i_m {
                                if ctx.in_lattice(i) {
                                    inner += ctx.alpha(i - j) + ctx.beta(i - j);
                                }
                            }
                            inner * ctx.first_order(n + 1, k, j)
                        }
                        DecoderKind::Fsmc => {
                            let xi = ctx.zeta(n + 1, j);
                            let mut inner = BigRational::zero();
                            for i in j - 1..=j + i_m {
                                if ctx.in_lattice(i) {
                                    inner += ctx.window_cell(i - j + 1, j - k + 1, &xi);
                                }
                            }
                            inner
                        }
                    }
                };
                acc += bn * step;
            }
            backward[n][s] = acc;
        }
    }

    let mut posterior: Vec<Vec<BigRational>> = (0..gamma).map(|_| zero_col()).collect();
    for n in 0..gamma {
        for s in 0..ns {
            posterior[n][s] = &forward[n][s] * &backward[n][s];
        }
    }

    let to_f64_normalized =
        |cols: Vec<Vec<BigRational>>, pass: &'static str| -> Result<Vec<Vec<f64>>> {
            let mut out = Vec::with_capacity(cols.len());
            for (n, col) in cols.into_iter().enumerate() {
                let sum: BigRational = col.iter().sum();
                if sum.is_zero() || sum.is_negative() {
                    return Err(Error::DecoderFailure {
                        pass,
                        column: n + 1,
                    });
                }
                out.push(
                    col.into_iter()
                        .map(|v| (v / &sum).to_f64().unwrap_or(f64::NAN))
                        .collect(),
                );
            }
            Ok(out)
        };

    Ok(NaiveLattice {
        forward: to_f64_normalized(forward, "naive forward")?,
        backward: to_f64_normalized(backward, "naive backward")?,
        posterior: to_f64_normalized(posterior, "naive posterior")?,
    })
}
