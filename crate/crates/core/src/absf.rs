//! Muted-rate selection.
//!
//! A victim MUE `m` whose aggressors stay silent for a fraction `alpha` of
//! the frame sees
//!
//! ```text
//! gamma_m(alpha) = G(M,m) P(m) / (I_agg (1 - alpha) + I_rest + sigma_m)
//! ```
//!
//! where `I_agg` is the interference of its aggressor HeNBs and `I_rest` that
//! of the HeNBs below the aggressor threshold (they keep transmitting). The
//! smallest rate meeting `gamma_m >= gamma_0` is
//! `alpha* = 1 - (G P / gamma_0 - sigma - I_rest) / I_agg`. The same number
//! falls out of the least-norm solution `A^T (A A^T)^-1 B` of the stacked
//! constraint rows, which is kept as an independent route.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::coalition::VictimSets;
use crate::config::FrameConfig;
use crate::deployment::NodeId;
use crate::radio::{AggressorSets, SinrReport};

/// Largest condition number of `A A^T` accepted by the least-norm route.
pub const MAX_CONDITION: f64 = 1e12;

/// Slack used when turning a rate into a subframe count, so that rates such
/// as 0.3 or 0.7 that are not exact binary fractions still map to 3 or 7.
const QUANTIZE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutedRateRequirement {
    /// Row index into the SINR report.
    pub mue: usize,
    pub mue_id: NodeId,
    pub alpha: f64,
    /// False when even `alpha = 1` leaves the MUE below threshold.
    pub feasible: bool,
}

/// Minimal muted rate for MUE `m` given its aggressor HeNBs.
pub fn required_rate_closed_form(report: &SinrReport, m: usize, aggressors: &[usize]) -> MutedRateRequirement {
    let mut req = MutedRateRequirement {
        mue: m,
        mue_id: report.mue_ids[m],
        alpha: 0.0,
        feasible: true,
    };
    if !report.is_victim(m) {
        return req;
    }
    let (agg, rest) = split_interference(report, m, aggressors);
    let headroom = report.signal[m] / report.gamma0 - report.noise[m] - rest;
    if agg <= 0.0 || headroom < 0.0 {
        req.alpha = 1.0;
        req.feasible = false;
        return req;
    }
    req.alpha = (1.0 - headroom / agg).clamp(0.0, 1.0);
    req
}

/// Aggressor and non-aggressor interference at MUE `m` (mW).
pub fn split_interference(report: &SinrReport, m: usize, aggressors: &[usize]) -> (f64, f64) {
    let mut agg = 0.0;
    let mut rest = 0.0;
    for f in 0..report.num_henbs() {
        if aggressors.contains(&f) {
            agg += report.interference[(m, f)];
        } else {
            rest += report.interference[(m, f)];
        }
    }
    (agg, rest)
}

/// Closed-form requirements for every victim, in victim order.
pub fn victim_requirements(report: &SinrReport, aggressors: &AggressorSets) -> Vec<MutedRateRequirement> {
    report
        .victims
        .iter()
        .map(|&m| required_rate_closed_form(report, m, aggressors.of(m)))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeastNormError {
    #[error("system has no rows")]
    Empty,
    #[error("A A^T is singular or ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("dimension mismatch: A is {rows}x{cols}, B has {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
}

/// Minimum-norm solution of the underdetermined system `A x = B`,
/// `x = A^T (A A^T)^-1 B`. Requires `A` to have full row rank.
pub fn least_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, LeastNormError> {
    if a.nrows() != b.len() {
        return Err(LeastNormError::Shape {
            rows: a.nrows(),
            cols: a.ncols(),
            len: b.len(),
        });
    }
    if a.nrows() == 0 {
        return Err(LeastNormError::Empty);
    }
    let gram = a * a.transpose();
    let sv = gram.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(LeastNormError::IllConditioned(cond));
    }
    let y = gram
        .lu()
        .solve(b)
        .ok_or(LeastNormError::IllConditioned(f64::INFINITY))?;
    Ok(a.transpose() * y)
}

/// Constraint row of victim `m` in normalized units:
/// `sum_{f in A_m} F(m,f) P_f * alpha_f >= sum_f F(m,f) P_f - P_M + b(m)`.
fn constraint_row(report: &SinrReport, m: usize, aggressors: &[usize]) -> (Vec<(usize, f64)>, f64) {
    let coeffs = aggressors
        .iter()
        .map(|&f| (f, report.f_matrix[(m, f)] * report.henb_power_mw[f]))
        .collect();
    let total: f64 = (0..report.num_henbs())
        .map(|f| report.f_matrix[(m, f)] * report.henb_power_mw[f])
        .sum();
    (coeffs, total - report.menb_power_mw + report.b_vector[m])
}

/// Per-victim rates through the matrix route: each victim's constraint
/// `a_m alpha_m = B_m` (with `a_m` its row sum over aggressors) is solved with
/// [`least_norm`] and clamped to `[0, 1]`. Victims whose system is singular
/// fall back to the closed form; their MUE ids are returned as diagnostics.
pub fn required_rates_least_norm(
    report: &SinrReport,
    aggressors: &AggressorSets,
) -> (Vec<MutedRateRequirement>, Vec<NodeId>) {
    let mut fallbacks = Vec::new();
    let reqs = report
        .victims
        .iter()
        .map(|&m| {
            let (coeffs, rhs) = constraint_row(report, m, aggressors.of(m));
            let a_m: f64 = coeffs.iter().map(|(_, c)| c).sum();
            let a = DMatrix::from_element(1, 1, a_m);
            let b = DVector::from_element(1, rhs);
            match least_norm(&a, &b) {
                Ok(x) => {
                    let raw = x[0];
                    MutedRateRequirement {
                        mue: m,
                        mue_id: report.mue_ids[m],
                        alpha: raw.clamp(0.0, 1.0),
                        feasible: raw <= 1.0,
                    }
                }
                Err(_) => {
                    fallbacks.push(report.mue_ids[m]);
                    required_rate_closed_form(report, m, aggressors.of(m))
                }
            }
        })
        .collect();
    (reqs, fallbacks)
}

/// The victims x aggressors reading: one unknown per aggressor HeNB, one row
/// per victim with a non-empty aggressor set. Returns per-HeNB rates (0 for
/// non-aggressors) clamped to `[0, 1]`, or the solver error when the system
/// is not full row rank (e.g. more victims than aggressors).
pub fn required_henb_rates_least_norm(
    report: &SinrReport,
    aggressors: &AggressorSets,
) -> Result<Vec<f64>, LeastNormError> {
    let rows: Vec<usize> = report
        .victims
        .iter()
        .copied()
        .filter(|&m| !aggressors.of(m).is_empty())
        .collect();
    let mut cols: Vec<usize> = rows.iter().flat_map(|&m| aggressors.of(m).iter().copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    let mut a = DMatrix::zeros(rows.len(), cols.len());
    let mut b = DVector::zeros(rows.len());
    for (i, &m) in rows.iter().enumerate() {
        let (coeffs, rhs) = constraint_row(report, m, aggressors.of(m));
        for (f, c) in coeffs {
            let j = cols.binary_search(&f).expect("column present");
            a[(i, j)] = c;
        }
        b[i] = rhs;
    }
    let x = least_norm(&a, &b)?;
    let mut rates = vec![0.0; report.num_henbs()];
    for (j, &f) in cols.iter().enumerate() {
        rates[f] = x[j].clamp(0.0, 1.0);
    }
    Ok(rates)
}

/// `alpha_F(f) = max_{m in H_f} alpha_m`, 0 for HeNBs without victims.
pub fn aggregate_per_henb(requirements: &[MutedRateRequirement], victim_sets: &VictimSets) -> Vec<f64> {
    victim_sets
        .per_henb
        .iter()
        .map(|victims| {
            requirements
                .iter()
                .filter(|r| victims.contains(&r.mue))
                .map(|r| r.alpha)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Blanked subframes of one HeNB over a radio frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SubframePattern {
    pub blanked: Vec<bool>,
}

impl SubframePattern {
    pub fn empty(subframes: usize) -> Self {
        Self {
            blanked: vec![false; subframes],
        }
    }

    pub fn len(&self) -> usize {
        self.blanked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blanked.is_empty()
    }

    pub fn popcount(&self) -> usize {
        self.blanked.iter().filter(|&&b| b).count()
    }

    /// Fraction of the frame that is blanked.
    pub fn rate(&self) -> f64 {
        self.popcount() as f64 / self.len() as f64
    }

    pub fn is_blanked(&self, subframe: usize) -> bool {
        self.blanked[subframe]
    }
}

impl std::fmt::Display for SubframePattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.blanked {
            f.write_str(if b { "X" } else { "." })?;
        }
        Ok(())
    }
}

/// Number of subframes needed to blank at least `alpha` of the frame.
pub fn blanked_count(alpha: f64, subframes: usize) -> usize {
    let n = subframes as f64;
    ((alpha.clamp(0.0, 1.0) * n - QUANTIZE_SLACK).ceil().max(0.0) as usize).min(subframes)
}

/// `ceil(alpha * N_S)` contiguous blanked subframes starting at `offset`
/// (wrapping around the frame end).
pub fn quantize_pattern(alpha: f64, frame: &FrameConfig, offset: usize) -> SubframePattern {
    let n = frame.subframes;
    let mut p = SubframePattern::empty(n);
    for i in 0..blanked_count(alpha, n) {
        p.blanked[(offset + i) % n] = true;
    }
    p
}

/// Per-HeNB muting decision of one scheme for one drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutingPlan {
    /// Rate each HeNB must at least honour (before quantization).
    pub rates: Vec<f64>,
    pub patterns: Vec<SubframePattern>,
    /// Coalition index per HeNB, `None` for non-aggressors.
    pub coalition: Vec<Option<usize>>,
}

impl MutingPlan {
    /// No HeNB blanks anything.
    pub fn silent(num_henbs: usize, frame: &FrameConfig) -> Self {
        Self {
            rates: vec![0.0; num_henbs],
            patterns: vec![SubframePattern::empty(frame.subframes); num_henbs],
            coalition: vec![None; num_henbs],
        }
    }

    /// Independently quantized patterns at a common offset.
    pub fn from_rates(rates: Vec<f64>, frame: &FrameConfig, offset: usize) -> Self {
        let patterns = rates.iter().map(|&a| quantize_pattern(a, frame, offset)).collect();
        let n = rates.len();
        Self {
            rates,
            patterns,
            coalition: vec![None; n],
        }
    }

    /// Blanked fraction actually applied by each HeNB.
    pub fn applied_rates(&self) -> Vec<f64> {
        self.patterns.iter().map(SubframePattern::rate).collect()
    }
}
