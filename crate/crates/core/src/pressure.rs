//! Topological pressure by three routes: cylinder sums, periodic-point sums
//! and the Perron root of a block transfer matrix.
//!
//! On a shift space distinct `n`-cylinders are `(n, ε)`-separated for every
//! `ε` below the smallest symbol distance, so the cylinder sum is the
//! separated-set definition taken at a fixed small `ε`; no separate
//! `ε`-parameterized estimator is needed.
//!
//! The finite-`n` routes compute `log Z_n` for every `n` in one depth-first
//! walk over admissible words. Words are visited in lexicographic order and
//! every reduction runs in a fixed order, so results do not depend on the
//! number of threads.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::MarkovMeasure;
use crate::numeric::{aitken, pairwise_sum, perron_power_iteration, POWER_MAX_ITER, POWER_TOL};
use crate::potentials::{asymptotic_defect, AdditiveSequence, LocallyConstantPotential, PotentialSequence};
use crate::sft::TransitionSystem;

/// Streaming pairwise summation: blocks of fixed size are summed pairwise and
/// merged like a binary counter, so the rounding pattern depends only on the
/// number of terms.
#[derive(Debug, Clone, Default)]
pub(crate) struct PairwiseAccumulator {
    block: Vec<f64>,
    levels: Vec<(u32, f64)>,
}

impl PairwiseAccumulator {
    const BLOCK: usize = 64;

    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add(&mut self, x: f64) {
        self.block.push(x);
        if self.block.len() == Self::BLOCK {
            let mut s = pairwise_sum(&self.block);
            self.block.clear();
            let mut level = 0;
            while let Some(&(l, v)) = self.levels.last() {
                if l != level {
                    break;
                }
                self.levels.pop();
                s += v;
                level += 1;
            }
            self.levels.push((level, s));
        }
    }

    pub(crate) fn total(&self) -> f64 {
        let mut s = pairwise_sum(&self.block);
        for &(_, v) in self.levels.iter().rev() {
            s += v;
        }
        s
    }
}

/// Which finite-`n` formula (or the spectral oracle) produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    Cylinder,
    Periodic,
    Spectral,
}

impl PressureMethod {
    pub fn name(self) -> &'static str {
        match self {
            PressureMethod::Cylinder => "cylinder",
            PressureMethod::Periodic => "periodic",
            PressureMethod::Spectral => "spectral",
        }
    }
}

/// A pressure value with the finite-`n` evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub method: PressureMethod,
    /// `(n, (1/n) log Z_n)`; empty for the spectral method.
    pub finite_n_values: Vec<(usize, f64)>,
    pub extrapolated: f64,
    pub error_bar: f64,
}

/// Potential or sequence handed to [`pressure_limit`].
#[derive(Clone, Copy)]
pub enum PressureInput<'a> {
    Potential(&'a LocallyConstantPotential),
    Sequence(&'a dyn PotentialSequence),
}

fn dfs(ts: &TransitionSystem, word: &mut Vec<usize>, n_max: usize, visit: &mut dyn FnMut(&[usize])) {
    visit(word);
    if word.len() == n_max {
        return;
    }
    let last = *word.last().expect("walk starts from a symbol");
    for &s in ts.successors(last) {
        word.push(s);
        dfs(ts, word, n_max, visit);
        word.pop();
    }
}

/// Depth-first walk over admissible words of length `1..=n_max` starting with
/// `first`, in lexicographic order within each length.
fn walk_from(ts: &TransitionSystem, first: usize, n_max: usize, visit: &mut dyn FnMut(&[usize])) {
    if n_max == 0 {
        return;
    }
    let mut word = Vec::with_capacity(n_max);
    word.push(first);
    dfs(ts, &mut word, n_max, visit);
}

/// For every admissible `(d−1)`-word `u`, the largest sum of the `d − 1`
/// windows of `u·e` over admissible `(d−1)`-extensions `e`, indexed by base-k code.
fn tail_maxima(phi: &LocallyConstantPotential) -> Vec<f64> {
    let ts = phi.system();
    let d = phi.depth();
    if d == 1 {
        return vec![0.0];
    }
    let k = ts.k();
    let mut table = vec![f64::NEG_INFINITY; k.pow((d - 1) as u32)];
    let mut c = ts.cursor(2 * (d - 1));
    while c.advance() {
        let w = c.current();
        let code = w[..d - 1].iter().fold(0, |acc, &s| acc * k + (s - 1));
        let v = phi.birkhoff_sum_word(w, d - 1);
        if v > table[code] {
            table[code] = v;
        }
    }
    table
}

/// sup of `S_nφ` over the cylinder of a word shorter than `d − 1`.
fn short_sup(phi: &LocallyConstantPotential, w: &[usize]) -> f64 {
    let ts = phi.system();
    let n = w.len();
    let ext = phi.depth() - 1;
    let mut best = f64::NEG_INFINITY;
    let mut buf = w.to_vec();
    let mut all = ts.cursor(ext);
    while all.advance() {
        let e = all.current();
        if !ts.allowed(w[n - 1], e[0]) {
            continue;
        }
        buf.truncate(n);
        buf.extend_from_slice(e);
        best = best.max(phi.birkhoff_sum_word(&buf, n));
    }
    best
}

/// Per-length values for one first symbol, produced by a walk.
struct LevelValues {
    max: Vec<f64>,
}

fn cylinder_values(phi: &LocallyConstantPotential, tails: &[f64], first: usize, n_max: usize, mut sink: impl FnMut(usize, f64)) {
    let ts = phi.system();
    let d = phi.depth();
    let k = ts.k();
    let mut inner = vec![0.0; n_max + 1];
    walk_from(ts, first, n_max, &mut |w| {
        let n = w.len();
        inner[n] = inner[n - 1] + if n >= d { phi.value(&w[n - d..]) } else { 0.0 };
        let v = if n + 1 >= d {
            let code = w[n + 1 - d..].iter().fold(0, |acc, &s| acc * k + (s - 1));
            inner[n] + tails[code]
        } else {
            short_sup(phi, w)
        };
        sink(n, v);
    });
}

fn periodic_additive_values(phi: &LocallyConstantPotential, first: usize, n_max: usize, mut sink: impl FnMut(usize, f64)) {
    let ts = phi.system();
    let d = phi.depth();
    let mut inner = vec![0.0; n_max + 1];
    let mut buf = Vec::with_capacity(n_max + 2 * d);
    walk_from(ts, first, n_max, &mut |w| {
        let n = w.len();
        inner[n] = inner[n - 1] + if n >= d { phi.value(&w[n - d..]) } else { 0.0 };
        if !ts.allowed(w[n - 1], w[0]) {
            return;
        }
        buf.clear();
        let v = if n + 1 >= d {
            buf.extend_from_slice(&w[n + 1 - d..]);
            buf.extend_from_slice(&w[..d - 1]);
            inner[n] + phi.birkhoff_sum_word(&buf, d - 1)
        } else {
            while buf.len() < n + d - 1 {
                buf.push(w[buf.len() % n]);
            }
            phi.birkhoff_sum_word(&buf, n)
        };
        sink(n, v);
    });
}

/// Emits `(n, value)` for every word that starts with the given symbol.
type LevelSource<'a> = dyn Fn(usize, &mut dyn FnMut(usize, f64)) + Sync + 'a;

/// Two passes per first symbol: maxima, then shifted exponential sums.
fn log_sums_by_walk(
    ts: &TransitionSystem,
    n_max: usize,
    values: &LevelSource<'_>,
) -> Vec<f64> {
    let firsts: Vec<usize> = (1..=ts.k()).collect();
    let maxima: Vec<LevelValues> = firsts
        .par_iter()
        .map(|&s| {
            let mut max = vec![f64::NEG_INFINITY; n_max + 1];
            values(s, &mut |n, v| {
                if v > max[n] {
                    max[n] = v;
                }
            });
            LevelValues { max }
        })
        .collect();
    let mut max = vec![f64::NEG_INFINITY; n_max + 1];
    for lv in &maxima {
        for n in 1..=n_max {
            max[n] = max[n].max(lv.max[n]);
        }
    }
    let partial: Vec<Vec<f64>> = firsts
        .par_iter()
        .map(|&s| {
            let mut acc = vec![PairwiseAccumulator::new(); n_max + 1];
            values(s, &mut |n, v| acc[n].add((v - max[n]).exp()));
            acc.iter().map(|a| a.total()).collect()
        })
        .collect();
    (1..=n_max)
        .map(|n| {
            if max[n] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let mut s = 0.0;
            for p in &partial {
                s += p[n];
            }
            max[n] + s.ln()
        })
        .collect()
}

/// `log Z_n` for `n = 1..=n_max`, `Z_n = Σ_{|w|=n} exp(sup_{C_w} S_nφ)`.
pub fn cylinder_log_sums(phi: &LocallyConstantPotential, n_max: usize) -> Vec<f64> {
    let tails = tail_maxima(phi);
    log_sums_by_walk(phi.system(), n_max, &|first, sink| cylinder_values(phi, &tails, first, n_max, sink))
}

/// `(1/n) log Σ_{C ∈ Z_n} exp(sup_C S_nφ)`.
pub fn pressure_cylinder(phi: &LocallyConstantPotential, n: usize) -> f64 {
    assert!(n >= 1, "n must be positive");
    cylinder_log_sums(phi, n)[n - 1] / n as f64
}

/// `log Σ_{σⁿω = ω} exp(φ_n(ω))` for `n = 1..=n_max`; `-inf` when there are
/// no points of period `n`.
pub fn periodic_log_sums(seq: &dyn PotentialSequence, n_max: usize) -> Result<Vec<f64>> {
    let ts = seq.system();
    if !ts.is_mixing() {
        return Err(Error::NotMixing);
    }
    if let Some(phi) = seq.additive_potential() {
        return Ok(log_sums_by_walk(ts, n_max, &|first, sink| periodic_additive_values(phi, first, n_max, sink)));
    }
    let mut deps = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        deps.push(seq.dependence(n).ok_or(Error::InexactSequence)?.max(n));
    }
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let dep = deps[n - 1];
        let per_first: Vec<Result<Vec<f64>>> = (1..=ts.k())
            .into_par_iter()
            .map(|first| {
                let mut vals = Vec::new();
                let mut rep = Vec::with_capacity(dep);
                let mut c = ts.cursor_from(n, first);
                while c.advance() {
                    let w = c.current();
                    if !ts.allowed(w[n - 1], w[0]) {
                        continue;
                    }
                    rep.clear();
                    while rep.len() < dep {
                        rep.push(w[rep.len() % n]);
                    }
                    vals.push(seq.value_on_word(n, &rep)?);
                }
                Ok(vals)
            })
            .collect();
        let mut max = f64::NEG_INFINITY;
        let mut chunks = Vec::with_capacity(per_first.len());
        for r in per_first {
            let v = r?;
            max = v.iter().copied().fold(max, f64::max);
            chunks.push(v);
        }
        if max == f64::NEG_INFINITY {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        let mut acc = PairwiseAccumulator::new();
        for v in chunks.iter().flatten() {
            acc.add((v - max).exp());
        }
        out.push(max + acc.total().ln());
    }
    Ok(out)
}

/// `(1/n) log Σ_{ω ∈ Fix(σⁿ)} exp(φ_n(ω))`; refuses non-mixing systems.
pub fn pressure_periodic(seq: &dyn PotentialSequence, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    Ok(periodic_log_sums(seq, n)?[n - 1] / n as f64)
}

/// Weighted transfer matrix on the `b`-block shift, `b = max(d − 1, 1)`:
/// `M_uv = exp(φ(u·last v) − shift)` when `u → v` is an admissible block
/// transition. `shift` is the largest table value.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub block_len: usize,
    /// Admissible `block_len`-words in lexicographic order.
    pub blocks: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<f64>>,
    pub shift: f64,
}

impl BlockMatrix {
    pub fn new(phi: &LocallyConstantPotential) -> Self {
        let ts = phi.system();
        let b = phi.depth().saturating_sub(1).max(1);
        let blocks: Vec<Vec<usize>> = ts.cylinders(b).map(|w| w.into_vec()).collect();
        let index: HashMap<&[usize], usize> = blocks.iter().enumerate().map(|(i, w)| (w.as_slice(), i)).collect();
        let shift = phi.max_value();
        let m = blocks.len();
        let mut matrix = vec![vec![0.0; m]; m];
        let mut word = Vec::with_capacity(b + 1);
        for (i, u) in blocks.iter().enumerate() {
            for &s in ts.successors(u[b - 1]) {
                word.clear();
                word.extend_from_slice(u);
                word.push(s);
                let j = index[&word[1..]];
                matrix[i][j] = (phi.value(&word) - shift).exp();
            }
        }
        BlockMatrix { block_len: b, blocks, matrix, shift }
    }

    pub fn index_of(&self, block: &[usize]) -> Option<usize> {
        self.blocks.binary_search_by(|b| b.as_slice().cmp(block)).ok()
    }
}

/// `log` of the Perron root of the block matrix, with default tolerances.
pub fn pressure_spectral(phi: &LocallyConstantPotential) -> Result<f64> {
    pressure_spectral_with(phi, POWER_TOL, POWER_MAX_ITER)
}

pub fn pressure_spectral_with(phi: &LocallyConstantPotential, tol: f64, max_iter: usize) -> Result<f64> {
    if !phi.system().is_mixing() {
        return Err(Error::NotMixing);
    }
    let bm = BlockMatrix::new(phi);
    let pair = perron_power_iteration(&bm.matrix, tol, max_iter)?;
    Ok(pair.eigenvalue.ln() + bm.shift)
}

/// Limit of `(1/n) log Z_n` from the increments `r_n = log Z_n − log Z_{n−1}`,
/// which converge geometrically for locally constant data. Aitken's Δ² is
/// applied to the last three increments; the error bar is their spread.
pub fn extrapolate_log_sums(log_sums: &[(usize, f64)]) -> (f64, f64) {
    let ratios: Vec<f64> = log_sums
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + 1 && w[0].1.is_finite() && w[1].1.is_finite())
        .map(|w| w[1].1 - w[0].1)
        .collect();
    let last_raw = log_sums.iter().rev().find(|p| p.1.is_finite()).map(|&(n, l)| l / n as f64);
    match ratios.len() {
        0 => (last_raw.unwrap_or(f64::NEG_INFINITY), 0.0),
        1 | 2 => {
            let r = *ratios.last().unwrap();
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let raw = last_raw.unwrap_or(r);
            (r, (hi.max(raw) - lo.min(raw)).max(0.0))
        }
        len => {
            let (a, b, c) = (ratios[len - 3], ratios[len - 2], ratios[len - 1]);
            let spread = a.max(b).max(c) - a.min(b).min(c);
            let value = match aitken(a, b, c) {
                Some(acc) if (acc - c).abs() <= 10.0 * spread => acc,
                _ => c,
            };
            (value, spread)
        }
    }
}

/// Finite-`n` sequence plus an accelerated limit.
pub fn pressure_limit(
    method: PressureMethod,
    input: PressureInput<'_>,
    n_min: usize,
    n_max: usize,
) -> Result<PressureEstimate> {
    if n_min == 0 || n_max <= n_min {
        return Err(Error::InvalidArgument(format!("need 1 ≤ n_min < n_max, got {n_min}, {n_max}")));
    }
    let additive_phi = || -> Result<&LocallyConstantPotential> {
        match input {
            PressureInput::Potential(phi) => Ok(phi),
            PressureInput::Sequence(seq) => seq.additive_potential().ok_or(Error::NotAdditive),
        }
    };
    let logs = match method {
        PressureMethod::Spectral => {
            let p = pressure_spectral(additive_phi()?)?;
            return Ok(PressureEstimate { method, finite_n_values: Vec::new(), extrapolated: p, error_bar: 0.0 });
        }
        PressureMethod::Cylinder => cylinder_log_sums(additive_phi()?, n_max),
        PressureMethod::Periodic => match input {
            PressureInput::Potential(phi) => periodic_log_sums(&AdditiveSequence::new(phi.clone()), n_max)?,
            PressureInput::Sequence(seq) => periodic_log_sums(seq, n_max)?,
        },
    };
    let tail: Vec<(usize, f64)> = (n_min..=n_max).map(|n| (n, logs[n - 1])).collect();
    let (extrapolated, error_bar) = extrapolate_log_sums(&tail);
    let finite_n_values = tail.iter().filter(|p| p.1.is_finite()).map(|&(n, l)| (n, l / n as f64)).collect();
    Ok(PressureEstimate { method, finite_n_values, extrapolated, error_bar })
}

/// Two-sided comparison `|P(Φ) − P(ρ_k)| ≤ 2ε̄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaApproxReport {
    pub k: usize,
    /// Largest asymptotic defect over `n ∈ [n_max/2, n_max]`.
    pub epsilon_bar: f64,
    pub pressure_rho: f64,
    pub pressure_sequence: PressureEstimate,
    pub holds: bool,
}

pub fn lemma_approx_check(seq: &dyn PotentialSequence, k: usize, n_max: usize) -> Result<LemmaApproxReport> {
    if n_max < 2 {
        return Err(Error::InvalidArgument("n_max must be at least 2".into()));
    }
    let rho = seq
        .approximant(k)
        .ok_or_else(|| Error::InvalidArgument("sequence has no approximating family".into()))?;
    let mut epsilon_bar: f64 = 0.0;
    for n in (n_max / 2).max(1)..=n_max {
        epsilon_bar = epsilon_bar.max(asymptotic_defect(seq, &rho, n)?);
    }
    let pressure_rho = pressure_spectral(&rho)?;
    let est = pressure_limit(PressureMethod::Periodic, PressureInput::Sequence(seq), 1, n_max)?;
    let slack = 2.0 * epsilon_bar + est.error_bar + 1e-12;
    let holds = (est.extrapolated - pressure_rho).abs() <= slack;
    Ok(LemmaApproxReport { k, epsilon_bar, pressure_rho, pressure_sequence: est, holds })
}

/// One candidate of a variational check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalEntry {
    pub entropy: f64,
    pub integral: f64,
    /// `P(φ) − (h(μ) + ∫φ dμ)`.
    pub gap: f64,
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalReport {
    pub pressure: f64,
    pub entries: Vec<VariationalEntry>,
    pub best_index: usize,
    pub best_gap: f64,
    /// Every candidate satisfies `h + ∫φ ≤ P + 1e−10`.
    pub holds: bool,
}

/// Checks `h(μ) + ∫φ dμ ≤ P(φ)` on a family of invariant Markov measures.
pub fn variational_check(phi: &LocallyConstantPotential, family: &[MarkovMeasure]) -> Result<VariationalReport> {
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty measure family".into()));
    }
    let pressure = pressure_spectral(phi)?;
    let mut entries = Vec::with_capacity(family.len());
    for mu in family {
        if mu.system() != phi.system() {
            return Err(Error::InvalidMeasure("measure lives on a different transition system".into()));
        }
        mu.check_invariant(1e-10)?;
        let entropy = mu.entropy();
        let integral = crate::measures::integrate(phi, mu);
        let gap = pressure - (entropy + integral);
        entries.push(VariationalEntry { entropy, integral, gap, within_bound: gap >= -1e-10 });
    }
    let best_index = (0..entries.len())
        .min_by(|&a, &b| entries[a].gap.total_cmp(&entries[b].gap))
        .expect("family is nonempty");
    let best_gap = entries[best_index].gap;
    let holds = entries.iter().all(|e| e.within_bound);
    Ok(VariationalReport { pressure, entries, best_index, best_gap, holds })
}
