//! Cylinder measures: Markov chains of any memory, Ruelle–Perron–Frobenius
//! Gibbs measures of locally constant potentials, tabulated oracles, and the
//! weak Gibbs certificate.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{ls_slope, pairwise_sum, perron_power_iteration, stationary_distribution, transpose};
use crate::numeric::{POWER_MAX_ITER, POWER_TOL};
use crate::potentials::{AdditiveSequence, LocallyConstantPotential, PotentialSequence};
use crate::pressure::{pressure_spectral, BlockMatrix};
use crate::sft::TransitionSystem;

/// Answers `μ(C_w)` for words over a transition system.
pub trait CylinderMeasure: Send + Sync {
    fn system(&self) -> &TransitionSystem;

    /// Mass of the cylinder of `word`; `1` for the empty word and `0` for
    /// inadmissible words.
    fn mass(&self, word: &[usize]) -> f64;
}

impl<T: CylinderMeasure + ?Sized> CylinderMeasure for std::sync::Arc<T> {
    fn system(&self) -> &TransitionSystem {
        (**self).system()
    }

    fn mass(&self, word: &[usize]) -> f64 {
        (**self).mass(word)
    }
}

/// Stationary Markov chain on admissible `order`-blocks. Order 1 is the usual
/// chain on symbols; higher orders arise from block recodings.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMeasure {
    ts: TransitionSystem,
    order: usize,
    states: Vec<Vec<usize>>,
    code_to_state: Vec<usize>,
    q: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

const NO_STATE: usize = usize::MAX;

fn block_code(k: usize, w: &[usize]) -> usize {
    w.iter().fold(0, |acc, &s| acc * k + (s - 1))
}

impl MarkovMeasure {
    /// Order-1 chain with transition matrix `q` and stationary vector `pi`.
    pub fn new(ts: &TransitionSystem, q: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        Self::with_order(ts, 1, q, pi)
    }

    /// Order-1 chain; the stationary vector is solved for.
    pub fn from_transition(ts: &TransitionSystem, q: Vec<Vec<f64>>) -> Result<Self> {
        let pi = stationary_distribution(&q).map_err(|e| Error::InvalidMeasure(format!("no stationary vector: {e}")))?;
        // tiny negative entries from the solve are rounding noise
        let pi: Vec<f64> = pi.into_iter().map(|x| if x < 0.0 && x > -1e-14 { 0.0 } else { x }).collect();
        Self::new(ts, q, pi)
    }

    /// Product measure with symbol weights `p` on a full shift.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        let ts = TransitionSystem::full_shift(p.len());
        let q = vec![p.to_vec(); p.len()];
        Self::new(&ts, q, p.to_vec())
    }

    /// Measure of maximal entropy (Parry measure) of a mixing system.
    pub fn parry(ts: &TransitionSystem) -> Result<Self> {
        Ok(build_rpf(&LocallyConstantPotential::constant(ts, 0.0))?.measure)
    }

    /// Chain on admissible `order`-blocks (lexicographic order). `q[u][v]`
    /// may be positive only when block `v` follows block `u` by one shift.
    pub fn with_order(ts: &TransitionSystem, order: usize, q: Vec<Vec<f64>>, pi: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidMeasure("order must be positive".into()));
        }
        let k = ts.k();
        let states: Vec<Vec<usize>> = ts.cylinders(order).map(|w| w.into_vec()).collect();
        let m = states.len();
        if q.len() != m || q.iter().any(|r| r.len() != m) || pi.len() != m {
            return Err(Error::InvalidMeasure(format!("expected {m}×{m} transition matrix and {m} stationary weights")));
        }
        let mut code_to_state = vec![NO_STATE; k.pow(order as u32)];
        for (i, s) in states.iter().enumerate() {
            code_to_state[block_code(k, s)] = i;
        }
        for (i, row) in q.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidMeasure(format!("transition entry ({}, {}) is {x}", i + 1, j + 1)));
                }
                let follows = states[i][1..] == states[j][..order - 1] && ts.allowed(states[i][order - 1], states[j][order - 1]);
                if x > 0.0 && !follows {
                    return Err(Error::InvalidMeasure(format!(
                        "positive transition between non-consecutive states {:?} → {:?}",
                        states[i], states[j]
                    )));
                }
                sum += x;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMeasure(format!("row {} sums to {sum}", i + 1)));
            }
        }
        if pi.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidMeasure("stationary weights must be nonnegative".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("stationary weights sum to {total}")));
        }
        for j in 0..m {
            let s: f64 = (0..m).map(|i| pi[i] * q[i][j]).sum();
            if (s - pi[j]).abs() > 1e-10 {
                return Err(Error::InvalidMeasure(format!("pi is not stationary at state {}", j + 1)));
            }
        }
        Ok(MarkovMeasure { ts: ts.clone(), order, states, code_to_state, q, pi })
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> &[Vec<usize>] {
        &self.states
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    fn state(&self, block: &[usize]) -> usize {
        self.code_to_state[block_code(self.ts.k(), block)]
    }

    /// `π_{w_1} Π Q_{w_j w_{j+1}}` (on blocks for higher order), multiplied
    /// left to right; marginal sums for words shorter than the order.
    pub fn cylinder_mass(&self, word: &[usize]) -> Result<f64> {
        if !self.ts.is_admissible(word) {
            return Err(Error::Inadmissible(word.to_vec()));
        }
        let b = self.order;
        if word.len() < b {
            let mut s = 0.0;
            for (i, st) in self.states.iter().enumerate() {
                if st.starts_with(word) {
                    s += self.pi[i];
                }
            }
            return Ok(s);
        }
        let mut cur = self.state(&word[..b]);
        let mut m = self.pi[cur];
        for j in 1..=word.len() - b {
            let next = self.state(&word[j..j + b]);
            m *= self.q[cur][next];
            cur = next;
        }
        Ok(m)
    }

    /// `−Σ_u π_u Σ_v Q_uv log Q_uv` with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        let terms: Vec<f64> = (0..self.states.len())
            .flat_map(|u| {
                self.q[u]
                    .iter()
                    .map(move |&x| if x > 0.0 { -self.pi[u] * x * x.ln() } else { 0.0 })
                    .collect::<Vec<_>>()
            })
            .collect();
        pairwise_sum(&terms)
    }

    /// Errors unless `π Q = π` within `tol`.
    pub fn check_invariant(&self, tol: f64) -> Result<()> {
        let m = self.states.len();
        for j in 0..m {
            let s: f64 = (0..m).map(|i| self.pi[i] * self.q[i][j]).sum();
            if (s - self.pi[j]).abs() > tol {
                return Err(Error::InvalidMeasure(format!("measure is not shift-invariant at state {}", j + 1)));
            }
        }
        Ok(())
    }

    /// Potential `φ` with `log μ(C_w) = S_nφ + O(1)`: `log p_s` (depth 1) for
    /// product measures, `log Q` on `(order+1)`-words otherwise.
    pub fn log_weight_potential(&self) -> Result<LocallyConstantPotential> {
        let product = self.order == 1 && self.ts == TransitionSystem::full_shift(self.ts.k()) && self.q.windows(2).all(|w| w[0] == w[1]);
        let check = |x: f64, w: &[usize]| {
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::InvalidPotential(format!("zero transition weight on admissible word {w:?}")))
            }
        };
        if product {
            let row = &self.q[0];
            let mut vals = Vec::with_capacity(row.len());
            for (s, &x) in row.iter().enumerate() {
                vals.push(check(x, &[s + 1])?);
            }
            return LocallyConstantPotential::depth_one(&self.ts, &vals);
        }
        let b = self.order;
        let entries: Result<Vec<(Vec<usize>, f64)>> = self
            .ts
            .cylinders(b + 1)
            .map(|w| {
                let w = w.into_vec();
                let x = self.q[self.state(&w[..b])][self.state(&w[1..])];
                check(x, &w).map(|v| (w, v))
            })
            .collect();
        LocallyConstantPotential::from_table(&self.ts, b + 1, entries?)
    }
}

impl CylinderMeasure for MarkovMeasure {
    fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    fn mass(&self, word: &[usize]) -> f64 {
        self.cylinder_mass(word).unwrap_or(0.0)
    }
}

/// Equilibrium data of a locally constant potential.
#[derive(Debug, Clone, PartialEq)]
pub struct RpfGibbs {
    pub potential: LocallyConstantPotential,
    pub blocks: BlockMatrix,
    /// `P(φ) = log λ`.
    pub log_lambda: f64,
    /// Right Perron vector of the shifted block matrix (sums to 1).
    pub right: Vec<f64>,
    /// Left Perron vector, scaled so that `ν·h = 1`.
    pub left: Vec<f64>,
    pub measure: MarkovMeasure,
    /// Largest `K*(n)` over `n ≤ 12`.
    pub max_ratio: f64,
    /// `1 + 2 (max_ratio − 1)`.
    pub constant: f64,
}

impl RpfGibbs {
    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }
}

/// Depth up to which the RPF Gibbs constant is measured.
pub const RPF_CONSTANT_DEPTH: usize = 12;

/// Perron data and the induced Markov measure of `φ`.
pub fn build_rpf(phi: &LocallyConstantPotential) -> Result<RpfGibbs> {
    let ts = phi.system();
    if !ts.is_mixing() {
        return Err(Error::NotMixing);
    }
    let bm = BlockMatrix::new(phi);
    let right = perron_power_iteration(&bm.matrix, POWER_TOL, POWER_MAX_ITER)?;
    let left_pair = perron_power_iteration(&transpose(&bm.matrix), POWER_TOL, POWER_MAX_ITER)?;
    let lambda = right.eigenvalue;
    let h = right.vector;
    let dot: f64 = left_pair.vector.iter().zip(&h).map(|(a, b)| a * b).sum();
    let nu: Vec<f64> = left_pair.vector.iter().map(|x| x / dot).collect();
    let m = bm.blocks.len();
    let mut q = vec![vec![0.0; m]; m];
    for u in 0..m {
        for v in 0..m {
            if bm.matrix[u][v] > 0.0 {
                q[u][v] = bm.matrix[u][v] * h[v] / (lambda * h[u]);
            }
        }
        let s: f64 = q[u].iter().sum();
        for x in q[u].iter_mut() {
            *x /= s;
        }
    }
    let raw: Vec<f64> = nu.iter().zip(&h).map(|(a, b)| a * b).collect();
    let total: f64 = raw.iter().sum();
    let pi: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let measure = MarkovMeasure::with_order(ts, bm.block_len, q, pi)?;
    let log_lambda = lambda.ln() + bm.shift;
    let add = AdditiveSequence::new(phi.clone());
    let mut max_log: f64 = 0.0;
    for n in 1..=RPF_CONSTANT_DEPTH {
        max_log = max_log.max(ratio_extremes(&measure, &add, log_lambda, n)?.0);
    }
    let max_ratio = max_log.exp();
    Ok(RpfGibbs {
        potential: phi.clone(),
        blocks: bm,
        log_lambda,
        right: h,
        left: nu,
        measure,
        max_ratio,
        constant: 1.0 + 2.0 * (max_ratio - 1.0),
    })
}

/// `log μ(w) − φ_n + nP`, the logarithm of the Gibbs ratio. Shared by the
/// certificate and the sandwich check so both see identical roundings.
#[inline]
pub fn log_gibbs_ratio(ln_mu: f64, phi_n: f64, n: usize, p: f64) -> f64 {
    (ln_mu - phi_n) + n as f64 * p
}

/// `(max |log r|, min log r, max log r)` over admissible `n`-words and their
/// extensions to the dependence length of `φ_n`.
fn ratio_extremes(mu: &dyn CylinderMeasure, seq: &dyn PotentialSequence, p: f64, n: usize) -> Result<(f64, f64, f64)> {
    let ts = seq.system();
    let dep = seq.dependence(n).ok_or(Error::InexactSequence)?.max(n);
    let parts: Vec<Result<(f64, f64)>> = (1..=ts.k())
        .into_par_iter()
        .map(|first| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut prefix: Vec<usize> = Vec::new();
            let mut ln_mu = 0.0;
            let mut c = ts.cursor_from(dep, first);
            while c.advance() {
                let w = c.current();
                if prefix.is_empty() || prefix.as_slice() != &w[..n] {
                    prefix.clear();
                    prefix.extend_from_slice(&w[..n]);
                    let m = mu.mass(&prefix);
                    if !(m > 0.0) {
                        return Err(Error::ZeroMass(prefix.clone()));
                    }
                    ln_mu = m.ln();
                }
                let r = log_gibbs_ratio(ln_mu, seq.value_on_word(n, w)?, n, p);
                lo = lo.min(r);
                hi = hi.max(r);
            }
            Ok((lo, hi))
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for part in parts {
        let (a, b) = part?;
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((hi.abs().max(lo.abs()), lo, hi))
}

/// Outcome of a weak Gibbs certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// Bounded ratios: a Gibbs measure with the given constant.
    Gibbs { constant: f64 },
    /// Finite-range evidence only; not a proof of sub-exponential growth.
    ConsistentWeakGibbs { tau: f64 },
    Rejected,
}

impl Verdict {
    pub fn is_gibbs(&self) -> bool {
        matches!(self, Verdict::Gibbs { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Gibbs { .. } => "gibbs",
            Verdict::ConsistentWeakGibbs { .. } => "consistent-weak-gibbs",
            Verdict::Rejected => "rejected",
        }
    }
}

/// Slope tolerance below which `log K*(n)` counts as bounded.
pub const GIBBS_SLOPE_TOL: f64 = 1e-9;
/// Rounding allowance when testing `log K*(n)/n` for monotonicity.
pub const MONOTONE_TOL: f64 = 1e-13;

/// Exact optimal constants `K*(n)` and the verdict drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakGibbsCertificate {
    pub p_used: f64,
    /// `(n, log K*(n))`, the exact optimal constant at each `n`.
    pub log_kstar: Vec<(usize, f64)>,
    /// `log K*(n_max) / n_max`.
    pub rate: f64,
    /// Least-squares slope of `log K*(n)` over `n ∈ [n_max/2, n_max]`.
    pub tail_slope: f64,
    /// `P` corrected by the drift of `log μ(w) − φ_n + nP`; equals `p_used`
    /// when the supplied `P` is the pressure the measure is Gibbs for.
    pub implied_pressure: f64,
    pub verdict: Verdict,
}

impl WeakGibbsCertificate {
    pub fn kstar(&self) -> Vec<(usize, f64)> {
        self.log_kstar.iter().map(|&(n, l)| (n, l.exp())).collect()
    }

    pub fn log_kstar_at(&self, n: usize) -> Option<f64> {
        self.log_kstar.iter().find(|p| p.0 == n).map(|p| p.1)
    }

    /// Largest `K*(n)` over the certified range.
    pub fn max_kstar(&self) -> f64 {
        self.log_kstar.iter().map(|p| p.1).fold(0.0, f64::max).exp()
    }

    /// Tail of `log K*(n)/n` nonincreasing (up to [`MONOTONE_TOL`]) and final
    /// value below `tau`.
    pub fn consistent_weak_gibbs(&self, tau: f64) -> bool {
        let n_max = self.log_kstar.last().map(|p| p.0).unwrap_or(0);
        let tail: Vec<f64> = self.log_kstar.iter().filter(|p| p.0 >= n_max / 2).map(|p| p.1 / p.0 as f64).collect();
        tail.windows(2).all(|w| w[1] <= w[0] + MONOTONE_TOL) && self.rate < tau
    }
}

/// Computes `K*(n)` for `n ≤ n_max` by exhaustive enumeration and assigns a
/// verdict. `P` is taken as given; the implied pressure is reported.
pub fn certify_weak_gibbs(
    mu: &dyn CylinderMeasure,
    seq: &dyn PotentialSequence,
    p: f64,
    n_max: usize,
    tau: f64,
) -> Result<WeakGibbsCertificate> {
    if n_max < 4 {
        return Err(Error::InvalidArgument("certification needs n_max ≥ 4".into()));
    }
    if mu.system() != seq.system() {
        return Err(Error::InvalidArgument("measure and sequence live on different systems".into()));
    }
    let mut log_kstar = Vec::with_capacity(n_max);
    let mut centers = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (lk, lo, hi) = ratio_extremes(mu, seq, p, n)?;
        log_kstar.push((n, lk));
        centers.push((n as f64, 0.5 * (lo + hi)));
    }
    let start = (n_max / 2).max(1);
    let tail: Vec<(f64, f64)> = log_kstar.iter().filter(|q| q.0 >= start).map(|&(n, l)| (n as f64, l)).collect();
    let tail_slope = ls_slope(&tail).unwrap_or(0.0);
    let drift = ls_slope(&centers[start - 1..]).unwrap_or(0.0);
    let rate = log_kstar[n_max - 1].1 / n_max as f64;
    let mut cert = WeakGibbsCertificate {
        p_used: p,
        log_kstar,
        rate,
        tail_slope,
        implied_pressure: p - drift,
        verdict: Verdict::Rejected,
    };
    cert.verdict = if tail_slope.abs() <= GIBBS_SLOPE_TOL {
        Verdict::Gibbs { constant: cert.max_kstar() }
    } else if cert.consistent_weak_gibbs(tau) {
        Verdict::ConsistentWeakGibbs { tau }
    } else {
        Verdict::Rejected
    };
    Ok(cert)
}

/// `K(n) = exp(η_φ(n))`, the constant sequence from the oscillation of
/// Birkhoff sums on `n`-cylinders.
pub fn kessebohmer_bound(phi: &LocallyConstantPotential, n: usize) -> f64 {
    phi.eta(n).exp()
}

/// Search for `n` with `sup (1/n) S_nφ < P(φ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomFreeReport {
    pub pressure: f64,
    /// `(n, max over (n+d−1)-words of S_nφ / n)`.
    pub sups: Vec<(usize, f64)>,
    pub witness: Option<usize>,
}

/// Smallest `n ≤ n_max` with `sup (1/n) S_nφ < P(φ) − 1e−12`. Such an `n`
/// makes every equilibrium (weak) Gibbs measure of `φ` atom free. The first
/// witness may only appear for some `n > 1`.
pub fn atomfree_check(phi: &LocallyConstantPotential, n_max: usize) -> Result<AtomFreeReport> {
    let pressure = pressure_spectral(phi)?;
    let ts = phi.system();
    let mut sups = Vec::with_capacity(n_max);
    let mut witness = None;
    for n in 1..=n_max {
        let mut best = f64::NEG_INFINITY;
        let mut c = ts.cursor(n + phi.depth() - 1);
        while c.advance() {
            best = best.max(phi.birkhoff_sum_word(c.current(), n));
        }
        let s = best / n as f64;
        sups.push((n, s));
        if witness.is_none() && s < pressure - 1e-12 {
            witness = Some(n);
            break;
        }
    }
    Ok(AtomFreeReport { pressure, sups, witness })
}

/// `Σ_{|w| = d} μ(w) φ(w)`.
pub fn integrate(phi: &LocallyConstantPotential, mu: &dyn CylinderMeasure) -> f64 {
    let terms: Vec<f64> = phi.system().cylinders(phi.depth()).map(|w| mu.mass(w.as_slice()) * phi.value(w.as_slice())).collect();
    pairwise_sum(&terms)
}

/// Largest `|μ(w) − Σ_s μ(w·s)|` over admissible words of length `< max_len`
/// (including the empty word) and the word attaining it.
pub fn additivity_defect(mu: &dyn CylinderMeasure, max_len: usize) -> (f64, Vec<usize>) {
    let ts = mu.system();
    let mut worst = (0.0, Vec::new());
    let mut check = |w: &[usize]| {
        let children: f64 = (1..=ts.k())
            .filter(|&s| w.last().is_none_or(|&l| ts.allowed(l, s)))
            .map(|s| {
                let mut ws = w.to_vec();
                ws.push(s);
                mu.mass(&ws)
            })
            .sum();
        let d = (mu.mass(w) - children).abs();
        if d > worst.0 {
            worst = (d, w.to_vec());
        }
    };
    check(&[]);
    for n in 1..max_len {
        let mut c = ts.cursor(n);
        while c.advance() {
            check(c.current());
        }
    }
    worst
}

/// Largest `|μ(w) − Σ_s μ(s·w)|` over admissible words of length
/// `1..=max_len` and the word attaining it.
pub fn invariance_defect(mu: &dyn CylinderMeasure, max_len: usize) -> (f64, Vec<usize>) {
    let ts = mu.system();
    let mut worst = (0.0, Vec::new());
    let mut sw = Vec::new();
    for n in 1..=max_len {
        let mut c = ts.cursor(n);
        while c.advance() {
            let w = c.current();
            let mut pre = 0.0;
            for s in 1..=ts.k() {
                if ts.allowed(s, w[0]) {
                    sw.clear();
                    sw.push(s);
                    sw.extend_from_slice(w);
                    pre += mu.mass(&sw);
                }
            }
            let d = (mu.mass(w) - pre).abs();
            if d > worst.0 {
                worst = (d, w.to_vec());
            }
        }
    }
    worst
}

/// Oracle given by a table of masses of all admissible words up to length
/// `L`, extended beyond `L` as the Markov chain with memory `L − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedMeasure {
    ts: TransitionSystem,
    max_len: usize,
    masses: HashMap<Vec<usize>, f64>,
}

/// Absolute tolerance for additivity of tabulated masses.
pub const ADDITIVITY_TOL: f64 = 1e-12;

impl TabulatedMeasure {
    /// Validates totality, positivity and additivity of the table.
    pub fn new(ts: &TransitionSystem, entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Result<Self> {
        let mut masses = HashMap::new();
        let mut max_len = 0;
        for (w, m) in entries {
            if w.is_empty() {
                return Err(Error::InvalidMeasure("the empty word has mass 1 and is not listed".into()));
            }
            if !ts.is_admissible(&w) {
                return Err(Error::InvalidMeasure(format!("word {w:?} is not admissible")));
            }
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidMeasure(format!("word {w:?} has non-positive mass {m}")));
            }
            max_len = max_len.max(w.len());
            if masses.insert(w.clone(), m).is_some() {
                return Err(Error::InvalidMeasure(format!("word {w:?} listed twice")));
            }
        }
        if max_len == 0 {
            return Err(Error::InvalidMeasure("empty table".into()));
        }
        for n in 1..=max_len {
            let mut c = ts.cursor(n);
            while c.advance() {
                if !masses.contains_key(c.current()) {
                    return Err(Error::InvalidMeasure(format!("missing mass for word {:?}", c.current())));
                }
            }
        }
        let table = TabulatedMeasure { ts: ts.clone(), max_len, masses };
        let (d, w) = additivity_defect(&table, max_len);
        if d > ADDITIVITY_TOL {
            return Err(Error::InvalidMeasure(format!(
                "additivity violated at word {w:?}: mass differs from the sum over one-symbol extensions by {d:e}"
            )));
        }
        Ok(table)
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Table entries in lexicographic order.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        let mut v: Vec<_> = self.masses.iter().map(|(w, &m)| (w.clone(), m)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// Tabulates any oracle up to length `max_len`.
    pub fn from_oracle(mu: &dyn CylinderMeasure, max_len: usize) -> Result<Self> {
        let ts = mu.system();
        let mut entries = Vec::new();
        for n in 1..=max_len {
            for w in ts.cylinders(n) {
                let m = mu.mass(w.as_slice());
                entries.push((w.into_vec(), m));
            }
        }
        Self::new(ts, entries)
    }
}

impl CylinderMeasure for TabulatedMeasure {
    fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    fn mass(&self, word: &[usize]) -> f64 {
        if word.is_empty() {
            return 1.0;
        }
        if !self.ts.is_admissible(word) {
            return 0.0;
        }
        let l = self.max_len;
        if word.len() <= l {
            return self.masses[word];
        }
        let mut m = self.masses[&word[..l]];
        for j in l..word.len() {
            let ctx = &word[j + 1 - l..j];
            let joint = self.masses[&word[j + 1 - l..=j]];
            let norm = if ctx.is_empty() {
                (1..=self.ts.k())
                    .filter(|&s| self.ts.allowed(word[j - 1], s))
                    .map(|s| self.masses[&vec![s]])
                    .sum::<f64>()
            } else {
                self.masses[ctx]
            };
            m *= joint / norm;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::random_word;
    use crate::pressure::pressure_spectral;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GOLDEN: f64 = 1.618033988749895;

    #[test]
    fn markov_mass_examples() {
        let b = MarkovMeasure::bernoulli(&[0.5, 0.5]).unwrap();
        assert_eq!(b.cylinder_mass(&[1, 2, 1]).unwrap(), 0.125);
        let b = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        assert!((b.cylinder_mass(&[2, 2]).unwrap() - 0.49).abs() < 1e-16);
        let g = TransitionSystem::golden_mean();
        let q = vec![vec![1.0 / (GOLDEN * GOLDEN), 1.0 / GOLDEN], vec![1.0, 0.0]];
        let mu = MarkovMeasure::from_transition(&g, q.clone()).unwrap();
        // stationary vector solved by hand: pi ∝ (1, 1/φ)
        let pi1 = GOLDEN / (GOLDEN + 1.0);
        assert!((mu.stationary()[0] - pi1).abs() < 1e-14);
        assert!((mu.cylinder_mass(&[1, 1]).unwrap() - pi1 * q[0][0]).abs() < 1e-15);
        assert!(mu.cylinder_mass(&[2, 2]).is_err());
    }

    #[test]
    fn markov_validation() {
        let g = TransitionSystem::golden_mean();
        assert!(MarkovMeasure::from_transition(&g, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).is_err());
        let full = TransitionSystem::full_shift(2);
        assert!(MarkovMeasure::new(&full, vec![vec![0.5, 0.6], vec![0.5, 0.5]], vec![0.5, 0.5]).is_err());
        assert!(MarkovMeasure::new(&full, vec![vec![0.9, 0.1], vec![0.5, 0.5]], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn rpf_examples() {
        let full = TransitionSystem::full_shift(2);
        let zero = build_rpf(&LocallyConstantPotential::constant(&full, 0.0)).unwrap();
        assert!((zero.lambda() - 2.0).abs() < 1e-13);
        assert!((zero.constant - 1.0).abs() < 1e-12);
        for w in [[1, 2, 2], [2, 1, 1]] {
            assert!((zero.measure.mass(&w) - 0.125).abs() < 1e-15);
        }

        let phi = LocallyConstantPotential::depth_one(&full, &[0.3f64.ln(), 0.7f64.ln()]).unwrap();
        let rpf = build_rpf(&phi).unwrap();
        assert!((rpf.lambda() - 1.0).abs() < 1e-13);
        let bern = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        for n in 1..=6 {
            for w in full.cylinders(n) {
                assert!((rpf.measure.mass(w.as_slice()) - bern.mass(w.as_slice())).abs() < 1e-14);
            }
        }

        let g = TransitionSystem::golden_mean();
        let parry = build_rpf(&LocallyConstantPotential::constant(&g, 0.0)).unwrap();
        // eigenvectors of [[1,1],[1,0]] are ∝ (φ, 1)
        assert!((parry.right[0] / parry.right[1] - GOLDEN).abs() < 1e-11);
        assert!((parry.left[0] / parry.left[1] - GOLDEN).abs() < 1e-11);
        assert!((parry.measure.entropy() - GOLDEN.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert!((MarkovMeasure::bernoulli(&[0.5, 0.5]).unwrap().entropy() - 2f64.ln()).abs() < 1e-15);
        let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
        assert!((MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap().entropy() - h).abs() < 1e-15);
        assert!((h - 0.6108643020548935).abs() < 1e-9);
    }

    #[test]
    fn integrals() {
        let full = TransitionSystem::full_shift(2);
        let b = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        let phi = LocallyConstantPotential::depth_one(&full, &[2.0, -1.0]).unwrap();
        assert!((integrate(&phi, &b) - (0.3 * 2.0 - 0.7)).abs() < 1e-15);
        assert_eq!(integrate(&LocallyConstantPotential::constant(&full, 0.0), &b), 0.0);

        // ergodic average along a long sampled orbit
        let mu = MarkovMeasure::from_transition(&full, vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        let psi = LocallyConstantPotential::from_table(
            &full,
            2,
            vec![(vec![1, 1], 1.0), (vec![1, 2], -2.0), (vec![2, 1], 0.5), (vec![2, 2], 3.0)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let len = 400_000;
        let mut path = vec![1];
        while path.len() < len + 1 {
            let cur = *path.last().unwrap();
            let u: f64 = rng.gen();
            path.push(if u < mu.transition()[cur - 1][0] { 1 } else { 2 });
        }
        let avg = psi.birkhoff_sum_word(&path, len) / len as f64;
        assert!((integrate(&psi, &mu) - avg).abs() < 1e-2);
        let exact: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| mu.stationary()[i] * mu.transition()[i][j] * psi.value(&[i + 1, j + 1]))
            .sum();
        assert!((integrate(&psi, &mu) - exact).abs() < 1e-15);
    }

    #[test]
    fn certificate_examples() {
        let full = TransitionSystem::full_shift(2);
        let bern = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        let phi = bern.log_weight_potential().unwrap();
        let cert = certify_weak_gibbs(&bern, &AdditiveSequence::new(phi), 0.0, 10, 0.1).unwrap();
        assert!(cert.verdict.is_gibbs());
        assert!(cert.max_kstar() - 1.0 < 1e-13);

        let mu = MarkovMeasure::from_transition(&full, vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap();
        let psi = mu.log_weight_potential().unwrap();
        assert_eq!(psi.depth(), 2);
        let cert = certify_weak_gibbs(&mu, &AdditiveSequence::new(psi), 0.0, 10, 0.1).unwrap();
        assert!(cert.verdict.is_gibbs());
        // ratio telescopes to π_{w1} / Q_{w_n e}
        let bound = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (mu.stationary()[i] / mu.transition()[i][j]).ln().abs().max((mu.transition()[i][j] / mu.stationary()[i]).ln().abs()))
            .fold(0.0, f64::max);
        assert!(cert.max_kstar().ln() <= bound + 1e-12);

        let wrong = certify_weak_gibbs(&mu, &AdditiveSequence::new(mu.log_weight_potential().unwrap()), 0.2, 10, 0.1).unwrap();
        assert_eq!(wrong.verdict, Verdict::Rejected);
        assert!((wrong.implied_pressure - 0.0).abs() < 1e-9);
    }

    #[test]
    fn rpf_certificate_respects_constants() {
        let ts = TransitionSystem::full_shift(3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let phi = LocallyConstantPotential::from_fn(&ts, 2, |_| rng.gen_range(-1.0..1.0)).unwrap();
        let rpf = build_rpf(&phi).unwrap();
        assert!(rpf.constant >= 1.0);
        assert!((rpf.log_lambda - pressure_spectral(&phi).unwrap()).abs() < 1e-12);
        let cert = certify_weak_gibbs(&rpf.measure, &AdditiveSequence::new(phi.clone()), rpf.log_lambda, 10, 0.1).unwrap();
        match cert.verdict {
            Verdict::Gibbs { constant } => assert!(constant <= rpf.constant),
            v => panic!("unexpected verdict {v:?}"),
        }
        for &(n, lk) in &cert.log_kstar {
            assert!(lk <= rpf.constant.ln() + phi.eta(n) + 1e-12);
        }
        assert!(cert.consistent_weak_gibbs(cert.rate * 1.01));
    }

    #[test]
    fn kessebohmer_examples() {
        let ts = TransitionSystem::full_shift(2);
        let d1 = LocallyConstantPotential::depth_one(&ts, &[0.1, 0.9]).unwrap();
        assert_eq!(kessebohmer_bound(&d1, 4), 1.0);
        let d2 = LocallyConstantPotential::from_table(
            &ts,
            2,
            vec![(vec![1, 1], 0.0), (vec![1, 2], 1.0), (vec![2, 1], 0.0), (vec![2, 2], 3.0)],
        )
        .unwrap();
        assert_eq!(kessebohmer_bound(&d2, 2), 3f64.exp());
        assert_eq!(kessebohmer_bound(&LocallyConstantPotential::constant(&ts, 2.0), 3), 1.0);
    }

    #[test]
    fn atomfree_trivial_witnesses() {
        let ts = TransitionSystem::full_shift(2);
        let zero = atomfree_check(&LocallyConstantPotential::constant(&ts, 0.0), 4).unwrap();
        assert_eq!(zero.witness, Some(1));
        let bern = LocallyConstantPotential::depth_one(&ts, &[0.3f64.ln(), 0.7f64.ln()]).unwrap();
        assert_eq!(atomfree_check(&bern, 4).unwrap().witness, Some(1));
    }

    #[test]
    fn invariance_and_additivity_of_oracles() {
        let ts = TransitionSystem::new(vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 1..=3 {
            let phi = LocallyConstantPotential::from_fn(&ts, d, |_| rng.gen_range(-1.0..1.0)).unwrap();
            let rpf = build_rpf(&phi).unwrap();
            assert!(additivity_defect(&rpf.measure, 7).0 < 1e-12);
            assert!(invariance_defect(&rpf.measure, 6).0 < 1e-12);
        }
    }

    #[test]
    fn tabulated_measures() {
        let g = TransitionSystem::golden_mean();
        let parry = MarkovMeasure::parry(&g).unwrap();
        let tab = TabulatedMeasure::from_oracle(&parry, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let w = random_word(&g, rng.gen_range(1..10), &mut rng);
            assert!((tab.mass(&w) - parry.mass(&w)).abs() < 1e-14);
        }
        assert!(additivity_defect(&tab, 8).0 < 1e-12);

        let mut entries = tab.entries();
        entries[3].1 *= 1.01;
        let err = TabulatedMeasure::new(&g, entries).unwrap_err();
        assert!(matches!(err, Error::InvalidMeasure(ref m) if m.contains("additivity")));
    }

    #[test]
    fn variational_examples() {
        use crate::pressure::variational_check;
        let full = TransitionSystem::full_shift(2);
        let zero = LocallyConstantPotential::constant(&full, 0.0);
        let rep = variational_check(&zero, &[MarkovMeasure::bernoulli(&[0.5, 0.5]).unwrap()]).unwrap();
        assert!(rep.best_gap.abs() < 1e-14);
        let rep = variational_check(&zero, &[MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap()]).unwrap();
        assert!((rep.best_gap - (2f64.ln() - 0.6108643020548935)).abs() < 1e-9);
        assert!(rep.holds);

        let phi = LocallyConstantPotential::depth_one(&full, &[0.4, -1.3]).unwrap();
        let rpf = build_rpf(&phi).unwrap();
        let fam = vec![MarkovMeasure::bernoulli(&[0.5, 0.5]).unwrap(), rpf.measure.clone()];
        let rep = variational_check(&phi, &fam).unwrap();
        assert_eq!(rep.best_index, 1);
        assert!(rep.best_gap.abs() <= 1e-8);
        assert!(rep.holds);
    }
}
