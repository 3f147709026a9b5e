//! Potentials and potential sequences.
//!
//! A [`LocallyConstantPotential`] is a table on admissible `d`-words; it is the
//! exact-arithmetic stand-in for a continuous potential (its `d`-th variation
//! is zero). Sequences `Φ = (φ_n)` implement [`PotentialSequence`]; when a
//! sequence declares how many leading symbols `φ_n` reads, suprema over
//! cylinders are computed by exhaustive enumeration instead of sampling.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ls_slope;
use crate::sft::{SymbolicPoint, TransitionSystem};

/// Potential that depends on the first `depth` coordinates only.
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyConstantPotential {
    ts: TransitionSystem,
    depth: usize,
    // dense base-k table; NaN marks inadmissible words
    values: Vec<f64>,
}

fn word_code(k: usize, word: &[usize]) -> usize {
    word.iter().fold(0, |acc, &s| acc * k + (s - 1))
}

impl LocallyConstantPotential {
    /// Tabulates `f` on every admissible `depth`-word.
    pub fn from_fn(ts: &TransitionSystem, depth: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidPotential("depth must be positive".into()));
        }
        let k = ts.k();
        let size = k
            .checked_pow(depth as u32)
            .filter(|&s| s <= 1 << 26)
            .ok_or_else(|| Error::InvalidPotential(format!("depth {depth} too large for alphabet {k}")))?;
        let mut values = vec![f64::NAN; size];
        let mut c = ts.cursor(depth);
        while c.advance() {
            let w = c.current();
            let v = f(w);
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("non-finite value on word {w:?}")));
            }
            values[word_code(k, w)] = v;
        }
        Ok(LocallyConstantPotential { ts: ts.clone(), depth, values })
    }

    /// Builds from explicit `(word, value)` entries; the table must cover every
    /// admissible `depth`-word exactly once and nothing else.
    pub fn from_table(
        ts: &TransitionSystem,
        depth: usize,
        entries: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidPotential("depth must be positive".into()));
        }
        let k = ts.k();
        let size = k
            .checked_pow(depth as u32)
            .filter(|&s| s <= 1 << 26)
            .ok_or_else(|| Error::InvalidPotential(format!("depth {depth} too large for alphabet {k}")))?;
        let mut values = vec![f64::NAN; size];
        for (w, v) in entries {
            if w.len() != depth {
                return Err(Error::InvalidPotential(format!("word {w:?} does not have length {depth}")));
            }
            if !ts.is_admissible(&w) {
                return Err(Error::InvalidPotential(format!("word {w:?} is not admissible")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidPotential(format!("non-finite value on word {w:?}")));
            }
            let code = word_code(k, &w);
            if !values[code].is_nan() {
                return Err(Error::InvalidPotential(format!("word {w:?} listed twice")));
            }
            values[code] = v;
        }
        let mut c = ts.cursor(depth);
        while c.advance() {
            if values[word_code(k, c.current())].is_nan() {
                return Err(Error::InvalidPotential(format!("missing value for word {:?}", c.current())));
            }
        }
        Ok(LocallyConstantPotential { ts: ts.clone(), depth, values })
    }

    /// Depth-1 potential with `values[i]` on symbol `i + 1`.
    pub fn depth_one(ts: &TransitionSystem, values: &[f64]) -> Result<Self> {
        if values.len() != ts.k() {
            return Err(Error::InvalidPotential(format!("expected {} values, got {}", ts.k(), values.len())));
        }
        Self::from_fn(ts, 1, |w| values[w[0] - 1])
    }

    pub fn constant(ts: &TransitionSystem, c: f64) -> Self {
        Self::from_fn(ts, 1, |_| c).expect("constant potential is valid")
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// φ on any point whose first `depth` symbols are `word[..depth]`.
    #[inline]
    pub fn value(&self, word: &[usize]) -> f64 {
        self.values[word_code(self.ts.k(), &word[..self.depth])]
    }

    pub fn evaluate(&self, point: &SymbolicPoint) -> f64 {
        self.value(&point.leading(self.depth))
    }

    /// `(word, value)` pairs in lexicographic order.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        self.ts.cylinders(self.depth).map(|w| {
            let v = self.value(w.as_slice());
            (w.into_vec(), v)
        }).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().filter(|v| !v.is_nan()).fold(f64::INFINITY, f64::min)
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v + c).collect();
        LocallyConstantPotential { ts: self.ts.clone(), depth: self.depth, values }
    }

    /// The same function tabulated at a larger depth.
    pub fn with_depth(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::InvalidPotential("cannot lower the depth of a potential".into()));
        }
        Self::from_fn(&self.ts, depth, |w| self.value(w))
    }

    /// `S_nφ` on a word of length at least `n + depth − 1`. Summed left to
    /// right starting from zero.
    pub fn birkhoff_sum_word(&self, word: &[usize], n: usize) -> f64 {
        debug_assert!(word.len() + 1 >= n + self.depth);
        let mut s = 0.0;
        for j in 0..n {
            s += self.value(&word[j..]);
        }
        s
    }

    /// `S_nφ(ω) = Σ_{j<n} φ(σ^j ω)`; reads coordinates `1..n+depth-1`.
    pub fn birkhoff_sum(&self, point: &SymbolicPoint, n: usize) -> f64 {
        self.birkhoff_sum_word(&point.leading(n + self.depth - 1), n)
    }

    /// `var_n(φ)`: zero for `n ≥ depth`, otherwise the largest spread of
    /// table values over the admissible extensions of an `n`-word.
    pub fn variation(&self, n: usize) -> f64 {
        if n >= self.depth {
            return 0.0;
        }
        max_spread_by_prefix(&self.ts, n, self.depth, |w| Ok(self.value(w))).expect("infallible")
    }

    /// `η_φ(n) = var_n(S_nφ)`, exact.
    ///
    /// For `n ≥ depth − 1` the windows fully inside the `n`-word cancel in the
    /// spread, so only the `depth − 1` trailing windows matter and the value
    /// is the same for every such `n`. It is zero only when those trailing
    /// windows do not depend on the extension (always for depth 1).
    pub fn eta(&self, n: usize) -> f64 {
        let d = self.depth;
        if d == 1 {
            return 0.0;
        }
        if n >= d - 1 {
            // spread over e of Σ_{j<d-1} φ((s·e)[j..j+d]) for each admissible (d-1)-word s
            max_spread_by_prefix(&self.ts, d - 1, 2 * (d - 1), |w| Ok(self.birkhoff_sum_word(w, d - 1)))
                .expect("infallible")
        } else {
            max_spread_by_prefix(&self.ts, n, n + d - 1, |w| Ok(self.birkhoff_sum_word(w, n))).expect("infallible")
        }
    }
}

/// Largest (max − min) of `value` over admissible `len`-words sharing an
/// `n`-prefix. Lexicographic enumeration keeps each group contiguous.
pub(crate) fn max_spread_by_prefix(
    ts: &TransitionSystem,
    n: usize,
    len: usize,
    mut value: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<f64> {
    let len = len.max(n);
    let mut best: f64 = 0.0;
    let mut prefix: Vec<usize> = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut c = ts.cursor(len);
    while c.advance() {
        let w = c.current();
        if prefix.as_slice() != &w[..n] || lo > hi {
            if lo <= hi {
                best = best.max(hi - lo);
            }
            prefix.clear();
            prefix.extend_from_slice(&w[..n]);
            lo = f64::INFINITY;
            hi = f64::NEG_INFINITY;
        }
        let v = value(w)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= hi {
        best = best.max(hi - lo);
    }
    Ok(best)
}

/// Which concrete family a sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Additive,
    ExplicitTable,
    MeasureDerived,
    Callback,
}

/// Evaluation contract for a sequence of potentials `Φ = (φ_n)_n`.
pub trait PotentialSequence: Send + Sync {
    fn system(&self) -> &TransitionSystem;

    fn kind(&self) -> SequenceKind;

    /// Number of leading coordinates `φ_n` reads, when declared.
    fn dependence(&self, n: usize) -> Option<usize>;

    /// `φ_n` on any point whose leading symbols are `word`
    /// (`word.len() ≥ dependence(n)`).
    fn value_on_word(&self, n: usize, word: &[usize]) -> Result<f64>;

    /// `φ_n(ω)`.
    fn value(&self, n: usize, point: &SymbolicPoint) -> f64 {
        let dep = self.dependence(n).expect("sequences without a dependence length must override value");
        self.value_on_word(n, &point.leading(dep)).expect("leading word has the declared length")
    }

    /// The potential `φ` when `φ_n = S_nφ`.
    fn additive_potential(&self) -> Option<&LocallyConstantPotential> {
        None
    }

    /// Approximating potential `ρ_k` with `limsup (1/n)‖φ_n − S_nρ_k‖ ≤ 1/k`.
    fn approximant(&self, _k: usize) -> Option<LocallyConstantPotential> {
        None
    }
}

/// `φ_n = S_nφ`.
#[derive(Debug, Clone)]
pub struct AdditiveSequence {
    phi: LocallyConstantPotential,
}

impl AdditiveSequence {
    pub fn new(phi: LocallyConstantPotential) -> Self {
        AdditiveSequence { phi }
    }

    pub fn potential(&self) -> &LocallyConstantPotential {
        &self.phi
    }
}

impl PotentialSequence for AdditiveSequence {
    fn system(&self) -> &TransitionSystem {
        self.phi.system()
    }

    fn kind(&self) -> SequenceKind {
        SequenceKind::Additive
    }

    fn dependence(&self, n: usize) -> Option<usize> {
        Some(n + self.phi.depth() - 1)
    }

    fn value_on_word(&self, n: usize, word: &[usize]) -> Result<f64> {
        if word.len() + 1 < n + self.phi.depth() {
            return Err(Error::InvalidArgument(format!("word of length {} too short for n = {n}", word.len())));
        }
        Ok(self.phi.birkhoff_sum_word(word, n))
    }

    fn additive_potential(&self) -> Option<&LocallyConstantPotential> {
        Some(&self.phi)
    }

    fn approximant(&self, _k: usize) -> Option<LocallyConstantPotential> {
        Some(self.phi.clone())
    }
}

type DepFn = Arc<dyn Fn(usize) -> usize + Send + Sync>;
type WordFn = Arc<dyn Fn(usize, &[usize]) -> f64 + Send + Sync>;
type FamilyFn = Arc<dyn Fn(usize) -> LocallyConstantPotential + Send + Sync>;

/// Sequence given by an explicit rule `φ_n(word)` constant on cylinders of a
/// declared length `dep(n)`.
#[derive(Clone)]
pub struct ExplicitSequence {
    ts: TransitionSystem,
    dep: DepFn,
    rule: WordFn,
    family: Option<FamilyFn>,
}

impl ExplicitSequence {
    pub fn new(
        ts: &TransitionSystem,
        dep: impl Fn(usize) -> usize + Send + Sync + 'static,
        rule: impl Fn(usize, &[usize]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ExplicitSequence { ts: ts.clone(), dep: Arc::new(dep), rule: Arc::new(rule), family: None }
    }

    /// Attaches an approximating family `k ↦ ρ_k`.
    pub fn with_family(mut self, family: impl Fn(usize) -> LocallyConstantPotential + Send + Sync + 'static) -> Self {
        self.family = Some(Arc::new(family));
        self
    }
}

impl fmt::Debug for ExplicitSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExplicitSequence").field("k", &self.ts.k()).field("family", &self.family.is_some()).finish()
    }
}

impl PotentialSequence for ExplicitSequence {
    fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    fn kind(&self) -> SequenceKind {
        SequenceKind::ExplicitTable
    }

    fn dependence(&self, n: usize) -> Option<usize> {
        Some((self.dep)(n))
    }

    fn value_on_word(&self, n: usize, word: &[usize]) -> Result<f64> {
        let dep = (self.dep)(n);
        if word.len() < dep {
            return Err(Error::InvalidArgument(format!("word of length {} too short for dep({n}) = {dep}", word.len())));
        }
        Ok((self.rule)(n, &word[..dep]))
    }

    fn approximant(&self, k: usize) -> Option<LocallyConstantPotential> {
        self.family.as_ref().map(|f| f(k))
    }
}

type PointFn = Arc<dyn Fn(usize, &SymbolicPoint) -> f64 + Send + Sync>;

/// Sequence known only through point evaluations; suprema over cylinders
/// cannot be taken exactly.
#[derive(Clone)]
pub struct CallbackSequence {
    ts: TransitionSystem,
    rule: PointFn,
}

impl CallbackSequence {
    pub fn new(ts: &TransitionSystem, rule: impl Fn(usize, &SymbolicPoint) -> f64 + Send + Sync + 'static) -> Self {
        CallbackSequence { ts: ts.clone(), rule: Arc::new(rule) }
    }
}

impl fmt::Debug for CallbackSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallbackSequence").field("k", &self.ts.k()).finish()
    }
}

impl PotentialSequence for CallbackSequence {
    fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    fn kind(&self) -> SequenceKind {
        SequenceKind::Callback
    }

    fn dependence(&self, _n: usize) -> Option<usize> {
        None
    }

    fn value_on_word(&self, _n: usize, _word: &[usize]) -> Result<f64> {
        Err(Error::InexactSequence)
    }

    fn value(&self, n: usize, point: &SymbolicPoint) -> f64 {
        (self.rule)(n, point)
    }
}

/// `γ_n(Φ) = var_n φ_n`, exact over admissible extensions up to `dep(n)`.
pub fn gamma(seq: &dyn PotentialSequence, n: usize) -> Result<f64> {
    let dep = seq.dependence(n).ok_or(Error::InexactSequence)?;
    max_spread_by_prefix(seq.system(), n, dep.max(n), |w| seq.value_on_word(n, w))
}

/// Finite-range evidence for tempered variation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperedVariationReport {
    /// `(n, γ_n / n)`.
    pub ratios: Vec<(usize, f64)>,
    /// Least-squares slope of `log(γ_n/n)` against `log n` over the positive
    /// ratios; `None` when fewer than two ratios are positive.
    pub slope: Option<f64>,
    pub threshold: f64,
    /// Ratios nonincreasing over the last half of the range and final ratio
    /// below `threshold`. A diagnostic, not a proof.
    pub consistent: bool,
}

pub fn tempered_variation_report(
    seq: &dyn PotentialSequence,
    n_max: usize,
    threshold: f64,
) -> Result<TemperedVariationReport> {
    if n_max < 4 {
        return Err(Error::InvalidArgument("tempered variation report needs n_max ≥ 4".into()));
    }
    let mut ratios = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        ratios.push((n, gamma(seq, n)? / n as f64));
    }
    let logs: Vec<(f64, f64)> = ratios
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|&(n, r)| ((n as f64).ln(), r.ln()))
        .collect();
    let slope = ls_slope(&logs);
    let tail = &ratios[n_max / 2..];
    let nonincreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1);
    let last = ratios.last().map(|r| r.1).unwrap_or(0.0);
    Ok(TemperedVariationReport { ratios, slope, threshold, consistent: nonincreasing && last < threshold })
}

/// How points are chosen for defect maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePolicy {
    /// Every admissible word of the required length (exact maximum).
    Exhaustive,
    /// Seeded random admissible points.
    Random { count: usize, seed: u64 },
}

/// Random admissible word of length `len` (uniform choice among successors).
pub(crate) fn random_word(ts: &TransitionSystem, len: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut w = Vec::with_capacity(len);
    if len == 0 {
        return w;
    }
    w.push(rng.gen_range(1..=ts.k()));
    while w.len() < len {
        let succ = ts.successors(*w.last().unwrap());
        w.push(succ[rng.gen_range(0..succ.len())]);
    }
    w
}

/// `max_ω |φ_{n+m}(ω) − φ_n(ω) − φ_m(σⁿω)|` over the sampled points.
pub fn almost_additivity_defect(seq: &dyn PotentialSequence, n: usize, m: usize, policy: SamplePolicy) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    match policy {
        SamplePolicy::Exhaustive => {
            let dep_nm = seq.dependence(n + m).ok_or(Error::InexactSequence)?;
            let dep_n = seq.dependence(n).ok_or(Error::InexactSequence)?;
            let dep_m = seq.dependence(m).ok_or(Error::InexactSequence)?;
            let len = dep_nm.max(dep_n).max(n + dep_m).max(n + m);
            let mut worst: f64 = 0.0;
            let mut c = seq.system().cursor(len);
            while c.advance() {
                let w = c.current();
                let d = seq.value_on_word(n + m, w)? - seq.value_on_word(n, w)? - seq.value_on_word(m, &w[n..])?;
                worst = worst.max(d.abs());
            }
            Ok(worst)
        }
        SamplePolicy::Random { count, seed } => {
            let ts = seq.system();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst: f64 = 0.0;
            for _ in 0..count {
                let w = random_word(ts, n + m + 1, &mut rng);
                let p = ts.point_with_prefix(&w)?;
                let d = seq.value(n + m, &p) - seq.value(n, &p) - seq.value(m, &p.shift_by(n));
                worst = worst.max(d.abs());
            }
            Ok(worst)
        }
    }
}

/// `(1/n) max |φ_n − S_nρ|` over cylinder representatives, exact.
pub fn asymptotic_defect(seq: &dyn PotentialSequence, rho: &LocallyConstantPotential, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if rho.system() != seq.system() {
        return Err(Error::InvalidArgument("ρ lives on a different transition system".into()));
    }
    let dep = seq.dependence(n).ok_or(Error::InexactSequence)?;
    let len = dep.max(n + rho.depth() - 1).max(n);
    let mut worst: f64 = 0.0;
    let mut c = seq.system().cursor(len);
    while c.advance() {
        let w = c.current();
        let d = seq.value_on_word(n, w)? - rho.birkhoff_sum_word(w, n);
        worst = worst.max(d.abs());
    }
    Ok(worst / n as f64)
}

/// Depth-`depth` truncation of a potential known only through point
/// evaluations. Each cylinder is probed at the representatives obtained by
/// appending every admissible `probe`-symbol extension; the table holds the
/// midpoint of the probed range and the returned bound is the largest half-spread.
pub fn truncate_callback(
    ts: &TransitionSystem,
    depth: usize,
    probe: usize,
    f: impl Fn(&SymbolicPoint) -> f64,
) -> Result<(LocallyConstantPotential, f64)> {
    let mut bound: f64 = 0.0;
    let mut entries = Vec::new();
    let mut c = ts.cursor(depth + probe);
    let mut group: Option<(Vec<usize>, f64, f64)> = None;
    let flush = |g: Option<(Vec<usize>, f64, f64)>, entries: &mut Vec<(Vec<usize>, f64)>, bound: &mut f64| {
        if let Some((w, lo, hi)) = g {
            *bound = bound.max((hi - lo) / 2.0);
            entries.push((w, 0.5 * (lo + hi)));
        }
    };
    while c.advance() {
        let w = c.current();
        let v = f(&ts.point_with_prefix(w)?);
        match &mut group {
            Some((p, lo, hi)) if p.as_slice() == &w[..depth] => {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
            _ => {
                flush(group.take(), &mut entries, &mut bound);
                group = Some((w[..depth].to_vec(), v, v));
            }
        }
    }
    flush(group.take(), &mut entries, &mut bound);
    Ok((LocallyConstantPotential::from_table(ts, depth, entries)?, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn example_depth2() -> LocallyConstantPotential {
        let ts = TransitionSystem::full_shift(2);
        LocallyConstantPotential::from_table(
            &ts,
            2,
            vec![(vec![1, 1], 0.0), (vec![1, 2], 1.0), (vec![2, 1], 0.0), (vec![2, 2], 3.0)],
        )
        .unwrap()
    }

    /// Every sequence in {1..k}^len, admissible or not.
    fn all_sequences(k: usize, len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|w| {
                    (1..=k).map(move |s| {
                        let mut v = w.clone();
                        v.push(s);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Independent η oracle: group every admissible (n+d-1)-sequence by its
    /// n-prefix and take the spread of the naive Birkhoff sum.
    fn eta_brute(phi: &LocallyConstantPotential, n: usize) -> f64 {
        let ts = phi.system();
        let d = phi.depth();
        let table: std::collections::HashMap<Vec<usize>, f64> = phi.entries().into_iter().collect();
        let mut groups: std::collections::HashMap<Vec<usize>, (f64, f64)> = Default::default();
        for w in all_sequences(ts.k(), n + d - 1) {
            if !ts.is_admissible(&w) {
                continue;
            }
            let s: f64 = (0..n).map(|j| table[&w[j..j + d]]).sum();
            let e = groups.entry(w[..n].to_vec()).or_insert((f64::INFINITY, f64::NEG_INFINITY));
            e.0 = e.0.min(s);
            e.1 = e.1.max(s);
        }
        groups.values().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }

    #[test]
    fn birkhoff_examples() {
        let ts = TransitionSystem::full_shift(2);
        let phi = LocallyConstantPotential::depth_one(&ts, &[0.2, -0.5]).unwrap();
        let ones = ts.point(vec![], vec![1]).unwrap();
        assert!((phi.birkhoff_sum(&ones, 4) - 0.8).abs() < 1e-15);
        assert_eq!(phi.birkhoff_sum(&ones, 1), phi.evaluate(&ones));

        let g = TransitionSystem::golden_mean();
        let psi = LocallyConstantPotential::from_table(
            &g,
            2,
            vec![(vec![1, 1], 0.25), (vec![1, 2], -1.5), (vec![2, 1], 2.0)],
        )
        .unwrap();
        let p = g.point(vec![], vec![1, 2]).unwrap();
        // orbit 1212..: windows 12, 21, 12
        assert_eq!(psi.birkhoff_sum(&p, 3), -1.5 + 2.0 + -1.5);
    }

    #[test]
    fn table_must_be_total_and_admissible() {
        let g = TransitionSystem::golden_mean();
        assert!(LocallyConstantPotential::from_table(&g, 2, vec![(vec![1, 1], 0.0), (vec![1, 2], 0.0)]).is_err());
        assert!(LocallyConstantPotential::from_table(
            &g,
            2,
            vec![(vec![1, 1], 0.0), (vec![1, 2], 0.0), (vec![2, 1], 0.0), (vec![2, 2], 0.0)]
        )
        .is_err());
    }

    #[test]
    fn variation_examples() {
        let phi = example_depth2();
        assert_eq!(phi.variation(1), 3.0);
        assert_eq!(phi.variation(2), 0.0);
        assert_eq!(phi.variation(7), 0.0);
        let ts = TransitionSystem::full_shift(2);
        assert_eq!(LocallyConstantPotential::depth_one(&ts, &[1.0, 2.0]).unwrap().variation(1), 0.0);
    }

    #[test]
    fn eta_examples() {
        let phi = example_depth2();
        assert_eq!(phi.eta(2), 3.0);
        assert_eq!(phi.eta(2), eta_brute(&phi, 2));
        let ts = TransitionSystem::full_shift(3);
        let d1 = LocallyConstantPotential::depth_one(&ts, &[0.3, -1.0, 2.0]).unwrap();
        for n in 1..6 {
            assert_eq!(d1.eta(n), 0.0);
        }
        let c = LocallyConstantPotential::constant(&ts, 4.5).with_depth(3).unwrap();
        for n in 1..6 {
            assert_eq!(c.eta(n), 0.0);
        }
    }

    #[test]
    fn eta_matches_brute_force_on_small_instances() {
        let systems = [
            TransitionSystem::full_shift(2),
            TransitionSystem::full_shift(3),
            TransitionSystem::golden_mean(),
            TransitionSystem::new(vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 1]]).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ts in &systems {
            for d in 1..=3 {
                let phi = LocallyConstantPotential::from_fn(ts, d, |_| rng.gen_range(-2.0..2.0)).unwrap();
                for n in 1..=8 {
                    if ts.k().pow((n + d - 1) as u32) > 200_000 {
                        continue;
                    }
                    let fast = phi.eta(n);
                    let brute = eta_brute(&phi, n);
                    assert!((fast - brute).abs() < 1e-12, "k={} d={d} n={n}: {fast} vs {brute}", ts.k());
                }
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let ts = TransitionSystem::full_shift(2);
        let add1 = AdditiveSequence::new(LocallyConstantPotential::depth_one(&ts, &[1.0, -1.0]).unwrap());
        for n in 1..6 {
            assert_eq!(gamma(&add1, n).unwrap(), 0.0);
        }
        let add2 = AdditiveSequence::new(example_depth2());
        assert_eq!(gamma(&add2, 2).unwrap(), 3.0);
        let cb = CallbackSequence::new(&ts, |n, _| n as f64);
        assert_eq!(gamma(&cb, 3), Err(Error::InexactSequence));
    }

    #[test]
    fn tempered_reports() {
        let ts = TransitionSystem::full_shift(2);
        let add = AdditiveSequence::new(example_depth2());
        // the additive depth-2 sequence has γ_n = 3 for n ≥ 1, so ratios 3/n
        let rep = tempered_variation_report(&add, 10, 0.5).unwrap();
        assert!(rep.consistent);

        let d1 = AdditiveSequence::new(LocallyConstantPotential::depth_one(&ts, &[0.5, 0.1]).unwrap());
        let rep = tempered_variation_report(&d1, 8, 1e-9).unwrap();
        assert!(rep.ratios.iter().all(|r| r.1 == 0.0));
        assert!(rep.slope.is_none());

        let lin = ExplicitSequence::new(&ts, |n| n, |n, _| 0.7 * n as f64);
        assert!(tempered_variation_report(&lin, 6, 1e-9).unwrap().ratios.iter().all(|r| r.1 == 0.0));

        // γ_n = √n: φ_n reads coordinate n+1
        let sq = ExplicitSequence::new(&ts, |n| n + 1, |n, w| if w[n] == 2 { (n as f64).sqrt() } else { 0.0 });
        let rep = tempered_variation_report(&sq, 12, 0.5).unwrap();
        for &(n, r) in &rep.ratios {
            assert!((r - 1.0 / (n as f64).sqrt()).abs() < 1e-14);
        }
        assert!((rep.slope.unwrap() + 0.5).abs() < 1e-12);
        assert!(rep.consistent);
        assert!(tempered_variation_report(&sq, 3, 0.5).is_err());
    }

    #[test]
    fn almost_additivity_examples() {
        let ts = TransitionSystem::golden_mean();
        let phi = LocallyConstantPotential::from_fn(&ts, 2, |w| (w[0] * 3 + w[1]) as f64 * 0.1).unwrap();
        let add = AdditiveSequence::new(phi);
        for (n, m) in [(1, 1), (2, 3), (4, 2)] {
            assert!(almost_additivity_defect(&add, n, m, SamplePolicy::Exhaustive).unwrap() < 1e-12);
        }
        let sq = ExplicitSequence::new(&ts, |n| n, |n, _| (n * n) as f64);
        for (n, m) in [(1, 1), (2, 3), (4, 2)] {
            let d = almost_additivity_defect(&sq, n, m, SamplePolicy::Exhaustive).unwrap();
            assert_eq!(d, (2 * n * m) as f64);
        }
        let cb = CallbackSequence::new(&ts, |n, _| (n * n) as f64);
        assert!(almost_additivity_defect(&cb, 2, 2, SamplePolicy::Exhaustive).is_err());
        let d = almost_additivity_defect(&cb, 2, 2, SamplePolicy::Random { count: 10, seed: 3 }).unwrap();
        assert_eq!(d, 8.0);
    }

    #[test]
    fn asymptotic_defect_examples() {
        let ts = TransitionSystem::full_shift(2);
        let phi = example_depth2();
        let add = AdditiveSequence::new(phi.clone());
        for n in 1..8 {
            assert_eq!(asymptotic_defect(&add, &phi, n).unwrap(), 0.0);
            let d = asymptotic_defect(&add, &phi.shifted(-0.25), n).unwrap();
            assert!((d - 0.25).abs() < 1e-12);
        }
        let cb = CallbackSequence::new(&ts, |_, _| 0.0);
        assert_eq!(asymptotic_defect(&cb, &phi, 3), Err(Error::InexactSequence));
    }

    #[test]
    fn truncation_of_a_callback() {
        let ts = TransitionSystem::full_shift(2);
        // φ(ω) = Σ ω_i / 4^i, spread on a depth-2 cylinder is at most Σ_{i>2} 1/4^i
        let f = |p: &SymbolicPoint| (1..40).map(|i| p.symbol_at(i) as f64 / 4f64.powi(i as i32)).sum::<f64>();
        let (phi, bound) = truncate_callback(&ts, 2, 3, f).unwrap();
        assert_eq!(phi.depth(), 2);
        assert!(bound > 0.0 && bound <= 0.5 * (1.0 / 48.0) + 1e-12);
    }

    proptest! {
        #[test]
        fn cocycle_identity(seed in 0u64..1000, n in 1usize..8, m in 1usize..8, len in 0usize..4, cyc in 1usize..5) {
            let ts = TransitionSystem::golden_mean();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = LocallyConstantPotential::from_fn(&ts, 2, |_| (rng.gen_range(-8i32..8) as f64) * 0.125).unwrap();
            let w = random_word(&ts, len + cyc, &mut rng);
            let p = ts.point_with_prefix(&w).unwrap();
            let lhs = phi.birkhoff_sum(&p, n + m);
            let rhs = phi.birkhoff_sum(&p, n) + phi.birkhoff_sum(&p.shift_by(n), m);
            // dyadic values make both sides exact
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn variation_nonincreasing(seed in 0u64..500, d in 1usize..4) {
            let ts = TransitionSystem::full_shift(3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = LocallyConstantPotential::from_fn(&ts, d, |_| rng.gen_range(-1.0..1.0)).unwrap();
            for n in 1..5 {
                prop_assert!(phi.variation(n + 1) <= phi.variation(n));
            }
        }
    }
}
