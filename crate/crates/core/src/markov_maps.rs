//! Expanding Markov interval maps, their cylinder intervals and the
//! comparison of `log D_n` with Birkhoff sums of `log|T'|`.
//!
//! Branch `i` maps its domain `I_i` monotonically onto an image interval that
//! contains exactly the domains `I_j` with `t_ij = 1`. Points on the common
//! boundary of two domains are coded by the lexicographically smaller symbol.
//!
//! Sign convention: `D_n(w)` is the length of the cylinder interval `I(w)`, so
//! `log D_n ≤ 0`, and `γ̃ = log|T'| ≥ 0`. The comparison is therefore between
//! `log D_n` and `S_n(−γ̃)`.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::CylinderMeasure;
use crate::potentials::{random_word, LocallyConstantPotential};
use crate::sft::{SymbolicPoint, TransitionSystem};

type BranchFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Branches {
    /// Affine branches; `log_slopes[i] = log|image_i| − log|I_i|`.
    Linear { log_slopes: Vec<f64> },
    /// `f(i, x)` and `f'(i, x)` for symbol `i` (1-based).
    General { f: BranchFn, df: BranchFn, label: String },
}

/// Subclass tag of a map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapClass {
    /// Affine branches; every quantity is exact.
    PiecewiseLinear,
    /// Nonlinear branches; derivative bounds and distortion data are sampled.
    General,
}

/// Piecewise monotone expanding interval map with a Markov coding.
#[derive(Clone)]
pub struct ExpandingMarkovMap {
    ts: TransitionSystem,
    domains: Vec<(f64, f64)>,
    images: Vec<(f64, f64)>,
    increasing: Vec<bool>,
    branches: Branches,
}

impl fmt::Debug for ExpandingMarkovMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpandingMarkovMap")
            .field("domains", &self.domains)
            .field("images", &self.images)
            .field("class", &self.class())
            .finish()
    }
}

const ENDPOINT_TOL: f64 = 1e-12;

fn validate_layout(
    ts: &TransitionSystem,
    domains: &[(f64, f64)],
    images: &[(f64, f64)],
    increasing: &[bool],
) -> Result<()> {
    let k = ts.k();
    if domains.len() != k || images.len() != k || increasing.len() != k {
        return Err(Error::InvalidMap(format!("expected {k} domains, images and orientations")));
    }
    for (i, &(l, r)) in domains.iter().enumerate() {
        if !(0.0 <= l && l < r && r <= 1.0) {
            return Err(Error::InvalidMap(format!("domain {} = [{l}, {r}] is not a subinterval of [0, 1]", i + 1)));
        }
    }
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (domains[i], domains[j]);
            if a.0 < b.1 && b.0 < a.1 {
                return Err(Error::InvalidMap(format!("domains {} and {} overlap", i + 1, j + 1)));
            }
        }
    }
    for i in 0..k {
        let (c, d) = images[i];
        if !(0.0 <= c && c < d && d <= 1.0) {
            return Err(Error::InvalidMap(format!("image {} = [{c}, {d}] is not a subinterval of [0, 1]", i + 1)));
        }
        for j in 0..k {
            let (l, r) = domains[j];
            let covers = c <= l + ENDPOINT_TOL && r <= d + ENDPOINT_TOL;
            let misses = r <= c + ENDPOINT_TOL || d <= l + ENDPOINT_TOL;
            if ts.allowed(i + 1, j + 1) && !covers {
                return Err(Error::InvalidMap(format!("image of branch {} does not cover domain {}", i + 1, j + 1)));
            }
            if !ts.allowed(i + 1, j + 1) && !misses {
                return Err(Error::InvalidMap(format!(
                    "image of branch {} meets domain {} but the transition is forbidden",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    if !ts.is_mixing() {
        return Err(Error::InvalidMap("coding is not topologically mixing".into()));
    }
    Ok(())
}

/// Smallest interval containing the domains reachable from each symbol.
fn hull_images(ts: &TransitionSystem, domains: &[(f64, f64)]) -> Vec<(f64, f64)> {
    (1..=ts.k())
        .map(|i| {
            let succ = ts.successors(i);
            let lo = succ.iter().map(|&j| domains[j - 1].0).fold(f64::INFINITY, f64::min);
            let hi = succ.iter().map(|&j| domains[j - 1].1).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect()
}

impl ExpandingMarkovMap {
    /// Affine branches. `images` defaults to the hull of the successor
    /// domains. Every slope must exceed 1.
    pub fn piecewise_linear(
        ts: &TransitionSystem,
        domains: Vec<(f64, f64)>,
        images: Option<Vec<(f64, f64)>>,
        increasing: Vec<bool>,
    ) -> Result<Self> {
        let images = images.unwrap_or_else(|| hull_images(ts, &domains));
        validate_layout(ts, &domains, &images, &increasing)?;
        let log_slopes: Vec<f64> = (0..ts.k())
            .map(|i| (images[i].1 - images[i].0).ln() - (domains[i].1 - domains[i].0).ln())
            .collect();
        if let Some(i) = log_slopes.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::InvalidMap(format!("branch {} has slope ≤ 1", i + 1)));
        }
        Ok(ExpandingMarkovMap { ts: ts.clone(), domains, images, increasing, branches: Branches::Linear { log_slopes } })
    }

    /// Full-shift map with increasing affine branches of the given slopes,
    /// domains laid out from 0 with lengths `1/s_i`, every image `[0, 1]`.
    pub fn linear_full_shift(slopes: &[f64]) -> Result<Self> {
        let ts = TransitionSystem::full_shift(slopes.len());
        let mut domains = Vec::with_capacity(slopes.len());
        let mut left = 0.0;
        for &s in slopes {
            if !(s > 1.0) {
                return Err(Error::InvalidMap(format!("slope {s} must exceed 1")));
            }
            let right = left + 1.0 / s;
            domains.push((left, right));
            left = right;
        }
        if left > 1.0 + 1e-15 {
            return Err(Error::InvalidMap("inverse slopes sum to more than 1".into()));
        }
        if let Some(last) = domains.last_mut() {
            last.1 = last.1.min(1.0);
        }
        let images = vec![(0.0, 1.0); slopes.len()];
        Self::piecewise_linear(&ts, domains, Some(images), vec![true; slopes.len()])
    }

    /// Golden-mean coding: `I_1 = [0, 1/φ]` onto `[0, 1]`, `I_2 = [1/φ, 1]`
    /// onto `I_1`; both slopes equal the golden ratio.
    pub fn golden_mean_linear() -> Self {
        let g = (1.0 + 5f64.sqrt()) / 2.0;
        let ts = TransitionSystem::golden_mean();
        Self::piecewise_linear(&ts, vec![(0.0, 1.0 / g), (1.0 / g, 1.0)], None, vec![true, true])
            .expect("golden mean map is valid")
    }

    /// Nonlinear branches given by `f(i, x)` with derivative `df(i, x)`.
    /// Endpoint matching and `|f'| ≥ 1` are checked on a grid only.
    #[allow(clippy::too_many_arguments)]
    pub fn general(
        ts: &TransitionSystem,
        domains: Vec<(f64, f64)>,
        images: Option<Vec<(f64, f64)>>,
        increasing: Vec<bool>,
        f: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(usize, f64) -> f64 + Send + Sync + 'static,
        label: &str,
    ) -> Result<Self> {
        let images = images.unwrap_or_else(|| hull_images(ts, &domains));
        validate_layout(ts, &domains, &images, &increasing)?;
        for i in 0..ts.k() {
            let (l, r) = domains[i];
            let (c, d) = images[i];
            let (fl, fr) = (f(i + 1, l), f(i + 1, r));
            let (want_l, want_r) = if increasing[i] { (c, d) } else { (d, c) };
            if (fl - want_l).abs() > ENDPOINT_TOL || (fr - want_r).abs() > ENDPOINT_TOL {
                return Err(Error::InvalidMap(format!("branch {} does not map its domain onto its image", i + 1)));
            }
            for s in 0..=100 {
                let x = l + (r - l) * s as f64 / 100.0;
                let v = df(i + 1, x);
                if !(v.abs() >= 1.0) || (v > 0.0) != increasing[i] {
                    return Err(Error::InvalidMap(format!("branch {} has |T'| < 1 or wrong orientation near {x}", i + 1)));
                }
            }
        }
        Ok(ExpandingMarkovMap {
            ts: ts.clone(),
            domains,
            images,
            increasing,
            branches: Branches::General { f: Arc::new(f), df: Arc::new(df), label: label.to_string() },
        })
    }

    /// `T_i(x) = g(2x − (i − 1))` with `g(y) = y + c·y(1 − y)`, `|c| < 1/2`.
    pub fn perturbed_doubling(c: f64) -> Result<Self> {
        if !(c.abs() < 0.5) {
            return Err(Error::InvalidMap(format!("perturbation {c} must satisfy |c| < 1/2")));
        }
        let ts = TransitionSystem::full_shift(2);
        let f = move |i: usize, x: f64| {
            let y = 2.0 * x - (i - 1) as f64;
            y + c * y * (1.0 - y)
        };
        let df = move |i: usize, x: f64| {
            let y = 2.0 * x - (i - 1) as f64;
            2.0 * (1.0 + c * (1.0 - 2.0 * y))
        };
        Self::general(
            &ts,
            vec![(0.0, 0.5), (0.5, 1.0)],
            Some(vec![(0.0, 1.0), (0.0, 1.0)]),
            vec![true, true],
            f,
            df,
            &format!("perturbed doubling c = {c}"),
        )
    }

    pub fn system(&self) -> &TransitionSystem {
        &self.ts
    }

    pub fn domains(&self) -> &[(f64, f64)] {
        &self.domains
    }

    pub fn images(&self) -> &[(f64, f64)] {
        &self.images
    }

    pub fn class(&self) -> MapClass {
        match self.branches {
            Branches::Linear { .. } => MapClass::PiecewiseLinear,
            Branches::General { .. } => MapClass::General,
        }
    }

    pub fn label(&self) -> String {
        match &self.branches {
            Branches::Linear { .. } => "piecewise linear".to_string(),
            Branches::General { label, .. } => label.clone(),
        }
    }

    /// `log|T'|` on each branch, for affine maps.
    pub fn log_slopes(&self) -> Option<&[f64]> {
        match &self.branches {
            Branches::Linear { log_slopes } => Some(log_slopes),
            Branches::General { .. } => None,
        }
    }

    /// `γ̃ = log|T'|∘π` as a depth-1 potential (affine maps only).
    pub fn slope_potential(&self) -> Result<LocallyConstantPotential> {
        let ls = self.log_slopes().ok_or_else(|| Error::InvalidMap("only affine maps have a locally constant log-derivative".into()))?;
        LocallyConstantPotential::depth_one(&self.ts, ls)
    }

    /// `T` on branch `i`.
    pub fn apply(&self, i: usize, x: f64) -> f64 {
        let (l, r) = self.domains[i - 1];
        let (c, d) = self.images[i - 1];
        match &self.branches {
            Branches::Linear { .. } => {
                let t = (x - l) / (r - l);
                if self.increasing[i - 1] {
                    c + t * (d - c)
                } else {
                    d - t * (d - c)
                }
            }
            Branches::General { f, .. } => f(i, x),
        }
    }

    /// `|T'(x)|` on branch `i`.
    pub fn derivative(&self, i: usize, x: f64) -> f64 {
        match &self.branches {
            Branches::Linear { log_slopes } => log_slopes[i - 1].exp(),
            Branches::General { df, .. } => df(i, x).abs(),
        }
    }

    /// Inverse of branch `i` at `y` in its image. Bisection runs to machine
    /// precision for nonlinear branches.
    pub fn inverse(&self, i: usize, y: f64) -> Result<f64> {
        let (l, r) = self.domains[i - 1];
        let (c, d) = self.images[i - 1];
        if y < c - ENDPOINT_TOL || y > d + ENDPOINT_TOL {
            return Err(Error::RootFinding { branch: i, target: y });
        }
        let y = y.clamp(c, d);
        match &self.branches {
            Branches::Linear { .. } => {
                let t = (y - c) / (d - c);
                Ok(if self.increasing[i - 1] { l + t * (r - l) } else { r - t * (r - l) })
            }
            Branches::General { f, .. } => {
                let inc = self.increasing[i - 1];
                let (mut lo, mut hi) = (l, r);
                for _ in 0..2000 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        return Ok(mid);
                    }
                    let below = (f(i, mid) < y) == inc;
                    if below {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Err(Error::RootFinding { branch: i, target: y })
            }
        }
    }

    /// First `n` symbols of the coding of `x ∈ Λ`; boundary points take the
    /// smaller symbol.
    pub fn itinerary(&self, x: f64, n: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(n);
        let mut y = x;
        for _ in 0..n {
            let i = (0..self.ts.k())
                .find(|&i| self.domains[i].0 <= y && y <= self.domains[i].1)
                .ok_or_else(|| Error::InvalidArgument(format!("orbit leaves the branch domains at {y}")))?
                + 1;
            if let Some(&prev) = out.last() {
                if !self.ts.allowed(prev, i) {
                    return Err(Error::InvalidArgument(format!("orbit of {x} is not admissible")));
                }
            }
            out.push(i);
            y = self.apply(i, y);
        }
        Ok(out)
    }

    /// `I(w)`, computed by pulling `I_{w_n}` back through the inverse branches.
    pub fn cylinder_interval(&self, word: &[usize]) -> Result<CylinderInterval> {
        if word.is_empty() || !self.ts.is_admissible(word) {
            return Err(Error::Inadmissible(word.to_vec()));
        }
        let n = word.len();
        let (mut a, mut b) = self.domains[word[n - 1] - 1];
        for &s in word[..n - 1].iter().rev() {
            let (x, y) = (self.inverse(s, a)?, self.inverse(s, b)?);
            a = x.min(y);
            b = x.max(y);
        }
        let (diameter, log_diameter) = match &self.branches {
            Branches::Linear { log_slopes } => {
                // same left-to-right order as a Birkhoff sum of −γ̃
                let mut s = 0.0;
                for &i in &word[..n - 1] {
                    s += -log_slopes[i - 1];
                }
                let (l, r) = self.domains[word[n - 1] - 1];
                s += (r - l).ln();
                (s.exp(), s)
            }
            Branches::General { .. } => (b - a, (b - a).ln()),
        };
        Ok(CylinderInterval { word: word.to_vec(), left: a, right: b, diameter, log_diameter })
    }
}

/// `I(w)` and its diameter `D_n(w)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderInterval {
    pub word: Vec<usize>,
    pub left: f64,
    pub right: f64,
    /// `Π` of inverse slopes times `|I_{w_n}|` for affine maps, `right − left`
    /// otherwise.
    pub diameter: f64,
    pub log_diameter: f64,
}

/// One row of the distortion comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UjrRow {
    pub n: usize,
    /// `M(n) = (1/n) max_w |log D_n(w) − S_n(−γ̃)(ω_w)|`.
    pub m: f64,
    /// Largest spread of `S_nγ̃ / n` among the representatives of one cylinder.
    pub spread: f64,
    pub words: usize,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UjrReport {
    pub class: MapClass,
    pub rows: Vec<UjrRow>,
    /// `M(n)` nonincreasing on `n ≥ tail_start`.
    pub nonincreasing_tail: bool,
    pub tail_start: usize,
    /// Affine maps: exact over all words. Nonlinear maps: sampled, not a proof.
    pub rigorous: bool,
    pub passed: bool,
}

/// Sampling parameters for nonlinear maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UjrSampling {
    /// Enumerate every word while the count stays at or below this.
    pub exhaustive_limit: usize,
    pub random_words: usize,
    pub seed: u64,
}

impl Default for UjrSampling {
    fn default() -> Self {
        UjrSampling { exhaustive_limit: 4096, random_words: 1000, seed: 0 }
    }
}

/// Fractions of the image interval used as end points of backward orbits.
const REPRESENTATIVE_FRACTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn sample_words(ts: &TransitionSystem, n: usize, sampling: UjrSampling) -> (Vec<Vec<usize>>, bool) {
    let count = ts.count_cylinders(n).unwrap_or(u128::MAX);
    if count <= sampling.exhaustive_limit as u128 {
        return (ts.cylinders(n).map(|w| w.into_vec()).collect(), true);
    }
    let mut words = Vec::new();
    for s in 1..=ts.k() {
        if let Some(cycle) = ts.shortest_cycle_from(s) {
            words.push((0..n).map(|j| cycle[j % cycle.len()]).collect::<Vec<_>>());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for _ in 0..sampling.random_words {
        words.push(random_word(ts, n, &mut rng));
    }
    words.sort();
    words.dedup();
    (words, false)
}

/// Computes `M(n)` for `n ≤ n_max`. Affine maps are treated exactly over all
/// admissible words, where `M(n)` vanishes whenever every image has length 1.
pub fn check_ujr(map: &ExpandingMarkovMap, n_max: usize, tail_start: usize, sampling: UjrSampling) -> Result<UjrReport> {
    let ts = map.system();
    let mut rows = Vec::with_capacity(n_max);
    match &map.branches {
        Branches::Linear { .. } => {
            let neg = map.slope_potential()?;
            let neg = LocallyConstantPotential::from_table(ts, 1, neg.entries().into_iter().map(|(w, v)| (w, -v)))?;
            for n in 1..=n_max {
                let mut worst: f64 = 0.0;
                let mut words = 0;
                for w in ts.cylinders(n) {
                    let ci = map.cylinder_interval(w.as_slice())?;
                    let d = (ci.log_diameter - neg.birkhoff_sum_word(w.as_slice(), n)).abs();
                    worst = worst.max(d);
                    words += 1;
                }
                rows.push(UjrRow { n, m: worst / n as f64, spread: 0.0, words, exhaustive: true });
            }
        }
        Branches::General { .. } => {
            for n in 1..=n_max {
                let (words, exhaustive) = sample_words(ts, n, sampling);
                let mut worst: f64 = 0.0;
                let mut spread: f64 = 0.0;
                for w in &words {
                    let log_d = map.cylinder_interval(w)?.log_diameter;
                    let (c, d) = map.images[w[n - 1] - 1];
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for &t in &REPRESENTATIVE_FRACTIONS {
                        let mut x = c + t * (d - c);
                        let mut orbit = vec![0.0; n];
                        for j in (0..n).rev() {
                            x = map.inverse(w[j], x)?;
                            orbit[j] = x;
                        }
                        let mut s = 0.0;
                        for j in 0..n {
                            s += map.derivative(w[j], orbit[j]).ln();
                        }
                        lo = lo.min(s);
                        hi = hi.max(s);
                        worst = worst.max((log_d + s).abs());
                    }
                    spread = spread.max((hi - lo) / n as f64);
                }
                rows.push(UjrRow { n, m: worst / n as f64, spread, words: words.len(), exhaustive });
            }
        }
    }
    let tail: Vec<f64> = rows.iter().filter(|r| r.n >= tail_start).map(|r| r.m).collect();
    let nonincreasing_tail = tail.windows(2).all(|p| p[1] <= p[0]);
    let rigorous = map.class() == MapClass::PiecewiseLinear;
    Ok(UjrReport { class: map.class(), rows, nonincreasing_tail, tail_start, rigorous, passed: nonincreasing_tail })
}

/// Quotients `log μ(C_n(ω)) / log D_n(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseDimensionReport {
    pub values: Vec<(usize, f64)>,
    pub last: f64,
    /// Spread (max − min) over the final quarter of the range.
    pub tail_spread: f64,
}

/// Finite-`n` pointwise-dimension quotients along the cylinders of `ω`. Both
/// logarithms are negative, so the quotient is the positive exponent.
pub fn pointwise_dimension_estimates(
    map: &ExpandingMarkovMap,
    mu: &dyn CylinderMeasure,
    omega: &SymbolicPoint,
    n_max: usize,
) -> Result<PointwiseDimensionReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive".into()));
    }
    if mu.system() != map.system() {
        return Err(Error::InvalidArgument("measure and map use different codings".into()));
    }
    let word = omega.leading(n_max);
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let log_d = map.cylinder_interval(&word[..n])?.log_diameter;
        if log_d == 0.0 {
            return Err(Error::DivisionHazard(n));
        }
        values.push((n, mu.mass(&word[..n]).ln() / log_d));
    }
    let start = n_max - n_max.div_ceil(4);
    let tail = &values[start..];
    let lo = tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(PointwiseDimensionReport { last: values[n_max - 1].1, values, tail_spread: hi - lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MarkovMeasure;

    #[test]
    fn doubling_diameters() {
        let map = ExpandingMarkovMap::linear_full_shift(&[2.0, 2.0]).unwrap();
        for n in 1..=10 {
            for w in map.system().cylinders(n) {
                let ci = map.cylinder_interval(w.as_slice()).unwrap();
                assert!((ci.diameter / 0.5f64.powi(n as i32) - 1.0).abs() < 1e-14);
                assert_eq!(ci.right - ci.left, 0.5f64.powi(n as i32));
            }
        }
    }

    #[test]
    fn affine_composition() {
        let map = ExpandingMarkovMap::linear_full_shift(&[2.0, 4.0]).unwrap();
        let ci = map.cylinder_interval(&[1, 2]).unwrap();
        assert_eq!(ci.right - ci.left, 0.125);
        assert!((ci.diameter - 0.125).abs() < 1e-16);
        assert_eq!((ci.left, ci.right), (0.25, 0.375));
    }

    #[test]
    fn golden_mean_layout() {
        let map = ExpandingMarkovMap::golden_mean_linear();
        let g: f64 = (1.0 + 5f64.sqrt()) / 2.0;
        for n in 1..=8 {
            for w in map.system().cylinders(n) {
                let ci = map.cylinder_interval(w.as_slice()).unwrap();
                // interval arithmetic vs product of inverse slopes
                let last = map.domains()[w.as_slice()[n - 1] - 1];
                let product = (last.1 - last.0) / g.powi(n as i32 - 1);
                assert!((ci.right - ci.left - product).abs() < 1e-14);
                assert!((ci.diameter - product).abs() < 1e-14);
            }
        }
        let rep = check_ujr(&map, 8, 1, UjrSampling::default()).unwrap();
        for r in &rep.rows {
            assert!((r.m - g.ln() / r.n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_maps_are_rejected() {
        assert!(ExpandingMarkovMap::linear_full_shift(&[2.0, 1.0]).is_err());
        assert!(ExpandingMarkovMap::linear_full_shift(&[1.5, 1.5]).is_err());
        let ts = TransitionSystem::golden_mean();
        // branch 2 may not cover domain 2
        assert!(ExpandingMarkovMap::piecewise_linear(&ts, vec![(0.0, 0.6), (0.6, 1.0)], Some(vec![(0.0, 1.0), (0.0, 1.0)]), vec![true, true]).is_err());
        assert!(ExpandingMarkovMap::perturbed_doubling(0.7).is_err());
    }

    #[test]
    fn nesting_and_disjointness() {
        let maps = [
            ExpandingMarkovMap::linear_full_shift(&[3.0, 2.0, 6.0]).unwrap(),
            ExpandingMarkovMap::golden_mean_linear(),
            ExpandingMarkovMap::perturbed_doubling(0.3).unwrap(),
        ];
        for map in &maps {
            for n in 1..=6 {
                let mut ivs: Vec<CylinderInterval> =
                    map.system().cylinders(n).map(|w| map.cylinder_interval(w.as_slice()).unwrap()).collect();
                for ci in &ivs {
                    if n > 1 {
                        let parent = map.cylinder_interval(&ci.word[..n - 1]).unwrap();
                        assert!(parent.left <= ci.left + 1e-15 && ci.right <= parent.right + 1e-15);
                    }
                }
                ivs.sort_by(|a, b| a.left.total_cmp(&b.left));
                for p in ivs.windows(2) {
                    assert!(p[0].right <= p[1].left + 1e-15);
                }
            }
        }
    }

    #[test]
    fn itinerary_codes_boundaries_low() {
        let map = ExpandingMarkovMap::linear_full_shift(&[2.0, 2.0]).unwrap();
        assert_eq!(map.itinerary(0.5, 2).unwrap(), vec![1, 2]);
        assert_eq!(map.itinerary(0.3, 3).unwrap(), vec![1, 2, 1]);
        let ci = map.cylinder_interval(&[2, 1, 1]).unwrap();
        assert_eq!(map.itinerary(0.5 * (ci.left + ci.right), 3).unwrap(), vec![2, 1, 1]);
    }

    #[test]
    fn ujr_is_exact_for_unit_images() {
        for slopes in [vec![2.0, 2.0], vec![2.0, 4.0], vec![3.0, 3.0, 3.0], vec![1.5, 5.0]] {
            let map = ExpandingMarkovMap::linear_full_shift(&slopes).unwrap();
            let rep = check_ujr(&map, 10, 1, UjrSampling::default()).unwrap();
            assert!(rep.rows.iter().all(|r| r.m == 0.0), "{slopes:?}");
            assert!(rep.passed && rep.rigorous);
        }
        let map = ExpandingMarkovMap::linear_full_shift(&[2.0, 2.0]).unwrap();
        for w in map.system().cylinders(6) {
            assert_eq!(map.cylinder_interval(w.as_slice()).unwrap().log_diameter, -6.0 * 2f64.ln());
        }
    }

    #[test]
    fn perturbed_doubling_inverse_is_accurate() {
        let map = ExpandingMarkovMap::perturbed_doubling(0.3).unwrap();
        for i in 1..=2 {
            for s in 0..=20 {
                let y = s as f64 / 20.0;
                let x = map.inverse(i, y).unwrap();
                assert!((map.apply(i, x) - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pointwise_dimension_examples() {
        let map = ExpandingMarkovMap::linear_full_shift(&[2.0, 2.0]).unwrap();
        let ts = map.system().clone();
        let half = MarkovMeasure::bernoulli(&[0.5, 0.5]).unwrap();
        let omega = ts.point(vec![2], vec![1, 2, 2]).unwrap();
        let rep = pointwise_dimension_estimates(&map, &half, &omega, 30).unwrap();
        assert!(rep.values.iter().all(|p| (p.1 - 1.0).abs() < 1e-14));

        let b = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        let ones = ts.point(vec![], vec![1]).unwrap();
        let rep = pointwise_dimension_estimates(&map, &b, &ones, 200).unwrap();
        let closed = -0.3f64.ln() / 2f64.ln();
        assert!((rep.last - closed).abs() < 1e-9);
        assert!((closed - 1.737).abs() < 1e-3);

        let alt = ts.point(vec![], vec![1, 2]).unwrap();
        let rep = pointwise_dimension_estimates(&map, &b, &alt, 200).unwrap();
        let closed = -(0.3f64.ln() + 0.7f64.ln()) / (2.0 * 2f64.ln());
        assert!((rep.last - closed).abs() < 1e-9);
        assert!((closed - 1.125).abs() < 1e-3);
    }

    #[test]
    fn perturbed_doubling_distortion_decays() {
        let map = ExpandingMarkovMap::perturbed_doubling(0.3).unwrap();
        let sampling = UjrSampling { exhaustive_limit: 256, random_words: 200, seed: 7 };
        let rep = check_ujr(&map, 16, 4, sampling).unwrap();
        assert!(!rep.rigorous && rep.passed);
        assert!(rep.rows.iter().all(|r| r.m > 0.0 && r.spread > 0.0));
        assert!(rep.rows.windows(2).all(|p| p[1].m < p[0].m));
    }

}
