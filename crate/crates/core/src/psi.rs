//! The measure-derived sequence `ψ_n(ω) = log μ(C_{ω_1…ω_n})` and the checks
//! showing that any weak Gibbs measure is an exact Gibbs measure (constant 1,
//! pressure 0) for it.
//!
//! Every check returns a report with pass/fail, slack and witnesses rather
//! than an error, so a caller can tabulate all of them.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{log_gibbs_ratio, CylinderMeasure, WeakGibbsCertificate};
use crate::potentials::{asymptotic_defect, PotentialSequence, SequenceKind};
use crate::pressure::{pressure_limit, PressureEstimate, PressureInput, PressureMethod};
use crate::sft::{SymbolicPoint, TransitionSystem};

/// `Ψ = (ψ_n)` with `ψ_n(ω) = log μ(C_{ω_1…ω_n})`; `dep(n) = n`.
#[derive(Clone)]
pub struct PsiSequence {
    measure: Arc<dyn CylinderMeasure>,
}

impl std::fmt::Debug for PsiSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PsiSequence").field("k", &self.measure.system().k()).finish()
    }
}

/// Builds `Ψ` after checking positivity of `μ` on all admissible words of
/// length at most `check_len`.
pub fn build_psi(measure: Arc<dyn CylinderMeasure>, check_len: usize) -> Result<PsiSequence> {
    let ts = measure.system().clone();
    for n in 1..=check_len {
        let mut c = ts.cursor(n);
        while c.advance() {
            if !(measure.mass(c.current()) > 0.0) {
                return Err(Error::ZeroMass(c.current().to_vec()));
            }
        }
    }
    Ok(PsiSequence { measure })
}

impl PsiSequence {
    pub fn measure(&self) -> &dyn CylinderMeasure {
        self.measure.as_ref()
    }

    /// `log μ(w)` for an `n`-word.
    pub fn log_mass(&self, word: &[usize]) -> f64 {
        self.measure.mass(word).ln()
    }
}

impl PotentialSequence for PsiSequence {
    fn system(&self) -> &TransitionSystem {
        self.measure.system()
    }

    fn kind(&self) -> SequenceKind {
        SequenceKind::MeasureDerived
    }

    fn dependence(&self, n: usize) -> Option<usize> {
        Some(n)
    }

    fn value_on_word(&self, n: usize, word: &[usize]) -> Result<f64> {
        if word.len() < n {
            return Err(Error::InvalidArgument(format!("word of length {} too short for n = {n}", word.len())));
        }
        Ok(self.log_mass(&word[..n]))
    }

    fn value(&self, n: usize, point: &SymbolicPoint) -> f64 {
        self.log_mass(&point.leading(n))
    }
}

/// Worst slack of `−log K(n) ≤ ψ_n − φ_n + nP ≤ log K(n)` at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub n: usize,
    pub log_k: f64,
    /// `log K(n) − max |ψ_n − φ_n + nP|`; negative on violation.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub p_used: f64,
    pub rows: Vec<SandwichRow>,
    /// First `(n, word)` where the inequality fails.
    pub violation: Option<(usize, Vec<usize>)>,
    pub passed: bool,
}

/// Checks the two-sided inequality over every `n`-cylinder and every
/// extension to the dependence length of `φ_n`, for `n ≤ n_max`. `log_k(n)`
/// supplies `log K(n)`.
pub fn check_sandwich(
    psi: &PsiSequence,
    phi: &dyn PotentialSequence,
    p: f64,
    log_k: &dyn Fn(usize) -> f64,
    n_max: usize,
) -> Result<SandwichReport> {
    let ts = psi.system();
    let mut rows = Vec::with_capacity(n_max);
    let mut violation = None;
    for n in 1..=n_max {
        let lk = log_k(n);
        let dep = phi.dependence(n).ok_or(Error::InexactSequence)?.max(n);
        let mut worst: f64 = 0.0;
        let mut c = ts.cursor(dep);
        let mut prefix: Vec<usize> = Vec::new();
        let mut ln_mu = 0.0;
        while c.advance() {
            let w = c.current();
            if prefix.is_empty() || prefix.as_slice() != &w[..n] {
                prefix.clear();
                prefix.extend_from_slice(&w[..n]);
                ln_mu = psi.value_on_word(n, w)?;
            }
            let r = log_gibbs_ratio(ln_mu, phi.value_on_word(n, w)?, n, p).abs();
            worst = worst.max(r);
            if r > lk && violation.is_none() {
                violation = Some((n, w.to_vec()));
            }
        }
        rows.push(SandwichRow { n, log_k: lk, slack: lk - worst });
    }
    let passed = violation.is_none();
    Ok(SandwichReport { p_used: p, rows, violation, passed })
}

/// Sandwich with `K = K*` from a certificate.
pub fn check_sandwich_certified(
    psi: &PsiSequence,
    phi: &dyn PotentialSequence,
    cert: &WeakGibbsCertificate,
    n_max: usize,
) -> Result<SandwichReport> {
    if cert.log_kstar.len() < n_max {
        return Err(Error::InvalidArgument(format!("certificate covers n ≤ {}, need {n_max}", cert.log_kstar.len())));
    }
    let log_k = |n: usize| cert.log_kstar[n - 1].1;
    check_sandwich(psi, phi, cert.p_used, &log_k, n_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureZeroReport {
    pub estimate: PressureEstimate,
    pub tau: f64,
    /// Every finite-`n` value is `≤ 0` up to rounding.
    pub nonpositive: bool,
    pub passed: bool,
}

/// Periodic-point pressure of `Ψ`; passes when `|P| ≤ error_bar + tau`.
pub fn check_pressure_zero(psi: &PsiSequence, n_max: usize, tau: f64) -> Result<PressureZeroReport> {
    let estimate = pressure_limit(PressureMethod::Periodic, PressureInput::Sequence(psi), 1, n_max)?;
    let nonpositive = estimate.finite_n_values.iter().all(|p| p.1 <= 1e-12);
    let passed = estimate.extrapolated.abs() <= estimate.error_bar + tau;
    Ok(PressureZeroReport { estimate, tau, nonpositive, passed })
}

/// Relative tolerance for the constant-one Gibbs identity.
pub const GIBBS_ONE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsOneReport {
    pub words_checked: u64,
    pub max_relative_error: f64,
    pub worst_word: Vec<usize>,
    pub passed: bool,
}

/// `μ(w) / exp(ψ_n(w) − n·0) = 1` on every admissible word up to `n_max`.
pub fn check_gibbs_one(psi: &PsiSequence, n_max: usize) -> GibbsOneReport {
    let ts = psi.system();
    let mut words_checked = 0;
    let mut max_relative_error: f64 = 0.0;
    let mut worst_word = Vec::new();
    for n in 1..=n_max {
        let mut c = ts.cursor(n);
        while c.advance() {
            let w = c.current();
            let m = psi.measure().mass(w);
            let psi_n = psi.log_mass(w);
            let err = (m / psi_n.exp() - 1.0).abs();
            words_checked += 1;
            if err > max_relative_error || err.is_nan() {
                max_relative_error = err;
                worst_word = w.to_vec();
            }
        }
    }
    let passed = max_relative_error <= GIBBS_ONE_TOL;
    GibbsOneReport { words_checked, max_relative_error, worst_word, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticPsiRow {
    pub n: usize,
    pub defect: f64,
    /// `1/k + log K*(n)/n`.
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticPsiReport {
    pub k: usize,
    pub p_used: f64,
    pub rows: Vec<AsymptoticPsiRow>,
    pub passed: bool,
}

/// Compares `ψ_n` with `S_n(ρ_k − P)` and checks the tail
/// `n ∈ [n_max/2, n_max]` against `1/k + log K*(n)/n`.
pub fn check_asymptotic_additivity_psi(
    psi: &PsiSequence,
    phi: &dyn PotentialSequence,
    cert: &WeakGibbsCertificate,
    k: usize,
    n_max: usize,
) -> Result<AsymptoticPsiReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let rho = phi
        .approximant(k)
        .ok_or_else(|| Error::InvalidArgument("sequence has no approximating family".into()))?
        .shifted(-cert.p_used);
    let mut rows = Vec::with_capacity(n_max);
    let mut passed = true;
    for n in 1..=n_max {
        let defect = asymptotic_defect(psi, &rho, n)?;
        let lk = cert.log_kstar_at(n).ok_or_else(|| Error::InvalidArgument(format!("certificate lacks n = {n}")))?;
        let allowance = 1.0 / k as f64 + lk / n as f64;
        if n >= n_max / 2 && defect > allowance + 1e-12 {
            passed = false;
        }
        rows.push(AsymptoticPsiRow { n, defect, allowance });
    }
    Ok(AsymptoticPsiReport { k, p_used: cert.p_used, rows, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlmostAdditiveReport {
    pub constant: f64,
    /// `3 log C`.
    pub bound: f64,
    /// `(n, m, max |ψ_{n+m} − ψ_n − ψ_m∘σⁿ|)`.
    pub rows: Vec<(usize, usize, f64)>,
    pub worst: f64,
    pub violation: Option<(usize, usize, Vec<usize>)>,
    pub passed: bool,
}

/// Floating allowance on top of `3 log C`.
pub const ALMOST_ADDITIVE_SLACK: f64 = 1e-12;

/// Exhaustive check of `|ψ_{n+m}(ω) − ψ_n(ω) − ψ_m(σⁿω)| ≤ 3 log C` for all
/// `n, m ≥ 1` with `n + m ≤ max_total`.
pub fn check_almost_additive_psi(psi: &PsiSequence, constant: f64, max_total: usize) -> AlmostAdditiveReport {
    let ts = psi.system();
    let bound = 3.0 * constant.ln();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut violation = None;
    for total in 2..=max_total {
        let words: Vec<(Vec<usize>, f64)> = ts
            .cylinders(total)
            .map(|w| {
                let l = psi.log_mass(w.as_slice());
                (w.into_vec(), l)
            })
            .collect();
        for n in 1..total {
            let m = total - n;
            let mut row_worst: f64 = 0.0;
            for (w, l) in &words {
                let d = (l - psi.log_mass(&w[..n]) - psi.log_mass(&w[n..])).abs();
                row_worst = row_worst.max(d);
                if d > bound + ALMOST_ADDITIVE_SLACK && violation.is_none() {
                    violation = Some((n, m, w.clone()));
                }
            }
            worst = worst.max(row_worst);
            rows.push((n, m, row_worst));
        }
    }
    let passed = violation.is_none();
    AlmostAdditiveReport { constant, bound, rows, worst, violation, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_rpf, certify_weak_gibbs, MarkovMeasure};
    use crate::potentials::{gamma, AdditiveSequence, LocallyConstantPotential};

    fn bern(p: f64) -> Arc<MarkovMeasure> {
        Arc::new(MarkovMeasure::bernoulli(&[p, 1.0 - p]).unwrap())
    }

    #[test]
    fn psi_values() {
        let psi = build_psi(bern(0.5), 4).unwrap();
        let ts = TransitionSystem::full_shift(2);
        let w = ts.point(vec![1, 2], vec![2, 1]).unwrap();
        assert!((psi.value(5, &w) + 5.0 * 2f64.ln()).abs() < 1e-14);

        let psi = build_psi(bern(0.3), 4).unwrap();
        let word = [1, 2, 2, 1, 2];
        let expected = 2.0 * 0.3f64.ln() + 3.0 * 0.7f64.ln();
        assert!((psi.value_on_word(5, &word).unwrap() - expected).abs() < 1e-14);

        let g = TransitionSystem::golden_mean();
        let parry = Arc::new(MarkovMeasure::parry(&g).unwrap());
        let psi = build_psi(parry.clone(), 5).unwrap();
        for w in g.cylinders(5) {
            assert_eq!(psi.value_on_word(5, w.as_slice()).unwrap(), parry.cylinder_mass(w.as_slice()).unwrap().ln());
        }
        for n in 1..8 {
            assert_eq!(gamma(&psi, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_mass_is_reported() {
        let b = Arc::new(MarkovMeasure::bernoulli(&[1.0, 0.0]).unwrap());
        assert_eq!(build_psi(b, 2).unwrap_err(), Error::ZeroMass(vec![2]));
    }

    #[test]
    fn bernoulli_pipeline() {
        let mu = bern(0.3);
        let psi = build_psi(mu.clone(), 6).unwrap();
        let phi = AdditiveSequence::new(mu.log_weight_potential().unwrap());
        let ones = |_n: usize| 0.0;
        let rep = check_sandwich(&psi, &phi, 0.0, &ones, 8).unwrap();
        assert!(rep.rows.iter().all(|r| r.slack.abs() < 1e-13));

        let rep = check_pressure_zero(&psi, 12, 1e-3).unwrap();
        assert!(rep.passed && rep.nonpositive);
        for &(_, v) in &rep.estimate.finite_n_values {
            assert!(v.abs() < 1e-14);
        }
        assert!(check_gibbs_one(&psi, 10).passed);
        let aa = check_almost_additive_psi(&psi, 1.0, 10);
        assert!(aa.passed, "{:?}", aa.violation);
    }

    #[test]
    fn wrong_potential_breaks_the_sandwich() {
        let mu = bern(0.3);
        let psi = build_psi(mu.clone(), 4).unwrap();
        let ts = TransitionSystem::full_shift(2);
        let off = LocallyConstantPotential::depth_one(&ts, &[0.3f64.ln() + 0.1, 0.7f64.ln()]).unwrap();
        let rep = check_sandwich(&psi, &AdditiveSequence::new(off), 0.0, &|_| 0.25, 8).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.violation.as_ref().unwrap().0, 3);
    }

    #[test]
    fn markov_and_rpf_pipelines() {
        let ts = TransitionSystem::full_shift(2);
        let mu = Arc::new(MarkovMeasure::from_transition(&ts, vec![vec![0.8, 0.2], vec![0.4, 0.6]]).unwrap());
        let phi = AdditiveSequence::new(mu.log_weight_potential().unwrap());
        let cert = certify_weak_gibbs(mu.as_ref(), &phi, 0.0, 10, 0.1).unwrap();
        let psi = build_psi(mu.clone(), 6).unwrap();
        assert!(check_sandwich_certified(&psi, &phi, &cert, 10).unwrap().passed);
        assert!(check_almost_additive_psi(&psi, cert.max_kstar(), 12).passed);
        let rep = check_asymptotic_additivity_psi(&psi, &phi, &cert, 5, 10).unwrap();
        assert!(rep.passed);

        let mismatched = AdditiveSequence::new(LocallyConstantPotential::depth_one(&ts, &[-0.2, -1.0]).unwrap());
        let rep = check_asymptotic_additivity_psi(&psi, &mismatched, &cert, 10, 10).unwrap();
        assert!(!rep.passed);

        let g = TransitionSystem::golden_mean();
        let phi = LocallyConstantPotential::from_table(
            &g,
            2,
            vec![(vec![1, 1], 0.3), (vec![1, 2], -0.7), (vec![2, 1], 1.1)],
        )
        .unwrap();
        let rpf = build_rpf(&phi).unwrap();
        let psi = build_psi(Arc::new(rpf.measure.clone()), 6).unwrap();
        let rep = check_pressure_zero(&psi, 16, 1e-3).unwrap();
        assert!(rep.passed && rep.nonpositive);
        assert!(check_gibbs_one(&psi, 10).passed);
    }
}
