//! Multifractal spectra of pointwise dimensions on piecewise linear Markov
//! maps: a variational route over grids of Markov candidates and a closed-form
//! Legendre route for Bernoulli measures.
//!
//! For a candidate `ν` the objective is `h(ν)/∫γ̃ dν`. The constraint value
//! for a measure `μ_i` that is Gibbs for `φ_i` with pressure `P_i` is
//! `(∫φ_i dν − P_i)/(−∫γ̃ dν)`, the `ν`-typical limit of `log μ_i / log D_n`.
//! Measures without a known potential fall back to cylinder quadrature.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov_maps::{ExpandingMarkovMap, MapClass};
use crate::measures::{
    atomfree_check, certify_weak_gibbs, integrate, invariance_defect, CylinderMeasure, MarkovMeasure, RpfGibbs, Verdict,
};
use crate::numeric::pairwise_sum;
use crate::potentials::{AdditiveSequence, LocallyConstantPotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Variational,
    Legendre,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    /// Grid parameter: `u` for the Legendre route, the target index otherwise.
    pub param: f64,
    pub alpha: f64,
    /// Absent at infeasible levels.
    pub f: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub method: SpectrumMethod,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumCurve {
    /// Largest amount by which a point falls below the chord through its
    /// neighbours, with points sorted by `α`. Zero or negative means concave.
    pub fn concavity_defect(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = self.points.iter().filter_map(|p| p.f.map(|f| (p.alpha, f))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut worst = f64::NEG_INFINITY;
        for w in pts.windows(3) {
            let (a0, f0) = w[0];
            let (a1, f1) = w[1];
            let (a2, f2) = w[2];
            if a2 - a0 <= 0.0 {
                continue;
            }
            let chord = f0 + (f2 - f0) * (a1 - a0) / (a2 - a0);
            worst = worst.max(chord - f1);
        }
        worst
    }

    pub fn is_concave(&self, tol: f64) -> bool {
        self.concavity_defect() <= tol
    }

    /// Every `f` lies in `[0, 1]`.
    pub fn within_unit_interval(&self, tol: f64) -> bool {
        self.points.iter().filter_map(|p| p.f).all(|f| f >= -tol && f <= 1.0 + tol)
    }
}

/// Entropy of a Bernoulli(`u`, `1 − u`) measure with `0 log 0 = 0`.
fn binary_entropy(u: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    t(u) + t(1.0 - u)
}

/// Parametric spectrum of Bernoulli(`p`, `1 − p`) on the two-branch map with
/// slopes `s1`, `s2`, at `u_j = j/(grid + 1)` for `j = 1..=grid`.
pub fn legendre_bernoulli(p: f64, s1: f64, s2: f64, grid: usize) -> Result<SpectrumCurve> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must lie in (0, 1)")));
    }
    if !(s1 > 1.0 && s2 > 1.0) {
        return Err(Error::InvalidArgument("slopes must exceed 1".into()));
    }
    let points = (1..=grid)
        .map(|j| {
            let u = j as f64 / (grid + 1) as f64;
            let lyap = u * s1.ln() + (1.0 - u) * s2.ln();
            let alpha = -(u * p.ln() + (1.0 - u) * (1.0 - p).ln()) / lyap;
            SpectrumPoint { param: u, alpha, f: Some(binary_entropy(u) / lyap), feasible: true }
        })
        .collect();
    Ok(SpectrumCurve { method: SpectrumMethod::Legendre, points })
}

/// A measure whose pointwise dimension enters a constraint.
#[derive(Clone)]
pub struct ConstraintMeasure {
    pub label: String,
    pub measure: Arc<dyn CylinderMeasure>,
    /// `(φ, P)` such that the measure is Gibbs for `φ` with pressure `P`.
    pub gibbs: Option<(LocallyConstantPotential, f64)>,
}

impl ConstraintMeasure {
    /// Markov measures are Gibbs for their log-weight potential with `P = 0`.
    pub fn from_markov(label: &str, mu: &MarkovMeasure) -> Result<Self> {
        Ok(ConstraintMeasure {
            label: label.to_string(),
            measure: Arc::new(mu.clone()),
            gibbs: Some((mu.log_weight_potential()?, 0.0)),
        })
    }

    pub fn from_rpf(label: &str, g: &RpfGibbs) -> Self {
        ConstraintMeasure {
            label: label.to_string(),
            measure: Arc::new(g.measure.clone()),
            gibbs: Some((g.potential.clone(), g.log_lambda)),
        }
    }

    /// Constraint values come from cylinder quadrature only.
    pub fn oracle(label: &str, measure: Arc<dyn CylinderMeasure>) -> Self {
        ConstraintMeasure { label: label.to_string(), measure, gibbs: None }
    }
}

/// Candidate family searched by the variational route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchFamily {
    /// Product measures with weights `j/resolution` (full shifts only).
    Bernoulli { resolution: usize },
    /// One-step chains, each row on the grid `j/resolution` over its allowed
    /// successors.
    Markov { resolution: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSearch {
    pub family: SearchFamily,
    /// Feasibility tolerance per coordinate.
    pub delta: f64,
    /// Cylinder length used for quadrature.
    pub quadrature_depth: usize,
}

impl Default for SpectrumSearch {
    fn default() -> Self {
        SpectrumSearch { family: SearchFamily::Bernoulli { resolution: 1000 }, delta: 1e-3, quadrature_depth: 12 }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub index: usize,
    /// Grid weights: the symbol weights (Bernoulli) or the rows of `Q`
    /// flattened over allowed successors (Markov).
    pub params: Vec<f64>,
    pub measure: MarkovMeasure,
    pub entropy: f64,
    /// `∫γ̃ dν`.
    pub lyapunov: f64,
    /// `h(ν)/∫γ̃ dν`.
    pub f: f64,
    pub alpha: Vec<f64>,
}

/// All compositions of `total` into `parts` nonnegative integers, in
/// lexicographic order.
fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(parts - 1, total - first) {
            let mut v = vec![first];
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

fn candidate_measures(map: &ExpandingMarkovMap, family: SearchFamily) -> Result<Vec<(Vec<f64>, MarkovMeasure)>> {
    let ts = map.system();
    let k = ts.k();
    match family {
        SearchFamily::Bernoulli { resolution } => {
            if *ts != crate::sft::TransitionSystem::full_shift(k) {
                return Err(Error::InvalidArgument("Bernoulli candidates need a full shift".into()));
            }
            if resolution == 0 {
                return Err(Error::InvalidArgument("grid resolution must be positive".into()));
            }
            compositions(k, resolution)
                .into_iter()
                .map(|c| {
                    let p: Vec<f64> = c.iter().map(|&j| j as f64 / resolution as f64).collect();
                    MarkovMeasure::bernoulli(&p).map(|m| (p, m))
                })
                .collect()
        }
        SearchFamily::Markov { resolution } => {
            if resolution == 0 {
                return Err(Error::InvalidArgument("grid resolution must be positive".into()));
            }
            let rows: Vec<Vec<Vec<usize>>> = (1..=k).map(|i| compositions(ts.successors(i).len(), resolution)).collect();
            let mut out = Vec::new();
            let mut idx = vec![0usize; k];
            loop {
                let mut q = vec![vec![0.0; k]; k];
                let mut params = Vec::new();
                for i in 0..k {
                    for (c, &j) in rows[i][idx[i]].iter().zip(ts.successors(i + 1)) {
                        let x = *c as f64 / resolution as f64;
                        q[i][j - 1] = x;
                        params.push(x);
                    }
                }
                // reducible chains without a unique stationary vector are skipped
                if let Ok(m) = MarkovMeasure::from_transition(ts, q) {
                    out.push((params, m));
                }
                let mut r = k;
                loop {
                    if r == 0 {
                        return Ok(out);
                    }
                    r -= 1;
                    idx[r] += 1;
                    if idx[r] < rows[r].len() {
                        break;
                    }
                    idx[r] = 0;
                }
            }
        }
    }
}

/// Cylinder quadrature of the constraint at depth `n`: the integral of the
/// quotient `Σ ν(w) log μ(w)/log D_n(w)` and the quotient of integrals
/// `Σ ν(w) log μ(w) / Σ ν(w) log D_n(w)`.
pub fn constraint_quadrature(
    map: &ExpandingMarkovMap,
    nu: &dyn CylinderMeasure,
    mu: &dyn CylinderMeasure,
    n: usize,
) -> Result<(f64, f64)> {
    let mut quot = Vec::new();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for w in map.system().cylinders(n) {
        let m = nu.mass(w.as_slice());
        if m == 0.0 {
            continue;
        }
        let log_d = map.cylinder_interval(w.as_slice())?.log_diameter;
        if log_d == 0.0 {
            return Err(Error::DivisionHazard(n));
        }
        let lm = mu.mass(w.as_slice()).ln();
        quot.push(m * (lm / log_d));
        num.push(m * lm);
        den.push(m * log_d);
    }
    Ok((pairwise_sum(&quot), pairwise_sum(&num) / pairwise_sum(&den)))
}

/// Objective and constraint values of every grid candidate, in grid order.
pub fn evaluate_candidates(
    map: &ExpandingMarkovMap,
    measures: &[ConstraintMeasure],
    search: &SpectrumSearch,
) -> Result<Vec<Candidate>> {
    if map.class() != MapClass::PiecewiseLinear {
        return Err(Error::InvalidMap("spectra are computed for piecewise linear maps only".into()));
    }
    if measures.is_empty() {
        return Err(Error::InvalidArgument("at least one constraint measure is required".into()));
    }
    if measures.iter().any(|m| m.measure.system() != map.system()) {
        return Err(Error::InvalidArgument("constraint measures must live on the coding of the map".into()));
    }
    let gamma = map.slope_potential()?;
    let raw = candidate_measures(map, search.family)?;
    raw.into_par_iter()
        .enumerate()
        .map(|(index, (params, nu))| {
            let entropy = nu.entropy();
            let lyapunov = integrate(&gamma, &nu);
            let alpha = measures
                .iter()
                .map(|c| match &c.gibbs {
                    Some((phi, p)) => Ok((integrate(phi, &nu) - p) / -lyapunov),
                    None => constraint_quadrature(map, &nu, c.measure.as_ref(), search.quadrature_depth).map(|q| q.0),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Candidate { index, params, measure: nu, entropy, lyapunov, f: entropy / lyapunov, alpha })
        })
        .collect()
}

/// Largest `f` among candidates within `delta` of `alpha` in every
/// coordinate; ties go to the lowest index.
pub fn best_feasible<'a>(candidates: &'a [Candidate], alpha: &[f64], delta: f64) -> Option<&'a Candidate> {
    let mut best: Option<&Candidate> = None;
    for c in candidates {
        let ok = c.alpha.len() == alpha.len() && c.alpha.iter().zip(alpha).all(|(a, t)| (a - t).abs() <= delta);
        if ok && best.is_none_or(|b| c.f > b.f) {
            best = Some(c);
        }
    }
    best
}

/// Both readings of the constraint for the argmax, at depths `n − 1` and `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureReport {
    pub depth: usize,
    pub integral_of_quotient: Vec<f64>,
    pub quotient_of_integrals: Vec<f64>,
    /// `|value(n) − value(n − 1)|` of the integral of the quotient.
    pub stability: Vec<f64>,
    /// Closed-form constraint values where a potential is known.
    pub closed_form: Vec<Option<f64>>,
    /// Largest gap between any two available readings.
    pub max_disagreement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariationalResult {
    pub alpha: Vec<f64>,
    pub feasible: bool,
    pub f: Option<f64>,
    pub argmax_index: Option<usize>,
    pub argmax_params: Option<Vec<f64>>,
    pub argmax_alpha: Option<Vec<f64>>,
    pub quadrature: Option<QuadratureReport>,
    pub candidates: usize,
}

/// Quadrature readings of the constraints for one candidate.
pub fn quadrature_report(
    map: &ExpandingMarkovMap,
    measures: &[ConstraintMeasure],
    candidate: &Candidate,
    depth: usize,
) -> Result<QuadratureReport> {
    if depth < 2 {
        return Err(Error::InvalidArgument("quadrature depth must be at least 2".into()));
    }
    let mut ioq = Vec::new();
    let mut qoi = Vec::new();
    let mut stability = Vec::new();
    let mut closed = Vec::new();
    let mut gap: f64 = 0.0;
    for (i, c) in measures.iter().enumerate() {
        let (a, b) = constraint_quadrature(map, &candidate.measure, c.measure.as_ref(), depth)?;
        let (a_prev, _) = constraint_quadrature(map, &candidate.measure, c.measure.as_ref(), depth - 1)?;
        let cf = c.gibbs.as_ref().map(|_| candidate.alpha[i]);
        let mut readings = vec![a, b];
        readings.extend(cf);
        let hi = readings.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = readings.iter().cloned().fold(f64::INFINITY, f64::min);
        gap = gap.max(hi - lo);
        ioq.push(a);
        qoi.push(b);
        stability.push((a - a_prev).abs());
        closed.push(cf);
    }
    Ok(QuadratureReport {
        depth,
        integral_of_quotient: ioq,
        quotient_of_integrals: qoi,
        stability,
        closed_form: closed,
        max_disagreement: gap,
    })
}

/// Maximizes `h(ν)/∫γ̃ dν` over the search grid subject to the constraints
/// `|α_i(ν) − alpha_i| ≤ δ`. An infeasible level is a result, not an error.
pub fn spectrum_variational(
    map: &ExpandingMarkovMap,
    measures: &[ConstraintMeasure],
    alpha: &[f64],
    search: &SpectrumSearch,
) -> Result<VariationalResult> {
    if alpha.len() != measures.len() {
        return Err(Error::InvalidArgument("one α per constraint measure".into()));
    }
    let candidates = evaluate_candidates(map, measures, search)?;
    variational_from_candidates(map, measures, &candidates, alpha, search)
}

/// [`spectrum_variational`] on precomputed candidates.
pub fn variational_from_candidates(
    map: &ExpandingMarkovMap,
    measures: &[ConstraintMeasure],
    candidates: &[Candidate],
    alpha: &[f64],
    search: &SpectrumSearch,
) -> Result<VariationalResult> {
    let best = best_feasible(candidates, alpha, search.delta);
    let quadrature = match best {
        Some(c) => Some(quadrature_report(map, measures, c, search.quadrature_depth)?),
        None => None,
    };
    Ok(VariationalResult {
        alpha: alpha.to_vec(),
        feasible: best.is_some(),
        f: best.map(|c| c.f),
        argmax_index: best.map(|c| c.index),
        argmax_params: best.map(|c| c.params.clone()),
        argmax_alpha: best.map(|c| c.alpha.clone()),
        quadrature,
        candidates: candidates.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckRow {
    pub u: f64,
    pub alpha: f64,
    pub f_legendre: f64,
    pub f_variational: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub rows: Vec<CrosscheckRow>,
    /// Over feasible levels only.
    pub max_deviation: f64,
    pub infeasible: usize,
}

/// Legendre curve of Bernoulli(`p`) on the slope-(`s1`, `s2`) map against the
/// variational route at each of its `grid` levels.
pub fn spectrum_crosscheck(p: f64, s1: f64, s2: f64, grid: usize, search: &SpectrumSearch) -> Result<CrosscheckReport> {
    let map = ExpandingMarkovMap::linear_full_shift(&[s1, s2])?;
    let mu = MarkovMeasure::bernoulli(&[p, 1.0 - p])?;
    let measures = [ConstraintMeasure::from_markov("mu", &mu)?];
    let curve = legendre_bernoulli(p, s1, s2, grid)?;
    let candidates = evaluate_candidates(&map, &measures, search)?;
    let mut rows = Vec::with_capacity(grid);
    let mut max_deviation: f64 = 0.0;
    let mut infeasible = 0;
    for pt in &curve.points {
        let fl = pt.f.expect("legendre points carry f");
        let fv = best_feasible(&candidates, &[pt.alpha], search.delta).map(|c| c.f);
        let deviation = fv.map(|v| (v - fl).abs());
        match deviation {
            Some(d) => max_deviation = max_deviation.max(d),
            None => infeasible += 1,
        }
        rows.push(CrosscheckRow { u: pt.param, alpha: pt.alpha, f_legendre: fl, f_variational: fv, deviation });
    }
    Ok(CrosscheckReport { rows, max_deviation, infeasible })
}

/// One hypothesis of the conditional variational principle, with the
/// certificate that backs it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisItem {
    pub measure: String,
    pub hypothesis: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Non-atomic, invariant and weak Gibbs checks for every constraint measure.
pub fn hypotheses_checklist(measures: &[ConstraintMeasure], n_max: usize) -> Result<Vec<HypothesisItem>> {
    let mut out = Vec::new();
    for c in measures {
        let mu = c.measure.as_ref();
        let (defect, word) = invariance_defect(mu, n_max.min(10));
        out.push(HypothesisItem {
            measure: c.label.clone(),
            hypothesis: "invariant",
            passed: defect <= 1e-10,
            detail: format!("largest invariance defect {defect:e} at {word:?}"),
        });
        match &c.gibbs {
            Some((phi, p)) => {
                let af = atomfree_check(phi, n_max)?;
                out.push(HypothesisItem {
                    measure: c.label.clone(),
                    hypothesis: "non_atomic",
                    passed: af.witness.is_some(),
                    detail: match af.witness {
                        Some(n) => format!("sup S_n φ / n < P at n = {n}"),
                        None => format!("no witness up to n = {n_max}"),
                    },
                });
                let cert = certify_weak_gibbs(mu, &AdditiveSequence::new(phi.clone()), *p, n_max.max(4), 0.05)?;
                out.push(HypothesisItem {
                    measure: c.label.clone(),
                    hypothesis: "weak_gibbs",
                    passed: cert.verdict != Verdict::Rejected,
                    detail: format!("verdict {} with log K*(n_max) = {:e}", cert.verdict.label(), cert.log_kstar.last().map_or(0.0, |p| p.1)),
                });
            }
            None => {
                out.push(HypothesisItem {
                    measure: c.label.clone(),
                    hypothesis: "non_atomic",
                    passed: false,
                    detail: "no potential supplied; not certified".into(),
                });
                out.push(HypothesisItem {
                    measure: c.label.clone(),
                    hypothesis: "weak_gibbs",
                    passed: false,
                    detail: "no potential supplied; not certified".into(),
                });
            }
        }
    }
    Ok(out)
}
