use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use weakgibbs::io::write_measure;
use weakgibbs::markov_maps::{check_ujr, pointwise_dimension_estimates, MapClass, UjrSampling};
use weakgibbs::measures::{additivity_defect, certify_weak_gibbs, invariance_defect, kessebohmer_bound, TabulatedMeasure, Verdict};
use weakgibbs::multifractal::{
    evaluate_candidates, hypotheses_checklist, legendre_bernoulli, variational_from_candidates, ConstraintMeasure,
    SearchFamily, SpectrumSearch,
};
use weakgibbs::pressure::{pressure_limit, pressure_spectral};
use weakgibbs::psi::{
    check_almost_additive_psi, check_asymptotic_additivity_psi, check_gibbs_one, check_pressure_zero,
    check_sandwich_certified,
};
use weakgibbs::sft::format_symbols;
use weakgibbs::{build_psi, AdditiveSequence, LocallyConstantPotential, PressureInput, PressureMethod, TransitionSystem};

use crate::config::{InputError, Loaded, LoadedMeasure};
use crate::output::{num, Csv};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Compute(#[from] weakgibbs::Error),
}

pub struct Outcome {
    pub passed: bool,
    pub summary: Value,
    pub csvs: Vec<Csv>,
    /// Additional plain-text files.
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    SftCheck,
    Pressure,
    GibbsBuild,
    WeakgibbsCertify,
    PsiVerify,
    MapCheck,
    Spectrum,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SftCheck => "sft-check",
            Command::Pressure => "pressure",
            Command::GibbsBuild => "gibbs-build",
            Command::WeakgibbsCertify => "weakgibbs-certify",
            Command::PsiVerify => "psi-verify",
            Command::MapCheck => "map-check",
            Command::Spectrum => "spectrum",
        }
    }
}

pub fn run(command: Command, l: &Loaded) -> Result<Outcome, CommandError> {
    match command {
        Command::SftCheck => sft_check(l),
        Command::Pressure => pressure(l),
        Command::GibbsBuild => gibbs_build(l),
        Command::WeakgibbsCertify => weakgibbs_certify(l),
        Command::PsiVerify => psi_verify(l),
        Command::MapCheck => map_check(l),
        Command::Spectrum => spectrum(l),
    }
}

fn sft_check(l: &Loaded) -> Result<Outcome, CommandError> {
    let ts = l.system()?;
    let n_max = l.params().n_max.unwrap_or(12);
    let mut csv = Csv::new("counts.csv", &["n", "cylinders", "periodic_points"]);
    for n in 1..=n_max {
        let show = |c: Option<u128>| c.map_or("overflow".to_string(), |x| x.to_string());
        csv.row(vec![n.to_string(), show(ts.count_cylinders(n)), show(ts.count_periodic(n))]);
    }
    let mixing = ts.is_mixing();
    let summary = json!({
        "k": ts.k(),
        "mixing": mixing,
        "mixing_exponent": ts.mixing_exponent(),
    });
    Ok(Outcome { passed: mixing, summary, csvs: vec![csv], files: Vec::new() })
}

fn pressure(l: &Loaded) -> Result<Outcome, CommandError> {
    let phi = l.potential()?;
    let p = l.params();
    let n_min = p.n_min.unwrap_or(1);
    let n_max = p.n_max.unwrap_or(20);
    let tol = p.tol.unwrap_or(1e-6);
    let spectral = pressure_spectral(phi)?;
    let cyl = pressure_limit(PressureMethod::Cylinder, PressureInput::Potential(phi), n_min, n_max)?;
    let per = pressure_limit(PressureMethod::Periodic, PressureInput::Potential(phi), n_min, n_max)?;
    let mut csv = Csv::new("pressure.csv", &["n", "cylinder", "periodic"]);
    for n in n_min..=n_max {
        let at = |e: &weakgibbs::PressureEstimate| {
            e.finite_n_values.iter().find(|q| q.0 == n).map_or("nan".to_string(), |q| num(q.1))
        };
        csv.row(vec![n.to_string(), at(&cyl), at(&per)]);
    }
    let entry = |e: &weakgibbs::PressureEstimate| {
        let dev = (e.extrapolated - spectral).abs();
        (dev <= e.error_bar + tol, json!({"extrapolated": e.extrapolated, "error_bar": e.error_bar, "deviation": dev}))
    };
    let (ok_c, jc) = entry(&cyl);
    let (ok_p, jp) = entry(&per);
    let summary = json!({
        "spectral": spectral,
        "cylinder": jc,
        "periodic": jp,
        "tol": tol,
        "n_min": n_min,
        "n_max": n_max,
    });
    Ok(Outcome { passed: ok_c && ok_p, summary, csvs: vec![csv], files: Vec::new() })
}

fn gibbs_build(l: &Loaded) -> Result<Outcome, CommandError> {
    let phi = l.potential()?;
    let g = weakgibbs::measures::build_rpf(phi)?;
    let tol = l.params().tol.unwrap_or(1e-10);
    let table_len = l.params().table_len.unwrap_or(8);
    let add = additivity_defect(&g.measure, table_len).0;
    let inv = invariance_defect(&g.measure, table_len).0;
    let mut perron = Csv::new("perron.csv", &["block", "right", "left", "stationary"]);
    for (i, b) in g.blocks.blocks.iter().enumerate() {
        perron.row(vec![format_symbols(b), num(g.right[i]), num(g.left[i]), num(g.measure.stationary()[i])]);
    }
    let mut trans = Csv::new("transition.csv", &["from", "to", "probability"]);
    let states = g.measure.states();
    for (u, row) in g.measure.transition().iter().enumerate() {
        for (v, &q) in row.iter().enumerate() {
            if q > 0.0 {
                trans.row(vec![format_symbols(&states[u]), format_symbols(&states[v]), num(q)]);
            }
        }
    }
    let table = TabulatedMeasure::from_oracle(&g.measure, table_len)?;
    let summary = json!({
        "pressure": g.log_lambda,
        "lambda": g.lambda(),
        "block_len": g.blocks.block_len,
        "max_ratio": g.max_ratio,
        "constant": g.constant,
        "additivity_defect": add,
        "invariance_defect": inv,
        "tol": tol,
        "table_len": table_len,
    });
    Ok(Outcome {
        passed: add <= tol && inv <= tol,
        summary,
        csvs: vec![perron, trans],
        files: vec![("measure.txt".into(), write_measure(&table))],
    })
}

/// Potential and pressure the measure is compared against.
fn reference_potential(l: &Loaded, m: &LoadedMeasure) -> Result<(LocallyConstantPotential, f64), CommandError> {
    if let Some(phi) = &l.potential {
        let p = match l.params().pressure {
            Some(p) => p,
            None => pressure_spectral(phi)?,
        };
        return Ok((phi.clone(), p));
    }
    if let Some(g) = &m.rpf {
        return Ok((g.potential.clone(), l.params().pressure.unwrap_or(g.log_lambda)));
    }
    if let Some(mk) = &m.markov {
        return Ok((mk.log_weight_potential()?, l.params().pressure.unwrap_or(0.0)));
    }
    Err(InputError::Invalid("a tabulated measure needs [potential]".into()).into())
}

fn weakgibbs_certify(l: &Loaded) -> Result<Outcome, CommandError> {
    let m = l.measure()?;
    let (phi, p) = reference_potential(l, m)?;
    let n_max = l.params().n_max.unwrap_or(12);
    let tau = l.params().tau.unwrap_or(0.05);
    let seq = AdditiveSequence::new(phi.clone());
    let cert = certify_weak_gibbs(m.oracle.as_ref(), &seq, p, n_max, tau)?;
    let mut csv = Csv::new("kstar.csv", &["n", "log_kstar", "kstar", "kessebohmer_bound"]);
    for &(n, lk) in &cert.log_kstar {
        csv.row(vec![n.to_string(), num(lk), num(lk.exp()), num(kessebohmer_bound(&phi, n))]);
    }
    let constant = match cert.verdict {
        Verdict::Gibbs { constant } => Some(constant),
        _ => None,
    };
    let summary = json!({
        "verdict": cert.verdict.label(),
        "constant": constant,
        "p_used": cert.p_used,
        "implied_pressure": cert.implied_pressure,
        "rate": cert.rate,
        "tail_slope": cert.tail_slope,
        "max_kstar": cert.max_kstar(),
        "tau": tau,
        "n_max": n_max,
    });
    Ok(Outcome { passed: cert.verdict != Verdict::Rejected, summary, csvs: vec![csv], files: Vec::new() })
}

fn psi_verify(l: &Loaded) -> Result<Outcome, CommandError> {
    let m = l.measure()?;
    let (phi, p) = reference_potential(l, m)?;
    let params = l.params();
    let n_max = params.n_max.unwrap_or(12);
    let tol = params.tol.unwrap_or(1e-3);
    let tau = params.tau.unwrap_or(0.05);
    let approx_k = params.approx_k.unwrap_or(4);
    let seq = AdditiveSequence::new(phi);
    let cert = certify_weak_gibbs(m.oracle.as_ref(), &seq, p, n_max, tau)?;
    let psi = build_psi(Arc::clone(&m.oracle), n_max.min(10))?;

    let g1 = check_gibbs_one(&psi, n_max);
    let pz = check_pressure_zero(&psi, n_max + 8, tol)?;
    let sw = check_sandwich_certified(&psi, &seq, &cert, n_max)?;
    let c = match cert.verdict {
        Verdict::Gibbs { constant } => constant,
        _ => cert.max_kstar(),
    };
    let aa = check_almost_additive_psi(&psi, c, n_max + 2);
    let asy = check_asymptotic_additivity_psi(&psi, &seq, &cert, approx_k, n_max)?;

    let mut sandwich = Csv::new("sandwich.csv", &["n", "log_k", "slack"]);
    for r in &sw.rows {
        sandwich.row(vec![r.n.to_string(), num(r.log_k), num(r.slack)]);
    }
    let mut pressure = Csv::new("pressure_zero.csv", &["n", "value"]);
    for &(n, v) in &pz.estimate.finite_n_values {
        pressure.row(vec![n.to_string(), num(v)]);
    }
    let mut almost = Csv::new("almost_additive.csv", &["n", "m", "defect"]);
    for &(n, mm, d) in &aa.rows {
        almost.row(vec![n.to_string(), mm.to_string(), num(d)]);
    }
    let mut asym = Csv::new("asymptotic.csv", &["n", "defect", "allowance"]);
    for r in &asy.rows {
        asym.row(vec![r.n.to_string(), num(r.defect), num(r.allowance)]);
    }
    let passed = g1.passed && pz.passed && sw.passed && aa.passed && asy.passed;
    let summary = json!({
        "verdict": cert.verdict.label(),
        "p_used": p,
        "gibbs_one": {"passed": g1.passed, "max_relative_error": g1.max_relative_error, "words_checked": g1.words_checked},
        "pressure_zero": {"passed": pz.passed, "extrapolated": pz.estimate.extrapolated, "error_bar": pz.estimate.error_bar, "tau": tol, "nonpositive": pz.nonpositive},
        "sandwich": {"passed": sw.passed, "violation": sw.violation.as_ref().map(|v| json!({"n": v.0, "word": format_symbols(&v.1)}))},
        "almost_additive": {"passed": aa.passed, "constant": aa.constant, "bound": aa.bound, "worst": aa.worst},
        "asymptotic_additive": {"passed": asy.passed, "k": asy.k},
        "n_max": n_max,
    });
    Ok(Outcome { passed, summary, csvs: vec![sandwich, pressure, almost, asym], files: Vec::new() })
}

fn map_check(l: &Loaded) -> Result<Outcome, CommandError> {
    let map = l.map()?;
    let params = l.params();
    let default_n = if map.class() == MapClass::PiecewiseLinear { 12 } else { 30 };
    let n_max = params.n_max.unwrap_or(default_n);
    let tail_start = params.tail_start.unwrap_or_else(|| 10.min((n_max / 2).max(1)));
    let sampling = UjrSampling {
        exhaustive_limit: params.exhaustive_limit.unwrap_or(4096),
        random_words: params.samples.unwrap_or(1000),
        seed: params.seed.unwrap_or(0),
    };
    let rep = check_ujr(map, n_max, tail_start, sampling)?;
    let mut csv = Csv::new("ujr.csv", &["n", "m", "spread", "words", "exhaustive"]);
    for r in &rep.rows {
        csv.row(vec![r.n.to_string(), num(r.m), num(r.spread), r.words.to_string(), r.exhaustive.to_string()]);
    }
    let mut csvs = vec![csv];
    let mut summary = json!({
        "class": map.class(),
        "label": map.label(),
        "rigorous": rep.rigorous,
        "nonincreasing_tail": rep.nonincreasing_tail,
        "identically_zero": rep.rows.iter().all(|r| r.m == 0.0),
        "max_m": rep.rows.iter().map(|r| r.m).fold(0.0, f64::max),
        "tail_start": tail_start,
        "n_max": n_max,
    });
    if let (Some(m), Some(point)) = (&l.measure, &l.point) {
        let pd = pointwise_dimension_estimates(map, m.oracle.as_ref(), point, params.pointwise_n.unwrap_or(200))?;
        let mut pcsv = Csv::new("pointwise.csv", &["n", "quotient"]);
        for &(n, q) in &pd.values {
            pcsv.row(vec![n.to_string(), num(q)]);
        }
        csvs.push(pcsv);
        summary["pointwise"] = json!({"last": pd.last, "tail_spread": pd.tail_spread, "point": point.to_string()});
    }
    Ok(Outcome { passed: rep.passed, summary, csvs, files: Vec::new() })
}

fn constraint(m: &LoadedMeasure) -> Result<ConstraintMeasure, CommandError> {
    Ok(match (&m.rpf, &m.markov) {
        (Some(g), _) => ConstraintMeasure::from_rpf(&m.label, g),
        (None, Some(mk)) => ConstraintMeasure::from_markov(&m.label, mk)?,
        (None, None) => ConstraintMeasure::oracle(&m.label, Arc::clone(&m.oracle)),
    })
}

/// Bernoulli weight of symbol 1 when the measure is a two-symbol product.
fn bernoulli_weight(m: &LoadedMeasure) -> Option<f64> {
    let mk = m.markov.as_ref()?;
    let q = mk.transition();
    let product = mk.order() == 1 && *mk.system() == TransitionSystem::full_shift(2) && q[0] == q[1];
    product.then(|| q[0][0])
}

fn spectrum(l: &Loaded) -> Result<Outcome, CommandError> {
    let map = l.map()?;
    let params = l.params();
    let loaded: Vec<&LoadedMeasure> = if l.constraints.is_empty() { vec![l.measure()?] } else { l.constraints.iter().collect() };
    let measures = loaded.iter().map(|m| constraint(m)).collect::<Result<Vec<_>, _>>()?;
    let r = measures.len();
    let full = *map.system() == TransitionSystem::full_shift(map.system().k());
    let family = match params.family.as_deref() {
        Some("markov") => SearchFamily::Markov { resolution: params.resolution.unwrap_or(100) },
        Some(_) => SearchFamily::Bernoulli { resolution: params.resolution.unwrap_or(1000) },
        None if full => SearchFamily::Bernoulli { resolution: params.resolution.unwrap_or(1000) },
        None => SearchFamily::Markov { resolution: params.resolution.unwrap_or(100) },
    };
    let search = SpectrumSearch {
        family,
        delta: params.delta.unwrap_or(1e-3),
        quadrature_depth: params.quadrature_depth.unwrap_or(12),
    };
    let slopes = map.log_slopes().map(|ls| ls.iter().map(|x| x.exp()).collect::<Vec<_>>());
    let legendre = match (r, bernoulli_weight(loaded[0]), &slopes) {
        (1, Some(p), Some(s)) if s.len() == 2 && full => {
            Some(legendre_bernoulli(p, s[0], s[1], params.alpha_points.unwrap_or(50))?)
        }
        _ => None,
    };
    let alphas: Vec<Vec<f64>> = match (&params.alpha, &legendre) {
        (Some(a), _) => a.clone(),
        (None, Some(c)) => c.points.iter().map(|p| vec![p.alpha]).collect(),
        (None, None) => return Err(InputError::Invalid("params.alpha is required for this map and measure".into()).into()),
    };
    if let Some(a) = alphas.iter().find(|a| a.len() != r) {
        return Err(InputError::Invalid(format!("α vector {a:?} must have {r} coordinates")).into());
    }
    let candidates = evaluate_candidates(map, &measures, &search)?;

    let mut header: Vec<String> = (1..=r).map(|i| format!("alpha_{i}")).collect();
    header.extend(["f", "method", "feasible", "argmax", "quadrature_gap"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new("spectrum.csv", &header_refs);
    let mut feasible_count = 0;
    let mut max_gap: f64 = 0.0;
    let mut variational_f = Vec::with_capacity(alphas.len());
    for a in &alphas {
        let res = variational_from_candidates(map, &measures, &candidates, a, &search)?;
        let mut row: Vec<String> = a.iter().map(|x| num(*x)).collect();
        let gap = res.quadrature.as_ref().map(|q| q.max_disagreement);
        if res.feasible {
            feasible_count += 1;
            max_gap = max_gap.max(gap.unwrap_or(0.0));
        }
        row.push(res.f.map_or(String::new(), num));
        row.push("variational".into());
        row.push(res.feasible.to_string());
        row.push(res.argmax_params.as_ref().map_or(String::new(), |p| p.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")));
        row.push(gap.map_or(String::new(), num));
        csv.row(row);
        variational_f.push(res.f);
    }
    let mut max_deviation = None;
    if let Some(c) = &legendre {
        let mut worst: f64 = 0.0;
        for (pt, fv) in c.points.iter().zip(&variational_f) {
            let fl = pt.f.expect("legendre points carry f");
            if params.alpha.is_none() {
                if let Some(v) = fv {
                    worst = worst.max((v - fl).abs());
                }
            }
            csv.row(vec![num(pt.alpha), num(fl), "legendre".into(), "true".into(), num(pt.param), String::new()]);
        }
        if params.alpha.is_none() {
            max_deviation = Some(worst);
        }
    }
    let checklist = hypotheses_checklist(&measures, params.n_max.unwrap_or(8))?;
    let hypotheses_ok = checklist.iter().all(|h| h.passed);
    let summary = json!({
        "levels": alphas.len(),
        "feasible_levels": feasible_count,
        "candidates": candidates.len(),
        "delta": search.delta,
        "family": search.family,
        "quadrature_depth": search.quadrature_depth,
        "max_quadrature_gap": max_gap,
        "legendre_max_deviation": max_deviation,
        "legendre_concavity_defect": legendre.as_ref().map(|c| c.concavity_defect()),
        "hypotheses": checklist,
    });
    Ok(Outcome { passed: hypotheses_ok, summary, csvs: vec![csv], files: Vec::new() })
}
