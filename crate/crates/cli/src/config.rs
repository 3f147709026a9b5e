//! Versioned TOML experiment configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use weakgibbs::io::{parse_measure, parse_potential};
use weakgibbs::measures::{build_rpf, CylinderMeasure, RpfGibbs};
use weakgibbs::{ExpandingMarkovMap, LocallyConstantPotential, MarkovMeasure, SymbolicPoint, TransitionSystem};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Toml(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Model { context: String, source: weakgibbs::Error },
}

fn model(context: &str) -> impl FnOnce(weakgibbs::Error) -> InputError + '_ {
    move |source| InputError::Model { context: context.to_string(), source }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub system: Option<SystemSpec>,
    pub potential: Option<PotentialSpec>,
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub constraints: Vec<MeasureSpec>,
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub params: Params,
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    FullShift { k: usize },
    GoldenMean,
    Matrix { rows: Vec<Vec<u8>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Constant { value: f64 },
    DepthOne { values: Vec<f64> },
    /// Values on admissible `depth`-words in lexicographic order.
    Table { depth: usize, values: Vec<f64> },
    File { path: PathBuf },
    /// Uniform values in `[low, high)` drawn from `params.seed`.
    Random { depth: usize, low: f64, high: f64 },
    /// `log` of the transition weights of `[measure]`.
    LogWeight,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Bernoulli { weights: Vec<f64> },
    Parry,
    Markov { transition: Vec<Vec<f64>> },
    /// Equilibrium measure of `[potential]`.
    Rpf,
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    LinearFullShift { slopes: Vec<f64> },
    GoldenMeanLinear,
    PerturbedDoubling { c: f64 },
    PiecewiseLinear { domains: Vec<[f64; 2]>, images: Option<Vec<[f64; 2]>>, increasing: Option<Vec<bool>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    #[serde(default)]
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    /// Pressure used for certification; the spectral pressure when absent.
    pub pressure: Option<f64>,
    pub table_len: Option<usize>,
    pub approx_k: Option<usize>,
    pub tail_start: Option<usize>,
    pub samples: Option<usize>,
    pub exhaustive_limit: Option<usize>,
    pub point: Option<PointSpec>,
    pub pointwise_n: Option<usize>,
    pub alpha: Option<Vec<Vec<f64>>>,
    pub alpha_points: Option<usize>,
    pub family: Option<String>,
    pub resolution: Option<usize>,
    pub delta: Option<f64>,
    pub quadrature_depth: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

/// Command-line values that take precedence over `[params]`.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

/// A measure together with whatever is known about its potential.
#[derive(Clone)]
pub struct LoadedMeasure {
    pub label: String,
    pub oracle: Arc<dyn CylinderMeasure>,
    pub markov: Option<MarkovMeasure>,
    pub rpf: Option<RpfGibbs>,
}

/// Fully parsed and validated inputs.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub input_hash: String,
    pub system: Option<TransitionSystem>,
    pub potential: Option<LocallyConstantPotential>,
    pub measure: Option<LoadedMeasure>,
    pub constraints: Vec<LoadedMeasure>,
    pub map: Option<ExpandingMarkovMap>,
    pub point: Option<SymbolicPoint>,
}

impl Loaded {
    pub fn params(&self) -> &Params {
        &self.config.params
    }

    pub fn system(&self) -> Result<&TransitionSystem, InputError> {
        self.system.as_ref().ok_or_else(|| InputError::Invalid("missing [system] (or [map])".into()))
    }

    pub fn potential(&self) -> Result<&LocallyConstantPotential, InputError> {
        self.potential.as_ref().ok_or_else(|| InputError::Invalid("missing [potential]".into()))
    }

    pub fn measure(&self) -> Result<&LoadedMeasure, InputError> {
        self.measure.as_ref().ok_or_else(|| InputError::Invalid("missing [measure]".into()))
    }

    pub fn map(&self) -> Result<&ExpandingMarkovMap, InputError> {
        self.map.as_ref().ok_or_else(|| InputError::Invalid("missing [map]".into()))
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Read { path: path.to_path_buf(), source })
}

fn build_system(spec: &SystemSpec) -> Result<TransitionSystem, InputError> {
    match spec {
        SystemSpec::FullShift { k } => {
            if *k == 0 {
                return Err(InputError::Invalid("system.k must be positive".into()));
            }
            Ok(TransitionSystem::full_shift(*k))
        }
        SystemSpec::GoldenMean => Ok(TransitionSystem::golden_mean()),
        SystemSpec::Matrix { rows } => TransitionSystem::new(rows.clone()).map_err(model("system")),
    }
}

fn build_map(spec: &MapSpec, ts: Option<&TransitionSystem>) -> Result<ExpandingMarkovMap, InputError> {
    match spec {
        MapSpec::LinearFullShift { slopes } => ExpandingMarkovMap::linear_full_shift(slopes).map_err(model("map")),
        MapSpec::GoldenMeanLinear => Ok(ExpandingMarkovMap::golden_mean_linear()),
        MapSpec::PerturbedDoubling { c } => ExpandingMarkovMap::perturbed_doubling(*c).map_err(model("map")),
        MapSpec::PiecewiseLinear { domains, images, increasing } => {
            let ts = ts.ok_or_else(|| InputError::Invalid("a piecewise_linear map needs [system]".into()))?;
            let pairs = |v: &[[f64; 2]]| v.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>();
            ExpandingMarkovMap::piecewise_linear(
                ts,
                pairs(domains),
                images.as_deref().map(pairs),
                increasing.clone().unwrap_or_else(|| vec![true; domains.len()]),
            )
            .map_err(model("map"))
        }
    }
}

fn build_potential(
    spec: &PotentialSpec,
    ts: &TransitionSystem,
    seed: u64,
    base: &Path,
    files: &mut Vec<PathBuf>,
    measure: Option<&LoadedMeasure>,
) -> Result<LocallyConstantPotential, InputError> {
    let ctx = model("potential");
    match spec {
        PotentialSpec::Zero => Ok(LocallyConstantPotential::constant(ts, 0.0)),
        PotentialSpec::Constant { value } => {
            LocallyConstantPotential::from_fn(ts, 1, |_| *value).map_err(ctx)
        }
        PotentialSpec::DepthOne { values } => LocallyConstantPotential::depth_one(ts, values).map_err(ctx),
        PotentialSpec::Table { depth, values } => {
            let words: Vec<Vec<usize>> = if *depth == 0 { Vec::new() } else { ts.cylinders(*depth).map(|w| w.into_vec()).collect() };
            if words.len() != values.len() {
                return Err(InputError::Invalid(format!(
                    "potential.values has {} entries, the system has {} admissible {depth}-words",
                    values.len(),
                    words.len()
                )));
            }
            LocallyConstantPotential::from_table(ts, *depth, words.into_iter().zip(values.iter().copied())).map_err(ctx)
        }
        PotentialSpec::File { path } => {
            let path = base.join(path);
            let text = read(&path)?;
            files.push(path);
            parse_potential(ts, &text).map_err(ctx)
        }
        PotentialSpec::Random { depth, low, high } => {
            if !(low < high) {
                return Err(InputError::Invalid("potential.low must be below potential.high".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            LocallyConstantPotential::from_fn(ts, *depth, |_| rng.gen_range(*low..*high)).map_err(ctx)
        }
        PotentialSpec::LogWeight => {
            let mu = measure
                .and_then(|m| m.markov.as_ref())
                .ok_or_else(|| InputError::Invalid("log_weight potential needs a Markov [measure]".into()))?;
            mu.log_weight_potential().map_err(ctx)
        }
    }
}

fn build_measure(
    spec: &MeasureSpec,
    label: &str,
    ts: &TransitionSystem,
    potential: Option<&LocallyConstantPotential>,
    base: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<LoadedMeasure, InputError> {
    let ctx = model("measure");
    let from_markov = |m: MarkovMeasure| LoadedMeasure {
        label: label.to_string(),
        oracle: Arc::new(m.clone()),
        markov: Some(m),
        rpf: None,
    };
    match spec {
        MeasureSpec::Bernoulli { weights } => {
            if *ts != TransitionSystem::full_shift(weights.len()) {
                return Err(InputError::Invalid("Bernoulli weights need a full shift with one weight per symbol".into()));
            }
            Ok(from_markov(MarkovMeasure::bernoulli(weights).map_err(ctx)?))
        }
        MeasureSpec::Parry => Ok(from_markov(MarkovMeasure::parry(ts).map_err(ctx)?)),
        MeasureSpec::Markov { transition } => {
            Ok(from_markov(MarkovMeasure::from_transition(ts, transition.clone()).map_err(ctx)?))
        }
        MeasureSpec::Rpf => {
            let phi = potential.ok_or_else(|| InputError::Invalid("an rpf measure needs [potential]".into()))?;
            let g = build_rpf(phi).map_err(ctx)?;
            Ok(LoadedMeasure {
                label: label.to_string(),
                oracle: Arc::new(g.measure.clone()),
                markov: Some(g.measure.clone()),
                rpf: Some(g),
            })
        }
        MeasureSpec::Table { path } => {
            let path = base.join(path);
            let text = read(&path)?;
            files.push(path);
            let tab = parse_measure(ts, &text).map_err(ctx)?;
            Ok(LoadedMeasure { label: label.to_string(), oracle: Arc::new(tab), markov: None, rpf: None })
        }
    }
}

fn check_params(p: &Params) -> Result<(), InputError> {
    for (name, v) in [("tol", p.tol), ("tau", p.tau), ("delta", p.delta)] {
        if let Some(v) = v {
            if !(v > 0.0) {
                return Err(InputError::Invalid(format!("params.{name} must be positive")));
            }
        }
    }
    if let (Some(a), Some(b)) = (p.n_min, p.n_max) {
        if a == 0 || a >= b {
            return Err(InputError::Invalid(format!("params.n_min = {a} and n_max = {b} give an empty range")));
        }
    }
    if p.n_max == Some(0) {
        return Err(InputError::Invalid("params.n_max must be positive".into()));
    }
    if let Some(f) = &p.family {
        if f != "bernoulli" && f != "markov" {
            return Err(InputError::Invalid(format!("params.family must be 'bernoulli' or 'markov', got '{f}'")));
        }
    }
    Ok(())
}

/// Parses the configuration at `path`, applies overrides and builds every
/// referenced object. Nothing is computed before this succeeds.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Loaded, InputError> {
    let text = read(path)?;
    let mut config: ExperimentConfig = toml::from_str(&text).map_err(|e| InputError::Toml(e.to_string()))?;
    if config.version != CONFIG_VERSION {
        return Err(InputError::Invalid(format!("unsupported version {}, expected {CONFIG_VERSION}", config.version)));
    }
    if let Some(n) = overrides.n_max {
        config.params.n_max = Some(n);
    }
    if let Some(t) = overrides.tol {
        config.params.tol = Some(t);
    }
    if let Some(s) = overrides.seed {
        config.params.seed = Some(s);
    }
    check_params(&config.params)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut files = Vec::new();

    let mut system = config.system.as_ref().map(build_system).transpose()?;
    let map = config.map.as_ref().map(|m| build_map(m, system.as_ref())).transpose()?;
    if let Some(m) = &map {
        match &system {
            Some(ts) if ts != m.system() => {
                return Err(InputError::Invalid("[system] differs from the coding of [map]".into()));
            }
            None => system = Some(m.system().clone()),
            _ => {}
        }
    }
    let seed = config.params.seed.unwrap_or(0);
    let needs_measure_first = matches!(config.potential, Some(PotentialSpec::LogWeight));
    let mut potential = None;
    let mut measure = None;
    if let Some(ts) = &system {
        if needs_measure_first {
            if let Some(spec) = &config.measure {
                measure = Some(build_measure(spec, "measure", ts, None, &base, &mut files)?);
            }
        }
        if let Some(spec) = &config.potential {
            potential = Some(build_potential(spec, ts, seed, &base, &mut files, measure.as_ref())?);
        }
        if measure.is_none() {
            if let Some(spec) = &config.measure {
                measure = Some(build_measure(spec, "measure", ts, potential.as_ref(), &base, &mut files)?);
            }
        }
    } else if config.potential.is_some() || config.measure.is_some() || !config.constraints.is_empty() {
        return Err(InputError::Invalid("potentials and measures need [system] or [map]".into()));
    }
    let mut constraints = Vec::new();
    for (i, spec) in config.constraints.iter().enumerate() {
        let ts = system.as_ref().expect("checked above");
        constraints.push(build_measure(spec, &format!("mu{}", i + 1), ts, potential.as_ref(), &base, &mut files)?);
    }
    let point = match (&config.params.point, &system) {
        (Some(p), Some(ts)) => Some(ts.point(p.prefix.clone(), p.cycle.clone()).map_err(model("params.point"))?),
        (Some(_), None) => return Err(InputError::Invalid("params.point needs a system".into())),
        _ => None,
    };

    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    for f in &files {
        hasher.update(read(f)?.as_bytes());
    }
    hasher.update(format!("{overrides:?}").as_bytes());
    let input_hash = hex::encode(hasher.finalize());
    Ok(Loaded { config, input_hash, system, potential, measure, constraints, map, point })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, toml::de::Error> {
        toml::from_str(text)
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("version = 1\ncolour = 3\n").is_err());
        assert!(parse("version = 1\n[system]\nkind = \"full_shift\"\nk = 2\nextra = 1\n").is_err());
        assert!(parse("version = 1\n[params]\nn_maxx = 3\n").is_err());
        assert!(parse("version = 1\n[system]\nkind = \"full_shift\"\nk = 2\n").is_ok());
    }

    #[test]
    fn tolerances_must_be_positive() {
        let mut p = Params { tol: Some(0.0), ..Default::default() };
        assert!(check_params(&p).is_err());
        p.tol = Some(1e-6);
        p.n_min = Some(5);
        p.n_max = Some(5);
        assert!(check_params(&p).is_err());
    }
}
