//! Suite configuration: parsing, normalization and eager validation.
//!
//! A suite is a TOML or JSON file (chosen by extension) with one canonical
//! schema; see the README for the full key list. Every semantic error is
//! reported as `path:line: message`, anchored at the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use infogeo::divergence::{BayesianAlphaForm, ConvexGenerator, PriorDensity};
use infogeo::estimation::EstimatorTable;
use infogeo::geometry::DivergenceHandle;
use infogeo::manifold::{DiffScheme, Family};
use infogeo::{DiffConfig, EscortMap, ParametricModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every check kind `verify` understands.
pub const CHECK_KINDS: &[&str] = &[
    "metric",
    "scale-relation",
    "duality",
    "crlb",
    "alpha-crlb",
    "efficiency",
    "generalized-crlb",
    "unbiasedness",
    "bayesian-crlb",
    "biased-crlb",
    "barankin",
    "dual-coordinates",
    "bayesian-nonnegativity",
    "variants",
    "monte-carlo",
];

/// A scalar or a vector; scalars are one-dimensional points.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Self::Scalar(v) => vec![*v],
            Self::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Name(String),
    Table(ModelTable),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTable {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Logit-linear statistic table, one row per symbol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_prime: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
}

impl ModelSpec {
    /// Expands `"binomial(3)"`-style names into a table.
    fn into_table(self) -> Result<ModelTable, String> {
        match self {
            Self::Table(t) => Ok(t),
            Self::Name(s) => {
                let (name, arg) = split_call(&s)?;
                let mut t = ModelTable {
                    name: name.to_string(),
                    ..Default::default()
                };
                match (name, arg) {
                    (_, None) => {}
                    ("binomial", Some(a)) => t.n = Some(a.parse().map_err(|_| format!("bad trial count in `{s}`"))?),
                    ("categorical", Some(a)) => {
                        t.d = Some(a.parse().map_err(|_| format!("bad alphabet size in `{s}`"))?)
                    }
                    _ => return Err(format!("model `{s}` takes no argument")),
                }
                Ok(t)
            }
        }
    }
}

/// `"name(arg)"` → `("name", Some("arg"))`.
fn split_call(s: &str) -> Result<(&str, Option<&str>), String> {
    let s = s.trim();
    match s.find('(') {
        None => Ok((s, None)),
        Some(i) if s.ends_with(')') => Ok((s[..i].trim(), Some(s[i + 1..s.len() - 1].trim()))),
        Some(_) => Err(format!("malformed name `{s}`")),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl GridSpec {
    fn points(&self) -> Result<Vec<Vec<f64>>, String> {
        match (&self.points, self.start, self.stop, self.step) {
            (Some(p), None, None, None) if !p.is_empty() => Ok(p.iter().map(Point::to_vec).collect()),
            (None, Some(a), Some(b), Some(h)) => line(a, b, h),
            _ => Err("grid needs either a non-empty `points` list or all of `start`, `stop`, `step`".into()),
        }
    }
}

/// `a, a+h, …, b` with each point snapped to 12 decimals so that sums of
/// steps land on round values (0.05·10 = 0.5 exactly).
fn line(a: f64, b: f64, h: f64) -> Result<Vec<Vec<f64>>, String> {
    if !(h > 0.0 && b >= a && a.is_finite() && b.is_finite()) {
        return Err(format!("grid line needs start ≤ stop and step > 0, got {a}..{b} step {h}"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(format!("grid line {a}..{b} step {h} has too many points"));
    }
    Ok((0..=n).map(|i| vec![((a + i as f64 * h) * 1e12).round() / 1e12]).collect())
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Name(String),
    Table(PriorTable),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PriorTable {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<PriorSpec>>,
}

impl PriorSpec {
    pub fn build(&self, model: &ParametricModel) -> Result<PriorDensity, String> {
        let t = match self {
            Self::Name(s) => PriorTable {
                name: s.clone(),
                ..Default::default()
            },
            Self::Table(t) => t.clone(),
        };
        let (ml, mu) = model.domain();
        let lower = t.lower.clone().unwrap_or_else(|| ml.to_vec());
        let upper = t.upper.clone().unwrap_or_else(|| mu.to_vec());
        let built = match t.name.as_str() {
            "uniform" => PriorDensity::uniform(lower, upper),
            "ramp" => {
                if lower.len() != 1 {
                    return Err("the ramp prior is one-dimensional; use `product` for boxes".into());
                }
                PriorDensity::ramp(t.a.unwrap_or(lower[0]), t.b.unwrap_or(upper[0]))
            }
            "beta" => match (t.a, t.b) {
                (Some(a), Some(b)) => PriorDensity::beta(a, b),
                _ => return Err("the beta prior needs `a` and `b`".into()),
            },
            "product" => {
                let factors = t.factors.as_ref().ok_or("the product prior needs `factors`")?;
                let one_d = ParametricModel::bernoulli();
                let built: Result<Vec<_>, String> = factors.iter().map(|f| f.build(&one_d)).collect();
                PriorDensity::product(built?)
            }
            other => return Err(format!("unknown prior `{other}`; expected uniform, ramp, beta or product")),
        };
        built.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EstimatorSpec {
    Name(String),
    Table(EstimatorDef),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorDef {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// One row per symbol, for `kind = "table"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Point>>,
    /// The constant, for `kind = "constant"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Point>,
    /// Whether the suite claims the estimator is unbiased; claimed
    /// estimators get an automatic unbiasedness record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unbiased: Option<bool>,
}

/// A resolved estimator fixture.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub table: EstimatorTable,
    pub unbiased: bool,
    pub spec: EstimatorDef,
}

impl EstimatorSpec {
    fn build(&self, model: &ParametricModel) -> Result<Fixture, String> {
        let def = match self {
            Self::Name(s) => EstimatorDef {
                kind: s.clone(),
                ..Default::default()
            },
            Self::Table(d) => d.clone(),
        };
        let d = model.alphabet_size();
        let (table, default_unbiased) = match def.kind.as_str() {
            "sample-mean" => match model.family() {
                Family::Bernoulli => (EstimatorTable::sample_mean(1), true),
                Family::Binomial { n } => (EstimatorTable::sample_mean(*n), true),
                _ => return Err(format!("`sample-mean` needs a bernoulli or binomial model, not {}", model.name())),
            },
            "indicator" => match model.family() {
                Family::Categorical { d } => (EstimatorTable::indicator(*d).map_err(|e| e.to_string())?, true),
                _ => return Err(format!("`indicator` needs a categorical model, not {}", model.name())),
            },
            "constant" => {
                let v = def.value.as_ref().ok_or("a constant estimator needs `value`")?.to_vec();
                (EstimatorTable::constant(d, &v).map_err(|e| e.to_string())?, false)
            }
            "table" => {
                let rows: Vec<Vec<f64>> = def
                    .rows
                    .as_ref()
                    .ok_or("a table estimator needs `rows`")?
                    .iter()
                    .map(Point::to_vec)
                    .collect();
                let name = def.label.clone().unwrap_or_else(|| "table".into());
                (EstimatorTable::from_rows(name, &rows).map_err(|e| e.to_string())?, false)
            }
            other => {
                return Err(format!(
                    "unknown estimator `{other}`; expected sample-mean, indicator, constant or table"
                ))
            }
        };
        if table.alphabet_size() != d || table.dim() != model.dim() {
            return Err(format!(
                "estimator is {}×{} but {} needs {}×{} (symbols × parameters)",
                table.alphabet_size(),
                table.dim(),
                model.name(),
                d,
                model.dim()
            ));
        }
        Ok(Fixture {
            table,
            unbiased: def.unbiased.unwrap_or(default_unbiased),
            spec: def,
        })
    }
}

/// The efficient fixture of a built-in family, if it has one.
fn default_estimator(model: &ParametricModel) -> Option<EstimatorSpec> {
    match model.family() {
        Family::Bernoulli | Family::Binomial { .. } => Some(EstimatorSpec::Name("sample-mean".into())),
        Family::Categorical { .. } => Some(EstimatorSpec::Name("indicator".into())),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum CheckSpec {
    Name(String),
    Table(CheckDef),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDef {
    pub kind: String,
    /// `kl`, `i_alpha`, `generalized_f`, `bayesian_kl` or `bayesian_i_alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Convex generator: `kl`, `chi-squared` or `alpha(a)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Escort map: `identity`, `alpha(a)` or a bare order `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escort: Option<EscortSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deterministic: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Labels of the models this check applies to; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<String>>,
}

impl CheckSpec {
    fn into_def(self) -> CheckDef {
        match self {
            Self::Name(kind) => CheckDef {
                kind,
                ..Default::default()
            },
            Self::Table(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EscortSpec {
    Order(f64),
    Name(String),
}

impl EscortSpec {
    pub fn build(&self) -> Result<EscortMap, String> {
        match self {
            Self::Order(a) => EscortMap::for_order(*a).map_err(|e| e.to_string()),
            Self::Name(s) => match split_call(s)? {
                ("identity", None) => Ok(EscortMap::Identity),
                ("alpha", Some(a)) => EscortMap::for_order(parse_num(a)?).map_err(|e| e.to_string()),
                _ => Err(format!("unknown escort `{s}`; expected identity, alpha(a) or a number")),
            },
        }
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("`{s}` is not a number"))
}

pub fn build_generator(name: Option<&str>) -> Result<ConvexGenerator, String> {
    match split_call(name.unwrap_or("kl"))? {
        ("kl", None) => Ok(ConvexGenerator::kl()),
        ("chi-squared", None) => Ok(ConvexGenerator::chi_squared()),
        ("alpha", Some(a)) => ConvexGenerator::alpha_escort(parse_num(a)?).map_err(|e| e.to_string()),
        (other, _) => Err(format!("unknown generator `{other}`; expected kl, chi-squared or alpha(a)")),
    }
}

fn build_form(name: Option<&str>) -> Result<BayesianAlphaForm, String> {
    match name.unwrap_or("normalized") {
        "normalized" => Ok(BayesianAlphaForm::Normalized),
        "displayed" => Ok(BayesianAlphaForm::Displayed),
        "proof-alpha-factor" => Ok(BayesianAlphaForm::ProofAlphaFactor),
        other => Err(format!("unknown form `{other}`; expected normalized, displayed or proof-alpha-factor")),
    }
}

/// A divergence selection: name plus the parameters it needs.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceDef {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escort: Option<EscortSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum DivergenceSpec {
    Name(String),
    Table(DivergenceDef),
}

impl DivergenceSpec {
    fn into_def(self) -> DivergenceDef {
        match self {
            Self::Name(name) => DivergenceDef {
                name,
                ..Default::default()
            },
            Self::Table(d) => d,
        }
    }
}

impl DivergenceDef {
    /// Whether this divergence is indexed by an order α.
    pub fn takes_alpha(&self) -> bool {
        matches!(self.name.as_str(), "i_alpha" | "bayesian_i_alpha")
    }

    pub fn build(&self, alpha: Option<f64>, prior: Option<&PriorDensity>) -> Result<DivergenceHandle, String> {
        let need_alpha = || alpha.ok_or_else(|| format!("divergence `{}` needs an order α", self.name));
        let need_prior = || prior.cloned().ok_or_else(|| format!("divergence `{}` needs a prior", self.name));
        let handle = match self.name.as_str() {
            "kl" => Ok(DivergenceHandle::kl()),
            "i_alpha" => DivergenceHandle::i_alpha(need_alpha()?),
            "generalized_f" => {
                let escort = self.escort.as_ref().map_or(Ok(EscortMap::Identity), EscortSpec::build)?;
                Ok(DivergenceHandle::generalized_f(build_generator(self.f.as_deref())?, escort))
            }
            "bayesian_kl" => Ok(DivergenceHandle::bayesian_kl(need_prior()?)),
            "bayesian_i_alpha" => {
                DivergenceHandle::bayesian_i_alpha(need_prior()?, need_alpha()?, build_form(self.form.as_deref())?)
            }
            other => {
                return Err(format!(
                    "unknown divergence `{other}`; expected kl, i_alpha, generalized_f, bayesian_kl or bayesian_i_alpha"
                ))
            }
        };
        handle.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DiffSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory, relative to the config file.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub sweep: Option<String>,
}

/// The on-disk schema.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub theta: Option<Point>,
    #[serde(default)]
    pub theta_prime: Option<Point>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub divergences: Vec<DivergenceSpec>,
    #[serde(default)]
    pub estimator: Option<EstimatorSpec>,
    #[serde(default)]
    pub diff: Option<DiffSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
}

/// One model of a suite with everything resolved.
#[derive(Debug, Clone)]
pub struct ModelCase {
    pub label: String,
    pub spec: ModelTable,
    pub model: ParametricModel,
    pub points: Vec<Vec<f64>>,
    pub theta_prime: Option<Vec<f64>>,
    pub estimator: Option<Fixture>,
    pub prior: Option<PriorDensity>,
    pub prior_spec: Option<PriorSpec>,
}

/// A validated suite.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub path: PathBuf,
    pub digest: String,
    pub seed: u64,
    pub models: Vec<ModelCase>,
    /// Suite-level orders; empty means {1}.
    pub alphas: Vec<f64>,
    pub checks: Vec<CheckDef>,
    pub divergences: Vec<DivergenceDef>,
    pub diff: DiffConfig,
    /// Whether the suite chose a scheme; otherwise third-order work uses
    /// Richardson extrapolation.
    pub diff_scheme_set: bool,
    pub output: OutputSpec,
}

impl SuiteConfig {
    pub fn alphas(&self) -> Vec<f64> {
        if self.alphas.is_empty() {
            vec![1.0]
        } else {
            self.alphas.clone()
        }
    }

    /// Diff config for connection and duality work.
    pub fn third_order_diff(&self) -> DiffConfig {
        if self.diff_scheme_set {
            self.diff
        } else {
            DiffConfig {
                scheme: DiffScheme::Richardson,
                ..self.diff
            }
        }
    }

    /// Where outputs go: `--out` wins over the suite's `output.dir`.
    pub fn output_dir(&self, cli: Option<&Path>) -> Option<PathBuf> {
        cli.map(Path::to_path_buf).or_else(|| {
            self.output.dir.as_ref().map(|d| {
                if d.is_absolute() {
                    d.clone()
                } else {
                    self.path.parent().unwrap_or(Path::new(".")).join(d)
                }
            })
        })
    }
}

/// A configuration error anchored at a line of the source file.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{l}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line (1-based) of the `nth` assignment to `key`, in TOML (`key =`) or
/// JSON (`"key":`) syntax.
fn locate(src: &str, key: &str, nth: usize) -> Option<usize> {
    let mut seen = 0;
    for (i, line) in src.lines().enumerate() {
        for (pos, _) in line.match_indices(key) {
            let before = line[..pos].chars().next_back();
            if before.is_some_and(|c| c.is_alphanumeric() || c == '_') {
                continue;
            }
            let rest = line[pos + key.len()..].trim_start_matches('"').trim_start();
            let is_key = rest.starts_with('=') || rest.starts_with(':') || (rest.is_empty() && line.trim_start().starts_with("[["));
            let table_header = line.trim() == format!("[[{key}]]") || line.trim() == format!("[{key}]");
            if is_key || table_header {
                if seen == nth {
                    return Some(i + 1);
                }
                seen += 1;
            }
        }
    }
    None
}

struct Anchor<'a> {
    path: &'a Path,
    src: &'a str,
}

impl Anchor<'_> {
    fn err(&self, key: &str, nth: usize, message: impl Into<String>) -> anyhow::Error {
        self.err_in(&[(key, nth), (key, 0)], message)
    }

    /// Anchors at the first of `keys` that is present in the source.
    fn err_in(&self, keys: &[(&str, usize)], message: impl Into<String>) -> anyhow::Error {
        let line = keys.iter().find_map(|(k, n)| locate(self.src, k, *n));
        ConfigError {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
        .into()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Reads, parses and validates a suite.
pub fn load_config(path: &Path) -> Result<SuiteConfig> {
    let src = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&src).map_err(|e| anyhow!("{}: {e}", path.display()))?,
        Some("json") => serde_json::from_str(&src).map_err(|e| anyhow!("{}: {e}", path.display()))?,
        _ => bail!("{}: config must have a .toml or .json extension", path.display()),
    };
    validate(raw, path, &src)
}

fn validate(raw: RawConfig, path: &Path, src: &str) -> Result<SuiteConfig> {
    let at = Anchor { path, src };

    let mut diff = DiffConfig::default();
    let mut diff_scheme_set = false;
    if let Some(d) = &raw.diff {
        if let Some(s) = &d.scheme {
            diff.scheme = match s.as_str() {
                "central" => DiffScheme::Central,
                "richardson" => DiffScheme::Richardson,
                other => return Err(at.err("scheme", 0, format!("unknown scheme `{other}`; expected central or richardson"))),
            };
            diff_scheme_set = true;
        }
        diff.h2 = d.h2.unwrap_or(diff.h2);
        diff.h3 = d.h3.unwrap_or(diff.h3);
        diff.margin = d.margin.unwrap_or(diff.margin);
        diff.validate().map_err(|e| at.err("diff", 0, e.to_string()))?;
    }

    for &a in &raw.alphas {
        if !(a > 0.0 && a.is_finite()) {
            return Err(at.err("alphas", 0, format!("orders must be positive and finite, got {a}")));
        }
    }

    let key = if raw.models.is_empty() { "model" } else { "models" };
    let specs: Vec<ModelSpec> = match (raw.model, raw.models.is_empty()) {
        (Some(m), true) => vec![m],
        (None, false) => raw.models,
        (Some(_), false) => return Err(at.err("models", 0, "use either `model` or `models`, not both")),
        (None, true) => return Err(at.err("model", 0, "the suite names no model")),
    };

    let mut models = Vec::with_capacity(specs.len());
    for (i, spec) in specs.into_iter().enumerate() {
        let t = spec.into_table().map_err(|e| at.err(key, i, e))?;
        models.push(build_case(&at, key, t, i, &raw.prior, &raw.theta, &raw.theta_prime, &raw.grid, &raw.estimator)?);
    }
    let labels: Vec<&str> = models.iter().map(|m| m.label.as_str()).collect();
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(at.err("label", 0, format!("two models share the label `{l}`")));
        }
    }

    let divergences: Vec<DivergenceDef> = raw.divergences.into_iter().map(DivergenceSpec::into_def).collect();
    for (i, d) in divergences.iter().enumerate() {
        for case in &models {
            let orders = if d.takes_alpha() {
                d.alpha.map_or_else(|| alphas_or_one(&raw.alphas), |a| vec![a])
            } else {
                vec![1.0]
            };
            for a in orders {
                d.build(Some(a), case.prior.as_ref())
                    .map_err(|e| at.err("divergences", i, e))?;
            }
        }
    }

    let checks: Vec<CheckDef> = raw.checks.into_iter().map(CheckSpec::into_def).collect();
    for (i, c) in checks.iter().enumerate() {
        validate_check(&at, c, i, &models, &raw.alphas, &diff)?;
    }

    let seed = raw.seed;
    Ok(SuiteConfig {
        path: path.to_path_buf(),
        digest: sha256_hex(src.as_bytes()),
        seed,
        models,
        alphas: raw.alphas,
        checks,
        divergences,
        diff,
        diff_scheme_set,
        output: raw.output,
    })
}

fn alphas_or_one(alphas: &[f64]) -> Vec<f64> {
    if alphas.is_empty() {
        vec![1.0]
    } else {
        alphas.to_vec()
    }
}

#[allow(clippy::too_many_arguments)]
fn build_case(
    at: &Anchor<'_>,
    model_key: &str,
    t: ModelTable,
    index: usize,
    prior: &Option<PriorSpec>,
    theta: &Option<Point>,
    theta_prime: &Option<Point>,
    grid: &Option<GridSpec>,
    estimator: &Option<EstimatorSpec>,
) -> Result<ModelCase> {
    let unit = |k: usize| (vec![0.0; k], vec![1.0; k]);
    let model = match t.name.as_str() {
        "bernoulli" => Ok(ParametricModel::bernoulli()),
        "binomial" => match t.n {
            Some(n) => ParametricModel::binomial(n),
            None => return Err(at.err("name", index, "the binomial model needs `n`")),
        },
        "categorical" => match t.d {
            Some(d) => ParametricModel::categorical(d),
            None => return Err(at.err("name", index, "the categorical model needs `d`")),
        },
        "logit-linear" | "logit_linear" => {
            let rows = t
                .statistics
                .as_ref()
                .ok_or_else(|| at.err("name", index, "the logit-linear model needs a `statistics` table"))?;
            let k = rows.first().map_or(0, Vec::len);
            if rows.is_empty() || k == 0 || rows.iter().any(|r| r.len() != k) {
                return Err(at.err("statistics", 0, "`statistics` must be a non-empty table of equal-length rows"));
            }
            let (dl, du) = unit(k);
            let h = DMatrix::from_fn(rows.len(), k, |x, i| rows[x][i]);
            ParametricModel::logit_linear(h, t.lower.clone().unwrap_or(dl), t.upper.clone().unwrap_or(du))
        }
        other => {
            return Err(at.err(
                model_key,
                index,
                format!("unknown model `{other}`; expected bernoulli, binomial, categorical or logit-linear"),
            ))
        }
    }
    .map_err(|e| at.err(model_key, index, e.to_string()))?;
    let label = t.label.clone().unwrap_or_else(|| model.name().to_string());

    // Per-model keys win over suite-level ones.
    let (points, point_key) = match (&t.grid, &t.theta, grid, theta) {
        (Some(g), _, _, _) => (Some(g.points().map_err(|e| at.err("grid", index, e))?), "grid"),
        (None, Some(p), _, _) => (Some(vec![p.to_vec()]), "theta"),
        (None, None, Some(g), _) => (Some(g.points().map_err(|e| at.err("grid", 0, e))?), "grid"),
        (None, None, None, Some(p)) => (Some(vec![p.to_vec()]), "theta"),
        _ => (None, "theta"),
    };
    let points = points.unwrap_or_default();
    for p in &points {
        model.check_point(p).map_err(|e| at.err(point_key, 0, domain_message(&model, &label, e)))?;
    }
    let theta_prime = t.theta_prime.as_ref().or(theta_prime.as_ref()).map(Point::to_vec);
    if let Some(p) = &theta_prime {
        model
            .check_point(p)
            .map_err(|e| at.err("theta_prime", 0, domain_message(&model, &label, e)))?;
    }

    let prior_spec = t.prior.clone().or_else(|| prior.clone());
    let prior = match &prior_spec {
        Some(s) => {
            let p = s.build(&model).map_err(|e| at.err("prior", 0, e))?;
            if p.dim() != model.dim() {
                return Err(at.err(
                    "prior",
                    0,
                    format!("prior is {}-dimensional but {label} has {} parameters", p.dim(), model.dim()),
                ));
            }
            Some(p)
        }
        None => None,
    };

    let est_spec = t.estimator.clone().or_else(|| estimator.clone()).or_else(|| default_estimator(&model));
    let estimator = match est_spec {
        Some(s) => Some(s.build(&model).map_err(|e| at.err("estimator", 0, format!("{label}: {e}")))?),
        None => None,
    };

    Ok(ModelCase {
        label,
        spec: t,
        model,
        points,
        theta_prime,
        estimator,
        prior,
        prior_spec,
    })
}

fn domain_message(model: &ParametricModel, label: &str, e: infogeo::Error) -> String {
    match e {
        infogeo::Error::Domain(msg) => msg,
        infogeo::Error::DimensionMismatch { expected, got } => format!(
            "{label} has {expected} parameter(s) but the point has {got} (domain {})",
            describe_box(model)
        ),
        other => other.to_string(),
    }
}

fn describe_box(model: &ParametricModel) -> String {
    let (l, u) = model.domain();
    let faces: Vec<String> = l.iter().zip(u).map(|(a, b)| format!("({a}, {b})")).collect();
    format!("Θ = {}", faces.join(" × "))
}

/// Orders a check runs at: its own `alpha`/`alphas`, else the suite's, else {1}.
pub fn check_alphas(c: &CheckDef, suite: &[f64]) -> Vec<f64> {
    match (&c.alphas, c.alpha) {
        (Some(a), _) if !a.is_empty() => a.clone(),
        (_, Some(a)) => vec![a],
        _ => alphas_or_one(suite),
    }
}

pub fn applies_to(c: &CheckDef, case: &ModelCase) -> bool {
    c.models.as_ref().is_none_or(|m| m.iter().any(|l| l == &case.label))
}

fn validate_check(
    at: &Anchor<'_>,
    c: &CheckDef,
    index: usize,
    models: &[ModelCase],
    suite_alphas: &[f64],
    diff: &DiffConfig,
) -> Result<()> {
    let err = |msg: String| at.err_in(&[("kind", index), ("checks", 0)], format!("check `{}`: {msg}", c.kind));
    if !CHECK_KINDS.contains(&c.kind.as_str()) {
        return Err(at.err(
            "checks",
            0,
            format!("unknown check `{}`; expected one of {}", c.kind, CHECK_KINDS.join(", ")),
        ));
    }
    if let Some(names) = &c.models {
        for n in names {
            if !models.iter().any(|m| &m.label == n) {
                return Err(err(format!("check refers to unknown model `{n}`")));
            }
        }
    }
    let alphas = check_alphas(c, suite_alphas);
    for &a in &alphas {
        if !(a > 0.0 && a.is_finite()) {
            return Err(err(format!("orders must be positive and finite, got {a}")));
        }
    }
    if let Some(t) = c.tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(err(format!("tolerance must be non-negative, got {t}")));
        }
    }
    for case in models.iter().filter(|m| applies_to(c, m)) {
        let m = &case.model;
        let label = &case.label;
        let needs_points = !matches!(c.kind.as_str(), "bayesian-crlb" | "bayesian-nonnegativity");
        if needs_points && case.points.is_empty() {
            return Err(err(format!("{label} has no `theta` or `grid` to evaluate at")));
        }
        let needs_estimator = matches!(
            c.kind.as_str(),
            "crlb"
                | "alpha-crlb"
                | "efficiency"
                | "generalized-crlb"
                | "unbiasedness"
                | "bayesian-crlb"
                | "biased-crlb"
                | "barankin"
                | "monte-carlo"
        );
        if needs_estimator && case.estimator.is_none() {
            return Err(err(format!("{label} has no estimator; set `estimator`")));
        }
        let fd = matches!(c.kind.as_str(), "metric" | "duality" | "biased-crlb" | "dual-coordinates");
        if fd {
            for p in &case.points {
                m.check_interior(p, diff.margin).map_err(|e| err(format!("{label}: {e}")))?;
            }
        }
        match c.kind.as_str() {
            "metric" | "duality" => {
                let d = check_divergence(c);
                if c.kind == "duality" && !matches!(d.name.as_str(), "kl" | "i_alpha") {
                    return Err(err("the duality check supports kl and i_alpha".into()));
                }
                let orders = if d.takes_alpha() { alphas.clone() } else { vec![1.0] };
                for a in orders {
                    d.build(Some(a), case.prior.as_ref()).map_err(err)?;
                }
            }
            "generalized-crlb" => {
                build_generator(c.f.as_deref()).map_err(err)?;
                c.escort.as_ref().map_or(Ok(EscortMap::Identity), EscortSpec::build).map_err(err)?;
            }
            "bayesian-crlb" | "bayesian-nonnegativity" => {
                let prior = case
                    .prior
                    .as_ref()
                    .ok_or_else(|| err(format!("{label} needs a `prior` for `{}`", c.kind)))?;
                if c.kind == "bayesian-crlb" {
                    let n = c.grid_points.unwrap_or(201);
                    let (l, u) = prior.support();
                    infogeo::bounds::ThetaGrid::midpoint(l, u, n).map_err(|e| err(e.to_string()))?;
                    if let Some(det) = &c.deterministic {
                        infogeo::bounds::HybridMask::new(m.dim(), det).map_err(|e| err(e.to_string()))?;
                    }
                }
                if c.kind == "bayesian-nonnegativity" && alphas.contains(&1.0) && c.alphas.is_some() {
                    return Err(err("α = 1 is not accepted by bayesian_i_alpha; use bayesian_kl instead".into()));
                }
            }
            "barankin" if m.dim() != 1 => {
                return Err(err(format!("the Barankin check needs a one-parameter model, {label} has {}", m.dim())));
            }
            "barankin" => {
                if !(1..=4).contains(&c.subset_size.unwrap_or(2)) {
                    return Err(err("`subset_size` must be in 1..=4".into()));
                }
            }
            "dual-coordinates" if !matches!(m.family(), Family::LogitLinear { .. }) => {
                return Err(err(format!("the dual-coordinates check needs a logit-linear model, not {label}")));
            }
            "monte-carlo" if c.samples == Some(0) => {
                return Err(err("`samples` must be positive".into()));
            }
            _ => {}
        }
    }
    Ok(())
}

/// The divergence a metric or duality check uses; `kl` by default.
pub fn check_divergence(c: &CheckDef) -> DivergenceDef {
    DivergenceDef {
        name: c.divergence.clone().unwrap_or_else(|| "kl".into()),
        alpha: None,
        f: c.f.clone(),
        escort: c.escort.clone(),
        form: c.form.clone(),
    }
}
