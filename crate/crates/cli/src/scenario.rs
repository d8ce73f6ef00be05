//! Scenario files: a TOML tree with a versioned `schema` field.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smeared_core::kinematics::{Bivector, FourVector};
use smeared_core::pairing::{LightConeQuadrature, Sheet};
use smeared_core::testfns::{BumpSpec, GridTestFunction, PolarizedGaussianPacket, TestFunction};

pub const SCHEMA_VERSION: u32 = 1;
/// Upper bound on the configured total-excitation cutoff.
pub const MAX_FOCK_CUTOFF: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub fock: FockConfig,
    #[serde(default)]
    pub bank: Vec<FunctionConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub radial_nodes: Option<usize>,
    pub polar_nodes: Option<usize>,
    pub azimuthal_nodes: Option<usize>,
    pub tolerance: Option<f64>,
    pub max_rounds: Option<usize>,
    pub hbar: Option<f64>,
    /// Radial cutoff; defaults to the largest bandwidth of the functions involved.
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { cutoff: default_cutoff() }
    }
}

fn default_cutoff() -> usize {
    8
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionConfig {
    Packet {
        name: String,
        center: [f64; 4],
        width: f64,
        duration: f64,
        #[serde(default)]
        carrier: [f64; 4],
        electric: [f64; 3],
        magnetic: [f64; 3],
        #[serde(default)]
        electric_im: [f64; 3],
        #[serde(default)]
        magnetic_im: [f64; 3],
        #[serde(default = "unit_amplitude")]
        amplitude: [f64; 2],
    },
    Bump {
        name: String,
        center: [f64; 4],
        radii: [f64; 4],
        #[serde(default)]
        carrier: [f64; 4],
        electric: [f64; 3],
        magnetic: [f64; 3],
        bandwidth: f64,
        #[serde(default = "unit_amplitude")]
        amplitude: [f64; 2],
    },
}

impl FunctionConfig {
    pub fn name(&self) -> &str {
        match self {
            FunctionConfig::Packet { name, .. } | FunctionConfig::Bump { name, .. } => name,
        }
    }

    fn build(&self) -> smeared_core::Result<TestFunction> {
        let complex = |re: [f64; 3], im: [f64; 3]| std::array::from_fn(|i| Complex64::new(re[i], im[i]));
        match self {
            FunctionConfig::Packet { center, width, duration, carrier, electric, magnetic, electric_im, magnetic_im, amplitude, .. } => {
                let pol = Bivector::new(complex(*electric, *electric_im), complex(*magnetic, *magnetic_im));
                let amp = Complex64::new(amplitude[0], amplitude[1]);
                Ok(PolarizedGaussianPacket::new(pol, FourVector(*center), *width, *duration, FourVector(*carrier), amp)?.into())
            }
            FunctionConfig::Bump { center, radii, carrier, electric, magnetic, bandwidth, amplitude, .. } => {
                let mut spec = BumpSpec::real(FourVector(*center), *radii, Bivector::from_real(*electric, *magnetic), *bandwidth);
                spec.carrier = FourVector(*carrier);
                spec.amplitude = Complex64::new(amplitude[0], amplitude[1]);
                Ok(GridTestFunction::bump(&spec)?.into())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SheetChoice {
    Positive,
    Negative,
    #[default]
    Both,
}

impl SheetChoice {
    pub fn sheets(self) -> Vec<Sheet> {
        match self {
            SheetChoice::Positive => vec![Sheet::Positive],
            SheetChoice::Negative => vec![Sheet::Negative],
            SheetChoice::Both => vec![Sheet::Positive, Sheet::Negative],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableChoice {
    Phi,
    Chi,
    Xi,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Vacuum,
    OneQuantum { function: String },
    Gibbs { mu: f64, nu: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CothLaw {
    /// `coth(x/2)`, what the truncated thermal trace produces.
    #[default]
    HalfArgument,
    /// `coth(x)`, the law under test.
    Stated,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Vacuum,
    Gibbs { mu: f64, nu: f64 },
}

fn default_regime_levels() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, std::f64::consts::SQRT_2]
}

fn default_lambda_max() -> f64 {
    3.0
}

fn default_points() -> usize {
    13
}

fn default_scan_max() -> f64 {
    6.0
}

fn default_scan_steps() -> usize {
    12
}

fn default_one() -> f64 {
    1.0
}

fn default_gibbs_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_sweep_lambda() -> f64 {
    1.0
}

fn default_sweep_points() -> usize {
    11
}

fn default_half() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

fn default_count() -> usize {
    100_000
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Gram {
        name: Option<String>,
        members: Vec<String>,
        #[serde(default)]
        sheet: SheetChoice,
    },
    CausalityScan {
        name: Option<String>,
        f: String,
        g: Option<String>,
        #[serde(default = "default_scan_max")]
        max_separation: f64,
        #[serde(default = "default_scan_steps")]
        steps: usize,
    },
    Commutators {
        name: Option<String>,
        members: Vec<String>,
        #[serde(default = "default_regime_levels")]
        alphas: Vec<f64>,
        #[serde(default = "default_regime_levels")]
        betas: Vec<f64>,
        cutoff: Option<usize>,
    },
    Charfn {
        name: Option<String>,
        function: String,
        #[serde(default = "default_observable")]
        observable: ObservableChoice,
        #[serde(default = "default_one")]
        alpha: f64,
        #[serde(default = "default_one")]
        beta: f64,
        #[serde(default = "default_state")]
        state: StateConfig,
        #[serde(default = "default_lambda_max")]
        lambda_max: f64,
        #[serde(default = "default_points")]
        points: usize,
        cutoff: Option<usize>,
        /// Rescale the function to `(f, f) = 1` first.
        #[serde(default)]
        normalize: bool,
    },
    GibbsSweep {
        name: Option<String>,
        function: String,
        #[serde(default = "default_gibbs_grid")]
        mus: Vec<f64>,
        #[serde(default = "default_gibbs_grid")]
        nus: Vec<f64>,
        #[serde(default = "default_half")]
        alpha: f64,
        #[serde(default = "default_half")]
        beta: f64,
        #[serde(default)]
        law: CothLaw,
        #[serde(default = "default_sweep_lambda")]
        lambda_max: f64,
        #[serde(default = "default_sweep_points")]
        points: usize,
    },
    FluctuationRegimes {
        name: Option<String>,
        f: String,
        g: String,
        #[serde(default = "default_regime_levels")]
        alphas: Vec<f64>,
        #[serde(default = "default_regime_levels")]
        betas: Vec<f64>,
    },
    Sample {
        name: Option<String>,
        members: Vec<String>,
        #[serde(default = "default_source")]
        source: SourceConfig,
        #[serde(default = "default_count")]
        count: usize,
        seed: Option<u64>,
    },
    Convolution {
        name: Option<String>,
        function: String,
        excitation: Option<String>,
        #[serde(default = "default_lambda_max")]
        lambda_max: f64,
        #[serde(default = "default_points")]
        points: usize,
        cutoff: Option<usize>,
    },
}

fn default_observable() -> ObservableChoice {
    ObservableChoice::Phi
}

fn default_state() -> StateConfig {
    StateConfig::Vacuum
}

fn default_source() -> SourceConfig {
    SourceConfig::Vacuum
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Gram { .. } => "gram",
            TaskConfig::CausalityScan { .. } => "causality-scan",
            TaskConfig::Commutators { .. } => "commutators",
            TaskConfig::Charfn { .. } => "charfn",
            TaskConfig::GibbsSweep { .. } => "gibbs-sweep",
            TaskConfig::FluctuationRegimes { .. } => "fluctuation-regimes",
            TaskConfig::Sample { .. } => "sample",
            TaskConfig::Convolution { .. } => "convolution",
        }
    }

    fn explicit_name(&self) -> Option<&String> {
        match self {
            TaskConfig::Gram { name, .. }
            | TaskConfig::CausalityScan { name, .. }
            | TaskConfig::Commutators { name, .. }
            | TaskConfig::Charfn { name, .. }
            | TaskConfig::GibbsSweep { name, .. }
            | TaskConfig::FluctuationRegimes { name, .. }
            | TaskConfig::Sample { name, .. }
            | TaskConfig::Convolution { name, .. } => name.as_ref(),
        }
    }

    /// Explicit name, or `<kind>-<index>`.
    pub fn label(&self, index: usize) -> String {
        self.explicit_name().cloned().unwrap_or_else(|| format!("{}-{index}", self.kind()))
    }

    /// Bank references with their field paths relative to the task.
    fn references<'a>(&'a self) -> Vec<(String, &'a String)> {
        let mut out = Vec::new();
        let many = |field: &str, members: &'a [String]| {
            members.iter().enumerate().map(|(i, m)| (format!("{field}[{i}]"), m)).collect::<Vec<_>>()
        };
        match self {
            TaskConfig::Gram { members, .. } | TaskConfig::Commutators { members, .. } | TaskConfig::Sample { members, .. } => {
                out.extend(many("members", members));
            }
            TaskConfig::CausalityScan { f, g, .. } => {
                out.push(("f".to_string(), f));
                if let Some(g) = g {
                    out.push(("g".to_string(), g));
                }
            }
            TaskConfig::Charfn { function, state, .. } => {
                out.push(("function".to_string(), function));
                if let StateConfig::OneQuantum { function } = state {
                    out.push(("state.function".to_string(), function));
                }
            }
            TaskConfig::GibbsSweep { function, .. } => out.push(("function".to_string(), function)),
            TaskConfig::FluctuationRegimes { f, g, .. } => {
                out.push(("f".to_string(), f));
                out.push(("g".to_string(), g));
            }
            TaskConfig::Convolution { function, excitation, .. } => {
                out.push(("function".to_string(), function));
                if let Some(h) = excitation {
                    out.push(("excitation".to_string(), h));
                }
            }
        }
        out
    }
}

/// A validated scenario with its bank built.
pub struct Loaded {
    pub scenario: Scenario,
    pub bank: Vec<(String, TestFunction)>,
}

impl Loaded {
    pub fn function(&self, name: &str) -> &TestFunction {
        &self.bank.iter().find(|(n, _)| n == name).expect("references validated at load").1
    }

    pub fn functions(&self, names: &[String]) -> Vec<TestFunction> {
        names.iter().map(|n| self.function(n).clone()).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.bank.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Quadrature covering `funcs`, with the scenario's overrides applied.
    pub fn quadrature(&self, funcs: &[TestFunction]) -> smeared_core::Result<LightConeQuadrature> {
        let q = &self.scenario.quadrature;
        let mut quad = match q.cutoff {
            Some(c) => LightConeQuadrature::new(c, Sheet::Positive)?,
            None => LightConeQuadrature::covering(funcs, Sheet::Positive)?,
        };
        quad = quad.with_nodes(
            q.radial_nodes.unwrap_or(quad.radial_nodes),
            q.polar_nodes.unwrap_or(quad.polar_nodes),
            q.azimuthal_nodes.unwrap_or(quad.azimuthal_nodes),
        )?;
        if let Some(t) = q.tolerance {
            quad = quad.with_tolerance(t)?;
        }
        if let Some(r) = q.max_rounds {
            quad.max_rounds = r;
        }
        if let Some(h) = q.hbar {
            quad = quad.with_hbar(h)?;
        }
        Ok(quad)
    }
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<Loaded, ConfigError> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })?;
    validate(scenario)
}

fn check_positive(field: String, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn check_finite(field: String, xs: &[f64]) -> Result<(), ConfigError> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(invalid(format!("{field}[{i}]"), "must be finite")),
        None => Ok(()),
    }
}

fn check_cutoff(field: String, n: usize) -> Result<(), ConfigError> {
    if n == 0 || n > MAX_FOCK_CUTOFF {
        return Err(invalid(field, format!("must lie in 1..={MAX_FOCK_CUTOFF}, got {n}")));
    }
    Ok(())
}

fn validate(scenario: Scenario) -> Result<Loaded, ConfigError> {
    if scenario.schema != SCHEMA_VERSION {
        return Err(invalid("schema", format!("unsupported schema {}, expected {SCHEMA_VERSION}", scenario.schema)));
    }
    if scenario.name.trim().is_empty() {
        return Err(invalid("name", "must not be empty"));
    }
    check_cutoff("fock.cutoff".into(), scenario.fock.cutoff)?;
    let q = &scenario.quadrature;
    for (field, v) in [("radial_nodes", q.radial_nodes), ("polar_nodes", q.polar_nodes), ("azimuthal_nodes", q.azimuthal_nodes)] {
        if let Some(n) = v {
            if !(4..=4096).contains(&n) {
                return Err(invalid(format!("quadrature.{field}"), format!("must lie in 4..=4096, got {n}")));
            }
        }
    }
    if let Some(t) = q.tolerance {
        if !(t > 0.0 && t < 1.0) {
            return Err(invalid("quadrature.tolerance", format!("must lie in (0, 1), got {t}")));
        }
    }
    if let Some(r) = q.max_rounds {
        if !(1..=12).contains(&r) {
            return Err(invalid("quadrature.max_rounds", format!("must lie in 1..=12, got {r}")));
        }
    }
    if let Some(h) = q.hbar {
        check_positive("quadrature.hbar".into(), h)?;
    }
    if let Some(c) = q.cutoff {
        check_positive("quadrature.cutoff".into(), c)?;
    }

    let mut seen = HashSet::new();
    let mut bank = Vec::new();
    for (i, f) in scenario.bank.iter().enumerate() {
        let field = format!("bank[{i}]");
        if f.name().trim().is_empty() {
            return Err(invalid(format!("{field}.name"), "must not be empty"));
        }
        if !seen.insert(f.name().to_string()) {
            return Err(invalid(format!("{field}.name"), format!("duplicate bank member `{}`", f.name())));
        }
        let built = f.build().map_err(|e| invalid(field.clone(), e.to_string()))?;
        bank.push((f.name().to_string(), built));
    }

    let mut labels = HashSet::new();
    for (i, t) in scenario.tasks.iter().enumerate() {
        let field = format!("tasks[{i}]");
        let label = t.label(i);
        if label.is_empty() || !label.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) || label.starts_with('.') {
            return Err(invalid(format!("{field}.name"), format!("`{label}` must be nonempty and use only letters, digits, '-', '_' or '.'")));
        }
        if !labels.insert(label.clone()) {
            return Err(invalid(format!("{field}.name"), format!("duplicate task name `{label}`")));
        }
        for (sub, name) in t.references() {
            if !seen.contains(name.as_str()) {
                return Err(invalid(format!("{field}.{sub}"), format!("undefined bank member `{name}`")));
            }
        }
        match t {
            TaskConfig::Gram { members, .. } | TaskConfig::Commutators { members, .. } | TaskConfig::Sample { members, .. }
                if members.is_empty() =>
            {
                return Err(invalid(format!("{field}.members"), "must name at least one bank member"));
            }
            _ => {}
        }
        match t {
            TaskConfig::CausalityScan { max_separation, steps, .. } => {
                check_positive(format!("{field}.max_separation"), *max_separation)?;
                if *steps == 0 {
                    return Err(invalid(format!("{field}.steps"), "must be at least 1"));
                }
            }
            TaskConfig::Commutators { alphas, betas, cutoff, .. } => {
                check_finite(format!("{field}.alphas"), alphas)?;
                check_finite(format!("{field}.betas"), betas)?;
                if let Some(n) = cutoff {
                    check_cutoff(format!("{field}.cutoff"), *n)?;
                }
            }
            TaskConfig::FluctuationRegimes { alphas, betas, .. } => {
                check_finite(format!("{field}.alphas"), alphas)?;
                check_finite(format!("{field}.betas"), betas)?;
            }
            TaskConfig::Charfn { alpha, beta, state, lambda_max, points, cutoff, .. } => {
                check_finite(format!("{field}.alpha"), &[*alpha, *beta])?;
                check_positive(format!("{field}.lambda_max"), *lambda_max)?;
                if *points < 2 {
                    return Err(invalid(format!("{field}.points"), "must be at least 2"));
                }
                if let StateConfig::Gibbs { mu, nu } = state {
                    check_positive(format!("{field}.state.mu"), *mu)?;
                    check_positive(format!("{field}.state.nu"), *nu)?;
                }
                if let Some(n) = cutoff {
                    check_cutoff(format!("{field}.cutoff"), *n)?;
                }
            }
            TaskConfig::GibbsSweep { mus, nus, alpha, beta, lambda_max, points, .. } => {
                for (k, v) in mus.iter().enumerate() {
                    check_positive(format!("{field}.mus[{k}]"), *v)?;
                }
                for (k, v) in nus.iter().enumerate() {
                    check_positive(format!("{field}.nus[{k}]"), *v)?;
                }
                if mus.is_empty() || nus.is_empty() {
                    return Err(invalid(format!("{field}.mus"), "mus and nus must be nonempty"));
                }
                check_finite(format!("{field}.alpha"), &[*alpha, *beta])?;
                check_positive(format!("{field}.lambda_max"), *lambda_max)?;
                if *points < 3 {
                    return Err(invalid(format!("{field}.points"), "must be at least 3"));
                }
            }
            TaskConfig::Sample { source, count, .. } => {
                if *count < 3 {
                    return Err(invalid(format!("{field}.count"), format!("must be at least 3, got {count}")));
                }
                if let SourceConfig::Gibbs { mu, nu } = source {
                    check_positive(format!("{field}.source.mu"), *mu)?;
                    check_positive(format!("{field}.source.nu"), *nu)?;
                }
            }
            TaskConfig::Convolution { lambda_max, points, cutoff, .. } => {
                check_positive(format!("{field}.lambda_max"), *lambda_max)?;
                if *points < 2 {
                    return Err(invalid(format!("{field}.points"), "must be at least 2"));
                }
                if let Some(n) = cutoff {
                    check_cutoff(format!("{field}.cutoff"), *n)?;
                }
            }
            TaskConfig::Gram { .. } => {}
        }
    }
    Ok(Loaded { scenario, bank })
}
