use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::ModeBasis;
use super::operators::{mode_annihilator, Observable, OperatorMatrix};
use super::space::{binomial, FockSpace, Sector};
use crate::expm::{dense_expectations, expm, Lanczos};
use crate::pairing::{pair, Sheet};
use crate::testfns::TestFunction;
use crate::{Error, Result};

/// Dimension up to which characteristic functions use dense Padé exponentials.
pub const DENSE_LIMIT: usize = 256;
/// Tolerance for `(f, f) = 1` in state preparation.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-8;
/// Largest `(f,f)₋ / (f,f)` accepted for a positive-frequency test function.
pub const FREQUENCY_SUPPORT_TOLERANCE: f64 = 1e-8;
/// Discarded Gibbs weight above which a warning is logged.
pub const TAIL_WARNING: f64 = 1e-6;
/// Target for `e^{−min(μ,ν)N}·deg(N)` when choosing a Gibbs cutoff.
pub const TAIL_RULE: f64 = 1e-8;
/// Largest accepted Hermiticity defect of a characteristic-function generator.
pub const GENERATOR_HERMITICITY_BOUND: f64 = 1e-10;
const KRYLOV_MAX: usize = 400;
const KRYLOV_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    coefficients: Vec<Complex64>,
    vacuum: bool,
}

impl StateVector {
    pub fn vacuum(space: &FockSpace) -> Self {
        let mut coefficients = vec![Complex64::new(0.0, 0.0); space.dim()];
        coefficients[0] = Complex64::new(1.0, 0.0);
        StateVector { coefficients, vacuum: true }
    }

    pub fn from_coefficients(coefficients: Vec<Complex64>) -> Self {
        StateVector { coefficients, vacuum: false }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn is_vacuum(&self) -> bool {
        self.vacuum
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Complex64 {
        let v = op.apply(&self.coefficients);
        self.coefficients.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest total excitation with nonzero amplitude.
    pub fn max_level(&self, space: &FockSpace) -> usize {
        (0..space.dim()).filter(|&i| self.coefficients[i] != Complex64::new(0.0, 0.0)).map(|i| space.level(i)).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsSpec {
    pub mu: f64,
    pub nu: f64,
}

impl GibbsSpec {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        if !(mu > 0.0 && nu > 0.0 && mu.is_finite() && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("Gibbs parameters must be positive, got ({mu}, {nu})")));
        }
        Ok(GibbsSpec { mu, nu })
    }
}

/// `Tr[e^{−xN} (a a† + a† a)] / Tr[e^{−xN}]` for one mode: `coth(x/2)`.
pub fn variance_multiplier(x: f64) -> f64 {
    1.0 / (0.5 * x).tanh()
}

/// Smallest `N` with `e^{−min(μ,ν)N}·C(N+M−1, M−1) < TAIL_RULE` for `M` modes.
pub fn gibbs_cutoff(spec: &GibbsSpec, modes: usize) -> usize {
    let m = spec.mu.min(spec.nu);
    let modes = modes.max(1);
    (1..).find(|&n| (-m * n as f64).exp() * binomial(n + modes - 1, modes - 1) < TAIL_RULE).expect("tail rule terminates")
}

/// Diagonal Gibbs density over a truncated space.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsState {
    pub spec: GibbsSpec,
    pub weights: Vec<f64>,
    /// Bound on the weight the truncation discards, relative to the kept trace.
    pub tail_bound: f64,
}

impl GibbsState {
    pub fn trace(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn gibbs_weight(spec: &GibbsSpec, space: &FockSpace) -> Result<GibbsState> {
    let spec = GibbsSpec::new(spec.mu, spec.nu)?;
    let raw: Vec<f64> = (0..space.dim())
        .map(|s| {
            let na = space.sector_level(s, Sector::A) as f64;
            let nb = space.sector_level(s, Sector::B) as f64;
            (-spec.mu * na - spec.nu * nb).exp()
        })
        .collect();
    let z: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / z).collect();
    let m = spec.mu.min(spec.nu);
    let modes = space.modes();
    let mut tail = 0.0;
    let mut level = space.cutoff() + 1;
    loop {
        let term = (-m * level as f64).exp() * binomial(level + modes - 1, modes - 1);
        tail += term;
        if term < 1e-30 * tail.max(1e-300) || level > space.cutoff() + 100_000 {
            break;
        }
        level += 1;
    }
    let tail_bound = tail / z;
    if tail_bound > TAIL_WARNING {
        log::warn!("Gibbs truncation at N = {} discards up to {tail_bound:.3e} of the trace", space.cutoff());
    }
    Ok(GibbsState { spec, weights, tail_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Vacuum,
    SingleQuantum,
    ProjectorDensity,
}

#[derive(Debug, Clone)]
pub enum PreparedState {
    Vector(StateVector),
    /// `|ψ⟩⟨ψ|` with unit-norm `ψ`.
    Projector(StateVector),
    Gibbs(GibbsState),
}

impl PreparedState {
    pub fn expectation(&self, op: &OperatorMatrix) -> Complex64 {
        match self {
            PreparedState::Vector(v) | PreparedState::Projector(v) => v.expectation(op),
            PreparedState::Gibbs(g) => g.weights.iter().enumerate().map(|(s, w)| op.matrix.get(s, s) * *w).sum(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            PreparedState::Vector(v) | PreparedState::Projector(v) => v.norm().powi(2),
            PreparedState::Gibbs(g) => g.trace(),
        }
    }
}

fn check_normalized_positive(f: &TestFunction, basis_a: &ModeBasis) -> Result<()> {
    let quad = basis_a.quadrature();
    let ff = pair(f, f, &quad.with_sheet(Sheet::Positive))?.value.re;
    if (ff - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Normalization { value: ff });
    }
    let neg = pair(f, f, &quad.with_sheet(Sheet::Negative))?.value.re;
    if neg / ff > FREQUENCY_SUPPORT_TOLERANCE {
        return Err(Error::FrequencySupport { ratio: neg / ff });
    }
    Ok(())
}

/// `a_f†|0⟩` for a normalized positive-frequency `f`.
fn single_quantum(f: &TestFunction, basis_a: &ModeBasis, space: &FockSpace) -> Result<StateVector> {
    check_normalized_positive(f, basis_a)?;
    let c = basis_a.spanned_coefficients(f)?;
    let a = mode_annihilator(space, Sector::A, &c.values)?;
    let vac = StateVector::vacuum(space);
    Ok(StateVector::from_coefficients(a.matrix.adjoint().matvec(vac.coefficients())))
}

pub fn state_prepare(kind: StateKind, f: Option<&TestFunction>, basis_a: &ModeBasis, space: &FockSpace) -> Result<PreparedState> {
    let need_f = || f.ok_or_else(|| Error::InvalidParameter(format!("{kind:?} needs a test function")));
    Ok(match kind {
        StateKind::Vacuum => PreparedState::Vector(StateVector::vacuum(space)),
        StateKind::SingleQuantum => PreparedState::Vector(single_quantum(need_f()?, basis_a, space)?),
        StateKind::ProjectorDensity => PreparedState::Projector(single_quantum(need_f()?, basis_a, space)?),
    })
}

/// `(a_f† + b_f†)|0⟩`, renormalized to unit norm.
pub fn two_sector_quantum(f: &TestFunction, basis_a: &ModeBasis, basis_b: &ModeBasis, space: &FockSpace) -> Result<StateVector> {
    check_normalized_positive(f, basis_a)?;
    let ca = basis_a.spanned_coefficients(f)?;
    let cb = basis_b.spanned_coefficients(f)?;
    let a = mode_annihilator(space, Sector::A, &ca.values)?;
    let b = mode_annihilator(space, Sector::B, &cb.values)?;
    let create = a.matrix.add(&b.matrix).adjoint();
    let v = create.matvec(StateVector::vacuum(space).coefficients());
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    Ok(StateVector::from_coefficients(v.into_iter().map(|c| c / norm).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CharacteristicMethod {
    MatrixExponential,
    AnalyticGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicQuery {
    pub lambdas: Vec<f64>,
    pub method: CharacteristicMethod,
}

impl CharacteristicQuery {
    pub fn new(lambdas: Vec<f64>, method: CharacteristicMethod) -> Result<Self> {
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("characteristic-function lambdas must be finite".into()));
        }
        Ok(CharacteristicQuery { lambdas, method })
    }
}

fn check_generator(op: &OperatorMatrix) -> Result<()> {
    let scale = op.matrix.max_abs().max(1.0);
    let defect = op.hermiticity_defect();
    if defect > GENERATOR_HERMITICITY_BOUND * scale {
        return Err(Error::NonHermitian { defect });
    }
    Ok(())
}

fn vector_expectations(op: &OperatorMatrix, psi: &[Complex64], lambdas: &[f64]) -> Vec<Complex64> {
    if op.dim() <= DENSE_LIMIT {
        dense_expectations(&op.matrix.to_dense(), psi, lambdas)
    } else {
        Lanczos::run(&op.matrix, psi, lambdas, KRYLOV_MAX, KRYLOV_TOL).expectations(lambdas)
    }
}

/// `⟨s|e^{iλO}|s⟩` for every basis state `s` with `weight(s) > 0`, for reuse across Gibbs weights.
#[derive(Debug, Clone)]
pub struct DiagonalExponentials {
    /// `values[s][j]` is the diagonal element at `lambdas[j]`; empty for skipped states.
    values: Vec<Vec<Complex64>>,
}

impl DiagonalExponentials {
    pub fn compute(op: &OperatorMatrix, lambdas: &[f64], include: impl Fn(usize) -> bool + Sync) -> Result<Self> {
        check_generator(op)?;
        let n = op.dim();
        let values = if n <= DENSE_LIMIT {
            let h = op.matrix.to_dense();
            let exps: Vec<_> = lambdas.iter().map(|&l| expm(&(&h * Complex64::new(0.0, l)))).collect();
            (0..n).map(|s| if include(s) { exps.iter().map(|e| e[(s, s)]).collect() } else { Vec::new() }).collect()
        } else {
            (0..n)
                .into_par_iter()
                .map(|s| {
                    if !include(s) {
                        return Vec::new();
                    }
                    let mut e = vec![Complex64::new(0.0, 0.0); n];
                    e[s] = Complex64::new(1.0, 0.0);
                    Lanczos::run(&op.matrix, &e, lambdas, KRYLOV_MAX, KRYLOV_TOL).expectations(lambdas)
                })
                .collect()
        };
        Ok(DiagonalExponentials { values })
    }

    /// `Σ_s w_s ⟨s|e^{iλO}|s⟩`; states skipped at compute time must carry zero weight.
    pub fn trace_with(&self, weights: &[f64], count: usize) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); count];
        for (w, v) in weights.iter().zip(&self.values) {
            if *w == 0.0 {
                continue;
            }
            assert!(!v.is_empty(), "weighted basis state was skipped");
            for (a, x) in acc.iter_mut().zip(v) {
                *a += x * *w;
            }
        }
        acc
    }
}

/// Expectation of `e^{iλO}` in `state` by matrix exponentials.
pub fn numeric_characteristic(state: &PreparedState, op: &OperatorMatrix, lambdas: &[f64]) -> Result<Vec<Complex64>> {
    check_generator(op)?;
    match state {
        PreparedState::Vector(v) | PreparedState::Projector(v) => {
            if v.coefficients().len() != op.dim() {
                return Err(Error::DimensionMismatch("state and operator dimensions differ".into()));
            }
            let out = vector_expectations(op, v.coefficients(), lambdas);
            Ok(lambdas.iter().zip(out).map(|(&l, x)| if l == 0.0 { Complex64::new(v.norm().powi(2), 0.0) } else { x }).collect())
        }
        PreparedState::Gibbs(g) => {
            if g.weights.len() != op.dim() {
                return Err(Error::DimensionMismatch("state and operator dimensions differ".into()));
            }
            let diag = DiagonalExponentials::compute(op, lambdas, |s| g.weights[s] > 0.0)?;
            let out = diag.trace_with(&g.weights, lambdas.len());
            Ok(lambdas.iter().zip(out).map(|(&l, x)| if l == 0.0 { Complex64::new(g.trace(), 0.0) } else { x }).collect())
        }
    }
}

/// Variance of the Gaussian characteristic function for vacuum and Gibbs states.
pub fn gaussian_variance(state: &PreparedState, obs: &Observable) -> Result<f64> {
    let (ma, mb) = match state {
        PreparedState::Vector(v) if v.is_vacuum() => (1.0, 1.0),
        PreparedState::Gibbs(g) => (variance_multiplier(g.spec.mu), variance_multiplier(g.spec.nu)),
        _ => return Err(Error::NonGaussianState),
    };
    let vb = obs.vacuum_variance_b.unwrap_or(0.0);
    Ok(obs.spec.alpha.powi(2) * ma * obs.vacuum_variance_a + obs.spec.beta.powi(2) * mb * vb)
}

/// Rough bound on the truncation error of the numeric method: the Gauss–Hermite
/// remainder `(λ²V/2)^{K}/K!` with `K` the number of free excitation levels.
pub fn truncation_bound(lambda: f64, variance: f64, free_levels: usize, tail: f64) -> f64 {
    let x = 0.5 * lambda * lambda * variance;
    let k = free_levels.max(1);
    let mut term = 1.0;
    for i in 1..=k {
        term *= x / i as f64;
    }
    term + 2.0 * tail
}

pub fn characteristic_function(state: &PreparedState, obs: &Observable, query: &CharacteristicQuery, space: &FockSpace) -> Result<Vec<Complex64>> {
    let query = CharacteristicQuery::new(query.lambdas.clone(), query.method)?;
    match query.method {
        CharacteristicMethod::AnalyticGaussian => {
            let v = gaussian_variance(state, obs)?;
            Ok(query.lambdas.iter().map(|l| Complex64::new((-0.5 * l * l * v).exp(), 0.0)).collect())
        }
        CharacteristicMethod::MatrixExponential => {
            let numeric = numeric_characteristic(state, &obs.operator, &query.lambdas)?;
            if let Ok(v) = gaussian_variance(state, obs) {
                let (free, tail) = match state {
                    PreparedState::Vector(s) | PreparedState::Projector(s) => (space.cutoff() + 1 - s.max_level(space), 0.0),
                    PreparedState::Gibbs(g) => (space.cutoff() + 1, g.tail_bound),
                };
                for (l, x) in query.lambdas.iter().zip(&numeric) {
                    let analytic = (-0.5 * l * l * v).exp();
                    let bound = truncation_bound(*l, v, free, tail);
                    let diff = (x - analytic).norm();
                    if diff > bound.max(1e-12) {
                        log::warn!("characteristic function at lambda = {l}: |numeric - analytic| = {diff:.3e} exceeds truncation bound {bound:.3e}");
                    }
                }
            }
            Ok(numeric)
        }
    }
}
