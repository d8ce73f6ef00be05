//! Numerical operator algebra for smeared free electromagnetic fields.
//!
//! The crate evaluates light-cone pairings between bivector test functions,
//! realizes positive- and negative-frequency creation/annihilation operators on
//! a truncated two-sector Fock space, and samples the classical Gaussian random
//! field whose statistics match the commuting two-sector observable.
//!
//! Conventions used throughout:
//! - metric signature `diag(+, −, −, −)`;
//! - Fourier transform `f̃(k) = ∫ f(x) e^{i(k⁰x⁰ − k·x)} d⁴x`, positive frequency means `k⁰ > 0`;
//! - `ħ` enters only at the pairing layer.

pub mod expm;
pub mod fock;
pub mod kinematics;
pub mod linalg;
pub mod pairing;
pub mod quadrature;
pub mod randomfield;
pub mod sparse;
pub mod testfns;
pub mod verification;

pub use kinematics::{
    causal_separation, contract_wave_bivector, minkowski_dot, Bivector, ComplexFourVector, FourVector,
    MetricConstants, Separation, SpacetimeRegion,
};
pub use pairing::{GramMatrix, LightConeQuadrature, PairingResult, Sheet};
pub use testfns::{GridTestFunction, PolarizedGaussianPacket, TestFunction};

/// Fourier sign convention recorded in reports.
pub const FOURIER_CONVENTION: &str = "f~(k) = int f(x) exp(+i(k0 x0 - k.x)) d4x; positive frequency k0 > 0";
/// Metric convention recorded in reports.
pub const METRIC_CONVENTION: &str = "diag(+1,-1,-1,-1)";

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid term queried at |k| = {requested:.4} beyond its usable band {limit:.4}")]
    BandwidthExceeded { requested: f64, limit: f64 },
    #[error("quadrature cutoff {cutoff:.4} does not cover input bandwidth {bandwidth:.4}")]
    CutoffTooSmall { cutoff: f64, bandwidth: f64 },
    #[error("quadrature did not converge after {rounds} refinement rounds (last relative change {last_change:.3e})")]
    NonConvergence { rounds: usize, last_change: f64 },
    #[error("Gram matrix Hermiticity defect {defect:.3e} exceeds {bound:.1e}")]
    HermiticityDefect { defect: f64, bound: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:.3e} below slack {slack:.3e}")]
    NotPositiveSemidefinite { eigenvalue: f64, slack: f64 },
    #[error("test-function bank is degenerate: every Gram eigenvalue is below the floor")]
    DegenerateBank,
    #[error("test function is not spanned by the mode basis (relative residual {residual:.3e})")]
    SpanResidual { residual: f64 },
    #[error("observable requires a real test function (reality defect {defect:.3e})")]
    RealityDefect { defect: f64 },
    #[error("test function is not normalized: (f,f) = {value:.12}")]
    Normalization { value: f64 },
    #[error("test function is not positive frequency: (f,f)_- / (f,f) = {ratio:.3e}")]
    FrequencySupport { ratio: f64 },
    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NonHermitian { defect: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bank member {index} is not real (reality defect {defect:.3e})")]
    NonRealBank { index: usize, defect: f64 },
    #[error("covariance factorization failed: {0}")]
    Factorization(String),
    #[error("analytic Gaussian characteristic function requires the vacuum or a Gibbs state")]
    NonGaussianState,
    #[error("state has excitations outside the expected sector")]
    SectorViolation,
}

pub type Result<T> = std::result::Result<T, Error>;
