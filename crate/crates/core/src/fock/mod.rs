//! Truncated two-sector Fock representation.
//!
//! The `a` sector carries positive-frequency quanta with `[a_f, a_g†] = (g, f)`;
//! the `b` sector carries negative-frequency quanta with `[b_f, b_g†] = (g, f)₋`.
//! Modes are obtained by orthonormalizing a test-function bank under the
//! respective pairing, and every operator is a sparse matrix on the span of
//! occupation states with total excitation at most `N`.

mod basis;
mod operators;
mod space;
mod states;

pub use basis::{build_mode_basis, ModeBasis, ModeCoefficients, EIGEN_FLOOR, SPAN_RESIDUAL_BOUND};
pub use operators::{
    commutator, jacobi_check, ladder_operator, number_operator, observable, Footprint, JacobiEntry, JacobiReport,
    LadderKind, Observable, ObservableKind, ObservableSpec, OperatorMatrix, OBSERVABLE_HERMITICITY_BOUND,
    REALITY_DEFECT_BOUND,
};
pub use space::{binomial, FockSpace, Sector, MAX_DIMENSION};
pub use states::{
    characteristic_function, gaussian_variance, gibbs_cutoff, gibbs_weight, numeric_characteristic, state_prepare,
    truncation_bound, two_sector_quantum, variance_multiplier, CharacteristicMethod, CharacteristicQuery,
    DiagonalExponentials, GibbsSpec, GibbsState, PreparedState, StateKind, StateVector, DENSE_LIMIT, TAIL_RULE,
    TAIL_WARNING,
};
