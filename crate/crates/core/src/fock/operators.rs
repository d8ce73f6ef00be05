use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::ModeBasis;
use super::space::{FockSpace, Sector};
use crate::sparse::{CsrMatrix, Triplet};
use crate::testfns::TestFunction;
use crate::{Error, Result};

/// Largest reality defect accepted for an observable's test function.
pub const REALITY_DEFECT_BOUND: f64 = 1e-10;
/// Largest Hermiticity defect (relative to the largest entry) of an assembled observable.
pub const OBSERVABLE_HERMITICITY_BOUND: f64 = 1e-12;

/// Which ladder factors an operator contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Footprint {
    /// Multiples of the identity.
    Scalar,
    AOnly,
    BOnly,
    Mixed,
}

impl Footprint {
    fn union(self, other: Footprint) -> Footprint {
        use Footprint::*;
        match (self, other) {
            (Scalar, x) | (x, Scalar) => x,
            (AOnly, AOnly) => AOnly,
            (BOnly, BOnly) => BOnly,
            _ => Mixed,
        }
    }

    fn of(sector: Sector) -> Footprint {
        match sector {
            Sector::A => Footprint::AOnly,
            Sector::B => Footprint::BOnly,
        }
    }
}

/// Sparse operator on a truncated Fock space with truncation bookkeeping.
///
/// `safe_level` is the largest total excitation `ℓ` such that the matrix acts on
/// every basis state of level `≤ ℓ` exactly as the untruncated operator would.
/// `raise` bounds how far the operator can raise the excitation level and
/// `degree` is its polynomial degree in ladder factors.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: CsrMatrix,
    pub footprint: Footprint,
    pub safe_level: i64,
    pub raise: i64,
    pub degree: usize,
    cutoff: usize,
    levels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderKind {
    Annihilate,
    Create,
}

impl OperatorMatrix {
    fn assemble(space: &FockSpace, matrix: CsrMatrix, footprint: Footprint, safe: i64, raise: i64, degree: usize) -> Self {
        let levels = (0..space.dim()).map(|i| space.level(i)).collect();
        let mut op = OperatorMatrix { matrix, footprint, safe_level: safe, raise, degree, cutoff: space.cutoff(), levels };
        op.clamp_safe();
        op
    }

    fn clamp_safe(&mut self) {
        let n = self.cutoff as i64;
        self.safe_level = self.safe_level.min(n).min(n - self.degree as i64);
    }

    pub fn identity(space: &FockSpace) -> Self {
        Self::assemble(space, CsrMatrix::identity(space.dim()), Footprint::Scalar, space.cutoff() as i64, 0, 0)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn check_same_space(&self, other: &OperatorMatrix) -> Result<()> {
        if self.dim() != other.dim() || self.cutoff != other.cutoff {
            return Err(Error::DimensionMismatch(format!(
                "operators on spaces of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: Complex64, other: &OperatorMatrix, beta: Complex64) -> Result<Self> {
        self.check_same_space(other)?;
        let mut op = OperatorMatrix {
            matrix: self.matrix.axpby(alpha, &other.matrix, beta),
            footprint: self.footprint.union(other.footprint),
            safe_level: self.safe_level.min(other.safe_level),
            raise: self.raise.max(other.raise),
            degree: self.degree.max(other.degree),
            cutoff: self.cutoff,
            levels: self.levels.clone(),
        };
        op.clamp_safe();
        Ok(op)
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<Self> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        OperatorMatrix { matrix: self.matrix.scale(s), ..self.clone() }
    }

    /// Operator product `self · other`.
    pub fn product(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_same_space(other)?;
        let mut op = OperatorMatrix {
            matrix: self.matrix.matmul(&other.matrix),
            footprint: self.footprint.union(other.footprint),
            safe_level: other.safe_level.min(self.safe_level - other.raise),
            raise: self.raise + other.raise,
            degree: self.degree + other.degree,
            cutoff: self.cutoff,
            levels: self.levels.clone(),
        };
        op.clamp_safe();
        Ok(op)
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { matrix: self.matrix.adjoint(), raise: -self.raise_floor(), ..self.clone() }
    }

    /// Lowest level change the operator can produce (negative of the adjoint's raise).
    fn raise_floor(&self) -> i64 {
        let mut low = i64::MAX;
        for (r, c, _) in self.matrix.entries() {
            low = low.min(self.levels[r] as i64 - self.levels[c] as i64);
        }
        if low == i64::MAX {
            0
        } else {
            low
        }
    }

    /// Upper bound on the operator norm restricted to basis states of level `≤ safe_level`.
    pub fn restricted_norm(&self) -> f64 {
        let safe = self.safe_level;
        self.matrix.restricted_norm_bound(|c| (self.levels[c] as i64) <= safe)
    }

    /// Upper bound on the full operator norm.
    pub fn norm_bound(&self) -> f64 {
        self.matrix.restricted_norm_bound(|_| true)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        self.matrix.matvec(psi)
    }

    pub fn triplets(&self) -> Vec<Triplet> {
        self.matrix.triplets()
    }

    /// Sparse triplet CSV with header `row,col,re,im`.
    pub fn write_triplets_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for t in self.triplets() {
            writeln!(w, "{},{},{:e},{:e}", t.row, t.col, t.re, t.im)?;
        }
        Ok(())
    }
}

/// Annihilation operator with arbitrary mode coefficients `a = Σ_α c_α a_α`.
pub(crate) fn mode_annihilator(space: &FockSpace, sector: Sector, coefficients: &[Complex64]) -> Result<OperatorMatrix> {
    if coefficients.len() != space.sector_modes(sector) {
        return Err(Error::DimensionMismatch(format!(
            "{} mode coefficients for a sector with {} modes",
            coefficients.len(),
            space.sector_modes(sector)
        )));
    }
    let mut entries = Vec::new();
    for s in 0..space.dim() {
        let occ = space.state(s);
        for (alpha, c) in coefficients.iter().enumerate() {
            let m = space.mode_index(sector, alpha);
            let n = occ[m];
            if n == 0 || *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut target = occ.to_vec();
            target[m] -= 1;
            let t = space.index_of(&target).expect("lowered state lies in the space");
            entries.push((t, s, c * (n as f64).sqrt()));
        }
    }
    let matrix = CsrMatrix::from_entries(space.dim(), space.dim(), entries);
    let n = space.cutoff() as i64;
    Ok(OperatorMatrix::assemble(space, matrix, Footprint::of(sector), n - 1, -1, 1))
}

/// `a_f` or `a_f†` (or the `b` versions, according to the basis sector).
pub fn ladder_operator(basis: &ModeBasis, f: &TestFunction, kind: LadderKind, space: &FockSpace) -> Result<OperatorMatrix> {
    let c = basis.spanned_coefficients(f)?;
    let a = mode_annihilator(space, basis.sector(), &c.values)?;
    Ok(match kind {
        LadderKind::Annihilate => a,
        LadderKind::Create => creator_from(&a),
    })
}

fn creator_from(a: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix { matrix: a.matrix.adjoint(), raise: 1, ..a.clone() }
}

/// Total occupation of one sector.
pub fn number_operator(sector: Sector, space: &FockSpace) -> OperatorMatrix {
    let entries = (0..space.dim()).map(|s| (s, s, Complex64::new(space.sector_level(s, sector) as f64, 0.0)));
    let matrix = CsrMatrix::from_entries(space.dim(), space.dim(), entries);
    OperatorMatrix::assemble(space, matrix, Footprint::of(sector), space.cutoff() as i64, 0, 2)
}

/// `AB − BA`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    let ab = a.product(b)?;
    let ba = b.product(a)?;
    ab.sub(&ba)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    Phi,
    Chi,
    Xi,
}

/// `ξ_f = α(a_f + a†_{f*}) + β(b_f + b†_{f*})`; φ and χ fix `(α, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub test_function: TestFunction,
    pub alpha: f64,
    pub beta: f64,
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind, test_function: TestFunction, alpha: f64, beta: f64) -> Result<Self> {
        let defect = test_function.reality_defect();
        if defect > REALITY_DEFECT_BOUND {
            return Err(Error::RealityDefect { defect });
        }
        let fixed = match kind {
            ObservableKind::Phi => Some((1.0, 0.0)),
            ObservableKind::Chi => Some((1.0, 1.0)),
            ObservableKind::Xi => None,
        };
        if let Some(pair) = fixed {
            if (alpha, beta) != pair {
                return Err(Error::InvalidParameter(format!("{kind:?} requires (alpha, beta) = {pair:?}")));
            }
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
        }
        Ok(ObservableSpec { kind, test_function, alpha, beta })
    }

    pub fn phi(f: TestFunction) -> Result<Self> {
        Self::new(ObservableKind::Phi, f, 1.0, 0.0)
    }

    pub fn chi(f: TestFunction) -> Result<Self> {
        Self::new(ObservableKind::Chi, f, 1.0, 1.0)
    }

    pub fn xi(f: TestFunction, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(ObservableKind::Xi, f, alpha, beta)
    }
}

/// An assembled observable together with the pairings that fix its vacuum statistics.
#[derive(Debug, Clone)]
pub struct Observable {
    pub spec: ObservableSpec,
    pub operator: OperatorMatrix,
    /// `(f*, f)` on the positive sheet.
    pub vacuum_variance_a: f64,
    /// `(f*, f)₋`, present when a `b` basis was supplied.
    pub vacuum_variance_b: Option<f64>,
}

impl Observable {
    /// `α²(f*,f) + β²(f*,f)₋`.
    pub fn vacuum_variance(&self) -> f64 {
        let b = self.vacuum_variance_b.unwrap_or(0.0);
        self.spec.alpha.powi(2) * self.vacuum_variance_a + self.spec.beta.powi(2) * b
    }
}

fn field_part(basis: &ModeBasis, f: &TestFunction, space: &FockSpace) -> Result<(OperatorMatrix, f64)> {
    let fc = f.conjugate();
    let c = basis.spanned_coefficients(f)?;
    let a = mode_annihilator(space, basis.sector(), &c.values)?;
    let create = if fc == *f {
        creator_from(&a)
    } else {
        let cc = basis.spanned_coefficients(&fc)?;
        creator_from(&mode_annihilator(space, basis.sector(), &cc.values)?)
    };
    Ok((a.add(&create)?, c.norm_sq))
}

pub fn observable(spec: &ObservableSpec, basis_a: &ModeBasis, basis_b: Option<&ModeBasis>, space: &FockSpace) -> Result<Observable> {
    if basis_a.sector() != Sector::A || basis_b.is_some_and(|b| b.sector() != Sector::B) {
        return Err(Error::InvalidParameter("observable bases must be (a, b) sector bases".into()));
    }
    let f = &spec.test_function;
    let (phi_a, va) = field_part(basis_a, f, space)?;
    let mut operator = phi_a.scale(Complex64::new(spec.alpha, 0.0));
    let mut vb = None;
    if let Some(bb) = basis_b {
        let (phi_b, v) = field_part(bb, f, space)?;
        vb = Some(v);
        if spec.beta != 0.0 {
            operator = operator.combine(Complex64::new(1.0, 0.0), &phi_b, Complex64::new(spec.beta, 0.0))?;
        }
    } else if spec.beta != 0.0 {
        return Err(Error::InvalidParameter("observable with beta != 0 needs a b-sector basis".into()));
    }
    let scale = operator.matrix.max_abs();
    let defect = operator.hermiticity_defect();
    if defect > OBSERVABLE_HERMITICITY_BOUND * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitian { defect });
    }
    Ok(Observable { spec: spec.clone(), operator, vacuum_variance_a: va, vacuum_variance_b: vb })
}

/// Jacobi residual of one operator triple.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiEntry {
    pub labels: [String; 3],
    pub residual: f64,
    pub scale: f64,
    pub safe_level: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiReport {
    pub entries: Vec<JacobiEntry>,
    pub worst_relative: f64,
}

/// Safe-subspace norm of `[A,[B,C]] + [B,[C,A]] + [C,[A,B]]` for each triple of indices into `ops`.
pub fn jacobi_check(ops: &[(String, OperatorMatrix)], triples: &[[usize; 3]]) -> Result<JacobiReport> {
    let mut entries = Vec::with_capacity(triples.len());
    let mut worst: f64 = 0.0;
    for t in triples {
        let (a, b, c) = (&ops[t[0]].1, &ops[t[1]].1, &ops[t[2]].1);
        let j = commutator(a, &commutator(b, c)?)?
            .add(&commutator(b, &commutator(c, a)?)?)?
            .add(&commutator(c, &commutator(a, b)?)?)?;
        let residual = j.restricted_norm();
        let scale = a.norm_bound() * b.norm_bound() * c.norm_bound();
        if scale > 0.0 {
            worst = worst.max(residual / scale);
        }
        entries.push(JacobiEntry {
            labels: [ops[t[0]].0.clone(), ops[t[1]].0.clone(), ops[t[2]].0.clone()],
            residual,
            scale,
            safe_level: j.safe_level,
        });
    }
    Ok(JacobiReport { entries, worst_relative: worst })
}
