use nalgebra::DMatrix;
use num_complex::Complex64;

use super::space::Sector;
use crate::linalg::hermitian_eigen;
use crate::pairing::{cross_pairing, gram_matrix, pair, GramMatrix, LightConeQuadrature};
use crate::testfns::TestFunction;
use crate::{Error, Result};

/// Relative eigenvalue floor for kept directions.
pub const EIGEN_FLOOR: f64 = 1e-10;
/// Largest accepted relative span residual for a test function.
pub const SPAN_RESIDUAL_BOUND: f64 = 1e-8;

/// Orthonormal modes spanning a test-function bank under one pairing.
///
/// With `G = U Λ Uᴴ`, bank function `f_i` has mode coefficients
/// `c(f_i) = Λ^{1/2} Uᴴ e_i`, so `c(f_i)ᴴ c(f_j) = G_ij`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    sector: Sector,
    bank: Vec<TestFunction>,
    gram: GramMatrix,
    /// Row `i` holds `c(f_i)`.
    coefficients: DMatrix<Complex64>,
    /// `U Λ^{-1/2}` restricted to kept directions.
    dual: DMatrix<Complex64>,
    kept_eigenvalues: Vec<f64>,
    eigen_floor: f64,
    quad: LightConeQuadrature,
}

/// Mode coefficients of one test function.
#[derive(Debug, Clone)]
pub struct ModeCoefficients {
    pub values: Vec<Complex64>,
    /// `(f, f)` on the basis sheet.
    pub norm_sq: f64,
    /// `((f,f) − ‖c‖²) / max((f,f), λ_max)`.
    pub residual: f64,
}

pub fn build_mode_basis(
    bank: &[TestFunction],
    names: &[String],
    sector: Sector,
    quad: &LightConeQuadrature,
) -> Result<ModeBasis> {
    let quad = quad.with_sheet(sector.sheet());
    let gram = gram_matrix(bank, names, &quad)?;
    ModeBasis::from_gram(bank.to_vec(), gram, sector, quad, EIGEN_FLOOR)
}

impl ModeBasis {
    pub fn from_gram(
        bank: Vec<TestFunction>,
        gram: GramMatrix,
        sector: Sector,
        quad: LightConeQuadrature,
        eigen_floor: f64,
    ) -> Result<Self> {
        let (ev, u) = hermitian_eigen(&gram.entries);
        let lmax = ev.iter().cloned().fold(0.0, f64::max);
        if lmax <= 0.0 {
            return Err(Error::DegenerateBank);
        }
        let kept: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] >= eigen_floor * lmax).collect();
        let n = bank.len();
        let m = kept.len();
        // largest eigenvalue first
        let order: Vec<usize> = kept.iter().rev().copied().collect();
        let coefficients = DMatrix::from_fn(n, m, |i, a| u[(i, order[a])].conj() * ev[order[a]].sqrt());
        let dual = DMatrix::from_fn(n, m, |i, a| u[(i, order[a])] / ev[order[a]].sqrt());
        Ok(ModeBasis {
            sector,
            bank,
            gram,
            coefficients,
            dual,
            kept_eigenvalues: order.iter().map(|&i| ev[i]).collect(),
            eigen_floor,
            quad,
        })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn modes(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn bank(&self) -> &[TestFunction] {
        &self.bank
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coefficients
    }

    pub fn kept_eigenvalues(&self) -> &[f64] {
        &self.kept_eigenvalues
    }

    pub fn eigen_floor(&self) -> f64 {
        self.eigen_floor
    }

    pub fn quadrature(&self) -> &LightConeQuadrature {
        &self.quad
    }

    /// `Σ_α conj(c_α(f_i)) c_α(f_j)`; equals the Gram matrix up to discarded directions.
    pub fn reconstructed_gram(&self) -> DMatrix<Complex64> {
        self.coefficients.conjugate() * self.coefficients.transpose()
    }

    fn lambda_max(&self) -> f64 {
        self.kept_eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// Coefficients of `f`; bank members reuse the stored rows, other functions
    /// are projected through fresh pairings against the bank.
    pub fn coefficients_for(&self, f: &TestFunction) -> Result<ModeCoefficients> {
        let lmax = self.lambda_max();
        let (values, norm_sq) = if let Some(i) = self.bank.iter().position(|b| b == f) {
            (self.coefficients.row(i).iter().copied().collect::<Vec<_>>(), self.gram.entries[(i, i)].re)
        } else if f.is_zero() {
            (vec![Complex64::new(0.0, 0.0); self.modes()], 0.0)
        } else {
            let cross = cross_pairing(&self.bank, std::slice::from_ref(f), &self.quad)?;
            let ff = pair(f, f, &self.quad)?.value.re;
            let values = (0..self.modes())
                .map(|a| (0..self.bank.len()).map(|i| self.dual[(i, a)].conj() * cross.values[(i, 0)]).sum())
                .collect();
            (values, ff)
        };
        let captured: f64 = values.iter().map(|c: &Complex64| c.norm_sqr()).sum();
        let residual = (norm_sq - captured) / norm_sq.max(lmax).max(f64::MIN_POSITIVE);
        Ok(ModeCoefficients { values, norm_sq, residual })
    }

    /// As [`Self::coefficients_for`], failing when the bank does not span `f`.
    pub fn spanned_coefficients(&self, f: &TestFunction) -> Result<ModeCoefficients> {
        let c = self.coefficients_for(f)?;
        if c.residual.abs() > SPAN_RESIDUAL_BOUND {
            return Err(Error::SpanResidual { residual: c.residual });
        }
        Ok(c)
    }
}
