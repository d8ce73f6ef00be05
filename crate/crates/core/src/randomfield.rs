//! Classical Gaussian random field matching the vacuum or Gibbs statistics of `χ_f`.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fock::{
    numeric_characteristic, variance_multiplier, FockSpace, GibbsSpec, Observable, PreparedState, Sector, StateVector,
};
use crate::linalg::symmetric_eigen;
use crate::pairing::{cross_pairing, LightConeQuadrature, Sheet};
use crate::testfns::TestFunction;
use crate::{Error, Result};

/// Generator identification written into every report.
pub const GENERATOR_VERSION: &str = "rand_chacha 0.9 ChaCha20Rng, stream = draw index; rand_distr 0.5 StandardNormal";
/// Largest reality defect accepted for a bank member.
pub const BANK_REALITY_BOUND: f64 = 1e-10;
/// Largest imaginary residue (relative to the largest entry) discarded from the covariance.
pub const IMAGINARY_RESIDUE_BOUND: f64 = 1e-10;
/// PSD slack relative to the largest eigenvalue.
pub const COVARIANCE_PSD_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovarianceSource {
    Vacuum,
    Gibbs { mu: f64, nu: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceModel {
    pub bank: Vec<String>,
    #[serde(serialize_with = "serialize_real_matrix")]
    pub matrix: DMatrix<f64>,
    pub source: CovarianceSource,
    /// Largest discarded `|Im|` relative to the largest entry.
    pub imaginary_residue: f64,
}

fn serialize_real_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    rows.serialize(s)
}

impl CovarianceModel {
    /// Builds a model from an explicit symmetric matrix.
    pub fn from_matrix(bank: Vec<String>, matrix: DMatrix<f64>, source: CovarianceSource) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != bank.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} covariance for {} bank members",
                matrix.nrows(),
                matrix.ncols(),
                bank.len()
            )));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        if asym > 1e-12 * matrix.abs().max().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter(format!("covariance is not symmetric (defect {asym:.3e})")));
        }
        let model = CovarianceModel { bank, matrix, source, imaginary_residue: 0.0 };
        model.check_psd()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn check_psd(&self) -> Result<()> {
        let (ev, _) = symmetric_eigen(&self.matrix);
        let max = ev.iter().cloned().fold(0.0, f64::max);
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -COVARIANCE_PSD_SLACK * max {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min, slack: -COVARIANCE_PSD_SLACK * max });
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("covariance serializes")
    }
}

/// `C_ij = m_a Re(f_j*, f_i) + m_b Re(f_j*, f_i)₋`, with `m = 1` in the vacuum and
/// `m = coth(x/2)` for a Gibbs state.
pub fn covariance(bank: &[TestFunction], names: &[String], source: CovarianceSource, quad: &LightConeQuadrature) -> Result<CovarianceModel> {
    if bank.is_empty() || names.len() != bank.len() {
        return Err(Error::DimensionMismatch(format!("{} names for {} bank members", names.len(), bank.len())));
    }
    for (index, f) in bank.iter().enumerate() {
        let defect = f.reality_defect();
        if defect > BANK_REALITY_BOUND {
            return Err(Error::NonRealBank { index, defect });
        }
    }
    let (ma, mb) = match source {
        CovarianceSource::Vacuum => (1.0, 1.0),
        CovarianceSource::Gibbs { mu, nu } => {
            let g = GibbsSpec::new(mu, nu)?;
            (variance_multiplier(g.mu), variance_multiplier(g.nu))
        }
    };
    let conj: Vec<TestFunction> = bank.iter().map(TestFunction::conjugate).collect();
    let pos = cross_pairing(&conj, bank, &quad.with_sheet(Sheet::Positive))?.values;
    let neg = cross_pairing(&conj, bank, &quad.with_sheet(Sheet::Negative))?.values;
    let n = bank.len();
    // entry (i, j) = (f_j*, f_i): row index of the cross block is the conjugated function
    let total = DMatrix::from_fn(n, n, |i, j| pos[(j, i)] + neg[(j, i)]);
    let scale = total.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let residue = total.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / scale;
    if residue > IMAGINARY_RESIDUE_BOUND {
        return Err(Error::InvalidParameter(format!(
            "covariance has imaginary residue {residue:.3e} above {IMAGINARY_RESIDUE_BOUND:.0e}"
        )));
    }
    let raw = DMatrix::from_fn(n, n, |i, j| ma * pos[(j, i)].re + mb * neg[(j, i)].re);
    let matrix = (&raw + raw.transpose()) * 0.5;
    let model = CovarianceModel { bank: names.to_vec(), matrix, source, imaginary_residue: residue };
    model.check_psd()?;
    Ok(model)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub generator: String,
    /// Row-major `count × n`.
    #[serde(skip)]
    pub draws: Vec<f64>,
    pub dim: usize,
    pub empirical_mean: Vec<f64>,
    #[serde(serialize_with = "serialize_real_matrix")]
    pub empirical_covariance: DMatrix<f64>,
    #[serde(serialize_with = "serialize_real_matrix")]
    pub standard_errors: DMatrix<f64>,
}

impl SampleBatch {
    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    /// One draw per row.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "{}", names.join(","))?;
        for i in 0..self.count {
            let cells: Vec<String> = self.draw(i).iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Symmetric factor `L = U sqrt(max(Λ, 0))` with `L Lᵀ = C`.
pub fn psd_factor(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (ev, u) = symmetric_eigen(matrix);
    let max = ev.iter().cloned().fold(0.0, f64::max);
    let mut scaled = u.clone();
    for (j, &e) in ev.iter().enumerate() {
        if e < -COVARIANCE_PSD_SLACK * max {
            return Err(Error::Factorization(format!("eigenvalue {e:.3e} below slack {:.3e}", -COVARIANCE_PSD_SLACK * max)));
        }
        let s = e.max(0.0).sqrt();
        for i in 0..u.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    Ok(scaled)
}

/// Centered multivariate normal draws; draw `i` uses its own ChaCha20 stream,
/// so results do not depend on how draws are split across workers.
pub fn sample_batch(model: &CovarianceModel, count: usize, seed: u64) -> Result<SampleBatch> {
    if count < 3 {
        return Err(Error::InvalidParameter(format!("sample count must be at least 3, got {count}")));
    }
    let n = model.dim();
    let factor = psd_factor(&model.matrix)?;
    let draws: Vec<f64> = (0..count)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            (0..n).map(|r| (0..n).map(|c| factor[(r, c)] * z[c]).sum::<f64>()).collect::<Vec<_>>()
        })
        .collect();
    let (mean, cov, se) = statistics(&draws, count, n);
    Ok(SampleBatch {
        seed,
        count,
        generator: GENERATOR_VERSION.to_string(),
        draws,
        dim: n,
        empirical_mean: mean,
        empirical_covariance: cov,
        standard_errors: se,
    })
}

/// Mean, unbiased covariance and delete-one jackknife standard errors of the covariance entries.
fn statistics(draws: &[f64], count: usize, n: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let nf = count as f64;
    let mut mean = vec![0.0; n];
    for i in 0..count {
        for a in 0..n {
            mean[a] += draws[i * n + a];
        }
    }
    for m in &mut mean {
        *m /= nf;
    }
    let mut cov = DMatrix::zeros(n, n);
    let mut se = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let products: Vec<f64> = (0..count).map(|i| (draws[i * n + a] - mean[a]) * (draws[i * n + b] - mean[b])).collect();
            let sum: f64 = products.iter().sum();
            let pbar = sum / nf;
            let s = sum / (nf - 1.0);
            // S_(i) − S̄_(·) = −n/((n−1)(n−2)) (p_i − p̄)
            let k = nf / ((nf - 1.0) * (nf - 2.0));
            let ss: f64 = products.iter().map(|p| (p - pbar).powi(2)).sum();
            let var = (nf - 1.0) / nf * k * k * ss;
            cov[(a, b)] = s;
            cov[(b, a)] = s;
            se[(a, b)] = var.sqrt();
            se[(b, a)] = var.sqrt();
        }
    }
    (mean, cov, se)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionReport {
    pub lambdas: Vec<f64>,
    pub chi: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    /// `(f*, f)₋`.
    pub smoothing_variance: f64,
    pub max_difference: f64,
}

/// Compares `Φ_χ(λ)` with `Φ_φ(λ)·e^{−λ²(f*,f)₋/2}` for a state of the `a` sector
/// times the `b` vacuum. `chi` and `phi` must be built from the same real `f`.
pub fn convolution_check(state: &StateVector, chi: &Observable, phi: &Observable, space: &FockSpace, lambdas: &[f64]) -> Result<ConvolutionReport> {
    if chi.spec.test_function != phi.spec.test_function {
        return Err(Error::InvalidParameter("chi and phi must share a test function".into()));
    }
    let b_excited = (0..space.dim()).any(|s| space.sector_level(s, Sector::B) > 0 && state.coefficients()[s] != Complex64::new(0.0, 0.0));
    if b_excited {
        return Err(Error::SectorViolation);
    }
    let smoothing = chi
        .vacuum_variance_b
        .ok_or_else(|| Error::InvalidParameter("chi observable lacks a b-sector basis".into()))?;
    let st = PreparedState::Vector(state.clone());
    let chi_vals = numeric_characteristic(&st, &chi.operator, lambdas)?;
    let phi_vals = numeric_characteristic(&st, &phi.operator, lambdas)?;
    let max_difference = lambdas
        .iter()
        .zip(chi_vals.iter().zip(&phi_vals))
        .map(|(l, (c, p))| (c - p * (-0.5 * l * l * smoothing).exp()).norm())
        .fold(0.0, f64::max);
    Ok(ConvolutionReport { lambdas: lambdas.to_vec(), chi: chi_vals, phi: phi_vals, smoothing_variance: smoothing, max_difference })
}
