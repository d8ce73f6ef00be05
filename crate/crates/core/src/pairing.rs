//! Light-cone pairings `(g, f)` and `(g, f)₋`.
//!
//! `(g, f) = −ħ ∫ conj(v_g)·η·v_f  d³k / ((2π)³ 2|k|)` with `k⁰ = +|k|` (positive
//! sheet) or `k⁰ = −|k|` (negative sheet), where `v = contract_wave_bivector(k, f̃(k))`.
//! The integrand is evaluated on a spherical product grid that is refined until
//! successive estimates agree.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinematics::{contract_wave_bivector, FourVector, MetricConstants};
use crate::linalg::hermitian_eigen;
use crate::quadrature::{angular_rule, radial_rule};
use crate::testfns::TestFunction;
use crate::{Error, Result};

/// Frequency sheet of the mass shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sheet {
    Positive,
    Negative,
}

impl Sheet {
    pub fn is_positive(self) -> bool {
        matches!(self, Sheet::Positive)
    }
}

/// Default relative refinement tolerance.
pub const DEFAULT_REFINEMENT_TOLERANCE: f64 = 1e-8;
/// Bound on the relative Hermiticity defect of an assembled Gram matrix.
pub const HERMITICITY_DEFECT_BOUND: f64 = 1e-8;
/// PSD slack relative to the largest eigenvalue.
pub const PSD_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightConeQuadrature {
    pub radial_nodes: usize,
    pub polar_nodes: usize,
    pub azimuthal_nodes: usize,
    pub radial_cutoff: f64,
    pub refinement_tolerance: f64,
    pub max_rounds: usize,
    pub sheet: Sheet,
    pub metric: MetricConstants,
    /// Absolute convergence floor (in units of ħ) for entries that vanish.
    pub absolute_floor: f64,
}

impl LightConeQuadrature {
    pub fn new(radial_cutoff: f64, sheet: Sheet) -> Result<Self> {
        let q = LightConeQuadrature {
            radial_nodes: 32,
            polar_nodes: 16,
            azimuthal_nodes: 32,
            radial_cutoff,
            refinement_tolerance: DEFAULT_REFINEMENT_TOLERANCE,
            max_rounds: 6,
            sheet,
            metric: MetricConstants::default(),
            absolute_floor: 1e-16,
        };
        q.validate()?;
        Ok(q)
    }

    /// Cutoff set to the largest bandwidth in `bank`.
    pub fn covering(bank: &[TestFunction], sheet: Sheet) -> Result<Self> {
        let bw = bank.iter().map(TestFunction::bandwidth).fold(0.0, f64::max);
        if bw <= 0.0 {
            return Err(Error::InvalidParameter("cannot size a quadrature for an all-zero bank".into()));
        }
        Self::new(bw, sheet)
    }

    pub fn with_sheet(&self, sheet: Sheet) -> Self {
        LightConeQuadrature { sheet, ..self.clone() }
    }

    pub fn with_nodes(&self, radial: usize, polar: usize, azimuthal: usize) -> Result<Self> {
        let q = LightConeQuadrature {
            radial_nodes: radial,
            polar_nodes: polar,
            azimuthal_nodes: azimuthal,
            ..self.clone()
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_tolerance(&self, tol: f64) -> Result<Self> {
        let q = LightConeQuadrature { refinement_tolerance: tol, ..self.clone() };
        q.validate()?;
        Ok(q)
    }

    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Ok(LightConeQuadrature { metric: MetricConstants::new(hbar)?, ..self.clone() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 4 || self.polar_nodes < 4 || self.azimuthal_nodes < 4 {
            return Err(Error::InvalidParameter("quadrature node counts must be at least 4".into()));
        }
        if !(self.radial_cutoff > 0.0 && self.radial_cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!("radial cutoff must be positive, got {}", self.radial_cutoff)));
        }
        if !(self.refinement_tolerance > 0.0 && self.refinement_tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "refinement tolerance must lie in (0, 1), got {}",
                self.refinement_tolerance
            )));
        }
        Ok(())
    }

    fn check_bank(&self, funcs: &[&TestFunction]) -> Result<()> {
        for f in funcs {
            let bw = f.bandwidth();
            if bw > self.radial_cutoff * (1.0 + 1e-12) {
                return Err(Error::CutoffTooSmall { cutoff: self.radial_cutoff, bandwidth: bw });
            }
            let usable = f.usable_band();
            if self.radial_cutoff > usable {
                return Err(Error::BandwidthExceeded { requested: self.radial_cutoff, limit: usable });
            }
        }
        Ok(())
    }

    /// Node counts for refinement round `r` (round 0 is the configured grid).
    fn counts(&self, round: usize) -> (usize, usize, usize) {
        let grow = |n: usize| {
            let mut m = n as f64;
            for _ in 0..round {
                m *= 1.5;
            }
            let m = m.ceil() as usize;
            m + (m % 2)
        };
        (grow(self.radial_nodes), grow(self.polar_nodes), grow(self.azimuthal_nodes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

/// Raw cross block `G_ij = (left_i, right_j)` with per-entry error estimates.
#[derive(Debug, Clone)]
pub struct CrossPairing {
    pub values: DMatrix<Complex64>,
    pub errors: DMatrix<f64>,
    pub nodes_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GramMatrix {
    #[serde(serialize_with = "serialize_complex_matrix")]
    pub entries: DMatrix<Complex64>,
    #[serde(skip)]
    pub errors: DMatrix<f64>,
    pub sheet: Sheet,
    pub bank: Vec<String>,
    /// Relative Hermiticity defect before averaging.
    pub hermiticity_defect: f64,
    pub nodes_used: usize,
}

fn serialize_complex_matrix<S: serde::Serializer>(m: &DMatrix<Complex64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
    rows.serialize(s)
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Eigenvalues of the (Hermitian) entries, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    /// Errors unless every eigenvalue is at least `−PSD_SLACK · λ_max`.
    pub fn check_psd(&self) -> Result<()> {
        let ev = self.eigenvalues();
        let max = ev.iter().cloned().fold(0.0, f64::max);
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_SLACK * max {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: min, slack: -PSD_SLACK * max });
        }
        Ok(())
    }

    /// Row-major CSV; each cell written as the pair `re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.dim() {
            let cells: Vec<String> = (0..self.dim())
                .map(|j| format!("{:e},{:e}", self.entries[(i, j)].re, self.entries[(i, j)].im))
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("Gram matrix serializes")
    }
}

/// Distinct functions among `left ∪ right` and index maps into them.
struct Dedup<'a> {
    unique: Vec<&'a TestFunction>,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn dedup<'a>(left: &'a [TestFunction], right: &'a [TestFunction]) -> Dedup<'a> {
    let mut unique: Vec<&TestFunction> = Vec::new();
    let mut index_of = |f: &'a TestFunction| {
        if let Some(i) = unique.iter().position(|u| *u == f) {
            i
        } else {
            unique.push(f);
            unique.len() - 1
        }
    };
    let l = left.iter().map(&mut index_of).collect();
    let r = right.iter().map(&mut index_of).collect();
    Dedup { unique, left: l, right: r }
}

/// One quadrature pass over the distinct functions; returns the pairing block
/// and the weighted squared Euclidean norms `N_u = ħ Σ w |v_u|²`.
///
/// Per radial shell the samples form `X` (four rows per direction, one column
/// per function, scaled by `√w`) and the shell contributes `X^H η X`.
fn evaluate_block(
    d: &Dedup<'_>,
    quad: &LightConeQuadrature,
    counts: (usize, usize, usize),
) -> (DMatrix<Complex64>, Vec<f64>, usize) {
    let (nr, np, na) = counts;
    let radial = radial_rule(nr, quad.radial_cutoff);
    let angular = angular_rule(np, na);
    let positive = quad.sheet.is_positive();
    let nu = d.unique.len();
    let rows = 4 * angular.len();

    // each shell is reduced on its own; shells combine in index order
    let shells: Vec<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> = radial
        .par_iter()
        .map(|rn| {
            // columns 0..nu hold real parts, nu..2nu imaginary parts
            let mut x = DMatrix::<f64>::zeros(rows, 2 * nu);
            let mut norms = vec![0.0; nu];
            for (a, an) in angular.iter().enumerate() {
                let kv = [rn.omega * an.direction[0], rn.omega * an.direction[1], rn.omega * an.direction[2]];
                let k = FourVector::new(if positive { rn.omega } else { -rn.omega }, kv[0], kv[1], kv[2]);
                let w = rn.weight * an.weight;
                let sw = w.sqrt();
                for (u, f) in d.unique.iter().enumerate() {
                    let v = contract_wave_bivector(&k, &f.transform_unchecked(&k));
                    for mu in 0..4 {
                        x[(4 * a + mu, u)] = sw * v.0[mu].re;
                        x[(4 * a + mu, nu + u)] = sw * v.0[mu].im;
                    }
                    norms[u] += w * v.euclidean_norm().powi(2);
                }
            }
            let mut y = x.clone();
            for a in 0..angular.len() {
                for mu in 1..4 {
                    y.row_mut(4 * a + mu).neg_mut();
                }
            }
            let p = x.transpose() * y;
            let re = p.view((0, 0), (nu, nu)) + p.view((nu, nu), (nu, nu));
            let im = p.view((0, nu), (nu, nu)) - p.view((nu, 0), (nu, nu));
            (re, im, norms)
        })
        .collect();

    let hbar = quad.metric.hbar();
    let mut re = DMatrix::<f64>::zeros(nu, nu);
    let mut im = DMatrix::<f64>::zeros(nu, nu);
    let mut norms = vec![0.0; nu];
    for (r, i, nm) in &shells {
        re += r;
        im += i;
        for u in 0..nu {
            norms[u] += nm[u];
        }
    }
    let values = DMatrix::from_fn(d.left.len(), d.right.len(), |i, j| {
        let (l, r) = (d.left[i], d.right[j]);
        Complex64::new(re[(l, r)], im[(l, r)]) * (-hbar)
    });
    for n in norms.iter_mut() {
        *n *= hbar;
    }
    (values, norms, nr * np * na)
}

/// `G_ij = (left_i, right_j)` on the quadrature's sheet, refined to tolerance.
pub fn cross_pairing(left: &[TestFunction], right: &[TestFunction], quad: &LightConeQuadrature) -> Result<CrossPairing> {
    quad.validate()?;
    let all: Vec<&TestFunction> = left.iter().chain(right.iter()).collect();
    quad.check_bank(&all)?;
    let d = dedup(left, right);
    let (nl, nr) = (left.len(), right.len());
    if nl == 0 || nr == 0 {
        return Ok(CrossPairing { values: DMatrix::zeros(nl, nr), errors: DMatrix::zeros(nl, nr), nodes_used: 0 });
    }

    let mut prev = evaluate_block(&d, quad, quad.counts(0));
    let mut last_change = f64::INFINITY;
    for round in 1..=quad.max_rounds {
        let next = evaluate_block(&d, quad, quad.counts(round));
        // entry scale: Euclidean norms bound the pairing by Cauchy–Schwarz
        let hbar = quad.metric.hbar();
        let mut worst: f64 = 0.0;
        let mut errors = DMatrix::zeros(nl, nr);
        for i in 0..nl {
            for j in 0..nr {
                let delta = (next.0[(i, j)] - prev.0[(i, j)]).norm();
                // Cauchy–Schwarz bounds both the entry and the sum of |terms|
                let bound = (next.1[d.left[i]] * next.1[d.right[j]]).sqrt();
                let scale = bound.max(quad.absolute_floor * hbar);
                worst = worst.max(delta / scale);
                let rounding = 64.0 * f64::EPSILON * bound;
                errors[(i, j)] = delta.max(rounding);
            }
        }
        last_change = worst;
        if worst <= quad.refinement_tolerance {
            return Ok(CrossPairing { values: next.0, errors, nodes_used: next.2 });
        }
        prev = next;
    }
    Err(Error::NonConvergence { rounds: quad.max_rounds, last_change })
}

/// `(g, f)` on the quadrature's sheet.
pub fn pair(g: &TestFunction, f: &TestFunction, quad: &LightConeQuadrature) -> Result<PairingResult> {
    if g.is_zero() || f.is_zero() {
        return Ok(PairingResult { value: Complex64::new(0.0, 0.0), error_estimate: 0.0, nodes_used: 0 });
    }
    let block = cross_pairing(std::slice::from_ref(g), std::slice::from_ref(f), quad)?;
    Ok(PairingResult { value: block.values[(0, 0)], error_estimate: block.errors[(0, 0)], nodes_used: block.nodes_used })
}

/// `(g, f)₋` computed as `(f*, g*)` on the positive sheet; an independent check
/// of the direct negative-sheet value.
pub fn pair_negative_via_conjugates(g: &TestFunction, f: &TestFunction, quad: &LightConeQuadrature) -> Result<PairingResult> {
    pair(&f.conjugate(), &g.conjugate(), &quad.with_sheet(Sheet::Positive))
}

/// `C(f, g) = (g*, f) − (f*, g)`, the value of `[φ_f, φ_g]`.
pub fn commutator_functional(f: &TestFunction, g: &TestFunction, quad: &LightConeQuadrature) -> Result<PairingResult> {
    let q = quad.with_sheet(Sheet::Positive);
    let left = [g.conjugate(), f.conjugate()];
    let right = [f.clone(), g.clone()];
    let block = cross_pairing(&left, &right, &q)?;
    Ok(PairingResult {
        value: block.values[(0, 0)] - block.values[(1, 1)],
        error_estimate: block.errors[(0, 0)] + block.errors[(1, 1)],
        nodes_used: block.nodes_used,
    })
}

/// Gram matrix `G_ij = (f_i, f_j)` over a named bank.
pub fn gram_matrix(bank: &[TestFunction], names: &[String], quad: &LightConeQuadrature) -> Result<GramMatrix> {
    if bank.is_empty() {
        return Err(Error::InvalidParameter("Gram matrix needs a nonempty bank".into()));
    }
    if names.len() != bank.len() {
        return Err(Error::DimensionMismatch(format!("{} names for {} bank members", names.len(), bank.len())));
    }
    let block = cross_pairing(bank, bank, quad)?;
    let g = block.values;
    let adj = g.adjoint();
    let defect_abs = (&g - &adj).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let defect = if scale > 0.0 { defect_abs / scale } else { 0.0 };
    if defect > HERMITICITY_DEFECT_BOUND {
        return Err(Error::HermiticityDefect { defect, bound: HERMITICITY_DEFECT_BOUND });
    }
    let entries = (&g + &adj).map(|c| c * 0.5);
    let errors = (&block.errors + block.errors.transpose()).map(|e| 0.5 * e);
    Ok(GramMatrix {
        entries,
        errors,
        sheet: quad.sheet,
        bank: names.to_vec(),
        hermiticity_defect: defect,
        nodes_used: block.nodes_used,
    })
}

/// Default names `f0, f1, …`.
pub fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Bivector;
    use crate::testfns::PolarizedGaussianPacket;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn packet(center: [f64; 4], carrier: [f64; 4], s: f64, t: f64, amp: Complex64) -> TestFunction {
        PolarizedGaussianPacket::new(
            Bivector::new([c(1.0, 0.0), c(0.0, 0.5), c(0.0, 0.0)], [c(0.0, 0.0), c(0.4, 0.0), c(0.0, -0.2)]),
            FourVector(center),
            s,
            t,
            FourVector(carrier),
            amp,
        )
        .unwrap()
        .into()
    }

    fn quad(bank: &[TestFunction]) -> LightConeQuadrature {
        LightConeQuadrature::covering(bank, Sheet::Positive).unwrap()
    }

    #[test]
    fn zero_function_pairs_to_zero() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let q = quad(std::slice::from_ref(&f));
        assert_eq!(pair(&TestFunction::zero(), &f, &q).unwrap().value, c(0.0, 0.0));
        assert_eq!(pair(&f, &TestFunction::zero(), &q).unwrap().value, c(0.0, 0.0));
    }

    #[test]
    fn self_pairing_real_nonnegative_both_sheets() {
        let f = packet([0.0, 0.3, 0.0, 0.0], [1.0, 0.5, 0.0, 0.8], 1.0, 0.8, c(0.5, 0.5));
        for sheet in [Sheet::Positive, Sheet::Negative] {
            let q = quad(std::slice::from_ref(&f)).with_sheet(sheet);
            let r = pair(&f, &f, &q).unwrap();
            assert!(r.value.re > 0.0);
            assert!(r.value.im.abs() <= 1e-14 * r.value.re);
        }
    }

    #[test]
    fn hbar_scales_exactly() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let g = packet([0.5, 0.0, 0.2, 0.0], [0.5, 0.5, 0.0, 0.0], 1.2, 1.0, c(0.0, 1.0));
        let q = quad(&[f.clone(), g.clone()]);
        let one = pair(&g, &f, &q).unwrap().value;
        let two = pair(&g, &f, &q.with_hbar(2.0).unwrap()).unwrap().value;
        assert_eq!(two, one * 2.0);
    }

    #[test]
    fn cutoff_too_small_is_reported() {
        let f = packet([0.0; 4], [3.0, 0.0, 0.0, 3.0], 1.0, 1.0, c(1.0, 0.0));
        let q = LightConeQuadrature::new(2.0, Sheet::Positive).unwrap();
        assert!(matches!(pair(&f, &f, &q), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn non_convergence_is_reported() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let mut q = quad(std::slice::from_ref(&f)).with_tolerance(1e-15).unwrap();
        q.max_rounds = 1;
        q = q.with_nodes(4, 4, 4).unwrap();
        assert!(matches!(pair(&f, &f, &q), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn hermitian_and_sesquilinear() {
        let f1 = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let f2 = packet([0.3, 0.0, 0.5, 0.0], [0.5, 0.3, 0.0, 0.0], 1.3, 0.9, c(0.2, 1.0));
        let g = packet([-0.2, 0.1, 0.0, 0.4], [0.7, 0.0, 0.6, 0.2], 0.9, 1.1, c(1.0, -0.5));
        let bank = [f1.clone(), f2.clone(), g.clone()];
        for sheet in [Sheet::Positive, Sheet::Negative] {
            let q = quad(&bank).with_sheet(sheet);
            let gf = pair(&g, &f1, &q).unwrap();
            let fg = pair(&f1, &g, &q).unwrap();
            assert!((gf.value - fg.value.conj()).norm() <= gf.error_estimate + fg.error_estimate);
            let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
            let lhs = pair(&g, &f1.combine(a, &f2, b), &q).unwrap().value;
            let rhs = a * pair(&g, &f1, &q).unwrap().value + b * pair(&g, &f2, &q).unwrap().value;
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn halving_tolerance_stays_within_previous_estimate() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let g = packet([0.5, 0.0, 0.2, 0.0], [0.5, 0.5, 0.0, 0.0], 1.2, 1.0, c(0.0, 1.0));
        let q = quad(&[f.clone(), g.clone()]).with_tolerance(1e-6).unwrap();
        let coarse = pair(&g, &f, &q).unwrap();
        for _ in 0..2 {
            let fine = pair(&g, &f, &q.with_tolerance(q.refinement_tolerance / 2.0).unwrap()).unwrap();
            assert!((fine.value - coarse.value).norm() <= coarse.error_estimate);
        }
    }

    #[test]
    fn duplicated_bank_is_rank_one() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let bank = [f.clone(), f.clone()];
        let g = gram_matrix(&bank, &default_names(2), &quad(&bank)).unwrap();
        let ff = g.entries[(0, 0)].re;
        let ev = g.eigenvalues();
        assert!(ev[0].abs() <= 1e-12 * ff);
        assert!((ev[1] - 2.0 * ff).abs() <= 1e-12 * ff);
    }

    #[test]
    fn gram_csv_layout() {
        let f = packet([0.0; 4], [1.0, 0.0, 0.0, 1.0], 1.0, 1.0, c(1.0, 0.0));
        let g2 = packet([0.0; 4], [1.0, 1.0, 0.0, 0.0], 1.0, 1.0, c(1.0, 0.0));
        let bank = [f, g2];
        let g = gram_matrix(&bank, &default_names(2), &quad(&bank)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let cells: Vec<f64> = lines[0].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[2], g.entries[(0, 1)].re);
        assert_eq!(cells[3], g.entries[(0, 1)].im);
        let json = g.to_json();
        assert_eq!(json["sheet"], "positive");
        assert_eq!(json["entries"][1][0][1], g.entries[(1, 0)].im);
    }
}
