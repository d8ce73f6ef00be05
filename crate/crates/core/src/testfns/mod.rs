//! Complex bivector test functions and their Fourier transforms.
//!
//! Two families are provided: analytic Gaussian packets with closed-form
//! transforms, and compactly supported bumps sampled on a lattice. A
//! [`TestFunction`] is a finite sum of either kind; sums, scalar multiples,
//! conjugation and translation stay within the type.

mod grid;
mod packet;

pub use grid::{bump_profile, AxisSamples, BumpSpec, GridTestFunction};
pub use packet::PolarizedGaussianPacket;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kinematics::{Bivector, FourVector, SpacetimeRegion};
use crate::Result;

/// Number of probe points used by [`TestFunction::reality_defect`].
pub const PROBE_COUNT: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Packet(PolarizedGaussianPacket),
    Grid(GridTestFunction),
}

impl Term {
    fn value_at(&self, x: FourVector) -> Bivector {
        match self {
            Term::Packet(p) => p.value_at(x),
            Term::Grid(g) => g.value_at(x),
        }
    }

    fn region(&self) -> SpacetimeRegion {
        match self {
            Term::Packet(p) => p.effective_support(),
            Term::Grid(g) => g.support(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TestFunction {
    terms: Vec<Term>,
}

impl From<PolarizedGaussianPacket> for TestFunction {
    fn from(p: PolarizedGaussianPacket) -> Self {
        TestFunction { terms: vec![Term::Packet(p)] }
    }
}

impl From<GridTestFunction> for TestFunction {
    fn from(g: GridTestFunction) -> Self {
        TestFunction { terms: vec![Term::Grid(g)] }
    }
}

impl TestFunction {
    pub fn zero() -> Self {
        TestFunction::default()
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        TestFunction { terms }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &TestFunction) -> TestFunction {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TestFunction { terms }
    }

    pub fn scale(&self, s: Complex64) -> TestFunction {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Packet(p) => Term::Packet(p.scale(s)),
                Term::Grid(g) => Term::Grid(g.scale(s)),
            })
            .collect();
        TestFunction { terms }
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: Complex64, other: &TestFunction, beta: Complex64) -> TestFunction {
        self.scale(alpha).add(&other.scale(beta))
    }

    /// Pointwise complex conjugate; its transform is `conj(f̃(−k))`.
    pub fn conjugate(&self) -> TestFunction {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Packet(p) => Term::Packet(p.conjugate()),
                Term::Grid(g) => Term::Grid(g.conjugate()),
            })
            .collect();
        TestFunction { terms }
    }

    pub fn translate(&self, delta: FourVector) -> TestFunction {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Packet(p) => Term::Packet(p.translate(delta)),
                Term::Grid(g) => Term::Grid(g.translate(delta)),
            })
            .collect();
        TestFunction { terms }
    }

    pub fn value_at(&self, x: FourVector) -> Bivector {
        self.terms.iter().fold(Bivector::ZERO, |acc, t| acc + t.value_at(x))
    }

    /// `f̃_{μν}(k)`; packets in closed form, grid terms via the lattice transform.
    pub fn fourier_transform(&self, k: &FourVector) -> Result<Bivector> {
        let mut acc = Bivector::ZERO;
        for t in &self.terms {
            acc = acc
                + match t {
                    Term::Packet(p) => p.fourier_transform(k),
                    Term::Grid(g) => g.fourier_transform(k)?,
                };
        }
        Ok(acc)
    }

    /// Transform without the band check; callers must have validated the band.
    pub(crate) fn transform_unchecked(&self, k: &FourVector) -> Bivector {
        let mut acc = Bivector::ZERO;
        for t in &self.terms {
            acc = acc
                + match t {
                    Term::Packet(p) => p.fourier_transform(k),
                    Term::Grid(g) => g.transform_unchecked(k),
                };
        }
        acc
    }

    /// Largest declared bandwidth over terms (zero for the zero function).
    pub fn bandwidth(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Packet(p) => p.bandwidth(),
                Term::Grid(g) => g.bandwidth(),
            })
            .fold(0.0, f64::max)
    }

    /// Smallest lattice band over grid terms; infinite when there are none.
    pub fn usable_band(&self) -> f64 {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Grid(g) => Some(g.usable_band()),
                Term::Packet(_) => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Box covering every term's support (four widths for packets).
    pub fn probe_region(&self) -> Option<SpacetimeRegion> {
        let mut it = self.terms.iter().map(Term::region);
        let first = it.next()?;
        Some(it.fold(first, |acc, r| acc.union(&r)))
    }

    /// Deterministic probe points inside [`Self::probe_region`].
    pub fn probe_points(&self) -> Vec<FourVector> {
        match self.probe_region() {
            Some(region) => halton_points(&region, PROBE_COUNT),
            None => Vec::new(),
        }
    }

    /// `max_x ‖f(x) − f*(x)‖` over the probe set.
    pub fn reality_defect(&self) -> f64 {
        let conj = self.conjugate();
        self.probe_points()
            .into_iter()
            .map(|x| (self.value_at(x) - conj.value_at(x)).norm())
            .fold(0.0, f64::max)
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Halton points (bases 2, 3, 5, 7) mapped into a box.
pub fn halton_points(region: &SpacetimeRegion, count: usize) -> Vec<FourVector> {
    const BASES: [usize; 4] = [2, 3, 5, 7];
    let c = region.center();
    let h = region.half_widths();
    (1..=count)
        .map(|i| FourVector(std::array::from_fn(|d| c.0[d] + h[d] * (2.0 * radical_inverse(i, BASES[d]) - 1.0))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pol() -> Bivector {
        Bivector::new([c(1.0, 0.2), c(0.0, 0.0), c(-0.5, 0.0)], [c(0.0, 0.0), c(0.3, -0.1), c(0.0, 0.0)])
    }

    fn packet(carrier: FourVector, center: FourVector) -> TestFunction {
        PolarizedGaussianPacket::new(pol(), center, 1.1, 0.9, carrier, c(0.7, -0.3)).unwrap().into()
    }

    fn real_packet(center: FourVector) -> TestFunction {
        PolarizedGaussianPacket::new(
            Bivector::from_real([1.0, 0.0, 0.5], [0.0, 1.0, 0.0]),
            center,
            1.0,
            1.0,
            FourVector::ZERO,
            c(1.0, 0.0),
        )
        .unwrap()
        .into()
    }

    fn bump() -> GridTestFunction {
        GridTestFunction::bump(&BumpSpec::real(
            FourVector::new(0.2, 0.0, 0.1, -0.3),
            [0.5, 1.0, 1.0, 1.0],
            Bivector::from_real([1.0, 0.0, 0.0], [0.0, 0.0, 0.5]),
            12.0,
        ))
        .unwrap()
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn zero_amplitude_packet_has_zero_transform() {
        let f: TestFunction = PolarizedGaussianPacket::new(pol(), FourVector::ZERO, 1.0, 1.0, FourVector::ZERO, c(0.0, 0.0))
            .unwrap()
            .into();
        for k in [FourVector::new(1.0, 0.0, 0.0, 1.0), FourVector::new(-2.0, 0.3, 0.1, 0.0)] {
            assert_eq!(f.fourier_transform(&k).unwrap().norm(), 0.0);
        }
    }

    /// Direct 4D trapezoid integration of the pointwise values.
    fn transform_oracle(f: &TestFunction, k: &FourVector, center: FourVector, half: [f64; 4], n: usize) -> Complex64 {
        let h: [f64; 4] = std::array::from_fn(|i| 2.0 * half[i] / n as f64);
        let mut acc = c(0.0, 0.0);
        for i0 in 0..=n {
            let t = center.0[0] - half[0] + i0 as f64 * h[0];
            for i1 in 0..=n {
                let x = center.0[1] - half[1] + i1 as f64 * h[1];
                for i2 in 0..=n {
                    let y = center.0[2] - half[2] + i2 as f64 * h[2];
                    for i3 in 0..=n {
                        let z = center.0[3] - half[3] + i3 as f64 * h[3];
                        let p = FourVector::new(t, x, y, z);
                        let v = f.value_at(p).time_space[0];
                        let th = k.0[0] * t - k.0[1] * x - k.0[2] * y - k.0[3] * z;
                        acc += v * c(th.cos(), th.sin());
                    }
                }
            }
        }
        acc * h.iter().product::<f64>()
    }

    #[test]
    fn packet_transform_matches_direct_integration() {
        let carrier = FourVector::new(1.5, 0.0, 0.5, -1.0);
        let f = packet(carrier, FourVector::ZERO);
        let half = [7.0 * 0.9, 7.0 * 1.1, 7.0 * 1.1, 7.0 * 1.1];
        for k in [carrier, FourVector::new(1.0, 0.3, 0.5, -0.8), FourVector::new(2.0, -0.2, 0.9, -1.3)] {
            let exact = f.fourier_transform(&k).unwrap().time_space[0];
            let numeric = transform_oracle(&f, &k, FourVector::ZERO, half, 28);
            assert!(rel(numeric, exact) <= 1e-6, "k={k:?}: {numeric} vs {exact}");
        }
        // Gaussian peak at the carrier with widths 1/τ, 1/σ
        let peak = f.fourier_transform(&carrier).unwrap().norm();
        let off = f.fourier_transform(&(carrier + FourVector::new(1.0 / 0.9, 0.0, 0.0, 0.0))).unwrap().norm();
        assert!((off / peak - (-0.5f64).exp()).abs() < 1e-12);
        let off = f.fourier_transform(&(carrier + FourVector::new(0.0, 0.0, 1.0 / 1.1, 0.0))).unwrap().norm();
        assert!((off / peak - (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn shift_theorem() {
        let f = packet(FourVector::new(1.0, 0.2, 0.0, 0.4), FourVector::new(0.1, 0.2, 0.3, 0.4));
        let g: TestFunction = bump().into();
        let delta = FourVector::new(0.7, -1.2, 0.4, 2.0);
        for func in [f, g] {
            let moved = func.translate(delta);
            for k in [FourVector::new(1.0, 0.0, 0.5, 0.3), FourVector::new(-2.0, 1.0, -0.5, 0.0)] {
                let th = k.0[0] * delta.0[0] - k.0[1] * delta.0[1] - k.0[2] * delta.0[2] - k.0[3] * delta.0[3];
                let expected = func.fourier_transform(&k).unwrap().scale(c(th.cos(), th.sin()));
                let got = moved.fourier_transform(&k).unwrap();
                assert!((got - expected).norm() <= 1e-12 * expected.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn translate_zero_and_inverse() {
        let f = packet(FourVector::new(1.0, 0.0, 0.0, 1.0), FourVector::new(0.1, 0.2, 0.3, 0.4)).add(&bump().into());
        assert_eq!(f.translate(FourVector::ZERO), f);
        let d = FourVector::new(0.3, 0.1, -7.7, 1e-3);
        assert_eq!(f.translate(d).translate(-d), f);
    }

    #[test]
    fn grid_translation_by_one_site_shifts_samples() {
        let g = bump();
        for axis in 0..4 {
            let h = g.axes()[axis].spacing();
            let mut d = [0.0; 4];
            d[axis] = h;
            let moved = g.translate(FourVector(d));
            let shape = g.shape();
            // every original sample appears one site further along the axis
            for j in 0..shape[axis] - 1 {
                let mut site = [shape[0] / 2, shape[1] / 2, shape[2] / 2, shape[3] / 2];
                site[axis] = j;
                let original = g.sample(site);
                let mut next = site;
                next[axis] = j + 1;
                let pos = g.site_position(next);
                assert_eq!(moved.value_at(pos), original);
            }
        }
    }

    #[test]
    fn grid_vanishes_outside_support() {
        let g = bump();
        let shape = g.shape();
        for axis in 0..4 {
            let vals = g.axes()[axis].values();
            assert_eq!(vals[0], c(0.0, 0.0));
            assert_eq!(vals[shape[axis] - 1], c(0.0, 0.0));
        }
        let s = g.support();
        let outside = s.center() + FourVector::new(0.0, s.half_widths()[1] * 1.5, 0.0, 0.0);
        assert_eq!(g.value_at(outside), Bivector::ZERO);
        assert!(g.usable_band() >= g.bandwidth());
    }

    #[test]
    fn grid_bandwidth_error() {
        let g: TestFunction = bump().into();
        let limit = g.usable_band();
        let err = g.fourier_transform(&FourVector::new(0.0, 0.0, limit * 1.01, 0.0)).unwrap_err();
        assert!(matches!(err, Error::BandwidthExceeded { .. }));
        assert!(g.fourier_transform(&FourVector::new(0.0, 0.0, limit * 0.99, 0.0)).is_ok());
    }

    #[test]
    fn grid_transform_approximates_continuum() {
        // The lattice sum for a smooth bump approximates the continuum integral.
        let spec = BumpSpec::real(FourVector::ZERO, [1.0; 4], Bivector::from_real([1.0, 0.0, 0.0], [0.0; 3]), 40.0);
        let g = GridTestFunction::bump(&spec).unwrap();
        let n = 20_000;
        let mut one_d = 0.0;
        for j in 1..n {
            let u = -1.0 + 2.0 * j as f64 / n as f64;
            one_d += bump_profile(u, spec.sharpness) * (2.0 / n as f64);
        }
        let f0 = g.fourier_transform(&FourVector::ZERO).unwrap().time_space[0];
        assert!((f0.re - one_d.powi(4)).abs() < 1e-10 * one_d.powi(4));
    }

    #[test]
    fn conjugate_examples() {
        let r = real_packet(FourVector::new(0.0, 1.0, 0.0, 0.0));
        assert_eq!(r.conjugate(), r);
        let f = packet(FourVector::new(1.0, 0.5, 0.0, 0.0), FourVector::ZERO).add(&bump().into());
        assert_eq!(f.conjugate().conjugate(), f);
    }

    #[test]
    fn conjugate_of_positive_frequency_packet_lives_at_negative_frequency() {
        let f: TestFunction = PolarizedGaussianPacket::new(
            pol(),
            FourVector::ZERO,
            1.0,
            1.0,
            FourVector::new(6.0, 0.0, 0.0, 6.0),
            c(1.0, 0.0),
        )
        .unwrap()
        .into();
        let fc = f.conjugate();
        let peak = fc.fourier_transform(&FourVector::new(-6.0, 0.0, 0.0, -6.0)).unwrap().norm();
        let mut worst_pos: f64 = 0.0;
        let mut best_neg: f64 = 0.0;
        for i in 0..=24 {
            let k0 = -12.0 + i as f64;
            for kz in [-6.0, -3.0, 0.0, 3.0, 6.0] {
                let v = fc.fourier_transform(&FourVector::new(k0, 0.0, 0.0, kz)).unwrap().norm() / peak;
                if k0 > 0.0 {
                    worst_pos = worst_pos.max(v);
                } else {
                    best_neg = best_neg.max(v);
                }
            }
        }
        assert!(worst_pos < 1e-7, "positive-frequency content {worst_pos}");
        assert!(best_neg > 0.5);
    }

    #[test]
    fn reality_defect_examples() {
        let g = real_packet(FourVector::ZERO);
        assert_eq!(g.reality_defect(), 0.0);
        // f = i g → 2 max‖g‖ over the probe set
        let f = g.scale(c(0.0, 1.0));
        let max_g = g.probe_points().into_iter().map(|x| g.value_at(x).norm()).fold(0.0, f64::max);
        assert!((f.reality_defect() - 2.0 * max_g).abs() <= 1e-14 * max_g);
        assert_eq!(g.probe_points().len(), PROBE_COUNT);
    }

    #[test]
    fn reality_defect_is_linear_in_imaginary_part() {
        let g = real_packet(FourVector::ZERO);
        let h = real_packet(FourVector::new(0.0, 0.3, 0.0, 0.0));
        let probes = g.add(&h).probe_points();
        // probe-set oracle: ε · 2 max‖h‖ over the same points
        let oracle = |eps: f64| probes.iter().map(|x| 2.0 * eps * h.value_at(*x).norm()).fold(0.0, f64::max);
        for eps in [1e-6, 1e-3, 0.5] {
            let f = g.add(&h.scale(c(0.0, eps)));
            let d = f.reality_defect();
            assert!((d - oracle(eps)).abs() <= 1e-12 * oracle(eps), "eps={eps}");
        }
        let d1 = g.add(&h.scale(c(0.0, 1e-3))).reality_defect();
        let d2 = g.add(&h.scale(c(0.0, 2e-3))).reality_defect();
        assert!((d2 / d1 - 2.0).abs() < 1e-10);
    }

    fn arb_packet() -> impl Strategy<Value = TestFunction> {
        (prop::array::uniform12(-1.0f64..1.0), prop::array::uniform4(-1.0f64..1.0), 0.5f64..2.0, 0.5f64..2.0, prop::array::uniform4(-2.0f64..2.0), -1.0f64..1.0)
            .prop_map(|(p, ctr, s, t, k, a)| {
                let pol = Bivector::new(
                    [c(p[0], p[1]), c(p[2], p[3]), c(p[4], p[5])],
                    [c(p[6], p[7]), c(p[8], p[9]), c(p[10], p[11])],
                );
                PolarizedGaussianPacket::new(pol, FourVector(ctr), s, t, FourVector(k), c(1.0, a)).unwrap().into()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transform_is_linear(f in arb_packet(), g in arb_packet(), k in prop::array::uniform4(-3.0f64..3.0), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let k = FourVector(k);
            let (alpha, beta) = (c(a, 0.5), c(0.25, b));
            let lhs = f.combine(alpha, &g, beta).fourier_transform(&k).unwrap();
            let rhs = f.fourier_transform(&k).unwrap().scale(alpha) + g.fourier_transform(&k).unwrap().scale(beta);
            let scale = f.fourier_transform(&k).unwrap().norm() * alpha.norm() + g.fourier_transform(&k).unwrap().norm() * beta.norm();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn conjugation_reflects_transform(f in arb_packet(), k in prop::array::uniform4(-3.0f64..3.0)) {
            let k = FourVector(k);
            let f = f.add(&bump().into());
            let lhs = f.conjugate().fourier_transform(&k).unwrap();
            let rhs = f.fourier_transform(&(-k)).unwrap().conj();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1e-300));
        }

        #[test]
        fn symmetrized_function_is_real(f in arb_packet()) {
            let s = f.add(&f.conjugate());
            prop_assert!(s.reality_defect() <= 1e-12);
        }
    }

    #[test]
    fn packet_normalization_constant() {
        let f: TestFunction =
            PolarizedGaussianPacket::new(Bivector::from_real([1.0, 0.0, 0.0], [0.0; 3]), FourVector::ZERO, 2.0, 0.5, FourVector::ZERO, c(1.0, 0.0))
                .unwrap()
                .into();
        let v = f.fourier_transform(&FourVector::ZERO).unwrap().time_space[0];
        assert!((v.re - (2.0 * PI).powi(2) * 0.5 * 8.0).abs() < 1e-12);
    }
}
