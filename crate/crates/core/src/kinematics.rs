//! Minkowski geometry in 3+1 dimensions.
//!
//! Signature is fixed to diag(+, −, −, −). Bivectors are stored as an
//! electric-like triple `F_{0i}` and a magnetic-like triple `(F_23, F_31, F_12)`,
//! so antisymmetry is structural.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Diagonal of the metric, lower and upper indices alike.
pub const METRIC_SIGNATURE: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

/// A real 4-vector `(t, x, y, z)` with contravariant components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    pub fn time(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    /// Null vector `(|k|, k)` on the positive sheet or `(-|k|, k)` on the negative one.
    pub fn on_shell(spatial: [f64; 3], positive: bool) -> Self {
        let w = norm3(spatial);
        FourVector([if positive { w } else { -w }, spatial[0], spatial[1], spatial[2]])
    }

    /// Euclidean length of the four components; used only for tolerance scales.
    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl std::ops::Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl std::ops::Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl std::ops::Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector(self.0.map(|c| -c))
    }
}

impl std::ops::Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        FourVector(self.0.map(|c| c * s))
    }
}

/// Complex 4-vector with contravariant components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexFourVector(pub [Complex64; 4]);

impl ComplexFourVector {
    pub fn conj(&self) -> Self {
        ComplexFourVector(self.0.map(|c| c.conj()))
    }

    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Metric signature and the scale of the pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConstants {
    hbar: f64,
}

impl MetricConstants {
    pub fn new(hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        Ok(MetricConstants { hbar })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn signature(&self) -> [f64; 4] {
        METRIC_SIGNATURE
    }
}

impl Default for MetricConstants {
    fn default() -> Self {
        MetricConstants { hbar: 1.0 }
    }
}

/// Complex antisymmetric rank-2 tensor `F_{μν}` (lower indices).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bivector {
    /// `F_{01}, F_{02}, F_{03}`.
    pub time_space: [Complex64; 3],
    /// `F_{23}, F_{31}, F_{12}`.
    pub space_space: [Complex64; 3],
}

impl Bivector {
    pub const ZERO: Bivector = Bivector {
        time_space: [Complex64 { re: 0.0, im: 0.0 }; 3],
        space_space: [Complex64 { re: 0.0, im: 0.0 }; 3],
    };

    pub fn new(time_space: [Complex64; 3], space_space: [Complex64; 3]) -> Self {
        Bivector { time_space, space_space }
    }

    pub fn from_real(time_space: [f64; 3], space_space: [f64; 3]) -> Self {
        Bivector {
            time_space: time_space.map(|c| Complex64::new(c, 0.0)),
            space_space: space_space.map(|c| Complex64::new(c, 0.0)),
        }
    }

    /// Component `F_{μν}` with lower indices.
    pub fn component(&self, mu: usize, nu: usize) -> Complex64 {
        match (mu, nu) {
            (a, b) if a == b => Complex64::new(0.0, 0.0),
            (0, j) => self.time_space[j - 1],
            (i, 0) => -self.time_space[i - 1],
            (i, j) => {
                // F_{ij} = ε_{ijk} B_k with B = (F_23, F_31, F_12)
                let k = 6 - i - j;
                let b = self.space_space[k - 1];
                if (i % 3) + 1 == j {
                    b
                } else {
                    -b
                }
            }
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Bivector {
            time_space: self.time_space.map(|c| c * s),
            space_space: self.space_space.map(|c| c * s),
        }
    }

    pub fn conj(&self) -> Self {
        Bivector {
            time_space: self.time_space.map(|c| c.conj()),
            space_space: self.space_space.map(|c| c.conj()),
        }
    }

    /// Euclidean norm over the six independent components.
    pub fn norm(&self) -> f64 {
        self.time_space
            .iter()
            .chain(self.space_space.iter())
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Add for Bivector {
    type Output = Bivector;
    fn add(self, rhs: Bivector) -> Bivector {
        Bivector {
            time_space: std::array::from_fn(|i| self.time_space[i] + rhs.time_space[i]),
            space_space: std::array::from_fn(|i| self.space_space[i] + rhs.space_space[i]),
        }
    }
}

impl std::ops::Sub for Bivector {
    type Output = Bivector;
    fn sub(self, rhs: Bivector) -> Bivector {
        self + rhs.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Axis-aligned box in spacetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeRegion {
    center: FourVector,
    half_widths: [f64; 4],
}

impl SpacetimeRegion {
    pub fn new(center: FourVector, half_widths: [f64; 4]) -> Result<Self> {
        if half_widths.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "region half-widths must be positive, got {half_widths:?}"
            )));
        }
        Ok(SpacetimeRegion { center, half_widths })
    }

    pub fn center(&self) -> FourVector {
        self.center
    }

    pub fn half_widths(&self) -> [f64; 4] {
        self.half_widths
    }

    pub fn translated(&self, delta: FourVector) -> Self {
        SpacetimeRegion { center: self.center + delta, half_widths: self.half_widths }
    }

    pub fn contains(&self, x: FourVector) -> bool {
        (0..4).all(|i| (x.0[i] - self.center.0[i]).abs() <= self.half_widths[i])
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &SpacetimeRegion) -> SpacetimeRegion {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for i in 0..4 {
            lo[i] = (self.center.0[i] - self.half_widths[i]).min(other.center.0[i] - other.half_widths[i]);
            hi[i] = (self.center.0[i] + self.half_widths[i]).max(other.center.0[i] + other.half_widths[i]);
        }
        SpacetimeRegion {
            center: FourVector(std::array::from_fn(|i| 0.5 * (lo[i] + hi[i]))),
            half_widths: std::array::from_fn(|i| 0.5 * (hi[i] - lo[i])),
        }
    }
}

/// Causal relation between two regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Separation {
    Spacelike,
    NonSpacelike,
}

pub fn minkowski_dot(u: &FourVector, v: &FourVector) -> f64 {
    u.0[0] * v.0[0] - u.0[1] * v.0[1] - u.0[2] * v.0[2] - u.0[3] * v.0[3]
}

/// Bilinear (not sesquilinear) Minkowski product of complex vectors.
pub fn minkowski_dot_complex(u: &ComplexFourVector, v: &ComplexFourVector) -> Complex64 {
    u.0[0] * v.0[0] - u.0[1] * v.0[1] - u.0[2] * v.0[2] - u.0[3] * v.0[3]
}

/// `v^ν = η^{νβ} k^λ F_{λβ}`.
///
/// For antisymmetric `F` the result is orthogonal to `k`; for null `k` it is
/// null or spacelike.
pub fn contract_wave_bivector(k: &FourVector, f: &Bivector) -> ComplexFourVector {
    let [k0, k1, k2, k3] = k.0;
    let [e1, e2, e3] = f.time_space;
    let [b1, b2, b3] = f.space_space;
    // lower-index w_β = k^λ F_{λβ}
    let w0 = -(e1 * k1 + e2 * k2 + e3 * k3);
    // w_j = k^0 E_j + (B × k)_j
    let w1 = e1 * k0 + (b2 * k3 - b3 * k2);
    let w2 = e2 * k0 + (b3 * k1 - b1 * k3);
    let w3 = e3 * k0 + (b1 * k2 - b2 * k1);
    ComplexFourVector([w0, -w1, -w2, -w3])
}

/// Classifies two boxes: spacelike iff every pair of points is spacelike separated.
///
/// The infimum of `|Δx|² − Δt²` over two boxes separates into the minimum
/// spatial gap (per-axis interval gaps) and the maximum time difference,
/// both attained at extremal corners.
pub fn causal_separation(a: &SpacetimeRegion, b: &SpacetimeRegion) -> Separation {
    let max_dt = (a.center.0[0] - b.center.0[0]).abs() + a.half_widths[0] + b.half_widths[0];
    let gap_sq: f64 = (1..4)
        .map(|i| {
            let gap = (a.center.0[i] - b.center.0[i]).abs() - a.half_widths[i] - b.half_widths[i];
            let gap = gap.max(0.0);
            gap * gap
        })
        .sum();
    if gap_sq > max_dt * max_dt {
        Separation::Spacelike
    } else {
        Separation::NonSpacelike
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Dense oracle: full 4×4 tensor with explicit loops over η.
    fn contract_oracle(k: &FourVector, f: &Bivector) -> [Complex64; 4] {
        let mut dense = [[c(0.0, 0.0); 4]; 4];
        let e = f.time_space;
        let b = f.space_space;
        for i in 0..3 {
            dense[0][i + 1] = e[i];
            dense[i + 1][0] = -e[i];
        }
        dense[2][3] = b[0];
        dense[3][2] = -b[0];
        dense[3][1] = b[1];
        dense[1][3] = -b[1];
        dense[1][2] = b[2];
        dense[2][1] = -b[2];
        let mut out = [c(0.0, 0.0); 4];
        for nu in 0..4 {
            for beta in 0..4 {
                let eta = if nu == beta { METRIC_SIGNATURE[nu] } else { 0.0 };
                for lambda in 0..4 {
                    out[nu] += eta * k.0[lambda] * dense[lambda][beta];
                }
            }
        }
        out
    }

    fn dot_oracle(u: &FourVector, v: &FourVector) -> f64 {
        let mut s = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                let eta = if mu == nu { METRIC_SIGNATURE[mu] } else { 0.0 };
                s += u.0[mu] * eta * v.0[nu];
            }
        }
        s
    }

    #[test]
    fn dot_examples() {
        let e0 = FourVector::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(&e0, &e0), 1.0);
        let n = FourVector::new(1.0, 1.0, 0.0, 0.0);
        assert_eq!(minkowski_dot(&n, &n), 0.0);
        let u = FourVector::new(2.0, 1.0, -1.0, 3.0);
        let v = FourVector::new(0.0, 4.0, 2.0, 1.0);
        assert_eq!(dot_oracle(&u, &v), -5.0);
        assert_eq!(minkowski_dot(&u, &v), -5.0);
    }

    #[test]
    fn signature_is_fixed() {
        for i in 0..4 {
            let mut e = [0.0; 4];
            e[i] = 1.0;
            let e = FourVector(e);
            assert_eq!(minkowski_dot(&e, &e), if i == 0 { 1.0 } else { -1.0 });
        }
        assert!(MetricConstants::new(0.0).is_err());
        assert_eq!(MetricConstants::default().hbar(), 1.0);
    }

    #[test]
    fn component_accessor_is_antisymmetric() {
        let f = Bivector::new(
            [c(1.0, 0.5), c(2.0, 0.0), c(-1.0, 1.0)],
            [c(0.3, 0.0), c(0.0, -2.0), c(4.0, 1.0)],
        );
        for mu in 0..4 {
            for nu in 0..4 {
                assert_eq!(f.component(mu, nu), -f.component(nu, mu));
            }
        }
        assert_eq!(f.component(2, 3), f.space_space[0]);
        assert_eq!(f.component(3, 1), f.space_space[1]);
        assert_eq!(f.component(1, 2), f.space_space[2]);
    }

    #[test]
    fn contraction_of_zero_bivector_vanishes() {
        let k = FourVector::new(1.3, -0.2, 0.7, 2.0);
        let v = contract_wave_bivector(&k, &Bivector::ZERO);
        assert!(v.0.iter().all(|c| *c == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn contraction_single_component_matches_dense_oracle() {
        let k = FourVector::new(1.0, 1.0, 0.0, 0.0);
        let f = Bivector::from_real([1.0, 0.0, 0.0], [0.0; 3]);
        let v = contract_wave_bivector(&k, &f);
        let expected = contract_oracle(&k, &f);
        // w_0 = k^1 F_10 = -1, w_1 = k^0 F_01 = 1; raising flips the spatial sign.
        assert_eq!(expected, [c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        for i in 0..4 {
            assert!((v.0[i] - expected[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn causal_examples() {
        let a = SpacetimeRegion::new(FourVector::new(0.0, 0.0, 0.0, 0.0), [0.5; 4]).unwrap();
        let b = SpacetimeRegion::new(FourVector::new(0.0, 3.0, 0.0, 0.0), [0.5; 4]).unwrap();
        assert_eq!(causal_separation(&a, &b), Separation::Spacelike);
        assert_eq!(causal_separation(&a, &a), Separation::NonSpacelike);
        let c_ = SpacetimeRegion::new(FourVector::new(3.0, 1.0, 0.0, 0.0), [0.5; 4]).unwrap();
        assert_eq!(causal_separation(&a, &c_), Separation::NonSpacelike);
        assert_eq!(exhaustive_oracle(&a, &c_), Separation::NonSpacelike);
        assert!(SpacetimeRegion::new(FourVector::ZERO, [1.0, 0.0, 1.0, 1.0]).is_err());
    }

    /// Checks every pair of points on a lattice covering both boxes, including corners.
    fn exhaustive_oracle(a: &SpacetimeRegion, b: &SpacetimeRegion) -> Separation {
        let pts = |r: &SpacetimeRegion| {
            let steps = 4;
            let mut out = Vec::new();
            for i0 in 0..=steps {
                for i1 in 0..=steps {
                    for i2 in 0..=steps {
                        for i3 in 0..=steps {
                            let idx = [i0, i1, i2, i3];
                            out.push(FourVector(std::array::from_fn(|d| {
                                r.center().0[d] - r.half_widths()[d]
                                    + 2.0 * r.half_widths()[d] * idx[d] as f64 / steps as f64
                            })));
                        }
                    }
                }
            }
            out
        };
        let pa = pts(a);
        let pb = pts(b);
        for x in &pa {
            for y in &pb {
                let d = *x - *y;
                if minkowski_dot(&d, &d) >= 0.0 {
                    return Separation::NonSpacelike;
                }
            }
        }
        Separation::Spacelike
    }

    #[test]
    fn causal_matches_exhaustive_oracle_on_scan() {
        let a = SpacetimeRegion::new(FourVector::ZERO, [0.5, 1.0, 1.0, 1.0]).unwrap();
        for step in 0..16 {
            let dz = 0.5 * step as f64;
            let dt = 0.25 * (step % 5) as f64;
            let b = a.translated(FourVector::new(dt, 0.0, 0.0, dz));
            assert_eq!(causal_separation(&a, &b), exhaustive_oracle(&a, &b), "dz={dz} dt={dt}");
        }
    }

    fn arb_vec() -> impl Strategy<Value = FourVector> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(FourVector)
    }

    fn arb_bivector() -> impl Strategy<Value = Bivector> {
        prop::array::uniform12(-5.0f64..5.0).prop_map(|a| {
            Bivector::new(
                [c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5])],
                [c(a[6], a[7]), c(a[8], a[9]), c(a[10], a[11])],
            )
        })
    }

    proptest! {
        #[test]
        fn dot_symmetric_bilinear(u in arb_vec(), v in arb_vec(), w in arb_vec(), s in -3.0f64..3.0) {
            prop_assert_eq!(minkowski_dot(&u, &v), minkowski_dot(&v, &u));
            let lhs = minkowski_dot(&(u * s + w), &v);
            let rhs = s * minkowski_dot(&u, &v) + minkowski_dot(&w, &v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()) * 100.0);
        }

        #[test]
        fn contraction_orthogonal_to_wave_vector(k in arb_vec(), f in arb_bivector()) {
            let v = contract_wave_bivector(&k, &f);
            let kc = ComplexFourVector(k.0.map(|x| Complex64::new(x, 0.0)));
            let scale = k.euclidean_norm().powi(2) * f.norm() + f64::MIN_POSITIVE;
            prop_assert!(minkowski_dot_complex(&kc, &v).norm() <= 1e-12 * scale);
            let oracle = contract_oracle(&k, &f);
            for i in 0..4 {
                prop_assert!((v.0[i] - oracle[i]).norm() <= 1e-12 * (1.0 + scale));
            }
        }

        #[test]
        fn null_contraction_is_spacelike(s in prop::array::uniform3(-10.0f64..10.0), pos in any::<bool>(), f in arb_bivector()) {
            let k = FourVector::on_shell(s, pos);
            let v = contract_wave_bivector(&k, &f);
            let scale = k.euclidean_norm().powi(2) * f.norm().powi(2) + f64::MIN_POSITIVE;
            prop_assert!(minkowski_dot_complex(&v.conj(), &v).re <= 1e-12 * scale);
        }

        #[test]
        fn causal_symmetric(c1 in arb_vec(), c2 in arb_vec(), h1 in prop::array::uniform4(0.1f64..2.0), h2 in prop::array::uniform4(0.1f64..2.0)) {
            let a = SpacetimeRegion::new(c1, h1).unwrap();
            let b = SpacetimeRegion::new(c2, h2).unwrap();
            prop_assert_eq!(causal_separation(&a, &b), causal_separation(&b, &a));
        }
    }
}
