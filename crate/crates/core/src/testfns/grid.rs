use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kinematics::{Bivector, FourVector, SpacetimeRegion};
use crate::{Error, Result};

/// Samples along one lattice axis, centered on `center` with odd count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSamples {
    center: f64,
    spacing: f64,
    values: Vec<Complex64>,
}

impl AxisSamples {
    pub fn new(center: f64, spacing: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || values.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "axis samples need a positive spacing and an odd sample count".into(),
            ));
        }
        Ok(AxisSamples { center, spacing, values })
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn half_count(&self) -> usize {
        self.values.len() / 2
    }

    pub fn site(&self, j: usize, shift: f64) -> f64 {
        self.center + shift + (j as f64 - self.half_count() as f64) * self.spacing
    }

    fn half_extent(&self) -> f64 {
        self.half_count() as f64 * self.spacing
    }

    fn nearest(&self, x: f64, shift: f64) -> Option<usize> {
        let u = (x - self.center - shift) / self.spacing + self.half_count() as f64;
        let j = u.round();
        if j < 0.0 || j >= self.values.len() as f64 {
            None
        } else {
            Some(j as usize)
        }
    }

    /// `h Σ_j s_j e^{i·sign·q·x_j}`: the band-limited transform of the samples.
    fn transform(&self, q: f64, sign: f64, shift: f64) -> Complex64 {
        let c = self.center + shift;
        let base = sign * q * c;
        let step = sign * q * self.spacing;
        // sum outward from the middle site to keep phase recursion short
        let mid = self.half_count();
        let rot = Complex64::new(step.cos(), step.sin());
        let mut up = Complex64::new(1.0, 0.0);
        let mut down = Complex64::new(1.0, 0.0);
        let rot_inv = rot.conj();
        let mut acc = self.values[mid];
        for d in 1..=mid {
            up *= rot;
            down *= rot_inv;
            acc += self.values[mid + d] * up + self.values[mid - d] * down;
        }
        acc * Complex64::new(base.cos(), base.sin()) * self.spacing
    }
}

/// Parameters of a procedural compact bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: FourVector,
    /// Half-widths of the support box `(t, x, y, z)`.
    pub radii: [f64; 4],
    pub carrier: FourVector,
    pub polarization: Bivector,
    pub amplitude: Complex64,
    /// Declared k-space bandwidth; the quadrature cutoff must reach it.
    pub bandwidth: f64,
    /// Sampling satisfies `π / spacing ≥ nyquist_margin · bandwidth`.
    pub nyquist_margin: f64,
    /// `a` in the profile `exp(−a u²/(1 − u²))`.
    pub sharpness: f64,
}

impl BumpSpec {
    pub fn real(center: FourVector, radii: [f64; 4], polarization: Bivector, bandwidth: f64) -> Self {
        BumpSpec {
            center,
            radii,
            carrier: FourVector::ZERO,
            polarization,
            amplitude: Complex64::new(1.0, 0.0),
            bandwidth,
            nyquist_margin: 2.0,
            sharpness: 6.0,
        }
    }
}

/// Smooth profile supported on `|u| < 1`; exactly zero at and beyond the edge.
pub fn bump_profile(u: f64, sharpness: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-sharpness * u * u / (1.0 - u * u)).exp()
    }
}

/// Compactly supported test function sampled on a uniform 4D lattice.
///
/// Samples factor as `A · P · s_t(t) s_x(x) s_y(y) s_z(z)`, so the lattice
/// transform is a product of four 1D band-limited transforms. The lattice spans
/// exactly the support box; there are no samples outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTestFunction {
    pub polarization: Bivector,
    pub amplitude: Complex64,
    axes: [AxisSamples; 4],
    support: SpacetimeRegion,
    #[serde(default)]
    shift: FourVector,
    bandwidth: f64,
    nyquist_margin: f64,
}

impl GridTestFunction {
    pub fn bump(spec: &BumpSpec) -> Result<Self> {
        if !(spec.bandwidth > 0.0 && spec.bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!("bump bandwidth must be positive, got {}", spec.bandwidth)));
        }
        if !(spec.nyquist_margin >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Nyquist margin must be at least 1, got {}",
                spec.nyquist_margin
            )));
        }
        if !(spec.sharpness > 0.0) {
            return Err(Error::InvalidParameter("bump sharpness must be positive".into()));
        }
        let support = SpacetimeRegion::new(spec.center, spec.radii)?;
        let max_spacing = PI / (spec.nyquist_margin * spec.bandwidth);
        let axes: Vec<AxisSamples> = (0..4)
            .map(|axis| {
                let r = spec.radii[axis];
                let m = (r / max_spacing).ceil().max(2.0) as usize;
                let h = r / m as f64;
                // e^{-i ω₀ Δt} in time, e^{+i k₀ Δx} in space
                let sign = if axis == 0 { -1.0 } else { 1.0 };
                let kc = spec.carrier.0[axis];
                let values = (0..=2 * m)
                    .map(|j| {
                        let offset = (j as f64 - m as f64) * h;
                        let u = (j as f64 - m as f64) / m as f64;
                        let theta = sign * kc * offset;
                        Complex64::new(theta.cos(), theta.sin()) * bump_profile(u, spec.sharpness)
                    })
                    .collect();
                AxisSamples::new(spec.center.0[axis], h, values)
            })
            .collect::<Result<_>>()?;
        let axes: [AxisSamples; 4] = axes.try_into().expect("four axes");
        Ok(GridTestFunction {
            polarization: spec.polarization,
            amplitude: spec.amplitude,
            axes,
            support,
            shift: FourVector::ZERO,
            bandwidth: spec.bandwidth,
            nyquist_margin: spec.nyquist_margin,
        })
    }

    /// Builds a grid term from explicit axis samples whose lattice must fill `support` exactly.
    pub fn from_axes(
        polarization: Bivector,
        amplitude: Complex64,
        axes: [AxisSamples; 4],
        bandwidth: f64,
        nyquist_margin: f64,
    ) -> Result<Self> {
        let center = FourVector(std::array::from_fn(|i| axes[i].center));
        let half = std::array::from_fn(|i| axes[i].half_extent());
        let support = SpacetimeRegion::new(center, half)?;
        for (i, ax) in axes.iter().enumerate() {
            if PI / ax.spacing < nyquist_margin * bandwidth * (1.0 - 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "axis {i} spacing {} violates the Nyquist margin for bandwidth {bandwidth}",
                    ax.spacing
                )));
            }
        }
        Ok(GridTestFunction {
            polarization,
            amplitude,
            axes,
            support,
            shift: FourVector::ZERO,
            bandwidth,
            nyquist_margin,
        })
    }

    pub fn support(&self) -> SpacetimeRegion {
        self.support.translated(self.shift)
    }

    pub fn axes(&self) -> &[AxisSamples; 4] {
        &self.axes
    }

    pub fn shape(&self) -> [usize; 4] {
        std::array::from_fn(|i| self.axes[i].values.len())
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Largest wave-number component the lattice transform may be queried at.
    pub fn usable_band(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| PI / (self.nyquist_margin * a.spacing))
            .fold(f64::INFINITY, f64::min)
    }

    /// Spacetime position of a lattice site.
    pub fn site_position(&self, site: [usize; 4]) -> FourVector {
        FourVector(std::array::from_fn(|i| self.axes[i].site(site[i], self.shift.0[i])))
    }

    pub fn sample(&self, site: [usize; 4]) -> Bivector {
        let mut s = self.amplitude;
        for (i, ax) in self.axes.iter().enumerate() {
            s *= ax.values[site[i]];
        }
        self.polarization.scale(s)
    }

    /// Value at the nearest lattice site; zero off the lattice.
    pub fn value_at(&self, x: FourVector) -> Bivector {
        let mut site = [0usize; 4];
        for i in 0..4 {
            match self.axes[i].nearest(x.0[i], self.shift.0[i]) {
                Some(j) => site[i] = j,
                None => return Bivector::ZERO,
            }
        }
        self.sample(site)
    }

    pub fn fourier_transform(&self, k: &FourVector) -> Result<Bivector> {
        let limit = self.usable_band();
        let requested = k.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if requested > limit {
            return Err(Error::BandwidthExceeded { requested, limit });
        }
        Ok(self.transform_unchecked(k))
    }

    pub(crate) fn transform_unchecked(&self, k: &FourVector) -> Bivector {
        let mut s = self.amplitude;
        for (i, ax) in self.axes.iter().enumerate() {
            let sign = if i == 0 { 1.0 } else { -1.0 };
            s *= ax.transform(k.0[i], sign, self.shift.0[i]);
        }
        self.polarization.scale(s)
    }

    pub fn conjugate(&self) -> Self {
        let axes = self.axes.clone().map(|a| AxisSamples {
            values: a.values.iter().map(|v| v.conj()).collect(),
            ..a
        });
        GridTestFunction {
            polarization: self.polarization.conj(),
            amplitude: self.amplitude.conj(),
            axes,
            ..self.clone()
        }
    }

    pub fn translate(&self, delta: FourVector) -> Self {
        GridTestFunction { shift: self.shift + delta, ..self.clone() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        GridTestFunction { amplitude: self.amplitude * s, ..self.clone() }
    }
}
