use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::kinematics::{Bivector, FourVector, SpacetimeRegion};
use crate::{Error, Result};

/// Number of inverse widths beyond the carrier at which the transform is
/// treated as negligible (`e^{-32}` relative).
const BANDWIDTH_WIDTHS: f64 = 8.0;

/// Gaussian envelope in time and space with a plane-wave carrier and a constant polarization.
///
/// `f(x) = A · P · exp(−Δt²/2τ² − |Δx|²/2σ²) · exp(−i(ω₀Δt − k₀·Δx))` with `Δ = x − center`,
/// so the transform peaks at `k = (ω₀, k₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizedGaussianPacket {
    pub polarization: Bivector,
    center: FourVector,
    /// Accumulated translation, kept apart from `center` so that a translation
    /// followed by its inverse restores the parameters exactly.
    #[serde(default)]
    shift: FourVector,
    spatial_width: f64,
    temporal_width: f64,
    pub carrier: FourVector,
    pub amplitude: Complex64,
}

impl PolarizedGaussianPacket {
    pub fn new(
        polarization: Bivector,
        center: FourVector,
        spatial_width: f64,
        temporal_width: f64,
        carrier: FourVector,
        amplitude: Complex64,
    ) -> Result<Self> {
        for (name, w) in [("spatial", spatial_width), ("temporal", temporal_width)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} width must be positive, got {w}")));
            }
        }
        if !center.is_finite() || !carrier.is_finite() {
            return Err(Error::InvalidParameter("packet center and carrier must be finite".into()));
        }
        Ok(PolarizedGaussianPacket {
            polarization,
            center,
            shift: FourVector::ZERO,
            spatial_width,
            temporal_width,
            carrier,
            amplitude,
        })
    }

    pub fn center(&self) -> FourVector {
        self.center + self.shift
    }

    pub fn spatial_width(&self) -> f64 {
        self.spatial_width
    }

    pub fn temporal_width(&self) -> f64 {
        self.temporal_width
    }

    pub fn value_at(&self, x: FourVector) -> Bivector {
        let d = x - self.center();
        let (s, tau) = (self.spatial_width, self.temporal_width);
        let r2 = d.0[1] * d.0[1] + d.0[2] * d.0[2] + d.0[3] * d.0[3];
        let envelope = (-0.5 * d.0[0] * d.0[0] / (tau * tau) - 0.5 * r2 / (s * s)).exp();
        let k = self.carrier.0;
        let theta = -(k[0] * d.0[0] - k[1] * d.0[1] - k[2] * d.0[2] - k[3] * d.0[3]);
        let phase = Complex64::new(theta.cos(), theta.sin());
        self.polarization.scale(self.amplitude * phase * envelope)
    }

    pub fn fourier_transform(&self, k: &FourVector) -> Bivector {
        let (s, tau) = (self.spatial_width, self.temporal_width);
        let q = *k - self.carrier;
        let q2 = q.0[1] * q.0[1] + q.0[2] * q.0[2] + q.0[3] * q.0[3];
        let gauss = (-0.5 * tau * tau * q.0[0] * q.0[0] - 0.5 * s * s * q2).exp();
        let norm = (2.0 * PI).powi(2) * tau * s * s * s;
        let c = self.center();
        let theta = k.0[0] * c.0[0] - k.0[1] * c.0[1] - k.0[2] * c.0[2] - k.0[3] * c.0[3];
        let phase = Complex64::new(theta.cos(), theta.sin());
        self.polarization.scale(self.amplitude * phase * (norm * gauss))
    }

    pub fn conjugate(&self) -> Self {
        PolarizedGaussianPacket {
            polarization: self.polarization.conj(),
            carrier: -self.carrier,
            amplitude: self.amplitude.conj(),
            ..self.clone()
        }
    }

    pub fn translate(&self, delta: FourVector) -> Self {
        PolarizedGaussianPacket { shift: self.shift + delta, ..self.clone() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        PolarizedGaussianPacket { amplitude: self.amplitude * s, ..self.clone() }
    }

    /// Euclidean radius in k-space outside which the transform is below `e^{-32}` of its peak.
    pub fn bandwidth(&self) -> f64 {
        let inv = (1.0 / self.spatial_width).max(1.0 / self.temporal_width);
        self.carrier.euclidean_norm() + BANDWIDTH_WIDTHS * inv
    }

    /// Box of four widths around the center; used for probe placement.
    pub fn effective_support(&self) -> SpacetimeRegion {
        let (s, tau) = (self.spatial_width, self.temporal_width);
        SpacetimeRegion::new(self.center(), [4.0 * tau, 4.0 * s, 4.0 * s, 4.0 * s])
            .expect("widths validated at construction")
    }
}
