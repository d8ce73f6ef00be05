//! Gauss–Legendre rules and the spherical product grid used on the light cone.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in ascending order. The rule is exactly symmetric about zero.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess, refined by Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// One radial shell of the light-cone grid.
#[derive(Debug, Clone, Copy)]
pub struct RadialNode {
    pub omega: f64,
    /// Includes the compactification Jacobian and the `ω/(2(2π)³)` measure factor.
    pub weight: f64,
}

/// One direction on the unit sphere.
#[derive(Debug, Clone, Copy)]
pub struct AngularNode {
    pub direction: [f64; 3],
    pub weight: f64,
}

/// Radial rule for `∫_0^cutoff g(ω) dω` after the map `ω = L s/(1 − s)` with `L = cutoff`,
/// multiplied by the reduced mass-shell factor `ω² / (2ω (2π)³)`.
pub fn radial_rule(n: usize, cutoff: f64) -> Vec<RadialNode> {
    let scale = cutoff;
    let s_max = cutoff / (cutoff + scale);
    let (x, w) = gauss_legendre(n);
    let shell = 1.0 / (2.0 * (2.0 * PI).powi(3));
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| {
            let s = 0.5 * s_max * (xi + 1.0);
            let ds = 0.5 * s_max * wi;
            let omega = scale * s / (1.0 - s);
            let jac = scale / ((1.0 - s) * (1.0 - s));
            RadialNode { omega, weight: ds * jac * omega * shell }
        })
        .collect()
}

/// Product rule on the sphere: Gauss–Legendre in `cos θ`, midpoint rule in `φ`.
///
/// With an even azimuthal count the node set is closed under `n ↦ −n`.
pub fn angular_rule(polar: usize, azimuthal: usize) -> Vec<AngularNode> {
    let (x, w) = gauss_legendre(polar);
    let dphi = 2.0 * PI / azimuthal as f64;
    let mut out = Vec::with_capacity(polar * azimuthal);
    for (&ct, &wt) in x.iter().zip(&w) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for j in 0..azimuthal {
            let phi = (j as f64 + 0.5) * dphi;
            out.push(AngularNode { direction: [st * phi.cos(), st * phi.sin(), ct], weight: wt * dphi });
        }
    }
    out
}
