//! Light-cone pairing against a Cartesian momentum-grid oracle.
//!
//! The oracle integrates `−ħ conj(v_g)·η·v_f / (2ω(2π)³)` on a midpoint grid
//! (which avoids `k = 0`) over a box wide enough for the Gaussian tails, at
//! spacings `h` and `h/2`, and Richardson-extrapolates the `h⁴` cusp error.

use num_complex::Complex64;
use smeared_core::kinematics::{contract_wave_bivector, Bivector, FourVector};
use smeared_core::pairing::{pair, LightConeQuadrature, Sheet};
use smeared_core::testfns::{PolarizedGaussianPacket, TestFunction};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn packet(center: [f64; 4], carrier: [f64; 4], width: f64, pol: Bivector, amp: Complex64) -> TestFunction {
    PolarizedGaussianPacket::new(pol, FourVector(center), width, width, FourVector(carrier), amp).unwrap().into()
}

fn grid_pairing(g: &TestFunction, f: &TestFunction, positive: bool, half_box: f64, n: usize) -> Complex64 {
    let h = 2.0 * half_box / n as f64;
    let mut sum = c(0.0, 0.0);
    for i in 0..n {
        let kx = -half_box + (i as f64 + 0.5) * h;
        for j in 0..n {
            let ky = -half_box + (j as f64 + 0.5) * h;
            for l in 0..n {
                let kz = -half_box + (l as f64 + 0.5) * h;
                let k = FourVector::on_shell([kx, ky, kz], positive);
                let omega = (kx * kx + ky * ky + kz * kz).sqrt();
                let vg = contract_wave_bivector(&k, &g.fourier_transform(&k).unwrap()).0;
                let vf = contract_wave_bivector(&k, &f.fourier_transform(&k).unwrap()).0;
                let dot = vg[0].conj() * vf[0] - vg[1].conj() * vf[1] - vg[2].conj() * vf[2] - vg[3].conj() * vf[3];
                sum += dot / (2.0 * omega);
            }
        }
    }
    -sum * h.powi(3) / (2.0 * std::f64::consts::PI).powi(3)
}

fn oracle(g: &TestFunction, f: &TestFunction, positive: bool) -> Complex64 {
    let coarse = grid_pairing(g, f, positive, 9.0, 90);
    let fine = grid_pairing(g, f, positive, 9.0, 180);
    (fine * 16.0 - coarse) / 15.0
}

#[test]
fn spherical_rule_matches_cartesian_oracle() {
    let f = packet(
        [0.0, 0.0, 0.0, 0.0],
        [0.4, 0.3, 0.0, -0.2],
        1.0,
        Bivector::new([c(1.0, 0.0), c(0.0, 0.5), c(0.2, 0.0)], [c(0.0, 0.0), c(0.3, -0.1), c(0.0, 0.0)]),
        c(1.0, 0.0),
    );
    let g = packet(
        [0.3, -0.2, 0.1, 0.4],
        [-0.2, 0.0, 0.5, 0.1],
        1.1,
        Bivector::from_real([0.2, -0.6, 0.1], [0.5, 0.0, -0.3]),
        c(0.7, -0.2),
    );
    let q = LightConeQuadrature::covering(&[f.clone(), g.clone()], Sheet::Positive).unwrap();
    for sheet in [Sheet::Positive, Sheet::Negative] {
        let qs = q.with_sheet(sheet);
        for (x, y) in [(&g, &f), (&f, &f), (&g, &g)] {
            let lib = pair(x, y, &qs).unwrap().value;
            let ora = oracle(x, y, sheet.is_positive());
            let scale = pair(x, x, &qs).unwrap().value.re.sqrt() * pair(y, y, &qs).unwrap().value.re.sqrt();
            let rel = (lib - ora).norm() / scale;
            assert!(rel <= 1e-6, "{sheet:?}: library {lib} oracle {ora} relative {rel:e}");
        }
    }
}
