//! Matrix exponentials: Padé-13 scaling and squaring for dense matrices and
//! Lanczos propagation for sparse Hermitian generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::symmetric_eigen;
use crate::sparse::CsrMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols()).map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^A` by Padé-13 scaling and squaring.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * Complex64::new(0.5f64.powi(s), 0.0);
    let b = PADE13.map(|x| Complex64::new(x, 0.0));
    let id = DMatrix::<Complex64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `⟨ψ|e^{iλH}|ψ⟩` for each λ via dense exponentials.
pub fn dense_expectations(h: &DMatrix<Complex64>, psi: &[Complex64], lambdas: &[f64]) -> Vec<Complex64> {
    let v = DVector::from_column_slice(psi);
    lambdas
        .iter()
        .map(|&l| {
            if l == 0.0 {
                return v.dotc(&v);
            }
            let e = expm(&(h * Complex64::new(0.0, l)));
            v.dotc(&(e * &v))
        })
        .collect()
}

/// Lanczos tridiagonalization of a Hermitian operator from a starting vector.
#[derive(Debug, Clone)]
pub struct Lanczos {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub start_norm_sq: f64,
}

impl Lanczos {
    /// Runs until the Krylov space is exhausted, `max_dim` is reached, or the
    /// expectations at every λ stop changing by more than `tol`.
    pub fn run(h: &CsrMatrix, psi: &[Complex64], lambdas: &[f64], max_dim: usize, tol: f64) -> Lanczos {
        let n = psi.len();
        let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut out = Lanczos { alphas: Vec::new(), betas: Vec::new(), start_norm_sq: norm_sq };
        if norm_sq == 0.0 {
            return out;
        }
        let inv = 1.0 / norm_sq.sqrt();
        let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z * inv).collect()];
        let limit = max_dim.min(n).max(1);
        let mut previous: Option<Vec<Complex64>> = None;
        loop {
            let k = basis.len() - 1;
            let mut w = h.matvec(&basis[k]);
            let alpha: f64 = basis[k].iter().zip(&w).map(|(q, x)| (q.conj() * x).re).sum();
            out.alphas.push(alpha);
            // full reorthogonalization, applied twice
            for _ in 0..2 {
                for q in &basis {
                    let c: Complex64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                    for (x, qi) in w.iter_mut().zip(q) {
                        *x -= c * qi;
                    }
                }
            }
            let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let m = out.alphas.len();
            if m.is_multiple_of(4) || beta <= 1e-13 * (alpha.abs() + 1.0) || m >= limit {
                let current = out.expectations(lambdas);
                let settled = previous
                    .as_ref()
                    .map(|p| p.iter().zip(&current).all(|(a, b)| (a - b).norm() <= tol * norm_sq))
                    .unwrap_or(false);
                if settled || beta <= 1e-13 * (alpha.abs() + 1.0) || m >= limit {
                    break;
                }
                previous = Some(current);
            }
            out.betas.push(beta);
            basis.push(w.into_iter().map(|z| z / beta).collect());
        }
        out
    }

    /// `‖ψ‖² e₁ᵀ e^{iλT} e₁` for each λ.
    pub fn expectations(&self, lambdas: &[f64]) -> Vec<Complex64> {
        let m = self.alphas.len();
        if m == 0 {
            return vec![Complex64::new(0.0, 0.0); lambdas.len()];
        }
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                self.alphas[i]
            } else if i + 1 == j {
                self.betas[i]
            } else if j + 1 == i {
                self.betas[j]
            } else {
                0.0
            }
        });
        let (theta, v) = symmetric_eigen(&t);
        lambdas
            .iter()
            .map(|&l| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, th) in theta.iter().enumerate() {
                    let w = v[(0, j)] * v[(0, j)];
                    acc += Complex64::new((l * th).cos(), (l * th).sin()) * w;
                }
                acc * self.start_norm_sq
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, max_abs};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| c(next(), next()));
        (&a + a.adjoint()) * c(1.5, 0.0)
    }

    /// Oracle: `U e^{iλD} Uᴴ` from the eigendecomposition.
    fn spectral_exp(h: &DMatrix<Complex64>, l: f64) -> DMatrix<Complex64> {
        let (ev, u) = hermitian_eigen(h);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(ev.len(), ev.iter().map(|&e| c((l * e).cos(), (l * e).sin()))));
        &u * d * u.adjoint()
    }

    #[test]
    fn pade_matches_spectral_oracle() {
        for (n, l) in [(1, 0.3), (6, 1.0), (20, 3.0), (40, 12.0)] {
            let h = hermitian(n, n as u64);
            let e = expm(&(&h * c(0.0, l)));
            let o = spectral_exp(&h, l);
            assert!(max_abs(&(e - o)) < 1e-11, "n={n}");
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DMatrix::<Complex64>::zeros(5, 5);
        assert_eq!(expm(&z), DMatrix::identity(5, 5));
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = hermitian(60, 7);
        let sparse = CsrMatrix::from_entries(60, 60, (0..60).flat_map(|i| (0..60).map(move |j| (i, j))).map(|(i, j)| (i, j, h[(i, j)])));
        let psi: Vec<Complex64> = (0..60).map(|i| c((i as f64 * 0.3).sin(), 0.1)).collect();
        let lambdas = [0.0, 0.5, 1.0, 2.0, 3.0];
        let dense = dense_expectations(&h, &psi, &lambdas);
        let krylov = Lanczos::run(&sparse, &psi, &lambdas, 60, 1e-14).expectations(&lambdas);
        for (a, b) in dense.iter().zip(&krylov) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}
