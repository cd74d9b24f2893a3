//! Dense synthetic sectorial operators `A = V diag(lambda) V^{-1}` on `C^n`.
//!
//! The eigenvector matrix is built as `V = Q1 D Q2^T` with random orthogonal
//! factors and a geometric diagonal, so the 2-norm condition number of `V`
//! equals the requested target and `V^{-1} = Q2 D^{-1} Q1^T` is available in
//! closed form.  The stored factorization is the construction certificate:
//! nothing is ever recovered by a numerical eigensolver.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Sector description: the resolvent sector opens `pi - theta0` around the
/// negative real axis and carries the constant `kappa`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Sector {
    pub theta0: f64,
    pub kappa: f64,
}

/// Law for the synthetic spectrum.
#[derive(Debug, Clone)]
pub enum SpectrumLaw {
    /// Explicit eigenvalue list (validated: `Re >= 0`).
    Explicit(Vec<Complex64>),
    /// Log-uniform moduli in `[lo, hi]`, arguments uniform in
    /// `[-max_arg, max_arg]`.  With `zero_mode`, the first eigenvalue is 0.
    SectorRandom { modulus: (f64, f64), max_arg: f64, zero_mode: bool },
}

/// Dense operator with certified spectrum and stored eigenfactorization.
#[derive(Debug, Clone)]
pub struct GeneralSectorialOperator {
    pub n: usize,
    pub eigenvalues: Vec<Complex64>,
    pub conditioning: f64,
    pub zero_mode: bool,
    v: DMatrix<Complex64>,
    v_inv: DMatrix<Complex64>,
    matrix: DMatrix<Complex64>,
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the sign convention so Q is a deterministic function of G.
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Build a synthetic sectorial operator.
pub fn build_synthetic(
    n: usize,
    law: &SpectrumLaw,
    conditioning: f64,
    seed: u64,
) -> Result<GeneralSectorialOperator> {
    if n == 0 {
        return Err(Error::Domain("operator dimension must be positive".into()));
    }
    if !(conditioning >= 1.0) {
        return Err(Error::Domain(format!(
            "conditioning target must be >= 1, got {conditioning}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (eigenvalues, zero_mode) = match law {
        SpectrumLaw::Explicit(list) => {
            if list.len() != n {
                return Err(Error::Domain(format!(
                    "explicit spectrum has {} entries for dimension {n}",
                    list.len()
                )));
            }
            for l in list {
                if l.re < -1e-15 * l.norm() {
                    return Err(Error::Domain(format!(
                        "eigenvalue {l} has negative real part"
                    )));
                }
            }
            let zero = list.iter().any(|l| l.norm() == 0.0);
            (list.clone(), zero)
        }
        SpectrumLaw::SectorRandom { modulus, max_arg, zero_mode } => {
            let (lo, hi) = *modulus;
            if !(lo > 0.0 && hi >= lo) {
                return Err(Error::Domain(format!(
                    "modulus range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                )));
            }
            if !(*max_arg >= 0.0 && *max_arg < std::f64::consts::FRAC_PI_2) {
                return Err(Error::Domain(format!(
                    "spectrum argument must lie in [0, pi/2), got {max_arg}"
                )));
            }
            let mut eig = Vec::with_capacity(n);
            for i in 0..n {
                if *zero_mode && i == 0 {
                    eig.push(Complex64::ZERO);
                    continue;
                }
                let u: f64 = rng.random_range(0.0..1.0);
                let r = lo * (hi / lo).powf(u);
                let phi: f64 = if *max_arg > 0.0 {
                    rng.random_range(-max_arg..*max_arg)
                } else {
                    0.0
                };
                eig.push(Complex64::from_polar(r, phi));
            }
            (eig, *zero_mode)
        }
    };

    let q1 = random_orthogonal(n, &mut rng);
    let q2 = random_orthogonal(n, &mut rng);
    // Geometric singular values 1 .. conditioning give cond_2(V) exactly.
    let d: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                conditioning.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    let mut v_real = q1.clone();
    for j in 0..n {
        for i in 0..n {
            v_real[(i, j)] *= d[j];
        }
    }
    let v_real = v_real * q2.transpose();
    let mut vinv_real = q2;
    for j in 0..n {
        for i in 0..n {
            vinv_real[(i, j)] /= d[j];
        }
    }
    let vinv_real = vinv_real * q1.transpose();

    let to_c = |m: &DMatrix<f64>| m.map(|x| Complex::new(x, 0.0));
    let v = to_c(&v_real);
    let v_inv = to_c(&vinv_real);
    let lam = DMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let matrix = &v * lam * &v_inv;

    Ok(GeneralSectorialOperator { n, eigenvalues, conditioning, zero_mode, v, v_inv, matrix })
}

impl GeneralSectorialOperator {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Reconstruction certificate: relative Frobenius error of
    /// `V diag V^{-1}` against the stored matrix, and the inverse quality
    /// `||V V^{-1} - I||_F`.
    pub fn certificate(&self) -> (f64, f64) {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        let re = (&self.v * lam * &self.v_inv - &self.matrix).norm() / self.matrix.norm().max(1e-300);
        let inv = (&self.v * &self.v_inv - DMatrix::<Complex64>::identity(self.n, self.n)).norm();
        (re, inv)
    }

    /// Apply `A`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = DVector::from_column_slice(x);
        (&self.matrix * v).data.into()
    }

    /// Apply `g(A) = V g(diag) V^{-1}` through the stored factorization.
    pub fn oracle_apply(
        &self,
        g: impl Fn(Complex64) -> Complex64,
        x: &[Complex64],
    ) -> Vec<Complex64> {
        let xv = DVector::from_column_slice(x);
        let mut y = &self.v_inv * xv;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            y[i] *= g(*l);
        }
        (&self.v * y).data.into()
    }

    /// Solve `(shift I + A) u = x` by LU, independent of the factorization.
    pub fn solve_shifted(&self, shift: Complex64, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let scale = self.eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
        if self
            .eigenvalues
            .iter()
            .any(|l| (shift + l).norm() < 1e-12 * (shift.norm().max(scale)))
        {
            return Err(Error::Singular { shift });
        }
        let mut m = self.matrix.clone();
        for i in 0..self.n {
            m[(i, i)] += shift;
        }
        let lu = m.lu();
        let b = DVector::from_column_slice(x);
        match lu.solve(&b) {
            Some(sol) => Ok(sol.data.into()),
            None => Err(Error::Singular { shift }),
        }
    }

    /// The adjoint operator `A^H = V^{-H} conj(diag) V^H`, with its
    /// factorization carried over exactly.
    pub fn adjoint(&self) -> GeneralSectorialOperator {
        GeneralSectorialOperator {
            n: self.n,
            eigenvalues: self.eigenvalues.iter().map(|l| l.conj()).collect(),
            conditioning: self.conditioning,
            zero_mode: self.zero_mode,
            v: self.v_inv.adjoint(),
            v_inv: self.v.adjoint(),
            matrix: self.matrix.adjoint(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificate_is_tight() {
        let law = SpectrumLaw::SectorRandom {
            modulus: (1.0, 1e4),
            max_arg: std::f64::consts::FRAC_PI_4,
            zero_mode: false,
        };
        let op = build_synthetic(40, &law, 100.0, 7).unwrap();
        let (re, inv) = op.certificate();
        assert!(re <= 1e-10, "reconstruction residual {re}");
        assert!(inv <= 1e-10 * op.conditioning, "inverse residual {inv}");
    }

    #[test]
    fn oracle_and_lu_resolvent_agree() {
        let law = SpectrumLaw::Explicit(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(10.0, 0.0),
            Complex64::new(100.0, 0.0),
        ]);
        let op = build_synthetic(3, &law, 10.0, 3).unwrap();
        let x = vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 1.0),
        ];
        let shift = Complex64::new(1.0, 0.0);
        let lu = op.solve_shifted(shift, &x).unwrap();
        let orc = op.oracle_apply(|l| 1.0 / (shift + l), &x);
        let err: f64 = lu
            .iter()
            .zip(orc.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nrm: f64 = orc.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * nrm, "routes differ by {err}");
    }

    #[test]
    fn shift_on_spectrum_is_detected() {
        let law = SpectrumLaw::Explicit(vec![Complex64::new(2.0, 0.0), Complex64::new(5.0, 0.0)]);
        let op = build_synthetic(2, &law, 1.0, 1).unwrap();
        let x = vec![Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            op.solve_shifted(Complex64::new(-2.0, 0.0), &x),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn adjoint_matches_conjugate_transpose_action() {
        let law = SpectrumLaw::SectorRandom {
            modulus: (1.0, 50.0),
            max_arg: 0.3,
            zero_mode: false,
        };
        let op = build_synthetic(12, &law, 20.0, 11).unwrap();
        let adj = op.adjoint();
        let x: Vec<Complex64> =
            (0..12).map(|i| Complex64::new(i as f64 * 0.3 - 1.0, 0.1 * i as f64)).collect();
        let via_struct = adj.apply(&x);
        let m = op.matrix().adjoint();
        let direct = (&m * DVector::from_column_slice(&x)).data.as_vec().clone();
        for (a, b) in via_struct.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let (re, _) = adj.certificate();
        assert!(re <= 1e-10);
    }
}
