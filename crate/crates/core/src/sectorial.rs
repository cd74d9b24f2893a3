//! A single handle over the two operator realizations (diagonalized box
//! Stokes and dense synthetic), with an optional positive scale factor.
//! Functional-calculus code works on the native coefficient vectors:
//! eigenbasis coefficients for the box, `C^n` for dense matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::{ModalField, SlipStokesSpectrum};
use crate::synthetic::GeneralSectorialOperator;

#[derive(Debug, Clone)]
pub enum OperatorKind {
    Box(SlipStokesSpectrum),
    Dense(GeneralSectorialOperator),
}

/// `scale * A` for a base operator `A`.
#[derive(Debug, Clone)]
pub struct LabOperator {
    pub kind: OperatorKind,
    pub scale: f64,
}

impl LabOperator {
    pub fn from_box(spec: SlipStokesSpectrum) -> Self {
        Self { kind: OperatorKind::Box(spec), scale: 1.0 }
    }

    pub fn from_dense(op: GeneralSectorialOperator) -> Self {
        Self { kind: OperatorKind::Dense(op), scale: 1.0 }
    }

    /// The same operator multiplied by a positive factor.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self { kind: self.kind.clone(), scale: self.scale * factor })
    }

    /// Dimension of the native coefficient space.
    pub fn dim_native(&self) -> usize {
        match &self.kind {
            OperatorKind::Box(spec) => spec.n_modes(),
            OperatorKind::Dense(op) => op.n,
        }
    }

    /// Certified spectrum, including the scale factor.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match &self.kind {
            OperatorKind::Box(spec) => spec
                .modes()
                .iter()
                .map(|m| Complex64::new(self.scale * m.eigenvalue, 0.0))
                .collect(),
            OperatorKind::Dense(op) => op.eigenvalues.iter().map(|l| l * self.scale).collect(),
        }
    }

    pub fn has_zero_mode(&self) -> bool {
        match &self.kind {
            // Box eigenvalues are |k|^2 q^2 with |k| >= sqrt(2) > 0.
            OperatorKind::Box(_) => false,
            OperatorKind::Dense(op) => op.zero_mode,
        }
    }

    /// Largest `|arg(1 + lambda)|` over the spectrum; bounds how wide a
    /// contour can open around the negative real axis.
    pub fn max_arg_one_plus(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|l| (1.0 + l).arg().abs())
            .fold(0.0, f64::max)
    }

    /// Adjoint operator: the box realization is self-adjoint (real
    /// eigenvalues, orthonormal eigenbasis), dense operators carry their
    /// factorized adjoint.  The scale is real, so it is preserved.
    pub fn adjoint(&self) -> Self {
        match &self.kind {
            OperatorKind::Box(_) => self.clone(),
            OperatorKind::Dense(op) => {
                Self { kind: OperatorKind::Dense(op.adjoint()), scale: self.scale }
            }
        }
    }

    /// Apply `scale * A` in native coordinates.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match &self.kind {
            OperatorKind::Box(spec) => spec
                .modes()
                .iter()
                .zip(x.iter())
                .map(|(m, c)| c * (self.scale * m.eigenvalue))
                .collect(),
            OperatorKind::Dense(op) => {
                let mut y = op.apply(x);
                for v in y.iter_mut() {
                    *v *= self.scale;
                }
                y
            }
        }
    }

    /// Solve `(shift I + scale A) u = x`.  For the box this is a per-mode
    /// division; for dense operators an LU solve independent of the stored
    /// eigenfactorization.
    pub fn solve_shifted(&self, shift: Complex64, x: &[Complex64]) -> Result<Vec<Complex64>> {
        match &self.kind {
            OperatorKind::Box(spec) => {
                let scale_ref = shift.norm().max(self.scale * spec.lambda_max());
                let mut out = Vec::with_capacity(x.len());
                for (m, c) in spec.modes().iter().zip(x.iter()) {
                    let den = shift + self.scale * m.eigenvalue;
                    if den.norm() < 1e-14 * scale_ref {
                        return Err(Error::Singular { shift });
                    }
                    out.push(c / den);
                }
                Ok(out)
            }
            OperatorKind::Dense(op) => {
                // (shift I + s A) = s (shift/s I + A)
                let s = self.scale;
                let mut y = op.solve_shifted(shift / s, x)?;
                for v in y.iter_mut() {
                    *v /= s;
                }
                Ok(y)
            }
        }
    }

    /// Apply `g(scale A)` through the certified diagonalization.
    pub fn oracle_apply(
        &self,
        g: &dyn Fn(Complex64) -> Complex64,
        x: &[Complex64],
    ) -> Vec<Complex64> {
        match &self.kind {
            OperatorKind::Box(spec) => spec
                .modes()
                .iter()
                .zip(x.iter())
                .map(|(m, c)| c * g(Complex64::new(self.scale * m.eigenvalue, 0.0)))
                .collect(),
            OperatorKind::Dense(op) => {
                let s = self.scale;
                op.oracle_apply(|l| g(l * s), x)
            }
        }
    }

    /// Borrow the box spectrum, or fail for dense operators.
    pub fn as_box(&self) -> Result<&SlipStokesSpectrum> {
        match &self.kind {
            OperatorKind::Box(spec) => Ok(spec),
            OperatorKind::Dense(_) => {
                Err(Error::Domain("operation requires the box operator".into()))
            }
        }
    }

    /// Wrap native coefficients as a modal field of the box spectrum.
    pub fn modal(&self, coeffs: Vec<Complex64>) -> Result<ModalField> {
        let spec = self.as_box()?;
        if coeffs.len() != spec.n_modes() {
            return Err(Error::GridMismatch(format!(
                "coefficient count {} does not match mode count {}",
                coeffs.len(),
                spec.n_modes()
            )));
        }
        Ok(ModalField { key: spec.key(), coeffs })
    }
}
