//! Quadrature of the Dunford integral
//!
//! ```text
//! (I + A)^z = (1 / 2 pi i) \int_Gamma (-lambda)^z (lambda I + I + A)^{-1} dlambda,
//! ```
//!
//! over the wedge `Gamma = { rho e^{+-i(pi - theta0)} : rho >= 0 }` oriented
//! to enclose the shifted spectrum `-(1 + lambda_j)` counterclockwise, valid
//! for `-1 < Re z < 0`.  On the branches `Arg(-lambda) = -+theta0`, so
//! `(-lambda)^z = rho^z e^{-+ i z theta0}` and the integrand decays like
//! `rho^{Re z}` at the origin and `rho^{Re z - 1}` at infinity.
//!
//! The radius is integrated in the log variable `u = ln rho`, where the
//! decay is exponential on both sides; a sinh map concentrates nodes near
//! the spectrum and reaches the (possibly very wide, as `Re z -> -1`)
//! truncation window with double-exponential tail decay.  Every node costs
//! one shifted resolvent solve per branch.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sectorial::LabOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum QuadratureScheme {
    /// sinh-mapped nodes in the log-radius variable (default).
    DoubleExponential,
    /// Uniform nodes in the log-radius variable.
    LogTrapezoid,
}

/// Contour description: opening angle, node budget per branch, truncation
/// window in the log-radius variable, and quadrature scheme.
#[derive(Debug, Clone, Copy)]
pub struct DunfordContour {
    pub theta0: f64,
    pub nodes_per_branch: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub scheme: QuadratureScheme,
    /// Centre of the sinh map (log of the spectral scale).
    pub u_mid: f64,
}

/// Relative truncation target used when deriving the window.
pub const TRUNCATION_TARGET: f64 = 1e-10;

/// Default node budget per branch.
pub const DEFAULT_NODES: usize = 200;

impl DunfordContour {
    /// Derive a contour for `(I + A)^z`.  The wedge `|arg - pi| < theta0`
    /// must enclose the shifted spectrum `-(1 + lambda_j)`, whose rays sit
    /// at `pi -+ arg(1 + lambda_j)`, so `theta0` opens strictly wider than
    /// the spectral angle; the excess over it is kept small for large
    /// `|Im z|` to limit the `e^{|Im z| theta0}` growth of the integrand.
    /// The truncation window follows the endpoint decay rates down to the
    /// `1e-10` target.
    pub fn for_operator(op: &LabOperator, z: Complex64) -> Result<Self> {
        let max_arg = op.max_arg_one_plus();
        let room = std::f64::consts::FRAC_PI_2 - max_arg;
        if room <= 0.06 {
            return Err(Error::Domain(format!(
                "spectrum argument {max_arg:.3} leaves no room to separate the contour from the poles"
            )));
        }
        let extra_cap = 1.1 / (1.0 + 0.35 * z.im.abs());
        let extra = (0.5 * room)
            .max(0.3)
            .min(room - 0.05)
            .min(extra_cap)
            .min(0.6)
            .max(0.05);
        let theta0 = max_arg + extra;
        // Oscillation e^{i Im z u} along the log radius needs denser nodes,
        // as does the resolvent peak when the angular margin is thin.
        let sharp = (0.5 / extra.sin()).max(1.0);
        let nodes =
            (DEFAULT_NODES as f64 * (1.0 + 0.25 * z.im.abs()) * sharp).round() as usize;
        Self::for_angle(op, z, theta0, nodes)
    }

    /// Same derivation with a caller-chosen angle and node budget.
    pub fn for_angle(
        op: &LabOperator,
        z: Complex64,
        theta0: f64,
        nodes: usize,
    ) -> Result<Self> {
        check_exponent_range(z)?;
        let max_arg = op.max_arg_one_plus();
        // Enclosure: the poles sit at angular distance max_arg from the
        // negative real axis, so the wedge must open past them; the upper
        // bound keeps the rays away from the branch cut on the positive axis.
        if !(theta0 > max_arg + 0.02 && theta0 < std::f64::consts::PI - 0.3) {
            return Err(Error::Domain(format!(
                "contour angle {theta0} incompatible with spectrum argument {max_arg:.3}"
            )));
        }
        if nodes < 8 {
            return Err(Error::Domain(format!("node budget too small: {nodes}")));
        }
        let (s_min, s_max) = shifted_spectrum_range(op);
        let x = z.re;
        let y_abs = z.im.abs();
        // Near 0 the tail is rho^(1+x) / ((1+x) s_min); near infinity it is
        // e^{|Im z| theta0} rho^x / ((-x) sin theta0).
        let ref_size = s_min.powf(x).min(1.0);
        let rho_min = (TRUNCATION_TARGET * (1.0 + x) * s_min * ref_size)
            .powf(1.0 / (1.0 + x))
            .min(1e-8 * s_min);
        let rho_max = (TRUNCATION_TARGET * (-x) * ref_size * theta0.sin()
            / (y_abs * theta0).exp())
        .powf(1.0 / x)
        .max(1e4 * s_max);
        let u_mid = 0.5 * (s_min.ln() + s_max.ln());
        Ok(Self {
            theta0,
            nodes_per_branch: nodes,
            u_min: rho_min.ln(),
            u_max: rho_max.ln(),
            scheme: QuadratureScheme::DoubleExponential,
            u_mid,
        })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes_per_branch = nodes;
        self
    }

    pub fn with_scheme(mut self, scheme: QuadratureScheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Quadrature nodes `(u_j, weight_j)` in the log-radius variable.
    fn nodes(&self) -> Vec<(f64, f64)> {
        let n = self.nodes_per_branch;
        match self.scheme {
            QuadratureScheme::LogTrapezoid => {
                let du = (self.u_max - self.u_min) / (n - 1) as f64;
                (0..n)
                    .map(|j| {
                        let w = if j == 0 || j == n - 1 { 0.5 * du } else { du };
                        (self.u_min + j as f64 * du, w)
                    })
                    .collect()
            }
            QuadratureScheme::DoubleExponential => {
                let sigma = 2.0;
                let vmin = ((self.u_min - self.u_mid) / sigma).asinh();
                let vmax = ((self.u_max - self.u_mid) / sigma).asinh();
                let dv = (vmax - vmin) / (n - 1) as f64;
                (0..n)
                    .map(|j| {
                        let v = vmin + j as f64 * dv;
                        let w0 = if j == 0 || j == n - 1 { 0.5 * dv } else { dv };
                        (self.u_mid + sigma * v.sinh(), sigma * v.cosh() * w0)
                    })
                    .collect()
            }
        }
    }
}

/// Optional caller overrides on the automatically derived contour.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContourOverrides {
    pub theta0: Option<f64>,
    pub nodes: Option<usize>,
    pub scheme: Option<QuadratureScheme>,
}

impl ContourOverrides {
    /// Derive the contour for `op` and `z`, then apply the overrides.
    pub fn realize(&self, op: &LabOperator, z: Complex64) -> Result<DunfordContour> {
        let mut contour = match self.theta0 {
            Some(th) => {
                let nodes = match self.nodes {
                    Some(n) => n,
                    None => DunfordContour::for_operator(op, z)?.nodes_per_branch,
                };
                DunfordContour::for_angle(op, z, th, nodes)?
            }
            None => {
                let c = DunfordContour::for_operator(op, z)?;
                match self.nodes {
                    Some(n) => c.with_nodes(n),
                    None => c,
                }
            }
        };
        if let Some(s) = self.scheme {
            contour.scheme = s;
        }
        Ok(contour)
    }
}

fn check_exponent_range(z: Complex64) -> Result<()> {
    if !(z.re > -1.0 && z.re < 0.0) {
        return Err(Error::Domain(format!(
            "contour representation needs -1 < Re z < 0, got Re z = {}",
            z.re
        )));
    }
    Ok(())
}

fn shifted_spectrum_range(op: &LabOperator) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for l in op.eigenvalues() {
        let m = (1.0 + l).norm();
        lo = lo.min(m);
        hi = hi.max(m);
    }
    (lo, hi)
}

/// Quadrature health report returned alongside the result.
#[derive(Debug, Clone, Copy)]
pub struct ContourDiagnostics {
    pub theta0: f64,
    pub nodes_per_branch: usize,
    /// A-priori bound on the truncated tails, relative to the result scale.
    pub truncation_estimate: f64,
    /// Largest endpoint integrand magnitude over the interior peak; an
    /// after-the-fact check that the window was wide enough.
    pub endpoint_ratio: f64,
}

/// Apply `(I + A)^z` to native coefficients by contour quadrature.
/// Requires `-1 < Re z < 0`; wider exponents go through the factorized
/// route in `funcalc`.
pub fn contour_power(
    op: &LabOperator,
    z: Complex64,
    x: &[Complex64],
    contour: &DunfordContour,
) -> Result<(Vec<Complex64>, ContourDiagnostics)> {
    check_exponent_range(z)?;
    let max_arg = op.max_arg_one_plus();
    if contour.theta0 <= max_arg + 0.01 || contour.theta0 >= std::f64::consts::PI - 0.29 {
        return Err(Error::Domain(format!(
            "contour angle {} does not enclose the spectrum (argument {max_arg:.3}) \
             while staying off the branch cut",
            contour.theta0
        )));
    }
    if x.len() != op.dim_native() {
        return Err(Error::GridMismatch(format!(
            "coefficient count {} does not match operator dimension {}",
            x.len(),
            op.dim_native()
        )));
    }

    let theta0 = contour.theta0;
    let phase_up = Complex64::from_polar(1.0, std::f64::consts::PI - theta0);
    let phase_lo = phase_up.conj();
    let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let nodes = contour.nodes();

    // Per node: prefactors carry (-lambda)^z = e^{z u} e^{-+ i z theta0},
    // the branch phase from dlambda, the log-variable Jacobian rho = e^u,
    // and the quadrature weight.
    let contributions: Vec<Result<(Vec<Complex64>, f64)>> = nodes
        .par_iter()
        .map(|&(u, w)| {
            let rho = u.exp();
            let rho_z = (z * u).exp();
            let pref_up = w * rho * rho_z * (-Complex64::i() * z * theta0).exp() * phase_up
                / two_pi_i;
            let pref_lo = -(w * rho * rho_z * (Complex64::i() * z * theta0).exp() * phase_lo)
                / two_pi_i;
            let r_up = op.solve_shifted(Complex64::new(1.0, 0.0) + rho * phase_up, x)?;
            let r_lo = op.solve_shifted(Complex64::new(1.0, 0.0) + rho * phase_lo, x)?;
            let mut contrib = vec![Complex64::ZERO; x.len()];
            let mut mag = 0.0f64;
            for i in 0..x.len() {
                let c = pref_up * r_up[i] + pref_lo * r_lo[i];
                contrib[i] = c;
                mag += c.norm_sqr();
            }
            Ok((contrib, mag.sqrt()))
        })
        .collect();

    let mut out = vec![Complex64::ZERO; x.len()];
    let mut peak = 0.0f64;
    let mut first_mag = 0.0;
    let mut last_mag = 0.0;
    for (j, item) in contributions.into_iter().enumerate() {
        let (contrib, mag) = item?;
        if j == 0 {
            first_mag = mag;
        }
        last_mag = mag;
        peak = peak.max(mag);
        for i in 0..x.len() {
            out[i] += contrib[i];
        }
    }

    let x_in: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let (s_min, _) = shifted_spectrum_range(op);
    let ref_size = s_min.powf(z.re).min(1.0) * x_in;
    let tail_lo = contour.u_min.exp().powf(1.0 + z.re) / ((1.0 + z.re) * s_min) * x_in;
    let tail_hi = (z.im.abs() * theta0).exp() * contour.u_max.exp().powf(z.re)
        / ((-z.re) * theta0.sin())
        * x_in;
    let diag = ContourDiagnostics {
        theta0,
        nodes_per_branch: contour.nodes_per_branch,
        truncation_estimate: (tail_lo + tail_hi) / ref_size.max(1e-300),
        endpoint_ratio: first_mag.max(last_mag) / peak.max(1e-300),
    };
    Ok((out, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::build_box_stokes;
    use crate::sectorial::LabOperator;

    fn box_op() -> LabOperator {
        LabOperator::from_box(build_box_stokes(2, 2, 8, std::f64::consts::PI).unwrap())
    }

    /// Single mode, z = -1/2: the contour must reproduce (1 + lambda)^{-1/2}.
    #[test]
    fn scalar_half_power() {
        let op = box_op();
        let spec = op.as_box().unwrap();
        let idx = 0;
        let lam = spec.eigenvalue(idx);
        let mut x = vec![Complex64::ZERO; op.dim_native()];
        x[idx] = Complex64::new(1.0, 0.0);
        let z = Complex64::new(-0.5, 0.0);
        let contour = DunfordContour::for_operator(&op, z).unwrap();
        let (y, diag) = contour_power(&op, z, &x, &contour).unwrap();
        let expect = (1.0 + lam).powf(-0.5);
        assert!(
            (y[idx].re - expect).abs() < 1e-10 * expect,
            "got {} want {expect} (truncation {:.2e})",
            y[idx].re,
            diag.truncation_estimate
        );
        assert!(y[idx].im.abs() < 1e-10);
    }

    /// Errors outside the admissible strip.
    #[test]
    fn exponent_strip_is_enforced() {
        let op = box_op();
        let x = vec![Complex64::new(1.0, 0.0); op.dim_native()];
        for &re in &[0.0, 0.5, -1.0, -1.5] {
            let z = Complex64::new(re, 0.0);
            assert!(DunfordContour::for_operator(&op, z).is_err(), "Re z = {re} accepted");
            let legal = DunfordContour::for_operator(&op, Complex64::new(-0.5, 0.0)).unwrap();
            assert!(contour_power(&op, z, &x, &legal).is_err());
        }
    }

    /// Node doubling must shrink the error (down to roundoff).
    #[test]
    fn node_doubling_improves_error() {
        let op = box_op();
        let spec = op.as_box().unwrap();
        let z = Complex64::new(-0.3, 0.7);
        let x = vec![Complex64::new(1.0, 0.0); op.dim_native()];
        let exact: Vec<Complex64> = spec
            .modes()
            .iter()
            .map(|m| Complex64::new(1.0 + m.eigenvalue, 0.0).powc(z))
            .collect();
        let mut errs = Vec::new();
        for nodes in [24usize, 48, 96] {
            let contour = DunfordContour::for_operator(&op, z).unwrap().with_nodes(nodes);
            let (y, _) = contour_power(&op, z, &x, &contour).unwrap();
            let err: f64 = y
                .iter()
                .zip(exact.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        assert!(
            errs[1] <= 0.5 * errs[0] || errs[1] < 1e-13,
            "24 -> 48 nodes: {:.2e} -> {:.2e}",
            errs[0],
            errs[1]
        );
        assert!(
            errs[2] <= 0.5 * errs[1] || errs[2] < 1e-13,
            "48 -> 96 nodes: {:.2e} -> {:.2e}",
            errs[1],
            errs[2]
        );
    }
}
