//! Shifted resolvent solves and empirical certification of the sector
//! bound: for the shifted operator `I + A` the resolvent
//! `(lambda I + I + A)^{-1}` should exist on a wedge around the negative
//! real axis with norm `<= kappa / |lambda|`, and for small `|lambda|`
//! obey the interpolated bound `2^alpha kappa^alpha |lambda|^{alpha-1}`.
//!
//! All operator norms here are attained-ratio lower bounds from the
//! nonlinear power iteration in `pnorm`; `kappa_measured` is therefore an
//! estimate, conservative for any claim of the form "this vector obeys the
//! bound".

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::operator::ModalField;
use crate::pnorm::transform_norm_estimate;
pub use crate::pnorm::NormEstimateSettings;
use crate::sectorial::LabOperator;
use crate::subseed;

/// Samples closer than this to a pole are flagged rather than solved.
pub const POLE_GUARD: f64 = 1e-12;

/// Distance from `-(1 + spectrum)` to the probe point `lambda`.
pub fn pole_distance(op: &LabOperator, lambda: Complex64) -> f64 {
    op.eigenvalues()
        .iter()
        .map(|l| (lambda + 1.0 + l).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Solve `(lambda + 1) u + A u = f` in native coefficients.
pub fn shifted_resolve(
    op: &LabOperator,
    lambda: Complex64,
    f: &[Complex64],
) -> Result<Vec<Complex64>> {
    let shift = lambda + 1.0;
    if pole_distance(op, lambda) <= POLE_GUARD {
        return Err(Error::Singular { shift });
    }
    op.solve_shifted(shift, f)
}

/// Same solve on a grid field of the box operator: project to the
/// eigenbasis, divide, reconstruct.
pub fn shifted_resolve_field(
    op: &LabOperator,
    lambda: Complex64,
    f: &GridField,
) -> Result<GridField> {
    let spec = op.as_box()?;
    let (modal, _) = spec.to_modal(f)?;
    let u = shifted_resolve(op, lambda, &modal.coeffs)?;
    spec.reconstruct(&ModalField { key: spec.key(), coeffs: u })
}

/// Exact `L^2 -> L^2` resolvent norm on the box: the eigenbasis is
/// orthonormal and the spectrum real, so the norm is the reciprocal
/// distance to the shifted spectrum.
pub fn box_l2_resolvent_norm(op: &LabOperator, lambda: Complex64) -> Result<f64> {
    op.as_box()?;
    Ok(1.0 / pole_distance(op, lambda))
}

/// Estimate `||(lambda I + I + A)^{-1}||_{p -> p}` with a prebuilt adjoint
/// handle (the adjoint operator is reused across samples by the probe).
fn norm_estimate_with(
    op: &LabOperator,
    adj: &LabOperator,
    p: f64,
    lambda: Complex64,
    settings: &NormEstimateSettings,
) -> Result<f64> {
    let shift = lambda + 1.0;
    if pole_distance(op, lambda) <= POLE_GUARD {
        return Err(Error::Singular { shift });
    }
    let fwd = move |x: &[Complex64]| op.solve_shifted(shift, x).expect("pole distance checked");
    let bwd = move |x: &[Complex64]| {
        adj.solve_shifted(shift.conj(), x).expect("pole distance checked")
    };
    transform_norm_estimate(op, &fwd, &bwd, p, settings)
}

/// Estimate `||(lambda I + I + A)^{-1}||_{p -> p}` from below.
pub fn resolvent_norm_estimate(
    op: &LabOperator,
    p: f64,
    lambda: Complex64,
    settings: &NormEstimateSettings,
) -> Result<f64> {
    let adj = op.adjoint();
    norm_estimate_with(op, &adj, p, lambda, settings)
}

/// One probe point: `ratio = norm estimate * |lambda|`, infinite when the
/// sample sits on a pole.
#[derive(Debug, Clone, Copy)]
pub struct SectorSample {
    pub lambda: Complex64,
    pub norm_estimate: f64,
    pub ratio: f64,
    pub flagged: bool,
}

/// Probe outcome: the measured sector constant and the widest argument at
/// which every radius stayed off the poles.
#[derive(Debug, Clone)]
pub struct SectorEstimate {
    pub theta0_probed: f64,
    pub kappa_measured: f64,
    pub samples: Vec<SectorSample>,
    pub p: f64,
    pub trials: usize,
}

/// Default probe arguments: the negative real axis and four rays inside it.
pub fn default_angles() -> Vec<f64> {
    let pi = std::f64::consts::PI;
    vec![pi, pi - 0.1, pi - 0.3, pi - 0.6, pi - 1.0]
}

/// Geometric radius grid from `lo` to `hi` inclusive.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|j| lo * (j as f64 * step).exp()).collect()
}

/// Sweep `lambda = r e^{i phi}` over the given arguments and radii,
/// estimating the resolvent norm at every sample.  Ratios `norm * r` are
/// recorded per sample; their maximum over unflagged samples is the
/// measured sector constant.
pub fn probe_sector(
    op: &LabOperator,
    p: f64,
    angles: &[f64],
    radii: &[f64],
    settings: &NormEstimateSettings,
) -> Result<SectorEstimate> {
    let pi = std::f64::consts::PI;
    if angles.is_empty() {
        return Err(Error::Domain("no probe angles given".into()));
    }
    for &phi in angles {
        if !(phi >= pi / 2.0 && phi <= pi) {
            return Err(Error::Domain(format!(
                "probe angle {phi} outside [pi/2, pi]"
            )));
        }
    }
    let (lo, hi) = radii
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if !(lo > 0.0) || hi / lo < 1e8 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "radii must cover at least 8 decades, got [{lo:.3e}, {hi:.3e}]"
        )));
    }
    if settings.trials < 20 {
        return Err(Error::InsufficientSamples(format!(
            "sector probe needs at least 20 trials per sample, got {}",
            settings.trials
        )));
    }

    let adj = op.adjoint();
    let points: Vec<Complex64> = angles
        .iter()
        .flat_map(|&phi| radii.iter().map(move |&r| Complex64::from_polar(r, phi)))
        .collect();
    let samples: Vec<SectorSample> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &lambda)| {
            if pole_distance(op, lambda) <= POLE_GUARD {
                return SectorSample {
                    lambda,
                    norm_estimate: f64::INFINITY,
                    ratio: f64::INFINITY,
                    flagged: true,
                };
            }
            let local = NormEstimateSettings {
                seed: subseed(settings.seed, "sector-probe", idx as u64),
                ..*settings
            };
            let est = norm_estimate_with(op, &adj, p, lambda, &local)
                .expect("pole distance checked above");
            SectorSample {
                lambda,
                norm_estimate: est,
                ratio: est * lambda.norm(),
                flagged: false,
            }
        })
        .collect();

    let kappa_measured = samples
        .iter()
        .filter(|s| !s.flagged)
        .map(|s| s.ratio)
        .fold(0.0f64, f64::max);
    // Widest argument whose whole radius sweep stayed finite.
    let mut theta0_probed = 0.0f64;
    for &phi in angles {
        let clean = samples
            .iter()
            .filter(|s| (s.lambda.arg() - phi).abs() < 1e-12)
            .all(|s| !s.flagged);
        if clean {
            theta0_probed = theta0_probed.max(phi);
        }
    }
    Ok(SectorEstimate {
        theta0_probed,
        kappa_measured,
        samples,
        p,
        trials: settings.trials,
    })
}

/// One small-modulus check point: measured norm against the interpolated
/// bound; `margin = bound / measured` with pass meaning `>= 1`.
#[derive(Debug, Clone, Copy)]
pub struct SmallLambdaSample {
    pub lambda: Complex64,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct SmallLambdaReport {
    pub alpha: f64,
    pub kappa: f64,
    pub samples: Vec<SmallLambdaSample>,
    pub worst_margin: f64,
    pub all_pass: bool,
}

/// Verify `||(lambda I + I + A)^{-1}|| <= 2^alpha kappa^alpha
/// |lambda|^{alpha - 1}` on samples with `|lambda| <= 1/(2 kappa)`.
/// Violations are reported in the margins, not thrown.
pub fn check_small_lambda(
    op: &LabOperator,
    p: f64,
    alpha: f64,
    kappa: f64,
    lambdas: &[Complex64],
    settings: &NormEstimateSettings,
) -> Result<SmallLambdaReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let r_max = 1.0 / (2.0 * kappa);
    for &l in lambdas {
        let r = l.norm();
        if !(r > 0.0 && r <= r_max * (1.0 + 1e-9)) {
            return Err(Error::Domain(format!(
                "sample modulus {r:.3e} outside (0, 1/(2 kappa) = {r_max:.3e}]"
            )));
        }
    }
    let adj = op.adjoint();
    let samples: Vec<SmallLambdaSample> = lambdas
        .par_iter()
        .enumerate()
        .map(|(idx, &lambda)| {
            let local = NormEstimateSettings {
                seed: subseed(settings.seed, "small-lambda", idx as u64),
                ..*settings
            };
            let measured = norm_estimate_with(op, &adj, p, lambda, &local)
                .expect("samples bounded away from the pole by modulus restriction");
            let bound = 2f64.powf(alpha) * kappa.powf(alpha) * lambda.norm().powf(alpha - 1.0);
            SmallLambdaSample { lambda, measured, bound, margin: bound / measured }
        })
        .collect();
    let worst_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(SmallLambdaReport {
        alpha,
        kappa,
        samples,
        worst_margin,
        all_pass: worst_margin >= 1.0,
    })
}

/// Sample points for the small-modulus check: the boundary radius itself,
/// then log-uniform radii over four decades below it, with arguments
/// uniform in `[-max_arg, max_arg]`.
pub fn sample_small_lambdas(
    kappa: f64,
    max_arg: f64,
    count: usize,
    seed: u64,
) -> Vec<Complex64> {
    let r_max = 1.0 / (2.0 * kappa);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    out.push(Complex64::new(r_max, 0.0));
    while out.len() < count {
        let r = r_max * 10f64.powf(rng.random_range(-4.0..0.0));
        let phi = rng.random_range(-max_arg..max_arg);
        out.push(Complex64::from_polar(r, phi));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::build_box_stokes;
    use crate::pnorm::random_dense_starts;
    use crate::synthetic::{build_synthetic, SpectrumLaw};

    fn one_mode_box() -> LabOperator {
        // 2D, k_max = 1: the single mode k = (1,1), eigenvalue 2.
        LabOperator::from_box(build_box_stokes(2, 1, 8, std::f64::consts::PI).unwrap())
    }

    /// (1 + 1 + 2)^{-1} and (0 + 1 + 2)^{-1} on the lone eigenmode.
    #[test]
    fn box_mode_closed_forms() {
        let op = one_mode_box();
        let f = vec![Complex64::new(1.0, 0.0)];
        let u1 = shifted_resolve(&op, Complex64::new(1.0, 0.0), &f).unwrap();
        assert!((u1[0] - 0.25).norm() < 1e-15);
        let u0 = shifted_resolve(&op, Complex64::ZERO, &f).unwrap();
        assert!((u0[0] - 1.0 / 3.0).norm() < 1e-15);
    }

    /// Dense solve residual at lambda = i.
    #[test]
    fn dense_residual() {
        let eig = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(4.0, 0.0),
        ];
        let op = LabOperator::from_dense(
            build_synthetic(3, &SpectrumLaw::Explicit(eig), 5.0, 11).unwrap(),
        );
        let lambda = Complex64::i();
        let f = vec![
            Complex64::new(1.0, -0.5),
            Complex64::new(0.3, 0.2),
            Complex64::new(-0.7, 0.1),
        ];
        let u = shifted_resolve(&op, lambda, &f).unwrap();
        let au = op.apply(&u);
        let res: f64 = (0..3)
            .map(|i| ((lambda + 1.0) * u[i] + au[i] - f[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nf: f64 = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-11 * nf, "residual {res:.3e}");
    }

    /// A shift sitting on a pole must error, not divide.
    #[test]
    fn pole_is_detected() {
        let op = one_mode_box();
        let f = vec![Complex64::new(1.0, 0.0)];
        let err = shifted_resolve(&op, Complex64::new(-3.0, 0.0), &f);
        assert!(matches!(err, Err(Error::Singular { .. })));
    }

    /// R(lambda) - R(mu) = (mu - lambda) R(lambda) R(mu).
    #[test]
    fn resolvent_identity() {
        let op = LabOperator::from_dense(
            build_synthetic(
                20,
                &SpectrumLaw::SectorRandom {
                    modulus: (0.5, 50.0),
                    max_arg: 0.7,
                    zero_mode: false,
                },
                10.0,
                23,
            )
            .unwrap(),
        );
        let lambda = Complex64::new(2.0, 1.0);
        let mu = Complex64::new(-0.5, -3.0);
        let f: Vec<Complex64> = random_dense_starts(20, 1, 99).remove(0).0;
        let r_l = shifted_resolve(&op, lambda, &f).unwrap();
        let r_m = shifted_resolve(&op, mu, &f).unwrap();
        let lhs: Vec<Complex64> = r_l.iter().zip(r_m.iter()).map(|(a, b)| a - b).collect();
        let rlrm = shifted_resolve(&op, lambda, &r_m).unwrap();
        let diff: f64 = lhs
            .iter()
            .zip(rlrm.iter())
            .map(|(a, b)| (a - (mu - lambda) * b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = lhs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= 1e-9 * scale.max(1e-30), "identity residual {diff:.3e}");
    }

    /// Imaginary-axis ray: ratio r / |ir + 1 + lambda_min| <= 1.
    #[test]
    fn imaginary_ray_kappa_at_most_one() {
        let op = one_mode_box();
        let estimate = probe_sector(
            &op,
            2.0,
            &[std::f64::consts::FRAC_PI_2],
            &log_radii(1e-4, 1e6, 11),
            &NormEstimateSettings::default(),
        )
        .unwrap();
        assert!(
            estimate.kappa_measured <= 1.0 + 1e-7,
            "kappa on the imaginary axis: {}",
            estimate.kappa_measured
        );
        // Exact modulus comparison per sample.
        for s in &estimate.samples {
            let exact = s.lambda.norm() / (s.lambda + 3.0).norm();
            assert!(
                (s.ratio - exact).abs() <= 1e-6 * exact,
                "ratio {} vs exact {exact}",
                s.ratio
            );
        }
    }

    /// Zero-mode synthetic operator: the +I shift keeps the probe finite.
    #[test]
    fn zero_mode_probe_succeeds() {
        let op = LabOperator::from_dense(
            build_synthetic(
                8,
                &SpectrumLaw::SectorRandom {
                    modulus: (1.0, 100.0),
                    max_arg: 0.5,
                    zero_mode: true,
                },
                3.0,
                5,
            )
            .unwrap(),
        );
        let estimate = probe_sector(
            &op,
            2.0,
            &[std::f64::consts::PI - 0.3],
            &log_radii(1e-4, 1e6, 9),
            &NormEstimateSettings::default(),
        )
        .unwrap();
        assert!(estimate.kappa_measured.is_finite());
        assert!(estimate.theta0_probed > 0.0);
    }

    /// Small-modulus bound: boundary sample and interior samples pass.
    #[test]
    fn small_lambda_bound_holds() {
        let op = one_mode_box();
        let kappa = 3.8; // measured constant rounded up for the box probe
        let lambdas = sample_small_lambdas(kappa, std::f64::consts::PI - 0.2, 12, 42);
        let report = check_small_lambda(
            &op,
            2.0,
            0.5,
            kappa,
            &lambdas,
            &NormEstimateSettings::default(),
        )
        .unwrap();
        assert!(report.all_pass, "worst margin {}", report.worst_margin);
        assert!(report.worst_margin > 1.0);
    }
}
