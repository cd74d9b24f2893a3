//! Lower-bound estimation of `L^p -> L^p` operator norms by nonlinear power
//! iteration: alternate the operator and its adjoint through the dual-
//! exponent signed-power maps, which ascends `||T x||_p / ||x||_p`.  Every
//! reported value is an attained ratio, hence a certified lower bound; the
//! maximum is taken over caller-supplied random starts.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{dual_field, lp_norm, GridField};
use crate::operator::{ModalField, SlipStokesSpectrum};
use crate::sectorial::{LabOperator, OperatorKind};

/// Vector with a discrete `L^p` structure: norm, Hoelder duality partner,
/// and real pairing.
pub trait PVec: Clone {
    fn lp_norm(&self, p: f64) -> f64;
    /// Partner `g` with `<self, g> = ||self||_p` and `||g||_{p'} = 1`.
    fn dual(&self, p: f64) -> Self;
    fn inner_re(&self, other: &Self) -> f64;
    fn rescale(&mut self, c: f64);
}

impl PVec for GridField {
    fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(self, p).expect("exponent validated by caller")
    }

    fn dual(&self, p: f64) -> Self {
        dual_field(self, p).expect("exponent validated by caller")
    }

    fn inner_re(&self, other: &Self) -> f64 {
        self.inner(other).expect("shapes fixed within one estimate").re
    }

    fn rescale(&mut self, c: f64) {
        for v in self.data.iter_mut() {
            *v *= c;
        }
    }
}

/// Plain `C^n` with counting weight; the native space of dense operators.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVec(pub Vec<Complex64>);

impl PVec for DenseVec {
    fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self
            .0
            .iter()
            .map(|z| {
                let m = z.norm();
                if m > 0.0 {
                    m.powf(p)
                } else {
                    0.0
                }
            })
            .sum();
        s.powf(1.0 / p)
    }

    fn dual(&self, p: f64) -> Self {
        let norm = self.lp_norm(p);
        if norm == 0.0 {
            return Self(vec![Complex64::ZERO; self.0.len()]);
        }
        let scale = norm.powf(p - 1.0);
        Self(
            self.0
                .iter()
                .map(|z| {
                    let m = z.norm();
                    if m > 0.0 {
                        z * (m.powf(p - 2.0) / scale)
                    } else {
                        Complex64::ZERO
                    }
                })
                .collect(),
        )
    }

    fn inner_re(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    fn rescale(&mut self, c: f64) {
        for v in self.0.iter_mut() {
            *v *= c;
        }
    }
}

/// Outcome of one norm estimation.
#[derive(Debug, Clone)]
pub struct PnormReport {
    /// Largest attained ratio over all trials (certified lower bound).
    pub estimate: f64,
    /// Final ratio per trial.
    pub trial_estimates: Vec<f64>,
    /// Total operator applications spent.
    pub applications: usize,
}

/// Estimate `||T||_{p -> p}` from below.
///
/// `project` restricts iterates to a closed subspace (e.g. the solenoidal
/// span) so the reported ratio is attained inside it; pass `None` for the
/// full space.  Iteration stops when the ratio stagnates to `rel_stag`
/// relative or when the duality optimality gap closes.
pub fn operator_pnorm_estimate<V: PVec>(
    apply: &dyn Fn(&V) -> V,
    adjoint: &dyn Fn(&V) -> V,
    project: Option<&dyn Fn(&V) -> V>,
    p: f64,
    starts: &[V],
    rel_stag: f64,
    max_iter: usize,
) -> Result<PnormReport> {
    crate::field::check_exponent(p)?;
    let pp = p / (p - 1.0);
    let mut best = 0.0f64;
    let mut trial_estimates = Vec::with_capacity(starts.len());
    let mut applications = 0usize;

    for start in starts {
        let mut x = match project {
            Some(pr) => pr(start),
            None => start.clone(),
        };
        let nx = x.lp_norm(p);
        if nx == 0.0 {
            trial_estimates.push(0.0);
            continue;
        }
        x.rescale(1.0 / nx);
        let mut est = 0.0f64;
        for _ in 0..max_iter {
            let y = apply(&x);
            applications += 1;
            let new_est = y.lp_norm(p);
            let stagnated = (new_est - est).abs() <= rel_stag * new_est.max(1e-300);
            est = est.max(new_est);
            if new_est == 0.0 {
                break;
            }
            let z = adjoint(&y.dual(p));
            applications += 1;
            // Subgradient optimality: ||z||_{p'} <= <z, x> at a maximizer.
            let zn = z.lp_norm(pp);
            let gap = zn - z.inner_re(&x);
            if stagnated || gap <= rel_stag * zn.max(1e-300) {
                break;
            }
            let mut xn = z.dual(pp);
            if let Some(pr) = project {
                xn = pr(&xn);
            }
            let nn = xn.lp_norm(p);
            if nn == 0.0 {
                break;
            }
            xn.rescale(1.0 / nn);
            x = xn;
        }
        best = best.max(est);
        trial_estimates.push(est);
    }
    Ok(PnormReport { estimate: best, trial_estimates, applications })
}

/// Controls for one norm estimation: random starts, stagnation threshold,
/// iteration cap, seed.
#[derive(Debug, Clone, Copy)]
pub struct NormEstimateSettings {
    pub trials: usize,
    pub rel_stagnation: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for NormEstimateSettings {
    fn default() -> Self {
        Self { trials: 20, rel_stagnation: 1e-9, max_iter: 2000, seed: 0x5ec7 }
    }
}

/// Random fields in the solenoidal modal span, delivered on the grid.
pub fn random_modal_starts(
    spec: &SlipStokesSpectrum,
    count: usize,
    seed: u64,
) -> Vec<GridField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let coeffs: Vec<Complex64> = (0..spec.n_modes())
                .map(|_| {
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
                .collect();
            spec.reconstruct(&ModalField { key: spec.key(), coeffs })
                .expect("coefficients built for this spectrum")
        })
        .collect()
}

/// Estimate the `L^p -> L^p` norm of a linear map given by its action on
/// native coefficients.  Box operators are measured on grid fields (the
/// discrete `L^p` space), with iterates projected to the solenoidal modal
/// span; dense operators are measured on `C^n` with counting weight.
pub fn transform_norm_estimate(
    op: &LabOperator,
    fwd: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    adj: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    p: f64,
    settings: &NormEstimateSettings,
) -> Result<f64> {
    match &op.kind {
        OperatorKind::Box(spec) => {
            let lift = |f: &GridField, map: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync)| {
                let (modal, _) = spec.to_modal(f).expect("grids fixed within one estimate");
                spec.reconstruct(&ModalField { key: spec.key(), coeffs: map(&modal.coeffs) })
                    .expect("key matches")
            };
            let apply = |f: &GridField| lift(f, fwd);
            let adjoint = |f: &GridField| lift(f, adj);
            let project = |f: &GridField| {
                let (modal, _) = spec.to_modal(f).expect("grids fixed within one estimate");
                spec.reconstruct(&modal).expect("key matches")
            };
            let starts = random_modal_starts(spec, settings.trials, settings.seed);
            let report = operator_pnorm_estimate(
                &apply,
                &adjoint,
                Some(&project),
                p,
                &starts,
                settings.rel_stagnation,
                settings.max_iter,
            )?;
            Ok(report.estimate)
        }
        OperatorKind::Dense(dense) => {
            let apply = |x: &DenseVec| DenseVec(fwd(&x.0));
            let adjoint = |x: &DenseVec| DenseVec(adj(&x.0));
            let starts = random_dense_starts(dense.n, settings.trials, settings.seed);
            let report = operator_pnorm_estimate(
                &apply,
                &adjoint,
                None,
                p,
                &starts,
                settings.rel_stagnation,
                settings.max_iter,
            )?;
            Ok(report.estimate)
        }
    }
}

/// Seeded random start vectors in `C^n` (components uniform on the unit
/// square of the complex plane, centred).
pub fn random_dense_starts(n: usize, count: usize, seed: u64) -> Vec<DenseVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            DenseVec(
                (0..n)
                    .map(|_| {
                        Complex64::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
                    })
                    .collect(),
            )
        })
        .collect()
}
