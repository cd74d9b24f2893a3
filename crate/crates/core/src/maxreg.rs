//! Inhomogeneous solves `u' + Au = f`, `u(0) = 0`: exact per-mode Duhamel
//! integration, A-stable one-step schemes, pressure recovery from raw
//! (non-solenoidal) forcings, and maximal-regularity ratio measurements at
//! the strong, weak, and very-weak scales, including the exponential-shift
//! substitution `v(t) = e^{-t/mu^2} u(t)`.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{lp_norm, GridField};
use crate::operator::{ModalField, ScalarPotential, SlipStokesSpectrum, SpectrumKey};
use crate::subseed;

/// One exponential-in-time modal term `coeffs[k] * e^{rate * t}`.
#[derive(Debug, Clone)]
pub struct ExponentialTerm {
    pub coeffs: Vec<Complex64>,
    pub rate: Complex64,
}

/// Solenoidal forcing in modal coordinates.
#[derive(Debug, Clone)]
pub enum Forcing {
    /// Closed-form sum of exponential terms; `rate = 0` terms are constants.
    Analytic { terms: Vec<ExponentialTerm>, horizon: f64 },
    /// Samples on a strictly increasing grid covering `[0, T]`, interpreted
    /// as the piecewise-linear interpolant.
    Sampled { t_grid: Vec<f64>, rows: Vec<Vec<Complex64>>, horizon: f64 },
}

impl Forcing {
    pub fn constant(coeffs: Vec<Complex64>, horizon: f64) -> Self {
        Self::Analytic {
            terms: vec![ExponentialTerm { coeffs, rate: Complex64::ZERO }],
            horizon,
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Self::Analytic { horizon, .. } | Self::Sampled { horizon, .. } => *horizon,
        }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        if !(self.horizon() > 0.0 && self.horizon().is_finite()) {
            return Err(Error::Domain(format!(
                "time horizon must be positive and finite, got {}",
                self.horizon()
            )));
        }
        match self {
            Self::Analytic { terms, .. } => {
                if terms.is_empty() {
                    return Err(Error::Domain("analytic forcing needs at least one term".into()));
                }
                for term in terms {
                    if term.coeffs.len() != n_modes {
                        return Err(Error::GridMismatch(format!(
                            "forcing term has {} coefficients, spectrum has {n_modes} modes",
                            term.coeffs.len()
                        )));
                    }
                }
            }
            Self::Sampled { t_grid, rows, horizon } => {
                if t_grid.len() < 2 || rows.len() != t_grid.len() {
                    return Err(Error::Domain(
                        "sampled forcing needs matching time grid and rows (>= 2 samples)".into(),
                    ));
                }
                if t_grid[0].abs() > 1e-12 * horizon || t_grid[t_grid.len() - 1] < horizon - 1e-12 * horizon {
                    return Err(Error::Domain(format!(
                        "sample grid [{}, {}] must cover [0, {horizon}]",
                        t_grid[0],
                        t_grid[t_grid.len() - 1]
                    )));
                }
                for w in t_grid.windows(2) {
                    if !(w[1] > w[0]) {
                        return Err(Error::Domain("sample grid must be strictly increasing".into()));
                    }
                }
                for row in rows {
                    if row.len() != n_modes {
                        return Err(Error::GridMismatch(format!(
                            "forcing row has {} coefficients, spectrum has {n_modes} modes",
                            row.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Modal coefficients at time `t` (exact for analytic terms, linear
    /// interpolation for samples).
    pub fn row_at(&self, t: f64) -> Vec<Complex64> {
        match self {
            Self::Analytic { terms, .. } => {
                let n = terms[0].coeffs.len();
                let mut out = vec![Complex64::ZERO; n];
                for term in terms {
                    let e = (term.rate * t).exp();
                    for (o, c) in out.iter_mut().zip(term.coeffs.iter()) {
                        *o += c * e;
                    }
                }
                out
            }
            Self::Sampled { t_grid, rows, .. } => {
                let (i, theta) = bracket(t_grid, t);
                rows[i]
                    .iter()
                    .zip(rows[i + 1].iter())
                    .map(|(a, b)| a * (1.0 - theta) + b * theta)
                    .collect()
            }
        }
    }

    /// Multiply by `e^{-rate t}`; exact only for the analytic representation.
    pub fn damped(&self, rate: f64) -> Result<Forcing> {
        match self {
            Self::Analytic { terms, horizon } => Ok(Self::Analytic {
                terms: terms
                    .iter()
                    .map(|term| ExponentialTerm {
                        coeffs: term.coeffs.clone(),
                        rate: term.rate - rate,
                    })
                    .collect(),
                horizon: *horizon,
            }),
            Self::Sampled { .. } => Err(Error::Domain(
                "exponential damping of a sampled forcing is not exact; use an analytic forcing"
                    .into(),
            )),
        }
    }

    pub fn scaled(&self, c: Complex64) -> Forcing {
        match self {
            Self::Analytic { terms, horizon } => Self::Analytic {
                terms: terms
                    .iter()
                    .map(|t| ExponentialTerm {
                        coeffs: t.coeffs.iter().map(|v| v * c).collect(),
                        rate: t.rate,
                    })
                    .collect(),
                horizon: *horizon,
            },
            Self::Sampled { t_grid, rows, horizon } => Self::Sampled {
                t_grid: t_grid.clone(),
                rows: rows
                    .iter()
                    .map(|r| r.iter().map(|v| v * c).collect())
                    .collect(),
                horizon: *horizon,
            },
        }
    }
}

/// Index and barycentric weight of `t` in a sorted grid (clamped).
fn bracket(grid: &[f64], t: f64) -> (usize, f64) {
    let last = grid.len() - 1;
    if t <= grid[0] {
        return (0, 0.0);
    }
    if t >= grid[last] {
        return (last - 1, 1.0);
    }
    let mut i = match grid.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    if i >= last {
        i = last - 1;
    }
    ((i), (t - grid[i]) / (grid[i + 1] - grid[i]))
}

/// Time-stepping scheme; all three are A-stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    DuhamelExact,
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::DuhamelExact => "duhamel_exact",
            Self::ImplicitEuler => "implicit_euler",
            Self::CrankNicolson => "crank_nicolson",
        }
    }
}

/// Discrete solution of `u' + Au = Pf`, `u(0) = 0` on a uniform grid.
/// `du` is the ODE identity `Pf - Au`, never a finite difference.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub key: SpectrumKey,
    pub t_grid: Vec<f64>,
    pub u: Vec<Vec<Complex64>>,
    pub du: Vec<Vec<Complex64>>,
    pub au: Vec<Vec<Complex64>>,
    pub pf: Vec<Vec<Complex64>>,
    /// Pressure potential per time; `None` for solenoidal forcings
    /// (identically zero pressure).
    pub pressure: Option<Vec<ScalarPotential>>,
    pub scheme: Scheme,
    pub steps: usize,
    /// Sampled forcing finer than the stepping grid under a one-step
    /// scheme: the quadrature no longer resolves the data.
    pub under_resolved: bool,
}

/// `(1 - e^{-z}) / z` for real `z >= 0`, stable at 0.
fn psi1(z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    -(-z).exp_m1() / z
}

/// `(z - 1 + e^{-z}) / z^2` for real `z >= 0`, series below the
/// cancellation threshold.
fn psi2(z: f64) -> f64 {
    if z < 1e-2 {
        return 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0 + z * z * z * z / 144.0;
    }
    (z - 1.0 + (-z).exp()) / (z * z)
}

/// `(e^z - 1) / z` for complex `z`, series below the cancellation
/// threshold.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        let mut acc = Complex64::new(1.0, 0.0);
        // Horner over 1 + z/2 (1 + z/3 (1 + z/4 (1 + z/5 (1 + z/6)))).
        for div in [6.0, 5.0, 4.0, 3.0, 2.0] {
            acc = Complex64::new(1.0, 0.0) + z * acc / div;
        }
        return acc;
    }
    (z.exp() - 1.0) / z
}

/// Exact `int_0^t e^{-l (t - s)} e^{w s} ds` for `l > 0`.
fn duhamel_kernel(l: f64, w: Complex64, t: f64) -> Complex64 {
    let s = w + l;
    if (s * t).norm() < 1e-2 {
        // (e^{wt} - e^{-lt})/s = e^{-lt} t phi1(s t), safe as s -> 0.
        return (-l * t).exp() * t * phi1(s * t);
    }
    ((w * t).exp() - Complex64::new((-l * t).exp(), 0.0)) / s
}

/// Exact modal states of the shifted problem
/// `u' + (shift + A) u = f`, `u(0) = 0` at the requested times.
fn duhamel_states(
    lambdas: &[f64],
    f: &Forcing,
    shift: f64,
    t_grid: &[f64],
) -> Vec<Vec<Complex64>> {
    match f {
        Forcing::Analytic { terms, .. } => t_grid
            .par_iter()
            .map(|&t| {
                let mut row = vec![Complex64::ZERO; lambdas.len()];
                for term in terms {
                    for (o, (&l, c)) in row.iter_mut().zip(lambdas.iter().zip(term.coeffs.iter())) {
                        *o += c * duhamel_kernel(l + shift, term.rate, t);
                    }
                }
                row
            })
            .collect(),
        Forcing::Sampled { t_grid: s_grid, rows, .. } => {
            // March over the union of sample points and output points so
            // each segment integrates one linear piece exactly.
            let events = merge_grids(s_grid, t_grid);
            let per_mode: Vec<Vec<Complex64>> = (0..lambdas.len())
                .into_par_iter()
                .map(|k| {
                    let l0 = lambdas[k];
                    let mut u = Complex64::ZERO;
                    let mut out = Vec::with_capacity(t_grid.len());
                    let mut next_out = 0usize;
                    let mut t_prev = 0.0f64;
                    if !t_grid.is_empty() && t_grid[0] <= 1e-300 {
                        out.push(Complex64::ZERO);
                        next_out = 1;
                    }
                    for &t in &events {
                        if t <= t_prev {
                            continue;
                        }
                        let h = t - t_prev;
                        let l = l0 + shift;
                        // Linear data on [t_prev, t]: alpha + beta tau.
                        let (i, theta) = bracket(s_grid, t_prev);
                        let fa = rows[i][k] * (1.0 - theta) + rows[i + 1][k] * theta;
                        let slope = (rows[i + 1][k] - rows[i][k]) / (s_grid[i + 1] - s_grid[i]);
                        u = u * (-l * h).exp()
                            + fa * h * psi1(l * h)
                            + slope * h * h * psi2(l * h);
                        t_prev = t;
                        while next_out < t_grid.len() && (t_grid[next_out] - t).abs() <= 1e-12 * t.max(1.0)
                        {
                            out.push(u);
                            next_out += 1;
                        }
                    }
                    debug_assert_eq!(out.len(), t_grid.len());
                    out
                })
                .collect();
            (0..t_grid.len())
                .map(|j| per_mode.iter().map(|series| series[j]).collect())
                .collect()
        }
    }
}

fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().filter(|&t| t > 0.0).collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * x.max(1.0));
    all
}

fn one_step_states(
    lambdas: &[f64],
    f: &Forcing,
    shift: f64,
    t_grid: &[f64],
    crank: bool,
) -> Vec<Vec<Complex64>> {
    let h = t_grid[1] - t_grid[0];
    let rows: Vec<Vec<Complex64>> = t_grid.iter().map(|&t| f.row_at(t)).collect();
    let n = lambdas.len();
    let mut u = vec![Complex64::ZERO; n];
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(u.clone());
    for j in 1..t_grid.len() {
        let mut next = vec![Complex64::ZERO; n];
        for k in 0..n {
            let l = lambdas[k] + shift;
            next[k] = if crank {
                let fbar = (rows[j - 1][k] + rows[j][k]) * 0.5;
                (u[k] * (1.0 - 0.5 * h * l) + fbar * h) / (1.0 + 0.5 * h * l)
            } else {
                (u[k] + rows[j][k] * h) / (1.0 + h * l)
            };
        }
        out.push(next.clone());
        u = next;
    }
    out
}

fn solve_shifted_problem(
    spec: &SlipStokesSpectrum,
    f: &Forcing,
    scheme: Scheme,
    steps: usize,
    shift: f64,
) -> Result<Trajectory> {
    f.validate(spec.n_modes())?;
    if steps < 8 {
        return Err(Error::Domain(format!("need at least 8 time steps, got {steps}")));
    }
    let horizon = f.horizon();
    let t_grid: Vec<f64> =
        (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect();
    let lambdas: Vec<f64> = spec.modes().iter().map(|m| m.eigenvalue).collect();

    let u = match scheme {
        Scheme::DuhamelExact => duhamel_states(&lambdas, f, shift, &t_grid),
        Scheme::ImplicitEuler => one_step_states(&lambdas, f, shift, &t_grid, false),
        Scheme::CrankNicolson => one_step_states(&lambdas, f, shift, &t_grid, true),
    };
    let pf: Vec<Vec<Complex64>> = t_grid.iter().map(|&t| f.row_at(t)).collect();
    let au: Vec<Vec<Complex64>> = u
        .iter()
        .map(|row| {
            row.iter()
                .zip(lambdas.iter())
                .map(|(c, &l)| c * (l + shift))
                .collect()
        })
        .collect();
    let du: Vec<Vec<Complex64>> = pf
        .iter()
        .zip(au.iter())
        .map(|(frow, arow)| frow.iter().zip(arow.iter()).map(|(a, b)| a - b).collect())
        .collect();
    let under_resolved = match (scheme, f) {
        (Scheme::DuhamelExact, _) => false,
        (_, Forcing::Sampled { t_grid: sg, .. }) => sg.len() - 1 > steps,
        _ => false,
    };
    Ok(Trajectory {
        key: spec.key(),
        t_grid,
        u,
        du,
        au,
        pf,
        pressure: None,
        scheme,
        steps,
        under_resolved,
    })
}

/// Solve `u' + Au = f`, `u(0) = 0` for a solenoidal modal forcing.
pub fn solve_inhomogeneous(
    spec: &SlipStokesSpectrum,
    f: &Forcing,
    scheme: Scheme,
    steps: usize,
) -> Result<Trajectory> {
    solve_shifted_problem(spec, f, scheme, steps, 0.0)
}

/// Raw grid forcing after ingestion: solenoidal modal samples plus the
/// Neumann potential of the gradient part, `f = Pf + grad chi`.
#[derive(Debug, Clone)]
pub struct SplitForcing {
    pub t_grid: Vec<f64>,
    pub horizon: f64,
    pub solenoidal: Forcing,
    pub potentials: Vec<ScalarPotential>,
    pub raw: Vec<GridField>,
    /// Relative content outside span + gradient, per sample.
    pub split_residuals: Vec<f64>,
}

/// Helmholtz-split every sample of a raw (possibly non-solenoidal) forcing.
pub fn ingest_raw(
    spec: &SlipStokesSpectrum,
    t_grid: &[f64],
    fields: &[GridField],
    horizon: f64,
) -> Result<SplitForcing> {
    if t_grid.len() != fields.len() || t_grid.len() < 2 {
        return Err(Error::Domain(
            "raw forcing needs matching times and fields (>= 2 samples)".into(),
        ));
    }
    let mut rows = Vec::with_capacity(fields.len());
    let mut potentials = Vec::with_capacity(fields.len());
    let mut split_residuals = Vec::with_capacity(fields.len());
    for field in fields {
        let split = spec.helmholtz_project(field)?;
        rows.push(split.solenoidal.coeffs);
        potentials.push(split.potential);
        split_residuals.push(split.residual_l2_rel);
    }
    let solenoidal =
        Forcing::Sampled { t_grid: t_grid.to_vec(), rows, horizon };
    solenoidal.validate(spec.n_modes())?;
    Ok(SplitForcing {
        t_grid: t_grid.to_vec(),
        horizon,
        solenoidal,
        potentials,
        raw: fields.to_vec(),
        split_residuals,
    })
}

/// Potential coefficients linearly interpolated at `t`.
fn potential_at(sf: &SplitForcing, t: f64) -> ScalarPotential {
    let (i, theta) = bracket(&sf.t_grid, t);
    let a = &sf.potentials[i];
    let b = &sf.potentials[i + 1];
    let coeffs = a
        .coeffs
        .iter()
        .zip(b.coeffs.iter())
        .map(|(x, y)| x * (1.0 - theta) + y * theta)
        .collect();
    ScalarPotential { grid: a.grid, k_max: a.k_max, patterns: a.patterns.clone(), coeffs }
}

/// Solve from a split raw forcing; the trajectory carries the pressure
/// potential `pi(t) = chi(t)` at every grid time.
pub fn solve_raw(
    spec: &SlipStokesSpectrum,
    sf: &SplitForcing,
    scheme: Scheme,
    steps: usize,
) -> Result<Trajectory> {
    let mut traj = solve_inhomogeneous(spec, &sf.solenoidal, scheme, steps)?;
    let pressure = traj.t_grid.iter().map(|&t| potential_at(sf, t)).collect();
    traj.pressure = Some(pressure);
    Ok(traj)
}

/// One pressure bound sample: `||pi||_{W^{1,p}} <= C (||u'||_p + ||f||_p)`.
#[derive(Debug, Clone, Serialize)]
pub struct PressureSample {
    pub t: f64,
    pub w1p_norm: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PressureReport {
    pub samples: Vec<PressureSample>,
    /// Measured constant: max of `w1p_norm / rhs` over nonzero samples.
    pub constant: f64,
}

/// Recover the pressure series from a raw forcing and verify the
/// first-order bound pointwise in time.
pub fn pressure_recover(
    spec: &SlipStokesSpectrum,
    sf: &SplitForcing,
    traj: &Trajectory,
    p: f64,
) -> Result<PressureReport> {
    crate::field::check_exponent(p)?;
    if traj.key != spec.key() {
        return Err(Error::GridMismatch("trajectory belongs to a different spectrum".into()));
    }
    let mut samples = Vec::with_capacity(traj.t_grid.len());
    let mut constant = 0.0f64;
    for (j, &t) in traj.t_grid.iter().enumerate() {
        let chi = potential_at(sf, t);
        let w1p = lp_norm(&spec.potential_values(&chi), p)?
            + lp_norm(&spec.potential_gradient(&chi), p)?;
        let du_norm = modal_lp(spec, &traj.du[j], 0, p)?;
        let (i, theta) = bracket(&sf.t_grid, t);
        let mut raw_t = sf.raw[i].scaled(Complex64::new(1.0 - theta, 0.0));
        raw_t.axpy(Complex64::new(theta, 0.0), &sf.raw[i + 1]);
        let rhs = du_norm + lp_norm(&raw_t, p)?;
        if rhs > 0.0 {
            constant = constant.max(w1p / rhs);
        }
        samples.push(PressureSample { t, w1p_norm: w1p, rhs });
    }
    Ok(PressureReport { samples, constant })
}

/// Norm scale for the regularity ratio: plain `L^p`, or the dual scales
/// weighted by `(I + A)^{-1/2}` and `(I + A)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularityScale {
    Strong,
    Weak,
    VeryWeak,
}

impl RegularityScale {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Strong => "strong",
            Self::Weak => "weak",
            Self::VeryWeak => "very_weak",
        }
    }

    fn theta(&self) -> i32 {
        match self {
            Self::Strong => 0,
            Self::Weak => 1,
            Self::VeryWeak => 2,
        }
    }
}

/// `||(I+A)^{-theta/2} v||_p` from modal coefficients.
fn modal_lp(spec: &SlipStokesSpectrum, row: &[Complex64], theta: i32, p: f64) -> Result<f64> {
    let weighted: Vec<Complex64> = spec
        .modes()
        .iter()
        .zip(row.iter())
        .map(|(m, c)| c * (1.0 + m.eigenvalue).powf(-theta as f64 / 2.0))
        .collect();
    if p == 2.0 {
        return Ok(weighted.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
    }
    let field = spec.reconstruct(&ModalField { key: spec.key(), coeffs: weighted })?;
    lp_norm(&field, p)
}

/// `||(1 + Neumann eigenvalue)^{order/2} chi||_p` for a potential; the
/// scalar counterpart of the fractional scales.
fn potential_lp(
    spec: &SlipStokesSpectrum,
    chi: &ScalarPotential,
    order: i32,
    p: f64,
) -> Result<f64> {
    let q = spec.q();
    let weighted = ScalarPotential {
        grid: chi.grid,
        k_max: chi.k_max,
        patterns: chi.patterns.clone(),
        coeffs: chi
            .patterns
            .iter()
            .zip(chi.coeffs.iter())
            .map(|(kv, c)| {
                c * (1.0 + q * q * kv.norm_sqr() as f64).powf(order as f64 / 2.0)
            })
            .collect(),
    };
    lp_norm(&spec.potential_values(&weighted), p)
}

/// Pressure contribution to the numerator at each scale: `W^{1,p}` for
/// strong, quotient `L^p` for weak, one order down for very weak.
fn pressure_term(
    spec: &SlipStokesSpectrum,
    chi: &ScalarPotential,
    scale: RegularityScale,
    p: f64,
) -> Result<f64> {
    match scale {
        RegularityScale::Strong => Ok(lp_norm(&spec.potential_values(chi), p)?
            + lp_norm(&spec.potential_gradient(chi), p)?),
        RegularityScale::Weak => lp_norm(&spec.potential_values(chi), p),
        RegularityScale::VeryWeak => potential_lp(spec, chi, -1, p),
    }
}

/// Gradient-part contribution to the denominator, one derivative above the
/// numerator's pressure term (the source `grad chi` is part of `f`).
fn forcing_gradient_term(
    spec: &SlipStokesSpectrum,
    chi: &ScalarPotential,
    scale: RegularityScale,
    p: f64,
) -> Result<f64> {
    match scale {
        RegularityScale::Strong => lp_norm(&spec.potential_gradient(chi), p),
        RegularityScale::Weak => lp_norm(&spec.potential_values(chi), p),
        RegularityScale::VeryWeak => potential_lp(spec, chi, -1, p),
    }
}

fn trapezoid_q(t: &[f64], v: &[f64], q: f64) -> f64 {
    let mut acc = 0.0;
    for j in 1..t.len() {
        acc += 0.5 * (v[j - 1].powf(q) + v[j].powf(q)) * (t[j] - t[j - 1]);
    }
    acc
}

/// Maximal-regularity ratio
/// `int (||u'||^q + ||Au||^q + pi-term^q) dt / int ||f||^q dt`, every norm
/// taken at the selected scale.
pub fn maxreg_ratio(
    spec: &SlipStokesSpectrum,
    traj: &Trajectory,
    p: f64,
    q: f64,
    scale: RegularityScale,
) -> Result<f64> {
    crate::field::check_exponent(p)?;
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::Domain(format!("time exponent must lie in (1, inf), got {q}")));
    }
    if traj.key != spec.key() {
        return Err(Error::GridMismatch("trajectory belongs to a different spectrum".into()));
    }
    let theta = scale.theta();
    let nt = traj.t_grid.len();
    let rows: Vec<(f64, f64)> = (0..nt)
        .into_par_iter()
        .map(|j| -> Result<(f64, f64)> {
            let du = modal_lp(spec, &traj.du[j], theta, p)?;
            let au = modal_lp(spec, &traj.au[j], theta, p)?;
            let pf = modal_lp(spec, &traj.pf[j], theta, p)?;
            let (pi_term, grad_term) = match &traj.pressure {
                Some(series) => (
                    pressure_term(spec, &series[j], scale, p)?,
                    forcing_gradient_term(spec, &series[j], scale, p)?,
                ),
                None => (0.0, 0.0),
            };
            Ok((
                du.powf(q) + au.powf(q) + pi_term.powf(q),
                (pf + grad_term).powf(q),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let num =
        trapezoid_q(&traj.t_grid, &rows.iter().map(|r| r.0.powf(1.0 / q)).collect::<Vec<_>>(), q);
    let den =
        trapezoid_q(&traj.t_grid, &rows.iter().map(|r| r.1.powf(1.0 / q)).collect::<Vec<_>>(), q);
    if den <= 0.0 {
        return Err(Error::Domain("zero forcing leaves the ratio undefined".into()));
    }
    Ok(num / den)
}

/// Energy-oracle check `int ||Au||_2^2 dt <= int ||Pf||_2^2 dt` with the
/// quadrature matched to the scheme: right-endpoint sums for the implicit
/// Euler inequality, interval midpoints for Crank-Nicolson, and a
/// refined-grid trapezoid for exact Duhamel states.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn energy_check(
    spec: &SlipStokesSpectrum,
    traj: &Trajectory,
    f: &Forcing,
) -> Result<EnergyCheck> {
    if traj.key != spec.key() {
        return Err(Error::GridMismatch("trajectory belongs to a different spectrum".into()));
    }
    let l2sq = |row: &[Complex64]| row.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let (lhs, rhs, slack) = match traj.scheme {
        Scheme::ImplicitEuler => {
            let h = traj.t_grid[1] - traj.t_grid[0];
            let lhs: f64 = traj.au[1..].iter().map(|r| l2sq(r)).sum::<f64>() * h;
            let rhs: f64 = traj.pf[1..].iter().map(|r| l2sq(r)).sum::<f64>() * h;
            (lhs, rhs, 1e-12 * rhs)
        }
        Scheme::CrankNicolson => {
            let h = traj.t_grid[1] - traj.t_grid[0];
            let mid = |rows: &Vec<Vec<Complex64>>| -> f64 {
                (1..rows.len())
                    .map(|j| {
                        rows[j - 1]
                            .iter()
                            .zip(rows[j].iter())
                            .map(|(a, b)| ((a + b) * 0.5).norm_sqr())
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    * h
            };
            (mid(&traj.au), mid(&traj.pf), 1e-12 * mid(&traj.pf))
        }
        Scheme::DuhamelExact => {
            // Exact states are available at any time: refine 8x.
            let fine = solve_inhomogeneous(spec, f, Scheme::DuhamelExact, traj.steps * 8)?;
            let au: Vec<f64> = fine.au.iter().map(|r| l2sq(r).sqrt()).collect();
            let pf: Vec<f64> = fine.pf.iter().map(|r| l2sq(r).sqrt()).collect();
            let lhs = trapezoid_q(&fine.t_grid, &au, 2.0);
            let rhs = trapezoid_q(&fine.t_grid, &pf, 2.0);
            (lhs, rhs, 1e-10 * rhs)
        }
    };
    Ok(EnergyCheck { lhs, rhs, slack, pass: lhs <= rhs + slack })
}

/// Relative defect of the shift identity: solving
/// `v' + (mu^{-2} I + A) v = e^{-t/mu^2} f` must reproduce
/// `e^{-t/mu^2} u(t)` from the unshifted solve.
pub fn mu_shift_check(
    spec: &SlipStokesSpectrum,
    f: &Forcing,
    mu: f64,
    scheme: Scheme,
    steps: usize,
) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("shift parameter must be positive, got {mu}")));
    }
    let shift = 1.0 / (mu * mu);
    let damped = f.damped(shift)?;
    let base = solve_shifted_problem(spec, f, scheme, steps, 0.0)?;
    let shifted = solve_shifted_problem(spec, &damped, scheme, steps, shift)?;
    let mut worst = 0.0f64;
    let mut peak = 0.0f64;
    for (j, &t) in base.t_grid.iter().enumerate() {
        let damp = (-shift * t).exp();
        let mut diff = 0.0;
        let mut refn = 0.0;
        for (v, u) in shifted.u[j].iter().zip(base.u[j].iter()) {
            diff += (v - u * damp).norm_sqr();
            refn += (u * damp).norm_sqr();
        }
        worst = worst.max(diff.sqrt());
        peak = peak.max(refn.sqrt());
    }
    if peak == 0.0 {
        return Ok(0.0);
    }
    Ok(worst / peak)
}

/// Random-forcing law: independent AR(1) time series per mode with
/// eigenvalue-power weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingLaw {
    /// Lag-one correlation of each modal time series.
    pub ar_coeff: f64,
    /// Mode weight `lambda^{weight_exp}`.
    pub weight_exp: f64,
    /// Sample count over the horizon (stationary start).
    pub samples: usize,
}

impl Default for ForcingLaw {
    fn default() -> Self {
        Self { ar_coeff: 0.5, weight_exp: -0.25, samples: 33 }
    }
}

/// Draw one sampled forcing from the law.
pub fn random_forcing(
    spec: &SlipStokesSpectrum,
    law: &ForcingLaw,
    horizon: f64,
    seed: u64,
) -> Result<Forcing> {
    if law.samples < 2 {
        return Err(Error::InsufficientSamples("forcing law needs >= 2 samples".into()));
    }
    if !(law.ar_coeff.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "AR(1) coefficient must satisfy |rho| < 1, got {}",
            law.ar_coeff
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = law.samples;
    let t_grid: Vec<f64> =
        (0..nt).map(|j| horizon * j as f64 / (nt - 1) as f64).collect();
    let rho = law.ar_coeff;
    let innov = (1.0 - rho * rho).sqrt();
    let n = spec.n_modes();
    let mut rows = vec![vec![Complex64::ZERO; n]; nt];
    for (k, mode) in spec.modes().iter().enumerate() {
        let w = mode.eigenvalue.powf(law.weight_exp);
        let mut x = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        rows[0][k] = x * w;
        for row in rows.iter_mut().skip(1) {
            let xi =
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            x = x * rho + xi * innov;
            row[k] = x * w;
        }
    }
    Ok(Forcing::Sampled { t_grid, rows, horizon })
}

/// One spatial/temporal resolution for the ensemble sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Resolution {
    pub k_max: usize,
    pub m: usize,
    pub steps: usize,
}

/// Ensemble configuration for the constant-stability measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dim: usize,
    pub len: f64,
    pub count: usize,
    pub seed: u64,
    pub law: ForcingLaw,
    pub horizon: f64,
    pub scheme: Scheme,
    pub scale: RegularityScale,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionReport {
    pub resolution: Resolution,
    pub ratios: Vec<f64>,
    pub ensemble_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxRegReport {
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
    pub scale: RegularityScale,
    pub scheme: Scheme,
    pub count: usize,
    pub seed: u64,
    pub per_resolution: Vec<ResolutionReport>,
    /// Ensemble max grew by more than 2x between consecutive resolutions.
    pub growth_flagged: bool,
}

/// Measure ensemble-max regularity ratios across resolutions.
pub fn ensemble_report(es: &EnsembleSpec, resolutions: &[Resolution]) -> Result<MaxRegReport> {
    if es.count < 50 {
        return Err(Error::InsufficientSamples(format!(
            "ensemble needs at least 50 forcings, got {}",
            es.count
        )));
    }
    if resolutions.is_empty() {
        return Err(Error::Domain("at least one resolution is required".into()));
    }
    let mut per_resolution = Vec::with_capacity(resolutions.len());
    for (ri, res) in resolutions.iter().enumerate() {
        let spec = crate::operator::build_box_stokes(es.dim, res.k_max, res.m, es.len)?;
        let ratios: Vec<f64> = (0..es.count)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let member_seed =
                    subseed(es.seed, "maxreg-member", (ri as u64) << 32 | i as u64);
                let f = random_forcing(&spec, &es.law, es.horizon, member_seed)?;
                let traj = solve_inhomogeneous(&spec, &f, es.scheme, res.steps)?;
                maxreg_ratio(&spec, &traj, es.p, es.q, es.scale)
            })
            .collect::<Result<Vec<f64>>>()?;
        for &r in &ratios {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Domain(format!("non-finite ensemble ratio {r}")));
            }
        }
        let ensemble_max = ratios.iter().copied().fold(0.0, f64::max);
        per_resolution.push(ResolutionReport { resolution: *res, ratios, ensemble_max });
    }
    let growth_flagged = per_resolution
        .windows(2)
        .any(|w| w[1].ensemble_max > 2.0 * w[0].ensemble_max);
    Ok(MaxRegReport {
        p: es.p,
        q: es.q,
        horizon: es.horizon,
        scale: es.scale,
        scheme: es.scheme,
        count: es.count,
        seed: es.seed,
        per_resolution,
        growth_flagged,
    })
}
