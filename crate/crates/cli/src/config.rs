//! Versioned experiment configuration: strict JSON schema, validation, and
//! canonical hashing.  Every struct denies unknown fields so a typo fails
//! loudly instead of silently running with defaults.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stokeslab_core::maxreg::{ForcingLaw, RegularityScale, Resolution, Scheme};

pub const CONFIG_VERSION: u32 = 1;
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    pub kind: ExperimentKind,
    pub operator: OperatorSpec,
    /// Master seed for every randomized piece of the experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory; overridden by `--out`, falls back to
    /// `STOKESLAB_OUT`, then `./stokeslab-out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Primary Lebesgue exponent (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Secondary exponent for two-exponent experiments (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Exponent sweep for `powers`; defaults to `[p]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<f64>>,
    /// Symmetric imaginary-exponent grid for envelope fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<SGridSpec>,
    /// Complex exponents for oracle comparisons and scaling checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_list: Option<Vec<ComplexSpec>>,
    /// Fractional orders for the embedding experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_list: Option<Vec<f64>>,
    /// Spectral shifts for `powers` envelope fits (default `[0]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    /// Random starts per norm estimate in `powers` fits (default 20);
    /// smaller values trade accuracy for speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Manual contour overrides; omitted fields keep the derived values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourSpec>,
    /// Probe field ensemble for `sqrt-domain` and `embedding`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    /// Box resolution sweep for `sqrt-domain`, `embedding`, and `maxreg`
    /// (`steps` is required only by `maxreg`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolutions: Option<Vec<ResolutionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxreg: Option<MaxregSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_shift: Option<MuShiftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ProbeSector,
    Powers,
    SqrtDomain,
    Embedding,
    Semigroup,
    Maxreg,
    MuShift,
    Scaling,
}

impl ExperimentKind {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::ProbeSector => "probe-sector",
            Self::Powers => "powers",
            Self::SqrtDomain => "sqrt-domain",
            Self::Embedding => "embedding",
            Self::Semigroup => "semigroup",
            Self::Maxreg => "maxreg",
            Self::MuShift => "mu-shift",
            Self::Scaling => "scaling",
        }
    }
}

/// Operator under study: exact box diagonalization or a synthetic dense
/// sectorial matrix with a prescribed spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Box { dim: usize, k_max: usize, m: usize, len: f64 },
    Synthetic { n: usize, law: SpectrumLawSpec, conditioning: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumLawSpec {
    /// Eigenvalues given one by one.
    Explicit { eigenvalues: Vec<ComplexSpec> },
    /// Random moduli in `[modulus_lo, modulus_hi]`, arguments up to
    /// `max_arg`; `zero_mode` prepends an exact zero eigenvalue.
    Sector { modulus_lo: f64, modulus_hi: f64, max_arg: f64, zero_mode: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexSpec {
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// `2 * half_count + 1` symmetric points on `[-s_max, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SGridSpec {
    pub s_max: f64,
    pub half_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<QuadratureSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureSpec {
    DoubleExponential,
    LogTrapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub radii: RadiiSpec,
    /// Probe arguments in `[pi/2, pi]`; defaults to the built-in ray set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    /// Spectral shift `s > 0`: the probe targets `(lambda + s + A)^{-1}`.
    /// Defaults to 1; REQUIRED explicitly for zero-mode synthetic spectra.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    /// Random starts per norm estimate (default 20).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_lambda: Option<SmallLambdaSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallLambdaSpec {
    pub alpha: f64,
    pub count: usize,
    /// Multiplier applied to the measured kappa before the check
    /// (default 1.05, absorbing estimator slack).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_headroom: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub members: Vec<EnsembleLawSpec>,
    /// Adds the lowest single eigenmode as a deterministic member.
    #[serde(default)]
    pub include_lowest_mode: bool,
}

/// One random sub-ensemble: `count` fields with coefficient weights
/// `lambda^{weight_exp}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleLawSpec {
    pub count: usize,
    pub seed: u64,
    pub weight_exp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionSpec {
    pub k_max: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSpec {
    pub data: DataSpec,
    pub quantities: Vec<QuantitySpec>,
    /// Points in the padded log-spaced fit window (default 12).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_count: Option<usize>,
    /// Explicit fit times; replaces the derived window when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Also fit the exponential decay rate (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_decay: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_count: Option<usize>,
}

/// Initial data: random-phase broadband field, or the coherent point
/// packet that realizes the `p -> q` smoothing jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Broadband {
        /// Coefficient decay `lambda^{-beta}`; defaults to `d/4`, which is
        /// flat against the spectral density and leaves slopes unbiased.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Peaked {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        /// Velocity component carrying the packet.
        dir: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantitySpec {
    Solution,
    Strain,
    TimeDerivative,
    /// `||d_t^m A^n u||`.
    Mixed { m: u32, n: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxregSpec {
    pub law: ForcingLawSpec,
    /// Forcings per resolution (the estimator needs at least 50).
    pub count: usize,
    pub horizon: f64,
    pub scheme: SchemeSpec,
    pub scale: ScaleSpec,
    /// Random forcings put through the energy identity per scheme
    /// (default 4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_spot_checks: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingLawSpec {
    pub ar_coeff: f64,
    pub weight_exp: f64,
    pub samples: usize,
}

impl ForcingLawSpec {
    pub fn to_core(self) -> ForcingLaw {
        ForcingLaw {
            ar_coeff: self.ar_coeff,
            weight_exp: self.weight_exp,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    DuhamelExact,
    ImplicitEuler,
    CrankNicolson,
}

impl SchemeSpec {
    pub fn to_core(self) -> Scheme {
        match self {
            Self::DuhamelExact => Scheme::DuhamelExact,
            Self::ImplicitEuler => Scheme::ImplicitEuler,
            Self::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleSpec {
    Strong,
    Weak,
    VeryWeak,
}

impl ScaleSpec {
    pub fn to_core(self) -> RegularityScale {
        match self {
            Self::Strong => RegularityScale::Strong,
            Self::Weak => RegularityScale::Weak,
            Self::VeryWeak => RegularityScale::VeryWeak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuShiftSpec {
    pub mu_list: Vec<f64>,
    pub scheme: SchemeSpec,
    pub steps: usize,
    pub horizon: f64,
    /// Random exponential terms in the analytic test forcing (default 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
    /// Scale of the random term rates (default 0.5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub mu_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteSpec {
    Oracle,
    Contour,
}

// ------------------------------------------------------------- defaults

pub const DEFAULT_SEED: u64 = 1729;

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(2.0)
    }

    pub fn q(&self) -> f64 {
        self.q.unwrap_or(2.0)
    }

    pub fn p_list(&self) -> Vec<f64> {
        self.p_list.clone().unwrap_or_else(|| vec![self.p()])
    }

    pub fn s_grid_spec(&self) -> SGridSpec {
        self.s_grid.unwrap_or(SGridSpec { s_max: 8.0, half_count: 8 })
    }

    pub fn z_list(&self) -> Vec<Complex64> {
        match &self.z_list {
            Some(zs) => zs.iter().map(|z| z.to_complex()).collect(),
            None => vec![
                Complex64::new(-0.5, 0.0),
                Complex64::new(-0.25, 0.0),
                Complex64::new(-0.75, 0.0),
                Complex64::new(-0.3, 2.0),
                Complex64::new(-0.3, -2.0),
            ],
        }
    }

    pub fn alpha_list(&self) -> Vec<f64> {
        self.alpha_list.clone().unwrap_or_else(|| vec![0.5])
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(|| vec![0.0])
    }

    /// Resolution sweep, defaulting to the configured operator itself.
    pub fn resolutions(&self) -> Vec<ResolutionSpec> {
        if let Some(rs) = &self.resolutions {
            return rs.clone();
        }
        match &self.operator {
            OperatorSpec::Box { k_max, m, .. } => {
                vec![ResolutionSpec { k_max: *k_max, m: *m, steps: None }]
            }
            OperatorSpec::Synthetic { .. } => Vec::new(),
        }
    }

    pub fn maxreg_resolutions(&self) -> Vec<Resolution> {
        self.resolutions()
            .iter()
            .map(|r| Resolution { k_max: r.k_max, m: r.m, steps: r.steps.unwrap_or(24) })
            .collect()
    }
}

// ----------------------------------------------------------- validation

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn exponent(name: &str, v: f64) -> Result<(), String> {
    if v > 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must lie in (1, infinity), got {v}"))
    }
}

fn box_only(cfg: &ExperimentConfig) -> Result<(usize, f64), String> {
    match &cfg.operator {
        OperatorSpec::Box { dim, len, .. } => Ok((*dim, *len)),
        OperatorSpec::Synthetic { .. } => Err(format!(
            "experiment '{}' needs the exact box diagonalization; synthetic operators have no grid",
            cfg.kind.tag()
        )),
    }
}

fn has_zero_mode(cfg: &ExperimentConfig) -> bool {
    match &cfg.operator {
        OperatorSpec::Box { .. } => false,
        OperatorSpec::Synthetic { law, .. } => match law {
            SpectrumLawSpec::Explicit { eigenvalues } => {
                eigenvalues.iter().any(|z| z.re == 0.0 && z.im == 0.0)
            }
            SpectrumLawSpec::Sector { zero_mode, .. } => *zero_mode,
        },
    }
}

/// Structural validation; numerical preconditions are re-checked by the
/// library operations themselves.
pub fn validate(cfg: &ExperimentConfig) -> Result<(), String> {
    if cfg.version != CONFIG_VERSION {
        return Err(format!(
            "unsupported config version {} (this binary speaks version {CONFIG_VERSION})",
            cfg.version
        ));
    }
    match &cfg.operator {
        OperatorSpec::Box { dim, k_max, m, len } => {
            if !(*dim == 2 || *dim == 3) {
                return Err(format!("operator.dim must be 2 or 3, got {dim}"));
            }
            if *k_max == 0 {
                return Err("operator.k_max must be at least 1".into());
            }
            if *m < 2 * *k_max {
                return Err(format!(
                    "operator.m = {m} cannot resolve wave numbers up to {k_max}; need m >= 2*k_max"
                ));
            }
            positive("operator.len", *len)?;
        }
        OperatorSpec::Synthetic { n, law, conditioning, .. } => {
            if *n == 0 {
                return Err("operator.n must be at least 1".into());
            }
            if !(*conditioning >= 1.0 && conditioning.is_finite()) {
                return Err(format!(
                    "operator.conditioning must be >= 1, got {conditioning}"
                ));
            }
            match law {
                SpectrumLawSpec::Explicit { eigenvalues } => {
                    if eigenvalues.len() != *n {
                        return Err(format!(
                            "explicit spectrum lists {} eigenvalues for an operator of dimension {n}",
                            eigenvalues.len()
                        ));
                    }
                    if eigenvalues.iter().any(|z| z.re < 0.0) {
                        return Err("explicit eigenvalues must have nonnegative real part".into());
                    }
                }
                SpectrumLawSpec::Sector { modulus_lo, modulus_hi, max_arg, .. } => {
                    positive("law.modulus_lo", *modulus_lo)?;
                    if !(modulus_hi >= modulus_lo) {
                        return Err("law.modulus_hi must be >= law.modulus_lo".into());
                    }
                    if !(*max_arg >= 0.0 && *max_arg < std::f64::consts::FRAC_PI_2) {
                        return Err(format!(
                            "law.max_arg must lie in [0, pi/2), got {max_arg}"
                        ));
                    }
                }
            }
        }
    }
    exponent("p", cfg.p())?;
    exponent("q", cfg.q())?;
    for p in cfg.p_list() {
        exponent("p_list entry", p)?;
    }
    if let Some(sg) = &cfg.s_grid {
        positive("s_grid.s_max", sg.s_max)?;
        if sg.s_max < 8.0 {
            return Err(format!(
                "s_grid.s_max must be at least 8 so the envelope fit sees a full decade of oscillation, got {}",
                sg.s_max
            ));
        }
        if sg.half_count == 0 {
            return Err("s_grid.half_count must be at least 1".into());
        }
    }
    if let Some(zs) = &cfg.z_list {
        if zs.is_empty() {
            return Err("z_list must not be empty when present".into());
        }
    }
    if let Some(al) = &cfg.alpha_list {
        if al.is_empty() {
            return Err("alpha_list must not be empty when present".into());
        }
    }
    if cfg.trials == Some(0) {
        return Err("trials must be at least 1".into());
    }
    if let Some(lg) = &cfg.lambda_grid {
        if lg.is_empty() {
            return Err("lambda_grid must not be empty when present".into());
        }
        if lg.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err("lambda_grid entries must be nonnegative and finite".into());
        }
    }
    if let Some(rs) = &cfg.resolutions {
        if rs.is_empty() {
            return Err("resolutions must not be empty when present".into());
        }
        for r in rs {
            if r.k_max == 0 || r.m < 2 * r.k_max {
                return Err(format!(
                    "resolution (k_max={}, m={}) needs k_max >= 1 and m >= 2*k_max",
                    r.k_max, r.m
                ));
            }
        }
    }

    match cfg.kind {
        ExperimentKind::ProbeSector => {
            let probe = cfg
                .probe
                .as_ref()
                .ok_or("probe-sector needs a 'probe' section with the radius grid")?;
            positive("probe.radii.lo", probe.radii.lo)?;
            if !(probe.radii.hi > probe.radii.lo) {
                return Err("probe.radii.hi must exceed probe.radii.lo".into());
            }
            if probe.radii.count < 2 {
                return Err("probe.radii.count must be at least 2".into());
            }
            match probe.shift {
                Some(s) => positive("probe.shift", s)?,
                None => {
                    if has_zero_mode(cfg) {
                        return Err(
                            "a zero-mode spectrum makes the unshifted operator singular: \
                             probe-sector requires an explicit spectral shift lambda > 0 \
                             (set probe.shift)"
                                .into(),
                        );
                    }
                }
            }
            if let Some(sl) = &probe.small_lambda {
                if !(sl.alpha > 0.0 && sl.alpha < 1.0) {
                    return Err(format!(
                        "probe.small_lambda.alpha must lie in (0, 1), got {}",
                        sl.alpha
                    ));
                }
                if sl.count == 0 {
                    return Err("probe.small_lambda.count must be at least 1".into());
                }
            }
        }
        ExperimentKind::Powers => {
            if has_zero_mode(cfg) && cfg.lambda_grid().contains(&0.0) {
                return Err(
                    "a zero-mode spectrum needs strictly positive entries in lambda_grid \
                     (the unshifted power bound is singular)"
                        .into(),
                );
            }
        }
        ExperimentKind::SqrtDomain => {
            box_only(cfg)?;
            ensemble_required(cfg)?;
        }
        ExperimentKind::Embedding => {
            let (dim, _) = box_only(cfg)?;
            if dim != 3 {
                return Err("the embedding exponent relation is three-dimensional; use a 3D box".into());
            }
            ensemble_required(cfg)?;
            let p = cfg.p();
            for alpha in cfg.alpha_list() {
                if !(alpha > 0.0 && alpha < 3.0 / (2.0 * p)) {
                    return Err(format!(
                        "alpha = {alpha} must lie in (0, 3/(2p)) = (0, {}) for p = {p}",
                        3.0 / (2.0 * p)
                    ));
                }
            }
        }
        ExperimentKind::Semigroup => {
            box_only(cfg)?;
            let sg = cfg
                .semigroup
                .as_ref()
                .ok_or("semigroup needs a 'semigroup' section with data and quantities")?;
            if sg.quantities.is_empty() {
                return Err("semigroup.quantities must not be empty".into());
            }
            if let Some(tg) = &sg.t_grid {
                if tg.len() < 4 {
                    return Err("semigroup.t_grid needs at least 4 points for a slope fit".into());
                }
                if tg.windows(2).any(|w| w[1] <= w[0]) || tg[0] <= 0.0 {
                    return Err("semigroup.t_grid must be positive and strictly increasing".into());
                }
            }
            if let DataSpec::Peaked { dir, .. } = sg.data {
                let (dim, _) = box_only(cfg)?;
                if dir >= dim {
                    return Err(format!(
                        "semigroup.data.dir = {dir} is out of range for a {dim}D box"
                    ));
                }
            }
        }
        ExperimentKind::Maxreg => {
            box_only(cfg)?;
            let mr = cfg
                .maxreg
                .as_ref()
                .ok_or("maxreg needs a 'maxreg' section with law, count, horizon, scheme, scale")?;
            if mr.count < 50 {
                return Err(format!(
                    "maxreg.count = {} is below the 50-forcing floor of the ensemble estimator",
                    mr.count
                ));
            }
            positive("maxreg.horizon", mr.horizon)?;
            if !(mr.law.ar_coeff.abs() < 1.0) {
                return Err("maxreg.law.ar_coeff must satisfy |rho| < 1".into());
            }
            if mr.law.samples < 2 {
                return Err("maxreg.law.samples must be at least 2".into());
            }
            let rs = cfg.resolutions.as_ref().ok_or(
                "maxreg needs a top-level 'resolutions' list (k_max, m, steps per entry)",
            )?;
            for r in rs {
                if r.steps.is_none() {
                    return Err(format!(
                        "maxreg resolution (k_max={}, m={}) is missing 'steps'",
                        r.k_max, r.m
                    ));
                }
            }
        }
        ExperimentKind::MuShift => {
            box_only(cfg)?;
            let ms = cfg
                .mu_shift
                .as_ref()
                .ok_or("mu-shift needs a 'mu_shift' section with mu_list, scheme, steps, horizon")?;
            if ms.mu_list.is_empty() {
                return Err("mu_shift.mu_list must not be empty".into());
            }
            for mu in &ms.mu_list {
                positive("mu_shift.mu_list entry", *mu)?;
            }
            if ms.steps == 0 {
                return Err("mu_shift.steps must be at least 1".into());
            }
            positive("mu_shift.horizon", ms.horizon)?;
        }
        ExperimentKind::Scaling => {
            box_only(cfg)?;
            let sc = cfg
                .scaling
                .as_ref()
                .ok_or("scaling needs a 'scaling' section with mu_list")?;
            if sc.mu_list.is_empty() {
                return Err("scaling.mu_list must not be empty".into());
            }
            for mu in &sc.mu_list {
                if !(*mu >= 1.0 && mu.is_finite()) {
                    return Err(format!(
                        "scaling.mu_list entries must be >= 1 (dilation convention), got {mu}"
                    ));
                }
            }
        }
    }
    Ok(())
}

fn ensemble_required(cfg: &ExperimentConfig) -> Result<(), String> {
    let ens = cfg
        .ensemble
        .as_ref()
        .ok_or("this experiment needs an 'ensemble' section with probe-field members")?;
    if ens.members.is_empty() && !ens.include_lowest_mode {
        return Err("ensemble lists no members".into());
    }
    for m in &ens.members {
        if m.count == 0 {
            return Err("ensemble member counts must be at least 1".into());
        }
    }
    Ok(())
}

// -------------------------------------------------------------- hashing

/// Canonical hash of the effective configuration: SHA-256 over its
/// serialized JSON (struct field order is fixed, so the bytes are stable).
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serialization is infallible");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
