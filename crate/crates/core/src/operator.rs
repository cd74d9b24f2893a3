//! Exact spectral diagonalization of the Stokes operator with Navier slip
//! boundary conditions on the box `(0, L)^d`.
//!
//! On the box the slip eigenmodes make the pressure term vanish, so the
//! operator acts as the scalar multiplier `lambda_k = |k|^2 (pi/L)^2` on the
//! mode with wave vector `k`.  Component `i` of the mode is
//!
//! ```text
//! u_i(x) = a_i sin(k_i q x_i) prod_{j != i} cos(k_j q x_j),    q = pi / L,
//! ```
//!
//! with amplitude constraint `a . k = 0`.  The normal component vanishes at
//! every wall, the tangential strain vanishes at every wall, and the field is
//! exactly divergence free, so the mode lies in the domain of the operator
//! and `-P Laplace u = |k|^2 q^2 u` with no pressure correction.
//!
//! Wave vectors with fewer than two nonzero components in 2D (three or two in
//! 3D) admit no amplitude and emit no mode.  A wave vector with all
//! components nonzero in 3D admits a two-dimensional amplitude space.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{l2_norm, lp_norm, Grid, GridField};

/// Integer wave vector.  Unused trailing components are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct WaveVector {
    pub k: [usize; 3],
    pub dim: usize,
}

impl WaveVector {
    pub fn new(k: &[usize]) -> Self {
        let mut arr = [0usize; 3];
        arr[..k.len()].copy_from_slice(k);
        Self { k: arr, dim: k.len() }
    }

    /// Squared Euclidean length of the integer vector.
    pub fn norm_sqr(&self) -> usize {
        self.k.iter().map(|&c| c * c).sum()
    }

    pub fn max_comp(&self) -> usize {
        *self.k.iter().max().unwrap()
    }

    /// Axes with a nonzero component: only these carry a sine factor.
    pub fn active_axes(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.k[i] > 0).collect()
    }
}

/// One slip eigenmode: wave vector, unit amplitude with `a . k = 0`,
/// eigenvalue, and the constant normalizing the mode to unit discrete `L^2`
/// norm.
#[derive(Debug, Clone)]
pub struct SlipEigenmode {
    pub wavevector: WaveVector,
    pub amplitude: [f64; 3],
    pub eigenvalue: f64,
    pub norm_const: f64,
}

/// Key identifying the discretization a `ModalField` belongs to.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectrumKey {
    pub dim: usize,
    pub k_max: usize,
    pub m: usize,
    pub len: f64,
}

/// Coefficients aligned with the mode list of a `SlipStokesSpectrum`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalField {
    pub key: SpectrumKey,
    pub coeffs: Vec<Complex64>,
}

impl ModalField {
    pub fn zeros(spec: &SlipStokesSpectrum) -> Self {
        Self { key: spec.key(), coeffs: vec![Complex64::ZERO; spec.n_modes()] }
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn axpy(&mut self, alpha: Complex64, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a -= b;
        }
        out
    }
}

/// Scalar potential expanded over the discrete-orthonormal cosine patterns
/// `c_m(x) = prod_i cos(m_i q x_i)`, `m != 0`, `|m|_inf <= k_max`.
/// Evaluation goes through the spectrum that produced it (shared trig
/// tables); the pattern list is kept for alignment checks and serialization.
#[derive(Debug, Clone)]
pub struct ScalarPotential {
    pub grid: Grid,
    pub k_max: usize,
    pub patterns: Vec<WaveVector>,
    pub coeffs: Vec<Complex64>,
}

/// The diagonalized operator: mode list plus cached trig tables.
#[derive(Debug, Clone)]
pub struct SlipStokesSpectrum {
    dim: usize,
    k_max: usize,
    m: usize,
    len: f64,
    q: f64,
    modes: Vec<SlipEigenmode>,
    /// Cosine patterns (all `k != 0`, `|k|_inf <= k_max`) spanning the
    /// resolved gradient space, with their discrete norm constants.
    grad_patterns: Vec<WaveVector>,
    grad_pattern_norm: Vec<f64>,
    /// `sin(k q x_j)` and `cos(k q x_j)` for `k = 0..=k_max`, `j = 0..m`,
    /// flattened as `k * m + j`.
    sin_t: Vec<f64>,
    cos_t: Vec<f64>,
    /// Per-frequency sums `sum_j sin^2`, `sum_j cos^2` (exactly `m/2`, resp.
    /// `m` at `k = 0`, by midpoint-grid orthogonality).
    s_sum: Vec<f64>,
    c_sum: Vec<f64>,
}

/// Deterministic amplitude basis orthogonal to `k` on the active axes.
fn amplitudes_for(k: &WaveVector) -> Vec<[f64; 3]> {
    let active = k.active_axes();
    let dim = k.dim;
    let kf: Vec<f64> = (0..3).map(|i| k.k[i] as f64).collect();
    if dim == 2 {
        if active.len() < 2 {
            return Vec::new();
        }
        let norm = (kf[0] * kf[0] + kf[1] * kf[1]).sqrt();
        return vec![[kf[1] / norm, -kf[0] / norm, 0.0]];
    }
    match active.len() {
        3 => {
            let n12 = (kf[0] * kf[0] + kf[1] * kf[1]).sqrt();
            let a1 = [kf[1] / n12, -kf[0] / n12, 0.0];
            let kn = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
            let kh = [kf[0] / kn, kf[1] / kn, kf[2] / kn];
            let a2 = [
                kh[1] * a1[2] - kh[2] * a1[1],
                kh[2] * a1[0] - kh[0] * a1[2],
                kh[0] * a1[1] - kh[1] * a1[0],
            ];
            vec![a1, a2]
        }
        2 => {
            let (i, j) = (active[0], active[1]);
            let norm = (kf[i] * kf[i] + kf[j] * kf[j]).sqrt();
            let mut a = [0.0; 3];
            a[i] = kf[j] / norm;
            a[j] = -kf[i] / norm;
            vec![a]
        }
        _ => Vec::new(),
    }
}

/// Build the diagonalized slip Stokes operator on `(0, len)^dim` with all
/// modes `|k|_inf <= k_max`, discretized on `m` cells per axis.
pub fn build_box_stokes(dim: usize, k_max: usize, m: usize, len: f64) -> Result<SlipStokesSpectrum> {
    if k_max < 1 {
        return Err(Error::Domain(format!("mode cutoff must be >= 1, got {k_max}")));
    }
    let needed = 2 * k_max + 2;
    if m < needed {
        return Err(Error::Resolution { needed, got: m });
    }
    let grid = Grid::new(dim, m, len)?;
    let q = std::f64::consts::PI / len;

    let mut sin_t = vec![0.0; (k_max + 1) * m];
    let mut cos_t = vec![0.0; (k_max + 1) * m];
    let mut s_sum = vec![0.0; k_max + 1];
    let mut c_sum = vec![0.0; k_max + 1];
    for k in 0..=k_max {
        for j in 0..m {
            let arg = k as f64 * q * grid.axis_coord(j);
            let (s, c) = arg.sin_cos();
            sin_t[k * m + j] = s;
            cos_t[k * m + j] = c;
            s_sum[k] += s * s;
            c_sum[k] += c * c;
        }
    }

    let mut modes = Vec::new();
    let mut grad_patterns = Vec::new();
    let mut grad_pattern_norm = Vec::new();
    let w = grid.weight();
    let mut visit = |kv: WaveVector| {
        if kv.norm_sqr() == 0 {
            return;
        }
        // Cosine pattern norm: w * prod_i c_sum[k_i].
        let mut rho2 = w;
        for i in 0..dim {
            rho2 *= c_sum[kv.k[i]];
        }
        grad_patterns.push(kv);
        grad_pattern_norm.push(rho2.sqrt());
        for a in amplitudes_for(&kv) {
            // Mode norm: w * sum_i a_i^2 s_sum[k_i] prod_{j != i} c_sum[k_j].
            let mut nrm2 = 0.0;
            for i in 0..dim {
                if a[i] == 0.0 {
                    continue;
                }
                let mut term = a[i] * a[i] * s_sum[kv.k[i]];
                for j in 0..dim {
                    if j != i {
                        term *= c_sum[kv.k[j]];
                    }
                }
                nrm2 += term;
            }
            nrm2 *= w;
            modes.push(SlipEigenmode {
                wavevector: kv,
                amplitude: a,
                eigenvalue: kv.norm_sqr() as f64 * q * q,
                norm_const: 1.0 / nrm2.sqrt(),
            });
        }
    };
    if dim == 2 {
        for k1 in 0..=k_max {
            for k2 in 0..=k_max {
                visit(WaveVector::new(&[k1, k2]));
            }
        }
    } else {
        for k1 in 0..=k_max {
            for k2 in 0..=k_max {
                for k3 in 0..=k_max {
                    visit(WaveVector::new(&[k1, k2, k3]));
                }
            }
        }
    }

    Ok(SlipStokesSpectrum {
        dim,
        k_max,
        m,
        len,
        q,
        modes,
        grad_patterns,
        grad_pattern_norm,
        sin_t,
        cos_t,
        s_sum,
        c_sum,
    })
}

/// Result of the discrete Helmholtz split `f = P f + grad chi + residual`.
#[derive(Debug, Clone)]
pub struct HelmholtzSplit {
    pub solenoidal: ModalField,
    pub potential: ScalarPotential,
    pub potential_grid: GridField,
    pub residual: GridField,
    pub residual_l2_rel: f64,
}

impl SlipStokesSpectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    /// Wavenumber scale `pi / len`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn grid(&self) -> Grid {
        Grid { dim: self.dim, m: self.m, len: self.len }
    }

    pub fn key(&self) -> SpectrumKey {
        SpectrumKey { dim: self.dim, k_max: self.k_max, m: self.m, len: self.len }
    }

    pub fn modes(&self) -> &[SlipEigenmode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn eigenvalue(&self, idx: usize) -> f64 {
        self.modes[idx].eigenvalue
    }

    pub fn lambda_min(&self) -> f64 {
        self.modes.iter().map(|m| m.eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.modes.iter().map(|m| m.eigenvalue).fold(0.0, f64::max)
    }

    fn check_key(&self, f: &ModalField) -> Result<()> {
        if f.key != self.key() {
            return Err(Error::GridMismatch(format!(
                "modal field belongs to {:?}, spectrum is {:?}",
                f.key,
                self.key()
            )));
        }
        Ok(())
    }

    fn check_grid(&self, f: &GridField) -> Result<()> {
        if f.grid != self.grid() || f.comps != self.dim {
            return Err(Error::GridMismatch(format!(
                "grid field ({:?}, {} comps) does not match spectrum grid ({:?}, {} comps)",
                f.grid,
                f.comps,
                self.grid(),
                self.dim
            )));
        }
        Ok(())
    }

    #[inline]
    fn sin(&self, k: usize, j: usize) -> f64 {
        self.sin_t[k * self.m + j]
    }

    #[inline]
    fn cos(&self, k: usize, j: usize) -> f64 {
        self.cos_t[k * self.m + j]
    }

    /// Evaluate one normalized eigenmode on the grid.
    pub fn mode_to_grid(&self, idx: usize) -> GridField {
        let mode = &self.modes[idx];
        let grid = self.grid();
        let mut f = GridField::vector(grid);
        let n = grid.n_points();
        let k = mode.wavevector.k;
        let c = mode.norm_const;
        grid.for_each_point(|p, ij| {
            for i in 0..self.dim {
                let a = mode.amplitude[i];
                if a == 0.0 {
                    continue;
                }
                let mut v = a * c * self.sin(k[i], ij[i]);
                for l in 0..self.dim {
                    if l != i {
                        v *= self.cos(k[l], ij[l]);
                    }
                }
                f.data[i * n + p] += Complex64::new(v, 0.0);
            }
        });
        f
    }

    /// Superpose modes with the given coefficients.
    pub fn reconstruct(&self, f: &ModalField) -> Result<GridField> {
        self.check_key(f)?;
        let grid = self.grid();
        let mut out = GridField::vector(grid);
        let n = grid.n_points();
        for (mode, &coef) in self.modes.iter().zip(f.coeffs.iter()) {
            if coef == Complex64::ZERO {
                continue;
            }
            let k = mode.wavevector.k;
            let c = mode.norm_const;
            grid.for_each_point(|p, ij| {
                for i in 0..self.dim {
                    let a = mode.amplitude[i];
                    if a == 0.0 {
                        continue;
                    }
                    let mut v = a * c * self.sin(k[i], ij[i]);
                    for l in 0..self.dim {
                        if l != i {
                            v *= self.cos(k[l], ij[l]);
                        }
                    }
                    out.data[i * n + p] += coef * v;
                }
            });
        }
        Ok(out)
    }

    /// Project a grid field onto the eigenbasis.  Returns the coefficients
    /// and the relative `L^2` norm of the unrepresented remainder
    /// (gradient parts and content beyond the cutoff).
    pub fn to_modal(&self, f: &GridField) -> Result<(ModalField, f64)> {
        self.check_grid(f)?;
        let grid = self.grid();
        let n = grid.n_points();
        let w = grid.weight();
        let mut coeffs = vec![Complex64::ZERO; self.modes.len()];
        for (mi, mode) in self.modes.iter().enumerate() {
            let k = mode.wavevector.k;
            let c = mode.norm_const;
            let mut acc = Complex64::ZERO;
            grid.for_each_point(|p, ij| {
                for i in 0..self.dim {
                    let a = mode.amplitude[i];
                    if a == 0.0 {
                        continue;
                    }
                    let mut v = a * c * self.sin(k[i], ij[i]);
                    for l in 0..self.dim {
                        if l != i {
                            v *= self.cos(k[l], ij[l]);
                        }
                    }
                    acc += f.data[i * n + p] * v;
                }
            });
            coeffs[mi] = acc * w;
        }
        let modal = ModalField { key: self.key(), coeffs };
        let recon = self.reconstruct(&modal)?;
        let diff = f.sub(&recon)?;
        let denom = l2_norm(f);
        let residual = if denom > 0.0 { l2_norm(&diff) / denom } else { 0.0 };
        Ok((modal, residual))
    }

    /// Apply a scalar function of the eigenvalues: `f_k -> g(lambda_k) f_k`.
    pub fn oracle_apply(
        &self,
        g: impl Fn(Complex64) -> Complex64,
        f: &ModalField,
    ) -> Result<ModalField> {
        self.check_key(f)?;
        let coeffs = self
            .modes
            .iter()
            .zip(f.coeffs.iter())
            .map(|(m, c)| c * g(Complex64::new(m.eigenvalue, 0.0)))
            .collect();
        Ok(ModalField { key: self.key(), coeffs })
    }

    /// Apply the operator itself (multiply by the eigenvalue).
    pub fn apply_a(&self, f: &ModalField) -> Result<ModalField> {
        self.oracle_apply(|l| l, f)
    }

    /// Discrete Helmholtz decomposition.  The solenoidal part lives in the
    /// eigenbasis; the potential solves the discrete Neumann problem in the
    /// cosine basis (homogeneous Neumann is automatic for cosine patterns).
    /// Patterns beyond the cutoff and non-trigonometric content stay in the
    /// residual.
    pub fn helmholtz_project(&self, f: &GridField) -> Result<HelmholtzSplit> {
        self.check_grid(f)?;
        let grid = self.grid();
        let n = grid.n_points();
        let w = grid.weight();
        let dim = self.dim;

        let mut sol = vec![Complex64::ZERO; self.modes.len()];
        let mut pot = vec![Complex64::ZERO; self.grad_patterns.len()];
        // Mode index ranges grouped by wave vector follow construction order:
        // modes and grad patterns were pushed while visiting wave vectors in
        // the same lexicographic sweep.
        let mut mode_cursor = 0usize;
        for (gi, kv) in self.grad_patterns.iter().enumerate() {
            let active = kv.active_axes();
            let k = kv.k;
            // Component projections beta_i = <f_i, s_hat_{k,i}>_w on the
            // orthonormalized sine-cosine patterns of this wave vector.
            let mut nu2 = [0.0f64; 3];
            for &i in &active {
                let mut v = w * self.s_sum[k[i]];
                for l in 0..dim {
                    if l != i {
                        v *= self.c_sum[k[l]];
                    }
                }
                nu2[i] = v;
            }
            let mut beta = [Complex64::ZERO; 3];
            grid.for_each_point(|p, ij| {
                for &i in &active {
                    let mut v = self.sin(k[i], ij[i]);
                    for l in 0..dim {
                        if l != i {
                            v *= self.cos(k[l], ij[l]);
                        }
                    }
                    beta[i] += f.data[i * n + p] * v;
                }
            });
            for &i in &active {
                beta[i] *= w / nu2[i].sqrt();
            }
            // Gradient direction is parallel to k on the active axes; slip
            // amplitudes span its orthogonal complement.
            let kn = (kv.norm_sqr() as f64).sqrt();
            let mut gamma = Complex64::ZERO;
            for &i in &active {
                gamma += beta[i] * (-(k[i] as f64) / kn);
            }
            // grad(c_hat_k) = q |k| G_hat_k, so the potential coefficient on
            // the orthonormal cosine pattern is gamma / (q |k|).
            pot[gi] = gamma / (self.q * kn);
            let n_amps = amplitudes_for(kv).len();
            for j in 0..n_amps {
                let a = self.modes[mode_cursor + j].amplitude;
                let mut c = Complex64::ZERO;
                for &i in &active {
                    c += beta[i] * a[i];
                }
                sol[mode_cursor + j] = c;
            }
            mode_cursor += n_amps;
        }
        debug_assert_eq!(mode_cursor, self.modes.len());

        let solenoidal = ModalField { key: self.key(), coeffs: sol };
        let potential = ScalarPotential {
            grid,
            k_max: self.k_max,
            patterns: self.grad_patterns.clone(),
            coeffs: pot,
        };
        let potential_grid = self.potential_values(&potential);
        let gradient = self.potential_gradient(&potential);
        let recon = self.reconstruct(&solenoidal)?;
        let mut residual = f.sub(&recon)?;
        residual = residual.sub(&gradient)?;
        let denom = l2_norm(f);
        let residual_l2_rel = if denom > 0.0 { l2_norm(&residual) / denom } else { 0.0 };
        Ok(HelmholtzSplit { solenoidal, potential, potential_grid, residual, residual_l2_rel })
    }

    fn check_potential(&self, chi: &ScalarPotential) {
        debug_assert_eq!(chi.grid, self.grid(), "potential grid mismatch");
        debug_assert_eq!(chi.patterns.len(), self.grad_patterns.len(), "pattern list mismatch");
    }

    /// Evaluate a potential on the grid (zero-mean scalar field).
    pub fn potential_values(&self, chi: &ScalarPotential) -> GridField {
        self.check_potential(chi);
        let grid = self.grid();
        let mut out = GridField::scalar(grid);
        for (pi, kv) in chi.patterns.iter().enumerate() {
            let coef = chi.coeffs[pi];
            if coef == Complex64::ZERO {
                continue;
            }
            let rho = self.grad_pattern_norm[pi];
            let k = kv.k;
            grid.for_each_point(|p, ij| {
                let mut v = 1.0 / rho;
                for l in 0..self.dim {
                    v *= self.cos(k[l], ij[l]);
                }
                out.data[p] += coef * v;
            });
        }
        out
    }

    /// Evaluate `grad chi` on the grid by differentiating the cosine basis.
    pub fn potential_gradient(&self, chi: &ScalarPotential) -> GridField {
        self.check_potential(chi);
        let grid = self.grid();
        let n = grid.n_points();
        let mut out = GridField::vector(grid);
        for (pi, kv) in chi.patterns.iter().enumerate() {
            let coef = chi.coeffs[pi];
            if coef == Complex64::ZERO {
                continue;
            }
            let rho = self.grad_pattern_norm[pi];
            let k = kv.k;
            grid.for_each_point(|p, ij| {
                for i in 0..self.dim {
                    if k[i] == 0 {
                        continue;
                    }
                    let mut v = -(k[i] as f64) * self.q * self.sin(k[i], ij[i]) / rho;
                    for l in 0..self.dim {
                        if l != i {
                            v *= self.cos(k[l], ij[l]);
                        }
                    }
                    out.data[i * n + p] += coef * v;
                }
            });
        }
        out
    }

    /// Reweight potential coefficients by `g(1 + |k|^2 q^2)`; used for the
    /// negative-order pressure norms.
    pub fn potential_weighted(
        &self,
        chi: &ScalarPotential,
        g: impl Fn(f64) -> f64,
    ) -> ScalarPotential {
        let mut out = chi.clone();
        for (pi, kv) in chi.patterns.iter().enumerate() {
            let lam = kv.norm_sqr() as f64 * self.q * self.q;
            out.coeffs[pi] = chi.coeffs[pi] * g(1.0 + lam);
        }
        out
    }

    /// Symmetric gradient of a modal field as a `d*d`-component grid field
    /// (entries row-major), by spectral differentiation.  The Euclidean
    /// component magnitude of the result is the pointwise Frobenius norm.
    pub fn strain_field(&self, f: &ModalField) -> Result<GridField> {
        self.check_key(f)?;
        let grid = self.grid();
        let n = grid.n_points();
        let dim = self.dim;
        let mut out = GridField::zeros(grid, dim * dim);
        for (mode, &coef) in self.modes.iter().zip(f.coeffs.iter()) {
            if coef == Complex64::ZERO {
                continue;
            }
            let k = mode.wavevector.k;
            let c = mode.norm_const;
            grid.for_each_point(|p, ij| {
                // du_i/dx_j for this mode, then symmetrize.
                let mut gradm = [[0.0f64; 3]; 3];
                for i in 0..dim {
                    let a = mode.amplitude[i];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..dim {
                        let mut v = a * c * self.q * k[j] as f64;
                        if j == i {
                            v *= self.cos(k[i], ij[i]);
                            for l in 0..dim {
                                if l != i {
                                    v *= self.cos(k[l], ij[l]);
                                }
                            }
                        } else {
                            v *= -self.sin(k[i], ij[i]) * self.sin(k[j], ij[j]);
                            for l in 0..dim {
                                if l != i && l != j {
                                    v *= self.cos(k[l], ij[l]);
                                }
                            }
                        }
                        gradm[i][j] = v;
                    }
                }
                for i in 0..dim {
                    for j in 0..dim {
                        let d = 0.5 * (gradm[i][j] + gradm[j][i]);
                        out.data[(i * dim + j) * n + p] += coef * d;
                    }
                }
            });
        }
        Ok(out)
    }

    /// `L^p` norm of the pointwise Frobenius magnitude of the symmetric
    /// gradient, by spectral differentiation.
    pub fn strain_norm_modal(&self, f: &ModalField, p: f64) -> Result<f64> {
        lp_norm(&self.strain_field(f)?, p)
    }

    /// Spectral divergence of a modal field.  Algebraically zero because
    /// every amplitude satisfies `a . k = 0`; evaluating it measures only
    /// roundoff.
    pub fn spectral_divergence(&self, f: &ModalField) -> Result<GridField> {
        self.check_key(f)?;
        let grid = self.grid();
        let mut out = GridField::scalar(grid);
        for (mode, &coef) in self.modes.iter().zip(f.coeffs.iter()) {
            if coef == Complex64::ZERO {
                continue;
            }
            let k = mode.wavevector.k;
            let c = mode.norm_const;
            grid.for_each_point(|p, ij| {
                let mut v = 0.0;
                for i in 0..self.dim {
                    let a = mode.amplitude[i];
                    if a == 0.0 {
                        continue;
                    }
                    let mut t = a * c * self.q * k[i] as f64;
                    for l in 0..self.dim {
                        t *= self.cos(k[l], ij[l]);
                    }
                    v += t;
                }
                out.data[p] += coef * v;
            });
        }
        Ok(out)
    }
}

/// Symmetric gradient of a raw grid field by second-order finite differences
/// (central in the interior, one-sided three-point at the walls).  Exact on
/// affine fields, so rigid motions have identically zero strain.
pub fn strain_field_fd(f: &GridField) -> Result<GridField> {
    let grid = f.grid;
    let dim = grid.dim;
    if f.comps != dim {
        return Err(Error::GridMismatch(format!(
            "strain needs a {dim}-component velocity field, got {} components",
            f.comps
        )));
    }
    let n = grid.n_points();
    let m = grid.m;
    let h = grid.h();
    let mut out = GridField::zeros(grid, dim * dim);

    let deriv = |comp: &[Complex64], p: usize, ij: [usize; 3], axis: usize| -> Complex64 {
        let stride = m.pow((dim - 1 - axis) as u32);
        let i = ij[axis];
        if i == 0 {
            (-3.0 * comp[p] + 4.0 * comp[p + stride] - comp[p + 2 * stride]) / (2.0 * h)
        } else if i == m - 1 {
            (3.0 * comp[p] - 4.0 * comp[p - stride] + comp[p - 2 * stride]) / (2.0 * h)
        } else {
            (comp[p + stride] - comp[p - stride]) / (2.0 * h)
        }
    };

    grid.for_each_point(|p, ij| {
        let mut gradm = [[Complex64::ZERO; 3]; 3];
        for i in 0..dim {
            let comp = f.comp(i);
            for j in 0..dim {
                gradm[i][j] = deriv(comp, p, ij, j);
            }
        }
        for i in 0..dim {
            for j in 0..dim {
                out.data[(i * dim + j) * n + p] = 0.5 * (gradm[i][j] + gradm[j][i]);
            }
        }
    });
    Ok(out)
}

/// `L^p` norm of the finite-difference symmetric gradient of a raw field.
pub fn strain_norm_grid(f: &GridField, p: f64) -> Result<f64> {
    lp_norm(&strain_field_fd(f)?, p)
}
