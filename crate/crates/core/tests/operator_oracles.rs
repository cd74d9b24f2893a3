//! Closed-form oracles for the slip eigenbasis: mode inventories, collocation
//! values, boundary behavior, Helmholtz splits, and the strain energy
//! identity.  Every expected value here is derived independently of the
//! library (symbolic substitution into the Stokes eigenproblem).

use num_complex::Complex64;
use stokeslab_core::error::Error;
use stokeslab_core::field::{l2_norm, lp_norm, GridField};
use stokeslab_core::operator::{
    build_box_stokes, strain_norm_grid, ModalField, SlipStokesSpectrum,
};

const PI: f64 = std::f64::consts::PI;

fn unit_coeff(spec: &SlipStokesSpectrum, idx: usize) -> ModalField {
    let mut f = ModalField::zeros(spec);
    f.coeffs[idx] = Complex64::new(1.0, 0.0);
    f
}

#[test]
fn mode_inventory_2d() {
    // K = 1: the single mode k = (1,1), a proportional to (1,-1), lambda = 2.
    let spec = build_box_stokes(2, 1, 8, PI).unwrap();
    assert_eq!(spec.n_modes(), 1);
    let mode = &spec.modes()[0];
    assert_eq!(mode.wavevector.k, [1, 1, 0]);
    assert!((mode.eigenvalue - 2.0).abs() < 1e-14);
    assert!(
        (mode.amplitude[0] + mode.amplitude[1]).abs() < 1e-14,
        "divergence-free 2D amplitude must satisfy a1 = -a2"
    );

    // One mode per wavevector with both components nonzero: K^2 total.
    for k_max in 1..=4usize {
        let spec = build_box_stokes(2, k_max, 2 * k_max + 2, PI).unwrap();
        assert_eq!(spec.n_modes(), k_max * k_max);
    }

    // K = 2 eigenvalue multiset {2, 5, 5, 8}.
    let spec = build_box_stokes(2, 2, 8, PI).unwrap();
    let mut lams: Vec<f64> = spec.modes().iter().map(|m| m.eigenvalue).collect();
    lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (got, want) in lams.iter().zip([2.0, 5.0, 5.0, 8.0]) {
        assert!((got - want).abs() < 1e-14, "2D K=2 eigenvalues {lams:?}");
    }
}

#[test]
fn mode_inventory_3d() {
    // K = 1: three modes at lambda = 2 (one zero component in k) and a
    // two-dimensional amplitude plane at k = (1,1,1), lambda = 3.
    let spec = build_box_stokes(3, 1, 8, PI).unwrap();
    assert_eq!(spec.n_modes(), 5);
    let mut at2 = Vec::new();
    let mut at3 = 0usize;
    for mode in spec.modes() {
        if (mode.eigenvalue - 2.0).abs() < 1e-14 {
            at2.push(mode.wavevector.k);
        } else if (mode.eigenvalue - 3.0).abs() < 1e-14 {
            assert_eq!(mode.wavevector.k, [1, 1, 1]);
            at3 += 1;
        } else {
            panic!("unexpected eigenvalue {}", mode.eigenvalue);
        }
    }
    at2.sort();
    assert_eq!(at2, vec![[0, 1, 1], [1, 0, 1], [1, 1, 0]]);
    assert_eq!(at3, 2);

    // Wavevectors with a single nonzero component emit nothing (a . k = 0
    // kills the only nonvanishing amplitude), so the count is 2K^3 + 3K^2.
    for k_max in 1..=3usize {
        let spec = build_box_stokes(3, k_max, 2 * k_max + 2, PI).unwrap();
        assert_eq!(spec.n_modes(), 2 * k_max.pow(3) + 3 * k_max.pow(2));
        assert!(
            spec.modes().iter().all(|m| m.wavevector.active_axes().len() >= 2),
            "no mode may live on a single axis"
        );
    }
}

#[test]
fn amplitude_constraints_hold_for_every_mode() {
    for (dim, k_max) in [(2usize, 3usize), (3, 2)] {
        let spec = build_box_stokes(dim, k_max, 2 * k_max + 2, 1.7).unwrap();
        let q = spec.q();
        for mode in spec.modes() {
            let dot: f64 = (0..3)
                .map(|i| mode.amplitude[i] * mode.wavevector.k[i] as f64)
                .sum();
            assert!(dot.abs() < 1e-13, "a . k = {dot}");
            let lam = mode.wavevector.norm_sqr() as f64 * q * q;
            assert!((mode.eigenvalue - lam).abs() < 1e-12 * lam);
        }
    }
}

#[test]
fn mode_collocation_values_2d() {
    // Unit coefficient on the K = 1 mode must evaluate to
    // a c (sin x cos y, -cos x sin y) at every collocation point.
    let spec = build_box_stokes(2, 1, 16, PI).unwrap();
    let mode = &spec.modes()[0];
    let (a1, a2, c) = (mode.amplitude[0], mode.amplitude[1], mode.norm_const);
    let field = spec.reconstruct(&unit_coeff(&spec, 0)).unwrap();
    let grid = spec.grid();
    let n = grid.n_points();
    grid.for_each_point(|p, ij| {
        let x = grid.axis_coord(ij[0]);
        let y = grid.axis_coord(ij[1]);
        let want1 = a1 * c * x.sin() * y.cos();
        let want2 = a2 * c * x.cos() * y.sin();
        assert!((field.data[p] - want1).norm() < 1e-13);
        assert!((field.data[n + p] - want2).norm() < 1e-13);
    });

    // p = 2 norm of the normalized mode is 1 by construction.
    assert!((l2_norm(&field) - 1.0).abs() < 1e-12);
}

#[test]
fn strain_of_2d_mode_is_diagonal() {
    // With the divergence-free amplitude a = (1,-1)/sqrt(2) the off-diagonal
    // strain cancels identically: D(u) = a1 c cos x cos y diag(1, -1).
    let spec = build_box_stokes(2, 1, 12, PI).unwrap();
    let mode = &spec.modes()[0];
    let scale = mode.amplitude[0] * mode.norm_const;
    let strain = spec.strain_field(&unit_coeff(&spec, 0)).unwrap();
    let grid = spec.grid();
    let n = grid.n_points();
    grid.for_each_point(|p, ij| {
        let cc = grid.axis_coord(ij[0]).cos() * grid.axis_coord(ij[1]).cos();
        // Row-major d*d entries: D11, D12, D21, D22.
        assert!((strain.data[p] - scale * cc).norm() < 1e-13);
        assert!(strain.data[n + p].norm() < 1e-14, "off-diagonal strain must vanish");
        assert!(strain.data[2 * n + p].norm() < 1e-14);
        assert!((strain.data[3 * n + p] + scale * cc).norm() < 1e-13);
    });
}

#[test]
fn energy_identity_and_homogeneity() {
    // 2 ||D(u)||_2^2 = lambda ||u||_2^2 for every mode; the quadrature is
    // exact because all trig products stay below the grid Nyquist frequency.
    let spec = build_box_stokes(3, 2, 10, PI).unwrap();
    for idx in 0..spec.n_modes() {
        let f = unit_coeff(&spec, idx);
        let d = spec.strain_norm_modal(&f, 2.0).unwrap();
        let lam = spec.eigenvalue(idx);
        assert!(
            (2.0 * d * d - lam).abs() < 1e-11,
            "mode {idx}: 2||D||^2 = {} vs lambda = {lam}",
            2.0 * d * d
        );
    }

    // Homogeneity at p != 2.
    let mut f = ModalField::zeros(&spec);
    f.coeffs[0] = Complex64::new(0.3, -1.1);
    f.coeffs[3] = Complex64::new(-0.8, 0.2);
    let base = spec.strain_norm_modal(&f, 3.0).unwrap();
    let c = Complex64::new(-2.0, 1.5);
    let scaled = ModalField {
        key: f.key,
        coeffs: f.coeffs.iter().map(|v| v * c).collect(),
    };
    let got = spec.strain_norm_modal(&scaled, 3.0).unwrap();
    assert!((got - c.norm() * base).abs() < 1e-12 * base.max(1.0));
}

#[test]
fn boundary_conditions_hold_exactly() {
    // Evaluate the closed form at wall points: the normal component and the
    // tangential rows of D(u) n vanish on every face.
    let spec = build_box_stokes(3, 2, 8, 1.3).unwrap();
    let q = spec.q();
    let len = 1.3;
    let samples = [0.17, 0.62, 1.04];
    for mode in spec.modes() {
        let k = mode.wavevector.k;
        for wall_axis in 0..3usize {
            for wall_pos in [0.0, len] {
                for &s1 in &samples {
                    for &s2 in &samples {
                        let mut x = [0.0f64; 3];
                        x[wall_axis] = wall_pos;
                        let others: Vec<usize> =
                            (0..3).filter(|&i| i != wall_axis).collect();
                        x[others[0]] = s1;
                        x[others[1]] = s2;
                        // u_i = a_i sin(k_i q x_i) prod_{j != i} cos(k_j q x_j)
                        let comp = |i: usize| -> f64 {
                            let mut v = mode.amplitude[i] * (k[i] as f64 * q * x[i]).sin();
                            for j in 0..3 {
                                if j != i {
                                    v *= (k[j] as f64 * q * x[j]).cos();
                                }
                            }
                            v
                        };
                        assert!(
                            comp(wall_axis).abs() < 1e-13,
                            "normal trace leaked on axis {wall_axis}"
                        );
                        // D_{i,wall} for i != wall carries sin(k_wall q x_wall) = 0:
                        // d u_i / d x_w + d u_w / d x_i, both terms have the factor.
                        for i in 0..3 {
                            if i == wall_axis {
                                continue;
                            }
                            let du_i_dw = {
                                let mut v = mode.amplitude[i]
                                    * (k[i] as f64 * q * x[i]).sin()
                                    * (-(k[wall_axis] as f64) * q
                                        * (k[wall_axis] as f64 * q * x[wall_axis]).sin());
                                for j in 0..3 {
                                    if j != i && j != wall_axis {
                                        v *= (k[j] as f64 * q * x[j]).cos();
                                    }
                                }
                                v
                            };
                            let du_w_di = {
                                let mut v = mode.amplitude[wall_axis]
                                    * (k[wall_axis] as f64 * q * x[wall_axis]).sin()
                                    * (-(k[i] as f64) * q * (k[i] as f64 * q * x[i]).sin());
                                for j in 0..3 {
                                    if j != wall_axis && j != i {
                                        v *= (k[j] as f64 * q * x[j]).cos();
                                    }
                                }
                                v
                            };
                            assert!(
                                (du_i_dw + du_w_di).abs() < 1e-13,
                                "tangential stress leaked on axis {wall_axis}"
                            );
                        }
                    }
                }
            }
        }
    }
}

/// Centered second difference along each axis (interior points only).
fn fd_laplacian_error(spec: &SlipStokesSpectrum, idx: usize) -> f64 {
    let field = spec.reconstruct(&unit_coeff(spec, idx)).unwrap();
    let grid = spec.grid();
    let (m, h, dim) = (grid.m, grid.h(), grid.dim);
    let n = grid.n_points();
    let lam = spec.eigenvalue(idx);
    let mut worst = 0.0f64;
    grid.for_each_point(|p, ij| {
        if (0..dim).any(|a| ij[a] == 0 || ij[a] == m - 1) {
            return;
        }
        for comp in 0..dim {
            let v = &field.data[comp * n..(comp + 1) * n];
            let mut lap = Complex64::ZERO;
            for a in 0..dim {
                let stride = m.pow((dim - 1 - a) as u32);
                lap += (v[p + stride] - 2.0 * v[p] + v[p - stride]) / (h * h);
            }
            worst = worst.max((lap + lam * v[p]).norm());
        }
    });
    worst
}

#[test]
fn laplacian_eigen_identity_second_order() {
    // Delta u = -lambda u for slip modes; the centered difference must
    // converge to it at second order in the grid spacing.
    for (dim, idx) in [(2usize, 0usize), (3, 4)] {
        let coarse = build_box_stokes(dim, 1, 16, PI).unwrap();
        let fine = build_box_stokes(dim, 1, 32, PI).unwrap();
        let e1 = fd_laplacian_error(&coarse, idx);
        let e2 = fd_laplacian_error(&fine, idx);
        // The max-norm sample points move with the grid, so the observed
        // order wobbles slightly below the asymptotic 2.
        let order = (e1 / e2).log2();
        assert!(
            order > 1.85,
            "dim {dim}: FD Laplacian order {order:.3} (errors {e1:.3e}, {e2:.3e})"
        );
    }
}

#[test]
fn divergence_is_zero_to_roundoff() {
    let spec = build_box_stokes(3, 2, 10, PI).unwrap();
    let mut f = ModalField::zeros(&spec);
    for (i, c) in f.coeffs.iter_mut().enumerate() {
        *c = Complex64::new(1.0 / (1.0 + i as f64), 0.3 * i as f64);
    }
    let div = spec.spectral_divergence(&f).unwrap();
    let peak = div.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(peak < 1e-12, "spectral divergence {peak:.3e}");
}

fn gradient_of_coscos(spec: &SlipStokesSpectrum) -> GridField {
    let grid = spec.grid();
    let mut f = GridField::vector(grid);
    let n = grid.n_points();
    grid.for_each_point(|p, ij| {
        let x = grid.axis_coord(ij[0]);
        let y = grid.axis_coord(ij[1]);
        f.data[p] = Complex64::new(-x.sin() * y.cos(), 0.0);
        f.data[n + p] = Complex64::new(-x.cos() * y.sin(), 0.0);
    });
    f
}

#[test]
fn helmholtz_pure_gradient() {
    // f = grad(cos x cos y): solenoidal part vanishes, the potential is
    // cos x cos y (already zero-mean on the box), residual is quadrature-level.
    let spec = build_box_stokes(2, 2, 12, PI).unwrap();
    let f = gradient_of_coscos(&spec);
    let split = spec.helmholtz_project(&f).unwrap();
    let peak = split.solenoidal.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(peak < 1e-12, "gradient leaked into modes: {peak:.3e}");
    assert!(split.residual_l2_rel < 1e-10);

    let grid = spec.grid();
    let chi = spec.potential_values(&split.potential);
    let mut worst = 0.0f64;
    grid.for_each_point(|p, ij| {
        let want = grid.axis_coord(ij[0]).cos() * grid.axis_coord(ij[1]).cos();
        worst = worst.max((chi.data[p] - want).norm());
    });
    assert!(worst < 1e-10, "potential error {worst:.3e}");

    // Reassembly: f = reconstruction + gradient of the potential.
    let grad = spec.potential_gradient(&split.potential);
    let err = l2_norm(&f.sub(&grad).unwrap());
    assert!(err < 1e-10, "reassembly error {err:.3e}");
}

#[test]
fn helmholtz_eigenmode_passthrough_and_idempotence() {
    let spec = build_box_stokes(3, 2, 10, PI).unwrap();
    let mut f = ModalField::zeros(&spec);
    f.coeffs[2] = Complex64::new(2.0, 0.0);
    f.coeffs[7] = Complex64::new(0.0, -3.0);
    let field = spec.reconstruct(&f).unwrap();
    let split = spec.helmholtz_project(&field).unwrap();
    for (i, c) in split.solenoidal.coeffs.iter().enumerate() {
        assert!((c - f.coeffs[i]).norm() < 1e-10, "coefficient {i} drifted");
    }
    let chi_peak = split.potential.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    assert!(chi_peak < 1e-10, "potential appeared for a solenoidal field");

    // Idempotence: projecting the projected part changes nothing.
    let again = spec
        .helmholtz_project(&spec.reconstruct(&split.solenoidal).unwrap())
        .unwrap();
    for (a, b) in again.solenoidal.coeffs.iter().zip(split.solenoidal.coeffs.iter()) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn modal_projection_is_linear_and_exact() {
    let spec = build_box_stokes(2, 2, 8, PI).unwrap();
    let mut f = ModalField::zeros(&spec);
    f.coeffs[0] = Complex64::new(2.0, 0.0);
    f.coeffs[3] = Complex64::new(0.0, -3.0);
    let field = spec.reconstruct(&f).unwrap();
    let (back, residual) = spec.to_modal(&field).unwrap();
    assert!(residual < 1e-10);
    for (a, b) in back.coeffs.iter().zip(f.coeffs.iter()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn lp_norm_of_constant_field() {
    // Constant vector field c: norm = |c| L^{d/p}.
    let len = 1.7f64;
    let spec = build_box_stokes(2, 1, 8, len).unwrap();
    let mut f = GridField::vector(spec.grid());
    let val = Complex64::new(0.3, -0.4);
    let n = spec.grid().n_points();
    for p in 0..n {
        f.data[p] = val;
    }
    for p in [1.5, 2.0, 4.0] {
        let want = val.norm() * len.powf(2.0 / p);
        let got = lp_norm(&f, p).unwrap();
        assert!((got - want).abs() < 1e-12 * want, "p = {p}: {got} vs {want}");
    }
}

#[test]
fn rigid_motions_have_zero_strain() {
    // Affine fields are differentiated exactly by the FD stencils, so
    // translations and rotations give identically zero strain.
    let spec2 = build_box_stokes(2, 1, 8, PI).unwrap();
    let grid = spec2.grid();
    let n = grid.n_points();
    let mut f = GridField::vector(grid);
    grid.for_each_point(|p, ij| {
        let x = grid.axis_coord(ij[0]);
        let y = grid.axis_coord(ij[1]);
        f.data[p] = Complex64::new(0.7 - 1.3 * y, 0.0);
        f.data[n + p] = Complex64::new(-0.2 + 1.3 * x, 0.0);
    });
    assert!(strain_norm_grid(&f, 2.0).unwrap() < 1e-12);

    let spec3 = build_box_stokes(3, 1, 8, PI).unwrap();
    let grid = spec3.grid();
    let n = grid.n_points();
    let b = [0.4, -0.1, 0.9];
    let w = [0.3, 0.7, -0.5];
    let mut f = GridField::vector(grid);
    grid.for_each_point(|p, ij| {
        let x = [
            grid.axis_coord(ij[0]),
            grid.axis_coord(ij[1]),
            grid.axis_coord(ij[2]),
        ];
        let cross = [
            w[1] * x[2] - w[2] * x[1],
            w[2] * x[0] - w[0] * x[2],
            w[0] * x[1] - w[1] * x[0],
        ];
        for i in 0..3 {
            f.data[i * n + p] = Complex64::new(b[i] + cross[i], 0.0);
        }
    });
    assert!(strain_norm_grid(&f, 2.0).unwrap() < 1e-12);
}

#[test]
fn under_resolution_is_rejected() {
    assert!(matches!(
        build_box_stokes(2, 3, 7, PI),
        Err(Error::Resolution { needed: 8, got: 7 })
    ));
}

#[test]
fn oracle_apply_closed_forms() {
    let spec = build_box_stokes(2, 1, 8, PI).unwrap();
    let f = unit_coeff(&spec, 0);
    // g = identity applies the eigenvalue.
    let af = spec.oracle_apply(|l| l, &f).unwrap();
    assert!((af.coeffs[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    // g = e^{-t lambda} at t = 0.5 on lambda = 2 scales by e^{-1}.
    let ef = spec.oracle_apply(|l| (-0.5 * l).exp(), &f).unwrap();
    assert!((ef.coeffs[0] - Complex64::new((-1.0f64).exp(), 0.0)).norm() < 1e-14);
}
