//! Randomized property checks: projection identities, norm monotonicity,
//! resolvent algebra, exponent factorization, and semigroup contraction.

use num_complex::Complex64;
use proptest::prelude::*;
use stokeslab_core::field::{l2_norm, lp_norm, GridField};
use stokeslab_core::funcalc::factorize_exponent;
use stokeslab_core::operator::{build_box_stokes, ModalField, SlipStokesSpectrum};
use stokeslab_core::synthetic::{build_synthetic, SpectrumLaw};

const PI: f64 = std::f64::consts::PI;

fn coeff_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

fn to_modal_field(spec: &SlipStokesSpectrum, raw: &[(f64, f64)]) -> ModalField {
    let mut f = ModalField::zeros(spec);
    for (c, &(re, im)) in f.coeffs.iter_mut().zip(raw.iter()) {
        *c = Complex64::new(re, im);
    }
    f
}

/// Zero-mean cosine-product scalar and its analytic gradient: the test's own
/// gradient construction, independent of the library's Neumann solve.
fn cosine_gradient(
    spec: &SlipStokesSpectrum,
    amps: &[(usize, usize, f64)],
) -> (GridField, GridField) {
    let grid = spec.grid();
    let q = spec.q();
    let n = grid.n_points();
    let mut chi = GridField::scalar(grid);
    let mut grad = GridField::vector(grid);
    grid.for_each_point(|p, ij| {
        let x = grid.axis_coord(ij[0]);
        let y = grid.axis_coord(ij[1]);
        for &(k1, k2, b) in amps {
            let (f1, f2) = (k1 as f64 * q, k2 as f64 * q);
            chi.data[p] += b * (f1 * x).cos() * (f2 * y).cos();
            grad.data[p] += -b * f1 * (f1 * x).sin() * (f2 * y).cos();
            grad.data[n + p] += -b * f2 * (f1 * x).cos() * (f2 * y).sin();
        }
    });
    (chi, grad)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn round_trip_recovers_coefficients(
        dim in 2usize..=3,
        k_max in 1usize..=2,
        raw in coeff_strategy(28),
    ) {
        // raw holds 28 entries, enough for the largest case (3D, K = 2); the
        // zip inside to_modal_field drops the surplus for smaller spectra.
        let spec = build_box_stokes(dim, k_max, 2 * k_max + 6, PI).unwrap();
        let f = to_modal_field(&spec, &raw);
        let field = spec.reconstruct(&f).unwrap();
        let (back, residual) = spec.to_modal(&field).unwrap();
        prop_assert!(residual < 1e-10, "residual {residual:.3e}");
        for (a, b) in back.coeffs.iter().zip(f.coeffs.iter()) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn helmholtz_split_reassembles_and_is_orthogonal(
        raw in coeff_strategy(4),
        b1 in -2.0f64..2.0,
        b2 in -2.0f64..2.0,
        b3 in -2.0f64..2.0,
    ) {
        let spec = build_box_stokes(2, 2, 10, PI).unwrap();
        let f_modal = to_modal_field(&spec, &raw);
        let mut field = spec.reconstruct(&f_modal).unwrap();
        let (chi, grad) = cosine_gradient(&spec, &[(1, 0, b1), (0, 2, b2), (1, 1, b3)]);
        field.axpy(Complex64::new(1.0, 0.0), &grad);

        let split = spec.helmholtz_project(&field).unwrap();
        // Modal part passes through untouched.
        for (a, b) in split.solenoidal.coeffs.iter().zip(f_modal.coeffs.iter()) {
            prop_assert!((a - b).norm() < 1e-9);
        }
        // Potential matches the cosine scalar (both zero-mean).
        let chi_got = spec.potential_values(&split.potential);
        let diff = l2_norm(&chi_got.sub(&chi).unwrap());
        prop_assert!(diff < 1e-9, "potential mismatch {diff:.3e}");
        // Reassembly and discrete orthogonality.
        let recon = spec.reconstruct(&split.solenoidal).unwrap();
        let grad_got = spec.potential_gradient(&split.potential);
        let mut sum = recon.clone();
        sum.axpy(Complex64::new(1.0, 0.0), &grad_got);
        let err = l2_norm(&sum.sub(&field).unwrap());
        let scale = l2_norm(&field).max(1e-9);
        prop_assert!(err < 1e-9 * scale.max(1.0), "reassembly {err:.3e}");
        let ip = recon.inner(&grad_got).unwrap().norm();
        prop_assert!(
            ip < 1e-10 * (l2_norm(&recon) * l2_norm(&grad_got)).max(1e-12),
            "projection not orthogonal to gradients: {ip:.3e}"
        );
    }

    #[test]
    fn volume_normalized_norms_are_nondecreasing_in_p(
        raw in coeff_strategy(5),
        idx in 0usize..4,
    ) {
        // Jensen on the normalized measure: p <= q implies
        // |O|^{-1/p} ||f||_p <= |O|^{-1/q} ||f||_q.
        let ps = [1.5f64, 2.0, 3.0, 4.0, 6.0];
        let spec = build_box_stokes(2, 2, 12, PI).unwrap();
        let f = to_modal_field(&spec, &raw[..4]);
        let field = spec.reconstruct(&f).unwrap();
        if l2_norm(&field) < 1e-12 {
            return Ok(());
        }
        let vol = PI * PI;
        let (p, q) = (ps[idx], ps[idx + 1]);
        let np = lp_norm(&field, p).unwrap() / vol.powf(1.0 / p);
        let nq = lp_norm(&field, q).unwrap() / vol.powf(1.0 / q);
        prop_assert!(np <= nq * (1.0 + 1e-12), "p = {p}: {np:.15e} > q = {q}: {nq:.15e}");
    }

    #[test]
    fn dense_resolvent_identity(
        seed in 0u64..1000,
        re1 in 0.1f64..100.0,
        im1 in -50.0f64..50.0,
        re2 in 0.1f64..100.0,
        im2 in -50.0f64..50.0,
    ) {
        // R(l) - R(m) = (m - l) R(l) R(m) for R(l) = (lI + A)^{-1},
        // exercised through the LU path of the dense operator.
        let lams: Vec<Complex64> =
            (1..=6).map(|i| Complex64::new(i as f64, 0.3 * i as f64)).collect();
        let op = build_synthetic(6, &SpectrumLaw::Explicit(lams), 10.0, seed).unwrap();
        let x: Vec<Complex64> =
            (0..6).map(|i| Complex64::new(1.0 - 0.2 * i as f64, 0.1 * i as f64)).collect();
        let l = Complex64::new(re1, im1);
        let m = Complex64::new(re2, im2);
        let rl = op.solve_shifted(l, &x).unwrap();
        let rm = op.solve_shifted(m, &x).unwrap();
        let rlrm = op.solve_shifted(l, &rm).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..6 {
            let lhs = rl[i] - rm[i];
            let rhs = (m - l) * rlrm[i];
            worst = worst.max((lhs - rhs).norm());
            scale = scale.max(lhs.norm());
        }
        prop_assert!(worst <= 1e-9 * scale.max(1e-6), "identity residual {worst:.3e}");
    }

    #[test]
    fn semigroup_is_a_contraction_in_l2(
        raw in coeff_strategy(5),
        t1 in 0.0f64..5.0,
        dt in 0.0f64..5.0,
    ) {
        let spec = build_box_stokes(3, 1, 8, PI).unwrap();
        let f = to_modal_field(&spec, &raw);
        let op = stokeslab_core::sectorial::LabOperator::from_box(spec);
        let norm = |g: &[Complex64]| -> f64 {
            g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        };
        let u1 = stokeslab_core::semigroup::evolve(&op, &f.coeffs, t1).unwrap();
        let u2 = stokeslab_core::semigroup::evolve(&op, &f.coeffs, t1 + dt).unwrap();
        prop_assert!(norm(&u1) <= norm(&f.coeffs) * (1.0 + 1e-12));
        prop_assert!(norm(&u2) <= norm(&u1) * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn exponent_factorization_strip(re in -4.0f64..4.0, im in -15.0f64..15.0) {
        // z = m + n * piece with Re piece in (-1, 0) and |Im piece| <= 3.
        let z = Complex64::new(re, im);
        let (m, piece, n) = factorize_exponent(z);
        prop_assert!(n >= 1);
        prop_assert!(piece.re > -1.0 && piece.re < 0.0, "piece {piece}");
        prop_assert!(piece.im.abs() <= 3.0 + 1e-12);
        let rebuilt = Complex64::new(m as f64, 0.0) + piece * n as f64;
        prop_assert!((rebuilt - z).norm() < 1e-12 * (1.0 + z.norm()));
    }

    #[test]
    fn subseed_is_deterministic_and_spreads(base in any::<u64>(), idx in 0u64..10_000) {
        let a = stokeslab_core::subseed(base, "tag", idx);
        let b = stokeslab_core::subseed(base, "tag", idx);
        prop_assert_eq!(a, b);
        let c = stokeslab_core::subseed(base, "tag", idx + 1);
        let d = stokeslab_core::subseed(base, "other", idx);
        prop_assert!(a != c || a != d);
    }
}
