use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use polrot::atomic::{
    build_level_scheme, mhz, stark_shifts, FieldDrive, FieldPolarization, SchemeId, ZeemanField,
};
use polrot::detection::{
    closed_form_intensities, detector_intensities, propagate_cell, recover_angle, JonesVector,
};
use polrot::dynamics::{build_hamiltonian, build_liouvillian, steady_state, DensityMatrix, RelaxationRates};
use polrot::quadrature::QuadratureSpec;
use polrot::scenarios::{count_peaks, coupling_polarization_for, dispersion_peaks};
use polrot::spectra::{doppler_integral, rotation_angle, MediumParams, SusceptibilityPair};

fn scheme_strategy() -> impl Strategy<Value = SchemeId> {
    prop_oneof![Just(SchemeId::Fig1Asym), Just(SchemeId::Fig10Sym), Just(SchemeId::Fig11F1)]
}

struct Setup {
    scheme: polrot::atomic::LevelScheme,
    probe: FieldDrive,
    coupling: FieldDrive,
    zeeman: ZeemanField,
}

fn setup(id: SchemeId, omega_p: f64, omega_c: f64, dp: f64, dc: f64, b_gauss: f64) -> Setup {
    let scheme = build_level_scheme(id);
    let zeeman = ZeemanField::rb87_d1(b_gauss * 1e-4, scheme.excited_f());
    Setup {
        probe: FieldDrive::probe(FieldPolarization::Linear, mhz(omega_p), mhz(dp)),
        coupling: FieldDrive::coupling(coupling_polarization_for(id), mhz(omega_c), mhz(dc)),
        scheme,
        zeeman,
    }
}

fn random_matrix(n: usize, seed: &[f64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        let k = (i * n + j) % seed.len();
        Complex64::new(seed[k] * (1.0 + i as f64), seed[(k + 1) % seed.len()] - j as f64 * 0.1)
    })
}

fn matrix_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(
        id in scheme_strategy(),
        omega_p in 0.1f64..30.0,
        omega_c in 0.0f64..120.0,
        dp in -300.0f64..300.0,
        dc in -50.0f64..50.0,
        b in 0.0f64..15.0,
        seed in prop::collection::vec(-1.0f64..1.0, 7),
    ) {
        let s = setup(id, omega_p, omega_c, dp, dc, b);
        let shifts = stark_shifts(&s.coupling, &s.scheme);
        let h = build_hamiltonian(&s.scheme, &s.probe, &s.coupling, &shifts, &s.zeeman).unwrap();
        prop_assert!(h.hermiticity_error() == 0.0);
        let l = build_liouvillian(&h, &RelaxationRates::default(), &s.scheme);
        let rho = random_matrix(s.scheme.dimension(), &seed);
        let out = l.apply(&rho);
        let scale = matrix_norm(&out).max(1.0);
        prop_assert!(out.trace().norm() <= 1e-12 * scale * s.scheme.dimension() as f64);
        let out_adj = l.apply(&rho.adjoint());
        prop_assert!(matrix_norm(&(out_adj - out.adjoint())) <= 1e-12 * scale);
    }

    #[test]
    fn steady_state_is_a_density_matrix(
        id in scheme_strategy(),
        omega_p in 0.1f64..30.0,
        omega_c in 0.0f64..120.0,
        dp in -300.0f64..300.0,
        dc in -50.0f64..50.0,
        b in 0.0f64..15.0,
    ) {
        let s = setup(id, omega_p, omega_c, dp, dc, b);
        let shifts = stark_shifts(&s.coupling, &s.scheme);
        let rho = steady_state(&s.scheme, &s.probe, &s.coupling, &shifts, &s.zeeman, &RelaxationRates::default())
            .unwrap();
        prop_assert!(rho.hermiticity_error() <= 1e-10);
        prop_assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
        prop_assert!(rho.min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn recovery_round_trip(
        phi_deg in -44.0f64..44.0,
        apd in 0.0f64..3.0,
        amd in 0.0f64..3.0,
        i0 in 0.1f64..10.0,
        attenuation in 1e-3f64..1.0,
    ) {
        let medium = MediumParams::from_temperature(328.15, 1.0);
        let phi = phi_deg.to_radians();
        let pair = pair_with(phi, apd / medium.length, amd / medium.length, &medium);
        let out = propagate_cell(&JonesVector::linear(0.0, i0), &pair, &medium);
        let s = detector_intensities(&out, i0);
        let truth = rotation_angle(&pair, &medium).exact;
        prop_assert!((recover_angle(&s).unwrap() - truth).abs() < 1e-9);
        prop_assert!((truth - phi).abs() < 1e-9);
        // common attenuation leaves the angle alone
        prop_assert!((recover_angle(&s.scaled(attenuation)).unwrap() - truth).abs() < 1e-9);
        // both arms carry the same power
        prop_assert!(((s.d1 + s.d2) - (s.d3 + s.d4)).abs() <= 1e-12 * i0);
        let cf = closed_form_intensities(truth, apd, amd, i0);
        for (x, y) in [(s.d1, cf.d1), (s.d2, cf.d2), (s.d3, cf.d3), (s.d4, cf.d4)] {
            prop_assert!((x - y).abs() <= 1e-12 * i0);
        }
    }

    #[test]
    fn closed_form_for_random_susceptibilities(
        re_p in -1e-5f64..1e-5, im_p in 0.0f64..1e-5,
        re_m in -1e-5f64..1e-5, im_m in 0.0f64..1e-5,
    ) {
        let medium = MediumParams::from_temperature(328.15, 1.0);
        let pair = SusceptibilityPair::new(Complex64::new(re_m, im_m), Complex64::new(re_p, im_p), medium.wavelength);
        let out = propagate_cell(&JonesVector::linear(0.0, 1.0), &pair, &medium);
        let s = detector_intensities(&out, 1.0);
        let phi = rotation_angle(&pair, &medium).exact;
        let cf = closed_form_intensities(phi, pair.alpha_plus * medium.length, pair.alpha_minus * medium.length, 1.0);
        for (x, y) in [(s.d1, cf.d1), (s.d2, cf.d2), (s.d3, cf.d3), (s.d4, cf.d4)] {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn exact_and_approximate_angles_agree_for_small_chi(
        re_p in -1e-3f64..1e-3, im_p in 0.0f64..1e-3,
        re_m in -1e-3f64..1e-3, im_m in 0.0f64..1e-3,
    ) {
        let chi_p = Complex64::new(re_p, im_p);
        let chi_m = Complex64::new(re_m, im_m);
        prop_assume!(chi_p.norm() < 1e-3 && chi_m.norm() < 1e-3);
        let medium = MediumParams::from_temperature(328.15, 1.0);
        let pair = SusceptibilityPair::new(chi_m, chi_p, medium.wavelength);
        let a = rotation_angle(&pair, &medium);
        prop_assert!((a.exact - a.approx).abs() <= 0.01 * a.exact.abs());
    }

    #[test]
    fn zero_speed_doppler_factor_is_reciprocal(g in 0.1f64..50.0, d in -500.0f64..500.0) {
        let a = Complex64::new(mhz(g), mhz(d));
        let r = doppler_integral(a, 7.9e6, 0.0, &QuadratureSpec::default()).unwrap();
        prop_assert_eq!(r.value, Complex64::new(1.0, 0.0) / a);
    }

    #[test]
    fn peak_count_is_resolution_independent(
        centers in prop::collection::vec(-80.0f64..80.0, 1..5),
        widths in prop::collection::vec(2.0f64..8.0, 5),
        heights in prop::collection::vec(0.2f64..1.0, 5),
    ) {
        let mut cs = centers.clone();
        cs.sort_by(f64::total_cmp);
        prop_assume!(cs.windows(2).all(|w| w[1] - w[0] > 30.0));
        let curve = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let x = -100.0 + 200.0 * i as f64 / (n - 1) as f64;
                    cs.iter()
                        .enumerate()
                        .map(|(k, c)| heights[k] / (1.0 + ((x - c) / widths[k]).powi(2)))
                        .sum()
                })
                .collect()
        };
        let coarse = count_peaks(&curve(801), 0.02).len();
        let fine = count_peaks(&curve(1601), 0.02).len();
        prop_assert_eq!(coarse, fine);
        prop_assert_eq!(coarse, cs.len());
    }

    #[test]
    fn dispersion_peaks_of_odd_profile(scale in 0.1f64..10.0, points in 401usize..2001) {
        let xs: Vec<f64> = (0..points).map(|i| -4.0 + 8.0 * i as f64 / (points - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x * (-x * x).exp()).collect();
        let p = dispersion_peaks(&xs, &ys, 0.0).unwrap();
        let h = 8.0 / (points - 1) as f64;
        prop_assert!(p.left.0 < p.right.0);
        prop_assert!((p.left.0 + std::f64::consts::FRAC_1_SQRT_2).abs() <= h);
        prop_assert!((p.right.0 - std::f64::consts::FRAC_1_SQRT_2).abs() <= h);
        prop_assert!(p.left.1 < 0.0 && p.right.1 > 0.0);
    }
}

/// Susceptibilities giving exact rotation `phi` and absorptions α±.
fn pair_with(phi: f64, alpha_plus: f64, alpha_minus: f64, m: &MediumParams) -> SusceptibilityPair {
    let dn = phi * m.wavelength / (std::f64::consts::PI * m.length);
    let n_plus: f64 = 1.0 + 0.5 * dn;
    let n_minus: f64 = 1.0 - 0.5 * dn;
    let mut p = SusceptibilityPair::new(
        Complex64::new(n_minus * n_minus - 1.0, 0.0),
        Complex64::new(n_plus * n_plus - 1.0, 0.0),
        m.wavelength,
    );
    p.alpha_plus = alpha_plus;
    p.alpha_minus = alpha_minus;
    p
}

#[test]
fn thermal_start_is_a_density_matrix() {
    let s = build_level_scheme(SchemeId::Fig1Asym);
    let rho = DensityMatrix::thermal_ground(&s.sublevels);
    assert!((rho.trace().re - 1.0).abs() < 1e-15);
    assert!(rho.min_eigenvalue() >= 0.0);
}
