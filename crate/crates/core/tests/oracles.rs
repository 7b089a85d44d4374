//! Independent cross-checks: angular momentum by diagonalizing J², Doppler
//! factors by brute-force trapezoid sums, steady states by time integration.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use polrot::angmom;
use polrot::atomic::{
    build_level_scheme, clebsch_gordan, mhz, stark_shifts, FieldDrive, FieldPolarization, Manifold, SchemeId,
    StarkShifts, SublevelId, ZeemanField, HBAR, EPSILON_0,
};
use polrot::dynamics::{
    analytic_coherences, build_hamiltonian, build_liouvillian, evolve, probe_channels, steady_state, DensityMatrix,
    RelaxationRates,
};
use polrot::quadrature::QuadratureSpec;
use polrot::spectra::{
    doppler_factors, doppler_integral, maxwellian_weight, most_probable_speed, susceptibilities, MediumParams,
    VELOCITY_SPAN,
};

/// |⟨j1 m1; j2 m2 | J M⟩|² from eigenvectors of J² in each fixed-M block.
fn cg_squared_by_diagonalization(tj1: i32, tj2: i32) -> Vec<(i32, i32, i32, i32, f64)> {
    let j1 = tj1 as f64 / 2.0;
    let j2 = tj2 as f64 / 2.0;
    let raise = |j: f64, m: f64| (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt();
    let mut out = Vec::new();
    for tm in (-(tj1 + tj2)..=(tj1 + tj2)).step_by(2) {
        let basis: Vec<(i32, i32)> = (-tj1..=tj1)
            .step_by(2)
            .filter_map(|tm1| {
                let tm2 = tm - tm1;
                (tm2.abs() <= tj2).then_some((tm1, tm2))
            })
            .collect();
        let n = basis.len();
        let mut j2m = DMatrix::<f64>::zeros(n, n);
        for (a, &(tm1, tm2)) in basis.iter().enumerate() {
            let (m1, m2) = (tm1 as f64 / 2.0, tm2 as f64 / 2.0);
            j2m[(a, a)] = j1 * (j1 + 1.0) + j2 * (j2 + 1.0) + 2.0 * m1 * m2;
            for (b, &(un1, un2)) in basis.iter().enumerate() {
                // J1+ J2- and its transpose
                if un1 == tm1 + 2 && un2 == tm2 - 2 {
                    let v = raise(j1, m1) * raise(j2, m2 - 1.0);
                    j2m[(b, a)] += v;
                    j2m[(a, b)] += v;
                }
            }
        }
        let eig = j2m.symmetric_eigen();
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let big_j = -0.5 + (0.25 + lambda).sqrt();
            let tj = (2.0 * big_j).round() as i32;
            for (a, &(tm1, tm2)) in basis.iter().enumerate() {
                out.push((tm1, tm2, tj, tm, eig.eigenvectors[(a, k)].powi(2)));
            }
        }
    }
    out
}

#[test]
fn clebsch_gordan_matches_diagonalized_j_squared() {
    for (tj1, tj2) in [(3, 1), (2, 2), (4, 2), (2, 1), (4, 4)] {
        for (tm1, tm2, tj, tm, sq) in cg_squared_by_diagonalization(tj1, tj2) {
            let cg = angmom::clebsch_gordan(tj1, tm1, tj2, tm2, tj, tm);
            assert!(
                (cg * cg - sq).abs() < 1e-12,
                "j1={tj1}/2 j2={tj2}/2 m1={tm1}/2 m2={tm2}/2 J={tj}/2: {} vs {sq}",
                cg * cg
            );
        }
    }
}

/// D1 hyperfine strength factors for σ⁺ from ground sublevel m, in units of
/// the squared reduced J dipole element.
fn tabulated_sigma_plus(f: i32, fe: i32, m: i32) -> f64 {
    match (f, fe, m) {
        (1, 1, -1) | (1, 1, 0) => 1.0 / 12.0,
        (1, 2, -1) => 1.0 / 12.0,
        (1, 2, 0) => 1.0 / 4.0,
        (1, 2, 1) => 1.0 / 2.0,
        (2, 1, -2) => 1.0 / 2.0,
        (2, 1, -1) => 1.0 / 4.0,
        (2, 1, 0) => 1.0 / 12.0,
        (2, 2, -2) | (2, 2, 1) => 1.0 / 6.0,
        (2, 2, -1) | (2, 2, 0) => 1.0 / 4.0,
        _ => 0.0,
    }
}

fn tabulated_pi(f: i32, fe: i32, m: i32) -> f64 {
    match (f, fe, m.abs()) {
        (1, 1, 1) => 1.0 / 12.0,
        (1, 2, 1) | (2, 1, 1) => 1.0 / 4.0,
        (1, 2, 0) | (2, 1, 0) => 1.0 / 3.0,
        (2, 2, 2) => 1.0 / 3.0,
        (2, 2, 1) => 1.0 / 12.0,
        _ => 0.0,
    }
}

#[test]
fn transition_strengths_match_d1_tables() {
    for f in [1, 2] {
        let ground = if f == 1 { Manifold::GroundF1 } else { Manifold::GroundF2 };
        for fe in [1, 2] {
            let excited = Manifold::Excited { f: fe };
            for m in -f..=f {
                let lower = SublevelId::new(ground, m);
                let sq = |me: i32| {
                    if me.abs() > fe {
                        0.0
                    } else {
                        clebsch_gordan(lower, SublevelId::new(excited, me)).powi(2)
                    }
                };
                assert!((sq(m + 1) - tabulated_sigma_plus(f, fe, m)).abs() < 1e-12, "σ+ F={f} F'={fe} m={m}");
                // σ⁻ from m mirrors σ⁺ from -m
                assert!((sq(m - 1) - tabulated_sigma_plus(f, fe, -m)).abs() < 1e-12, "σ- F={f} F'={fe} m={m}");
                assert!((sq(m) - tabulated_pi(f, fe, m)).abs() < 1e-12, "π F={f} F'={fe} m={m}");
            }
        }
    }
}

#[test]
fn symmetric_scheme_has_forbidden_center_coupling() {
    let s = build_level_scheme(SchemeId::Fig10Sym);
    let t = s.transition(&SublevelId::b(3), &SublevelId::c(3, 2)).unwrap();
    assert_eq!(t.cg, 0.0);
}

/// Trapezoid sum of w(u)/(a - iku) over ±6V.
fn trapezoid_doppler(a: Complex64, k: f64, speed: f64, points: usize) -> Complex64 {
    let lim = VELOCITY_SPAN * speed;
    let h = 2.0 * lim / (points - 1) as f64;
    let f = |u: f64| Complex64::new(maxwellian_weight(u, speed, 1.0), 0.0) / (a - Complex64::new(0.0, k * u));
    let mut sum = 0.5 * (f(-lim) + f(lim));
    for i in 1..points - 1 {
        sum += f(-lim + h * i as f64);
    }
    sum * h
}

#[test]
fn doppler_factor_matches_dense_trapezoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0b_b1e5);
    let k = 2.0 * std::f64::consts::PI / polrot::atomic::D1_WAVELENGTH;
    let spec = QuadratureSpec::default();
    for _ in 0..20 {
        let gamma = mhz(rng.random_range(1.0..40.0));
        let detuning = mhz(rng.random_range(-600.0..600.0));
        let speed = most_probable_speed(rng.random_range(300.0..360.0));
        let a = Complex64::new(gamma, -detuning);
        let q = doppler_integral(a, k, speed, &spec).unwrap().value;
        let t = trapezoid_doppler(a, k, speed, 2_000_001);
        assert!(
            (q - t).norm() <= 1e-4 * t.norm(),
            "γ={gamma:e} Δ={detuning:e} V={speed}: {q} vs {t}"
        );
    }
}

#[test]
fn dressed_factor_at_sixty_mhz_and_328_kelvin() {
    let rates = RelaxationRates::default();
    let omega = mhz(60.0);
    let a = Complex64::new(rates.optical + 0.25 * omega * omega / rates.hyperfine, 0.0);
    let medium = MediumParams::from_temperature(328.0, 1.0);
    let q = doppler_integral(a, medium.wavenumber(), medium.speed, &QuadratureSpec::default())
        .unwrap()
        .value;
    let t = trapezoid_doppler(a, medium.wavenumber(), medium.speed, 2_000_001);
    assert!((q - t).norm() <= 1e-4 * t.norm(), "{q} vs {t}");
}

fn fig1_drives(omega_p: f64, omega_c: f64, detuning: f64) -> (FieldDrive, FieldDrive) {
    (
        FieldDrive::probe(FieldPolarization::Linear, mhz(omega_p), detuning),
        FieldDrive::coupling(FieldPolarization::SigmaMinus, mhz(omega_c), 0.0),
    )
}

#[test]
fn time_evolution_reaches_steady_state() {
    let scheme = build_level_scheme(SchemeId::Fig1Asym);
    let rates = RelaxationRates::default();
    let zeeman = ZeemanField::rb87_d1(0.0, 2);
    for (omega_c, detuning) in [(80.0, 0.0), (60.0, mhz(5.0))] {
        let (p, c) = fig1_drives(10.0, omega_c, detuning);
        let shifts = stark_shifts(&c, &scheme);
        let h = build_hamiltonian(&scheme, &p, &c, &shifts, &zeeman).unwrap();
        let l = build_liouvillian(&h, &rates, &scheme);
        let rho0 = DensityMatrix::thermal_ground(&scheme.sublevels);
        let late = evolve(&l, &rho0, 40e-6);
        let ss = steady_state(&scheme, &p, &c, &shifts, &zeeman, &rates).unwrap();
        let diff = (&late.matrix - &ss.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-7, "Ω_c={omega_c}: max deviation {diff:e}");
    }
}

#[test]
fn probe_alone_pumps_into_upper_ground_manifold() {
    let scheme = build_level_scheme(SchemeId::Fig1Asym);
    let rates = RelaxationRates::default();
    let zeeman = ZeemanField::rb87_d1(0.0, 2);
    let (p, c) = fig1_drives(50.0, 0.0, 0.0);
    let shifts = StarkShifts::zero(&scheme);
    let h = build_hamiltonian(&scheme, &p, &c, &shifts, &zeeman).unwrap();
    let l = build_liouvillian(&h, &rates, &scheme);
    let rho0 = DensityMatrix::thermal_ground(&scheme.sublevels);
    let late = evolve(&l, &rho0, 40e-6);
    let f1: f64 = (1..=3).map(|i| late.population(&SublevelId::a(i))).sum();
    assert!(f1 < 3.0 / 8.0 - 0.05, "F=1 population {f1}");
    let ss = steady_state(&scheme, &p, &c, &shifts, &zeeman, &rates).unwrap();
    let f1_ss: f64 = (1..=3).map(|i| ss.population(&SublevelId::a(i))).sum();
    assert_relative_eq!(f1, f1_ss, max_relative = 1e-6);
}

/// ‖full - analytic‖ / ‖full‖ over all probe coherences.
fn weak_probe_mismatch(omega_c: f64, detuning: f64) -> f64 {
    let scheme = build_level_scheme(SchemeId::Fig1Asym);
    let rates = RelaxationRates::default();
    let zeeman = ZeemanField::rb87_d1(0.0, 2);
    let (p, c) = fig1_drives(1.0, omega_c, mhz(detuning));
    let shifts = stark_shifts(&c, &scheme);
    let rho = steady_state(&scheme, &p, &c, &shifts, &zeeman, &rates).unwrap();
    let channels = probe_channels(&scheme, p.rabi_scale, &c, &shifts, &zeeman).unwrap();
    let analytic = analytic_coherences(&rho, &channels, &rates, p.detuning, c.detuning);
    let (mut err, mut norm) = (0.0, 0.0);
    for (upper, lower, z) in &analytic.entries {
        let full = rho.element(upper, lower);
        err += (full - z).norm_sqr();
        norm += full.norm_sqr();
    }
    (err / norm).sqrt()
}

#[test]
fn weak_probe_coherences_match_full_solution() {
    for omega_c in [60.0, 80.0, 100.0] {
        let m = weak_probe_mismatch(omega_c, 0.0);
        assert!(m < 0.05, "Ω_c={omega_c}: mismatch {m}");
    }
}

#[test]
fn weak_probe_mismatch_grows_off_two_photon_resonance() {
    // Away from resonance the closed form misses the excited population and
    // the coupling coherence that the strong coupling beam builds up.
    let m = weak_probe_mismatch(80.0, 200.0);
    assert!(m > 0.05 && m < 0.3, "mismatch {m}");
}

#[test]
fn zero_coupling_susceptibility_matches_direct_sum() {
    let scheme = build_level_scheme(SchemeId::Fig1Asym);
    let rates = RelaxationRates::default();
    let zeeman = ZeemanField::rb87_d1(0.0, 2);
    let (p, c) = fig1_drives(10.0, 0.0, 0.0);
    let shifts = StarkShifts::zero(&scheme);
    let rho = steady_state(&scheme, &p, &c, &shifts, &zeeman, &rates).unwrap();
    let medium = MediumParams::from_temperature(328.15, 1.62e17);
    let channels = probe_channels(&scheme, p.rabi_scale, &c, &shifts, &zeeman).unwrap();
    for dp in [0.0, mhz(-40.0), mhz(150.0)] {
        let factors = doppler_factors(&channels, &rates, dp, 0.0, &medium, &QuadratureSpec::default()).unwrap();
        let pair = susceptibilities(&channels, &rho, &factors, &medium);

        let mut minus = Complex64::new(0.0, 0.0);
        let mut plus = Complex64::new(0.0, 0.0);
        for t in &scheme.transitions {
            if t.lower.manifold != Manifold::GroundF1 || t.cg == 0.0 {
                continue;
            }
            let a = Complex64::new(rates.optical, -dp);
            let f = trapezoid_doppler(a, medium.wavenumber(), medium.speed, 400_001);
            let chi = Complex64::new(0.0, medium.density * t.dipole.powi(2) * rho.population(&t.lower) / (HBAR * EPSILON_0)) * f;
            match t.upper.m - t.lower.m {
                -1 => minus += chi,
                1 => plus += chi,
                _ => {}
            }
        }
        assert!((pair.chi_minus - minus).norm() <= 1e-4 * minus.norm());
        assert!((pair.chi_plus - plus).norm() <= 1e-4 * plus.norm());
        // Without the coupling beam the residual rotation comes from
        // unequal σ± populations weighted by the transition strengths.
        let residual = (pair.chi_plus - pair.chi_minus).re;
        assert!((residual - (plus - minus).re).abs() <= 1e-4 * plus.norm());
    }
}
