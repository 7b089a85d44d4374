//! Doppler-averaged linear response of the probe and the resulting rotation.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{
    to_mhz, Polarization, BOLTZMANN, D1_WAVELENGTH, EPSILON_0, HBAR, RB87_MASS, TWO_PI,
};
use crate::dynamics::{DensityMatrix, ProbeChannel, RelaxationRates};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureResult, QuadratureSpec};

/// Half-width of the velocity window in units of the most probable speed.
pub const VELOCITY_SPAN: f64 = 6.0;

/// Temperature anchoring the density curve, K.
pub const DENSITY_ANCHOR_KELVIN: f64 = 328.15;
/// Atomic density at the anchor temperature, m⁻³.
pub const DENSITY_ANCHOR: f64 = 1.62e17;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// atoms/m³
    pub density: f64,
    /// K
    pub temperature: f64,
    /// Most probable speed, m/s.
    pub speed: f64,
    /// Cell length, m.
    pub length: f64,
    /// Probe wavelength, m.
    pub wavelength: f64,
}

impl MediumParams {
    /// 5 cm cell on the D1 line, speed from temperature.
    pub fn from_temperature(temperature: f64, density: f64) -> Self {
        MediumParams {
            density,
            temperature,
            speed: most_probable_speed(temperature),
            length: 0.05,
            wavelength: D1_WAVELENGTH,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        TWO_PI / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("density", self.density),
            ("temperature", self.temperature),
            ("length", self.length),
            ("wavelength", self.wavelength),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("medium {name} must be finite and > 0")));
            }
        }
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(Error::Domain("medium speed must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// sqrt(2 k_B T / m) for 87Rb.
pub fn most_probable_speed(temperature: f64) -> f64 {
    (2.0 * BOLTZMANN * temperature / RB87_MASS).sqrt()
}

/// Saturated vapor pressure of liquid Rb, Pa.
pub fn vapor_pressure(temperature: f64) -> f64 {
    let torr = 10f64.powf(2.881 + 4.857 - 4215.0 / temperature);
    torr * 133.322_368
}

/// Valid temperature range of the density curve, K.
pub const DENSITY_CURVE_RANGE: (f64, f64) = (312.46, 550.0);

/// Atomic density from the vapor-pressure curve, rescaled so that the anchor
/// temperature reproduces the anchor density. m⁻³.
pub fn vapor_density(temperature: f64) -> Result<f64> {
    let (lo, hi) = DENSITY_CURVE_RANGE;
    if !(temperature >= lo && temperature <= hi) {
        return Err(Error::Domain(format!(
            "temperature {temperature} K outside density curve range [{lo}, {hi}] K"
        )));
    }
    let ideal = |t: f64| vapor_pressure(t) / (BOLTZMANN * t);
    Ok(DENSITY_ANCHOR * ideal(temperature) / ideal(DENSITY_ANCHOR_KELVIN))
}

/// Normalized one-dimensional Maxwellian: n0 exp(-u²/V²) / (V sqrt(π)).
pub fn maxwellian_weight(u: f64, speed: f64, n0: f64) -> f64 {
    n0 * (-(u / speed).powi(2)).exp() / (speed * std::f64::consts::PI.sqrt())
}

/// ∫ w(u) / (a - i k u) du with the normalized Maxwellian w over ±6V.
///
/// The pole of the integrand sits at u = Im(a)/k (one-photon resonance of
/// that velocity class); it is used as a panel boundary. With zero speed
/// the result is exactly 1/a.
pub fn doppler_integral(a: Complex64, wavenumber: f64, speed: f64, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    if speed == 0.0 {
        return Ok(QuadratureResult {
            value: Complex64::new(1.0, 0.0) / a,
            error: 0.0,
            evaluations: 0,
            intervals: 0,
        });
    }
    let lim = VELOCITY_SPAN * speed;
    let resonance = a.im / wavenumber;
    let width = a.re.abs() / wavenumber;
    let mut breaks = vec![-lim, 0.0, lim];
    for u in [resonance - 10.0 * width, resonance, resonance + 10.0 * width] {
        if u > -lim && u < lim {
            breaks.push(u);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    integrate(
        |u| Complex64::new(maxwellian_weight(u, speed, 1.0), 0.0) / (a - Complex64::new(0.0, wavenumber * u)),
        &breaks,
        spec,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct DopplerFactors {
    /// One factor per probe channel, same order as the channels, s.
    pub values: Vec<Complex64>,
    pub errors: Vec<f64>,
    pub evaluations: usize,
}

/// Velocity-averaged factor of one channel. Only the one-photon term sees the
/// Doppler shift; the two-photon denominator is Doppler free for
/// co-propagating beams.
pub fn doppler_factor(
    channel: &ProbeChannel,
    rates: &RelaxationRates,
    probe_detuning: f64,
    coupling_detuning: f64,
    medium: &MediumParams,
    spec: &QuadratureSpec,
) -> Result<QuadratureResult> {
    let a = channel.denominator(rates, probe_detuning, coupling_detuning);
    doppler_integral(a, medium.wavenumber(), medium.speed, spec)
}

pub fn doppler_factors(
    channels: &[ProbeChannel],
    rates: &RelaxationRates,
    probe_detuning: f64,
    coupling_detuning: f64,
    medium: &MediumParams,
    spec: &QuadratureSpec,
) -> Result<DopplerFactors> {
    let mut out = DopplerFactors {
        values: Vec::with_capacity(channels.len()),
        errors: Vec::with_capacity(channels.len()),
        evaluations: 0,
    };
    for ch in channels {
        let r = doppler_factor(ch, rates, probe_detuning, coupling_detuning, medium, spec)?;
        out.values.push(r.value);
        out.errors.push(r.error);
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SusceptibilityPair {
    pub chi_minus: Complex64,
    pub chi_plus: Complex64,
    pub n_minus: f64,
    pub n_plus: f64,
    /// 1/m
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

impl SusceptibilityPair {
    pub fn new(chi_minus: Complex64, chi_plus: Complex64, wavelength: f64) -> Self {
        let k = TWO_PI / wavelength;
        let one = Complex64::new(1.0, 0.0);
        SusceptibilityPair {
            chi_minus,
            chi_plus,
            n_minus: (1.0 + chi_minus.re).sqrt(),
            n_plus: (1.0 + chi_plus.re).sqrt(),
            alpha_minus: 2.0 * k * (one + chi_minus).sqrt().im,
            alpha_plus: 2.0 * k * (one + chi_plus).sqrt().im,
        }
    }

    /// n⁺ - n⁻ without cancellation.
    pub fn index_difference(&self) -> f64 {
        (self.chi_plus.re - self.chi_minus.re) / (self.n_plus + self.n_minus)
    }

    pub fn max_abs_chi(&self) -> f64 {
        self.chi_minus.norm().max(self.chi_plus.norm())
    }
}

/// Partial susceptibility of each channel, i N d² ρ_aa F / (ħ ε0).
pub fn partial_susceptibilities(
    channels: &[ProbeChannel],
    populations: &DensityMatrix,
    factors: &DopplerFactors,
    medium: &MediumParams,
) -> Vec<Complex64> {
    channels
        .iter()
        .zip(&factors.values)
        .map(|(ch, f)| {
            let pop = populations.population(&ch.lower);
            Complex64::new(0.0, medium.density * ch.dipole * ch.dipole * pop / (HBAR * EPSILON_0)) * f
        })
        .collect()
}

pub fn susceptibilities(
    channels: &[ProbeChannel],
    populations: &DensityMatrix,
    factors: &DopplerFactors,
    medium: &MediumParams,
) -> SusceptibilityPair {
    let partials = partial_susceptibilities(channels, populations, factors, medium);
    let mut minus = Complex64::new(0.0, 0.0);
    let mut plus = Complex64::new(0.0, 0.0);
    for (ch, chi) in channels.iter().zip(partials) {
        match ch.polarization {
            Polarization::SigmaMinus => minus += chi,
            Polarization::SigmaPlus => plus += chi,
            Polarization::Pi => {}
        }
    }
    SusceptibilityPair::new(minus, plus, medium.wavelength)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAngle {
    /// (π / 2λ) Re(χ⁺ - χ⁻) d, rad
    pub approx: f64,
    /// (π / λ)(n⁺ - n⁻) d, rad
    pub exact: f64,
}

pub fn rotation_angle(pair: &SusceptibilityPair, medium: &MediumParams) -> RotationAngle {
    let scale = std::f64::consts::PI / medium.wavelength * medium.length;
    RotationAngle {
        approx: 0.5 * scale * (pair.chi_plus.re - pair.chi_minus.re),
        exact: scale * pair.index_difference(),
    }
}

/// One row of a probe-detuning spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumRow {
    /// rad/s
    pub detuning: f64,
    pub pair: SusceptibilityPair,
    pub angle: RotationAngle,
}

pub const SPECTRUM_HEADER: &str =
    "detuning_mhz,re_chi_minus,im_chi_minus,re_chi_plus,im_chi_plus,n_plus_minus_n_minus,alpha_plus,alpha_minus,phi_deg";

pub fn write_spectrum_csv<W: Write>(rows: &[SpectrumRow], mut out: W) -> Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for r in rows {
        let p = &r.pair;
        writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            to_mhz(r.detuning),
            p.chi_minus.re,
            p.chi_minus.im,
            p.chi_plus.re,
            p.chi_plus.im,
            p.index_difference(),
            p.alpha_plus,
            p.alpha_minus,
            r.angle.exact.to_degrees()
        )?;
    }
    Ok(())
}
