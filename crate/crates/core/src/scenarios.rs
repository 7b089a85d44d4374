//! Detuning sweeps, power and temperature scans, and transmission peak census.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::{
    build_level_scheme, calibration_anchor, mhz, rabi_from_power, stark_shifts, Beam,
    CgOverride, FieldDrive, FieldPolarization, LevelScheme, Polarization, SchemeId, StarkShifts,
    SublevelId, ZeemanField,
};
use crate::detection::{detector_intensities, propagate_cell, recover_angle, DetectorSignals, JonesVector};
use crate::dynamics::{probe_channels, steady_state, DensityMatrix, ProbeChannel, RelaxationRates};
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::spectra::{
    doppler_factors, most_probable_speed, rotation_angle, susceptibilities, vapor_density,
    MediumParams, RotationAngle, SpectrumRow, SusceptibilityPair,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationPolicy {
    /// Solve once with the probe on two-photon resonance, atoms at rest.
    Once,
    /// Solve at every probe detuning, atoms at rest.
    PerPoint,
}

/// Evenly spaced probe detunings, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetuningGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl DetuningGrid {
    pub fn symmetric(half_span: f64, points: usize) -> Self {
        DetuningGrid {
            start: -half_span,
            stop: half_span,
            points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.start.is_finite() || !self.stop.is_finite() || !(self.stop > self.start) {
            return Err(Error::Config("detuning range must be finite with start < stop".into()));
        }
        if self.points < 2 {
            return Err(Error::Config("detuning grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: SchemeId,
    pub probe: FieldDrive,
    pub coupling: FieldDrive,
    pub grid: DetuningGrid,
    pub medium: MediumParams,
    pub zeeman: ZeemanField,
    /// Include light shifts from the far excited level.
    pub stark: bool,
    pub rates: RelaxationRates,
    pub overrides: Vec<CgOverride>,
    pub quadrature: QuadratureSpec,
    pub populations: PopulationPolicy,
    /// Minimum peak prominence as a fraction of the curve's range.
    pub prominence: f64,
}

/// Lab polarization the coupling beam must have in a scheme.
pub fn coupling_polarization_for(scheme: SchemeId) -> FieldPolarization {
    match scheme {
        SchemeId::Fig10Sym => FieldPolarization::Linear,
        SchemeId::Fig1Asym | SchemeId::Fig11F1 => FieldPolarization::SigmaMinus,
    }
}

impl ScenarioConfig {
    /// Ω_c = 2π×80 MHz, Ω_p = 2π×10 MHz, N = 1.8e11 cm⁻³ at 55 °C, 5 cm cell,
    /// 1201 points over ±2π×400 MHz.
    pub fn new(scheme: SchemeId) -> Self {
        let excited_f = build_level_scheme(scheme).excited_f();
        ScenarioConfig {
            scheme,
            probe: FieldDrive::probe(FieldPolarization::Linear, mhz(10.0), 0.0),
            coupling: FieldDrive::coupling(coupling_polarization_for(scheme), mhz(80.0), 0.0),
            grid: DetuningGrid::symmetric(mhz(400.0), 1201),
            medium: MediumParams::from_temperature(328.15, 1.8e17),
            zeeman: ZeemanField::rb87_d1(0.0, excited_f),
            stark: true,
            rates: RelaxationRates::default(),
            overrides: Vec::new(),
            quadrature: QuadratureSpec::default(),
            populations: PopulationPolicy::Once,
            prominence: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.medium.validate()?;
        self.rates.validate()?;
        for d in [&self.probe, &self.coupling] {
            if !(d.rabi_scale >= 0.0) || !d.rabi_scale.is_finite() || !d.detuning.is_finite() {
                return Err(Error::Config(format!("{:?} Rabi frequency must be finite and >= 0", d.which)));
            }
        }
        if !(self.prominence >= 0.0 && self.prominence < 1.0) {
            return Err(Error::Config("prominence must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Scheme, light shifts and probe channels resolved from a configuration.
#[derive(Clone, Debug)]
pub struct Model {
    pub scheme: LevelScheme,
    pub shifts: StarkShifts,
    pub channels: Vec<ProbeChannel>,
}

impl Model {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let scheme = build_level_scheme(cfg.scheme).with_overrides(&cfg.overrides)?;
        scheme.atomic_polarizations(&cfg.coupling)?;
        let shifts = if cfg.stark {
            stark_shifts(&cfg.coupling, &scheme)
        } else {
            StarkShifts::zero(&scheme)
        };
        let channels = probe_channels(&scheme, cfg.probe.rabi_scale, &cfg.coupling, &shifts, &cfg.zeeman)?;
        Ok(Model {
            scheme,
            shifts,
            channels,
        })
    }

    /// Steady state for atoms at rest with the probe at `probe_detuning`.
    pub fn populations(&self, cfg: &ScenarioConfig, probe_detuning: f64) -> Result<DensityMatrix> {
        steady_state(
            &self.scheme,
            &cfg.probe.with_detuning(probe_detuning),
            &cfg.coupling,
            &self.shifts,
            &cfg.zeeman,
            &cfg.rates,
        )
    }

    /// Doppler-averaged susceptibilities at one probe detuning.
    pub fn susceptibility(
        &self,
        cfg: &ScenarioConfig,
        populations: &DensityMatrix,
        probe_detuning: f64,
    ) -> Result<(SusceptibilityPair, f64)> {
        let factors = doppler_factors(
            &self.channels,
            &cfg.rates,
            probe_detuning,
            cfg.coupling.detuning,
            &cfg.medium,
            &cfg.quadrature,
        )?;
        let err = factors.errors.iter().copied().fold(0.0, f64::max);
        Ok((susceptibilities(&self.channels, populations, &factors, &cfg.medium), err))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    /// rad/s
    pub detuning: f64,
    pub pair: SusceptibilityPair,
    pub angle: RotationAngle,
    pub signals: DetectorSignals,
    /// Angle recovered from the detector differences, rad.
    pub recovered: Option<f64>,
    /// Largest quadrature error estimate among the channel factors.
    pub quadrature_error: f64,
}

impl SweepPoint {
    pub fn spectrum_row(&self) -> SpectrumRow {
        SpectrumRow {
            detuning: self.detuning,
            pair: self.pair,
            angle: self.angle,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub abscissa: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub policy: PopulationPolicy,
    /// F=1 and F=2 populations used (representative point for `Once`).
    pub populations: Vec<(SublevelId, f64)>,
    pub stark_shifts: Vec<(SublevelId, f64)>,
    pub coupling_rabi: f64,
    pub probe_rabi: f64,
    pub density: f64,
    pub speed: f64,
    /// (power W, Rabi rad/s) for coupling then probe.
    pub anchors: [(f64, f64); 2],
}

impl SweepResult {
    pub fn angles(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.angle.exact).collect()
    }

    pub fn max_abs_angle(&self) -> f64 {
        self.points.iter().map(|p| p.angle.exact.abs()).fold(0.0, f64::max)
    }
}

fn ground_snapshot(rho: &DensityMatrix) -> Vec<(SublevelId, f64)> {
    rho.levels
        .iter()
        .filter(|s| s.manifold.is_ground())
        .map(|s| (*s, rho.population(s)))
        .collect()
}

pub fn sweep_probe_detuning(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let model = Model::new(cfg)?;
    let abscissa = cfg.grid.values();
    let representative = model.populations(cfg, cfg.coupling.detuning)?;
    let input = JonesVector::linear(0.0, 1.0);

    let point = |dp: f64, rho: &DensityMatrix| -> Result<SweepPoint> {
        let (pair, quadrature_error) = model.susceptibility(cfg, rho, dp)?;
        let angle = rotation_angle(&pair, &cfg.medium);
        let out = propagate_cell(&input, &pair, &cfg.medium);
        let signals = detector_intensities(&out, 1.0);
        Ok(SweepPoint {
            detuning: dp,
            pair,
            angle,
            signals,
            recovered: recover_angle(&signals).ok(),
            quadrature_error,
        })
    };

    let points = abscissa
        .par_iter()
        .map(|&dp| match cfg.populations {
            PopulationPolicy::Once => point(dp, &representative),
            PopulationPolicy::PerPoint => point(dp, &model.populations(cfg, dp)?),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        abscissa,
        points,
        policy: cfg.populations,
        populations: ground_snapshot(&representative),
        stark_shifts: model.shifts.shifts.clone(),
        coupling_rabi: cfg.coupling.rabi_scale,
        probe_rabi: cfg.probe.rabi_scale,
        density: cfg.medium.density,
        speed: cfg.medium.speed,
        anchors: [calibration_anchor(Beam::Coupling), calibration_anchor(Beam::Probe)],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakPair {
    /// (detuning, φ)
    pub left: (f64, f64),
    pub right: (f64, f64),
}

/// Angles at or below this magnitude count as zero when locating lobes, rad.
pub const FLAT_ANGLE: f64 = 1e-12;

/// Extremes of the two lobes adjacent to the sign change of `ys` closest to
/// `center`. None when there is no sign change.
pub fn dispersion_peaks(xs: &[f64], ys: &[f64], center: f64) -> Option<PeakPair> {
    assert_eq!(xs.len(), ys.len());
    let sign = |y: f64| if y > FLAT_ANGLE { 1 } else if y < -FLAT_ANGLE { -1 } else { 0 };
    let nonzero: Vec<usize> = (0..ys.len()).filter(|&i| sign(ys[i]) != 0).collect();
    let crossing = nonzero
        .windows(2)
        .filter(|w| sign(ys[w[0]]) != sign(ys[w[1]]))
        .min_by(|a, b| {
            let mid = |w: &[usize]| (0.5 * (xs[w[0]] + xs[w[1]]) - center).abs();
            mid(a).total_cmp(&mid(b))
        })?;
    let (li, ri) = (crossing[0], crossing[1]);

    let lobe_extreme = |range: &mut dyn Iterator<Item = usize>, s: i32| {
        let mut best = None::<usize>;
        for i in range {
            let si = sign(ys[i]);
            if si == -s {
                break;
            }
            if si == s && best.is_none_or(|b| ys[i].abs() > ys[b].abs()) {
                best = Some(i);
            }
        }
        best
    };
    let l = lobe_extreme(&mut (0..=li).rev(), sign(ys[li]))?;
    let r = lobe_extreme(&mut (ri..ys.len()), sign(ys[ri]))?;
    Some(PeakPair {
        left: (xs[l], ys[l]),
        right: (xs[r], ys[r]),
    })
}

/// Lobe extremes of φ around two-photon resonance.
pub fn find_dispersion_peaks(result: &SweepResult, coupling_detuning: f64) -> Option<PeakPair> {
    dispersion_peaks(&result.abscissa, &result.angles(), coupling_detuning)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerScanEntry {
    /// W
    pub power: f64,
    /// rad/s
    pub coupling_rabi: f64,
    pub peaks: Option<PeakPair>,
    pub max_abs_angle: f64,
}

pub fn sweep_coupling_power(cfg: &ScenarioConfig, powers: &[f64]) -> Result<Vec<PowerScanEntry>> {
    if powers.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Config("coupling powers must be positive".into()));
    }
    if powers.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("coupling powers must be strictly ascending".into()));
    }
    powers
        .iter()
        .map(|&p| {
            let rabi = rabi_from_power(p, Beam::Coupling)?;
            let mut c = cfg.clone();
            c.coupling.rabi_scale = rabi;
            let r = sweep_probe_detuning(&c)?;
            Ok(PowerScanEntry {
                power: p,
                coupling_rabi: rabi,
                peaks: find_dispersion_peaks(&r, c.coupling.detuning),
                max_abs_angle: r.max_abs_angle(),
            })
        })
        .collect()
}

/// Applies the temperature to density and thermal speed.
pub fn medium_at_temperature(base: &MediumParams, temperature: f64) -> Result<MediumParams> {
    Ok(MediumParams {
        density: vapor_density(temperature)?,
        temperature,
        speed: most_probable_speed(temperature),
        ..*base
    })
}

pub fn sweep_temperature(cfg: &ScenarioConfig, temps: &[f64]) -> Result<Vec<(f64, SweepResult)>> {
    temps
        .iter()
        .map(|&t| {
            let mut c = cfg.clone();
            c.medium = medium_at_temperature(&cfg.medium, t)?;
            Ok((t, sweep_probe_detuning(&c)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionCurve {
    pub component: Polarization,
    /// rad/s
    pub detuning: Vec<f64>,
    pub transmission: Vec<f64>,
}

/// Probe transmission exp(-α d) when the probe carries only one circular
/// component.
pub fn eit_transmission(cfg: &ScenarioConfig, component: Polarization) -> Result<TransmissionCurve> {
    let probe_pol = match component {
        Polarization::SigmaMinus => FieldPolarization::SigmaMinus,
        Polarization::SigmaPlus => FieldPolarization::SigmaPlus,
        Polarization::Pi => return Err(Error::Config("transmission needs a circular probe component".into())),
    };
    let mut c = cfg.clone();
    c.probe.polarization = probe_pol;
    let model = Model::new(&c)?;
    let detuning = c.grid.values();
    let representative = model.populations(&c, c.coupling.detuning)?;
    let transmission = detuning
        .par_iter()
        .map(|&dp| {
            let rho = match c.populations {
                PopulationPolicy::Once => None,
                PopulationPolicy::PerPoint => Some(model.populations(&c, dp)?),
            };
            let (pair, _) = model.susceptibility(&c, rho.as_ref().unwrap_or(&representative), dp)?;
            let alpha = match component {
                Polarization::SigmaMinus => pair.alpha_minus,
                _ => pair.alpha_plus,
            };
            Ok((-alpha * c.medium.length).exp())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionCurve {
        component,
        detuning,
        transmission,
    })
}

/// Indices of local maxima whose topographic prominence is at least
/// `fraction` of the curve's peak-to-valley range. Flat tops count once (at
/// their left edge); maxima at the ends of the curve are ignored.
pub fn count_peaks(ys: &[f64], fraction: f64) -> Vec<usize> {
    let n = ys.len();
    if n < 3 {
        return Vec::new();
    }
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let threshold = fraction * (hi - lo);
    if !(hi > lo) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if ys[i] > ys[i - 1] {
            let mut j = i;
            while j + 1 < n && ys[j + 1] == ys[i] {
                j += 1;
            }
            if j + 1 < n && ys[j + 1] < ys[i] {
                let h = ys[i];
                let left_base = ys[..i].iter().rev().take_while(|&&y| y <= h).fold(h, |m, &y| m.min(y));
                let right_base = ys[j + 1..].iter().take_while(|&&y| y <= h).fold(h, |m, &y| m.min(y));
                if h - left_base.max(right_base) >= threshold {
                    peaks.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Prominent positive maxima and negative minima of an angle spectrum.
pub fn extrema_census(angles: &[f64], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let maxima = count_peaks(angles, fraction)
        .into_iter()
        .filter(|&i| angles[i] > 0.0)
        .collect();
    let neg: Vec<f64> = angles.iter().map(|y| -y).collect();
    let minima = count_peaks(&neg, fraction)
        .into_iter()
        .filter(|&i| angles[i] < 0.0)
        .collect();
    (maxima, minima)
}

/// Extrema census restricted to |Δp - center| ≤ half_width. Indices refer to
/// the full sweep.
pub fn extrema_near(result: &SweepResult, center: f64, half_width: f64, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let idx: Vec<usize> = (0..result.abscissa.len())
        .filter(|&i| (result.abscissa[i] - center).abs() <= half_width)
        .collect();
    let Some(&first) = idx.first() else {
        return (Vec::new(), Vec::new());
    };
    let angles: Vec<f64> = idx.iter().map(|&i| result.points[i].angle.exact).collect();
    let (maxima, minima) = extrema_census(&angles, fraction);
    (
        maxima.into_iter().map(|i| i + first).collect(),
        minima.into_iter().map(|i| i + first).collect(),
    )
}
