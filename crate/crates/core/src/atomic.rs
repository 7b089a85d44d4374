//! Level schemes of the 87Rb D1 line, transition strengths, Zeeman and
//! light shifts, and the power to Rabi-frequency calibration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::angmom::LineStructure;
use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Bohr magneton over Planck's constant, Hz/T.
pub const BOHR_MAGNETON_HZ_PER_T: f64 = 1.399_624_49e10;

pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;
pub const D1_WAVELENGTH: f64 = 794.979e-9;
pub const D1_REDUCED_DIPOLE: f64 = 2.537e-29;
pub const D1_NATURAL_LINEWIDTH: f64 = TWO_PI * 5.75e6;
pub const GROUND_HYPERFINE_SPLITTING: f64 = TWO_PI * 6.834_682_610_904e9;
pub const EXCITED_HYPERFINE_SPLITTING: f64 = TWO_PI * 816.0e6;

/// Converts "MHz of ν" into angular frequency (rad/s).
pub fn mhz(v: f64) -> f64 {
    v * TWO_PI * 1e6
}

/// Converts angular frequency (rad/s) into MHz of ν.
pub fn to_mhz(w: f64) -> f64 {
    w / (TWO_PI * 1e6)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifold {
    GroundF1,
    GroundF2,
    Excited { f: i32 },
}

impl Manifold {
    pub fn f(self) -> i32 {
        match self {
            Manifold::GroundF1 => 1,
            Manifold::GroundF2 => 2,
            Manifold::Excited { f } => f,
        }
    }

    pub fn is_ground(self) -> bool {
        !matches!(self, Manifold::Excited { .. })
    }

    fn letter(self) -> char {
        match self {
            Manifold::GroundF1 => 'a',
            Manifold::GroundF2 => 'b',
            Manifold::Excited { .. } => 'c',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SublevelId {
    pub manifold: Manifold,
    pub m: i32,
}

impl SublevelId {
    pub fn new(manifold: Manifold, m: i32) -> Self {
        SublevelId { manifold, m }
    }

    pub fn a(i: i32) -> Self {
        SublevelId::new(Manifold::GroundF1, i - 2)
    }

    pub fn b(j: i32) -> Self {
        SublevelId::new(Manifold::GroundF2, j - 3)
    }

    /// Excited sublevel `c_k` of an F' manifold, k = m + F' + 1.
    pub fn c(k: i32, f: i32) -> Self {
        SublevelId::new(Manifold::Excited { f }, k - f - 1)
    }

    /// Label in the a_i / b_j / c_k convention, counted from the lowest m.
    pub fn label(&self) -> String {
        format!("{}{}", self.manifold.letter(), self.m + self.manifold.f() + 1)
    }
}

impl fmt::Display for SublevelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    SigmaMinus,
    SigmaPlus,
    Pi,
}

impl Polarization {
    /// Polarization absorbed on a lower → upper transition with the given m_upper - m_lower.
    pub fn from_delta_m(dm: i32) -> Option<Self> {
        match dm {
            -1 => Some(Polarization::SigmaMinus),
            1 => Some(Polarization::SigmaPlus),
            0 => Some(Polarization::Pi),
            _ => None,
        }
    }

    pub fn delta_m(self) -> i32 {
        match self {
            Polarization::SigmaMinus => -1,
            Polarization::SigmaPlus => 1,
            Polarization::Pi => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarization::SigmaMinus => "sigma_minus",
            Polarization::SigmaPlus => "sigma_plus",
            Polarization::Pi => "pi",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub lower: SublevelId,
    pub upper: SublevelId,
    pub polarization: Polarization,
    /// Coupling strength used for drives and susceptibilities (overridable).
    pub cg: f64,
    /// Tabulated value, used for spontaneous-emission branching.
    pub natural_cg: f64,
    /// cg × reduced dipole moment, C·m.
    pub dipole: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "fig1_asym")]
    Fig1Asym,
    #[serde(rename = "fig10_sym")]
    Fig10Sym,
    #[serde(rename = "fig11_f1")]
    Fig11F1,
}

impl SchemeId {
    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Fig1Asym => "fig1_asym",
            SchemeId::Fig10Sym => "fig10_sym",
            SchemeId::Fig11F1 => "fig11_f1",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1_asym" => Ok(SchemeId::Fig1Asym),
            "fig10_sym" => Ok(SchemeId::Fig10Sym),
            "fig11_f1" => Ok(SchemeId::Fig11F1),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beam {
    Probe,
    Coupling,
}

/// Polarization of a laser beam in the lab frame.
///
/// For the probe (propagating along the field axis) `Linear` is an equal
/// superposition of σ⁺ and σ⁻. For a coupling beam crossing the field axis
/// at right angles `Linear` drives π transitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldPolarization {
    SigmaMinus,
    SigmaPlus,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldDrive {
    pub which: Beam,
    pub polarization: FieldPolarization,
    /// rad/s
    pub rabi_scale: f64,
    /// rad/s
    pub detuning: f64,
}

impl FieldDrive {
    pub fn probe(polarization: FieldPolarization, rabi_scale: f64, detuning: f64) -> Self {
        FieldDrive {
            which: Beam::Probe,
            polarization,
            rabi_scale,
            detuning,
        }
    }

    pub fn coupling(polarization: FieldPolarization, rabi_scale: f64, detuning: f64) -> Self {
        FieldDrive {
            which: Beam::Coupling,
            polarization,
            rabi_scale,
            detuning,
        }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_rabi(mut self, rabi_scale: f64) -> Self {
        self.rabi_scale = rabi_scale;
        self
    }
}

/// Off-resonant excited manifold used for light shifts of the coupled ground level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FarLevel {
    pub f: i32,
    /// Coupling-laser detuning from the far manifold, rad/s.
    pub detuning: f64,
}

/// A user replacement for one transition strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgOverride {
    pub lower: String,
    pub upper: String,
    pub cg: f64,
}

#[derive(Clone, Debug)]
pub struct LevelScheme {
    pub id: SchemeId,
    pub line: LineStructure,
    pub sublevels: Vec<SublevelId>,
    pub transitions: Vec<Transition>,
    /// Optical angular frequency of the a → c transition, rad/s.
    pub probe_frequency: f64,
    /// ω_ac - ω_ab, rad/s.
    pub coupling_frequency: f64,
    pub far_level: Option<FarLevel>,
    pub reduced_dipole: f64,
    /// Atomic polarization the coupling beam drives.
    pub coupling_polarization: Polarization,
}

pub fn build_level_scheme(id: SchemeId) -> LevelScheme {
    let line = LineStructure::RB87_D1;
    let (excited_f, coupling_polarization, far_level) = match id {
        SchemeId::Fig1Asym => (
            2,
            Polarization::SigmaMinus,
            Some(FarLevel {
                f: 1,
                detuning: EXCITED_HYPERFINE_SPLITTING,
            }),
        ),
        SchemeId::Fig10Sym => (2, Polarization::Pi, None),
        SchemeId::Fig11F1 => (1, Polarization::SigmaMinus, None),
    };

    let excited = Manifold::Excited { f: excited_f };
    let mut sublevels = Vec::new();
    for manifold in [Manifold::GroundF1, Manifold::GroundF2, excited] {
        let f = manifold.f();
        sublevels.extend((-f..=f).map(|m| SublevelId::new(manifold, m)));
    }

    let mut transitions = Vec::new();
    for lower in sublevels.iter().filter(|s| s.manifold.is_ground()) {
        for upper in sublevels.iter().filter(|s| !s.manifold.is_ground()) {
            let Some(polarization) = Polarization::from_delta_m(upper.m - lower.m) else {
                continue;
            };
            let cg = dipole_factor(&line, lower, upper);
            transitions.push(Transition {
                lower: *lower,
                upper: *upper,
                polarization,
                cg,
                natural_cg: cg,
                dipole: cg * D1_REDUCED_DIPOLE,
            });
        }
    }

    let probe_frequency = TWO_PI * SPEED_OF_LIGHT / D1_WAVELENGTH;
    LevelScheme {
        id,
        line,
        sublevels,
        transitions,
        probe_frequency,
        coupling_frequency: probe_frequency - GROUND_HYPERFINE_SPLITTING,
        far_level,
        reduced_dipole: D1_REDUCED_DIPOLE,
        coupling_polarization,
    }
}

fn dipole_factor(line: &LineStructure, lower: &SublevelId, upper: &SublevelId) -> f64 {
    line.dipole_factor(
        2 * lower.manifold.f(),
        2 * lower.m,
        2 * upper.manifold.f(),
        2 * upper.m,
    )
}

/// Signed transition strength between a ground and an excited sublevel of the
/// D1 line. Forbidden pairs give exactly zero.
pub fn clebsch_gordan(lower: SublevelId, upper: SublevelId) -> f64 {
    if !lower.manifold.is_ground() || upper.manifold.is_ground() {
        return 0.0;
    }
    dipole_factor(&LineStructure::RB87_D1, &lower, &upper)
}

impl LevelScheme {
    pub fn dimension(&self) -> usize {
        self.sublevels.len()
    }

    pub fn excited_f(&self) -> i32 {
        self.sublevels
            .iter()
            .find_map(|s| match s.manifold {
                Manifold::Excited { f } => Some(f),
                _ => None,
            })
            .expect("scheme has an excited manifold")
    }

    pub fn index_of(&self, s: &SublevelId) -> Option<usize> {
        self.sublevels.iter().position(|x| x == s)
    }

    pub fn sublevel_by_label(&self, label: &str) -> Option<SublevelId> {
        self.sublevels.iter().copied().find(|s| s.label() == label)
    }

    pub fn in_manifold(&self, manifold: Manifold) -> impl Iterator<Item = SublevelId> + '_ {
        self.sublevels
            .iter()
            .copied()
            .filter(move |s| s.manifold == manifold)
    }

    pub fn transition(&self, lower: &SublevelId, upper: &SublevelId) -> Option<&Transition> {
        self.transitions
            .iter()
            .find(|t| t.lower == *lower && t.upper == *upper)
    }

    /// Returns a copy with the listed strengths replaced.
    pub fn with_overrides(&self, overrides: &[CgOverride]) -> Result<LevelScheme> {
        let mut scheme = self.clone();
        for o in overrides {
            let lower = scheme.sublevel_by_label(&o.lower);
            let upper = scheme.sublevel_by_label(&o.upper);
            let t = match (lower, upper) {
                (Some(l), Some(u)) => scheme
                    .transitions
                    .iter_mut()
                    .find(|t| t.lower == l && t.upper == u),
                _ => None,
            };
            let Some(t) = t else {
                return Err(Error::Config(format!(
                    "cg override names unknown transition {} -> {}",
                    o.lower, o.upper
                )));
            };
            if !o.cg.is_finite() {
                return Err(Error::Config(format!(
                    "cg override for {} -> {} is not finite",
                    o.lower, o.upper
                )));
            }
            t.cg = o.cg;
            t.dipole = o.cg * scheme.reduced_dipole;
        }
        Ok(scheme)
    }

    /// Atomic polarizations carried by a beam, checked against the scheme geometry.
    pub fn atomic_polarizations(&self, drive: &FieldDrive) -> Result<Vec<Polarization>> {
        match drive.which {
            Beam::Probe => Ok(match drive.polarization {
                FieldPolarization::SigmaMinus => vec![Polarization::SigmaMinus],
                FieldPolarization::SigmaPlus => vec![Polarization::SigmaPlus],
                FieldPolarization::Linear => {
                    vec![Polarization::SigmaMinus, Polarization::SigmaPlus]
                }
            }),
            Beam::Coupling => {
                let expected = match self.coupling_polarization {
                    Polarization::Pi => FieldPolarization::Linear,
                    Polarization::SigmaMinus => FieldPolarization::SigmaMinus,
                    Polarization::SigmaPlus => FieldPolarization::SigmaPlus,
                };
                if drive.polarization != expected {
                    return Err(Error::Config(format!(
                        "coupling polarization {:?} does not match scheme {} (expects {:?})",
                        drive.polarization, self.id, expected
                    )));
                }
                Ok(vec![self.coupling_polarization])
            }
        }
    }

    fn beam_manifold(which: Beam) -> Manifold {
        match which {
            Beam::Probe => Manifold::GroundF1,
            Beam::Coupling => Manifold::GroundF2,
        }
    }

    /// Transitions a beam drives, including zero-strength ones.
    pub fn driven_transitions(&self, drive: &FieldDrive) -> Result<Vec<&Transition>> {
        let pols = self.atomic_polarizations(drive)?;
        let manifold = Self::beam_manifold(drive.which);
        Ok(self
            .transitions
            .iter()
            .filter(|t| t.lower.manifold == manifold && pols.contains(&t.polarization))
            .collect())
    }

    /// Largest tabulated |cg| among the transitions a beam can drive in this
    /// scheme; the beam's Rabi scale refers to this transition.
    pub fn rabi_normalization(&self, which: Beam) -> f64 {
        let manifold = Self::beam_manifold(which);
        let pols: &[Polarization] = match which {
            Beam::Probe => &[Polarization::SigmaMinus, Polarization::SigmaPlus],
            Beam::Coupling => std::slice::from_ref(&self.coupling_polarization),
        };
        self.transitions
            .iter()
            .filter(|t| t.lower.manifold == manifold && pols.contains(&t.polarization))
            .map(|t| t.natural_cg.abs())
            .fold(0.0, f64::max)
    }

    /// Per-transition Rabi frequency.
    pub fn transition_rabi(&self, drive: &FieldDrive, t: &Transition) -> f64 {
        drive.rabi_scale * t.cg / self.rabi_normalization(drive.which)
    }

    /// Tabulated decay amplitudes out of an excited sublevel.
    pub fn decay_channels(&self, excited: &SublevelId) -> Vec<&Transition> {
        self.transitions
            .iter()
            .filter(|t| t.upper == *excited && t.natural_cg != 0.0)
            .collect()
    }

    /// Counts Λ triples (F=1 sublevel, excited sublevel, F=2 sublevel) linked by a
    /// nonzero probe transition of each circular component and a nonzero
    /// coupling transition. Returns (σ⁻ count, σ⁺ count).
    pub fn lambda_census(&self) -> (usize, usize) {
        let count = |pol: Polarization| {
            self.transitions
                .iter()
                .filter(|p| {
                    p.lower.manifold == Manifold::GroundF1 && p.polarization == pol && p.cg != 0.0
                })
                .filter(|p| {
                    self.transitions.iter().any(|c| {
                        c.upper == p.upper
                            && c.lower.manifold == Manifold::GroundF2
                            && c.polarization == self.coupling_polarization
                            && c.cg != 0.0
                    })
                })
                .count()
        };
        (count(Polarization::SigmaMinus), count(Polarization::SigmaPlus))
    }

    /// Writes the transition table as CSV (lower, upper, polarization, cg).
    pub fn write_cg_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lower,upper,polarization,cg")?;
        for t in &self.transitions {
            writeln!(
                out,
                "{},{},{},{:.8e}",
                t.lower.label(),
                t.upper.label(),
                t.polarization.name(),
                t.cg
            )?;
        }
        Ok(())
    }
}

/// Light shifts of the F=2 sublevels from the coupling beam's off-resonant
/// coupling to the far excited manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct StarkShifts {
    /// (F=2 sublevel, shift in rad/s), zero entries included.
    pub shifts: Vec<(SublevelId, f64)>,
    /// Set when the scheme has no far level and all shifts were forced to zero.
    pub no_far_level: bool,
}

impl StarkShifts {
    pub fn zero(scheme: &LevelScheme) -> Self {
        StarkShifts {
            shifts: scheme
                .in_manifold(Manifold::GroundF2)
                .map(|s| (s, 0.0))
                .collect(),
            no_far_level: scheme.far_level.is_none(),
        }
    }

    pub fn of(&self, s: &SublevelId) -> f64 {
        self.shifts
            .iter()
            .find(|(x, _)| x == s)
            .map_or(0.0, |(_, d)| *d)
    }

    /// Shift of b_j.
    pub fn b(&self, j: i32) -> f64 {
        self.of(&SublevelId::b(j))
    }
}

pub fn stark_shifts(coupling: &FieldDrive, scheme: &LevelScheme) -> StarkShifts {
    let Some(far) = scheme.far_level else {
        log::warn!("scheme {} has no far level; light shifts set to zero", scheme.id);
        return StarkShifts::zero(scheme);
    };
    let norm = scheme.rabi_normalization(Beam::Coupling);
    let dm = scheme.coupling_polarization.delta_m();
    let shifts = scheme
        .in_manifold(Manifold::GroundF2)
        .map(|b| {
            let target = SublevelId::new(Manifold::Excited { f: far.f }, b.m + dm);
            let cg = dipole_factor(&scheme.line, &b, &target);
            let rabi = coupling.rabi_scale * cg / norm;
            (b, rabi * rabi / (4.0 * far.detuning))
        })
        .collect();
    StarkShifts {
        shifts,
        no_far_level: false,
    }
}

/// Longitudinal magnetic field and Landé factors per manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeemanField {
    pub b_tesla: f64,
    pub g_f1: f64,
    pub g_f2: f64,
    pub g_excited: f64,
}

impl ZeemanField {
    /// Default Landé factors of the D1 line for the given excited F'.
    pub fn rb87_d1(b_tesla: f64, excited_f: i32) -> Self {
        ZeemanField {
            b_tesla,
            g_f1: -0.5,
            g_f2: 0.5,
            g_excited: if excited_f == 1 { -1.0 / 6.0 } else { 1.0 / 6.0 },
        }
    }

    pub fn g_factor(&self, manifold: Manifold) -> f64 {
        match manifold {
            Manifold::GroundF1 => self.g_f1,
            Manifold::GroundF2 => self.g_f2,
            Manifold::Excited { .. } => self.g_excited,
        }
    }
}

pub fn zeeman_shift(s: &SublevelId, field: &ZeemanField) -> f64 {
    TWO_PI * BOHR_MAGNETON_HZ_PER_T * field.g_factor(s.manifold) * s.m as f64 * field.b_tesla
}

/// (reference power in W, Rabi frequency in rad/s at that power)
pub fn calibration_anchor(which: Beam) -> (f64, f64) {
    match which {
        Beam::Coupling => (15e-3, mhz(100.0)),
        Beam::Probe => (150e-6, mhz(10.0)),
    }
}

pub fn rabi_from_power(power: f64, which: Beam) -> Result<f64> {
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::Domain(format!("power must be finite and >= 0, got {power}")));
    }
    let (p_ref, rabi_ref) = calibration_anchor(which);
    Ok(rabi_ref * (power / p_ref).sqrt())
}
