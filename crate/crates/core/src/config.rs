//! TOML run configuration with unit-suffixed keys, dotted overrides and a
//! resolved metadata sidecar that parses back to the same run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::atomic::{
    build_level_scheme, calibration_anchor, mhz, rabi_from_power, Beam, CgOverride, FieldDrive,
    FieldPolarization, Polarization, SchemeId, ZeemanField, D1_NATURAL_LINEWIDTH,
};
use crate::dynamics::RelaxationRates;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::scenarios::{coupling_polarization_for, DetuningGrid, PopulationPolicy, ScenarioConfig};
use crate::spectra::{most_probable_speed, vapor_density, MediumParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    PowerScan,
    TempScan,
    EitPeaks,
    DetectorTrace,
    Populations,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization: Option<FieldPolarization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_uw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_start_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_stop_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarization: Option<FieldPolarization>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_celsius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_cm3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_m_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_gauss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_f2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_excited: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxationSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optical_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperfine_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeeman_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spontaneous_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_exchange_mhz: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stark: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<PopulationPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prominence: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_intervals: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling_powers_mw: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperatures_celsius: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<Polarization>>,
}

/// The configuration document as written by a user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Scenario,
    pub scheme: SchemeId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<u8>,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    #[serde(default)]
    pub medium: MediumSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub relaxation: RelaxationSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<CgOverride>,
    /// Informational; ignored on input.
    #[serde(default, skip_serializing)]
    pub provenance: Option<toml::Table>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanSpec {
    /// W
    pub coupling_powers: Vec<f64>,
    /// K
    pub temperatures: Vec<f64>,
    pub components: Vec<Polarization>,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub scan: ScanSpec,
    pub output_dir: PathBuf,
    pub verbosity: u8,
    /// The configuration with every default filled in.
    pub resolved: ConfigFile,
}

const KELVIN_OFFSET: f64 = 273.15;
const TESLA_PER_GAUSS: f64 = 1e-4;

/// Quantity stems and the key that carries their unit.
const UNIT_KEYS: &[(&str, &str, &str)] = &[
    ("probe", "power", "power_uw"),
    ("probe", "rabi", "rabi_mhz"),
    ("probe", "detuning_start", "detuning_start_mhz"),
    ("probe", "detuning_stop", "detuning_stop_mhz"),
    ("coupling", "power", "power_mw"),
    ("coupling", "rabi", "rabi_mhz"),
    ("coupling", "detuning", "detuning_mhz"),
    ("medium", "temperature", "temperature_celsius"),
    ("medium", "density", "density_cm3"),
    ("medium", "speed", "speed_m_s"),
    ("medium", "length", "length_cm"),
    ("medium", "wavelength", "wavelength_nm"),
    ("field", "b", "b_gauss"),
    ("relaxation", "optical", "optical_mhz"),
    ("relaxation", "hyperfine", "hyperfine_mhz"),
    ("relaxation", "zeeman", "zeeman_mhz"),
    ("relaxation", "spontaneous", "spontaneous_mhz"),
    ("relaxation", "ground_exchange", "ground_exchange_mhz"),
    ("scan", "coupling_powers", "coupling_powers_mw"),
    ("scan", "temperatures", "temperatures_celsius"),
];

/// Rejects keys that name a known quantity without its unit suffix, or with
/// a different one.
fn check_units(doc: &toml::Table) -> Result<()> {
    for (section, stem, expected) in UNIT_KEYS {
        let Some(toml::Value::Table(t)) = doc.get(*section) else {
            continue;
        };
        for key in t.keys() {
            if key == expected {
                continue;
            }
            let bare = key == stem;
            let other_unit = key.starts_with(&format!("{stem}_"))
                && !UNIT_KEYS.iter().any(|(s, _, e)| s == section && e == key);
            if bare || other_unit {
                return Err(Error::Config(format!(
                    "explicit unit suffix required: `{section}.{key}` must be given as `{section}.{expected}`"
                )));
            }
        }
    }
    Ok(())
}

pub fn parse_document(doc: toml::Table) -> Result<RunSpec> {
    check_units(&doc)?;
    let file: ConfigFile = ConfigFile::deserialize(toml::Value::Table(doc))
        .map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
    resolve(file)
}

pub fn parse_config(text: &str) -> Result<RunSpec> {
    parse_document(parse_table(text)?)
}

pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))
}

/// Applies `section.key=value` assignments. Values are read as TOML and fall
/// back to plain strings.
pub fn apply_overrides(doc: &mut toml::Table, assignments: &[String]) -> Result<()> {
    for a in assignments {
        let (path, raw) = a
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{a}` is not of the form key=value")))?;
        let path: Vec<&str> = path.trim().split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("override `{a}` has an empty key")));
        }
        let raw = raw.trim();
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut table = &mut *doc;
        for key in &path[..path.len() - 1] {
            let entry = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override `{a}`: `{key}` is not a table")))?;
        }
        table.insert(path[path.len() - 1].to_string(), value);
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{name}` must be finite and > 0, got {v}")))
    }
}

fn resolve(mut f: ConfigFile) -> Result<RunSpec> {
    f.provenance = None;
    let scheme = build_level_scheme(f.scheme);

    let p = &mut f.probe;
    if p.power_uw.is_some() && p.rabi_mhz.is_some() {
        return Err(Error::Config("probe is over-specified: give `power_uw` or `rabi_mhz`, not both".into()));
    }
    if p.power_uw.is_none() && p.rabi_mhz.is_none() {
        p.rabi_mhz = Some(10.0);
    }
    p.polarization.get_or_insert(FieldPolarization::Linear);
    p.detuning_start_mhz.get_or_insert(-400.0);
    p.detuning_stop_mhz.get_or_insert(400.0);
    p.points.get_or_insert(1201);

    let c = &mut f.coupling;
    if c.power_mw.is_some() && c.rabi_mhz.is_some() {
        return Err(Error::Config("coupling is over-specified: give `power_mw` or `rabi_mhz`, not both".into()));
    }
    if c.power_mw.is_none() && c.rabi_mhz.is_none() {
        c.rabi_mhz = Some(80.0);
    }
    c.polarization.get_or_insert(coupling_polarization_for(f.scheme));
    c.detuning_mhz.get_or_insert(0.0);

    let m = &mut f.medium;
    let celsius = *m.temperature_celsius.get_or_insert(55.0);
    let kelvin = celsius + KELVIN_OFFSET;
    positive("medium.temperature_celsius (as kelvin)", kelvin)?;
    if m.density_cm3.is_none() {
        m.density_cm3 = Some(vapor_density(kelvin)? * 1e-6);
    }
    m.speed_m_s.get_or_insert(most_probable_speed(kelvin));
    m.length_cm.get_or_insert(5.0);
    m.wavelength_nm.get_or_insert(794.979);

    let defaults = ZeemanField::rb87_d1(0.0, scheme.excited_f());
    let z = &mut f.field;
    z.b_gauss.get_or_insert(0.0);
    z.g_f1.get_or_insert(defaults.g_f1);
    z.g_f2.get_or_insert(defaults.g_f2);
    z.g_excited.get_or_insert(defaults.g_excited);

    let r = &mut f.relaxation;
    r.optical_mhz.get_or_insert(3.5);
    r.hyperfine_mhz.get_or_insert(1.1);
    let hf = r.hyperfine_mhz.unwrap();
    r.zeeman_mhz.get_or_insert(hf);
    r.spontaneous_mhz.get_or_insert(D1_NATURAL_LINEWIDTH / mhz(1.0));
    r.ground_exchange_mhz.get_or_insert(hf);

    let md = &mut f.model;
    md.stark.get_or_insert(true);
    md.populations.get_or_insert(PopulationPolicy::Once);
    md.prominence.get_or_insert(0.02);

    let q = &mut f.quadrature;
    let qd = QuadratureSpec::default();
    q.rel_tol.get_or_insert(qd.rel_tol);
    q.abs_tol.get_or_insert(qd.abs_tol);
    q.max_intervals.get_or_insert(qd.max_intervals);

    let s = &mut f.scan;
    s.coupling_powers_mw.get_or_insert_with(|| vec![6.0, 8.0, 10.0, 12.0, 15.0]);
    s.temperatures_celsius.get_or_insert_with(|| vec![45.0, 55.0, 65.0]);
    s.components
        .get_or_insert_with(|| vec![Polarization::SigmaMinus, Polarization::SigmaPlus]);

    f.output_dir.get_or_insert_with(|| PathBuf::from("."));
    f.verbosity.get_or_insert(0);

    let config = scenario_config(&f)?;
    config.validate()?;
    let scan = ScanSpec {
        coupling_powers: f.scan.coupling_powers_mw.clone().unwrap().iter().map(|p| p * 1e-3).collect(),
        temperatures: f
            .scan
            .temperatures_celsius
            .clone()
            .unwrap()
            .iter()
            .map(|t| t + KELVIN_OFFSET)
            .collect(),
        components: f.scan.components.clone().unwrap(),
    };
    if scan.components.contains(&Polarization::Pi) {
        return Err(Error::Config("scan.components accepts sigma_minus and sigma_plus only".into()));
    }
    Ok(RunSpec {
        scenario: f.scenario,
        config,
        scan,
        output_dir: f.output_dir.clone().unwrap(),
        verbosity: f.verbosity.unwrap(),
        resolved: f,
    })
}

/// Builds the numerical configuration from a resolved document.
fn scenario_config(f: &ConfigFile) -> Result<ScenarioConfig> {
    let (p, c, m, z, r, md, q) = (&f.probe, &f.coupling, &f.medium, &f.field, &f.relaxation, &f.model, &f.quadrature);
    let probe_rabi = match (p.power_uw, p.rabi_mhz) {
        (Some(uw), _) => rabi_from_power(uw * 1e-6, Beam::Probe).map_err(|e| Error::Config(e.to_string()))?,
        (_, Some(v)) => mhz(v),
        _ => unreachable!("resolved probe drive"),
    };
    let coupling_rabi = match (c.power_mw, c.rabi_mhz) {
        (Some(mw), _) => rabi_from_power(mw * 1e-3, Beam::Coupling).map_err(|e| Error::Config(e.to_string()))?,
        (_, Some(v)) => mhz(v),
        _ => unreachable!("resolved coupling drive"),
    };
    let start = mhz(p.detuning_start_mhz.unwrap());
    let stop = mhz(p.detuning_stop_mhz.unwrap());
    let medium = MediumParams {
        density: positive("medium.density_cm3", m.density_cm3.unwrap())? * 1e6,
        temperature: m.temperature_celsius.unwrap() + KELVIN_OFFSET,
        speed: m.speed_m_s.unwrap(),
        length: positive("medium.length_cm", m.length_cm.unwrap())? * 1e-2,
        wavelength: positive("medium.wavelength_nm", m.wavelength_nm.unwrap())? * 1e-9,
    };
    Ok(ScenarioConfig {
        scheme: f.scheme,
        probe: FieldDrive::probe(p.polarization.unwrap(), probe_rabi, 0.0),
        coupling: FieldDrive::coupling(c.polarization.unwrap(), coupling_rabi, mhz(c.detuning_mhz.unwrap())),
        grid: DetuningGrid {
            start,
            stop,
            points: p.points.unwrap(),
        },
        medium,
        zeeman: ZeemanField {
            b_tesla: z.b_gauss.unwrap() * TESLA_PER_GAUSS,
            g_f1: z.g_f1.unwrap(),
            g_f2: z.g_f2.unwrap(),
            g_excited: z.g_excited.unwrap(),
        },
        stark: md.stark.unwrap(),
        rates: RelaxationRates {
            optical: mhz(r.optical_mhz.unwrap()),
            hyperfine: mhz(r.hyperfine_mhz.unwrap()),
            zeeman: mhz(r.zeeman_mhz.unwrap()),
            spontaneous: mhz(r.spontaneous_mhz.unwrap()),
            ground_exchange: mhz(r.ground_exchange_mhz.unwrap()),
        },
        overrides: f.overrides.clone(),
        quadrature: QuadratureSpec {
            rel_tol: q.rel_tol.unwrap(),
            abs_tol: q.abs_tol.unwrap(),
            max_intervals: q.max_intervals.unwrap(),
        },
        populations: md.populations.unwrap(),
        prominence: md.prominence.unwrap(),
    })
}

/// Resolved configuration plus an informational `[provenance]` table.
pub fn metadata_document(spec: &RunSpec, provenance: toml::Table) -> Result<String> {
    let mut text = toml::to_string(&spec.resolved).map_err(|e| Error::Config(e.to_string()))?;
    let mut prov = toml::Table::new();
    prov.insert("provenance".into(), toml::Value::Table(provenance));
    text.push('\n');
    text.push_str(&toml::to_string(&prov).map_err(|e| Error::Config(e.to_string()))?);
    Ok(text)
}

/// Calibration anchors and crate version, for the metadata sidecar.
pub fn base_provenance() -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    for (name, beam) in [("coupling", Beam::Coupling), ("probe", Beam::Probe)] {
        let (p, w) = calibration_anchor(beam);
        let mut a = toml::Table::new();
        a.insert("power_w".into(), p.into());
        a.insert("rabi_mhz".into(), (w / mhz(1.0)).into());
        t.insert(format!("{name}_anchor"), a.into());
    }
    t
}
