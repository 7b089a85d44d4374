//! Scenario execution for the command-line front end: runs a resolved
//! configuration and writes CSV outputs plus a `metadata.toml` sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::atomic::{to_mhz, Polarization};
use crate::config::{base_provenance, metadata_document, RunSpec, Scenario};
use crate::detection::{write_trace_csv, TraceRow};
use crate::dynamics::{build_hamiltonian, build_liouvillian};
use crate::error::Result;
use crate::scenarios::{
    count_peaks, eit_transmission, find_dispersion_peaks, sweep_coupling_power, sweep_probe_detuning,
    sweep_temperature, Model, PeakPair, SweepResult,
};
use crate::spectra::write_spectrum_csv;

/// Files written and one-line summaries of what was found.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Outputs<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl Outputs<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.report.files.push(path);
        Ok(BufWriter::new(f))
    }
}

fn fmt_peaks(p: &Option<PeakPair>) -> String {
    match p {
        Some(p) => format!(
            "left=({:.3} MHz, {:.4} deg) right=({:.3} MHz, {:.4} deg)",
            to_mhz(p.left.0),
            p.left.1.to_degrees(),
            to_mhz(p.right.0),
            p.right.1.to_degrees()
        ),
        None => "no dispersion feature".into(),
    }
}

fn peak_cells(p: &Option<PeakPair>) -> String {
    match p {
        Some(p) => format!(
            "{:.8e},{:.8e},{:.8e},{:.8e}",
            to_mhz(p.left.0),
            p.left.1.to_degrees(),
            to_mhz(p.right.0),
            p.right.1.to_degrees()
        ),
        None => "nan,nan,nan,nan".into(),
    }
}

fn sweep_provenance(t: &mut toml::Table, r: &SweepResult) {
    let pops: toml::Table = r.populations.iter().map(|(s, p)| (s.label(), toml::Value::from(*p))).collect();
    t.insert("populations".into(), pops.into());
    let shifts: toml::Table = r
        .stark_shifts
        .iter()
        .map(|(s, w)| (s.label(), toml::Value::from(to_mhz(*w))))
        .collect();
    t.insert("stark_shifts_mhz".into(), shifts.into());
    t.insert("coupling_rabi_mhz".into(), to_mhz(r.coupling_rabi).into());
    t.insert("probe_rabi_mhz".into(), to_mhz(r.probe_rabi).into());
    t.insert("density_m3".into(), r.density.into());
    t.insert("speed_m_s".into(), r.speed.into());
}

pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let cfg = &spec.config;
    fs::create_dir_all(&spec.output_dir)?;
    let mut out = Outputs {
        dir: &spec.output_dir,
        report: RunReport::default(),
    };
    let mut prov = base_provenance();

    match spec.scenario {
        Scenario::Spectrum => {
            let r = sweep_probe_detuning(cfg)?;
            let rows: Vec<_> = r.points.iter().map(|p| p.spectrum_row()).collect();
            write_spectrum_csv(&rows, out.create("spectrum.csv")?)?;
            let peaks = find_dispersion_peaks(&r, cfg.coupling.detuning);
            out.report.summary.push(format!("max |phi| = {:.4} deg", r.max_abs_angle().to_degrees()));
            out.report.summary.push(format!("peaks {}", fmt_peaks(&peaks)));
            sweep_provenance(&mut prov, &r);
        }
        Scenario::DetectorTrace => {
            let r = sweep_probe_detuning(cfg)?;
            let rows: Vec<_> = r
                .points
                .iter()
                .map(|p| TraceRow {
                    detuning: p.detuning,
                    signals: p.signals,
                    phi: p.recovered,
                })
                .collect();
            write_trace_csv(&rows, out.create("trace.csv")?)?;
            let indeterminate = rows.iter().filter(|r| r.phi.is_none()).count();
            out.report.summary.push(format!("{} points, {indeterminate} indeterminate", rows.len()));
            sweep_provenance(&mut prov, &r);
        }
        Scenario::PowerScan => {
            let entries = sweep_coupling_power(cfg, &spec.scan.coupling_powers)?;
            let mut w = out.create("power_scan.csv")?;
            writeln!(
                w,
                "power_mw,coupling_rabi_mhz,left_detuning_mhz,left_phi_deg,right_detuning_mhz,right_phi_deg,max_abs_phi_deg"
            )?;
            for e in &entries {
                writeln!(
                    w,
                    "{:.8e},{:.8e},{},{:.8e}",
                    e.power * 1e3,
                    to_mhz(e.coupling_rabi),
                    peak_cells(&e.peaks),
                    e.max_abs_angle.to_degrees()
                )?;
                out.report
                    .summary
                    .push(format!("{:.3} mW: {}", e.power * 1e3, fmt_peaks(&e.peaks)));
            }
        }
        Scenario::TempScan => {
            let results = sweep_temperature(cfg, &spec.scan.temperatures)?;
            let mut summary = Vec::new();
            for (i, (t, r)) in results.iter().enumerate() {
                let rows: Vec<_> = r.points.iter().map(|p| p.spectrum_row()).collect();
                write_spectrum_csv(&rows, out.create(&format!("spectrum_t{i}.csv"))?)?;
                let peaks = find_dispersion_peaks(r, cfg.coupling.detuning);
                summary.push(format!(
                    "{:.8e},{:.8e},{},{:.8e}",
                    t - 273.15,
                    r.density * 1e-6,
                    peak_cells(&peaks),
                    r.max_abs_angle().to_degrees()
                ));
                out.report
                    .summary
                    .push(format!("{:.2} C (spectrum_t{i}.csv): {}", t - 273.15, fmt_peaks(&peaks)));
            }
            let mut w = out.create("temp_scan.csv")?;
            writeln!(
                w,
                "temperature_celsius,density_cm3,left_detuning_mhz,left_phi_deg,right_detuning_mhz,right_phi_deg,max_abs_phi_deg"
            )?;
            for line in summary {
                writeln!(w, "{line}")?;
            }
        }
        Scenario::EitPeaks => {
            let mut peaks_rows = Vec::new();
            for &component in &spec.scan.components {
                let curve = eit_transmission(cfg, component)?;
                let mut w = out.create(&format!("transmission_{}.csv", component.name()))?;
                writeln!(w, "detuning_mhz,transmission")?;
                for (x, t) in curve.detuning.iter().zip(&curve.transmission) {
                    writeln!(w, "{:.8e},{:.8e}", to_mhz(*x), t)?;
                }
                let idx = count_peaks(&curve.transmission, cfg.prominence);
                for &i in &idx {
                    peaks_rows.push((component, curve.detuning[i], curve.transmission[i]));
                }
                out.report
                    .summary
                    .push(format!("{}: {} transmission peaks", component.name(), idx.len()));
            }
            let mut w = out.create("peaks.csv")?;
            writeln!(w, "component,detuning_mhz,transmission")?;
            for (c, x, t) in peaks_rows {
                writeln!(w, "{},{:.8e},{:.8e}", Polarization::name(c), to_mhz(x), t)?;
            }
        }
        Scenario::Populations => {
            let model = Model::new(cfg)?;
            let probe = cfg.probe.with_detuning(cfg.coupling.detuning);
            let rho = model.populations(cfg, cfg.coupling.detuning)?;
            rho.write_populations_csv(out.create("populations.csv")?)?;
            model.scheme.write_cg_csv(out.create("cg_table.csv")?)?;
            let h = build_hamiltonian(&model.scheme, &probe, &cfg.coupling, &model.shifts, &cfg.zeeman)?;
            build_liouvillian(&h, &cfg.rates, &model.scheme).write_equations(out.create("equations.txt")?)?;
            let f1: Vec<String> = model
                .scheme
                .sublevels
                .iter()
                .filter(|s| s.manifold.is_ground())
                .map(|s| format!("{}={:.5}", s.label(), rho.population(s)))
                .collect();
            out.report.summary.push(f1.join(" "));
        }
    }

    let mut w = out.create("metadata.toml")?;
    w.write_all(metadata_document(spec, prov)?.as_bytes())?;
    w.flush()?;
    Ok(out.report)
}

/// One-line, machine-parsable rendering of an error for stderr.
pub fn error_line(e: &crate::Error) -> String {
    let msg = e.to_string().replace(['\n', '\r'], " ").replace('"', "'");
    format!("error kind={} exit={} msg=\"{}\"", e.kind(), e.exit_code(), msg)
}
