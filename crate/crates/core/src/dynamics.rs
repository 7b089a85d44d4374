//! Rotating-frame Hamiltonian, damped master equation and its steady state.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{
    mhz, to_mhz, zeeman_shift, LevelScheme, Manifold, Polarization, StarkShifts, SublevelId,
    ZeemanField, FieldDrive, D1_NATURAL_LINEWIDTH,
};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relaxation constants, all in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationRates {
    /// Decay of optical (excited-ground) coherences.
    pub optical: f64,
    /// Decay of coherences between the two ground hyperfine levels.
    pub hyperfine: f64,
    /// Decay of Zeeman coherences inside one ground hyperfine level.
    pub zeeman: f64,
    /// Excited-state population decay.
    pub spontaneous: f64,
    /// Population exchange among all ground sublevels (transit relaxation).
    pub ground_exchange: f64,
}

impl Default for RelaxationRates {
    fn default() -> Self {
        RelaxationRates {
            optical: mhz(3.5),
            hyperfine: mhz(1.1),
            zeeman: mhz(1.1),
            spontaneous: D1_NATURAL_LINEWIDTH,
            ground_exchange: mhz(1.1),
        }
    }
}

impl RelaxationRates {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("optical", self.optical),
            ("hyperfine", self.hyperfine),
            ("zeeman", self.zeeman),
            ("spontaneous", self.spontaneous),
            ("ground_exchange", self.ground_exchange),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("rate {name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    fn coherence_decay(&self, a: Manifold, b: Manifold) -> f64 {
        match (a.is_ground(), b.is_ground()) {
            (false, false) => self.spontaneous,
            (true, true) if a == b => self.zeeman,
            (true, true) => self.hyperfine,
            _ => self.optical,
        }
    }
}

/// Square complex matrix indexed by the sublevels of a scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub levels: Vec<SublevelId>,
    /// rad/s
    pub matrix: DMatrix<Complex64>,
}

impl Hamiltonian {
    pub fn dimension(&self) -> usize {
        self.levels.len()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let h = &self.matrix;
        (h - h.adjoint()).norm() / h.norm().max(f64::MIN_POSITIVE)
    }
}

/// Diagonal energy of a sublevel before the rotating-frame detunings.
/// F=2 sublevels carry their light shift with a minus sign, so the b → c
/// resonance moves up by the shift.
pub fn bare_energy(s: &SublevelId, shifts: &StarkShifts, zeeman: &ZeemanField) -> f64 {
    let z = zeeman_shift(s, zeeman);
    match s.manifold {
        Manifold::GroundF2 => z - shifts.of(s),
        _ => z,
    }
}

pub fn build_hamiltonian(
    scheme: &LevelScheme,
    probe: &FieldDrive,
    coupling: &FieldDrive,
    shifts: &StarkShifts,
    zeeman: &ZeemanField,
) -> Result<Hamiltonian> {
    let n = scheme.dimension();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for (i, s) in scheme.sublevels.iter().enumerate() {
        let e = bare_energy(s, shifts, zeeman);
        let frame = match s.manifold {
            Manifold::GroundF1 => 0.0,
            Manifold::GroundF2 => -probe.detuning + coupling.detuning,
            Manifold::Excited { .. } => -probe.detuning,
        };
        h[(i, i)] = Complex64::new(e + frame, 0.0);
    }
    for drive in [probe, coupling] {
        for t in scheme.driven_transitions(drive)? {
            let rabi = scheme.transition_rabi(drive, t);
            let l = scheme.index_of(&t.lower).expect("lower level in scheme");
            let u = scheme.index_of(&t.upper).expect("upper level in scheme");
            h[(u, l)] += Complex64::new(-0.5 * rabi, 0.0);
            h[(l, u)] += Complex64::new(-0.5 * rabi, 0.0);
        }
    }
    Ok(Hamiltonian {
        levels: scheme.sublevels.clone(),
        matrix: h,
    })
}

/// Linear generator acting on the row-major vectorized density matrix
/// (element (i, j) sits at i*n + j).
#[derive(Clone, Debug)]
pub struct Liouvillian {
    pub levels: Vec<SublevelId>,
    pub matrix: DMatrix<Complex64>,
}

impl Liouvillian {
    pub fn dimension(&self) -> usize {
        self.levels.len()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.dimension() + j
    }

    pub fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dimension();
        let v = vectorize(rho);
        let out = &self.matrix * v;
        DMatrix::from_row_iterator(n, n, out.iter().copied())
    }

    /// One line per nonzero entry, frequencies in MHz of ν:
    /// `d/dt rho[c1,a1] += (re, im) * rho[a1,a1]`.
    pub fn equation_lines(&self) -> Vec<String> {
        let n = self.dimension();
        let label = |k: usize| {
            format!(
                "rho[{},{}]",
                self.levels[k / n].label(),
                self.levels[k % n].label()
            )
        };
        let mut lines = Vec::new();
        for r in 0..n * n {
            for c in 0..n * n {
                let v = self.matrix[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    lines.push(format!(
                        "d/dt {} += ({:.6}, {:.6}) * {}",
                        label(r),
                        to_mhz(v.re),
                        to_mhz(v.im),
                        label(c)
                    ));
                }
            }
        }
        lines
    }

    pub fn write_equations<W: Write>(&self, mut out: W) -> Result<()> {
        for line in self.equation_lines() {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Elements reachable from `seeds` by following which elements each
    /// equation references, seeds included.
    pub fn coupled_elements(&self, seeds: &[(SublevelId, SublevelId)]) -> BTreeSet<(usize, usize)> {
        let n = self.dimension();
        let pos = |s: &SublevelId| self.levels.iter().position(|x| x == s).expect("known level");
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        for (r, c) in seeds {
            let k = self.idx(pos(r), pos(c));
            if seen.insert((k / n, k % n)) {
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            for col in 0..n * n {
                if self.matrix[(k, col)] != Complex64::new(0.0, 0.0) && seen.insert((col / n, col % n)) {
                    queue.push_back(col);
                }
            }
        }
        seen
    }
}

fn vectorize(rho: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = rho.nrows();
    DVector::from_iterator(n * n, (0..n).flat_map(|i| (0..n).map(move |j| rho[(i, j)])))
}

pub fn build_liouvillian(h: &Hamiltonian, rates: &RelaxationRates, scheme: &LevelScheme) -> Liouvillian {
    let n = h.dimension();
    let levels = h.levels.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let mut l = DMatrix::<Complex64>::zeros(n * n, n * n);

    // -i[H, rho]
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let hik = h.matrix[(i, k)];
                if hik != Complex64::new(0.0, 0.0) {
                    l[(idx(i, j), idx(k, j))] += -I * hik;
                }
                let hkj = h.matrix[(k, j)];
                if hkj != Complex64::new(0.0, 0.0) {
                    l[(idx(i, j), idx(i, k))] += I * hkj;
                }
            }
        }
    }

    // phenomenological decay of every element
    for i in 0..n {
        for j in 0..n {
            let (mi, mj) = (levels[i].manifold, levels[j].manifold);
            let rate = if i == j {
                if mi.is_ground() {
                    0.0
                } else {
                    rates.spontaneous
                }
            } else {
                rates.coherence_decay(mi, mj)
            };
            l[(idx(i, j), idx(i, j))] -= Complex64::new(rate, 0.0);
        }
    }

    // ground population exchange
    let ground: Vec<usize> = (0..n).filter(|&i| levels[i].manifold.is_ground()).collect();
    let share = rates.ground_exchange / ground.len() as f64;
    for &g in &ground {
        l[(idx(g, g), idx(g, g))] -= Complex64::new(rates.ground_exchange, 0.0);
        for &g2 in &ground {
            l[(idx(g, g), idx(g2, g2))] += Complex64::new(share, 0.0);
        }
    }

    // spontaneous-emission transfer of excited populations and coherences
    let excited: Vec<usize> = (0..n).filter(|&i| !levels[i].manifold.is_ground()).collect();
    let amplitude = |g: usize, c: usize| {
        scheme
            .transition(&levels[g], &levels[c])
            .map_or(0.0, |t| t.natural_cg)
    };
    for &c in &excited {
        for &c2 in &excited {
            for &g in &ground {
                let a = amplitude(g, c);
                if a == 0.0 {
                    continue;
                }
                let q = levels[g].m - levels[c].m;
                for &g2 in &ground {
                    if levels[g2].manifold != levels[g].manifold || levels[g2].m - levels[c2].m != q {
                        continue;
                    }
                    let b = amplitude(g2, c2);
                    if b != 0.0 {
                        l[(idx(g, g2), idx(c, c2))] += Complex64::new(rates.spontaneous * a * b, 0.0);
                    }
                }
            }
        }
    }

    Liouvillian { levels, matrix: l }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub levels: Vec<SublevelId>,
    pub matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn dimension(&self) -> usize {
        self.levels.len()
    }

    /// Equal populations over all ground sublevels.
    pub fn thermal_ground(levels: &[SublevelId]) -> Self {
        let n = levels.len();
        let ng = levels.iter().filter(|s| s.manifold.is_ground()).count() as f64;
        let mut m = DMatrix::zeros(n, n);
        for (i, s) in levels.iter().enumerate() {
            if s.manifold.is_ground() {
                m[(i, i)] = Complex64::new(1.0 / ng, 0.0);
            }
        }
        DensityMatrix {
            levels: levels.to_vec(),
            matrix: m,
        }
    }

    fn pos(&self, s: &SublevelId) -> usize {
        self.levels
            .iter()
            .position(|x| x == s)
            .unwrap_or_else(|| panic!("sublevel {s} not in density matrix"))
    }

    /// ⟨row|ρ|col⟩
    pub fn element(&self, row: &SublevelId, col: &SublevelId) -> Complex64 {
        self.matrix[(self.pos(row), self.pos(col))]
    }

    pub fn population(&self, s: &SublevelId) -> f64 {
        self.element(s, s).re
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().min()
    }

    pub fn write_populations_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sublevel,population")?;
        for (i, s) in self.levels.iter().enumerate() {
            writeln!(out, "{},{:.8e}", s.label(), self.matrix[(i, i)].re)?;
        }
        Ok(())
    }
}

/// Singular values of `L` below `rel_tol × σ_max`.
pub fn null_space_dimension(l: &Liouvillian, rel_tol: f64) -> usize {
    let sv = l.matrix.clone().singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s <= rel_tol * max).count()
}

/// Relative residual ‖L ρ‖ / (‖L‖ ‖ρ‖), Frobenius norms.
pub fn steady_state_residual(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    let r = &l.matrix * vectorize(&rho.matrix);
    r.norm() / (l.matrix.norm() * rho.matrix.norm())
}

const RESIDUAL_TOLERANCE: f64 = 1e-9;

pub fn solve_steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let n = l.dimension();
    let mut a = l.matrix.clone();
    // replace the redundant (0,0) population equation by the trace condition
    a.row_mut(0).fill(Complex64::new(0.0, 0.0));
    for k in 0..n {
        a[(0, k * n + k)] = Complex64::new(1.0, 0.0);
    }
    let mut rhs = DVector::<Complex64>::zeros(n * n);
    rhs[0] = Complex64::new(1.0, 0.0);

    let lu = a.lu();
    let degenerate = || Error::NonUniqueSteadyState {
        dimension: null_space_dimension(l, 1e-12).max(2),
    };
    let u_diag = lu.u().diagonal();
    let (umin, umax) = u_diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), z| {
        (lo.min(z.norm()), hi.max(z.norm()))
    });
    if umin <= 1e-14 * umax {
        let dim = null_space_dimension(l, 1e-12);
        if dim != 1 {
            return Err(Error::NonUniqueSteadyState { dimension: dim });
        }
    }
    let x = lu.solve(&rhs).ok_or_else(degenerate)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(degenerate());
    }
    let m = DMatrix::from_row_iterator(n, n, x.iter().copied());
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let rho = DensityMatrix {
        levels: l.levels.clone(),
        matrix: m,
    };
    let residual = steady_state_residual(l, &rho);
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::Residual {
            residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(rho)
}

/// Assembles and solves the steady state of a scheme under two drives.
pub fn steady_state(
    scheme: &LevelScheme,
    probe: &FieldDrive,
    coupling: &FieldDrive,
    shifts: &StarkShifts,
    zeeman: &ZeemanField,
    rates: &RelaxationRates,
) -> Result<DensityMatrix> {
    rates.validate()?;
    let h = build_hamiltonian(scheme, probe, coupling, shifts, zeeman)?;
    let l = build_liouvillian(&h, rates, scheme);
    solve_steady_state(&l)
}

/// F=1 populations (a1, a2, a3) of the steady state with the scheme's own
/// light shifts and no magnetic field.
pub fn ground_populations(
    scheme: &LevelScheme,
    probe: &FieldDrive,
    coupling: &FieldDrive,
    rates: &RelaxationRates,
) -> Result<[f64; 3]> {
    let shifts = crate::atomic::stark_shifts(coupling, scheme);
    let zeeman = ZeemanField::rb87_d1(0.0, scheme.excited_f());
    let rho = steady_state(scheme, probe, coupling, &shifts, &zeeman, rates)?;
    Ok([1, 2, 3].map(|i| rho.population(&SublevelId::a(i))))
}

/// Propagates ρ under `L` for a time `t` with a scaled-and-squared Taylor
/// exponential. Slow; meant for cross-checks.
pub fn evolve(l: &Liouvillian, rho0: &DensityMatrix, t: f64) -> DensityMatrix {
    let n = l.dimension();
    let a = &l.matrix * Complex64::new(t, 0.0);
    let norm1 = (0..a.ncols())
        .map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = &a * Complex64::new(0.5f64.powi(squarings as i32), 0.0);
    let dim = a.nrows();
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    let mut exp = term.clone();
    for k in 1..=20 {
        term = &term * &b * Complex64::new(1.0 / k as f64, 0.0);
        exp += &term;
    }
    for _ in 0..squarings {
        exp = &exp * &exp;
    }
    let v = exp * vectorize(&rho0.matrix);
    DensityMatrix {
        levels: rho0.levels.clone(),
        matrix: DMatrix::from_row_iterator(n, n, v.iter().copied()),
    }
}

/// Coupling-beam partner of a probe transition: the F=2 sublevel driven into
/// the same excited sublevel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaPartner {
    pub lower: SublevelId,
    /// Per-transition coupling Rabi frequency, rad/s.
    pub coupling_rabi: f64,
    /// E_b - E_a including light shift and Zeeman terms, rad/s.
    pub two_photon_offset: f64,
}

/// One probe transition a → c with the data its linear response needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeChannel {
    pub lower: SublevelId,
    pub upper: SublevelId,
    pub polarization: Polarization,
    pub cg: f64,
    /// C·m
    pub dipole: f64,
    /// Per-transition probe Rabi frequency, rad/s.
    pub probe_rabi: f64,
    /// E_c - E_a, rad/s.
    pub resonance_offset: f64,
    pub partner: Option<LambdaPartner>,
}

impl ProbeChannel {
    /// Complex denominator of the weak-probe coherence for an atom at rest:
    /// γ_opt - iΔ₁ + (|Ω_c|²/4) / (γ_hf - iΔ₂).
    pub fn denominator(&self, rates: &RelaxationRates, probe_detuning: f64, coupling_detuning: f64) -> Complex64 {
        let one_photon = probe_detuning - self.resonance_offset;
        let mut a = Complex64::new(rates.optical, -one_photon);
        if let Some(p) = &self.partner {
            let two_photon = probe_detuning - coupling_detuning - p.two_photon_offset;
            let dressing = 0.25 * p.coupling_rabi * p.coupling_rabi;
            a += Complex64::new(dressing, 0.0) / Complex64::new(rates.hyperfine, -two_photon);
        }
        a
    }
}

/// All nonzero σ⁻ and σ⁺ probe channels of a scheme: σ⁻ ordered by the lower
/// sublevel's m, then σ⁺ likewise. The probe drive only sets the Rabi scale.
pub fn probe_channels(
    scheme: &LevelScheme,
    probe_rabi_scale: f64,
    coupling: &FieldDrive,
    shifts: &StarkShifts,
    zeeman: &ZeemanField,
) -> Result<Vec<ProbeChannel>> {
    let coupling_transitions = scheme.driven_transitions(coupling)?;
    let probe_norm = scheme.rabi_normalization(crate::atomic::Beam::Probe);
    let mut out = Vec::new();
    for pol in [Polarization::SigmaMinus, Polarization::SigmaPlus] {
        let mut chans: Vec<_> = scheme
            .transitions
            .iter()
            .filter(|t| t.lower.manifold == Manifold::GroundF1 && t.polarization == pol && t.cg != 0.0)
            .collect();
        chans.sort_by_key(|t| t.lower.m);
        for t in chans {
            let ea = bare_energy(&t.lower, shifts, zeeman);
            let ec = bare_energy(&t.upper, shifts, zeeman);
            let partner = coupling_transitions
                .iter()
                .find(|c| c.upper == t.upper && c.cg != 0.0)
                .map(|c| LambdaPartner {
                    lower: c.lower,
                    coupling_rabi: scheme.transition_rabi(coupling, c),
                    two_photon_offset: bare_energy(&c.lower, shifts, zeeman) - ea,
                });
            out.push(ProbeChannel {
                lower: t.lower,
                upper: t.upper,
                polarization: pol,
                cg: t.cg,
                dipole: t.dipole,
                probe_rabi: probe_rabi_scale * t.cg / probe_norm,
                resonance_offset: ec - ea,
                partner,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceSet {
    /// (excited, ground, ⟨c|ρ|a⟩)
    pub entries: Vec<(SublevelId, SublevelId, Complex64)>,
}

impl CoherenceSet {
    /// Looks up ⟨upper|ρ|lower⟩ by labels such as ("c1", "a1").
    pub fn get(&self, upper: &str, lower: &str) -> Option<Complex64> {
        self.entries
            .iter()
            .find(|(c, a, _)| c.label() == upper && a.label() == lower)
            .map(|e| e.2)
    }
}

/// Closed-form weak-probe coherences ⟨c|ρ|a⟩ = (iΩ/2) ρ_aa / A for every probe
/// channel, with ρ_aa taken from `populations`.
pub fn analytic_coherences(
    populations: &DensityMatrix,
    channels: &[ProbeChannel],
    rates: &RelaxationRates,
    probe_detuning: f64,
    coupling_detuning: f64,
) -> CoherenceSet {
    let entries = channels
        .iter()
        .map(|ch| {
            let a = ch.denominator(rates, probe_detuning, coupling_detuning);
            let pop = populations.population(&ch.lower);
            (ch.upper, ch.lower, I * (0.5 * ch.probe_rabi * pop) / a)
        })
        .collect();
    CoherenceSet { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::{build_level_scheme, stark_shifts, FieldPolarization, SchemeId};
    use approx::assert_abs_diff_eq;

    fn drives(omega_p: f64, omega_c: f64) -> (FieldDrive, FieldDrive) {
        (
            FieldDrive::probe(FieldPolarization::Linear, mhz(omega_p), 0.0),
            FieldDrive::coupling(FieldPolarization::SigmaMinus, mhz(omega_c), 0.0),
        )
    }

    #[test]
    fn zero_fields_give_zero_hamiltonian() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(0.0, 0.0);
        let h = build_hamiltonian(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        assert_eq!(h.matrix.norm(), 0.0);
    }

    #[test]
    fn hamiltonian_entries() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let p = FieldDrive::probe(FieldPolarization::Linear, mhz(10.0), mhz(3.0));
        let c = FieldDrive::coupling(FieldPolarization::SigmaMinus, mhz(80.0), mhz(1.0));
        let h = build_hamiltonian(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let c1 = s.index_of(&SublevelId::c(1, 2)).unwrap();
        let b2 = s.index_of(&SublevelId::b(2)).unwrap();
        assert_abs_diff_eq!(h.matrix[(c1, c1)].re, -mhz(3.0), epsilon = 1e-6);
        assert_abs_diff_eq!(h.matrix[(b2, b2)].re, -mhz(2.0), epsilon = 1e-6);
        // the coupling scale refers to the strongest σ⁻ line, |cg| = 1/2
        let expected = -0.5 * mhz(80.0) * s.transition(&SublevelId::b(2), &SublevelId::c(1, 2)).unwrap().cg / 0.5;
        assert_abs_diff_eq!(h.matrix[(c1, b2)].re, expected, epsilon = 1e-6);
        assert!(h.hermiticity_error() < 1e-12);
    }

    #[test]
    fn uniform_ground_without_light() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(0.0, 0.0);
        let rho = steady_state(
            &s,
            &p,
            &c,
            &StarkShifts::zero(&s),
            &ZeemanField::rb87_d1(0.0, 2),
            &RelaxationRates::default(),
        )
        .unwrap();
        for g in s.sublevels.iter().filter(|x| x.manifold.is_ground()) {
            assert_abs_diff_eq!(rho.population(g), 0.125, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_without_light_or_exchange() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(0.0, 0.0);
        let rates = RelaxationRates {
            ground_exchange: 0.0,
            ..Default::default()
        };
        let err = steady_state(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2), &rates)
            .unwrap_err();
        match err {
            Error::NonUniqueSteadyState { dimension } => assert!(dimension >= 8, "{dimension}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn population_row_for_a1() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(10.0, 80.0);
        let shifts = stark_shifts(&c, &s);
        let rates = RelaxationRates::default();
        let rho = steady_state(&s, &p, &c, &shifts, &ZeemanField::rb87_d1(0.0, 2), &rates).unwrap();
        let pops = [1, 2, 3].map(|i| rho.population(&SublevelId::a(i)));
        assert_abs_diff_eq!(pops[0], 0.226, epsilon = 0.015);
        assert_abs_diff_eq!(pops[1], 0.233, epsilon = 0.015);
        assert_abs_diff_eq!(pops[2], 0.066, epsilon = 0.015);
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-10);
        assert!(rho.min_eigenvalue() > -1e-10);
    }

    #[test]
    fn ground_coherence_repopulation_coefficients() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(10.0, 80.0);
        let h = build_hamiltonian(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let rates = RelaxationRates::default();
        let l = build_liouvillian(&h, &rates, &s);
        let n = s.dimension();
        let ix = |x: SublevelId, y: SublevelId| s.index_of(&x).unwrap() * n + s.index_of(&y).unwrap();
        let row = ix(SublevelId::a(1), SublevelId::a(3));
        let g = rates.spontaneous;
        let c = |k| SublevelId::c(k, 2);
        assert_abs_diff_eq!(l.matrix[(row, ix(c(1), c(3)))].re / g, 6f64.sqrt() / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.matrix[(row, ix(c(2), c(4)))].re / g, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(l.matrix[(row, ix(c(3), c(5)))].re / g, 6f64.sqrt() / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.matrix[(row, row)].re, -rates.zeeman, epsilon = 1e-6);
    }

    #[test]
    fn first_coherence_row() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let dp = mhz(2.0);
        let p = FieldDrive::probe(FieldPolarization::Linear, mhz(10.0), dp);
        let c = FieldDrive::coupling(FieldPolarization::SigmaMinus, mhz(80.0), 0.0);
        let h = build_hamiltonian(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let rates = RelaxationRates::default();
        let l = build_liouvillian(&h, &rates, &s);
        let n = s.dimension();
        let ix = |x: SublevelId, y: SublevelId| s.index_of(&x).unwrap() * n + s.index_of(&y).unwrap();
        let (a1, b2) = (SublevelId::a(1), SublevelId::b(2));
        let (c1, c3) = (SublevelId::c(1, 2), SublevelId::c(3, 2));
        let row = ix(c1, a1);
        let rabi = |pd: &FieldDrive, lo, up| s.transition_rabi(pd, s.transition(&lo, &up).unwrap());
        let op1 = rabi(&p, a1, c1);
        let oc1 = rabi(&c, b2, c1);
        let opp1 = rabi(&p, a1, c3);
        let tol = 1e-3;
        assert_abs_diff_eq!(l.matrix[(row, row)].re, -rates.optical, epsilon = tol);
        assert_abs_diff_eq!(l.matrix[(row, row)].im, dp, epsilon = tol);
        assert_abs_diff_eq!(l.matrix[(row, ix(a1, a1))].im, 0.5 * op1, epsilon = tol);
        assert_abs_diff_eq!(l.matrix[(row, ix(c1, c1))].im, -0.5 * op1, epsilon = tol);
        assert_abs_diff_eq!(l.matrix[(row, ix(b2, a1))].im, 0.5 * oc1, epsilon = tol);
        assert_abs_diff_eq!(l.matrix[(row, ix(c1, c3))].im, -0.5 * opp1, epsilon = tol);
    }

    #[test]
    fn closure_of_probe_coherences_has_75_elements() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(10.0, 80.0);
        let shifts = stark_shifts(&c, &s);
        let h = build_hamiltonian(&s, &p, &c, &shifts, &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let l = build_liouvillian(&h, &RelaxationRates::default(), &s);
        let channels = probe_channels(&s, p.rabi_scale, &c, &shifts, &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let seeds: Vec<_> = channels.iter().map(|ch| (ch.upper, ch.lower)).collect();
        assert_eq!(seeds.len(), 6);
        assert_eq!(l.coupled_elements(&seeds).len(), 75);
    }

    #[test]
    fn equation_dump_labels() {
        let s = build_level_scheme(SchemeId::Fig1Asym);
        let (p, c) = drives(10.0, 80.0);
        let h = build_hamiltonian(&s, &p, &c, &StarkShifts::zero(&s), &ZeemanField::rb87_d1(0.0, 2)).unwrap();
        let l = build_liouvillian(&h, &RelaxationRates::default(), &s);
        let lines = l.equation_lines();
        assert!(lines.iter().any(|x| x.starts_with("d/dt rho[c1,a1] +=") && x.ends_with("rho[b2,a1]")));
    }
}
