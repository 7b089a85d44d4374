//! Jones-calculus model of the balanced polarimeter: cell transmission,
//! 50/50 split, x/y analysis of one arm, half-wave plate at 22.5° plus
//! analysis in the other, and angle recovery from the two differences.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use num_complex::Complex64;

use crate::atomic::to_mhz;
use crate::error::{Error, Result};
use crate::spectra::{MediumParams, SusceptibilityPair};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesVector {
    pub ex: Complex64,
    pub ey: Complex64,
}

impl JonesVector {
    pub fn new(ex: Complex64, ey: Complex64) -> Self {
        JonesVector { ex, ey }
    }

    /// Linear polarization at angle `theta` from x with intensity `i0`.
    pub fn linear(theta: f64, i0: f64) -> Self {
        let a = i0.sqrt();
        JonesVector {
            ex: Complex64::new(a * theta.cos(), 0.0),
            ey: Complex64::new(a * theta.sin(), 0.0),
        }
    }

    pub fn intensity(&self) -> f64 {
        self.ex.norm_sqr() + self.ey.norm_sqr()
    }

    /// Components on (1, i)/√2 and (1, -i)/√2.
    pub fn circular(&self) -> (Complex64, Complex64) {
        let i = Complex64::new(0.0, 1.0);
        (
            (self.ex - i * self.ey) * FRAC_1_SQRT_2,
            (self.ex + i * self.ey) * FRAC_1_SQRT_2,
        )
    }

    pub fn from_circular(plus: Complex64, minus: Complex64) -> Self {
        let i = Complex64::new(0.0, 1.0);
        JonesVector {
            ex: (plus + minus) * FRAC_1_SQRT_2,
            ey: (plus - minus) * i * FRAC_1_SQRT_2,
        }
    }
}

/// Transmits a field through the cell. The (1, i) component travels with n⁺,
/// α⁺ and the (1, -i) component with n⁻, α⁻. The common vacuum phase k·d is
/// dropped.
pub fn propagate_cell(input: &JonesVector, pair: &SusceptibilityPair, medium: &MediumParams) -> JonesVector {
    let k = medium.wavenumber();
    let d = medium.length;
    let (plus, minus) = input.circular();
    // n - 1 = Re χ / (n + 1)
    let excess_plus = pair.chi_plus.re / (pair.n_plus + 1.0);
    let excess_minus = pair.chi_minus.re / (pair.n_minus + 1.0);
    let factor = |excess: f64, alpha: f64| Complex64::from_polar((-0.5 * alpha * d).exp(), -k * excess * d);
    JonesVector::from_circular(
        plus * factor(excess_plus, pair.alpha_plus),
        minus * factor(excess_minus, pair.alpha_minus),
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorSignals {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    /// Input probe intensity.
    pub i0: f64,
}

impl DetectorSignals {
    pub fn transmitted_difference(&self) -> f64 {
        self.d1 - self.d2
    }

    pub fn reflected_difference(&self) -> f64 {
        self.d3 - self.d4
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DetectorSignals {
            d1: self.d1 * factor,
            d2: self.d2 * factor,
            d3: self.d3 * factor,
            d4: self.d4 * factor,
            i0: self.i0,
        }
    }
}

/// Half-wave plate with its axis at 22.5° from x.
const HALF_WAVE_22_5: [[f64; 2]; 2] = [[-FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, FRAC_1_SQRT_2]];

pub fn detector_intensities(out: &JonesVector, i0: f64) -> DetectorSignals {
    let ex = out.ex * FRAC_1_SQRT_2;
    let ey = out.ey * FRAC_1_SQRT_2;
    let m = HALF_WAVE_22_5;
    let rx = ex * m[0][0] + ey * m[0][1];
    let ry = ex * m[1][0] + ey * m[1][1];
    DetectorSignals {
        d1: ey.norm_sqr(),
        d2: ex.norm_sqr(),
        d3: rx.norm_sqr(),
        d4: ry.norm_sqr(),
        i0,
    }
}

/// Closed-form intensities for an x-polarized input rotated by `phi`, with
/// amplitude transmissions exp(-α±d/2).
pub fn closed_form_intensities(phi: f64, alpha_plus_d: f64, alpha_minus_d: f64, i0: f64) -> DetectorSignals {
    let tp = (-0.5 * alpha_plus_d).exp();
    let tm = (-0.5 * alpha_minus_d).exp();
    let mean = 0.25 * (tp * tp + tm * tm);
    let cross = 0.5 * tp * tm;
    let (s, c) = (2.0 * phi).sin_cos();
    DetectorSignals {
        d1: 0.5 * i0 * (mean - cross * c),
        d2: 0.5 * i0 * (mean + cross * c),
        d3: 0.5 * i0 * (mean - cross * s),
        d4: 0.5 * i0 * (mean + cross * s),
        i0,
    }
}

/// Default floor on the difference signals, as a fraction of I₀.
pub const DEFAULT_ANGLE_FLOOR: f64 = 1e-12;

pub fn recover_angle(signals: &DetectorSignals) -> Result<f64> {
    recover_angle_with_floor(signals, DEFAULT_ANGLE_FLOOR)
}

/// φ = ½ atan2(-(D3-D4), -(D1-D2)) in (-π/2, π/2].
pub fn recover_angle_with_floor(signals: &DetectorSignals, floor: f64) -> Result<f64> {
    let t = signals.transmitted_difference();
    let r = signals.reflected_difference();
    let limit = floor * signals.i0.abs();
    if t.abs() <= limit && r.abs() <= limit {
        return Err(Error::IndeterminateAngle { floor: limit });
    }
    Ok(0.5 * (-r).atan2(-t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    /// rad/s
    pub detuning: f64,
    pub signals: DetectorSignals,
    /// rad, None where the angle is indeterminate
    pub phi: Option<f64>,
}

pub const TRACE_HEADER: &str = "detuning_mhz,i_d1,i_d2,i_d3,i_d4,phi_deg";

pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        let s = &r.signals;
        let phi = r.phi.map_or_else(|| "nan".to_string(), |p| format!("{:.8e}", p.to_degrees()));
        writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{}",
            to_mhz(r.detuning),
            s.d1 / s.i0,
            s.d2 / s.i0,
            s.d3 / s.i0,
            s.d4 / s.i0,
            phi
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atomic::D1_WAVELENGTH;
    use approx::assert_abs_diff_eq;

    fn medium() -> MediumParams {
        MediumParams::from_temperature(328.15, 1.0)
    }

    /// Susceptibilities giving rotation `phi` and absorptions α±.
    fn pair_for(phi: f64, alpha_plus: f64, alpha_minus: f64, m: &MediumParams) -> SusceptibilityPair {
        let dn = phi * m.wavelength / (std::f64::consts::PI * m.length);
        let mut p = SusceptibilityPair::new(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), D1_WAVELENGTH);
        p.n_plus = 1.0 + 0.5 * dn;
        p.n_minus = 1.0 - 0.5 * dn;
        p.chi_plus = Complex64::new(p.n_plus * p.n_plus - 1.0, 0.0);
        p.chi_minus = Complex64::new(p.n_minus * p.n_minus - 1.0, 0.0);
        p.alpha_plus = alpha_plus;
        p.alpha_minus = alpha_minus;
        p
    }

    #[test]
    fn no_medium() {
        let s = detector_intensities(&JonesVector::linear(0.0, 1.0), 1.0);
        assert_abs_diff_eq!(s.d1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d2, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d3, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d4, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn forty_five_degrees() {
        let s = detector_intensities(&JonesVector::linear(std::f64::consts::FRAC_PI_4, 1.0), 1.0);
        assert_abs_diff_eq!(s.d1, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d2, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d3, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.d4, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn half_turn_rotates_x_into_y() {
        let m = medium();
        let out = propagate_cell(&JonesVector::linear(0.0, 1.0), &pair_for(std::f64::consts::FRAC_PI_2, 0.0, 0.0, &m), &m);
        assert_abs_diff_eq!(out.ex.norm(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(out.ey.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn common_absorption() {
        let m = medium();
        let alpha = 20.0;
        let out = propagate_cell(&JonesVector::linear(0.3, 2.0), &pair_for(0.0, alpha, alpha, &m), &m);
        assert_abs_diff_eq!(out.intensity(), 2.0 * (-alpha * m.length).exp(), epsilon = 1e-14);
    }

    #[test]
    fn recovery_examples() {
        let s = |t: f64, r: f64| DetectorSignals {
            d1: t,
            d2: 0.0,
            d3: r,
            d4: 0.0,
            i0: 1.0,
        };
        assert_abs_diff_eq!(recover_angle(&s(-0.3, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(recover_angle(&s(-0.3, -0.3)).unwrap(), std::f64::consts::PI / 8.0, epsilon = 1e-15);
        assert!(matches!(recover_angle(&s(0.0, 0.0)), Err(Error::IndeterminateAngle { .. })));
    }

    #[test]
    fn matches_closed_form_with_dichroism() {
        let m = medium();
        for (phi, ap, am) in [(0.2, 0.0, 0.0), (-0.5, 10.0, 30.0), (0.7, 55.0, 3.0)] {
            let pair = pair_for(phi, ap, am, &m);
            let out = propagate_cell(&JonesVector::linear(0.0, 1.0), &pair, &m);
            let num = detector_intensities(&out, 1.0);
            let exact = crate::spectra::rotation_angle(&pair, &m).exact;
            let cf = closed_form_intensities(exact, ap * m.length, am * m.length, 1.0);
            for (x, y) in [(num.d1, cf.d1), (num.d2, cf.d2), (num.d3, cf.d3), (num.d4, cf.d4)] {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(recover_angle(&num).unwrap(), phi, epsilon = 1e-9);
        }
    }
}
