//! Angular momentum coupling coefficients.
//!
//! Every angular momentum and projection is passed as *twice* its value so
//! that half-integer spins stay exact (`tj = 1` is j = 1/2).

const MAX_FACTORIAL: usize = 64;

fn factorial(n: i32) -> f64 {
    debug_assert!(n >= 0 && (n as usize) < MAX_FACTORIAL);
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn is_even(n: i32) -> bool {
    n.rem_euclid(2) == 0
}

fn phase(exponent: i32) -> f64 {
    if is_even(exponent) {
        1.0
    } else {
        -1.0
    }
}

/// Triangle condition |a-b| <= c <= a+b with an integer perimeter.
fn triangle(ta: i32, tb: i32, tc: i32) -> bool {
    tc >= (ta - tb).abs() && tc <= ta + tb && is_even(ta + tb + tc)
}

/// Triangle coefficient Δ(abc).
fn delta(ta: i32, tb: i32, tc: i32) -> f64 {
    let num = factorial((ta + tb - tc) / 2)
        * factorial((ta - tb + tc) / 2)
        * factorial((-ta + tb + tc) / 2);
    (num / factorial((ta + tb + tc) / 2 + 1)).sqrt()
}

fn projection_ok(tj: i32, tm: i32) -> bool {
    tj >= 0 && tm.abs() <= tj && is_even(tj + tm)
}

/// Wigner 3-j symbol (j1 j2 j3; m1 m2 m3) by the Racah formula.
pub fn wigner_3j(tj1: i32, tj2: i32, tj3: i32, tm1: i32, tm2: i32, tm3: i32) -> f64 {
    if tm1 + tm2 + tm3 != 0
        || !projection_ok(tj1, tm1)
        || !projection_ok(tj2, tm2)
        || !projection_ok(tj3, tm3)
        || !triangle(tj1, tj2, tj3)
    {
        return 0.0;
    }
    let j1pm1 = (tj1 + tm1) / 2;
    let j1mm1 = (tj1 - tm1) / 2;
    let j2pm2 = (tj2 + tm2) / 2;
    let j2mm2 = (tj2 - tm2) / 2;
    let j3pm3 = (tj3 + tm3) / 2;
    let j3mm3 = (tj3 - tm3) / 2;
    let j12m3 = (tj1 + tj2 - tj3) / 2;
    // (j3 - j2 + m1) and (j3 - j1 - m2)
    let a = (tj3 - tj2 + tm1) / 2;
    let b = (tj3 - tj1 - tm2) / 2;

    let kmin = 0.max(-a).max(-b);
    let kmax = j12m3.min(j1mm1).min(j2pm2);
    let sum: f64 = (kmin..=kmax)
        .map(|k| {
            phase(k)
                / (factorial(k)
                    * factorial(a + k)
                    * factorial(b + k)
                    * factorial(j12m3 - k)
                    * factorial(j1mm1 - k)
                    * factorial(j2pm2 - k))
        })
        .sum();

    let norm = (factorial(j1pm1)
        * factorial(j1mm1)
        * factorial(j2pm2)
        * factorial(j2mm2)
        * factorial(j3pm3)
        * factorial(j3mm3))
    .sqrt();
    phase((tj1 - tj2 - tm3) / 2) * delta(tj1, tj2, tj3) * norm * sum
}

/// Clebsch-Gordan coefficient ⟨j1 m1; j2 m2 | j m⟩.
pub fn clebsch_gordan(tj1: i32, tm1: i32, tj2: i32, tm2: i32, tj: i32, tm: i32) -> f64 {
    if tm1 + tm2 != tm {
        return 0.0;
    }
    phase((tj1 - tj2 + tm) / 2) * ((tj + 1) as f64).sqrt() * wigner_3j(tj1, tj2, tj, tm1, tm2, -tm)
}

/// Wigner 6-j symbol {j1 j2 j3; j4 j5 j6} by the Racah formula.
pub fn wigner_6j(tj1: i32, tj2: i32, tj3: i32, tj4: i32, tj5: i32, tj6: i32) -> f64 {
    if !triangle(tj1, tj2, tj3)
        || !triangle(tj1, tj5, tj6)
        || !triangle(tj4, tj2, tj6)
        || !triangle(tj4, tj5, tj3)
    {
        return 0.0;
    }
    let a1 = (tj1 + tj2 + tj3) / 2;
    let a2 = (tj1 + tj5 + tj6) / 2;
    let a3 = (tj4 + tj2 + tj6) / 2;
    let a4 = (tj4 + tj5 + tj3) / 2;
    let b1 = (tj1 + tj2 + tj4 + tj5) / 2;
    let b2 = (tj2 + tj3 + tj5 + tj6) / 2;
    let b3 = (tj3 + tj1 + tj6 + tj4) / 2;

    let tmin = a1.max(a2).max(a3).max(a4);
    let tmax = b1.min(b2).min(b3);
    let sum: f64 = (tmin..=tmax)
        .map(|t| {
            phase(t) * factorial(t + 1)
                / (factorial(t - a1)
                    * factorial(t - a2)
                    * factorial(t - a3)
                    * factorial(t - a4)
                    * factorial(b1 - t)
                    * factorial(b2 - t)
                    * factorial(b3 - t))
        })
        .sum();
    delta(tj1, tj2, tj3) * delta(tj1, tj5, tj6) * delta(tj4, tj2, tj6) * delta(tj4, tj5, tj3) * sum
}

/// Fine/hyperfine quantum numbers of one optical line, doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LineStructure {
    pub two_j_ground: i32,
    pub two_j_excited: i32,
    pub two_i: i32,
}

impl LineStructure {
    /// 87Rb D1 line: J = 1/2 → J' = 1/2, I = 3/2.
    pub const RB87_D1: LineStructure = LineStructure {
        two_j_ground: 1,
        two_j_excited: 1,
        two_i: 3,
    };

    /// Signed hyperfine dipole factor ⟨F m|e r_q|F' m'⟩ in units of the
    /// reduced matrix element ⟨J||e r||J'⟩, with q = m - m'.
    ///
    /// Returns exactly zero for transitions outside |Δm| <= 1, |ΔF| <= 1.
    pub fn dipole_factor(&self, tf: i32, tm: i32, tfe: i32, tme: i32) -> f64 {
        let tq = tm - tme;
        if tq.abs() > 2 || (tf - tfe).abs() > 2 {
            return 0.0;
        }
        let (tj, tje, ti) = (self.two_j_ground, self.two_j_excited, self.two_i);
        let sign = phase((tfe + tj + 2 + ti) / 2);
        let weight = (((tfe + 1) * (tj + 1)) as f64).sqrt();
        sign * weight * wigner_6j(tj, tje, 2, tfe, tf, ti) * clebsch_gordan(tfe, tme, 2, tq, tf, tm)
    }
}
