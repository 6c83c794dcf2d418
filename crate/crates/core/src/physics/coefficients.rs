//! Kinematic coefficient functions of the unpolarized twist-2 cross section.
//!
//! Bethe-Heitler harmonics follow the BKM 2002 unpolarized expressions;
//! the helicity-conserving interference coefficients `C^n_{++}`,
//! `C^{V,n}_{++}`, `C^{A,n}_{++}` follow BKM 2010. All are functions of
//! the kinematics only (and of F1, F2 for the BH part); the azimuthal
//! dependence is supplied by the caller in the BKM frame, phi_BKM = pi - phi_Trento.

use super::{FormFactors, Kinematics};

/// Fourier coefficients c^BH_0..2 of the unpolarized Bethe-Heitler amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BhCoefficients {
    pub c: [f64; 3],
}

/// Helicity-conserving interference coefficients for n = 0..3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceCoefficients {
    /// C^n_{++}
    pub pp: [f64; 4],
    /// C^{V,n}_{++}
    pub vector: [f64; 4],
    /// C^{A,n}_{++}
    pub axial: [f64; 4],
}

pub fn bh_coefficients(kin: &Kinematics, ff: &FormFactors) -> BhCoefficients {
    let Kinematics { xb: x, q2, t, y, eps2: ee, kfac: k, mass, .. } = *kin;
    let m2 = mass * mass;
    let FormFactors { f1, f2 } = *ff;
    let a = f1 * f1 - f2 * f2 * t / (4.0 * m2);
    let b = (f1 + f2) * (f1 + f2);
    let tq = t / q2;

    let c0 = 8.0 * k * k * ((2.0 + 3.0 * ee) * (q2 / t) * a + 2.0 * x * x * b)
        + (2.0 - y).powi(2)
            * ((2.0 + ee) * ((4.0 * x * x * m2 / t) * (1.0 + tq).powi(2) + 4.0 * (1.0 - x) * (1.0 + x * tq)) * a
                + 4.0 * x * x * (x + (1.0 - x + ee / 2.0) * (1.0 - tq).powi(2) - x * (1.0 - 2.0 * x) * tq * tq) * b)
        + 8.0
            * (1.0 + ee)
            * kin.lepton_factor()
            * (2.0 * ee * (1.0 - t / (4.0 * m2)) * a - x * x * (1.0 - tq).powi(2) * b);

    let c1 = 8.0
        * k
        * (2.0 - y)
        * ((4.0 * x * x * m2 / t - 2.0 * x - ee) * a + 2.0 * x * x * (1.0 - (1.0 - 2.0 * x) * tq) * b);

    let c2 = 8.0 * x * x * k * k * ((4.0 * m2 / t) * a + 2.0 * b);

    BhCoefficients { c: [c0, c1, c2] }
}

pub fn interference_coefficients(kin: &Kinematics) -> InterferenceCoefficients {
    let Kinematics { xb: x, q2, t, y, eps2: ee, kfac: k, ktilde, t_min, .. } = *kin;
    let sq = (1.0 + ee).sqrt();
    let tq = t / q2;
    let dtq = (t - t_min) / q2;
    let kt2 = ktilde * ktilde / q2;
    let lep = kin.lepton_factor();
    let ym = 2.0 - y;
    let e2 = (1.0 + ee).powi(2);
    let e52 = (1.0 + ee).powf(2.5);

    // n = 0
    let c0 = -4.0 * ym * (1.0 + sq) / e2
        * (kt2 * ym * ym / sq
            + tq * lep
                * (2.0 - x)
                * (1.0
                    + (2.0 * x * (2.0 - x + (sq - 1.0) / 2.0 + ee / (2.0 * x)) * tq + ee) / ((2.0 - x) * (1.0 + sq))));
    let c0v = 8.0 * ym / e2
        * x
        * tq
        * (ym * ym / sq * kt2 + lep * (1.0 + sq) / 2.0 * (1.0 + tq) * (1.0 + (sq - 1.0 + 2.0 * x) / (1.0 + sq) * tq));
    let c0a = 8.0 * ym / e2
        * tq
        * (ym * ym / sq * kt2 * (1.0 + sq - 2.0 * x) / 2.0
            + lep
                * ((1.0 + sq) / 2.0 * (1.0 + sq - x + (sq - 1.0 + x * (3.0 + sq - 2.0 * x) / (1.0 + sq)) * tq)
                    - 2.0 * kt2));

    // n = 1
    let c1 = -16.0 * k * lep / e52
        * ((1.0 + (1.0 - x) * (sq - 1.0) / (2.0 * x) + ee / (4.0 * x)) * x * tq - 3.0 * ee / 4.0)
        - 4.0 * k * (2.0 - 2.0 * y + y * y + ee / 2.0 * y * y) * (1.0 + sq - ee) / e52
            * (1.0 - (1.0 - 3.0 * x) * tq + (1.0 - sq + 3.0 * ee) / (1.0 + sq - ee) * x * tq);
    let c1v =
        16.0 * k * x * tq / e52 * (ym * ym * (1.0 - (1.0 - 2.0 * x) * tq) + lep * (1.0 + sq - 2.0 * x) / 2.0 * dtq);
    let c1a = -16.0 * k * tq / e2
        * (lep * (1.0 - (1.0 - 2.0 * x) * tq + (4.0 * x * (1.0 - x) + ee) / (4.0 * sq) * dtq)
            - ym * ym
                * (1.0 - x / 2.0
                    + (1.0 + sq - 2.0 * x) / 4.0 * (1.0 - tq)
                    + (4.0 * x * (1.0 - x) + ee) / (2.0 * sq) * dtq));

    // n = 2
    let c2 = 8.0 * ym * lep / e2
        * (2.0 * ee / (sq * (1.0 + sq)) * kt2
            + x * t * (t - t_min) / (q2 * q2) * (1.0 - x - (sq - 1.0) / 2.0 + ee / (2.0 * x)));
    let c2v = 8.0 * ym * lep / e2 * x * tq * (4.0 * kt2 / sq + (1.0 + sq - 2.0 * x) / 2.0 * (1.0 + tq) * dtq);
    let c2a = 4.0 * ym * lep / e2 * tq * (4.0 * (1.0 - 2.0 * x) * kt2 / sq - (3.0 - sq - 2.0 * x + ee / x) * x * dtq);

    // n = 3
    let c3 = -8.0 * k * lep * (sq - 1.0) / e52 * ((1.0 - x) * tq + (sq - 1.0) / 2.0 * (1.0 + tq));
    let c3v = -8.0 * k * lep * x * tq / e52 * (sq - 1.0 + (1.0 + sq - 2.0 * x) * tq);
    let c3a = 16.0 * k * lep * t * (t - t_min) / (q2 * q2) / e52 * (x * (1.0 - x) + ee / 4.0);

    InterferenceCoefficients { pp: [c0, c1, c2, c3], vector: [c0v, c1v, c2v, c3v], axial: [c0a, c1a, c2a, c3a] }
}
