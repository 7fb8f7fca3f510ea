//! Causal in-amplitudes and the stationary transmission and reflection
//! fields, which follow different solution branches left and right of x_c.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::barrier::{coeffs_from_table, BarrierSpec, BasisTable, ScatteringCoeffs, REFLECTION_FLOOR};
use crate::error::Result;
use crate::numerics::PhysicalConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Full,
    Transmission,
    Reflection,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Full, Kind::Transmission, Kind::Reflection];

    pub fn label(self) -> &'static str {
        match self {
            Kind::Full => "full",
            Kind::Transmission => "tr",
            Kind::Reflection => "ref",
        }
    }
}

/// Which one-sided limit to take at the midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    LeftOfBarrier,
    BarrierLeft,
    BarrierRight,
    RightOfBarrier,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InAmplitudes {
    pub a_tr: Complex64,
    pub a_ref: Complex64,
    /// Principal arg of `a_ref`; `None` without a reflection subprocess.
    pub lambda: Option<f64>,
}

impl InAmplitudes {
    /// Whether √R e^{iλ} and √T e^{i(λ ± π/2)} reproduce the product forms
    /// for one of the two branch choices.
    pub fn polar_forms_agree(&self, coeffs: &ScatteringCoeffs, tol: f64) -> bool {
        let Some(lambda) = self.lambda else {
            return self.a_ref.norm() <= tol && (self.a_tr - 1.0).norm() <= tol;
        };
        let ref_ok = (Complex64::from_polar(coeffs.r.sqrt(), lambda) - self.a_ref).norm() <= tol;
        let tr_ok = [1.0, -1.0].iter().any(|s| {
            let polar = Complex64::from_polar(coeffs.t.sqrt(), lambda + s * core::f64::consts::FRAC_PI_2);
            (polar - self.a_tr).norm() <= tol
        });
        ref_ok && tr_ok
    }
}

/// A_tr = a*(a + b) and A_ref = b(b* − a*).
pub fn in_amplitudes(coeffs: &ScatteringCoeffs) -> InAmplitudes {
    let (a, b) = (coeffs.a_out, coeffs.b_out);
    let a_ref = b * (b.conj() - a.conj());
    InAmplitudes {
        a_tr: a.conj() * (a + b),
        a_ref,
        lambda: (coeffs.r > REFLECTION_FLOOR).then(|| a_ref.arg()),
    }
}

/// Region-wise coefficients of one stationary field:
/// x ≤ a: `incident`·e^{ikx} + `reflected`·e^{ik(2a−x)};
/// a ≤ x ≤ x_c: `left_u`·u + `left_v`·v;
/// x_c ≤ x ≤ b: `right_u`·u + `right_v`·v;
/// x ≥ b: `outgoing`·e^{ik(x−d)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCoefficients {
    pub incident: Complex64,
    pub reflected: Complex64,
    pub left_u: Complex64,
    pub left_v: Complex64,
    pub right_u: Complex64,
    pub right_v: Complex64,
    pub outgoing: Complex64,
}

impl FieldCoefficients {
    pub fn new(kind: Kind, coeffs: &ScatteringCoeffs, amps: &InAmplitudes, a: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let phase_a = Complex64::from_polar(1.0, coeffs.k * a);
        let kn = coeffs.kappa_norm;
        match kind {
            Kind::Full => FieldCoefficients {
                incident: Complex64::new(1.0, 0.0),
                reflected: coeffs.b_out,
                left_u: coeffs.a_full,
                left_v: coeffs.b_full,
                right_u: coeffs.a_full,
                right_v: coeffs.b_full,
                outgoing: coeffs.a_out,
            },
            Kind::Transmission => FieldCoefficients {
                incident: amps.a_tr,
                reflected: zero,
                left_u: coeffs.p * amps.a_tr * phase_a / kn,
                left_v: coeffs.b_full,
                right_u: coeffs.a_full,
                right_v: coeffs.b_full,
                outgoing: coeffs.a_out,
            },
            Kind::Reflection => FieldCoefficients {
                incident: amps.a_ref,
                reflected: coeffs.b_out,
                // Equal to (P·A_ref + P*·b_out)e^{ika}/κ, which cancels
                // catastrophically in opaque barriers; the difference of the
                // full and transmission coefficients does not.
                left_u: coeffs.a_full - coeffs.p * amps.a_tr * phase_a / kn,
                left_v: zero,
                right_u: zero,
                right_v: zero,
                outgoing: zero,
            },
        }
    }

    /// Coefficients of Φ(x; −k) = Φ(x; k)*, written in the same form with
    /// k replaced by −k.
    pub fn conj(&self) -> Self {
        FieldCoefficients {
            incident: self.incident.conj(),
            reflected: self.reflected.conj(),
            left_u: self.left_u.conj(),
            left_v: self.left_v.conj(),
            right_u: self.right_u.conj(),
            right_v: self.right_v.conj(),
            outgoing: self.outgoing.conj(),
        }
    }
}

/// A stationary field (full, transmission or reflection) for one k > 0.
#[derive(Debug, Clone)]
pub struct SubprocessField {
    kind: Kind,
    coeffs: ScatteringCoeffs,
    amps: InAmplitudes,
    fc: FieldCoefficients,
    table: BasisTable,
    a: f64,
    b: f64,
    xc: f64,
}

impl SubprocessField {
    pub fn new(barrier: &BarrierSpec, k: f64, kind: Kind, constants: &PhysicalConstants) -> Result<Self> {
        barrier.validate()?;
        let table = BasisTable::new(barrier, k, constants)?;
        let coeffs = coeffs_from_table(barrier, &table, k, constants)?;
        let amps = in_amplitudes(&coeffs);
        let a = barrier.left();
        Ok(SubprocessField {
            kind,
            coeffs,
            amps,
            fc: FieldCoefficients::new(kind, &coeffs, &amps, a),
            table,
            a,
            b: barrier.right(),
            xc: barrier.midpoint(),
        })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.coeffs.k
    }

    pub fn coeffs(&self) -> &ScatteringCoeffs {
        &self.coeffs
    }

    pub fn amplitudes(&self) -> &InAmplitudes {
        &self.amps
    }

    pub fn field_coefficients(&self) -> &FieldCoefficients {
        &self.fc
    }

    pub fn region(&self, x: f64, side: Side) -> Region {
        classify(x, side, self.a, self.b, self.xc)
    }

    /// (ψ, dψ/dx) at x; at x_c the left limit.
    pub fn eval(&self, x: f64) -> Result<(Complex64, Complex64)> {
        self.eval_side(x, Side::Left)
    }

    pub fn eval_side(&self, x: f64, side: Side) -> Result<(Complex64, Complex64)> {
        let k = self.coeffs.k;
        let fc = &self.fc;
        Ok(match self.region(x, side) {
            Region::LeftOfBarrier => {
                let inc = Complex64::from_polar(1.0, k * x);
                let refl = Complex64::from_polar(1.0, k * (2.0 * self.a - x));
                let ik = Complex64::new(0.0, k);
                (fc.incident * inc + fc.reflected * refl, ik * (fc.incident * inc - fc.reflected * refl))
            }
            Region::RightOfBarrier => {
                let out = fc.outgoing * Complex64::from_polar(1.0, k * (x - (self.b - self.a)));
                (out, Complex64::new(0.0, k) * out)
            }
            region => {
                let basis = self.table.at(x)?;
                let (cu, cv) = if region == Region::BarrierLeft {
                    (fc.left_u, fc.left_v)
                } else {
                    (fc.right_u, fc.right_v)
                };
                (cu * basis.u + cv * basis.v, cu * basis.du + cv * basis.dv)
            }
        })
    }

    /// Probability current at x from the given side.
    pub fn current(&self, x: f64, side: Side, constants: &PhysicalConstants) -> Result<f64> {
        let (psi, dpsi) = self.eval_side(x, side)?;
        Ok(current(psi, dpsi, constants))
    }
}

/// Region of x for a barrier on [a, b] with midpoint `xc`. At the midpoint
/// (and at a point barrier) `side` picks the one-sided limit.
pub(crate) fn classify(x: f64, side: Side, a: f64, b: f64, xc: f64) -> Region {
    let at_mid = x == xc;
    if x < a || (x == a && !(at_mid && side == Side::Right)) {
        Region::LeftOfBarrier
    } else if x > b || (a == b && x == b) {
        Region::RightOfBarrier
    } else if x < xc || (at_mid && side == Side::Left) {
        Region::BarrierLeft
    } else {
        Region::BarrierRight
    }
}

pub fn stationary_subprocess(
    barrier: &BarrierSpec,
    k: f64,
    kind: Kind,
    constants: &PhysicalConstants,
) -> Result<SubprocessField> {
    SubprocessField::new(barrier, k, kind, constants)
}

pub fn full_stationary(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<SubprocessField> {
    SubprocessField::new(barrier, k, Kind::Full, constants)
}

/// (ħ/m)·Im(ψ* dψ/dx).
pub fn current(psi: Complex64, dpsi: Complex64, constants: &PhysicalConstants) -> f64 {
    constants.hbar_over_mass() * (psi.conj() * dpsi).im
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::scattering_coeffs;
    use crate::testutil::{double_barrier, fig1_barrier, rk4_basis, well_and_steps};
    use alloc::vec::Vec;
    use approx::assert_relative_eq;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn all_barriers() -> Vec<BarrierSpec> {
        alloc::vec![fig1_barrier(), double_barrier(), well_and_steps(), BarrierSpec::Delta { a: 30.0, w: 0.02 }]
    }

    #[test]
    fn free_case_has_no_reflection_subprocess() {
        let c = c();
        let s = scattering_coeffs(&BarrierSpec::Rectangular { a: 1.0, b: 3.0, v0: 0.0 }, 0.5, &c).unwrap();
        let amps = in_amplitudes(&s);
        assert!((amps.a_tr - 1.0).norm() < 1e-14);
        assert!(amps.a_ref.norm() < 1e-14);
        assert!(amps.lambda.is_none());
        assert!(amps.polar_forms_agree(&s, 1e-12));
    }

    #[test]
    fn equal_split_gives_quarter_pi() {
        let c = c();
        let bar = fig1_barrier();
        // bisect the energy where T = 1/2
        let t_minus_half = |e: f64| scattering_coeffs(&bar, c.wavenumber(e), &c).unwrap().t - 0.5;
        let e = crate::numerics::find_root(t_minus_half, (0.1, 0.3), 1e-14).unwrap();
        let s = scattering_coeffs(&bar, c.wavenumber(e), &c).unwrap();
        let amps = in_amplitudes(&s);
        assert_relative_eq!(amps.lambda.unwrap().abs(), core::f64::consts::FRAC_PI_4, max_relative = 1e-8);
        assert!(amps.polar_forms_agree(&s, 1e-10));
    }

    #[test]
    fn amplitude_identities_and_alternative_form() {
        let c = c();
        for bar in all_barriers() {
            for &e in &[0.01, 0.05, 0.15, 0.3] {
                let s = scattering_coeffs(&bar, c.wavenumber(e), &c).unwrap();
                let amps = in_amplitudes(&s);
                assert!((amps.a_tr + amps.a_ref - 1.0).norm() < 1e-12);
                assert!((amps.a_tr.norm_sqr() + amps.a_ref.norm_sqr() - 1.0).abs() < 1e-12);
                assert!((amps.a_tr.norm_sqr() - s.t).abs() < 1e-12);
                // with w = (P/P*)(Q/Q*)*: A_ref = (1 + w)/2, A_tr = (1 − w)/2
                let w = (s.p / s.p.conj()) * (s.q / s.q.conj()).conj();
                assert!((0.5 * (1.0 + w) - amps.a_ref).norm() < 1e-14);
                assert!((0.5 * (1.0 - w) - amps.a_tr).norm() < 1e-14);
                assert!(amps.polar_forms_agree(&s, 1e-10));
            }
        }
    }

    #[test]
    fn decomposition_is_pointwise() {
        let c = c();
        for bar in all_barriers() {
            for &e in &[0.02, 0.08, 0.25] {
                let k = c.wavenumber(e);
                let tr = stationary_subprocess(&bar, k, Kind::Transmission, &c).unwrap();
                let rf = stationary_subprocess(&bar, k, Kind::Reflection, &c).unwrap();
                let full = full_stationary(&bar, k, &c).unwrap();
                let (lo, hi) = (bar.left() - 40.0, bar.right() + 40.0);
                let mut worst: f64 = 0.0;
                let mut peak: f64 = 0.0;
                for i in 0..2000 {
                    let x = lo + (hi - lo) * i as f64 / 1999.0;
                    let f = full.eval(x).unwrap().0;
                    let sum = tr.eval(x).unwrap().0 + rf.eval(x).unwrap().0;
                    worst = worst.max((sum - f).norm());
                    peak = peak.max(f.norm());
                }
                assert!(worst <= 1e-12 * peak, "{worst} vs {peak}");
            }
        }
    }

    #[test]
    fn midpoint_laws() {
        let c = c();
        for bar in all_barriers() {
            let xc = bar.midpoint();
            for &e in &[0.02, 0.08, 0.25] {
                let k = c.wavenumber(e);
                let tr = stationary_subprocess(&bar, k, Kind::Transmission, &c).unwrap();
                let rf = stationary_subprocess(&bar, k, Kind::Reflection, &c).unwrap();
                let (psi_l, _) = rf.eval_side(xc, Side::Left).unwrap();
                assert!(psi_l.norm() < 1e-12 * rf.amplitudes().a_ref.norm().max(1e-300) + 1e-300);
                assert_eq!(rf.eval_side(xc + 1e-3, Side::Left).unwrap().0.norm(), 0.0);
                assert!(rf.current(xc, Side::Left, &c).unwrap().abs() < 1e-12 * c.velocity(k));
                let (l, dl) = tr.eval_side(xc, Side::Left).unwrap();
                let (r, dr) = tr.eval_side(xc, Side::Right).unwrap();
                assert!((l - r).norm() <= 1e-10 * r.norm());
                let (jl, jr) = (current(l, dl, &c), current(r, dr, &c));
                assert!((jl - jr).abs() <= 1e-10 * jr.abs());
                // the derivative jumps only in phase
                assert!((dl.norm() - dr.norm()).abs() <= 1e-10 * dr.norm().max(l.norm() * k));
                assert_relative_eq!(jr, c.velocity(k) * tr.coeffs().t, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn full_state_matching_and_flux() {
        let c = c();
        for bar in [fig1_barrier(), double_barrier(), well_and_steps()] {
            for &e in &[0.03, 0.12, 0.3] {
                let k = c.wavenumber(e);
                let full = full_stationary(&bar, k, &c).unwrap();
                for x in [bar.left(), bar.right()] {
                    let eps = 1e-9;
                    let (p0, d0) = full.eval(x - eps).unwrap();
                    let (p1, d1) = full.eval(x + eps).unwrap();
                    let scale = p0.norm().max(d0.norm() / k).max(1.0);
                    assert!((p0 - p1).norm() < 1e-7 * scale);
                    assert!((d0 - d1).norm() < 1e-7 * scale * k);
                }
                let t = full.coeffs().t;
                for x in [bar.left() - 17.3, bar.right() + 4.1] {
                    // left of the barrier the current is 1 − R of the incident flux
                    let j = full.current(x, Side::Left, &c).unwrap();
                    assert!((j - c.velocity(k) * t).abs() <= 1e-12 * c.velocity(k));
                }
            }
        }
    }

    #[test]
    fn interior_matches_ode_oracle() {
        let c = c();
        let bar = fig1_barrier();
        for &e in &[0.05, 0.25] {
            let k = c.wavenumber(e);
            let full = full_stationary(&bar, k, &c).unwrap();
            let s = full.coeffs();
            for &x in &[201.0, 205.5, 207.5, 212.25] {
                let w = rk4_basis(&bar, k, x, &c, s.kappa_norm);
                let want = s.a_full * w[0] + s.b_full * w[2];
                let got = full.eval(x).unwrap().0;
                assert!((got - want).norm() <= 1e-8 * want.norm());
            }
        }
    }

    #[test]
    fn reflection_in_region_carries_no_net_current() {
        let c = c();
        let bar = fig1_barrier();
        let k = c.wavenumber(0.05);
        let rf = stationary_subprocess(&bar, k, Kind::Reflection, &c).unwrap();
        for x in [150.0, 190.0, 199.9] {
            assert!(rf.current(x, Side::Left, &c).unwrap().abs() < 1e-12 * c.velocity(k));
        }
    }

    #[test]
    fn delta_regions() {
        let c = c();
        let bar = BarrierSpec::Delta { a: 30.0, w: 0.02 };
        let tr = stationary_subprocess(&bar, 0.3, Kind::Transmission, &c).unwrap();
        assert_eq!(tr.region(30.0, Side::Left), Region::LeftOfBarrier);
        assert_eq!(tr.region(30.0, Side::Right), Region::RightOfBarrier);
        let (l, _) = tr.eval_side(30.0, Side::Left).unwrap();
        let (r, _) = tr.eval_side(30.0, Side::Right).unwrap();
        assert!((l - r).norm() < 1e-14);
    }
}
