use proptest::prelude::*;
use crate::barrier::{eval_basis, scattering_coeffs, BarrierSpec};
use crate::doubleslit::{mirror_diagnostic, SlitConfig};
use crate::numerics::{PhysicalConstants, UniformGrid};
use crate::subprocess::{current, in_amplitudes, stationary_subprocess, Kind, Side};
use crate::timing::{dwell_times, numerical_phase_derivatives, rect_closed_forms, rect_dwell_times};

fn constants() -> PhysicalConstants {
    PhysicalConstants::default()
}

fn barrier() -> impl Strategy<Value = BarrierSpec> {
    let a = 10.0..100.0f64;
    prop_oneof![
        (a.clone(), 0.5..30.0f64, -0.2..0.5f64).prop_map(|(a, d, v0)| BarrierSpec::Rectangular { a, b: a + d, v0 }),
        (a.clone(), 0.5..10.0f64, 0.5..15.0f64, 0.01..0.4f64)
            .prop_map(|(a, d, l, v0)| BarrierSpec::DoubleRect { a, d, l, v0 }),
        (a.clone(), -1.0..1.0f64).prop_map(|(a, w)| BarrierSpec::Delta { a, w }),
        (a, prop::collection::vec((0.3..6.0f64, -0.2..0.4f64), 1..4), any::<bool>()).prop_map(|(a, half, odd)| {
            let mut segments = half.clone();
            if odd {
                segments.push((2.0, 0.1));
            }
            segments.extend(half.iter().rev());
            BarrierSpec::SymmetricPiecewise { a, segments }
        }),
    ]
}

fn wavenumber() -> impl Strategy<Value = f64> {
    (0.001..0.6f64).prop_map(|e| constants().wavenumber(e))
}

fn sample_points(bar: &BarrierSpec) -> Vec<f64> {
    let (lo, hi) = (bar.left() - 20.0, bar.right() + 20.0);
    (0..=60).map(|i| lo + (hi - lo) * i as f64 / 60.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn probabilities_sum_to_one(bar in barrier(), k in wavenumber()) {
        let s = scattering_coeffs(&bar, k, &constants()).unwrap();
        prop_assert!((s.t + s.r - 1.0).abs() < 1e-10, "T + R = {}", s.t + s.r);
    }

    #[test]
    fn subprocesses_add_up_to_the_full_state(bar in barrier(), k in wavenumber()) {
        let c = constants();
        let full = stationary_subprocess(&bar, k, Kind::Full, &c).unwrap();
        let tr = stationary_subprocess(&bar, k, Kind::Transmission, &c).unwrap();
        let rf = stationary_subprocess(&bar, k, Kind::Reflection, &c).unwrap();
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for x in sample_points(&bar) {
            for side in [Side::Left, Side::Right] {
                let f = full.eval_side(x, side).unwrap().0;
                let sum = tr.eval_side(x, side).unwrap().0 + rf.eval_side(x, side).unwrap().0;
                scale = scale.max(f.norm());
                worst = worst.max((sum - f).norm());
            }
        }
        prop_assert!(worst < 1e-10 * scale, "{worst} vs {scale}");
    }

    #[test]
    fn causal_amplitudes_partition_unity(bar in barrier(), k in wavenumber()) {
        let s = scattering_coeffs(&bar, k, &constants()).unwrap();
        let amps = in_amplitudes(&s);
        prop_assert!((amps.a_tr + amps.a_ref - 1.0).norm() < 1e-12);
        prop_assert!((amps.a_tr.norm_sqr() + amps.a_ref.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midpoint_laws(bar in barrier(), k in wavenumber()) {
        let c = constants();
        let xc = bar.midpoint();
        let tr = stationary_subprocess(&bar, k, Kind::Transmission, &c).unwrap();
        let rf = stationary_subprocess(&bar, k, Kind::Reflection, &c).unwrap();
        let scale = rf.amplitudes().a_ref.norm();
        prop_assert!(rf.eval_side(xc, Side::Left).unwrap().0.norm() <= 1e-10 * scale + 1e-300);
        let (l, dl) = tr.eval_side(xc, Side::Left).unwrap();
        let (r, dr) = tr.eval_side(xc, Side::Right).unwrap();
        let (jl, jr) = (current(l, dl, &c), current(r, dr, &c));
        // Im(ψ*ψ') carries a current of order T·v out of factors of order
        // |ψ||ψ'|, which bounds the attainable relative accuracy.
        let conditioning = 1e-14 * c.hbar_over_mass() * r.norm() * dr.norm();
        prop_assert!((jl - jr).abs() <= 1e-10 * jr.abs() + conditioning, "{jl} vs {jr}");
    }

    #[test]
    fn full_current_is_uniform(bar in barrier(), k in wavenumber()) {
        let c = constants();
        let full = stationary_subprocess(&bar, k, Kind::Full, &c).unwrap();
        let flux = c.velocity(k) * full.coeffs().t;
        for x in sample_points(&bar) {
            let j = full.current(x, Side::Right, &c).unwrap();
            prop_assert!((j - flux).abs() <= 1e-9 * c.velocity(k), "x = {x}: {j} vs {flux}");
        }
    }

    #[test]
    fn basis_wronskian_and_parity(bar in barrier(), k in wavenumber(), frac in 0.0..1.0f64) {
        prop_assume!(!bar.is_delta());
        let c = constants();
        let xc = bar.midpoint();
        let delta = frac * 0.5 * bar.width();
        let right = eval_basis(&bar, k, xc + delta, &c).unwrap();
        let left = eval_basis(&bar, k, xc - delta, &c).unwrap();
        let at_mid = eval_basis(&bar, k, xc, &c).unwrap();
        let w0 = at_mid.wronskian();
        let size = (right.u.abs() + right.v.abs()) * (right.du.abs() + right.dv.abs());
        prop_assert!((right.wronskian() - w0).abs() <= 1e-10 * size.max(w0.abs()));
        let tol = 1e-12 * (right.u.abs() + right.v.abs() + right.du.abs() + right.dv.abs());
        prop_assert!((left.u + right.u).abs() <= tol);
        prop_assert!((left.v - right.v).abs() <= tol);
        prop_assert!((left.du - right.du).abs() <= tol);
        prop_assert!((left.dv + right.dv).abs() <= tol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rectangular_dwell_closed_forms(v0 in 0.05..0.5f64, d in 1.0..25.0f64, frac in 0.05..0.95f64) {
        let c = constants();
        let bar = BarrierSpec::Rectangular { a: 50.0, b: 50.0 + d, v0 };
        let k = c.wavenumber(frac * v0);
        let (tr, rf) = dwell_times(&bar, k, &c).unwrap();
        let (tr_cf, rf_cf) = rect_dwell_times(&bar, k, &c).unwrap();
        prop_assert!((tr.value().unwrap() / tr_cf - 1.0).abs() < 1e-6);
        prop_assert!((rf.value().unwrap() / rf_cf - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rectangular_phase_closed_forms(v0 in 0.05..0.5f64, d in 1.0..25.0f64, frac in 0.05..2.0f64) {
        let c = constants();
        let bar = BarrierSpec::Rectangular { a: 50.0, b: 50.0 + d, v0 };
        let k = c.wavenumber(frac * v0);
        let s = scattering_coeffs(&bar, k, &c).unwrap();
        prop_assume!(s.t.min(s.r) > 1e-10);
        let cf = rect_closed_forms(&bar, k, &c).unwrap();
        let fd = numerical_phase_derivatives(&bar, &s, &c).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-3 * d);
        prop_assert!(rel(cf.d_eff, fd.effective_width().unwrap()) < 1e-4);
        prop_assert!(rel(cf.x_start, fd.start_point().unwrap()) < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn two_slit_symmetry(a in 2.0..8.0f64, d in 0.5..3.0f64, k in 0.5..2.0f64, x in 1.0..50.0f64) {
        prop_assume!(a > 0.5 * d);
        let cfg = SlitConfig {
            half_separation: a,
            slit_width: d,
            k,
            detector_distance: x,
            ygrid: UniformGrid::symmetric(15.0, 30).unwrap(),
            xplanes: alloc::vec![x],
        };
        let r = mirror_diagnostic(&cfg, &[x]).unwrap();
        prop_assert!(r.evenness < 1e-12 && r.transverse_current < 1e-12);
    }
}
