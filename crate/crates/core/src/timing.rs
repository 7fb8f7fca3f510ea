//! Characteristic times of a scattering event: exact and asymptotic group
//! times, dwell and Larmor times, conventional phase and dwell times, and
//! the width scans that contrast them.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::barrier::{scattering_coeffs, BarrierSpec, RectTerms, ScatteringCoeffs, REFLECTION_FLOOR};
use crate::error::{Error, Result};
use crate::numerics::{par_collect, try_phase_derivative, PhysicalConstants, SegmentedGrid};
use crate::subprocess::{in_amplitudes, Kind, Side, SubprocessField};
use crate::wavepacket::{
    asymptotic_norms, default_horizon, node_wavenumber, packet_grid, sample_times, Evolver, Spectrum,
    DEFAULT_TIME_STEPS,
};

/// Points where min(T, R) drops below this are left out of spectral phase
/// averages; the phase of the vanishing amplitude is meaningless there.
pub const PHASE_WEIGHT_FLOOR: f64 = 1e-10;

/// Relative step of the finite-difference phase derivatives.
pub const PHASE_STEP: f64 = 1e-4;

/// Time resolution of the centroid crossing search, ps.
pub const CROSSING_TOLERANCE: f64 = 1e-7;

/// A time or length that may fail to exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timed {
    Value(f64),
    /// The defining crossing never happens.
    NoRoot,
    /// The quantity needs a subprocess that is absent (R ≈ 0 or T ≈ 0).
    Undefined,
}

impl Timed {
    pub fn value(self) -> Option<f64> {
        match self {
            Timed::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_value(self) -> bool {
        matches!(self, Timed::Value(_))
    }

    /// "no_root" or "undefined" for the non-values.
    pub fn label(self) -> Option<&'static str> {
        match self {
            Timed::Value(_) => None,
            Timed::NoRoot => Some("no_root"),
            Timed::Undefined => Some("undefined"),
        }
    }

    fn map(self, f: impl FnOnce(f64) -> f64) -> Timed {
        match self {
            Timed::Value(v) => Timed::Value(f(v)),
            other => other,
        }
    }
}

impl From<Option<f64>> for Timed {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Timed::Undefined, Timed::Value)
    }
}

/// Every characteristic time of one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingReport {
    pub tau_tr_exact: Timed,
    pub tau_ref_exact: Timed,
    pub tau_tr_as: Timed,
    pub tau_ref_as: Timed,
    pub d_eff_tr: Timed,
    pub d_eff_ref: Timed,
    pub x_start_tr: Timed,
    pub x_start_ref: Timed,
    pub tau_tr_dwell: Timed,
    pub tau_ref_dwell: Timed,
    pub tau_tr_larmor: Timed,
    pub tau_ref_larmor: Timed,
    pub cmt_phase: Timed,
    pub cmt_dwell: Timed,
    pub tau_free: f64,
}

impl TimingReport {
    /// Entry names in field order.
    pub const NAMES: [&'static str; 15] = [
        "tau_tr_exact",
        "tau_ref_exact",
        "tau_tr_as",
        "tau_ref_as",
        "d_eff_tr",
        "d_eff_ref",
        "x_start_tr",
        "x_start_ref",
        "tau_tr_dwell",
        "tau_ref_dwell",
        "tau_tr_larmor",
        "tau_ref_larmor",
        "cmt_phase",
        "cmt_dwell",
        "tau_free",
    ];

    /// (name, value) pairs in field order.
    pub fn entries(&self) -> [(&'static str, Timed); 15] {
        let values = [
            self.tau_tr_exact,
            self.tau_ref_exact,
            self.tau_tr_as,
            self.tau_ref_as,
            self.d_eff_tr,
            self.d_eff_ref,
            self.x_start_tr,
            self.x_start_ref,
            self.tau_tr_dwell,
            self.tau_ref_dwell,
            self.tau_tr_larmor,
            self.tau_ref_larmor,
            self.cmt_phase,
            self.cmt_dwell,
            Timed::Value(self.tau_free),
        ];
        core::array::from_fn(|i| (Self::NAMES[i], values[i]))
    }
}

// ---------------------------------------------------------------------------
// Exact group times

/// Exact group times with the bracketing crossings that define them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactGroupTimes {
    pub transmission: Timed,
    pub reflection: Timed,
    /// (t₁, t₂) of the transmitted centroid at a and at b.
    pub transmission_crossings: Option<(f64, f64)>,
    /// (entry, exit) of the reflected centroid at a.
    pub reflection_crossings: Option<(f64, f64)>,
}

/// Exact group times on the default horizon and x-grid.
pub fn exact_group_times(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    constants: &PhysicalConstants,
) -> Result<ExactGroupTimes> {
    spectrum.require_completed_scattering()?;
    let horizon = default_horizon(spectrum, barrier, constants)?;
    let grid = packet_grid(spectrum, barrier, horizon, constants)?;
    let evolver = Evolver::new(spectrum, barrier, Arc::new(grid), constants)?;
    let times = sample_times(0.0, horizon, DEFAULT_TIME_STEPS)?;
    exact_group_times_with(&evolver, &times)
}

/// Exact group times from centroid crossings bracketed on `times` and
/// refined by bisection.
pub fn exact_group_times_with(evolver: &Evolver, times: &[f64]) -> Result<ExactGroupTimes> {
    let barrier = evolver.barrier();
    let (a, b) = (barrier.left(), barrier.right());
    let norms = evolver.norms(times[0])?;

    let (transmission, transmission_crossings) = if norms.transmission > REFLECTION_FLOOR {
        let traj = evolver.trajectory(Kind::Transmission, times)?;
        let xs = traj.centroid();
        let centroid = |t: f64| evolver.centroid(Kind::Transmission, t).map(|c| c.0);
        let entry = upward_crossing(xs, a, 0);
        let exit = entry.and_then(|i| upward_crossing(xs, b, i));
        match (entry, exit) {
            (Some(i), Some(j)) => {
                let t1 = refine(|t| Ok(centroid(t)? - a), times[i], times[i + 1])?;
                let t2 = if a == b { t1 } else { refine(|t| Ok(centroid(t)? - b), times[j], times[j + 1])? };
                (Timed::Value((t2 - t1).max(0.0)), Some((t1, t2)))
            }
            _ => (Timed::NoRoot, None),
        }
    } else {
        (Timed::Undefined, None)
    };

    let (reflection, reflection_crossings) = if norms.reflection > REFLECTION_FLOOR {
        let traj = evolver.trajectory(Kind::Reflection, times)?;
        let xs = traj.centroid();
        let centroid = |t: f64| evolver.centroid(Kind::Reflection, t).map(|c| c.0);
        let entry = upward_crossing(xs, a, 0);
        let exit = entry.and_then(|i| downward_crossing(xs, a, i + 1));
        match (entry, exit) {
            (Some(i), Some(j)) => {
                let t1 = refine(|t| Ok(centroid(t)? - a), times[i], times[i + 1])?;
                let t2 = refine(|t| Ok(centroid(t)? - a), times[j], times[j + 1])?;
                (Timed::Value((t2 - t1).max(0.0)), Some((t1, t2)))
            }
            _ => (Timed::NoRoot, None),
        }
    } else {
        (Timed::Undefined, None)
    };

    Ok(ExactGroupTimes { transmission, reflection, transmission_crossings, reflection_crossings })
}

/// First i ≥ from with xs[i] < level ≤ xs[i+1].
fn upward_crossing(xs: &[f64], level: f64, from: usize) -> Option<usize> {
    (from..xs.len().saturating_sub(1)).find(|&i| xs[i] < level && xs[i + 1] >= level)
}

/// First i ≥ from with xs[i] ≥ level > xs[i+1].
fn downward_crossing(xs: &[f64], level: f64, from: usize) -> Option<usize> {
    (from..xs.len().saturating_sub(1)).find(|&i| xs[i] >= level && xs[i + 1] < level)
}

/// Bisection for a sign change of a fallible f on [lo, hi].
fn refine<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut f_lo = f(lo)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    while hi - lo > CROSSING_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if (f_mid < 0.0) == (f_lo < 0.0) && f_mid != 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Phase derivatives and asymptotic group times

/// J′(k) = d arg a_out/dk and λ′(k) = d arg A_ref/dk, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDerivatives {
    pub k: f64,
    pub transmission: f64,
    /// `None` when R is below the reflection floor.
    pub reflection: Option<f64>,
    pub t: f64,
    pub r: f64,
}

impl PhaseDerivatives {
    /// J′ − λ′.
    pub fn effective_width(&self) -> Option<f64> {
        self.reflection.map(|l| self.transmission - l)
    }

    /// −λ′.
    pub fn start_point(&self) -> Option<f64> {
        self.reflection.map(|l| -l)
    }
}

/// Phase derivatives: closed forms for the rectangular barrier, Richardson
/// central differences with step 1e-4·k otherwise.
pub fn phase_derivatives(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<PhaseDerivatives> {
    let coeffs = scattering_coeffs(barrier, k, constants)?;
    let has_reflection = coeffs.r > REFLECTION_FLOOR;
    if let BarrierSpec::Rectangular { .. } = barrier {
        let terms = RectTerms::from_barrier(barrier, k, constants)?;
        let j = terms.phase_time(constants) * constants.velocity(k);
        let lambda = -terms.start_point();
        return Ok(PhaseDerivatives {
            k,
            transmission: j,
            reflection: has_reflection.then_some(lambda),
            t: coeffs.t,
            r: coeffs.r,
        });
    }
    numerical_phase_derivatives(barrier, &coeffs, constants)
}

/// Phase derivatives by finite differences for any barrier.
pub fn numerical_phase_derivatives(
    barrier: &BarrierSpec,
    coeffs: &ScatteringCoeffs,
    constants: &PhysicalConstants,
) -> Result<PhaseDerivatives> {
    let k = coeffs.k;
    let h = PHASE_STEP * k;
    let j = try_phase_derivative(|q| Ok(scattering_coeffs(barrier, q, constants)?.a_out), k, h)?;
    let lambda = if coeffs.r > REFLECTION_FLOOR {
        Some(try_phase_derivative(
            |q| Ok(in_amplitudes(&scattering_coeffs(barrier, q, constants)?).a_ref),
            k,
            h,
        )?)
    } else {
        None
    };
    Ok(PhaseDerivatives { k, transmission: j, reflection: lambda, t: coeffs.t, r: coeffs.r })
}

/// Spectrally averaged effective widths, starting points and asymptotic
/// group times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticGroupTimes {
    pub tau_tr: Timed,
    pub tau_ref: Timed,
    pub d_eff_tr: Timed,
    pub d_eff_ref: Timed,
    pub x_start_tr: Timed,
    pub x_start_ref: Timed,
    /// Weighted mean wavenumbers of the outgoing packets.
    pub k_tr: Timed,
    pub k_ref: Timed,
    /// Share of the spectral mass ∫|A|²dk left out of the averages: k ≤ 0
    /// nodes and nodes with min(T, R) below the phase floor.
    pub excluded_mass: f64,
}

/// Averages of J′ and λ′ weighted by |A|²T (transmission) and |A|²R
/// (reflection); τ = m·d_eff/(ħ⟨k⟩) with ⟨k⟩ under the same weight.
pub fn asymptotic_group_times(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    constants: &PhysicalConstants,
) -> Result<AsymptoticGroupTimes> {
    let kg = spectrum.kgrid();
    let amps = spectrum.amplitudes();
    let rows = par_collect(kg.count(), |j| {
        let k = kg.point(j);
        let mass = amps[j].norm_sqr() * kg.weight(j);
        if !(k > 0.0) || mass == 0.0 {
            return Ok((mass, None));
        }
        let pd = phase_derivatives(barrier, k, constants)?;
        if pd.t.min(pd.r) < PHASE_WEIGHT_FLOOR {
            return Ok((mass, None));
        }
        Ok((mass, Some(pd)))
    })?;

    let total: f64 = rows.iter().map(|r| r.0).sum();
    let mut excluded = 0.0;
    // (Σw, Σw·k, Σw·J′, Σw·λ′) for each kind.
    let mut tr = [0.0; 4];
    let mut rf = [0.0; 4];
    for (mass, pd) in &rows {
        let Some(pd) = pd else {
            excluded += mass;
            continue;
        };
        let lambda = pd.reflection.expect("R above the floor has a phase");
        for (acc, w) in [(&mut tr, mass * pd.t), (&mut rf, mass * pd.r)] {
            acc[0] += w;
            acc[1] += w * pd.k;
            acc[2] += w * pd.transmission;
            acc[3] += w * lambda;
        }
    }

    let finish = |acc: [f64; 4]| -> (Timed, Timed, Timed, Timed) {
        if !(acc[0] > 0.0) {
            return (Timed::Undefined, Timed::Undefined, Timed::Undefined, Timed::Undefined);
        }
        let k = acc[1] / acc[0];
        let j = acc[2] / acc[0];
        let lambda = acc[3] / acc[0];
        let d_eff = j - lambda;
        (
            Timed::Value(d_eff / constants.velocity(k)),
            Timed::Value(d_eff),
            Timed::Value(-lambda),
            Timed::Value(k),
        )
    };
    let (tau_tr, d_eff_tr, x_start_tr, k_tr) = finish(tr);
    let (tau_ref, d_eff_ref, x_start_ref, k_ref) = finish(rf);
    Ok(AsymptoticGroupTimes {
        tau_tr,
        tau_ref,
        d_eff_tr,
        d_eff_ref,
        x_start_tr,
        x_start_ref,
        k_tr,
        k_ref,
        excluded_mass: if total > 0.0 { excluded / total } else { 0.0 },
    })
}

/// Closed-form monochromatic quantities of a rectangular barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectClosedForms {
    pub d_eff: f64,
    pub x_start: f64,
    pub tau_as: f64,
}

/// d_eff(k), x_start(k) and τ_as = m·d_eff/(ħk) for a rectangular barrier,
/// on either side of the barrier top.
pub fn rect_closed_forms(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<RectClosedForms> {
    let terms = RectTerms::from_barrier(barrier, k, constants)?;
    let d_eff = terms.effective_width();
    Ok(RectClosedForms { d_eff, x_start: terms.start_point(), tau_as: d_eff / constants.velocity(k) })
}

// ---------------------------------------------------------------------------
// Dwell times

/// Densities integrated over parts of the barrier region for one k.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DwellIntegrals {
    /// ∫|Ψ_tr|² over [a, x_c].
    tr_left: f64,
    /// ∫|Ψ_full|² over [x_c, b].
    full_right: f64,
    /// ∫|Ψ_ref|² over [a, x_c].
    ref_left: f64,
    t: f64,
    r: f64,
    velocity: f64,
}

impl DwellIntegrals {
    fn transmission(&self) -> Timed {
        if self.t > 0.0 {
            Timed::Value((self.tr_left + self.full_right) / (self.t * self.velocity))
        } else {
            Timed::Undefined
        }
    }

    fn reflection(&self) -> Timed {
        if self.r > REFLECTION_FLOOR {
            Timed::Value(self.ref_left / (self.r * self.velocity))
        } else {
            Timed::Undefined
        }
    }
}

/// Quadrature nodes per unit of the fastest local exponent or wavenumber.
const DWELL_RESOLUTION: f64 = 0.01;

/// A grid over [lo, hi] broken at the interfaces and the midpoint, with a
/// spacing per piece fine for the local wavenumber there.
fn dwell_grid(barrier: &BarrierSpec, k: f64, lo: f64, hi: f64, constants: &PhysicalConstants) -> Result<SegmentedGrid> {
    let mut breaks: Vec<f64> = barrier.interfaces();
    breaks.push(barrier.midpoint());
    breaks.retain(|&x| x > lo && x < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let energy = constants.energy(k);
    let spacings: Vec<f64> = breaks
        .windows(2)
        .map(|w| {
            let v = barrier.potential(0.5 * (w[0] + w[1]));
            let local = ((v - energy).abs() / constants.kinetic_factor()).sqrt();
            DWELL_RESOLUTION / local.max(k)
        })
        .collect();
    SegmentedGrid::new(&breaks, &spacings)
}

/// ∫|ψ|² of one stationary field over [lo, hi], taking one-sided values on
/// the given side of the midpoint.
fn density_integral(
    field: &SubprocessField,
    barrier: &BarrierSpec,
    lo: f64,
    hi: f64,
    side: Side,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(hi > lo) {
        return Ok(0.0);
    }
    let grid = dwell_grid(barrier, field.k(), lo, hi, constants)?;
    let vals = grid
        .nodes()
        .iter()
        .map(|&x| Ok(field.eval_side(x, side)?.0.norm_sqr()))
        .collect::<Result<Vec<f64>>>()?;
    grid.integrate(&vals)
}

fn dwell_integrals(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<DwellIntegrals> {
    let (a, xc, b) = (barrier.left(), barrier.midpoint(), barrier.right());
    let tr = SubprocessField::new(barrier, k, Kind::Transmission, constants)?;
    let full = SubprocessField::new(barrier, k, Kind::Full, constants)?;
    let rf = SubprocessField::new(barrier, k, Kind::Reflection, constants)?;
    let coeffs = full.coeffs();
    Ok(DwellIntegrals {
        tr_left: density_integral(&tr, barrier, a, xc, Side::Left, constants)?,
        full_right: density_integral(&full, barrier, xc, b, Side::Right, constants)?,
        ref_left: density_integral(&rf, barrier, a, xc, Side::Left, constants)?,
        t: coeffs.t,
        r: coeffs.r,
        velocity: constants.velocity(k),
    })
}

fn require_positive_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("wavenumber must be positive, got {k}")))
    }
}

/// (τ_tr^dwell, τ_ref^dwell) by quadrature of the subprocess densities over
/// the barrier region, with fluxes T·ħk/m and R·ħk/m.
pub fn dwell_times(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<(Timed, Timed)> {
    require_positive_k(k)?;
    barrier.validate()?;
    let d = dwell_integrals(barrier, k, constants)?;
    Ok((d.transmission(), d.reflection()))
}

/// Closed-form rectangular dwell times (τ_tr^dwell, τ_ref^dwell).
pub fn rect_dwell_times(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<(f64, f64)> {
    let terms = RectTerms::from_barrier(barrier, k, constants)?;
    Ok((terms.transmission_dwell(constants), terms.reflection_dwell(constants)))
}

/// Dwell times of the double barrier split into first barrier, gap and
/// second barrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellPartition {
    pub tr_first: f64,
    pub tr_gap: f64,
    pub tr_second: f64,
    pub ref_first: Timed,
    pub ref_gap: Timed,
}

impl DwellPartition {
    pub fn transmission_total(&self) -> f64 {
        self.tr_first + self.tr_gap + self.tr_second
    }
}

/// Dwell quadratures restricted to each part of a double barrier; the
/// reflection integrals stop at the midpoint.
pub fn double_barrier_partition(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<DwellPartition> {
    let BarrierSpec::DoubleRect { a, d, l, v0 } = *barrier else {
        return Err(Error::Domain("the partition needs a double barrier".into()));
    };
    require_positive_k(k)?;
    barrier.validate()?;
    if !(constants.energy(k) < v0) {
        return Err(Error::Domain("the partition is defined below the barrier top".into()));
    }
    let (x1, xc, x2, b) = (a + d, barrier.midpoint(), a + d + l, barrier.right());
    let tr = SubprocessField::new(barrier, k, Kind::Transmission, constants)?;
    let full = SubprocessField::new(barrier, k, Kind::Full, constants)?;
    let rf = SubprocessField::new(barrier, k, Kind::Reflection, constants)?;
    let coeffs = full.coeffs();
    let v = constants.velocity(k);
    let i_tr = coeffs.t * v;
    if !(coeffs.t > REFLECTION_FLOOR) {
        return Err(Error::SingularCoefficient);
    }
    let int = |f: &SubprocessField, lo: f64, hi: f64, side: Side| density_integral(f, barrier, lo, hi, side, constants);
    let tr_first = int(&tr, a, x1, Side::Left)? / i_tr;
    let tr_gap = (int(&tr, x1, xc, Side::Left)? + int(&full, xc, x2, Side::Right)?) / i_tr;
    let tr_second = int(&full, x2, b, Side::Right)? / i_tr;
    let (ref_first, ref_gap) = if coeffs.r > REFLECTION_FLOOR {
        let i_ref = coeffs.r * v;
        (Timed::Value(int(&rf, a, x1, Side::Left)? / i_ref), Timed::Value(int(&rf, x1, xc, Side::Left)? / i_ref))
    } else {
        (Timed::Undefined, Timed::Undefined)
    };
    Ok(DwellPartition { tr_first, tr_gap, tr_second, ref_first, ref_gap })
}

/// Opaque-limit estimates (τ_tr^(1), τ_tr^gap) of a double barrier, with
/// κ0 = √(2mV0)/ħ the barrier wavenumber:
/// (m/4ħkκ0)e^{2κ0d} and (mκ0²/8ħk⁴)(kl − sin kl)e^{2κ0d}.
pub fn opaque_limit_estimates(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<(f64, f64)> {
    let BarrierSpec::DoubleRect { d, l, v0, .. } = *barrier else {
        return Err(Error::Domain("opaque-limit formulas need a double barrier".into()));
    };
    require_positive_k(k)?;
    let kappa0 = (v0 / constants.kinetic_factor()).sqrt();
    let m_over_hbar = 1.0 / constants.hbar_over_mass();
    let growth = (2.0 * kappa0 * d).exp();
    let first = m_over_hbar / (4.0 * k * kappa0) * growth;
    let gap = m_over_hbar * kappa0 * kappa0 / (8.0 * k.powi(4)) * (k * l - (k * l).sin()) * growth;
    Ok((first, gap))
}

// ---------------------------------------------------------------------------
// Larmor times

/// Larmor times: dwell times averaged over k > 0 with the weight
/// ϖ(k) = |A(k)|² − |A(−k)|², normalized by the asymptotic norms.
pub fn larmor_times(spectrum: &Spectrum, barrier: &BarrierSpec, constants: &PhysicalConstants) -> Result<(Timed, Timed)> {
    barrier.validate()?;
    let kg = spectrum.kgrid();
    let dk = kg.spacing();
    let rows = par_collect(kg.count(), |j| {
        let k = kg.point(j);
        let w = spectrum.counter_weight(k) * kg.weight(j);
        if !(k > 0.0) || w == 0.0 {
            return Ok((0.0, 0.0));
        }
        let d = dwell_integrals(barrier, node_wavenumber(k, dk), constants)?;
        // T·τ_tr^dwell and R·τ_ref^dwell stay finite where T or R vanish.
        Ok((w * (d.tr_left + d.full_right) / d.velocity, w * d.ref_left / d.velocity))
    })?;
    let (tr_sum, ref_sum) = rows.iter().fold((0.0, 0.0), |acc, r| (acc.0 + r.0, acc.1 + r.1));
    let (t_norm, r_norm) = asymptotic_norms(spectrum, barrier, constants)?;
    let tr = if t_norm > REFLECTION_FLOOR { Timed::Value(tr_sum / t_norm) } else { Timed::Undefined };
    let rf = if r_norm > REFLECTION_FLOOR { Timed::Value(ref_sum / r_norm) } else { Timed::Undefined };
    Ok((tr, rf))
}

// ---------------------------------------------------------------------------
// Conventional comparators and the δ-potential

/// Conventional phase time m·J′/(ħk) and dwell time
/// (m/ħk)∫ₐᵇ|Ψ_full|² of any barrier. Closed forms for the rectangle.
pub fn cmt_times(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<(f64, f64)> {
    require_positive_k(k)?;
    barrier.validate()?;
    let v = constants.velocity(k);
    if let BarrierSpec::Rectangular { .. } = barrier {
        let terms = RectTerms::from_barrier(barrier, k, constants)?;
        return Ok((terms.phase_time(constants), terms.full_dwell(constants)));
    }
    let pd = phase_derivatives(barrier, k, constants)?;
    let full = SubprocessField::new(barrier, k, Kind::Full, constants)?;
    let (a, xc, b) = (barrier.left(), barrier.midpoint(), barrier.right());
    let dwell = density_integral(&full, barrier, a, xc, Side::Left, constants)?
        + density_integral(&full, barrier, xc, b, Side::Right, constants)?;
    Ok((pd.transmission / v, dwell / v))
}

/// Effective widths and starting points of the δ-potential in the
/// subprocess picture and in the conventional one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaTimes {
    pub d_eff: f64,
    pub x_start: f64,
    pub cmt_d_eff: f64,
    pub cmt_x_start: f64,
}

/// With s = 2mħ²W/(ħ⁴k² + m²W²): d_eff = 0 and x_start = −s here, while
/// the conventional picture has x_start = 0 and d_eff = s.
pub fn delta_times(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<DeltaTimes> {
    let BarrierSpec::Delta { w, .. } = *barrier else {
        return Err(Error::Domain("delta times need a delta barrier".into()));
    };
    require_positive_k(k)?;
    let hbar = constants.hbar();
    let m = constants.mass();
    let h2 = hbar * hbar;
    let shift = 2.0 * m * h2 * w / (h2 * h2 * k * k + m * m * w * w);
    Ok(DeltaTimes { d_eff: 0.0, x_start: -shift, cmt_d_eff: shift, cmt_x_start: 0.0 })
}

// ---------------------------------------------------------------------------
// Scans

/// Which dimension a scan varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    /// Barrier width d (each barrier of a double barrier).
    Width,
    /// Gap l of a double barrier.
    Gap,
}

/// One row of a width or gap scan at fixed k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub param: f64,
    pub tau_ph: f64,
    pub cmt_dwell: f64,
    pub tau_tr_dwell: Timed,
    pub tau_ref_dwell: Timed,
    pub tau_as: Timed,
    pub d_eff: Timed,
    /// Gap share of the transmission dwell time, double barriers only.
    pub tau_gap: Option<f64>,
}

/// The template barrier with one dimension replaced.
pub fn scanned_barrier(template: &BarrierSpec, axis: ScanAxis, value: f64) -> Result<BarrierSpec> {
    match (template, axis) {
        (BarrierSpec::Rectangular { a, v0, .. }, ScanAxis::Width) => {
            Ok(BarrierSpec::Rectangular { a: *a, b: a + value, v0: *v0 })
        }
        (BarrierSpec::DoubleRect { a, l, v0, .. }, ScanAxis::Width) => {
            Ok(BarrierSpec::DoubleRect { a: *a, d: value, l: *l, v0: *v0 })
        }
        (BarrierSpec::DoubleRect { a, d, v0, .. }, ScanAxis::Gap) => {
            Ok(BarrierSpec::DoubleRect { a: *a, d: *d, l: value, v0: *v0 })
        }
        _ => Err(Error::Config(format!("cannot scan {axis:?} of this barrier"))),
    }
}

/// Characteristic times at fixed k over a strictly increasing list of
/// widths or gaps. Rows are computed in parallel.
pub fn hartman_scan(
    template: &BarrierSpec,
    axis: ScanAxis,
    values: &[f64],
    k: f64,
    constants: &PhysicalConstants,
) -> Result<Vec<ScanRow>> {
    require_positive_k(k)?;
    if values.is_empty() || values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("scan values must be non-empty and strictly increasing".into()));
    }
    par_collect(values.len(), |i| {
        let barrier = scanned_barrier(template, axis, values[i])?;
        barrier.validate()?;
        let (tau_ph, cmt_dwell) = cmt_times(&barrier, k, constants)?;
        let (tau_tr_dwell, tau_ref_dwell) = dwell_times(&barrier, k, constants)?;
        let d_eff = Timed::from(phase_derivatives(&barrier, k, constants)?.effective_width());
        let tau_as = d_eff.map(|d| d / constants.velocity(k));
        let tau_gap = match barrier {
            BarrierSpec::DoubleRect { v0, .. } if constants.energy(k) < v0 => {
                Some(double_barrier_partition(&barrier, k, constants)?.tr_gap)
            }
            _ => None,
        };
        Ok(ScanRow { param: values[i], tau_ph, cmt_dwell, tau_tr_dwell, tau_ref_dwell, tau_as, d_eff, tau_gap })
    })
}

// ---------------------------------------------------------------------------
// Report

/// All characteristic times of one packet scenario. Monochromatic entries
/// (dwell and conventional times) are taken at k0.
pub fn timing_report(spectrum: &Spectrum, barrier: &BarrierSpec, constants: &PhysicalConstants) -> Result<TimingReport> {
    barrier.validate()?;
    let k0 = spectrum.k0();
    require_positive_k(k0)?;
    let exact = exact_group_times(spectrum, barrier, constants)?;
    let asym = asymptotic_group_times(spectrum, barrier, constants)?;
    let (tau_tr_dwell, tau_ref_dwell) = dwell_times(barrier, k0, constants)?;
    let (tau_tr_larmor, tau_ref_larmor) = larmor_times(spectrum, barrier, constants)?;
    let (cmt_phase, cmt_dwell) = cmt_times(barrier, k0, constants)?;
    Ok(TimingReport {
        tau_tr_exact: exact.transmission,
        tau_ref_exact: exact.reflection,
        tau_tr_as: asym.tau_tr,
        tau_ref_as: asym.tau_ref,
        d_eff_tr: asym.d_eff_tr,
        d_eff_ref: asym.d_eff_ref,
        x_start_tr: asym.x_start_tr,
        x_start_ref: asym.x_start_ref,
        tau_tr_dwell,
        tau_ref_dwell,
        tau_tr_larmor,
        tau_ref_larmor,
        cmt_phase: Timed::Value(cmt_phase),
        cmt_dwell: Timed::Value(cmt_dwell),
        tau_free: constants.free_time(barrier.width(), k0),
    })
}
