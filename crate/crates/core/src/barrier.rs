//! Symmetric piecewise-constant barriers, the real odd/even basis about the
//! midpoint, and the stationary scattering amplitudes.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{coshc, sinhc, PhysicalConstants};

/// A potential symmetric about the midpoint of its support [a, b].
#[derive(Debug, Clone, PartialEq)]
pub enum BarrierSpec {
    Rectangular { a: f64, b: f64, v0: f64 },
    /// Two barriers of width `d` separated by a gap `l`, occupying [a, a+2d+l].
    DoubleRect { a: f64, d: f64, l: f64, v0: f64 },
    /// Zero-width barrier of strength `w` (eV·nm) at x = a.
    Delta { a: f64, w: f64 },
    /// Consecutive (width, potential) segments starting at `a`.
    SymmetricPiecewise { a: f64, segments: Vec<(f64, f64)> },
}

impl BarrierSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        let a = self.left();
        if !(a > 0.0 && a.is_finite()) {
            return bad(format!("barrier start a must be positive, got {a}"));
        }
        match self {
            BarrierSpec::Rectangular { a, b, v0 } => {
                if !(b > a && b.is_finite() && v0.is_finite()) {
                    return bad(format!("rectangular barrier needs a < b and finite V0, got [{a}, {b}], V0={v0}"));
                }
            }
            BarrierSpec::DoubleRect { d, l, v0, .. } => {
                if !(*d > 0.0 && *l > 0.0 && d.is_finite() && l.is_finite() && v0.is_finite()) {
                    return bad(format!("double barrier needs positive d and l, got d={d}, l={l}"));
                }
            }
            BarrierSpec::Delta { w, .. } => {
                if !w.is_finite() {
                    return bad(format!("delta strength must be finite, got {w}"));
                }
            }
            BarrierSpec::SymmetricPiecewise { segments, .. } => {
                if segments.is_empty() {
                    return bad("piecewise barrier needs at least one segment".into());
                }
                if segments.iter().any(|&(w, v)| !(w > 0.0 && w.is_finite() && v.is_finite())) {
                    return bad("segment widths must be positive and potentials finite".into());
                }
                let n = segments.len();
                for i in 0..n / 2 {
                    let (w1, v1) = segments[i];
                    let (w2, v2) = segments[n - 1 - i];
                    let scale = w1.abs().max(w2.abs());
                    let vscale = v1.abs().max(v2.abs()).max(1e-300);
                    if (w1 - w2).abs() > 1e-12 * scale || (v1 - v2).abs() > 1e-12 * vscale {
                        return bad(format!(
                            "segments {i} and {} differ, the profile must be a palindrome",
                            n - 1 - i
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Left edge a.
    pub fn left(&self) -> f64 {
        match *self {
            BarrierSpec::Rectangular { a, .. }
            | BarrierSpec::DoubleRect { a, .. }
            | BarrierSpec::Delta { a, .. }
            | BarrierSpec::SymmetricPiecewise { a, .. } => a,
        }
    }

    /// Right edge b.
    pub fn right(&self) -> f64 {
        self.left() + self.width()
    }

    /// Width d = b − a.
    pub fn width(&self) -> f64 {
        match self {
            BarrierSpec::Rectangular { a, b, .. } => b - a,
            BarrierSpec::DoubleRect { d, l, .. } => 2.0 * d + l,
            BarrierSpec::Delta { .. } => 0.0,
            BarrierSpec::SymmetricPiecewise { segments, .. } => segments.iter().map(|s| s.0).sum(),
        }
    }

    /// Midpoint x_c.
    pub fn midpoint(&self) -> f64 {
        self.left() + 0.5 * self.width()
    }

    pub fn is_delta(&self) -> bool {
        matches!(self, BarrierSpec::Delta { .. })
    }

    /// (width, potential) segments from a to b. Empty for the delta.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        match self {
            BarrierSpec::Rectangular { a, b, v0 } => alloc::vec![(b - a, *v0)],
            BarrierSpec::DoubleRect { d, l, v0, .. } => alloc::vec![(*d, *v0), (*l, 0.0), (*d, *v0)],
            BarrierSpec::Delta { .. } => Vec::new(),
            BarrierSpec::SymmetricPiecewise { segments, .. } => segments.clone(),
        }
    }

    /// Positions where the potential jumps, a and b included.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut x = self.left();
        let mut out = alloc::vec![x];
        for (w, _) in self.segments() {
            x += w;
            out.push(x);
        }
        if self.is_delta() {
            out.push(x);
        }
        // Pin the last edge to b exactly.
        let n = out.len();
        out[n - 1] = self.right();
        out
    }

    /// Potential at x, taking the value of the segment to the right at an
    /// interface. Zero outside [a, b] and for the delta.
    pub fn potential(&self, x: f64) -> f64 {
        let mut edge = self.left();
        if x < edge {
            return 0.0;
        }
        for (w, v) in self.segments() {
            edge += w;
            if x < edge {
                return v;
            }
        }
        0.0
    }

    /// Largest potential on the barrier, used for the reference wavenumber κ0.
    pub fn peak_potential(&self) -> f64 {
        self.segments().iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// Potential jumps V(x+0) − V(x−0) at each interface.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let xs = self.interfaces();
        let segs = self.segments();
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let next = segs.get(i).map_or(0.0, |s| s.1);
            if next != prev {
                out.push((x, next - prev));
            }
            prev = next;
        }
        out
    }

    /// Segments right of the midpoint as (offset from x_c, width, potential).
    fn right_half(&self) -> Vec<(f64, f64, f64)> {
        let xc = self.midpoint();
        let mut out = Vec::new();
        let mut edge = self.left();
        for (w, v) in self.segments() {
            let lo = edge;
            edge += w;
            if edge > xc {
                let start = lo.max(xc) - xc;
                let end = if edge >= self.right() { 0.5 * self.width() } else { edge - xc };
                if end > start {
                    out.push((start, end - start, v));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Evanescent,
    Oscillatory,
}

/// Regime and local wavenumber in a region of constant potential `v`.
pub fn local_wavenumber(v: f64, e: f64, constants: &PhysicalConstants) -> Result<(Regime, f64)> {
    if !(e > 0.0) {
        return Err(Error::Domain(format!("energy must be positive, got {e}")));
    }
    let kappa = ((v - e).abs() / constants.kinetic_factor()).sqrt();
    Ok(if e < v { (Regime::Evanescent, kappa) } else { (Regime::Oscillatory, kappa) })
}

/// Odd (u) and even (v) real solutions about x_c and their derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealBasis {
    pub u: f64,
    pub du: f64,
    pub v: f64,
    pub dv: f64,
    pub kappa_norm: f64,
}

impl RealBasis {
    pub fn wronskian(&self) -> f64 {
        self.du * self.v - self.dv * self.u
    }

    /// Values at the mirror point 2x_c − x.
    fn mirrored(self) -> Self {
        RealBasis { u: -self.u, du: self.du, v: self.v, dv: -self.dv, kappa_norm: self.kappa_norm }
    }
}

/// One uniform right-half segment with its entry state.
#[derive(Debug, Clone, Copy)]
struct Piece {
    start: f64,
    width: f64,
    /// (V − E)/(ħ²/2m): positive where evanescent.
    sigma: f64,
    entry: [f64; 4],
}

/// The basis for one wavenumber, tabulated at the right-half interfaces.
#[derive(Debug, Clone)]
pub struct BasisTable {
    xc: f64,
    half_width: f64,
    kappa_c: f64,
    kappa_norm: f64,
    pieces: Vec<Piece>,
    edge: RealBasis,
}

fn advance(state: [f64; 4], sigma: f64, h: f64) -> [f64; 4] {
    let c = coshc(sigma, h);
    let s = sinhc(sigma, h);
    let [u, du, v, dv] = state;
    [u * c + du * s, u * sigma * s + du * c, v * c + dv * s, v * sigma * s + dv * c]
}

impl BasisTable {
    pub fn new(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        let kf = constants.kinetic_factor();
        let e = constants.energy(k);
        let xc = barrier.midpoint();
        if let BarrierSpec::Delta { w, .. } = *barrier {
            // Point barrier: only the right limit at x = a exists.
            let edge = RealBasis { u: 0.0, du: k, v: 1.0, dv: w / (2.0 * kf), kappa_norm: k };
            return Ok(BasisTable { xc, half_width: 0.0, kappa_c: k, kappa_norm: k, pieces: Vec::new(), edge });
        }
        let half = barrier.right_half();
        let sigma_c = (half[0].2 - e) / kf;
        let kappa_c = sigma_c.abs().sqrt();
        // Rescaling u leaves every physical quantity unchanged, so at the
        // exact threshold the free wavenumber stands in for κ_c = 0.
        let kappa_norm = if kappa_c > 0.0 { kappa_c } else { k };
        let mut state = [0.0, kappa_norm, 1.0, 0.0];
        let mut pieces = Vec::with_capacity(half.len());
        for &(start, width, v) in &half {
            let sigma = (v - e) / kf;
            pieces.push(Piece { start, width, sigma, entry: state });
            state = advance(state, sigma, width);
        }
        if state.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("basis propagation (barrier too opaque)"));
        }
        let [u, du, v, dv] = state;
        let edge = RealBasis { u, du, v, dv, kappa_norm };
        Ok(BasisTable { xc, half_width: 0.5 * barrier.width(), kappa_c, kappa_norm, pieces, edge })
    }

    pub fn kappa_norm(&self) -> f64 {
        self.kappa_norm
    }

    /// Local wavenumber at the midpoint.
    pub fn kappa_c(&self) -> f64 {
        self.kappa_c
    }

    /// Basis at x = b.
    pub fn at_right_edge(&self) -> RealBasis {
        self.edge
    }

    /// Basis at x ∈ [a, b].
    pub fn at(&self, x: f64) -> Result<RealBasis> {
        let s = x - self.xc;
        let tol = 1e-12 * (self.xc.abs() + self.half_width);
        if !(s.abs() <= self.half_width + tol) {
            return Err(Error::Domain(format!("x = {x} lies outside the barrier region")));
        }
        if self.pieces.is_empty() {
            return Ok(self.edge);
        }
        let r = s.abs().min(self.half_width);
        let idx = self.pieces.iter().rposition(|p| p.start <= r).unwrap_or(0);
        let p = &self.pieces[idx];
        let h = (r - p.start).min(p.width);
        let [u, du, v, dv] = advance(p.entry, p.sigma, h);
        let basis = RealBasis { u, du, v, dv, kappa_norm: self.kappa_norm };
        Ok(if s < 0.0 { basis.mirrored() } else { basis })
    }
}

/// Basis at a single point x ∈ [a, b].
pub fn eval_basis(barrier: &BarrierSpec, k: f64, x: f64, constants: &PhysicalConstants) -> Result<RealBasis> {
    BasisTable::new(barrier, k, constants)?.at(x)
}

/// Q = u′ + iku and P = v′ + ikv at x = b.
pub fn qp_coeffs(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<(Complex64, Complex64)> {
    let edge = BasisTable::new(barrier, k, constants)?.at_right_edge();
    Ok(edge_coeffs(&edge, k))
}

fn edge_coeffs(edge: &RealBasis, k: f64) -> (Complex64, Complex64) {
    (Complex64::new(edge.du, k * edge.u), Complex64::new(edge.dv, k * edge.v))
}

/// Stationary scattering data for one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoeffs {
    pub k: f64,
    pub a_out: Complex64,
    pub b_out: Complex64,
    pub a_full: Complex64,
    pub b_full: Complex64,
    pub t: f64,
    pub r: f64,
    /// arg a_out.
    pub j: f64,
    /// arg of the reflection in-amplitude; `None` when R < 1e-14.
    pub lambda: Option<f64>,
    /// Reflection phase, identically zero for symmetric barriers.
    pub f: f64,
    /// Local wavenumber at the midpoint.
    pub kappa: f64,
    /// Wavenumber √(V_peak/(ħ²/2m)) of the highest segment.
    pub kappa0: f64,
    pub q: Complex64,
    pub p: Complex64,
    pub kappa_norm: f64,
}

/// Reflection probabilities below this count as "no reflection".
pub const REFLECTION_FLOOR: f64 = 1e-14;

/// Amplitudes a_out, b_out and the barrier-region coefficients a_full, b_full.
pub fn scattering_coeffs(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<ScatteringCoeffs> {
    let table = BasisTable::new(barrier, k, constants)?;
    coeffs_from_table(barrier, &table, k, constants)
}

pub(crate) fn coeffs_from_table(
    barrier: &BarrierSpec,
    table: &BasisTable,
    k: f64,
    constants: &PhysicalConstants,
) -> Result<ScatteringCoeffs> {
    let edge = table.at_right_edge();
    let kn = table.kappa_norm();
    let (q, p) = edge_coeffs(&edge, k);
    if q.norm() < 1e-300 || p.norm() < 1e-300 {
        return Err(Error::SingularCoefficient);
    }
    let (a_out, b_out) = if let BarrierSpec::Delta { w, .. } = *barrier {
        let beta = w / (2.0 * constants.kinetic_factor() * k);
        let denom = Complex64::new(1.0, beta);
        (denom.inv(), Complex64::new(0.0, -beta) / denom)
    } else {
        // (Q/Q* ∓ P/P*)/2 over a common denominator; the numerators reduce
        // to the Wronskian and to u′v′ + k²uv, so nothing cancels.
        let denom = q.conj() * p.conj();
        let a = Complex64::new(0.0, -k * kn) / denom;
        let b = -(edge.du * edge.dv + k * k * edge.u * edge.v) / denom;
        (a, b)
    };
    let phase_a = Complex64::from_polar(1.0, k * barrier.left());
    let a_full = -p.conj() * a_out * phase_a / kn;
    let b_full = q.conj() * a_out * phase_a / kn;
    let t = a_out.norm_sqr();
    let r = b_out.norm_sqr();
    let lambda = if r > REFLECTION_FLOOR {
        Some((b_out * (b_out.conj() - a_out.conj())).arg())
    } else {
        None
    };
    let values = [a_out.re, a_out.im, b_out.re, b_out.im, a_full.re, a_full.im, b_full.re, b_full.im];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("scattering amplitudes"));
    }
    let kappa0 = (barrier.peak_potential() / constants.kinetic_factor()).sqrt();
    Ok(ScatteringCoeffs {
        k,
        a_out,
        b_out,
        a_full,
        b_full,
        t,
        r,
        j: a_out.arg(),
        lambda,
        f: 0.0,
        kappa: table.kappa_c(),
        kappa0,
        q,
        p,
        kappa_norm: kn,
    })
}

/// Entire-function building blocks of the rectangular closed forms, written
/// in s = κ0² − k² so one expression covers both sides of the threshold.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RectTerms {
    pub k: f64,
    pub d: f64,
    pub s: f64,
    pub kappa0_sq: f64,
    /// sinh(κd)/κ
    pub sh: f64,
    /// sinh²(κd/2)/κ² = (cosh κd − 1)/(2κ²)
    pub shh: f64,
    /// (sinh(κd)/κ − d)/κ²
    pub g: f64,
    /// (d cosh κd − sinh(κd)/κ)/κ²
    pub h: f64,
    /// sinh(2κd)/(2κ)
    pub e: f64,
    /// (sinh(2κd)/(2κ) − d)/κ²
    pub e2: f64,
    /// 4k² + κ0⁴ sinh²(κd)/κ²
    pub denom: f64,
}

fn excess_sinhc(s: f64, d: f64) -> f64 {
    let z = s * d * d;
    if z.abs() < 1e-2 {
        d * d * d / 6.0 * (1.0 + z / 20.0 * (1.0 + z / 42.0 * (1.0 + z / 72.0 * (1.0 + z / 110.0))))
    } else {
        (sinhc(s, d) - d) / s
    }
}

fn excess_cosh(s: f64, d: f64) -> f64 {
    let z = s * d * d;
    if z.abs() < 1e-2 {
        let d3 = d * d * d;
        d3 / 3.0 + d3 * z / 30.0 + d3 * z * z / 840.0 + d3 * z * z * z / 45360.0
    } else {
        (d * coshc(s, d) - sinhc(s, d)) / s
    }
}

impl RectTerms {
    pub fn new(d: f64, v0: f64, k: f64, constants: &PhysicalConstants) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        let kappa0_sq = v0 / constants.kinetic_factor();
        let s = kappa0_sq - k * k;
        let sh = sinhc(s, d);
        let half = sinhc(s, 0.5 * d);
        let shh = half * half;
        let terms = RectTerms {
            k,
            d,
            s,
            kappa0_sq,
            sh,
            shh,
            g: excess_sinhc(s, d),
            h: excess_cosh(s, d),
            e: 0.5 * sinhc(s, 2.0 * d),
            e2: 0.5 * excess_sinhc(s, 2.0 * d),
            denom: 4.0 * k * k + kappa0_sq * kappa0_sq * sh * sh,
        };
        if !(terms.denom.is_finite() && terms.e.is_finite()) {
            return Err(Error::NonFinite("rectangular closed form"));
        }
        Ok(terms)
    }

    pub fn from_barrier(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<Self> {
        match *barrier {
            BarrierSpec::Rectangular { a, b, v0 } => Self::new(b - a, v0, k, constants),
            _ => Err(Error::Domain("closed forms exist only for the rectangular barrier".into())),
        }
    }

    /// J′(k) − λ′(k).
    pub fn effective_width(&self) -> f64 {
        let k2 = self.k * self.k;
        4.0 * (k2 + self.kappa0_sq * self.s * self.shh) * (self.kappa0_sq * self.g + self.d) / self.denom
    }

    /// −λ′(k).
    pub fn start_point(&self) -> f64 {
        -2.0 * self.kappa0_sq * (self.sh + self.k * self.k * self.h) / self.denom
    }

    /// m/(ħk) times J′(k).
    pub fn phase_time(&self, constants: &PhysicalConstants) -> f64 {
        let k2 = self.k * self.k;
        let num = 2.0 * self.d * k2 + 2.0 * k2 * k2 * self.e2 + 2.0 * self.s * self.e + 4.0 * k2 * self.e;
        num / self.denom / constants.velocity(self.k)
    }

    /// Full-state density over the barrier divided by the incident flux.
    pub fn full_dwell(&self, constants: &PhysicalConstants) -> f64 {
        let k2 = self.k * self.k;
        k2 * (2.0 * self.d + 2.0 * k2 * self.e2 + 2.0 * self.e) / self.denom / constants.velocity(self.k)
    }

    pub fn transmission_dwell(&self, constants: &PhysicalConstants) -> f64 {
        (self.d + self.sh + self.k * self.k * self.g) / (2.0 * constants.velocity(self.k))
    }

    pub fn reflection_dwell(&self, constants: &PhysicalConstants) -> f64 {
        let k2 = self.k * self.k;
        k2 * self.g / (1.0 + self.kappa0_sq * self.shh) / constants.velocity(self.k)
    }
}

/// Conventional phase time m·J′(k)/(ħk) of a rectangular barrier.
pub fn cmt_phase_time(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<f64> {
    Ok(RectTerms::from_barrier(barrier, k, constants)?.phase_time(constants))
}

/// Conventional dwell time of a rectangular barrier below its top.
pub fn cmt_dwell_time(barrier: &BarrierSpec, k: f64, constants: &PhysicalConstants) -> Result<f64> {
    let terms = RectTerms::from_barrier(barrier, k, constants)?;
    if !(terms.s > 0.0) {
        return Err(Error::Domain("the dwell closed form needs E < V0".into()));
    }
    Ok(terms.full_dwell(constants))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{double_barrier, fig1_barrier, rk4_basis, well_and_steps};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn local_wavenumber_regimes() {
        let c = c();
        assert_eq!(local_wavenumber(0.2, 0.2, &c).unwrap(), (Regime::Oscillatory, 0.0));
        let k = c.wavenumber(0.07);
        let (regime, kappa) = local_wavenumber(0.0, 0.07, &c).unwrap();
        assert_eq!(regime, Regime::Oscillatory);
        assert_relative_eq!(kappa, k, max_relative = 1e-14);
        let (regime, kappa) = local_wavenumber(0.2, 0.1, &c).unwrap();
        assert_eq!(regime, Regime::Evanescent);
        assert_relative_eq!(kappa, (0.1 * 0.067 / 0.0380998f64).sqrt(), max_relative = 1e-14);
        assert!(local_wavenumber(0.2, 0.0, &c).is_err());
    }

    #[test]
    fn midpoint_data_and_closed_basis() {
        let c = c();
        let bar = fig1_barrier();
        let k = c.wavenumber(0.05);
        let kappa = c.wavenumber(0.15);
        let m = eval_basis(&bar, k, 207.5, &c).unwrap();
        assert_eq!((m.u, m.v, m.dv), (0.0, 1.0, 0.0));
        assert_relative_eq!(m.du, kappa, max_relative = 1e-14);
        let x = 211.3;
        let s = kappa * (x - 207.5);
        let got = eval_basis(&bar, k, x, &c).unwrap();
        assert_relative_eq!(got.u, s.sinh(), max_relative = 1e-13);
        assert_relative_eq!(got.v, s.cosh(), max_relative = 1e-13);
        assert_relative_eq!(got.du, kappa * s.cosh(), max_relative = 1e-13);
        assert_relative_eq!(got.dv, kappa * s.sinh(), max_relative = 1e-13);
        assert!(eval_basis(&bar, k, 199.0, &c).is_err());
    }

    #[test]
    fn wronskian_and_parity_all_variants() {
        let c = c();
        for bar in [fig1_barrier(), double_barrier(), well_and_steps()] {
            for &e in &[0.02, 0.1, 0.2, 0.35] {
                let k = c.wavenumber(e);
                let table = BasisTable::new(&bar, k, &c).unwrap();
                let (a, b, xc) = (bar.left(), bar.right(), bar.midpoint());
                for i in 0..=40 {
                    let x = a + (b - a) * i as f64 / 40.0;
                    let p = table.at(x).unwrap();
                    assert_relative_eq!(p.wronskian(), table.kappa_norm(), max_relative = 1e-10);
                    let q = table.at(2.0 * xc - x).unwrap();
                    let scale = p.u.abs().max(p.v.abs()).max(1.0);
                    assert!((p.u + q.u).abs() <= 1e-12 * scale);
                    assert!((p.v - q.v).abs() <= 1e-12 * scale);
                }
            }
        }
    }

    #[test]
    fn basis_matches_ode_integration() {
        let c = c();
        for bar in [double_barrier(), well_and_steps()] {
            for &e in &[0.05, 0.1, 0.25] {
                let k = c.wavenumber(e);
                let table = BasisTable::new(&bar, k, &c).unwrap();
                let xs = bar.interfaces();
                let mut probes = xs.clone();
                probes.extend(xs.windows(2).map(|w| 0.5 * (w[0] + w[1])));
                for x in probes {
                    let got = table.at(x).unwrap();
                    let want = rk4_basis(&bar, k, x, &c, table.kappa_norm());
                    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    for (g, w) in [got.u, got.du, got.v, got.dv].iter().zip(want) {
                        assert!((g - w).abs() <= 1e-8 * scale, "x={x}: {g} vs {w}");
                    }
                }
                let (q, p) = qp_coeffs(&bar, k, &c).unwrap();
                let w = rk4_basis(&bar, k, bar.right(), &c, table.kappa_norm());
                assert_relative_eq!(q.re, w[1], max_relative = 1e-8);
                assert_relative_eq!(q.im, k * w[0], max_relative = 1e-8);
                assert_relative_eq!(p.re, w[3], max_relative = 1e-8);
                assert_relative_eq!(p.im, k * w[2], max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn free_propagation() {
        let c = c();
        let bar = BarrierSpec::Rectangular { a: 10.0, b: 17.0, v0: 0.0 };
        let k = 0.4;
        let (q, p) = qp_coeffs(&bar, k, &c).unwrap();
        let phase = Complex64::from_polar(1.0, k * 7.0);
        assert!((q / q.conj() - phase).norm() < 1e-13);
        assert!((p / p.conj() + phase).norm() < 1e-13);
        let s = scattering_coeffs(&bar, k, &c).unwrap();
        assert!((s.a_out - phase).norm() < 1e-13);
        assert!(s.b_out.norm() < 1e-13);
        assert!(s.lambda.is_none());
        assert_relative_eq!(s.t, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn edge_coefficients_restate_the_basis() {
        let c = c();
        let bar = fig1_barrier();
        let k = c.wavenumber(0.05);
        let (q, p) = qp_coeffs(&bar, k, &c).unwrap();
        let edge = eval_basis(&bar, k, bar.right(), &c).unwrap();
        assert_relative_eq!(q.re, edge.du, max_relative = 1e-12);
        assert_relative_eq!(q.im, k * edge.u, max_relative = 1e-12);
        assert_relative_eq!(p.re, edge.dv, max_relative = 1e-12);
        assert_relative_eq!(p.im, k * edge.v, max_relative = 1e-12);
    }

    #[test]
    fn half_height_transmission_is_sech_squared() {
        let c = c();
        let v0 = 0.2;
        let k = c.wavenumber(0.1);
        let d = 1.0 / k;
        let bar = BarrierSpec::Rectangular { a: 5.0, b: 5.0 + d, v0 };
        let s = scattering_coeffs(&bar, k, &c).unwrap();
        assert_relative_eq!(s.t, 1.0 / 1f64.cosh().powi(2), max_relative = 1e-12);
        assert_relative_eq!(s.t, 0.41997, max_relative = 1e-4);
        assert_eq!(s.f, 0.0);
    }

    #[test]
    fn amplitudes_match_literal_quotient_form() {
        let c = c();
        for bar in [fig1_barrier(), double_barrier(), well_and_steps()] {
            for &e in &[0.03, 0.12, 0.3] {
                let k = c.wavenumber(e);
                let s = scattering_coeffs(&bar, k, &c).unwrap();
                let (q, p) = (s.q, s.p);
                let a = 0.5 * (q / q.conj() - p / p.conj());
                let b = -0.5 * (q / q.conj() + p / p.conj());
                assert!((a - s.a_out).norm() < 1e-12);
                assert!((b - s.b_out).norm() < 1e-12);
                assert!((s.t + s.r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn threshold_is_continuous() {
        let c = c();
        let bar = fig1_barrier();
        let k = c.wavenumber(0.2);
        let at = scattering_coeffs(&bar, k, &c).unwrap();
        let below = scattering_coeffs(&bar, k * (1.0 - 1e-9), &c).unwrap();
        let above = scattering_coeffs(&bar, k * (1.0 + 1e-9), &c).unwrap();
        assert!((at.t + at.r - 1.0).abs() < 1e-12);
        assert!((at.a_out - below.a_out).norm() < 1e-6);
        assert!((at.a_out - above.a_out).norm() < 1e-6);
        // the field itself, not the basis normalization, must be continuous
        let x = 203.0;
        let field = |s: &ScatteringCoeffs| {
            let p = eval_basis(&bar, s.k, x, &c).unwrap();
            s.a_full * p.u + s.b_full * p.v
        };
        assert!((field(&at) - field(&below)).norm() < 1e-6);
        assert!((field(&at) - field(&above)).norm() < 1e-6);
    }

    #[test]
    fn delta_is_analytic_and_consistent() {
        let c = c();
        let w = 0.01;
        let bar = BarrierSpec::Delta { a: 40.0, w };
        let k = 0.3;
        let s = scattering_coeffs(&bar, k, &c).unwrap();
        let beta = w / (2.0 * c.kinetic_factor() * k);
        let want = Complex64::new(1.0, beta).inv();
        assert!((s.a_out - want).norm() < 1e-15);
        // the general edge-coefficient route gives the same amplitudes
        let (q, p) = (s.q, s.p);
        assert!((0.5 * (q / q.conj() - p / p.conj()) - s.a_out).norm() < 1e-14);
        assert!((-0.5 * (q / q.conj() + p / p.conj()) - s.b_out).norm() < 1e-14);
        assert!((s.t + s.r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn thin_rectangle_approaches_delta() {
        let c = c();
        let (a, w, k) = (40.0, 0.01, 0.3);
        let delta = scattering_coeffs(&BarrierSpec::Delta { a, w }, k, &c).unwrap();
        let width = 1e-4;
        let thin = BarrierSpec::Rectangular { a, b: a + width, v0: w / width };
        let s = scattering_coeffs(&thin, k, &c).unwrap();
        // Both amplitudes carry an e^{ikw} phase from the finite width:
        // the outgoing wave is referenced to b and the reflection to a.
        let shift = Complex64::from_polar(1.0, -k * width);
        assert!((s.a_out * shift - delta.a_out).norm() <= 1e-6 * delta.a_out.norm());
        assert!((s.b_out * shift - delta.b_out).norm() <= 1e-6 * delta.b_out.norm());
    }

    #[test]
    fn opaque_barrier_reports_overflow() {
        let c = c();
        let bar = BarrierSpec::Rectangular { a: 1.0, b: 2001.0, v0: 1.0 };
        assert_eq!(scattering_coeffs(&bar, 0.1, &c), Err(Error::NonFinite("basis propagation (barrier too opaque)")));
    }

    #[test]
    fn validation() {
        assert!(BarrierSpec::Rectangular { a: 0.0, b: 1.0, v0: 0.1 }.validate().is_err());
        assert!(BarrierSpec::Rectangular { a: 2.0, b: 1.0, v0: 0.1 }.validate().is_err());
        assert!(BarrierSpec::DoubleRect { a: 2.0, d: 0.0, l: 1.0, v0: 0.1 }.validate().is_err());
        let lopsided = BarrierSpec::SymmetricPiecewise { a: 1.0, segments: alloc::vec![(1.0, 0.2), (1.0, 0.1)] };
        assert!(lopsided.validate().is_err());
        assert!(well_and_steps().validate().is_ok());
        let bar = double_barrier();
        assert_eq!(bar.interfaces(), alloc::vec![100.0, 105.0, 113.0, 118.0]);
        assert_eq!(bar.midpoint(), 109.0);
        assert_eq!(bar.steps(), alloc::vec![(100.0, 0.2), (105.0, -0.2), (113.0, 0.2), (118.0, -0.2)]);
    }

    #[test]
    fn phase_time_matches_phase_derivative() {
        let c = c();
        let bar = fig1_barrier();
        for &e in &[0.03, 0.1, 0.19, 0.2, 0.21, 0.4] {
            let k = c.wavenumber(e);
            let h = 1e-4 * k;
            let jp = crate::numerics::phase_derivative(|q| scattering_coeffs(&bar, q, &c).unwrap().a_out, k, h).unwrap();
            let want = jp / c.velocity(k);
            assert_relative_eq!(cmt_phase_time(&bar, k, &c).unwrap(), want, max_relative = 1e-4);
        }
    }

    #[test]
    fn phase_time_saturates() {
        let c = c();
        let k = c.wavenumber(0.1);
        let kappa = k;
        let tau = |kd: f64| {
            let bar = BarrierSpec::Rectangular { a: 10.0, b: 10.0 + kd / kappa, v0: 0.2 };
            cmt_phase_time(&bar, k, &c).unwrap()
        };
        assert!((tau(6.0) - tau(12.0)).abs() / tau(12.0) < 0.01);
        let _ = PI;
    }

    #[test]
    fn dwell_closed_form_needs_tunnelling_regime() {
        let c = c();
        let bar = fig1_barrier();
        assert!(cmt_dwell_time(&bar, c.wavenumber(0.3), &c).is_err());
        assert!(cmt_dwell_time(&bar, c.wavenumber(0.1), &c).unwrap() > 0.0);
        assert!(cmt_phase_time(&double_barrier(), 0.2, &c).is_err());
    }
}
