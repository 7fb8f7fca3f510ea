//! Grids, composite Simpson quadrature, finite differences, bisection and
//! the physical constants in nm / eV / ps units.

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Range};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Reduced Planck constant in eV·ps.
pub const HBAR_EV_PS: f64 = 6.582119569e-4;
/// ħ²/(2 m_e) in eV·nm².
pub const HBAR2_OVER_2ME: f64 = 0.0380998;
/// GaAs conduction-band effective mass, the default particle mass.
pub const DEFAULT_MASS_RATIO: f64 = 0.067;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    hbar: f64,
    mass_ratio: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar: HBAR_EV_PS, mass_ratio: DEFAULT_MASS_RATIO }
    }
}

impl PhysicalConstants {
    pub fn new(mass_ratio: f64) -> Result<Self> {
        Self::with_hbar(HBAR_EV_PS, mass_ratio)
    }

    /// Overrides ħ. The kinetic factor stays tied to the built-in ħ²/2m_e.
    pub fn with_hbar(hbar: f64, mass_ratio: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Config(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass_ratio > 0.0 && mass_ratio.is_finite()) {
            return Err(Error::Config(format!("mass_ratio must be positive, got {mass_ratio}")));
        }
        Ok(PhysicalConstants { hbar, mass_ratio })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass_ratio(&self) -> f64 {
        self.mass_ratio
    }

    /// ħ²/(2m) in eV·nm².
    pub fn kinetic_factor(&self) -> f64 {
        HBAR2_OVER_2ME / self.mass_ratio
    }

    /// Particle mass in eV·ps²/nm².
    pub fn mass(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.kinetic_factor())
    }

    /// ħ/m in nm²/ps.
    pub fn hbar_over_mass(&self) -> f64 {
        2.0 * self.kinetic_factor() / self.hbar
    }

    pub fn energy(&self, k: f64) -> f64 {
        self.kinetic_factor() * k * k
    }

    pub fn wavenumber(&self, energy: f64) -> f64 {
        (energy / self.kinetic_factor()).sqrt()
    }

    /// Group velocity ħk/m in nm/ps.
    pub fn velocity(&self, k: f64) -> f64 {
        self.hbar_over_mass() * k
    }

    /// Free-flight time m·d/(ħk) across a distance d.
    pub fn free_time(&self, distance: f64, k: f64) -> f64 {
        distance / self.velocity(k)
    }
}

/// Equally spaced nodes with an odd count so composite Simpson applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    stop: f64,
    count: usize,
}

impl UniformGrid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite()) || stop <= start {
            return Err(Error::InvalidGrid(format!("need start < stop, got [{start}, {stop}]")));
        }
        if count < 3 || count % 2 == 0 {
            return Err(Error::InvalidGrid(format!("count must be odd and >= 3, got {count}")));
        }
        Ok(UniformGrid { start, stop, count })
    }

    /// Grid on [lo, hi] with spacing no larger than `max_spacing`.
    pub fn with_max_spacing(lo: f64, hi: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {max_spacing}")));
        }
        let panels = ((hi - lo) / max_spacing / 2.0).ceil().max(1.0) as usize;
        Self::new(lo, hi, 2 * panels + 1)
    }

    /// Grid on [-half_width, half_width] whose two halves each hold an even
    /// number of intervals, so 0 is a node splitting it into Simpson halves.
    pub fn symmetric(half_width: f64, half_intervals: usize) -> Result<Self> {
        if half_intervals == 0 || half_intervals % 2 == 1 {
            return Err(Error::InvalidGrid(format!(
                "half_intervals must be even and positive, got {half_intervals}"
            )));
        }
        Self::new(-half_width, half_width, 2 * half_intervals + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.stop
        } else {
            self.start + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Composite Simpson weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        simpson_weight(i, self.count) * self.spacing()
    }

    /// Index of a node equal to `x` up to a tiny fraction of the spacing.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let pos = (x - self.start) / self.spacing();
        let i = pos.round();
        if i < 0.0 || i >= self.count as f64 || (pos - i).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }
}

fn simpson_weight(i: usize, count: usize) -> f64 {
    if i == 0 || i + 1 == count {
        1.0 / 3.0
    } else if i % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// Composite Simpson rule over `grid`. Sums run left to right in a fixed
/// order so the result does not depend on how callers parallelize.
pub fn integrate<T>(values: &[T], grid: &UniformGrid) -> Result<T>
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    if values.len() != grid.count {
        return Err(Error::LengthMismatch { expected: grid.count, got: values.len() });
    }
    Ok(simpson_sum(values) * (grid.spacing() / 3.0))
}

fn simpson_sum<T>(values: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    let mut odd = T::zero();
    let mut even = T::zero();
    for (i, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    values[0] + values[n - 1] + odd * 4.0 + even * 2.0
}

/// Central difference (f(k+h) − f(k−h)) / 2h.
pub fn differentiate<F: Fn(f64) -> f64>(f: F, k: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let d = (f(k + h) - f(k - h)) / (2.0 * h);
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("central difference"))
    }
}

/// Derivative of arg f(k) from the phase of f(k+h)/f(k−h), which never
/// crosses a branch cut for small h. Richardson-extrapolated over (h, h/2).
pub fn phase_derivative<F: Fn(f64) -> Complex64>(f: F, k: f64, h: f64) -> Result<f64> {
    try_phase_derivative(|k| Ok(f(k)), k, h)
}

/// `phase_derivative` for a fallible f.
pub fn try_phase_derivative<F: Fn(f64) -> Result<Complex64>>(f: F, k: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let central = |h: f64| -> Result<f64> { Ok((f(k + h)? * f(k - h)?.conj()).arg() / (2.0 * h)) };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    let d = (4.0 * fine - coarse) / 3.0;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("phase derivative"))
    }
}

/// `f(0), …, f(n−1)` in order, evaluated in parallel with the `parallel`
/// feature. The first error in index order wins.
pub(crate) fn par_collect<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let out: Vec<Result<T>> = (0..n).into_par_iter().map(f).collect();
        out.into_iter().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Bisection on a sign-changing bracket until it is narrower than `tol`.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: (f64, f64), tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo.is_finite() && f_hi.is_finite()) {
        return Err(Error::NonFinite("root bracket"));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoRoot);
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(Error::NonFinite("bisection"));
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Consecutive uniform pieces sharing their end nodes. Used wherever an
/// integrand has kinks at known points: each piece is smooth inside.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedGrid {
    pieces: Vec<UniformGrid>,
    nodes: Vec<f64>,
    offsets: Vec<usize>,
}

impl SegmentedGrid {
    /// One piece per pair of consecutive breakpoints, each refined to the
    /// matching entry of `spacings`.
    pub fn new(breakpoints: &[f64], spacings: &[f64]) -> Result<Self> {
        if breakpoints.len() < 2 || spacings.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidGrid(format!(
                "{} breakpoints need {} spacings, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                spacings.len()
            )));
        }
        let mut pieces = Vec::with_capacity(spacings.len());
        for (w, &h) in breakpoints.windows(2).zip(spacings) {
            pieces.push(UniformGrid::with_max_spacing(w[0], w[1], h)?);
        }
        Ok(Self::from_pieces(pieces))
    }

    fn from_pieces(pieces: Vec<UniformGrid>) -> Self {
        let mut nodes = Vec::new();
        let mut offsets = Vec::with_capacity(pieces.len());
        for (j, p) in pieces.iter().enumerate() {
            offsets.push(if j == 0 { 0 } else { nodes.len() - 1 });
            let skip = if j == 0 { 0 } else { 1 };
            nodes.extend(p.points().skip(skip));
        }
        SegmentedGrid { pieces, nodes, offsets }
    }

    pub fn uniform(grid: UniformGrid) -> Self {
        Self::from_pieces(alloc::vec![grid])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn pieces(&self) -> &[UniformGrid] {
        &self.pieces
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn stop(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Node indices covered by piece `j`, end nodes included.
    pub fn piece_range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j] + self.pieces[j].count()
    }

    /// Index of the piece boundary located at `x`, if any.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        let tol = 1e-9 * (self.stop() - self.start()).abs().max(1.0);
        (0..=self.pieces.len()).find(|&j| {
            let b = if j == self.pieces.len() { self.stop() } else { self.pieces[j].start() };
            (b - x).abs() <= tol
        })
    }

    /// Integral over the whole grid.
    pub fn integrate<T>(&self, values: &[T]) -> Result<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        self.integrate_pieces(values, 0..self.pieces.len())
    }

    /// Integral over a contiguous run of pieces.
    pub fn integrate_pieces<T>(&self, values: &[T], pieces: Range<usize>) -> Result<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        if values.len() != self.nodes.len() {
            return Err(Error::LengthMismatch { expected: self.nodes.len(), got: values.len() });
        }
        let mut total = T::zero();
        for j in pieces {
            total = total + integrate(&values[self.piece_range(j)], &self.pieces[j])?;
        }
        Ok(total)
    }

    /// Integral between two breakpoints (both must be piece boundaries).
    pub fn integrate_between<T>(&self, values: &[T], lo: f64, hi: f64) -> Result<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        let i = self
            .breakpoint_index(lo)
            .ok_or_else(|| Error::InvalidGrid(format!("{lo} is not a grid breakpoint")))?;
        let j = self
            .breakpoint_index(hi)
            .ok_or_else(|| Error::InvalidGrid(format!("{hi} is not a grid breakpoint")))?;
        self.integrate_pieces(values, i.min(j)..i.max(j))
    }
}

/// sinh(√s·x)/√s continued through s = 0 (sin for s < 0, x at s = 0).
pub fn sinhc(s: f64, x: f64) -> f64 {
    let z = s * x * x;
    if z.abs() < 1e-3 {
        x * (1.0 + z / 6.0 * (1.0 + z / 20.0 * (1.0 + z / 42.0 * (1.0 + z / 72.0))))
    } else if s > 0.0 {
        let r = s.sqrt();
        (r * x).sinh() / r
    } else {
        let r = (-s).sqrt();
        (r * x).sin() / r
    }
}

/// cosh(√s·x) continued through s = 0 (cos for s < 0).
pub fn coshc(s: f64, x: f64) -> f64 {
    if s >= 0.0 {
        (s.sqrt() * x).cosh()
    } else {
        ((-s).sqrt() * x).cos()
    }
}
