//! Spectral time evolution of the full packet and of its transmission and
//! reflection sub-packets: norms, moments, centroid trajectories and the
//! flux and momentum balance diagnostics.
//!
//! Every field is a Simpson sum over the k-grid of stationary fields times
//! e^{−iEt/ħ}. Outside the barrier the sums are plane-wave sums on uniform
//! x-pieces (chirp-z with `std`); inside they run over a tabulated basis.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::barrier::{coeffs_from_table, scattering_coeffs, BarrierSpec, BasisTable};
use crate::error::{Error, Result};
use crate::numerics::{par_collect, PhysicalConstants, SegmentedGrid, UniformGrid};
use crate::planewave::PlaneWaveSum;
use crate::subprocess::{classify, current, in_amplitudes, FieldCoefficients, Kind, Region, Side};

/// Default number of k-nodes.
pub const DEFAULT_K_COUNT: usize = 4097;
/// Minimum |A(k0)|/|A(−k0)| of a completed scattering.
pub const COMPLETED_SCATTERING_RATIO: f64 = 1e6;
/// Largest probability allowed outside the x-grid.
pub const LEAK_TOLERANCE: f64 = 1e-6;
/// Subprocess norms below this make normalized quantities undefined.
pub const NORM_FLOOR: f64 = 1e-14;
/// Default number of trajectory samples.
pub const DEFAULT_TIME_STEPS: usize = 400;

/// Half-span of the default k-grid in spectral standard deviations.
const K_HALF_SPAN: f64 = 8.0;
/// Minimum half-span a user grid must cover.
const K_MIN_COVERAGE: f64 = 6.0;
/// k-nodes whose amplitude falls below this fraction of the peak are skipped.
const NEGLIGIBLE_AMPLITUDE: f64 = 1e-16;
/// x-nodes per shortest wavelength on the default grid.
const NODES_PER_WAVELENGTH: f64 = 120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    kgrid: UniformGrid,
    amplitudes: Vec<Complex64>,
    l0: f64,
    k0: f64,
    scale: f64,
}

fn gaussian(l0: f64, k0: f64, k: f64) -> f64 {
    (2.0 * l0 * l0 / PI).powf(0.25) * (-(l0 * (k - k0)).powi(2)).exp()
}

impl Spectrum {
    pub fn kgrid(&self) -> &UniformGrid {
        &self.kgrid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Standard deviation of |A|², 1/(2 l0).
    pub fn width(&self) -> f64 {
        0.5 / self.l0
    }

    /// The renormalized amplitude at any k, on or off the grid.
    pub fn amplitude_at(&self, k: f64) -> f64 {
        self.scale * gaussian(self.l0, self.k0, k)
    }

    /// |A(k)|² − |A(−k)|².
    pub fn counter_weight(&self, k: f64) -> f64 {
        self.amplitude_at(k).powi(2) - self.amplitude_at(-k).powi(2)
    }

    pub fn norm(&self) -> Result<f64> {
        let dens: Vec<f64> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        crate::numerics::integrate(&dens, &self.kgrid)
    }

    /// ∫ k |A|² dk.
    pub fn mean_wavenumber(&self) -> Result<f64> {
        let vals: Vec<f64> = self.kgrid.points().zip(&self.amplitudes).map(|(k, a)| k * a.norm_sqr()).collect();
        crate::numerics::integrate(&vals, &self.kgrid)
    }

    /// |A(k0)|/|A(−k0)| = e^{4 l0² k0²}.
    pub fn completed_scattering_ratio(&self) -> f64 {
        (4.0 * (self.l0 * self.k0).powi(2)).exp()
    }

    pub fn require_completed_scattering(&self) -> Result<()> {
        let ratio = self.completed_scattering_ratio();
        if ratio > COMPLETED_SCATTERING_RATIO {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "|A(k0)|/|A(-k0)| = {ratio:.3e} is too small for a completed scattering"
            )))
        }
    }
}

/// [k0 − 8σ, k0 + 8σ] when that stays positive, otherwise a grid symmetric
/// about 0 that covers the same span.
pub fn default_kgrid(l0: f64, k0: f64) -> Result<UniformGrid> {
    check_packet(l0, k0)?;
    let span = K_HALF_SPAN * 0.5 / l0;
    if k0 - span > 0.0 {
        UniformGrid::new(k0 - span, k0 + span, DEFAULT_K_COUNT)
    } else {
        UniformGrid::symmetric(k0 + span, (DEFAULT_K_COUNT - 1) / 2)
    }
}

fn check_packet(l0: f64, k0: f64) -> Result<()> {
    if !(l0 > 0.0 && l0.is_finite()) {
        return Err(Error::Config(format!("packet width l0 must be positive, got {l0}")));
    }
    if !(k0 >= 0.0 && k0.is_finite()) {
        return Err(Error::Config(format!("mean wavenumber k0 must be non-negative, got {k0}")));
    }
    Ok(())
}

/// Gaussian amplitudes (2l0²/π)^{1/4} e^{−l0²(k−k0)²} sampled on `kgrid`
/// and renormalized so that ∫|A|²dk = 1 on the grid.
pub fn gaussian_spectrum(l0: f64, k0: f64, kgrid: UniformGrid) -> Result<Spectrum> {
    check_packet(l0, k0)?;
    let need = K_MIN_COVERAGE * 0.5 / l0;
    let slack = 1e-9 * kgrid.spacing();
    if kgrid.start() > k0 - need + slack || kgrid.stop() < k0 + need - slack {
        return Err(Error::Config(format!(
            "k-grid [{}, {}] does not cover k0 ± {need}",
            kgrid.start(),
            kgrid.stop()
        )));
    }
    let raw: Vec<f64> = kgrid.points().map(|k| gaussian(l0, k0, k)).collect();
    let dens: Vec<f64> = raw.iter().map(|a| a * a).collect();
    let scale = 1.0 / crate::numerics::integrate(&dens, &kgrid)?.sqrt();
    let amplitudes = raw.iter().map(|&a| Complex64::new(a * scale, 0.0)).collect();
    Ok(Spectrum { kgrid, amplitudes, l0, k0, scale })
}

/// The wavenumber at which stationary fields are evaluated for a grid node;
/// k = 0 itself has no scattering state, so a node there uses a tiny k.
pub(crate) fn node_wavenumber(k: f64, dk: f64) -> f64 {
    k.abs().max(1e-6 * dk)
}

/// (∫|A|²T dk, ∫|A|²R dk), the asymptotic transmission and reflection norms.
pub fn asymptotic_norms(spectrum: &Spectrum, barrier: &BarrierSpec, constants: &PhysicalConstants) -> Result<(f64, f64)> {
    let kg = &spectrum.kgrid;
    let (mut t, mut r) = (0.0, 0.0);
    for (j, k) in kg.points().enumerate() {
        let s = scattering_coeffs(barrier, node_wavenumber(k, kg.spacing()), constants)?;
        let p = spectrum.amplitudes[j].norm_sqr() * kg.weight(j);
        t += p * s.t;
        r += p * s.r;
    }
    Ok((t, r))
}

/// A horizon long enough for the slowest significant components to leave the
/// barrier: 2(b + 8 l0)/v(k0).
pub fn default_horizon(spectrum: &Spectrum, barrier: &BarrierSpec, constants: &PhysicalConstants) -> Result<f64> {
    let v0 = constants.velocity(spectrum.k0);
    if !(v0 > 0.0) {
        return Err(Error::Config("a packet at rest has no scattering horizon".into()));
    }
    Ok(2.0 * (barrier.right() + 8.0 * spectrum.l0) / v0)
}

/// An x-grid holding the packet and its sub-packets over [0, t_max]. Pieces
/// break at every interface and at the midpoint; all share one spacing fine
/// enough for the fastest significant component.
pub fn packet_grid(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    t_max: f64,
    constants: &PhysicalConstants,
) -> Result<SegmentedGrid> {
    barrier.validate()?;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::Domain(format!("horizon must be finite and non-negative, got {t_max}")));
    }
    let (l0, k0) = (spectrum.l0, spectrum.k0);
    let sigma = spectrum.width();
    let v_max = constants.velocity(k0 + 7.0 * sigma);
    let travel = v_max * t_max + 8.0 * l0;
    let a = barrier.left();
    let lo = (-8.0 * l0).min(2.0 * a - travel).min(a - 8.0 * l0);
    let hi = travel.max(barrier.right() + 8.0 * l0);
    let k_max = spectrum.kgrid.start().abs().max(spectrum.kgrid.stop().abs());
    let h = (2.0 * PI / (NODES_PER_WAVELENGTH * k_max)).min(l0 / 40.0);
    let mut breaks = vec![lo];
    for x in barrier.interfaces().into_iter().chain([barrier.midpoint()]) {
        breaks.push(x);
    }
    breaks.push(hi);
    breaks.sort_by(|p, q| p.total_cmp(q));
    breaks.dedup_by(|p, q| (*p - *q).abs() < 1e-12 * (1.0 + q.abs()));
    let spacings = vec![h; breaks.len() - 1];
    SegmentedGrid::new(&breaks, &spacings)
}

/// The field at one instant on an x-grid.
#[derive(Debug, Clone)]
pub struct Snapshot {
    t: f64,
    kind: Kind,
    grid: Arc<SegmentedGrid>,
    psi: Vec<Complex64>,
    dpsi: Option<Vec<Complex64>>,
    /// Right limit of dψ/dx at the midpoint node; `dpsi` holds the left one.
    dpsi_mid_right: Complex64,
    mid_node: usize,
    mid_piece: usize,
    hbar: f64,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn grid(&self) -> &SegmentedGrid {
        &self.grid
    }

    pub fn xs(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    /// dψ/dx, with the left limit at the midpoint.
    pub fn dpsi(&self) -> Option<&[Complex64]> {
        self.dpsi.as_deref()
    }

    pub fn dpsi_mid_right(&self) -> Complex64 {
        self.dpsi_mid_right
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p.norm_sqr()).collect()
    }

    pub fn norm(&self) -> Result<f64> {
        self.grid.integrate(&self.density())
    }

    /// ∫|ψ|² left of the midpoint.
    pub fn norm_below_midpoint(&self) -> Result<f64> {
        self.grid.integrate_pieces(&self.density(), 0..self.mid_piece)
    }

    /// ∫ w(x)|ψ|² dx.
    pub fn weighted_integral<F: Fn(f64) -> f64>(&self, w: F) -> Result<f64> {
        let vals: Vec<f64> = self.grid.nodes().iter().zip(&self.psi).map(|(&x, p)| w(x) * p.norm_sqr()).collect();
        self.grid.integrate(&vals)
    }

    /// ħ ∫ Im(ψ* dψ/dx) dx over the whole grid, taking each one-sided limit
    /// of the derivative on its own side of the midpoint.
    pub fn momentum_integral(&self) -> Result<f64> {
        let dpsi = self.dpsi.as_ref().ok_or_else(|| Error::Domain("snapshot has no derivative".into()))?;
        let mut vals: Vec<f64> = self.psi.iter().zip(dpsi).map(|(p, d)| self.hbar * (p.conj() * d).im).collect();
        let pieces = self.grid.pieces().len();
        let left = self.grid.integrate_pieces(&vals, 0..self.mid_piece)?;
        vals[self.mid_node] = self.hbar * (self.psi[self.mid_node].conj() * self.dpsi_mid_right).im;
        let right = self.grid.integrate_pieces(&vals, self.mid_piece..pieces)?;
        Ok(left + right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// ⟨x⟩ in nm.
    pub x: f64,
    /// ⟨p⟩ in eV·ps/nm.
    pub p: f64,
    /// ⟨x²⟩ in nm².
    pub x2: f64,
}

/// Moments of a snapshot divided by `normalizer`.
pub fn moments(snapshot: &Snapshot, normalizer: f64) -> Result<Moments> {
    if !(normalizer > NORM_FLOOR) {
        return Err(Error::Undefined("moments of a vanishing sub-packet"));
    }
    Ok(Moments {
        x: snapshot.weighted_integral(|x| x)? / normalizer,
        p: snapshot.momentum_integral()? / normalizer,
        x2: snapshot.weighted_integral(|x| x * x)? / normalizer,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    centroid: Vec<f64>,
    norm: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, centroid: Vec<f64>, norm: Vec<f64>) -> Result<Self> {
        if centroid.len() != times.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: centroid.len() });
        }
        if norm.len() != times.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: norm.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must increase strictly".into()));
        }
        Ok(Trajectory { times, centroid, norm })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn norm(&self) -> &[f64] {
        &self.norm
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Instantaneous norms: **T**(t) = ∫|ψ_tr|², **R**(t) = ∫_{x<x_c}|ψ_ref|² and
/// the full-packet norm on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub transmission: f64,
    pub reflection: f64,
    pub full: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBalance {
    /// Central difference of **T**(t).
    pub rate: f64,
    /// I_tr(x_c + 0) − I_tr(x_c − 0).
    pub jump: f64,
    pub residual: f64,
    /// max_x |I_full(x, t)|.
    pub peak_flux: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumRate {
    /// Central difference of ħ∫Im(ψ*ψ′) over the sub-packet's domain.
    pub lhs: f64,
    /// `force` + `boundary`.
    pub rhs: f64,
    /// −∫ V′|ψ|², a sum over the potential steps.
    pub force: f64,
    /// Momentum flux through the midpoint.
    pub boundary: f64,
    pub residual: f64,
}

fn kind_index(kind: Kind) -> usize {
    match kind {
        Kind::Full => 0,
        Kind::Transmission => 1,
        Kind::Reflection => 2,
    }
}

/// One k-node: its stationary fields and quadrature weight.
#[derive(Debug, Clone)]
struct Mode {
    k: f64,
    energy: f64,
    /// Simpson weight · A(k) / √(2π).
    weight: Complex64,
    fields: [FieldCoefficients; 3],
    table: BasisTable,
}

#[derive(Debug)]
enum Role {
    Left(PlaneWaveSum),
    Right(PlaneWaveSum),
    /// Rows of the basis table start at `row0`; `branch` is the side of x_c.
    Barrier { branch: Side, row0: usize },
}

#[derive(Debug)]
struct Piece {
    nodes: Range<usize>,
    start: f64,
    stop: f64,
    role: Role,
}

/// Precomputed stationary data for one (spectrum, barrier, x-grid) triple;
/// snapshots at any t are then sums over the stored modes.
#[derive(Debug)]
pub struct Evolver {
    constants: PhysicalConstants,
    barrier: BarrierSpec,
    grid: Arc<SegmentedGrid>,
    k_start: f64,
    modes: Vec<Mode>,
    pieces: Vec<Piece>,
    /// [u, du, v, dv] per (barrier row, mode), row-major.
    basis: Vec<[f64; 4]>,
    mid_node: usize,
    mid_piece: usize,
    a: f64,
    b: f64,
    xc: f64,
}

impl Evolver {
    /// The midpoint and both barrier edges must be grid breakpoints.
    pub fn new(
        spectrum: &Spectrum,
        barrier: &BarrierSpec,
        grid: Arc<SegmentedGrid>,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        barrier.validate()?;
        let (a, b, xc) = (barrier.left(), barrier.right(), barrier.midpoint());
        let mut marks = [0usize; 3];
        for (slot, x) in marks.iter_mut().zip([a, xc, b]) {
            *slot = grid
                .breakpoint_index(x)
                .ok_or_else(|| Error::InvalidGrid(format!("x = {x} must be a breakpoint of the x-grid")))?;
        }
        let mid_piece = marks[1];
        if mid_piece == 0 || mid_piece == grid.pieces().len() {
            return Err(Error::InvalidGrid("the x-grid must extend past both barrier edges".into()));
        }
        let mid_node = grid.piece_range(mid_piece).start;

        let kg = spectrum.kgrid;
        let peak = spectrum.amplitudes.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let keep = |j: &usize| spectrum.amplitudes[*j].norm() >= NEGLIGIBLE_AMPLITUDE * peak;
        let j0 = (0..kg.count()).find(keep).unwrap_or(0);
        let j1 = (0..kg.count()).rev().find(keep).map_or(kg.count(), |j| j + 1);
        let dk = kg.spacing();
        let norm = 1.0 / (2.0 * PI).sqrt();
        let modes = par_collect(j1 - j0, |i| {
            let j = j0 + i;
            let k = kg.start() + j as f64 * dk;
            let kabs = node_wavenumber(k, dk);
            let table = BasisTable::new(barrier, kabs, constants)?;
            let coeffs = coeffs_from_table(barrier, &table, kabs, constants)?;
            let amps = in_amplitudes(&coeffs);
            let fields = Kind::ALL.map(|kind| {
                let f = FieldCoefficients::new(kind, &coeffs, &amps, a);
                if k < 0.0 {
                    f.conj()
                } else {
                    f
                }
            });
            Ok(Mode {
                k,
                energy: constants.energy(k),
                weight: spectrum.amplitudes[j] * (kg.weight(j) * norm),
                fields,
                table,
            })
        })?;

        let nm = modes.len();
        let tol = 1e-9 * (grid.stop() - grid.start());
        let mut pieces = Vec::new();
        let mut basis = Vec::new();
        let mut rows = 0;
        for (j, g) in grid.pieces().iter().enumerate() {
            let nodes = grid.piece_range(j);
            let role = if g.stop() <= a + tol {
                Role::Left(PlaneWaveSum::new(nm, dk, g.count(), g.spacing()))
            } else if g.start() >= b - tol {
                Role::Right(PlaneWaveSum::new(nm, dk, g.count(), g.spacing()))
            } else if g.start() >= a - tol && g.stop() <= b + tol {
                let row0 = rows;
                for x in g.points() {
                    for m in &modes {
                        let r = m.table.at(x)?;
                        basis.push([r.u, r.du, r.v, r.dv]);
                    }
                    rows += 1;
                }
                let branch = if g.stop() <= xc + tol { Side::Left } else { Side::Right };
                Role::Barrier { branch, row0 }
            } else {
                return Err(Error::InvalidGrid(format!(
                    "piece [{}, {}] straddles a barrier edge",
                    g.start(),
                    g.stop()
                )));
            };
            pieces.push(Piece { nodes, start: g.start(), stop: g.stop(), role });
        }
        Ok(Evolver {
            constants: *constants,
            barrier: barrier.clone(),
            grid,
            k_start: kg.start() + j0 as f64 * dk,
            modes,
            pieces,
            basis,
            mid_node,
            mid_piece,
            a,
            b,
            xc,
        })
    }

    pub fn grid(&self) -> &Arc<SegmentedGrid> {
        &self.grid
    }

    pub fn barrier(&self) -> &BarrierSpec {
        &self.barrier
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    fn weights(&self, t: f64) -> Vec<Complex64> {
        let hbar = self.constants.hbar();
        self.modes.iter().map(|m| m.weight * Complex64::from_polar(1.0, -m.energy * t / hbar)).collect()
    }

    /// ψ_kind on the grid at time t, optionally with dψ/dx.
    pub fn snapshot(&self, kind: Kind, t: f64, with_derivative: bool) -> Result<Snapshot> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("time must be finite, got {t}")));
        }
        let ki = kind_index(kind);
        let w = self.weights(t);
        let n = self.grid.len();
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        let mut dpsi = if with_derivative { vec![Complex64::new(0.0, 0.0); n] } else { Vec::new() };
        let mut mid_right = Complex64::new(0.0, 0.0);
        let d = self.b - self.a;
        let ik: Vec<Complex64> = self.modes.iter().map(|m| Complex64::new(0.0, m.k)).collect();
        let scaled = |c: &[Complex64]| -> Vec<Complex64> { c.iter().zip(&ik).map(|(c, k)| c * k).collect() };

        for piece in &self.pieces {
            let count = piece.nodes.len();
            let (vals, ders): (Vec<Complex64>, Vec<Complex64>) = match &piece.role {
                Role::Left(plan) => {
                    let inc: Vec<Complex64> = w.iter().zip(&self.modes).map(|(w, m)| w * m.fields[ki].incident).collect();
                    let mut vals = plan.eval(&inc, self.k_start, piece.start);
                    let mut ders = if with_derivative {
                        plan.eval(&scaled(&inc), self.k_start, piece.start)
                    } else {
                        Vec::new()
                    };
                    if kind != Kind::Transmission {
                        let refl: Vec<Complex64> =
                            w.iter().zip(&self.modes).map(|(w, m)| w * m.fields[ki].reflected).collect();
                        // e^{ik(2a − x)} is a plane-wave sum in y = 2a − x,
                        // which runs backwards over the piece.
                        let y0 = 2.0 * self.a - piece.stop;
                        let r = plan.eval(&refl, self.k_start, y0);
                        for (v, rv) in vals.iter_mut().zip(r.iter().rev()) {
                            *v += rv;
                        }
                        if with_derivative {
                            let rd = plan.eval(&scaled(&refl), self.k_start, y0);
                            for (v, rv) in ders.iter_mut().zip(rd.iter().rev()) {
                                *v -= rv;
                            }
                        }
                    }
                    (vals, ders)
                }
                Role::Right(plan) => {
                    if kind == Kind::Reflection {
                        let zeros = vec![Complex64::new(0.0, 0.0); count];
                        (zeros.clone(), if with_derivative { zeros } else { Vec::new() })
                    } else {
                        let out: Vec<Complex64> =
                            w.iter().zip(&self.modes).map(|(w, m)| w * m.fields[ki].outgoing).collect();
                        let vals = plan.eval(&out, self.k_start, piece.start - d);
                        let ders = if with_derivative {
                            plan.eval(&scaled(&out), self.k_start, piece.start - d)
                        } else {
                            Vec::new()
                        };
                        (vals, ders)
                    }
                }
                Role::Barrier { branch, row0 } => {
                    let (cu, cv): (Vec<Complex64>, Vec<Complex64>) = w
                        .iter()
                        .zip(&self.modes)
                        .map(|(w, m)| {
                            let f = &m.fields[ki];
                            match branch {
                                Side::Left => (w * f.left_u, w * f.left_v),
                                Side::Right => (w * f.right_u, w * f.right_v),
                            }
                        })
                        .unzip();
                    let nm = self.modes.len();
                    let mut vals = Vec::with_capacity(count);
                    let mut ders = Vec::with_capacity(if with_derivative { count } else { 0 });
                    for r in 0..count {
                        let row = &self.basis[(row0 + r) * nm..(row0 + r + 1) * nm];
                        let mut p = Complex64::new(0.0, 0.0);
                        let mut dp = Complex64::new(0.0, 0.0);
                        for ((cu, cv), e) in cu.iter().zip(&cv).zip(row) {
                            p += cu * e[0] + cv * e[2];
                            if with_derivative {
                                dp += cu * e[1] + cv * e[3];
                            }
                        }
                        vals.push(p);
                        if with_derivative {
                            ders.push(dp);
                        }
                    }
                    (vals, ders)
                }
            };
            for (offset, node) in piece.nodes.clone().enumerate() {
                psi[node] = vals[offset];
                if with_derivative {
                    if node == self.mid_node && offset == 0 {
                        mid_right = ders[offset];
                    } else {
                        dpsi[node] = ders[offset];
                    }
                }
            }
        }
        if psi.iter().any(|p| !(p.re.is_finite() && p.im.is_finite())) {
            return Err(Error::NonFinite("packet field"));
        }
        Ok(Snapshot {
            t,
            kind,
            grid: self.grid.clone(),
            psi,
            dpsi: with_derivative.then_some(dpsi),
            dpsi_mid_right: mid_right,
            mid_node: self.mid_node,
            mid_piece: self.mid_piece,
            hbar: self.constants.hbar(),
        })
    }

    /// (ψ, dψ/dx) of one kind at a single point; `side` selects the
    /// one-sided limit at the midpoint.
    pub fn point(&self, kind: Kind, x: f64, side: Side, t: f64) -> Result<(Complex64, Complex64)> {
        let ki = kind_index(kind);
        let region = classify(x, side, self.a, self.b, self.xc);
        let d = self.b - self.a;
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi = Complex64::new(0.0, 0.0);
        for (w, m) in self.weights(t).iter().zip(&self.modes) {
            let f = &m.fields[ki];
            let ik = Complex64::new(0.0, m.k);
            let (p, dp) = match region {
                Region::LeftOfBarrier => {
                    let inc = f.incident * Complex64::from_polar(1.0, m.k * x);
                    let refl = f.reflected * Complex64::from_polar(1.0, m.k * (2.0 * self.a - x));
                    (inc + refl, ik * (inc - refl))
                }
                Region::RightOfBarrier => {
                    let out = f.outgoing * Complex64::from_polar(1.0, m.k * (x - d));
                    (out, ik * out)
                }
                Region::BarrierLeft | Region::BarrierRight => {
                    let r = m.table.at(x)?;
                    let (cu, cv) = if region == Region::BarrierLeft {
                        (f.left_u, f.left_v)
                    } else {
                        (f.right_u, f.right_v)
                    };
                    (cu * r.u + cv * r.v, cu * r.du + cv * r.dv)
                }
            };
            psi += w * p;
            dpsi += w * dp;
        }
        Ok((psi, dpsi))
    }

    /// Instantaneous norms. Fails with `GridTooSmall` when more than
    /// `LEAK_TOLERANCE` of the full packet lies outside the grid.
    pub fn norms(&self, t: f64) -> Result<Norms> {
        let tr = self.snapshot(Kind::Transmission, t, false)?;
        let rf = self.snapshot(Kind::Reflection, t, false)?;
        let full_density: Vec<f64> = tr.psi.iter().zip(&rf.psi).map(|(p, q)| (p + q).norm_sqr()).collect();
        let full = self.grid.integrate(&full_density)?;
        let leak = 1.0 - full;
        if leak > LEAK_TOLERANCE {
            return Err(Error::GridTooSmall { mass: leak });
        }
        Ok(Norms { transmission: tr.norm()?, reflection: rf.norm_below_midpoint()?, full })
    }

    /// (⟨x⟩, norm) of one kind at time t, the centroid normalized by the
    /// instantaneous norm of that kind.
    pub fn centroid(&self, kind: Kind, t: f64) -> Result<(f64, f64)> {
        let s = self.snapshot(kind, t, false)?;
        let norm = s.norm()?;
        if !(norm > NORM_FLOOR) {
            return Err(Error::Undefined("centroid of a vanishing sub-packet"));
        }
        Ok((s.weighted_integral(|x| x)? / norm, norm))
    }

    pub fn trajectory(&self, kind: Kind, times: &[f64]) -> Result<Trajectory> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must increase strictly".into()));
        }
        let samples = par_collect(times.len(), |i| self.centroid(kind, times[i]))?;
        let (centroid, norm) = samples.into_iter().unzip();
        Trajectory::new(times.to_vec(), centroid, norm)
    }

    /// dT/dt against the jump of the transmission current at x_c.
    pub fn flux_balance(&self, t: f64, dt: f64) -> Result<FluxBalance> {
        check_step(dt)?;
        let t_plus = self.snapshot(Kind::Transmission, t + dt, false)?.norm()?;
        let t_minus = self.snapshot(Kind::Transmission, t - dt, false)?.norm()?;
        let rate = (t_plus - t_minus) / (2.0 * dt);
        let c = &self.constants;
        let (pr, dr) = self.point(Kind::Transmission, self.xc, Side::Right, t)?;
        let (pl, dl) = self.point(Kind::Transmission, self.xc, Side::Left, t)?;
        let jump = current(pr, dr, c) - current(pl, dl, c);
        let full = self.snapshot(Kind::Full, t, true)?;
        let dfull = full.dpsi.as_ref().expect("derivative requested");
        let mut peak_flux = full.psi.iter().zip(dfull).map(|(p, d)| current(*p, *d, c).abs()).fold(0.0, f64::max);
        peak_flux = peak_flux.max(current(full.psi[self.mid_node], full.dpsi_mid_right, c).abs());
        Ok(FluxBalance { rate, jump, residual: (rate - jump).abs(), peak_flux })
    }

    /// Momentum balance of the transmission or reflection sub-packet.
    pub fn momentum_rate_check(&self, kind: Kind, t: f64, dt: f64) -> Result<MomentumRate> {
        check_step(dt)?;
        if kind == Kind::Full {
            return Err(Error::Domain("momentum balance applies to the transmission or reflection sub-packet".into()));
        }
        let now = self.snapshot(kind, t, false)?;
        let norm = if kind == Kind::Reflection { now.norm_below_midpoint()? } else { now.norm()? };
        if !(norm > NORM_FLOOR) {
            return Err(Error::Undefined("momentum of a vanishing sub-packet"));
        }
        let p_plus = self.snapshot(kind, t + dt, true)?.momentum_integral()?;
        let p_minus = self.snapshot(kind, t - dt, true)?.momentum_integral()?;
        let lhs = (p_plus - p_minus) / (2.0 * dt);
        let mut force = 0.0;
        for (x, dv) in self.barrier.steps() {
            if kind == Kind::Reflection && x >= self.xc {
                continue;
            }
            let (psi, _) = self.point(kind, x, Side::Left, t)?;
            force -= dv * psi.norm_sqr();
        }
        let kf = self.constants.kinetic_factor();
        let (_, dl) = self.point(kind, self.xc, Side::Left, t)?;
        let boundary = match kind {
            Kind::Reflection => -kf * dl.norm_sqr(),
            _ => {
                let (_, dr) = self.point(kind, self.xc, Side::Right, t)?;
                kf * (dr.norm_sqr() - dl.norm_sqr())
            }
        };
        let rhs = force + boundary;
        Ok(MomentumRate { lhs, rhs, force, boundary, residual: (lhs - rhs).abs() })
    }
}

fn check_step(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time step must be positive, got {dt}")))
    }
}

fn default_evolver(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    t_max: f64,
    constants: &PhysicalConstants,
) -> Result<Evolver> {
    let grid = packet_grid(spectrum, barrier, t_max, constants)?;
    Evolver::new(spectrum, barrier, Arc::new(grid), constants)
}

/// ψ_kind(x, t) on `xgrid`, with dψ/dx.
pub fn evolve(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    kind: Kind,
    xgrid: &SegmentedGrid,
    t: f64,
    constants: &PhysicalConstants,
) -> Result<Snapshot> {
    Evolver::new(spectrum, barrier, Arc::new(xgrid.clone()), constants)?.snapshot(kind, t, true)
}

/// (**T**(t), **R**(t)) on the default grid for time t.
pub fn norms(spectrum: &Spectrum, barrier: &BarrierSpec, t: f64, constants: &PhysicalConstants) -> Result<Norms> {
    default_evolver(spectrum, barrier, t.max(0.0), constants)?.norms(t)
}

pub fn flux_balance(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    t: f64,
    dt: f64,
    constants: &PhysicalConstants,
) -> Result<FluxBalance> {
    default_evolver(spectrum, barrier, (t + dt).max(0.0), constants)?.flux_balance(t, dt)
}

pub fn momentum_rate_check(
    spectrum: &Spectrum,
    barrier: &BarrierSpec,
    kind: Kind,
    t: f64,
    dt: f64,
    constants: &PhysicalConstants,
) -> Result<MomentumRate> {
    default_evolver(spectrum, barrier, (t + dt).max(0.0), constants)?.momentum_rate_check(kind, t, dt)
}

/// `steps + 1` equally spaced times on [t0, t1].
pub fn sample_times(t0: f64, t1: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t1 > t0) || steps == 0 {
        return Err(Error::Domain(format!("need t0 < t1 and at least one step, got [{t0}, {t1}] / {steps}")));
    }
    Ok((0..=steps).map(|i| t0 + (t1 - t0) * i as f64 / steps as f64).collect())
}

/// Closed-form free Gaussian packet with the amplitude (2l0²/π)^{1/4}
/// e^{−l0²(k−k0)²}, evolved for time t.
pub fn free_gaussian(x: f64, t: f64, l0: f64, k0: f64, c: &PhysicalConstants) -> Complex64 {
    let norm = (2.0 * l0 * l0 / PI).powf(0.25);
    let alpha = Complex64::new(l0 * l0, c.kinetic_factor() * t / c.hbar());
    let b = Complex64::new(2.0 * l0 * l0 * k0, x);
    let pref = norm / (2.0 * PI).sqrt() * (PI / alpha).sqrt();
    pref * (b * b / (4.0 * alpha) - l0 * l0 * k0 * k0).exp()
}

#[cfg(test)]
mod tests;
