//! Stationary two-dimensional slit fields: single-slit angular-spectrum
//! propagation, the symmetric two-slit superposition, its split into
//! half-plane parts, and the symmetry diagnostics that a mirror on y = 0
//! must leave intact.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::{integrate, par_collect, UniformGrid};

/// Largest phase advance of the integrand between neighbouring spectral nodes.
const PHASE_STEP: f64 = 0.2;
/// Evanescent components are cut where e^{−κx} falls below e^{−40}.
const EVANESCENT_DECAY: f64 = 40.0;
const MIN_NODES: usize = 256;
const MAX_NODES: usize = 4_000_000;

/// Geometry of the slit screen at x = 0 and of the observation planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitConfig {
    /// Slit centers sit at y = ±a.
    pub half_separation: f64,
    pub slit_width: f64,
    pub k: f64,
    pub detector_distance: f64,
    pub ygrid: UniformGrid,
    pub xplanes: Vec<f64>,
}

impl SlitConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, d, k, l) = (self.half_separation, self.slit_width, self.k, self.detector_distance);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("slit width must be positive, got {d}")));
        }
        if !(a > 0.5 * d && a.is_finite()) {
            return Err(Error::Config(format!("slits overlap: need a > d/2, got a={a}, d={d}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Config(format!("wavenumber must be positive, got {k}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Config(format!("detector distance must be positive, got {l}")));
        }
        if self.xplanes.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::Config("observation planes must lie at x >= 0".into()));
        }
        Ok(())
    }

    /// The y nodes; for a grid symmetric about 0 they mirror exactly.
    pub fn ys(&self) -> Vec<f64> {
        grid_points(&self.ygrid)
    }
}

fn grid_points(grid: &UniformGrid) -> Vec<f64> {
    let n = grid.count();
    let symmetric = grid.start() == -grid.stop();
    if !symmetric {
        return grid.to_vec();
    }
    let mid = n / 2;
    let h = grid.spacing();
    let mut ys = alloc::vec![0.0; n];
    for i in 1..=mid {
        let y = if i == mid { grid.stop() } else { i as f64 * h };
        ys[mid + i] = y;
        ys[mid - i] = -y;
    }
    ys
}

/// Which closed half-plane a decomposed field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlane {
    Lower,
    Upper,
}

/// A field sampled across one plane x = const.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub x: f64,
    pub ygrid: UniformGrid,
    pub ys: Vec<f64>,
    pub values: Vec<Complex64>,
    /// ∂ψ/∂y; absent on the aperture plane where the field jumps.
    pub dy: Option<Vec<Complex64>>,
    /// ∂ψ/∂x; absent on the aperture plane.
    pub dx: Option<Vec<Complex64>>,
    /// Set for the parts produced by `decompose`.
    pub support: Option<HalfPlane>,
}

impl Field2D {
    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// ∫|ψ|² dy across the plane. A half-plane part is integrated over its
    /// own closed half with the one-sided limit at y = 0, where the stored
    /// node value carries the halving convention.
    pub fn norm(&self) -> Result<f64> {
        let dens = self.intensity();
        let Some(half) = self.support else {
            return integrate(&dens, &self.ygrid);
        };
        let i0 = zero_index(&self.ygrid)?;
        let n = self.ygrid.count();
        let (range, lo, hi) = match half {
            HalfPlane::Lower => (0..i0 + 1, self.ygrid.start(), 0.0),
            HalfPlane::Upper => (i0..n, 0.0, self.ygrid.stop()),
        };
        let mut part: Vec<f64> = dens[range.clone()].to_vec();
        let edge = if half == HalfPlane::Lower { part.len() - 1 } else { 0 };
        part[edge] *= 4.0;
        let grid = UniformGrid::new(lo, hi, range.len())
            .map_err(|_| Error::Config("each half of the y-grid needs an even number of intervals".into()))?;
        integrate(&part, &grid)
    }

    /// Transverse current Im(ψ*∂ψ/∂y) in units of ħ/m.
    pub fn current_y(&self) -> Result<Vec<f64>> {
        let dy = self.dy.as_ref().ok_or(Error::Undefined("no y-derivative on the aperture plane"))?;
        Ok(self.values.iter().zip(dy).map(|(v, d)| (v.conj() * d).im).collect())
    }

    /// Longitudinal current Im(ψ*∂ψ/∂x) in units of ħ/m.
    pub fn current_x(&self) -> Result<Vec<f64>> {
        let dx = self.dx.as_ref().ok_or(Error::Undefined("no x-derivative on the aperture plane"))?;
        Ok(self.values.iter().zip(dx).map(|(v, d)| (v.conj() * d).im).collect())
    }

    /// Flux ∫J_x dy through the plane, in units of ħ/m.
    pub fn x_flux(&self) -> Result<f64> {
        integrate(&self.current_x()?, &self.ygrid)
    }
}

fn zero_index(grid: &UniformGrid) -> Result<usize> {
    grid.index_of(0.0).ok_or_else(|| Error::Config("y = 0 must be a node of the y-grid".into()))
}

/// Spectral nodes of the cosine-form angular spectrum of one slit at one
/// plane: ψ(x, η) = Σ c_j cos(q_j |η|), with derivatives from the same nodes.
struct SlitSpectrum {
    q: Vec<f64>,
    /// Weight times 2Â(q)e^{ik_x x}.
    c: Vec<Complex64>,
    /// i·k_x.
    ikx: Vec<Complex64>,
}

impl SlitSpectrum {
    fn new(k: f64, d: f64, x: f64, eta_max: f64) -> Result<Self> {
        // Â(q) = sin(qd/2)/(πq), even in q, so ψ = ∫₀^∞ 2Â cos(qη) e^{ik_x x} dq.
        let amp = |q: f64| if q == 0.0 { d / (2.0 * PI) } else { (0.5 * q * d).sin() / (PI * q) };
        let reach = eta_max + 0.5 * d;
        let mut q = Vec::new();
        let mut c = Vec::new();
        let mut ikx = Vec::new();

        // Propagating part, q = k sin θ.
        let rate = k * (x * x + reach * reach).sqrt();
        let n = simpson_count(FRAC_PI_2 * rate / PHASE_STEP)?;
        let grid = UniformGrid::new(0.0, FRAC_PI_2, n)?;
        for (j, th) in grid.points().enumerate() {
            let (s, co) = th.sin_cos();
            let qj = k * s;
            let kx = k * co;
            q.push(qj);
            c.push(Complex64::from_polar(grid.weight(j) * k * co * 2.0 * amp(qj), kx * x));
            ikx.push(Complex64::new(0.0, kx));
        }

        // Evanescent part, q = k cosh u, k_x = ik sinh u.
        if x > 0.0 {
            let top = (EVANESCENT_DECAY / (k * x)).asinh();
            let n = simpson_count(top * k * top.sinh() * reach / PHASE_STEP)?;
            let grid = UniformGrid::new(0.0, top, n)?;
            for (j, u) in grid.points().enumerate() {
                let qj = k * u.cosh();
                let kappa = k * u.sinh();
                q.push(qj);
                c.push(Complex64::new(grid.weight(j) * kappa * 2.0 * amp(qj) * (-kappa * x).exp(), 0.0));
                ikx.push(Complex64::new(-kappa, 0.0));
            }
        }
        Ok(SlitSpectrum { q, c, ikx })
    }

    /// (ψ, ∂ψ/∂η, ∂ψ/∂x) at offset η from the slit center.
    fn eval(&self, eta: f64) -> (Complex64, Complex64, Complex64) {
        let r = eta.abs();
        let mut psi = Complex64::new(0.0, 0.0);
        let mut deta = Complex64::new(0.0, 0.0);
        let mut dx = Complex64::new(0.0, 0.0);
        for ((q, c), ikx) in self.q.iter().zip(&self.c).zip(&self.ikx) {
            let (s, co) = (q * r).sin_cos();
            psi += c * co;
            deta -= c * (q * s);
            dx += c * ikx * co;
        }
        (psi, if eta < 0.0 { -deta } else { deta }, dx)
    }
}

fn simpson_count(intervals: f64) -> Result<usize> {
    let n = (intervals.ceil() as usize).max(MIN_NODES);
    if n > MAX_NODES {
        return Err(Error::Domain(format!(
            "plane too close to the aperture for this y-range ({n} spectral nodes)"
        )));
    }
    Ok(n + 1 + n % 2)
}

fn require_plane(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("observation plane must have x >= 0, got {x}")))
    }
}

type Samples = (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>);

/// (ψ, ∂ψ/∂y, ∂ψ/∂x) of Σ_s weight·ψ_one(x, y − y_s) at the given y, for x > 0.
fn slit_sum_at(k: f64, d: f64, centers: &[f64], weight: f64, x: f64, ys: &[f64]) -> Result<Samples> {
    let eta_max = centers
        .iter()
        .flat_map(|&c| ys.iter().map(move |&y| (y - c).abs()))
        .fold(0.0, f64::max);
    let spectrum = SlitSpectrum::new(k, d, x, eta_max)?;
    let samples = par_collect(ys.len(), |i| {
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for &c in centers {
            let (p, dy, dx) = spectrum.eval(ys[i] - c);
            acc[0] += p;
            acc[1] += dy;
            acc[2] += dx;
        }
        Ok(acc)
    })?;
    let mut out = (Vec::with_capacity(ys.len()), Vec::with_capacity(ys.len()), Vec::with_capacity(ys.len()));
    for [p, dy, dx] in samples {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(Error::NonFinite("slit field"));
        }
        out.0.push(p * weight);
        out.1.push(dy * weight);
        out.2.push(dx * weight);
    }
    Ok(out)
}

/// Superposition Σ_s weight·ψ_one(x, y − y_s) on the config's y-grid.
fn slit_sum(config: &SlitConfig, centers: &[f64], weight: f64, x: f64) -> Result<Field2D> {
    require_plane(x)?;
    let (k, d) = (config.k, config.slit_width);
    if !(k > 0.0 && d > 0.0) {
        return Err(Error::Config("slit width and wavenumber must be positive".into()));
    }
    let ys = config.ys();
    if x == 0.0 {
        let values = ys
            .iter()
            .map(|&y| {
                let inside = centers.iter().filter(|&&c| (y - c).abs() <= 0.5 * d).count();
                Complex64::new(weight * inside as f64, 0.0)
            })
            .collect();
        return Ok(Field2D { x, ygrid: config.ygrid, ys, values, dy: None, dx: None, support: None });
    }
    let (values, dy, dx) = slit_sum_at(k, d, centers, weight, x, &ys)?;
    Ok(Field2D { x, ygrid: config.ygrid, ys, values, dy: Some(dy), dx: Some(dx), support: None })
}

/// Field of one slit centered on y0, with unit amplitude across the aperture.
pub fn one_slit_field(config: &SlitConfig, y0: f64, x: f64) -> Result<Field2D> {
    slit_sum(config, &[y0], 1.0, x)
}

/// (1/√2)[ψ_one(y − a) + ψ_one(y + a)].
pub fn two_slit_field(config: &SlitConfig, x: f64) -> Result<Field2D> {
    config.validate()?;
    let a = config.half_separation;
    slit_sum(config, &[-a, a], FRAC_1_SQRT_2, x)
}

/// Two slits at arbitrary centers, for controls that break the symmetry.
pub fn slit_pair_field(config: &SlitConfig, centers: [f64; 2], x: f64) -> Result<Field2D> {
    slit_sum(config, &centers, FRAC_1_SQRT_2, x)
}

/// (ψ⁽¹⁾, ψ⁽²⁾): the field restricted to y < 0 and to y > 0, each taking
/// half the value on y = 0.
pub fn decompose(field: &Field2D) -> Result<(Field2D, Field2D)> {
    let i0 = zero_index(&field.ygrid)?;
    let split = |keep: HalfPlane, v: &[Complex64]| -> Vec<Complex64> {
        v.iter()
            .enumerate()
            .map(|(i, &z)| match (i.cmp(&i0), keep) {
                (core::cmp::Ordering::Equal, _) => z * 0.5,
                (core::cmp::Ordering::Less, HalfPlane::Lower) | (core::cmp::Ordering::Greater, HalfPlane::Upper) => z,
                _ => Complex64::new(0.0, 0.0),
            })
            .collect()
    };
    let part = |half: HalfPlane| Field2D {
        x: field.x,
        ygrid: field.ygrid,
        ys: field.ys.clone(),
        values: split(half, &field.values),
        dy: field.dy.as_ref().map(|d| split(half, d)),
        dx: field.dx.as_ref().map(|d| split(half, d)),
        support: Some(half),
    };
    Ok((part(HalfPlane::Lower), part(HalfPlane::Upper)))
}

/// Norms on one plane: the two-slit field, its half-plane parts, and the
/// average of the two single-slit norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitNorms {
    pub two_slit: f64,
    pub lower: f64,
    pub upper: f64,
    pub one_slit_average: f64,
}

impl SlitNorms {
    /// |‖Φ‖ − (‖ψ⁽¹⁾‖ + ‖ψ⁽²⁾‖)| / ‖Φ‖.
    pub fn partition_mismatch(&self) -> f64 {
        (self.two_slit - self.lower - self.upper).abs() / self.two_slit
    }

    /// |‖Φ‖ − ½(‖Ψ_one(y−a)‖ + ‖Ψ_one(y+a)‖)| / ‖Φ‖.
    pub fn one_slit_mismatch(&self) -> f64 {
        (self.two_slit - self.one_slit_average).abs() / self.two_slit
    }
}

pub fn norms(config: &SlitConfig, x: f64) -> Result<SlitNorms> {
    let field = two_slit_field(config, x)?;
    let (lower, upper) = decompose(&field)?;
    let a = config.half_separation;
    let left = one_slit_field(config, -a, x)?.norm()?;
    let right = one_slit_field(config, a, x)?.norm()?;
    Ok(SlitNorms {
        two_slit: field.norm()?,
        lower: lower.norm()?,
        upper: upper.norm()?,
        one_slit_average: 0.5 * (left + right),
    })
}

/// Worst symmetry residuals over a set of planes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorReport {
    /// max |Φ(x, −y) − Φ(x, y)|.
    pub evenness: f64,
    /// max |J_y(x, 0)|, units of ħ/m.
    pub transverse_current: f64,
}

/// Evenness and zero transverse current on y = 0 for the symmetric pair.
pub fn mirror_diagnostic(config: &SlitConfig, planes: &[f64]) -> Result<MirrorReport> {
    config.validate()?;
    let a = config.half_separation;
    mirror_diagnostic_with_centers(config, [-a, a], planes)
}

/// `mirror_diagnostic` for slits at arbitrary centers.
pub fn mirror_diagnostic_with_centers(config: &SlitConfig, centers: [f64; 2], planes: &[f64]) -> Result<MirrorReport> {
    let (k, d) = (config.k, config.slit_width);
    let ys = config.ys();
    let flipped_ys: Vec<f64> = ys.iter().map(|y| -y).collect();
    let mut report = MirrorReport { evenness: 0.0, transverse_current: 0.0 };
    for &x in planes {
        require_plane(x)?;
        let field = slit_pair_field(config, centers, x)?;
        let flipped = if x == 0.0 {
            // Φ(−y) of the pair equals Φ(y) of the pair reflected through 0.
            slit_pair_field(config, [-centers[1], -centers[0]], x)?.values
        } else {
            slit_sum_at(k, d, &centers, FRAC_1_SQRT_2, x, &flipped_ys)?.0
        };
        for (p, q) in field.values.iter().zip(&flipped) {
            report.evenness = report.evenness.max((p - q).norm());
        }
        if x > 0.0 {
            let (v, dy, _) = slit_sum_at(k, d, &centers, FRAC_1_SQRT_2, x, &[0.0])?;
            report.transverse_current = report.transverse_current.max((v[0].conj() * dy[0]).im.abs());
        }
    }
    Ok(report)
}
