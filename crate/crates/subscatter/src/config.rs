//! Scenario files: TOML, or JSON with the same schema.

use std::path::Path;

use serde::Deserialize;
use subscatter_core::barrier::BarrierSpec;
use subscatter_core::doubleslit::SlitConfig;
use subscatter_core::numerics::{PhysicalConstants, UniformGrid, DEFAULT_MASS_RATIO};
use subscatter_core::timing::ScanAxis;
use subscatter_core::wavepacket::{default_kgrid, gaussian_spectrum, Spectrum};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Stationary,
    Packet,
    Times,
    Scan,
    Doubleslit,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Optional; when present it must agree with the mode on the command line.
    pub mode: Option<Mode>,
    #[serde(default)]
    pub physics: Physics,
    pub barrier: Option<BarrierConfig>,
    pub packet: Option<PacketConfig>,
    #[serde(default)]
    pub grids: Grids,
    pub scan: Option<ScanConfig>,
    pub doubleslit: Option<SlitSection>,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default = "default_mass_ratio")]
    pub mass_ratio: f64,
    pub hbar: Option<f64>,
}

fn default_mass_ratio() -> f64 {
    DEFAULT_MASS_RATIO
}

impl Default for Physics {
    fn default() -> Self {
        Physics { mass_ratio: DEFAULT_MASS_RATIO, hbar: None }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierConfig {
    Rectangular { a: f64, b: f64, v0: f64 },
    Double { a: f64, d: f64, l: f64, v0: f64 },
    Delta { a: f64, w: f64 },
    /// (width, potential) pairs from `a`, symmetric about the midpoint.
    Piecewise { a: f64, segments: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub l0: f64,
    /// Mean energy in eV; excludes `k0`.
    pub e0: Option<f64>,
    pub k0: Option<f64>,
    /// Times of the density snapshots in packet mode.
    pub snapshots: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub k: Option<Range>,
    pub x: Option<XGrid>,
    pub t: Option<TimeGrid>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn grid(&self) -> Result<UniformGrid> {
        Ok(UniformGrid::new(self.start, self.stop, self.count)?)
    }
}

/// Packet x-grid: extent and spacing. Interfaces and the midpoint are always
/// added as breakpoints.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGrid {
    pub start: f64,
    pub stop: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub stop: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub axis: AxisName,
    pub values: Option<Vec<f64>>,
    pub range: Option<Range>,
    /// Energy in eV or wavenumber in 1/nm; defaults to the packet's k0.
    pub energy: Option<f64>,
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Width,
    Gap,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitSection {
    pub half_separation: f64,
    pub slit_width: f64,
    pub k: f64,
    pub detector_distance: f64,
    pub y_half_width: f64,
    pub y_half_intervals: usize,
    /// Observation planes; defaults to the detector plane.
    pub planes: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "out".into()
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for Output {
    fn default() -> Self {
        Output { directory: default_directory(), formats: all_formats() }
    }
}

/// Parses scenario text; `.json` files are read as JSON, everything else as
/// TOML. Parser messages carry the line and the offending field.
pub fn parse(text: &str, path: &Path) -> Result<Scenario> {
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl Scenario {
    pub fn constants(&self) -> Result<PhysicalConstants> {
        let p = &self.physics;
        Ok(match p.hbar {
            Some(h) => PhysicalConstants::with_hbar(h, p.mass_ratio)?,
            None => PhysicalConstants::new(p.mass_ratio)?,
        })
    }

    pub fn barrier(&self) -> Result<BarrierSpec> {
        let spec = match self.barrier.as_ref().ok_or_else(|| missing("barrier"))? {
            BarrierConfig::Rectangular { a, b, v0 } => BarrierSpec::Rectangular { a: *a, b: *b, v0: *v0 },
            BarrierConfig::Double { a, d, l, v0 } => BarrierSpec::DoubleRect { a: *a, d: *d, l: *l, v0: *v0 },
            BarrierConfig::Delta { a, w } => BarrierSpec::Delta { a: *a, w: *w },
            BarrierConfig::Piecewise { a, segments } => {
                BarrierSpec::SymmetricPiecewise { a: *a, segments: segments.iter().map(|s| (s[0], s[1])).collect() }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    fn packet(&self) -> Result<&PacketConfig> {
        self.packet.as_ref().ok_or_else(|| missing("packet"))
    }

    /// The packet's mean wavenumber from exactly one of `k0` and `e0`.
    pub fn k0(&self, c: &PhysicalConstants) -> Result<f64> {
        let p = self.packet()?;
        match (p.k0, p.e0) {
            (Some(k0), None) => Ok(k0),
            (None, Some(e0)) if e0 >= 0.0 => Ok(c.wavenumber(e0)),
            (None, Some(e0)) => Err(CliError::Config(format!("packet.e0 must be non-negative, got {e0}"))),
            (Some(_), Some(_)) => Err(CliError::Config("packet: e0 and k0 are mutually exclusive".into())),
            (None, None) => Err(CliError::Config("packet: one of e0 or k0 is required".into())),
        }
    }

    pub fn spectrum(&self, c: &PhysicalConstants) -> Result<Spectrum> {
        let l0 = self.packet()?.l0;
        let k0 = self.k0(c)?;
        let kgrid = match &self.grids.k {
            Some(r) => r.grid()?,
            None => default_kgrid(l0, k0)?,
        };
        Ok(gaussian_spectrum(l0, k0, kgrid)?)
    }

    pub fn snapshot_times(&self) -> Option<Vec<f64>> {
        self.packet.as_ref().and_then(|p| p.snapshots.clone())
    }

    pub fn scan(&self) -> Result<&ScanConfig> {
        self.scan.as_ref().ok_or_else(|| missing("scan"))
    }

    pub fn slit_config(&self) -> Result<SlitConfig> {
        let s = self.doubleslit.as_ref().ok_or_else(|| missing("doubleslit"))?;
        let cfg = SlitConfig {
            half_separation: s.half_separation,
            slit_width: s.slit_width,
            k: s.k,
            detector_distance: s.detector_distance,
            ygrid: UniformGrid::symmetric(s.y_half_width, s.y_half_intervals)?,
            xplanes: s.planes.clone().unwrap_or_else(|| vec![s.detector_distance]),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ScanConfig {
    pub fn axis(&self) -> ScanAxis {
        match self.axis {
            AxisName::Width => ScanAxis::Width,
            AxisName::Gap => ScanAxis::Gap,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        match (&self.values, &self.range) {
            (Some(v), None) => Ok(v.clone()),
            (None, Some(r)) => Ok(r.grid()?.to_vec()),
            _ => Err(CliError::Config("scan: give exactly one of values or range".into())),
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("missing [{section}] section"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toml(text: &str) -> Result<Scenario> {
        parse(text, Path::new("s.toml"))
    }

    #[test]
    fn reference_scenario_parses() {
        let s = toml(
            r#"
            mode = "times"
            [barrier]
            kind = "rectangular"
            a = 200.0
            b = 215.0
            v0 = 0.2
            [packet]
            l0 = 10.0
            e0 = 0.05
            "#,
        )
        .unwrap();
        let c = s.constants().unwrap();
        assert_eq!(s.mode, Some(Mode::Times));
        assert!((s.k0(&c).unwrap() - c.wavenumber(0.05)).abs() < 1e-15);
        assert_eq!(s.barrier().unwrap(), BarrierSpec::Rectangular { a: 200.0, b: 215.0, v0: 0.2 });
        assert_eq!(s.output.formats, all_formats());
    }

    #[test]
    fn json_encoding_is_accepted() {
        let s = parse(
            r#"{"barrier": {"kind": "delta", "a": 50.0, "w": 0.3}, "packet": {"l0": 5.0, "k0": 0.2}}"#,
            Path::new("s.json"),
        )
        .unwrap();
        assert_eq!(s.barrier().unwrap(), BarrierSpec::Delta { a: 50.0, w: 0.3 });
    }

    #[test]
    fn unknown_fields_name_the_field_and_line() {
        let err = toml("[packet]\nl0 = 10.0\nenergy = 0.05\n").unwrap_err().to_string();
        assert!(err.contains("energy") && err.contains("line 3"), "{err}");
        let err = toml("[barrier]\nkind = \"rectangular\"\na = 1.0\nb = 2.0\nv0 = 0.1\nw = 3.0\n").unwrap_err();
        assert!(err.to_string().contains('w'), "{err}");
    }

    #[test]
    fn energy_and_wavenumber_are_exclusive() {
        let s = toml("[packet]\nl0 = 10.0\ne0 = 0.05\nk0 = 0.3\n").unwrap();
        assert!(matches!(s.k0(&PhysicalConstants::default()), Err(CliError::Config(_))));
        let s = toml("[packet]\nl0 = 10.0\n").unwrap();
        assert!(matches!(s.k0(&PhysicalConstants::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_barrier_is_a_config_error() {
        let s = toml("[barrier]\nkind = \"rectangular\"\na = 5.0\nb = 1.0\nv0 = 0.1\n").unwrap();
        assert!(matches!(s.barrier(), Err(CliError::Config(_))));
        assert!(matches!(Scenario::default().barrier(), Err(CliError::Config(_))));
    }
}
