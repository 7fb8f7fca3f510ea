//! One function per mode. Each returns its artifacts in memory; files are
//! written afterwards, one at a time.

use std::sync::Arc;

use rayon::prelude::*;
use subscatter_core::barrier::{scattering_coeffs, BarrierSpec};
use subscatter_core::doubleslit::{mirror_diagnostic, norms as slit_norms, two_slit_field};
use subscatter_core::numerics::{PhysicalConstants, SegmentedGrid};
use subscatter_core::subprocess::{in_amplitudes, Kind};
use subscatter_core::timing::{cmt_times, dwell_times, hartman_scan, phase_derivatives, timing_report};
use subscatter_core::validation;
use subscatter_core::wavepacket::{default_horizon, packet_grid, sample_times, Evolver, Spectrum, DEFAULT_TIME_STEPS};
use subscatter_core::Error;

use crate::config::{Format, Mode, Scenario};
use crate::error::{CliError, Result};
use crate::svg::{emit_svg, PlotSpec, Series, Style};
use crate::table::{flat_json, Cell, Meta, Table};

/// Largest number of x-nodes written per density snapshot.
const SNAPSHOT_ROWS: usize = 2000;
/// Points of the default stationary k-range.
const STATIONARY_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Everything a mode produced, plus text for standard output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
    pub failure: Option<CliError>,
}

struct Sink<'a> {
    meta: &'a Meta,
    formats: &'a [Format],
    artifacts: Vec<Artifact>,
}

impl Sink<'_> {
    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn add(&mut self, name: String, contents: String) {
        self.artifacts.push(Artifact { name, contents });
    }

    /// `stem.csv` and `stem.json` as requested, and the plot as `stem.svg`.
    fn table(&mut self, stem: &str, title: &str, table: &Table, plot: Option<&PlotSpec>) -> Result<()> {
        if self.wants(Format::Csv) {
            self.add(format!("{stem}.csv"), table.to_csv(self.meta, title));
        }
        if self.wants(Format::Json) {
            self.add(format!("{stem}.json"), table.to_json(self.meta, title));
        }
        if let (true, Some(spec)) = (self.wants(Format::Svg), plot) {
            self.add(format!("{stem}.svg"), emit_svg(table, spec)?);
        }
        Ok(())
    }
}

pub fn run(mode: Mode, scenario: &Scenario, meta: &Meta, formats: &[Format]) -> Result<Outcome> {
    let mut sink = Sink { meta, formats, artifacts: Vec::new() };
    let c = scenario.constants()?;
    let mut failure = None;
    let summary = match mode {
        Mode::Stationary => stationary(scenario, &c, &mut sink)?,
        Mode::Packet => packet(scenario, &c, &mut sink)?,
        Mode::Times => times(scenario, &c, &mut sink)?,
        Mode::Scan => scan(scenario, &c, &mut sink)?,
        Mode::Doubleslit => doubleslit(scenario, &mut sink)?,
        Mode::Validate => {
            let (text, failed) = validate(&c, &mut sink)?;
            if !failed.is_empty() {
                failure = Some(CliError::ValidationFailed(failed));
            }
            text
        }
    };
    Ok(Outcome { artifacts: sink.artifacts, summary, failure })
}

fn stationary(s: &Scenario, c: &PhysicalConstants, sink: &mut Sink) -> Result<String> {
    let barrier = s.barrier()?;
    let ks: Vec<f64> = match &s.grids.k {
        Some(r) => r.grid()?.to_vec(),
        None => {
            let spectrum = s.spectrum(c)?;
            let half = 4.0 * spectrum.width();
            let lo = (spectrum.k0() - half).max(1e-3 * spectrum.k0());
            let n = STATIONARY_POINTS - 1;
            (0..=n).map(|i| lo + (spectrum.k0() + half - lo) * i as f64 / n as f64).collect()
        }
    };
    if ks.iter().any(|k| !(*k > 0.0)) {
        return Err(CliError::Config("stationary mode needs positive wavenumbers".into()));
    }
    let rows: Vec<Vec<Cell>> = ks
        .par_iter()
        .map(|&k| -> Result<Vec<Cell>> {
            let coeffs = scattering_coeffs(&barrier, k, c)?;
            let amps = in_amplitudes(&coeffs);
            let pd = phase_derivatives(&barrier, k, c)?;
            let (tr, rf) = dwell_times(&barrier, k, c)?;
            let (phase, dwell) = cmt_times(&barrier, k, c)?;
            Ok(vec![
                k.into(),
                c.energy(k).into(),
                coeffs.t.into(),
                coeffs.r.into(),
                coeffs.j.into(),
                amps.lambda.into(),
                pd.effective_width().into(),
                pd.start_point().into(),
                tr.into(),
                rf.into(),
                phase.into(),
                dwell.into(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "k", "energy", "T", "R", "phase_tr", "phase_ref", "d_eff", "x_start", "tau_tr_dwell", "tau_ref_dwell",
        "cmt_phase", "cmt_dwell",
    ]);
    table.rows = rows;
    let plot = PlotSpec::new(
        "Transmission and reflection probabilities",
        "energy",
        "probability",
        vec![Series::new("T", Style::Line), Series::new("R", Style::Dashed)],
    );
    sink.table("stationary", "stationary scattering per wavenumber (nm, eV, ps)", &table, Some(&plot))?;
    Ok(format!("stationary: {} wavenumbers", table.rows.len()))
}

fn packet_evolver(s: &Scenario, spectrum: &Spectrum, barrier: &BarrierSpec, horizon: f64, c: &PhysicalConstants) -> Result<Evolver> {
    let grid = match &s.grids.x {
        None => packet_grid(spectrum, barrier, horizon, c)?,
        Some(x) => {
            let mut breaks = vec![x.start];
            breaks.extend(barrier.interfaces());
            breaks.push(barrier.midpoint());
            breaks.push(x.stop);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            if breaks[0] != x.start || breaks[breaks.len() - 1] != x.stop {
                return Err(CliError::Config("grids.x must enclose the barrier".into()));
            }
            SegmentedGrid::new(&breaks, &vec![x.spacing; breaks.len() - 1])?
        }
    };
    Ok(Evolver::new(spectrum, barrier, Arc::new(grid), c)?)
}

fn horizon_and_steps(s: &Scenario, spectrum: &Spectrum, barrier: &BarrierSpec, c: &PhysicalConstants) -> Result<(f64, usize)> {
    let t = s.grids.t.unwrap_or(crate::config::TimeGrid { stop: None, steps: None });
    let horizon = match t.stop {
        Some(h) => h,
        None => default_horizon(spectrum, barrier, c)?,
    };
    Ok((horizon, t.steps.unwrap_or(DEFAULT_TIME_STEPS)))
}

/// Centroid of one sub-packet, or a label when it has no mass.
fn centroid(ev: &Evolver, kind: Kind, t: f64) -> Result<(Cell, f64)> {
    match ev.centroid(kind, t) {
        Ok((x, n)) => Ok((Cell::Num(x), n)),
        Err(Error::Undefined(_)) => Ok((Cell::Label("undefined"), 0.0)),
        Err(e) => Err(e.into()),
    }
}

fn packet(s: &Scenario, c: &PhysicalConstants, sink: &mut Sink) -> Result<String> {
    let barrier = s.barrier()?;
    let spectrum = s.spectrum(c)?;
    let (horizon, steps) = horizon_and_steps(s, &spectrum, &barrier, c)?;
    let ev = packet_evolver(s, &spectrum, &barrier, horizon, c)?;
    let times = sample_times(0.0, horizon, steps)?;

    // A free packet with the transmitted spectrum moves at (ħ/m)⟨k⟩_tr.
    let kg = spectrum.kgrid();
    let (mut mass, mut first) = (0.0, 0.0);
    for (j, k) in kg.points().enumerate() {
        if k > 0.0 {
            let w = spectrum.amplitudes()[j].norm_sqr() * kg.weight(j) * scattering_coeffs(&barrier, k, c)?.t;
            mass += w;
            first += w * k;
        }
    }
    let v_tr = if mass > 0.0 { Some(c.velocity(first / mass)) } else { None };
    let x_tr0 = centroid(&ev, Kind::Transmission, 0.0)?.0.number();

    let rows: Vec<Vec<Cell>> = times
        .par_iter()
        .map(|&t| -> Result<Vec<Cell>> {
            let norms = ev.norms(t)?;
            let (x_tr, _) = centroid(&ev, Kind::Transmission, t)?;
            let (x_ref, _) = centroid(&ev, Kind::Reflection, t)?;
            let (x_full, _) = centroid(&ev, Kind::Full, t)?;
            let free_tr = x_tr0.zip(v_tr).map(|(x0, v)| x0 + v * t);
            Ok(vec![
                t.into(),
                x_tr,
                free_tr.into(),
                x_ref,
                x_full,
                (c.velocity(spectrum.k0()) * t).into(),
                norms.transmission.into(),
                norms.reflection.into(),
            ])
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["t", "x_tr", "x_free_tr", "x_ref", "x_full", "x_free", "T_t", "R_t"]);
    table.rows = rows;
    let mut plot = PlotSpec::new(
        "Centroid of the transmitted packet and of its free counterpart",
        "t",
        "position (nm)",
        vec![Series::new("x_tr", Style::Points), Series::new("x_free_tr", Style::Dashed)],
    );
    plot.hlines = vec![(barrier.left(), "a".into()), (barrier.right(), "b".into())];
    sink.table("trajectory", "sub-packet centroids and norms (nm, ps)", &table, Some(&plot))?;

    let snap_times = s.snapshot_times().unwrap_or_else(|| vec![0.0, 0.5 * horizon, horizon]);
    let mut snaps = Table::new(&["t", "x", "density_tr", "density_ref", "density_full"]);
    for &t in &snap_times {
        let tr = ev.snapshot(Kind::Transmission, t, false)?;
        let rf = ev.snapshot(Kind::Reflection, t, false)?;
        let stride = tr.xs().len().div_ceil(SNAPSHOT_ROWS).max(1);
        for i in (0..tr.xs().len()).step_by(stride) {
            let (p, q) = (tr.psi()[i], rf.psi()[i]);
            snaps.push(vec![
                t.into(),
                tr.xs()[i].into(),
                p.norm_sqr().into(),
                q.norm_sqr().into(),
                (p + q).norm_sqr().into(),
            ]);
        }
    }
    sink.table("snapshots", "sub-packet densities (1/nm)", &snaps, None)?;
    Ok(format!("packet: {} times up to {horizon:.6} ps, {} snapshots", times.len(), snap_times.len()))
}

fn times(s: &Scenario, c: &PhysicalConstants, sink: &mut Sink) -> Result<String> {
    let report = timing_report(&s.spectrum(c)?, &s.barrier()?, c)?;
    let entries: Vec<(&'static str, Cell)> = report.entries().iter().map(|(k, v)| (*k, (*v).into())).collect();
    if sink.wants(Format::Json) {
        sink.add("times.json".into(), flat_json(sink.meta, &entries));
    }
    if sink.wants(Format::Csv) {
        let mut t = Table::new(&["quantity", "value"]);
        t.rows = entries.iter().map(|(k, v)| vec![Cell::Label(k), *v]).collect();
        sink.add("times.csv".into(), t.to_csv(sink.meta, "characteristic times (ps) and lengths (nm)"));
    }
    let mut text = String::new();
    for (k, v) in &entries {
        let value = match v {
            Cell::Num(x) => crate::table::format_number(*x),
            Cell::Label(l) => l.to_string(),
        };
        text.push_str(&format!("{k} = {value}\n"));
    }
    Ok(text.trim_end().into())
}

fn scan(s: &Scenario, c: &PhysicalConstants, sink: &mut Sink) -> Result<String> {
    let cfg = s.scan()?;
    let template = s.barrier()?;
    let k = match (cfg.energy, cfg.k) {
        (Some(e), None) => c.wavenumber(e),
        (None, Some(k)) => k,
        (None, None) => s.k0(c)?,
        (Some(_), Some(_)) => return Err(CliError::Config("scan: energy and k are mutually exclusive".into())),
    };
    let rows = hartman_scan(&template, cfg.axis(), &cfg.values()?, k, c)?;
    let mut table = Table::new(&[
        "param", "tau_ph", "cmt_dwell", "tau_tr_dwell", "tau_ref_dwell", "tau_as", "d_eff", "tau_gap",
    ]);
    for r in &rows {
        table.push(vec![
            r.param.into(),
            r.tau_ph.into(),
            r.cmt_dwell.into(),
            r.tau_tr_dwell.into(),
            r.tau_ref_dwell.into(),
            r.tau_as.into(),
            r.d_eff.into(),
            r.tau_gap.into(),
        ]);
    }
    let mut plot = PlotSpec::new(
        "Phase time saturates, dwell time grows",
        "param",
        "time (ps)",
        vec![
            Series::new("tau_ph", Style::Line),
            Series::new("cmt_dwell", Style::Dashed),
            Series::new("tau_tr_dwell", Style::Points),
        ],
    );
    plot.log_y = true;
    sink.table("scan", "characteristic times against the scanned dimension (nm, ps)", &table, Some(&plot))?;
    Ok(format!("scan: {} rows at k = {k:.6} 1/nm", rows.len()))
}

fn doubleslit(s: &Scenario, sink: &mut Sink) -> Result<String> {
    let cfg = s.slit_config()?;
    let mut diag = Table::new(&[
        "x", "two_slit", "lower", "upper", "one_slit_average", "partition_mismatch", "one_slit_mismatch",
    ]);
    for (i, &x) in cfg.xplanes.iter().enumerate() {
        let field = two_slit_field(&cfg, x)?;
        let jy = field.current_y().ok();
        let mut t = Table::new(&["y", "re", "im", "intensity", "current_y"]);
        for (j, (y, v)) in field.ys.iter().zip(&field.values).enumerate() {
            t.push(vec![(*y).into(), v.re.into(), v.im.into(), v.norm_sqr().into(), jy.as_ref().map(|j_| j_[j]).into()]);
        }
        let plot = PlotSpec::new(&format!("Two-slit intensity at x = {x}"), "y", "intensity", vec![Series::new("intensity", Style::Line)]);
        sink.table(&format!("plane{i}"), &format!("two-slit field at x = {x} (units of 1/k)"), &t, Some(&plot))?;
        let n = slit_norms(&cfg, x)?;
        diag.push(vec![
            x.into(),
            n.two_slit.into(),
            n.lower.into(),
            n.upper.into(),
            n.one_slit_average.into(),
            n.partition_mismatch().into(),
            n.one_slit_mismatch().into(),
        ]);
    }
    let mirror = mirror_diagnostic(&cfg, &cfg.xplanes)?;
    if sink.wants(Format::Csv) {
        sink.add("norms.csv".into(), diag.to_csv(sink.meta, "norms per plane"));
    }
    if sink.wants(Format::Json) {
        let mut entries = vec![
            ("evenness".to_string(), Cell::Num(mirror.evenness)),
            ("transverse_current".to_string(), Cell::Num(mirror.transverse_current)),
        ];
        for (i, row) in diag.rows.iter().enumerate() {
            for (name, cell) in diag.columns.iter().zip(row) {
                entries.push((format!("plane{i}_{name}"), *cell));
            }
        }
        sink.add("doubleslit.json".into(), flat_json(sink.meta, &entries));
    }
    Ok(format!(
        "doubleslit: {} planes, evenness {:.3e}, |J_y(0)| {:.3e}",
        cfg.xplanes.len(),
        mirror.evenness,
        mirror.transverse_current
    ))
}

fn validate(c: &PhysicalConstants, sink: &mut Sink) -> Result<(String, Vec<u32>)> {
    let outcomes = validation::run_all(c)?;
    let report = validation::format_report(&outcomes, false);
    sink.add("validation.txt".into(), report);
    if sink.wants(Format::Json) {
        let mut entries = Vec::new();
        for o in &outcomes {
            entries.push((format!("criterion{}_passed", o.id), Cell::Label(if o.passed { "pass" } else { "fail" })));
        }
        sink.add("validation.json".into(), flat_json(sink.meta, &entries));
    }
    let failed = outcomes.iter().filter(|o| !o.ok()).map(|o| o.id).collect();
    Ok((validation::format_report(&outcomes, true).trim_end().into(), failed))
}
