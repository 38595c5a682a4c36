//! Waveguide transmission from time-averaged Poynting flux.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

use super::geometry::{rasterize_in, GeometrySpec, Layout, DEFAULT_MARGIN_NM, DEFAULT_SOURCE_LEAD_NM};
use super::solver::{Execution, PmlSpec, PointSource, Simulation, Waveform};
use crate::error::{Error, Result};

/// Flux through the probe line at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxResult {
    pub wavelength_nm: f64,
    /// Time-averaged flux of the last averaging window.
    pub flux_raw: f64,
    /// Reference flux of the waveguide-only scene.
    pub flux_reference: f64,
    pub transmission: f64,
    pub converged: bool,
    /// Relative change between the last two windows.
    pub last_change: f64,
    pub cycles: f64,
}

/// Stop criterion for continuous-wave runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControl {
    pub ramp_cycles: f64,
    pub window_cycles: f64,
    /// Relative window-to-window change accepted as stationary.
    pub tolerance: f64,
    pub max_cycles: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            ramp_cycles: 10.0,
            window_cycles: 20.0,
            tolerance: 5e-3,
            max_cycles: 4000.0,
        }
    }
}

/// Geometry on a fixed grid with source and flux probe placement.
#[derive(Debug, Clone, PartialEq)]
pub struct FdtdScene {
    pub geometry: GeometrySpec,
    pub layout: Layout,
    pub pml: PmlSpec,
    /// Source position in scene coordinates (nm).
    pub source: (f64, f64),
    pub amplitude: f64,
    /// Probe line x position (nm) and its y span.
    pub probe_x: f64,
    pub probe_y: (f64, f64),
    pub control: RunControl,
    pub execution: Execution,
}

/// Half height of the default probe segment around the waveguide axis.
pub const DEFAULT_PROBE_HALF_SPAN_NM: f64 = 500.0;

impl FdtdScene {
    /// Grid sized around `geometry` with the source on the waveguide axis at
    /// the left end of the interior and the probe halfway through the right
    /// margin.
    pub fn new(geometry: GeometrySpec, cell: f64) -> Result<Self> {
        Self::with_pml(geometry, cell, PmlSpec::default())
    }

    pub fn with_pml(geometry: GeometrySpec, cell: f64, pml: PmlSpec) -> Result<Self> {
        geometry.validate()?;
        let wg = geometry
            .waveguide
            .ok_or_else(|| Error::Geometry("transmission scene needs a waveguide".into()))?;
        let layout = Layout::around(&geometry, cell, pml.cells, DEFAULT_MARGIN_NM, DEFAULT_SOURCE_LEAD_NM)?;
        let interior = layout.interior();
        let probe_x = interior.x_max - 0.5 * DEFAULT_MARGIN_NM;
        let half = DEFAULT_PROBE_HALF_SPAN_NM.max(wg.width);
        Ok(Self {
            geometry,
            layout,
            pml,
            source: (interior.x_min + DEFAULT_SOURCE_LEAD_NM, wg.y_center),
            amplitude: 1.0,
            probe_x,
            probe_y: (wg.y_center - half, wg.y_center + half),
            control: RunControl::default(),
            execution: Execution::Serial,
        })
    }

    /// The same grid, source and probe with only the waveguide.
    pub fn reference(&self) -> Self {
        Self {
            geometry: self.geometry.reference(),
            ..self.clone()
        }
    }

    pub fn with_geometry(&self, geometry: GeometrySpec) -> Self {
        Self {
            geometry,
            ..self.clone()
        }
    }

    pub fn cell(&self) -> f64 {
        self.layout.cell
    }

    fn source_cell(&self) -> Result<(usize, usize)> {
        let (i, j) = self
            .layout
            .cell_of(self.source.0, self.source.1)
            .ok_or_else(|| Error::Geometry("source outside the grid".into()))?;
        if !self.layout.in_interior_cells(i, j) {
            return Err(Error::Geometry("source inside the absorbing layer".into()));
        }
        Ok((i, j))
    }

    /// Ey column of the probe line and the Hz rows it spans.
    fn probe_cells(&self) -> Result<(usize, std::ops::Range<usize>)> {
        let l = &self.layout;
        let interior = l.interior();
        if !(self.probe_x > interior.x_min && self.probe_x < interior.x_max) {
            return Err(Error::Geometry("probe line outside the interior".into()));
        }
        if !(self.probe_y.0 >= interior.y_min && self.probe_y.1 <= interior.y_max && self.probe_y.0 < self.probe_y.1) {
            return Err(Error::Geometry("probe span outside the interior".into()));
        }
        let column = l.column_of(self.probe_x);
        let j0 = ((self.probe_y.0 - l.origin.1) / l.cell).floor() as usize;
        let j1 = ((self.probe_y.1 - l.origin.1) / l.cell).ceil() as usize;
        Ok((column, j0..j1.min(l.ny)))
    }

    /// Scene-level checks: geometry raster, source and probe placement, a
    /// probe line that crosses the waveguide and lies downstream of every
    /// other shape.
    pub fn validate(&self) -> Result<()> {
        self.source_cell()?;
        self.probe_cells()?;
        let wg = self
            .geometry
            .waveguide
            .ok_or_else(|| Error::Geometry("transmission scene needs a waveguide".into()))?;
        if !(self.probe_y.0 < wg.y_center && self.probe_y.1 > wg.y_center) {
            return Err(Error::Geometry("probe line does not cross the waveguide".into()));
        }
        let mut others = self.geometry.clone();
        others.waveguide = None;
        let b = others.bounds();
        if !b.is_empty() && self.probe_x <= b.x_max {
            return Err(Error::Geometry("probe line must lie downstream of the resonators".into()));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter("source amplitude must be positive".into()));
        }
        let c = &self.control;
        if !(c.window_cycles > 0.0 && c.tolerance > 0.0 && c.max_cycles >= c.ramp_cycles + 2.0 * c.window_cycles) {
            return Err(Error::InvalidParameter(
                "run control needs positive window and tolerance and room for two windows".into(),
            ));
        }
        Ok(())
    }

    fn simulation(&self, waveform: Waveform) -> Result<Simulation> {
        self.validate()?;
        let map = rasterize_in(&self.geometry, &self.layout)?;
        let source = PointSource {
            cell: self.source_cell()?,
            amplitude: self.amplitude,
            waveform,
        };
        let mut sim = Simulation::new(&map, self.pml, Some(source))?;
        sim.execution = self.execution;
        Ok(sim)
    }

    /// Cache key covering everything that affects a reference run.
    fn reference_key(&self, wavelength_nm: f64) -> String {
        let r = self.reference();
        format!(
            "{:?}|{:?}|{:?}|{:?}|{}|{:?}|{:?}|{:?}|{}",
            r.geometry, r.layout, r.pml, r.source, r.amplitude, r.probe_x, r.probe_y, r.control, wavelength_nm
        )
    }
}

/// Raw outcome of a single continuous-wave run.
#[derive(Debug, Clone)]
pub struct CwRun {
    pub flux: f64,
    pub converged: bool,
    pub last_change: f64,
    pub cycles: f64,
    pub simulation: Simulation,
}

fn check_wavelength(wavelength_nm: f64, cell: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
        return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength_nm}")));
    }
    Ok(wavelength_nm / cell)
}

/// Drives the scene at one wavelength until the window-averaged probe flux
/// is stationary or the cycle cap is reached.
pub fn run_cw(scene: &FdtdScene, wavelength_nm: f64) -> Result<CwRun> {
    let wavelength = check_wavelength(wavelength_nm, scene.cell())?;
    let c = scene.control;
    let mut sim = scene.simulation(Waveform::Continuous {
        wavelength,
        ramp_cycles: c.ramp_cycles,
    })?;
    let (column, rows) = scene.probe_cells()?;
    let period = wavelength;
    let dt = sim.dt();
    let steps_for = |cycles: f64| (cycles * period / dt).round().max(1.0) as usize;

    sim.run(steps_for(c.ramp_cycles))?;
    let window = steps_for(c.window_cycles);
    let max_steps = steps_for(c.max_cycles);
    let mut previous: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    loop {
        let mut acc = 0.0;
        for _ in 0..window {
            sim.step()?;
            acc += sim.flux_x(column, rows.clone());
        }
        let mean = acc / window as f64;
        if let Some(prev) = previous {
            last_change = if mean != 0.0 { ((mean - prev) / mean).abs() } else { f64::INFINITY };
        }
        previous = Some(mean);
        let cycles = sim.time() / period;
        if last_change < c.tolerance {
            return Ok(CwRun {
                flux: mean,
                converged: true,
                last_change,
                cycles,
                simulation: sim,
            });
        }
        if sim.steps() + window > max_steps {
            return Ok(CwRun {
                flux: mean,
                converged: false,
                last_change,
                cycles,
                simulation: sim,
            });
        }
    }
}

/// Reference flux per wavelength and reference scene.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    runs: Mutex<HashMap<String, CachedReference>>,
}

#[derive(Debug, Clone, Copy)]
struct CachedReference {
    flux: f64,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.runs.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn flux(&self, scene: &FdtdScene, wavelength_nm: f64) -> Result<f64> {
        let key = scene.reference_key(wavelength_nm);
        if let Some(hit) = self.runs.lock().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(hit.flux);
        }
        let run = run_cw(&scene.reference(), wavelength_nm)?;
        if !(run.flux > 0.0 && run.flux.is_finite()) {
            return Err(Error::Convergence {
                t_end: run.cycles,
                residual: run.last_change,
            });
        }
        if let Ok(mut m) = self.runs.lock() {
            m.insert(key, CachedReference { flux: run.flux });
        }
        Ok(run.flux)
    }
}

/// Normalized transmission at one wavelength. Unconverged runs are returned
/// with `converged = false`.
pub fn run_transmission(scene: &FdtdScene, wavelength_nm: f64, cache: &ReferenceCache) -> Result<FluxResult> {
    run_transmission_with_field(scene, wavelength_nm, cache).map(|(r, _)| r)
}

/// As [`run_transmission`], also returning the final Hz field.
pub fn run_transmission_with_field(
    scene: &FdtdScene,
    wavelength_nm: f64,
    cache: &ReferenceCache,
) -> Result<(FluxResult, Snapshot)> {
    let reference = cache.flux(scene, wavelength_nm)?;
    let run = run_cw(scene, wavelength_nm)?;
    if !run.flux.is_finite() {
        return Err(Error::Instability {
            step: run.simulation.steps(),
            magnitude: f64::INFINITY,
            limit: run.simulation.blowup_factor * scene.amplitude,
        });
    }
    let (nx, ny) = run.simulation.dims();
    let snapshot = Snapshot {
        nx,
        ny,
        cell: scene.cell(),
        origin: scene.layout.origin,
        field: "hz".into(),
        data: run.simulation.hz.clone(),
    };
    Ok((
        FluxResult {
            wavelength_nm,
            flux_raw: run.flux,
            flux_reference: reference,
            transmission: run.flux / reference,
            converged: run.converged,
            last_change: run.last_change,
            cycles: run.cycles,
        },
        snapshot,
    ))
}

/// Independent runs per wavelength; a failed wavelength does not stop the
/// others.
pub fn sweep_wavelength(scene: &FdtdScene, wavelengths_nm: &[f64], cache: &ReferenceCache) -> Vec<Result<FluxResult>> {
    match scene.execution {
        Execution::Serial => wavelengths_nm.iter().map(|l| run_transmission(scene, *l, cache)).collect(),
        Execution::ParallelRows => wavelengths_nm
            .par_iter()
            .map(|l| {
                let mut local = scene.clone();
                local.execution = Execution::Serial;
                run_transmission(&local, *l, cache)
            })
            .collect(),
    }
}

/// Uniform wavelength list including both ends.
pub fn wavelength_band(min_nm: f64, max_nm: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(min_nm > 0.0 && min_nm < max_nm && max_nm.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "wavelength band needs 0 < min < max and n >= 2, got [{min_nm}, {max_nm}] with {n}"
        )));
    }
    let last = (n - 1) as f64;
    Ok((0..n)
        .map(|k| (min_nm * (last - k as f64) + max_nm * k as f64) / last)
        .collect())
}

/// Spectral transmission from one pulsed run and its reference: running
/// Fourier transforms of Ey and Hz on the probe line at each wavelength.
/// Cheap survey of a band before continuous-wave runs.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpectrum {
    pub wavelengths_nm: Vec<f64>,
    pub flux: Vec<f64>,
    pub flux_reference: Vec<f64>,
    pub transmission: Vec<f64>,
}

/// Probe flux spectrum of one pulsed run, at each wavelength of the list.
/// The pulse is centered in the band with a spectral width covering it and
/// the run lasts `cycles` carrier periods.
pub fn pulse_flux(scene: &FdtdScene, wavelengths_nm: &[f64], cycles: f64) -> Result<Vec<f64>> {
    if wavelengths_nm.is_empty() {
        return Err(Error::InvalidParameter("empty wavelength list".into()));
    }
    if !(cycles > 0.0 && cycles.is_finite()) {
        return Err(Error::InvalidParameter(format!("pulse run length must be positive, got {cycles}")));
    }
    let cell = scene.cell();
    for l in wavelengths_nm {
        check_wavelength(*l, cell)?;
    }
    let f_min = wavelengths_nm.iter().map(|l| 1.0 / l).fold(f64::INFINITY, f64::min);
    let f_max = wavelengths_nm.iter().map(|l| 1.0 / l).fold(0.0, f64::max);
    let f_center = 0.5 * (f_min + f_max);
    let carrier = 1.0 / f_center / cell;
    // rms spectral width of half the band, at least 2% of the carrier
    let sigma_f = (0.5 * (f_max - f_min)).max(0.02 * f_center);
    let width_cycles = f_center / (2.0 * PI * sigma_f);
    let waveform = Waveform::Pulse {
        wavelength: carrier,
        width_cycles,
        delay_cycles: 5.0 * width_cycles,
    };

    let mut sim = scene.simulation(waveform)?;
    let (column, rows) = scene.probe_cells()?;
    let omegas: Vec<f64> = wavelengths_nm.iter().map(|l| 2.0 * PI * cell / l).collect();
    let n_rows = rows.len();
    let mut ey_hat = vec![Complex64::new(0.0, 0.0); omegas.len() * n_rows];
    let mut hz_hat = ey_hat.clone();
    let steps = (cycles * carrier / sim.dt()).round() as usize;
    let (nx, _) = sim.dims();
    let dt = sim.dt();
    let mut ey = vec![0.0; n_rows];
    let mut hz = vec![0.0; n_rows];
    for _ in 0..steps {
        // E sits half a step behind H after each step
        let t_h = (sim.steps() + 1) as f64 * dt;
        let t_e = t_h - 0.5 * dt;
        sim.step()?;
        for (r, j) in rows.clone().enumerate() {
            ey[r] = sim.ey_at(column, j);
            hz[r] = 0.5 * (sim.hz[j * nx + column - 1] + sim.hz[j * nx + column]);
        }
        for (w_idx, w) in omegas.iter().enumerate() {
            let pe = Complex64::from_polar(dt, -w * t_e);
            let ph = Complex64::from_polar(dt, -w * t_h);
            let base = w_idx * n_rows;
            for r in 0..n_rows {
                ey_hat[base + r] += pe * ey[r];
                hz_hat[base + r] += ph * hz[r];
            }
        }
    }
    Ok((0..omegas.len())
        .map(|w| {
            (0..n_rows)
                .map(|r| (ey_hat[w * n_rows + r] * hz_hat[w * n_rows + r].conj()).re)
                .sum()
        })
        .collect())
}

/// Pulsed scene run and its waveguide-only reference.
pub fn pulse_transmission(scene: &FdtdScene, wavelengths_nm: &[f64], cycles: f64) -> Result<PulseSpectrum> {
    let flux = pulse_flux(scene, wavelengths_nm, cycles)?;
    let flux_reference = pulse_flux(&scene.reference(), wavelengths_nm, cycles)?;
    Ok(PulseSpectrum::new(wavelengths_nm.to_vec(), flux, flux_reference))
}

impl PulseSpectrum {
    pub fn new(wavelengths_nm: Vec<f64>, flux: Vec<f64>, flux_reference: Vec<f64>) -> Self {
        let transmission = flux.iter().zip(&flux_reference).map(|(a, b)| a / b).collect();
        Self {
            wavelengths_nm,
            flux,
            flux_reference,
            transmission,
        }
    }
}

/// Field dump: flat little-endian f64, row-major with y as the row, plus a
/// text sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub cell: f64,
    pub origin: (f64, f64),
    pub field: String,
    pub data: Vec<f64>,
}

impl Snapshot {
    /// Writes `<stem>.bin` and `<stem>.txt`; returns both paths.
    pub fn write(&self, stem: &Path) -> Result<(PathBuf, PathBuf)> {
        let bin = stem.with_extension("bin");
        let txt = stem.with_extension("txt");
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&bin, bytes)?;
        let mut f = fs::File::create(&txt)?;
        writeln!(f, "field = {}", self.field)?;
        writeln!(f, "nx = {}", self.nx)?;
        writeln!(f, "ny = {}", self.ny)?;
        writeln!(f, "cell_nm = {}", self.cell)?;
        writeln!(f, "origin_nm = {}, {}", self.origin.0, self.origin.1)?;
        writeln!(f, "dtype = f64le")?;
        writeln!(f, "order = row-major, y rows")?;
        Ok((bin, txt))
    }

    pub fn read(stem: &Path) -> Result<Self> {
        let text = fs::read_to_string(stem.with_extension("txt"))?;
        let mut nx = None;
        let mut ny = None;
        let mut cell = None;
        let mut origin = None;
        let mut field = String::new();
        for line in text.lines() {
            let Some((k, v)) = line.split_once('=') else { continue };
            let v = v.trim();
            let bad = |_| Error::Io(format!("bad sidecar value for {}", k.trim()));
            match k.trim() {
                "field" => field = v.to_string(),
                "nx" => nx = Some(v.parse::<usize>().map_err(|_| Error::Io("bad nx".into()))?),
                "ny" => ny = Some(v.parse::<usize>().map_err(|_| Error::Io("bad ny".into()))?),
                "cell_nm" => cell = Some(v.parse::<f64>().map_err(bad)?),
                "origin_nm" => {
                    let (a, b) = v.split_once(',').ok_or_else(|| Error::Io("bad origin".into()))?;
                    origin = Some((
                        a.trim().parse::<f64>().map_err(bad)?,
                        b.trim().parse::<f64>().map_err(bad)?,
                    ));
                }
                _ => {}
            }
        }
        let (nx, ny, cell) = match (nx, ny, cell) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(Error::Io("incomplete snapshot sidecar".into())),
        };
        let bytes = fs::read(stem.with_extension("bin"))?;
        if bytes.len() != nx * ny * 8 {
            return Err(Error::Io(format!("snapshot has {} bytes, expected {}", bytes.len(), nx * ny * 8)));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self {
            nx,
            ny,
            cell,
            origin: origin.unwrap_or((0.0, 0.0)),
            field,
            data,
        })
    }
}
