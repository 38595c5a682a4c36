//! Dispatch of a parsed config to the computation modules.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use loopres_core::eigen::{eigen_report, periodicity};
use loopres_core::fdtd::{
    pulse_transmission, run_transmission_with_field, sweep_wavelength, wavelength_band, Execution, FdtdScene,
    FluxResult, GeometrySpec, ReferenceCache, RunControl,
};
use loopres_core::io as csv;
use loopres_core::perturb::expand_roundtrip;
use loopres_core::sensing::{apply_particle, apply_slab, shift_readout, ParticleScenario, SlabScenario, ShiftReport};
use loopres_core::spectra::{phase_average, sweep_grid, sweep_phase, DetuningGrid, Spectrum};
use loopres_core::{Error, LoopSystem};

use crate::config::{
    Command, ConfigError, FdtdBlock, FdtdMethod, ParticleBlock, RunConfig, SlabBlock, SweepBlock, Wavelengths,
};

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides the config's `output`.
    pub output: Option<PathBuf>,
    /// Single-threaded FDTD updates.
    pub serial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(ConfigError),
    Numerical(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Numerical(_) => "numerical",
            RunError::Io(_) => "io",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            RunError::Config(e) => e.line,
            _ => None,
        }
    }

    pub fn message(&self) -> String {
        match self {
            RunError::Config(e) => e.message.clone(),
            RunError::Numerical(m) | RunError::Io(m) => m.clone(),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            RunError::Numerical(e.to_string())
        } else if let Error::Io(m) = e {
            RunError::Io(m)
        } else {
            RunError::Config(ConfigError {
                line: None,
                message: e.to_string(),
            })
        }
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        line: None,
        message: message.into(),
    })
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub lines: Vec<String>,
    /// FDTD wavelengths whose flux did not settle before the cycle cap.
    pub unconverged: Vec<f64>,
}

impl Report {
    fn csv<F>(&mut self, dir: &Path, name: &str, write: F) -> Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w)?;
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn block<'a, T>(b: &'a Option<T>, name: &str) -> Result<&'a T, RunError> {
    b.as_ref().ok_or_else(|| invalid(format!("missing [{name}] section")))
}

fn grid(s: &SweepBlock) -> Result<DetuningGrid, RunError> {
    Ok(DetuningGrid::new(s.min, s.max, s.points)?)
}

fn system(config: &RunConfig) -> Result<LoopSystem, RunError> {
    let sys = block(&config.system, "system")?.build();
    sys.validate()?;
    Ok(sys)
}

pub fn run(config: &RunConfig, opts: &Options) -> Result<Report, RunError> {
    let dir = opts
        .output
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut report = Report::default();
    match config.command {
        Command::Spectrum => {
            let spec = sweep_grid(&system(config)?, &grid(block(&config.sweep, "sweep")?)?)?;
            report.csv(&dir, "spectrum.csv", |w| csv::write_spectrum(w, &spec))?;
            report.lines.push(range_line(&spec));
        }
        Command::PhaseSweep => {
            let p = block(&config.phase, "phase")?;
            let points = sweep_phase(&system(config)?, p.pair, p.delta, p.samples)?;
            report.csv(&dir, "phase_sweep.csv", |w| csv::write_phase_sweep(w, &points))?;
            let t: Vec<f64> = points.iter().map(|q| q.transmission).collect();
            report.lines.push(format!(
                "T over phi{}: {:.6} .. {:.6}",
                p.pair,
                t.iter().cloned().fold(f64::INFINITY, f64::min),
                t.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            ));
        }
        Command::Average => {
            let p = block(&config.phase, "phase")?;
            let spec = phase_average(&system(config)?, p.pair, &grid(block(&config.sweep, "sweep")?)?, p.samples)?;
            report.csv(&dir, "average.csv", |w| csv::write_spectrum(w, &spec))?;
            report.lines.push(range_line(&spec));
        }
        Command::Eigen => {
            let e = eigen_report(&system(config)?)?;
            report.csv(&dir, "eigen.csv", |w| csv::write_eigen_report(w, &e))?;
            let energies: Vec<String> = e.energies.iter().map(|z| format!("{z:.6}")).collect();
            report.lines.push(format!("energies {}", energies.join(" ")));
        }
        Command::Periodicity => {
            let p = block(&config.periodicity, "periodicity")?;
            let r = periodicity(&system(config)?, p.pair, p.samples)?;
            report.csv(&dir, "eigen_curves.csv", |w| csv::write_eigen_curves(w, &r))?;
            report.csv(&dir, "power.csv", |w| csv::write_power(w, &r))?;
            report.lines.push(format!("classification {}", r.classification.name()));
            report.lines.extend(r.warnings.iter().map(|w| format!("warning {w}")));
        }
        Command::Taylor => {
            let t = block(&config.taylor, "taylor")?;
            let expansion = expand_roundtrip(&system(config)?, &grid(block(&config.sweep, "sweep")?)?)?;
            let rows = expansion.compare(t.x)?;
            report.csv(&dir, "expansion.csv", |w| csv::write_expansion(w, &rows))?;
            let err = rows.iter().map(|r| (r.t_expanded - r.t_full).abs()).fold(0.0, f64::max);
            report.lines.push(format!("max |T_expanded - T| at x = {}: {err:.6}", t.x));
        }
        Command::SenseParticle => {
            let p = block(&config.particle, "particle")?;
            let sys = system(config)?;
            let g = grid(block(&config.sweep, "sweep")?)?;
            let at = |theta: f64| -> Result<Spectrum, RunError> {
                let moved = apply_particle(&sys, &particle(p, theta), p.compose)?;
                Ok(sweep_grid(&moved, &g)?)
            };
            let shifts = sense(&dir, &mut report, at(p.theta)?, at(p.theta_perturbed)?, p.prominence)?;
            report.lines.push(shift_line(&shifts, g.step()));
        }
        Command::SenseSlab => {
            let s = block(&config.slab, "slab")?;
            let sys = system(config)?;
            let g = grid(block(&config.sweep, "sweep")?)?;
            let at = |eps: f64| -> Result<Spectrum, RunError> {
                let changed = apply_slab(&sys, &slab(s, eps))?;
                Ok(sweep_grid(&changed, &g)?)
            };
            let shifts = sense(&dir, &mut report, at(s.eps)?, at(s.eps_perturbed)?, s.prominence)?;
            report.lines.push(shift_line(&shifts, g.step()));
        }
        Command::FdtdRun | Command::FdtdSweep => fdtd(config, opts, &dir, &mut report)?,
    }
    Ok(report)
}

fn range_line(spec: &Spectrum) -> String {
    let t = spec.transmission();
    format!(
        "{} points, T in [{:.6}, {:.6}]",
        t.len(),
        t.iter().cloned().fold(f64::INFINITY, f64::min),
        t.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    )
}

fn particle(p: &ParticleBlock, theta_deg: f64) -> ParticleScenario {
    ParticleScenario {
        resonator: p.resonator,
        theta: theta_deg.to_radians(),
        mode_number: p.mode_number,
        contrast: p.contrast,
        strength: p.strength,
    }
}

fn slab(s: &SlabBlock, eps: f64) -> SlabScenario {
    SlabScenario {
        pair: s.pair,
        xi_background: s.background.value(),
        xi_slab_ref: s.reference.value(),
        eps_ref: s.eps_ref,
        eps_background: s.eps_background,
        eps,
    }
}

fn sense(
    dir: &Path,
    report: &mut Report,
    baseline: Spectrum,
    perturbed: Spectrum,
    prominence: f64,
) -> Result<ShiftReport, RunError> {
    let shifts = shift_readout(&baseline, &perturbed, prominence)?;
    report.csv(dir, "baseline.csv", |w| csv::write_spectrum(w, &baseline))?;
    report.csv(dir, "perturbed.csv", |w| csv::write_spectrum(w, &perturbed))?;
    report.csv(dir, "shifts.csv", |w| csv::write_shifts(w, &shifts))?;
    Ok(shifts)
}

fn shift_line(shifts: &ShiftReport, step: f64) -> String {
    let moved = shifts.matched.iter().filter(|m| m.shift.abs() > step).count();
    format!(
        "{} matched features, {moved} moved by more than one grid step, max |shift| {:.6}",
        shifts.matched.len(),
        shifts.max_abs_shift()
    )
}

fn resonator_index(n: usize) -> Result<usize, RunError> {
    if (1..=3).contains(&n) {
        Ok(n - 1)
    } else {
        Err(invalid(format!("resonator must be 1..=3, got {n}")))
    }
}

fn scene(f: &FdtdBlock, opts: &Options) -> Result<FdtdScene, RunError> {
    let mut geometry = GeometrySpec::loop_scene();
    if let Some((n, theta, eps)) = f.particle {
        geometry = geometry.with_particle(resonator_index(n)?, theta, eps);
    }
    if let Some((a, b, eps)) = f.slab {
        geometry = geometry.with_slab((resonator_index(a)?, resonator_index(b)?), eps);
    }
    let mut scene = FdtdScene::new(geometry, f.cell)?;
    scene.control = RunControl {
        ramp_cycles: f.ramp_cycles,
        window_cycles: f.window_cycles,
        tolerance: f.tolerance,
        max_cycles: f.max_cycles,
    };
    scene.execution = if opts.serial || rayon::current_num_threads() == 1 {
        Execution::Serial
    } else {
        Execution::ParallelRows
    };
    scene.validate()?;
    Ok(scene)
}

fn fdtd(config: &RunConfig, opts: &Options, dir: &Path, report: &mut Report) -> Result<(), RunError> {
    let f = block(&config.fdtd, "fdtd")?;
    let scene = scene(f, opts)?;
    let wavelengths = match &f.wavelengths {
        Wavelengths::List(l) => l.clone(),
        Wavelengths::Band { min, max, points } => wavelength_band(*min, *max, *points)?,
    };
    if wavelengths.is_empty() {
        return Err(invalid("no wavelengths given"));
    }
    if config.command == Command::FdtdRun && wavelengths.len() != 1 {
        return Err(invalid(format!("fdtd-run takes exactly one wavelength, got {}", wavelengths.len())));
    }
    if f.snapshot && (config.command != Command::FdtdRun || f.method != FdtdMethod::Continuous) {
        return Err(invalid("snapshots are written by continuous-wave fdtd-run only"));
    }
    let results: Vec<FluxResult> = match f.method {
        FdtdMethod::Pulse => {
            let spec = pulse_transmission(&scene, &wavelengths, f.pulse_cycles)?;
            (0..wavelengths.len())
                .map(|k| FluxResult {
                    wavelength_nm: spec.wavelengths_nm[k],
                    flux_raw: spec.flux[k],
                    flux_reference: spec.flux_reference[k],
                    transmission: spec.transmission[k],
                    converged: true,
                    last_change: 0.0,
                    cycles: f.pulse_cycles,
                })
                .collect()
        }
        FdtdMethod::Continuous => {
            let cache = ReferenceCache::new();
            if config.command == Command::FdtdRun {
                let (result, snapshot) = run_transmission_with_field(&scene, wavelengths[0], &cache)?;
                if f.snapshot {
                    let (bin, txt) = snapshot.write(&dir.join("hz"))?;
                    report.files.push(bin);
                    report.files.push(txt);
                }
                vec![result]
            } else {
                sweep_wavelength(&scene, &wavelengths, &cache)
                    .into_iter()
                    .collect::<Result<Vec<_>, _>>()?
            }
        }
    };
    report.csv(dir, "flux.csv", |w| csv::write_flux(w, &results))?;
    for r in &results {
        report.lines.push(format!(
            "lambda {:.4} nm: T = {:.6}{}",
            r.wavelength_nm,
            r.transmission,
            if r.converged { "" } else { " (not converged)" }
        ));
    }
    report.unconverged = results.iter().filter(|r| !r.converged).map(|r| r.wavelength_nm).collect();
    Ok(())
}
