//! Yee-grid leapfrog for the (Ex, Ey, Hz) field set with split-field
//! absorbing layers.
//!
//! Internal units: the cell size is 1 and c = 1, so a time step is the
//! Courant number. Hz is split everywhere into Hzx + Hzy; outside the
//! absorbing layers both halves see zero loss and the split is exact.
//!
//! Staggering, with `i` along x and `j` along y:
//! - Hz at cell centers `(i+½, j+½)`, `nx × ny`
//! - Ex at `(i+½, j)`, `nx × (ny+1)`
//! - Ey at `(i, j+½)`, `(nx+1) × ny`
//!
//! All arrays are row-major with `j` as the row. The outermost E samples
//! are held at zero (conducting walls behind the absorbing layers).

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;

use super::geometry::PermittivityMap;
use crate::error::{Error, Result};

/// Stable time step for the 2D Yee scheme, with a 0.99 safety factor.
pub const COURANT: f64 = 0.99 / SQRT_2;

/// Graded absorbing layer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlSpec {
    pub cells: usize,
    /// Polynomial grading order.
    pub order: f64,
    /// Target normal-incidence reflection of the layer.
    pub reflection: f64,
}

impl Default for PmlSpec {
    fn default() -> Self {
        Self {
            cells: 10,
            order: 3.0,
            reflection: 1e-6,
        }
    }
}

impl PmlSpec {
    /// Loss rate at depth `d` cells into a layer of thickness `cells`, for a
    /// reflection target assuming propagation at c.
    fn rate(&self, depth: f64) -> f64 {
        if self.cells == 0 || depth <= 0.0 {
            return 0.0;
        }
        let thickness = self.cells as f64;
        let s_max = -(self.order + 1.0) * self.reflection.ln() / (2.0 * thickness);
        s_max * (depth.min(thickness) / thickness).powf(self.order)
    }

    /// Loss profile along an axis with `n` cells, sampled at `offset + k`
    /// for `k = 0..len` (offset 0 for cell faces, 0.5 for cell centers).
    fn profile(&self, n: usize, offset: f64, len: usize) -> Vec<f64> {
        let t = self.cells as f64;
        (0..len)
            .map(|k| {
                let u = k as f64 + offset;
                let depth = (t - u).max(u - (n as f64 - t)).max(0.0);
                self.rate(depth)
            })
            .collect()
    }
}

/// Exponential time-stepping coefficients `(decay, gain)` for
/// `∂f/∂t + s·f = g`.
fn exp_coeffs(rate: f64, dt: f64) -> (f64, f64) {
    if rate == 0.0 {
        (1.0, dt)
    } else {
        let a = (-rate * dt).exp();
        (a, (1.0 - a) / rate)
    }
}

/// Time dependence of a point source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    /// `sin(ω t)` with a raised-cosine turn-on over `ramp_cycles`.
    Continuous { wavelength: f64, ramp_cycles: f64 },
    /// Gaussian-modulated `sin(ω (t − t₀))` with `t₀ = delay_cycles` periods
    /// and rms duration `width_cycles` periods.
    Pulse {
        wavelength: f64,
        width_cycles: f64,
        delay_cycles: f64,
    },
}

impl Waveform {
    /// Vacuum (carrier) wavelength in cells.
    pub fn wavelength(&self) -> f64 {
        match *self {
            Waveform::Continuous { wavelength, .. } | Waveform::Pulse { wavelength, .. } => wavelength,
        }
    }
}

/// Point source adding `amplitude · waveform(t)` to Hz in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub cell: (usize, usize),
    pub amplitude: f64,
    pub waveform: Waveform,
}

impl PointSource {
    pub fn continuous(cell: (usize, usize), wavelength: f64, amplitude: f64, ramp_cycles: f64) -> Self {
        Self {
            cell,
            amplitude,
            waveform: Waveform::Continuous {
                wavelength,
                ramp_cycles,
            },
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.waveform.wavelength()
    }

    /// Carrier period (c = 1).
    pub fn period(&self) -> f64 {
        self.waveform.wavelength()
    }

    pub fn value(&self, t: f64) -> f64 {
        let period = self.period();
        let shape = match self.waveform {
            Waveform::Continuous { ramp_cycles, .. } => {
                let ramp_time = ramp_cycles * period;
                let ramp = if t >= ramp_time || ramp_time <= 0.0 {
                    1.0
                } else if t <= 0.0 {
                    0.0
                } else {
                    0.5 * (1.0 - (PI * t / ramp_time).cos())
                };
                (self.omega() * t).sin() * ramp
            }
            Waveform::Pulse {
                width_cycles,
                delay_cycles,
                ..
            } => {
                let tau = t - delay_cycles * period;
                let w = width_cycles * period;
                (-0.5 * (tau / w).powi(2)).exp() * (self.omega() * tau).sin()
            }
        };
        self.amplitude * shape
    }
}

/// Serial updates are the reference; row-parallel updates perform the same
/// per-cell arithmetic and give identical fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    ParallelRows,
}

/// Field state and update coefficients.
#[derive(Debug, Clone)]
pub struct Simulation {
    nx: usize,
    ny: usize,
    dt: f64,
    step: usize,
    pub execution: Execution,
    source: Option<PointSource>,
    /// Abort threshold as a multiple of the source amplitude.
    pub blowup_factor: f64,

    pub hzx: Vec<f64>,
    pub hzy: Vec<f64>,
    pub hz: Vec<f64>,
    pub ex: Vec<f64>,
    pub ey: Vec<f64>,

    // Hz halves: x-profile at i+½ per column, y-profile at j+½ per row
    hx_decay: Vec<f64>,
    hx_gain: Vec<f64>,
    hy_decay: Vec<f64>,
    hy_gain: Vec<f64>,
    // Ex: y-profile at j per row, gain/ε per sample
    ex_decay: Vec<f64>,
    ex_coeff: Vec<f64>,
    // Ey: x-profile at i per column, gain/ε per sample
    ey_decay: Vec<f64>,
    ey_coeff: Vec<f64>,
}

impl Simulation {
    pub fn new(map: &PermittivityMap, pml: PmlSpec, source: Option<PointSource>) -> Result<Self> {
        let nx = map.layout.nx;
        let ny = map.layout.ny;
        if nx < 2 || ny < 2 {
            return Err(Error::Geometry("grid needs at least 2×2 cells".into()));
        }
        if map.eps.iter().any(|e| !(*e >= 1.0)) {
            return Err(Error::Geometry("permittivity must be >= 1 everywhere".into()));
        }
        if let Some(s) = &source {
            if s.cell.0 >= nx || s.cell.1 >= ny {
                return Err(Error::Geometry("source outside the grid".into()));
            }
            if !(s.waveform.wavelength() > 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "wavelength of {} cells is below the grid Nyquist limit",
                    s.waveform.wavelength()
                )));
            }
        }
        let dt = COURANT;
        let eps = |i: usize, j: usize| map.eps[j * nx + i];

        let split = |rates: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
            rates.into_iter().map(|r| exp_coeffs(r, dt)).unzip()
        };
        let (hx_decay, hx_gain) = split(pml.profile(nx, 0.5, nx));
        let (hy_decay, hy_gain) = split(pml.profile(ny, 0.5, ny));
        let (ex_decay, ex_gain) = split(pml.profile(ny, 0.0, ny + 1));
        let (ey_decay, ey_gain) = split(pml.profile(nx, 0.0, nx + 1));

        let mut ex_coeff = vec![0.0; nx * (ny + 1)];
        for j in 1..ny {
            for i in 0..nx {
                let e = 0.5 * (eps(i, j - 1) + eps(i, j));
                ex_coeff[j * nx + i] = ex_gain[j] / e;
            }
        }
        let mut ey_coeff = vec![0.0; (nx + 1) * ny];
        for j in 0..ny {
            for i in 1..nx {
                let e = 0.5 * (eps(i - 1, j) + eps(i, j));
                ey_coeff[j * (nx + 1) + i] = ey_gain[i] / e;
            }
        }

        Ok(Self {
            nx,
            ny,
            dt,
            step: 0,
            execution: Execution::Serial,
            source,
            blowup_factor: 1e6,
            hzx: vec![0.0; nx * ny],
            hzy: vec![0.0; nx * ny],
            hz: vec![0.0; nx * ny],
            ex: vec![0.0; nx * (ny + 1)],
            ey: vec![0.0; (nx + 1) * ny],
            hx_decay,
            hx_gain,
            hy_decay,
            hy_gain,
            ex_decay,
            ex_coeff,
            ey_decay,
            ey_coeff,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    /// Time of the current Hz samples.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn source(&self) -> Option<&PointSource> {
        self.source.as_ref()
    }

    pub fn hz_at(&self, i: usize, j: usize) -> f64 {
        self.hz[j * self.nx + i]
    }

    pub fn ey_at(&self, i: usize, j: usize) -> f64 {
        self.ey[j * (self.nx + 1) + i]
    }

    pub fn ex_at(&self, i: usize, j: usize) -> f64 {
        self.ex[j * self.nx + i]
    }

    /// Sets Hz in a cell, split evenly between the two halves.
    pub fn set_hz(&mut self, i: usize, j: usize, v: f64) {
        let k = j * self.nx + i;
        self.hzx[k] = 0.5 * v;
        self.hzy[k] = 0.5 * v;
        self.hz[k] = v;
    }

    pub fn set_ey(&mut self, i: usize, j: usize, v: f64) {
        self.ey[j * (self.nx + 1) + i] = v;
    }

    /// Advances E by half a step and Hz by a full step.
    pub fn step(&mut self) -> Result<()> {
        self.update_e();
        self.update_h();
        self.step += 1;
        if let Some(src) = self.source {
            let v = src.value(self.time()) * 0.5;
            let k = src.cell.1 * self.nx + src.cell.0;
            self.hzx[k] += v;
            self.hzy[k] += v;
            self.hz[k] = self.hzx[k] + self.hzy[k];
        }
        if self.step % 64 == 0 {
            self.check_blowup()?;
        }
        Ok(())
    }

    pub fn run(&mut self, steps: usize) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn check_blowup(&self) -> Result<()> {
        let reference = self.source.map(|s| s.amplitude.abs()).unwrap_or(1.0).max(f64::MIN_POSITIVE);
        let limit = self.blowup_factor * reference;
        let magnitude = self
            .hz
            .iter()
            .chain(&self.ex)
            .chain(&self.ey)
            .fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
        if magnitude > limit {
            return Err(Error::Instability {
                step: self.step,
                magnitude,
                limit,
            });
        }
        Ok(())
    }

    fn update_e(&mut self) {
        let nx = self.nx;
        let ny = self.ny;
        let hz = &self.hz;

        let ex_decay = &self.ex_decay;
        let ex_coeff = &self.ex_coeff;
        let ex_row = |(j, row): (usize, &mut [f64])| {
            if j == 0 || j == ny {
                return;
            }
            let a = ex_decay[j];
            let up = &hz[j * nx..(j + 1) * nx];
            let down = &hz[(j - 1) * nx..j * nx];
            let coeff = &ex_coeff[j * nx..(j + 1) * nx];
            for (((e, c), u), d) in row.iter_mut().zip(coeff).zip(up).zip(down) {
                *e = a * *e + c * (u - d);
            }
        };

        let ey_decay = &self.ey_decay;
        let ey_coeff = &self.ey_coeff;
        let ey_row = |(j, row): (usize, &mut [f64])| {
            let h = &hz[j * nx..(j + 1) * nx];
            let coeff = &ey_coeff[j * (nx + 1)..(j + 1) * (nx + 1)];
            for i in 1..nx {
                row[i] = ey_decay[i] * row[i] - coeff[i] * (h[i] - h[i - 1]);
            }
        };

        match self.execution {
            Execution::Serial => {
                self.ex.chunks_mut(nx).enumerate().for_each(ex_row);
                self.ey.chunks_mut(nx + 1).enumerate().for_each(ey_row);
            }
            Execution::ParallelRows => {
                self.ex.par_chunks_mut(nx).enumerate().for_each(ex_row);
                self.ey.par_chunks_mut(nx + 1).enumerate().for_each(ey_row);
            }
        }
    }

    fn update_h(&mut self) {
        let nx = self.nx;
        let ex = &self.ex;
        let ey = &self.ey;
        let hx_decay = &self.hx_decay;
        let hx_gain = &self.hx_gain;
        let hy_decay = &self.hy_decay;
        let hy_gain = &self.hy_gain;

        let h_row = |(j, ((hzx, hzy), hz)): (usize, ((&mut [f64], &mut [f64]), &mut [f64]))| {
            let eyr = &ey[j * (nx + 1)..(j + 1) * (nx + 1)];
            let ex_lo = &ex[j * nx..(j + 1) * nx];
            let ex_hi = &ex[(j + 1) * nx..(j + 2) * nx];
            let (ay, by) = (hy_decay[j], hy_gain[j]);
            for i in 0..nx {
                let hx = hx_decay[i] * hzx[i] - hx_gain[i] * (eyr[i + 1] - eyr[i]);
                let hy = ay * hzy[i] + by * (ex_hi[i] - ex_lo[i]);
                hzx[i] = hx;
                hzy[i] = hy;
                hz[i] = hx + hy;
            }
        };

        match self.execution {
            Execution::Serial => self
                .hzx
                .chunks_mut(nx)
                .zip(self.hzy.chunks_mut(nx))
                .zip(self.hz.chunks_mut(nx))
                .enumerate()
                .for_each(h_row),
            Execution::ParallelRows => self
                .hzx
                .par_chunks_mut(nx)
                .zip(self.hzy.par_chunks_mut(nx))
                .zip(self.hz.par_chunks_mut(nx))
                .enumerate()
                .for_each(h_row),
        }
    }

    /// Electromagnetic energy density sum `½Σ(ε|E|² + Hz²)` over the grid,
    /// with ε taken from the update coefficients' inverse. Only meaningful
    /// outside the absorbing layers.
    pub fn field_energy(&self, map: &PermittivityMap) -> f64 {
        let nx = self.nx;
        let mut e = 0.0;
        for j in 0..self.ny {
            for i in 0..nx {
                let eps = map.eps[j * nx + i];
                let exm = 0.5 * (self.ex[j * nx + i] + self.ex[(j + 1) * nx + i]);
                let eym = 0.5 * (self.ey[j * (nx + 1) + i] + self.ey[j * (nx + 1) + i + 1]);
                let h = self.hz[j * nx + i];
                e += 0.5 * (eps * (exm * exm + eym * eym) + h * h);
            }
        }
        e
    }

    /// Largest |Hz| on the grid.
    pub fn max_hz(&self) -> f64 {
        self.hz.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Poynting flux `Σ Ey·Hz` through the vertical grid line at column
    /// `i` (1 ≤ i < nx) over rows `rows`, with Hz averaged across the line.
    pub fn flux_x(&self, i: usize, rows: std::ops::Range<usize>) -> f64 {
        let nx = self.nx;
        rows.map(|j| {
            let h = 0.5 * (self.hz[j * nx + i - 1] + self.hz[j * nx + i]);
            self.ey[j * (nx + 1) + i] * h
        })
        .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::super::geometry::{Layout, Rect};
    use super::*;

    fn vacuum(n: usize, pml: usize) -> PermittivityMap {
        let layout = Layout::for_interior(
            Rect {
                x_min: 0.0,
                y_min: 0.0,
                x_max: (n - 2 * pml) as f64,
                y_max: (n - 2 * pml) as f64,
            },
            1.0,
            pml,
        );
        PermittivityMap::uniform(layout, 1.0)
    }

    fn point_source(cell: (usize, usize)) -> PointSource {
        PointSource::continuous(cell, 20.0, 1.0, 0.0)
    }

    #[test]
    fn no_source_stays_zero() {
        let map = vacuum(40, 10);
        let mut sim = Simulation::new(&map, PmlSpec::default(), None).unwrap();
        sim.run(200).unwrap();
        assert!(sim.hz.iter().chain(&sim.ex).chain(&sim.ey).all(|v| *v == 0.0));
    }

    #[test]
    fn wavefront_is_causal() {
        let n = 120;
        let map = vacuum(n, 10);
        let src = PointSource::continuous((60, 60), 20.0, 1.0, 1.0);
        let mut sim = Simulation::new(&map, PmlSpec::default(), Some(src)).unwrap();
        let d = 40usize;
        let probe = (60 + d, 60);
        let arrival = d as f64; // c = 1
        let mut early_max = 0.0f64;
        let mut late_max = 0.0f64;
        while sim.time() < 2.0 * arrival {
            sim.step().unwrap();
            let v = sim.hz_at(probe.0, probe.1).abs();
            // the stencil reaches one cell further per step
            if sim.steps() < d {
                assert_eq!(v, 0.0);
            }
            if sim.time() < 0.9 * arrival {
                early_max = early_max.max(v);
            } else {
                late_max = late_max.max(v);
            }
        }
        assert!(late_max > 1e-3);
        assert!(early_max < 1e-3 * late_max, "early {early_max:e} late {late_max:e}");
    }

    #[test]
    fn closed_strip_standing_wave_does_not_decay() {
        // PEC walls, no absorber: the discrete cavity mode Hz ∝ cos(πm(i+½)/nx)
        // is an exact eigenmode of the scheme.
        let nx = 64;
        let ny = 8;
        let layout = Layout::for_interior(
            Rect {
                x_min: 0.0,
                y_min: 0.0,
                x_max: nx as f64,
                y_max: ny as f64,
            },
            1.0,
            0,
        );
        let map = PermittivityMap::uniform(layout, 1.0);
        let pml = PmlSpec {
            cells: 0,
            ..PmlSpec::default()
        };
        let mut sim = Simulation::new(&map, pml, None).unwrap();
        let k = 4.0 * PI / nx as f64;
        for j in 0..ny {
            for i in 0..nx {
                sim.set_hz(i, j, (k * (i as f64 + 0.5)).cos());
            }
        }
        let window = |sim: &mut Simulation| {
            let mut m = 0.0f64;
            for _ in 0..40 {
                sim.step().unwrap();
                m = m.max(sim.max_hz());
            }
            m
        };
        let first = window(&mut sim);
        sim.run(1000).unwrap();
        let later = window(&mut sim);
        assert!((first - later).abs() / first < 1e-3, "{first} -> {later}");
    }

    #[test]
    fn absorbing_layer_swallows_outgoing_wave() {
        let n = 100;
        let map = vacuum(n, 12);
        let src = PointSource::continuous((50, 50), 20.0, 1.0, 1.0);
        let mut sim = Simulation::new(&map, PmlSpec { cells: 12, ..PmlSpec::default() }, Some(src)).unwrap();
        sim.run(300).unwrap();
        sim.source = None;
        let energy = |s: &Simulation| s.hz.iter().map(|v| v * v).sum::<f64>();
        let before = energy(&sim);
        sim.run(600).unwrap();
        assert!(energy(&sim) < 1e-4 * before);
    }

    #[test]
    fn parallel_rows_match_serial_bitwise() {
        let map = vacuum(64, 10);
        let mut a = Simulation::new(&map, PmlSpec::default(), Some(point_source((30, 33)))).unwrap();
        let mut b = a.clone();
        b.execution = Execution::ParallelRows;
        a.run(150).unwrap();
        b.run(150).unwrap();
        assert_eq!(a.hz, b.hz);
        assert_eq!(a.ex, b.ex);
        assert_eq!(a.ey, b.ey);
    }

    #[test]
    fn blowup_is_detected() {
        let map = vacuum(40, 5);
        let mut sim = Simulation::new(&map, PmlSpec::default(), Some(point_source((20, 20)))).unwrap();
        sim.set_hz(10, 10, 1e9);
        let err = sim.run(64).unwrap_err();
        assert!(matches!(err, Error::Instability { .. }));
    }

    #[test]
    fn source_ramp_is_smooth() {
        let s = PointSource::continuous((0, 0), 20.0, 1.0, 10.0);
        assert_eq!(s.value(0.0), 0.0);
        let late = 10.0 * s.period() + 0.25 * s.period();
        assert!((s.value(late) - 1.0).abs() < 1e-12);
    }
}
