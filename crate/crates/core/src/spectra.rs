//! Detuning and phase sweeps, phase-averaged spectra and resonance location.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::system::{solve_steady_state, LoopSystem, Pair, SteadyState};

/// One sample of a detuning spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub delta: f64,
    pub transmission: f64,
    pub reflection: f64,
    pub occupancy_a1: f64,
    pub occupancy_b1: f64,
    /// |arg a1|; NaN for phase-averaged spectra, where it has no meaning.
    pub phi_a: f64,
}

impl SpectrumPoint {
    fn from_state(delta: f64, s: &SteadyState) -> Self {
        Self {
            delta,
            transmission: s.transmission,
            reflection: s.reflection,
            occupancy_a1: s.occupancy_a1,
            occupancy_b1: s.occupancy_b1,
            phi_a: s.phi_a,
        }
    }
}

/// Uniform detuning grid `[min, max]` with `n ≥ 2` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetuningGrid {
    min: f64,
    max: f64,
    n: usize,
}

impl DetuningGrid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2 points, got {n}")));
        }
        if !(min < max) || !min.is_finite() || !max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max, n })
    }

    /// [−100, 100] with 2001 points; the odd count puts Δ = 0 on the grid.
    pub fn standard() -> Self {
        Self { min: -100.0, max: 100.0, n: 2001 }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    /// k-th grid value. Written as a weighted mean of the bounds so that a
    /// symmetric grid is exactly symmetric.
    pub fn value(&self, k: usize) -> f64 {
        let last = (self.n - 1) as f64;
        let k = k as f64;
        (self.min * (last - k) + self.max * k) / last
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.value(k)).collect()
    }
}

/// Detuning spectrum together with the system and grid that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub system: LoopSystem,
    pub grid: DetuningGrid,
    pub points: Vec<SpectrumPoint>,
}

impl Spectrum {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn transmission(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.transmission).collect()
    }

    pub fn reflection(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.reflection).collect()
    }
}

fn solve_at(sys: &LoopSystem, delta: f64) -> Result<SteadyState> {
    let mut local = sys.clone();
    local.set_detuning(delta);
    solve_steady_state(&local).map_err(|e| Error::AtDetuning {
        delta,
        source: Box::new(e),
    })
}

/// Solves the steady state on every grid point with Δ1 = Δ2 = Δ3 = Δ.
pub fn sweep_grid(sys: &LoopSystem, grid: &DetuningGrid) -> Result<Spectrum> {
    sys.validate()?;
    let points = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let delta = grid.value(k);
            solve_at(sys, delta).map(|s| SpectrumPoint::from_state(delta, &s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        system: sys.clone(),
        grid: *grid,
        points,
    })
}

/// Transmission/reflection spectrum over `n` uniform detunings.
pub fn sweep_detuning(sys: &LoopSystem, delta_min: f64, delta_max: f64, n: usize) -> Result<Spectrum> {
    sweep_grid(sys, &DetuningGrid::new(delta_min, delta_max, n)?)
}

/// One sample of a phase sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub phi: f64,
    pub transmission: f64,
    pub reflection: f64,
}

/// `n` uniform phases on [0, 2π).
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

fn check_sweepable(sys: &LoopSystem, pair: Pair) -> Result<()> {
    sys.validate()?;
    if sys.xi_at(pair).norm() == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "xi{pair} has zero modulus; its phase is undefined"
        )));
    }
    Ok(())
}

/// T and R at fixed Δ while the phase of ξ_ij runs over [0, 2π).
pub fn sweep_phase(sys: &LoopSystem, pair: Pair, delta: f64, n: usize) -> Result<Vec<PhasePoint>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("phase sweep needs n >= 2, got {n}")));
    }
    check_sweepable(sys, pair)?;
    phase_grid(n)
        .into_par_iter()
        .map(|phi| {
            let mut local = sys.clone();
            local.set_phase(pair, phi);
            solve_at(&local, delta).map(|s| PhasePoint {
                phi,
                transmission: s.transmission,
                reflection: s.reflection,
            })
        })
        .collect()
}

/// Default number of phase samples for averaging.
pub const DEFAULT_PHASE_SAMPLES: usize = 256;

/// Spectrum whose intensities are averaged over the phase of ξ_ij with the
/// rectangle rule on `n_phase` uniform samples of [0, 2π).
pub fn phase_average(
    sys: &LoopSystem,
    pair: Pair,
    grid: &DetuningGrid,
    n_phase: usize,
) -> Result<Spectrum> {
    if n_phase < 8 {
        return Err(Error::InvalidParameter(format!(
            "phase averaging needs n_phase >= 8, got {n_phase}"
        )));
    }
    check_sweepable(sys, pair)?;
    let systems: Vec<LoopSystem> = phase_grid(n_phase)
        .into_iter()
        .map(|phi| {
            let mut local = sys.clone();
            local.set_phase(pair, phi);
            local
        })
        .collect();
    let weight = 1.0 / n_phase as f64;
    let points = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let delta = grid.value(k);
            let mut acc = SpectrumPoint {
                delta,
                transmission: 0.0,
                reflection: 0.0,
                occupancy_a1: 0.0,
                occupancy_b1: 0.0,
                phi_a: f64::NAN,
            };
            for local in &systems {
                let s = solve_at(local, delta)?;
                acc.transmission += weight * s.transmission;
                acc.reflection += weight * s.reflection;
                acc.occupancy_a1 += weight * s.occupancy_a1;
                acc.occupancy_b1 += weight * s.occupancy_b1;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        system: sys.clone(),
        grid: *grid,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Transmission,
    Reflection,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Transmission => "T",
            Channel::Reflection => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Dip,
    Peak,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Dip => "dip",
            FeatureKind::Peak => "peak",
        }
    }
}

/// A located extremum of T or R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceFeature {
    pub channel: Channel,
    pub kind: FeatureKind,
    /// Parabolically refined position.
    pub location: f64,
    /// Refined extremal value.
    pub value: f64,
    pub prominence: f64,
    /// Full width at half prominence.
    pub width: f64,
}

/// Local extrema of a sampled curve `y(x)` on a uniform grid whose
/// prominence is at least `prominence`. Dips are found as peaks of −y.
/// Endpoints are never reported.
pub fn find_extrema(x: &[f64], y: &[f64], prominence: f64) -> Vec<(FeatureKind, Extremum)> {
    let mut out = Vec::new();
    let negated: Vec<f64> = y.iter().map(|v| -v).collect();
    for (kind, curve) in [(FeatureKind::Peak, y), (FeatureKind::Dip, negated.as_slice())] {
        for mut e in find_peaks(x, curve, prominence) {
            if kind == FeatureKind::Dip {
                e.value = -e.value;
            }
            out.push((kind, e));
        }
    }
    out.sort_by(|a, b| a.1.location.total_cmp(&b.1.location));
    out
}

/// Peak description returned by [`find_extrema`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    pub location: f64,
    pub value: f64,
    pub prominence: f64,
    pub width: f64,
}

fn find_peaks(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Extremum> {
    let n = y.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let step = (x[n - 1] - x[0]) / (n - 1) as f64;
    let mut i = 1;
    while i + 1 < n {
        if !(y[i] > y[i - 1]) {
            i += 1;
            continue;
        }
        // walk over a flat top
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || !(y[j + 1] < y[i]) {
            i = j + 1;
            continue;
        }
        let top = (i + j) / 2;
        let peak = y[top];

        let mut left_min = peak;
        let mut k = i;
        while k > 0 {
            k -= 1;
            if y[k] > peak {
                break;
            }
            left_min = left_min.min(y[k]);
        }
        let mut right_min = peak;
        let mut k = j;
        while k + 1 < n {
            k += 1;
            if y[k] > peak {
                break;
            }
            right_min = right_min.min(y[k]);
        }
        let prominence = peak - left_min.max(right_min);
        if prominence >= min_prominence && prominence > 0.0 {
            let (offset, value) = if i == j {
                parabolic(y[top - 1], y[top], y[top + 1])
            } else {
                (0.0, peak)
            };
            let location = x[top] + offset * step;
            let width = half_width(x, y, i, j, peak - 0.5 * prominence);
            peaks.push(Extremum {
                index: top,
                location,
                value,
                prominence,
                width,
            });
        }
        i = j + 1;
    }
    peaks
}

/// Vertex of the parabola through three equally spaced samples, as an offset
/// in grid steps from the middle sample, and its value.
fn parabolic(left: f64, mid: f64, right: f64) -> (f64, f64) {
    let denom = left - 2.0 * mid + right;
    if denom == 0.0 {
        return (0.0, mid);
    }
    let offset = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
    (offset, mid - 0.25 * (left - right) * offset)
}

fn half_width(x: &[f64], y: &[f64], first: usize, last: usize, level: f64) -> f64 {
    let n = y.len();
    let mut k = first;
    let mut left = x[0];
    while k > 0 {
        if y[k - 1] < level {
            let t = (level - y[k - 1]) / (y[k] - y[k - 1]);
            left = x[k - 1] + t * (x[k] - x[k - 1]);
            break;
        }
        k -= 1;
    }
    let mut k = last;
    let mut right = x[n - 1];
    while k + 1 < n {
        if y[k + 1] < level {
            let t = (y[k] - level) / (y[k] - y[k + 1]);
            right = x[k] + t * (x[k + 1] - x[k]);
            break;
        }
        k += 1;
    }
    let width = right - left;
    if width > 0.0 {
        width
    } else {
        (x[n - 1] - x[0]) / (n - 1) as f64
    }
}

/// Dips and peaks of T and R whose prominence exceeds `prominence`, sorted by
/// location. Needs at least five points; shorter spectra yield nothing.
pub fn find_resonances(spec: &Spectrum, prominence: f64) -> Vec<ResonanceFeature> {
    if spec.points.len() < 5 || !(prominence > 0.0) {
        return Vec::new();
    }
    let x = spec.deltas();
    let mut out = Vec::new();
    for (channel, y) in [
        (Channel::Transmission, spec.transmission()),
        (Channel::Reflection, spec.reflection()),
    ] {
        for (kind, e) in find_extrema(&x, &y, prominence) {
            out.push(ResonanceFeature {
                channel,
                kind,
                location: e.location,
                value: e.value,
                prominence: e.prominence,
                width: e.width,
            });
        }
    }
    out.sort_by(|a, b| a.location.total_cmp(&b.location));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Pair;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn p(i: usize, j: usize) -> Pair {
        Pair::new(i, j).unwrap()
    }

    #[test]
    fn grid_is_exactly_symmetric() {
        let g = DetuningGrid::standard();
        assert_eq!(g.value(1000), 0.0);
        for k in 0..g.len() {
            assert_eq!(g.value(k), -g.value(g.len() - 1 - k));
        }
        assert_abs_diff_eq!(g.step(), 0.1, epsilon = 1e-15);
        let v = g.values();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(DetuningGrid::new(1.0, 1.0, 10).is_err());
        assert!(DetuningGrid::new(0.0, 1.0, 1).is_err());
        assert!(sweep_detuning(&LoopSystem::new(), 2.0, -2.0, 11).is_err());
    }

    #[test]
    fn single_lorentzian_under_critical_coupling() {
        let spec = sweep_detuning(&LoopSystem::new(), -50.0, 50.0, 101).unwrap();
        for pt in &spec.points {
            // κ + γ/2 = 1
            let want = pt.delta * pt.delta / (pt.delta * pt.delta + 1.0);
            assert_abs_diff_eq!(pt.transmission, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_sweep_rejects_zero_coupling() {
        let sys = LoopSystem::new();
        assert!(matches!(sweep_phase(&sys, p(1, 2), 0.0, 16), Err(Error::InvalidParameter(_))));
        let g = DetuningGrid::new(-1.0, 1.0, 3).unwrap();
        assert!(matches!(phase_average(&sys, p(1, 2), &g, 16), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn phase_average_needs_enough_samples() {
        let sys = LoopSystem::new().with_xi(p(1, 2), Complex64::new(3.0, 0.0));
        let g = DetuningGrid::new(-1.0, 1.0, 3).unwrap();
        assert!(phase_average(&sys, p(1, 2), &g, 7).is_err());
        assert!(phase_average(&sys, p(1, 2), &g, 8).is_ok());
    }

    #[test]
    fn solver_errors_carry_detuning() {
        // lossless decoupled resonator 2 is singular on resonance
        let sys = LoopSystem::new().with_gamma([1.0, 0.0, 1.0]);
        let err = sweep_detuning(&sys, -1.0, 1.0, 3).unwrap_err();
        match err {
            Error::AtDetuning { delta, source } => {
                assert_eq!(delta, 0.0);
                assert_eq!(*source, Error::Singular);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn synthetic_lorentzian_dip_is_located() {
        let center = 3.37;
        let x: Vec<f64> = (0..401).map(|k| -20.0 + 0.1 * k as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|d| 1.0 - 0.8 / (1.0 + ((d - center) / 0.7).powi(2)))
            .collect();
        let found = find_extrema(&x, &y, 0.1);
        assert_eq!(found.len(), 1);
        let (kind, e) = found[0];
        assert_eq!(kind, FeatureKind::Dip);
        assert!((e.location - center).abs() < 0.1);
        // FWHM of the dip is 2·0.7 (prominence ≈ 0.8 above the far wings)
        assert!((e.width - 1.4).abs() < 0.2, "width {}", e.width);
        assert!((e.value - 0.2).abs() < 1e-3);
    }

    #[test]
    fn monotone_curve_has_no_features() {
        let x: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.tanh()).collect();
        assert!(find_extrema(&x, &y, 1e-6).is_empty());
    }

    #[test]
    fn flat_top_counts_once() {
        let x: Vec<f64> = (0..7).map(|k| k as f64).collect();
        let y = [0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0];
        let found = find_extrema(&x, &y, 0.5);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].1.location, 3.0);
    }

    #[test]
    fn prominence_filters_ripples() {
        let x: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 2.0).sin() + 0.01 * (v * 40.0).sin()).collect();
        let strong = find_extrema(&x, &y, 0.5);
        assert!(strong.len() <= 6);
        assert!(find_extrema(&x, &y, 0.001).len() > strong.len());
    }
}
