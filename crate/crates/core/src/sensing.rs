//! Forward maps from two sensing scenarios onto coupled-mode parameters, and
//! readout of the resulting spectral shifts.
//!
//! The mode-field overlap integrals are not evaluated here. Their magnitude
//! is carried by calibration inputs: `strength` for a particle (|ξ_nn| at
//! unit contrast) and `xi_slab_ref` for a slab (the coupling added by a slab
//! at the reference permittivity).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectra::{find_resonances, Channel, FeatureKind, ResonanceFeature, Spectrum};
use crate::system::{LoopSystem, Pair};

/// A subwavelength particle in the evanescent field of one resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleScenario {
    /// Target resonator, 1-based.
    pub resonator: usize,
    /// Azimuthal position in radians.
    pub theta: f64,
    /// Azimuthal mode number m ≥ 1.
    pub mode_number: u32,
    /// Permittivity contrast ε_p − ε_s at the particle.
    pub contrast: f64,
    /// |ξ_nn| produced at unit contrast.
    pub strength: f64,
}

impl ParticleScenario {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.resonator) {
            return Err(Error::InvalidParameter(format!(
                "particle resonator must be 1..=3, got {}",
                self.resonator
            )));
        }
        if self.mode_number < 1 {
            return Err(Error::InvalidParameter("azimuthal mode number must be >= 1".into()));
        }
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "particle strength must be >= 0, got {}",
                self.strength
            )));
        }
        if !self.theta.is_finite() || !self.contrast.is_finite() {
            return Err(Error::InvalidParameter("non-finite particle parameter".into()));
        }
        Ok(())
    }

    /// Angular period π/m after which the scattering parameter repeats.
    pub fn angular_period(&self) -> f64 {
        PI / self.mode_number as f64
    }
}

/// Scattering parameter `strength · δε · e^{2imθ}` induced by the particle.
pub fn particle_scattering(p: &ParticleScenario) -> Result<Complex64> {
    p.validate()?;
    let phase = 2.0 * p.mode_number as f64 * p.theta;
    Ok(Complex64::from_polar(p.strength * p.contrast, phase))
}

/// Puts the particle's scattering parameter on the target resonator. With
/// `compose` the value is added to the intrinsic ξ_nn instead of replacing it.
pub fn apply_particle(sys: &LoopSystem, p: &ParticleScenario, compose: bool) -> Result<LoopSystem> {
    let xi = particle_scattering(p)?;
    let pair = Pair::new(p.resonator, p.resonator)?;
    let value = if compose { sys.xi_at(pair) + xi } else { xi };
    Ok(sys.clone().with_xi(pair, value))
}

/// A dielectric slab in the gap between two resonators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabScenario {
    pub pair: Pair,
    /// Coupling without the slab.
    pub xi_background: Complex64,
    /// Coupling added by a slab at the reference permittivity.
    pub xi_slab_ref: Complex64,
    /// Reference slab permittivity.
    pub eps_ref: f64,
    /// Surrounding medium.
    pub eps_background: f64,
    /// Actual slab permittivity.
    pub eps: f64,
}

/// Change of the coupling when the slab permittivity departs from the
/// reference: `(ε − ε_ref)/(ε_ref − ε_s) · ξ_slab`.
pub fn slab_correction(s: &SlabScenario) -> Result<Complex64> {
    let denom = s.eps_ref - s.eps_background;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "reference slab permittivity {} must differ from the background {}",
            s.eps_ref, s.eps_background
        )));
    }
    Ok(s.xi_slab_ref * ((s.eps - s.eps_ref) / denom))
}

/// Total coupling across the slab.
pub fn slab_coupling(s: &SlabScenario) -> Result<Complex64> {
    Ok(s.xi_background + s.xi_slab_ref + slab_correction(s)?)
}

pub fn apply_slab(sys: &LoopSystem, s: &SlabScenario) -> Result<LoopSystem> {
    if s.pair.is_diagonal() {
        return Err(Error::InvalidParameter(format!(
            "a slab couples two different resonators, got pair {}",
            s.pair
        )));
    }
    Ok(sys.clone().with_xi(s.pair, slab_coupling(s)?))
}

/// A feature found in both spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureShift {
    pub baseline: ResonanceFeature,
    pub perturbed: ResonanceFeature,
    /// `perturbed.location − baseline.location`
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShiftReport {
    pub matched: Vec<FeatureShift>,
    /// Present only in the perturbed spectrum.
    pub appeared: Vec<ResonanceFeature>,
    /// Present only in the baseline spectrum.
    pub disappeared: Vec<ResonanceFeature>,
}

impl ShiftReport {
    pub fn max_abs_shift(&self) -> f64 {
        self.matched.iter().map(|m| m.shift.abs()).fold(0.0, f64::max)
    }
}

/// Pairs features of the same channel and kind, closest locations first.
pub fn match_features(baseline: &[ResonanceFeature], perturbed: &[ResonanceFeature]) -> ShiftReport {
    let compatible = |a: &ResonanceFeature, b: &ResonanceFeature| a.channel == b.channel && a.kind == b.kind;
    let mut candidates = Vec::new();
    for (i, a) in baseline.iter().enumerate() {
        for (j, b) in perturbed.iter().enumerate() {
            if compatible(a, b) {
                let lo = a.location.min(b.location);
                let hi = a.location.max(b.location);
                candidates.push(((b.location - a.location).abs(), lo, hi, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
    });
    let mut used_a = vec![false; baseline.len()];
    let mut used_b = vec![false; perturbed.len()];
    let mut matched = Vec::new();
    for (_, _, _, i, j) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        matched.push(FeatureShift {
            baseline: baseline[i],
            perturbed: perturbed[j],
            shift: perturbed[j].location - baseline[i].location,
        });
    }
    matched.sort_by(|x, y| x.baseline.location.total_cmp(&y.baseline.location));
    ShiftReport {
        matched,
        appeared: perturbed
            .iter()
            .zip(&used_b)
            .filter(|(_, u)| !**u)
            .map(|(f, _)| *f)
            .collect(),
        disappeared: baseline
            .iter()
            .zip(&used_a)
            .filter(|(_, u)| !**u)
            .map(|(f, _)| *f)
            .collect(),
    }
}

/// Locates features in both spectra and reports how each one moved.
pub fn shift_readout(baseline: &Spectrum, perturbed: &Spectrum, prominence: f64) -> Result<ShiftReport> {
    if baseline.grid != perturbed.grid {
        return Err(Error::InvalidInput(format!(
            "spectra on different grids: {:?} vs {:?}",
            baseline.grid, perturbed.grid
        )));
    }
    Ok(match_features(
        &find_resonances(baseline, prominence),
        &find_resonances(perturbed, prominence),
    ))
}

/// Label used in the shift CSV, e.g. `T-dip`.
pub fn feature_label(channel: Channel, kind: FeatureKind) -> String {
    format!("{}-{}", channel.name(), kind.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn particle(theta_deg: f64) -> ParticleScenario {
        ParticleScenario {
            resonator: 2,
            theta: theta_deg.to_radians(),
            mode_number: 52,
            contrast: 1.0,
            strength: 20.0,
        }
    }

    #[test]
    fn particle_at_zero_angle_is_real() {
        let p = ParticleScenario { theta: 0.0, ..particle(0.0) };
        let xi = particle_scattering(&p).unwrap();
        assert_abs_diff_eq!(xi.re, 20.0, epsilon = 1e-14);
        assert_abs_diff_eq!(xi.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn five_degrees_turn_phase_by_160() {
        let a = particle_scattering(&particle(90.0)).unwrap();
        let b = particle_scattering(&particle(95.0)).unwrap();
        // 2·52·5° = 520° ≡ 160°
        let turn = (b / a).arg().to_degrees();
        assert_abs_diff_eq!(turn, 160.0, epsilon = 1e-9);
    }

    #[test]
    fn contrast_scales_modulus_only() {
        let p = particle(33.0);
        let a = particle_scattering(&p).unwrap();
        let b = particle_scattering(&ParticleScenario { contrast: 2.0, ..p }).unwrap();
        assert_abs_diff_eq!(b.norm(), 2.0 * a.norm(), epsilon = 1e-12);
        assert_abs_diff_eq!((b / a).arg(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn particle_validation() {
        assert!(particle_scattering(&ParticleScenario { mode_number: 0, ..particle(0.0) }).is_err());
        assert!(particle_scattering(&ParticleScenario { strength: -1.0, ..particle(0.0) }).is_err());
        assert!(particle_scattering(&ParticleScenario { resonator: 4, ..particle(0.0) }).is_err());
    }

    #[test]
    fn apply_particle_replaces_or_composes() {
        let pair = Pair::new(2, 2).unwrap();
        let sys = LoopSystem::new().with_xi(pair, Complex64::new(1.0, 0.0));
        let p = ParticleScenario { theta: 0.0, ..particle(0.0) };
        assert_eq!(apply_particle(&sys, &p, false).unwrap().xi_at(pair), Complex64::new(20.0, 0.0));
        assert_eq!(apply_particle(&sys, &p, true).unwrap().xi_at(pair), Complex64::new(21.0, 0.0));
    }

    fn slab(eps: f64) -> SlabScenario {
        SlabScenario {
            pair: Pair::new(2, 3).unwrap(),
            xi_background: Complex64::new(2.0, 0.0),
            xi_slab_ref: Complex64::new(3.0, 0.0),
            eps_ref: 4.0,
            eps_background: 1.0,
            eps,
        }
    }

    #[test]
    fn slab_reference_has_no_correction() {
        assert_eq!(slab_correction(&slab(4.0)).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(slab_coupling(&slab(4.0)).unwrap(), Complex64::new(5.0, 0.0));
    }

    #[test]
    fn slab_correction_value_and_linearity() {
        let d = slab_correction(&slab(4.1)).unwrap();
        assert_abs_diff_eq!(d.re, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(d.im, 0.0);
        let d2 = slab_correction(&slab(4.2)).unwrap();
        assert_abs_diff_eq!(d2.re, 2.0 * d.re, epsilon = 1e-12);
    }

    #[test]
    fn slab_degenerate_denominator() {
        let s = SlabScenario { eps_ref: 1.0, ..slab(4.1) };
        assert!(matches!(slab_correction(&s), Err(Error::InvalidParameter(_))));
        let diag = SlabScenario { pair: Pair::new(2, 2).unwrap(), ..slab(4.1) };
        assert!(apply_slab(&LoopSystem::new(), &diag).is_err());
    }

    fn feature(channel: Channel, kind: FeatureKind, location: f64) -> ResonanceFeature {
        ResonanceFeature {
            channel,
            kind,
            location,
            value: 0.0,
            prominence: 1.0,
            width: 1.0,
        }
    }

    #[test]
    fn matching_respects_kind_and_reports_leftovers() {
        use Channel::*;
        use FeatureKind::*;
        let a = [
            feature(Transmission, Dip, -5.0),
            feature(Transmission, Dip, 5.0),
            feature(Reflection, Peak, 0.0),
        ];
        let b = [
            feature(Transmission, Dip, -4.5),
            feature(Reflection, Peak, 0.2),
            feature(Reflection, Dip, 1.0),
        ];
        let r = match_features(&a, &b);
        assert_eq!(r.matched.len(), 2);
        assert_abs_diff_eq!(r.matched[0].shift, 0.5);
        assert_abs_diff_eq!(r.matched[1].shift, 0.2, epsilon = 1e-15);
        assert_eq!(r.appeared.len(), 1);
        assert_eq!(r.disappeared.len(), 1);
        assert_eq!(r.disappeared[0].location, 5.0);
    }
}
