//! Expansion of the transmission amplitude in the roundtrip coupling.
//!
//! Resonators 2 and 3 only talk to each other through ξ23, so with
//! `x = |ξ23|/γ` the dynamics matrix is affine in x: `M(x) = M₀ + x·M₁`.
//! The steady state follows from the resolvent series
//! `C(x) = −(M₀⁻¹ − x M₀⁻¹M₁M₀⁻¹ + x² M₀⁻¹M₁M₀⁻¹M₁M₀⁻¹ − …)·drive`, and each
//! order of the series counts one more transit between cavities 2 and 3.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectra::DetuningGrid;
use crate::system::{
    dynamics_matrix_unchecked, factorize, solve_steady_state, DynMatrix, LoopSystem, ModeVector, Pair, I,
};

fn roundtrip_pair() -> Pair {
    Pair::new(2, 3).expect("static pair")
}

/// Coefficients c0, c1, c2 of `a_out/a_in ≈ c0 + c1·x + c2·x²` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    /// The system with ξ23 removed; its phase is kept in `roundtrip_phase`.
    pub base: LoopSystem,
    pub roundtrip_phase: f64,
    pub grid: DetuningGrid,
    pub c0: Vec<Complex64>,
    pub c1: Vec<Complex64>,
    pub c2: Vec<Complex64>,
}

/// One row of an expansion comparison at a fixed x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionRow {
    pub delta: f64,
    pub c: [Complex64; 3],
    pub t_expanded: f64,
    pub t_full: f64,
}

impl ExpansionReport {
    pub fn deltas(&self) -> Vec<f64> {
        self.grid.values()
    }

    /// `|c0 + c1 x + c2 x²|²` on every grid point.
    pub fn reconstructed(&self, x: f64) -> Vec<f64> {
        (0..self.c0.len())
            .map(|k| (self.c0[k] + self.c1[k] * x + self.c2[k] * (x * x)).norm_sqr())
            .collect()
    }

    /// The system with `|ξ23| = x` at the stored phase.
    pub fn system_at(&self, x: f64) -> LoopSystem {
        self.base
            .clone()
            .with_xi(roundtrip_pair(), Complex64::from_polar(x, self.roundtrip_phase))
    }

    /// Full-solve transmission with `|ξ23| = x`.
    pub fn full_transmission(&self, x: f64) -> Result<Vec<f64>> {
        let sys = self.system_at(x);
        self.grid
            .values()
            .into_par_iter()
            .map(|delta| {
                let mut local = sys.clone();
                local.set_detuning(delta);
                solve_steady_state(&local).map(|s| s.transmission)
            })
            .collect()
    }

    pub fn compare(&self, x: f64) -> Result<Vec<ExpansionRow>> {
        let full = self.full_transmission(x)?;
        let expanded = self.reconstructed(x);
        Ok(self
            .deltas()
            .into_iter()
            .enumerate()
            .map(|(k, delta)| ExpansionRow {
                delta,
                c: [self.c0[k], self.c1[k], self.c2[k]],
                t_expanded: expanded[k],
                t_full: full[k],
            })
            .collect())
    }
}

/// The ξ23 coupling pattern per unit modulus, `∂M/∂x`.
pub fn roundtrip_generator(phase: f64) -> DynMatrix {
    let unit = Complex64::from_polar(1.0, phase);
    let mut m1 = DynMatrix::zeros();
    // a2 ← b3, a3 ← b2, b2 ← a3, b3 ← a2
    m1[(2, 5)] = -I * unit;
    m1[(4, 3)] = -I * unit;
    m1[(3, 4)] = -I * unit.conj();
    m1[(5, 2)] = -I * unit.conj();
    m1
}

/// Amplitude coefficients at one detuning from the resolvent series.
pub fn coefficients_at(base: &LoopSystem, phase: f64) -> Result<[Complex64; 3]> {
    let m0 = dynamics_matrix_unchecked(base);
    let m1 = roundtrip_generator(phase);
    let drive = base.drive_vector();
    let root = (2.0 * base.kappa()).sqrt();
    let a_in = base.drive();

    // v0 = −M₀⁻¹ d, v_{k+1} = −M₀⁻¹ M₁ v_k
    let lu = factorize(m0)?;
    let solve = |rhs: &ModeVector| lu.solve(rhs).ok_or(Error::Singular);
    let v0 = -solve(&drive)?;
    let v1 = -solve(&(m1 * v0))?;
    let v2 = -solve(&(m1 * v1))?;
    Ok([
        -Complex64::new(1.0, 0.0) + root * v0[0] / a_in,
        root * v1[0] / a_in,
        root * v2[0] / a_in,
    ])
}

/// Taylor coefficients of the transmission amplitude in `|ξ23|/γ` around
/// ξ23 = 0, keeping arg ξ23 from `sys`.
pub fn expand_roundtrip(sys: &LoopSystem, grid: &DetuningGrid) -> Result<ExpansionReport> {
    sys.validate()?;
    let pair = roundtrip_pair();
    let roundtrip_phase = sys.xi_at(pair).arg();
    let base = sys.clone().with_xi(pair, Complex64::new(0.0, 0.0));
    let coeffs = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let delta = grid.value(k);
            let mut local = base.clone();
            local.set_detuning(delta);
            coefficients_at(&local, roundtrip_phase).map_err(|e| Error::AtDetuning {
                delta,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpansionReport {
        base,
        roundtrip_phase,
        grid: *grid,
        c0: coeffs.iter().map(|c| c[0]).collect(),
        c1: coeffs.iter().map(|c| c[1]).collect(),
        c2: coeffs.iter().map(|c| c[2]).collect(),
    })
}

/// Sup-norm of the difference between the second-order reconstruction and
/// the full-solve transmission at `|ξ23| = x`.
pub fn validate_expansion(report: &ExpansionReport, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("expansion variable must be >= 0, got {x}")));
    }
    let full = report.full_transmission(x)?;
    Ok(report
        .reconstructed(x)
        .iter()
        .zip(&full)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}
