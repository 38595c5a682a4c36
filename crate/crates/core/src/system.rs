//! Coupled-mode model of three loop-coupled resonators probed by a fiber.
//!
//! All rates are dimensionless multiples of the reference loss rate γ, so
//! γ = 1 is the natural default. Mode amplitudes are ordered
//! `(a1, b1, a2, b2, a3, b3)` where `a` is the mode driven by the fiber and
//! `b` its counter-propagating partner.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// 6×6 complex dynamics matrix.
pub type DynMatrix = SMatrix<Complex64, 6, 6>;
/// Six complex mode amplitudes `(a1, b1, a2, b2, a3, b3)`.
pub type ModeVector = SVector<Complex64, 6>;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Builds `modulus · e^{iπ·phase_pi}`; phases in units of π are how the
/// configuration files and most parameter tables state them.
pub fn polar_pi(modulus: f64, phase_pi: f64) -> Complex64 {
    Complex64::from_polar(modulus, phase_pi * PI)
}

/// Wraps an angle into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    if p <= -PI {
        p += 2.0 * PI;
    }
    p
}

/// Unordered resonator pair, 1-based as resonators are usually numbered.
/// `Pair::new(2, 2)` addresses the scattering parameter of resonator 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pair {
    i: usize,
    j: usize,
}

impl Pair {
    pub fn new(i: usize, j: usize) -> Result<Self> {
        if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
            return Err(Error::InvalidParameter(format!(
                "resonator pair ({i},{j}) out of range 1..=3"
            )));
        }
        Ok(Self {
            i: i.min(j),
            j: i.max(j),
        })
    }

    /// Zero-based indices.
    pub fn idx(self) -> (usize, usize) {
        (self.i - 1, self.j - 1)
    }

    /// One-based indices as given.
    pub fn resonators(self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn is_diagonal(self) -> bool {
        self.i == self.j
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.i, self.j)
    }
}

/// How the fiber coupling κ is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiberCoupling {
    /// κ = √(|ξ11|² + (γ1/2)²), recomputed whenever ξ11 changes.
    Critical,
    Fixed(f64),
}

/// Critical fiber coupling for resonator 1. Uses |ξ11|, so the result is
/// invariant under the phase of the scattering parameter.
pub fn critical_kappa(xi11: Complex64, gamma1: f64) -> Result<f64> {
    if !(gamma1 > 0.0) || !gamma1.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "loss rate gamma1 must be positive, got {gamma1}"
        )));
    }
    Ok((xi11.norm_sqr() + 0.25 * gamma1 * gamma1).sqrt())
}

/// Full parameterization of the three-resonator + fiber model.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSystem {
    delta: [f64; 3],
    xi: [[Complex64; 3]; 3],
    gamma: [f64; 3],
    coupling: FiberCoupling,
    a_in: Complex64,
}

impl Default for LoopSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl LoopSystem {
    /// Decoupled resonators on resonance: ξ = 0, Δ = 0, γ = 1, critical
    /// fiber coupling, unit real drive.
    pub fn new() -> Self {
        Self {
            delta: [0.0; 3],
            xi: [[Complex64::new(0.0, 0.0); 3]; 3],
            gamma: [1.0; 3],
            coupling: FiberCoupling::Critical,
            a_in: Complex64::new(1.0, 0.0),
        }
    }

    /// Sets ξ_ij and its mirror ξ_ji.
    pub fn with_xi(mut self, pair: Pair, value: Complex64) -> Self {
        self.set_xi(pair, value);
        self
    }

    pub fn set_xi(&mut self, pair: Pair, value: Complex64) {
        let (i, j) = pair.idx();
        self.xi[i][j] = value;
        self.xi[j][i] = value;
    }

    /// Keeps |ξ_ij| and replaces its phase.
    pub fn set_phase(&mut self, pair: Pair, phi: f64) {
        let modulus = self.xi_at(pair).norm();
        self.set_xi(pair, Complex64::from_polar(modulus, phi));
    }

    /// Equal detuning Δ for all three resonators.
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.delta = [delta; 3];
        self
    }

    pub fn set_detuning(&mut self, delta: f64) {
        self.delta = [delta; 3];
    }

    pub fn with_detunings(mut self, delta: [f64; 3]) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_gamma(mut self, gamma: [f64; 3]) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_coupling(mut self, coupling: FiberCoupling) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_drive(mut self, a_in: Complex64) -> Self {
        self.a_in = a_in;
        self
    }

    pub fn detunings(&self) -> [f64; 3] {
        self.delta
    }

    /// Scattering/coupling matrix, exactly symmetric.
    pub fn xi(&self) -> &[[Complex64; 3]; 3] {
        &self.xi
    }

    pub fn xi_at(&self, pair: Pair) -> Complex64 {
        let (i, j) = pair.idx();
        self.xi[i][j]
    }

    /// arg ξ_ij in (−π, π].
    pub fn phase(&self, pair: Pair) -> f64 {
        wrap_phase(self.xi_at(pair).arg())
    }

    pub fn gamma(&self) -> [f64; 3] {
        self.gamma
    }

    pub fn coupling(&self) -> FiberCoupling {
        self.coupling
    }

    pub fn drive(&self) -> Complex64 {
        self.a_in
    }

    /// Effective κ. Falls back to NaN only for invalid γ1, which
    /// [`LoopSystem::validate`] rejects before any solve.
    pub fn kappa(&self) -> f64 {
        match self.coupling {
            FiberCoupling::Fixed(k) => k,
            FiberCoupling::Critical => {
                critical_kappa(self.xi[0][0], self.gamma[0]).unwrap_or(f64::NAN)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, g) in self.gamma.iter().enumerate() {
            if !(*g >= 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "gamma{} must be non-negative and finite, got {g}",
                    n + 1
                )));
            }
        }
        let kappa = self.kappa();
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "fiber coupling kappa must be positive, got {kappa}"
            )));
        }
        let finite = self.delta.iter().all(|d| d.is_finite())
            && self.xi.iter().flatten().all(|x| x.re.is_finite() && x.im.is_finite())
            && self.a_in.re.is_finite()
            && self.a_in.im.is_finite();
        if !finite {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.a_in.norm_sqr() == 0.0 {
            return Err(Error::InvalidParameter("drive amplitude a_in must be nonzero".into()));
        }
        Ok(())
    }

    /// Total decay rates of the a- and b-modes of each resonator. Only
    /// resonator 1 leaks into the fiber.
    pub fn total_decay(&self) -> [f64; 3] {
        [2.0 * self.kappa() + self.gamma[0], self.gamma[1], self.gamma[2]]
    }

    /// Fiber drive term entering `Ċ = M·C + drive`.
    pub fn drive_vector(&self) -> ModeVector {
        let mut d = ModeVector::zeros();
        d[0] = (2.0 * self.kappa()).sqrt() * self.a_in;
        d
    }
}

/// Builds the dynamics matrix M of `Ċ = M·C + drive`.
///
/// Row `a_m` carries `−(iΔ_m + γ_{a_m}/2)` on the diagonal and `−iξ_{mn}`
/// towards every `b_n`; row `b_m` carries the same diagonal and `−iξ*_{nm}`
/// towards every `a_n`.
pub fn build_dynamics_matrix(sys: &LoopSystem) -> Result<DynMatrix> {
    sys.validate()?;
    Ok(dynamics_matrix_unchecked(sys))
}

pub(crate) fn dynamics_matrix_unchecked(sys: &LoopSystem) -> DynMatrix {
    let decay = sys.total_decay();
    let mut m = DynMatrix::zeros();
    for r in 0..3 {
        let diag = -Complex64::new(0.5 * decay[r], sys.delta[r]);
        m[(2 * r, 2 * r)] = diag;
        m[(2 * r + 1, 2 * r + 1)] = diag;
        for n in 0..3 {
            m[(2 * r, 2 * n + 1)] = -I * sys.xi[r][n];
            m[(2 * r + 1, 2 * n)] = -I * sys.xi[n][r].conj();
        }
    }
    m
}

/// Stationary intracavity amplitudes and the fiber observables derived from
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// `(a1, b1, a2, b2, a3, b3)`
    pub amplitudes: ModeVector,
    pub a_out: Complex64,
    pub b_out: Complex64,
    pub transmission: f64,
    pub reflection: f64,
    /// 2κ|a1|²/|a_in|²
    pub occupancy_a1: f64,
    /// 2κ|b1|²/|a_in|²
    pub occupancy_b1: f64,
    /// |arg a1| in [0, π]
    pub phi_a: f64,
}

impl SteadyState {
    fn from_amplitudes(sys: &LoopSystem, amplitudes: ModeVector) -> Self {
        let kappa = sys.kappa();
        let root = (2.0 * kappa).sqrt();
        let a_in = sys.a_in;
        let input = a_in.norm_sqr();
        let a_out = -a_in + root * amplitudes[0];
        let b_out = root * amplitudes[1];
        Self {
            amplitudes,
            a_out,
            b_out,
            transmission: a_out.norm_sqr() / input,
            reflection: b_out.norm_sqr() / input,
            occupancy_a1: 2.0 * kappa * amplitudes[0].norm_sqr() / input,
            occupancy_b1: 2.0 * kappa * amplitudes[1].norm_sqr() / input,
            phi_a: amplitudes[0].arg().abs(),
        }
    }

    /// ‖M·C + drive‖ for this state.
    pub fn residual(&self, sys: &LoopSystem) -> f64 {
        (dynamics_matrix_unchecked(sys) * self.amplitudes + sys.drive_vector()).norm()
    }
}

/// Steady state `C = −M⁻¹·drive` by dense LU with partial pivoting.
pub fn solve_steady_state(sys: &LoopSystem) -> Result<SteadyState> {
    let m = build_dynamics_matrix(sys)?;
    let drive = sys.drive_vector();
    let c = solve_linear(m, &drive)?;
    Ok(SteadyState::from_amplitudes(sys, -c))
}

pub(crate) type Factorization = nalgebra::LU<Complex64, nalgebra::Const<6>, nalgebra::Const<6>>;

/// LU factorization with partial pivoting, rejecting numerically singular
/// matrices.
pub(crate) fn factorize(m: DynMatrix) -> Result<Factorization> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..6).map(|k| u[(k, k)].norm()).fold(f64::INFINITY, f64::min);
    if scale == 0.0 || min_pivot <= scale * 1e3 * f64::EPSILON {
        return Err(Error::Singular);
    }
    Ok(lu)
}

/// Solves `m·x = rhs`.
pub(crate) fn solve_linear(m: DynMatrix, rhs: &ModeVector) -> Result<ModeVector> {
    factorize(m)?.solve(rhs).ok_or(Error::Singular)
}

/// Default explicit step for [`integrate_to_steady`]: a tenth of the inverse
/// spectral bound, estimated by the largest absolute row sum of M.
pub fn default_time_step(sys: &LoopSystem) -> Result<f64> {
    let m = build_dynamics_matrix(sys)?;
    let bound = (0..6)
        .map(|r| (0..6).map(|c| m[(r, c)].norm()).sum::<f64>())
        .fold(1.0, f64::max);
    Ok(0.1 / bound)
}

/// Integrates `Ċ = M·C + drive` from `C = 0` with classical RK4 until
/// `‖Ċ‖ ≤ 10⁻¹⁰`. Independent check of [`solve_steady_state`].
pub fn integrate_to_steady(sys: &LoopSystem, t_end: f64, dt: f64) -> Result<SteadyState> {
    let m = build_dynamics_matrix(sys)?;
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and t_end > 0, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let drive = sys.drive_vector();
    let rhs = |c: &ModeVector| m * c + drive;
    const TOL: f64 = 1e-10;

    let mut c = ModeVector::zeros();
    let mut t = 0.0;
    let mut deriv = rhs(&c);
    while t < t_end {
        let k1 = deriv;
        let k2 = rhs(&(c + k1 * Complex64::from(0.5 * dt)));
        let k3 = rhs(&(c + k2 * Complex64::from(0.5 * dt)));
        let k4 = rhs(&(c + k3 * Complex64::from(dt)));
        c += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
            * Complex64::from(dt / 6.0);
        t += dt;
        deriv = rhs(&c);
        if deriv.norm() <= TOL {
            return Ok(SteadyState::from_amplitudes(sys, c));
        }
    }
    Err(Error::Convergence {
        t_end,
        residual: deriv.norm(),
    })
}
