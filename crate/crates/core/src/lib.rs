//! Coupled-mode theory of three microresonators in a closed loop, probed by
//! a tapered fiber, together with the analysis tools built on top of it:
//! detuning and phase sweeps, dressed-state eigenanalysis, an expansion in
//! the roundtrip coupling, sensing maps, and a 2D FDTD solver used as an
//! independent electromagnetic cross-check.

pub mod eigen;
pub mod error;
pub mod fdtd;
pub mod io;
pub mod perturb;
pub mod presets;
pub mod sensing;
pub mod spectra;
pub mod system;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use system::{
    build_dynamics_matrix, critical_kappa, integrate_to_steady, polar_pi, solve_steady_state,
    FiberCoupling, LoopSystem, Pair, SteadyState,
};
