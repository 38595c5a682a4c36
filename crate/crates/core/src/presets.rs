//! Parameter sets used throughout the examples and tests, in units of γ.
//! Every phase is zero; adjust with [`LoopSystem::set_phase`].

use num_complex::Complex64;

use crate::system::{LoopSystem, Pair};

fn pair(i: usize, j: usize) -> Pair {
    Pair::new(i, j).expect("static pair")
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Strong scattering in every resonator and strong links from resonator 1:
/// ξ11 = ξ12 = ξ13 = 30, ξ22 = ξ33 = 20, with a free ξ23 (0 closes the
/// roundtrip path).
pub fn symmetric_loop(xi23: f64) -> LoopSystem {
    LoopSystem::new()
        .with_xi(pair(1, 1), real(30.0))
        .with_xi(pair(2, 2), real(20.0))
        .with_xi(pair(3, 3), real(20.0))
        .with_xi(pair(1, 2), real(30.0))
        .with_xi(pair(1, 3), real(30.0))
        .with_xi(pair(2, 3), real(xi23))
}

/// Weakly linked resonator 2: ξ11 = 50, ξ22 = ξ33 = 20, ξ12 = 10, ξ13 = 30,
/// with a free ξ23.
pub fn weak_link_loop(xi23: f64) -> LoopSystem {
    LoopSystem::new()
        .with_xi(pair(1, 1), real(50.0))
        .with_xi(pair(2, 2), real(20.0))
        .with_xi(pair(3, 3), real(20.0))
        .with_xi(pair(1, 2), real(10.0))
        .with_xi(pair(1, 3), real(30.0))
        .with_xi(pair(2, 3), real(xi23))
}
