//! Two-dimensional FDTD solver for the (Ex, Ey, Hz) field set, scene
//! geometry and flux-based waveguide transmission.

pub mod geometry;
pub mod solver;
pub mod transmission;

pub use geometry::{
    dims, rasterize, rasterize_in, GeometrySpec, Layout, Particle, PermittivityMap, Rect, Ring, Slab, Waveguide,
};
pub use solver::{Execution, PmlSpec, PointSource, Simulation, Waveform, COURANT};
pub use transmission::{
    pulse_flux, pulse_transmission, run_cw, run_transmission, run_transmission_with_field, sweep_wavelength, wavelength_band,
    CwRun, FdtdScene, FluxResult, PulseSpectrum, ReferenceCache, RunControl, Snapshot,
};
