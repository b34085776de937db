//! Quantum polyspectra of the detector output up to fourth order.
//!
//! Fourier convention `z(w) = int z(t) e^{i w t} dt`, so spectral lines of a
//! precession at `omega_L` appear at `+omega_L` and `G'(w)` carries
//! `e^{+i w tau}`.

mod background;
mod engine;
mod oracle;
pub mod quadrature;
mod spectrum;

pub use background::frozen_reference;
pub use engine::{S4Terms, SpectralEngine, PARTIAL_FRACTION_TOLERANCE};
pub use oracle::{
    g_prime, moments_oracle, s4_terms_quadrature, steady_state, steady_state_report, Resolvent,
    SteadyStateReport, STEADY_STATE_RESIDUAL,
};
pub use spectrum::{linspace, subtract_background, subtract_constant, symmetric_grid, Part, PolySpectrum};
