//! Windowed scattering transforms on the discrete torus.
//!
//! The crate builds semi-discrete Parseval filter banks, runs the modulus/convolution
//! cascade with certified pruning, forges signals with prescribed slow energy decay and
//! evaluates closed-form decay bounds against measured energies.

pub mod certify;
pub mod filters;
pub mod forge;
pub mod generate;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod scatter;
pub mod sum;

pub use filters::{Filter, FilterBank, Label};
pub use grid::{Grid, Signal, SpectralSignal};
pub use scatter::{EnergyProfile, ScatterOptions, ScatteringTree};
