//! Linear constraints on partial diffraction amplitudes of decorated aperiodic tilings.
//!
//! The pipeline: a flat-branched semi-simplicial complex ([`fbs::FbsComplex`]) encodes the
//! local rules; [`cycles`] builds the module of twisted chains over the Laurent ring of the
//! frequency lattice and compiles its top-degree cycles into exponential sums; [`tilings`]
//! generates concrete patches; [`diffraction`] measures amplitudes on them and checks the
//! constraints.

pub mod cycles;
pub mod diffraction;
pub mod error;
pub mod fbs;
pub mod intmat;
pub mod laurent;
pub mod presets;
pub mod rational;
pub mod simplicial;
pub mod tilings;

pub use error::{Error, Result};
