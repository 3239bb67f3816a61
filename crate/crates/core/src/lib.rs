//! Galton-Watson trees with marks: exact laws, samplers, Rizzolo's map and
//! numerical checks of local limits under mark and protected-node
//! conditioning.

pub mod harness;
pub mod laws;
pub mod oracle;
pub mod samplers;
pub mod scalar;
pub mod transforms;
pub mod tree;

pub use laws::{MarkFunction, OffspringLaw, SeriesDist};
pub use samplers::RngHandle;
pub use scalar::{Arith, Rational, Scalar};
pub use tree::{Address, BallEvent, Restriction, Tree};
