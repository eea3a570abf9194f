//! Harmonic analysis on complex Grassmannians twisted by a determinant
//! character: weight lattices and dimensions, spherical function evaluation,
//! Monte Carlo pairings of orbital measures, and certified spectral series.

pub mod error;
pub mod jacobi;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod sobolev;
pub mod space;
pub mod spherical;
pub mod weights;

pub use error::{Error, Result};
pub use space::{make_space, GrassmannParams};
pub use spherical::{NormalizationMode, SphericalEvalOptions, TorusPoint};
pub use weights::SphericalWeight;

// Re-exported so downstream crates share one version of the numeric stack.
pub use nalgebra;
pub use num_bigint;
pub use num_complex;
pub use rand;
pub use rand_chacha;
pub use rayon;
