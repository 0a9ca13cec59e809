//! Numerical laboratory for ε-isometries between finite-dimensional real
//! Hilbert spaces.
//!
//! * [`space`]: vectors, matrices, Gram-Schmidt, polar correction.
//! * [`gallery`]: concrete ε-isometry families and sampled certification.
//! * [`extractor`]: the doubling limit `Ux = lim 2^-n f(2^n x)` and the
//!   frame `(U, P, T)`.
//! * [`bounds`]: residual bounds and the inequalities behind them.
//! * [`search`]: adversarial search for the growth constant of the
//!   orthogonal residual.
//! * [`report`]: report documents, CSV tables and text parsers.

pub mod bounds;
pub mod error;
pub mod extractor;
pub mod gallery;
pub mod report;
pub mod rng;
pub mod search;
pub mod space;

pub use error::{Error, Result};
pub use extractor::{assemble_frame, extract_at, ExtractionConfig, ExtractionResult, IsometryFrame};
pub use gallery::{certify, CertReport, Family, Map, MapSpec, SamplerConfig};
pub use search::{search_sharp_a, SearchConfig, SearchResult};
pub use space::{Matrix, Vector};
