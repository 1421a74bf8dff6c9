//! Optimal transport of zero-shot class prototypes on the unit hypersphere.
//!
//! Class prototypes are moved toward the distribution of unlabeled test
//! embeddings (or of detected objects) along the geodesic to their
//! transport-derived Fréchet-mean targets, then used for nearest-prototype
//! inference. The crate also ships the evaluation metrics, file formats and
//! a synthetic von Mises-Fisher data generator.

pub mod error;
pub mod eval;
pub mod io;
pub mod measures;
pub mod ot;
pub mod pipeline;
pub mod sphere;
pub mod synth;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, EmbeddingSet, LikelihoodMatrix};
pub use ot::{CostMatrix, CouplingMatrix};
pub use pipeline::{PipelineConfig, PrototypeSet, ScoreMatrix};
pub use sphere::UnitVector;
