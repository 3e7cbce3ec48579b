//! Rank-targeted search for bipartite PPT density matrices and tools to
//! classify what the search finds: face dimension in the PPT cone,
//! product vectors in image and kernel, and a conjugate-pair separability
//! test.

pub mod chart;
pub mod cli;
pub mod constructions;
pub mod error;
pub mod face;
pub mod hilbert;
pub mod product;
pub mod search;
pub mod separability;
pub mod survey;

pub use error::{Error, Result};
pub use hilbert::{BipartiteDims, HermitianBasis, HermitianMatrix, PptState};
