//! Hardcore model on bounded-degree graphs.
//!
//! The crate bundles everything needed to check ℓ∞-spectral independence
//! bounds for the hardcore model by desk computation:
//!
//! - [`graph`]: simple graphs, configurations, pinnings and the
//!   pinning → induced subgraph reduction.
//! - [`graph_enum`]: exhaustive enumeration of small graphs up to isomorphism.
//! - [`exact`]: brute-force partition functions, marginals and influence
//!   matrices.
//! - [`uniqueness`]: the scalar formulas (critical fugacity, tree recursion,
//!   its fixed point, spectral-independence constants, mixing-time bound).
//! - [`tree`]: rooted trees, the tree recursion and root influence sums.
//! - [`saw`]: self-avoiding-walk trees.
//! - [`glauber`]: the Glauber dynamics chain, exact and simulated.

pub mod error;
pub mod exact;
pub mod glauber;
pub mod graph;
pub mod graph_enum;
pub mod saw;
pub mod tree;
pub mod uniqueness;

pub use error::{Error, Result};
pub use graph::{Configuration, Graph, Pinning};
