//! Tree-structured architecture sampling for one-shot neural architecture
//! search. The crate compares flat samplers (uniform, independent per-node,
//! joint Boltzmann) against Monte Carlo tree search over several hierarchies,
//! including ones learned by clustering architecture output vectors.

pub mod cli;
pub mod distance;
pub mod eval;
pub mod harness;
pub mod hierarchy;
pub mod presets;
pub mod sampler;
pub mod space;
