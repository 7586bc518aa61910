//! Random-geometry continuous spin systems: point processes, geometric
//! graphs, finite-volume Gibbs kernels and quenched experiments.

pub mod error;
pub mod gibbs;
pub mod graph;
pub mod manifest;
pub mod marked;
pub mod numfmt;
pub mod point_process;
pub mod quench;
pub mod rng;
pub mod spatial;
pub mod spin;
pub mod stats;
pub mod study;
pub mod window;

pub use error::{Error, Result};
pub use gibbs::{KernelSpec, Observable, QuadratureGrid, SamplerConfig};
pub use graph::{GeometricGraph, WeightParams};
pub use manifest::{Manifest, StudyKind};
pub use marked::{load_marked, save_marked, MarkedSet};
pub use numfmt::NumberFormat;
pub use point_process::{ProcessKind, ProcessSpec};
pub use quench::{BoundarySection, VolumeSequence};
pub use spin::{ModelParams, PairPotential, SinglePotential, SiteSet, SpinField};
pub use window::{Bounds, Configuration, Window};
