//! Dunkl jump processes: radial diffusion in a Weyl chamber, the jump rates
//! it induces on the Weyl group, and the master equation, frozen and
//! perturbative limits built on them.
//!
//! The numerical core is generic over the scalar type ([`Real`], `f32` or
//! `f64`). Aliases for `f64` are exported at the crate root.

pub mod dunklsim;
pub mod error;
pub mod freezing;
pub mod jumprates;
pub mod linalg;
pub mod mastereq;
pub mod perturb;
pub mod radialsde;
pub mod rng;
pub mod rootsys;
pub mod scalar;
pub mod stats;
pub mod weylgroup;

pub use error::{DunklError, Result};
pub use rootsys::{build_root_system, Family, Multiplicities, Orbit, Root, RootSystem, SystemSpec};
pub use scalar::Real;
pub use weylgroup::{GroupElement, GroupTable};

pub type RootSystemF64 = RootSystem<f64>;
pub type RootSystemF32 = RootSystem<f32>;
