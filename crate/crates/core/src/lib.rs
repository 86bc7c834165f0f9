//! Forced oscillations of a massive point with friction on a compact surface
//! with boundary.
//!
//! The crate simulates the constrained motion, checks the hypotheses of the
//! existence theorem for T-periodic orbits that stay off the boundary, and
//! finds such orbits as fixed points of the time-T map.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod hypotheses;
pub mod integrate;
pub mod orbit;
pub mod scenarios;
mod sampling;

pub use dynamics::{kinetic_energy, kinetic_energy_rate, rhs, Scenario};
pub use error::{Error, Result};
pub use geometry::{Surface, Vec3};
pub use hypotheses::{check_all, classify_exit, energy_ceiling, BlockSpec, ExitClass, HypothesisReport};
pub use integrate::{integrate, IntegratorConfig, State, Termination, TrajectorySegment};
pub use orbit::{find_orbit, poincare_map, verify_orbit, OrbitOptions, PeriodicOrbit, PoincareResult};
pub use sampling::halton;
