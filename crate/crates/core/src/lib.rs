//! Indoor WDMA visible-light communication network simulator.
//!
//! The crate traces the optical channel of a room lit by ceiling access points
//! (line of sight plus up to two diffuse reflections), turns received optical
//! power into per-user SINR, and solves the joint user / access-point /
//! wavelength assignment problem two ways: a tabular Q-learning agent and an
//! exhaustive-search oracle that serves as ground truth.
//!
//! Module map:
//!
//! - [`geometry`]: vectors, the room, surface discretisation, Lambertian point gain.
//! - [`channel`]: per-link received optical power and the [`PowerMatrix`].
//! - [`link`]: receiver noise, SINR and the sum-SINR reward.
//! - [`mdp`]: assignments, action space, QoS states and the environment.
//! - [`qlearn`]: the Q-learning agent.
//! - [`oracle`]: exhaustive optimal assignment.
//! - [`scenario`] / [`experiment`]: configuration files and report emission.

pub mod cache;
pub mod channel;
mod error;
pub mod experiment;
pub mod geometry;
pub mod link;
pub mod mdp;
pub mod oracle;
pub mod qlearn;
pub mod scenario;

pub use channel::{PowerBreakdown, PowerMatrix};
pub use error::{Error, Result};
pub use geometry::Vec3;
pub use link::{LinkBudget, RewardScale};
pub use mdp::{ActionSpace, Assignment, Environment, Slot, State};
pub use qlearn::{Hyperparams, QTable, TrainTrace};
pub use scenario::ScenarioConfig;
