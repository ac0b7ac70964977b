//! Multi-agent exploration of sparse landmark complexes.
//!
//! Agents with range- and resolution-limited disk sensors explore obstacle
//! worlds whose landmarks may have been destroyed. Every co-visible set of
//! landmarks they observe is pushed to a server through a versioned sync
//! protocol and becomes a simplex of the shared landmark complex. The crate
//! provides:
//!
//! - [`complex`]: the landmark complex with closure-preserving insertion,
//!   skeleton, hop paths and a versioned insertion log
//! - [`world`]: the discrete-time arena, disk agents and the grid sensor
//! - [`placement`]: landmark placement by filtration over sensor radii, and
//!   random landmark destruction
//! - [`curriculum`]: the three-stage episode schedule and obstacle sampler
//! - [`sync`]: client/server synchronization, in-process and over TCP
//! - [`reward`]: the five-term step reward
//! - [`frontier`]: scripted frontier and random baseline policies
//! - [`env`]: episode runner and the external-policy gateway protocol
//! - [`bench`]: batched trials, confidence intervals, CSV and SVG output
//!
//! Runnable walkthroughs for each of these live in `examples/`.

pub mod bench;
pub mod complex;
pub mod curriculum;
pub mod env;
pub mod frontier;
pub mod geometry;
pub mod placement;
pub mod reward;
pub mod rng;
pub mod sync;
pub mod world;

pub use complex::{InsertionDelta, InsertionRecord, LandmarkComplex, LandmarkId, Simplex};
pub use geometry::{Point, Rect};
pub use world::{Action, AgentState, LandmarkInstance, SensorReading, World, WorldConfig};
