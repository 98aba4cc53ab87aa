//! Spatial predator-prey agent-based model.
//!
//! A toroidal grid of grass patches, some fertile and some hunting zones,
//! hosts bandicoots (grazers) and foxes (predators). Each tick runs in a
//! fixed order: grass regrowth, agents in shuffled order (perceive, move,
//! feed, pay upkeep, age), hunting mortality, starvation and old-age
//! deaths, then reproduction.

mod config;
mod outcome;
mod run;
mod world;

pub use config::{Levers, PerSpecies, SimConfig, SimTemplate, Species, SpeciesConstants};
pub use outcome::{Outcome, Regime};
pub use run::{run_simulation, simulate, RunResult, TrajectoryPoint};
pub use world::{grow_grass, Agent, Patch, World};
