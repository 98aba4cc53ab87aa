use serde::{Deserialize, Serialize};

use super::config::{SimConfig, Species};
use super::outcome::Outcome;
use super::world::World;

/// Population and resource totals after one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub tick: u32,
    pub prey_count: usize,
    pub pred_count: usize,
    pub total_grass: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    pub fingerprint: u64,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Runs to `max_ticks`, or until no agent remains, and classifies the end state.
pub fn run_simulation(cfg: &SimConfig) -> Outcome {
    simulate(cfg, false).outcome
}

/// As [`run_simulation`], also returning the final world digest and,
/// if requested, the per-tick trajectory.
pub fn simulate(cfg: &SimConfig, trace: bool) -> RunResult {
    let mut world = World::init(cfg);
    let mut trajectory = trace.then(Vec::new);
    let record = |w: &World, traj: &mut Option<Vec<TrajectoryPoint>>| {
        if let Some(t) = traj {
            t.push(TrajectoryPoint {
                tick: w.tick(),
                prey_count: w.count(Species::Bandicoot),
                pred_count: w.count(Species::Fox),
                total_grass: w.total_grass(),
            });
        }
    };
    record(&world, &mut trajectory);
    while !world.agents().is_empty() && world.step(cfg) {
        record(&world, &mut trajectory);
    }
    let outcome = Outcome::new(
        world.count(Species::Bandicoot),
        world.count(Species::Fox),
        world.tick(),
    );
    RunResult {
        outcome,
        fingerprint: world.fingerprint(),
        trajectory,
    }
}
