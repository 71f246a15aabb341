use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::env::{DrivingEnv, SemanticGrid, ShapingScheme, Termination, WorldState};
use crate::error::{Error, Result};
use crate::guidance::Oracle;
use crate::nn::{Network, Tensor};

/// Anything that can drive: maps the observation to a handwheel position.
pub trait Policy {
    fn begin_episode(&mut self, _world: &WorldState) {}

    fn act(&mut self, state: &SemanticGrid, world: &WorldState) -> Result<f64>;
}

/// Holds the wheel at one position.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn act(&mut self, _: &SemanticGrid, _: &WorldState) -> Result<f64> {
        Ok(self.0)
    }
}

/// A trained actor network, queried without noise.
#[derive(Clone, Debug)]
pub struct ActorPolicy {
    pub net: Network<f64>,
}

impl Policy for ActorPolicy {
    fn act(&mut self, state: &SemanticGrid, _: &WorldState) -> Result<f64> {
        let x = Tensor::new(vec![1, 1, state.rows, state.cols], state.values())?;
        Ok(self.net.predict(&x, None)?.data()[0])
    }
}

impl Policy for Oracle {
    fn begin_episode(&mut self, world: &WorldState) {
        self.reset(world);
    }

    fn act(&mut self, _: &SemanticGrid, world: &WorldState) -> Result<f64> {
        Ok(self.command(world))
    }
}

/// Loads `actor.json` from an agent checkpoint or an imitation output directory.
pub fn load_policy(dir: &Path, cfg: &RunConfig) -> Result<ActorPolicy> {
    let path = dir.join("actor.json");
    if !path.is_file() {
        return Err(Error::Checkpoint { path, reason: "no actor network here".into() });
    }
    Ok(ActorPolicy { net: Network::load(&path, &cfg.layout.actor_spec(&cfg.env.grid))? })
}

/// Spawn offsets and episode seeds for evaluation rollouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Lateral spawn offsets, metres.
    pub spawn_dx: Vec<f64>,
    /// Longitudinal spawn offsets, metres.
    pub spawn_dy: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { spawn_dx: vec![-0.5, -0.25, 0.0, 0.25, 0.5], spawn_dy: vec![0.0], seeds: vec![0, 1] }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spawn_dx.is_empty() || self.spawn_dy.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("evaluation needs at least one spawn offset and seed".into()));
        }
        Ok(())
    }

    pub fn rollouts(&self) -> usize {
        self.spawn_dx.len() * self.spawn_dy.len() * self.seeds.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEval {
    pub scenario: u8,
    pub rollouts: usize,
    pub successes: usize,
    pub collisions: usize,
    pub offroads: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    /// Over every step of every rollout.
    pub mean_yaw_rate: f64,
    pub mean_lat_accel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub scenarios: Vec<ScenarioEval>,
}

impl EvalReport {
    pub const HEADER: &'static str = "policy,scenario,rollouts,successes,collisions,offroads,timeouts,success_rate,mean_yaw_rate,mean_lat_accel";

    /// Successes over rollouts, pooled across scenarios.
    pub fn aggregate_success_rate(&self) -> f64 {
        let n: usize = self.scenarios.iter().map(|s| s.rollouts).sum();
        let k: usize = self.scenarios.iter().map(|s| s.successes).sum();
        if n == 0 {
            0.0
        } else {
            k as f64 / n as f64
        }
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.scenarios
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{},{:?},{:?},{:?}",
                    self.policy,
                    s.scenario,
                    s.rollouts,
                    s.successes,
                    s.collisions,
                    s.offroads,
                    s.timeouts,
                    s.success_rate,
                    s.mean_yaw_rate,
                    s.mean_lat_accel
                )
            })
            .collect()
    }
}

/// Noise-free rollouts over every scenario, spawn offset and seed.
pub fn evaluate_policy(policy: &mut dyn Policy, name: &str, cfg: &RunConfig, scenarios: &[u8]) -> Result<EvalReport> {
    cfg.eval.validate()?;
    let mut env_cfg = cfg.env.clone();
    env_cfg.shaping.scheme = ShapingScheme::None;
    let mut report = EvalReport { policy: name.to_string(), scenarios: Vec::new() };
    for &id in scenarios {
        let base = cfg.scenario(id)?;
        let mut ev = ScenarioEval {
            scenario: id,
            rollouts: 0,
            successes: 0,
            collisions: 0,
            offroads: 0,
            timeouts: 0,
            success_rate: 0.0,
            mean_yaw_rate: 0.0,
            mean_lat_accel: 0.0,
        };
        let mut steps = 0u64;
        for &dx in &cfg.eval.spawn_dx {
            for &dy in &cfg.eval.spawn_dy {
                let mut spec = base.clone();
                spec.ego.x += dx;
                spec.ego.y += dy;
                let mut env = DrivingEnv::new(spec, env_cfg.clone(), 0)?;
                for &seed in &cfg.eval.seeds {
                    let mut state = env.reset(seed)?;
                    policy.begin_episode(env.world());
                    let cause = loop {
                        let a = policy.act(&state, env.world())?;
                        let out = env.step(a)?;
                        let (yaw, lat) = env.world().dynamics_metrics();
                        ev.mean_yaw_rate += yaw;
                        ev.mean_lat_accel += lat;
                        steps += 1;
                        if out.terminal() {
                            break out.cause;
                        }
                        state = out.next_state;
                    };
                    ev.rollouts += 1;
                    match cause {
                        Termination::Success => ev.successes += 1,
                        Termination::Collision => ev.collisions += 1,
                        Termination::Offroad => ev.offroads += 1,
                        Termination::Timeout | Termination::None => ev.timeouts += 1,
                    }
                }
            }
        }
        ev.success_rate = ev.successes as f64 / ev.rollouts as f64;
        ev.mean_yaw_rate /= steps as f64;
        ev.mean_lat_accel /= steps as f64;
        report.scenarios.push(ev);
    }
    Ok(report)
}
