//! Two-lane driving micro-simulator: kinematic-bicycle ego under steering
//! control, scripted traffic, semantic-grid observations, reward and shaping.
//!
//! Coordinates: `x` is lateral, 0 at the left road edge and 7 at the right;
//! `y` is longitudinal, increasing in the direction of travel.

mod grid;
mod novelty;
mod scenario;
mod world;

use std::io::Write;

pub use grid::{render_grid, Category, GridSpec, SemanticGrid, PALETTE};
pub use novelty::{novelty_bonus, EpisodicCounts, NoveltyState, RunningStats};
pub use scenario::{
    catalog, write_catalog, EgoSpawn, Lane, ObstacleSpec, ParticipantKind, PedestrianSpec, ScenarioSpec, Side,
    LANE_WIDTH, ROAD_WIDTH,
};
pub use world::{
    Aabb, Ego, EnvConfig, Participant, RewardComponents, RewardWeights, ShapingConfig, ShapingScheme, Termination,
    Tick, WorldState, EGO_LENGTH, EGO_WIDTH,
};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: SemanticGrid,
    /// Unshaped reward `r_t`.
    pub reward: f64,
    pub components: RewardComponents,
    /// Progress and novelty terms, already scaled; zero unless their scheme is active.
    pub shaping: (f64, f64),
    pub cause: Termination,
}

impl StepOutcome {
    pub fn terminal(&self) -> bool {
        self.cause.is_terminal()
    }

    /// Reward the learner sees: `r_t` plus the active shaping term.
    pub fn shaped_reward(&self) -> f64 {
        self.reward + self.shaping.0 + self.shaping.1
    }
}

/// A scenario, its configuration and the running episode.
pub struct DrivingEnv {
    pub spec: ScenarioSpec,
    pub cfg: EnvConfig,
    world: WorldState,
    novelty: Option<NoveltyState>,
}

impl DrivingEnv {
    /// `seed` seeds the novelty networks; episode layouts are seeded per `reset`.
    pub fn new(spec: ScenarioSpec, cfg: EnvConfig, seed: u64) -> Result<Self> {
        let world = WorldState::reset(&spec, &cfg, seed)?;
        let novelty = match cfg.shaping.scheme {
            ShapingScheme::Novelty => Some(NoveltyState::new(&cfg.grid, &cfg.shaping, seed)?),
            _ => None,
        };
        Ok(Self { spec, cfg, world, novelty })
    }

    pub fn reset(&mut self, seed: u64) -> Result<SemanticGrid> {
        self.world = WorldState::reset(&self.spec, &self.cfg, seed)?;
        if let Some(n) = &mut self.novelty {
            n.begin_episode();
        }
        Ok(self.render())
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn render(&self) -> SemanticGrid {
        render_grid(&self.world, &self.cfg.grid)
    }

    pub fn step(&mut self, action: f64) -> Result<StepOutcome> {
        let t = self.world.step(action, &self.cfg);
        let next_state = self.render();
        let sh = &self.cfg.shaping;
        let shaping = match sh.scheme {
            ShapingScheme::None => (0.0, 0.0),
            ShapingScheme::Progress => (self.world.progress(sh.progress_scale), 0.0),
            ShapingScheme::Novelty => {
                let n = self.novelty.as_mut().expect("novelty state exists under the novelty scheme");
                let bonus = n.bonus(&next_state, self.world.ego.x, self.world.ego.y)?;
                (0.0, sh.novelty_scale * bonus)
            }
        };
        Ok(StepOutcome { next_state, reward: t.reward, components: t.components, shaping, cause: t.cause })
    }
}

/// One-row-per-step CSV trajectory log.
pub struct TrajectoryLog<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLog<W> {
    pub const HEADER: &'static str =
        "episode,step,x,y,heading,action,reward,c_side,c_front,c_smo,c_fail,f1,f2,yaw_rate,lat_accel,termination";

    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: u64, world: &WorldState, outcome: &StepOutcome) -> Result<()> {
        let e = &world.ego;
        let c = &outcome.components;
        writeln!(
            self.out,
            "{episode},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            world.step,
            e.x,
            e.y,
            e.heading,
            e.alpha,
            outcome.reward,
            c.side,
            c.front,
            c.smooth,
            c.fail,
            outcome.shaping.0,
            outcome.shaping.1,
            e.yaw_rate,
            e.lateral_accel,
            outcome.cause.as_str()
        )?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
