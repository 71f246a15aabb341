use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{Lane, WorldState, EGO_LENGTH, EGO_WIDTH, LANE_WIDTH, ROAD_WIDTH};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proficiency {
    Proficient,
    NonProficient,
}

/// Scripted driver: proportional lane tracking plus a time-to-collision
/// trigger for lane changes, with configurable human-like errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub preset: Proficiency,
    /// Act on hazards whose time to collision drops below this, seconds.
    pub engage_ttc: f64,
    /// Release once the chosen lane is clear for at least this long, seconds.
    pub disengage_ttc: f64,
    /// Standard deviation of noise on the handwheel command.
    pub noise_sd: f64,
    /// Ticks a hazard must be in view before the driver reacts.
    pub reaction_delay: u32,
    /// Probability of committing to the worse lane at a decision.
    pub wrong_lane_prob: f64,
    /// Ticks a lane decision is held before it is reconsidered.
    pub commit_ticks: u32,
    /// Handwheel per metre of lateral error.
    pub lateral_gain: f64,
    /// Handwheel per radian of heading.
    pub heading_gain: f64,
    /// Largest handwheel deflection the driver commands, action units from centre.
    pub max_deflection: f64,
    /// Intervene when the ego's box comes this close to a road edge, metres.
    pub edge_margin: f64,
}

impl OracleConfig {
    pub fn proficient() -> Self {
        Self {
            preset: Proficiency::Proficient,
            engage_ttc: 2.0,
            disengage_ttc: 3.0,
            noise_sd: 0.02,
            reaction_delay: 2,
            wrong_lane_prob: 0.0,
            commit_ticks: 10,
            lateral_gain: 0.3,
            heading_gain: 2.5,
            max_deflection: 0.45,
            edge_margin: 0.4,
        }
    }

    pub fn non_proficient() -> Self {
        Self {
            preset: Proficiency::NonProficient,
            engage_ttc: 1.6,
            disengage_ttc: 3.0,
            noise_sd: 0.05,
            reaction_delay: 6,
            wrong_lane_prob: 0.2,
            commit_ticks: 10,
            lateral_gain: 0.2,
            heading_gain: 1.5,
            max_deflection: 0.45,
            edge_margin: 0.2,
        }
    }

    pub fn preset(p: Proficiency) -> Self {
        match p {
            Proficiency::Proficient => Self::proficient(),
            Proficiency::NonProficient => Self::non_proficient(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.disengage_ttc <= self.engage_ttc || self.engage_ttc <= 0.0 {
            return Err(Error::Config("oracle needs 0 < engage_ttc < disengage_ttc".into()));
        }
        if !(0.0..=1.0).contains(&self.wrong_lane_prob) || self.noise_sd < 0.0 || !(0.0..=0.5).contains(&self.max_deflection) {
            return Err(Error::Config("oracle probabilities must lie in [0, 1] and noise must be non-negative".into()));
        }
        Ok(())
    }
}

const LATERAL_MARGIN: f64 = 0.3;

/// Time until the ego's front reaches the nearest participant ahead whose
/// predicted footprint would touch an ego centred in `lane`. Pedestrians are
/// expected to start walking at their trigger distance. Infinite when nothing
/// closes in.
pub fn lane_ttc(world: &WorldState, lane: Lane) -> f64 {
    let ego = &world.ego;
    let centre = lane.center();
    let front = ego.y + EGO_LENGTH / 2.0;
    let rear = ego.y - EGO_LENGTH / 2.0;
    let forward = ego.speed * ego.heading.cos();
    let mut best = f64::INFINITY;
    for p in &world.traffic {
        let closing = forward - p.vy;
        let p_rear = p.y - p.length / 2.0;
        let p_front = p.y + p.length / 2.0;
        let gap = p_rear - front;
        let t = if p_front > rear && p_rear < front {
            // Alongside: blocking now.
            0.0
        } else if gap >= 0.0 && closing > 0.0 {
            gap / closing
        } else {
            continue;
        };
        // Would an ego centred in the lane touch it when it gets there?
        let idle = p.trigger_distance.map_or(0.0, |d| ((p.y - d - ego.y) / forward.max(1e-6)).max(0.0));
        let x = p.x + p.vx * (t - idle).max(0.0);
        if (x - centre).abs() < p.width / 2.0 + EGO_WIDTH / 2.0 + LATERAL_MARGIN && t < best {
            best = t;
        }
    }
    best
}

/// Scripted stand-in for a human driver.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub cfg: OracleConfig,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    target: Lane,
    wheel: f64,
    intent: bool,
    hazard_ticks: u32,
    commit: u32,
}

impl Oracle {
    pub fn new(cfg: OracleConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let noise = if cfg.noise_sd > 0.0 {
            Some(Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            target: Lane::Right,
            wheel: 0.5,
            intent: false,
            hazard_ticks: 0,
            commit: 0,
        })
    }

    pub fn reset(&mut self, world: &WorldState) {
        self.target = Lane::of(world.ego.x);
        self.wheel = 0.5;
        self.intent = false;
        self.hazard_ticks = 0;
        self.commit = 0;
    }

    pub fn target_lane(&self) -> Lane {
        self.target
    }

    /// Whether the driver currently wants to steer.
    pub fn intent(&self) -> bool {
        self.intent
    }

    /// Physical handwheel position.
    pub fn wheel(&self) -> f64 {
        self.wheel
    }

    fn hazard(&self, world: &WorldState) -> bool {
        lane_ttc(world, self.target) < self.cfg.engage_ttc
    }

    /// A hazard has been in view for the full reaction delay.
    fn reacting(&self) -> bool {
        self.hazard_ticks >= self.cfg.reaction_delay.max(1)
    }

    fn drifting(&self, world: &WorldState) -> bool {
        let b = world.ego.aabb();
        b.x0 < self.cfg.edge_margin || b.x1 > ROAD_WIDTH - self.cfg.edge_margin
    }

    /// Straddling the lane line next to something close.
    fn encroaching(&self, world: &WorldState) -> bool {
        let b = world.ego.aabb();
        b.x0 < LANE_WIDTH
            && b.x1 > LANE_WIDTH
            && [Lane::Left, Lane::Right].iter().any(|&l| lane_ttc(world, l) < self.cfg.engage_ttc)
    }

    fn settled(&self, world: &WorldState) -> bool {
        (world.ego.x - self.target.center()).abs() < 0.3
            && world.ego.heading.abs() < 0.05
            && lane_ttc(world, self.target) > self.cfg.disengage_ttc
    }

    /// Reconsiders the target lane after a hazard has persisted for the reaction delay.
    fn decide(&mut self, world: &WorldState) {
        self.commit = self.commit.saturating_sub(1);
        if self.hazard(world) {
            self.hazard_ticks += 1;
        } else {
            self.hazard_ticks = 0;
        }
        if self.commit > 0 || !self.reacting() {
            return;
        }
        let here = lane_ttc(world, self.target);
        let other = self.target.other();
        let there = lane_ttc(world, other);
        let better = if there > here { other } else { self.target };
        let wrong = self.rng.random::<f64>() < self.cfg.wrong_lane_prob;
        let choice = if wrong { if better == other { self.target } else { other } } else { better };
        // Switches and mistakes are held; staying put is reconsidered every tick.
        if choice != self.target || wrong {
            self.commit = self.cfg.commit_ticks;
        }
        self.target = choice;
    }

    fn track(&mut self, world: &WorldState) -> f64 {
        let e = self.target.center() - world.ego.x;
        let m = self.cfg.max_deflection;
        let mut a = (0.5 + self.cfg.lateral_gain * e - self.cfg.heading_gain * world.ego.heading).clamp(0.5 - m, 0.5 + m);
        // The hand never holds perfectly still, not even at the stop.
        if let Some(n) = &self.noise {
            a += n.sample(&mut self.rng);
        }
        a.clamp(0.0, 1.0)
    }

    /// Full-time driving command (solo driving and demonstrations).
    pub fn command(&mut self, world: &WorldState) -> f64 {
        self.decide(world);
        self.intent = true;
        self.wheel = self.track(world);
        self.wheel
    }

    /// Guidance-mode tick: the driver only moves the handwheel while it
    /// intends to intervene and otherwise leaves it where it is.
    pub fn observe(&mut self, world: &WorldState) -> f64 {
        if !self.intent && self.commit == 0 {
            self.target = Lane::of(world.ego.x);
        }
        self.decide(world);
        let reacting = self.reacting();
        if !self.intent {
            if !reacting && self.encroaching(world) {
                self.target = if lane_ttc(world, Lane::Left) > lane_ttc(world, Lane::Right) { Lane::Left } else { Lane::Right };
                self.intent = true;
            }
            self.intent |= reacting || self.drifting(world);
        } else if !reacting && self.settled(world) {
            self.intent = false;
        }
        if self.intent {
            self.wheel = self.track(world);
        }
        self.wheel
    }
}
