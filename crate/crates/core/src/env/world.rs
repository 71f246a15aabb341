use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::scenario::{ParticipantKind, ScenarioSpec, Side, LANE_WIDTH, ROAD_WIDTH};
use crate::error::{Error, Result};

pub const EGO_LENGTH: f64 = 4.5;
pub const EGO_WIDTH: f64 = 1.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub side: f64,
    pub front: f64,
    pub smooth: f64,
    pub fail: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { side: 1.0, front: 1.0, smooth: 0.5, fail: 5.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingScheme {
    #[default]
    None,
    Progress,
    Novelty,
}

impl ShapingScheme {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Self::None),
            1 => Ok(Self::Progress),
            2 => Ok(Self::Novelty),
            _ => Err(Error::Config(format!("shaping scheme must be 0, 1 or 2, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::None => 0,
            Self::Progress => 1,
            Self::Novelty => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapingConfig {
    pub scheme: ShapingScheme,
    pub progress_scale: f64,
    pub novelty_scale: f64,
    /// Upper clip `L` of the novelty modulation.
    pub novelty_cap: f64,
    pub novelty_lr: f64,
    pub novelty_embedding: usize,
    pub novelty_conv: Vec<usize>,
    pub novelty_kernel: usize,
    /// Episodic visit bins, `(longitudinal, lateral)` metres.
    pub novelty_bin: (f64, f64),
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            scheme: ShapingScheme::None,
            progress_scale: 0.01,
            novelty_scale: 0.1,
            novelty_cap: 5.0,
            novelty_lr: 1e-4,
            novelty_embedding: 128,
            novelty_conv: vec![6, 16],
            novelty_kernel: 6,
            novelty_bin: (1.0, LANE_WIDTH / 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    pub ego_speed: f64,
    pub wheelbase: f64,
    pub steering_ratio: f64,
    /// Handwheel lock, degrees either side of centre.
    pub handwheel_lock_deg: f64,
    pub max_steps: u32,
    pub weights: RewardWeights,
    pub f_sig_ref: f64,
    pub grid: GridSpec,
    pub shaping: ShapingConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            ego_speed: 10.0,
            wheelbase: 2.7,
            steering_ratio: 15.0,
            handwheel_lock_deg: 135.0,
            max_steps: 200,
            weights: RewardWeights::default(),
            f_sig_ref: ROAD_WIDTH / 2.0,
            grid: GridSpec::default(),
            shaping: ShapingConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.ego_speed <= 0.0 || self.wheelbase <= 0.0 || self.steering_ratio <= 0.0 {
            return Err(Error::Config("dt, speed, wheelbase and steering ratio must be positive".into()));
        }
        if self.max_steps == 0 || self.f_sig_ref <= 0.0 {
            return Err(Error::Config("max_steps and f_sig_ref must be positive".into()));
        }
        self.grid.validate()
    }

    /// Front-wheel angle in radians for a normalized handwheel position.
    pub fn wheel_angle(&self, alpha: f64) -> f64 {
        ((alpha - 0.5) * 2.0 * self.handwheel_lock_deg).to_radians() / self.steering_ratio
    }

    pub fn f_sig(&self, d: f64) -> f64 {
        (d.max(0.0) / self.f_sig_ref).tanh()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    None,
    Collision,
    Offroad,
    Success,
    Timeout,
}

impl Termination {
    pub fn is_terminal(self) -> bool {
        self != Termination::None
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Termination::Collision | Termination::Offroad)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::None => "none",
            Termination::Collision => "collision",
            Termination::Offroad => "offroad",
            Termination::Success => "success",
            Termination::Timeout => "timeout",
        }
    }
}

impl std::str::FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::None, Self::Collision, Self::Offroad, Self::Success, Self::Timeout]
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown termination cause {s:?}")))
    }
}

/// Axis-aligned box `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Aabb {
    pub fn centered(x: f64, y: f64, width: f64, length: f64) -> Self {
        Self { x0: x - width / 2.0, x1: x + width / 2.0, y0: y - length / 2.0, y1: y + length / 2.0 }
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ego {
    pub x: f64,
    pub y: f64,
    /// Radians, positive towards +x (rightwards).
    pub heading: f64,
    pub speed: f64,
    pub alpha: f64,
    pub yaw_rate: f64,
    pub lateral_accel: f64,
}

impl Ego {
    pub fn aabb(&self) -> Aabb {
        let (s, c) = (self.heading.sin().abs(), self.heading.cos().abs());
        let hw = (s * EGO_LENGTH + c * EGO_WIDTH) / 2.0;
        let hl = (c * EGO_LENGTH + s * EGO_WIDTH) / 2.0;
        Aabb { x0: self.x - hw, x1: self.x + hw, y0: self.y - hl, y1: self.y + hl }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub kind: ParticipantKind,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
    /// Pedestrians wait at the kerb until the ego is this close to their crossing line.
    pub trigger_distance: Option<f64>,
}

impl Participant {
    pub fn aabb(&self) -> Aabb {
        Aabb::centered(self.x, self.y, self.width, self.length)
    }

    pub fn is_vehicle(&self) -> bool {
        self.kind != ParticipantKind::Pedestrian
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub side: f64,
    pub front: f64,
    pub smooth: f64,
    pub fail: f64,
}

impl RewardComponents {
    pub fn total(&self, w: &RewardWeights) -> f64 {
        w.side * self.side + w.front * self.front + w.smooth * self.smooth + w.fail * self.fail
    }
}

/// Physics and reward for one control tick, before rendering or shaping.
#[derive(Clone, Debug, PartialEq)]
pub struct Tick {
    pub reward: f64,
    pub components: RewardComponents,
    pub cause: Termination,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub ego: Ego,
    pub traffic: Vec<Participant>,
    pub step: u32,
    pub spawn_y: f64,
    pub finish_y: f64,
    pub max_steps: u32,
    pub clipped_actions: u64,
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn reset(spec: &ScenarioSpec, cfg: &EnvConfig, seed: u64) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut traffic = Vec::new();
        for o in &spec.obstacles {
            let (length, width) = o.footprint();
            traffic.push(Participant {
                kind: o.kind,
                x: o.lane.center(),
                y: o.y,
                vx: 0.0,
                vy: cfg.ego_speed - o.relative_speed,
                length,
                width,
                trigger_distance: None,
            });
        }
        for p in &spec.pedestrians {
            // Always draw all three so the stream position never depends on the outcome.
            let present = rng.random::<f64>() < p.probability;
            let u = rng.random::<f64>();
            let coin = rng.random::<bool>();
            if !present {
                continue;
            }
            let y = if p.random_position { p.y_min + u * (p.y_max - p.y_min) } else { (p.y_min + p.y_max) / 2.0 };
            let from_left = match p.side {
                Side::Left => true,
                Side::Right => false,
                Side::Random => coin,
            };
            let (length, width) = ParticipantKind::Pedestrian.footprint();
            let (x, vx) = if from_left { (-width, p.speed) } else { (ROAD_WIDTH + width, -p.speed) };
            traffic.push(Participant {
                kind: ParticipantKind::Pedestrian,
                x,
                y,
                vx,
                vy: 0.0,
                length,
                width,
                trigger_distance: Some(p.trigger_distance),
            });
        }
        Ok(Self {
            ego: Ego {
                x: spec.ego.x,
                y: spec.ego.y,
                heading: spec.ego.heading,
                speed: cfg.ego_speed,
                alpha: 0.5,
                yaw_rate: 0.0,
                lateral_accel: 0.0,
            },
            traffic,
            step: 0,
            spawn_y: spec.ego.y,
            finish_y: spec.finish_y,
            max_steps: spec.max_steps.unwrap_or(cfg.max_steps),
            clipped_actions: 0,
            rng,
        })
    }

    /// Advances one control tick under handwheel position `action`.
    pub fn step(&mut self, action: f64, cfg: &EnvConfig) -> Tick {
        let clipped = !(0.0..=1.0).contains(&action) || action.is_nan();
        let alpha = if action.is_nan() { 0.5 } else { action.clamp(0.0, 1.0) };
        if clipped {
            self.clipped_actions += 1;
            log::warn!("action {action} outside [0, 1]; clipped to {alpha}");
        }
        let prev_alpha = self.ego.alpha;
        let dt = cfg.dt;
        let ego = &mut self.ego;
        ego.alpha = alpha;
        ego.yaw_rate = ego.speed * cfg.wheel_angle(alpha).tan() / cfg.wheelbase;
        ego.lateral_accel = ego.speed * ego.yaw_rate;
        ego.x += ego.speed * ego.heading.sin() * dt;
        ego.y += ego.speed * ego.heading.cos() * dt;
        ego.heading += ego.yaw_rate * dt;

        let ego_y = ego.y;
        for p in &mut self.traffic {
            let walking = p.trigger_distance.is_none_or(|d| ego_y + d >= p.y);
            if walking {
                p.x += p.vx * dt;
                p.y += p.vy * dt;
            }
        }
        self.step += 1;

        let cause = self.termination();
        let components = self.reward_components(prev_alpha, cause, cfg);
        Tick { reward: components.total(&cfg.weights), components, cause, clipped }
    }

    pub fn collides(&self) -> bool {
        let ego = self.ego.aabb();
        self.traffic.iter().any(|p| p.aabb().overlaps(&ego))
    }

    pub fn offroad(&self) -> bool {
        let b = self.ego.aabb();
        b.x0 < 0.0 || b.x1 > ROAD_WIDTH
    }

    /// Ego has reached the finish line with its rear past every vehicle's front.
    pub fn finished(&self) -> bool {
        let rear = self.ego.aabb().y0;
        self.ego.y >= self.finish_y && self.traffic.iter().filter(|p| p.is_vehicle()).all(|p| rear > p.aabb().y1)
    }

    pub fn termination(&self) -> Termination {
        if self.collides() {
            Termination::Collision
        } else if self.offroad() {
            Termination::Offroad
        } else if self.finished() {
            Termination::Success
        } else if self.step >= self.max_steps {
            Termination::Timeout
        } else {
            Termination::None
        }
    }

    /// Gap from the ego's front bumper to the nearest participant ahead in the ego's lane.
    pub fn front_gap(&self, range: f64) -> Option<f64> {
        let lane = super::scenario::Lane::of(self.ego.x);
        let front = self.ego.aabb().y1;
        self.traffic
            .iter()
            .filter(|p| super::scenario::Lane::of(p.x) == lane && (0.0..=ROAD_WIDTH).contains(&p.x))
            .map(|p| p.aabb().y0 - front)
            .filter(|&d| d > -EGO_LENGTH && d <= range)
            .min_by(f64::total_cmp)
            .map(|d| d.max(0.0))
    }

    pub fn reward_components(&self, prev_alpha: f64, cause: Termination, cfg: &EnvConfig) -> RewardComponents {
        let alpha = self.ego.alpha;
        let edge = self.ego.x.min(ROAD_WIDTH - self.ego.x);
        let side = -(1.0 - cfg.f_sig(edge)).powi(2);
        let front = match self.front_gap(cfg.grid.ahead) {
            Some(d) => -(1.0 - cfg.f_sig(d)).powi(2),
            None => 0.0,
        };
        let smooth = -((alpha - prev_alpha).abs() + (alpha - 0.5).abs());
        let fail = if cause.is_failure() { -1.0 } else { 0.0 };
        RewardComponents { side, front, smooth, fail }
    }

    /// Progress-shaping term: metres travelled since spawn, scaled.
    pub fn progress(&self, scale: f64) -> f64 {
        scale * (self.ego.y - self.spawn_y)
    }

    /// `(|yaw rate|, |lateral acceleration|)` at the current tick.
    pub fn dynamics_metrics(&self) -> (f64, f64) {
        (self.ego.yaw_rate.abs(), self.ego.lateral_accel.abs())
    }
}
