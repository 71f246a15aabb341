use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROAD_WIDTH: f64 = 7.0;
pub const LANE_WIDTH: f64 = 3.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticipantKind {
    Sedan,
    Motorcycle,
    Bus,
    Pedestrian,
}

impl ParticipantKind {
    /// Default footprint as `(length, width)` in metres.
    pub fn footprint(self) -> (f64, f64) {
        match self {
            ParticipantKind::Sedan => (4.5, 1.8),
            ParticipantKind::Motorcycle => (2.2, 0.8),
            ParticipantKind::Bus => (11.0, 2.5),
            ParticipantKind::Pedestrian => (0.5, 0.5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lane {
    Left,
    Right,
}

impl Lane {
    pub fn center(self) -> f64 {
        match self {
            Lane::Left => LANE_WIDTH / 2.0,
            Lane::Right => LANE_WIDTH * 1.5,
        }
    }

    pub fn other(self) -> Lane {
        match self {
            Lane::Left => Lane::Right,
            Lane::Right => Lane::Left,
        }
    }

    /// Lane containing lateral coordinate `x`.
    pub fn of(x: f64) -> Lane {
        if x < LANE_WIDTH {
            Lane::Left
        } else {
            Lane::Right
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub kind: ParticipantKind,
    pub lane: Lane,
    /// Initial longitudinal centre, metres.
    pub y: f64,
    /// `v_ego − v_obstacle`, m/s.
    pub relative_speed: f64,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
}

impl ObstacleSpec {
    pub fn new(kind: ParticipantKind, lane: Lane, y: f64, relative_speed: f64) -> Self {
        Self { kind, lane, y, relative_speed, length: None, width: None }
    }

    pub fn footprint(&self) -> (f64, f64) {
        let (l, w) = self.kind.footprint();
        (self.length.unwrap_or(l), self.width.unwrap_or(w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Random,
}

/// A pedestrian that starts walking across the road once the ego is within
/// `trigger_distance` of its crossing line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub y_min: f64,
    pub y_max: f64,
    /// Draw the crossing line uniformly in `[y_min, y_max]`; otherwise use the midpoint.
    pub random_position: bool,
    pub side: Side,
    /// Lateral walking speed, m/s.
    pub speed: f64,
    pub trigger_distance: f64,
    /// Probability that this pedestrian appears in an episode.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoSpawn {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: u8,
    pub name: String,
    pub finish_y: f64,
    pub ego: EgoSpawn,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub pedestrians: Vec<PedestrianSpec>,
    /// Overrides the environment's episode step limit.
    #[serde(default)]
    pub max_steps: Option<u32>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("scenario {}: {msg}", self.id)));
        if self.id > 5 {
            return bad("id must be 0–5".into());
        }
        if !(0.0..=ROAD_WIDTH).contains(&self.ego.x) {
            return bad("ego spawn off the road".into());
        }
        for o in &self.obstacles {
            let (l, w) = o.footprint();
            if l <= 0.0 || w <= 0.0 || w > LANE_WIDTH {
                return bad(format!("bad footprint {l}×{w}"));
            }
            if o.y + l / 2.0 >= self.finish_y {
                return bad("finish line must lie beyond every obstacle".into());
            }
        }
        for p in &self.pedestrians {
            if p.y_min > p.y_max || !(0.0..=1.0).contains(&p.probability) || p.speed < 0.0 {
                return bad("bad pedestrian spawn".into());
            }
        }
        if self.id == 1 && (!self.obstacles.is_empty() || !self.pedestrians.is_empty()) {
            return bad("scenario 1 carries no traffic".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let spec: ScenarioSpec = toml::from_str(&text)
            .map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Built-in scenario `id`.
    pub fn builtin(id: u8) -> Result<Self> {
        catalog()
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::Config(format!("no scenario {id}")))
    }

    /// Loads `scenario_<id>.toml` from `dir`, or the built-in when `dir` is `None`.
    pub fn resolve(id: u8, dir: Option<&Path>) -> Result<Self> {
        match dir {
            Some(d) => Self::load(&d.join(format!("scenario_{id}.toml"))),
            None => Self::builtin(id),
        }
    }
}

fn spawn_right() -> EgoSpawn {
    EgoSpawn { x: Lane::Right.center(), y: 0.0, heading: 0.0 }
}

fn crossing(y_min: f64, y_max: f64, side: Side, speed: f64, probability: f64) -> PedestrianSpec {
    PedestrianSpec { y_min, y_max, random_position: true, side, speed, trigger_distance: 15.0, probability }
}

/// The six scenarios: 0 trains, 1–5 evaluate.
pub fn catalog() -> Vec<ScenarioSpec> {
    use Lane::*;
    use ParticipantKind::*;
    vec![
        ScenarioSpec {
            id: 0,
            name: "training: three slower sedans, occasional crossing pedestrians".into(),
            finish_y: 180.0,
            ego: spawn_right(),
            obstacles: vec![
                ObstacleSpec::new(Sedan, Right, 14.0, 5.0),
                ObstacleSpec::new(Sedan, Left, 36.0, 5.0),
                ObstacleSpec::new(Sedan, Right, 58.0, 5.0),
            ],
            pedestrians: vec![
                crossing(140.0, 147.0, Side::Random, 1.0, 0.25),
                crossing(160.0, 167.0, Side::Random, 1.0, 0.25),
            ],
            max_steps: Some(380),
        },
        ScenarioSpec {
            id: 1,
            name: "empty road".into(),
            finish_y: 90.0,
            ego: spawn_right(),
            obstacles: vec![],
            pedestrians: vec![],
            max_steps: None,
        },
        ScenarioSpec {
            id: 2,
            name: "urban lane change".into(),
            finish_y: 165.0,
            ego: spawn_right(),
            obstacles: vec![ObstacleSpec::new(Sedan, Right, 10.0, 3.0), ObstacleSpec::new(Sedan, Left, 26.0, 3.0)],
            pedestrians: vec![crossing(115.0, 122.0, Side::Random, 1.0, 1.0), crossing(140.0, 150.0, Side::Random, 1.2, 1.0)],
            max_steps: Some(350),
        },
        ScenarioSpec {
            id: 3,
            name: "urban lane keeping".into(),
            finish_y: 95.0,
            ego: spawn_right(),
            obstacles: vec![
                ObstacleSpec::new(Sedan, Left, 10.0, 5.0),
                ObstacleSpec::new(Sedan, Left, 25.0, 5.0),
                ObstacleSpec::new(Sedan, Left, 40.0, 5.0),
            ],
            pedestrians: vec![],
            max_steps: Some(220),
        },
        ScenarioSpec {
            id: 4,
            name: "highway overtaking".into(),
            finish_y: 185.0,
            ego: spawn_right(),
            obstacles: vec![
                ObstacleSpec::new(Sedan, Right, 9.0, 2.0),
                ObstacleSpec::new(Sedan, Left, 44.0, 4.0),
                ObstacleSpec::new(Sedan, Right, 50.0, 3.0),
            ],
            pedestrians: vec![],
            max_steps: Some(400),
        },
        ScenarioSpec {
            id: 5,
            name: "mixed traffic: bus, motorcycle, pedestrians".into(),
            finish_y: 135.0,
            ego: spawn_right(),
            obstacles: vec![ObstacleSpec::new(Bus, Right, 20.0, 5.0), ObstacleSpec::new(Motorcycle, Left, 46.0, 5.0)],
            pedestrians: vec![crossing(110.0, 118.0, Side::Left, 0.5, 1.0), crossing(112.0, 122.0, Side::Right, 1.5, 1.0)],
            max_steps: Some(300),
        },
    ]
}

/// Writes the built-in catalog as `scenario_<id>.toml` files.
pub fn write_catalog(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for spec in catalog() {
        spec.save(&dir.join(format!("scenario_{}.toml", spec.id)))?;
    }
    Ok(())
}
