//! Wire messages. Every message is one JSON text frame carrying `"v"` and `"type"`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use hugdrl::agents::{EpisodeRecord, TickReport};
use hugdrl::env::{ParticipantKind, RewardComponents, WorldState};

pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoFrame {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub lat_accel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantFrame {
    pub kind: ParticipantKind,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
}

/// One control tick as the agent saw it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub v: u32,
    pub session_id: String,
    pub episode: u64,
    pub step: u64,
    pub ego: EgoFrame,
    pub participants: Vec<ParticipantFrame>,
    /// Executed handwheel position.
    pub action: f64,
    /// Guidance flag `I` stored with the transition.
    pub guidance: bool,
    pub reward: f64,
    pub components: RewardComponents,
    pub episode_reward: f64,
    pub variant: String,
    pub finish_y: f64,
    /// Client timestamp of the input read on this tick, for round-trip timing.
    pub input_ts: Option<f64>,
}

impl FrameMessage {
    pub fn from_tick(session_id: &str, variant: &str, tick: &TickReport<'_>, input_ts: Option<f64>) -> Self {
        let w: &WorldState = tick.world;
        Self {
            v: VERSION,
            session_id: session_id.to_string(),
            episode: tick.episode,
            step: tick.step,
            ego: EgoFrame {
                x: w.ego.x,
                y: w.ego.y,
                heading: w.ego.heading,
                speed: w.ego.speed,
                yaw_rate: w.ego.yaw_rate,
                lat_accel: w.ego.lateral_accel,
            },
            participants: w
                .traffic
                .iter()
                .map(|p| ParticipantFrame { kind: p.kind, x: p.x, y: p.y, vx: p.vx, vy: p.vy, length: p.length, width: p.width })
                .collect(),
            action: tick.action,
            guidance: tick.guided,
            reward: tick.reward,
            components: tick.components.clone(),
            episode_reward: tick.episode_reward,
            variant: variant.to_string(),
            finish_y: w.finish_y,
            input_ts,
        }
    }
}

/// End-of-episode totals, identical to the persisted metric row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMessage {
    pub v: u32,
    pub session_id: String,
    pub episode: u64,
    pub reward: f64,
    pub mean_step_reward: f64,
    pub steps: u64,
    pub guided_steps: u64,
    pub cause: String,
}

impl EpisodeMessage {
    pub fn from_record(session_id: &str, r: &EpisodeRecord) -> Self {
        Self {
            v: VERSION,
            session_id: session_id.to_string(),
            episode: r.episode,
            reward: r.reward,
            mean_step_reward: r.mean_step_reward,
            steps: r.steps,
            guided_steps: r.guided_steps,
            cause: r.cause.as_str().to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Running,
    Paused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    Observer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatusMessage {
    pub v: u32,
    pub session_id: String,
    pub state: SessionState,
    pub run_id: Option<String>,
    pub pacing: f64,
    /// Role of the client receiving this message.
    pub role: Role,
    pub stale_inputs: u64,
    pub superseded_inputs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMessage {
    pub v: u32,
    pub session_id: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(FrameMessage),
    Episode(EpisodeMessage),
    Status(StatusMessage),
    Error(ErrorMessage),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialise")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputMessage {
    pub v: u32,
    pub session_id: String,
    /// Client clock, milliseconds.
    pub client_ts: f64,
    /// Handwheel position in `[0, 1]`, 0.5 centred.
    pub handwheel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Pause,
    Resume,
    SetPacing,
    StartRun,
    StopRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    pub v: u32,
    pub session_id: String,
    pub command: Command,
    #[serde(default)]
    pub payload: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Input(InputMessage),
    Control(ControlMessage),
}

impl ClientMessage {
    /// Parses and checks one client text frame.
    pub fn parse(text: &str) -> Result<Self, String> {
        let raw: Value = serde_json::from_str(text).map_err(|e| format!("not JSON: {e}"))?;
        match raw.get("v").and_then(Value::as_u64) {
            Some(v) if v == u64::from(VERSION) => {}
            Some(v) => return Err(format!("unsupported schema version {v}")),
            None => return Err("missing schema version \"v\"".into()),
        }
        let msg: ClientMessage = serde_json::from_value(raw).map_err(|e| format!("bad message: {e}"))?;
        if let ClientMessage::Input(i) = &msg {
            if !(0.0..=1.0).contains(&i.handwheel) {
                return Err(format!("handwheel {} outside [0, 1]", i.handwheel));
            }
            if !i.client_ts.is_finite() {
                return Err("client_ts must be finite".into());
            }
        }
        Ok(msg)
    }

    pub fn session_id(&self) -> &str {
        match self {
            ClientMessage::Input(m) => &m.session_id,
            ClientMessage::Control(m) => &m.session_id,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialise")
    }
}

/// `set_pacing` payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacingPayload {
    /// Multiple of real time; 0 runs unpaced.
    pub pacing: f64,
}

/// `start_run` payload; absent fields keep the server's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartRunPayload {
    pub variant: Option<String>,
    pub scenario: Option<u8>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub shaping: Option<u8>,
    pub preinit: Option<bool>,
    pub episodes: Option<u64>,
}
