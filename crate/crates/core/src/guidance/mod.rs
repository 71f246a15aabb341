//! Human guidance: intervention detection, authority arbitration, schedules
//! and a scripted stand-in for the human driver.

mod detector;
mod oracle;

use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::WorldState;
use crate::error::Result;

pub use detector::{ActivationRule, DetectorConfig, InterventionDetector, REFERENCE_DT};
pub use oracle::{lane_ttc, Oracle, OracleConfig, Proficiency};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    LiveHuman,
    Oracle,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::LiveHuman => "live-human",
            Source::Oracle => "oracle",
        }
    }
}

/// One handwheel sample with the engagement the detector inferred from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuidanceEvent {
    pub step: u64,
    pub handwheel: f64,
    pub source: Source,
    pub engaged: bool,
}

/// Full authority transfer: the human's action when engaged, the agent's otherwise.
/// Returns the executed action and the flag stored with the transition.
pub fn arbitrate(a_drl: f64, event: Option<&GuidanceEvent>, engaged: bool) -> (f64, bool) {
    if !engaged {
        return (a_drl, false);
    }
    match event {
        Some(e) if (0.0..=1.0).contains(&e.handwheel) => (e.handwheel, true),
        _ => {
            log::warn!("engaged without a usable handwheel action; the agent keeps control");
            (a_drl, false)
        }
    }
}

/// Something that can put a hand on the wheel.
pub trait GuidanceSource {
    fn kind(&self) -> Source;

    fn begin_episode(&mut self, world: &WorldState);

    /// Handwheel position for this tick, `None` when no input is available.
    fn sample(&mut self, world: &WorldState) -> Option<f64>;
}

impl GuidanceSource for Oracle {
    fn kind(&self) -> Source {
        Source::Oracle
    }

    fn begin_episode(&mut self, world: &WorldState) {
        self.reset(world);
    }

    fn sample(&mut self, world: &WorldState) -> Option<f64> {
        Some(self.observe(world))
    }
}

/// A source that never touches the wheel.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoGuidance;

impl GuidanceSource for NoGuidance {
    fn kind(&self) -> Source {
        Source::Oracle
    }

    fn begin_episode(&mut self, _: &WorldState) {}

    fn sample(&mut self, _: &WorldState) -> Option<f64> {
        None
    }
}

/// Which episodes the human may take part in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Schedule {
    Continuous,
    /// `allowed` episodes per `block`, drawn uniformly per block from `seed`.
    Intermittent { allowed: u64, block: u64, seed: u64 },
    /// Only the first `episodes` episodes.
    Leading { episodes: u64 },
    Never,
}

impl Schedule {
    pub fn intermittent(seed: u64) -> Self {
        Schedule::Intermittent { allowed: 30, block: 100, seed }
    }

    pub fn allows(&self, episode: u64) -> bool {
        match *self {
            Schedule::Continuous => true,
            Schedule::Never => false,
            Schedule::Leading { episodes } => episode < episodes,
            Schedule::Intermittent { allowed, block, seed } => {
                if allowed >= block {
                    return true;
                }
                let b = episode / block;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93));
                index::sample(&mut rng, block as usize, allowed as usize).iter().any(|i| i as u64 == episode % block)
            }
        }
    }
}

/// Detector plus source: turns raw handwheel samples into guidance events.
pub struct Guide<S> {
    pub source: S,
    pub detector: InterventionDetector,
}

impl<S: GuidanceSource> Guide<S> {
    pub fn new(source: S, detector: DetectorConfig) -> Result<Self> {
        Ok(Self { source, detector: InterventionDetector::new(detector)? })
    }

    pub fn begin_episode(&mut self, world: &WorldState) {
        self.detector.reset();
        self.source.begin_episode(world);
    }

    /// One control tick. Disallowed ticks never read the source and are never engaged.
    pub fn tick(&mut self, step: u64, world: &WorldState, allowed: bool) -> Option<GuidanceEvent> {
        if !allowed {
            self.detector.force_release();
            return None;
        }
        let Some(handwheel) = self.source.sample(world) else {
            self.detector.force_release();
            return None;
        };
        let engaged = self.detector.detect(handwheel);
        Some(GuidanceEvent { step, handwheel, source: self.source.kind(), engaged })
    }
}

/// Percentages of guided steps and of episodes with at least one guided
/// step, from per-episode `(guided, total)` step counts.
pub fn intervention_metrics(episodes: &[(u64, u64)]) -> (f64, f64) {
    let steps: u64 = episodes.iter().map(|e| e.1).sum();
    if steps == 0 {
        return (0.0, 0.0);
    }
    let guided: u64 = episodes.iter().map(|e| e.0).sum();
    let touched = episodes.iter().filter(|e| e.0 > 0).count();
    (100.0 * guided as f64 / steps as f64, 100.0 * touched as f64 / episodes.len() as f64)
}

/// Per-step CSV of guidance activity.
pub struct GuidanceTrace<W: Write> {
    out: W,
}

impl<W: Write> GuidanceTrace<W> {
    pub const HEADER: &'static str = "episode,step,source,handwheel,engaged,action";

    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: u64, event: &GuidanceEvent, executed: f64) -> Result<()> {
        writeln!(
            self.out,
            "{episode},{},{},{},{},{}",
            event.step,
            event.source.as_str(),
            event.handwheel,
            u8::from(event.engaged),
            executed
        )?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
