use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Control period the derivative thresholds are expressed in.
pub const REFERENCE_DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ActivationRule {
    /// Engage on handwheel motion faster than `ε1`.
    Derivative,
    /// Engage while the handwheel is turned beyond this many degrees from centre.
    Angle { degrees: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Activation threshold on |Δα| per reference tick.
    pub eps1: f64,
    /// Termination threshold on |Δα| per reference tick.
    pub eps2: f64,
    /// Quiet time, seconds, before an intervention ends.
    pub t_n: f64,
    pub dt: f64,
    pub rule: ActivationRule,
    /// Handwheel lock, degrees either side of centre (for the angle rule).
    pub lock_deg: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { eps1: 0.02, eps2: 0.01, t_n: 0.2, dt: 0.05, rule: ActivationRule::Derivative, lock_deg: 135.0 }
    }
}

impl DetectorConfig {
    pub fn window(&self) -> usize {
        (self.t_n / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > self.eps2 && self.eps2 > 0.0) {
            return Err(Error::Config("detector needs eps1 > eps2 > 0".into()));
        }
        if self.dt <= 0.0 || self.window() == 0 {
            return Err(Error::Config("detector window must span at least one tick".into()));
        }
        Ok(())
    }
}

/// Intervention state machine over a stream of handwheel samples.
///
/// `I` rises when the handwheel moves faster than `ε1` and falls once every
/// derivative in the last `t_N` window is below `ε2`.
#[derive(Clone, Debug)]
pub struct InterventionDetector {
    cfg: DetectorConfig,
    last: Option<f64>,
    recent: VecDeque<f64>,
    engaged: bool,
}

impl InterventionDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { recent: VecDeque::with_capacity(cfg.window()), cfg, last: None, engaged: false })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn engaged(&self) -> bool {
        self.engaged
    }

    pub fn last_sample(&self) -> Option<f64> {
        self.last
    }

    /// Forgets history and disengages.
    pub fn reset(&mut self) {
        self.last = None;
        self.recent.clear();
        self.engaged = false;
    }

    /// Termination condition `q`: a full window of sub-`ε2` derivatives.
    pub fn quiet(&self) -> bool {
        self.recent.len() == self.cfg.window() && self.recent.iter().all(|&d| d < self.cfg.eps2)
    }

    /// Feeds one handwheel sample; returns the updated flag.
    pub fn detect(&mut self, sample: f64) -> bool {
        let rate = match self.last {
            Some(prev) => (sample - prev).abs() * REFERENCE_DT / self.cfg.dt,
            None => 0.0,
        };
        self.last = Some(sample);
        if self.recent.len() == self.cfg.window() {
            self.recent.pop_front();
        }
        self.recent.push_back(rate);
        let q = self.quiet();
        self.engaged = match self.cfg.rule {
            ActivationRule::Derivative => {
                if self.engaged {
                    !q
                } else {
                    rate > self.cfg.eps1 && !q
                }
            }
            ActivationRule::Angle { degrees } => {
                let turned = ((sample - 0.5) * 2.0 * self.cfg.lock_deg).abs() > degrees;
                if self.engaged {
                    turned || !q
                } else {
                    turned
                }
            }
        };
        self.engaged
    }

    /// Disengages immediately (input lost).
    pub fn force_release(&mut self) {
        self.engaged = false;
        self.recent.clear();
    }
}
