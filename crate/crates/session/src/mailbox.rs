use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use hugdrl::env::WorldState;
use hugdrl::guidance::{GuidanceSource, Source};

use crate::protocol::InputMessage;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Input {
    pub handwheel: f64,
    pub client_ts: f64,
    pub received: Instant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MailboxStats {
    pub accepted: u64,
    /// Overwritten by a later message before any tick read them.
    pub superseded: u64,
    /// Older than an input already accepted; dropped.
    pub stale: u64,
    pub ticks_with_input: u64,
    pub ticks_without_input: u64,
    /// Receive-to-use delay of the input read on the last tick, milliseconds.
    pub last_age_ms: Option<f64>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Rejected {
    NotDriver,
}

#[derive(Debug, Default)]
struct Slot {
    driver: Option<u64>,
    latest: Option<Input>,
    unread: bool,
    used_ts: Option<f64>,
    stats: MailboxStats,
}

/// Single-slot, latest-wins handwheel mailbox shared by the socket threads
/// and the training loop. The first attached client drives; the rest observe.
#[derive(Debug, Default)]
pub struct Mailbox {
    slot: Mutex<Slot>,
}

impl Mailbox {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn lock(&self) -> MutexGuard<'_, Slot> {
        self.slot.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers a client; returns true when it takes guidance authority.
    pub fn attach(&self, client: u64) -> bool {
        let mut s = self.lock();
        match s.driver {
            None => {
                s.driver = Some(client);
                true
            }
            Some(d) => d == client,
        }
    }

    /// A departing driver takes its hand off the wheel.
    pub fn detach(&self, client: u64) {
        let mut s = self.lock();
        if s.driver == Some(client) {
            s.driver = None;
            s.latest = None;
            s.unread = false;
        }
    }

    pub fn driver(&self) -> Option<u64> {
        self.lock().driver
    }

    /// Stores an input. Returns `Ok(false)` when it was dropped as stale.
    pub fn ingest(&self, client: u64, msg: &InputMessage) -> Result<bool, Rejected> {
        let mut s = self.lock();
        if s.driver != Some(client) {
            return Err(Rejected::NotDriver);
        }
        let newest = s.latest.map(|i| i.client_ts).into_iter().chain(s.used_ts).fold(f64::NEG_INFINITY, f64::max);
        if msg.client_ts < newest {
            s.stats.stale += 1;
            return Ok(false);
        }
        if s.unread {
            s.stats.superseded += 1;
        }
        s.latest = Some(Input { handwheel: msg.handwheel, client_ts: msg.client_ts, received: Instant::now() });
        s.unread = true;
        s.stats.accepted += 1;
        Ok(true)
    }

    /// Once per tick: the newest input, held until replaced; `None` without a driver.
    pub fn take(&self) -> Option<Input> {
        let mut s = self.lock();
        let got = if s.driver.is_some() { s.latest } else { None };
        s.unread = false;
        match got {
            Some(i) => {
                let age = i.received.elapsed().as_secs_f64() * 1e3;
                log::trace!("input ts {} used after {age:.2} ms", i.client_ts);
                s.used_ts = Some(i.client_ts);
                s.stats.ticks_with_input += 1;
                s.stats.last_age_ms = Some(age);
            }
            None => {
                s.stats.ticks_without_input += 1;
                s.stats.last_age_ms = None;
            }
        }
        got
    }

    /// Client timestamp of the input the last tick read.
    pub fn used_ts(&self) -> Option<f64> {
        let s = self.lock();
        s.stats.last_age_ms.and(s.used_ts)
    }

    pub fn stats(&self) -> MailboxStats {
        self.lock().stats
    }
}

/// Guidance read from the mailbox.
#[derive(Clone, Debug)]
pub struct LiveSource {
    pub mailbox: Arc<Mailbox>,
}

impl GuidanceSource for LiveSource {
    fn kind(&self) -> Source {
        Source::LiveHuman
    }

    fn begin_episode(&mut self, _: &WorldState) {}

    fn sample(&mut self, _: &WorldState) -> Option<f64> {
        self.mailbox.take().map(|i| i.handwheel)
    }
}
