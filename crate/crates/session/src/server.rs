use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tungstenite::http::StatusCode;
use tungstenite::{Message, WebSocket};

use hugdrl::agents::{EpisodeRecord, Flow, RunHooks, TickReport, Variant};
use hugdrl::harness::{run_training_with, GuidanceKind, GuidanceMode, RunConfig, RunSpec, TrainingOutcome};

use crate::mailbox::{LiveSource, Mailbox, Rejected};
use crate::protocol::*;
use crate::{Error, Result};

pub const PATH: &str = "/session";

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub session_id: String,
    /// Multiple of real time; 0 runs unpaced.
    pub pacing: f64,
    /// Broadcast every n-th tick.
    pub decimation: u64,
    /// Outgoing messages held per client before the oldest are dropped.
    pub queue: usize,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self { addr: ([127, 0, 0, 1], 8765).into(), session_id: "session".into(), pacing: 1.0, decimation: 1, queue: 256 }
    }
}

struct Outbox {
    id: u64,
    queue: Mutex<VecDeque<String>>,
    dropped: AtomicU64,
}

#[derive(Debug)]
struct Control {
    paused: bool,
    pacing: f64,
    stop: bool,
    run_id: Option<String>,
    pending: VecDeque<StartRunPayload>,
}

struct Shared {
    cfg: ServeConfig,
    mailbox: Arc<Mailbox>,
    control: Mutex<Control>,
    wake: Condvar,
    clients: Mutex<Vec<Arc<Outbox>>>,
    next_id: AtomicU64,
    shutdown: AtomicBool,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Shared {
    fn push(&self, out: &Outbox, text: String) {
        let mut q = lock(&out.queue);
        if q.len() >= self.cfg.queue.max(1) {
            q.pop_front();
            out.dropped.fetch_add(1, Ordering::Relaxed);
        }
        q.push_back(text);
    }

    fn broadcast(&self, msg: &ServerMessage) {
        let text = msg.to_json();
        for c in lock(&self.clients).iter() {
            self.push(c, text.clone());
        }
    }

    fn status_for(&self, client: u64) -> ServerMessage {
        let c = lock(&self.control);
        let stats = self.mailbox.stats();
        let state = match (&c.run_id, c.paused) {
            (None, _) => SessionState::Idle,
            (Some(_), false) => SessionState::Running,
            (Some(_), true) => SessionState::Paused,
        };
        ServerMessage::Status(StatusMessage {
            v: VERSION,
            session_id: self.cfg.session_id.clone(),
            state,
            run_id: c.run_id.clone(),
            pacing: c.pacing,
            role: if self.mailbox.driver() == Some(client) { Role::Driver } else { Role::Observer },
            stale_inputs: stats.stale,
            superseded_inputs: stats.superseded,
        })
    }

    fn broadcast_status(&self) {
        let clients: Vec<Arc<Outbox>> = lock(&self.clients).clone();
        for c in clients {
            let text = self.status_for(c.id).to_json();
            self.push(&c, text);
        }
    }

    fn error(&self, message: impl Into<String>) -> String {
        ServerMessage::Error(ErrorMessage { v: VERSION, session_id: self.cfg.session_id.clone(), message: message.into() }).to_json()
    }

    /// Handles one client text frame; returns an error frame for the sender on rejection.
    fn handle(&self, client: u64, text: &str) -> Option<String> {
        let msg = match ClientMessage::parse(text) {
            Ok(m) => m,
            Err(e) => return Some(self.error(e)),
        };
        if msg.session_id() != self.cfg.session_id {
            return Some(self.error(format!("unknown session {:?}", msg.session_id())));
        }
        if self.mailbox.driver() != Some(client) {
            return Some(self.error("observers cannot send input or control"));
        }
        match msg {
            ClientMessage::Input(i) => match self.mailbox.ingest(client, &i) {
                Ok(_) => None,
                Err(Rejected::NotDriver) => Some(self.error("observers cannot send input or control")),
            },
            ClientMessage::Control(c) => {
                {
                    let mut st = lock(&self.control);
                    match c.command {
                        Command::Pause => st.paused = true,
                        Command::Resume => st.paused = false,
                        Command::StopRun => st.stop = st.run_id.is_some(),
                        Command::SetPacing => match serde_json::from_value::<PacingPayload>(c.payload) {
                            Ok(p) if p.pacing.is_finite() && p.pacing >= 0.0 => st.pacing = p.pacing,
                            Ok(p) => return Some(self.error(format!("pacing {} must be finite and non-negative", p.pacing))),
                            Err(e) => return Some(self.error(format!("set_pacing payload: {e}"))),
                        },
                        Command::StartRun => {
                            let payload = if c.payload.is_null() { Ok(StartRunPayload::default()) } else { serde_json::from_value(c.payload) };
                            match payload {
                                Ok(p) => {
                                    if st.run_id.is_none() && st.pending.is_empty() {
                                        st.pending.push_back(p);
                                    }
                                }
                                Err(e) => return Some(self.error(format!("start_run payload: {e}"))),
                            }
                        }
                    }
                }
                self.wake.notify_all();
                self.broadcast_status();
                None
            }
        }
    }
}

/// A listening `/session` endpoint. The longest-connected client drives; the
/// rest observe. Dropping the server stops accepting clients.
pub struct Server {
    shared: Arc<Shared>,
    local_addr: SocketAddr,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    /// Binds the port and starts accepting clients in the background.
    pub fn bind(cfg: ServeConfig) -> Result<Self> {
        if cfg.decimation == 0 {
            return Err(Error::Config("decimation must be at least 1".into()));
        }
        if !(cfg.pacing.is_finite() && cfg.pacing >= 0.0) {
            return Err(Error::Config("pacing must be finite and non-negative".into()));
        }
        let listener = TcpListener::bind(cfg.addr).map_err(|source| Error::Bind { addr: cfg.addr, source })?;
        let local_addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shared = Arc::new(Shared {
            control: Mutex::new(Control { paused: false, pacing: cfg.pacing, stop: false, run_id: None, pending: VecDeque::new() }),
            cfg,
            mailbox: Mailbox::new(),
            wake: Condvar::new(),
            clients: Mutex::new(Vec::new()),
            next_id: AtomicU64::new(1),
            shutdown: AtomicBool::new(false),
        });
        let sh = shared.clone();
        let accept = thread::spawn(move || accept_loop(listener, sh));
        log::info!("session endpoint ws://{local_addr}{PATH}");
        Ok(Self { shared, local_addr, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}{PATH}", self.local_addr)
    }

    pub fn session_id(&self) -> &str {
        &self.shared.cfg.session_id
    }

    pub fn mailbox(&self) -> Arc<Mailbox> {
        self.shared.mailbox.clone()
    }

    pub fn source(&self) -> LiveSource {
        LiveSource { mailbox: self.mailbox() }
    }

    pub fn clients(&self) -> usize {
        lock(&self.shared.clients).len()
    }

    pub fn pacing(&self) -> f64 {
        lock(&self.shared.control).pacing
    }

    /// Blocks until a client asks for a run, or the timeout passes.
    pub fn wait_for_start(&self, timeout: Option<Duration>) -> Option<StartRunPayload> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut c = lock(&self.shared.control);
        loop {
            if let Some(p) = c.pending.pop_front() {
                return Some(p);
            }
            let wait = match deadline {
                Some(d) => match d.checked_duration_since(Instant::now()) {
                    Some(left) => left.min(Duration::from_millis(100)),
                    None => return None,
                },
                None => Duration::from_millis(100),
            };
            c = self.shared.wake.wait_timeout(c, wait).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    pub fn hooks(&self, variant: Variant, tick_seconds: f64) -> SessionHooks {
        SessionHooks { shared: self.shared.clone(), variant: variant.name(), tick_seconds, ticks: 0, deadline: None }
    }

    /// Trains one cell with the connected driver as the guidance source.
    pub fn run(&self, cfg: &RunConfig, spec: &RunSpec, out_dir: Option<&Path>) -> Result<TrainingOutcome> {
        let mut spec = spec.clone();
        spec.guidance = GuidanceKind::Live;
        {
            let mut c = lock(&self.shared.control);
            c.run_id = Some(spec.run_id());
            c.stop = false;
        }
        self.shared.broadcast_status();
        let mut hooks = self.hooks(spec.variant, cfg.env.dt);
        let out = run_training_with(cfg, &spec, out_dir, self.source(), &mut hooks);
        {
            let mut c = lock(&self.shared.control);
            c.run_id = None;
            c.stop = false;
            c.paused = false;
        }
        self.shared.broadcast_status();
        Ok(out?)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Relaxed);
        self.shared.wake.notify_all();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Applies a `start_run` payload over a base spec.
pub fn apply_start(base: &RunSpec, p: &StartRunPayload) -> hugdrl::Result<RunSpec> {
    let mut s = base.clone();
    if let Some(v) = &p.variant {
        s.variant = v.parse()?;
    }
    if let Some(m) = &p.mode {
        s.mode = m.parse::<GuidanceMode>()?;
    }
    s.scenario = p.scenario.unwrap_or(s.scenario);
    s.seed = p.seed.unwrap_or(s.seed);
    s.shaping = p.shaping.unwrap_or(s.shaping);
    s.preinit = p.preinit.unwrap_or(s.preinit);
    s.episodes = p.episodes.or(s.episodes);
    s.guidance = GuidanceKind::Live;
    s.validate()?;
    Ok(s)
}

/// Broadcasts frames, paces ticks to wall time and honours pause and stop.
pub struct SessionHooks {
    shared: Arc<Shared>,
    variant: &'static str,
    tick_seconds: f64,
    ticks: u64,
    deadline: Option<Instant>,
}

impl RunHooks for SessionHooks {
    fn on_tick(&mut self, tick: &TickReport<'_>) -> Flow {
        let sh = &self.shared;
        if self.ticks % sh.cfg.decimation == 0 || tick.cause.is_terminal() {
            let frame = FrameMessage::from_tick(&sh.cfg.session_id, self.variant, tick, sh.mailbox.used_ts());
            sh.broadcast(&ServerMessage::Frame(frame));
        }
        self.ticks += 1;
        let mut c = lock(&sh.control);
        if c.pacing > 0.0 {
            let period = Duration::from_secs_f64(self.tick_seconds / c.pacing);
            let now = Instant::now();
            let due = match self.deadline {
                Some(d) if d + period > now => d + period,
                _ => now + period,
            };
            self.deadline = Some(due);
            while !c.stop && !sh.shutdown.load(Ordering::Relaxed) {
                let Some(left) = due.checked_duration_since(Instant::now()) else { break };
                c = sh.wake.wait_timeout(c, left).unwrap_or_else(|e| e.into_inner()).0;
            }
        } else {
            self.deadline = None;
        }
        while c.paused && !c.stop && !sh.shutdown.load(Ordering::Relaxed) {
            c = sh.wake.wait_timeout(c, Duration::from_millis(50)).unwrap_or_else(|e| e.into_inner()).0;
            self.deadline = None;
        }
        if c.stop || sh.shutdown.load(Ordering::Relaxed) {
            Flow::Stop
        } else {
            Flow::Continue
        }
    }

    fn on_episode(&mut self, record: &EpisodeRecord) {
        let sh = &self.shared;
        sh.broadcast(&ServerMessage::Episode(EpisodeMessage::from_record(&sh.cfg.session_id, record)));
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    let mut workers = Vec::new();
    while !shared.shutdown.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let sh = shared.clone();
                workers.push(thread::spawn(move || {
                    if let Err(e) = serve_client(stream, &sh) {
                        log::debug!("client {peer}: {e}");
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => log::warn!("accept failed: {e}"),
        }
        workers.retain(|h| !h.is_finished());
    }
    for h in workers {
        let _ = h.join();
    }
}

fn serve_client(stream: TcpStream, shared: &Arc<Shared>) -> Result<()> {
    stream.set_nonblocking(false)?;
    let check_path = |req: &Request, resp: Response| -> std::result::Result<Response, ErrorResponse> {
        if req.uri().path() == PATH {
            Ok(resp)
        } else {
            let mut e = ErrorResponse::new(Some(format!("only {PATH} is served")));
            *e.status_mut() = StatusCode::NOT_FOUND;
            Err(e)
        }
    };
    let mut ws = tungstenite::accept_hdr(stream, check_path).map_err(|e| Error::Socket(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(5)))?;
    let id = shared.next_id.fetch_add(1, Ordering::Relaxed);
    let outbox = Arc::new(Outbox { id, queue: Mutex::new(VecDeque::new()), dropped: AtomicU64::new(0) });
    shared.mailbox.attach(id);
    lock(&shared.clients).push(outbox.clone());
    shared.push(&outbox, shared.status_for(id).to_json());
    let result = pump(&mut ws, shared, &outbox);
    shared.mailbox.detach(id);
    {
        let mut clients = lock(&shared.clients);
        clients.retain(|c| c.id != id);
        if let Some(next) = clients.first() {
            shared.mailbox.attach(next.id);
        }
    }
    let dropped = outbox.dropped.load(Ordering::Relaxed);
    if dropped > 0 {
        log::info!("client {id} fell behind; {dropped} messages dropped");
    }
    shared.broadcast_status();
    result
}

fn pump(ws: &mut WebSocket<TcpStream>, shared: &Shared, outbox: &Outbox) -> Result<()> {
    loop {
        if shared.shutdown.load(Ordering::Relaxed) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return Ok(());
        }
        let pending: Vec<String> = lock(&outbox.queue).drain(..).collect();
        for text in pending {
            ws.write(Message::Text(text)).map_err(|e| Error::Socket(e.to_string()))?;
        }
        match ws.flush() {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(Error::Socket(e.to_string())),
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                if let Some(err) = shared.handle(outbox.id, &text) {
                    shared.push(outbox, err);
                }
            }
            Ok(Message::Binary(_)) => shared.push(outbox, shared.error("binary frames are not part of the protocol")),
            Ok(Message::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(Error::Socket(e.to_string())),
        }
    }
}
