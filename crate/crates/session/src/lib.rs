//! Live-session bridge: a websocket endpoint at `/session` that streams
//! frames from a running training loop and feeds the connected driver's
//! handwheel back into it.

use std::net::SocketAddr;

pub mod mailbox;
pub mod protocol;
pub mod server;

pub use mailbox::{Input, LiveSource, Mailbox, MailboxStats};
pub use protocol::{ClientMessage, Command, ControlMessage, FrameMessage, InputMessage, ServerMessage, VERSION};
pub use server::{apply_start, ServeConfig, Server, SessionHooks, PATH};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("socket error: {0}")]
    Socket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Core(#[from] hugdrl::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
