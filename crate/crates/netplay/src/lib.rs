//! Networked play: a framed wire protocol, a referee that simulates the
//! quantum channel between two remote parties, and the two role clients.
//!
//! The referee draws only from the source and physics streams, and each
//! client only from its own role stream, so a networked session reproduces
//! the in-process record stream for the same seed.

pub mod client;
pub mod frame;
pub mod referee;

use std::io;

use thiserror::Error;

pub use client::{play_alice, play_bob, PartyLog};
pub use frame::{decode_frame, encode_frame, FrameError, Message, Role, DEFAULT_PORT, VERSION};
pub use referee::{referee_session, referee_tcp, serve, RefereeOptions, Transcript};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("timeout waiting for {0}")]
    Timeout(&'static str),
    #[error("{0} disconnected")]
    Disconnected(&'static str),
    #[error("decode error from {peer}: {source}")]
    Frame {
        peer: &'static str,
        source: FrameError,
    },
    #[error("phase violation: {peer} sent {got}, expected {expected}")]
    PhaseViolation {
        peer: &'static str,
        expected: &'static str,
        got: &'static str,
    },
    #[error("version mismatch: {0:#04x}")]
    VersionMismatch(u8),
    #[error("config mismatch")]
    ConfigMismatch,
    #[error("handshake: {0}")]
    Handshake(String),
    #[error("peer error: {0}")]
    Remote(String),
    #[error("config: {0}")]
    Core(#[from] qcoin_core::Error),
}

impl NetError {
    pub(crate) fn from_read(peer: &'static str, e: frame::ReadError) -> NetError {
        match e {
            frame::ReadError::Frame(source) => NetError::Frame { peer, source },
            frame::ReadError::Io(e) => match e.kind() {
                io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => NetError::Timeout(peer),
                io::ErrorKind::UnexpectedEof | io::ErrorKind::ConnectionReset => {
                    NetError::Disconnected(peer)
                }
                _ => NetError::Io(e),
            },
        }
    }

    /// Whether the failure is the other side's fault at the protocol level.
    pub fn is_protocol(&self) -> bool {
        !matches!(self, NetError::Io(_) | NetError::Core(_))
    }
}

/// A whole session over loopback TCP: referee and both clients, each on its
/// own thread.
pub fn run_loopback(
    config: &qcoin_core::SessionConfig,
) -> Result<(Transcript, PartyLog, PartyLog), NetError> {
    use std::net::{TcpListener, TcpStream};
    use std::thread;

    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let results = serve(listener, RefereeOptions::default(), Some(1));
    let (ca, cb) = (config.clone(), config.clone());
    let alice = thread::spawn(move || {
        let conn = TcpStream::connect(addr)?;
        conn.set_nodelay(true)?;
        play_alice(conn, &ca)
    });
    let bob = thread::spawn(move || {
        let conn = TcpStream::connect(addr)?;
        conn.set_nodelay(true)?;
        play_bob(conn, &cb)
    });
    let transcript = results
        .recv()
        .map_err(|_| NetError::Handshake("referee exited without a result".into()))?;
    let alice = alice.join().expect("alice thread panicked");
    let bob = bob.join().expect("bob thread panicked");
    let transcript = transcript?;
    Ok((transcript, alice?, bob?))
}
