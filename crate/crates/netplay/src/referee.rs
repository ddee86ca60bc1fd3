//! The referee: plays the quantum channel and relays classical messages.
//!
//! Phase order per instance is PREPARE (Alice), MEASURE (Bob), then DETECT or
//! LOST to Bob. After LOST, or a LOST claim from Bob, Alice gets LOST and the
//! instance restarts. Otherwise B_BIT goes to Alice, REVEAL to Bob and VERDICT
//! back to Alice. Alice never sees an angle from Bob and Bob never sees the
//! prepared angle. The referee checks order, not honesty.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use qcoin_core::protocol::{Observation, RecordBook, MAX_ATTEMPTS};
use qcoin_core::rng::{stream, StreamId};
use qcoin_core::source::{Channel, MeasurementPlan};
use qcoin_core::stats::StatsTracker;
use qcoin_core::{FlipRecord, SessionConfig, SessionStats, StateAngle, StopTracker};

use crate::frame::{read_message, write_message, Message, Role, VERSION};
use crate::NetError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct RefereeOptions {
    /// Per-read timeout on each connection; `None` waits forever.
    pub timeout: Option<Duration>,
    /// If set, both parties must declare this config.
    pub expected: Option<SessionConfig>,
}

impl Default for RefereeOptions {
    fn default() -> Self {
        RefereeOptions {
            timeout: Some(DEFAULT_TIMEOUT),
            expected: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub config: SessionConfig,
    pub records: Vec<FlipRecord>,
    pub stats: SessionStats,
}

struct Link<S> {
    conn: S,
    peer: &'static str,
}

impl<S: Read + Write> Link<S> {
    fn send(&mut self, msg: &Message) -> Result<(), NetError> {
        write_message(&mut self.conn, msg).map_err(NetError::Io)
    }

    fn recv(&mut self) -> Result<Message, NetError> {
        match read_message(&mut self.conn).map_err(|e| NetError::from_read(self.peer, e))? {
            Message::Error { reason } => Err(NetError::Remote(format!("{}: {reason}", self.peer))),
            m => Ok(m),
        }
    }

    fn violation(&self, expected: &'static str, got: &Message) -> NetError {
        NetError::PhaseViolation {
            peer: self.peer,
            expected,
            got: got.name(),
        }
    }
}

fn peer_name(role: Role) -> &'static str {
    match role {
        Role::Alice => "alice",
        Role::Bob => "bob",
    }
}

fn hello<S: Read + Write>(link: &mut Link<S>) -> Result<(Role, String), NetError> {
    match link.recv()? {
        Message::Hello {
            version,
            role,
            config,
        } => {
            if version != VERSION {
                return Err(NetError::VersionMismatch(version));
            }
            Ok((role, config))
        }
        other => Err(link.violation("HELLO", &other)),
    }
}

fn handshake<S: Read + Write>(
    first: &mut Link<S>,
    second: &mut Link<S>,
    expected: Option<&SessionConfig>,
) -> Result<SessionConfig, NetError> {
    let (r1, c1) = hello(first)?;
    let (r2, c2) = hello(second)?;
    if r1 == r2 {
        return Err(NetError::Handshake(format!(
            "both parties claim role {}",
            peer_name(r1)
        )));
    }
    first.peer = peer_name(r1);
    second.peer = peer_name(r2);
    let a = SessionConfig::from_toml(&c1)?;
    let b = SessionConfig::from_toml(&c2)?;
    let canonical = a.canonical_text();
    if canonical != b.canonical_text() {
        return Err(NetError::ConfigMismatch);
    }
    if let Some(e) = expected {
        if e.canonical_text() != canonical {
            return Err(NetError::ConfigMismatch);
        }
    }
    for (link, role) in [(&mut *first, r1), (&mut *second, r2)] {
        link.send(&Message::Hello {
            version: VERSION,
            role,
            config: canonical.clone(),
        })?;
    }
    Ok(a)
}

fn play<S: Read + Write>(
    alice: &mut Link<S>,
    bob: &mut Link<S>,
    config: &SessionConfig,
) -> Result<(Vec<FlipRecord>, SessionStats), NetError> {
    let set = config.state_set()?;
    let seed = config.seed;
    let mut channel = Channel::new(
        config.source,
        config.eta,
        set,
        stream(seed, StreamId::Source),
        stream(seed, StreamId::Physics),
    )?;
    let mut book = RecordBook::new(set, config.profile);
    let mut stats = StatsTracker::new(config)?;
    let mut stop = StopTracker::new(config)?;
    let mut records = Vec::new();

    while !stop.is_done() {
        let mut attempts = 0u64;
        let (prepared, plan, outcomes, b) = loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(qcoin_core::Error::AttemptLimit(MAX_ATTEMPTS).into());
            }
            let prepared = match alice.recv()? {
                Message::Prepare { angle } => StateAngle::new(angle)?,
                other => return Err(alice.violation("PREPARE", &other)),
            };
            let plan = match bob.recv()? {
                Message::Measure { angles } => MeasurementPlan::cycling(
                    angles
                        .into_iter()
                        .map(StateAngle::new)
                        .collect::<Result<_, _>>()?,
                )?,
                other => return Err(bob.violation("MEASURE", &other)),
            };
            let outcomes = channel.transmit(prepared, &plan);
            if outcomes.is_empty() {
                bob.send(&Message::Lost)?;
                alice.send(&Message::Lost)?;
                continue;
            }
            bob.send(&Message::Detect {
                outcomes: outcomes.clone(),
            })?;
            match bob.recv()? {
                Message::BBit { b } => break (prepared, plan, outcomes, b),
                Message::Lost => alice.send(&Message::Lost)?,
                other => return Err(bob.violation("B_BIT or LOST", &other)),
            }
        };
        alice.send(&Message::BBit { b })?;
        let reveal = match alice.recv()? {
            Message::Reveal { x, a } => qcoin_core::Reveal { x, a },
            other => return Err(alice.violation("REVEAL", &other)),
        };
        bob.send(&Message::Reveal {
            x: reveal.x,
            a: reveal.a,
        })?;
        let verdict = match bob.recv()? {
            Message::Verdict { verdict } => verdict,
            other => return Err(bob.violation("VERDICT", &other)),
        };
        alice.send(&Message::Verdict { verdict })?;
        let record = book.record(&Observation {
            attempts,
            prepared,
            plan,
            outcomes,
            b,
            reveal,
            verdict,
        });
        stats.push(&record);
        stop.push(verdict.is_mismatch());
        records.push(record);
    }
    Ok((records, stats.snapshot()))
}

/// Runs one session over two connections, in either role order.
///
/// On any failure both parties get an ERROR frame naming it.
pub fn referee_session<S: Read + Write>(
    first: S,
    second: S,
    expected: Option<&SessionConfig>,
) -> Result<Transcript, NetError> {
    let mut l1 = Link {
        conn: first,
        peer: "first connection",
    };
    let mut l2 = Link {
        conn: second,
        peer: "second connection",
    };
    let result = handshake(&mut l1, &mut l2, expected).and_then(|config| {
        let (alice, bob) = if l1.peer == "alice" {
            (&mut l1, &mut l2)
        } else {
            (&mut l2, &mut l1)
        };
        let (records, stats) = play(alice, bob, &config)?;
        Ok(Transcript {
            config,
            records,
            stats,
        })
    });
    if let Err(e) = &result {
        let msg = Message::Error {
            reason: e.to_string(),
        };
        let _ = l1.send(&msg);
        let _ = l2.send(&msg);
    }
    result
}

pub fn referee_tcp(
    first: TcpStream,
    second: TcpStream,
    options: &RefereeOptions,
) -> Result<Transcript, NetError> {
    for s in [&first, &second] {
        s.set_read_timeout(options.timeout)?;
        s.set_nodelay(true)?;
    }
    referee_session(first, second, options.expected.as_ref())
}

/// Accepts connections in pairs and runs each pair on its own thread.
/// Stops accepting after `limit` sessions; results arrive on the receiver.
pub fn serve(
    listener: TcpListener,
    options: RefereeOptions,
    limit: Option<usize>,
) -> mpsc::Receiver<Result<Transcript, NetError>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut started = 0usize;
        let mut pending: Option<TcpStream> = None;
        for conn in listener.incoming() {
            let conn = match conn {
                Ok(c) => c,
                Err(e) => {
                    let _ = tx.send(Err(NetError::Io(e)));
                    continue;
                }
            };
            let Some(first) = pending.take() else {
                pending = Some(conn);
                continue;
            };
            let (tx, options) = (tx.clone(), options.clone());
            thread::spawn(move || {
                let _ = tx.send(referee_tcp(first, conn, &options));
            });
            started += 1;
            if limit.is_some_and(|l| started >= l) {
                break;
            }
        }
    });
    rx
}
