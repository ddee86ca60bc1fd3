//! Role clients. Each runs its strategy from the shared config, drawing only
//! from its own role stream, and stops by the same rule as the referee.

use std::io::{Read, Write};

use qcoin_core::protocol::BobAction;
use qcoin_core::rng::{stream, StreamId};
use qcoin_core::strategies::{alice_strategy, bob_strategy};
use qcoin_core::{Reveal, SessionConfig, StopTracker, Verdict};

use crate::frame::{read_message, write_message, Message, Role, VERSION};
use crate::NetError;

/// What one party saw of a finished session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartyLog {
    pub verdicts: Vec<Verdict>,
    /// Send attempts summed over all instances, as seen by this party.
    pub attempts: u64,
}

struct Conn<S> {
    s: S,
}

impl<S: Read + Write> Conn<S> {
    fn send(&mut self, msg: &Message) -> Result<(), NetError> {
        write_message(&mut self.s, msg).map_err(NetError::Io)
    }

    fn recv(&mut self) -> Result<Message, NetError> {
        match read_message(&mut self.s).map_err(|e| NetError::from_read("referee", e))? {
            Message::Error { reason } => Err(NetError::Remote(reason)),
            m => Ok(m),
        }
    }

    fn violation(&mut self, expected: &'static str, got: &Message) -> NetError {
        let e = NetError::PhaseViolation {
            peer: "referee",
            expected,
            got: got.name(),
        };
        let _ = self.send(&Message::Error {
            reason: e.to_string(),
        });
        e
    }

    fn hello(&mut self, role: Role, config: &SessionConfig) -> Result<(), NetError> {
        self.send(&Message::Hello {
            version: VERSION,
            role,
            config: config.canonical_text(),
        })?;
        match self.recv()? {
            Message::Hello { version, .. } if version == VERSION => Ok(()),
            Message::Hello { version, .. } => Err(NetError::VersionMismatch(version)),
            other => Err(self.violation("HELLO", &other)),
        }
    }
}

pub fn play_alice<S: Read + Write>(conn: S, config: &SessionConfig) -> Result<PartyLog, NetError> {
    config.validate()?;
    let set = config.state_set()?;
    let mut alice = alice_strategy(&config.profile, set, stream(config.seed, StreamId::Alice));
    let mut stop = StopTracker::new(config)?;
    let mut conn = Conn { s: conn };
    let mut log = PartyLog::default();
    conn.hello(Role::Alice, config)?;
    while !stop.is_done() {
        let b = loop {
            log.attempts += 1;
            let angle = alice.prepare();
            conn.send(&Message::Prepare {
                angle: angle.radians(),
            })?;
            match conn.recv()? {
                Message::Lost => continue,
                Message::BBit { b } => break b,
                other => return Err(conn.violation("B_BIT or LOST", &other)),
            }
        };
        let Reveal { x, a } = alice.reveal(b);
        conn.send(&Message::Reveal { x, a })?;
        let verdict = match conn.recv()? {
            Message::Verdict { verdict } => verdict,
            other => return Err(conn.violation("VERDICT", &other)),
        };
        log.verdicts.push(verdict);
        stop.push(verdict.is_mismatch());
    }
    Ok(log)
}

pub fn play_bob<S: Read + Write>(conn: S, config: &SessionConfig) -> Result<PartyLog, NetError> {
    config.validate()?;
    let set = config.state_set()?;
    let mut bob = bob_strategy(&config.profile, set, stream(config.seed, StreamId::Bob));
    let mut stop = StopTracker::new(config)?;
    let mut conn = Conn { s: conn };
    let mut log = PartyLog::default();
    conn.hello(Role::Bob, config)?;
    while !stop.is_done() {
        let b = loop {
            log.attempts += 1;
            let plan = bob.plan();
            conn.send(&Message::Measure {
                angles: plan.angles().iter().map(|a| a.radians()).collect(),
            })?;
            let outcomes = match conn.recv()? {
                Message::Lost => continue,
                Message::Detect { outcomes } => outcomes,
                other => return Err(conn.violation("DETECT or LOST", &other)),
            };
            match bob.on_detection(&outcomes) {
                BobAction::DeclareLost => conn.send(&Message::Lost)?,
                BobAction::Commit(b) => {
                    conn.send(&Message::BBit { b })?;
                    break b;
                }
            }
        };
        let reveal = match conn.recv()? {
            Message::Reveal { x, a } => Reveal { x, a },
            other => return Err(conn.violation("REVEAL", &other)),
        };
        let verdict = bob.verdict(reveal, b);
        conn.send(&Message::Verdict { verdict })?;
        log.verdicts.push(verdict);
        stop.push(verdict.is_mismatch());
    }
    Ok(log)
}
