//! Frame codec.
//!
//! Layout: `u32` little-endian length of type + payload, one type byte, then
//! the payload. Angles are `f64` little-endian radians.

use std::io::{self, Read, Write};

use qcoin_core::Verdict;
use thiserror::Error;

pub const VERSION: u8 = 0x01;
pub const DEFAULT_PORT: u16 = 7707;

/// Frames longer than this are refused before allocating.
pub const MAX_FRAME: u32 = 1 << 20;

pub const PREPARE: u8 = 0;
pub const MEASURE: u8 = 1;
pub const DETECT: u8 = 2;
pub const LOST: u8 = 3;
pub const B_BIT: u8 = 4;
pub const REVEAL: u8 = 5;
pub const VERDICT: u8 = 6;
pub const HELLO: u8 = 7;
pub const ERROR: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Alice = 0,
    Bob = 1,
}

impl Role {
    pub fn from_byte(b: u8) -> Option<Role> {
        match b {
            0 => Some(Role::Alice),
            1 => Some(Role::Bob),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Prepare {
        angle: f64,
    },
    /// One angle per photon, cycled; honest Bob always sends one.
    Measure {
        angles: Vec<f64>,
    },
    /// One outcome per detected photon.
    Detect {
        outcomes: Vec<u8>,
    },
    Lost,
    BBit {
        b: u8,
    },
    Reveal {
        x: u8,
        a: u8,
    },
    Verdict {
        verdict: Verdict,
    },
    Hello {
        version: u8,
        role: Role,
        config: String,
    },
    Error {
        reason: String,
    },
}

impl Message {
    pub fn type_code(&self) -> u8 {
        match self {
            Message::Prepare { .. } => PREPARE,
            Message::Measure { .. } => MEASURE,
            Message::Detect { .. } => DETECT,
            Message::Lost => LOST,
            Message::BBit { .. } => B_BIT,
            Message::Reveal { .. } => REVEAL,
            Message::Verdict { .. } => VERDICT,
            Message::Hello { .. } => HELLO,
            Message::Error { .. } => ERROR,
        }
    }

    pub fn name(&self) -> &'static str {
        type_name(self.type_code())
    }
}

pub fn type_name(code: u8) -> &'static str {
    match code {
        PREPARE => "PREPARE",
        MEASURE => "MEASURE",
        DETECT => "DETECT",
        LOST => "LOST",
        B_BIT => "B_BIT",
        REVEAL => "REVEAL",
        VERDICT => "VERDICT",
        HELLO => "HELLO",
        ERROR => "ERROR",
        _ => "UNKNOWN",
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("truncated frame: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown type 0x{0:02x}")]
    UnknownType(u8),
    #[error("length mismatch for {kind}: {detail}")]
    LengthMismatch { kind: &'static str, detail: String },
    #[error("frame length {0} exceeds limit")]
    TooLong(u32),
    #[error("non-finite angle in {0}")]
    NonFiniteAngle(&'static str),
    #[error("invalid {field} byte {value}")]
    BadValue { field: &'static str, value: u8 },
    #[error("invalid role byte {0}")]
    BadRole(u8),
    #[error("invalid utf-8 in {0}")]
    Utf8(&'static str),
}

fn payload(msg: &Message) -> Vec<u8> {
    match msg {
        Message::Prepare { angle } => angle.to_le_bytes().to_vec(),
        Message::Measure { angles } => angles.iter().flat_map(|a| a.to_le_bytes()).collect(),
        Message::Detect { outcomes } => outcomes.clone(),
        Message::Lost => Vec::new(),
        Message::BBit { b } => vec![*b],
        Message::Reveal { x, a } => vec![*x, *a],
        Message::Verdict { verdict } => vec![verdict.code()],
        Message::Hello {
            version,
            role,
            config,
        } => {
            let mut p = vec![*version, *role as u8];
            p.extend_from_slice(config.as_bytes());
            p
        }
        Message::Error { reason } => reason.as_bytes().to_vec(),
    }
}

pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let body = payload(msg);
    let len = (body.len() + 1) as u32;
    let mut out = Vec::with_capacity(body.len() + 5);
    out.extend_from_slice(&len.to_le_bytes());
    out.push(msg.type_code());
    out.extend_from_slice(&body);
    out
}

fn bit(field: &'static str, value: u8) -> Result<u8, FrameError> {
    if value <= 1 {
        Ok(value)
    } else {
        Err(FrameError::BadValue { field, value })
    }
}

fn exact(kind: &'static str, p: &[u8], n: usize) -> Result<(), FrameError> {
    if p.len() == n {
        Ok(())
    } else {
        Err(FrameError::LengthMismatch {
            kind,
            detail: format!("payload is {} bytes, expected {n}", p.len()),
        })
    }
}

fn angle(kind: &'static str, chunk: &[u8]) -> Result<f64, FrameError> {
    let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FrameError::NonFiniteAngle(kind))
    }
}

/// Decodes the type byte and payload of one frame (length prefix removed).
pub fn decode_body(code: u8, p: &[u8]) -> Result<Message, FrameError> {
    let kind = type_name(code);
    Ok(match code {
        PREPARE => {
            exact(kind, p, 8)?;
            Message::Prepare {
                angle: angle(kind, p)?,
            }
        }
        MEASURE => {
            if p.is_empty() || !p.len().is_multiple_of(8) {
                return Err(FrameError::LengthMismatch {
                    kind,
                    detail: format!(
                        "payload is {} bytes, expected a positive multiple of 8",
                        p.len()
                    ),
                });
            }
            let angles = p
                .chunks_exact(8)
                .map(|c| angle(kind, c))
                .collect::<Result<_, _>>()?;
            Message::Measure { angles }
        }
        DETECT => {
            if p.is_empty() {
                return Err(FrameError::LengthMismatch {
                    kind,
                    detail: "payload is empty, expected at least 1 byte".into(),
                });
            }
            let outcomes = p
                .iter()
                .map(|&o| bit("outcome", o))
                .collect::<Result<_, _>>()?;
            Message::Detect { outcomes }
        }
        LOST => {
            exact(kind, p, 0)?;
            Message::Lost
        }
        B_BIT => {
            exact(kind, p, 1)?;
            Message::BBit { b: bit("b", p[0])? }
        }
        REVEAL => {
            exact(kind, p, 2)?;
            Message::Reveal {
                x: bit("x", p[0])?,
                a: bit("a", p[1])?,
            }
        }
        VERDICT => {
            exact(kind, p, 1)?;
            let verdict = Verdict::from_code(p[0]).ok_or(FrameError::BadValue {
                field: "verdict",
                value: p[0],
            })?;
            Message::Verdict { verdict }
        }
        HELLO => {
            if p.len() < 2 {
                return Err(FrameError::LengthMismatch {
                    kind,
                    detail: format!("payload is {} bytes, expected at least 2", p.len()),
                });
            }
            let role = Role::from_byte(p[1]).ok_or(FrameError::BadRole(p[1]))?;
            let config = std::str::from_utf8(&p[2..]).map_err(|_| FrameError::Utf8(kind))?;
            Message::Hello {
                version: p[0],
                role,
                config: config.to_string(),
            }
        }
        ERROR => {
            let reason = std::str::from_utf8(p).map_err(|_| FrameError::Utf8(kind))?;
            Message::Error {
                reason: reason.to_string(),
            }
        }
        other => return Err(FrameError::UnknownType(other)),
    })
}

/// Decodes exactly one frame; trailing bytes are a length mismatch.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, FrameError> {
    if bytes.len() < 4 {
        return Err(FrameError::Truncated {
            need: 4,
            have: bytes.len(),
        });
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().unwrap());
    if len == 0 {
        return Err(FrameError::LengthMismatch {
            kind: "frame",
            detail: "length 0 leaves no type byte".into(),
        });
    }
    if len > MAX_FRAME {
        return Err(FrameError::TooLong(len));
    }
    let need = 4 + len as usize;
    if bytes.len() < need {
        return Err(FrameError::Truncated {
            need,
            have: bytes.len(),
        });
    }
    if bytes.len() > need {
        return Err(FrameError::LengthMismatch {
            kind: "frame",
            detail: format!("{} trailing bytes", bytes.len() - need),
        });
    }
    decode_body(bytes[4], &bytes[5..])
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

pub fn read_message<R: Read + ?Sized>(r: &mut R) -> Result<Message, ReadError> {
    let mut head = [0u8; 4];
    r.read_exact(&mut head)?;
    let len = u32::from_le_bytes(head);
    if len == 0 {
        return Err(FrameError::LengthMismatch {
            kind: "frame",
            detail: "length 0 leaves no type byte".into(),
        }
        .into());
    }
    if len > MAX_FRAME {
        return Err(FrameError::TooLong(len).into());
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(decode_body(body[0], &body[1..])?)
}

pub fn write_message<W: Write + ?Sized>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()
}
