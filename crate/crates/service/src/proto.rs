//! The `coplan-proto/1` wire format.
//!
//! Every frame is one JSON object without newlines:
//!
//! ```json
//! {"kind":"action_done","session":"…","seq":3,"payload":{"action":"inspect"}}
//! ```
//!
//! Outbound `seq` numbers increase strictly per session. Inbound `seq` is
//! the sequence number of the suggestion being answered.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PROTO_VERSION: &str = "coplan-proto/1";

/// Message kinds the server sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutboundKind {
    State,
    Suggestion,
    Metrics,
    Error,
}

/// Message kinds clients may send.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InboundKind {
    ActionDone,
    Intervene,
    HandoverConfirm,
}

impl InboundKind {
    pub fn parse(kind: &str) -> Option<Self> {
        match kind {
            "action_done" => Some(InboundKind::ActionDone),
            "intervene" => Some(InboundKind::Intervene),
            "handover_confirm" => Some(InboundKind::HandoverConfirm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<K> {
    pub kind: K,
    pub session: String,
    pub seq: u64,
    pub payload: Value,
}

pub type Outbound = Envelope<OutboundKind>;

impl Outbound {
    /// Serializes to a single-line frame.
    pub fn to_frame(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Payload of `action_done`. `arc` is only needed when the action name is
/// ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDone {
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<String>,
    #[serde(default)]
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientEvent {
    ActionDone { seq: u64, done: ActionDone },
    Intervene { seq: u64 },
    HandoverConfirm { seq: u64 },
}

impl ClientEvent {
    pub fn seq(&self) -> u64 {
        match self {
            ClientEvent::ActionDone { seq, .. }
            | ClientEvent::Intervene { seq }
            | ClientEvent::HandoverConfirm { seq } => *seq,
        }
    }
}

/// Error codes carried in `error` payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Malformed,
    UnknownKind,
    WrongSession,
    StaleSeq,
    InvalidTransition,
    SessionClosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{code:?}: {message}")]
pub struct ProtoError {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtoError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ProtoError {
            code,
            message: message.into(),
        }
    }

    pub fn payload(&self) -> Value {
        serde_json::json!({ "code": self.code, "message": self.message })
    }
}

/// Parses an inbound frame addressed to `session`.
pub fn parse_inbound(frame: &str, session: &str) -> Result<ClientEvent, ProtoError> {
    let malformed = |m: String| ProtoError::new(ErrorCode::Malformed, m);
    let env: Envelope<String> =
        serde_json::from_str(frame).map_err(|e| malformed(e.to_string()))?;
    if env.session != session {
        return Err(ProtoError::new(
            ErrorCode::WrongSession,
            format!("frame is for session {}", env.session),
        ));
    }
    let kind = InboundKind::parse(&env.kind).ok_or_else(|| {
        ProtoError::new(
            ErrorCode::UnknownKind,
            format!("unknown kind {:?}", env.kind),
        )
    })?;
    let seq = env.seq;
    let empty = |p: &Value| match p {
        Value::Null => true,
        Value::Object(o) => o.is_empty(),
        _ => false,
    };
    Ok(match kind {
        InboundKind::ActionDone => ClientEvent::ActionDone {
            seq,
            done: serde_json::from_value(env.payload).map_err(|e| malformed(e.to_string()))?,
        },
        InboundKind::Intervene if empty(&env.payload) => ClientEvent::Intervene { seq },
        InboundKind::HandoverConfirm if empty(&env.payload) => ClientEvent::HandoverConfirm { seq },
        _ => return Err(malformed(format!("{} takes an empty payload", env.kind))),
    })
}
