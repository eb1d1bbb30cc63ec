//! Frame codec: a 4-byte big-endian length followed by a UTF-8 JSON object
//! whose `kind` key is one of `pub`, `sub`, `call`, `reply` or `err`.
//!
//! WebSocket connections carry the same bytes, one frame per binary message.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::{BusError, Document, Envelope, ServiceCall, TopicName};

/// Upper bound on a single frame body.
pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Frame {
    /// Topic message. Inbound `seq` is ignored; the broker assigns it.
    Pub(Envelope),
    Sub {
        topic: TopicName,
    },
    Call(ServiceCall),
    Reply {
        call_id: u64,
        response: Document,
    },
    Err {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        call_id: Option<u64>,
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<Document>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NoSuchService,
    Timeout,
    HandlerError,
    InvalidTopic,
    DuplicateCallId,
    BadFrame,
}

impl Frame {
    pub fn from_error(call_id: Option<u64>, err: &BusError) -> Frame {
        let (code, detail) = match err {
            BusError::NoSuchService(_) => (ErrorCode::NoSuchService, None),
            BusError::Timeout(_) => (ErrorCode::Timeout, None),
            BusError::HandlerError(doc) => (ErrorCode::HandlerError, Some(doc.clone())),
            BusError::InvalidTopic(_) => (ErrorCode::InvalidTopic, None),
            _ => (ErrorCode::BadFrame, None),
        };
        Frame::Err {
            call_id,
            code,
            message: err.to_string(),
            detail,
        }
    }

    /// Maps an `err` frame back to the error it encodes.
    pub fn into_error(code: ErrorCode, message: String, detail: Option<Document>) -> BusError {
        match code {
            ErrorCode::NoSuchService => BusError::NoSuchService(message),
            ErrorCode::Timeout => BusError::Timeout(message),
            ErrorCode::HandlerError => BusError::HandlerError(detail.unwrap_or(Document::Null)),
            ErrorCode::InvalidTopic => BusError::InvalidTopic(message),
            ErrorCode::DuplicateCallId | ErrorCode::BadFrame => BusError::Codec(message),
        }
    }
}

/// Serializes a frame body (JSON, no prefix).
pub fn encode_body(frame: &Frame) -> Vec<u8> {
    serde_json::to_vec(frame).expect("frame serialization is infallible")
}

pub fn decode_body(body: &[u8]) -> Result<Frame, BusError> {
    serde_json::from_slice(body).map_err(|e| BusError::Codec(e.to_string()))
}

/// Serializes a frame with its length prefix.
pub fn encode(frame: &Frame) -> Vec<u8> {
    let body = encode_body(frame);
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes one prefixed frame from the front of `buf`.
///
/// Returns `Ok(None)` when `buf` does not yet hold a complete frame, and
/// otherwise the frame plus the number of bytes consumed.
pub fn decode(buf: &[u8]) -> Result<Option<(Frame, usize)>, BusError> {
    if buf.len() < 4 {
        return Ok(None);
    }
    let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    if len > MAX_FRAME_LEN {
        return Err(BusError::Codec(format!("frame length {len} exceeds limit")));
    }
    if buf.len() < 4 + len {
        return Ok(None);
    }
    let frame = decode_body(&buf[4..4 + len])?;
    Ok(Some((frame, 4 + len)))
}

/// Decodes a buffer that must contain exactly one prefixed frame.
pub fn decode_exact(buf: &[u8]) -> Result<Frame, BusError> {
    match decode(buf)? {
        Some((frame, used)) if used == buf.len() => Ok(frame),
        Some(_) => Err(BusError::Codec("trailing bytes after frame".into())),
        None => Err(BusError::Codec("truncated frame".into())),
    }
}

/// Reads the next frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Frame>, BusError> {
    let mut prefix = [0u8; 4];
    match reader.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_FRAME_LEN {
        return Err(BusError::Codec(format!("frame length {len} exceeds limit")));
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    decode_body(&body).map(Some)
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &Frame) -> Result<(), BusError> {
    writer.write_all(&encode(frame))?;
    Ok(())
}
