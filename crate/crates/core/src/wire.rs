//! Length-prefixed message frames: 4-byte big-endian payload length,
//! 1-byte message type, payload.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Largest accepted payload.
pub const MAX_FRAME: usize = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    EvalReq = 1,
    EvalResp = 2,
    UpdateReq = 3,
    UpdateResp = 4,
    AuditReq = 5,
    AuditResp = 6,
    UpdateFetch = 7,
    UpdateFetchResp = 8,
    Ack = 9,
    Error = 10,
}

impl MessageType {
    pub fn from_u8(b: u8) -> Result<Self> {
        use MessageType::*;
        Ok(match b {
            1 => EvalReq,
            2 => EvalResp,
            3 => UpdateReq,
            4 => UpdateResp,
            5 => AuditReq,
            6 => AuditResp,
            7 => UpdateFetch,
            8 => UpdateFetchResp,
            9 => Ack,
            10 => Error,
            _ => return Err(crate::Error::decode(format!("unknown message type {b}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WireFrame {
    pub kind: MessageType,
    pub payload: Vec<u8>,
}

impl WireFrame {
    pub fn new(kind: MessageType, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame.
    pub fn decode(b: &[u8]) -> Result<Self> {
        if b.len() < 5 {
            return Err(Error::decode("truncated frame header"));
        }
        let len = u32::from_be_bytes(b[..4].try_into().unwrap()) as usize;
        let kind = MessageType::from_u8(b[4])?;
        if b.len() - 5 != len {
            return Err(Error::decode("frame length does not match payload"));
        }
        Ok(Self {
            kind,
            payload: b[5..].to_vec(),
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut head = [0u8; 5];
        r.read_exact(&mut head)?;
        let len = u32::from_be_bytes(head[..4].try_into().unwrap()) as usize;
        if len > MAX_FRAME {
            return Err(Error::decode("frame too large"));
        }
        let kind = MessageType::from_u8(head[4])?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)?;
        Ok(Self { kind, payload })
    }

    /// Fails unless the frame has type `kind`; error frames surface their text.
    pub fn expect(self, kind: MessageType) -> Result<Vec<u8>> {
        if self.kind == kind {
            return Ok(self.payload);
        }
        if self.kind == MessageType::Error {
            return Err(Error::invalid(format!(
                "peer error: {}",
                String::from_utf8_lossy(&self.payload)
            )));
        }
        Err(Error::decode(format!(
            "expected {kind:?} frame, got {:?}",
            self.kind
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let f = WireFrame::new(MessageType::AuditResp, vec![9, 8, 7]);
        let b = f.encode();
        assert_eq!(&b[..5], &[0, 0, 0, 3, 6]);
        assert_eq!(WireFrame::decode(&b).unwrap(), f);
        let mut cur = std::io::Cursor::new(b.clone());
        assert_eq!(WireFrame::read_from(&mut cur).unwrap(), f);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(WireFrame::decode(&[0, 0, 0, 1, 2]).is_err());
        assert!(WireFrame::decode(&[0, 0, 0, 0, 77]).is_err());
        assert!(WireFrame::decode(&[0, 0]).is_err());
        let f = WireFrame::new(MessageType::Error, b"boom".to_vec());
        assert!(f.expect(MessageType::Ack).is_err());
    }
}
