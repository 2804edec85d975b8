//! Versioned envelope for persisted protocol states.

use std::fmt;
use std::str::FromStr;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::pairing::CurveId;

const MAGIC: &[u8; 4] = b"VSPO";
pub const FORMAT_VERSION: u32 = 1;

/// Tag used by states that carry no encryption key.
pub const NO_LHE: &str = "none";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Ckzg,
    Pubdyn,
    Vespo,
    Dpor,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Ckzg,
        Protocol::Pubdyn,
        Protocol::Vespo,
        Protocol::Dpor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Ckzg => crate::ckzg::PROTOCOL_TAG,
            Protocol::Pubdyn => crate::pubdyn::PROTOCOL_TAG,
            Protocol::Vespo => crate::vespo::PROTOCOL_TAG,
            Protocol::Dpor => crate::dpor::PROTOCOL_TAG,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown protocol '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Client,
    Verifier,
    Server,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Client => "client",
            Role::Verifier => "verifier",
            Role::Server => "server",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "client" => Ok(Role::Client),
            "verifier" => Ok(Role::Verifier),
            "server" => Ok(Role::Server),
            _ => Err(Error::invalid(format!("unknown role '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateContainer {
    pub protocol: Protocol,
    pub role: Role,
    pub curve: CurveId,
    pub lhe: String,
    pub payload: Vec<u8>,
}

impl StateContainer {
    pub fn new(protocol: Protocol, role: Role, curve: CurveId, lhe: &str, payload: Vec<u8>) -> Self {
        Self {
            protocol,
            role,
            curve,
            lhe: lhe.to_string(),
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(MAGIC)
            .u32(FORMAT_VERSION)
            .str(self.protocol.as_str())
            .str(self.role.as_str())
            .str(self.curve.as_str())
            .str(&self.lhe)
            .u64(self.payload.len() as u64)
            .raw(&self.payload);
        w.into_bytes()
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        if r.raw(4).ok() != Some(MAGIC.as_slice()) {
            return Err(Error::decode("not a state file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::decode(format!(
                "state format version {version} is not supported"
            )));
        }
        let protocol = r.str()?.parse()?;
        let role = r.str()?.parse()?;
        let curve = r.str()?.parse()?;
        let lhe = r.str()?.to_string();
        let n = r.count(1)?;
        let payload = r.raw(n)?.to_vec();
        r.finish()?;
        Ok(Self {
            protocol,
            role,
            curve,
            lhe,
            payload,
        })
    }

    /// Rejects a container for another protocol, role or curve.
    pub fn expect(&self, protocol: Protocol, role: Role, curve: Option<CurveId>) -> Result<&[u8]> {
        if self.protocol != protocol {
            return Err(Error::decode(format!(
                "state is for protocol {}, expected {protocol}",
                self.protocol
            )));
        }
        if self.role != role {
            return Err(Error::decode(format!(
                "state is for role {}, expected {role}",
                self.role
            )));
        }
        if let Some(c) = curve {
            if c != self.curve {
                return Err(Error::decode(format!(
                    "state uses curve {}, expected {c}",
                    self.curve
                )));
            }
        }
        Ok(&self.payload)
    }
}
