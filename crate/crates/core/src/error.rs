use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a verifier refused a transcript.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    MerkleFail,
    PairingFail,
    DotFail,
    Malformed,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MerkleFail => "MERKLE_FAIL",
            RejectReason::PairingFail => "PAIRING_FAIL",
            RejectReason::DotFail => "DOT_FAIL",
            RejectReason::Malformed => "MALFORMED",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("verification rejected: {0}")]
    Rejected(RejectReason),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("random draw failed after {0} attempts: {1}")]
    RedrawLimit(u32, &'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(
        "homomorphic capacity exceeded: {terms} terms of plaintexts below {modulus_bits}-bit m need a modulus over {needed_bits} bits, key has {key_bits}"
    )]
    Capacity {
        terms: usize,
        modulus_bits: u32,
        needed_bits: u32,
        key_bits: u32,
    },
    #[error("key size {bits} below the minimum of {min} bits (set VESPO_TEST_MODE=1 to allow)")]
    KeyTooSmall { bits: u32, min: u32 },
    #[error("ciphertexts belong to different keys")]
    KeyMismatch,
    #[error("unsupported curve '{0}'")]
    UnsupportedCurve(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn reject_reason(&self) -> Option<RejectReason> {
        match self {
            Error::Rejected(r) => Some(*r),
            _ => None,
        }
    }
}
