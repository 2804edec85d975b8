//! Verifiable polynomial evaluation over BN254.
//!
//! Three evaluation protocols share one arithmetic core:
//!
//! * [`ckzg`]: static polynomial, Paillier-encrypted coefficients, private verification.
//! * [`pubdyn`]: clear-text dynamic polynomial, publicly verifiable.
//! * [`vespo`]: encrypted dynamic polynomial with masked exponents and
//!   logarithmic-time client verification.
//!
//! [`dpor`] builds a dynamic proof of retrievability on top of the last one.

pub mod algebra;
pub mod ckzg;
pub mod codec;
pub mod container;
pub mod dpor;
pub mod error;
pub mod lhe;
pub mod merkle;
pub mod opcount;
pub mod pairing;
pub mod polyeval;
pub mod pubdyn;
pub mod vespo;
pub mod wire;

pub use error::{Error, RejectReason, Result};

/// Scalar field of BN254, the plaintext space of every protocol.
pub type Scalar = ark_bn254::Fr;

/// Environment variable that relaxes key-size floors for tests and CI.
pub const TEST_MODE_ENV: &str = "VESPO_TEST_MODE";

/// Minimum Paillier modulus size outside test mode.
pub const MIN_PRODUCTION_LHE_BITS: u32 = 2048;

/// Curve and key-size configuration shared by all setups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecurityConfig {
    pub curve: pairing::CurveId,
    pub lhe_bits: u32,
    pub allow_small_keys: bool,
}

impl SecurityConfig {
    /// Production defaults: BN254, 2048-bit modulus.
    pub fn production() -> Self {
        Self {
            curve: pairing::CurveId::Bn254,
            lhe_bits: MIN_PRODUCTION_LHE_BITS,
            allow_small_keys: false,
        }
    }

    /// Small keys for tests. Only use where the capacity check still passes.
    pub fn testing(lhe_bits: u32) -> Self {
        Self {
            curve: pairing::CurveId::Bn254,
            lhe_bits,
            allow_small_keys: true,
        }
    }

    /// Production defaults, with small keys permitted when `VESPO_TEST_MODE` is set.
    pub fn from_env() -> Self {
        let mut cfg = Self::production();
        cfg.allow_small_keys = test_mode_enabled();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.lhe_bits < MIN_PRODUCTION_LHE_BITS && !self.allow_small_keys {
            return Err(Error::KeyTooSmall {
                bits: self.lhe_bits,
                min: MIN_PRODUCTION_LHE_BITS,
            });
        }
        if self.lhe_bits < 64 {
            return Err(Error::KeyTooSmall {
                bits: self.lhe_bits,
                min: 64,
            });
        }
        Ok(())
    }
}

pub fn test_mode_enabled() -> bool {
    std::env::var(TEST_MODE_ENV)
        .map(|v| !v.is_empty() && v != "0")
        .unwrap_or(false)
}
