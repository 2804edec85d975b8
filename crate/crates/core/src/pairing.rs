//! BN254 bilinear groups, "in the exponent" helpers, compact GT encoding and
//! a dual-representation adapter that gives a symmetric pairing interface.

use ark_bn254::{Bn254, Fq12, Fq2, Fq6, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{MillerLoopOutput, Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, ScalarMul, VariableBaseMSM};
use ark_ff::{Field, One, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::opcount;
use crate::Scalar;

pub type G1 = G1Affine;
pub type G2 = G2Affine;
pub type Gt = PairingOutput<Bn254>;
pub type G2Prepared = <Bn254 as Pairing>::G2Prepared;

pub const G1_BYTES: usize = 32;
pub const G2_BYTES: usize = 64;
pub const GT_BYTES: usize = 192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveId {
    Bn254,
}

impl CurveId {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveId::Bn254 => "bn254",
        }
    }
}

impl fmt::Display for CurveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bn254" | "bn-p254" | "bn_p254" => Ok(CurveId::Bn254),
            _ => Err(Error::UnsupportedCurve(s.to_string())),
        }
    }
}

/// Generators of the three groups. Immutable and cheap to clone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupContext {
    pub curve: CurveId,
    pub g1: G1,
    pub g2: G2,
    pub gt: Gt,
}

impl GroupContext {
    pub fn new(curve: CurveId) -> Self {
        match curve {
            CurveId::Bn254 => {
                let g1 = G1Affine::generator();
                let g2 = G2Affine::generator();
                GroupContext {
                    curve,
                    g1,
                    g2,
                    gt: Bn254::pairing(g1, g2),
                }
            }
        }
    }

    pub fn bn254() -> Self {
        Self::new(CurveId::Bn254)
    }

    pub fn g1_pow(&self, k: Scalar) -> G1 {
        opcount::group_exp(1);
        (self.g1 * k).into_affine()
    }

    pub fn g2_pow(&self, k: Scalar) -> G2 {
        opcount::group_exp(1);
        (self.g2 * k).into_affine()
    }

    pub fn gt_pow(&self, k: Scalar) -> Gt {
        gt_pow(&self.gt, k)
    }

    /// `[g1^{k_i}]` using a fixed-base table.
    pub fn g1_batch(&self, ks: &[Scalar]) -> Vec<G1> {
        opcount::group_exp(ks.len() as u64);
        G1Projective::from(self.g1).batch_mul(ks)
    }

    /// `[g2^{k_i}]` using a fixed-base table.
    pub fn g2_batch(&self, ks: &[Scalar]) -> Vec<G2> {
        opcount::group_exp(ks.len() as u64);
        G2Projective::from(self.g2).batch_mul(ks)
    }
}

pub fn pair(a: &G1, b: &G2) -> Gt {
    opcount::pairing(1);
    Bn254::pairing(*a, *b)
}

/// `Π e(a_i; b_i)` with a single final exponentiation.
pub fn pair_product(a: &[G1], b: &[G2]) -> Gt {
    opcount::pairing(a.len() as u64);
    Bn254::multi_pairing(a.iter().copied(), b.iter().copied())
}

pub fn gt_pow(x: &Gt, k: Scalar) -> Gt {
    opcount::gt_exp(1);
    *x * k
}

pub fn g1_mul(x: &G1, k: Scalar) -> G1Projective {
    opcount::group_exp(1);
    *x * k
}

pub fn g2_mul(x: &G2, k: Scalar) -> G2Projective {
    opcount::group_exp(1);
    *x * k
}

/// Miller loops over prepared second arguments, without the final exponentiation.
pub fn miller_loop(a: &[G1], b: &[G2Prepared]) -> MillerLoopOutput<Bn254> {
    opcount::pairing(a.len() as u64);
    Bn254::multi_miller_loop(a.iter().copied(), b.iter().cloned())
}

pub fn final_exponentiation(m: MillerLoopOutput<Bn254>) -> Gt {
    Bn254::final_exponentiation(m).expect("Miller loop output is never zero")
}

/// `Π h_i^{x_i}` by multi-exponentiation.
pub fn dot_in_exponent<G>(h: &[G::Affine], x: &[Scalar]) -> Result<G>
where
    G: CurveGroup<ScalarField = Scalar> + VariableBaseMSM,
{
    if h.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            got: x.len(),
        });
    }
    opcount::group_exp(h.len() as u64);
    Ok(G::msm_unchecked(h, x))
}

/// Reference fold of individual exponentiations.
pub fn dot_in_exponent_naive<G>(h: &[G::Affine], x: &[Scalar]) -> Result<G>
where
    G: CurveGroup<ScalarField = Scalar>,
{
    if h.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: h.len(),
            got: x.len(),
        });
    }
    Ok(h.iter()
        .zip(x)
        .fold(G::zero(), |acc, (b, e)| acc + *b * *e))
}

pub fn g1_to_bytes(p: &G1) -> Vec<u8> {
    let mut out = Vec::with_capacity(G1_BYTES);
    p.serialize_compressed(&mut out).expect("vec write");
    out
}

pub fn g1_from_bytes(b: &[u8]) -> Result<G1> {
    if b.len() != G1_BYTES {
        return Err(Error::decode("bad G1 length"));
    }
    G1Affine::deserialize_compressed(b).map_err(|e| Error::decode(format!("G1: {e}")))
}

pub fn g2_to_bytes(p: &G2) -> Vec<u8> {
    let mut out = Vec::with_capacity(G2_BYTES);
    p.serialize_compressed(&mut out).expect("vec write");
    out
}

pub fn g2_from_bytes(b: &[u8]) -> Result<G2> {
    if b.len() != G2_BYTES {
        return Err(Error::decode("bad G2 length"));
    }
    G2Affine::deserialize_compressed(b).map_err(|e| Error::decode(format!("G2: {e}")))
}

fn fq12_nonresidue() -> Fq6 {
    Fq6::new(Fq2::zero(), Fq2::one(), Fq2::zero())
}

/// Torus encoding of a GT element: `x = a + b·w` maps to `c = (1 + a)/b`,
/// with the identity sent to `c = 0` (the only other preimage, -1, is not in GT).
pub fn gt_to_bytes(x: &Gt) -> Vec<u8> {
    let f = x.0;
    let c = if f.c1.is_zero() {
        debug_assert!(f.c0.is_one());
        Fq6::zero()
    } else {
        (Fq6::one() + f.c0) * f.c1.inverse().expect("nonzero")
    };
    let mut out = Vec::with_capacity(GT_BYTES);
    c.serialize_uncompressed(&mut out).expect("vec write");
    out
}

/// Inverse of [`gt_to_bytes`]; checks membership in the order-p subgroup.
pub fn gt_from_bytes(b: &[u8]) -> Result<Gt> {
    if b.len() != GT_BYTES {
        return Err(Error::decode("bad GT length"));
    }
    let c = Fq6::deserialize_uncompressed(b).map_err(|e| Error::decode(format!("GT: {e}")))?;
    if c.is_zero() {
        return Ok(Gt::zero());
    }
    // (c + w)/(c - w) = (c² + v + 2c·w)/(c² - v); c² - v ≠ 0 since v is a non-square.
    let v = fq12_nonresidue();
    let c2 = c.square();
    let den = (c2 - v).inverse().ok_or_else(|| Error::decode("GT: degenerate"))?;
    let f = Fq12::new((c2 + v) * den, (c + c) * den);
    if !f.pow(Scalar::MODULUS).is_one() {
        return Err(Error::decode("GT element outside the prime-order subgroup"));
    }
    Ok(PairingOutput(f))
}

/// Element carried in both G1 and G2 so that a type-3 pairing can be used
/// where a symmetric one is expected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DualElem {
    pub g1: G1,
    pub g2: G2,
}

pub const DUAL_BYTES: usize = G1_BYTES + G2_BYTES;

impl DualElem {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = g1_to_bytes(&self.g1);
        out.extend(g2_to_bytes(&self.g2));
        out
    }

    /// Decodes both halves; the cross-consistency check is left to
    /// [`SymmetricContext::is_consistent`] because it costs two pairings.
    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != DUAL_BYTES {
            return Err(Error::decode("bad dual element length"));
        }
        Ok(DualElem {
            g1: g1_from_bytes(&b[..G1_BYTES])?,
            g2: g2_from_bytes(&b[G1_BYTES..])?,
        })
    }
}

/// Symmetric-looking pairing over the dual representation:
/// `e(x; y) = e(x.g1; y.g2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricContext {
    pub ctx: GroupContext,
}

pub fn symmetric_view(ctx: &GroupContext) -> SymmetricContext {
    SymmetricContext { ctx: ctx.clone() }
}

impl SymmetricContext {
    pub fn generator(&self) -> DualElem {
        DualElem {
            g1: self.ctx.g1,
            g2: self.ctx.g2,
        }
    }

    /// `g^k` in both halves.
    pub fn pow(&self, k: Scalar) -> DualElem {
        DualElem {
            g1: self.ctx.g1_pow(k),
            g2: self.ctx.g2_pow(k),
        }
    }

    pub fn batch_pow(&self, ks: &[Scalar]) -> Vec<DualElem> {
        let a = self.ctx.g1_batch(ks);
        let b = self.ctx.g2_batch(ks);
        a.into_iter()
            .zip(b)
            .map(|(g1, g2)| DualElem { g1, g2 })
            .collect()
    }

    pub fn pair(&self, x: &DualElem, y: &DualElem) -> Gt {
        pair(&x.g1, &y.g2)
    }

    /// Both halves encode the same exponent.
    pub fn is_consistent(&self, x: &DualElem) -> bool {
        pair(&x.g1, &self.ctx.g2) == pair(&self.ctx.g1, &x.g2)
    }
}
