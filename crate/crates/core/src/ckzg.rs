//! Static ciphered evaluation: the server holds `W = E(P)` and
//! `H = [g1^{T_{k,P}(s)}]`, the client keeps `s` and `K = g_T^{P(s)}`.

use ark_bn254::G1Projective;
use ark_ec::CurveGroup;
use ark_ff::UniformRand;
use rand::{CryptoRng, RngCore};

use crate::algebra;
use crate::codec::{Reader, Writer};
use crate::error::{Error, RejectReason, Result};
use crate::lhe::{self, Ciphertext, LhePublicKey, LheSecretKey};
use crate::pairing::{self, CurveId, GroupContext, G1, Gt};
use crate::polyeval::{all_subset_evals, Polynomial};
use crate::{Scalar, SecurityConfig};

pub const PROTOCOL_TAG: &str = "ckzg";

#[derive(Clone, Debug)]
pub struct CipheredVpeClientState {
    pub ctx: GroupContext,
    pub pk: LhePublicKey,
    pub sk: LheSecretKey,
    pub s: Scalar,
    pub k: Gt,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct CipheredVpeServerState {
    pub pk: LhePublicKey,
    pub w: Vec<Ciphertext>,
    pub h: Vec<G1>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResponse {
    pub zeta: Ciphertext,
    pub xi: G1,
}

pub fn setup<R: RngCore + CryptoRng + ?Sized>(
    p: &Polynomial<Scalar>,
    cfg: &SecurityConfig,
    rng: &mut R,
) -> Result<(CipheredVpeClientState, CipheredVpeServerState)> {
    cfg.validate()?;
    if p.degree().unwrap_or(0) < 1 {
        return Err(Error::invalid("polynomial must have degree at least 1"));
    }
    let (pk, sk) = lhe::keygen(cfg.lhe_bits, rng)?;
    setup_with_keys(p, cfg.curve, pk, sk, rng)
}

/// Setup with an existing key pair.
pub fn setup_with_keys<R: RngCore + ?Sized>(
    p: &Polynomial<Scalar>,
    curve: CurveId,
    pk: LhePublicKey,
    sk: LheSecretKey,
    rng: &mut R,
) -> Result<(CipheredVpeClientState, CipheredVpeServerState)> {
    if p.degree().unwrap_or(0) < 1 {
        return Err(Error::invalid("polynomial must have degree at least 1"));
    }
    pk.check_capacity(p.coeffs().len(), &lhe::scalar_modulus())?;
    let ctx = GroupContext::new(curve);
    let s = Scalar::rand(rng);
    let k = ctx.gt_pow(p.eval(s));
    let h = ctx.g1_batch(&all_subset_evals(p, s));
    let w = p
        .coeffs()
        .iter()
        .map(|c| sk.encrypt(&pk, &lhe::scalar_to_integer(c), rng))
        .collect();
    let client = CipheredVpeClientState {
        ctx,
        pk: pk.clone(),
        sk,
        s,
        k,
        degree: p.degree_bound(),
    };
    Ok((client, CipheredVpeServerState { pk, w, h }))
}

impl CipheredVpeServerState {
    pub fn degree(&self) -> usize {
        self.h.len()
    }

    /// `ζ = W ⊡ [r^i]`, `ξ = H ⊙ [r^k]`.
    pub fn eval(&self, r: Scalar) -> Result<EvalResponse> {
        let d = self.h.len();
        let powers = algebra::scalar_powers(r, d);
        let zeta = lhe::ho_dotproduct_powers(&self.pk, &self.w, &powers, 1)?;
        let xi = pairing::dot_in_exponent::<G1Projective>(&self.h, &powers[..d])?.into_affine();
        Ok(EvalResponse { zeta, xi })
    }

    pub fn write(&self, w: &mut Writer) {
        self.pk.write(w);
        w.u64(self.w.len() as u64);
        for c in &self.w {
            self.pk.write_ciphertext(w, c);
        }
        for x in &self.h {
            w.g1(x);
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let pk = LhePublicKey::read(r)?;
        let n = r.count(pk.ciphertext_width())?;
        if n < 2 {
            return Err(Error::decode("server state needs at least two coefficients"));
        }
        let w = (0..n)
            .map(|_| pk.read_ciphertext(r))
            .collect::<Result<Vec<_>>>()?;
        let h = (0..n - 1).map(|_| r.g1()).collect::<Result<Vec<_>>>()?;
        Ok(Self { pk, w, h })
    }
}

impl CipheredVpeClientState {
    /// Returns `P(r)` iff `e(ξ; g2^{s-r}) g_T^{D(ζ)} = K`.
    pub fn verify(&self, r: Scalar, resp: &EvalResponse) -> Result<Scalar> {
        let z = lhe::integer_to_scalar(&self.sk.decrypt(&resp.zeta));
        let g2sr = self.ctx.g2_pow(self.s - r);
        if pairing::pair(&resp.xi, &g2sr) + self.ctx.gt_pow(z) == self.k {
            Ok(z)
        } else {
            Err(Error::Rejected(RejectReason::PairingFail))
        }
    }

    pub fn write(&self, w: &mut Writer) {
        self.pk.write(w);
        self.sk.write(w);
        w.scalar(&self.s).gt(&self.k).u64(self.degree as u64);
    }

    pub fn read(r: &mut Reader, curve: CurveId) -> Result<Self> {
        let pk = LhePublicKey::read(r)?;
        let sk = LheSecretKey::read(r)?;
        if !sk.matches(&pk) {
            return Err(Error::decode("secret key does not match public key"));
        }
        Ok(Self {
            ctx: GroupContext::new(curve),
            pk,
            sk,
            s: r.scalar()?,
            k: r.gt()?,
            degree: r.usize()?,
        })
    }
}

impl EvalResponse {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        pk.write_ciphertext(w, &self.zeta);
        w.g1(&self.xi);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            zeta: pk.read_ciphertext(r)?,
            xi: r.g1()?,
        })
    }
}
