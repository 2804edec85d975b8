//! Private, dynamic, ciphered evaluation with masked exponents.
//!
//! The server holds `W = E(P)` under a Merkle tree, `H̄_i = g1^{p_i α + Φ^i β}`
//! and `S = [g2^{s^k}]`. The client keeps a constant-size state and checks an
//! evaluation with a logarithmic number of field operations.

use std::borrow::Cow;

use ark_ec::CurveGroup;
use ark_ff::{One, UniformRand, Zero};
use rand::{CryptoRng, RngCore};

use crate::algebra::{self, Matrix2, Vector2};
use crate::codec::{Reader, Writer};
use crate::error::{Error, RejectReason, Result};
use crate::lhe::{self, Ciphertext, LhePublicKey, LheSecretKey};
use crate::merkle::{Digest, LeafPath, LeafSource, MerkleTree};
use crate::pairing::{self, CurveId, GroupContext, G1, G2, Gt};
use crate::polyeval::{self, Polynomial};
use crate::{Scalar, SecurityConfig};

pub const PROTOCOL_TAG: &str = "vespo";

/// Bound on redraws of random scalars that must avoid a singular matrix.
pub const MAX_REDRAWS: u32 = 16;

/// Leaves of `T_W`: the canonical ciphertext encodings.
pub(crate) struct CipherLeaves<'a> {
    pub pk: &'a LhePublicKey,
    pub w: &'a [Ciphertext],
}

impl LeafSource for CipherLeaves<'_> {
    fn leaf_count(&self) -> usize {
        self.w.len()
    }
    fn leaf(&self, i: usize) -> Cow<'_, [u8]> {
        Cow::Owned(self.pk.ciphertext_to_bytes(&self.w[i]))
    }
}

#[derive(Clone, Debug)]
pub struct VespoClientState {
    pub ctx: GroupContext,
    pub pk: LhePublicKey,
    pub sk: LheSecretKey,
    pub s: Scalar,
    pub alpha: Vector2<Scalar>,
    pub beta: Vector2<Scalar>,
    pub phi: Matrix2<Scalar>,
    pub kbar: [Gt; 2],
    pub root: Digest,
    pub degree: usize,
}

#[derive(Clone, Debug)]
pub struct VespoServerState {
    pub pk: LhePublicKey,
    pub w: Vec<Ciphertext>,
    pub tree: MerkleTree,
    pub hbar: [Vec<G1>; 2],
    pub s: Vec<G2>,
}

/// Evaluation point and its projected geometric sum `c = Σ_{k≤d} (rΦ)^k β`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Challenge {
    pub r: Scalar,
    pub c: Vector2<Scalar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResponse {
    pub zeta: Ciphertext,
    pub xi: [Gt; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRequest {
    pub index: usize,
    pub e_delta: Ciphertext,
    pub delta: [G1; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateResponse {
    pub leaf: Ciphertext,
    pub path: LeafPath,
}

/// Secrets drawn at setup, shared with the proof-of-retrievability layer.
pub(crate) struct Masks {
    pub s: Scalar,
    pub alpha: Vector2<Scalar>,
    pub beta: Vector2<Scalar>,
    pub phi: Matrix2<Scalar>,
}

impl Masks {
    pub fn draw<R: RngCore + ?Sized>(rng: &mut R) -> Result<Self> {
        let s = algebra::rand_excluding(rng, &[Scalar::zero(), Scalar::one()]);
        let alpha = loop {
            let a = Vector2::rand(rng);
            if !a.is_zero() {
                break a;
            }
        };
        let beta = Vector2::rand(rng);
        for _ in 0..MAX_REDRAWS {
            let phi = Matrix2::rand(rng);
            if phi.scale(s).minus_identity_invertible() {
                return Ok(Masks {
                    s,
                    alpha,
                    beta,
                    phi,
                });
            }
        }
        Err(Error::RedrawLimit(MAX_REDRAWS, "sΦ - I is singular"))
    }
}

/// `c = Σ_{k=0}^{degree} (rΦ)^k β`, or an error when `rΦ - I` is singular.
pub fn challenge_vector(
    phi: &Matrix2<Scalar>,
    beta: &Vector2<Scalar>,
    r: Scalar,
    degree: usize,
) -> Result<Vector2<Scalar>> {
    let a = phi.scale(r);
    algebra::pmgs(degree as u64, &a, beta)
}

/// Everything the setup computes from the coefficient vector.
pub(crate) struct Committed {
    pub client: VespoClientState,
    pub server: VespoServerState,
}

pub(crate) fn commit<R: RngCore + ?Sized>(
    ctx: &GroupContext,
    pk: LhePublicKey,
    sk: LheSecretKey,
    coeffs: &[Scalar],
    masks: Masks,
    rng: &mut R,
) -> Result<Committed> {
    pk.check_capacity(coeffs.len(), &lhe::scalar_modulus())?;
    let d = coeffs.len() - 1;
    let Masks {
        s,
        alpha,
        beta,
        phi,
    } = masks;

    // p̄_i = p_i α + Φ^i β
    let mut pbar = Vec::with_capacity(d + 1);
    let mut phib = beta;
    for (i, p) in coeffs.iter().enumerate() {
        if i > 0 {
            phib = phi.mul_vec(&phib);
        }
        pbar.push(alpha.scale(*p).add(&phib));
    }
    let mut at_s = Vector2::zero();
    for pb in pbar.iter().rev() {
        at_s = at_s.scale(s).add(pb);
    }
    let kbar = [ctx.gt_pow(at_s[0]), ctx.gt_pow(at_s[1])];
    let hbar = [0, 1].map(|j| {
        let ks: Vec<Scalar> = pbar[1..].iter().map(|v| v[j]).collect();
        ctx.g1_batch(&ks)
    });
    let sigma = algebra::scalar_powers(s, d.max(1) - 1);
    let s_elems = if d == 0 {
        Vec::new()
    } else {
        ctx.g2_batch(&sigma)
    };
    let w: Vec<Ciphertext> = coeffs
        .iter()
        .map(|p| sk.encrypt(&pk, &lhe::scalar_to_integer(p), rng))
        .collect();
    let tree = MerkleTree::build_from(&CipherLeaves { pk: &pk, w: &w }, 0)?;
    let root = tree.root();
    Ok(Committed {
        client: VespoClientState {
            ctx: ctx.clone(),
            pk: pk.clone(),
            sk,
            s,
            alpha,
            beta,
            phi,
            kbar,
            root,
            degree: d,
        },
        server: VespoServerState {
            pk,
            w,
            tree,
            hbar,
            s: s_elems,
        },
    })
}

/// Client and server states for `P`, which must have degree at least one.
pub fn setup<R: RngCore + CryptoRng + ?Sized>(
    p: &Polynomial<Scalar>,
    cfg: &SecurityConfig,
    rng: &mut R,
) -> Result<(VespoClientState, VespoServerState)> {
    cfg.validate()?;
    if p.degree().unwrap_or(0) < 1 {
        return Err(Error::invalid("polynomial must have degree at least 1"));
    }
    let ctx = GroupContext::new(cfg.curve);
    let (pk, sk) = lhe::keygen(cfg.lhe_bits, rng)?;
    pk.check_capacity(p.coeffs().len(), &lhe::scalar_modulus())?;
    let masks = Masks::draw(rng)?;
    let c = commit(&ctx, pk, sk, p.coeffs(), masks, rng)?;
    Ok((c.client, c.server))
}

impl VespoClientState {
    /// Challenge at a caller-chosen point.
    pub fn challenge_at(&self, r: Scalar) -> Result<Challenge> {
        let c = challenge_vector(&self.phi, &self.beta, r, self.degree)?;
        Ok(Challenge { r, c })
    }

    /// Fresh random challenge, redrawing `r` while `rΦ - I` is singular or `r = s`.
    pub fn challenge<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Challenge> {
        for _ in 0..MAX_REDRAWS {
            let r = Scalar::rand(rng);
            if r == self.s {
                continue;
            }
            match self.challenge_at(r) {
                Ok(ch) => return Ok(ch),
                Err(Error::SingularMatrix) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::RedrawLimit(MAX_REDRAWS, "rΦ - I is singular"))
    }

    /// Decrypted value `D(ζ) mod p`.
    pub fn decrypt_value(&self, zeta: &Ciphertext) -> Scalar {
        lhe::integer_to_scalar(&self.sk.decrypt(zeta))
    }

    /// `ξ̄[j]^{s-r} g_T^{z α[j] + c[j]} = K̄[j]` for both components.
    pub fn check_pairing(&self, ch: &Challenge, z: Scalar, xi: &[Gt; 2]) -> bool {
        let sr = self.s - ch.r;
        (0..2).all(|j| {
            let e = z * self.alpha[j] + ch.c[j];
            pairing::gt_pow(&xi[j], sr) + self.ctx.gt_pow(e) == self.kbar[j]
        })
    }

    /// Returns `P(r)` if the response verifies.
    pub fn verify(&self, ch: &Challenge, resp: &EvalResponse) -> Result<Scalar> {
        let z = self.decrypt_value(&resp.zeta);
        if self.check_pairing(ch, z, &resp.xi) {
            Ok(z)
        } else {
            Err(Error::Rejected(RejectReason::PairingFail))
        }
    }

    /// Request adding `delta` to coefficient `i`.
    pub fn prepare_update<R: RngCore + ?Sized>(
        &self,
        i: usize,
        delta: Scalar,
        rng: &mut R,
    ) -> Result<UpdateRequest> {
        if i > self.degree {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.degree + 1,
            });
        }
        if delta.is_zero() {
            return Err(Error::invalid("update delta must be nonzero"));
        }
        let e_delta = self
            .sk
            .encrypt(&self.pk, &lhe::scalar_to_integer(&delta), rng);
        let da = self.alpha.scale(delta);
        Ok(UpdateRequest {
            index: i,
            e_delta,
            delta: [self.ctx.g1_pow(da[0]), self.ctx.g1_pow(da[1])],
        })
    }

    /// Checks the old leaf against the stored root, then rolls the root and
    /// `K̄` forward. Leaves the state untouched on rejection.
    pub fn complete_update(&mut self, req: &UpdateRequest, resp: &UpdateResponse) -> Result<()> {
        let old = self.pk.ciphertext_to_bytes(&resp.leaf);
        if !resp
            .path
            .verifies(&self.root, req.index, self.degree + 1, &old)
        {
            return Err(Error::Rejected(RejectReason::MerkleFail));
        }
        let new_leaf = self.pk.add(&resp.leaf, &req.e_delta)?;
        let new_root = resp.path.root(&self.pk.ciphertext_to_bytes(&new_leaf))?;
        let si = algebra::pow_counted(self.s, req.index as u64);
        let mut kbar = self.kbar;
        for (j, k) in kbar.iter_mut().enumerate() {
            *k += pairing::pair(&pairing::g1_mul(&req.delta[j], si).into_affine(), &self.ctx.g2);
        }
        self.kbar = kbar;
        self.root = new_root;
        Ok(())
    }

    /// Encoded state without the key pair.
    pub fn write_secrets(&self, w: &mut Writer) {
        w.scalar(&self.s)
            .vector2(&self.alpha)
            .vector2(&self.beta)
            .matrix2(&self.phi)
            .gt(&self.kbar[0])
            .gt(&self.kbar[1])
            .digest(&self.root)
            .u64(self.degree as u64);
    }

    fn read_secrets(
        r: &mut Reader,
        ctx: GroupContext,
        pk: LhePublicKey,
        sk: LheSecretKey,
    ) -> Result<Self> {
        let s = r.scalar()?;
        let alpha = r.vector2()?;
        let beta = r.vector2()?;
        let phi = r.matrix2()?;
        let kbar = [r.gt()?, r.gt()?];
        let root = r.digest()?;
        let degree = r.usize()?;
        if alpha.is_zero() {
            return Err(Error::decode("α must be nonzero"));
        }
        Ok(Self {
            ctx,
            pk,
            sk,
            s,
            alpha,
            beta,
            phi,
            kbar,
            root,
            degree,
        })
    }

    pub fn write(&self, w: &mut Writer) {
        self.pk.write(w);
        self.sk.write(w);
        self.write_secrets(w);
    }

    pub fn read(r: &mut Reader, curve: CurveId) -> Result<Self> {
        let pk = LhePublicKey::read(r)?;
        let sk = LheSecretKey::read(r)?;
        if !sk.matches(&pk) {
            return Err(Error::decode("secret key does not match public key"));
        }
        Self::read_secrets(r, GroupContext::new(curve), pk, sk)
    }
}

impl VespoServerState {
    pub fn degree(&self) -> usize {
        self.w.len() - 1
    }

    /// Evaluation on one thread.
    pub fn eval(&self, r: Scalar) -> Result<EvalResponse> {
        self.eval_with_workers(r, 1)
    }

    /// Evaluation split over `q` workers; identical output for every `q`.
    pub fn eval_with_workers(&self, r: Scalar, q: usize) -> Result<EvalResponse> {
        let hbar = [self.hbar[0].as_slice(), self.hbar[1].as_slice()];
        let (zeta, xi) = polyeval::server_eval_parallel(q, r, &self.w, &self.s, hbar, &self.pk)?;
        Ok(EvalResponse { zeta, xi })
    }

    /// Current leaf `w_i` with its path.
    pub fn leaf(&self, i: usize) -> Result<(Ciphertext, LeafPath)> {
        let src = CipherLeaves {
            pk: &self.pk,
            w: &self.w,
        };
        let (_, path) = self.tree.leaf_path(i, &src)?;
        Ok((self.w[i].clone(), path))
    }

    /// Applies an update and returns the pre-update leaf and path.
    pub fn apply_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse> {
        let i = req.index;
        let (leaf, path) = self.leaf(i)?;
        let new_leaf = self.pk.add(&leaf, &req.e_delta)?;
        self.tree
            .update_leaf(i, &self.pk.ciphertext_to_bytes(&new_leaf))?;
        self.w[i] = new_leaf;
        if i > 0 {
            for j in 0..2 {
                let h = &mut self.hbar[j][i - 1];
                *h = (*h + req.delta[j]).into_affine();
            }
        }
        Ok(UpdateResponse { leaf, path })
    }

    pub fn write(&self, w: &mut Writer) {
        self.pk.write(w);
        w.u64(self.w.len() as u64);
        for c in &self.w {
            self.pk.write_ciphertext(w, c);
        }
        self.tree.write(w);
        for h in &self.hbar {
            for x in h {
                w.g1(x);
            }
        }
        for x in &self.s {
            w.g2(x);
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let pk = LhePublicKey::read(r)?;
        let n = r.count(pk.ciphertext_width())?;
        if n == 0 {
            return Err(Error::decode("empty ciphertext vector"));
        }
        let w = (0..n)
            .map(|_| pk.read_ciphertext(r))
            .collect::<Result<Vec<_>>>()?;
        let tree = MerkleTree::read(r)?;
        let rebuilt = MerkleTree::build_from(&CipherLeaves { pk: &pk, w: &w }, 0)?;
        if rebuilt != tree {
            return Err(Error::decode("Merkle tree does not match ciphertexts"));
        }
        let d = n - 1;
        let hbar = [
            (0..d).map(|_| r.g1()).collect::<Result<Vec<_>>>()?,
            (0..d).map(|_| r.g1()).collect::<Result<Vec<_>>>()?,
        ];
        let s = (0..d).map(|_| r.g2()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pk,
            w,
            tree,
            hbar,
            s,
        })
    }
}

impl EvalResponse {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        pk.write_ciphertext(w, &self.zeta);
        w.gt(&self.xi[0]).gt(&self.xi[1]);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            zeta: pk.read_ciphertext(r)?,
            xi: [r.gt()?, r.gt()?],
        })
    }
}

impl UpdateRequest {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        w.u64(self.index as u64);
        pk.write_ciphertext(w, &self.e_delta);
        w.g1(&self.delta[0]).g1(&self.delta[1]);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            index: r.usize()?,
            e_delta: pk.read_ciphertext(r)?,
            delta: [r.g1()?, r.g1()?],
        })
    }
}

impl UpdateResponse {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        pk.write_ciphertext(w, &self.leaf);
        self.path.write(w);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            leaf: pk.read_ciphertext(r)?,
            path: LeafPath::read(r)?,
        })
    }
}

/// `P̄(s)` in the clear, for tests that track discrete logarithms.
pub fn masked_eval(
    coeffs: &[Scalar],
    alpha: &Vector2<Scalar>,
    beta: &Vector2<Scalar>,
    phi: &Matrix2<Scalar>,
    x: Scalar,
) -> Vector2<Scalar> {
    let mut acc = Vector2::zero();
    let mut phib = *beta;
    let mut xi = Scalar::one();
    for (i, p) in coeffs.iter().enumerate() {
        if i > 0 {
            phib = phi.mul_vec(&phib);
            xi *= x;
        }
        acc = acc.add(&alpha.scale(*p).add(&phib).scale(xi));
    }
    acc
}
