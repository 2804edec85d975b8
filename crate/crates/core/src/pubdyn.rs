//! Publicly verifiable evaluation of a dynamic clear-text polynomial.
//!
//! The server stores `P` in the clear under a Merkle tree together with
//! `S = [g^{s^k}]`. Anyone holding the published pair `(K1, K2)` can check an
//! evaluation; only the data owner, who keeps `s` and the root, can update.

use std::borrow::Cow;

use ark_bn254::G1Projective;
use ark_ec::CurveGroup;
use ark_ff::UniformRand;
use rand::RngCore;

use crate::algebra;
use crate::codec::{Reader, Writer};
use crate::error::{Error, RejectReason, Result};
use crate::merkle::{Digest, LeafPath, LeafSource, MerkleTree};
use crate::pairing::{self, symmetric_view, CurveId, DualElem, GroupContext, SymmetricContext, G1, Gt};
use crate::polyeval::{prefix_xi, Polynomial, ScalarCoeffs};
use crate::{Scalar, SecurityConfig};

pub const PROTOCOL_TAG: &str = "pubdyn";

struct CoeffLeaves<'a>(&'a [Scalar]);

impl LeafSource for CoeffLeaves<'_> {
    fn leaf_count(&self) -> usize {
        self.0.len()
    }
    fn leaf(&self, i: usize) -> Cow<'_, [u8]> {
        Cow::Owned(algebra::scalar_to_bytes(&self.0[i]))
    }
}

/// Data owner: the secret point and the root over the coefficients.
#[derive(Clone, Debug)]
pub struct PublicVpeClientState {
    pub ctx: GroupContext,
    pub s: Scalar,
    pub root: Digest,
    pub degree: usize,
}

/// Published verification key. `version` grows with every update.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicVpeVerifierState {
    pub sym: SymmetricContext,
    pub version: u64,
    pub k1: Gt,
    pub k2: DualElem,
}

#[derive(Clone, Debug)]
pub struct PublicVpeServerState {
    pub p: Polynomial<Scalar>,
    pub tree: MerkleTree,
    pub s: Vec<DualElem>,
    s1: Vec<G1>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResponse {
    pub zeta: Scalar,
    pub xi: G1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateRequest {
    pub index: usize,
    pub delta: Scalar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateResponse {
    pub coeff: Scalar,
    pub path: LeafPath,
}

pub fn setup<R: RngCore + ?Sized>(
    p: &Polynomial<Scalar>,
    cfg: &SecurityConfig,
    rng: &mut R,
) -> Result<(PublicVpeClientState, PublicVpeVerifierState, PublicVpeServerState)> {
    let ctx = GroupContext::new(cfg.curve);
    let sym = symmetric_view(&ctx);
    let d = p.degree_bound();
    let s = Scalar::rand(rng);
    let k1 = sym.pair(&sym.pow(p.eval(s)), &sym.generator());
    let s_elems = if d == 0 {
        Vec::new()
    } else {
        sym.batch_pow(&algebra::scalar_powers(s, d - 1))
    };
    let tree = MerkleTree::build_from(&CoeffLeaves(p.coeffs()), 0)?;
    let client = PublicVpeClientState {
        ctx,
        s,
        root: tree.root(),
        degree: d,
    };
    let verifier = PublicVpeVerifierState {
        version: 0,
        k1,
        k2: sym.pow(s),
        sym,
    };
    let server = PublicVpeServerState::new(p.clone(), tree, s_elems);
    Ok((client, verifier, server))
}

impl PublicVpeServerState {
    fn new(p: Polynomial<Scalar>, tree: MerkleTree, s: Vec<DualElem>) -> Self {
        let s1 = s.iter().map(|x| x.g1).collect();
        Self { p, tree, s, s1 }
    }

    pub fn degree(&self) -> usize {
        self.p.degree_bound()
    }

    /// `ζ = P(r)` and `ξ = g^{Q_P(s,r)}` by the prefix recurrence.
    pub fn eval(&self, r: Scalar) -> EvalResponse {
        let zeta = self.p.eval(r);
        let xi = prefix_xi::<G1Projective, _>(r, &self.s1, ScalarCoeffs::new(&self.p.coeffs()[1..]));
        EvalResponse {
            zeta,
            xi: xi.into_affine(),
        }
    }

    /// Applies `p_i += δ` and returns the old coefficient with its path.
    pub fn apply_update(&mut self, req: &UpdateRequest) -> Result<UpdateResponse> {
        let i = req.index;
        let (_, path) = self.tree.leaf_path(i, &CoeffLeaves(self.p.coeffs()))?;
        let coeff = self.p.coeffs()[i];
        let new = coeff + req.delta;
        self.tree.update_leaf(i, &algebra::scalar_to_bytes(&new))?;
        self.p.coeffs_mut()[i] = new;
        Ok(UpdateResponse { coeff, path })
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.p.coeffs().len() as u64);
        for c in self.p.coeffs() {
            w.scalar(c);
        }
        self.tree.write(w);
        for x in &self.s {
            w.dual(x);
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let n = r.count(algebra::scalar_width::<Scalar>())?;
        let coeffs = (0..n).map(|_| r.scalar()).collect::<Result<Vec<_>>>()?;
        let p = Polynomial::new(coeffs)?;
        let tree = MerkleTree::read(r)?;
        if tree != MerkleTree::build_from(&CoeffLeaves(p.coeffs()), 0)? {
            return Err(Error::decode("Merkle tree does not match coefficients"));
        }
        let s = (0..n - 1).map(|_| r.dual()).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(p, tree, s))
    }
}

impl PublicVpeClientState {
    pub fn prepare_update(&self, i: usize, delta: Scalar) -> Result<UpdateRequest> {
        if i > self.degree {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.degree + 1,
            });
        }
        Ok(UpdateRequest { index: i, delta })
    }

    /// Checks the old coefficient against the stored root, rolls the root
    /// forward and republishes `K1`. Nothing changes on rejection.
    pub fn complete_update(
        &mut self,
        req: &UpdateRequest,
        resp: &UpdateResponse,
        verifier: &mut PublicVpeVerifierState,
    ) -> Result<()> {
        let old = algebra::scalar_to_bytes(&resp.coeff);
        if !resp.path.verifies(&self.root, req.index, self.degree + 1, &old) {
            return Err(Error::Rejected(RejectReason::MerkleFail));
        }
        let new = resp.coeff + req.delta;
        let root = resp.path.root(&algebra::scalar_to_bytes(&new))?;
        let si = algebra::pow_counted(self.s, req.index as u64);
        let sym = &verifier.sym;
        verifier.k1 += sym.pair(&sym.pow(si * req.delta), &sym.generator());
        verifier.version += 1;
        self.root = root;
        Ok(())
    }

    pub fn write(&self, w: &mut Writer) {
        w.scalar(&self.s).digest(&self.root).u64(self.degree as u64);
    }

    pub fn read(r: &mut Reader, curve: CurveId) -> Result<Self> {
        Ok(Self {
            ctx: GroupContext::new(curve),
            s: r.scalar()?,
            root: r.digest()?,
            degree: r.usize()?,
        })
    }
}

impl PublicVpeVerifierState {
    /// Accepts `ζ` iff `e(ξ; K2/g^r)·e(g^ζ; g) = K1`. Uses no secret.
    pub fn verify(&self, r: Scalar, resp: &EvalResponse) -> Result<Scalar> {
        let ctx = &self.sym.ctx;
        let k2r = (self.k2.g2 - ctx.g2_pow(r)).into_affine();
        let lhs = pairing::pair(&resp.xi, &k2r) + ctx.gt_pow(resp.zeta);
        if lhs == self.k1 {
            Ok(resp.zeta)
        } else {
            Err(Error::Rejected(RejectReason::PairingFail))
        }
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.version).gt(&self.k1).dual(&self.k2);
    }

    /// Decodes a bulletin and checks that both halves of `K2` agree.
    pub fn read(r: &mut Reader, curve: CurveId) -> Result<Self> {
        let sym = symmetric_view(&GroupContext::new(curve));
        let version = r.u64()?;
        let k1 = r.gt()?;
        let k2 = r.dual()?;
        if !sym.is_consistent(&k2) {
            return Err(Error::decode("inconsistent dual element in bulletin"));
        }
        Ok(Self {
            sym,
            version,
            k1,
            k2,
        })
    }
}

impl EvalResponse {
    pub fn write(&self, w: &mut Writer) {
        w.scalar(&self.zeta).g1(&self.xi);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            zeta: r.scalar()?,
            xi: r.g1()?,
        })
    }
}

impl UpdateRequest {
    pub fn write(&self, w: &mut Writer) {
        w.u64(self.index as u64).scalar(&self.delta);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            index: r.usize()?,
            delta: r.scalar()?,
        })
    }
}

impl UpdateResponse {
    pub fn write(&self, w: &mut Writer) {
        w.scalar(&self.coeff);
        self.path.write(w);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            coeff: r.scalar()?,
            path: LeafPath::read(r)?,
        })
    }
}
