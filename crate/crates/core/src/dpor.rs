//! Dynamic proof of retrievability with small server overhead.
//!
//! The database is read as an `m×n` matrix `M` of 31-byte entries. The client
//! keeps a secret `γ`; the server stores `w = E(v)` with `vᵀ = uᵀM` and
//! `u = [γ^i]`, plus the masked exponents of `v` used by [`crate::vespo`].
//! An audit at `r` returns `y = M·[r^k]` together with an encrypted
//! evaluation of `v` at `r`, and the client checks `uᵀy = D(ζ)`.

use std::borrow::Cow;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use ark_ff::{UniformRand, Zero};
use rand::{CryptoRng, RngCore};
use rayon::prelude::*;

use crate::algebra;
use crate::codec::{Reader, Writer};
use crate::error::{Error, RejectReason, Result};
use crate::lhe::{self, Ciphertext, LhePublicKey};
use crate::merkle::{Digest, LeafPath, LeafSource, MerkleTree};
use crate::pairing::{CurveId, GroupContext, Gt};
use crate::polyeval;
use crate::vespo::{self, Challenge, Masks, VespoClientState, VespoServerState};
use crate::{Scalar, SecurityConfig};

pub const PROTOCOL_TAG: &str = "dpor";

/// Bytes per matrix entry; every 31-byte value is below the group order.
pub const CHUNK_BYTES: usize = 31;

const DB_MAGIC: &[u8; 4] = b"VPDB";
const DB_VERSION: u32 = 1;

/// How to lay the entries out as a matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapePolicy {
    /// `m ≈ n ≈ √E`.
    Square,
    /// Fewer rows, so audits send a shorter `y`: `m ≈ √(E/16)`.
    Rect,
    Explicit { m: usize, n: usize },
}

impl FromStr for ShapePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(ShapePolicy::Square),
            "rect" | "rectangular" => Ok(ShapePolicy::Rect),
            _ => {
                let (a, b) = s
                    .split_once(',')
                    .ok_or_else(|| Error::invalid(format!("unknown shape '{s}'")))?;
                let m = a.trim().parse().map_err(|_| Error::invalid("bad row count"))?;
                let n = b.trim().parse().map_err(|_| Error::invalid("bad column count"))?;
                Ok(ShapePolicy::Explicit { m, n })
            }
        }
    }
}

impl fmt::Display for ShapePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapePolicy::Square => f.write_str("square"),
            ShapePolicy::Rect => f.write_str("rect"),
            ShapePolicy::Explicit { m, n } => write!(f, "{m},{n}"),
        }
    }
}

fn ceil_sqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r < x {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r
}

/// Number of entries needed for `byte_len` bytes.
pub fn entry_count(byte_len: usize) -> usize {
    byte_len.div_ceil(CHUNK_BYTES)
}

/// `(m, n)` for `entries` matrix entries under `policy`.
pub fn shape_for(entries: usize, policy: ShapePolicy) -> Result<(usize, usize)> {
    if entries == 0 {
        return Err(Error::invalid("database is empty"));
    }
    let (m, n) = match policy {
        ShapePolicy::Square => {
            let m = ceil_sqrt(entries);
            (m, entries.div_ceil(m))
        }
        ShapePolicy::Rect => {
            let m = ceil_sqrt(entries.div_ceil(16)).max(1);
            (m, entries.div_ceil(m))
        }
        ShapePolicy::Explicit { m, n } => (m, n),
    };
    if m == 0 || n == 0 || m.checked_mul(n).map_or(true, |e| e < entries) {
        return Err(Error::invalid(format!(
            "shape {m}x{n} cannot hold {entries} entries"
        )));
    }
    Ok((m, n))
}

/// Smallest `ℓ` with `2^ℓ ≥ log2(E)²`: the bottom `ℓ` levels of `T_M` are
/// recomputed from the data on demand.
pub fn pruning_depth(entries: usize) -> u32 {
    let lg = (usize::BITS - entries.max(1).leading_zeros()) as u64;
    let target = (lg * lg).max(1);
    64 - (target - 1).leading_zeros()
}

/// Database bytes viewed as a row-major `m×n` matrix of 31-byte entries,
/// zero-padded to a full matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataMatrix {
    byte_len: u64,
    m: usize,
    n: usize,
    data: Vec<u8>,
}

impl DataMatrix {
    pub fn new(raw: &[u8], m: usize, n: usize) -> Result<Self> {
        let cap = m
            .checked_mul(n)
            .and_then(|e| e.checked_mul(CHUNK_BYTES))
            .ok_or_else(|| Error::invalid("matrix too large"))?;
        if raw.len() > cap {
            return Err(Error::invalid(format!(
                "{} bytes do not fit a {m}x{n} matrix",
                raw.len()
            )));
        }
        let mut data = Vec::with_capacity(cap);
        data.extend_from_slice(raw);
        data.resize(cap, 0);
        Ok(Self {
            byte_len: raw.len() as u64,
            m,
            n,
            data,
        })
    }

    pub fn from_policy(raw: &[u8], policy: ShapePolicy) -> Result<Self> {
        let (m, n) = shape_for(entry_count(raw.len()), policy)?;
        Self::new(raw, m, n)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn byte_len(&self) -> u64 {
        self.byte_len
    }

    /// The original database bytes.
    pub fn raw(&self) -> &[u8] {
        &self.data[..self.byte_len as usize]
    }

    fn offset(&self, i: usize, k: usize) -> Result<usize> {
        if i >= self.m || k >= self.n {
            return Err(Error::IndexOutOfRange {
                index: i * self.n + k,
                len: self.m * self.n,
            });
        }
        Ok((i * self.n + k) * CHUNK_BYTES)
    }

    pub fn entry_bytes(&self, i: usize, k: usize) -> Result<&[u8]> {
        let o = self.offset(i, k)?;
        Ok(&self.data[o..o + CHUNK_BYTES])
    }

    pub fn entry(&self, i: usize, k: usize) -> Result<Scalar> {
        Ok(chunk_to_scalar(self.entry_bytes(i, k)?))
    }

    pub fn set_entry(&mut self, i: usize, k: usize, x: &Scalar) -> Result<()> {
        let chunk = scalar_to_chunk(x)?;
        let o = self.offset(i, k)?;
        self.data[o..o + CHUNK_BYTES].copy_from_slice(&chunk);
        Ok(())
    }

    /// Overwrites raw bytes of entry `(i, k)` without any bookkeeping.
    pub fn set_entry_bytes(&mut self, i: usize, k: usize, b: &[u8; CHUNK_BYTES]) -> Result<()> {
        let o = self.offset(i, k)?;
        self.data[o..o + CHUNK_BYTES].copy_from_slice(b);
        Ok(())
    }

    fn row(&self, i: usize) -> &[u8] {
        let w = self.n * CHUNK_BYTES;
        &self.data[i * w..(i + 1) * w]
    }

    /// `y = M·x`, rows in parallel.
    pub fn mul_vec(&self, x: &[Scalar]) -> Result<Vec<Scalar>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok((0..self.m)
            .into_par_iter()
            .map(|i| {
                self.row(i)
                    .chunks_exact(CHUNK_BYTES)
                    .zip(x)
                    .fold(Scalar::zero(), |acc, (c, xk)| acc + chunk_to_scalar(c) * xk)
            })
            .collect())
    }

    /// `vᵀ = uᵀM` for `u = [γ^i]`.
    pub fn control_product(&self, gamma: Scalar) -> Vec<Scalar> {
        let mut v = vec![Scalar::zero(); self.n];
        for i in (0..self.m).rev() {
            let row = self.row(i);
            v.par_iter_mut()
                .zip(row.par_chunks_exact(CHUNK_BYTES))
                .for_each(|(vk, c)| *vk = *vk * gamma + chunk_to_scalar(c));
        }
        v
    }

    /// Database file: header then the padded matrix.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(DB_MAGIC)
            .u32(DB_VERSION)
            .u64(self.byte_len)
            .u64(self.m as u64)
            .u64(self.n as u64)
            .u32(CHUNK_BYTES as u32);
        let mut out = w.into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_file_bytes(b: &[u8]) -> Result<Self> {
        let mut r = Reader::new(b);
        if r.raw(4)? != DB_MAGIC {
            return Err(Error::decode("not a database file"));
        }
        if r.u32()? != DB_VERSION {
            return Err(Error::decode("unsupported database version"));
        }
        let byte_len = r.u64()?;
        let m = r.usize()?;
        let n = r.usize()?;
        if r.u32()? as usize != CHUNK_BYTES {
            return Err(Error::decode("unsupported chunk size"));
        }
        let cap = m
            .checked_mul(n)
            .and_then(|e| e.checked_mul(CHUNK_BYTES))
            .ok_or_else(|| Error::decode("matrix too large"))?;
        if m == 0 || n == 0 || byte_len > cap as u64 || r.remaining() != cap {
            return Err(Error::decode("database size does not match header"));
        }
        Ok(Self {
            byte_len,
            m,
            n,
            data: r.raw(cap)?.to_vec(),
        })
    }
}

impl LeafSource for DataMatrix {
    fn leaf_count(&self) -> usize {
        self.m * self.n
    }
    fn leaf(&self, e: usize) -> Cow<'_, [u8]> {
        Cow::Borrowed(&self.data[e * CHUNK_BYTES..(e + 1) * CHUNK_BYTES])
    }
}

fn chunk_to_scalar(c: &[u8]) -> Scalar {
    use ark_ff::PrimeField;
    Scalar::from_be_bytes_mod_order(c)
}

/// 31-byte encoding, for values below `2^248`.
pub fn scalar_to_chunk(x: &Scalar) -> Result<[u8; CHUNK_BYTES]> {
    let b = algebra::scalar_to_bytes(x);
    let extra = b.len() - CHUNK_BYTES;
    if b[..extra].iter().any(|&z| z != 0) {
        return Err(Error::invalid("entry value does not fit in 31 bytes"));
    }
    Ok(b[extra..].try_into().unwrap())
}

#[derive(Clone, Debug)]
pub struct DporClientState {
    pub inner: VespoClientState,
    pub gamma: Scalar,
    pub root_m: Digest,
    pub m: usize,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub struct DporServerState {
    pub matrix: DataMatrix,
    pub tree_m: MerkleTree,
    pub inner: VespoServerState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditResponse {
    pub y: Vec<Scalar>,
    pub zeta: Ciphertext,
    pub xi: [Gt; 2],
}

/// First message of an update: which entry the client wants to rewrite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateFetch {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateFetchResponse {
    pub entry: [u8; CHUNK_BYTES],
    pub path_m: LeafPath,
    pub w_k: Ciphertext,
    pub path_w: LeafPath,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRequest {
    pub row: usize,
    pub col: usize,
    pub value: [u8; CHUNK_BYTES],
    pub inner: vespo::UpdateRequest,
}

/// Sets up both parties for `raw` laid out under `policy`.
pub fn setup<R: RngCore + CryptoRng + ?Sized>(
    raw: &[u8],
    policy: ShapePolicy,
    cfg: &SecurityConfig,
    rng: &mut R,
) -> Result<(DporClientState, DporServerState)> {
    cfg.validate()?;
    let matrix = DataMatrix::from_policy(raw, policy)?;
    let (pk, sk) = lhe::keygen(cfg.lhe_bits, rng)?;
    setup_matrix(matrix, cfg.curve, pk, sk, rng)
}

/// Setup over an already shaped matrix with an existing key pair.
pub fn setup_matrix<R: RngCore + ?Sized>(
    matrix: DataMatrix,
    curve: CurveId,
    pk: LhePublicKey,
    sk: lhe::LheSecretKey,
    rng: &mut R,
) -> Result<(DporClientState, DporServerState)> {
    if matrix.byte_len == 0 {
        return Err(Error::invalid("database is empty"));
    }
    pk.check_capacity(matrix.n, &lhe::scalar_modulus())?;
    let ctx = GroupContext::new(curve);
    let gamma = Scalar::rand(rng);
    let v = matrix.control_product(gamma);
    let masks = Masks::draw(rng)?;
    let committed = vespo::commit(&ctx, pk, sk, &v, masks, rng)?;
    let tree_m = MerkleTree::build_from(&matrix, pruning_depth(matrix.m * matrix.n))?;
    let client = DporClientState {
        inner: committed.client,
        gamma,
        root_m: tree_m.root(),
        m: matrix.m,
        n: matrix.n,
    };
    let server = DporServerState {
        matrix,
        tree_m,
        inner: committed.server,
    };
    Ok((client, server))
}

impl DporClientState {
    pub fn challenge<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Challenge> {
        self.inner.challenge(rng)
    }

    pub fn challenge_at(&self, r: Scalar) -> Result<Challenge> {
        self.inner.challenge_at(r)
    }

    /// Accepts iff `uᵀy = D(ζ)` and the masked pairing equation holds.
    pub fn verify(&self, ch: &Challenge, resp: &AuditResponse) -> Result<()> {
        if resp.y.len() != self.m {
            return Err(Error::Rejected(RejectReason::Malformed));
        }
        let z = self.inner.decrypt_value(&resp.zeta);
        if algebra::horner(&resp.y, self.gamma) != z {
            return Err(Error::Rejected(RejectReason::DotFail));
        }
        if !self.inner.check_pairing(ch, z, &resp.xi) {
            return Err(Error::Rejected(RejectReason::PairingFail));
        }
        Ok(())
    }

    pub fn fetch(&self, row: usize, col: usize) -> Result<UpdateFetch> {
        if row >= self.m || col >= self.n {
            return Err(Error::IndexOutOfRange {
                index: row.saturating_mul(self.n).saturating_add(col),
                len: self.m * self.n,
            });
        }
        Ok(UpdateFetch { row, col })
    }

    /// Checks both fetched paths, then commits to `M'_{ik} = value`.
    /// Returns `None` when the entry already holds `value`.
    pub fn prepare_update<R: RngCore + ?Sized>(
        &mut self,
        f: &UpdateFetch,
        resp: &UpdateFetchResponse,
        value: &Scalar,
        rng: &mut R,
    ) -> Result<Option<UpdateRequest>> {
        let new_chunk = scalar_to_chunk(value)?;
        let e = f.row * self.n + f.col;
        if !resp.path_m.verifies(&self.root_m, e, self.m * self.n, &resp.entry) {
            return Err(Error::Rejected(RejectReason::MerkleFail));
        }
        let w_bytes = self.inner.pk.ciphertext_to_bytes(&resp.w_k);
        if !resp.path_w.verifies(&self.inner.root, f.col, self.n, &w_bytes) {
            return Err(Error::Rejected(RejectReason::MerkleFail));
        }
        let old = chunk_to_scalar(&resp.entry);
        let delta = algebra::pow_counted(self.gamma, f.row as u64) * (*value - old);
        if delta.is_zero() {
            return Ok(None);
        }
        let inner = self.inner.prepare_update(f.col, delta, rng)?;
        let root_m = resp.path_m.root(&new_chunk)?;
        self.inner.complete_update(
            &inner,
            &vespo::UpdateResponse {
                leaf: resp.w_k.clone(),
                path: resp.path_w.clone(),
            },
        )?;
        self.root_m = root_m;
        Ok(Some(UpdateRequest {
            row: f.row,
            col: f.col,
            value: new_chunk,
            inner,
        }))
    }

    /// Size of the persistent state without the key pair.
    pub fn persistent_bytes(&self) -> usize {
        let mut w = Writer::new();
        self.write_secrets(&mut w);
        w.len()
    }

    fn write_secrets(&self, w: &mut Writer) {
        self.inner.write_secrets(w);
        w.scalar(&self.gamma)
            .digest(&self.root_m)
            .u64(self.m as u64)
            .u64(self.n as u64);
    }

    pub fn write(&self, w: &mut Writer) {
        self.inner.pk.write(w);
        self.inner.sk.write(w);
        self.write_secrets(w);
    }

    pub fn read(r: &mut Reader, curve: CurveId) -> Result<Self> {
        let inner = VespoClientState::read(r, curve)?;
        let gamma = r.scalar()?;
        let root_m = r.digest()?;
        let m = r.usize()?;
        let n = r.usize()?;
        if n == 0 || m == 0 || inner.degree + 1 != n {
            return Err(Error::decode("client state shape is inconsistent"));
        }
        Ok(Self {
            inner,
            gamma,
            root_m,
            m,
            n,
        })
    }
}

impl DporServerState {
    pub fn audit(&self, r: Scalar) -> Result<AuditResponse> {
        self.audit_with_workers(r, 1)
    }

    /// `y = M·[r^k]` and the encrypted evaluation of `v` at `r`.
    pub fn audit_with_workers(&self, r: Scalar, q: usize) -> Result<AuditResponse> {
        let q = q.max(1);
        let y = polyeval::with_workers(q, || {
            let x = if q == 1 {
                algebra::scalar_powers(r, self.matrix.n - 1)
            } else {
                algebra::scalar_powers_par(r, self.matrix.n - 1)
            };
            self.matrix.mul_vec(&x)
        })?;
        let e = self.inner.eval_with_workers(r, q)?;
        Ok(AuditResponse {
            y,
            zeta: e.zeta,
            xi: e.xi,
        })
    }

    pub fn fetch(&self, f: &UpdateFetch) -> Result<UpdateFetchResponse> {
        let e = f.row * self.matrix.n + f.col;
        let (entry, path_m) = self.tree_m.leaf_path(e, &self.matrix)?;
        let (w_k, path_w) = self.inner.leaf(f.col)?;
        Ok(UpdateFetchResponse {
            entry: entry
                .try_into()
                .map_err(|_| Error::invalid("bad entry width"))?,
            path_m,
            w_k,
            path_w,
        })
    }

    pub fn apply_update(&mut self, req: &UpdateRequest) -> Result<()> {
        if req.inner.index != req.col {
            return Err(Error::invalid("update column mismatch"));
        }
        let e = req.row * self.matrix.n + req.col;
        self.matrix.offset(req.row, req.col)?;
        self.inner.apply_update(&req.inner)?;
        self.matrix.set_entry_bytes(req.row, req.col, &req.value)?;
        self.tree_m.refresh_leaf(e, &self.matrix)
    }

    /// Bytes stored beyond the database itself.
    pub fn extra_storage_bytes(&self) -> usize {
        let mut w = Writer::new();
        self.write(&mut w);
        w.len()
    }

    /// Extra storage relative to the database size.
    pub fn extra_storage_ratio(&self) -> f64 {
        self.extra_storage_bytes() as f64 / self.matrix.byte_len.max(1) as f64
    }

    /// Everything except the matrix, which lives in its own file.
    pub fn write(&self, w: &mut Writer) {
        self.tree_m.write(w);
        self.inner.write(w);
    }

    pub fn read(r: &mut Reader, matrix: DataMatrix) -> Result<Self> {
        let tree_m = MerkleTree::read(r)?;
        let inner = VespoServerState::read(r)?;
        if tree_m.leaf_count() != matrix.m * matrix.n || inner.w.len() != matrix.n {
            return Err(Error::decode("server state does not match database shape"));
        }
        Ok(Self {
            matrix,
            tree_m,
            inner,
        })
    }
}

impl AuditResponse {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        w.u64(self.y.len() as u64);
        for x in &self.y {
            w.scalar(x);
        }
        pk.write_ciphertext(w, &self.zeta);
        w.gt(&self.xi[0]).gt(&self.xi[1]);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        let m = r.count(algebra::scalar_width::<Scalar>())?;
        let y = (0..m).map(|_| r.scalar()).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            y,
            zeta: pk.read_ciphertext(r)?,
            xi: [r.gt()?, r.gt()?],
        })
    }

    /// Encoded size, for communication measurements.
    pub fn encoded_len(&self, pk: &LhePublicKey) -> usize {
        let mut w = Writer::new();
        self.write(pk, &mut w);
        w.len()
    }
}

impl UpdateFetch {
    pub fn write(&self, w: &mut Writer) {
        w.u64(self.row as u64).u64(self.col as u64);
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        Ok(Self {
            row: r.usize()?,
            col: r.usize()?,
        })
    }
}

impl UpdateFetchResponse {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        w.raw(&self.entry);
        self.path_m.write(w);
        pk.write_ciphertext(w, &self.w_k);
        self.path_w.write(w);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            entry: r.raw(CHUNK_BYTES)?.try_into().unwrap(),
            path_m: LeafPath::read(r)?,
            w_k: pk.read_ciphertext(r)?,
            path_w: LeafPath::read(r)?,
        })
    }
}

impl UpdateRequest {
    pub fn write(&self, pk: &LhePublicKey, w: &mut Writer) {
        w.u64(self.row as u64).u64(self.col as u64).raw(&self.value);
        self.inner.write(pk, w);
    }

    pub fn read(pk: &LhePublicKey, r: &mut Reader) -> Result<Self> {
        Ok(Self {
            row: r.usize()?,
            col: r.usize()?,
            value: r.raw(CHUNK_BYTES)?.try_into().unwrap(),
            inner: vespo::UpdateRequest::read(pk, r)?,
        })
    }
}

/// Outcome of one audit, as recorded in the transcript log.
pub fn audit_outcome(res: &Result<()>) -> String {
    match res {
        Ok(()) => "ACCEPT".to_string(),
        Err(Error::Rejected(r)) => format!("REJECT {}", r.code()),
        Err(e) => format!("ERROR {e}"),
    }
}

/// Appends `timestamp, r, outcome` as a tab-separated line.
pub fn append_audit_log(path: &Path, r: &Scalar, outcome: &str) -> Result<()> {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let hex: String = algebra::scalar_to_bytes(r)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{ts}\t{hex}\t{outcome}")?;
    Ok(())
}
