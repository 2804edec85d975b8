//! State files under a state directory.

use std::fs;
use std::path::{Path, PathBuf};

use vespo::ckzg::{CipheredVpeClientState, CipheredVpeServerState};
use vespo::codec::{Reader, Writer};
use vespo::container::{Protocol, Role, StateContainer, NO_LHE};
use vespo::dpor::{DataMatrix, DporClientState, DporServerState};
use vespo::lhe::LhePublicKey;
use vespo::pairing::CurveId;
use vespo::pubdyn::{PublicVpeClientState, PublicVpeServerState, PublicVpeVerifierState};
use vespo::vespo::{VespoClientState, VespoServerState};
use vespo::{Error, Result};

pub const CLIENT_FILE: &str = "client.state";
pub const VERIFIER_FILE: &str = "verifier.state";
pub const SERVER_FILE: &str = "server.state";
pub const DB_FILE: &str = "server.db";
pub const AUDIT_LOG: &str = "audit.log";

/// Writes every file to a temporary name first and renames only once all
/// writes succeeded.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    let res = (|| {
        for (path, bytes) in files {
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(format!(".tmp-{}", std::process::id()));
            let tmp = path.with_file_name(name);
            staged.push(tmp.clone());
            fs::write(&tmp, bytes)?;
            fs::File::open(&tmp)?.sync_all()?;
        }
        for ((path, _), tmp) in files.iter().zip(&staged) {
            fs::rename(tmp, path)?;
        }
        Ok(())
    })();
    if res.is_err() {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
    }
    res
}

fn lhe_tag(pk: &LhePublicKey) -> String {
    format!("paillier-{}", pk.bits())
}

fn wrap(protocol: Protocol, role: Role, curve: CurveId, lhe: &str, f: impl FnOnce(&mut Writer)) -> Vec<u8> {
    let mut w = Writer::new();
    f(&mut w);
    StateContainer::new(protocol, role, curve, lhe, w.into_bytes()).to_bytes()
}

fn read_container(path: &Path) -> Result<StateContainer> {
    let bytes = fs::read(path).map_err(|e| {
        Error::invalid(format!("cannot read {}: {e}", path.display()))
    })?;
    StateContainer::from_bytes(&bytes)
}

/// Protocol recorded in a state file.
pub fn protocol_of(path: &Path) -> Result<Protocol> {
    Ok(read_container(path)?.protocol)
}

fn decode<T>(
    path: &Path,
    protocol: Protocol,
    role: Role,
    f: impl FnOnce(&mut Reader, CurveId) -> Result<T>,
) -> Result<T> {
    let c = read_container(path)?;
    let payload = c.expect(protocol, role, None)?;
    let mut r = Reader::new(payload);
    let v = f(&mut r, c.curve)?;
    r.finish()?;
    Ok(v)
}

pub enum ClientSide {
    Ckzg(CipheredVpeClientState),
    Pubdyn(PublicVpeClientState, PublicVpeVerifierState),
    Vespo(VespoClientState),
    Dpor(DporClientState),
}

pub enum ServerSide {
    Ckzg(CipheredVpeServerState),
    Pubdyn(PublicVpeServerState),
    Vespo(VespoServerState),
    Dpor(DporServerState),
}

impl ClientSide {
    pub fn protocol(&self) -> Protocol {
        match self {
            ClientSide::Ckzg(_) => Protocol::Ckzg,
            ClientSide::Pubdyn(..) => Protocol::Pubdyn,
            ClientSide::Vespo(_) => Protocol::Vespo,
            ClientSide::Dpor(_) => Protocol::Dpor,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(CLIENT_FILE);
        let p = protocol_of(&path)?;
        Ok(match p {
            Protocol::Ckzg => ClientSide::Ckzg(decode(&path, p, Role::Client, |r, c| {
                CipheredVpeClientState::read(r, c)
            })?),
            Protocol::Pubdyn => {
                let c = decode(&path, p, Role::Client, |r, c| PublicVpeClientState::read(r, c))?;
                let v = load_verifier(dir)?;
                ClientSide::Pubdyn(c, v)
            }
            Protocol::Vespo => ClientSide::Vespo(decode(&path, p, Role::Client, |r, c| {
                VespoClientState::read(r, c)
            })?),
            Protocol::Dpor => ClientSide::Dpor(decode(&path, p, Role::Client, |r, c| {
                DporClientState::read(r, c)
            })?),
        })
    }

    pub fn encode(&self, dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
        let path = dir.join(CLIENT_FILE);
        let p = self.protocol();
        match self {
            ClientSide::Ckzg(c) => vec![(path, wrap(p, Role::Client, c.ctx.curve, &lhe_tag(&c.pk), |w| c.write(w)))],
            ClientSide::Pubdyn(c, v) => vec![
                (path, wrap(p, Role::Client, c.ctx.curve, NO_LHE, |w| c.write(w))),
                encode_verifier(dir, v),
            ],
            ClientSide::Vespo(c) => vec![(path, wrap(p, Role::Client, c.ctx.curve, &lhe_tag(&c.pk), |w| c.write(w)))],
            ClientSide::Dpor(c) => {
                let i = &c.inner;
                vec![(path, wrap(p, Role::Client, i.ctx.curve, &lhe_tag(&i.pk), |w| c.write(w)))]
            }
        }
    }
}

pub fn load_verifier(dir: &Path) -> Result<PublicVpeVerifierState> {
    decode(&dir.join(VERIFIER_FILE), Protocol::Pubdyn, Role::Verifier, |r, c| {
        PublicVpeVerifierState::read(r, c)
    })
}

fn encode_verifier(dir: &Path, v: &PublicVpeVerifierState) -> (PathBuf, Vec<u8>) {
    (
        dir.join(VERIFIER_FILE),
        wrap(Protocol::Pubdyn, Role::Verifier, v.sym.ctx.curve, NO_LHE, |w| v.write(w)),
    )
}

impl ServerSide {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SERVER_FILE);
        let p = protocol_of(&path)?;
        Ok(match p {
            Protocol::Ckzg => ServerSide::Ckzg(decode(&path, p, Role::Server, |r, _| {
                CipheredVpeServerState::read(r)
            })?),
            Protocol::Pubdyn => ServerSide::Pubdyn(decode(&path, p, Role::Server, |r, _| {
                PublicVpeServerState::read(r)
            })?),
            Protocol::Vespo => ServerSide::Vespo(decode(&path, p, Role::Server, |r, _| {
                VespoServerState::read(r)
            })?),
            Protocol::Dpor => {
                let db = fs::read(dir.join(DB_FILE))?;
                let matrix = DataMatrix::from_file_bytes(&db)?;
                ServerSide::Dpor(decode(&path, p, Role::Server, |r, _| {
                    DporServerState::read(r, matrix)
                })?)
            }
        })
    }

    /// Encoded server files. `curve` is recorded in the container.
    pub fn encode(&self, dir: &Path, curve: CurveId) -> Vec<(PathBuf, Vec<u8>)> {
        let path = dir.join(SERVER_FILE);
        match self {
            ServerSide::Ckzg(s) => vec![(path, wrap(Protocol::Ckzg, Role::Server, curve, &lhe_tag(&s.pk), |w| s.write(w)))],
            ServerSide::Pubdyn(s) => vec![(path, wrap(Protocol::Pubdyn, Role::Server, curve, NO_LHE, |w| s.write(w)))],
            ServerSide::Vespo(s) => vec![(path, wrap(Protocol::Vespo, Role::Server, curve, &lhe_tag(&s.pk), |w| s.write(w)))],
            ServerSide::Dpor(s) => vec![
                (dir.join(DB_FILE), s.matrix.to_file_bytes()),
                (path, wrap(Protocol::Dpor, Role::Server, curve, &lhe_tag(&s.inner.pk), |w| s.write(w))),
            ],
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let curve = read_container(&dir.join(SERVER_FILE))
            .map(|c| c.curve)
            .unwrap_or(CurveId::Bn254);
        write_all_atomic(&self.encode(dir, curve))
    }
}

/// All files of a fresh setup, written together.
pub fn save_setup(dir: &Path, client: &ClientSide, server: &ServerSide, curve: CurveId) -> Result<Vec<PathBuf>> {
    let mut files = client.encode(dir);
    files.extend(server.encode(dir, curve));
    write_all_atomic(&files)?;
    Ok(files.into_iter().map(|f| f.0).collect())
}
