use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use vespo::codec::{Reader, Writer};
use vespo::container::Protocol;
use vespo::dpor::{self, ShapePolicy};
use vespo::lhe::parse_scalar;
use vespo::polyeval::Polynomial;
use vespo::wire::{MessageType, WireFrame};
use vespo::{ckzg, pubdyn, vespo as vp, Error, Result, Scalar, SecurityConfig};

use crate::state::{self, ClientSide, ServerSide};
use crate::transport::{FileTransport, TcpTransport, Transport};

pub struct Env {
    pub dir: PathBuf,
    pub connect: Option<String>,
    pub workers: usize,
}

impl Env {
    fn transport(&self) -> Result<Box<dyn Transport>> {
        Ok(match &self.connect {
            Some(addr) => Box::new(TcpTransport::connect(addr)?),
            None => Box::new(FileTransport::new(&self.dir, self.workers)),
        })
    }
}

fn decode_all<T>(payload: &[u8], f: impl FnOnce(&mut Reader) -> Result<T>) -> Result<T> {
    let mut r = Reader::new(payload);
    let v = f(&mut r)?;
    r.finish()?;
    Ok(v)
}

fn frame(kind: MessageType, f: impl FnOnce(&mut Writer)) -> WireFrame {
    let mut w = Writer::new();
    f(&mut w);
    WireFrame::new(kind, w.into_bytes())
}

/// Coefficients, lowest degree first, one per line. `#` starts a comment.
pub fn read_coefficients(path: &Path) -> Result<Vec<Scalar>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_scalar)
        .collect()
}

pub struct SetupArgs {
    pub protocol: Protocol,
    pub degree: Option<usize>,
    pub input: Option<PathBuf>,
    pub shape: ShapePolicy,
    pub force: bool,
}

pub fn setup(env: &Env, cfg: &SecurityConfig, a: &SetupArgs, rng: &mut StdRng) -> Result<()> {
    cfg.validate()?;
    let dir = &env.dir;
    let targets = [state::CLIENT_FILE, state::SERVER_FILE, state::VERIFIER_FILE, state::DB_FILE];
    if !a.force {
        if let Some(t) = targets.iter().find(|t| dir.join(t).exists()) {
            return Err(Error::invalid(format!(
                "{} already exists (use --force to overwrite)",
                dir.join(t).display()
            )));
        }
    }
    let (client, server) = if a.protocol == Protocol::Dpor {
        let input = a
            .input
            .as_ref()
            .ok_or_else(|| Error::invalid("dpor setup needs --input <database file>"))?;
        let raw = fs::read(input)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", input.display())))?;
        let (c, s) = dpor::setup(&raw, a.shape, cfg, rng)?;
        eprintln!("database {} bytes as a {}x{} matrix", raw.len(), c.m, c.n);
        (ClientSide::Dpor(c), ServerSide::Dpor(s))
    } else {
        let p = match (&a.input, a.degree) {
            (Some(path), None) => Polynomial::new(read_coefficients(path)?)?,
            (None, Some(d)) => random_polynomial(d, rng),
            _ => return Err(Error::invalid("give exactly one of --degree and --input")),
        };
        match a.protocol {
            Protocol::Ckzg => {
                let (c, s) = ckzg::setup(&p, cfg, rng)?;
                (ClientSide::Ckzg(c), ServerSide::Ckzg(s))
            }
            Protocol::Pubdyn => {
                let (c, v, s) = pubdyn::setup(&p, cfg, rng)?;
                (ClientSide::Pubdyn(c, v), ServerSide::Pubdyn(s))
            }
            Protocol::Vespo => {
                let (c, s) = vp::setup(&p, cfg, rng)?;
                (ClientSide::Vespo(c), ServerSide::Vespo(s))
            }
            Protocol::Dpor => unreachable!(),
        }
    };
    fs::create_dir_all(dir)?;
    for f in state::save_setup(dir, &client, &server, cfg.curve)? {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

/// Random polynomial of exact degree `d`.
pub fn random_polynomial(d: usize, rng: &mut StdRng) -> Polynomial<Scalar> {
    loop {
        let p = Polynomial::rand(d, rng);
        if p.degree() == Some(d) {
            return p;
        }
    }
}

fn random_point(rng: &mut StdRng) -> Scalar {
    vespo::algebra::rand_excluding::<Scalar, _>(rng, &[])
}

/// Evaluates at `point` (or a fresh random point) and prints the verified value.
pub fn eval(env: &Env, point: Option<Scalar>, rng: &mut StdRng) -> Result<()> {
    let client = ClientSide::load(&env.dir)?;
    let mut t = env.transport()?;
    let value = match &client {
        ClientSide::Ckzg(c) => {
            let r = point.unwrap_or_else(|| random_point(rng));
            let resp = t.round(frame(MessageType::EvalReq, |w| {
                w.scalar(&r);
            }))?;
            let resp = decode_all(&resp.expect(MessageType::EvalResp)?, |rd| {
                ckzg::EvalResponse::read(&c.pk, rd)
            })?;
            eprintln!("r = {r}");
            c.verify(r, &resp)?
        }
        ClientSide::Pubdyn(_, v) => {
            let r = point.unwrap_or_else(|| random_point(rng));
            let resp = t.round(frame(MessageType::EvalReq, |w| {
                w.scalar(&r);
            }))?;
            let resp = decode_all(&resp.expect(MessageType::EvalResp)?, pubdyn::EvalResponse::read)?;
            eprintln!("r = {r}");
            v.verify(r, &resp)?
        }
        ClientSide::Vespo(c) => {
            let ch = match point {
                Some(r) => c.challenge_at(r)?,
                None => c.challenge(rng)?,
            };
            let resp = t.round(frame(MessageType::EvalReq, |w| {
                w.scalar(&ch.r);
            }))?;
            let resp = decode_all(&resp.expect(MessageType::EvalResp)?, |rd| {
                vp::EvalResponse::read(&c.pk, rd)
            })?;
            eprintln!("r = {}", ch.r);
            c.verify(&ch, &resp)?
        }
        ClientSide::Dpor(_) => return Err(Error::invalid("dpor states are checked with `audit`")),
    };
    println!("{value}");
    Ok(())
}

pub enum UpdateArgs {
    Coefficient { index: usize, delta: Scalar },
    Entry { row: usize, col: usize, value: Scalar },
}

pub fn update(env: &Env, args: &UpdateArgs, rng: &mut StdRng) -> Result<()> {
    let mut client = ClientSide::load(&env.dir)?;
    match (&mut client, args) {
        (ClientSide::Ckzg(_), _) => {
            return Err(Error::invalid("ckzg polynomials are static; run setup again"))
        }
        (ClientSide::Vespo(c), UpdateArgs::Coefficient { index, delta }) => {
            let req = c.prepare_update(*index, *delta, rng)?;
            let mut t = env.transport()?;
            let resp = t.round(frame(MessageType::UpdateReq, |w| req.write(&c.pk, w)))?;
            let resp = decode_all(&resp.expect(MessageType::UpdateResp)?, |rd| {
                vp::UpdateResponse::read(&c.pk, rd)
            })?;
            c.complete_update(&req, &resp)?;
        }
        (ClientSide::Pubdyn(c, v), UpdateArgs::Coefficient { index, delta }) => {
            let req = c.prepare_update(*index, *delta)?;
            let mut t = env.transport()?;
            let resp = t.round(frame(MessageType::UpdateReq, |w| req.write(w)))?;
            let resp = decode_all(&resp.expect(MessageType::UpdateResp)?, pubdyn::UpdateResponse::read)?;
            c.complete_update(&req, &resp, v)?;
        }
        (ClientSide::Dpor(c), UpdateArgs::Entry { row, col, value }) => {
            dpor::scalar_to_chunk(value)?;
            let f = c.fetch(*row, *col)?;
            let mut t = env.transport()?;
            let resp = t.round(frame(MessageType::UpdateFetch, |w| f.write(w)))?;
            let pk = c.inner.pk.clone();
            let resp = decode_all(&resp.expect(MessageType::UpdateFetchResp)?, |rd| {
                dpor::UpdateFetchResponse::read(&pk, rd)
            })?;
            match c.prepare_update(&f, &resp, value, rng)? {
                None => {
                    println!("unchanged");
                    return Ok(());
                }
                Some(req) => {
                    t.round(frame(MessageType::UpdateReq, |w| req.write(&pk, w)))?
                        .expect(MessageType::Ack)?;
                }
            }
        }
        (ClientSide::Dpor(_), _) => {
            return Err(Error::invalid("dpor updates take --row, --col and --value"))
        }
        (_, _) => return Err(Error::invalid("polynomial updates take --index and --delta")),
    }
    state::write_all_atomic(&client.encode(&env.dir))?;
    println!("OK");
    Ok(())
}

/// Runs one audit, appends it to the log and prints `OK` on success.
pub fn audit(env: &Env, log: Option<&Path>, rng: &mut StdRng) -> Result<()> {
    let client = ClientSide::load(&env.dir)?;
    let ClientSide::Dpor(c) = &client else {
        return Err(Error::invalid("audit needs a dpor client state"));
    };
    let ch = c.challenge(rng)?;
    let mut t = env.transport()?;
    let resp = t.round(frame(MessageType::AuditReq, |w| {
        w.scalar(&ch.r);
    }))?;
    let resp = decode_all(&resp.expect(MessageType::AuditResp)?, |rd| {
        dpor::AuditResponse::read(&c.inner.pk, rd)
    })?;
    let res = c.verify(&ch, &resp);
    let default_log = env.dir.join(state::AUDIT_LOG);
    dpor::append_audit_log(log.unwrap_or(&default_log), &ch.r, &dpor::audit_outcome(&res))?;
    res?;
    println!("OK");
    Ok(())
}
