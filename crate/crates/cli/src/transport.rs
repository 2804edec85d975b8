//! One-round message exchange between the client commands and the server role.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};

use vespo::codec::{Reader, Writer};
use vespo::wire::{MessageType, WireFrame};
use vespo::{dpor, pubdyn, vespo as vp, Error, Result};

use crate::state::ServerSide;

pub trait Transport {
    fn round(&mut self, req: WireFrame) -> Result<WireFrame>;
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

fn unsupported(kind: MessageType) -> Error {
    Error::invalid(format!("request {kind:?} is not supported by this server"))
}

impl ServerSide {
    /// Answers one request. The flag tells whether the state changed.
    pub fn handle(&mut self, req: &WireFrame, workers: usize) -> Result<(WireFrame, bool)> {
        let p = req.payload.as_slice();
        match (req.kind, self) {
            (MessageType::EvalReq, ServerSide::Ckzg(s)) => {
                let r = decode_all(p, |r| r.scalar())?;
                let resp = s.eval(r)?;
                Ok((frame(MessageType::EvalResp, |w| resp.write(&s.pk, w)), false))
            }
            (MessageType::EvalReq, ServerSide::Pubdyn(s)) => {
                let r = decode_all(p, |r| r.scalar())?;
                let resp = s.eval(r);
                Ok((frame(MessageType::EvalResp, |w| resp.write(w)), false))
            }
            (MessageType::EvalReq, ServerSide::Vespo(s)) => {
                let r = decode_all(p, |r| r.scalar())?;
                let resp = s.eval_with_workers(r, workers)?;
                Ok((frame(MessageType::EvalResp, |w| resp.write(&s.pk, w)), false))
            }
            (MessageType::AuditReq, ServerSide::Dpor(s)) => {
                let r = decode_all(p, |r| r.scalar())?;
                let resp = s.audit_with_workers(r, workers)?;
                Ok((frame(MessageType::AuditResp, |w| resp.write(&s.inner.pk, w)), false))
            }
            (MessageType::UpdateReq, ServerSide::Pubdyn(s)) => {
                let u = decode_all(p, pubdyn::UpdateRequest::read)?;
                let resp = s.apply_update(&u)?;
                Ok((frame(MessageType::UpdateResp, |w| resp.write(w)), true))
            }
            (MessageType::UpdateReq, ServerSide::Vespo(s)) => {
                let u = decode_all(p, |r| vp::UpdateRequest::read(&s.pk, r))?;
                let resp = s.apply_update(&u)?;
                Ok((frame(MessageType::UpdateResp, |w| resp.write(&s.pk, w)), true))
            }
            (MessageType::UpdateFetch, ServerSide::Dpor(s)) => {
                let f = decode_all(p, dpor::UpdateFetch::read)?;
                let resp = s.fetch(&f)?;
                Ok((frame(MessageType::UpdateFetchResp, |w| resp.write(&s.inner.pk, w)), false))
            }
            (MessageType::UpdateReq, ServerSide::Dpor(s)) => {
                let u = decode_all(p, |r| dpor::UpdateRequest::read(&s.inner.pk, r))?;
                s.apply_update(&u)?;
                Ok((WireFrame::new(MessageType::Ack, Vec::new()), true))
            }
            (kind, _) => Err(unsupported(kind)),
        }
    }

    /// Like [`ServerSide::handle`], but failures become error frames.
    pub fn respond(&mut self, req: &WireFrame, workers: usize) -> (WireFrame, bool) {
        self.handle(req, workers).unwrap_or_else(|e| {
            (WireFrame::new(MessageType::Error, e.to_string().into_bytes()), false)
        })
    }
}

/// Request and response files in `<state-dir>/exchange`, answered by the
/// local server state, which is saved after every state-changing request.
pub struct FileTransport {
    dir: PathBuf,
    exchange: PathBuf,
    server: Option<ServerSide>,
    workers: usize,
}

impl FileTransport {
    pub fn new(dir: &Path, workers: usize) -> Self {
        Self {
            dir: dir.to_path_buf(),
            exchange: dir.join("exchange"),
            server: None,
            workers,
        }
    }
}

impl Transport for FileTransport {
    fn round(&mut self, req: WireFrame) -> Result<WireFrame> {
        fs::create_dir_all(&self.exchange)?;
        let req_path = self.exchange.join("request.bin");
        let resp_path = self.exchange.join("response.bin");
        fs::write(&req_path, req.encode())?;

        if self.server.is_none() {
            self.server = Some(ServerSide::load(&self.dir)?);
        }
        let server = self.server.as_mut().unwrap();
        let incoming = WireFrame::decode(&fs::read(&req_path)?)?;
        let (resp, changed) = server.respond(&incoming, self.workers);
        if changed {
            server.save(&self.dir)?;
        }
        fs::write(&resp_path, resp.encode())?;

        WireFrame::decode(&fs::read(&resp_path)?)
    }
}

pub struct TcpTransport {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpTransport {
    pub fn connect(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr)
            .map_err(|e| Error::invalid(format!("cannot connect to {addr}: {e}")))?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }
}

impl Transport for TcpTransport {
    fn round(&mut self, req: WireFrame) -> Result<WireFrame> {
        req.write_to(&mut self.writer)?;
        self.writer.flush()?;
        WireFrame::read_from(&mut self.reader)
    }
}

/// Serves frames from the state in `dir`, one connection at a time.
pub fn serve(dir: &Path, listen: &str, workers: usize, once: bool) -> Result<()> {
    let mut server = ServerSide::load(dir)?;
    let listener = TcpListener::bind(listen)
        .map_err(|e| Error::invalid(format!("cannot listen on {listen}: {e}")))?;
    eprintln!("listening on {}", listener.local_addr()?);
    for conn in listener.incoming() {
        let stream = conn?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = BufWriter::new(stream);
        loop {
            let req = match WireFrame::read_from(&mut reader) {
                Ok(f) => f,
                Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => {
                    let _ = WireFrame::new(MessageType::Error, e.to_string().into_bytes())
                        .write_to(&mut writer);
                    let _ = writer.flush();
                    break;
                }
            };
            let (resp, changed) = server.respond(&req, workers);
            if changed {
                server.save(dir)?;
            }
            resp.write_to(&mut writer)?;
            writer.flush()?;
        }
        if once {
            break;
        }
    }
    Ok(())
}
