//! Per-phase timings, median over repetitions, as tab-separated rows.

use std::io::Write;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::RngCore;
use vespo::container::Protocol;
use vespo::dpor::{self, ShapePolicy};
use vespo::lhe;
use vespo::pairing;
use vespo::polyeval::{self, prefix_xi, ScalarCoeffs};
use vespo::{algebra, ckzg, pubdyn, vespo as vp, Error, Result, Scalar, SecurityConfig};

use crate::commands::random_polynomial;

pub const HEADER: &str =
    "protocol\tbytes\td\tq\treps\tserver_zeta_ms\tserver_xi_ms\tserver_y_ms\tclient_challenge_ms\tdecrypt_ms\tclient_verify_ms";

const PHASES: usize = 6;
const ZETA: usize = 0;
const XI: usize = 1;
const Y: usize = 2;
const CHALLENGE: usize = 3;
const DECRYPT: usize = 4;
const VERIFY: usize = 5;

pub struct BenchArgs {
    pub protocol: Protocol,
    pub degrees: Vec<usize>,
    pub sizes: Vec<usize>,
    pub shape: ShapePolicy,
    pub workers: Vec<usize>,
    pub reps: usize,
}

pub struct Row {
    pub bytes: usize,
    pub d: usize,
    pub q: usize,
    /// Median milliseconds per phase; `None` when the protocol has no such phase.
    pub ms: [Option<f64>; PHASES],
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64() * 1e3)
}

struct Samples([Vec<f64>; PHASES]);

impl Samples {
    fn new() -> Self {
        Self(Default::default())
    }

    fn push(&mut self, phase: usize, ms: f64) {
        self.0[phase].push(ms);
    }

    fn row(self, bytes: usize, d: usize, q: usize) -> Row {
        let mut ms = [None; PHASES];
        for (m, s) in ms.iter_mut().zip(self.0) {
            if !s.is_empty() {
                *m = Some(median(s));
            }
        }
        Row { bytes, d, q, ms }
    }
}

fn point(rng: &mut StdRng) -> Scalar {
    algebra::rand_excluding::<Scalar, _>(rng, &[])
}

fn failed() -> Error {
    Error::invalid("an honest benchmark run was rejected")
}

fn bench_vespo(d: usize, qs: &[usize], reps: usize, cfg: &SecurityConfig, rng: &mut StdRng) -> Result<Vec<Row>> {
    let p = random_polynomial(d, rng);
    let (c, s) = vp::setup(&p, cfg, rng)?;
    let hbar = [s.hbar[0].as_slice(), s.hbar[1].as_slice()];
    let mut rows = Vec::new();
    for &q in qs {
        let mut sm = Samples::new();
        for _ in 0..reps {
            let (ch, t) = timed(|| c.challenge(rng));
            let ch = ch?;
            sm.push(CHALLENGE, t);
            let (zeta, t) = timed(|| polyeval::eval_zeta(q, ch.r, &s.w, &s.pk));
            let zeta = zeta?;
            sm.push(ZETA, t);
            let (xi, t) = timed(|| polyeval::eval_xi(q, ch.r, &s.s, hbar));
            sm.push(XI, t);
            let (z, t) = timed(|| c.decrypt_value(&zeta));
            sm.push(DECRYPT, t);
            let (ok, t) = timed(|| c.check_pairing(&ch, z, &xi));
            sm.push(VERIFY, t);
            if !ok {
                return Err(failed());
            }
        }
        rows.push(sm.row(0, d, q));
    }
    Ok(rows)
}

fn bench_ckzg(d: usize, reps: usize, cfg: &SecurityConfig, rng: &mut StdRng) -> Result<Vec<Row>> {
    let p = random_polynomial(d, rng);
    let (c, s) = ckzg::setup(&p, cfg, rng)?;
    let mut sm = Samples::new();
    for _ in 0..reps {
        let r = point(rng);
        let powers = algebra::scalar_powers(r, d);
        let (zeta, t) = timed(|| lhe::ho_dotproduct_powers(&s.pk, &s.w, &powers, 1));
        let zeta = zeta?;
        sm.push(ZETA, t);
        let (xi, t) = timed(|| pairing::dot_in_exponent::<ark_bn254::G1Projective>(&s.h, &powers[..d]));
        sm.push(XI, t);
        let resp = ckzg::EvalResponse {
            zeta,
            xi: ark_ec::CurveGroup::into_affine(xi?),
        };
        let (_, t) = timed(|| c.sk.decrypt(&resp.zeta));
        sm.push(DECRYPT, t);
        let (ok, t) = timed(|| c.verify(r, &resp));
        sm.push(VERIFY, t);
        ok?;
    }
    Ok(vec![sm.row(0, d, 1)])
}

fn bench_pubdyn(d: usize, reps: usize, cfg: &SecurityConfig, rng: &mut StdRng) -> Result<Vec<Row>> {
    let p = random_polynomial(d, rng);
    let (_, v, s) = pubdyn::setup(&p, cfg, rng)?;
    let s1: Vec<_> = s.s.iter().map(|x| x.g1).collect();
    let mut sm = Samples::new();
    for _ in 0..reps {
        let r = point(rng);
        let (zeta, t) = timed(|| s.p.eval(r));
        sm.push(ZETA, t);
        let (xi, t) = timed(|| {
            prefix_xi::<ark_bn254::G1Projective, _>(r, &s1, ScalarCoeffs::new(&s.p.coeffs()[1..]))
        });
        sm.push(XI, t);
        let resp = pubdyn::EvalResponse {
            zeta,
            xi: ark_ec::CurveGroup::into_affine(xi),
        };
        let (ok, t) = timed(|| v.verify(r, &resp));
        sm.push(VERIFY, t);
        ok?;
    }
    Ok(vec![sm.row(0, d, 1)])
}

fn bench_dpor(
    bytes: usize,
    shape: ShapePolicy,
    qs: &[usize],
    reps: usize,
    cfg: &SecurityConfig,
    rng: &mut StdRng,
) -> Result<Vec<Row>> {
    let mut raw = vec![0u8; bytes];
    rng.fill_bytes(&mut raw);
    let (c, s) = dpor::setup(&raw, shape, cfg, rng)?;
    drop(raw);
    let inner = &s.inner;
    let hbar = [inner.hbar[0].as_slice(), inner.hbar[1].as_slice()];
    let mut rows = Vec::new();
    for &q in qs {
        let mut sm = Samples::new();
        for _ in 0..reps {
            let (ch, t) = timed(|| c.challenge(rng));
            let ch = ch?;
            sm.push(CHALLENGE, t);
            let (y, t) = timed(|| {
                let x = algebra::scalar_powers(ch.r, c.n - 1);
                s.matrix.mul_vec(&x)
            });
            sm.push(Y, t);
            let (zeta, t) = timed(|| polyeval::eval_zeta(q, ch.r, &inner.w, &inner.pk));
            sm.push(ZETA, t);
            let (xi, t) = timed(|| polyeval::eval_xi(q, ch.r, &inner.s, hbar));
            sm.push(XI, t);
            let resp = dpor::AuditResponse { y: y?, zeta: zeta?, xi };
            let (_, t) = timed(|| c.inner.decrypt_value(&resp.zeta));
            sm.push(DECRYPT, t);
            let (ok, t) = timed(|| c.verify(&ch, &resp));
            sm.push(VERIFY, t);
            ok?;
        }
        rows.push(sm.row(bytes, c.n - 1, q));
    }
    Ok(rows)
}

fn fmt_ms(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())
}

pub fn format_row(protocol: Protocol, reps: usize, r: &Row) -> String {
    let mut cols = vec![
        protocol.as_str().to_string(),
        r.bytes.to_string(),
        r.d.to_string(),
        r.q.to_string(),
        reps.to_string(),
    ];
    cols.extend(r.ms.iter().map(|m| fmt_ms(*m)));
    cols.join("\t")
}

fn summary(rows: &[Row]) -> Vec<String> {
    let mut out = Vec::new();
    let server = |r: &Row| r.ms[ZETA].unwrap_or(0.0) + r.ms[XI].unwrap_or(0.0) + r.ms[Y].unwrap_or(0.0);
    let client = |r: &Row| {
        r.ms[CHALLENGE].unwrap_or(0.0) + r.ms[DECRYPT].unwrap_or(0.0) + r.ms[VERIFY].unwrap_or(0.0)
    };
    let mut qs: Vec<usize> = rows.iter().map(|r| r.q).collect();
    qs.dedup();
    qs.sort_unstable();
    qs.dedup();
    for &q in &qs {
        let rs: Vec<&Row> = rows.iter().filter(|r| r.q == q).collect();
        if let (Some(a), Some(b)) = (rs.first(), rs.last()) {
            if rs.len() > 1 {
                out.push(format!(
                    "q={q}: d {}..{}: server {:.1} -> {:.1} ms ({:.2}x for {:.2}x degree), client {:.2} -> {:.2} ms",
                    a.d,
                    b.d,
                    server(a),
                    server(b),
                    server(b) / server(a),
                    b.d as f64 / a.d as f64,
                    client(a),
                    client(b)
                ));
            }
        }
    }
    if qs.len() > 1 {
        for base in rows.iter().filter(|r| r.q == qs[0]) {
            for r in rows.iter().filter(|r| r.d == base.d && r.bytes == base.bytes && r.q != base.q) {
                out.push(format!(
                    "d={}: q={} server speedup {:.2}x over q={}",
                    r.d,
                    r.q,
                    server(base) / server(r),
                    base.q
                ));
            }
        }
    }
    out
}

/// Prints the table on `out` as rows finish, and the summary on stderr.
pub fn run(a: &BenchArgs, cfg: &SecurityConfig, rng: &mut StdRng, out: &mut dyn Write) -> Result<Vec<Row>> {
    cfg.validate()?;
    if a.reps == 0 {
        return Err(Error::invalid("--reps must be at least 1"));
    }
    writeln!(out, "{HEADER}")?;
    let mut all = Vec::new();
    let mut emit = |rows: Vec<Row>, out: &mut dyn Write| -> Result<()> {
        for r in rows {
            writeln!(out, "{}", format_row(a.protocol, a.reps, &r))?;
            out.flush()?;
            all.push(r);
        }
        Ok(())
    };
    match a.protocol {
        Protocol::Dpor => {
            if a.sizes.is_empty() {
                return Err(Error::invalid("dpor bench needs --sizes"));
            }
            for &b in &a.sizes {
                emit(bench_dpor(b, a.shape, &a.workers, a.reps, cfg, rng)?, out)?;
            }
        }
        p => {
            if a.degrees.is_empty() {
                return Err(Error::invalid("bench needs --degrees or --sweep"));
            }
            for &d in &a.degrees {
                let rows = match p {
                    Protocol::Vespo => bench_vespo(d, &a.workers, a.reps, cfg, rng)?,
                    Protocol::Ckzg => bench_ckzg(d, a.reps, cfg, rng)?,
                    _ => bench_pubdyn(d, a.reps, cfg, rng)?,
                };
                emit(rows, out)?;
            }
        }
    }
    for line in summary(&all) {
        eprintln!("{line}");
    }
    Ok(all)
}
