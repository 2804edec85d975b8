//! Acceptance run: one PASS/FAIL/SKIP line per criterion.
//!
//! Runs as a plain binary so the lines show up in `cargo test` output.

mod common;

use std::time::Instant;

use ark_bn254::G1Projective;
use ark_ec::{CurveGroup, PrimeGroup};
use ark_ff::{Field, UniformRand, Zero};
use common::*;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;
use rug::Integer;
use sha2::{Digest as _, Sha256};
use vespo::algebra::{self, mmp2, pmgs, Matrix2, MonicQuadratic, Vector2};
use vespo::dpor::{self, DataMatrix, DporClientState, DporServerState, ShapePolicy, CHUNK_BYTES};
use vespo::lhe::{self, Ciphertext, LhePublicKey};
use vespo::merkle::{Digest, LeafPath, MerkleTree, Uncle};
use vespo::opcount;
use vespo::pairing::{self, G1};
use vespo::polyeval::{self, prefix_xi, ScalarCoeffs};
use vespo::{ckzg, pubdyn, vespo as vp, Error};

struct Report {
    lines: Vec<(String, &'static str)>,
}

impl Report {
    fn record(&mut self, id: &str, status: &'static str, detail: String) {
        let line = format!("criterion {id}: {status} {detail}");
        println!("{line}");
        self.lines.push((line, status));
    }

    fn check(&mut self, id: &str, ok: bool, detail: String) {
        self.record(id, if ok { "PASS" } else { "FAIL" }, detail);
    }
}

fn nonzero(rng: &mut ChaCha20Rng) -> Scalar {
    loop {
        let t = Scalar::rand(rng);
        if !t.is_zero() {
            return t;
        }
    }
}

fn enc(pk: &LhePublicKey, x: &Scalar, rng: &mut ChaCha20Rng) -> Ciphertext {
    pk.encrypt(&lhe::scalar_to_integer(x), rng)
}

fn shift(pk: &LhePublicKey, c: &Ciphertext, t: &Scalar, rng: &mut ChaCha20Rng) -> Ciphertext {
    pk.add(c, &enc(pk, t, rng)).unwrap()
}

fn g1_shift(x: &G1, t: Scalar) -> G1 {
    (*x + G1Projective::generator() * t).into_affine()
}

/// Flips one bit of the first real sibling digest on the path.
fn corrupt_path(p: &LeafPath, rng: &mut ChaCha20Rng) -> LeafPath {
    let mut p = p.clone();
    let bit = rng.gen_range(0..256);
    for u in p.uncles.iter_mut() {
        if let Uncle::Left(d) | Uncle::Right(d) = u {
            d[bit / 8] ^= 1 << (bit % 8);
            return p;
        }
    }
    panic!("path has no sibling to corrupt");
}

// ---------------------------------------------------------------- 1

fn completeness(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1001);
    let (polys, points) = (10, 10);
    let mut runs = 0usize;
    let mut bad = Vec::new();
    for d in [16usize, 256, 4096] {
        for _ in 0..polys {
            let p = rand_poly(d, &mut rng);
            let (cc, cs) = ckzg::setup(&p, &cfg(), &mut rng).unwrap();
            let (_, pv, ps) = pubdyn::setup(&p, &cfg(), &mut rng).unwrap();
            let (vc, vs) = vp::setup(&p, &cfg(), &mut rng).unwrap();
            for _ in 0..points {
                let r = rand_scalar(&mut rng);
                let want = horner(p.coeffs(), r);
                if cc.verify(r, &cs.eval(r).unwrap()).ok() != Some(want) {
                    bad.push(format!("ckzg d={d}"));
                }
                if pv.verify(r, &ps.eval(r)).ok() != Some(want) {
                    bad.push(format!("pubdyn d={d}"));
                }
                let ch = vc.challenge(&mut rng).unwrap();
                let want = horner(p.coeffs(), ch.r);
                if vc.verify(&ch, &vs.eval(ch.r).unwrap()).ok() != Some(want) {
                    bad.push(format!("vespo d={d}"));
                }
                runs += 3;
            }
        }
    }
    rep.check(
        "1 completeness",
        bad.is_empty(),
        format!(
            "({runs} honest runs over d in {{16,256,4096}}, {} false rejects, {:.0}s)",
            bad.len(),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 2

const TRIALS: usize = 1000;

fn soundness_ckzg(rng: &mut ChaCha20Rng) -> usize {
    let p = rand_poly(16, rng);
    let (c, s) = ckzg::setup(&p, &cfg(), rng).unwrap();
    let mut rejected = 0;
    for t in 0..TRIALS {
        let r = rand_scalar(rng);
        let mut resp = s.eval(r).unwrap();
        let u = nonzero(rng);
        match t % 5 {
            0 => resp.zeta = shift(&s.pk, &resp.zeta, &u, rng),
            1 => resp.xi = g1_shift(&resp.xi, u),
            2 => {
                resp.zeta = shift(&s.pk, &resp.zeta, &u, rng);
                resp.xi = g1_shift(&resp.xi, nonzero(rng));
            }
            3 => resp = s.eval(r + u).unwrap(),
            _ => resp.zeta = enc(&s.pk, &rand_scalar(rng), rng),
        }
        rejected += c.verify(r, &resp).is_err() as usize;
    }
    rejected
}

fn soundness_pubdyn(rng: &mut ChaCha20Rng) -> usize {
    let d = 16;
    let p = rand_poly(d, rng);
    let (mut c, mut v, mut s) = pubdyn::setup(&p, &cfg(), rng).unwrap();
    let stale = v.clone();
    let req = c.prepare_update(3, nonzero(rng)).unwrap();
    let up = s.apply_update(&req).unwrap();
    c.complete_update(&req, &up, &mut v).unwrap();
    let mut rejected = 0;
    for t in 0..TRIALS {
        let r = rand_scalar(rng);
        let u = nonzero(rng);
        let ok = match t % 7 {
            k @ 0..=4 => {
                let mut resp = s.eval(r);
                let verifier = if k == 4 { &stale } else { &v };
                match k {
                    0 => resp.zeta += u,
                    1 => resp.xi = g1_shift(&resp.xi, u),
                    2 => {
                        resp.zeta += u;
                        resp.xi = g1_shift(&resp.xi, nonzero(rng));
                    }
                    3 => resp = s.eval(r + u),
                    _ => {}
                }
                verifier.verify(r, &resp).is_ok()
            }
            k => {
                let i = rng.gen_range(0..=d);
                let req = c.prepare_update(i, u).unwrap();
                let coeff = s.p.coeffs()[i];
                let (_, path) = s.tree.leaf_path(i, &leaf_scalars(s.p.coeffs())).unwrap();
                let mut resp = pubdyn::UpdateResponse { coeff, path };
                if k == 5 {
                    resp.coeff += nonzero(rng);
                } else {
                    resp.path = corrupt_path(&resp.path, rng);
                }
                let mut v2 = v.clone();
                c.clone().complete_update(&req, &resp, &mut v2).is_ok()
            }
        };
        rejected += !ok as usize;
    }
    rejected
}

fn leaf_scalars(coeffs: &[Scalar]) -> Vec<Vec<u8>> {
    coeffs.iter().map(algebra::scalar_to_bytes).collect()
}

fn soundness_vespo(rng: &mut ChaCha20Rng) -> usize {
    let d = 16;
    let p = rand_poly(d, rng);
    let (mut c, mut s) = vp::setup(&p, &cfg(), rng).unwrap();
    let stale = c.clone();
    let req = c.prepare_update(5, nonzero(rng), rng).unwrap();
    let up = s.apply_update(&req).unwrap();
    c.complete_update(&req, &up).unwrap();
    let mut rejected = 0;
    for t in 0..TRIALS {
        let u = nonzero(rng);
        let ok = match t % 10 {
            k @ 0..=7 => {
                let client = if k == 7 { &stale } else { &c };
                let ch = client.challenge(rng).unwrap();
                let mut resp = s.eval(ch.r).unwrap();
                let gu = c.ctx.gt_pow(u);
                match k {
                    0 => resp.zeta = shift(&s.pk, &resp.zeta, &u, rng),
                    1 => resp.xi[0] += gu,
                    2 => resp.xi[1] += gu,
                    3 => resp.xi.swap(0, 1),
                    4 => {
                        resp.zeta = shift(&s.pk, &resp.zeta, &u, rng);
                        resp.xi[0] += c.ctx.gt_pow(nonzero(rng));
                    }
                    5 => resp = s.eval(ch.r + u).unwrap(),
                    6 => resp.zeta = enc(&s.pk, &rand_scalar(rng), rng),
                    _ => {}
                }
                client.verify(&ch, &resp).is_ok()
            }
            k => {
                let i = rng.gen_range(0..=d);
                let req = c.prepare_update(i, u, rng).unwrap();
                let (leaf, path) = s.leaf(i).unwrap();
                let mut resp = vp::UpdateResponse { leaf, path };
                if k == 8 {
                    resp.leaf = s.w[(i + 1) % (d + 1)].clone();
                } else {
                    resp.path = corrupt_path(&resp.path, rng);
                }
                c.clone().complete_update(&req, &resp).is_ok()
            }
        };
        rejected += !ok as usize;
    }
    rejected
}

fn rand_bytes(len: usize, rng: &mut ChaCha20Rng) -> Vec<u8> {
    let mut raw = vec![0u8; len];
    rng.fill_bytes(&mut raw);
    raw
}

fn rand_entry(rng: &mut ChaCha20Rng) -> Scalar {
    let mut b = [0u8; 32];
    rng.fill_bytes(&mut b[1..]);
    <Scalar as ark_ff::PrimeField>::from_be_bytes_mod_order(&b)
}

fn soundness_dpor(rng: &mut ChaCha20Rng) -> usize {
    let raw = rand_bytes(6000, rng);
    let (mut c, mut s) = dpor::setup(&raw, ShapePolicy::Square, &cfg(), rng).unwrap();
    let stale = c.clone();
    dpor_update(&mut c, &mut s, 1, 1, rand_entry(rng), rng);
    let mut rejected = 0;
    for t in 0..TRIALS {
        let u = nonzero(rng);
        let ok = match t % 10 {
            k @ 0..=5 => {
                let client = if k == 5 { &stale } else { &c };
                let ch = client.challenge(rng).unwrap();
                let mut resp = s.audit(ch.r).unwrap();
                let pk = &s.inner.pk;
                match k {
                    0 => {
                        let i = rng.gen_range(0..resp.y.len());
                        resp.y[i] += u;
                    }
                    1 => resp.zeta = shift(pk, &resp.zeta, &u, rng),
                    2 => resp.xi[rng.gen_range(0..2)] += c.inner.ctx.gt_pow(u),
                    3 => {
                        resp.y[0] += u;
                        resp.zeta = shift(pk, &resp.zeta, &u, rng);
                    }
                    4 => resp = s.audit(ch.r + u).unwrap(),
                    _ => {}
                }
                client.verify(&ch, &resp).is_ok()
            }
            k => {
                let (row, col) = (rng.gen_range(0..c.m), rng.gen_range(0..c.n));
                let f = c.fetch(row, col).unwrap();
                let mut fr = s.fetch(&f).unwrap();
                match k {
                    6 => fr.entry[rng.gen_range(0..CHUNK_BYTES)] ^= 1 << rng.gen_range(0..8),
                    7 => fr.path_m = corrupt_path(&fr.path_m, rng),
                    8 => fr.w_k = s.inner.w[(col + 1) % c.n].clone(),
                    _ => fr.path_w = corrupt_path(&fr.path_w, rng),
                }
                c.clone().prepare_update(&f, &fr, &rand_entry(rng), rng).is_ok()
            }
        };
        rejected += !ok as usize;
    }
    rejected
}

fn soundness(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1002);
    let counts = [
        ("ckzg", soundness_ckzg(&mut rng)),
        ("pubdyn", soundness_pubdyn(&mut rng)),
        ("vespo", soundness_vespo(&mut rng)),
        ("dpor", soundness_dpor(&mut rng)),
    ];
    let ok = counts.iter().all(|(_, n)| *n == TRIALS);
    let detail: Vec<String> = counts.iter().map(|(p, n)| format!("{p} {n}/{TRIALS}")).collect();
    rep.check(
        "2 soundness",
        ok,
        format!("(tampered responses rejected: {}, {:.0}s)", detail.join(", "), t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------- 3

const SEQUENCES: usize = 100;
const STEPS: usize = 8;

fn updates_vespo(rng: &mut ChaCha20Rng) -> usize {
    let d = 8;
    let mut good = 0;
    for _ in 0..SEQUENCES {
        let p = rand_poly(d, rng);
        let (mut c, mut s) = vp::setup(&p, &cfg(), rng).unwrap();
        let mut mirror = p.coeffs().to_vec();
        let mut ok = true;
        for _ in 0..STEPS {
            if rng.gen_bool(0.5) {
                let (i, delta) = (rng.gen_range(0..=d), nonzero(rng));
                let ch = c.challenge(rng).unwrap();
                let before = c.verify(&ch, &s.eval(ch.r).unwrap());
                let req = c.prepare_update(i, delta, rng).unwrap();
                let up = s.apply_update(&req).unwrap();
                ok &= c.complete_update(&req, &up).is_ok();
                mirror[i] += delta;
                let ch = c.challenge_at(ch.r).unwrap();
                let after = c.verify(&ch, &s.eval(ch.r).unwrap());
                ok &= matches!((before, after), (Ok(b), Ok(a)) if a == b + delta * ch.r.pow([i as u64]));
            } else {
                let ch = c.challenge(rng).unwrap();
                ok &= c.verify(&ch, &s.eval(ch.r).unwrap()).ok() == Some(horner(&mirror, ch.r));
            }
        }
        let ch = c.challenge(rng).unwrap();
        ok &= c.verify(&ch, &s.eval(ch.r).unwrap()).ok() == Some(horner(&mirror, ch.r));
        good += ok as usize;
    }
    good
}

fn updates_pubdyn(rng: &mut ChaCha20Rng) -> usize {
    let d = 8;
    let mut good = 0;
    for _ in 0..SEQUENCES {
        let p = rand_poly(d, rng);
        let (mut c, mut v, mut s) = pubdyn::setup(&p, &cfg(), rng).unwrap();
        let mut mirror = p.coeffs().to_vec();
        let mut ok = true;
        for _ in 0..STEPS {
            let r = rand_scalar(rng);
            if rng.gen_bool(0.5) {
                let (i, delta) = (rng.gen_range(0..=d), nonzero(rng));
                let before = v.verify(r, &s.eval(r));
                let req = c.prepare_update(i, delta).unwrap();
                let up = s.apply_update(&req).unwrap();
                ok &= c.complete_update(&req, &up, &mut v).is_ok();
                mirror[i] += delta;
                let after = v.verify(r, &s.eval(r));
                ok &= matches!((before, after), (Ok(b), Ok(a)) if a == b + delta * r.pow([i as u64]));
            } else {
                ok &= v.verify(r, &s.eval(r)).ok() == Some(horner(&mirror, r));
            }
        }
        let r = rand_scalar(rng);
        ok &= v.verify(r, &s.eval(r)).ok() == Some(horner(&mirror, r));
        ok &= s.p.coeffs() == &mirror[..];
        good += ok as usize;
    }
    good
}

fn dpor_update(
    c: &mut DporClientState,
    s: &mut DporServerState,
    row: usize,
    col: usize,
    value: Scalar,
    rng: &mut ChaCha20Rng,
) -> bool {
    let f = c.fetch(row, col).unwrap();
    let fr = s.fetch(&f).unwrap();
    match c.prepare_update(&f, &fr, &value, rng) {
        Ok(Some(req)) => s.apply_update(&req).is_ok(),
        Ok(None) => true,
        Err(_) => false,
    }
}

fn updates_dpor(rng: &mut ChaCha20Rng) -> usize {
    let mut good = 0;
    for _ in 0..SEQUENCES {
        let len = rng.gen_range(200..3000);
        let raw = rand_bytes(len, rng);
        let policy = if rng.gen_bool(0.5) { ShapePolicy::Square } else { ShapePolicy::Rect };
        let (mut c, mut s) = dpor::setup(&raw, policy, &cfg(), rng).unwrap();
        let mut mirror = DataMatrix::new(&raw, c.m, c.n).unwrap();
        let mut ok = true;
        for _ in 0..STEPS {
            if rng.gen_bool(0.5) {
                let (i, k, x) = (rng.gen_range(0..c.m), rng.gen_range(0..c.n), rand_entry(rng));
                ok &= dpor_update(&mut c, &mut s, i, k, x, rng);
                mirror.set_entry(i, k, &x).unwrap();
            } else {
                let ch = c.challenge(rng).unwrap();
                let resp = s.audit(ch.r).unwrap();
                let x = algebra::scalar_powers(ch.r, c.n - 1);
                ok &= c.verify(&ch, &resp).is_ok() && resp.y == mirror.mul_vec(&x).unwrap();
            }
        }
        let ch = c.challenge(rng).unwrap();
        ok &= c.verify(&ch, &s.audit(ch.r).unwrap()).is_ok();
        ok &= s.matrix.raw() == mirror.raw();
        good += ok as usize;
    }
    good
}

fn update_correctness(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1003);
    let counts = [
        ("vespo", updates_vespo(&mut rng)),
        ("pubdyn", updates_pubdyn(&mut rng)),
        ("dpor", updates_dpor(&mut rng)),
    ];
    let ok = counts.iter().all(|(_, n)| *n == SEQUENCES);
    let detail: Vec<String> = counts.iter().map(|(p, n)| format!("{p} {n}/{SEQUENCES}")).collect();
    rep.check(
        "3 update correctness",
        ok,
        format!("(sequences matching the cleartext mirror: {}, {:.0}s)", detail.join(", "), t0.elapsed().as_secs_f64()),
    );
}

// ---------------------------------------------------------------- 4

fn naive_geometric(k: u64, a: &Matrix2<Scalar>, beta: &Vector2<Scalar>) -> Vector2<Scalar> {
    let mut acc = Vector2::zero();
    let mut cur = *beta;
    for _ in 0..=k {
        acc = acc.add(&cur);
        cur = a.mul_vec(&cur);
    }
    acc
}

fn naive_monomial(d: u64, p: &MonicQuadratic<Scalar>) -> (Scalar, Scalar) {
    // Multiply by Z and reduce with Z² = -p1·Z - p0.
    let (mut c0, mut c1) = (Scalar::from(1u64), Scalar::zero());
    for _ in 0..d {
        (c0, c1) = (-c1 * p.p0, c0 - c1 * p.p1);
    }
    (c0, c1)
}

fn naive_xi(coeffs: &[Scalar], s: &[G1], r: Scalar) -> G1Projective {
    let mut acc = G1Projective::zero();
    for i in 1..coeffs.len() {
        for k in 0..i {
            acc += s[i - k - 1] * (coeffs[i] * r.pow([k as u64]));
        }
    }
    acc
}

fn ref_leaf(b: &[u8]) -> Digest {
    Sha256::new().chain_update([0u8]).chain_update(b).finalize().into()
}

fn ref_root(leaves: &[Vec<u8>]) -> Digest {
    let mut level: Vec<Digest> = leaves.iter().map(|l| ref_leaf(l)).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| match p {
                [l, r] => Sha256::new()
                    .chain_update([1u8])
                    .chain_update(l)
                    .chain_update(r)
                    .finalize()
                    .into(),
                [x] => *x,
                _ => unreachable!(),
            })
            .collect();
    }
    level[0]
}

fn algorithm_oracles(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1004);
    let mut fails = Vec::new();

    let a = Matrix2::<Scalar>::rand(&mut rng);
    let beta = Vector2::rand(&mut rng);
    let mut acc = Vector2::zero();
    let mut cur = beta;
    for k in 0..=1000u64 {
        acc = acc.add(&cur);
        cur = a.mul_vec(&cur);
        if pmgs(k, &a, &beta).unwrap() != acc {
            fails.push(format!("pmgs k={k}"));
        }
    }
    for _ in 0..12 {
        let k = rng.gen_range(1..=1u64 << 20);
        let a = Matrix2::<Scalar>::rand(&mut rng);
        let beta = Vector2::rand(&mut rng);
        if pmgs(k, &a, &beta).unwrap() != naive_geometric(k, &a, &beta) {
            fails.push(format!("pmgs k={k}"));
        }
    }

    for _ in 0..10 {
        let p = MonicQuadratic {
            p0: Scalar::rand(&mut rng),
            p1: Scalar::rand(&mut rng),
        };
        for d in (1..=300).chain((0..5).map(|_| rng.gen_range(1..=1u64 << 16))) {
            if mmp2(d, &p).unwrap() != naive_monomial(d, &p) {
                fails.push(format!("mmp2 d={d}"));
            }
        }
    }

    for d in 1..=16usize {
        let coeffs: Vec<Scalar> = (0..=d).map(|_| Scalar::rand(&mut rng)).collect();
        let s: Vec<G1> = (0..d).map(|_| (G1Projective::generator() * Scalar::rand(&mut rng)).into_affine()).collect();
        let r = Scalar::rand(&mut rng);
        let got = prefix_xi::<G1Projective, _>(r, &s, ScalarCoeffs::new(&coeffs[1..]));
        if got != naive_xi(&coeffs, &s, r) {
            fails.push(format!("prefix_xi d={d}"));
        }
    }

    let (pk, sk) = lhe::keygen(1024, &mut rng).unwrap();
    for bits in [16u32, 64, 200, 254] {
        let mut m = Integer::from_digits(&rand_bytes(bits.div_ceil(8) as usize, &mut rng), rug::integer::Order::Msf);
        m.keep_bits_mut(bits);
        m.set_bit(bits - 1, true);
        m.set_bit(0, true);
        let terms = rng.gen_range(2..60usize);
        let ps: Vec<Integer> = (0..terms)
            .map(|_| Integer::from(rng.gen::<u64>()) % &m)
            .collect();
        let r = Integer::from(rng.gen::<u64>()) % &m;
        let w: Vec<Ciphertext> = ps.iter().map(|x| pk.encrypt(x, &mut rng)).collect();
        let c = lhe::ho_dotproduct(&pk, &w, &r, &m).unwrap();
        let want = ps
            .iter()
            .rev()
            .fold(Integer::new(), |acc, x| (acc * &r + x) % &m);
        if sk.decrypt(&c) % &m != want {
            fails.push(format!("ho_dotproduct {bits}-bit m"));
        }
    }

    for _ in 0..40 {
        let n = rng.gen_range(1..300usize);
        let mut leaves: Vec<Vec<u8>> = (0..n).map(|_| rand_bytes(rng.gen_range(0..48), &mut rng)).collect();
        let pruned = rng.gen_range(0..4);
        let mut tree = MerkleTree::build_from(&leaves, pruned).unwrap();
        if tree.root() != ref_root(&leaves) {
            fails.push(format!("merkle root n={n}"));
        }
        for _ in 0..10 {
            let i = rng.gen_range(0..n);
            let (old, path) = tree.leaf_path(i, &leaves).unwrap();
            if old != leaves[i] || !path.verifies(&tree.root(), i, n, &old) {
                fails.push(format!("merkle path n={n} i={i}"));
            }
            let new = rand_bytes(rng.gen_range(0..48), &mut rng);
            let implied = path.root(&new).unwrap();
            leaves[i] = new.clone();
            tree.refresh_leaf(i, leaves.as_slice()).unwrap();
            if implied != tree.root() || implied != ref_root(&leaves) {
                fails.push(format!("merkle update n={n} i={i}"));
            }
            if n > 1 && path.verifies(&tree.root(), (i + 1) % n, n, &new) {
                fails.push(format!("merkle wrong index n={n} i={i}"));
            }
        }
    }

    rep.check(
        "4 algorithm oracles",
        fails.is_empty(),
        format!(
            "(pmgs, mmp2, prefix_xi, ho_dotproduct, merkle; {} mismatches{}, {:.0}s)",
            fails.len(),
            fails.first().map(|f| format!(", first: {f}")).unwrap_or_default(),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 5

fn parallel(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1005);
    let d = 1000;
    let p = rand_poly(d, &mut rng);
    let (c, s) = vp::setup(&p, &cfg(), &mut rng).unwrap();
    let ch = c.challenge(&mut rng).unwrap();
    let hbar = [s.hbar[0].as_slice(), s.hbar[1].as_slice()];
    let seq = polyeval::server_eval_sequential(ch.r, &s.w, &s.s, hbar, &s.pk).unwrap();
    let mut same = true;
    let mut times = Vec::new();
    for q in [1usize, 2, 4, 8] {
        let t = Instant::now();
        let par = polyeval::server_eval_parallel(q, ch.r, &s.w, &s.s, hbar, &s.pk).unwrap();
        times.push((q, t.elapsed().as_secs_f64()));
        same &= par == seq;
    }
    let verified = c.verify(&ch, &vp::EvalResponse { zeta: seq.0, xi: seq.1 }).is_ok();
    rep.check(
        "5a parallel determinism",
        same && verified,
        format!("(d={d}, q in {{1,2,4,8}} bit-identical to sequential, {:.0}s)", t0.elapsed().as_secs_f64()),
    );

    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let speedup = times[0].1 / times[3].1;
    let detail = format!("(q=8 speedup {speedup:.2}x on {cores} cores, need >= 3x on 8 cores)");
    if cores >= 8 {
        rep.check("5b parallel speedup", speedup >= 3.0, detail);
    } else {
        rep.record("5b parallel speedup", "SKIP", detail);
    }
}

// ---------------------------------------------------------------- 6

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Least squares `y ≈ a + b x`.
fn fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

fn complexity(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1006);
    let p = rand_poly(16, &mut rng);
    let (mut c, s) = vp::setup(&p, &cfg(), &mut rng).unwrap();
    let ch0 = c.challenge(&mut rng).unwrap();
    let resp = s.eval(ch0.r).unwrap();

    // Client cost depends on d only through the challenge vector and r^d.
    let (mut logd, mut cost, mut ds) = (Vec::new(), Vec::new(), Vec::new());
    for k in 8..=17u32 {
        c.degree = 1 << k;
        let (_, ops) = opcount::measure(|| {
            let ch = c.challenge_at(ch0.r).unwrap();
            let _ = c.verify(&ch, &resp);
        });
        logd.push(k as f64);
        ds.push((1u64 << k) as f64);
        cost.push(ops.total() as f64);
    }
    let (a, b) = fit(&logd, &cost);
    let resid: Vec<f64> = logd.iter().zip(&cost).map(|(x, y)| y - (a + b * x)).collect();
    let rho = correlation(&logd, &cost);
    let rho_resid = correlation(&ds, &resid);
    let client_ok = rho >= 0.99 && rho_resid.abs() <= 0.2;

    let (mut sd, mut scost) = (Vec::new(), Vec::new());
    for k in 8..=12u32 {
        let d = 1usize << k;
        let p = rand_poly(d, &mut rng);
        let (c, s) = vp::setup(&p, &cfg(), &mut rng).unwrap();
        let ch = c.challenge(&mut rng).unwrap();
        let (_, ops) = opcount::measure(|| s.eval(ch.r).unwrap());
        sd.push(d as f64);
        scost.push(ops.total() as f64);
    }
    let (sa, sb) = fit(&sd, &scost);
    let worst = sd
        .iter()
        .zip(&scost)
        .map(|(x, y)| {
            let f = sa + sb * x;
            (y / f).max(f / y)
        })
        .fold(1.0f64, f64::max);
    let server_ok = worst <= 1.5;

    rep.check(
        "6 complexity trends",
        client_ok && server_ok,
        format!(
            "(client ops = {a:.0} + {b:.1}*log2 d over d=2^8..2^17, corr {rho:.4}, residual corr vs d {rho_resid:.3}; \
             server ops over d=2^8..2^12 within {worst:.3}x of linear fit; {:.0}s)",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 7

fn dpor_end_to_end(rep: &mut Report) {
    let t0 = Instant::now();
    let mut rng = rng(1007);
    let mut ok = true;
    let mut rows = Vec::new();
    let mut max_state = 0;
    for policy in [ShapePolicy::Square, ShapePolicy::Rect] {
        let mut ratios = Vec::new();
        for mib in [1usize, 4, 16, 64] {
            let raw = rand_bytes(mib << 20, &mut rng);
            let (c, s) = dpor::setup(&raw, policy, &cfg(), &mut rng).unwrap();
            drop(raw);
            let ch = c.challenge(&mut rng).unwrap();
            ok &= c.verify(&ch, &s.audit(ch.r).unwrap()).is_ok();
            max_state = max_state.max(c.persistent_bytes());
            let ratio = s.extra_storage_ratio();
            rows.push(format!("{policy} {mib}MiB {}x{} extra {:.3}%", c.m, c.n, 100.0 * ratio));
            ratios.push(ratio);
        }
        ok &= ratios.windows(2).all(|w| w[1] < w[0]);
    }
    ok &= max_state <= 1024;

    let mut detected = 0;
    let corruption_trials = [(ShapePolicy::Square, 1000usize), (ShapePolicy::Rect, 50)];
    for (policy, trials) in corruption_trials {
        let raw = rand_bytes(1 << 20, &mut rng);
        let (c, mut s) = dpor::setup(&raw, policy, &cfg(), &mut rng).unwrap();
        for _ in 0..trials {
            let (i, k) = (rng.gen_range(0..c.m), rng.gen_range(0..c.n));
            let orig: [u8; CHUNK_BYTES] = s.matrix.entry_bytes(i, k).unwrap().try_into().unwrap();
            let mut bad = orig;
            bad[rng.gen_range(0..CHUNK_BYTES)] ^= 1 << rng.gen_range(0..8);
            s.matrix.set_entry_bytes(i, k, &bad).unwrap();
            let ch = c.challenge(&mut rng).unwrap();
            detected += c.verify(&ch, &s.audit(ch.r).unwrap()).is_err() as usize;
            s.matrix.set_entry_bytes(i, k, &orig).unwrap();
        }
        let ch = c.challenge(&mut rng).unwrap();
        ok &= c.verify(&ch, &s.audit(ch.r).unwrap()).is_ok();
    }
    let total: usize = corruption_trials.iter().map(|t| t.1).sum();
    ok &= detected == total;

    rep.check(
        "7 dpor end-to-end",
        ok,
        format!(
            "(intact audits pass; corruption detected {detected}/{total}; client state {max_state} B; {}; {:.0}s)",
            rows.join(", "),
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- 8

fn capacity_guard(rep: &mut Report) {
    let mut rng = rng(1008);
    let (pk, sk) = lhe::keygen(512, &mut rng).unwrap();
    let is_capacity = |e: &Error| matches!(e, Error::Capacity { .. });

    // (m-1)^2 is about 2^507.2, so 32 terms exceed any 512-bit N and 3 terms fit.
    let small = rand_poly(2, &mut rng);
    let accepted = ckzg::setup_with_keys(&small, pairing::CurveId::Bn254, pk.clone(), sk.clone(), &mut rng).is_ok();
    let big = rand_poly(31, &mut rng);
    let ckzg_err = ckzg::setup_with_keys(&big, pairing::CurveId::Bn254, pk.clone(), sk.clone(), &mut rng)
        .map(|_| ())
        .unwrap_err();
    let matrix = DataMatrix::new(&rand_bytes(31 * 64, &mut rng), 2, 32).unwrap();
    let dpor_err = dpor::setup_matrix(matrix, pairing::CurveId::Bn254, pk.clone(), sk, &mut rng)
        .map(|_| ())
        .unwrap_err();
    let w: Vec<Ciphertext> = (0..32).map(|_| pk.encrypt_trivial(&Integer::from(1))).collect();
    let dot_err = lhe::ho_dotproduct(&pk, &w, &Integer::from(3), &lhe::scalar_modulus()).unwrap_err();

    let ok = accepted && is_capacity(&ckzg_err) && is_capacity(&dpor_err) && is_capacity(&dot_err);
    rep.check(
        "8 capacity guard",
        ok,
        format!("(512-bit N: d=2 accepted; d=31 rejected with \"{ckzg_err}\")"),
    );
}

fn main() {
    let mut rep = Report { lines: Vec::new() };
    let t0 = Instant::now();
    // ACCEPTANCE_ONLY=4,7 runs a subset of the sections.
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let sections: [(u32, fn(&mut Report)); 8] = [
        (1, completeness),
        (2, soundness),
        (3, update_correctness),
        (4, algorithm_oracles),
        (5, parallel),
        (6, complexity),
        (7, dpor_end_to_end),
        (8, capacity_guard),
    ];
    for (id, f) in sections {
        if only.as_ref().map_or(true, |o| o.contains(&id)) {
            f(&mut rep);
        }
    }
    let failed = rep.lines.iter().filter(|l| l.1 == "FAIL").count();
    println!(
        "acceptance: {} checks, {failed} failed, {:.0}s",
        rep.lines.len(),
        t0.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
