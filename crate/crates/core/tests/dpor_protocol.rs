mod common;

use ark_ff::{Field, PrimeField, UniformRand};
use common::*;
use rand::{Rng, RngCore};
use vespo::codec::{Reader, Writer};
use vespo::dpor::{
    append_audit_log, audit_outcome, setup, AuditResponse, DataMatrix, DporClientState,
    DporServerState, ShapePolicy, CHUNK_BYTES,
};
use vespo::lhe;
use vespo::merkle::mt_root;
use vespo::pairing::CurveId;
use vespo::vespo::masked_eval;
use vespo::RejectReason;

/// Entry `(i, k)` holds the integer `1000 i + k + 1` in its last two bytes.
fn counting_db(m: usize, n: usize) -> Vec<u8> {
    let mut raw = vec![0u8; m * n * CHUNK_BYTES];
    for i in 0..m {
        for k in 0..n {
            let v = (1000 * i + k + 1) as u16;
            let o = (i * n + k) * CHUNK_BYTES;
            raw[o + CHUNK_BYTES - 2..o + CHUNK_BYTES].copy_from_slice(&v.to_be_bytes());
        }
    }
    raw
}

fn counting_entry(i: usize, k: usize) -> Scalar {
    Scalar::from((1000 * i + k + 1) as u64)
}

fn rand_db(len: usize, rng: &mut rand_chacha::ChaCha20Rng) -> Vec<u8> {
    let mut raw = vec![0u8; len];
    rng.fill_bytes(&mut raw);
    raw
}

fn reason(c: &DporClientState, r: &vespo::vespo::Challenge, resp: &AuditResponse) -> Option<RejectReason> {
    c.verify(r, resp).err().and_then(|e| e.reject_reason())
}

#[test]
fn single_entry_database() {
    let mut rng = rng(40);
    let (c, s) = setup(&[7u8], ShapePolicy::Square, &cfg(), &mut rng).unwrap();
    assert_eq!((c.m, c.n), (1, 1));
    let ch = c.challenge(&mut rng).unwrap();
    let resp = s.audit(ch.r).unwrap();
    // Zero-padded, so the single entry is 7·256^30.
    let e = Scalar::from(7u64) * Scalar::from(256u64).pow([30]);
    assert_eq!(resp.y, vec![e]);
    c.verify(&ch, &resp).unwrap();
}

#[test]
fn setup_commits_to_control_vector() {
    let mut rng = rng(41);
    let (m, n) = (4, 5);
    let raw = counting_db(m, n);
    let (c, s) = setup(&raw, ShapePolicy::Explicit { m, n }, &cfg(), &mut rng).unwrap();
    let v: Vec<Scalar> = (0..n)
        .map(|k| (0..m).map(|i| c.gamma.pow([i as u64]) * counting_entry(i, k)).sum())
        .collect();
    for (w, vk) in s.inner.w.iter().zip(&v) {
        assert_eq!(c.inner.decrypt_value(w), *vk);
    }
    let inner = &c.inner;
    let at_s = masked_eval(&v, &inner.alpha, &inner.beta, &inner.phi, inner.s);
    assert_eq!(inner.kbar, [inner.ctx.gt_pow(at_s[0]), inner.ctx.gt_pow(at_s[1])]);
    let leaves: Vec<Vec<u8>> = raw.chunks(CHUNK_BYTES).map(|x| x.to_vec()).collect();
    assert_eq!(c.root_m, mt_root(&leaves).unwrap());
}

#[test]
fn audit_returns_matrix_vector_product() {
    let mut rng = rng(42);
    let (m, n) = (4, 5);
    let (c, s) = setup(&counting_db(m, n), ShapePolicy::Explicit { m, n }, &cfg(), &mut rng).unwrap();
    let resp = s.audit(Scalar::from(0u64)).unwrap();
    let first_col: Vec<Scalar> = (0..m).map(|i| counting_entry(i, 0)).collect();
    assert_eq!(resp.y, first_col);

    let ch = c.challenge(&mut rng).unwrap();
    let resp = s.audit(ch.r).unwrap();
    for i in 0..m {
        let yi: Scalar = (0..n).map(|k| counting_entry(i, k) * ch.r.pow([k as u64])).sum();
        assert_eq!(resp.y[i], yi);
    }
    c.verify(&ch, &resp).unwrap();
}

#[test]
fn tampered_audits_rejected() {
    let mut rng = rng(43);
    let raw = rand_db(3000, &mut rng);
    let (c, mut s) = setup(&raw, ShapePolicy::Square, &cfg(), &mut rng).unwrap();
    let ch = c.challenge(&mut rng).unwrap();
    let honest = s.audit(ch.r).unwrap();

    let mut bad = honest.clone();
    bad.y[1] += Scalar::from(1u64);
    assert_eq!(reason(&c, &ch, &bad), Some(RejectReason::DotFail));

    let mut bad = honest.clone();
    bad.y.pop();
    assert_eq!(reason(&c, &ch, &bad), Some(RejectReason::Malformed));

    // y and ζ shifted consistently, ξ unchanged.
    let mut bad = honest.clone();
    let t = Scalar::rand(&mut rng);
    bad.y[0] += t;
    let et = s.inner.pk.encrypt(&lhe::scalar_to_integer(&t), &mut rng);
    bad.zeta = s.inner.pk.add(&bad.zeta, &et).unwrap();
    assert_eq!(reason(&c, &ch, &bad), Some(RejectReason::PairingFail));

    let mut bad = honest.clone();
    bad.xi.swap(0, 1);
    assert_eq!(reason(&c, &ch, &bad), Some(RejectReason::PairingFail));

    // Out-of-band corruption of a stored entry.
    let mut chunk = [0u8; CHUNK_BYTES];
    chunk.copy_from_slice(s.matrix.entry_bytes(2, 3).unwrap());
    chunk[CHUNK_BYTES - 1] ^= 1;
    s.matrix.set_entry_bytes(2, 3, &chunk).unwrap();
    let resp = s.audit(ch.r).unwrap();
    assert_eq!(reason(&c, &ch, &resp), Some(RejectReason::DotFail));
}

fn do_update(
    c: &mut DporClientState,
    s: &mut DporServerState,
    row: usize,
    col: usize,
    value: Scalar,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> bool {
    let f = c.fetch(row, col).unwrap();
    let fr = s.fetch(&f).unwrap();
    match c.prepare_update(&f, &fr, &value, rng).unwrap() {
        Some(req) => {
            s.apply_update(&req).unwrap();
            true
        }
        None => false,
    }
}

#[test]
fn updates_follow_mirror() {
    let mut rng = rng(44);
    let raw = rand_db(2000, &mut rng);
    let (mut c, mut s) = setup(&raw, ShapePolicy::Rect, &cfg(), &mut rng).unwrap();
    let mut mirror = DataMatrix::new(&raw, c.m, c.n).unwrap();

    let same = mirror.entry(0, 0).unwrap();
    assert!(!do_update(&mut c, &mut s, 0, 0, same, &mut rng));

    for _ in 0..25 {
        let (i, k) = (rng.gen_range(0..c.m), rng.gen_range(0..c.n));
        let mut b = [0u8; 32];
        rng.fill_bytes(&mut b[1..]);
        let value = Scalar::from_be_bytes_mod_order(&b);
        assert!(do_update(&mut c, &mut s, i, k, value, &mut rng));
        mirror.set_entry(i, k, &value).unwrap();
        let ch = c.challenge(&mut rng).unwrap();
        c.verify(&ch, &s.audit(ch.r).unwrap()).unwrap();
    }
    assert_eq!(s.matrix.raw(), mirror.raw());
    let leaves: Vec<Vec<u8>> = (0..c.m * c.n)
        .map(|e| mirror.entry_bytes(e / c.n, e % c.n).unwrap().to_vec())
        .collect();
    assert_eq!(c.root_m, mt_root(&leaves).unwrap());
    let v = mirror.control_product(c.gamma);
    for (w, vk) in s.inner.w.iter().zip(&v) {
        assert_eq!(c.inner.decrypt_value(w), *vk);
    }
}

#[test]
fn forged_fetch_rejected() {
    let mut rng = rng(45);
    let raw = rand_db(1500, &mut rng);
    let (mut c, s) = setup(&raw, ShapePolicy::Square, &cfg(), &mut rng).unwrap();
    let before = (c.root_m, c.inner.root);
    let f = c.fetch(1, 2).unwrap();
    let mut fr = s.fetch(&f).unwrap();
    fr.entry[5] ^= 0x80;
    let err = c.prepare_update(&f, &fr, &Scalar::from(9u64), &mut rng).unwrap_err();
    assert_eq!(err.reject_reason(), Some(RejectReason::MerkleFail));

    let mut fr = s.fetch(&f).unwrap();
    fr.w_k = s.inner.w[0].clone();
    let err = c.prepare_update(&f, &fr, &Scalar::from(9u64), &mut rng).unwrap_err();
    assert_eq!(err.reject_reason(), Some(RejectReason::MerkleFail));
    assert_eq!((c.root_m, c.inner.root), before);
    assert!(c.fetch(c.m, 0).is_err());
}

#[test]
fn client_state_is_small_and_round_trips() {
    let mut rng = rng(46);
    let raw = rand_db(5000, &mut rng);
    let (c, s) = setup(&raw, ShapePolicy::Square, &cfg(), &mut rng).unwrap();
    assert!(c.persistent_bytes() <= 1024, "{}", c.persistent_bytes());

    let mut w = Writer::new();
    c.write(&mut w);
    let cb = w.into_bytes();
    let c2 = DporClientState::read(&mut Reader::new(&cb), CurveId::Bn254).unwrap();
    let mut w = Writer::new();
    s.write(&mut w);
    let sb = w.into_bytes();
    let m2 = DataMatrix::from_file_bytes(&s.matrix.to_file_bytes()).unwrap();
    let s2 = DporServerState::read(&mut Reader::new(&sb), m2).unwrap();
    let ch = c2.challenge(&mut rng).unwrap();
    let resp = s2.audit(ch.r).unwrap();
    let mut w = Writer::new();
    resp.write(&c2.inner.pk, &mut w);
    let rb = w.into_bytes();
    assert_eq!(rb.len(), resp.encoded_len(&c2.inner.pk));
    let resp2 = AuditResponse::read(&c2.inner.pk, &mut Reader::new(&rb)).unwrap();
    c2.verify(&ch, &resp2).unwrap();
}

#[test]
fn extra_storage_shrinks_with_size() {
    let mut rng = rng(47);
    let small = setup(&rand_db(20_000, &mut rng), ShapePolicy::Square, &cfg(), &mut rng).unwrap().1;
    let large = setup(&rand_db(200_000, &mut rng), ShapePolicy::Square, &cfg(), &mut rng).unwrap().1;
    assert!(large.extra_storage_ratio() < small.extra_storage_ratio());
}

#[test]
fn audit_log_lines() {
    let mut rng = rng(48);
    let (c, s) = setup(&rand_db(400, &mut rng), ShapePolicy::Square, &cfg(), &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("audit.log");
    let ch = c.challenge(&mut rng).unwrap();
    let mut resp = s.audit(ch.r).unwrap();
    append_audit_log(&log, &ch.r, &audit_outcome(&c.verify(&ch, &resp))).unwrap();
    resp.y[0] += Scalar::from(1u64);
    append_audit_log(&log, &ch.r, &audit_outcome(&c.verify(&ch, &resp))).unwrap();
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0][1].len(), 64);
    assert_eq!(lines[0][2], "ACCEPT");
    assert_eq!(lines[1][2], "REJECT DOT_FAIL");
}
