mod common;

use ark_ec::CurveGroup;
use ark_ff::Field;
use common::*;
use rug::Integer;
use vespo::ckzg::{setup, CipheredVpeClientState, CipheredVpeServerState, EvalResponse};
use vespo::codec::{Reader, Writer};
use vespo::lhe::integer_to_scalar;
use vespo::pairing::CurveId;
use vespo::polyeval::Polynomial;
use vespo::{Error, RejectReason};

fn q_oracle(coeffs: &[Scalar], s: Scalar, r: Scalar) -> Scalar {
    (horner(coeffs, s) - horner(coeffs, r)) * (s - r).inverse().unwrap()
}

#[test]
fn identity_polynomial() {
    let mut rng = rng(20);
    let p = Polynomial::new(vec![Scalar::from(0u64), Scalar::from(1u64)]).unwrap();
    let (c, s) = setup(&p, &cfg(), &mut rng).unwrap();
    assert_eq!(s.h, vec![c.ctx.g1]);
    assert_eq!(c.k, c.ctx.gt_pow(c.s));
}

#[test]
fn setup_commitments() {
    let mut rng = rng(21);
    let p = rand_poly(8, &mut rng);
    let (c, s) = setup(&p, &cfg(), &mut rng).unwrap();
    assert_eq!(c.k, c.ctx.gt_pow(horner(p.coeffs(), c.s)));
    assert_eq!(s.w.len(), 9);
    for (w, pi) in s.w.iter().zip(p.coeffs()) {
        assert_eq!(integer_to_scalar(&c.sk.decrypt(w)), *pi);
    }
}

#[test]
fn degree_zero_rejected() {
    let mut rng = rng(22);
    let p = Polynomial::new(vec![Scalar::from(4u64)]).unwrap();
    assert!(matches!(setup(&p, &cfg(), &mut rng), Err(Error::InvalidArgument(_))));
}

#[test]
fn eval_values() {
    let mut rng = rng(23);
    let p = rand_poly(10, &mut rng);
    let (c, s) = setup(&p, &cfg(), &mut rng).unwrap();
    let resp = s.eval(Scalar::from(0u64)).unwrap();
    assert_eq!(integer_to_scalar(&c.sk.decrypt(&resp.zeta)), p.coeffs()[0]);
    for _ in 0..5 {
        let r = rand_scalar(&mut rng);
        let resp = s.eval(r).unwrap();
        assert_eq!(integer_to_scalar(&c.sk.decrypt(&resp.zeta)), horner(p.coeffs(), r));
        assert_eq!(resp.xi, c.ctx.g1_pow(q_oracle(p.coeffs(), c.s, r)));
        assert_eq!(c.verify(r, &resp).unwrap(), horner(p.coeffs(), r));
    }
}

#[test]
fn tampering_rejected() {
    let mut rng = rng(24);
    let p = rand_poly(6, &mut rng);
    let (c, s) = setup(&p, &cfg(), &mut rng).unwrap();
    let r = rand_scalar(&mut rng);
    let resp = s.eval(r).unwrap();

    let plus_one = horner(p.coeffs(), r) + Scalar::from(1u64);
    let forged = s
        .pk
        .encrypt(&vespo::lhe::scalar_to_integer(&plus_one), &mut rng);
    let bad = EvalResponse {
        zeta: forged,
        xi: resp.xi,
    };
    assert_eq!(
        c.verify(r, &bad).unwrap_err().reject_reason(),
        Some(RejectReason::PairingFail)
    );

    let bad = EvalResponse {
        zeta: resp.zeta.clone(),
        xi: (resp.xi + c.ctx.g1).into_affine(),
    };
    assert!(c.verify(r, &bad).is_err());

    // ζ shifted by one, ξ left alone: the plaintext moves but the quotient does not.
    let one = s.pk.encrypt(&Integer::from(1), &mut rng);
    let bad = EvalResponse {
        zeta: s.pk.add(&resp.zeta, &one).unwrap(),
        xi: resp.xi,
    };
    assert!(c.verify(r, &bad).is_err());
}

#[test]
fn states_round_trip() {
    let mut rng = rng(25);
    let p = rand_poly(5, &mut rng);
    let (c, s) = setup(&p, &cfg(), &mut rng).unwrap();
    let mut w = Writer::new();
    c.write(&mut w);
    let cb = w.into_bytes();
    let c2 = CipheredVpeClientState::read(&mut Reader::new(&cb), CurveId::Bn254).unwrap();
    let mut w = Writer::new();
    c2.write(&mut w);
    assert_eq!(w.into_bytes(), cb);

    let mut w = Writer::new();
    s.write(&mut w);
    let sb = w.into_bytes();
    let s2 = CipheredVpeServerState::read(&mut Reader::new(&sb)).unwrap();
    let mut w = Writer::new();
    s2.write(&mut w);
    assert_eq!(w.into_bytes(), sb);

    let r = rand_scalar(&mut rng);
    assert_eq!(c2.verify(r, &s2.eval(r).unwrap()).unwrap(), horner(p.coeffs(), r));
}
