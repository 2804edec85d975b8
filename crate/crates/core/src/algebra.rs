//! Prime-field scalars, the 2×2 masking algebra, and the logarithmic
//! geometric-sum evaluator used by client-side verification.

use ark_ff::{BigInteger, Field, PrimeField};
use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::opcount;

#[inline]
fn add<F: Field>(a: F, b: F) -> F {
    opcount::field_add(1);
    a + b
}

#[inline]
fn sub<F: Field>(a: F, b: F) -> F {
    opcount::field_add(1);
    a - b
}

#[inline]
fn neg<F: Field>(a: F) -> F {
    opcount::field_add(1);
    -a
}

#[inline]
fn mul<F: Field>(a: F, b: F) -> F {
    opcount::field_mul(1);
    a * b
}

#[inline]
fn inv<F: Field>(a: F) -> Option<F> {
    opcount::field_add(1);
    a.inverse()
}

/// Column vector in Z_p².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Vector2<F>(pub [F; 2]);

impl<F: Field> Vector2<F> {
    pub fn new(x: F, y: F) -> Self {
        Vector2([x, y])
    }

    pub fn zero() -> Self {
        Vector2([F::zero(), F::zero()])
    }

    pub fn is_zero(&self) -> bool {
        self.0[0].is_zero() && self.0[1].is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Vector2([add(self.0[0], o.0[0]), add(self.0[1], o.0[1])])
    }

    pub fn scale(&self, k: F) -> Self {
        Vector2([mul(self.0[0], k), mul(self.0[1], k)])
    }

    pub fn rand<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Vector2([F::rand(rng), F::rand(rng)])
    }
}

impl<F> std::ops::Index<usize> for Vector2<F> {
    type Output = F;
    fn index(&self, j: usize) -> &F {
        &self.0[j]
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Matrix2<F> {
    pub a: F,
    pub b: F,
    pub c: F,
    pub d: F,
}

impl<F: Field> Matrix2<F> {
    pub fn new(a: F, b: F, c: F, d: F) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(F::one(), F::zero(), F::zero(), F::one())
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero(), F::zero(), F::zero())
    }

    pub fn diag(x: F, y: F) -> Self {
        Self::new(x, F::zero(), F::zero(), y)
    }

    pub fn rand<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::new(F::rand(rng), F::rand(rng), F::rand(rng), F::rand(rng))
    }

    pub fn det(&self) -> F {
        sub(mul(self.a, self.d), mul(self.b, self.c))
    }

    pub fn trace(&self) -> F {
        add(self.a, self.d)
    }

    pub fn scale(&self, k: F) -> Self {
        Self::new(mul(self.a, k), mul(self.b, k), mul(self.c, k), mul(self.d, k))
    }

    pub fn sub_identity(&self) -> Self {
        Self::new(sub(self.a, F::one()), self.b, self.c, sub(self.d, F::one()))
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            add(mul(self.a, o.a), mul(self.b, o.c)),
            add(mul(self.a, o.b), mul(self.b, o.d)),
            add(mul(self.c, o.a), mul(self.d, o.c)),
            add(mul(self.c, o.b), mul(self.d, o.d)),
        )
    }

    pub fn mul_vec(&self, v: &Vector2<F>) -> Vector2<F> {
        Vector2([
            add(mul(self.a, v.0[0]), mul(self.b, v.0[1])),
            add(mul(self.c, v.0[0]), mul(self.d, v.0[1])),
        ])
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let di = inv(det).ok_or(Error::SingularMatrix)?;
        Ok(Self::new(
            mul(self.d, di),
            neg(mul(self.b, di)),
            neg(mul(self.c, di)),
            mul(self.a, di),
        ))
    }

    pub fn is_invertible(&self) -> bool {
        !(self.a * self.d - self.b * self.c).is_zero()
    }

    /// `self - I` is invertible, i.e. 1 is not an eigenvalue.
    pub fn minus_identity_invertible(&self) -> bool {
        let one = F::one();
        !((self.a - one) * (self.d - one) - self.b * self.c).is_zero()
    }
}

/// `p0 + p1·Z + Z²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MonicQuadratic<F> {
    pub p0: F,
    pub p1: F,
}

/// Characteristic polynomial `det(A) - tr(A)·Z + Z²`.
pub fn char_poly<F: Field>(m: &Matrix2<F>) -> MonicQuadratic<F> {
    MonicQuadratic {
        p0: m.det(),
        p1: neg(m.trace()),
    }
}

/// Coefficients `(f0, f1)` of `Z^d mod P(Z)`.
pub fn mmp2<F: Field>(d: u64, p: &MonicQuadratic<F>) -> Result<(F, F)> {
    if d == 0 {
        return Err(Error::invalid("mmp2 needs d >= 1"));
    }
    Ok(mmp2_rec(d, p))
}

fn mmp2_rec<F: Field>(d: u64, p: &MonicQuadratic<F>) -> (F, F) {
    if d == 1 {
        return (F::zero(), F::one());
    }
    let (t0, t1) = mmp2_rec(d / 2, p);
    let t1sq = mul(t1, t1);
    let s0 = sub(mul(t0, t0), mul(t1sq, p.p0));
    let t01 = mul(t0, t1);
    let s1 = sub(add(t01, t01), mul(t1sq, p.p1));
    if d & 1 == 1 {
        (neg(mul(s1, p.p0)), sub(s0, mul(s1, p.p1)))
    } else {
        (s0, s1)
    }
}

/// `Σ_{i=0}^{k} A^i β` in O(log k) field operations.
///
/// Fails with [`Error::SingularMatrix`] when `A - I` is not invertible.
pub fn pmgs<F: Field>(k: u64, m: &Matrix2<F>, beta: &Vector2<F>) -> Result<Vector2<F>> {
    let am = m.sub_identity();
    let det = am.det();
    let di = inv(det).ok_or(Error::SingularMatrix)?;
    let pi = char_poly(m);
    let (f0, f1) = mmp2(k + 1, &pi)?;
    // (A - I)^{-1} β through the adjugate.
    let v = Vector2([
        mul(di, sub(mul(am.d, beta.0[0]), mul(am.b, beta.0[1]))),
        mul(di, sub(mul(am.a, beta.0[1]), mul(am.c, beta.0[0]))),
    ]);
    // A^{k+1} - I = f1·A + (f0 - 1)·I
    let av = m.mul_vec(&v);
    let f0m1 = sub(f0, F::one());
    Ok(Vector2([
        add(mul(f1, av.0[0]), mul(f0m1, v.0[0])),
        add(mul(f1, av.0[1]), mul(f0m1, v.0[1])),
    ]))
}

/// `[r^0, ..., r^d]`.
pub fn scalar_powers<F: Field>(r: F, d: usize) -> Vec<F> {
    let mut out = Vec::with_capacity(d + 1);
    let mut x = F::one();
    out.push(x);
    for _ in 0..d {
        x = mul(x, r);
        out.push(x);
    }
    out
}

/// Same output as [`scalar_powers`], filled by a doubling schedule whose
/// rounds run in parallel: after the round ending at `i`, `ρ_{i+k} = ρ_i·ρ_k`.
pub fn scalar_powers_par<F: Field>(r: F, d: usize) -> Vec<F> {
    let mut out = vec![F::zero(); d + 1];
    out[0] = F::one();
    if d == 0 {
        return out;
    }
    out[1] = r;
    let mut i = 1usize;
    while i < d {
        let take = i.min(d - i);
        let (lo, hi) = out.split_at_mut(i + 1);
        let ri = lo[i];
        hi[..take]
            .par_iter_mut()
            .enumerate()
            .for_each(|(k, slot)| *slot = ri * lo[k + 1]);
        i *= 2;
    }
    out
}

/// `x^e` by square-and-multiply, counted.
pub fn pow_counted<F: Field>(x: F, e: u64) -> F {
    let mut acc = F::one();
    for bit in (0..64 - e.leading_zeros()).rev() {
        acc = mul(acc, acc);
        if (e >> bit) & 1 == 1 {
            acc = mul(acc, x);
        }
    }
    acc
}

/// Horner's rule over an arbitrary field, counted.
pub fn horner<F: Field>(coeffs: &[F], x: F) -> F {
    let mut acc = F::zero();
    for c in coeffs.iter().rev() {
        acc = add(mul(acc, x), *c);
    }
    acc
}

/// Byte width of the canonical scalar encoding.
pub fn scalar_width<F: PrimeField>() -> usize {
    (F::MODULUS_BIT_SIZE as usize).div_ceil(8)
}

/// Fixed-width big-endian encoding.
pub fn scalar_to_bytes<F: PrimeField>(x: &F) -> Vec<u8> {
    let be = x.into_bigint().to_bytes_be();
    let w = scalar_width::<F>();
    be[be.len() - w..].to_vec()
}

pub fn write_scalar<F: PrimeField>(x: &F, out: &mut Vec<u8>) {
    out.extend_from_slice(&scalar_to_bytes(x));
}

/// Decodes a canonical scalar, rejecting values `>= p` and wrong widths.
pub fn scalar_from_bytes<F: PrimeField>(bytes: &[u8]) -> Result<F> {
    let w = scalar_width::<F>();
    if bytes.len() != w {
        return Err(Error::decode(format!(
            "scalar must be {w} bytes, got {}",
            bytes.len()
        )));
    }
    let x = F::from_be_bytes_mod_order(bytes);
    if scalar_to_bytes(&x) != bytes {
        return Err(Error::decode("scalar not reduced"));
    }
    Ok(x)
}

pub fn vector_to_bytes<F: PrimeField>(v: &Vector2<F>, out: &mut Vec<u8>) {
    write_scalar(&v.0[0], out);
    write_scalar(&v.0[1], out);
}

pub fn matrix_to_bytes<F: PrimeField>(m: &Matrix2<F>, out: &mut Vec<u8>) {
    for x in [m.a, m.b, m.c, m.d] {
        write_scalar(&x, out);
    }
}

/// Draws a scalar outside `excluded`.
pub fn rand_excluding<F: PrimeField, R: RngCore + ?Sized>(rng: &mut R, excluded: &[F]) -> F {
    loop {
        let x = F::rand(rng);
        if !excluded.contains(&x) {
            return x;
        }
    }
}
