//! Paillier encryption with `g = N + 1`, and homomorphic polynomial
//! evaluation for a plaintext modulus `m` smaller than `N`.

use ark_ff::{BigInteger, PrimeField};
use rand::{CryptoRng, RngCore};
use rayon::prelude::*;
use rug::integer::{IsPrime, Order};
use rug::{Complete, Integer};
use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::opcount;
use crate::Scalar;

pub const SCHEME_TAG: &str = "paillier";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LhePublicKey {
    n: Integer,
    n2: Integer,
    bits: u32,
    id: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LheSecretKey {
    p: Integer,
    q: Integer,
    p2: Integer,
    q2: Integer,
    hp: Integer,
    hq: Integer,
    // q^{-1} mod p and (q²)^{-1} mod p² for CRT recombination
    q_inv_p: Integer,
    q2_inv_p2: Integer,
    // N mod φ(p²), N mod φ(q²)
    n_mod_phi_p2: Integer,
    n_mod_phi_q2: Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    c: Integer,
    key_id: u64,
}

impl Ciphertext {
    pub fn value(&self) -> &Integer {
        &self.c
    }
}

/// `x mod m` in `[0, m)`.
fn modulo(x: &Integer, m: &Integer) -> Integer {
    let mut r = Integer::from(x % m);
    if r < 0 {
        r += m;
    }
    r
}

fn key_id(n: &Integer) -> u64 {
    let h = Sha256::digest(n.to_digits::<u8>(Order::Msf));
    u64::from_be_bytes(h[..8].try_into().unwrap())
}

fn random_below<R: RngCore + ?Sized>(rng: &mut R, bound: &Integer) -> Integer {
    let bytes = (bound.significant_bits() as usize).div_ceil(8) + 16;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    Integer::from_digits(&buf, Order::Msf) % bound
}

fn random_prime<R: RngCore + ?Sized>(rng: &mut R, bits: u32) -> Integer {
    loop {
        let mut buf = vec![0u8; (bits as usize).div_ceil(8)];
        rng.fill_bytes(&mut buf);
        let mut x = Integer::from_digits(&buf, Order::Msf);
        x.keep_bits_mut(bits);
        x.set_bit(bits - 1, true);
        x.set_bit(bits - 2, true);
        x.set_bit(0, true);
        let p = x.next_prime();
        if p.significant_bits() == bits && p.is_probably_prime(40) != IsPrime::No {
            return p;
        }
    }
}

/// Generates a key pair whose modulus has exactly `bits` bits.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(
    bits: u32,
    rng: &mut R,
) -> Result<(LhePublicKey, LheSecretKey)> {
    if bits < 64 || bits % 2 != 0 {
        return Err(Error::invalid(format!("unsupported modulus size {bits}")));
    }
    loop {
        let p = random_prime(rng, bits / 2);
        let q = random_prime(rng, bits / 2);
        if p == q {
            continue;
        }
        let n = Integer::from(&p * &q);
        if n.significant_bits() != bits {
            continue;
        }
        let sk = LheSecretKey::from_primes(p, q)?;
        let pk = LhePublicKey::from_modulus(n)?;
        return Ok((pk, sk));
    }
}

impl LhePublicKey {
    pub fn from_modulus(n: Integer) -> Result<Self> {
        if n <= 1 || n.is_even() {
            return Err(Error::decode("invalid Paillier modulus"));
        }
        let n2 = Integer::from(n.square_ref());
        Ok(Self {
            bits: n.significant_bits(),
            id: key_id(&n),
            n,
            n2,
        })
    }

    pub fn modulus(&self) -> &Integer {
        &self.n
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Byte width of an encoded ciphertext.
    pub fn ciphertext_width(&self) -> usize {
        (self.n2.significant_bits() as usize).div_ceil(8)
    }

    fn check(&self, c: &Ciphertext) -> Result<()> {
        if c.key_id != self.id {
            return Err(Error::KeyMismatch);
        }
        Ok(())
    }

    /// `E(m)` with fresh randomness. `m` is reduced mod N.
    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &Integer, rng: &mut R) -> Ciphertext {
        let rho = loop {
            let r = random_below(rng, &self.n);
            if r != 0 && r.gcd_ref(&self.n).complete() == 1 {
                break r;
            }
        };
        opcount::cipher_exp(1);
        let rn = rho.pow_mod(&self.n, &self.n2).expect("positive exponent");
        self.with_mask(m, rn)
    }

    fn with_mask(&self, m: &Integer, rn: Integer) -> Ciphertext {
        let m = modulo(m, &self.n);
        let gm = (m * &self.n + 1u32) % &self.n2;
        opcount::cipher_mul(1);
        Ciphertext {
            c: (gm * rn) % &self.n2,
            key_id: self.id,
        }
    }

    /// Deterministic `E(m)` with unit randomness, for tests and padding.
    pub fn encrypt_trivial(&self, m: &Integer) -> Ciphertext {
        self.with_mask(m, Integer::from(1))
    }

    /// Ciphertext whose plaintext is `m1 + m2 mod N`.
    pub fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext> {
        self.check(c1)?;
        self.check(c2)?;
        opcount::cipher_mul(1);
        Ok(Ciphertext {
            c: Integer::from(&c1.c * &c2.c) % &self.n2,
            key_id: self.id,
        })
    }

    /// Ciphertext whose plaintext is `k·m mod N`.
    pub fn scale(&self, c: &Ciphertext, k: &Integer) -> Result<Ciphertext> {
        self.check(c)?;
        if *k < 0 {
            return Err(Error::invalid("negative scale factor"));
        }
        opcount::cipher_exp(1);
        Ok(Ciphertext {
            c: c.c.clone().pow_mod(k, &self.n2).expect("nonnegative exponent"),
            key_id: self.id,
        })
    }

    /// Rejects `terms·(m-1)² >= N`, the bound under which a dot product of
    /// `terms` reduced values never wraps modulo N.
    pub fn check_capacity(&self, terms: usize, m: &Integer) -> Result<()> {
        let m1 = Integer::from(m - 1u32);
        let need = Integer::from(m1.square_ref()) * Integer::from(terms);
        if need >= self.n {
            return Err(Error::Capacity {
                terms,
                modulus_bits: m.significant_bits(),
                needed_bits: need.significant_bits() + 1,
                key_bits: self.bits,
            });
        }
        Ok(())
    }

    pub fn ciphertext_to_bytes(&self, c: &Ciphertext) -> Vec<u8> {
        let w = self.ciphertext_width();
        let digits = c.c.to_digits::<u8>(Order::Msf);
        let mut out = vec![0u8; w - digits.len()];
        out.extend(digits);
        out
    }

    pub fn ciphertext_from_bytes(&self, b: &[u8]) -> Result<Ciphertext> {
        if b.len() != self.ciphertext_width() {
            return Err(Error::decode("bad ciphertext length"));
        }
        let c = Integer::from_digits(b, Order::Msf);
        if c == 0 || c >= self.n2 {
            return Err(Error::decode("ciphertext out of range"));
        }
        Ok(Ciphertext { c, key_id: self.id })
    }

    pub fn write_ciphertext(&self, w: &mut Writer, c: &Ciphertext) {
        w.raw(&self.ciphertext_to_bytes(c));
    }

    pub fn read_ciphertext(&self, r: &mut Reader) -> Result<Ciphertext> {
        self.ciphertext_from_bytes(r.raw(self.ciphertext_width())?)
    }

    pub fn write(&self, w: &mut Writer) {
        w.str(SCHEME_TAG)
            .u32(self.bits)
            .bytes(&self.n.to_digits::<u8>(Order::Msf));
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let tag = r.str()?;
        if tag != SCHEME_TAG {
            return Err(Error::decode(format!("unknown encryption scheme '{tag}'")));
        }
        let bits = r.u32()?;
        let pk = Self::from_modulus(Integer::from_digits(r.bytes()?, Order::Msf))?;
        if pk.bits != bits {
            return Err(Error::decode("modulus size does not match header"));
        }
        Ok(pk)
    }

    /// Product of `w_i^{x_i}` for nonnegative exponents, via bucketed multi-exponentiation.
    pub fn multi_scale(&self, w: &[Ciphertext], xs: &[Integer]) -> Result<Ciphertext> {
        if w.len() != xs.len() {
            return Err(Error::LengthMismatch {
                expected: w.len(),
                got: xs.len(),
            });
        }
        for c in w {
            self.check(c)?;
        }
        Ok(Ciphertext {
            c: multiexp(w, xs, &self.n2),
            key_id: self.id,
        })
    }
}

impl LheSecretKey {
    fn from_primes(p: Integer, q: Integer) -> Result<Self> {
        let n = Integer::from(&p * &q);
        let p2 = Integer::from(p.square_ref());
        let q2 = Integer::from(q.square_ref());
        let h = |pr: &Integer, pr2: &Integer| -> Result<Integer> {
            // L_p(g^{p-1} mod p²)^{-1} mod p
            let g = Integer::from(&n + 1u32);
            let x = g
                .pow_mod(&Integer::from(pr - 1u32), pr2)
                .expect("positive exponent");
            let l = Integer::from(x - 1u32) / pr;
            l.invert(pr).map_err(|_| Error::invalid("degenerate key"))
        };
        let hp = h(&p, &p2)?;
        let hq = h(&q, &q2)?;
        let q_inv_p = q
            .clone()
            .invert(&p)
            .map_err(|_| Error::invalid("p and q not coprime"))?;
        let q2_inv_p2 = q2
            .clone()
            .invert(&p2)
            .map_err(|_| Error::invalid("p and q not coprime"))?;
        let phi_p2 = Integer::from(&p2 - &p);
        let phi_q2 = Integer::from(&q2 - &q);
        Ok(Self {
            n_mod_phi_p2: Integer::from(&n % &phi_p2),
            n_mod_phi_q2: Integer::from(&n % &phi_q2),
            p,
            q,
            p2,
            q2,
            hp,
            hq,
            q_inv_p,
            q2_inv_p2,
        })
    }

    fn modulus(&self) -> Integer {
        Integer::from(&self.p * &self.q)
    }

    /// Decrypts to a value in `[0, N)`.
    pub fn decrypt(&self, c: &Ciphertext) -> Integer {
        opcount::cipher_exp(2);
        let part = |pr: &Integer, pr2: &Integer, h: &Integer| -> Integer {
            let x = modulo(&c.c, pr2)
                .pow_mod(&Integer::from(pr - 1u32), pr2)
                .expect("positive exponent");
            let l = Integer::from(x - 1u32) / pr;
            (l * h) % pr
        };
        let mp = part(&self.p, &self.p2, &self.hp);
        let mq = part(&self.q, &self.q2, &self.hq);
        // m = mq + q·((mp - mq)·q^{-1} mod p)
        let t = Integer::from(&mp - &mq) * &self.q_inv_p;
        let t = modulo(&t, &self.p);
        mq + t * &self.q
    }

    /// Encryption using the factorization; same distribution as the public
    /// path, roughly four times cheaper.
    pub fn encrypt<R: RngCore + ?Sized>(
        &self,
        pk: &LhePublicKey,
        m: &Integer,
        rng: &mut R,
    ) -> Ciphertext {
        let n = &pk.n;
        let rho = loop {
            let r = random_below(rng, n);
            if r != 0 && r.gcd_ref(n).complete() == 1 {
                break r;
            }
        };
        opcount::cipher_exp(1);
        let a = modulo(&rho, &self.p2)
            .pow_mod(&self.n_mod_phi_p2, &self.p2)
            .expect("positive exponent");
        let b = modulo(&rho, &self.q2)
            .pow_mod(&self.n_mod_phi_q2, &self.q2)
            .expect("positive exponent");
        let t = Integer::from(&a - &b) * &self.q2_inv_p2;
        let t = modulo(&t, &self.p2);
        let rn = b + t * &self.q2;
        pk.with_mask(m, rn)
    }

    pub fn matches(&self, pk: &LhePublicKey) -> bool {
        self.modulus() == pk.n
    }

    pub fn write(&self, w: &mut Writer) {
        w.str(SCHEME_TAG)
            .bytes(&self.p.to_digits::<u8>(Order::Msf))
            .bytes(&self.q.to_digits::<u8>(Order::Msf));
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let tag = r.str()?;
        if tag != SCHEME_TAG {
            return Err(Error::decode(format!("unknown encryption scheme '{tag}'")));
        }
        let p = Integer::from_digits(r.bytes()?, Order::Msf);
        let q = Integer::from_digits(r.bytes()?, Order::Msf);
        if p <= 2 || q <= 2 || p == q {
            return Err(Error::decode("invalid secret key"));
        }
        Self::from_primes(p, q).map_err(|_| Error::decode("invalid secret key"))
    }
}

pub fn scalar_to_integer(x: &Scalar) -> Integer {
    Integer::from_digits(&x.into_bigint().to_bytes_be(), Order::Msf)
}

pub fn integer_to_scalar(x: &Integer) -> Scalar {
    let r = modulo(x, &scalar_modulus());
    Scalar::from_be_bytes_mod_order(&r.to_digits::<u8>(Order::Msf))
}

/// Parses a decimal or `0x`-prefixed hexadecimal value below the field modulus.
pub fn parse_scalar(s: &str) -> Result<Scalar> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => Integer::from_str_radix(hex, 16),
        None => Integer::from_str_radix(s, 10),
    };
    let x = parsed.map_err(|_| Error::invalid(format!("'{s}' is not an integer")))?;
    if x < 0 || x >= scalar_modulus() {
        return Err(Error::invalid(format!("'{s}' is outside the scalar field")));
    }
    Ok(integer_to_scalar(&x))
}

pub fn scalar_modulus() -> Integer {
    Integer::from_digits(&Scalar::MODULUS.to_bytes_be(), Order::Msf)
}

fn window_size(n: usize, exp_bits: usize) -> usize {
    if n < 4 {
        return 0;
    }
    (1..=16)
        .min_by_key(|&c| exp_bits.div_ceil(c) * (n + (2usize << c)))
        .unwrap()
}

/// `Π bases_i^{exps_i} mod modulus` with Pippenger bucketing.
pub fn multiexp(bases: &[Ciphertext], exps: &[Integer], modulus: &Integer) -> Integer {
    let exp_bits = exps
        .iter()
        .map(|e| e.significant_bits() as usize)
        .max()
        .unwrap_or(0);
    let c = window_size(bases.len(), exp_bits);
    if c == 0 || exp_bits == 0 {
        return multiexp_naive(bases, exps, modulus);
    }
    let limbs: Vec<Vec<u64>> = exps.iter().map(|e| e.to_digits::<u64>(Order::Lsf)).collect();
    let digit = |l: &[u64], w: usize| -> usize {
        let lo = w * c;
        let mut v = 0u64;
        for k in 0..c {
            let bit = lo + k;
            let limb = bit / 64;
            if limb < l.len() && (l[limb] >> (bit % 64)) & 1 == 1 {
                v |= 1 << k;
            }
        }
        v as usize
    };
    let windows = exp_bits.div_ceil(c);
    let mut acc: Option<Integer> = None;
    let mut muls = 0u64;
    for w in (0..windows).rev() {
        if let Some(a) = acc.as_mut() {
            for _ in 0..c {
                a.square_mut();
                *a %= modulus;
            }
            muls += c as u64;
        }
        let mut buckets: Vec<Option<Integer>> = vec![None; 1 << c];
        for (b, l) in bases.iter().zip(&limbs) {
            let d = digit(l, w);
            if d == 0 {
                continue;
            }
            match &mut buckets[d] {
                Some(x) => {
                    *x *= &b.c;
                    *x %= modulus;
                    muls += 1;
                }
                slot => *slot = Some(b.c.clone()),
            }
        }
        // Σ_b b·bucket_b as suffix products.
        let mut running: Option<Integer> = None;
        let mut sum: Option<Integer> = None;
        for bucket in buckets.into_iter().skip(1).rev() {
            if let Some(x) = bucket {
                running = Some(match running {
                    Some(mut r) => {
                        r *= x;
                        muls += 1;
                        r % modulus
                    }
                    None => x,
                });
            }
            if let Some(r) = &running {
                sum = Some(match sum {
                    Some(mut s) => {
                        s *= r;
                        muls += 1;
                        s % modulus
                    }
                    None => r.clone(),
                });
            }
        }
        if let Some(s) = sum {
            acc = Some(match acc {
                Some(mut a) => {
                    a *= s;
                    muls += 1;
                    a % modulus
                }
                None => s,
            });
        }
    }
    opcount::cipher_mul(muls);
    acc.unwrap_or_else(|| Integer::from(1))
}

/// Reference implementation: one modular exponentiation per term.
pub fn multiexp_naive(bases: &[Ciphertext], exps: &[Integer], modulus: &Integer) -> Integer {
    let mut acc = Integer::from(1);
    for (b, e) in bases.iter().zip(exps) {
        opcount::cipher_exp(1);
        opcount::cipher_mul(1);
        let t = b.c.clone().pow_mod(e, modulus).expect("nonnegative exponent");
        acc = (acc * t) % modulus;
    }
    acc
}

/// `x_i = r^i mod m`, reduced at every step.
pub fn reduced_powers(r: &Integer, m: &Integer, len: usize) -> Vec<Integer> {
    let mut out = Vec::with_capacity(len);
    let mut x = Integer::from(1) % m;
    let r = modulo(r, m);
    for _ in 0..len {
        out.push(x.clone());
        x = (x * &r) % m;
    }
    out
}

/// Ciphertext `c` with `D(c) mod m = Σ p_i r^i mod m`, where `W = [E(p_i)]`.
pub fn ho_dotproduct(
    pk: &LhePublicKey,
    w: &[Ciphertext],
    r: &Integer,
    m: &Integer,
) -> Result<Ciphertext> {
    pk.check_capacity(w.len(), m)?;
    let xs = reduced_powers(r, m, w.len());
    pk.multi_scale(w, &xs)
}

/// [`ho_dotproduct`] for the scalar field with precomputed powers, split
/// into `q` contiguous blocks combined in index order.
pub fn ho_dotproduct_powers(
    pk: &LhePublicKey,
    w: &[Ciphertext],
    powers: &[Scalar],
    q: usize,
) -> Result<Ciphertext> {
    if w.len() != powers.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            got: powers.len(),
        });
    }
    pk.check_capacity(w.len(), &scalar_modulus())?;
    let xs: Vec<Integer> = powers.iter().map(scalar_to_integer).collect();
    let q = q.clamp(1, w.len().max(1));
    if q == 1 {
        return pk.multi_scale(w, &xs);
    }
    let bounds = crate::polyeval::block_bounds(w.len(), q);
    let parts: Vec<Result<Ciphertext>> = bounds
        .par_windows(2)
        .map(|b| pk.multi_scale(&w[b[0]..b[1]], &xs[b[0]..b[1]]))
        .collect();
    let mut acc = pk.encrypt_trivial(&Integer::new());
    for p in parts {
        acc = pk.add(&acc, &p?)?;
    }
    Ok(acc)
}
