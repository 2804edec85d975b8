#![allow(dead_code)]

use ark_bn254::Fr;
use ark_ff::UniformRand;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vespo::polyeval::Polynomial;
use vespo::SecurityConfig;

pub type Scalar = Fr;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// 1024-bit Paillier keys keep setup fast; capacity still holds for every
/// degree used in the tests.
pub fn cfg() -> SecurityConfig {
    SecurityConfig::testing(1024)
}

pub fn rand_poly(d: usize, rng: &mut ChaCha20Rng) -> Polynomial<Scalar> {
    loop {
        let p = Polynomial::rand(d, rng);
        if p.degree() == Some(d) {
            return p;
        }
    }
}

pub fn rand_scalar(rng: &mut ChaCha20Rng) -> Scalar {
    Scalar::rand(rng)
}

/// Plain Horner, kept separate from the library's evaluator.
pub fn horner(coeffs: &[Scalar], x: Scalar) -> Scalar {
    coeffs.iter().rev().fold(Scalar::from(0u64), |acc, c| acc * x + c)
}
