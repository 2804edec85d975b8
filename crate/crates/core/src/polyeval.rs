//! Polynomials, subset polynomials, the difference quotient and the
//! server-side prefix evaluation of `g^{Q_P(s, r)}`, sequential and blocked.

use ark_bn254::{Fq12, G2Projective};
use ark_ec::{CurveGroup, VariableBaseMSM};
use ark_ff::{Field, One};
use rayon::prelude::*;

use crate::algebra::{self, scalar_powers_par};
use crate::error::{Error, Result};
use crate::lhe::{self, Ciphertext, LhePublicKey};
use crate::opcount;
use crate::pairing::{self, G1, G2, G2Prepared, Gt};
use crate::Scalar;

/// `P(X) = Σ p_i X^i` with degree bound `len - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial<F> {
    coeffs: Vec<F>,
}

impl<F: Field> Polynomial<F> {
    pub fn new(coeffs: Vec<F>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("polynomial needs at least one coefficient"));
        }
        Ok(Self { coeffs })
    }

    pub fn rand<R: rand::RngCore + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self {
            coeffs: (0..=d).map(|_| F::rand(rng)).collect(),
        }
    }

    pub fn coeffs(&self) -> &[F] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [F] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<F> {
        self.coeffs
    }

    /// The degree bound `d`.
    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Actual degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn eval(&self, r: F) -> F {
        horner_eval(self, r)
    }

    pub fn subset(&self, k: usize) -> SubsetPolynomialView<'_, F> {
        SubsetPolynomialView { poly: self, k }
    }
}

/// `T_{k,P}(X) = Σ_{i=k+1}^{d} p_i X^{i-k-1}`.
#[derive(Clone, Copy, Debug)]
pub struct SubsetPolynomialView<'a, F> {
    poly: &'a Polynomial<F>,
    k: usize,
}

impl<F: Field> SubsetPolynomialView<'_, F> {
    pub fn eval(&self, x: F) -> F {
        let c = self.poly.coeffs();
        if self.k + 1 >= c.len() {
            return F::zero();
        }
        algebra::horner(&c[self.k + 1..], x)
    }
}

/// `T_{k,P}(s)` for every `k = 0..d-1`, by the suffix recurrence
/// `T_{d-1} = p_d`, `T_k = p_{k+1} + s·T_{k+1}`.
pub fn all_subset_evals<F: Field>(p: &Polynomial<F>, s: F) -> Vec<F> {
    let c = p.coeffs();
    let d = c.len() - 1;
    let mut out = vec![F::zero(); d];
    let mut acc = F::zero();
    for k in (0..d).rev() {
        acc = c[k + 1] + s * acc;
        out[k] = acc;
    }
    out
}

pub fn horner_eval<F: Field>(p: &Polynomial<F>, r: F) -> F {
    algebra::horner(p.coeffs(), r)
}

/// `Q_P(s, r) = (P(s) - P(r)) / (s - r)`.
pub fn diff_poly_eval<F: Field>(p: &Polynomial<F>, s: F, r: F) -> Result<F> {
    let den = (s - r)
        .inverse()
        .ok_or_else(|| Error::invalid("difference polynomial needs s != r"))?;
    Ok((horner_eval(p, s) - horner_eval(p, r)) * den)
}

/// Boundaries of `q` contiguous blocks over `len` items: with
/// `len = b·q + rem`, the first `rem` blocks get `b + 1` items.
pub fn block_bounds(len: usize, q: usize) -> Vec<usize> {
    let q = q.max(1);
    let (b, rem) = (len / q, len % q);
    (0..=q)
        .map(|k| if k < rem { k * (b + 1) } else { rem * (b + 1) + (k - rem) * b })
        .collect()
}

/// Consumer of the prefix terms `t_i = Π_{k=0}^{i-1} S_{i-k-1}^{r^k}`.
pub trait PrefixAccumulator<G> {
    type Output;
    /// Called for `i = 1..=d` in increasing order.
    fn absorb(&mut self, i: usize, t: &G);
    fn finish(self) -> Self::Output;
}

/// Runs `t ← S_{i-1}·t^r` for `i = 1..=|S|`, handing every `t_i` to `acc`.
pub fn prefix_xi<G, A>(r: Scalar, s: &[G::Affine], mut acc: A) -> A::Output
where
    G: CurveGroup<ScalarField = Scalar>,
    A: PrefixAccumulator<G>,
{
    let mut t = G::zero();
    for (i, si) in s.iter().enumerate() {
        opcount::group_exp(1);
        opcount::group_mul(1);
        t = t * r + si;
        acc.absorb(i + 1, &t);
    }
    acc.finish()
}

/// Exponents known in the clear: `ξ = Π t_i^{p_i}`.
pub struct ScalarCoeffs<'a, G> {
    coeffs: &'a [Scalar],
    xi: G,
}

impl<'a, G: CurveGroup<ScalarField = Scalar>> ScalarCoeffs<'a, G> {
    /// `coeffs[i-1]` is the exponent of `t_i`.
    pub fn new(coeffs: &'a [Scalar]) -> Self {
        Self {
            coeffs,
            xi: G::zero(),
        }
    }
}

impl<G: CurveGroup<ScalarField = Scalar>> PrefixAccumulator<G> for ScalarCoeffs<'_, G> {
    type Output = G;
    fn absorb(&mut self, i: usize, t: &G) {
        opcount::group_exp(1);
        opcount::group_mul(1);
        self.xi += *t * self.coeffs[i - 1];
    }
    fn finish(self) -> G {
        self.xi
    }
}

const MILLER_CHUNK: usize = 32;

/// Exponents baked into G1 elements: `ξ̄[j] = Π e(H̄_i[j]; t_i)`.
pub struct PairedCoeffs<'a> {
    hbar: [&'a [G1]; 2],
    pending: Vec<G2Projective>,
    first: usize,
    acc: [Fq12; 2],
}

impl<'a> PairedCoeffs<'a> {
    /// `hbar[j][i-1]` is `H̄_i[j]`.
    pub fn new(hbar: [&'a [G1]; 2]) -> Self {
        Self::starting_at(hbar, 1)
    }

    fn starting_at(hbar: [&'a [G1]; 2], first: usize) -> Self {
        Self {
            hbar,
            pending: Vec::with_capacity(MILLER_CHUNK),
            first,
            acc: [Fq12::one(); 2],
        }
    }

    fn flush(&mut self) {
        if self.pending.is_empty() {
            return;
        }
        let ts = G2Projective::normalize_batch(&self.pending);
        let prep: Vec<G2Prepared> = ts.into_iter().map(G2Prepared::from).collect();
        let lo = self.first - 1;
        let hi = lo + prep.len();
        for j in 0..2 {
            self.acc[j] *= pairing::miller_loop(&self.hbar[j][lo..hi], &prep).0;
        }
        self.first += prep.len();
        self.pending.clear();
    }

    fn miller_output(mut self) -> [Fq12; 2] {
        self.flush();
        self.acc
    }
}

impl PrefixAccumulator<G2Projective> for PairedCoeffs<'_> {
    type Output = [Gt; 2];
    fn absorb(&mut self, i: usize, t: &G2Projective) {
        debug_assert_eq!(i, self.first + self.pending.len());
        self.pending.push(*t);
        if self.pending.len() == MILLER_CHUNK {
            self.flush();
        }
    }
    fn finish(self) -> [Gt; 2] {
        let [a, b] = self.miller_output();
        [final_exp(a), final_exp(b)]
    }
}

fn final_exp(f: Fq12) -> Gt {
    pairing::final_exponentiation(ark_ec::pairing::MillerLoopOutput(f))
}

/// Server side of an encrypted evaluation: `ζ = W ⊡ [r^i]` and
/// `ξ̄[j] = Π e(H̄_i[j]; t_i)`, one pass, no parallelism.
pub fn server_eval_sequential(
    r: Scalar,
    w: &[Ciphertext],
    s: &[G2],
    hbar: [&[G1]; 2],
    pk: &LhePublicKey,
) -> Result<(Ciphertext, [Gt; 2])> {
    check_shapes(w, s, hbar)?;
    let powers = algebra::scalar_powers(r, s.len());
    let zeta = lhe::ho_dotproduct_powers(pk, w, &powers, 1)?;
    let xi = prefix_xi::<G2Projective, _>(r, s, PairedCoeffs::new(hbar));
    Ok((zeta, xi))
}

fn check_shapes(w: &[Ciphertext], s: &[G2], hbar: [&[G1]; 2]) -> Result<()> {
    let d = s.len();
    if w.len() != d + 1 {
        return Err(Error::LengthMismatch {
            expected: d + 1,
            got: w.len(),
        });
    }
    for h in hbar {
        if h.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: h.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn with_workers<T: Send>(q: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(q).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Default worker count: available parallelism, capped at `d`.
pub fn default_workers(d: usize) -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(d.max(1))
}

/// Block-split version of [`server_eval_sequential`] over `q` workers.
/// Output is identical for every `q`.
pub fn server_eval_parallel(
    q: usize,
    r: Scalar,
    w: &[Ciphertext],
    s: &[G2],
    hbar: [&[G1]; 2],
    pk: &LhePublicKey,
) -> Result<(Ciphertext, [Gt; 2])> {
    check_shapes(w, s, hbar)?;
    let q = q.clamp(1, s.len().max(1));
    if q == 1 {
        return server_eval_sequential(r, w, s, hbar, pk);
    }
    with_workers(q, || {
        let powers = scalar_powers_par(r, s.len());
        let (zeta, xi) = rayon::join(
            || lhe::ho_dotproduct_powers(pk, w, &powers, q),
            || eval_xi_blocks(q, &powers, s, hbar),
        );
        Ok((zeta?, xi))
    })
}

/// ζ alone, for timing.
pub fn eval_zeta(q: usize, r: Scalar, w: &[Ciphertext], pk: &LhePublicKey) -> Result<Ciphertext> {
    let d = w.len().saturating_sub(1);
    let q = q.clamp(1, d.max(1));
    if q == 1 {
        let powers = algebra::scalar_powers(r, d);
        return lhe::ho_dotproduct_powers(pk, w, &powers, 1);
    }
    with_workers(q, || {
        let powers = scalar_powers_par(r, d);
        lhe::ho_dotproduct_powers(pk, w, &powers, q)
    })
}

/// ξ̄ alone, for timing.
pub fn eval_xi(q: usize, r: Scalar, s: &[G2], hbar: [&[G1]; 2]) -> [Gt; 2] {
    let q = q.clamp(1, s.len().max(1));
    if q == 1 {
        return prefix_xi::<G2Projective, _>(r, s, PairedCoeffs::new(hbar));
    }
    with_workers(q, || {
        let powers = scalar_powers_par(r, s.len());
        eval_xi_blocks(q, &powers, s, hbar)
    })
}

/// Seeds `u_{b_k}` for each block start, where `u_i = Π_{k=0}^{i} S_{i-k}^{r^k}`
/// (so `u_i = t_{i+1}`). Each seed extends the previous one by a
/// multi-exponentiation over the block in between.
pub fn giant_step_seeds(powers: &[Scalar], s: &[G2], bounds: &[usize]) -> Vec<G2Projective> {
    let mut seeds = Vec::with_capacity(bounds.len() - 1);
    let mut prev: Option<(usize, G2Projective)> = None;
    for &b in &bounds[..bounds.len() - 1] {
        let u = match prev {
            None => {
                let exps: Vec<Scalar> = (0..=b).map(|i| powers[b - i]).collect();
                msm_g2(&s[..=b], &exps)
            }
            Some((a, ua)) => {
                let exps: Vec<Scalar> = (a + 1..=b).map(|i| powers[b - i]).collect();
                opcount::group_exp(1);
                ua * powers[b - a] + msm_g2(&s[a + 1..=b], &exps)
            }
        };
        seeds.push(u);
        prev = Some((b, u));
    }
    seeds
}

fn msm_g2(bases: &[G2], exps: &[Scalar]) -> G2Projective {
    opcount::group_exp(bases.len() as u64);
    G2Projective::msm_unchecked(bases, exps)
}

fn eval_xi_blocks(q: usize, powers: &[Scalar], s: &[G2], hbar: [&[G1]; 2]) -> [Gt; 2] {
    let d = s.len();
    let r = powers[1];
    let bounds = block_bounds(d, q);
    let seeds = giant_step_seeds(powers, s, &bounds);
    let parts: Vec<[Fq12; 2]> = bounds
        .par_windows(2)
        .zip(seeds.par_iter())
        .map(|(b, seed)| {
            let (lo, hi) = (b[0], b[1]);
            if lo == hi {
                return [Fq12::one(); 2];
            }
            // u_lo pairs with H̄_{lo+1}.
            let mut acc = PairedCoeffs::starting_at(hbar, lo + 1);
            let mut u = *seed;
            acc.absorb(lo + 1, &u);
            for i in lo + 1..hi {
                opcount::group_exp(1);
                opcount::group_mul(1);
                u = u * r + s[i];
                acc.absorb(i + 1, &u);
            }
            acc.miller_output()
        })
        .collect();
    let mut total = [Fq12::one(); 2];
    for p in parts {
        total[0] *= p[0];
        total[1] *= p[1];
    }
    [final_exp(total[0]), final_exp(total[1])]
}
