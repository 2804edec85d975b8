//! Byte-level framing shared by state files and wire messages.
//!
//! Integers are big-endian; variable-length fields carry a u32 length prefix.

use crate::algebra::{self, Matrix2, Vector2};
use crate::error::{Error, Result};
use crate::pairing::{self, DualElem, G1, G2, Gt};
use crate::Scalar;

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        let len = u32::try_from(b.len()).expect("field longer than 4 GiB");
        self.u32(len).raw(b)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn scalar(&mut self, x: &Scalar) -> &mut Self {
        algebra::write_scalar(x, &mut self.buf);
        self
    }

    pub fn vector2(&mut self, v: &Vector2<Scalar>) -> &mut Self {
        algebra::vector_to_bytes(v, &mut self.buf);
        self
    }

    pub fn matrix2(&mut self, m: &Matrix2<Scalar>) -> &mut Self {
        algebra::matrix_to_bytes(m, &mut self.buf);
        self
    }

    pub fn g1(&mut self, p: &G1) -> &mut Self {
        self.raw(&pairing::g1_to_bytes(p))
    }

    pub fn g2(&mut self, p: &G2) -> &mut Self {
        self.raw(&pairing::g2_to_bytes(p))
    }

    pub fn gt(&mut self, x: &Gt) -> &mut Self {
        self.raw(&pairing::gt_to_bytes(x))
    }

    pub fn dual(&mut self, x: &DualElem) -> &mut Self {
        self.raw(&x.to_bytes())
    }

    pub fn digest(&mut self, d: &[u8; 32]) -> &mut Self {
        self.raw(d)
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    /// Fails unless every byte was consumed.
    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::decode(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::decode(format!(
                "truncated input: need {n} bytes, have {}",
                self.remaining()
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.raw(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.raw(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.raw(8)?.try_into().unwrap()))
    }

    /// A u64 that must fit in memory-sized counts.
    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::decode("length overflow"))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.raw(n)
    }

    pub fn str(&mut self) -> Result<&'a str> {
        std::str::from_utf8(self.bytes()?).map_err(|_| Error::decode("invalid utf-8"))
    }

    pub fn scalar(&mut self) -> Result<Scalar> {
        algebra::scalar_from_bytes(self.raw(algebra::scalar_width::<Scalar>())?)
    }

    pub fn vector2(&mut self) -> Result<Vector2<Scalar>> {
        Ok(Vector2([self.scalar()?, self.scalar()?]))
    }

    pub fn matrix2(&mut self) -> Result<Matrix2<Scalar>> {
        Ok(Matrix2::new(
            self.scalar()?,
            self.scalar()?,
            self.scalar()?,
            self.scalar()?,
        ))
    }

    pub fn g1(&mut self) -> Result<G1> {
        pairing::g1_from_bytes(self.raw(pairing::G1_BYTES)?)
    }

    pub fn g2(&mut self) -> Result<G2> {
        pairing::g2_from_bytes(self.raw(pairing::G2_BYTES)?)
    }

    pub fn gt(&mut self) -> Result<Gt> {
        pairing::gt_from_bytes(self.raw(pairing::GT_BYTES)?)
    }

    pub fn dual(&mut self) -> Result<DualElem> {
        DualElem::from_bytes(self.raw(pairing::DUAL_BYTES)?)
    }

    pub fn digest(&mut self) -> Result<[u8; 32]> {
        Ok(self.raw(32)?.try_into().unwrap())
    }

    /// A count prefix, bounded by what the remaining input could hold.
    pub fn count(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(min_item_bytes.max(1)) > self.remaining() {
            return Err(Error::decode("count exceeds input size"));
        }
        Ok(n)
    }
}
