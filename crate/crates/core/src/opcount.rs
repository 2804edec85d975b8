//! Per-thread operation counters.
//!
//! Counters are always on; the cost is one thread-local access per counted
//! operation. Work spawned onto other threads is not attributed to the caller.

use std::cell::Cell;
use std::ops::Sub;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Additions, subtractions, negations, multiplications and inversions in Z_p.
    pub field_ops: u64,
    /// Multiplications in Z_p (also included in `field_ops`).
    pub field_muls: u64,
    pub group_exps: u64,
    pub group_muls: u64,
    pub pairings: u64,
    pub gt_exps: u64,
    pub cipher_exps: u64,
    pub cipher_muls: u64,
    pub hashes: u64,
}

impl OpCounts {
    /// Coarse scalar cost used for trend fitting: every counted operation weighs one.
    pub fn total(&self) -> u64 {
        self.field_ops
            + self.group_exps
            + self.group_muls
            + self.pairings
            + self.gt_exps
            + self.cipher_exps
            + self.cipher_muls
            + self.hashes
    }
}

impl Sub for OpCounts {
    type Output = OpCounts;
    fn sub(self, o: OpCounts) -> OpCounts {
        OpCounts {
            field_ops: self.field_ops - o.field_ops,
            field_muls: self.field_muls - o.field_muls,
            group_exps: self.group_exps - o.group_exps,
            group_muls: self.group_muls - o.group_muls,
            pairings: self.pairings - o.pairings,
            gt_exps: self.gt_exps - o.gt_exps,
            cipher_exps: self.cipher_exps - o.cipher_exps,
            cipher_muls: self.cipher_muls - o.cipher_muls,
            hashes: self.hashes - o.hashes,
        }
    }
}

thread_local! {
    static COUNTS: Cell<OpCounts> = Cell::new(OpCounts::default());
}

#[inline]
fn bump(f: impl FnOnce(&mut OpCounts)) {
    COUNTS.with(|c| {
        let mut v = c.get();
        f(&mut v);
        c.set(v);
    });
}

pub fn snapshot() -> OpCounts {
    COUNTS.with(|c| c.get())
}

pub fn reset() {
    COUNTS.with(|c| c.set(OpCounts::default()));
}

/// Runs `f` and returns the operations it performed on this thread.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, OpCounts) {
    let before = snapshot();
    let out = f();
    (out, snapshot() - before)
}

#[inline]
pub(crate) fn field_add(n: u64) {
    bump(|c| c.field_ops += n);
}

#[inline]
pub(crate) fn field_mul(n: u64) {
    bump(|c| {
        c.field_ops += n;
        c.field_muls += n;
    });
}

#[inline]
pub(crate) fn group_exp(n: u64) {
    bump(|c| c.group_exps += n);
}

#[inline]
pub(crate) fn group_mul(n: u64) {
    bump(|c| c.group_muls += n);
}

#[inline]
pub(crate) fn pairing(n: u64) {
    bump(|c| c.pairings += n);
}

#[inline]
pub(crate) fn gt_exp(n: u64) {
    bump(|c| c.gt_exps += n);
}

#[inline]
pub(crate) fn cipher_exp(n: u64) {
    bump(|c| c.cipher_exps += n);
}

#[inline]
pub(crate) fn cipher_mul(n: u64) {
    bump(|c| c.cipher_muls += n);
}

#[inline]
pub(crate) fn hash(n: u64) {
    bump(|c| c.hashes += n);
}
