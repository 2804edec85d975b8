//! SHA-256 Merkle tree with RFC 6962 domain separation.
//!
//! Levels are built pairwise; an unpaired last node is promoted unchanged to
//! the next level. A tree may omit its lowest levels from storage, in which
//! case those nodes are recomputed from the leaves on demand.

use sha2::{Digest as _, Sha256};
use std::borrow::Cow;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::opcount;

pub type Digest = [u8; 32];

pub const HASH_ID: &str = "sha256";

pub fn leaf_hash(leaf: &[u8]) -> Digest {
    opcount::hash(1);
    let mut h = Sha256::new();
    h.update([0u8]);
    h.update(leaf);
    h.finalize().into()
}

pub fn node_hash(l: &Digest, r: &Digest) -> Digest {
    opcount::hash(1);
    let mut h = Sha256::new();
    h.update([1u8]);
    h.update(l);
    h.update(r);
    h.finalize().into()
}

/// Random access to the leaf bytes a tree was built over.
pub trait LeafSource {
    fn leaf_count(&self) -> usize;
    fn leaf(&self, i: usize) -> Cow<'_, [u8]>;
}

impl<T: AsRef<[u8]>> LeafSource for [T] {
    fn leaf_count(&self) -> usize {
        self.len()
    }
    fn leaf(&self, i: usize) -> Cow<'_, [u8]> {
        Cow::Borrowed(self[i].as_ref())
    }
}

impl<T: AsRef<[u8]>> LeafSource for Vec<T> {
    fn leaf_count(&self) -> usize {
        self.len()
    }
    fn leaf(&self, i: usize) -> Cow<'_, [u8]> {
        Cow::Borrowed(self[i].as_ref())
    }
}

/// One step of a leaf path, from the leaf upwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Uncle {
    /// Sibling sits to the left of the running hash.
    Left(Digest),
    /// Sibling sits to the right of the running hash.
    Right(Digest),
    /// No sibling at this level; the node is carried up unchanged.
    Promoted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafPath {
    pub index: usize,
    pub leaf_count: usize,
    pub uncles: Vec<Uncle>,
}

fn level_sizes(n: usize) -> Vec<usize> {
    let mut sizes = vec![n];
    let mut cur = n;
    while cur > 1 {
        cur = cur.div_ceil(2);
        sizes.push(cur);
    }
    sizes
}

fn expected_step(pos: usize, size: usize) -> u8 {
    if pos % 2 == 1 {
        0
    } else if pos + 1 < size {
        1
    } else {
        2
    }
}

impl LeafPath {
    /// Root implied by `leaf` at this path's position.
    ///
    /// The side of every uncle must agree with the one implied by
    /// `(index, leaf_count)`, so a path cannot be replayed for another index.
    pub fn root(&self, leaf: &[u8]) -> Result<Digest> {
        if self.index >= self.leaf_count {
            return Err(Error::IndexOutOfRange {
                index: self.index,
                len: self.leaf_count,
            });
        }
        let sizes = level_sizes(self.leaf_count);
        if self.uncles.len() != sizes.len() - 1 {
            return Err(Error::decode("path length does not match leaf count"));
        }
        let mut h = leaf_hash(leaf);
        let mut pos = self.index;
        for (u, size) in self.uncles.iter().zip(&sizes) {
            h = match (expected_step(pos, *size), u) {
                (0, Uncle::Left(s)) => node_hash(s, &h),
                (1, Uncle::Right(s)) => node_hash(&h, s),
                (2, Uncle::Promoted) => h,
                _ => return Err(Error::decode("uncle side does not match index")),
            };
            pos /= 2;
        }
        Ok(h)
    }

    /// `true` iff this is a well-formed path for leaf `i` of an `n`-leaf tree
    /// whose root is `root`.
    pub fn verifies(&self, root: &Digest, i: usize, n: usize, leaf: &[u8]) -> bool {
        self.index == i && self.leaf_count == n && self.root(leaf).map_or(false, |r| &r == root)
    }

    pub fn write(&self, w: &mut Writer) {
        w.u64(self.index as u64)
            .u64(self.leaf_count as u64)
            .u32(self.uncles.len() as u32);
        for u in &self.uncles {
            match u {
                Uncle::Left(d) => w.u8(0).digest(d),
                Uncle::Right(d) => w.u8(1).digest(d),
                Uncle::Promoted => w.u8(2),
            };
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        let index = r.usize()?;
        let leaf_count = r.usize()?;
        let len = r.u32()? as usize;
        if len > 64 {
            return Err(Error::decode("path too long"));
        }
        let mut uncles = Vec::with_capacity(len);
        for _ in 0..len {
            uncles.push(match r.u8()? {
                0 => Uncle::Left(r.digest()?),
                1 => Uncle::Right(r.digest()?),
                2 => Uncle::Promoted,
                t => return Err(Error::decode(format!("bad uncle tag {t}"))),
            });
        }
        Ok(LeafPath {
            index,
            leaf_count,
            uncles,
        })
    }
}

/// Merkle tree stored as a flat array of levels, lowest stored level first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleTree {
    leaf_count: usize,
    pruned: u32,
    nodes: Vec<Digest>,
}

impl MerkleTree {
    /// Full tree over `leaves`.
    pub fn build<T: AsRef<[u8]>>(leaves: &[T]) -> Result<Self> {
        Self::build_from(leaves, 0)
    }

    /// Tree that stores only levels `pruned` and above.
    pub fn build_from<S: LeafSource + ?Sized>(src: &S, pruned: u32) -> Result<Self> {
        let n = src.leaf_count();
        if n == 0 {
            return Err(Error::invalid("Merkle tree needs at least one leaf"));
        }
        let sizes = level_sizes(n);
        let pruned = pruned.min(sizes.len() as u32 - 1);
        let stored_len: usize = sizes[pruned as usize..].iter().sum();
        let mut nodes = Vec::with_capacity(stored_len);
        if pruned == 0 {
            nodes.extend((0..n).map(|i| leaf_hash(&src.leaf(i))));
        } else {
            let span = 1usize << pruned;
            for j in 0..sizes[pruned as usize] {
                nodes.push(subtree_root(src, j * span, span.min(n - j * span)));
            }
        }
        let mut start = 0;
        for lvl in pruned as usize..sizes.len() - 1 {
            let size = sizes[lvl];
            for k in 0..sizes[lvl + 1] {
                let l = start + 2 * k;
                let h = if 2 * k + 1 < size {
                    node_hash(&nodes[l], &nodes[l + 1])
                } else {
                    nodes[l]
                };
                nodes.push(h);
            }
            start += size;
        }
        Ok(MerkleTree {
            leaf_count: n,
            pruned,
            nodes,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn pruned_levels(&self) -> u32 {
        self.pruned
    }

    pub fn root(&self) -> Digest {
        *self.nodes.last().expect("non-empty tree")
    }

    /// Bytes held by the node array.
    pub fn stored_bytes(&self) -> usize {
        self.nodes.len() * 32
    }

    fn sizes(&self) -> Vec<usize> {
        level_sizes(self.leaf_count)
    }

    fn offsets(&self, sizes: &[usize]) -> Vec<usize> {
        let mut offs = vec![0; sizes.len()];
        let mut acc = 0;
        for lvl in self.pruned as usize..sizes.len() {
            offs[lvl] = acc;
            acc += sizes[lvl];
        }
        offs
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.leaf_count {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.leaf_count,
            });
        }
        Ok(())
    }

    /// Node `pos` on level `lvl`, recomputed from leaves when below the stored levels.
    fn node<S: LeafSource + ?Sized>(
        &self,
        src: &S,
        sizes: &[usize],
        offs: &[usize],
        lvl: usize,
        pos: usize,
    ) -> Digest {
        if lvl >= self.pruned as usize {
            return self.nodes[offs[lvl] + pos];
        }
        let span = 1usize << lvl;
        let start = pos * span;
        debug_assert!(pos < sizes[lvl]);
        subtree_root(src, start, span.min(self.leaf_count - start))
    }

    /// Leaf `i` and its uncle path. `src` must hold the leaves the tree was built over.
    pub fn leaf_path<S: LeafSource + ?Sized>(&self, i: usize, src: &S) -> Result<(Vec<u8>, LeafPath)> {
        self.check_index(i)?;
        if src.leaf_count() != self.leaf_count {
            return Err(Error::LengthMismatch {
                expected: self.leaf_count,
                got: src.leaf_count(),
            });
        }
        let sizes = self.sizes();
        let offs = self.offsets(&sizes);
        let mut uncles = Vec::with_capacity(sizes.len() - 1);
        let mut pos = i;
        for lvl in 0..sizes.len() - 1 {
            uncles.push(match expected_step(pos, sizes[lvl]) {
                0 => Uncle::Left(self.node(src, &sizes, &offs, lvl, pos - 1)),
                1 => Uncle::Right(self.node(src, &sizes, &offs, lvl, pos + 1)),
                _ => Uncle::Promoted,
            });
            pos /= 2;
        }
        Ok((
            src.leaf(i).into_owned(),
            LeafPath {
                index: i,
                leaf_count: self.leaf_count,
                uncles,
            },
        ))
    }

    /// Replaces leaf `i` by `leaf`, recomputing only its ancestors.
    /// Only for trees that store every level.
    pub fn update_leaf(&mut self, i: usize, leaf: &[u8]) -> Result<()> {
        self.check_index(i)?;
        if self.pruned != 0 {
            return Err(Error::invalid("pruned tree needs its leaf source to update"));
        }
        let h = leaf_hash(leaf);
        self.propagate(i, 0, h);
        Ok(())
    }

    /// Re-reads leaf `i` from `src` (already holding its new value) and
    /// recomputes its ancestors.
    pub fn refresh_leaf<S: LeafSource + ?Sized>(&mut self, i: usize, src: &S) -> Result<()> {
        self.check_index(i)?;
        if self.pruned == 0 {
            let h = leaf_hash(&src.leaf(i));
            self.propagate(i, 0, h);
            return Ok(());
        }
        let span = 1usize << self.pruned;
        let pos = i / span;
        let start = pos * span;
        let h = subtree_root(src, start, span.min(self.leaf_count - start));
        self.propagate(pos, self.pruned as usize, h);
        Ok(())
    }

    fn propagate(&mut self, mut pos: usize, from_lvl: usize, mut h: Digest) {
        let sizes = self.sizes();
        let offs = self.offsets(&sizes);
        for lvl in from_lvl..sizes.len() {
            self.nodes[offs[lvl] + pos] = h;
            if lvl + 1 == sizes.len() {
                break;
            }
            h = match expected_step(pos, sizes[lvl]) {
                0 => node_hash(&self.nodes[offs[lvl] + pos - 1], &h),
                1 => node_hash(&h, &self.nodes[offs[lvl] + pos + 1]),
                _ => h,
            };
            pos /= 2;
        }
    }

    pub fn write(&self, w: &mut Writer) {
        w.str(HASH_ID)
            .u64(self.leaf_count as u64)
            .u32(self.pruned)
            .u64(self.nodes.len() as u64);
        for n in &self.nodes {
            w.digest(n);
        }
    }

    pub fn read(r: &mut Reader) -> Result<Self> {
        if r.str()? != HASH_ID {
            return Err(Error::decode("unsupported Merkle hash"));
        }
        let leaf_count = r.usize()?;
        let pruned = r.u32()?;
        if leaf_count == 0 {
            return Err(Error::decode("empty Merkle tree"));
        }
        let sizes = level_sizes(leaf_count);
        if pruned as usize >= sizes.len() && pruned != 0 {
            return Err(Error::decode("bad pruning depth"));
        }
        let expect: usize = sizes[pruned as usize..].iter().sum();
        let count = r.count(32)?;
        if count != expect {
            return Err(Error::decode("node count does not match leaf count"));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            nodes.push(r.digest()?);
        }
        let tree = MerkleTree {
            leaf_count,
            pruned,
            nodes,
        };
        tree.check_internal()?;
        Ok(tree)
    }

    /// Every stored internal node is the hash of its stored children.
    fn check_internal(&self) -> Result<()> {
        let sizes = self.sizes();
        let offs = self.offsets(&sizes);
        for lvl in self.pruned as usize..sizes.len() - 1 {
            for k in 0..sizes[lvl + 1] {
                let l = offs[lvl] + 2 * k;
                let want = if 2 * k + 1 < sizes[lvl] {
                    node_hash(&self.nodes[l], &self.nodes[l + 1])
                } else {
                    self.nodes[l]
                };
                if self.nodes[offs[lvl + 1] + k] != want {
                    return Err(Error::decode("inconsistent Merkle tree"));
                }
            }
        }
        Ok(())
    }
}

/// Root of the subtree over leaves `start..start+len`, where `len` is a
/// full span or the tail of the last span.
fn subtree_root<S: LeafSource + ?Sized>(src: &S, start: usize, len: usize) -> Digest {
    let mut level: Vec<Digest> = (start..start + len).map(|i| leaf_hash(&src.leaf(i))).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| if c.len() == 2 { node_hash(&c[0], &c[1]) } else { c[0] })
            .collect();
    }
    level[0]
}

/// Root of a full tree over `leaves`.
pub fn mt_root<T: AsRef<[u8]>>(leaves: &[T]) -> Result<Digest> {
    Ok(MerkleTree::build(leaves)?.root())
}
