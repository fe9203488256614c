//! Space-filling curve orderings of an `n x n` lattice.
//!
//! A [`SiteMapping`] is a bijection between lattice coordinates `(x, y)`
//! (column, row, origin at the bottom-left corner) and positions `mu` on a
//! 1D chain. Two curves are provided:
//!
//! * the Hilbert curve, which starts at `(0, 0)` and ends at `(n - 1, 0)` and
//!   visits the four main quadrants in the order BL, TL, TR, BR;
//! * the snake (boustrophedon) curve, which walks row 0 left-to-right, row 1
//!   right-to-left, and so on bottom-to-top.
//!
//! Both curves take unit steps: consecutive chain positions are lattice
//! nearest neighbours.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCoord {
    pub x: usize,
    pub y: usize,
}

impl LatticeCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(&self, other: &LatticeCoord) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

/// Position on the 1D chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChainIndex(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Hilbert,
    Snake,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveKind::Hilbert => f.write_str("hilbert"),
            CurveKind::Snake => f.write_str("snake"),
        }
    }
}

impl FromStr for CurveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilbert" => Ok(CurveKind::Hilbert),
            "snake" => Ok(CurveKind::Snake),
            other => Err(Error::InvalidParameter(format!("unknown mapping '{other}'"))),
        }
    }
}

/// Bijection between the sites of an `n x n` lattice and a chain of `n²` sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteMapping {
    n: usize,
    kind: CurveKind,
    /// Chain index of site `(x, y)`, stored at `x + n * y`.
    forward: Vec<ChainIndex>,
    inverse: Vec<LatticeCoord>,
}

impl SiteMapping {
    /// Builds the mapping of the given kind; Hilbert requires `n = 2^k`, `k >= 1`.
    pub fn new(kind: CurveKind, n: usize) -> Result<Self> {
        match kind {
            CurveKind::Hilbert => build_hilbert(n),
            CurveKind::Snake => build_snake(n),
        }
    }

    fn from_inverse(kind: CurveKind, n: usize, inverse: Vec<LatticeCoord>) -> Self {
        let mut forward = vec![ChainIndex(usize::MAX); n * n];
        for (mu, c) in inverse.iter().enumerate() {
            forward[c.x + n * c.y] = ChainIndex(mu);
        }
        Self {
            n,
            kind,
            forward,
            inverse,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }

    /// Chain index of lattice site `c`. Panics if `c` lies outside the lattice.
    pub fn forward(&self, c: LatticeCoord) -> ChainIndex {
        assert!(c.x < self.n && c.y < self.n, "coordinate {c:?} outside lattice");
        self.forward[c.x + self.n * c.y]
    }

    /// Lattice site at chain index `mu`. Panics if `mu >= n²`.
    pub fn inverse(&self, mu: ChainIndex) -> LatticeCoord {
        self.inverse[mu.0]
    }

    /// Sites in chain order.
    pub fn order(&self) -> &[LatticeCoord] {
        &self.inverse
    }

    /// Plain-text listing, one `mu x y` line per site and nothing else.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (mu, c) in self.inverse.iter().enumerate() {
            writeln!(w, "{mu} {} {}", c.x, c.y)?;
        }
        Ok(())
    }

    /// Parses the output of [`SiteMapping::write_text`], validating
    /// bijectivity. The lattice size follows from the line count.
    pub fn read_text<R: BufRead>(r: R, kind: CurveKind) -> Result<Self> {
        let mut records = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<usize> = line
                .split_whitespace()
                .map(parse_usize)
                .collect::<Result<_>>()?;
            if fields.len() != 3 {
                return Err(Error::InvalidParameter(format!("bad mapping line '{line}'")));
            }
            records.push(MappingRecord {
                mu: fields[0],
                x: fields[1],
                y: fields[2],
            });
        }
        let n = (records.len() as f64).sqrt().round() as usize;
        Self::from_records(kind, n, &records)
    }

    pub fn to_json(&self) -> MappingJson {
        MappingJson {
            n: self.n,
            kind: self.kind,
            sites: self
                .inverse
                .iter()
                .enumerate()
                .map(|(mu, c)| MappingRecord { mu, x: c.x, y: c.y })
                .collect(),
        }
    }

    pub fn from_json(json: &MappingJson) -> Result<Self> {
        Self::from_records(json.kind, json.n, &json.sites)
    }

    fn from_records(kind: CurveKind, n: usize, records: &[MappingRecord]) -> Result<Self> {
        let size = n * n;
        if records.len() != size {
            return Err(Error::SizeMismatch(format!(
                "{} records for a {n}x{n} lattice",
                records.len()
            )));
        }
        let mut inverse = vec![None; size];
        let mut seen = vec![false; size];
        for r in records {
            if r.mu >= size || r.x >= n || r.y >= n {
                return Err(Error::IndexOutOfRange { index: r.mu.max(r.x).max(r.y), len: size });
            }
            if inverse[r.mu].is_some() || seen[r.x + n * r.y] {
                return Err(Error::InvalidParameter(format!("duplicate record {r:?}")));
            }
            inverse[r.mu] = Some(LatticeCoord::new(r.x, r.y));
            seen[r.x + n * r.y] = true;
        }
        let inverse = inverse.into_iter().map(|c| c.expect("all filled")).collect();
        Ok(Self::from_inverse(kind, n, inverse))
    }
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::InvalidParameter(format!("expected an integer, got '{s}'")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRecord {
    pub mu: usize,
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingJson {
    pub n: usize,
    pub kind: CurveKind,
    pub sites: Vec<MappingRecord>,
}

/// Hilbert curve position `d` to `(x, y)` on a `n x n` grid (`n` a power of two).
///
/// Works bottom-up through the quadrant levels, rotating the partial
/// coordinates whenever the quadrant is one of the two bottom ones.
fn hilbert_d2xy(n: usize, d: usize) -> LatticeCoord {
    let (mut x, mut y) = (0usize, 0usize);
    let mut t = d;
    let mut s = 1;
    while s < n {
        let rx = 1 & (t >> 1);
        let ry = 1 & (t ^ rx);
        if ry == 0 {
            if rx == 1 {
                x = s - 1 - x;
                y = s - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        x += s * rx;
        y += s * ry;
        t >>= 2;
        s <<= 1;
    }
    LatticeCoord::new(x, y)
}

pub fn build_hilbert(n: usize) -> Result<SiteMapping> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let inverse = (0..n * n).map(|d| hilbert_d2xy(n, d)).collect();
    Ok(SiteMapping::from_inverse(CurveKind::Hilbert, n, inverse))
}

pub fn build_snake(n: usize) -> Result<SiteMapping> {
    if n < 1 {
        return Err(Error::InvalidSize("snake curve needs n >= 1".into()));
    }
    let inverse = (0..n * n)
        .map(|mu| {
            let (y, k) = (mu / n, mu % n);
            let x = if y % 2 == 0 { k } else { n - 1 - k };
            LatticeCoord::new(x, y)
        })
        .collect();
    Ok(SiteMapping::from_inverse(CurveKind::Snake, n, inverse))
}

/// Number of MPS links between two chain sites.
pub fn chain_distance(a: ChainIndex, b: ChainIndex) -> usize {
    a.0.abs_diff(b.0)
}

/// Number of links between leaves `a` and `b` of a binary tree tensor network
/// with `num_leaves = 2^L` leaves (`L >= 2`) whose two top tensors are joined
/// by a single link.
pub fn tree_distance(a: ChainIndex, b: ChainIndex, num_leaves: usize) -> Result<usize> {
    if num_leaves < 4 || !num_leaves.is_power_of_two() {
        return Err(Error::InvalidSize(format!(
            "tree needs a power-of-two number of leaves >= 4, got {num_leaves}"
        )));
    }
    for idx in [a.0, b.0] {
        if idx >= num_leaves {
            return Err(Error::IndexOutOfRange { index: idx, len: num_leaves });
        }
    }
    Ok(tree_distance_unchecked(a.0, b.0, num_leaves.trailing_zeros() as usize))
}

/// `levels` is `L` for a tree with `2^L` leaves.
pub(crate) fn tree_distance_unchecked(a: usize, b: usize, levels: usize) -> usize {
    if a == b {
        return 0;
    }
    if (a >> (levels - 1)) != (b >> (levels - 1)) {
        return 2 * (levels - 1) + 1;
    }
    // The lowest common ancestor sits `k` levels above the leaves.
    let k = (usize::BITS - (a ^ b).leading_zeros()) as usize;
    2 * k
}
