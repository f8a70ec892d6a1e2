//! Addresses in the binary tree over `[0, 1)`.
//!
//! An interval of depth `d` and index `j` is `[j/2^d, (j+1)/2^d)`. The path
//! from the root is the `d`-bit binary expansion of `j` (0 = left child,
//! 1 = right child). Depths are capped at [`MAX_DEPTH`] so indices fit in
//! a `u64` and scaled endpoints fit in a `u128`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

/// Hard structural depth limit (also the default configurable cap).
pub const MAX_DEPTH: u32 = 64;

/// A dyadic subinterval of `[0, 1)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    depth: u32,
    index: u64,
}

impl DyadicInterval {
    /// The root interval `[0, 1)`.
    pub fn root() -> Self {
        DyadicInterval { depth: 0, index: 0 }
    }

    /// Interval at `depth` with left-to-right `index`.
    ///
    /// Panics if the address is out of range; addresses are produced by
    /// tree navigation, so an invalid one is a programming error.
    pub fn new(depth: u32, index: u64) -> Self {
        assert!(depth <= MAX_DEPTH, "depth {depth} exceeds structural cap {MAX_DEPTH}");
        if depth < 64 {
            assert!(index < 1u64 << depth, "index {index} out of range at depth {depth}");
        }
        DyadicInterval { depth, index }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Left endpoint scaled by `2^64`, exact.
    pub(crate) fn start_scaled(&self) -> u128 {
        (self.index as u128) << (64 - self.depth)
    }

    /// Right endpoint scaled by `2^64`, exact.
    pub(crate) fn end_scaled(&self) -> u128 {
        (self.index as u128 + 1) << (64 - self.depth)
    }

    pub fn left_child(&self) -> Self {
        Self::new(self.depth + 1, self.index << 1)
    }

    pub fn right_child(&self) -> Self {
        Self::new(self.depth + 1, (self.index << 1) | 1)
    }

    pub fn parent(&self) -> Option<Self> {
        if self.depth == 0 {
            None
        } else {
            Some(DyadicInterval { depth: self.depth - 1, index: self.index >> 1 })
        }
    }

    /// True if `self` is the right child of its parent.
    pub fn is_right_child(&self) -> bool {
        self.depth > 0 && self.index & 1 == 1
    }

    /// `self ⊇ other` (every dyadic pair is nested or disjoint).
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        self.depth <= other.depth && (other.index >> (other.depth - self.depth)) == self.index
    }

    pub fn is_disjoint(&self, other: &DyadicInterval) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    /// The ancestor of `self` at the given (coarser) depth.
    pub fn ancestor_at(&self, depth: u32) -> DyadicInterval {
        assert!(depth <= self.depth);
        DyadicInterval { depth, index: self.index >> (self.depth - depth) }
    }

    /// `I_m` of the chain `I_0 = I`, `I_{j+1} = I_j^{++}`.
    pub fn chain(&self, m: u32) -> Self {
        let mut iv = *self;
        for _ in 0..m {
            iv = iv.right_child().right_child();
        }
        iv
    }

    /// Exact length `2^{-depth}`.
    pub fn len_rational(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.depth)
    }

    pub fn len_f64(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Path bits from the root, e.g. `"011"`; empty for the root itself.
    pub fn path_bits(&self) -> String {
        (0..self.depth)
            .rev()
            .map(|b| if self.index >> b & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Parse a path-bit string. Empty means the root.
    pub fn from_path_bits(bits: &str) -> Result<Self, String> {
        if bits.len() as u32 > MAX_DEPTH {
            return Err(format!("path longer than {MAX_DEPTH} bits: {bits:?}"));
        }
        let mut index = 0u64;
        for c in bits.chars() {
            index = (index << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(format!("invalid path bit {c:?} in {bits:?}")),
                };
        }
        Ok(DyadicInterval { depth: bits.len() as u32, index })
    }
}

/// Left-to-right order by start point, coarser first at equal starts.
impl Ord for DyadicInterval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.start_scaled()
            .cmp(&other.start_scaled())
            .then(self.depth.cmp(&other.depth))
    }
}

impl PartialOrd for DyadicInterval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}@{}:{}]", self.index, self.depth, self.path_bits())
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path_bits())
    }
}

/// True when `a.end == b.start`, i.e. `b` continues the tiling after `a`.
pub fn abuts(a: &DyadicInterval, b: &DyadicInterval) -> bool {
    a.end_scaled() == b.start_scaled()
}

/// True when `e` is `2^64` , i.e. the interval chain has reached 1.
pub fn reaches_one(a: &DyadicInterval) -> bool {
    a.end_scaled() == 1u128 << 64
}
