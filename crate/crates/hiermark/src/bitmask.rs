//! Child-selection bitmasks. Bit `i` carries weight `2^i`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{Num, Zero};
use thiserror::Error;

use crate::hierarchy::{Hierarchy, HierarchyNode, NodeId, WidthClass};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitmaskError {
    #[error("bit {pos} out of range for capacity {capacity}")]
    OutOfRange { pos: u32, capacity: u32 },
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: WidthClass, right: WidthClass },
    #[error("cannot parse {text:?} as a {width} mask")]
    Parse { text: String, width: WidthClass },
    #[error("bit {bit} of parent {parent} has no child")]
    DanglingBit { parent: NodeId, bit: u32 },
    #[error("unknown parent node {0}")]
    UnknownParent(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Union,
    Intersect,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Bits {
    Word(u64),
    Big(BigUint),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmask {
    width: WidthClass,
    bits: Bits,
}

impl Bitmask {
    pub fn empty(width: WidthClass) -> Self {
        let bits = match width {
            WidthClass::Var(_) => Bits::Big(BigUint::zero()),
            _ => Bits::Word(0),
        };
        Bitmask { width, bits }
    }

    /// Build from set positions.
    pub fn from_positions(
        width: WidthClass,
        positions: impl IntoIterator<Item = u32>,
    ) -> Result<Self, BitmaskError> {
        let mut m = Self::empty(width);
        for p in positions {
            m.assign(p, true)?;
        }
        Ok(m)
    }

    pub fn from_word(width: WidthClass, value: u64) -> Result<Self, BitmaskError> {
        let mut m = Self::empty(width);
        for p in 0..64 {
            if value >> p & 1 == 1 {
                m.assign(p, true)?;
            }
        }
        Ok(m)
    }

    /// Parse the serialized form: decimal for fixed widths, `0x` hex for var.
    pub fn parse(width: WidthClass, text: &str) -> Result<Self, BitmaskError> {
        let bad = || BitmaskError::Parse {
            text: text.to_string(),
            width,
        };
        match width {
            WidthClass::Var(cap) => {
                let digits = text.strip_prefix("0x").ok_or_else(bad)?;
                let v = BigUint::from_str_radix(digits, 16).map_err(|_| bad())?;
                if v.bits() > cap as u64 {
                    return Err(bad());
                }
                Ok(Bitmask {
                    width,
                    bits: Bits::Big(v),
                })
            }
            _ => {
                let v: u64 = text.parse().map_err(|_| bad())?;
                Self::from_word(width, v).map_err(|_| bad())
            }
        }
    }

    pub fn width(&self) -> WidthClass {
        self.width
    }

    pub fn capacity(&self) -> u32 {
        self.width.capacity()
    }

    fn check(&self, pos: u32) -> Result<(), BitmaskError> {
        if pos >= self.capacity() {
            Err(BitmaskError::OutOfRange {
                pos,
                capacity: self.capacity(),
            })
        } else {
            Ok(())
        }
    }

    /// In-place single-bit write.
    pub fn assign(&mut self, pos: u32, on: bool) -> Result<(), BitmaskError> {
        self.check(pos)?;
        match &mut self.bits {
            Bits::Word(w) => {
                if on {
                    *w |= 1u64 << pos;
                } else {
                    *w &= !(1u64 << pos);
                }
            }
            Bits::Big(b) => b.set_bit(pos as u64, on),
        }
        Ok(())
    }

    pub fn set(&self, pos: u32) -> Result<Self, BitmaskError> {
        let mut m = self.clone();
        m.assign(pos, true)?;
        Ok(m)
    }

    pub fn clear(&self, pos: u32) -> Result<Self, BitmaskError> {
        let mut m = self.clone();
        m.assign(pos, false)?;
        Ok(m)
    }

    pub fn toggle(&self, pos: u32) -> Result<Self, BitmaskError> {
        let on = !self.test(pos)?;
        let mut m = self.clone();
        m.assign(pos, on)?;
        Ok(m)
    }

    pub fn test(&self, pos: u32) -> Result<bool, BitmaskError> {
        self.check(pos)?;
        Ok(match &self.bits {
            Bits::Word(w) => w >> pos & 1 == 1,
            Bits::Big(b) => b.bit(pos as u64),
        })
    }

    pub fn combine(&self, other: &Bitmask, op: Combine) -> Result<Self, BitmaskError> {
        if self.width != other.width {
            return Err(BitmaskError::WidthMismatch {
                left: self.width,
                right: other.width,
            });
        }
        let bits = match (&self.bits, &other.bits) {
            (Bits::Word(a), Bits::Word(b)) => Bits::Word(match op {
                Combine::Union => a | b,
                Combine::Intersect => a & b,
            }),
            (Bits::Big(a), Bits::Big(b)) => Bits::Big(match op {
                Combine::Union => a | b,
                Combine::Intersect => a & b,
            }),
            _ => unreachable!("same width implies same representation"),
        };
        Ok(Bitmask {
            width: self.width,
            bits,
        })
    }

    pub fn is_zero(&self) -> bool {
        match &self.bits {
            Bits::Word(w) => *w == 0,
            Bits::Big(b) => b.is_zero(),
        }
    }

    pub fn count_ones(&self) -> u64 {
        match &self.bits {
            Bits::Word(w) => w.count_ones() as u64,
            Bits::Big(b) => b.count_ones(),
        }
    }

    /// Set positions, ascending.
    pub fn ones(&self) -> Vec<u32> {
        match &self.bits {
            Bits::Word(w) => (0..64).filter(|p| w >> p & 1 == 1).collect(),
            Bits::Big(b) => (0..b.bits())
                .filter(|&p| b.bit(p))
                .map(|p| p as u32)
                .collect(),
        }
    }

    /// Value as u64 when it fits, regardless of width class.
    pub fn to_u64(&self) -> Option<u64> {
        match &self.bits {
            Bits::Word(w) => Some(*w),
            Bits::Big(b) => u64::try_from(b).ok(),
        }
    }

    pub fn clear_all(&mut self) {
        *self = Bitmask::empty(self.width);
    }
}

impl fmt::Display for Bitmask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.bits {
            Bits::Word(w) => write!(f, "{w}"),
            Bits::Big(b) => write!(f, "0x{}", b.to_str_radix(16)),
        }
    }
}

/// Children of `parent` whose bit is set in `mask`, in child_index order.
pub fn decode<'h>(
    mask: &Bitmask,
    parent: NodeId,
    h: &'h Hierarchy,
) -> Result<Vec<&'h HierarchyNode>, BitmaskError> {
    let pidx = h.idx(parent).ok_or(BitmaskError::UnknownParent(parent))?;
    let kids = h.children_idx(pidx);
    let mut out = Vec::new();
    for bit in mask.ones() {
        let child = kids
            .iter()
            .map(|&c| h.at(c))
            .find(|c| c.child_index == bit)
            .ok_or(BitmaskError::DanglingBit { parent, bit })?;
        out.push(child);
    }
    Ok(out)
}
