//! Points of the integer lattice Zᵈ.
//!
//! Everything downstream works with finite collections of lattice vectors:
//! supports of interaction functions, argument tuples of correlation
//! functions, finite enumeration volumes. Symmetric functions on the lattice
//! are stored on canonical representatives only (the lexicographically
//! positive one of each {x, -x} pair), so the canonicalization helpers here
//! are load-bearing for the whole crate.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

/// A point of Zᵈ. Ordered lexicographically, hashable, cheap to clone at the
/// dimensions this crate targets (d ≤ 3 in practice).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LatticeVector {
    coords: Vec<i32>,
}

impl LatticeVector {
    pub fn new(coords: Vec<i32>) -> Self {
        assert!(!coords.is_empty(), "lattice vector needs at least one coordinate");
        LatticeVector { coords }
    }

    pub fn zero(dim: usize) -> Self {
        LatticeVector { coords: vec![0; dim] }
    }

    /// Standard basis vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        assert!(axis < dim);
        let mut coords = vec![0; dim];
        coords[axis] = 1;
        LatticeVector { coords }
    }

    /// Shorthand for d = 1 points.
    pub fn scalar(x: i32) -> Self {
        LatticeVector { coords: vec![x] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    pub fn norm_inf(&self) -> i32 {
        self.coords.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// True when the first nonzero coordinate is positive. The origin is
    /// neither positive nor negative.
    pub fn is_lex_positive(&self) -> bool {
        for &c in &self.coords {
            if c != 0 {
                return c > 0;
            }
        }
        false
    }

    /// The lexicographically positive representative of {x, -x}. Returns the
    /// origin unchanged.
    pub fn canonical(&self) -> LatticeVector {
        if self.is_lex_positive() || self.is_origin() {
            self.clone()
        } else {
            -self
        }
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: dim, got: self.dim() })
        }
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.coords {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl Add for &LatticeVector {
    type Output = LatticeVector;
    fn add(self, rhs: &LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &LatticeVector {
    type Output = LatticeVector;
    fn sub(self, rhs: &LatticeVector) -> LatticeVector {
        debug_assert_eq!(self.dim(), rhs.dim());
        LatticeVector {
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        LatticeVector { coords: self.coords.iter().map(|c| -c).collect() }
    }
}

/// All points of the box [-radius, radius]ᵈ in lexicographic order.
pub fn box_points(dim: usize, radius: i32) -> Vec<LatticeVector> {
    assert!(dim >= 1);
    assert!(radius >= 0);
    let side = (2 * radius + 1) as usize;
    let count = side.pow(dim as u32);
    let mut out = Vec::with_capacity(count);
    let mut coords = vec![-radius; dim];
    loop {
        out.push(LatticeVector::new(coords.clone()));
        // odometer increment, last coordinate fastest
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if coords[axis] < radius {
                coords[axis] += 1;
                for c in coords.iter_mut().skip(axis + 1) {
                    *c = -radius;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_picks_lex_positive() {
        let x = LatticeVector::new(vec![0, -2, 1]);
        assert!(!x.is_lex_positive());
        assert_eq!(x.canonical(), LatticeVector::new(vec![0, 2, -1]));
        assert_eq!(x.canonical(), (-&x).canonical());

        let y = LatticeVector::scalar(3);
        assert_eq!(y.canonical(), y);
        assert!(LatticeVector::zero(2).canonical().is_origin());
    }

    #[test]
    fn box_points_are_sorted_and_complete() {
        let pts = box_points(2, 1);
        assert_eq!(pts.len(), 9);
        let mut sorted = pts.clone();
        sorted.sort();
        assert_eq!(pts, sorted);
        assert!(pts.contains(&LatticeVector::new(vec![-1, 1])));

        assert_eq!(box_points(1, 4).len(), 9);
        assert_eq!(box_points(3, 1).len(), 27);
    }

    #[test]
    fn vector_arithmetic() {
        let a = LatticeVector::new(vec![1, -2]);
        let b = LatticeVector::new(vec![3, 5]);
        assert_eq!(&a + &b, LatticeVector::new(vec![4, 3]));
        assert_eq!(&a - &b, LatticeVector::new(vec![-2, -7]));
        assert_eq!((-&a).coords(), &[-1, 2]);
        assert_eq!(b.norm_inf(), 5);
    }
}
