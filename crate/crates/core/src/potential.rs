//! Pair potentials Φ and their Mayer functions g(x) = e^{-Φ(x)} - 1.
//!
//! Both are even functions on Zᵈ \ {0} with finite support, stored sparsely
//! on canonical representatives (the lexicographically positive point of
//! each {x, -x} pair) and mirrored on read. The origin values are fixed by
//! convention and never stored: Φ(0) = +∞ (two particles cannot share a
//! site), hence g(0) = -1.
//!
//! Off the origin Φ may be +∞ (a hard core), which maps to g = -1. The
//! reverse direction requires g > -1, since Φ = -ln(1 + g).

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;

fn build_symmetric_map(
    dim: usize,
    entries: impl IntoIterator<Item = (LatticeVector, f64)>,
    allow_pos_inf: bool,
    what: &str,
) -> Result<BTreeMap<LatticeVector, f64>> {
    let mut map: BTreeMap<LatticeVector, f64> = BTreeMap::new();
    for (x, v) in entries {
        x.check_dim(dim)?;
        if x.is_origin() {
            return Err(Error::OriginImplied);
        }
        if v.is_nan() || (v.is_infinite() && !(allow_pos_inf && v > 0.0)) {
            return Err(Error::NonFinite { at: format!("{what}({x})"), value: v });
        }
        let key = x.canonical();
        if let Some(&prev) = map.get(&key) {
            // bitwise agreement required; an input listing both x and -x
            // must not smuggle in an asymmetry
            if prev != v && !(prev.is_nan() && v.is_nan()) {
                return Err(Error::AsymmetricInput { x: x.to_string(), a: prev, b: v });
            }
        } else if v != 0.0 {
            map.insert(key, v);
        }
    }
    Ok(map)
}

/// Mayer function g: even, finitely supported, g(0) = -1 implied.
#[derive(Clone, Debug, PartialEq)]
pub struct MayerFunction {
    dim: usize,
    values: BTreeMap<LatticeVector, f64>,
}

impl MayerFunction {
    /// Build from off-origin entries. Entries may list either one or both of
    /// x and -x; if both, the values must agree exactly. Exact zeros are
    /// dropped so the stored support is the true support.
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (LatticeVector, f64)>) -> Result<Self> {
        let values = build_symmetric_map(dim, entries, false, "g")?;
        Ok(MayerFunction { dim, values })
    }

    /// The identically-zero interaction (free gas).
    pub fn free(dim: usize) -> Self {
        MayerFunction { dim, values: BTreeMap::new() }
    }

    /// Internal: from an already-canonical map (keys lex-positive, values
    /// nonzero and finite).
    pub(crate) fn from_canonical(dim: usize, values: BTreeMap<LatticeVector, f64>) -> Self {
        debug_assert!(values.keys().all(|x| x.is_lex_positive()));
        debug_assert!(values.values().all(|v| v.is_finite() && *v != 0.0));
        MayerFunction { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// g(x); -1 at the origin, 0 off the stored support.
    pub fn value(&self, x: &LatticeVector) -> f64 {
        debug_assert_eq!(x.dim(), self.dim);
        if x.is_origin() {
            return -1.0;
        }
        self.values.get(&x.canonical()).copied().unwrap_or(0.0)
    }

    /// ‖g‖ = Σ_{x≠0} |g(x)|. Each canonical entry counts twice (its mirror).
    pub fn norm(&self) -> f64 {
        // folded from +0.0: the empty sum must not be the -0.0 the stdlib
        // Sum identity would produce
        2.0 * self.values.values().fold(0.0, |acc, v| acc + v.abs())
    }

    /// ‖g − g'‖ = Σ_{x≠0} |g(x) − g'(x)| over the union of supports.
    pub fn l1_distance(&self, other: &MayerFunction) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let keys: std::collections::BTreeSet<&LatticeVector> =
            self.values.keys().chain(other.values.keys()).collect();
        2.0 * keys.into_iter().fold(0.0, |acc, x| {
            acc + (self.values.get(x).copied().unwrap_or(0.0)
                - other.values.get(x).copied().unwrap_or(0.0))
            .abs()
        })
    }

    /// Canonical (lex-positive) support entries.
    pub fn canonical_entries(&self) -> impl Iterator<Item = (&LatticeVector, f64)> {
        self.values.iter().map(|(x, &v)| (x, v))
    }

    /// Full off-origin support, both signs, sorted.
    pub fn support_points(&self) -> Vec<LatticeVector> {
        let mut pts: Vec<LatticeVector> = self
            .values
            .keys()
            .flat_map(|x| [x.clone(), -x])
            .collect();
        pts.sort();
        pts
    }

    /// Largest ∞-norm over the support; 0 for the free gas.
    pub fn support_radius(&self) -> i32 {
        self.values.keys().map(|x| x.norm_inf()).max().unwrap_or(0)
    }

    pub fn support_len(&self) -> usize {
        2 * self.values.len()
    }

    pub fn is_free(&self) -> bool {
        self.values.is_empty()
    }
}

/// Pair potential Φ: even, finitely supported, Φ(0) = +∞ implied. Stored
/// off-origin values may be +∞ (hard core).
#[derive(Clone, Debug, PartialEq)]
pub struct PairPotential {
    dim: usize,
    values: BTreeMap<LatticeVector, f64>,
}

impl PairPotential {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (LatticeVector, f64)>) -> Result<Self> {
        let values = build_symmetric_map(dim, entries, true, "phi")?;
        Ok(PairPotential { dim, values })
    }

    pub fn free(dim: usize) -> Self {
        PairPotential { dim, values: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Φ(x); +∞ at the origin, 0 off the stored support.
    pub fn value(&self, x: &LatticeVector) -> f64 {
        debug_assert_eq!(x.dim(), self.dim);
        if x.is_origin() {
            return f64::INFINITY;
        }
        self.values.get(&x.canonical()).copied().unwrap_or(0.0)
    }

    pub fn canonical_entries(&self) -> impl Iterator<Item = (&LatticeVector, f64)> {
        self.values.iter().map(|(x, &v)| (x, v))
    }

    pub fn support_points(&self) -> Vec<LatticeVector> {
        let mut pts: Vec<LatticeVector> = self
            .values
            .keys()
            .flat_map(|x| [x.clone(), -x])
            .collect();
        pts.sort();
        pts
    }

    pub fn support_radius(&self) -> i32 {
        self.values.keys().map(|x| x.norm_inf()).max().unwrap_or(0)
    }
}

/// g(x) = e^{-Φ(x)} - 1 on the support of Φ. Total: a hard core Φ = +∞ maps
/// to g = -1. Φ-entries that are exactly 0 would give g = 0 and are dropped,
/// so supp g = supp Φ.
pub fn mayer_from_potential(phi: &PairPotential) -> MayerFunction {
    let mut values = BTreeMap::new();
    for (x, v) in phi.canonical_entries() {
        let g = (-v).exp() - 1.0;
        if g != 0.0 {
            values.insert(x.clone(), g);
        }
    }
    MayerFunction::from_canonical(phi.dim, values)
}

/// Φ(x) = -ln(1 + g(x)). Fails on g ≤ -1 off the origin: g = -1 has no
/// finite potential and g < -1 is not a Mayer function at all.
pub fn potential_from_mayer(g: &MayerFunction) -> Result<PairPotential> {
    let mut values = BTreeMap::new();
    for (x, v) in g.canonical_entries() {
        if v <= -1.0 {
            return Err(Error::HardCore { x: x.to_string(), value: v });
        }
        let phi = -v.ln_1p();
        if phi != 0.0 {
            values.insert(x.clone(), phi);
        }
    }
    Ok(PairPotential { dim: g.dim, values })
}
