//! Ursell (connected correlation) functions of a lattice gas, evaluated
//! through a rooted recursion, and their sums over the infinite lattice.
//!
//! The central object is the rooted cluster weight w_X(Y), defined for a
//! tuple X of roots and a tuple Y of floating points by w_∅(Y) = [Y = ∅] and
//!
//! ```text
//!   w_X(Y) = Π_{i≥2} (1 + g(x_i − x₁)) · Σ_{S ⊆ Y} Π_{y∈S} g(y − x₁) · w_{S ∪ X∖x₁}(Y∖S)
//! ```
//!
//! where g is the Mayer function. The Ursell function of m points is
//! φ(x₁, …, x_m) = w_{(x₁)}((x₂, …, x_m)); it is the Γ⁻¹-image of the
//! Boltzmann weights, which the unit tests check against the sequence
//! algebra directly. w is symmetric in X and in Y separately, invariant
//! under translations and under the global sign flip (g is even), and it
//! vanishes whenever two roots coincide — the memo table canonicalizes on
//! all of these at once.
//!
//! Series coefficients of the density and pair-correlation expansions are
//! sums of w over all placements of the floating points:
//!
//! ```text
//!   Σ_{Y ∈ (Zᵈ)ⁿ} w_X(F ++ Y)
//! ```
//!
//! Rather than enumerate tuples, `lattice_sum` pushes the sum through the
//! recursion: a floating point either stays floating in the remainder or is
//! absorbed next to the pivot, and an absorbed point only contributes when
//! it lands on {0} ∪ supp(g) relative to the pivot. Absorbing s of n
//! floating points onto a set V of distinct such offsets carries weight
//! C(n,s)·s!·Π_{v∈V} g(v) (repeated offsets die against the coincident-root
//! rule). The result is exact — no window enters — and every sub-sum is
//! memoized. `windowed_sum` is the direct enumeration over a finite window,
//! kept both as a truncated mode and as an independent check of the exact
//! route: with a window of radius n·R(g) the two agree, because a floating
//! point farther than n interaction ranges from every root and pinned point
//! cannot connect to the cluster.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::lattice::{box_points, LatticeVector};
use crate::potential::MayerFunction;

/// Lattice point packed into a u64: four 16-bit lanes, coordinate 0 in the
/// top lane, each stored with offset 32768. Unsigned order on the packed
/// value is lexicographic order on coordinates, which keeps sorting,
/// translation, and mirroring cheap inside the hot recursion.
type Pt = u64;

const LANE_OFFSET: i64 = 32768;
/// Coordinates of points handed to the evaluator must stay within this
/// bound so that differences of reachable points never leave a lane.
pub const COORD_BOUND: i32 = 10_000;
const MAX_DIM: usize = 4;
const MAX_FLOATS: usize = 16;
const MAX_SUM_ORDER: usize = 12;

fn pack(p: &LatticeVector) -> Pt {
    let mut v: u64 = 0;
    for lane in 0..4 {
        let c = p.coords().get(lane).copied().unwrap_or(0) as i64;
        v |= (((c + LANE_OFFSET) as u64) & 0xFFFF) << (48 - 16 * lane);
    }
    v
}

#[cfg(test)]
fn unpack(p: Pt, dim: usize) -> LatticeVector {
    let coords = (0..dim)
        .map(|lane| ((p >> (48 - 16 * lane)) as u16 as i64 - LANE_OFFSET) as i32)
        .collect();
    LatticeVector::new(coords)
}

/// a − b, lanewise.
fn pt_sub(a: Pt, b: Pt) -> Pt {
    let mut v: u64 = 0;
    for shift in [48u32, 32, 16, 0] {
        let la = (a >> shift) & 0xFFFF;
        let lb = (b >> shift) & 0xFFFF;
        let out = la as i64 - lb as i64 + LANE_OFFSET;
        debug_assert!((0..0x10000).contains(&out), "packed lane overflow");
        v |= (out as u64) << shift;
    }
    v
}

/// −a, lanewise.
fn pt_neg(a: Pt) -> Pt {
    let mut v: u64 = 0;
    for shift in [48u32, 32, 16, 0] {
        let la = (a >> shift) & 0xFFFF;
        debug_assert!(la != 0, "packed lane overflow");
        v |= ((2 * LANE_OFFSET as u64) - la) << shift;
    }
    v
}

/// Advance `idx` to the next size-|idx| combination of {0, …, universe−1}
/// in lexicographic order. Returns false when exhausted.
fn next_combination(idx: &mut [usize], universe: usize) -> bool {
    let s = idx.len();
    let mut k = s;
    while k > 0 {
        k -= 1;
        if idx[k] < universe - s + k {
            idx[k] += 1;
            for j in k + 1..s {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Evaluator for rooted cluster weights and their lattice sums, with shared
/// memo tables. Create one per Mayer function; all methods are
/// deterministic, so repeated runs give bitwise-identical results.
pub struct UrsellEvaluator {
    g: MayerFunction,
    dim: usize,
    /// g on {0} ∪ supp(g), packed and sorted; every stored value is nonzero.
    supp0: Vec<(Pt, f64)>,
    gmap: HashMap<Pt, f64>,
    factorial: [f64; MAX_FLOATS + 1],
    binom: [[f64; MAX_FLOATS + 1]; MAX_FLOATS + 1],
    rooted_memo: RefCell<HashMap<Vec<u64>, f64>>,
    sum_memo: RefCell<HashMap<Vec<u64>, f64>>,
}

impl UrsellEvaluator {
    pub fn new(g: &MayerFunction) -> Result<Self> {
        if g.dim() == 0 || g.dim() > MAX_DIM {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: format!(
                    "lattice sums are implemented for dimensions 1 through {MAX_DIM}, got {}",
                    g.dim()
                ),
            });
        }
        if g.support_radius() > COORD_BOUND {
            return Err(Error::InvalidParameter {
                name: "mayer_support",
                reason: format!(
                    "support radius {} exceeds the coordinate bound {COORD_BOUND}",
                    g.support_radius()
                ),
            });
        }
        let origin = LatticeVector::zero(g.dim());
        let mut gmap = HashMap::new();
        gmap.insert(pack(&origin), -1.0);
        for p in g.support_points() {
            gmap.insert(pack(&p), g.value(&p));
        }
        let mut supp0: Vec<(Pt, f64)> = gmap.iter().map(|(&p, &v)| (p, v)).collect();
        supp0.sort_unstable_by_key(|&(p, _)| p);

        let mut factorial = [1.0; MAX_FLOATS + 1];
        for k in 1..=MAX_FLOATS {
            factorial[k] = factorial[k - 1] * k as f64;
        }
        let mut binom = [[0.0; MAX_FLOATS + 1]; MAX_FLOATS + 1];
        for n in 0..=MAX_FLOATS {
            binom[n][0] = 1.0;
            for s in 1..=n {
                binom[n][s] = binom[n - 1][s - 1] + if s <= n - 1 { binom[n - 1][s] } else { 0.0 };
            }
        }

        Ok(UrsellEvaluator {
            dim: g.dim(),
            g: g.clone(),
            supp0,
            gmap,
            factorial,
            binom,
            rooted_memo: RefCell::new(HashMap::new()),
            sum_memo: RefCell::new(HashMap::new()),
        })
    }

    pub fn mayer(&self) -> &MayerFunction {
        &self.g
    }

    fn g_at(&self, p: Pt) -> f64 {
        self.gmap.get(&p).copied().unwrap_or(0.0)
    }

    fn check_points(&self, points: &[LatticeVector]) {
        for p in points {
            assert_eq!(p.dim(), self.dim, "point dimension mismatch");
            assert!(p.norm_inf() <= COORD_BOUND, "coordinate beyond {COORD_BOUND}");
        }
    }

    /// Canonical form shared by the memo tables: roots sorted and translated
    /// so the first sits at the origin, companions translated alongside and
    /// sorted, then the lexicographically smaller of the configuration and
    /// its mirror image. Legitimate because w is symmetric in each tuple,
    /// translation invariant, and even.
    fn canon(&self, roots: &mut Vec<Pt>, aux: &mut Vec<Pt>) {
        roots.sort_unstable();
        let t = roots[0];
        for r in roots.iter_mut() {
            *r = pt_sub(*r, t);
        }
        for a in aux.iter_mut() {
            *a = pt_sub(*a, t);
        }
        aux.sort_unstable();

        let mut nr: Vec<Pt> = roots.iter().map(|&p| pt_neg(p)).collect();
        nr.reverse();
        let t2 = nr[0];
        for r in nr.iter_mut() {
            *r = pt_sub(*r, t2);
        }
        let mut na: Vec<Pt> = aux.iter().map(|&p| pt_sub(pt_neg(p), t2)).collect();
        na.sort_unstable();
        if (&nr, &na) < (&*roots, &*aux) {
            *roots = nr;
            *aux = na;
        }
    }

    /// w_X(Y) for arbitrary (possibly empty, unsorted) tuples.
    fn rooted_entry(&self, mut roots: Vec<Pt>, mut floats: Vec<Pt>) -> f64 {
        if roots.is_empty() {
            return if floats.is_empty() { 1.0 } else { 0.0 };
        }
        self.canon(&mut roots, &mut floats);
        self.rooted_inner(&roots, &floats)
    }

    fn rooted_inner(&self, roots: &[Pt], floats: &[Pt]) -> f64 {
        if roots.windows(2).any(|w| w[0] == w[1]) {
            return 0.0;
        }
        let mut key = Vec::with_capacity(1 + roots.len() + floats.len());
        key.push(roots.len() as u64);
        key.extend_from_slice(roots);
        key.extend_from_slice(floats);
        if let Some(&v) = self.rooted_memo.borrow().get(&key) {
            return v;
        }

        let mut pref = 1.0;
        for &x in &roots[1..] {
            pref *= 1.0 + self.g_at(x);
        }
        let value = if pref == 0.0 {
            0.0
        } else {
            let n = floats.len();
            let mut total = 0.0;
            for mask in 0u32..(1u32 << n) {
                let mut w = 1.0;
                let mut absorbed: Vec<Pt> = roots[1..].to_vec();
                let mut rest: Vec<Pt> = Vec::with_capacity(n);
                for (j, &y) in floats.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        w *= self.g_at(y);
                        if w == 0.0 {
                            break;
                        }
                        absorbed.push(y);
                    } else {
                        rest.push(y);
                    }
                }
                if w == 0.0 {
                    continue;
                }
                total += w * self.rooted_entry(absorbed, rest);
            }
            pref * total
        };
        self.rooted_memo.borrow_mut().insert(key, value);
        value
    }

    /// R_X(F; n) = Σ over placements of n floating points; dispatches to the
    /// pointwise weight when nothing floats.
    fn sum_entry(&self, mut roots: Vec<Pt>, mut pinned: Vec<Pt>, n: usize) -> f64 {
        if roots.is_empty() {
            return if pinned.is_empty() && n == 0 { 1.0 } else { 0.0 };
        }
        if n == 0 {
            self.canon(&mut roots, &mut pinned);
            return self.rooted_inner(&roots, &pinned);
        }
        self.canon(&mut roots, &mut pinned);
        self.sum_inner(&roots, &pinned, n)
    }

    fn sum_inner(&self, roots: &[Pt], pinned: &[Pt], n: usize) -> f64 {
        if roots.windows(2).any(|w| w[0] == w[1]) {
            return 0.0;
        }
        let mut key = Vec::with_capacity(1 + roots.len() + pinned.len());
        key.push(((n as u64) << 8) | roots.len() as u64);
        key.extend_from_slice(roots);
        key.extend_from_slice(pinned);
        if let Some(&v) = self.sum_memo.borrow().get(&key) {
            return v;
        }

        let mut pref = 1.0;
        for &x in &roots[1..] {
            pref *= 1.0 + self.g_at(x);
        }
        let value = if pref == 0.0 {
            0.0
        } else {
            let f = pinned.len();
            let p = self.supp0.len();
            let mut total = 0.0;
            for fmask in 0u32..(1u32 << f) {
                let mut wf = 1.0;
                let mut base: Vec<Pt> = roots[1..].to_vec();
                let mut rest: Vec<Pt> = Vec::with_capacity(f);
                for (j, &y) in pinned.iter().enumerate() {
                    if fmask & (1 << j) != 0 {
                        wf *= self.g_at(y);
                        if wf == 0.0 {
                            break;
                        }
                        base.push(y);
                    } else {
                        rest.push(y);
                    }
                }
                if wf == 0.0 {
                    continue;
                }
                // none of the floating points absorbed at this pivot
                total += wf * self.sum_entry(base.clone(), rest.clone(), n);
                // absorb s of them onto distinct support offsets of the pivot
                for s in 1..=n.min(p) {
                    let weight = self.binom[n][s] * self.factorial[s];
                    let mut idx: Vec<usize> = (0..s).collect();
                    loop {
                        let mut wv = 1.0;
                        let mut new_roots = base.clone();
                        for &i in &idx {
                            wv *= self.supp0[i].1;
                            new_roots.push(self.supp0[i].0);
                        }
                        let sub = self.sum_entry(new_roots, rest.clone(), n - s);
                        if sub != 0.0 {
                            total += wf * weight * wv * sub;
                        }
                        if !next_combination(&mut idx, p) {
                            break;
                        }
                    }
                }
            }
            pref * total
        };
        self.sum_memo.borrow_mut().insert(key, value);
        value
    }

    /// Rooted cluster weight w_X(Y).
    pub fn rooted(&self, roots: &[LatticeVector], floats: &[LatticeVector]) -> f64 {
        self.check_points(roots);
        self.check_points(floats);
        assert!(floats.len() <= MAX_FLOATS, "too many floating points");
        self.rooted_entry(
            roots.iter().map(pack).collect(),
            floats.iter().map(pack).collect(),
        )
    }

    /// Ursell function φ(x₁, …, x_m), symmetric in all arguments.
    pub fn ursell(&self, points: &[LatticeVector]) -> f64 {
        assert!(!points.is_empty(), "Ursell functions start at one point");
        // symmetry lets us pick the root; a fixed choice routes every
        // permutation of the same multiset through one recursion
        let mut sorted = points.to_vec();
        sorted.sort();
        self.rooted(&sorted[..1], &sorted[1..])
    }

    /// Exact Σ_{Y ∈ (Zᵈ)ⁿ} w_roots(pinned ++ Y), over the infinite lattice.
    pub fn lattice_sum(&self, roots: &[LatticeVector], pinned: &[LatticeVector], n: usize) -> f64 {
        self.check_points(roots);
        self.check_points(pinned);
        assert!(n <= MAX_SUM_ORDER, "floating order beyond {MAX_SUM_ORDER}");
        assert!(pinned.len() + n <= MAX_FLOATS, "too many companion points");
        self.sum_entry(
            roots.iter().map(pack).collect(),
            pinned.iter().map(pack).collect(),
            n,
        )
    }

    /// Σ_{Y ∈ Wⁿ} w_roots(pinned ++ Y) with every floating point confined to
    /// the union of boxes of radius min(window, n·R(g)) around the roots and
    /// pinned points. Direct enumeration; agrees with `lattice_sum` as soon
    /// as the window reaches n interaction ranges.
    pub fn windowed_sum(
        &self,
        roots: &[LatticeVector],
        pinned: &[LatticeVector],
        n: usize,
        window: i32,
    ) -> Result<f64> {
        let support = self.g.support_radius();
        if window < support {
            return Err(Error::WindowTooSmall { window, support });
        }
        self.check_points(roots);
        self.check_points(pinned);
        assert!(n <= MAX_SUM_ORDER, "floating order beyond {MAX_SUM_ORDER}");
        assert!(pinned.len() + n <= MAX_FLOATS, "too many companion points");
        if n == 0 {
            return Ok(self.rooted(roots, pinned));
        }
        let reach = window.min(n as i32 * support);
        let candidates = self.anchored_window(roots.iter().chain(pinned), reach);
        if candidates.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        self.fold_multisets(&candidates, n, |weight, floats| {
            let mut combined = pinned.to_vec();
            combined.extend_from_slice(floats);
            total += weight * self.rooted(roots, &combined);
        });
        Ok(total)
    }

    /// max over root tuples X = (0, x₂, …, x_m), x_i distinct in the box of
    /// the given radius, of Σ_{Y ∈ (Zᵈ)ⁿ} |w_X(Y)| — the order-n tail mass
    /// of the expansion coefficients. Exhaustive up to 128 root samples.
    pub fn tail_norm(&self, m: usize, n: usize, radius: i32) -> f64 {
        assert!(m >= 1, "at least one root is required");
        assert!(n <= MAX_SUM_ORDER, "floating order beyond {MAX_SUM_ORDER}");
        let origin = LatticeVector::zero(self.dim);
        let pool: Vec<LatticeVector> = box_points(self.dim, radius)
            .into_iter()
            .filter(|p| !p.is_origin())
            .collect();
        assert!(pool.len() + 1 >= m, "box too small for the requested root count");
        let reach = n as i32 * self.g.support_radius();

        let mut worst = 0.0f64;
        let mut combo: Vec<usize> = (0..m - 1).collect();
        for _ in 0..128 {
            let mut roots = vec![origin.clone()];
            roots.extend(combo.iter().map(|&i| pool[i].clone()));
            let mut mass = 0.0;
            if n == 0 {
                mass = self.rooted(&roots, &[]).abs();
            } else {
                let candidates = self.anchored_window(roots.iter(), reach);
                self.fold_multisets(&candidates, n, |weight, floats| {
                    mass += weight * self.rooted(&roots, floats).abs();
                });
            }
            worst = worst.max(mass);
            if m == 1 || !next_combination(&mut combo, pool.len()) {
                break;
            }
        }
        worst
    }

    fn anchored_window<'a>(
        &self,
        anchors: impl Iterator<Item = &'a LatticeVector>,
        reach: i32,
    ) -> Vec<LatticeVector> {
        let mut out: BTreeSet<LatticeVector> = BTreeSet::new();
        for anchor in anchors {
            for delta in box_points(self.dim, reach) {
                out.insert(anchor + &delta);
            }
        }
        out.into_iter().collect()
    }

    /// Visit every size-n multiset over `candidates` together with the
    /// number of distinct orderings it represents, n!/Π(multiplicities!).
    fn fold_multisets(
        &self,
        candidates: &[LatticeVector],
        n: usize,
        mut visit: impl FnMut(f64, &[LatticeVector]),
    ) {
        let mut idx = vec![0usize; n];
        let mut buffer: Vec<LatticeVector> = Vec::with_capacity(n);
        loop {
            let mut weight = self.factorial[n];
            let mut j = 0;
            while j < n {
                let mut k = j + 1;
                while k < n && idx[k] == idx[j] {
                    k += 1;
                }
                weight /= self.factorial[k - j];
                j = k;
            }
            buffer.clear();
            buffer.extend(idx.iter().map(|&i| candidates[i].clone()));
            visit(weight, &buffer);

            // next nondecreasing index tuple
            let mut k = n;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if idx[k] + 1 < candidates.len() {
                    let v = idx[k] + 1;
                    for slot in idx.iter_mut().skip(k) {
                        *slot = v;
                    }
                    break;
                }
            }
        }
    }
}
