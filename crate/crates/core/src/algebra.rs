//! The sequence algebra: order-graded functionals on lattice tuples under
//! the ⋆-product, with the exponential Γ and its inverse.
//!
//! A functional ψ = (ψ₀, ψ₁, ψ₂, …) assigns a real to every m-tuple of
//! lattice points, up to a truncation order M. The product is
//!
//! ```text
//!   (ψ¹ ⋆ ψ²)(X) = Σ_{Y ⊆ X} ψ¹(Y)·ψ²(X∖Y)
//! ```
//!
//! over all 2^|X| subsequences of X (by position, order preserved). The
//! algebra ties the three function families together: Boltzmann weights
//! ψ(X) = e^{-U(X)}, Ursell functions φ = Γ⁻¹ψ, and cluster functions
//! ω = Γ⁻¹ρ. Truncation at M is exact for components of order ≤ M because
//! ⋆-powers of functionals with vanishing order-0 part raise the minimum
//! order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::potential::PairPotential;

/// Order-graded functional truncated at `max_order`, tabulated on tuples
/// drawn from a finite window of lattice points. Absent table entries read
/// as 0.
#[derive(Clone, Debug)]
pub struct SequenceFunctional {
    dim: usize,
    max_order: usize,
    window: Vec<LatticeVector>,
    order0: f64,
    // tables[m-1]: values on m-tuples, sparse
    tables: Vec<BTreeMap<Vec<LatticeVector>, f64>>,
}

impl SequenceFunctional {
    pub fn zero(dim: usize, max_order: usize, window: Vec<LatticeVector>) -> Self {
        let mut window = window;
        window.sort();
        window.dedup();
        debug_assert!(window.iter().all(|p| p.dim() == dim));
        SequenceFunctional {
            dim,
            max_order,
            window,
            order0: 0.0,
            tables: vec![BTreeMap::new(); max_order],
        }
    }

    /// The ⋆-unit 𝟏: order-0 component 1, all higher components 0.
    pub fn unit(dim: usize, max_order: usize, window: Vec<LatticeVector>) -> Self {
        let mut u = Self::zero(dim, max_order, window);
        u.order0 = 1.0;
        u
    }

    /// Tabulate `f` on every tuple over the window up to `max_order`.
    /// Exact zeros are not stored.
    pub fn from_fn(
        dim: usize,
        max_order: usize,
        window: Vec<LatticeVector>,
        order0: f64,
        mut f: impl FnMut(&[LatticeVector]) -> f64,
    ) -> Self {
        let mut out = Self::zero(dim, max_order, window);
        out.order0 = order0;
        for m in 1..=max_order {
            let mut table = BTreeMap::new();
            for tuple in Tuples::over(&out.window, m) {
                let v = f(&tuple);
                if v != 0.0 {
                    table.insert(tuple, v);
                }
            }
            out.tables[m - 1] = table;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn window(&self) -> &[LatticeVector] {
        &self.window
    }

    pub fn order0(&self) -> f64 {
        self.order0
    }

    pub fn set_order0(&mut self, v: f64) {
        self.order0 = v;
    }

    /// Set the value on one tuple. Points must lie in the window.
    pub fn set(&mut self, tuple: &[LatticeVector], v: f64) {
        assert!(tuple.len() <= self.max_order, "tuple longer than max order");
        if tuple.is_empty() {
            self.order0 = v;
            return;
        }
        assert!(
            tuple.iter().all(|p| self.window.binary_search(p).is_ok()),
            "tuple point outside the window"
        );
        let table = &mut self.tables[tuple.len() - 1];
        if v == 0.0 {
            table.remove(tuple);
        } else {
            table.insert(tuple.to_vec(), v);
        }
    }

    /// ψ(X). Components beyond the truncation order are not merely absent,
    /// they are unknown; asking for them is an error.
    pub fn value(&self, tuple: &[LatticeVector]) -> Result<f64> {
        if tuple.len() > self.max_order {
            return Err(Error::OrderOverflow {
                requested: tuple.len(),
                max_order: self.max_order,
            });
        }
        Ok(self.value_unchecked(tuple))
    }

    fn value_unchecked(&self, tuple: &[LatticeVector]) -> f64 {
        if tuple.is_empty() {
            return self.order0;
        }
        self.tables[tuple.len() - 1].get(tuple).copied().unwrap_or(0.0)
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.window != other.window {
            return Err(Error::IncompatibleFunctionals(
                "operands live on different windows".into(),
            ));
        }
        Ok(())
    }

    /// In-place self += scale·other (same window, same or smaller order).
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        self.order0 += scale * other.order0;
        for m in 1..=self.max_order.min(other.max_order) {
            for (k, v) in &other.tables[m - 1] {
                *self.tables[m - 1].entry(k.clone()).or_insert(0.0) += scale * v;
            }
        }
    }

    /// Largest absolute difference over all tabulated components (both
    /// directions), order-0 included.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = (self.order0 - other.order0).abs();
        for m in 1..=self.max_order.min(other.max_order) {
            for (k, v) in &self.tables[m - 1] {
                worst = worst.max((v - other.value_unchecked(k)).abs());
            }
            for (k, v) in &other.tables[m - 1] {
                worst = worst.max((v - self.value_unchecked(k)).abs());
            }
        }
        worst
    }
}

/// Iterator over all m-tuples (ordered, repetition allowed) from a window.
struct Tuples<'a> {
    window: &'a [LatticeVector],
    indices: Vec<usize>,
    done: bool,
}

impl<'a> Tuples<'a> {
    fn over(window: &'a [LatticeVector], m: usize) -> Self {
        Tuples { window, indices: vec![0; m], done: window.is_empty() && m > 0 }
    }
}

impl Iterator for Tuples<'_> {
    type Item = Vec<LatticeVector>;

    fn next(&mut self) -> Option<Vec<LatticeVector>> {
        if self.done {
            return None;
        }
        let tuple: Vec<LatticeVector> =
            self.indices.iter().map(|&i| self.window[i].clone()).collect();
        // odometer, last index fastest
        let mut axis = self.indices.len();
        loop {
            if axis == 0 {
                self.done = true;
                break;
            }
            axis -= 1;
            if self.indices[axis] + 1 < self.window.len() {
                self.indices[axis] += 1;
                for i in self.indices.iter_mut().skip(axis + 1) {
                    *i = 0;
                }
                break;
            }
        }
        Some(tuple)
    }
}

/// (ψ¹ ⋆ ψ²)(X) evaluated pointwise by bitmask over the 2^|X| subsequences.
/// |X| must not exceed either operand's truncation order.
pub fn star(a: &SequenceFunctional, b: &SequenceFunctional, x: &[LatticeVector]) -> Result<f64> {
    a.compatible(b)?;
    let limit = a.max_order.min(b.max_order);
    if x.len() > limit {
        return Err(Error::OrderOverflow { requested: x.len(), max_order: limit });
    }
    let n = x.len();
    let mut total = 0.0;
    let mut left: Vec<LatticeVector> = Vec::with_capacity(n);
    let mut right: Vec<LatticeVector> = Vec::with_capacity(n);
    for mask in 0..(1u32 << n) {
        left.clear();
        right.clear();
        for (j, p) in x.iter().enumerate() {
            if mask & (1 << j) != 0 {
                left.push(p.clone());
            } else {
                right.push(p.clone());
            }
        }
        total += a.value_unchecked(&left) * b.value_unchecked(&right);
    }
    Ok(total)
}

/// Full table of ψ¹ ⋆ ψ² over the common window.
pub fn star_table(a: &SequenceFunctional, b: &SequenceFunctional) -> Result<SequenceFunctional> {
    a.compatible(b)?;
    let max_order = a.max_order.min(b.max_order);
    let mut out = SequenceFunctional::zero(a.dim, max_order, a.window.clone());
    out.order0 = a.order0 * b.order0;
    for m in 1..=max_order {
        let mut table = BTreeMap::new();
        for tuple in Tuples::over(&a.window, m) {
            let v = star(a, b, &tuple)?;
            if v != 0.0 {
                table.insert(tuple, v);
            }
        }
        out.tables[m - 1] = table;
    }
    Ok(out)
}

/// Γφ = 𝟏 + φ + φ⋆φ/2! + … Requires φ₀ = 0; then the ⋆-power of index k
/// has no components below order k, so stopping at max_order is exact.
pub fn gamma(phi: &SequenceFunctional) -> Result<SequenceFunctional> {
    if phi.order0 != 0.0 {
        return Err(Error::BadUnitPart { expected: 0.0, got: phi.order0 });
    }
    let mut out = SequenceFunctional::unit(phi.dim, phi.max_order, phi.window.clone());
    let mut power = phi.clone(); // φ^⋆k
    let mut factorial = 1.0;
    for k in 1..=phi.max_order {
        factorial *= k as f64;
        out.add_scaled(&power, 1.0 / factorial);
        if k < phi.max_order {
            power = star_table(&power, phi)?;
        }
    }
    Ok(out)
}

/// Γ⁻¹ψ = φ' - φ'⋆φ'/2 + φ'⋆φ'⋆φ'/3 - … with φ' = ψ - 𝟏. Requires ψ₀ = 1.
pub fn gamma_inverse(psi: &SequenceFunctional) -> Result<SequenceFunctional> {
    if psi.order0 != 1.0 {
        return Err(Error::BadUnitPart { expected: 1.0, got: psi.order0 });
    }
    let mut phi_prime = psi.clone();
    phi_prime.order0 = 0.0;
    let mut out = SequenceFunctional::zero(psi.dim, psi.max_order, psi.window.clone());
    let mut power = phi_prime.clone();
    for k in 1..=psi.max_order {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        out.add_scaled(&power, sign / k as f64);
        if k < psi.max_order {
            power = star_table(&power, &phi_prime)?;
        }
    }
    Ok(out)
}

/// U(X) = Σ_{i<j} Φ(x_i - x_j). +∞ as soon as any pair is excluded, which
/// includes coincident points since Φ(0) = +∞. Empty and singleton tuples
/// have zero energy.
pub fn total_energy(phi: &PairPotential, x: &[LatticeVector]) -> f64 {
    let mut u = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let v = phi.value(&(&x[i] - &x[j]));
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            u += v;
        }
    }
    u
}

/// Boltzmann weight ψ(X) = e^{-U(X)}; exactly 0 on excluded configurations,
/// 1 on the empty tuple.
pub fn boltzmann(phi: &PairPotential, x: &[LatticeVector]) -> f64 {
    let u = total_energy(phi, x);
    if u == f64::INFINITY {
        0.0
    } else {
        (-u).exp()
    }
}

/// Boltzmann weights tabulated over a window, ready for Γ⁻¹.
pub fn boltzmann_functional(
    phi: &PairPotential,
    max_order: usize,
    window: Vec<LatticeVector>,
) -> SequenceFunctional {
    SequenceFunctional::from_fn(phi.dim(), max_order, window, 1.0, |x| boltzmann(phi, x))
}

/// One named identity check: largest violation found and the verdict.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub max_error: f64,
    pub passed: bool,
}

/// Quick self-test of the algebra on a pseudorandom functional: ⋆
/// commutativity, Γ∘Γ⁻¹ and Γ⁻¹∘Γ roundtrips, and the order-2 closed forms
/// (Γφ)₂ = φ₂ + φ₁φ₁ and (Γ⁻¹ρ)₂ = ρ₂ - ρ₁ρ₁. Deterministic for a fixed
/// seed. Used by the CLI `check` command; the unit tests cover the same
/// ground more thoroughly.
pub fn identity_suite(dim: usize, radius: i32, max_order: usize, seed: u64) -> Vec<IdentityCheck> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let window = crate::lattice::box_points(dim, radius);
    let tol = 1e-12;

    let phi = SequenceFunctional::from_fn(dim, max_order, window.clone(), 0.0, |_| {
        rng.gen_range(-0.5..0.5)
    });
    let mut rho = SequenceFunctional::from_fn(dim, max_order, window.clone(), 1.0, |_| {
        rng.gen_range(-0.5..0.5)
    });
    rho.set_order0(1.0);

    let mut out = Vec::new();
    let mut push = |name, max_error: f64| {
        out.push(IdentityCheck { name, max_error, passed: max_error < tol });
    };

    let psi = gamma(&phi).expect("phi has order0 = 0");
    push("gamma_inverse_of_gamma", gamma_inverse(&psi).unwrap().max_abs_diff(&phi));
    let omega = gamma_inverse(&rho).expect("rho has order0 = 1");
    push("gamma_of_gamma_inverse", gamma(&omega).unwrap().max_abs_diff(&rho));

    let mut comm_err: f64 = 0.0;
    for tuple in Tuples::over(&window, max_order.min(3)) {
        let ab = star(&phi, &rho, &tuple).unwrap();
        let ba = star(&rho, &phi, &tuple).unwrap();
        comm_err = comm_err.max((ab - ba).abs());
    }
    push("star_commutativity", comm_err);

    let mut closed_err: f64 = 0.0;
    for tuple in Tuples::over(&window, 2) {
        let lhs = psi.value(&tuple).unwrap();
        let rhs = phi.value(&tuple).unwrap()
            + phi.value(&tuple[..1]).unwrap() * phi.value(&tuple[1..]).unwrap();
        closed_err = closed_err.max((lhs - rhs).abs());
        let lhs = omega.value(&tuple).unwrap();
        let rhs = rho.value(&tuple).unwrap()
            - rho.value(&tuple[..1]).unwrap() * rho.value(&tuple[1..]).unwrap();
        closed_err = closed_err.max((lhs - rhs).abs());
    }
    push("order2_closed_forms", closed_err);

    out
}
