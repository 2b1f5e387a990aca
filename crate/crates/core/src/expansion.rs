//! Forward cluster expansion: activity and Mayer function in, density and
//! centered pair correlation out.
//!
//! For activity z and Mayer function g the truncated expansions read
//!
//! ```text
//!   ω̄₁    = z + z²·A(z, g),       A = Σ_{n=1}^{N} zⁿ⁻¹/n! · Aₙ
//!   ω̄₂(x) = z²·g(x) + z³·B(z, g)(x),  B(x) = Σ_{n=1}^{N} zⁿ⁻¹/n! · Bₙ(x)
//! ```
//!
//! where Aₙ sums the rooted weight of one root and n floating points over
//! the lattice and Bₙ(x) does the same with x pinned next to the root. The
//! order-n coefficient of ω̄₂ vanishes beyond (n+1) interaction ranges, so
//! the pair correlation of a truncated expansion is supported on the
//! (N+1)-fold sumset of {0} ∪ supp(g), origin removed.
//!
//! Truncation order N is the only approximation: coefficients themselves
//! are summed exactly unless a finite window is requested, in which case
//! floating points are confined to that window around the cluster.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::potential::MayerFunction;
use crate::ursell::UrsellEvaluator;

pub const MAX_ORDER: usize = 12;

/// Truncation of the expansions: series order N, and optionally a window
/// radius confining the floating lattice sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationParams {
    order: usize,
    window: Option<i32>,
}

impl TruncationParams {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidParameter {
                name: "order",
                reason: format!("series order must lie in 1..={MAX_ORDER}, got {order}"),
            });
        }
        Ok(TruncationParams { order, window: None })
    }

    pub fn with_window(mut self, window: i32) -> Self {
        self.window = Some(window);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> Option<i32> {
        self.window
    }
}

/// A truncated series: its value, the per-order terms, and whether the
/// terms look divergent (two consecutive increases in magnitude).
#[derive(Clone, Debug)]
pub struct SeriesEval {
    pub value: f64,
    pub contributions: Vec<f64>,
    pub diverging: bool,
}

pub(crate) fn two_consecutive_increases(terms: &[f64]) -> bool {
    terms.windows(3).any(|w| w[1].abs() > w[0].abs() && w[2].abs() > w[1].abs())
}

fn series_coefficient(
    ev: &UrsellEvaluator,
    pinned: &[LatticeVector],
    n: usize,
    t: &TruncationParams,
) -> Result<f64> {
    let origin = LatticeVector::zero(ev.mayer().dim());
    match t.window() {
        None => Ok(ev.lattice_sum(&[origin], pinned, n)),
        Some(w) => ev.windowed_sum(&[origin], pinned, n, w),
    }
}

fn series(
    ev: &UrsellEvaluator,
    z: f64,
    pinned: &[LatticeVector],
    t: &TruncationParams,
) -> Result<SeriesEval> {
    let mut contributions = Vec::with_capacity(t.order());
    let mut value = 0.0;
    let mut z_power = 1.0; // zⁿ⁻¹
    let mut factorial = 1.0;
    for n in 1..=t.order() {
        factorial *= n as f64;
        let term = z_power / factorial * series_coefficient(ev, pinned, n, t)?;
        contributions.push(term);
        value += term;
        z_power *= z;
    }
    Ok(SeriesEval { value, diverging: two_consecutive_increases(&contributions), contributions })
}

/// A(z, g): the correction series of the density, ω̄₁ = z + z²·A.
pub fn series_a(ev: &UrsellEvaluator, z: f64, t: &TruncationParams) -> Result<SeriesEval> {
    series(ev, z, &[], t)
}

/// B(z, g)(x): the correction series of the pair correlation at lag x,
/// ω̄₂(x) = z²·g(x) + z³·B(x).
pub fn series_b(
    ev: &UrsellEvaluator,
    z: f64,
    x: &LatticeVector,
    t: &TruncationParams,
) -> Result<SeriesEval> {
    series(ev, z, std::slice::from_ref(x), t)
}

/// The k-fold sumset of {0} ∪ supp(g) with the origin removed: every lag
/// the truncated pair correlation can reach.
pub fn expansion_support(g: &MayerFunction, folds: usize) -> Vec<LatticeVector> {
    let mut supp0: Vec<LatticeVector> = g.support_points();
    supp0.push(LatticeVector::zero(g.dim()));
    let mut current: BTreeSet<LatticeVector> = supp0.iter().cloned().collect();
    for _ in 1..folds {
        let mut next = BTreeSet::new();
        for a in &current {
            for b in &supp0 {
                next.insert(a + b);
            }
        }
        current = next;
    }
    current.into_iter().filter(|p| !p.is_origin()).collect()
}

/// Output of the forward map: density, centered pair correlation, and the
/// series diagnostics behind them.
#[derive(Clone, Debug)]
pub struct ForwardResult {
    dim: usize,
    omega1: f64,
    omega2: BTreeMap<LatticeVector, f64>,
    a_value: f64,
    a_contributions: Vec<f64>,
    b_l1_contributions: Vec<f64>,
    diverging: bool,
}

impl ForwardResult {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Density ω̄₁.
    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    /// ω̄₂(x). Stored on canonical (lexicographically positive) lags; the
    /// origin returns −ω̄₁², matching the centering convention.
    pub fn omega2_value(&self, x: &LatticeVector) -> f64 {
        if x.is_origin() {
            return -self.omega1 * self.omega1;
        }
        self.omega2.get(&x.canonical()).copied().unwrap_or(0.0)
    }

    pub fn omega2_canonical(&self) -> &BTreeMap<LatticeVector, f64> {
        &self.omega2
    }

    /// Σ_{x≠0} |ω̄₂(x)|.
    pub fn omega2_norm(&self) -> f64 {
        2.0 * self.omega2.values().fold(0.0, |acc, v| acc + v.abs())
    }

    pub fn support_radius(&self) -> i32 {
        self.omega2.keys().map(|p| p.norm_inf()).max().unwrap_or(0)
    }

    /// Value of the A series and its per-order terms.
    pub fn a_value(&self) -> f64 {
        self.a_value
    }

    pub fn a_contributions(&self) -> &[f64] {
        &self.a_contributions
    }

    /// Per-order ℓ¹ mass of the B-series terms, summed over all lags.
    pub fn b_l1_contributions(&self) -> &[f64] {
        &self.b_l1_contributions
    }

    /// True when either series shows two consecutive growing terms — the
    /// truncation is then meaningless and the inputs sit outside the
    /// convergent regime.
    pub fn diverging(&self) -> bool {
        self.diverging
    }

    /// Plain correlation data: ρ̄₁ = ω̄₁ and ρ̄₂(x) = ω̄₂(x) + ω̄₁² on the
    /// canonical support.
    pub fn correlation_entries(&self) -> (f64, BTreeMap<LatticeVector, f64>) {
        let sq = self.omega1 * self.omega1;
        let rho2 = self.omega2.iter().map(|(k, v)| (k.clone(), v + sq)).collect();
        (self.omega1, rho2)
    }
}

/// Evaluate the truncated expansions at (z, g).
pub fn forward_cluster(z: f64, g: &MayerFunction, t: &TruncationParams) -> Result<ForwardResult> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "z",
            reason: format!("activity must be positive and finite, got {z}"),
        });
    }
    let ev = UrsellEvaluator::new(g)?;
    let a = series_a(&ev, z, t)?;
    let omega1 = z + z * z * a.value;
    if !omega1.is_finite() {
        return Err(Error::NonFinite { at: "omega1".into(), value: omega1 });
    }

    let mut omega2 = BTreeMap::new();
    let mut b_l1 = vec![0.0; t.order()];
    for x in expansion_support(g, t.order() + 1) {
        if !x.is_lex_positive() {
            continue;
        }
        let b = series_b(&ev, z, &x, t)?;
        let v = z * z * g.value(&x) + z * z * z * b.value;
        if !v.is_finite() {
            return Err(Error::NonFinite { at: format!("omega2({x})"), value: v });
        }
        for (slot, term) in b_l1.iter_mut().zip(&b.contributions) {
            *slot += 2.0 * term.abs();
        }
        if v != 0.0 {
            omega2.insert(x, v);
        }
    }

    let diverging = a.diverging || two_consecutive_increases(&b_l1);
    Ok(ForwardResult {
        dim: g.dim(),
        omega1,
        omega2,
        a_value: a.value,
        a_contributions: a.contributions,
        b_l1_contributions: b_l1,
        diverging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector as LV;

    fn order(n: usize) -> TruncationParams {
        TruncationParams::new(n).unwrap()
    }

    #[test]
    fn order_bounds_are_enforced() {
        assert!(TruncationParams::new(0).is_err());
        assert!(TruncationParams::new(MAX_ORDER + 1).is_err());
        assert_eq!(order(4).order(), 4);
    }

    #[test]
    fn free_gas_density_is_truncated_geometric_series() {
        let g = MayerFunction::free(1);
        let z = 0.01f64;
        let fwd = forward_cluster(z, &g, &order(4)).unwrap();
        // z + z²·A truncates z/(1+z) after the z⁵ term
        let expected = z - z.powi(2) + z.powi(3) - z.powi(4) + z.powi(5);
        assert!((fwd.omega1() - expected).abs() < 1e-16);
        assert!(fwd.omega2_canonical().is_empty());
        assert!(!fwd.diverging());
        // the correlation of the ideal gas is pure square
        assert_eq!(fwd.omega2_value(&LV::scalar(3)), 0.0);
        assert_eq!(fwd.omega2_value(&LV::scalar(0)), -fwd.omega1() * fwd.omega1());
    }

    #[test]
    fn first_order_closed_forms() {
        let g = MayerFunction::new(1, [(LV::scalar(1), -0.1)]).unwrap();
        let z = 0.05f64;
        let fwd = forward_cluster(z, &g, &order(1)).unwrap();
        // A₁ = g(−1) + g(0) + g(1) = −1.2
        assert!((fwd.a_value() + 1.2).abs() < 1e-15);
        assert!((fwd.omega1() - (z - 1.2 * z * z)).abs() < 1e-16);
        // ω̄₂(1) = z²·g(1) + z³·B₁(1) with B₁(1) = 0.42
        let expected = z * z * -0.1 + z * z * z * 0.42;
        assert!((fwd.omega2_value(&LV::scalar(1)) - expected).abs() < 1e-17);
        // order 1 reaches two interaction ranges
        assert_eq!(fwd.support_radius(), 2);
    }

    #[test]
    fn pair_correlation_is_even_and_fills_the_sumset() {
        let g = MayerFunction::new(1, [(LV::scalar(1), -0.1), (LV::scalar(2), 0.3)]).unwrap();
        let fwd = forward_cluster(0.02, &g, &order(3)).unwrap();
        for x in 1..=8 {
            let plus = fwd.omega2_value(&LV::scalar(x));
            let minus = fwd.omega2_value(&LV::scalar(-x));
            assert_eq!(plus.to_bits(), minus.to_bits());
        }
        // (N+1)-fold sumset of {0, ±1, ±2} reaches 2(N+1)
        assert_eq!(fwd.support_radius(), 8);
        assert_ne!(fwd.omega2_value(&LV::scalar(8)), 0.0);
        assert_eq!(fwd.omega2_value(&LV::scalar(9)), 0.0);
    }

    #[test]
    fn sumset_skips_unreachable_lags() {
        // interactions only at range two: odd lags never appear
        let g = MayerFunction::new(1, [(LV::scalar(2), -0.2)]).unwrap();
        let support = expansion_support(&g, 3);
        assert!(support.iter().all(|p| p.coords()[0] % 2 == 0));
        let fwd = forward_cluster(0.02, &g, &order(2)).unwrap();
        assert_eq!(fwd.omega2_value(&LV::scalar(3)), 0.0);
        assert_ne!(fwd.omega2_value(&LV::scalar(2)), 0.0);
    }

    #[test]
    fn window_at_full_reach_matches_exact_sums() {
        let g = MayerFunction::new(1, [(LV::scalar(1), -0.15), (LV::scalar(2), 0.1)]).unwrap();
        let z = 0.03;
        let n = 3usize;
        let exact = forward_cluster(z, &g, &order(n)).unwrap();
        let windowed =
            forward_cluster(z, &g, &order(n).with_window(n as i32 * 2)).unwrap();
        assert!((exact.omega1() - windowed.omega1()).abs() < 1e-15);
        for (x, v) in exact.omega2_canonical() {
            assert!((v - windowed.omega2_value(x)).abs() < 1e-15, "lag {x}");
        }
    }

    #[test]
    fn growing_terms_raise_the_divergence_flag() {
        let g = MayerFunction::free(1);
        let fwd = forward_cluster(10.0, &g, &order(4)).unwrap();
        assert!(fwd.diverging());
        // |terms| = 1, z, z², z³
        let c = fwd.a_contributions();
        assert!(c[1].abs() > c[0].abs() && c[2].abs() > c[1].abs());
    }

    #[test]
    fn nonpositive_activity_is_rejected() {
        let g = MayerFunction::free(1);
        assert!(forward_cluster(0.0, &g, &order(2)).is_err());
        assert!(forward_cluster(-0.1, &g, &order(2)).is_err());
        assert!(forward_cluster(f64::NAN, &g, &order(2)).is_err());
    }
}
