//! Exact finite-volume reference: grand-canonical sums over every particle
//! configuration in a small volume Λ ⊂ Zᵈ.
//!
//! The partition function and correlation functions
//!
//! ```text
//!   Ξ_Λ = Σ_{S ⊆ Λ} z^|S| e^{−U(S)},    ρ_m(x₁, …, x_m) = Ξ_Λ⁻¹ Σ_{S ⊇ {x₁,…,x_m}} z^|S| e^{−U(S)}
//! ```
//!
//! are evaluated by walking subsets in Gray-code order, so each step flips
//! one site and updates the pair energy incrementally. Hard-core (infinite)
//! pair energies are tracked as a separate exclusion counter rather than
//! folded into the accumulator, keeping the arithmetic finite. Repeated
//! arguments in ρ_m give 0 — a site holds at most one particle.
//!
//! These sums are exponential in |Λ| and serve as an independent oracle for
//! the cluster expansions; volumes are capped accordingly. Enumeration can
//! be split across threads by rank ranges; partial sums are reduced in
//! thread order, so results are reproducible for a fixed thread count.

use std::collections::HashMap;

use crate::algebra::{gamma_inverse, SequenceFunctional};
use crate::error::{Error, Result};
use crate::lattice::{box_points, LatticeVector};
use crate::potential::PairPotential;

pub const MAX_SITES: usize = 24;
const MAX_CLUSTER_TUPLES: usize = 65_536;

/// A finite set of distinct lattice sites.
#[derive(Clone, Debug)]
pub struct FiniteVolume {
    dim: usize,
    sites: Vec<LatticeVector>,
}

impl FiniteVolume {
    pub fn new(dim: usize, mut sites: Vec<LatticeVector>) -> Result<Self> {
        for s in &sites {
            s.check_dim(dim)?;
        }
        sites.sort();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter {
                name: "sites",
                reason: "volume sites must be distinct".into(),
            });
        }
        if sites.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sites",
                reason: "volume must contain at least one site".into(),
            });
        }
        if sites.len() > MAX_SITES {
            return Err(Error::VolumeTooLarge { sites: sites.len(), limit: MAX_SITES });
        }
        Ok(FiniteVolume { dim, sites })
    }

    /// The box [−k, k]^d.
    pub fn centered_box(dim: usize, k: i32) -> Result<Self> {
        Self::new(dim, box_points(dim, k))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[LatticeVector] {
        &self.sites
    }

    pub fn contains(&self, x: &LatticeVector) -> bool {
        self.sites.binary_search(x).is_ok()
    }

    fn index_of(&self, x: &LatticeVector) -> Option<usize> {
        self.sites.binary_search(x).ok()
    }
}

/// Pairwise energies of the volume, finite part and exclusion flags split.
struct PairTable {
    n: usize,
    finite: Vec<f64>,
    excluded: Vec<bool>,
}

impl PairTable {
    fn build(vol: &FiniteVolume, phi: &PairPotential) -> Self {
        let n = vol.len();
        let mut finite = vec![0.0; n * n];
        let mut excluded = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = phi.value(&(&vol.sites[i] - &vol.sites[j]));
                if v == f64::INFINITY {
                    excluded[i * n + j] = true;
                } else {
                    finite[i * n + j] = v;
                }
            }
        }
        PairTable { n, finite, excluded }
    }
}

/// Σ over subsets S of the free sites (rank range [lo, hi) in Gray order)
/// of z^{|base| + |S|} e^{−U(base ∪ S)}.
fn gray_range_sum(
    table: &PairTable,
    zpow: &[f64],
    base_mask: u32,
    free: &[usize],
    lo: u64,
    hi: u64,
) -> f64 {
    let n = table.n;
    // state at rank lo
    let gray = lo ^ (lo >> 1);
    let mut mask = base_mask;
    for (b, &site) in free.iter().enumerate() {
        if gray & (1 << b) != 0 {
            mask |= 1 << site;
        }
    }
    let mut energy = 0.0;
    let mut exclusions = 0u32;
    let mut count = mask.count_ones() as usize;
    {
        let mut rest = mask;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let mut others = rest;
            while others != 0 {
                let j = others.trailing_zeros() as usize;
                others &= others - 1;
                if table.excluded[i * n + j] {
                    exclusions += 1;
                } else {
                    energy += table.finite[i * n + j];
                }
            }
        }
    }

    let mut total = if exclusions == 0 { zpow[count] * (-energy).exp() } else { 0.0 };
    for rank in lo + 1..hi {
        let b = rank.trailing_zeros() as usize;
        let site = free[b];
        let bit = 1u32 << site;
        let adding = mask & bit == 0;
        // pair terms against everything else currently present
        let mut others = (if adding { mask } else { mask ^ bit }) & !bit;
        let mut de = 0.0;
        let mut dx = 0u32;
        while others != 0 {
            let j = others.trailing_zeros() as usize;
            others &= others - 1;
            if table.excluded[site * n + j] {
                dx += 1;
            } else {
                de += table.finite[site * n + j];
            }
        }
        if adding {
            mask |= bit;
            count += 1;
            energy += de;
            exclusions += dx;
        } else {
            mask ^= bit;
            count -= 1;
            energy -= de;
            exclusions -= dx;
        }
        if exclusions == 0 {
            total += zpow[count] * (-energy).exp();
        }
    }
    total
}

/// Σ over S ⊆ free of z^{|base ∪ S|} e^{−U(base ∪ S)}, optionally threaded.
fn constrained_sum(
    table: &PairTable,
    z: f64,
    base_mask: u32,
    free: &[usize],
    threads: usize,
) -> f64 {
    let mut zpow = vec![1.0; table.n + 1];
    for k in 1..=table.n {
        zpow[k] = zpow[k - 1] * z;
    }
    let states: u64 = 1 << free.len();
    let threads = threads.max(1).min(64).min(states as usize);
    if threads == 1 {
        return gray_range_sum(table, &zpow, base_mask, free, 0, states);
    }
    let chunk = states / threads as u64;
    let mut partials = vec![0.0; threads];
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for t in 0..threads {
            let lo = t as u64 * chunk;
            let hi = if t + 1 == threads { states } else { lo + chunk };
            let zpow = &zpow;
            handles.push(scope.spawn(move || gray_range_sum(table, zpow, base_mask, free, lo, hi)));
        }
        for (slot, handle) in partials.iter_mut().zip(handles) {
            *slot = handle.join().expect("enumeration worker panicked");
        }
    });
    partials.iter().sum()
}

/// Grand-canonical partition function Ξ_Λ(z, Φ).
pub fn partition_function(
    vol: &FiniteVolume,
    z: f64,
    phi: &PairPotential,
    threads: usize,
) -> Result<f64> {
    phi_matches(vol, phi)?;
    let table = PairTable::build(vol, phi);
    let free: Vec<usize> = (0..vol.len()).collect();
    Ok(constrained_sum(&table, z, 0, &free, threads))
}

/// Correlation function ρ_m(x₁, …, x_m) in the volume. Repeated points give
/// 0; points outside the volume are an error.
pub fn correlation_finite(
    vol: &FiniteVolume,
    z: f64,
    phi: &PairPotential,
    points: &[LatticeVector],
    threads: usize,
) -> Result<f64> {
    phi_matches(vol, phi)?;
    let mut base_mask = 0u32;
    for x in points {
        x.check_dim(vol.dim)?;
        match vol.index_of(x) {
            None => return Err(Error::OutsideVolume { x: x.to_string() }),
            Some(i) => base_mask |= 1 << i,
        }
    }
    if (base_mask.count_ones() as usize) < points.len() {
        return Ok(0.0); // a site holds at most one particle
    }
    let table = PairTable::build(vol, phi);
    let free: Vec<usize> = (0..vol.len()).filter(|i| base_mask & (1 << i) == 0).collect();
    let all: Vec<usize> = (0..vol.len()).collect();
    let restricted = constrained_sum(&table, z, base_mask, &free, threads);
    let xi = constrained_sum(&table, z, 0, &all, threads);
    Ok(restricted / xi)
}

/// Correlation functions up to order `max_m` packaged as a sequence
/// functional (unit order-0 part), Γ⁻¹ of which gives the finite-volume
/// cluster functions ω_m.
pub fn cluster_finite(
    vol: &FiniteVolume,
    z: f64,
    phi: &PairPotential,
    max_m: usize,
    threads: usize,
) -> Result<SequenceFunctional> {
    phi_matches(vol, phi)?;
    if max_m == 0 || max_m > 4 {
        return Err(Error::InvalidParameter {
            name: "max_m",
            reason: format!("correlation order must lie in 1..=4, got {max_m}"),
        });
    }
    if vol.len().pow(max_m as u32) > MAX_CLUSTER_TUPLES {
        let mut limit = 1usize;
        while (limit + 1).pow(max_m as u32) <= MAX_CLUSTER_TUPLES {
            limit += 1;
        }
        return Err(Error::VolumeTooLarge { sites: vol.len(), limit });
    }

    let table = PairTable::build(vol, phi);
    let all: Vec<usize> = (0..vol.len()).collect();
    let xi = constrained_sum(&table, z, 0, &all, threads);

    // one constrained sum per distinct site set, shared across tuples
    let mut raw: HashMap<u32, f64> = HashMap::new();
    let masks_of_size = |s: usize| -> Vec<u32> {
        let mut out = Vec::new();
        let full: u32 = if vol.len() == 32 { u32::MAX } else { (1 << vol.len()) - 1 };
        let mut m: u32 = (1 << s) - 1;
        while m <= full {
            out.push(m);
            // next bit permutation with the same popcount
            let c = m & m.wrapping_neg();
            let r = m + c;
            if r == 0 {
                break;
            }
            m = (((r ^ m) >> 2) / c) | r;
        }
        out
    };
    for s in 1..=max_m {
        for base_mask in masks_of_size(s) {
            let free: Vec<usize> =
                (0..vol.len()).filter(|i| base_mask & (1 << i) == 0).collect();
            let value = constrained_sum(&table, z, base_mask, &free, threads);
            raw.insert(base_mask, value);
        }
    }

    let rho = SequenceFunctional::from_fn(vol.dim, max_m, vol.sites.to_vec(), 1.0, |tuple| {
        let mut mask = 0u32;
        for p in tuple {
            mask |= 1 << vol.index_of(p).expect("tuple points come from the window");
        }
        if (mask.count_ones() as usize) < tuple.len() {
            return 0.0;
        }
        raw[&mask] / xi
    });
    gamma_inverse(&rho)
}

fn phi_matches(vol: &FiniteVolume, phi: &PairPotential) -> Result<()> {
    if phi.dim() != vol.dim {
        return Err(Error::DimensionMismatch { expected: vol.dim, got: phi.dim() });
    }
    Ok(())
}

/// One row of a volume sweep: box radius, site count, central density, and
/// the pair correlation at each probe (NaN when the probe is outside).
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub k: i32,
    pub sites: usize,
    pub rho1: f64,
    pub rho2: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct VolumeSweep {
    pub probes: Vec<LatticeVector>,
    pub rows: Vec<SweepRow>,
}

/// Density and pair correlation at the center of growing boxes [−k, k]^d,
/// k = 1..=k_max — the direct way to watch finite-volume values approach
/// their infinite-volume limits.
pub fn volume_sweep(
    z: f64,
    phi: &PairPotential,
    k_max: i32,
    probes: &[LatticeVector],
    threads: usize,
) -> Result<VolumeSweep> {
    if k_max < 1 {
        return Err(Error::InvalidParameter {
            name: "k_max",
            reason: format!("at least one box is required, got k_max = {k_max}"),
        });
    }
    let origin = LatticeVector::zero(phi.dim());
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let vol = FiniteVolume::centered_box(phi.dim(), k)?;
        let rho1 = correlation_finite(&vol, z, phi, &[origin.clone()], threads)?;
        let mut rho2 = Vec::with_capacity(probes.len());
        for probe in probes {
            probe.check_dim(phi.dim())?;
            if vol.contains(probe) && !probe.is_origin() {
                rho2.push(correlation_finite(
                    &vol,
                    z,
                    phi,
                    &[origin.clone(), probe.clone()],
                    threads,
                )?);
            } else {
                rho2.push(f64::NAN);
            }
        }
        rows.push(SweepRow { k, sites: vol.len(), rho1, rho2 });
    }
    Ok(VolumeSweep { probes: probes.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::total_energy;
    use crate::lattice::LatticeVector as LV;

    fn ln_potential(v: f64) -> PairPotential {
        // Φ(±1) chosen so the Boltzmann factor is exactly v
        PairPotential::new(1, [(LV::scalar(1), -v.ln())]).unwrap()
    }

    #[test]
    fn two_site_partition_function() {
        // Λ = {0, 1}: Ξ = 1 + 2z + z²e^{−Φ(1)}
        let vol = FiniteVolume::new(1, vec![LV::scalar(0), LV::scalar(1)]).unwrap();
        let phi = ln_potential(0.9);
        let xi = partition_function(&vol, 0.1, &phi, 1).unwrap();
        assert!((xi - 1.209).abs() < 1e-15);
        let rho1 = correlation_finite(&vol, 0.1, &phi, &[LV::scalar(0)], 1).unwrap();
        assert!((rho1 - 0.109 / 1.209).abs() < 1e-15);
        let rho2 =
            correlation_finite(&vol, 0.1, &phi, &[LV::scalar(0), LV::scalar(1)], 1).unwrap();
        assert!((rho2 - 0.009 / 1.209).abs() < 1e-15);
    }

    #[test]
    fn free_gas_closed_forms() {
        let phi = PairPotential::free(2);
        let vol = FiniteVolume::centered_box(2, 1).unwrap(); // 9 sites
        let z = 0.3;
        let xi = partition_function(&vol, z, &phi, 1).unwrap();
        assert!((xi - (1.0 + z).powi(9)).abs() < 1e-12 * xi);
        let occupancy = z / (1.0 + z);
        let origin = LV::zero(2);
        let e1 = LV::unit(2, 0);
        let rho1 = correlation_finite(&vol, z, &phi, &[origin.clone()], 1).unwrap();
        assert!((rho1 - occupancy).abs() < 1e-14);
        let rho2 = correlation_finite(&vol, z, &phi, &[origin, e1], 1).unwrap();
        assert!((rho2 - occupancy * occupancy).abs() < 1e-14);
    }

    #[test]
    fn hard_core_exclusion() {
        let phi = PairPotential::new(1, [(LV::scalar(1), f64::INFINITY)]).unwrap();
        let vol = FiniteVolume::new(1, vec![LV::scalar(0), LV::scalar(1)]).unwrap();
        let z = 0.5;
        let xi = partition_function(&vol, z, &phi, 1).unwrap();
        assert!((xi - (1.0 + 2.0 * z)).abs() < 1e-15);
        let rho2 = correlation_finite(&vol, z, &phi, &[LV::scalar(0), LV::scalar(1)], 1).unwrap();
        assert_eq!(rho2, 0.0);
    }

    #[test]
    fn gray_walk_matches_direct_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let phi = PairPotential::new(
            1,
            [
                (LV::scalar(1), rng.gen_range(-0.5..0.5)),
                (LV::scalar(2), rng.gen_range(-0.5..0.5)),
                (LV::scalar(3), f64::INFINITY),
            ],
        )
        .unwrap();
        let sites: Vec<LV> = (0..5).map(LV::scalar).collect();
        let vol = FiniteVolume::new(1, sites.clone()).unwrap();
        let z: f64 = 0.7;
        let mut direct = 0.0;
        for mask in 0u32..32 {
            let subset: Vec<LV> = sites
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, s)| s.clone())
                .collect();
            let u = total_energy(&phi, &subset);
            if u < f64::INFINITY {
                direct += z.powi(subset.len() as i32) * (-u).exp();
            }
        }
        let xi = partition_function(&vol, z, &phi, 1).unwrap();
        assert!((xi - direct).abs() < 1e-13 * direct.abs());
    }

    #[test]
    fn threading_is_deterministic_and_consistent() {
        let phi = ln_potential(0.8);
        let vol = FiniteVolume::centered_box(1, 5).unwrap(); // 11 sites
        let z = 0.2;
        let one = partition_function(&vol, z, &phi, 1).unwrap();
        let a = partition_function(&vol, z, &phi, 3).unwrap();
        let b = partition_function(&vol, z, &phi, 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - one).abs() < 1e-12 * one);
    }

    #[test]
    fn repeated_and_outside_points() {
        let phi = ln_potential(0.9);
        let vol = FiniteVolume::centered_box(1, 2).unwrap();
        let same = correlation_finite(&vol, 0.1, &phi, &[LV::scalar(1), LV::scalar(1)], 1).unwrap();
        assert_eq!(same, 0.0);
        let err = correlation_finite(&vol, 0.1, &phi, &[LV::scalar(7)], 1).unwrap_err();
        assert!(matches!(err, Error::OutsideVolume { .. }));
    }

    #[test]
    fn free_gas_cluster_functions_vanish() {
        let phi = PairPotential::free(1);
        let vol = FiniteVolume::centered_box(1, 3).unwrap();
        let omega = cluster_finite(&vol, 0.25, &phi, 2, 1).unwrap();
        let occupancy = 0.25 / 1.25;
        for x in vol.sites() {
            let v1 = omega.value(std::slice::from_ref(x)).unwrap();
            assert!((v1 - occupancy).abs() < 1e-14);
            for y in vol.sites() {
                let v2 = omega.value(&[x.clone(), y.clone()]).unwrap();
                if x == y {
                    // ρ₂(x,x) = 0, so ω₂(x,x) = −ρ₁²
                    assert!((v2 + occupancy * occupancy).abs() < 1e-14);
                } else {
                    assert!(v2.abs() < 1e-15, "ω₂({x},{y}) = {v2}");
                }
            }
        }
    }

    #[test]
    fn interacting_cluster_function_matches_probe_arithmetic() {
        let phi = ln_potential(0.9);
        let vol = FiniteVolume::centered_box(1, 2).unwrap();
        let z = 0.15;
        let omega = cluster_finite(&vol, z, &phi, 2, 1).unwrap();
        let origin = LV::scalar(0);
        let e1 = LV::scalar(1);
        let rho1_origin = correlation_finite(&vol, z, &phi, &[origin.clone()], 1).unwrap();
        let rho1_e1 = correlation_finite(&vol, z, &phi, &[e1.clone()], 1).unwrap();
        let rho2 = correlation_finite(&vol, z, &phi, &[origin.clone(), e1.clone()], 1).unwrap();
        let w2 = omega.value(&[origin, e1]).unwrap();
        assert!((w2 - (rho2 - rho1_origin * rho1_e1)).abs() < 1e-15);
    }

    #[test]
    fn sweep_reports_probes_and_nan_outside() {
        let phi = ln_potential(0.9);
        let probes = vec![LV::scalar(1), LV::scalar(4)];
        let sweep = volume_sweep(0.1, &phi, 3, &probes, 1).unwrap();
        assert_eq!(sweep.rows.len(), 3);
        for row in &sweep.rows {
            assert_eq!(row.sites, (2 * row.k + 1) as usize);
            assert!(row.rho1 > 0.0);
            // probe 1 sits inside every box, probe 4 outside all of them
            assert!(row.rho2[0].is_finite());
            assert!(row.rho2[1].is_nan());
        }
    }

    #[test]
    fn volume_limits() {
        assert!(matches!(
            FiniteVolume::centered_box(2, 2),
            Err(Error::VolumeTooLarge { sites: 25, limit: MAX_SITES })
        ));
        let vol = FiniteVolume::centered_box(1, 10).unwrap(); // 21 sites
        let phi = ln_potential(0.9);
        // 21⁴ tuples would be far beyond the cluster cap
        assert!(matches!(
            cluster_finite(&vol, 0.1, &phi, 4, 1),
            Err(Error::VolumeTooLarge { .. })
        ));
    }
}
