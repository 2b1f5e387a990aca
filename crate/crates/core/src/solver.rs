//! Inverse map: recover activity and interaction from correlation data.
//!
//! Given a target density ω̄₁ and centered pair correlation ω̄₂, the update
//!
//! ```text
//!   Q(z, g) = ( ω̄₁ − z²·A(z, g),  x ↦ ω̄₂(x)/z² − z·B(z, g)(x) )
//! ```
//!
//! rearranges the forward expansions so that a pair (z, g) reproducing the
//! targets is exactly a fixed point. On the domain
//!
//! ```text
//!   D = { (z, g) : a₁z₀ ≤ z ≤ a₂z₀,  ‖g‖ ≤ c },   z₀ = ω̄₁,
//!   a₁ = √(2r/(r+1)),  a₂ = 2,  c = (r+2)/3,
//! ```
//!
//! with the weighted metric ρ((z,g),(z',g')) = h|z−z'|/z₀ + ‖g−g'‖ and
//! h = 12a₂/a₁⁴, the update is a contraction for admissible targets (the
//! smallness parameter r calibrates how much correlation mass ω̄₂ may carry
//! relative to ω̄₁²). `solve` iterates Q from the natural starting point
//! (ω̄₁, ω̄₂/ω̄₁²); `verify_contraction` estimates the actual Lipschitz
//! ratio on random pairs from D.
//!
//! Iterates are trimmed: entries of g below `support_trim` are dropped,
//! which keeps the support from creeping outward through terms far below
//! the convergence tolerance while perturbing each step by less than the
//! trim times the support size.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expansion::{
    expansion_support, forward_cluster, series_a, series_b, two_consecutive_increases,
    TruncationParams,
};
use crate::lattice::{box_points, LatticeVector};
use crate::potential::{potential_from_mayer, MayerFunction, PairPotential};
use crate::targets::ClusterSpec;
use crate::ursell::UrsellEvaluator;

/// The contraction domain D and its metric weights, derived from the
/// smallness parameter r and the density scale z₀.
#[derive(Clone, Debug)]
pub struct DomainParams {
    pub r_param: f64,
    pub z0: f64,
    pub a1: f64,
    pub a2: f64,
    pub c_bound: f64,
    pub h_weight: f64,
}

pub fn make_domain(r_param: f64, z0: f64) -> Result<DomainParams> {
    if !(r_param > 0.0 && r_param < 1.0) {
        return Err(Error::InvalidParameter {
            name: "r_param",
            reason: format!("the smallness parameter must lie in (0, 1), got {r_param}"),
        });
    }
    if !(z0 > 0.0 && z0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "z0",
            reason: format!("the density scale must be positive, got {z0}"),
        });
    }
    let a1 = (2.0 * r_param / (r_param + 1.0)).sqrt();
    let a2 = 2.0;
    Ok(DomainParams {
        r_param,
        z0,
        a1,
        a2,
        c_bound: (r_param + 2.0) / 3.0,
        h_weight: 12.0 * a2 / a1.powi(4),
    })
}

/// One iterate of the inverse map: an activity and a Mayer function.
#[derive(Clone, Debug)]
pub struct SolverPoint {
    pub z: f64,
    pub g: MayerFunction,
}

impl DomainParams {
    pub fn contains(&self, p: &SolverPoint) -> bool {
        p.z.is_finite()
            && p.z >= self.a1 * self.z0
            && p.z <= self.a2 * self.z0
            && p.g.norm() <= self.c_bound
    }

    /// ρ(p, p') = h·|z − z'|/z₀ + ‖g − g'‖.
    pub fn metric(&self, p: &SolverPoint, q: &SolverPoint) -> f64 {
        self.h_weight * (p.z - q.z).abs() / self.z0 + p.g.l1_distance(&q.g)
    }

    /// Beyond the domain but within 5%: expected transiently for starting
    /// points near the boundary, fatal otherwise.
    fn is_marginal(&self, p: &SolverPoint) -> bool {
        p.z.is_finite()
            && p.z >= self.a1 * self.z0 / 1.05
            && p.z <= self.a2 * self.z0 * 1.05
            && p.g.norm() <= self.c_bound * 1.05
    }
}

/// Q applied once, with the divergence diagnostics of the series behind it.
#[derive(Clone, Debug)]
pub struct QImage {
    pub point: SolverPoint,
    pub diverging: bool,
}

pub fn apply_q(p: &SolverPoint, spec: &ClusterSpec, t: &TruncationParams) -> Result<QImage> {
    if p.g.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: p.g.dim() });
    }
    if !(p.z.is_finite() && p.z > 0.0) {
        return Err(Error::Diverged {
            iteration: 0,
            reason: format!("activity left (0, ∞): z = {}", p.z),
        });
    }
    let ev = UrsellEvaluator::new(&p.g)?;
    let a = series_a(&ev, p.z, t)?;
    let z_next = spec.omega1() - p.z * p.z * a.value;
    if !(z_next.is_finite() && z_next > 0.0) {
        return Err(Error::Diverged {
            iteration: 0,
            reason: format!("updated activity is not positive: {z_next}"),
        });
    }

    // g' lives on the target support joined with everything the current
    // correction series can reach
    let mut lags: BTreeSet<LatticeVector> =
        spec.omega2_canonical().map(|(x, _)| x.clone()).collect();
    for x in expansion_support(&p.g, t.order() + 1) {
        if x.is_lex_positive() {
            lags.insert(x);
        }
    }
    let z_sq = p.z * p.z;
    let mut b_l1 = vec![0.0; t.order()];
    let mut entries = Vec::with_capacity(lags.len());
    for x in lags {
        let b = series_b(&ev, p.z, &x, t)?;
        let v = spec.omega2_value(&x) / z_sq - p.z * b.value;
        if !v.is_finite() {
            return Err(Error::Diverged {
                iteration: 0,
                reason: format!("updated interaction is not finite at {x}"),
            });
        }
        for (slot, term) in b_l1.iter_mut().zip(&b.contributions) {
            *slot += 2.0 * term.abs();
        }
        entries.push((x, v));
    }
    let g_next = MayerFunction::new(spec.dim(), entries)?;
    let diverging = a.diverging || two_consecutive_increases(&b_l1);
    Ok(QImage { point: SolverPoint { z: z_next, g: g_next }, diverging })
}

/// Convergence policy of the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Stop once the metric step falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterate entries of g smaller than this are dropped.
    pub support_trim: f64,
    /// Starting point; defaults to (ω̄₁, ω̄₂/ω̄₁²).
    pub start: Option<SolverPoint>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 100, support_trim: 1e-14, start: None }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: SolverPoint,
    /// The pair potential of the recovered Mayer function.
    pub potential: PairPotential,
    pub iterations: usize,
    pub final_step: f64,
    /// Ratio of successive step sizes, one entry per iteration after the
    /// first — a running estimate of the contraction factor.
    pub contraction_estimates: Vec<f64>,
    /// Forward defect of the solution under the same truncation, in metric
    /// units: h·|ω̄₁ defect|/z₀ + Σ|ω̄₂ defect|.
    pub residual: f64,
    /// Iterates that stepped at most 5% outside the domain and were allowed
    /// to continue.
    pub escaped_marginal: usize,
    pub diverging: bool,
}

fn trim_mayer(g: &MayerFunction, trim: f64) -> MayerFunction {
    let kept: Vec<(LatticeVector, f64)> = g
        .canonical_entries()
        .filter(|(_, v)| v.abs() >= trim)
        .map(|(x, v)| (x.clone(), v))
        .collect();
    MayerFunction::new(g.dim(), kept).expect("filtered entries stay valid")
}

fn default_start(spec: &ClusterSpec) -> Result<SolverPoint> {
    let z0 = spec.omega1();
    let entries: Vec<(LatticeVector, f64)> =
        spec.omega2_canonical().map(|(x, v)| (x.clone(), v / (z0 * z0))).collect();
    Ok(SolverPoint { z: z0, g: MayerFunction::new(spec.dim(), entries)? })
}

/// Iterate Q from the natural starting point until the step falls below
/// tolerance. Errors on divergence, hard domain escape, or running out of
/// iterations.
pub fn solve(spec: &ClusterSpec, t: &TruncationParams, opts: &SolveOptions) -> Result<SolveReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("tolerance must be positive, got {}", opts.tol),
        });
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidParameter {
            name: "max_iter",
            reason: "at least one iteration is required".into(),
        });
    }
    let domain = make_domain(spec.r_param(), spec.omega1())?;
    let mut current = match &opts.start {
        Some(p) => p.clone(),
        None => default_start(spec)?,
    };
    let mut contraction_estimates = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut escaped_marginal = 0usize;
    let mut diverging = false;

    for it in 1..=opts.max_iter {
        let q = apply_q(&current, spec, t).map_err(|e| match e {
            Error::Diverged { reason, .. } => Error::Diverged { iteration: it, reason },
            other => other,
        })?;
        diverging |= q.diverging;
        let next = SolverPoint { z: q.point.z, g: trim_mayer(&q.point.g, opts.support_trim) };
        let step = domain.metric(&current, &next);
        if let Some(prev) = prev_step {
            if prev > 0.0 {
                contraction_estimates.push(step / prev);
            }
        }
        prev_step = Some(step);

        if !domain.contains(&next) {
            if domain.is_marginal(&next) {
                escaped_marginal += 1;
            } else {
                return Err(Error::Diverged {
                    iteration: it,
                    reason: format!(
                        "iterate left the domain: z = {:.6e}, ‖g‖ = {:.6e} (bounds z ∈ [{:.6e}, {:.6e}], ‖g‖ ≤ {:.6e})",
                        next.z,
                        next.g.norm(),
                        domain.a1 * domain.z0,
                        domain.a2 * domain.z0,
                        domain.c_bound
                    ),
                });
            }
        }
        current = next;

        if step < opts.tol {
            let fwd = forward_cluster(current.z, &current.g, t)?;
            let mut residual =
                domain.h_weight * (fwd.omega1() - spec.omega1()).abs() / domain.z0;
            let mut union: BTreeSet<LatticeVector> =
                spec.omega2_canonical().map(|(x, _)| x.clone()).collect();
            union.extend(fwd.omega2_canonical().keys().cloned());
            for x in &union {
                residual += 2.0 * (fwd.omega2_value(x) - spec.omega2_value(x)).abs();
            }
            let potential = potential_from_mayer(&current.g)?;
            return Ok(SolveReport {
                solution: current,
                potential,
                iterations: it,
                final_step: step,
                contraction_estimates,
                residual,
                escaped_marginal,
                diverging,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        final_step: prev_step.unwrap_or(f64::INFINITY),
        tol: opts.tol,
    })
}

/// How to sample random pairs from D for a contraction check.
#[derive(Clone, Debug)]
pub struct SamplingParams {
    pub samples: usize,
    /// Mayer functions are drawn on this support box.
    pub support_radius: i32,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ContractionReport {
    /// Pairs that actually contributed a ratio (nondegenerate distance).
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub all_images_in_domain: bool,
    pub escapes: usize,
    pub diverging: bool,
}

fn random_point(
    rng: &mut ChaCha8Rng,
    domain: &DomainParams,
    pool: &[LatticeVector],
    dim: usize,
) -> Result<SolverPoint> {
    let z = rng.gen_range(domain.a1 * domain.z0..=domain.a2 * domain.z0);
    let target_norm = rng.gen_range(0.0..=domain.c_bound);
    let raw: Vec<f64> = pool.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    let total: f64 = 2.0 * raw.iter().map(|v| v.abs()).sum::<f64>();
    let scale = if total > 0.0 { target_norm / total } else { 0.0 };
    let entries: Vec<(LatticeVector, f64)> =
        pool.iter().cloned().zip(raw.iter().map(|v| v * scale)).collect();
    Ok(SolverPoint { z, g: MayerFunction::new(dim, entries)? })
}

/// Apply Q to seeded random pairs from D and report the worst observed
/// Lipschitz ratio and any images that left the domain.
pub fn verify_contraction(
    spec: &ClusterSpec,
    t: &TruncationParams,
    sampling: &SamplingParams,
) -> Result<ContractionReport> {
    if sampling.samples == 0 || sampling.support_radius < 1 {
        return Err(Error::InvalidParameter {
            name: "sampling",
            reason: "need at least one sample and a positive support radius".into(),
        });
    }
    let domain = make_domain(spec.r_param(), spec.omega1())?;
    let dim = spec.dim();
    let pool: Vec<LatticeVector> = box_points(dim, sampling.support_radius)
        .into_iter()
        .filter(|p| p.is_lex_positive())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);

    let mut used = 0usize;
    let mut max_ratio = 0.0f64;
    let mut ratio_sum = 0.0f64;
    let mut escapes = 0usize;
    let mut diverging = false;
    for _ in 0..sampling.samples {
        let p1 = random_point(&mut rng, &domain, &pool, dim)?;
        let p2 = random_point(&mut rng, &domain, &pool, dim)?;
        let q1 = apply_q(&p1, spec, t)?;
        let q2 = apply_q(&p2, spec, t)?;
        diverging |= q1.diverging || q2.diverging;
        for q in [&q1, &q2] {
            if !domain.contains(&q.point) {
                escapes += 1;
            }
        }
        let distance = domain.metric(&p1, &p2);
        if distance > 1e-12 {
            let ratio = domain.metric(&q1.point, &q2.point) / distance;
            max_ratio = max_ratio.max(ratio);
            ratio_sum += ratio;
            used += 1;
        }
    }
    Ok(ContractionReport {
        samples: used,
        max_ratio,
        mean_ratio: if used > 0 { ratio_sum / used as f64 } else { 0.0 },
        all_images_in_domain: escapes == 0,
        escapes,
        diverging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector as LV;

    #[test]
    fn domain_reference_values() {
        let d = make_domain(0.5, 0.01).unwrap();
        assert!((d.a1 - 0.816_496_580_927_726).abs() < 1e-15);
        assert!((d.c_bound - 5.0 / 6.0).abs() < 1e-15);
        assert!((d.h_weight - 54.0).abs() < 1e-12);
        // h = 24/a₁⁴ = 24·((r+1)/2r)²
        let d = make_domain(0.08, 0.01).unwrap();
        assert!((d.h_weight - 1093.5).abs() < 1e-9);
        assert!(make_domain(0.0, 0.01).is_err());
        assert!(make_domain(1.0, 0.01).is_err());
        assert!(make_domain(0.5, 0.0).is_err());
    }

    #[test]
    fn membership_is_closed_at_the_boundary() {
        let d = make_domain(0.5, 0.01).unwrap();
        let boundary_g = MayerFunction::new(1, [(LV::scalar(1), -5.0 / 12.0)]).unwrap();
        assert!((boundary_g.norm() - d.c_bound).abs() < 1e-15);
        assert!(d.contains(&SolverPoint { z: d.a1 * d.z0, g: boundary_g.clone() }));
        assert!(d.contains(&SolverPoint { z: d.a2 * d.z0, g: MayerFunction::free(1) }));
        assert!(!d.contains(&SolverPoint { z: d.a1 * d.z0 * 0.999, g: MayerFunction::free(1) }));
        let heavy = MayerFunction::new(1, [(LV::scalar(1), -0.42)]).unwrap();
        assert!(!d.contains(&SolverPoint { z: 0.015, g: heavy }));
    }

    #[test]
    fn metric_hand_value() {
        let d = make_domain(0.5, 0.01).unwrap();
        let p1 = SolverPoint {
            z: 0.012,
            g: MayerFunction::new(1, [(LV::scalar(1), -0.10)]).unwrap(),
        };
        let p2 = SolverPoint {
            z: 0.011,
            g: MayerFunction::new(1, [(LV::scalar(1), -0.08), (LV::scalar(2), 0.01)]).unwrap(),
        };
        // 54·0.001/0.01 + (2·0.02 + 2·0.01)
        assert!((d.metric(&p1, &p2) - 5.46).abs() < 1e-12);
        assert_eq!(d.metric(&p1, &p1), 0.0);
    }

    #[test]
    fn free_gas_inverse_recovers_activity() {
        let spec = ClusterSpec::new(1, 0.01, [], 0.5).unwrap();
        let t = TruncationParams::new(4).unwrap();
        let report = solve(&spec, &t, &SolveOptions::default()).unwrap();
        // truncated inverse of ω̄₁ = z/(1+z) + O(z⁶)
        assert!((report.solution.z - 0.01 / 0.99).abs() < 1e-8);
        assert!(report.solution.g.is_free());
        assert!(report.potential.support_radius() == 0);
        assert!(report.iterations <= 40);
        assert!(report.residual < 1e-9);
        assert!(!report.diverging);
        assert_eq!(report.escaped_marginal, 0);
    }

    #[test]
    fn roundtrip_recovers_the_generating_pair() {
        let z_star = 0.02;
        let g_star = MayerFunction::new(1, [(LV::scalar(1), -0.05)]).unwrap();
        let t = TruncationParams::new(3).unwrap();
        let fwd = forward_cluster(z_star, &g_star, &t).unwrap();
        let spec = ClusterSpec::new(
            1,
            fwd.omega1(),
            fwd.omega2_canonical().iter().map(|(x, &v)| (x.clone(), v)),
            0.5,
        )
        .unwrap();
        let report = solve(&spec, &t, &SolveOptions::default()).unwrap();
        assert!(
            (report.solution.z - z_star).abs() < 1e-8,
            "z = {} vs {z_star}",
            report.solution.z
        );
        assert!(report.solution.g.l1_distance(&g_star) < 1e-8);
        assert!(report.iterations <= 40);
        assert!(report.final_step < 1e-10);
    }

    #[test]
    fn iteration_budget_is_enforced() {
        let spec = ClusterSpec::new(1, 0.01, [], 0.5).unwrap();
        let t = TruncationParams::new(3).unwrap();
        let opts = SolveOptions { tol: 1e-300, max_iter: 3, ..SolveOptions::default() };
        let err = solve(&spec, &t, &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));
    }

    #[test]
    fn contraction_sampling_is_deterministic() {
        let z0 = 0.004;
        let spec =
            ClusterSpec::new(1, z0, [(LV::scalar(1), -0.4 * 0.5 * z0 * z0)], 0.5).unwrap();
        let t = TruncationParams::new(2).unwrap();
        let sampling = SamplingParams { samples: 5, support_radius: 2, seed: 11 };
        let a = verify_contraction(&spec, &t, &sampling).unwrap();
        let b = verify_contraction(&spec, &t, &sampling).unwrap();
        assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
        assert_eq!(a.samples, 5);
        assert!(a.max_ratio < 1.0, "ratio {}", a.max_ratio);
        assert!(a.all_images_in_domain);
        assert!(!a.diverging);
    }
}
