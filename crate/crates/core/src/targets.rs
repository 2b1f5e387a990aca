//! Target data for the inverse problem: prescribed one- and two-point
//! correlation data, in two equivalent parametrizations.
//!
//! `CorrelationSpec` carries the raw correlations (ρ̄₁, ρ̄₂) and
//! `ClusterSpec` the centered ones (ω̄₁, ω̄₂) with ω̄₂(x) = ρ̄₂(x) - ρ̄₁².
//! The ρ̄₂ map is sparse: a site absent from the map carries the
//! uncorrelated value ρ̄₁², so that ω̄₂ is finitely supported. At the origin
//! ρ̄₂(0) = 0 (exclusion), equivalently ω̄₂(0) = -ω̄₁²; neither is stored.
//!
//! A `ClusterSpec` also fixes the solver shape parameter r ∈ (0,1) through
//! which the admissible ball Σ|ω̄₂| ≤ r·ω̄₁² and all domain constants are
//! expressed.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;

/// One named validation check with its outcome.
#[derive(Clone, Debug)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of validating a target spec. Failures carry the violated
/// condition in `detail`.
#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(ValidationCheck { name, passed, detail });
    }

    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> String {
        if self.is_valid() {
            "all checks passed".to_string()
        } else {
            self.failures()
                .map(|c| format!("{}: {}", c.name, c.detail))
                .collect::<Vec<_>>()
                .join("; ")
        }
    }

    fn into_result(self) -> Result<ValidationReport> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::SpecValidation(self.summary()))
        }
    }
}

fn symmetrize_entries(
    dim: usize,
    entries: &[(LatticeVector, f64)],
    report: &mut ValidationReport,
) -> BTreeMap<LatticeVector, f64> {
    let mut map: BTreeMap<LatticeVector, f64> = BTreeMap::new();
    let mut sym_ok = true;
    let mut sym_detail = String::from("entries at x and -x agree");
    for (x, v) in entries {
        if x.dim() != dim {
            report.push("dimension", false, format!("entry {x} has dimension {}", x.dim()));
            continue;
        }
        if x.is_origin() {
            report.push("origin", false, "origin value is implied and must not be supplied".into());
            continue;
        }
        if !v.is_finite() {
            report.push("finite", false, format!("non-finite value {v} at {x}"));
            continue;
        }
        let key = x.canonical();
        if let Some(&prev) = map.get(&key) {
            if prev != *v {
                sym_ok = false;
                sym_detail = format!("entries at ±{key} disagree ({prev} vs {v})");
            }
        } else if *v != 0.0 {
            map.insert(key, *v);
        }
    }
    report.push("symmetric", sym_ok, sym_detail);
    map
}

/// Validate prospective cluster-spec data without constructing the spec:
/// ω̄₁ > 0, r ∈ (0,1), ω̄₂ symmetric and finite, and the admissible-ball
/// inequality Σ_{x≠0}|ω̄₂(x)| ≤ r·ω̄₁².
pub fn validate_cluster_entries(
    dim: usize,
    omega1: f64,
    omega2: &[(LatticeVector, f64)],
    r_param: f64,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    report.push(
        "omega1_positive",
        omega1.is_finite() && omega1 > 0.0,
        format!("omega1 = {omega1}"),
    );
    report.push(
        "r_in_unit_interval",
        r_param.is_finite() && 0.0 < r_param && r_param < 1.0,
        format!("r = {r_param}"),
    );
    let map = symmetrize_entries(dim, omega2, &mut report);
    if omega1.is_finite() && omega1 > 0.0 && r_param > 0.0 {
        let lhs: f64 = 2.0 * map.values().fold(0.0, |acc, v| acc + v.abs());
        let rhs = r_param * omega1 * omega1;
        report.push(
            "omega2_ball",
            lhs <= rhs,
            format!("sum |omega2| = {lhs:.6e}, r*omega1^2 = {rhs:.6e}"),
        );
    }
    report
}

/// Centered target (ω̄₁, ω̄₂, r). ω̄₂ stored on canonical representatives.
#[derive(Clone, Debug)]
pub struct ClusterSpec {
    dim: usize,
    omega1: f64,
    omega2: BTreeMap<LatticeVector, f64>,
    r_param: f64,
}

impl ClusterSpec {
    pub fn new(
        dim: usize,
        omega1: f64,
        omega2: impl IntoIterator<Item = (LatticeVector, f64)>,
        r_param: f64,
    ) -> Result<Self> {
        let entries: Vec<_> = omega2.into_iter().collect();
        validate_cluster_entries(dim, omega1, &entries, r_param).into_result()?;
        let mut report = ValidationReport::default();
        let map = symmetrize_entries(dim, &entries, &mut report);
        Ok(ClusterSpec { dim, omega1, omega2: map, r_param })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn r_param(&self) -> f64 {
        self.r_param
    }

    /// ω̄₂(x); -ω̄₁² at the origin, 0 off the stored support.
    pub fn omega2_value(&self, x: &LatticeVector) -> f64 {
        if x.is_origin() {
            return -self.omega1 * self.omega1;
        }
        self.omega2.get(&x.canonical()).copied().unwrap_or(0.0)
    }

    /// Σ_{x≠0} |ω̄₂(x)|.
    pub fn omega2_norm(&self) -> f64 {
        2.0 * self.omega2.values().fold(0.0, |acc, v| acc + v.abs())
    }

    pub fn omega2_canonical(&self) -> impl Iterator<Item = (&LatticeVector, f64)> {
        self.omega2.iter().map(|(x, &v)| (x, v))
    }

    pub fn omega2_support_radius(&self) -> i32 {
        self.omega2.keys().map(|x| x.norm_inf()).max().unwrap_or(0)
    }

    /// Re-run the validation conditions on the stored data.
    pub fn validate(&self) -> ValidationReport {
        let entries: Vec<_> = self.omega2.iter().map(|(x, &v)| (x.clone(), v)).collect();
        validate_cluster_entries(self.dim, self.omega1, &entries, self.r_param)
    }
}

/// Raw target (ρ̄₁, ρ̄₂). Sites absent from ρ̄₂ carry the uncorrelated value
/// ρ̄₁²; the origin carries 0.
#[derive(Clone, Debug)]
pub struct CorrelationSpec {
    dim: usize,
    rho1: f64,
    rho2: BTreeMap<LatticeVector, f64>,
}

impl CorrelationSpec {
    pub fn new(
        dim: usize,
        rho1: f64,
        rho2: impl IntoIterator<Item = (LatticeVector, f64)>,
    ) -> Result<Self> {
        let mut report = ValidationReport::default();
        report.push(
            "rho1_positive",
            rho1.is_finite() && rho1 > 0.0,
            format!("rho1 = {rho1}"),
        );
        let entries: Vec<_> = rho2.into_iter().collect();
        let map = symmetrize_entries(dim, &entries, &mut report);
        report.into_result()?;
        Ok(CorrelationSpec { dim, rho1, rho2: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    /// ρ̄₂(x); 0 at the origin, ρ̄₁² off the stored support.
    pub fn rho2_value(&self, x: &LatticeVector) -> f64 {
        if x.is_origin() {
            return 0.0;
        }
        self.rho2
            .get(&x.canonical())
            .copied()
            .unwrap_or(self.rho1 * self.rho1)
    }

    pub fn rho2_canonical(&self) -> impl Iterator<Item = (&LatticeVector, f64)> {
        self.rho2.iter().map(|(x, &v)| (x, v))
    }
}

/// ω̄₁ = ρ̄₁, ω̄₂(x) = ρ̄₂(x) - ρ̄₁² on the stored ρ̄₂ support (exact zeros
/// trimmed), then the cluster-spec validation is applied with the given r.
pub fn correlation_to_cluster(spec: &CorrelationSpec, r_param: f64) -> Result<ClusterSpec> {
    let sq = spec.rho1 * spec.rho1;
    let omega2: Vec<_> = spec
        .rho2
        .iter()
        .map(|(x, &v)| (x.clone(), v - sq))
        .collect();
    ClusterSpec::new(spec.dim, spec.rho1, omega2, r_param)
}

/// ρ̄₁ = ω̄₁, ρ̄₂(x) = ω̄₂(x) + ω̄₁² on the stored ω̄₂ support; off it the
/// sparse convention already encodes ρ̄₂ = ρ̄₁².
pub fn cluster_to_correlation(spec: &ClusterSpec) -> CorrelationSpec {
    let sq = spec.omega1 * spec.omega1;
    let rho2: BTreeMap<_, _> = spec
        .omega2
        .iter()
        .map(|(x, &v)| (x.clone(), v + sq))
        .filter(|(_, v)| *v != sq) // exact zeros of omega2 would be redundant
        .collect();
    CorrelationSpec { dim: spec.dim, rho1: spec.omega1, rho2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeVector as LV;

    #[test]
    fn uncorrelated_spec_centers_to_zero() {
        // ρ̄₁ = 0.01 with ρ̄₂ = ρ̄₁² everywhere off the origin: the sparse
        // convention stores nothing, and explicit entries at the
        // uncorrelated value trim to exact zeros.
        let sq = 0.01 * 0.01;
        let spec = CorrelationSpec::new(1, 0.01, [(LV::scalar(1), sq), (LV::scalar(3), sq)]).unwrap();
        let cluster = correlation_to_cluster(&spec, 0.5).unwrap();
        assert_eq!(cluster.omega2_norm(), 0.0);
        assert_eq!(cluster.omega2_value(&LV::scalar(1)), 0.0);
        assert_eq!(cluster.omega2_value(&LV::scalar(0)), -sq);
    }

    #[test]
    fn centered_spec_lifts_back() {
        // ω̄₁ = 0.01, ω̄₂ ≡ 0 → ρ̄₂ ≡ 10⁻⁴ off the origin
        let cluster = ClusterSpec::new(1, 0.01, [], 0.5).unwrap();
        let corr = cluster_to_correlation(&cluster);
        assert_eq!(corr.rho2_value(&LV::scalar(5)), 0.01 * 0.01);
        assert_eq!(corr.rho2_value(&LV::scalar(0)), 0.0);
    }

    #[test]
    fn roundtrip_is_exact() {
        let spec = CorrelationSpec::new(
            1,
            0.02,
            [(LV::scalar(1), 3.1e-4), (LV::scalar(2), 4.2e-4)],
        )
        .unwrap();
        let cluster = correlation_to_cluster(&spec, 0.9).unwrap();
        let back = cluster_to_correlation(&cluster);
        assert_eq!(back.rho1(), spec.rho1());
        for x in [LV::scalar(1), LV::scalar(2), LV::scalar(7)] {
            assert_eq!(back.rho2_value(&x), spec.rho2_value(&x));
        }
    }

    #[test]
    fn asymmetric_omega2_fails_validation() {
        let report = validate_cluster_entries(
            1,
            0.01,
            &[(LV::scalar(1), 1e-5), (LV::scalar(-1), 2e-5)],
            0.5,
        );
        assert!(!report.is_valid());
        assert!(report.failures().any(|c| c.name == "symmetric"));
    }

    #[test]
    fn ball_inequality_is_enforced() {
        // Σ|ω̄₂| = 2e-5·2 = 4e-5 > 0.5·(0.005)² = 1.25e-5
        let bad = ClusterSpec::new(1, 0.005, [(LV::scalar(1), 2e-5)], 0.5);
        assert!(matches!(bad, Err(Error::SpecValidation(_))));

        // boundary case passes: Σ|ω̄₂| = r·ω̄₁² exactly
        let z0 = 0.01_f64;
        let half = 0.5 * 0.5 * z0 * z0;
        let spec = ClusterSpec::new(1, z0, [(LV::scalar(1), -half)], 0.5).unwrap();
        assert!(spec.validate().is_valid());
    }

    #[test]
    fn r_outside_unit_interval_fails() {
        assert!(ClusterSpec::new(1, 0.01, [], 1.5).is_err());
        assert!(ClusterSpec::new(1, 0.01, [], 0.0).is_err());
        assert!(ClusterSpec::new(1, -0.01, [], 0.5).is_err());
    }
}
