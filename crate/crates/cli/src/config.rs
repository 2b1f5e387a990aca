//! Run configuration: defaults, overlaid by an optional JSON config file,
//! overlaid by command-line flags. The fully resolved config is echoed into
//! report.json, and that echo parses back as a config file, so any run can
//! be reproduced from its own report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Map, Value};

use gibbs_inverse_core::{
    correlation_to_cluster, mayer_from_potential, potential_from_mayer, ClusterSpec,
    CorrelationSpec, LatticeVector, MayerFunction, PairPotential,
};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Forward,
    Invert,
    Oracle,
    Roundtrip,
    Check,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Forward => "forward",
            CommandKind::Invert => "invert",
            CommandKind::Oracle => "oracle",
            CommandKind::Roundtrip => "roundtrip",
            CommandKind::Check => "check",
        }
    }

    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "forward" => Ok(CommandKind::Forward),
            "invert" => Ok(CommandKind::Invert),
            "oracle" => Ok(CommandKind::Oracle),
            "roundtrip" => Ok(CommandKind::Roundtrip),
            "check" => Ok(CommandKind::Check),
            other => Err(CliError::config(format!(
                "command: unknown value {other:?} (expected forward, invert, oracle, roundtrip, or check)"
            ))),
        }
    }
}

/// A potential/target field in a config file: either a path to another JSON
/// file or the object inlined (the form the report echo uses).
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Source {
    Path(PathBuf),
    Inline(Value),
}

/// The raw, partial config as read from a file. Unknown fields are ignored
/// so a whole report.json body also parses.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct FileConfig {
    pub command: Option<String>,
    pub dim: Option<usize>,
    pub order: Option<usize>,
    pub radius: Option<i32>,
    pub z: Option<f64>,
    pub r: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub k_max: Option<usize>,
    pub threads: Option<usize>,
    pub potential: Option<Source>,
    pub target: Option<Source>,
    pub out: Option<PathBuf>,
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("config {}: not valid JSON: {e}", path.display())))?;
    // a report.json carries the config under its "config" member
    let body = match value.get("config") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(body)
        .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
}

/// Flag values as collected by clap; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct FlagConfig {
    pub dim: Option<usize>,
    pub order: Option<usize>,
    pub radius: Option<i32>,
    pub z: Option<f64>,
    pub r: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub k_max: Option<usize>,
    pub threads: Option<usize>,
    pub potential: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// An interaction as parsed from JSON, kept in both forms.
#[derive(Clone, Debug)]
pub struct PotentialData {
    pub potential: PairPotential,
    pub mayer: MayerFunction,
}

/// Everything a command needs, fully resolved and validated.
#[derive(Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub dim: usize,
    pub order: usize,
    pub radius: Option<i32>,
    pub z: Option<f64>,
    pub r: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub k_max: usize,
    pub threads: usize,
    pub potential: Option<PotentialData>,
    pub target: Option<ClusterSpec>,
    pub out: PathBuf,
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("GIBBS_INVERSE_THREADS") {
        Ok(s) => {
            let n: usize = s.parse().map_err(|_| {
                CliError::config(format!(
                    "GIBBS_INVERSE_THREADS: expected a positive integer, got {s:?}"
                ))
            })?;
            if n == 0 {
                return Err(CliError::config(
                    "GIBBS_INVERSE_THREADS: must be at least 1".into(),
                ));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load_source(src: &Source, what: &str) -> Result<Value, CliError> {
    match src {
        Source::Inline(v) => Ok(v.clone()),
        Source::Path(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::io(format!("{what} {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::config(format!("{what} {}: not valid JSON: {e}", p.display()))
            })
        }
    }
}

fn parse_coord_key(dim: usize, key: &str, field: &str) -> Result<LatticeVector, CliError> {
    let coords: Result<Vec<i32>, _> = key.split(',').map(|c| c.trim().parse::<i32>()).collect();
    let coords = coords.map_err(|_| {
        CliError::config(format!(
            "{field}: key {key:?} is not a comma-joined integer coordinate"
        ))
    })?;
    if coords.len() != dim {
        return Err(CliError::config(format!(
            "{field}: key {key:?} has {} coordinates, but the file declares dim = {dim}",
            coords.len()
        )));
    }
    Ok(LatticeVector::new(coords))
}

/// Numeric JSON value, with the string "inf" allowed when `allow_inf` is set
/// (hard-core potential entries; JSON itself has no infinity literal).
fn parse_entry_value(v: &Value, allow_inf: bool, field: &str) -> Result<f64, CliError> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| CliError::config(format!("{field}: {n} does not fit a float"))),
        Value::String(s) if allow_inf && s == "inf" => Ok(f64::INFINITY),
        other => Err(CliError::config(format!(
            "{field}: expected a number{}, got {other}",
            if allow_inf { " or \"inf\"" } else { "" }
        ))),
    }
}

fn parse_entry_map(
    dim: usize,
    map: &Map<String, Value>,
    allow_inf: bool,
    field: &str,
) -> Result<Vec<(LatticeVector, f64)>, CliError> {
    map.iter()
        .map(|(k, v)| {
            Ok((
                parse_coord_key(dim, k, field)?,
                parse_entry_value(v, allow_inf, field)?,
            ))
        })
        .collect()
}

fn require_dim(value: &Value, what: &str) -> Result<usize, CliError> {
    value
        .get("dim")
        .and_then(Value::as_u64)
        .map(|d| d as usize)
        .ok_or_else(|| CliError::config(format!("{what}: missing positive integer field \"dim\"")))
}

fn object_field<'v>(
    value: &'v Value,
    name: &str,
    what: &str,
) -> Result<Option<&'v Map<String, Value>>, CliError> {
    match value.get(name) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Object(map)) => Ok(Some(map)),
        Some(other) => Err(CliError::config(format!(
            "{what}: field \"{name}\" must be an object of coordinate keys, got {other}"
        ))),
    }
}

/// Parse {"dim", "phi" and/or "g"}. With both present (the form the report
/// echo writes) each is kept verbatim — g drives the computation, phi the
/// potential tables — after checking they agree to 1e-12; deriving one from
/// the other would shift the last bits and break bit-exact reproduction.
pub fn load_potential(value: &Value) -> Result<PotentialData, CliError> {
    let what = "potential";
    let dim = require_dim(value, what)?;
    let phi_map = object_field(value, "phi", what)?;
    let g_map = object_field(value, "g", what)?;
    match (phi_map, g_map) {
        (Some(phi), Some(g)) => {
            let entries = parse_entry_map(dim, phi, true, "potential.phi")?;
            let potential = PairPotential::new(dim, entries).map_err(CliError::from_validation)?;
            let entries = parse_entry_map(dim, g, false, "potential.g")?;
            let mayer = MayerFunction::new(dim, entries).map_err(CliError::from_validation)?;
            let derived = mayer_from_potential(&potential);
            if derived.l1_distance(&mayer) > 1e-12 {
                return Err(CliError::config(format!(
                    "potential: \"g\" disagrees with e^(-phi) - 1 by {:.3e}; give one of the \
                     two, or fix whichever was edited",
                    derived.l1_distance(&mayer)
                )));
            }
            Ok(PotentialData { potential, mayer })
        }
        (Some(phi), None) => {
            let entries = parse_entry_map(dim, phi, true, "potential.phi")?;
            let potential = PairPotential::new(dim, entries).map_err(CliError::from_validation)?;
            let mayer = mayer_from_potential(&potential);
            Ok(PotentialData { potential, mayer })
        }
        (None, Some(g)) => {
            let entries = parse_entry_map(dim, g, false, "potential.g")?;
            let mayer = MayerFunction::new(dim, entries).map_err(CliError::from_validation)?;
            let potential = potential_from_mayer(&mayer).map_err(CliError::from_validation)?;
            Ok(PotentialData { potential, mayer })
        }
        (None, None) => Err(CliError::config(
            "potential: give \"phi\" (string \"inf\" allowed) or \"g\"".into(),
        )),
    }
}

/// Parse {"dim", "omega1" or "rho1", "omega2" or "rho2"} into a validated
/// cluster target. The density slots are the same quantity (ω̄₁ = ρ̄₁), so
/// either name works; the pair slots differ by the ρ̄₁² baseline.
pub fn load_target(value: &Value, r_param: f64) -> Result<ClusterSpec, CliError> {
    let what = "target";
    let dim = require_dim(value, what)?;
    let omega1 = value.get("omega1").map(|v| parse_entry_value(v, false, "target.omega1"));
    let rho1 = value.get("rho1").map(|v| parse_entry_value(v, false, "target.rho1"));
    let density = match (omega1, rho1) {
        (Some(a), Some(b)) => {
            let (a, b) = (a?, b?);
            if a != b {
                return Err(CliError::config(format!(
                    "target: omega1 = {a} and rho1 = {b} name the same density and must agree"
                )));
            }
            a
        }
        (Some(a), None) => a?,
        (None, Some(b)) => b?,
        (None, None) => {
            return Err(CliError::config(
                "target: missing density field \"omega1\" (or \"rho1\")".into(),
            ))
        }
    };
    let omega2 = object_field(value, "omega2", what)?;
    let rho2 = object_field(value, "rho2", what)?;
    match (omega2, rho2) {
        (Some(_), Some(_)) => Err(CliError::config(
            "target: give \"omega2\" or \"rho2\", not both".into(),
        )),
        (Some(map), None) => {
            let entries = parse_entry_map(dim, map, false, "target.omega2")?;
            ClusterSpec::new(dim, density, entries, r_param).map_err(CliError::from_validation)
        }
        (None, Some(map)) => {
            let entries = parse_entry_map(dim, map, false, "target.rho2")?;
            let corr = CorrelationSpec::new(dim, density, entries)
                .map_err(CliError::from_validation)?;
            correlation_to_cluster(&corr, r_param).map_err(CliError::from_validation)
        }
        (None, None) => {
            // a bare density is a legal target: uncorrelated pair data
            ClusterSpec::new(dim, density, [], r_param).map_err(CliError::from_validation)
        }
    }
}

fn entry_map_json(entries: impl Iterator<Item = (LatticeVector, f64)>) -> Value {
    let map: BTreeMap<String, Value> = entries
        .map(|(x, v)| {
            let val = if v == f64::INFINITY {
                Value::String("inf".into())
            } else {
                json!(v)
            };
            (x.to_string(), val)
        })
        .collect();
    json!(map)
}

pub fn potential_json(data: &PotentialData) -> Value {
    json!({
        "dim": data.potential.dim(),
        "phi": entry_map_json(data.potential.canonical_entries().map(|(x, v)| (x.clone(), v))),
        "g": entry_map_json(data.mayer.canonical_entries().map(|(x, v)| (x.clone(), v))),
    })
}

pub fn target_json(spec: &ClusterSpec) -> Value {
    json!({
        "dim": spec.dim(),
        "omega1": spec.omega1(),
        "omega2": entry_map_json(spec.omega2_canonical().map(|(x, v)| (x.clone(), v))),
    })
}

/// Resolve defaults → config file → flags, load input files, and validate
/// what the command requires.
pub fn resolve(
    command: Option<&str>,
    file: FileConfig,
    flags: FlagConfig,
) -> Result<RunConfig, CliError> {
    let command = match (command, &file.command) {
        (Some(name), _) => CommandKind::parse(name)?,
        (None, Some(name)) => CommandKind::parse(name)?,
        (None, None) => {
            return Err(CliError::config(
                "command: give a subcommand or a config file with a \"command\" field".into(),
            ))
        }
    };

    let order = flags.order.or(file.order).unwrap_or(4);
    let radius = flags.radius.or(file.radius);
    let z = flags.z.or(file.z);
    let r = flags.r.or(file.r);
    let tol = flags.tol.or(file.tol).unwrap_or(1e-10);
    let max_iter = flags.max_iter.or(file.max_iter).unwrap_or(100);
    let k_max = flags.k_max.or(file.k_max).unwrap_or(4);
    let threads = match flags.threads.or(file.threads) {
        Some(n) => n,
        None => threads_from_env()?.unwrap_or(1),
    };
    let out = flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("."));

    // positivity checks, named per field
    if threads == 0 {
        return Err(CliError::config("threads: must be at least 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::config(format!("tol: must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(CliError::config("max-iter: must be at least 1".into()));
    }
    if k_max == 0 {
        return Err(CliError::config("k-max: must be at least 1".into()));
    }
    if let Some(z) = z {
        if !(z > 0.0 && z.is_finite()) {
            return Err(CliError::config(format!("z: must be positive, got {z}")));
        }
    }
    if let Some(r) = r {
        if !(r > 0.0 && r < 1.0) {
            return Err(CliError::config(format!("r: must lie in (0, 1), got {r}")));
        }
    }
    if let Some(w) = radius {
        if w < 1 {
            return Err(CliError::config(format!("radius: must be at least 1, got {w}")));
        }
    }

    let needs_potential = matches!(
        command,
        CommandKind::Forward | CommandKind::Oracle | CommandKind::Roundtrip
    );
    let needs_z = needs_potential;
    let needs_r = matches!(
        command,
        CommandKind::Invert | CommandKind::Roundtrip | CommandKind::Check
    );
    let needs_target = command == CommandKind::Invert;

    if needs_z && z.is_none() {
        return Err(CliError::config(format!(
            "z: required for `{}`",
            command.name()
        )));
    }
    let r = if needs_r && r.is_none() {
        if command == CommandKind::Check {
            Some(0.5)
        } else {
            return Err(CliError::config(format!(
                "r: required for `{}`",
                command.name()
            )));
        }
    } else {
        r
    };

    let potential_src = flags.potential.map(Source::Path).or(file.potential);
    let potential = match potential_src {
        Some(src) => Some(load_potential(&load_source(&src, "potential")?)?),
        None if needs_potential => {
            return Err(CliError::config(format!(
                "potential: required for `{}`",
                command.name()
            )))
        }
        None => None,
    };

    let target_src = flags.target.map(Source::Path).or(file.target);
    let target = match target_src {
        Some(src) => {
            let r = r.ok_or_else(|| {
                CliError::config("r: required whenever a target is given".into())
            })?;
            Some(load_target(&load_source(&src, "target")?, r)?)
        }
        None if needs_target => {
            return Err(CliError::config(format!(
                "target: required for `{}`",
                command.name()
            )))
        }
        None => None,
    };

    // dimension: files are authoritative, the flag must agree when present
    let file_dim = potential
        .as_ref()
        .map(|p| p.potential.dim())
        .or_else(|| target.as_ref().map(|t| t.dim()));
    let dim = match (flags.dim.or(file.dim), file_dim) {
        (Some(flag), Some(file)) if flag != file => {
            return Err(CliError::config(format!(
                "dim: flag says {flag} but the input files carry dim = {file}"
            )))
        }
        (d, f) => f.or(d).unwrap_or(1),
    };
    if !(1..=4).contains(&dim) {
        return Err(CliError::config(format!(
            "dim: supported range is 1..=4, got {dim}"
        )));
    }
    if let (Some(p), Some(t)) = (&potential, &target) {
        if p.potential.dim() != t.dim() {
            return Err(CliError::config(format!(
                "dim: potential has dim {} but target has dim {}",
                p.potential.dim(),
                t.dim()
            )));
        }
    }

    Ok(RunConfig {
        command,
        dim,
        order,
        radius,
        z,
        r,
        tol,
        max_iter,
        k_max,
        threads,
        potential,
        target,
        out,
    })
}

impl RunConfig {
    /// The exact JSON echoed under "config" in report.json; parsing it back
    /// reproduces this RunConfig.
    pub fn echo(&self) -> Value {
        json!({
            "command": self.command.name(),
            "dim": self.dim,
            "order": self.order,
            "radius": self.radius,
            "z": self.z,
            "r": self.r,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "k_max": self.k_max,
            "threads": self.threads,
            "potential": self.potential.as_ref().map(potential_json),
            "target": self.target.as_ref().map(target_json),
            "out": self.out.to_string_lossy(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_keys_parse_and_reject_wrong_arity() {
        let x = parse_coord_key(2, "3,-4", "t").unwrap();
        assert_eq!(x.coords(), &[3, -4]);
        assert!(parse_coord_key(1, "3,-4", "t").is_err());
        assert!(parse_coord_key(1, "east", "t").is_err());
    }

    #[test]
    fn hard_core_entries_spell_infinity_as_a_string() {
        let v = parse_entry_value(&json!("inf"), true, "t").unwrap();
        assert_eq!(v, f64::INFINITY);
        assert!(parse_entry_value(&json!("inf"), false, "t").is_err());
        assert_eq!(parse_entry_value(&json!(-0.25), true, "t").unwrap(), -0.25);
    }

    #[test]
    fn potential_accepts_either_form_and_cross_checks_both() {
        let e1 = LatticeVector::new(vec![1]);
        let from_g = load_potential(&json!({"dim": 1, "g": {"1": -0.5}})).unwrap();
        assert_eq!(from_g.mayer.value(&e1), -0.5);
        let phi = from_g.potential.value(&e1);
        let from_phi = load_potential(&json!({"dim": 1, "phi": {"1": phi}})).unwrap();
        assert!((from_phi.mayer.value(&e1) + 0.5).abs() < 1e-15);
        let disagreeing = json!({"dim": 1, "phi": {"1": phi}, "g": {"1": -0.4}});
        assert!(load_potential(&disagreeing).is_err());
    }

    #[test]
    fn density_only_targets_are_legal() {
        let spec = load_target(&json!({"dim": 1, "rho1": 0.01}), 0.5).unwrap();
        assert_eq!(spec.omega1(), 0.01);
        assert_eq!(spec.omega2_canonical().count(), 0);
        // the two density spellings must agree when both appear
        let both = json!({"dim": 1, "rho1": 0.01, "omega1": 0.02});
        assert!(load_target(&both, 0.5).is_err());
    }

    #[test]
    fn flags_override_the_config_file() {
        let file: FileConfig = serde_json::from_value(json!({
            "command": "check", "order": 2, "threads": 3,
        }))
        .unwrap();
        let flags = FlagConfig { order: Some(5), ..FlagConfig::default() };
        let cfg = resolve(None, file, flags).unwrap();
        assert_eq!(cfg.order, 5);
        assert_eq!(cfg.threads, 3);
        assert_eq!(cfg.r, Some(0.5)); // check falls back to the reference ball
    }

    #[test]
    fn thread_count_env_fallback_parses_strictly() {
        std::env::set_var("GIBBS_INVERSE_THREADS", "7");
        assert_eq!(threads_from_env().unwrap(), Some(7));
        std::env::set_var("GIBBS_INVERSE_THREADS", "many");
        assert!(threads_from_env().is_err());
        std::env::remove_var("GIBBS_INVERSE_THREADS");
        assert_eq!(threads_from_env().unwrap(), None);
    }

    #[test]
    fn echo_feeds_back_bitwise() {
        let file: FileConfig = serde_json::from_value(json!({
            "z": 0.02,
            "r": 0.5,
            "threads": 1,
            "potential": {"dim": 1, "g": {"1": -0.05, "2": 0.02}},
        }))
        .unwrap();
        let cfg = resolve(Some("roundtrip"), file, FlagConfig::default()).unwrap();
        let echoed: FileConfig = serde_json::from_value(cfg.echo()).unwrap();
        let again = resolve(None, echoed, FlagConfig::default()).unwrap();

        assert_eq!(again.command, CommandKind::Roundtrip);
        assert_eq!(again.z.unwrap().to_bits(), cfg.z.unwrap().to_bits());
        let (a, b) = (cfg.potential.as_ref().unwrap(), again.potential.as_ref().unwrap());
        for (x, v) in a.mayer.canonical_entries() {
            assert_eq!(v.to_bits(), b.mayer.value(x).to_bits(), "g({x}) drifted");
        }
        for (x, v) in a.potential.canonical_entries() {
            assert_eq!(v.to_bits(), b.potential.value(x).to_bits(), "phi({x}) drifted");
        }
    }
}
