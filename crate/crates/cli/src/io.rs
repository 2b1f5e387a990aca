//! Output files: CSV tables and the JSON report. Every number is written
//! with 17 significant digits (`{:.16e}`), rows are sorted, and maps iterate
//! in key order, so identical configs produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::Value;

use gibbs_inverse_core::lattice::LatticeVector;
use gibbs_inverse_core::oracle::VolumeSweep;
use gibbs_inverse_core::potential::{MayerFunction, PairPotential};

use crate::CliError;

/// Entries below this magnitude are left out of emitted supports; recorded
/// in report.json under results.zero_trim.
pub const ZERO_TRIM: f64 = 1e-12;

pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

fn coord_header(dim: usize) -> String {
    if dim == 1 {
        "x".into()
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
    }
}

fn coord_cells(x: &LatticeVector) -> String {
    x.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::io(format!("writing {}: {e}", path.display())))
}

/// potential.csv: one row per support point (both signs, sorted), columns
/// x-coords, phi, g. Hard cores print phi as "inf".
pub fn write_potential_csv(
    dir: &Path,
    potential: &PairPotential,
    mayer: &MayerFunction,
) -> Result<PathBuf, CliError> {
    let mut text = format!("{},phi,g\n", coord_header(potential.dim()));
    for x in mayer.support_points() {
        let g = mayer.value(&x);
        if g.abs() < ZERO_TRIM {
            continue;
        }
        let _ = writeln!(
            text,
            "{},{},{}",
            coord_cells(&x),
            fmt_float(potential.value(&x)),
            fmt_float(g)
        );
    }
    let path = dir.join("potential.csv");
    write_text(&path, &text)?;
    Ok(path)
}

/// correlation.csv: one row per pair-correlation lag (both signs, sorted),
/// columns x-coords, rho2, omega2. Rows with |omega2| below the trim are
/// omitted — their rho2 is just the uncorrelated baseline.
pub fn write_correlation_csv(
    dir: &Path,
    dim: usize,
    rows: &[(LatticeVector, f64, f64)],
) -> Result<PathBuf, CliError> {
    let mut sorted: Vec<&(LatticeVector, f64, f64)> = rows.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut text = format!("{},rho2,omega2\n", coord_header(dim));
    for (x, rho2, omega2) in sorted {
        if omega2.abs() < ZERO_TRIM {
            continue;
        }
        let _ = writeln!(
            text,
            "{},{},{}",
            coord_cells(x),
            fmt_float(*rho2),
            fmt_float(*omega2)
        );
    }
    let path = dir.join("correlation.csv");
    write_text(&path, &text)?;
    Ok(path)
}

/// sweep.csv: one row per half-width k, columns k, rho1, then one
/// rho2@<probe> column per probe (probe coordinates joined with ':').
/// Probes outside a small box print "nan" for that k.
pub fn write_sweep_csv(dir: &Path, sweep: &VolumeSweep) -> Result<PathBuf, CliError> {
    let mut text = String::from("k,rho1");
    for probe in &sweep.probes {
        let name: Vec<String> = probe.coords().iter().map(|c| c.to_string()).collect();
        let _ = write!(text, ",rho2@{}", name.join(":"));
    }
    text.push('\n');
    for row in &sweep.rows {
        let _ = write!(text, "{},{}", row.k, fmt_float(row.rho1));
        for v in &row.rho2 {
            let _ = write!(text, ",{}", fmt_float(*v));
        }
        text.push('\n');
    }
    let path = dir.join("sweep.csv");
    write_text(&path, &text)?;
    Ok(path)
}

pub fn write_report(dir: &Path, report: &Value) -> Result<PathBuf, CliError> {
    let path = dir.join("report.json");
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::io(format!("serializing report: {e}")))?;
    write_text(&path, &format!("{text}\n"))?;
    Ok(path)
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_print_with_seventeen_significant_digits() {
        assert_eq!(fmt_float(0.01), "1.0000000000000000e-2");
        assert_eq!(fmt_float(-1.0 / 3.0), "-3.3333333333333331e-1");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn coordinate_headers_name_each_axis() {
        assert_eq!(coord_header(1), "x");
        assert_eq!(coord_header(3), "x1,x2,x3");
    }

    #[test]
    fn near_zero_rows_are_trimmed_from_tables() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            (LatticeVector::new(vec![2]), 0.1, 1e-13),
            (LatticeVector::new(vec![1]), 0.25, 0.15),
        ];
        let path = write_correlation_csv(dir.path(), 1, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,rho2,omega2");
        assert_eq!(lines.len(), 2, "the 1e-13 row must be trimmed");
        assert!(lines[1].starts_with("1,"), "rows are sorted by lag");
    }
}
