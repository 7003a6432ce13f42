//! CSV and JSON emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use floquet_core::observables::{page_value, OddSeries, TrajectoryRecord};
use serde::Serialize;

use crate::error::CliError;
use crate::experiment::{Bundle, EvolveResult, SweepPoint};

pub const CSV_COLUMNS: [&str; 10] = [
    "m",
    "t",
    "o_odd_at_mT",
    "o_odd_at_mT_half",
    "o_odd2_at_mT",
    "o_odd2_at_mT_half",
    "o_s",
    "o_s_norm",
    "s_ent_over_page",
    "energy_density",
];

pub const MISSING: &str = "NA";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.json";

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        _ => MISSING.to_string(),
    }
}

/// One row per period; entropy and energy density are taken at `t = mT`.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    records: &[TrajectoryRecord],
    o_odd: &OddSeries,
    o_odd2: &OddSeries,
    l: usize,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    let page = page_value(l);
    let at_period: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.offset == 0.0).collect();
    for (k, &m) in o_odd.m.iter().enumerate() {
        let rec = at_period.iter().find(|r| r.m == m).ok_or_else(|| {
            CliError::Output(format!("no t = mT record for period {m}"))
        })?;
        let row = [
            m.to_string(),
            cell(Some(rec.t)),
            cell(Some(o_odd.at_period[k])),
            cell(Some(o_odd.at_half[k])),
            cell(Some(o_odd2.at_period[k])),
            cell(Some(o_odd2.at_half[k])),
            cell(Some(o_odd.symmetric[k])),
            cell(o_odd.normalized[k]),
            cell(Some(rec.s_ent / page)),
            cell(Some(rec.energy_density)),
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn write_evolve(dir: &Path, prefix: &str, result: &EvolveResult) -> Result<Vec<PathBuf>, CliError> {
    let csv_path = dir.join(format!("{prefix}{TRAJECTORY_FILE}"));
    let json_path = dir.join(format!("{prefix}{REPORT_FILE}"));
    let mut buf = Vec::new();
    write_trajectory_csv(
        &mut buf,
        &result.records,
        &result.o_odd,
        &result.o_odd2,
        result.report.config.l,
    )?;
    fs::write(&csv_path, buf)?;
    fs::write(&json_path, to_json(&result.report)?)?;
    Ok(vec![csv_path, json_path])
}

/// File-name prefix of one sweep point, e.g. `la0.8_lb1.2_`.
pub fn sweep_prefix(point: &SweepPoint) -> String {
    format!("la{}_lb{}_", point.lambda_a, point.lambda_b)
}

#[derive(Serialize)]
struct SweepSummaryRow<'a> {
    lambda_a: f64,
    lambda_b: f64,
    plateau: &'a crate::experiment::PlateauAnnotation,
    o_odd: &'a crate::experiment::MicromotionSummary,
    o_odd2: &'a crate::experiment::MicromotionSummary,
}

/// Writes the bundle under `dir`, returning the files written.
pub fn emit_results(bundle: &Bundle, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    match bundle {
        Bundle::Evolve(result) => write_evolve(dir, "", result),
        Bundle::SymmetryCheck(report) => {
            let path = dir.join("symmetry_report.json");
            fs::write(&path, to_json(report)?)?;
            Ok(vec![path])
        }
        Bundle::VanvleckVerify(report) => {
            let path = dir.join("vanvleck_report.json");
            fs::write(&path, to_json(report)?)?;
            Ok(vec![path])
        }
        Bundle::Sweep(points) => {
            let mut files = Vec::new();
            for p in points {
                files.extend(write_evolve(dir, &sweep_prefix(p), &p.result)?);
            }
            let rows: Vec<SweepSummaryRow> = points
                .iter()
                .map(|p| SweepSummaryRow {
                    lambda_a: p.lambda_a,
                    lambda_b: p.lambda_b,
                    plateau: &p.result.report.plateau,
                    o_odd: &p.result.report.o_odd,
                    o_odd2: &p.result.report.o_odd2,
                })
                .collect();
            let path = dir.join("sweep_summary.json");
            fs::write(&path, to_json(&rows)?)?;
            files.push(path);
            Ok(files)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_series() -> OddSeries {
        OddSeries {
            m: vec![],
            at_period: vec![],
            at_half: vec![],
            symmetric: vec![],
            normalized: vec![],
        }
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[], &empty_series(), &empty_series(), 6).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn missing_values_are_na() {
        assert_eq!(cell(None), "NA");
        assert_eq!(cell(Some(f64::NAN)), "NA");
        assert_eq!(cell(Some(0.25)), "0.25");
        assert_eq!(cell(Some(2.5e-17)), "2.5e-17");
    }
}
