//! CSV and JSON emitters and the matching readers.
//!
//! Numbers are written with the shortest representation that parses back to the same `f64`,
//! so a write/read cycle is exact. CSV files may end with `#` comment lines carrying
//! `key=value` summary statistics.

use crate::error::{Error, Result};
use crate::movingplane::{SweepResult, SweepRow, Verdict, VerdictKind};
use crate::potentials::{BoundaryProfile, Constancy, ProfileSample};
use crate::scalar::Real;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

/// Footer key/value pairs from `# key=value` comment lines, in file order.
pub type Footer = Vec<(String, String)>;

fn num<T: Real>(v: T) -> String {
    format!("{}", v.as_f64())
}

fn parse_num(field: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("not a number: {field:?}")))
}

fn write_footer<W: Write>(w: &mut W, footer: &[(String, String)]) -> Result<()> {
    for (k, v) in footer {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// Splits a CSV document into its data section and its footer.
fn split_footer(text: &str) -> (String, Footer) {
    let mut data = String::new();
    let mut footer = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                footer.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !line.trim().is_empty() {
            data.push_str(line);
            data.push('\n');
        }
    }
    (data, footer)
}

fn read_table<R: Read>(mut r: R, expected: Option<&[&str]>) -> Result<(Vec<String>, Vec<Vec<f64>>, Footer)> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (data, footer) = split_footer(&text);
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(data.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    if let Some(exp) = expected {
        if header.len() != exp.len() || header.iter().zip(exp).any(|(a, b)| a != b) {
            return Err(Error::Format(format!("expected header {exp:?}, found {header:?}")));
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_num).collect::<Result<Vec<f64>>>()?);
    }
    Ok((header, rows, footer))
}

/// Writes `x1,...,xN,u,err` rows followed by the profile statistics as comments.
pub fn write_profile_csv<T: Real, W: Write>(
    w: &mut W,
    profile: &BoundaryProfile<T>,
    extra_footer: &[(String, String)],
) -> Result<()> {
    let dim = profile.samples.first().map_or(0, |s| s.point.len());
    {
        let mut cw = csv::Writer::from_writer(&mut *w);
        let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        header.push("u".into());
        header.push("err".into());
        cw.write_record(&header)?;
        for s in &profile.samples {
            let mut row: Vec<String> = s.point.iter().map(|&v| num(v)).collect();
            row.push(num(s.value));
            row.push(num(s.error_bound));
            cw.write_record(&row)?;
        }
        cw.flush()?;
    }
    let mut footer = vec![
        ("samples".to_string(), profile.samples.len().to_string()),
        ("mean".into(), num(profile.mean)),
        ("min".into(), num(profile.min)),
        ("max".into(), num(profile.max)),
        ("abs_spread".into(), num(profile.abs_spread)),
        ("rel_spread".into(), num(profile.rel_spread)),
        ("spread_floor".into(), num(profile.spread_floor)),
        ("max_err".into(), num(profile.max_error())),
    ];
    footer.extend(extra_footer.iter().cloned());
    write_footer(w, &footer)
}

/// Reads a profile CSV. Convergence flags are not stored and come back as `true`.
pub fn read_profile_csv<R: Read>(r: R) -> Result<(BoundaryProfile<f64>, Footer)> {
    let (header, rows, footer) = read_table(r, None)?;
    let n = header.len();
    if n < 3 || header[n - 2] != "u" || header[n - 1] != "err" {
        return Err(Error::Format(format!("not a profile header: {header:?}")));
    }
    let samples = rows
        .into_iter()
        .map(|row| ProfileSample {
            point: row[..n - 2].to_vec(),
            value: row[n - 2],
            error_bound: row[n - 1],
            converged: true,
        })
        .collect();
    let floor = footer
        .iter()
        .find(|(k, _)| k == "spread_floor")
        .map(|(_, v)| parse_num(v))
        .transpose()?
        .unwrap_or(BoundaryProfile::<f64>::DEFAULT_SPREAD_FLOOR);
    Ok((BoundaryProfile::from_samples(samples, floor)?, footer))
}

/// One row of a kernel scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelScanRow {
    pub s: f64,
    pub k: f64,
    pub dk: f64,
}

pub const KERNEL_SCAN_HEADER: [&str; 3] = ["s", "k", "dk"];

pub fn write_kernel_scan_csv<W: Write>(w: &mut W, rows: &[KernelScanRow], footer: &[(String, String)]) -> Result<()> {
    {
        let mut cw = csv::Writer::from_writer(&mut *w);
        cw.write_record(KERNEL_SCAN_HEADER)?;
        for r in rows {
            cw.write_record([num(r.s), num(r.k), num(r.dk)])?;
        }
        cw.flush()?;
    }
    write_footer(w, footer)
}

pub fn read_kernel_scan_csv<R: Read>(r: R) -> Result<(Vec<KernelScanRow>, Footer)> {
    let (_, rows, footer) = read_table(r, Some(&KERNEL_SCAN_HEADER))?;
    Ok((
        rows.into_iter().map(|r| KernelScanRow { s: r[0], k: r[1], dk: r[2] }).collect(),
        footer,
    ))
}

pub const SWEEP_HEADER: [&str; 5] = ["lambda", "tangency_residual", "orthogonality_residual", "cap_volume", "cap_err"];

/// Sweep table rows, then the critical event as comments when `event` is given.
pub fn write_sweep_csv<T: Real, W: Write>(w: &mut W, rows: &[SweepRow<T>], event: Option<&SweepResult<T>>) -> Result<()> {
    {
        let mut cw = csv::Writer::from_writer(&mut *w);
        cw.write_record(SWEEP_HEADER)?;
        for r in rows {
            cw.write_record([
                num(r.lambda),
                num(r.tangency_residual),
                num(r.orthogonality_residual),
                num(r.cap_volume),
                num(r.cap_err),
            ])?;
        }
        cw.flush()?;
    }
    if let Some(s) = event {
        let join = |v: &[T]| v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ");
        let footer = vec![
            ("direction".to_string(), join(&s.direction)),
            ("lambda0".into(), num(s.lambda0)),
            ("lambda_bar".into(), num(s.event.lambda_bar)),
            ("kind".into(), format!("{:?}", s.event.kind)),
            ("witness".into(), join(&s.event.witness)),
            ("symmetry_residual".into(), num(s.symmetry_residual)),
            ("symmetry_tol".into(), num(s.symmetry_tol)),
            ("cap_volume".into(), num(s.omega_cap_volume.value)),
            ("cap_err".into(), num(s.omega_cap_volume.error_bound)),
        ];
        write_footer(w, &footer)?;
    }
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<(Vec<SweepRow<f64>>, Footer)> {
    let (_, rows, footer) = read_table(r, Some(&SWEEP_HEADER))?;
    Ok((
        rows.into_iter()
            .map(|r| SweepRow {
                lambda: r[0],
                tangency_residual: r[1],
                orthogonality_residual: r[2],
                cap_volume: r[3],
                cap_err: r[4],
            })
            .collect(),
        footer,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub direction: Option<Vec<f64>>,
    pub check: String,
    pub detail: String,
}

/// Flat verdict document: `{kind, center, radius, directions, failures}` plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub kind: String,
    pub center: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub directions: usize,
    pub failures: Vec<FailureRecord>,
    #[serde(default)]
    pub reason: Option<String>,
    #[serde(default)]
    pub witness_direction: Option<Vec<f64>>,
    #[serde(default)]
    pub profile_verdict: Option<Constancy>,
    #[serde(default)]
    pub profile_spread: Option<f64>,
    #[serde(default)]
    pub profile_budget: Option<f64>,
    /// Per-direction critical positions.
    #[serde(default)]
    pub lambda_bar: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl VerdictRecord {
    pub fn from_verdict<T: Real>(v: &Verdict<T>) -> Self {
        let f = |x: &[T]| x.iter().map(|t| t.as_f64()).collect::<Vec<f64>>();
        let (kind, center, radius, reason, witness_direction) = match &v.kind {
            VerdictKind::IsBall { center, radius } => ("IsBall", Some(f(center)), Some(radius.as_f64()), None, None),
            VerdictKind::NotBall { witness_direction, reason } => {
                ("NotBall", None, None, Some(reason.clone()), witness_direction.as_deref().map(f))
            }
            VerdictKind::Inconclusive { reason } => ("Inconclusive", None, None, Some(reason.clone()), None),
        };
        VerdictRecord {
            kind: kind.into(),
            center,
            radius,
            directions: v.directions_tested,
            failures: v
                .failures
                .iter()
                .map(|x| FailureRecord {
                    direction: x.direction.as_deref().map(f),
                    check: x.check.clone(),
                    detail: x.detail.clone(),
                })
                .collect(),
            reason,
            witness_direction,
            profile_verdict: Some(v.profile_verdict),
            profile_spread: Some(v.profile_spread.as_f64()),
            profile_budget: Some(v.profile_budget.as_f64()),
            lambda_bar: v
                .sweeps
                .iter()
                .map(|s| {
                    let key = s.direction.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",");
                    (key, s.event.lambda_bar.as_f64())
                })
                .collect(),
            notes: v.notes.clone(),
        }
    }
}

pub fn write_json<S: Serialize, W: Write>(w: &mut W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned, R: Read>(r: R) -> Result<D> {
    Ok(serde_json::from_reader(r)?)
}

/// Looks up a footer value.
pub fn footer_value<'a>(footer: &'a Footer, key: &str) -> Option<&'a str> {
    footer.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(parse_num(&num(v)).unwrap().to_bits(), v.to_bits());
        }
        assert!(parse_num(&num(f64::NAN)).unwrap().is_nan());
        assert_eq!(parse_num(&num(f64::INFINITY)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn footer_lines_are_separated() {
        let (data, footer) = split_footer("a,b\n1,2\n# mean=3\n#note without value\n");
        assert_eq!(data, "a,b\n1,2\n");
        assert_eq!(footer, vec![("mean".to_string(), "3".to_string())]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = read_sweep_csv("lambda,x\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }
}
