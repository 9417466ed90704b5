//! On-disk formats: behavior tables, dataset exports and plot data.

use std::io::{Read, Write};

use belltrace_core::harness::{Dataset, TrialRecord};
use belltrace_core::models::{Behavior, ModelError, Outcome, Setting};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    /// True when the underlying reader or writer failed, as opposed to the
    /// content being malformed.
    pub fn is_io(&self) -> bool {
        match self {
            FormatError::Io(_) => true,
            FormatError::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BehaviorRow {
    x: String,
    y: String,
    a: String,
    b: String,
    p: f64,
}

/// Reads `x,y,a,b,p` rows. Setting grids are taken in order of first
/// appearance.
pub fn read_behavior(r: impl Read) -> Result<Behavior, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    let (mut ga, mut gb): (Vec<Setting>, Vec<Setting>) = (Vec::new(), Vec::new());
    for rec in rdr.deserialize::<BehaviorRow>() {
        let rec = rec?;
        let line = rows.len() as u64 + 2;
        let bad = |e: ModelError| FormatError::Row { line, reason: e.to_string() };
        let x: Setting = rec.x.parse().map_err(bad)?;
        let y: Setting = rec.y.parse().map_err(bad)?;
        let a: Outcome = rec.a.parse().map_err(bad)?;
        let b: Outcome = rec.b.parse().map_err(bad)?;
        if !ga.contains(&x) {
            ga.push(x);
        }
        if !gb.contains(&y) {
            gb.push(y);
        }
        rows.push((x, y, a, b, rec.p));
    }
    Ok(Behavior::from_rows(ga, gb, rows)?)
}

pub fn write_behavior(w: impl Write, b: &Behavior) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for (x, y, a, o, p) in b.rows() {
        wtr.serialize(BehaviorRow { x: x.to_string(), y: y.to_string(), a: a.to_string(), b: o.to_string(), p })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Column names of the dataset export.
pub const DATASET_HEADER: [&str; 13] = [
    "trial",
    "x",
    "y",
    "a",
    "b",
    "alice_own_setting_t",
    "alice_own_outcome_t",
    "alice_remote_setting_t",
    "alice_remote_outcome_t",
    "bob_own_setting_t",
    "bob_own_outcome_t",
    "bob_remote_setting_t",
    "bob_remote_outcome_t",
];

fn record_fields(r: &TrialRecord) -> Vec<String> {
    let mut f =
        vec![r.index.to_string(), r.setting_a.to_string(), r.setting_b.to_string(), r.a.to_string(), r.b.to_string()];
    f.extend(r.times_alice.as_array().iter().chain(r.times_bob.as_array().iter()).map(|t| t.to_string()));
    f
}

/// One row per kept record, in trial order.
pub fn write_dataset(w: impl Write, d: &Dataset) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(DATASET_HEADER)?;
    for r in d.records() {
        wtr.write_record(record_fields(r))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-pair outcome counts `(x, y, [n++, n+-, n-+, n--])` recovered from a
/// dataset export.
pub fn read_dataset_counts(r: impl Read) -> Result<Vec<(Setting, Setting, [u64; 4])>, FormatError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out: Vec<(Setting, Setting, [u64; 4])> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let field = |k: usize| {
            rec.get(k).ok_or(FormatError::Row { line, reason: format!("missing column {}", DATASET_HEADER[k]) })
        };
        let bad = |e: ModelError| FormatError::Row { line, reason: e.to_string() };
        let x: Setting = field(1)?.parse().map_err(bad)?;
        let y: Setting = field(2)?.parse().map_err(bad)?;
        let a: Outcome = field(3)?.parse().map_err(bad)?;
        let b: Outcome = field(4)?.parse().map_err(bad)?;
        let k = belltrace_core::models::cell_index(a, b);
        match out.iter_mut().find(|(px, py, _)| *px == x && *py == y) {
            Some(slot) => slot.2[k] += 1,
            None => {
                let mut c = [0; 4];
                c[k] = 1;
                out.push((x, y, c));
            }
        }
    }
    Ok(out)
}

/// A correlator sample for plotting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelatorPoint {
    pub x: Setting,
    pub y: Setting,
    /// `θa - θb` in units of π, when both settings are angles.
    pub delta_over_pi: Option<f64>,
    pub analytic: f64,
    pub estimate: f64,
    pub se: f64,
}

/// Tab-separated `x y delta_over_pi analytic estimate se`. A missing Δ is
/// written as `NaN`.
pub fn write_correlators(mut w: impl Write, points: &[CorrelatorPoint]) -> std::io::Result<()> {
    writeln!(w, "x\ty\tdelta_over_pi\tanalytic\testimate\tse")?;
    for p in points {
        let d = p.delta_over_pi.unwrap_or(f64::NAN);
        writeln!(w, "{}\t{}\t{}\t{}\t{}\t{}", p.x, p.y, d, p.analytic, p.estimate, p.se)?;
    }
    Ok(())
}

/// Tab-separated `delta_over_pi correlator` for the singlet curve `-cos Δ`
/// on `points` evenly spaced values in `[0, π]`.
pub fn write_singlet_curve(mut w: impl Write, points: u32) -> std::io::Result<()> {
    writeln!(w, "delta_over_pi\tcorrelator")?;
    let last = f64::from(points.max(2) - 1);
    for k in 0..points.max(2) {
        let d = f64::from(k) / last;
        writeln!(w, "{}\t{}", d, -(d * std::f64::consts::PI).cos())?;
    }
    Ok(())
}
