//! On-disk formats: records, reports and state summaries.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use qstokes::measurement::{read_records_csv, write_records_csv};
use qstokes::{IdentityCheck, MeasurementRecord, ReconstructionReport, StateSpec, StokesSummary};
use serde::{Deserialize, Serialize};

pub const RECORDS_FORMAT: &str = "qstokes-records";
pub const REPORT_FORMAT: &str = "qstokes-report";
pub const STATE_FORMAT: &str = "qstokes-state";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordsFile {
    pub format: String,
    pub version: u32,
    pub records: Vec<MeasurementRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub report: ReconstructionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_checks: Option<Vec<IdentityCheck>>,
    /// Worst entrywise deviation from the state's direct moments and Stokes
    /// oracle, when a state was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_deviation: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub format: String,
    pub version: u32,
    pub spec: StateSpec,
    pub norm: f64,
    pub boundary_mass: f64,
    pub summary: StokesSummary,
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_records(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    if is_csv(path) {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_records_csv(records, BufWriter::new(f))?;
        Ok(())
    } else {
        let file = RecordsFile {
            format: RECORDS_FORMAT.into(),
            version: VERSION,
            records: records.to_vec(),
        };
        write_json(path, &file)
    }
}

pub fn read_records(path: &Path) -> Result<Vec<MeasurementRecord>> {
    let f = File::open(path).with_context(|| format!("opening records {}", path.display()))?;
    if is_csv(path) {
        return read_records_csv(BufReader::new(f)).with_context(|| format!("invalid records file {}", path.display()));
    }
    let file: RecordsFile = serde_json::from_reader(BufReader::new(f))
        .with_context(|| format!("invalid records file {}", path.display()))?;
    if file.format != RECORDS_FORMAT || file.version != VERSION {
        bail!(
            "{} is {:?} version {}, expected {RECORDS_FORMAT:?} version {VERSION}",
            path.display(),
            file.format,
            file.version
        );
    }
    if file.records.is_empty() {
        bail!("{} contains no records", path.display());
    }
    Ok(file.records)
}
