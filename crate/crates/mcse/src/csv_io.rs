//! CSV readers and writers for the crate's external file formats.
//!
//! Trace files carry a header of functional names and one row per
//! iteration; geo data files carry one row per site with columns
//! site_x, site_y, covariate, response.

use std::path::Path;

use crate::models::geo::{GeoData, Site};
use crate::traces::ScalarTrace;
use crate::{Error, Result};

/// Reads a trace CSV: the header names the functionals, each subsequent
/// row holds one iteration's values.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<String>, Vec<ScalarTrace>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let names: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Config(format!("{}: no columns", path.display())));
    }
    let mut columns: Vec<ScalarTrace> = names.iter().map(|_| ScalarTrace::new()).collect();
    for record in reader.records() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Config(format!(
                "{}: row with {} fields, expected {}",
                path.display(),
                record.len(),
                names.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Config(format!("{}: unparseable value {field:?}", path.display()))
            })?;
            col.push(value);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok((names, columns))
}

/// Writes a trace CSV in the format `read_trace_csv` accepts.
pub fn write_trace_csv(path: &Path, names: &[String], columns: &[ScalarTrace]) -> Result<()> {
    if names.len() != columns.len() {
        return Err(Error::FunctionalCountMismatch {
            context: "write_trace_csv",
            expected: names.len(),
            got: columns.len(),
        });
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(names)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        let row: Vec<String> = columns.iter().map(|c| c.values()[i].to_string()).collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a geo data CSV (site_x, site_y, covariate, response).
pub fn read_geo_csv(path: &Path) -> Result<GeoData> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut sites = Vec::new();
    let mut covariate = Vec::new();
    let mut response = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::Config(format!(
                "{}: geo rows need 4 fields, got {}",
                path.display(),
                record.len()
            )));
        }
        let field = |i: usize| -> Result<f64> {
            record[i].trim().parse().map_err(|_| {
                Error::Config(format!(
                    "{}: unparseable value {:?}",
                    path.display(),
                    &record[i]
                ))
            })
        };
        sites.push(Site {
            x: field(0)?,
            y: field(1)?,
        });
        covariate.push(field(2)?);
        response.push(field(3)?);
    }
    GeoData::new(sites, covariate, response)
}

/// Writes a geo data CSV in the format `read_geo_csv` accepts.
pub fn write_geo_csv(path: &Path, data: &GeoData) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["site_x", "site_y", "covariate", "response"])?;
    for i in 0..data.len() {
        writer.write_record([
            data.sites()[i].x.to_string(),
            data.sites()[i].y.to_string(),
            data.covariate()[i].to_string(),
            data.response()[i].to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
