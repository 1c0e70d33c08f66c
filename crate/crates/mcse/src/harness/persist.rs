//! CSV persistence for study outputs. Floats are written in Rust's
//! shortest round-trip form, so a rerun with the same seed produces
//! byte-identical files.

use std::path::Path;

use super::summary::{Histogram, SummaryTable};
use super::{DecisionRecord, ReplicationResult, StudyOutput};
use crate::Result;

/// Writes one row per replication: id, effort, flags, then per-functional
/// estimates and criterion values (and full-chain estimates when present).
pub fn write_replications_csv(path: &Path, study: &StudyOutput) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let has_full = study
        .results
        .iter()
        .any(|r| r.full_chain_estimates.is_some());

    let mut header = vec![
        "rep_id".to_string(),
        "n_total".to_string(),
        "stopped_at_minimum".to_string(),
        "failed".to_string(),
    ];
    for name in &study.functionals {
        header.push(format!("est_{name}"));
    }
    for name in &study.functionals {
        header.push(format!("crit_{name}"));
    }
    if has_full {
        for name in &study.functionals {
            header.push(format!("full_est_{name}"));
        }
    }
    writer.write_record(&header)?;

    for r in &study.results {
        let mut row = vec![
            r.rep_id.to_string(),
            r.n_total.to_string(),
            r.stopped_at_minimum.to_string(),
            r.failed.to_string(),
        ];
        row.extend(r.estimates.iter().map(|v| v.to_string()));
        row.extend(r.criteria.iter().map(|v| v.to_string()));
        if has_full {
            match &r.full_chain_estimates {
                Some(full) => row.extend(full.iter().map(|v| v.to_string())),
                None => row.extend(study.functionals.iter().map(|_| String::new())),
            }
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads estimates back from a replications CSV; used to cross-check
/// persisted output against in-memory summaries.
pub fn read_replications_csv(path: &Path, functionals: usize) -> Result<Vec<ReplicationResult>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut results = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |i: usize| -> f64 { record[i].parse().unwrap_or(f64::NAN) };
        let estimates = (0..functionals).map(|i| parse(4 + i)).collect();
        let criteria = (0..functionals).map(|i| parse(4 + functionals + i)).collect();
        results.push(ReplicationResult {
            rep_id: record[0].parse().unwrap_or(0),
            n_total: record[1].parse().unwrap_or(0),
            stopped_at_minimum: &record[2] == "true",
            failed: &record[3] == "true",
            estimates,
            criteria,
            full_chain_estimates: None,
        });
    }
    Ok(results)
}

/// Writes the summary table: one row per functional plus study-level rows.
pub fn write_summary_csv(path: &Path, table: &SummaryTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["statistic", "functional", "value", "std_error"])?;
    for row in &table.rows {
        writer.write_record([
            "mse".to_string(),
            row.functional.clone(),
            row.mse.to_string(),
            row.mse_se.to_string(),
        ])?;
        if let Some((p, se)) = row.coverage {
            writer.write_record([
                "coverage".to_string(),
                row.functional.clone(),
                p.to_string(),
                se.to_string(),
            ])?;
        }
    }
    writer.write_record([
        "prop_at_minimum".to_string(),
        String::new(),
        table.prop_at_minimum.0.to_string(),
        table.prop_at_minimum.1.to_string(),
    ])?;
    writer.write_record([
        "prop_at_most_1000".to_string(),
        String::new(),
        table.prop_at_most_1000.0.to_string(),
        table.prop_at_most_1000.1.to_string(),
    ])?;
    writer.write_record([
        "mean_effort".to_string(),
        String::new(),
        table.mean_effort.0.to_string(),
        table.mean_effort.1.to_string(),
    ])?;
    writer.write_record([
        "replications".to_string(),
        String::new(),
        table.replications.to_string(),
        String::new(),
    ])?;
    writer.write_record([
        "failed".to_string(),
        String::new(),
        table.failed.to_string(),
        String::new(),
    ])?;
    writer.flush()?;
    Ok(())
}

/// Writes the decision log: one row per stopping check.
pub fn write_decisions_csv(
    path: &Path,
    functionals: &[String],
    decisions: &[DecisionRecord],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["rep_id".to_string(), "n".to_string()];
    header.extend(functionals.iter().map(|n| format!("crit_{n}")));
    writer.write_record(&header)?;
    for d in decisions {
        let mut row = vec![d.rep_id.to_string(), d.n.to_string()];
        row.extend(d.criteria.iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes histogram bins as (bin_lo, bin_hi, count) rows.
pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, &count) in hist.counts.iter().enumerate() {
        writer.write_record([
            hist.edges[i].to_string(),
            hist.edges[i + 1].to_string(),
            count.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
