//! CSV and JSON output. Every file opens with a provenance header (CSV comment line or a
//! `_meta` JSON field) naming the command, configuration hash, and seed.

use std::io::Write;

use serde::Serialize;

use crate::engine::{ScenarioDelta, ScenarioRun, SummaryStats};
use crate::error::{Error, Result};
use crate::model::shares_by_speed;
use crate::pipeline::PackageEvent;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputMeta {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl OutputMeta {
    pub fn header_line(&self) -> String {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# edemand command={} config_hash={} seed={}",
            self.command, self.config_hash, seed
        )
    }
}

fn csv_writer<W: Write>(mut out: W, meta: &OutputMeta) -> Result<csv::Writer<W>> {
    writeln!(out, "{}", meta.header_line())?;
    Ok(csv::Writer::from_writer(out))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}

const SPEED_COLUMNS: [&str; 3] = [
    "share_days_2_to_5_pct",
    "share_one_day_pct",
    "share_same_day_pct",
];

/// One row per scenario: mean total value, mean frequency, and speed shares.
pub fn write_summary_csv<W: Write>(
    out: W,
    meta: &OutputMeta,
    rows: &[&SummaryStats],
) -> Result<()> {
    let mut w = csv_writer(out, meta)?;
    let mut header = vec!["scenario", "total_value_mean", "order_frequency_mean"];
    header.extend(SPEED_COLUMNS);
    w.write_record(&header)?;
    for s in rows {
        let mut rec = vec![
            s.scenario.clone(),
            s.mean_total_value.to_string(),
            s.mean_order_frequency.to_string(),
        ];
        rec.extend(s.share_by_speed_pct.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdfKind {
    TotalValue,
    Frequency,
}

/// Long-format empirical CDFs: `value,cum_prob,scenario`.
pub fn write_cdf_csv<W: Write>(
    out: W,
    meta: &OutputMeta,
    rows: &[&SummaryStats],
    kind: CdfKind,
) -> Result<()> {
    let mut w = csv_writer(out, meta)?;
    w.write_record(["value", "cum_prob", "scenario"])?;
    for s in rows {
        let cdf = match kind {
            CdfKind::TotalValue => &s.tv_cdf,
            CdfKind::Frequency => &s.frequency_cdf,
        };
        for (v, p) in cdf {
            w.write_record([v.to_string(), p.to_string(), s.scenario.clone()])?;
        }
    }
    finish(w)
}

/// Per-household results of one or more runs.
pub fn write_households_csv<W: Write>(
    out: W,
    meta: &OutputMeta,
    runs: &[&ScenarioRun],
) -> Result<()> {
    let mut w = csv_writer(out, meta)?;
    let mut header = vec![
        "scenario",
        "household_id",
        "size",
        "expected_total_value",
        "expected_frequency",
        "expected_order_value",
    ];
    header.extend(SPEED_COLUMNS.map(|c| c.trim_end_matches("_pct")));
    header.push("saturated");
    w.write_record(&header)?;
    for run in runs {
        for h in &run.households {
            let by_speed = shares_by_speed(&run.option_speeds, &h.option_shares);
            let mut rec = vec![
                run.summary.scenario.clone(),
                h.household_id.clone(),
                h.size.to_string(),
                h.expected_tv.to_string(),
                h.expected_frequency.to_string(),
                h.expected_ov.to_string(),
            ];
            rec.extend(by_speed.iter().map(|v| v.to_string()));
            rec.push(h.saturated.to_string());
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

pub fn write_deltas_csv<W: Write>(
    out: W,
    meta: &OutputMeta,
    deltas: &[ScenarioDelta],
) -> Result<()> {
    let mut w = csv_writer(out, meta)?;
    w.write_record([
        "base",
        "other",
        "total_value_change_pct",
        "frequency_change_pct",
        "share_days_2_to_5_change_pp",
        "share_one_day_change_pp",
        "share_same_day_change_pp",
    ])?;
    for d in deltas {
        let mut rec = vec![
            d.base.clone(),
            d.other.clone(),
            d.total_value_pct.to_string(),
            d.frequency_pct.to_string(),
        ];
        rec.extend(d.share_pp.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Package stream: `day,household_id,category,order_id,order_value_usd,option_id,speed,packages`
/// plus the requested weekday and an empty facility column.
pub fn write_packages_csv<W: Write>(
    out: W,
    meta: &OutputMeta,
    packages: &[PackageEvent],
) -> Result<()> {
    let mut w = csv_writer(out, meta)?;
    w.write_record([
        "day",
        "household_id",
        "category",
        "order_id",
        "order_value_usd",
        "option_id",
        "speed",
        "packages",
        "day_of_week",
        "facility",
    ])?;
    for p in packages {
        w.write_record([
            p.day.to_string(),
            p.household_id.clone(),
            p.category.label().to_string(),
            p.order_id.to_string(),
            p.order_value.to_string(),
            p.option_id.clone(),
            p.speed.label().to_string(),
            p.packages.to_string(),
            p.day_of_week.to_string(),
            p.facility.clone().unwrap_or_default(),
        ])?;
    }
    finish(w)
}

/// Pretty JSON with a leading `_meta` field; `value` must serialize to an object.
pub fn write_json<W: Write, T: Serialize>(mut out: W, meta: &OutputMeta, value: &T) -> Result<()> {
    let mut object = serde_json::Map::new();
    object.insert("_meta".into(), serde_json::to_value(meta)?);
    match serde_json::to_value(value)? {
        serde_json::Value::Object(fields) => object.extend(fields),
        other => {
            object.insert("value".into(), other);
        }
    }
    serde_json::to_writer_pretty(&mut out, &serde_json::Value::Object(object))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Plain pretty JSON, for editable inputs exported by the `gen-*` helpers.
pub fn write_plain_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> OutputMeta {
        OutputMeta {
            command: "run".into(),
            config_hash: "abc".into(),
            seed: Some(7),
        }
    }

    #[test]
    fn header_comment_first() {
        let s = SummaryStats {
            scenario: "S1".into(),
            mean_total_value: 57.5,
            mean_order_frequency: 0.99,
            share_by_speed_pct: [90.0, 6.0, 4.0],
            tv_cdf: vec![(57.5, 1.0)],
            frequency_cdf: vec![(0.99, 1.0)],
        };
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &meta(), &[&s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# edemand command=run config_hash=abc seed=7"
        );
        assert!(lines
            .next()
            .unwrap()
            .starts_with("scenario,total_value_mean,order_frequency_mean"));
        assert_eq!(lines.next().unwrap(), "S1,57.5,0.99,90,6,4");
    }

    #[test]
    fn json_meta_field() {
        #[derive(Serialize)]
        struct X {
            a: u32,
        }
        let mut buf = Vec::new();
        write_json(&mut buf, &meta(), &X { a: 1 }).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["_meta"]["seed"], 7);
        assert_eq!(v["a"], 1);
    }
}
