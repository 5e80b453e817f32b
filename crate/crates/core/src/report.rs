//! Comparison tables and report output.
//!
//! Rows carry raw metrics plus ratios against a baseline platform. Text
//! formats print six significant digits; JSON keeps full precision so it
//! round-trips.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::RunMetrics;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no runs to compare")]
    NoRuns,
    #[error("no rows to emit")]
    NoRows,
    #[error("unknown baseline platform `{0}`")]
    UnknownBaseline(String),
    #[error("model `{model}` has no run on baseline `{baseline}`")]
    MissingBaseline { model: String, baseline: String },
    #[error("unknown report format `{0}` (expected csv, json or tsv)")]
    UnknownFormat(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

/// Model name used for the per-platform geometric-mean rows.
pub const GEOMEAN: &str = "geomean";

/// The metrics a comparison needs from one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub platform: String,
    pub model: String,
    pub power_w: f64,
    pub latency_s: f64,
    pub epb_j_per_bit: f64,
}

impl From<&RunMetrics> for RunSummary {
    fn from(m: &RunMetrics) -> Self {
        RunSummary {
            platform: m.platform.name().to_string(),
            model: m.model.clone(),
            power_w: m.avg_power_w,
            latency_s: m.total_latency_s,
            epb_j_per_bit: m.epb_j_per_bit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub platform: String,
    pub model: String,
    pub power_w: f64,
    pub latency_s: f64,
    pub epb_j_per_bit: f64,
    pub normalized_power: Option<f64>,
    pub normalized_latency: Option<f64>,
    pub normalized_epb: Option<f64>,
    pub reference_only: bool,
}

/// Published figures for other accelerators, shown for context only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBaseline {
    pub name: &'static str,
    pub power_w: f64,
    pub latency_ms: f64,
    pub epb_nj_per_bit: f64,
}

pub const REFERENCE_BASELINES: [ReferenceBaseline; 7] = [
    ReferenceBaseline {
        name: "Nvidia P100 GPU",
        power_w: 250.0,
        latency_ms: 13.1,
        epb_nj_per_bit: 12.3,
    },
    ReferenceBaseline {
        name: "Intel 9282 CPU",
        power_w: 400.0,
        latency_ms: 86.5,
        epb_nj_per_bit: 64.4,
    },
    ReferenceBaseline {
        name: "AMD 3970 CPU",
        power_w: 280.0,
        latency_ms: 141.3,
        epb_nj_per_bit: 73.7,
    },
    ReferenceBaseline {
        name: "Edge TPU",
        power_w: 2.0,
        latency_ms: 2366.4,
        epb_nj_per_bit: 17.6,
    },
    ReferenceBaseline {
        name: "Null Hop",
        power_w: 2.3,
        latency_ms: 8049.3,
        epb_nj_per_bit: 68.9,
    },
    ReferenceBaseline {
        name: "Deep CNN",
        power_w: 122.0,
        latency_ms: 619.01,
        epb_nj_per_bit: 1959.4,
    },
    ReferenceBaseline {
        name: "HolyLight",
        power_w: 66.5,
        latency_ms: 86.4,
        epb_nj_per_bit: 40.3,
    },
];

impl ReferenceBaseline {
    pub fn row(&self) -> ComparisonRow {
        ComparisonRow {
            platform: self.name.to_string(),
            model: "reference".to_string(),
            power_w: self.power_w,
            latency_s: self.latency_ms * 1e-3,
            epb_j_per_bit: self.epb_nj_per_bit * 1e-9,
            normalized_power: None,
            normalized_latency: None,
            normalized_epb: None,
            reference_only: true,
        }
    }
}

pub fn reference_rows() -> Vec<ComparisonRow> {
    REFERENCE_BASELINES
        .iter()
        .map(ReferenceBaseline::row)
        .collect()
}

pub fn geometric_mean(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp()
}

/// Normalizes every run against the same model's run on `baseline`, then
/// appends one geometric-mean row per platform (in order of first
/// appearance).
pub fn comparison_table(
    runs: &[RunSummary],
    baseline: &str,
) -> Result<Vec<ComparisonRow>, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    if !runs.iter().any(|r| r.platform == baseline) {
        return Err(ReportError::UnknownBaseline(baseline.to_string()));
    }
    let mut rows = Vec::with_capacity(runs.len());
    for r in runs {
        let base = runs
            .iter()
            .find(|b| b.platform == baseline && b.model == r.model)
            .ok_or_else(|| ReportError::MissingBaseline {
                model: r.model.clone(),
                baseline: baseline.to_string(),
            })?;
        rows.push(ComparisonRow {
            platform: r.platform.clone(),
            model: r.model.clone(),
            power_w: r.power_w,
            latency_s: r.latency_s,
            epb_j_per_bit: r.epb_j_per_bit,
            normalized_power: Some(r.power_w / base.power_w),
            normalized_latency: Some(r.latency_s / base.latency_s),
            normalized_epb: Some(r.epb_j_per_bit / base.epb_j_per_bit),
            reference_only: false,
        });
    }

    let mut platforms: Vec<&str> = Vec::new();
    for r in runs {
        if !platforms.contains(&r.platform.as_str()) {
            platforms.push(&r.platform);
        }
    }
    let mut summary = Vec::with_capacity(platforms.len());
    for p in platforms {
        let mine: Vec<&ComparisonRow> = rows.iter().filter(|r| r.platform == p).collect();
        let gm = |f: &dyn Fn(&ComparisonRow) -> f64| {
            geometric_mean(&mine.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        summary.push(ComparisonRow {
            platform: p.to_string(),
            model: GEOMEAN.to_string(),
            power_w: gm(&|r| r.power_w),
            latency_s: gm(&|r| r.latency_s),
            epb_j_per_bit: gm(&|r| r.epb_j_per_bit),
            normalized_power: Some(gm(&|r| r.normalized_power.unwrap_or(f64::NAN))),
            normalized_latency: Some(gm(&|r| r.normalized_latency.unwrap_or(f64::NAN))),
            normalized_epb: Some(gm(&|r| r.normalized_epb.unwrap_or(f64::NAN))),
            reference_only: false,
        });
    }
    rows.extend(summary);
    Ok(rows)
}

/// Comparison over finished simulation runs.
pub fn compare_runs(
    runs: &[RunMetrics],
    baseline: &str,
) -> Result<Vec<ComparisonRow>, ReportError> {
    let summaries: Vec<RunSummary> = runs.iter().map(RunSummary::from).collect();
    comparison_table(&summaries, baseline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Tsv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self, ReportError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }

    fn delimiter(self) -> u8 {
        if self == ReportFormat::Tsv {
            b'\t'
        } else {
            b','
        }
    }
}

pub const COLUMNS: [&str; 9] = [
    "platform",
    "model",
    "power_w",
    "latency_s",
    "epb_j_per_bit",
    "normalized_power",
    "normalized_latency",
    "normalized_epb",
    "reference_only",
];

/// Six significant digits in scientific notation.
pub fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

fn delimited(
    header: &[&str],
    records: Vec<Vec<String>>,
    format: ReportFormat,
) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter())
        .from_writer(Vec::new());
    let err = |e: csv::Error| ReportError::Serialize(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in records {
        w.write_record(&r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Serialize(e.to_string()))
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, ReportError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| ReportError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn render_report(rows: &[ComparisonRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::NoRows);
    }
    if format == ReportFormat::Json {
        return json(rows);
    }
    let records = rows
        .iter()
        .map(|r| {
            vec![
                r.platform.clone(),
                r.model.clone(),
                sig6(r.power_w),
                sig6(r.latency_s),
                sig6(r.epb_j_per_bit),
                opt6(r.normalized_power),
                opt6(r.normalized_latency),
                opt6(r.normalized_epb),
                r.reference_only.to_string(),
            ]
        })
        .collect();
    delimited(&COLUMNS, records, format)
}

pub fn write_output(text: &str, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, text).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn emit_report(
    rows: &[ComparisonRow],
    format: ReportFormat,
    path: &Path,
) -> Result<(), ReportError> {
    write_output(&render_report(rows, format)?, path)
}

pub const RUN_COLUMNS: [&str; 8] = [
    "platform",
    "model",
    "latency_s",
    "energy_j",
    "avg_power_w",
    "total_bits",
    "epb_j_per_bit",
    "reconfig_count",
];

pub const LAYER_COLUMNS: [&str; 17] = [
    "layer_index",
    "compute_s",
    "read_s",
    "write_s",
    "overhead_s",
    "layer_latency_s",
    "bits_moved",
    "laser_w",
    "energy_j",
    "laser_j",
    "tuning_j",
    "conversion_j",
    "mac_j",
    "gateway_elec_j",
    "controller_j",
    "electrical_noc_j",
    "cumulative_latency_s",
];

/// One simulation run: a summary line, or one line per layer with
/// `detail`. JSON always carries the full run including layers.
pub fn render_run(
    m: &RunMetrics,
    format: ReportFormat,
    detail: bool,
) -> Result<String, ReportError> {
    if format == ReportFormat::Json {
        return json(m);
    }
    if !detail {
        let record = vec![
            m.platform.name().to_string(),
            m.model.clone(),
            sig6(m.total_latency_s),
            sig6(m.total_energy_j),
            sig6(m.avg_power_w),
            m.total_bits.to_string(),
            sig6(m.epb_j_per_bit),
            m.reconfig_count.to_string(),
        ];
        return delimited(&RUN_COLUMNS, vec![record], format);
    }
    let mut t = 0.0;
    let records = m
        .per_layer
        .iter()
        .map(|l| {
            t += l.layer_latency_s;
            let e = &l.energy_j;
            vec![
                l.layer_index.to_string(),
                sig6(l.compute_s),
                sig6(l.read_s),
                sig6(l.write_s),
                sig6(l.overhead_s),
                sig6(l.layer_latency_s),
                l.bits_moved.to_string(),
                sig6(l.laser_w),
                sig6(e.total()),
                sig6(e.laser),
                sig6(e.tuning),
                sig6(e.conversion),
                sig6(e.mac),
                sig6(e.gateway_elec),
                sig6(e.controller),
                sig6(e.electrical_noc),
                sig6(t),
            ]
        })
        .collect();
    delimited(&LAYER_COLUMNS, records, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(platform: &str, model: &str, p: f64, l: f64, e: f64) -> RunSummary {
        RunSummary {
            platform: platform.into(),
            model: model.into(),
            power_w: p,
            latency_s: l,
            epb_j_per_bit: e,
        }
    }

    fn find<'a>(rows: &'a [ComparisonRow], p: &str, m: &str) -> &'a ComparisonRow {
        rows.iter()
            .find(|r| r.platform == p && r.model == m)
            .unwrap()
    }

    #[test]
    fn latency_ratio_example() {
        let runs = [
            run("elec", "m", 1.0, 41.4e-3, 1.0),
            run("siph", "m", 1.0, 1.21e-3, 1.0),
        ];
        let rows = comparison_table(&runs, "siph").unwrap();
        let r = find(&rows, "elec", "m").normalized_latency.unwrap();
        assert!((r - 34.2149).abs() < 1e-3);
        assert_eq!(find(&rows, "siph", "m").normalized_latency, Some(1.0));
    }

    #[test]
    fn self_baseline_is_unity() {
        let rows = comparison_table(&[run("mono", "m", 3.0, 2.0, 1.0)], "mono").unwrap();
        for r in &rows {
            assert_eq!(r.normalized_power, Some(1.0));
            assert_eq!(r.normalized_latency, Some(1.0));
            assert_eq!(r.normalized_epb, Some(1.0));
        }
    }

    #[test]
    fn epb_ratio_example() {
        let runs = [
            run("mono", "m", 1.0, 1.0, 3.6e-9),
            run("siph", "m", 1.0, 1.0, 1.3e-9),
        ];
        let rows = comparison_table(&runs, "siph").unwrap();
        let r = find(&rows, "mono", "m").normalized_epb.unwrap();
        assert!((r - 2.769).abs() < 1e-3);
    }

    #[test]
    fn baseline_errors() {
        assert!(matches!(
            comparison_table(&[], "siph"),
            Err(ReportError::NoRuns)
        ));
        let runs = [run("siph", "a", 1.0, 1.0, 1.0)];
        assert!(matches!(
            comparison_table(&runs, "gpu"),
            Err(ReportError::UnknownBaseline(_))
        ));
        let runs = [
            run("siph", "a", 1.0, 1.0, 1.0),
            run("elec", "b", 1.0, 1.0, 1.0),
        ];
        assert!(matches!(
            comparison_table(&runs, "siph"),
            Err(ReportError::MissingBaseline { .. })
        ));
    }

    #[test]
    fn geomean_matches_direct_product() {
        let runs = [
            run("siph", "a", 1.0, 1.0, 1.0),
            run("siph", "b", 1.0, 2.0, 1.0),
            run("elec", "a", 1.0, 4.0, 1.0),
            run("elec", "b", 1.0, 18.0, 1.0),
        ];
        let rows = comparison_table(&runs, "siph").unwrap();
        let g = find(&rows, "elec", GEOMEAN).normalized_latency.unwrap();
        assert!((g - (4.0f64 * 9.0).sqrt()).abs() < 1e-12);
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| !r.reference_only));
    }

    #[test]
    fn references_are_flagged() {
        let refs = reference_rows();
        assert_eq!(refs.len(), 7);
        assert!(refs
            .iter()
            .all(|r| r.reference_only && r.normalized_latency.is_none()));
        let p100 = &refs[0];
        assert_eq!(p100.power_w, 250.0);
        assert!((p100.latency_s - 13.1e-3).abs() <= 1e-12 * 13.1e-3);
        assert!((p100.epb_j_per_bit - 12.3e-9).abs() <= 1e-12 * 12.3e-9);
    }

    #[test]
    fn csv_structure_and_stability() {
        let rows = comparison_table(
            &[
                run("siph", "a", 12.5, 1.21e-3, 1.3e-9),
                run("elec", "a", 2.0, 41.4e-3, 1e-9),
            ],
            "siph",
        )
        .unwrap();
        let two = &rows[..2];
        let text = render_report(two, ReportFormat::Csv).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], COLUMNS.join(","));
        assert_eq!(
            lines[1],
            "siph,a,1.25000e1,1.21000e-3,1.30000e-9,1.00000e0,1.00000e0,1.00000e0,false"
        );
        assert_eq!(text, render_report(two, ReportFormat::Csv).unwrap());
        let tsv = render_report(two, ReportFormat::Tsv).unwrap();
        assert_eq!(tsv.lines().next().unwrap(), COLUMNS.join("\t"));
    }

    #[test]
    fn emit_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let rows = reference_rows();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        emit_report(&rows, ReportFormat::Csv, &a).unwrap();
        emit_report(&rows, ReportFormat::Csv, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let bad = dir.path().join("missing").join("x.csv");
        assert!(matches!(
            emit_report(&rows, ReportFormat::Csv, &bad),
            Err(ReportError::Io { .. })
        ));
        assert!(matches!(
            render_report(&[], ReportFormat::Json),
            Err(ReportError::NoRows)
        ));
        assert!(ReportFormat::parse("xml").is_err());
        assert_eq!(ReportFormat::parse("TSV").unwrap(), ReportFormat::Tsv);
    }

    proptest! {
        #[test]
        fn json_round_trip(vals in proptest::collection::vec((1e-12..1e3f64, 1e-9..10.0f64, 1e-15..1e-6f64), 1..6)) {
            let runs: Vec<_> = vals.iter().enumerate()
                .flat_map(|(i, &(p, l, e))| [
                    run("siph", &format!("m{i}"), p, l, e),
                    run("elec", &format!("m{i}"), p * 0.3, l * 7.0, e * 1.9),
                ])
                .collect();
            let rows = comparison_table(&runs, "siph").unwrap();
            let text = render_report(&rows, ReportFormat::Json).unwrap();
            let back: Vec<ComparisonRow> = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                for (x, y) in [(a.power_w, b.power_w), (a.latency_s, b.latency_s), (a.epb_j_per_bit, b.epb_j_per_bit),
                               (a.normalized_power.unwrap(), b.normalized_power.unwrap()),
                               (a.normalized_latency.unwrap(), b.normalized_latency.unwrap()),
                               (a.normalized_epb.unwrap(), b.normalized_epb.unwrap())] {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs());
                }
            }
        }

        #[test]
        fn ratios_invariant_under_energy_rescaling(k in 1e-3..1e3f64,
                vals in proptest::collection::vec((1e-3..1e3f64, 1e-6..1.0f64, 1e-12..1e-6f64), 2..5)) {
            let runs: Vec<_> = vals.iter().enumerate()
                .map(|(i, &(p, l, e))| run(if i == 0 { "siph" } else { "elec" }, "m", p, l, e))
                .collect();
            // rescaling energy scales power and EPB together
            let scaled: Vec<_> = runs.iter()
                .map(|r| run(&r.platform, &r.model, r.power_w * k, r.latency_s, r.epb_j_per_bit * k))
                .collect();
            let a = comparison_table(&runs, "siph").unwrap();
            let b = comparison_table(&scaled, "siph").unwrap();
            for (x, y) in a.iter().zip(&b) {
                let (xp, yp) = (x.normalized_power.unwrap(), y.normalized_power.unwrap());
                let (xe, ye) = (x.normalized_epb.unwrap(), y.normalized_epb.unwrap());
                prop_assert!((xp - yp).abs() <= 1e-9 * xp);
                prop_assert!((xe - ye).abs() <= 1e-9 * xe);
                prop_assert_eq!(x.normalized_latency, y.normalized_latency);
            }
        }
    }
}
