//! Evaluation artifacts: allocation weight series, empirical CDF of
//! normalized revenue, and mean / best-case improvement over the static
//! baseline, plus their CSV and JSON encodings.
//!
//! File schemas (column order is stable):
//!
//! * `revenue.csv`: `cycle,policy_version,status,dynamic_revenue,static_revenue,
//!   normalized_revenue,improvement_pct`, then one `c_<substrate>_s<slice>`
//!   coefficient column per variable.
//! * `weights.csv`: `cycle`, then one `t_<substrate>_s<slice>` column per variable.
//! * `cdf.csv`: `normalized_revenue,cumulative_probability`.
//! * `summary.json`: [`Summary`].
//!
//! Numbers are written in shortest round-trip decimal form.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{CycleRecord, CycleStatus};
use crate::optimizer::{AllocationMatrix, SliceId, SubstrateId, SubstrateKind};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("static revenue is zero in cycle {0}")]
    ZeroStaticRevenue(u64),
    #[error("series is empty")]
    EmptySeries,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("malformed {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub records: Vec<CycleRecord>,
    pub config_digest: String,
}

impl MetricsSeries {
    /// Records are ordered by cycle with no gaps.
    pub fn is_well_ordered(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].cycle == w[0].cycle + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementStats {
    pub mean_improvement_pct: f64,
    pub best_improvement_pct: f64,
    /// Improvement of total dynamic over total static revenue.
    pub raw_improvement_pct: f64,
    /// `(normalized revenue, cumulative probability)`, ascending.
    pub cdf_points: Vec<(f64, f64)>,
}

pub fn improvement_stats(series: &MetricsSeries) -> Result<ImprovementStats, MetricsError> {
    if series.records.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    let mut normalized = Vec::with_capacity(series.records.len());
    let (mut dyn_total, mut static_total) = (0.0, 0.0);
    for r in &series.records {
        if r.static_revenue <= 0.0 {
            return Err(MetricsError::ZeroStaticRevenue(r.cycle));
        }
        normalized.push(r.dynamic_revenue / r.static_revenue);
        dyn_total += r.dynamic_revenue;
        static_total += r.static_revenue;
    }
    let n = normalized.len() as f64;
    let improvements: Vec<f64> = normalized.iter().map(|x| (x - 1.0) * 100.0).collect();
    let mean = improvements.iter().sum::<f64>() / n;
    let best = improvements.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    normalized.sort_by(f64::total_cmp);
    let len = normalized.len();
    let cdf_points = normalized
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / len as f64))
        .collect();

    Ok(ImprovementStats {
        mean_improvement_pct: mean,
        best_improvement_pct: best,
        raw_improvement_pct: (dyn_total / static_total - 1.0) * 100.0,
        cdf_points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightColumn {
    pub substrate: SubstrateId,
    pub slice: SliceId,
    pub values: Vec<f64>,
}

/// One airtime time series per (substrate, slice), in cycle order.
pub fn weight_series(
    series: &MetricsSeries,
    substrates: &[SubstrateId],
) -> Result<Vec<WeightColumn>, MetricsError> {
    let first = series.records.first().ok_or(MetricsError::EmptySeries)?;
    let n_sl = first.allocation.n_slices();
    let mut cols = Vec::with_capacity(substrates.len() * n_sl);
    for (k, sub) in substrates.iter().enumerate() {
        for j in 0..n_sl {
            cols.push(WeightColumn {
                substrate: *sub,
                slice: SliceId(j),
                values: series.records.iter().map(|r| r.allocation.get(k, j)).collect(),
            });
        }
    }
    Ok(cols)
}

fn var_label(sub: &SubstrateId, slice: usize) -> String {
    format!("{sub}_s{slice}")
}

fn parse_var_label(label: &str) -> Option<(SubstrateId, usize)> {
    let (sub, slice) = label.rsplit_once("_s")?;
    let slice = slice.parse().ok()?;
    let (kind, idx) = if let Some(rest) = sub.strip_prefix("bts") {
        (SubstrateKind::ScheduledBasestation, rest)
    } else {
        let rest = sub.strip_prefix("ap")?;
        (SubstrateKind::ContentionAccessPoint, rest)
    };
    Some((
        SubstrateId {
            index: idx.parse().ok()?,
            kind,
        },
        slice,
    ))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> MetricsError + '_ {
    move |source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> MetricsError + '_ {
    move |source| MetricsError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn normalized_of(r: &CycleRecord) -> f64 {
    if r.static_revenue > 0.0 {
        r.dynamic_revenue / r.static_revenue
    } else {
        f64::NAN
    }
}

pub fn write_revenue_csv(
    series: &MetricsSeries,
    substrates: &[SubstrateId],
    path: &Path,
) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let n_sl = series.records.first().map_or(0, |r| r.allocation.n_slices());
    let mut header: Vec<String> = [
        "cycle",
        "policy_version",
        "status",
        "dynamic_revenue",
        "static_revenue",
        "normalized_revenue",
        "improvement_pct",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for sub in substrates {
        for j in 0..n_sl {
            header.push(format!("c_{}", var_label(sub, j)));
        }
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for r in &series.records {
        let norm = normalized_of(r);
        let mut row = vec![
            r.cycle.to_string(),
            r.policy_version.to_string(),
            r.status.as_str().to_string(),
            r.dynamic_revenue.to_string(),
            r.static_revenue.to_string(),
            norm.to_string(),
            ((norm - 1.0) * 100.0).to_string(),
        ];
        row.extend(r.coefficients.iter().flatten().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_weights_csv(
    series: &MetricsSeries,
    substrates: &[SubstrateId],
    path: &Path,
) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let n_sl = series.records.first().map_or(0, |r| r.allocation.n_slices());
    let mut header = vec!["cycle".to_string()];
    for sub in substrates {
        for j in 0..n_sl {
            header.push(format!("t_{}", var_label(sub, j)));
        }
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for r in &series.records {
        let mut row = vec![r.cycle.to_string()];
        row.extend(r.allocation.flatten().iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `revenue.csv` and `weights.csv` under `dir`.
pub fn emit_series(
    series: &MetricsSeries,
    substrates: &[SubstrateId],
    dir: &Path,
) -> Result<(PathBuf, PathBuf), MetricsError> {
    let revenue = dir.join("revenue.csv");
    let weights = dir.join("weights.csv");
    write_revenue_csv(series, substrates, &revenue)?;
    write_weights_csv(series, substrates, &weights)?;
    Ok((revenue, weights))
}

fn parse_f64(path: &Path, field: &str) -> Result<f64, MetricsError> {
    field.parse().map_err(|_| MetricsError::Parse {
        path: path.to_path_buf(),
        message: format!("bad number '{field}'"),
    })
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), MetricsError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(csv_err(path))?;
    Ok((header, rows))
}

/// Inverse of [`emit_series`]: rebuilds the records and substrate list.
pub fn read_series(
    revenue_path: &Path,
    weights_path: &Path,
    config_digest: &str,
) -> Result<(MetricsSeries, Vec<SubstrateId>), MetricsError> {
    let bad = |path: &Path, message: String| MetricsError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let (wh, wrows) = read_rows(weights_path)?;
    let vars: Vec<(SubstrateId, usize)> = wh[1..]
        .iter()
        .map(|h| {
            h.strip_prefix("t_")
                .and_then(parse_var_label)
                .ok_or_else(|| bad(weights_path, format!("bad column '{h}'")))
        })
        .collect::<Result<_, _>>()?;
    let mut substrates: Vec<SubstrateId> = Vec::new();
    for (s, _) in &vars {
        if !substrates.contains(s) {
            substrates.push(*s);
        }
    }
    let n_sub = substrates.len();
    let n_sl = if n_sub == 0 { 0 } else { vars.len() / n_sub };

    let (_, rrows) = read_rows(revenue_path)?;
    if rrows.len() != wrows.len() {
        return Err(bad(revenue_path, "row count differs from weights".into()));
    }
    let mut records = Vec::with_capacity(rrows.len());
    for (rr, wr) in rrows.iter().zip(&wrows) {
        let field = |i: usize| rr.get(i).unwrap_or("");
        let cycle: u64 = field(0)
            .parse()
            .map_err(|_| bad(revenue_path, format!("bad cycle '{}'", field(0))))?;
        let status = CycleStatus::parse(field(2))
            .ok_or_else(|| bad(revenue_path, format!("bad status '{}'", field(2))))?;
        let coeffs: Vec<f64> = (7..7 + n_sub * n_sl)
            .map(|i| parse_f64(revenue_path, field(i)))
            .collect::<Result<_, _>>()?;
        let weights: Vec<f64> = wr
            .iter()
            .skip(1)
            .map(|v| parse_f64(weights_path, v))
            .collect::<Result<_, _>>()?;
        let to_rows = |flat: Vec<f64>| -> Vec<Vec<f64>> {
            if n_sl == 0 {
                return vec![];
            }
            flat.chunks(n_sl).map(<[f64]>::to_vec).collect()
        };
        records.push(CycleRecord {
            cycle,
            policy_version: field(1)
                .parse()
                .map_err(|_| bad(revenue_path, "bad policy_version".into()))?,
            status,
            dynamic_revenue: parse_f64(revenue_path, field(3))?,
            static_revenue: parse_f64(revenue_path, field(4))?,
            coefficients: to_rows(coeffs),
            allocation: AllocationMatrix::from_rows(to_rows(weights))
                .map_err(|e| bad(weights_path, e.to_string()))?,
        });
    }
    Ok((
        MetricsSeries {
            records,
            config_digest: config_digest.to_string(),
        },
        substrates,
    ))
}

/// Run-level summary written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub preset: Option<String>,
    pub config_digest: String,
    pub seed: u64,
    pub n_cycles: u64,
    pub infeasible_cycles: u64,
    pub mean_improvement_pct: f64,
    pub best_improvement_pct: f64,
    pub raw_improvement_pct: f64,
    pub mean_dynamic_revenue: f64,
    pub mean_static_revenue: f64,
}

impl Summary {
    pub fn new(series: &MetricsSeries, stats: &ImprovementStats, seed: u64, preset: Option<&str>) -> Self {
        let n = series.records.len().max(1) as f64;
        Summary {
            preset: preset.map(str::to_string),
            config_digest: series.config_digest.clone(),
            seed,
            n_cycles: series.records.len() as u64,
            infeasible_cycles: series
                .records
                .iter()
                .filter(|r| r.status == CycleStatus::Infeasible)
                .count() as u64,
            mean_improvement_pct: stats.mean_improvement_pct,
            best_improvement_pct: stats.best_improvement_pct,
            raw_improvement_pct: stats.raw_improvement_pct,
            mean_dynamic_revenue: series.records.iter().map(|r| r.dynamic_revenue).sum::<f64>() / n,
            mean_static_revenue: series.records.iter().map(|r| r.static_revenue).sum::<f64>() / n,
        }
    }
}

pub fn write_cdf_csv(stats: &ImprovementStats, path: &Path) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["normalized_revenue", "cumulative_probability"])
        .map_err(csv_err(path))?;
    for (x, p) in &stats.cdf_points {
        w.write_record([x.to_string(), p.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `summary.json` and `cdf.csv` under `dir`.
pub fn emit_stats(
    summary: &Summary,
    stats: &ImprovementStats,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), MetricsError> {
    let summary_path = dir.join("summary.json");
    let cdf_path = dir.join("cdf.csv");
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    fs::write(&summary_path, text).map_err(io_err(&summary_path))?;
    write_cdf_csv(stats, &cdf_path)?;
    Ok((summary_path, cdf_path))
}
