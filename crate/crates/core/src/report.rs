//! CSV outputs and comparison tables with sweep-value rows and algorithm columns.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::attack::AttackRow;
use crate::error::{Error, Result};
use crate::sim::{MetricsRecord, TimingRecord};

pub fn write_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Report(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Report(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Report(format!("{}: {e}", path.display())))
}

/// One metric laid out as sweep rows by algorithm columns, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metric: String,
    pub axis: String,
    pub algorithms: Vec<String>,
    pub rows: Vec<(Option<f64>, Vec<Option<f64>>)>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let axis = if self.axis.is_empty() { "point" } else { &self.axis };
        out.push_str(axis);
        for a in &self.algorithms {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (v, cells) in &self.rows {
            out.push_str(&v.map_or_else(String::new, |v| v.to_string()));
            for c in cells {
                out.push(',');
                if let Some(c) = c {
                    out.push_str(&c.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, algorithm: &str, value: Option<f64>) -> Option<f64> {
        let col = self.algorithms.iter().position(|a| a == algorithm)?;
        self.rows.iter().find(|(v, _)| *v == value)?.1[col]
    }
}

fn tabulate<'a>(
    metric: &str,
    axis: &str,
    points: impl Iterator<Item = (&'a str, Option<f64>, Option<f64>)>,
) -> Table {
    let mut acc: BTreeMap<Option<u64>, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    let mut algorithms = BTreeSet::new();
    for (alg, value, x) in points {
        algorithms.insert(alg.to_string());
        let cell = acc
            .entry(value.map(f64::to_bits))
            .or_default()
            .entry(alg.to_string())
            .or_insert((0.0, 0));
        if let Some(x) = x {
            cell.0 += x;
            cell.1 += 1;
        }
    }
    let algorithms: Vec<String> = algorithms.into_iter().collect();
    let mut rows: Vec<(Option<f64>, Vec<Option<f64>>)> = acc
        .into_iter()
        .map(|(v, cells)| {
            let v = v.map(f64::from_bits);
            let row = algorithms
                .iter()
                .map(|a| cells.get(a).filter(|c| c.1 > 0).map(|c| c.0 / c.1 as f64))
                .collect();
            (v, row)
        })
        .collect();
    rows.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (x, y) => x.is_some().cmp(&y.is_some()),
    });
    Table {
        metric: metric.to_string(),
        axis: axis.to_string(),
        algorithms,
        rows,
    }
}

fn check_axes<'a>(records: impl Iterator<Item = (&'a str, &'a str, Option<f64>)>) -> Result<String> {
    let mut axis: Option<&str> = None;
    let mut values: BTreeMap<&str, BTreeSet<Option<u64>>> = BTreeMap::new();
    for (alg, param, value) in records {
        match axis {
            None => axis = Some(param),
            Some(a) if a != param => {
                return Err(Error::Report(format!("mismatched sweep axes: `{a}` and `{param}`")));
            }
            _ => {}
        }
        values.entry(alg).or_default().insert(value.map(f64::to_bits));
    }
    let mut sets = values.iter();
    if let Some((first_alg, first)) = sets.next() {
        for (alg, set) in sets {
            if set != first {
                return Err(Error::Report(format!(
                    "mismatched sweep axes: {alg} and {first_alg} cover different values"
                )));
            }
        }
    }
    Ok(axis.unwrap_or_default().to_string())
}

pub fn metric_tables(metrics: &[MetricsRecord], timing: &[TimingRecord]) -> Result<Vec<Table>> {
    if metrics.is_empty() {
        return Err(Error::Report("no metrics records".into()));
    }
    let axis = check_axes(metrics.iter().map(|m| (m.algorithm.as_str(), m.sweep_param.as_str(), m.sweep_value)))?;
    let of = |name: &str, f: fn(&MetricsRecord) -> Option<f64>| {
        tabulate(name, &axis, metrics.iter().map(|m| (m.algorithm.as_str(), m.sweep_value, f(m))))
    };
    let mut tables = vec![
        of("success_rate", |m| Some(m.success_rate)),
        of("anonymization_time", |m| Some(m.anonymization_time)),
        of("candidate_size", |m| Some(m.candidate_size)),
        of("region_segments", |m| Some(m.mean_region_segments)),
    ];
    if metrics.iter().any(|m| m.mean_normalized_entropy.is_some()) {
        tables.push(of("normalized_entropy", |m| m.mean_normalized_entropy));
    }
    if !timing.is_empty() {
        let t_axis = check_axes(timing.iter().map(|t| (t.algorithm.as_str(), t.sweep_param.as_str(), t.sweep_value)))?;
        if t_axis != axis {
            return Err(Error::Report(format!("mismatched sweep axes: `{axis}` and `{t_axis}`")));
        }
        let of = |name: &str, f: fn(&TimingRecord) -> f64| {
            tabulate(name, &axis, timing.iter().map(|t| (t.algorithm.as_str(), t.sweep_value, Some(f(t)))))
        };
        tables.push(of("throughput", |t| t.throughput));
        tables.push(of("query_processing_ms", |t| t.query_processing_ms));
    }
    Ok(tables)
}

/// Mean normalized entropy by injection count and algorithm.
pub fn attack_table(rows: &[AttackRow]) -> Table {
    let mut t = tabulate(
        "normalized_entropy",
        "injections",
        rows.iter().map(|r| (r.algorithm.name(), Some(r.injections as f64), Some(r.normalized_entropy))),
    );
    t.metric = "attack_normalized_entropy".into();
    t
}

pub fn write_tables(tables: &[Table], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("table_{}.csv", t.metric));
            std::fs::write(&path, t.to_csv()).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alg: &str, v: f64, sr: f64) -> MetricsRecord {
        MetricsRecord {
            algorithm: alg.into(),
            sweep_param: "sigma_s".into(),
            sweep_value: Some(v),
            success_rate: sr,
            ..Default::default()
        }
    }

    #[test]
    fn averages_over_seeds() {
        let m = vec![rec("basic", 2.0, 0.5), rec("basic", 2.0, 0.7), rec("random", 2.0, 0.4)];
        let t = &metric_tables(&m, &[]).unwrap()[0];
        assert_eq!(t.algorithms, vec!["basic", "random"]);
        assert!((t.get("basic", Some(2.0)).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(t.to_csv().lines().next(), Some("sigma_s,basic,random"));
    }

    #[test]
    fn mismatched_axes_rejected() {
        let mut other = rec("random", 3.0, 0.1);
        other.sweep_param = "delta_k".into();
        assert!(metric_tables(&[rec("basic", 2.0, 0.5), other], &[]).is_err());
        assert!(metric_tables(&[rec("basic", 2.0, 0.5), rec("random", 3.0, 0.5)], &[]).is_err());
    }
}
