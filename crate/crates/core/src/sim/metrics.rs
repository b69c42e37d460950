use serde::{Deserialize, Serialize};

use super::eventlog::{EventKind, EventLog};
use crate::engine::DropReason;

/// Mock-LBS evaluation of served answers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerStats {
    pub checked: usize,
    pub correct: usize,
    pub containment_failures: usize,
    pub sample: usize,
    pub sample_candidates: usize,
    pub sample_wall_ms: f64,
}

/// Deterministic per-run aggregates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub algorithm: String,
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub issued: usize,
    pub served: usize,
    pub expired: usize,
    pub unanonymizable: usize,
    pub success_rate: f64,
    /// Mean virtual seconds from issue to serve.
    pub anonymization_time: f64,
    pub mean_region_segments: f64,
    pub candidate_size: f64,
    pub answers_checked: usize,
    pub answers_correct: usize,
    pub containment_failures: usize,
    pub mean_normalized_entropy: Option<f64>,
    pub empty: bool,
}

/// Wall-clock measurements, kept apart so metrics files stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub algorithm: String,
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub anonymizer_seconds: f64,
    pub query_processing_ms: f64,
    /// Issued queries per anonymizer second times the success rate.
    pub throughput: f64,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn collect_metrics(log: &EventLog, answers: &AnswerStats) -> MetricsRecord {
    let issued = log.count(EventKind::Issue);
    let serves: Vec<_> = log.rows.iter().filter(|r| r.event == EventKind::Serve).collect();
    let drops = |reason| {
        log.rows
            .iter()
            .filter(|r| r.event == EventKind::Drop && r.reason == Some(reason))
            .count()
    };
    MetricsRecord {
        issued,
        served: serves.len(),
        expired: drops(DropReason::Expired),
        unanonymizable: drops(DropReason::Unanonymizable),
        success_rate: mean(serves.len() as f64, issued),
        anonymization_time: mean(serves.iter().filter_map(|r| r.latency).sum(), serves.len()),
        mean_region_segments: mean(serves.iter().filter_map(|r| r.size).sum::<usize>() as f64, serves.len()),
        candidate_size: mean(answers.sample_candidates as f64, answers.sample),
        answers_checked: answers.checked,
        answers_correct: answers.correct,
        containment_failures: answers.containment_failures,
        empty: issued == 0,
        ..MetricsRecord::default()
    }
}

pub fn collect_timing(metrics: &MetricsRecord, answers: &AnswerStats, anonymizer_seconds: f64) -> TimingRecord {
    let rate = if anonymizer_seconds > 0.0 {
        metrics.issued as f64 / anonymizer_seconds
    } else {
        0.0
    };
    TimingRecord {
        algorithm: metrics.algorithm.clone(),
        sweep_param: metrics.sweep_param.clone(),
        sweep_value: metrics.sweep_value,
        seed: metrics.seed,
        anonymizer_seconds,
        query_processing_ms: mean(answers.sample_wall_ms, answers.sample),
        throughput: rate * metrics.success_rate,
    }
}
