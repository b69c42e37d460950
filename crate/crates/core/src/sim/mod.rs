//! Discrete-event simulation: moving objects issue queries, an anonymizer
//! cloaks them, and a mock LBS answers over the cloaked regions.

mod eventlog;
mod metrics;
mod mobility;
mod poi;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use eventlog::{EventKind, EventLog, LogRow};
pub use metrics::{collect_metrics, collect_timing, AnswerStats, MetricsRecord, TimingRecord};
pub use mobility::{advance, generate_trace, MovingObject, SpeedClass, TraceQuery, World};
pub use poi::{Poi, PoiStore};

use crate::algorithm::Algorithm;
use crate::baseline::BaselineEngine;
use crate::config::{Params, RunConfig};
use crate::engine::{CloakedRegion, Engine, EngineEvent};
use crate::error::Result;
use crate::ids::QueryId;
use crate::network::{Position, RoadMap};
use crate::query::{Query, RawQuery};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub objects: usize,
    pub duration: f64,
    pub dt: f64,
    pub fast_fraction: f64,
    pub fast_speed: f64,
    pub slow_speed: f64,
    pub params: Params,
    pub poi_classes: u32,
    pub class_filter: bool,
    pub metric_sample: usize,
    pub check_answers: bool,
}

impl SimConfig {
    pub fn from_run(cfg: &RunConfig) -> Self {
        SimConfig {
            seed: cfg.seed,
            objects: cfg.sim.objects,
            duration: cfg.sim.duration,
            dt: cfg.sim.dt,
            fast_fraction: cfg.sim.fast_fraction,
            fast_speed: cfg.sim.fast_speed,
            slow_speed: cfg.sim.slow_speed,
            params: cfg.params.clone(),
            poi_classes: cfg.pois.classes,
            class_filter: cfg.pois.class_filter,
            metric_sample: cfg.metrics.sample,
            check_answers: cfg.metrics.check_answers,
        }
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::from_run(&RunConfig::default())
    }
}

/// Common driver interface of the engine and the baselines.
pub trait Anonymizer {
    fn submit_at(&mut self, raw: &RawQuery, position: Position) -> Result<QueryId>;
    fn step(&mut self, now: f64) -> Vec<EngineEvent>;
    fn is_idle(&self) -> bool;
}

impl Anonymizer for Engine {
    fn submit_at(&mut self, raw: &RawQuery, position: Position) -> Result<QueryId> {
        Engine::submit_at(self, raw, position)
    }

    fn step(&mut self, now: f64) -> Vec<EngineEvent> {
        Engine::step(self, now)
    }

    fn is_idle(&self) -> bool {
        Engine::is_idle(self)
    }
}

impl Anonymizer for BaselineEngine {
    fn submit_at(&mut self, raw: &RawQuery, position: Position) -> Result<QueryId> {
        BaselineEngine::submit_at(self, raw, position)
    }

    fn step(&mut self, now: f64) -> Vec<EngineEvent> {
        BaselineEngine::step(self, now)
    }

    fn is_idle(&self) -> bool {
        BaselineEngine::is_idle(self)
    }
}

/// Builds the anonymizer a run config selects.
pub fn make_anonymizer(map: Arc<RoadMap>, cfg: &RunConfig, algorithm: Algorithm) -> Result<Box<dyn Anonymizer>> {
    Ok(match algorithm.baseline() {
        Some(kind) => {
            let mut b = BaselineEngine::new(map, kind, cfg.engine.reach, cfg.seed);
            b.set_verify(cfg.engine.verify || cfg!(debug_assertions));
            Box::new(b)
        }
        None => Box::new(Engine::new(map, cfg.engine_config(algorithm))?),
    })
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub log: EventLog,
    pub regions: Vec<CloakedRegion>,
    pub answers: AnswerStats,
    pub anonymizer_seconds: f64,
}

impl SimOutcome {
    pub fn served(&self) -> impl Iterator<Item = (&Query, &CloakedRegion)> {
        self.regions
            .iter()
            .flat_map(|r| r.served.iter().map(move |s| (&s.query, r)))
    }
}

fn tick_time(tick: u64, dt: f64) -> f64 {
    (tick as f64 * dt * 1e6).round() / 1e6
}

/// Feeds a trace through `anon` tick by tick until every query resolves.
pub fn run_trace(trace: &[TraceQuery], anon: &mut dyn Anonymizer, sim: &SimConfig) -> (EventLog, Vec<CloakedRegion>, f64) {
    let mut log = EventLog::default();
    let mut regions = Vec::new();
    let mut wall = 0.0;
    let mut next = 0;
    let mut tick = 0u64;
    loop {
        tick += 1;
        let now = tick_time(tick, sim.dt);
        let start = Instant::now();
        while next < trace.len() && trace[next].raw.time <= now {
            let tq = &trace[next];
            next += 1;
            match anon.submit_at(&tq.raw, tq.position) {
                Ok(id) => log.push(LogRow {
                    time: tq.raw.time,
                    event: EventKind::Issue,
                    query: id.to_string(),
                    user: tq.raw.user.0,
                    segment: tq.position.segment.0,
                    region: None,
                    size: None,
                    reason: None,
                    latency: None,
                }),
                Err(e) => log::warn!("query from user {} rejected: {e}", tq.raw.user),
            }
        }
        let events = anon.step(now);
        wall += start.elapsed().as_secs_f64();
        for ev in events {
            match ev {
                EngineEvent::Served(region) => {
                    for s in &region.served {
                        log.push(LogRow {
                            time: now,
                            event: EventKind::Serve,
                            query: s.query.id.to_string(),
                            user: s.query.user.0,
                            segment: s.query.position.segment.0,
                            region: Some(region.id.0),
                            size: Some(region.segments.len()),
                            reason: None,
                            latency: Some(now - s.query.time),
                        });
                    }
                    regions.push(region);
                }
                EngineEvent::Dropped { query, time, reason } => log.push(LogRow {
                    time,
                    event: EventKind::Drop,
                    query: query.id.to_string(),
                    user: query.user.0,
                    segment: query.position.segment.0,
                    region: None,
                    size: None,
                    reason: Some(reason),
                    latency: Some(time - query.time),
                }),
            }
        }
        if next == trace.len() && now >= sim.duration && anon.is_idle() {
            break;
        }
    }
    (log, regions, wall)
}

/// Mock-LBS evaluation: exact-answer checks and the timed sample.
pub fn evaluate_answers(map: &RoadMap, pois: &PoiStore, regions: &[CloakedRegion], sim: &SimConfig) -> AnswerStats {
    let served: Vec<(&Query, &CloakedRegion)> = regions
        .iter()
        .flat_map(|r| r.served.iter().map(move |s| (&s.query, r)))
        .collect();
    let class = |q: &Query| sim.class_filter.then_some(q.class);
    let mut stats = AnswerStats::default();
    if sim.check_answers {
        let checks: Vec<(bool, bool)> = served
            .par_iter()
            .map(|(q, r)| {
                let cand = pois.candidate_result(map, q, &r.segments, &r.border, class(q));
                let got = pois.filter_result(map, q, &cand);
                let exact = pois.exact_knn(map, q, class(q));
                (got == exact, exact.iter().all(|o| cand.contains(o)))
            })
            .collect();
        stats.checked = checks.len();
        stats.correct = checks.iter().filter(|c| c.0).count();
        stats.containment_failures = checks.iter().filter(|c| !c.1).count();
    }
    let n = sim.metric_sample.min(served.len());
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, served.len(), n).into_vec();
    picks.sort_unstable();
    for i in picks {
        let (q, r) = served[i];
        let start = Instant::now();
        let cand: BTreeSet<u64> = pois.candidate_result(map, q, &r.segments, &r.border, class(q));
        let _ = pois.filter_result(map, q, &cand);
        stats.sample_wall_ms += start.elapsed().as_secs_f64() * 1e3;
        stats.sample_candidates += cand.len();
        stats.sample += 1;
    }
    stats
}

/// Generates the trace, runs it through `anon`, and evaluates the answers.
pub fn simulate(map: &RoadMap, pois: &PoiStore, anon: &mut dyn Anonymizer, sim: &SimConfig) -> SimOutcome {
    let trace = generate_trace(map, sim);
    simulate_trace(map, pois, &trace, anon, sim)
}

pub fn simulate_trace(
    map: &RoadMap,
    pois: &PoiStore,
    trace: &[TraceQuery],
    anon: &mut dyn Anonymizer,
    sim: &SimConfig,
) -> SimOutcome {
    let (log, regions, wall) = run_trace(trace, anon, sim);
    let answers = evaluate_answers(map, pois, &regions, sim);
    SimOutcome {
        log,
        regions,
        answers,
        anonymizer_seconds: wall,
    }
}

/// One algorithm at one sweep point: the run plus its metrics and timing rows.
#[derive(Debug, Clone)]
pub struct PointRun {
    pub metrics: MetricsRecord,
    pub timing: TimingRecord,
    pub outcome: SimOutcome,
}

pub fn run_point(
    map: &Arc<RoadMap>,
    pois: &PoiStore,
    cfg: &RunConfig,
    algorithm: Algorithm,
    sweep_param: &str,
    sweep_value: Option<f64>,
) -> Result<PointRun> {
    let sim = SimConfig::from_run(cfg);
    let mut anon = make_anonymizer(map.clone(), cfg, algorithm)?;
    let outcome = simulate(map, pois, anon.as_mut(), &sim);
    let mut metrics = collect_metrics(&outcome.log, &outcome.answers);
    metrics.algorithm = algorithm.name().to_string();
    metrics.sweep_param = sweep_param.to_string();
    metrics.sweep_value = sweep_value;
    metrics.seed = cfg.seed;
    let timing = collect_timing(&metrics, &outcome.answers, outcome.anonymizer_seconds);
    Ok(PointRun {
        metrics,
        timing,
        outcome,
    })
}
