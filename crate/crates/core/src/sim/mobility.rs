//! Network-constrained random-waypoint movement and query issuance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::ids::{SegmentId, UserId};
use crate::network::{End, Position, RoadMap};
use crate::query::{clip_count, clip_time, QueryProfile, RawQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedClass {
    Fast,
    Slow,
}

#[derive(Debug, Clone)]
pub struct MovingObject {
    pub id: UserId,
    pub class: SpeedClass,
    /// Meters per virtual second.
    pub speed: f64,
    pub position: Position,
    /// Heading toward the segment's end node.
    pub forward: bool,
    /// Waiting time drawn with the current query.
    pub gamma: f64,
    pub next_query: f64,
    motion: ChaCha8Rng,
    draws: ChaCha8Rng,
}

/// A query as issued, with the issuer's exact position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceQuery {
    pub raw: RawQuery,
    pub position: Position,
}

/// Moves `dist` meters from `pos` and returns the new position and heading.
pub fn advance<R: Rng + ?Sized>(
    map: &RoadMap,
    mut pos: Position,
    mut forward: bool,
    mut dist: f64,
    rng: &mut R,
) -> (Position, bool) {
    loop {
        let seg = map.segments.get(pos.segment);
        let remaining = if forward { seg.length - pos.offset } else { pos.offset };
        if dist < remaining {
            pos.offset += if forward { dist } else { -dist };
            return (pos, forward);
        }
        dist -= remaining;
        let node = if forward { seg.end() } else { seg.start() };
        let arrived = if forward { End::End } else { End::Start };
        let exits: Vec<(SegmentId, End)> = map
            .segments
            .at_terminal(node)
            .iter()
            .copied()
            .filter(|&(s, e)| !(s == pos.segment && e == arrived))
            .collect();
        let (next, end) = if exits.is_empty() {
            (pos.segment, arrived)
        } else {
            exits[rng.random_range(0..exits.len())]
        };
        let len = map.segments.get(next).length;
        pos = Position {
            segment: next,
            offset: if end == End::Start { 0.0 } else { len },
        };
        forward = end == End::Start;
        if dist <= 0.0 {
            return (pos, forward);
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

impl MovingObject {
    fn new(map: &RoadMap, cfg: &SimConfig, index: u64) -> Self {
        let mut motion = ChaCha8Rng::seed_from_u64(cfg.seed);
        motion.set_stream(2 * index);
        let mut draws = ChaCha8Rng::seed_from_u64(cfg.seed);
        draws.set_stream(2 * index + 1);
        let seg = SegmentId(motion.random_range(0..map.segments.len() as u32));
        let len = map.segments.get(seg).length;
        let position = Position {
            segment: seg,
            offset: motion.random::<f64>() * len,
        };
        let forward = motion.random::<bool>();
        let class = if motion.random::<f64>() < cfg.fast_fraction {
            SpeedClass::Fast
        } else {
            SpeedClass::Slow
        };
        let speed = match class {
            SpeedClass::Fast => cfg.fast_speed,
            SpeedClass::Slow => cfg.slow_speed,
        };
        let next_query = draws.random::<f64>() * cfg.params.gamma.mean.max(0.0);
        MovingObject {
            id: UserId(index + 1),
            class,
            speed,
            position,
            forward,
            gamma: 0.0,
            next_query,
            motion,
            draws,
        }
    }

    fn issue(&mut self, map: &RoadMap, cfg: &SimConfig, now: f64) -> TraceQuery {
        let p = &cfg.params;
        let z: [f64; 6] = std::array::from_fn(|_| normal(&mut self.draws));
        let class_draw = self.draws.random::<f64>();
        let knn_k = clip_count(p.knn_k.mean + p.knn_k.sd * z[0]);
        let profile = QueryProfile {
            delta_k: clip_count(p.delta_k.mean + p.delta_k.sd * z[1]),
            delta_l: clip_count(p.delta_l.mean + p.delta_l.sd * z[2]),
            sigma_s: clip_count(p.sigma_s.mean + p.sigma_s.sd * z[3]),
            sigma_t: clip_time(p.sigma_t.mean + p.sigma_t.sd * z[4]),
        };
        self.gamma = clip_time(p.gamma.mean + p.gamma.sd * z[5]);
        self.next_query = now + profile.sigma_t + self.gamma;
        let classes = cfg.poi_classes.max(1);
        let class = ((class_draw * classes as f64) as u32).min(classes - 1);
        TraceQuery {
            raw: RawQuery {
                user: self.id,
                time: now,
                point: map.point_at(self.position),
                knn_k,
                class,
                profile,
            },
            position: self.position,
        }
    }
}

/// All moving objects and the virtual clock.
pub struct World {
    pub objects: Vec<MovingObject>,
    pub tick: u64,
    pub dt: f64,
}

impl World {
    pub fn new(map: &RoadMap, cfg: &SimConfig) -> Self {
        World {
            objects: (0..cfg.objects as u64).map(|i| MovingObject::new(map, cfg, i)).collect(),
            tick: 0,
            dt: cfg.dt,
        }
    }

    pub fn now(&self) -> f64 {
        (self.tick as f64 * self.dt * 1e6).round() / 1e6
    }

    /// Advances one tick and returns the queries issued at the new time.
    pub fn step(&mut self, map: &RoadMap, cfg: &SimConfig) -> Vec<TraceQuery> {
        self.tick += 1;
        let now = self.now();
        let mut out = Vec::new();
        for o in &mut self.objects {
            let (pos, fwd) = advance(map, o.position, o.forward, o.speed * self.dt, &mut o.motion);
            o.position = pos;
            o.forward = fwd;
            if o.next_query <= now {
                out.push(o.issue(map, cfg, now));
            }
        }
        out
    }
}

/// Every query issued during the configured duration, tick by tick.
pub fn generate_trace(map: &RoadMap, cfg: &SimConfig) -> Vec<TraceQuery> {
    let mut world = World::new(map, cfg);
    let ticks = (cfg.duration / cfg.dt).round() as u64;
    let mut out = Vec::new();
    for _ in 0..ticks {
        out.extend(world.step(map, cfg));
    }
    out
}
