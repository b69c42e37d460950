//! Query profiles, pre-processing, the FIFO queue and the expiration heap.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::{QueryId, UserId};
use crate::network::{GeoPoint, Position, RoadMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryProfile {
    pub delta_k: u32,
    pub delta_l: u32,
    /// Hops.
    pub sigma_s: u32,
    /// Virtual seconds.
    pub sigma_t: f64,
}

impl QueryProfile {
    /// Clips real-valued draws into a valid profile.
    pub fn from_draws(delta_k: f64, delta_l: f64, sigma_s: f64, sigma_t: f64) -> Self {
        QueryProfile {
            delta_k: clip_count(delta_k),
            delta_l: clip_count(delta_l),
            sigma_s: clip_count(sigma_s),
            sigma_t: clip_time(sigma_t),
        }
    }
}

pub fn clip_count(x: f64) -> u32 {
    if x.is_nan() {
        1
    } else {
        x.round().clamp(1.0, u32::MAX as f64) as u32
    }
}

pub fn clip_time(x: f64) -> f64 {
    if x.is_nan() {
        0.1
    } else {
        x.max(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawQuery {
    pub user: UserId,
    pub time: f64,
    pub point: GeoPoint,
    pub knn_k: u32,
    pub class: u32,
    pub profile: QueryProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: QueryId,
    pub user: UserId,
    pub time: f64,
    pub position: Position,
    pub knn_k: u32,
    pub class: u32,
    pub profile: QueryProfile,
    pub t_exp: f64,
}

/// 64-bit digest of the user id concatenated with the issue time.
pub fn query_id(user: UserId, time: f64) -> QueryId {
    let digest = Sha256::new()
        .chain_update(user.0.to_be_bytes())
        .chain_update(time.to_bits().to_be_bytes())
        .finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    QueryId(u64::from_be_bytes(head))
}

/// FIFO of query ids with lazy removal.
#[derive(Debug, Clone, Default)]
pub struct QueryQueue {
    order: VecDeque<QueryId>,
    live: HashSet<QueryId>,
}

impl QueryQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, id: QueryId) {
        if self.live.insert(id) {
            self.order.push_back(id);
        }
    }

    pub fn pop(&mut self) -> Option<QueryId> {
        while let Some(id) = self.order.pop_front() {
            if self.live.remove(&id) {
                return Some(id);
            }
        }
        None
    }

    pub fn remove(&mut self, id: QueryId) -> bool {
        self.live.remove(&id)
    }

    pub fn contains(&self, id: QueryId) -> bool {
        self.live.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = QueryId> + '_ {
        self.order.iter().copied().filter(|id| self.live.contains(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, u64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-heap on expiration time with removal support. Equal keys pop in insertion order.
#[derive(Debug, Clone, Default)]
pub struct ExpirationHeap {
    heap: BinaryHeap<Reverse<(Key, QueryId)>>,
    live: HashMap<QueryId, Key>,
    seq: u64,
}

impl ExpirationHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: QueryId, t_exp: f64) {
        let key = Key(t_exp, self.seq);
        self.seq += 1;
        if self.live.insert(id, key).is_none() {
            self.heap.push(Reverse((key, id)));
        } else {
            self.heap.push(Reverse((key, id)));
        }
    }

    pub fn remove(&mut self, id: QueryId) -> bool {
        self.live.remove(&id).is_some()
    }

    fn skip_dead(&mut self) {
        while let Some(Reverse((key, id))) = self.heap.peek() {
            if self.live.get(id) == Some(key) {
                break;
            }
            self.heap.pop();
        }
    }

    pub fn peek(&mut self) -> Option<(f64, QueryId)> {
        self.skip_dead();
        self.heap.peek().map(|Reverse((k, id))| (k.0, *id))
    }

    /// Removes and returns entries with `t_exp <= now`, soonest first.
    pub fn pop_expired(&mut self, now: f64) -> Vec<(f64, QueryId)> {
        let mut out = Vec::new();
        while let Some((t, id)) = self.peek() {
            if t > now {
                break;
            }
            self.heap.pop();
            self.live.remove(&id);
            out.push((t, id));
        }
        out
    }

    /// Live entries with `t_exp <= horizon`, soonest first, without removing them.
    pub fn due_within(&self, horizon: f64) -> Vec<(f64, QueryId)> {
        let mut due: Vec<(Key, QueryId)> = self
            .live
            .iter()
            .filter(|(_, k)| k.0 <= horizon)
            .map(|(id, k)| (*k, *id))
            .collect();
        due.sort();
        due.into_iter().map(|(k, id)| (k.0, id)).collect()
    }

    pub fn contains(&self, id: QueryId) -> bool {
        self.live.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }
}

/// Owns every live query plus the queue and heap that index them.
#[derive(Debug, Clone, Default)]
pub struct Intake {
    pub queue: QueryQueue,
    pub heap: ExpirationHeap,
    queries: BTreeMap<QueryId, Query>,
    seen: HashSet<QueryId>,
}

impl Intake {
    pub fn new() -> Self {
        Self::default()
    }

    /// Locates, hashes and enqueues a raw query.
    pub fn preprocess(&mut self, raw: &RawQuery, map: &RoadMap) -> Result<QueryId> {
        let position = map.locate(raw.point)?;
        self.admit(raw, position)
    }

    /// Like [`preprocess`](Self::preprocess) with an already resolved position.
    pub fn admit(&mut self, raw: &RawQuery, position: Position) -> Result<QueryId> {
        let id = query_id(raw.user, raw.time);
        if !self.seen.insert(id) {
            return Err(Error::DuplicateQuery {
                user: raw.user.0,
                time: raw.time,
            });
        }
        let q = Query {
            id,
            user: raw.user,
            time: raw.time,
            position,
            knn_k: raw.knn_k.max(1),
            class: raw.class,
            profile: raw.profile,
            t_exp: raw.time + raw.profile.sigma_t,
        };
        self.queue.push(id);
        self.heap.insert(id, q.t_exp);
        self.queries.insert(id, q);
        Ok(id)
    }

    pub fn get(&self, id: QueryId) -> Option<&Query> {
        self.queries.get(&id)
    }

    pub fn query(&self, id: QueryId) -> Result<&Query> {
        self.queries.get(&id).ok_or(Error::UnknownQuery(id))
    }

    pub fn live(&self) -> impl Iterator<Item = &Query> {
        self.queries.values()
    }

    pub fn live_count(&self) -> usize {
        self.queries.len()
    }

    /// Next queued query; it stays live (and in the heap) until removed.
    pub fn pop_next(&mut self) -> Option<QueryId> {
        self.queue.pop()
    }

    pub fn pop_expired(&mut self, now: f64) -> Vec<Query> {
        self.heap
            .pop_expired(now)
            .into_iter()
            .filter_map(|(_, id)| {
                self.queue.remove(id);
                self.queries.remove(&id)
            })
            .collect()
    }

    /// Drops a query from every structure.
    pub fn remove(&mut self, id: QueryId) -> Option<Query> {
        self.queue.remove(id);
        self.heap.remove(id);
        self.queries.remove(&id)
    }

    /// Every queued id is live and in the heap; every heap id is live.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for id in self.queue.iter() {
            if !self.queries.contains_key(&id) {
                return Err(format!("queued {id} has no record"));
            }
            if !self.heap.contains(id) {
                return Err(format!("queued {id} missing from heap"));
            }
        }
        if self.heap.len() != self.queries.len() {
            return Err(format!(
                "heap holds {} entries for {} live queries",
                self.heap.len(),
                self.queries.len()
            ));
        }
        for id in self.queries.keys() {
            if !self.heap.contains(*id) {
                return Err(format!("live {id} missing from heap"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::SegmentId;

    fn raw(user: u64, time: f64, sigma_t: f64) -> RawQuery {
        RawQuery {
            user: UserId(user),
            time,
            point: GeoPoint { lon: 0.0, lat: 0.0 },
            knn_k: 3,
            class: 0,
            profile: QueryProfile {
                delta_k: 2,
                delta_l: 2,
                sigma_s: 2,
                sigma_t,
            },
        }
    }

    fn pos() -> Position {
        Position {
            segment: SegmentId(0),
            offset: 0.0,
        }
    }

    #[test]
    fn expiration_is_issue_plus_tolerance() {
        let mut intake = Intake::new();
        let id = intake.admit(&raw(1, 100.0, 10.0), pos()).unwrap();
        assert_eq!(intake.get(id).unwrap().t_exp, 110.0);
    }

    #[test]
    fn heap_peeks_soonest() {
        let mut intake = Intake::new();
        intake.admit(&raw(1, 1.0, 10.0), pos()).unwrap();
        let second = intake.admit(&raw(2, 2.0, 5.0), pos()).unwrap();
        assert_eq!(intake.heap.peek(), Some((7.0, second)));
    }

    #[test]
    fn duplicate_user_time_rejected() {
        let mut intake = Intake::new();
        intake.admit(&raw(1, 5.0, 10.0), pos()).unwrap();
        let err = intake.admit(&raw(1, 5.0, 3.0), pos()).unwrap_err();
        assert!(matches!(err, Error::DuplicateQuery { user: 1, .. }));
    }

    #[test]
    fn pop_expired_in_order() {
        let mut h = ExpirationHeap::new();
        assert!(h.pop_expired(10.0).is_empty());
        h.insert(QueryId(3), 20.0);
        h.insert(QueryId(1), 7.0);
        h.insert(QueryId(2), 5.0);
        let got: Vec<QueryId> = h.pop_expired(10.0).into_iter().map(|x| x.1).collect();
        assert_eq!(got, vec![QueryId(2), QueryId(1)]);
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn removed_entries_are_skipped() {
        let mut h = ExpirationHeap::new();
        h.insert(QueryId(1), 1.0);
        h.insert(QueryId(2), 2.0);
        h.remove(QueryId(1));
        assert_eq!(h.peek(), Some((2.0, QueryId(2))));
        let mut q = QueryQueue::new();
        q.push(QueryId(1));
        q.push(QueryId(2));
        q.remove(QueryId(1));
        assert_eq!(q.pop(), Some(QueryId(2)));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(query_id(UserId(9), 1.5), query_id(UserId(9), 1.5));
        assert_ne!(query_id(UserId(9), 1.5), query_id(UserId(9), 1.6));
    }

    #[test]
    fn clipping() {
        let p = QueryProfile::from_draws(-2.0, 0.4, -1.0, -5.0);
        assert_eq!((p.delta_k, p.delta_l, p.sigma_s), (1, 1, 1));
        assert_eq!(p.sigma_t, 0.1);
        assert_eq!(QueryProfile::from_draws(4.6, 5.4, 3.5, 9.0).delta_k, 5);
    }
}
