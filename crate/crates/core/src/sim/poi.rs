//! Points of interest and the mock LBS result operations.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{EdgeIx, NodeIx, SegmentId};
use crate::network::{Dijkstra, DistanceField, GeoPoint, Position, RoadMap, RoadNetwork};
use crate::query::Query;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: u64,
    pub edge: EdgeIx,
    /// Distance from the edge's `a` endpoint.
    pub offset: f64,
    pub class: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoiStore {
    pois: Vec<Poi>,
    by_edge: Vec<Vec<u32>>,
    classes: u32,
}

#[derive(Deserialize)]
struct PoiRow {
    id: u64,
    lon: f64,
    lat: f64,
    class: u32,
}

impl PoiStore {
    pub fn new(net: &RoadNetwork, pois: Vec<Poi>) -> Result<Self> {
        let mut by_edge = vec![Vec::new(); net.edge_count()];
        let mut seen = std::collections::HashSet::new();
        let mut classes = 0;
        for (i, p) in pois.iter().enumerate() {
            if p.edge.index() >= net.edge_count() {
                return Err(Error::Integrity(format!("object {} on unknown edge {}", p.id, p.edge)));
            }
            let len = net.edge(p.edge).length;
            if !(0.0..=len).contains(&p.offset) {
                return Err(Error::Integrity(format!("object {} offset {} off its edge", p.id, p.offset)));
            }
            if !seen.insert(p.id) {
                return Err(Error::Integrity(format!("duplicate object id {}", p.id)));
            }
            classes = classes.max(p.class + 1);
            by_edge[p.edge.index()].push(i as u32);
        }
        Ok(PoiStore { pois, by_edge, classes })
    }

    /// `count` objects spread uniformly by length with uniformly drawn classes.
    pub fn synthetic(net: &RoadNetwork, count: usize, classes: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cum: Vec<f64> = net
            .edges()
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e.length;
                Some(*acc)
            })
            .collect();
        let total = cum.last().copied().unwrap_or(0.0);
        let classes = classes.max(1);
        let pois = (0..count)
            .filter(|_| total > 0.0)
            .map(|i| {
                let x = rng.random::<f64>() * total;
                let slot = cum.partition_point(|&c| c <= x).min(cum.len() - 1);
                let e = &net.edges()[slot];
                Poi {
                    id: i as u64 + 1,
                    edge: EdgeIx(slot as u32),
                    offset: rng.random::<f64>() * e.length,
                    class: rng.random_range(0..classes),
                }
            })
            .collect();
        let mut store = PoiStore::new(net, pois).expect("generated objects are valid");
        store.classes = classes;
        store
    }

    /// CSV with header `id,lon,lat,class`; each object snaps to its nearest edge.
    pub fn load(path: impl AsRef<Path>, map: &RoadMap) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut pois = Vec::new();
        for row in rdr.deserialize::<PoiRow>() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let pos = map.locate(GeoPoint { lon: row.lon, lat: row.lat })?;
            let (edge, offset) = pos.edge_point(&map.network, &map.segments);
            pois.push(Poi { id: row.id, edge, offset, class: row.class });
        }
        Self::new(&map.network, pois)
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn on_edge(&self, e: EdgeIx) -> impl Iterator<Item = &Poi> {
        self.by_edge[e.index()].iter().map(|&i| &self.pois[i as usize])
    }

    /// O_e: matching objects on edge `e`.
    pub fn edge_result(&self, e: EdgeIx, class: Option<u32>) -> BTreeSet<u64> {
        self.on_edge(e)
            .filter(|p| matches(p, class))
            .map(|p| p.id)
            .collect()
    }

    /// O_s: union of O_e over the segment's edges.
    pub fn segment_result(&self, map: &RoadMap, s: SegmentId, class: Option<u32>) -> BTreeSet<u64> {
        map.segments
            .get(s)
            .edges
            .iter()
            .flat_map(|&e| self.edge_result(e, class))
            .collect()
    }

    /// O_v: the `k` matching objects nearest to `v` by network distance.
    pub fn node_result(&self, net: &RoadNetwork, v: NodeIx, k: usize, class: Option<u32>) -> Vec<u64> {
        if k == 0 {
            return Vec::new();
        }
        let mut best: HashMap<u32, f64> = HashMap::new();
        let mut kth = f64::INFINITY;
        for (u, d) in Dijkstra::new(net, &[(v, 0.0)]) {
            if d > kth {
                break;
            }
            for &(e, _) in net.neighbors(u) {
                let edge = net.edge(e);
                for &i in &self.by_edge[e.index()] {
                    let p = &self.pois[i as usize];
                    if !matches(p, class) {
                        continue;
                    }
                    let along = if edge.a == u { p.offset } else { edge.length - p.offset };
                    let cand = d + along;
                    let slot = best.entry(i).or_insert(f64::INFINITY);
                    if cand < *slot {
                        *slot = cand;
                    }
                }
            }
            if best.len() >= k {
                let mut ds: Vec<f64> = best.values().copied().collect();
                ds.select_nth_unstable_by(k - 1, f64::total_cmp);
                kth = ds[k - 1];
            }
        }
        let mut ranked: Vec<(f64, u64)> = best.into_iter().map(|(i, d)| (d, self.pois[i as usize].id)).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.into_iter().take(k).map(|(_, id)| id).collect()
    }

    /// Objects the LBS returns for `q` cloaked to `segments` with border `border`.
    pub fn candidate_result(
        &self,
        map: &RoadMap,
        q: &Query,
        segments: &[SegmentId],
        border: &[NodeIx],
        class: Option<u32>,
    ) -> BTreeSet<u64> {
        let mut out: BTreeSet<u64> = segments
            .iter()
            .flat_map(|&s| self.segment_result(map, s, class))
            .collect();
        for &v in border {
            out.extend(self.node_result(&map.network, v, q.knn_k as usize, class));
        }
        out
    }

    fn rank_from(&self, map: &RoadMap, at: Position, ids: impl Iterator<Item = u64>, k: usize) -> Vec<u64> {
        let field = DistanceField::from_position(&map.network, &map.segments, at);
        let index: HashMap<u64, &Poi> = self.pois.iter().map(|p| (p.id, p)).collect();
        let mut ranked: Vec<(f64, u64)> = ids
            .filter_map(|id| index.get(&id).map(|p| (field.to_edge_point(&map.network, p.edge, p.offset), id)))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        ranked.into_iter().take(k).map(|(_, id)| id).collect()
    }

    /// The `knn_k` candidates nearest to the true position.
    pub fn filter_result(&self, map: &RoadMap, q: &Query, candidate: &BTreeSet<u64>) -> Vec<u64> {
        self.rank_from(map, q.position, candidate.iter().copied(), q.knn_k as usize)
    }

    /// Exact k-NN at the true position over every matching object.
    pub fn exact_knn(&self, map: &RoadMap, q: &Query, class: Option<u32>) -> Vec<u64> {
        let ids = self.pois.iter().filter(|p| matches(p, class)).map(|p| p.id);
        self.rank_from(map, q.position, ids, q.knn_k as usize)
    }
}

fn matches(p: &Poi, class: Option<u32>) -> bool {
    class.is_none_or(|c| c == p.class)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
