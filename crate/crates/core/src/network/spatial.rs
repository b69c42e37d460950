use serde::{Deserialize, Serialize};

use super::{Position, RoadNetwork, Segments};
use crate::error::{Error, Result};
use crate::ids::EdgeIx;

pub const DEFAULT_CELL_M: f64 = 500.0;
pub const DEFAULT_MARGIN_M: f64 = 1000.0;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

/// Uniform grid over a local equirectangular projection of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialIndex {
    lon0: f64,
    lat0: f64,
    kx: f64,
    ky: f64,
    origin: (f64, f64),
    extent: (f64, f64),
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<EdgeIx>>,
    xy: Vec<(f64, f64)>,
}

impl SpatialIndex {
    pub fn build(net: &RoadNetwork, _segs: &Segments, cell_m: f64, margin_m: f64) -> Self {
        let (mut lo_lon, mut hi_lon, mut lo_lat, mut hi_lat) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for n in net.nodes() {
            lo_lon = lo_lon.min(n.lon);
            hi_lon = hi_lon.max(n.lon);
            lo_lat = lo_lat.min(n.lat);
            hi_lat = hi_lat.max(n.lat);
        }
        if net.node_count() == 0 {
            (lo_lon, hi_lon, lo_lat, hi_lat) = (0.0, 0.0, 0.0, 0.0);
        }
        let lon0 = (lo_lon + hi_lon) / 2.0;
        let lat0 = (lo_lat + hi_lat) / 2.0;
        let ky = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let kx = ky * lat0.to_radians().cos();
        let project = |lon: f64, lat: f64| ((lon - lon0) * kx, (lat - lat0) * ky);
        let xy: Vec<(f64, f64)> = net.nodes().iter().map(|n| project(n.lon, n.lat)).collect();
        let (x_lo, y_lo) = project(lo_lon, lo_lat);
        let (x_hi, y_hi) = project(hi_lon, hi_lat);
        let cell = cell_m.max(1.0);
        let origin = (x_lo - margin_m, y_lo - margin_m);
        let extent = (x_hi + margin_m, y_hi + margin_m);
        let cols = (((extent.0 - origin.0) / cell).ceil() as usize).max(1);
        let rows = (((extent.1 - origin.1) / cell).ceil() as usize).max(1);
        let mut index = SpatialIndex {
            lon0,
            lat0,
            kx,
            ky,
            origin,
            extent,
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
            xy,
        };
        for (i, e) in net.edges().iter().enumerate() {
            let (pa, pb) = (index.xy[e.a.index()], index.xy[e.b.index()]);
            let (c0, r0) = index.cell_of(pa.0.min(pb.0), pa.1.min(pb.1));
            let (c1, r1) = index.cell_of(pa.0.max(pb.0), pa.1.max(pb.1));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    index.cells[r * cols + c].push(EdgeIx(i as u32));
                }
            }
        }
        index
    }

    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        ((p.lon - self.lon0) * self.kx, (p.lat - self.lat0) * self.ky)
    }

    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        GeoPoint {
            lon: self.lon0 + x / self.kx,
            lat: self.lat0 + y / self.ky,
        }
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let c = ((x - self.origin.0) / self.cell).floor().max(0.0) as usize;
        let r = ((y - self.origin.1) / self.cell).floor().max(0.0) as usize;
        (c.min(self.cols - 1), r.min(self.rows - 1))
    }

    /// Planar distance from `(x, y)` to edge `e` and the projection parameter from `a`.
    pub fn edge_distance(&self, net: &RoadNetwork, e: EdgeIx, x: f64, y: f64) -> (f64, f64) {
        let edge = net.edge(e);
        let (ax, ay) = self.xy[edge.a.index()];
        let (bx, by) = self.xy[edge.b.index()];
        let (dx, dy) = (bx - ax, by - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (ax + t * dx, ay + t * dy);
        (((x - px).powi(2) + (y - py).powi(2)).sqrt(), t)
    }

    /// Nearest edge to `point`; ties go to the lower edge index.
    pub fn nearest_edge(&self, net: &RoadNetwork, point: GeoPoint) -> Result<(EdgeIx, f64, f64)> {
        let (x, y) = self.project(point);
        if !(x >= self.origin.0 && x <= self.extent.0 && y >= self.origin.1 && y <= self.extent.1) {
            return Err(Error::OutOfCoverage {
                lon: point.lon,
                lat: point.lat,
            });
        }
        if net.edge_count() == 0 {
            return Err(Error::OutOfCoverage {
                lon: point.lon,
                lat: point.lat,
            });
        }
        let (cc, cr) = self.cell_of(x, y);
        let (cc, cr) = (cc as isize, cr as isize);
        let mut best: Option<(f64, EdgeIx, f64)> = None;
        let max_ring = self.cols.max(self.rows) as isize;
        for ring in 0..=max_ring {
            for r in (cr - ring)..=(cr + ring) {
                if r < 0 || r >= self.rows as isize {
                    continue;
                }
                let on_edge_row = r == cr - ring || r == cr + ring;
                let step = if on_edge_row { 1 } else { (2 * ring).max(1) as usize };
                for c in ((cc - ring)..=(cc + ring)).step_by(step) {
                    if c < 0 || c >= self.cols as isize {
                        continue;
                    }
                    for &e in &self.cells[r as usize * self.cols + c as usize] {
                        let (d, t) = self.edge_distance(net, e, x, y);
                        let better = match best {
                            None => true,
                            Some((bd, be, _)) => d < bd || (d == bd && e < be),
                        };
                        if better {
                            best = Some((d, e, t));
                        }
                    }
                }
            }
            if let Some((d, _, _)) = best {
                if d < ring as f64 * self.cell {
                    break;
                }
            }
        }
        let (d, e, t) = best.expect("non-empty index");
        Ok((e, d, t))
    }

    pub fn locate(&self, net: &RoadNetwork, segs: &Segments, point: GeoPoint) -> Result<Position> {
        let (e, _, t) = self.nearest_edge(net, point)?;
        let edge = net.edge(e);
        let (segment, slot) = segs.of_edge(e);
        let seg = segs.get(segment);
        let along = if seg.nodes[slot] == edge.a {
            t * edge.length
        } else {
            (1.0 - t) * edge.length
        };
        Ok(Position {
            segment,
            offset: (seg.cum[slot] + along).min(seg.length),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Node, RawEdge, RoadMap};

    fn straight() -> RoadMap {
        let nodes = vec![
            Node { id: 1, lon: 0.0, lat: 0.0 },
            Node { id: 2, lon: 0.01, lat: 0.0 },
        ];
        let edges = vec![RawEdge { id: 1, a: 1, b: 2, length: 1000.0 }];
        RoadMap::build(RoadNetwork::from_parts(nodes, edges).unwrap())
    }

    #[test]
    fn midpoint_offset_is_half() {
        let map = straight();
        let pos = map.locate(GeoPoint { lon: 0.005, lat: 0.0 }).unwrap();
        assert!((pos.offset - 500.0).abs() < 1e-6, "{}", pos.offset);
    }

    #[test]
    fn on_node_gives_terminal_offset() {
        let map = straight();
        let pos = map.locate(GeoPoint { lon: 0.01, lat: 0.0 }).unwrap();
        assert!((pos.offset - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn far_point_is_out_of_coverage() {
        let map = straight();
        let err = map.locate(GeoPoint { lon: 1.0, lat: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::OutOfCoverage { .. }));
    }
}
