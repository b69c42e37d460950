//! Evaluation, communication and combined costs of running a query over a subgraph.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{SegmentId, StarId};
use crate::network::RoadMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Per segment.
    pub c_s: f64,
    /// Per border node.
    pub c_v: f64,
    /// Per transmitted object.
    pub c_o: f64,
    /// Average objects per edge.
    pub rho_o: f64,
    pub beta: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            c_s: 1.0,
            c_v: 2.0,
            c_o: 0.1,
            rho_o: 1.0,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SubgraphStats {
    pub segments: usize,
    pub border: usize,
    pub edges: usize,
    /// Actual object total; replaces `rho_o * edges` when known.
    pub objects: Option<f64>,
}

impl SubgraphStats {
    pub fn of(map: &RoadMap, segments: &[SegmentId]) -> Self {
        SubgraphStats {
            segments: segments.len(),
            border: map.border_nodes(segments).len(),
            edges: map.edge_total(segments),
            objects: None,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_s", self.c_s),
            ("c_v", self.c_v),
            ("c_o", self.c_o),
            ("rho_o", self.rho_o),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("cost {name} must be nonnegative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    pub fn eval_cost(&self, s: &SubgraphStats) -> f64 {
        self.c_s * s.segments as f64 + self.c_v * s.border as f64
    }

    pub fn comm_cost(&self, res_size: f64, s: &SubgraphStats) -> f64 {
        let objects = s.objects.unwrap_or(self.rho_o * s.edges as f64);
        self.c_o * (res_size * s.border as f64 + objects)
    }

    pub fn overall_cost(&self, res_size: f64, s: &SubgraphStats) -> f64 {
        self.beta * self.comm_cost(res_size, s) + (1.0 - self.beta) * self.eval_cost(s)
    }

    pub fn star_cost(&self, map: &RoadMap, res_size: f64, star: StarId) -> f64 {
        let stats = SubgraphStats::of(map, &map.stars.get(star).segments);
        self.overall_cost(res_size, &stats)
    }
}

/// Per-star subgraph statistics, computed once per map.
#[derive(Debug, Clone, PartialEq)]
pub struct StarCostTable {
    stats: Vec<SubgraphStats>,
}

impl StarCostTable {
    pub fn new(map: &RoadMap) -> Self {
        StarCostTable {
            stats: map
                .stars
                .stars()
                .iter()
                .map(|s| SubgraphStats::of(map, &s.segments))
                .collect(),
        }
    }

    /// Identical one-segment stats for every star.
    pub fn uniform(stars: usize) -> Self {
        StarCostTable {
            stats: vec![
                SubgraphStats {
                    segments: 1,
                    ..Default::default()
                };
                stars
            ],
        }
    }

    pub fn stats(&self, star: StarId) -> &SubgraphStats {
        &self.stats[star.index()]
    }

    pub fn cost(&self, params: &CostParams, res_size: f64, star: StarId) -> f64 {
        params.overall_cost(res_size, self.stats(star))
    }
}
