//! Run configuration: a TOML file with flag overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithm::Algorithm;
use crate::attack::{DEFAULT_BUDGET, DEFAULT_REPLAYS};
use crate::cost::CostParams;
use crate::engine::{EngineConfig, Mode, NeighborRule, Reach, DEFAULT_COMBINATION_CAP};
use crate::error::{Error, Result};
use crate::network::synthetic::{grid_network, GridSpec};
use crate::network::{RoadMap, RoadNetwork};
use crate::sim::PoiStore;

/// Gaussian draw parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Param {
    pub mean: f64,
    pub sd: f64,
}

const fn p(mean: f64, sd: f64) -> Param {
    Param { mean, sd }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub knn_k: Param,
    pub delta_k: Param,
    pub delta_l: Param,
    pub sigma_s: Param,
    pub sigma_t: Param,
    pub gamma: Param,
    pub lambda: Param,
    pub alpha: Param,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            knn_k: p(5.0, 1.0),
            delta_k: p(5.0, 1.5),
            delta_l: p(5.0, 1.5),
            sigma_s: p(4.0, 1.0),
            sigma_t: p(10.0, 2.0),
            gamma: p(20.0, 2.0),
            lambda: p(1.0, 0.0),
            alpha: p(2.0, 0.0),
        }
    }
}

impl Params {
    pub const NAMES: [&'static str; 8] = [
        "k", "delta_k", "delta_l", "sigma_s", "sigma_t", "gamma", "lambda", "alpha",
    ];

    fn all(&self) -> [(&'static str, &Param); 8] {
        [
            ("k", &self.knn_k),
            ("delta_k", &self.delta_k),
            ("delta_l", &self.delta_l),
            ("sigma_s", &self.sigma_s),
            ("sigma_t", &self.sigma_t),
            ("gamma", &self.gamma),
            ("lambda", &self.lambda),
            ("alpha", &self.alpha),
        ]
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        Some(match name {
            "k" | "knn_k" => &mut self.knn_k,
            "delta_k" => &mut self.delta_k,
            "delta_l" => &mut self.delta_l,
            "sigma_s" => &mut self.sigma_s,
            "sigma_t" => &mut self.sigma_t,
            "gamma" => &mut self.gamma,
            "lambda" => &mut self.lambda,
            "alpha" => &mut self.alpha,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, q) in self.all() {
            if !(q.mean.is_finite() && q.mean > 0.0) {
                return Err(Error::Config(format!("mean of {name} must be positive")));
            }
            if !(q.sd.is_finite() && q.sd >= 0.0) {
                return Err(Error::Config(format!("deviation of {name} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSource {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Prebuilt bundle; takes precedence over the text files.
    pub bundle: Option<PathBuf>,
    /// Synthetic grid used when no files are given.
    pub grid: GridSpec,
}

impl NetworkSource {
    /// Loads the bundle, else the node and edge files, else builds the grid.
    pub fn load_map(&self) -> Result<RoadMap> {
        if let Some(b) = &self.bundle {
            return crate::bundle::load(b);
        }
        let net = match (&self.nodes, &self.edges) {
            (Some(n), Some(e)) => RoadNetwork::load(n, e)?,
            _ => grid_network(&self.grid),
        };
        Ok(RoadMap::build(net))
    }
}

impl Default for NetworkSource {
    fn default() -> Self {
        NetworkSource {
            nodes: None,
            edges: None,
            bundle: None,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoiSettings {
    pub path: Option<PathBuf>,
    pub count: usize,
    pub classes: u32,
    /// Restrict each query to its drawn class.
    pub class_filter: bool,
}

impl PoiSettings {
    /// Loads the POI file, or scatters a synthetic set seeded by `seed`.
    pub fn load_store(&self, map: &RoadMap, seed: u64) -> Result<PoiStore> {
        match &self.path {
            Some(p) => PoiStore::load(p, map),
            None => Ok(PoiStore::synthetic(&map.network, self.count, self.classes, seed)),
        }
    }
}

impl Default for PoiSettings {
    fn default() -> Self {
        PoiSettings {
            path: None,
            count: 2000,
            classes: 10,
            class_filter: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub objects: usize,
    /// Virtual seconds of query issuance.
    pub duration: f64,
    pub dt: f64,
    pub fast_fraction: f64,
    pub fast_speed: f64,
    pub slow_speed: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            objects: 200,
            duration: 300.0,
            dt: 0.1,
            fast_fraction: 0.5,
            fast_speed: 20.0,
            slow_speed: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub combination_cap: usize,
    pub neighbor_rule: NeighborRule,
    pub reach: Reach,
    pub prune_workers: usize,
    /// Run the full consistency scan every tick.
    pub verify: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            combination_cap: DEFAULT_COMBINATION_CAP,
            neighbor_rule: NeighborRule::default(),
            reach: Reach::default(),
            prune_workers: 0,
            verify: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSettings {
    pub replays: usize,
    pub budget: usize,
    pub injections: Vec<usize>,
    /// Fixed cohort-size guess; the true cohort when absent.
    pub cohort: Option<usize>,
    /// Regions evaluated per run; all when absent.
    pub max_regions: Option<usize>,
}

impl Default for AttackSettings {
    fn default() -> Self {
        AttackSettings {
            replays: DEFAULT_REPLAYS,
            budget: DEFAULT_BUDGET,
            injections: vec![0],
            cohort: None,
            max_regions: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    /// Served queries sampled for result size and processing time.
    pub sample: usize,
    /// Compare every served answer with exact k-NN.
    pub check_answers: bool,
}

impl Default for MetricSettings {
    fn default() -> Self {
        MetricSettings {
            sample: 200,
            check_answers: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Parses `PARAM=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (param, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep `{spec}` is not PARAM=v1,v2,...")))?;
        let values = values
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("sweep value `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        let sweep = Sweep {
            param: param.trim().to_string(),
            values,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep value list is empty".into()));
        }
        if Params::default().get_mut(&self.param).is_none() && self.param != "objects" {
            return Err(Error::Config(format!(
                "unknown sweep parameter `{}`; expected one of {} or objects",
                self.param,
                Params::NAMES.join(", ")
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub network: NetworkSource,
    pub pois: PoiSettings,
    pub sim: SimSettings,
    pub params: Params,
    pub cost: CostParams,
    pub engine: EngineSettings,
    pub attack: AttackSettings,
    pub metrics: MetricSettings,
    pub sweep: Option<Sweep>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            algorithms: vec![Algorithm::Basic],
            network: NetworkSource::default(),
            pois: PoiSettings::default(),
            sim: SimSettings::default(),
            params: Params::default(),
            cost: CostParams::default(),
            engine: EngineSettings::default(),
            attack: AttackSettings::default(),
            metrics: MetricSettings::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&src)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.network.nodes,
            &mut cfg.network.edges,
            &mut cfg.network.bundle,
            &mut cfg.pois.path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex sha256 of the serialized config.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.cost.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        let s = &self.sim;
        if s.objects == 0 || !(s.duration > 0.0) || !(s.dt > 0.0) {
            return Err(Error::Config("objects, duration and dt must be positive".into()));
        }
        if !(0.0..=1.0).contains(&s.fast_fraction) || !(s.fast_speed > 0.0) || !(s.slow_speed > 0.0) {
            return Err(Error::Config("speeds must be positive and fast_fraction in [0, 1]".into()));
        }
        if self.network.nodes.is_some() != self.network.edges.is_some() {
            return Err(Error::Config("network nodes and edges must be given together".into()));
        }
        if self.attack.replays == 0 || self.attack.budget == 0 || self.attack.injections.is_empty() {
            return Err(Error::Config("attack replays, budget and injections must be nonempty".into()));
        }
        if let Some(sw) = &self.sweep {
            sw.validate()?;
        }
        Ok(())
    }

    /// Applies one sweep value.
    pub fn with_value(&self, param: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        if param == "objects" {
            cfg.sim.objects = value.round().max(1.0) as usize;
        } else {
            cfg.params
                .get_mut(param)
                .ok_or_else(|| Error::Config(format!("unknown sweep parameter `{param}`")))?
                .mean = value;
        }
        cfg.sweep = None;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sweep points as `(value, config)`; a single unlabeled point without a sweep.
    pub fn points(&self) -> Result<Vec<(Option<f64>, RunConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.clone())]),
            Some(sw) => sw
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.with_value(&sw.param, v)?)))
                .collect(),
        }
    }

    pub fn engine_config(&self, algorithm: Algorithm) -> EngineConfig {
        let lambda = self.params.lambda.mean.round().max(1.0) as u32;
        let mode = match algorithm {
            Algorithm::Bounded => Mode::Bounded { lambda },
            Algorithm::Hybrid => Mode::Hybrid {
                lambda,
                alpha: self.params.alpha.mean,
            },
            _ => Mode::Basic,
        };
        EngineConfig {
            mode,
            seed: self.seed,
            cost: self.cost,
            combination_cap: self.engine.combination_cap,
            neighbor_rule: self.engine.neighbor_rule,
            reach: self.engine.reach,
            prune_workers: self.engine.prune_workers,
            verify: self.engine.verify,
        }
    }
}
