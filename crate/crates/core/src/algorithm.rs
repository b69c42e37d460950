use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::BaselineKind;
use crate::error::Error;

/// Anonymizer selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Basic,
    Bounded,
    Hybrid,
    Random,
    Expansion,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Basic,
        Algorithm::Bounded,
        Algorithm::Hybrid,
        Algorithm::Random,
        Algorithm::Expansion,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Basic => "basic",
            Algorithm::Bounded => "bounded",
            Algorithm::Hybrid => "hybrid",
            Algorithm::Random => "random",
            Algorithm::Expansion => "expansion",
        }
    }

    pub fn baseline(&self) -> Option<BaselineKind> {
        match self {
            Algorithm::Random => Some(BaselineKind::RandomSampling),
            Algorithm::Expansion => Some(BaselineKind::NetworkExpansion),
            _ => None,
        }
    }

    pub fn is_star_based(&self) -> bool {
        self.baseline().is_none()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}
