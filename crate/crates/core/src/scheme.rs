use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::box_scheme::BoxGrid;
use crate::broadcast::LayerAllocation;

/// Identifies which scheme (or bound) produced an exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeId {
    ItBound,
    BsLimit,
    BsFinite,
    Ls,
    Lsblend,
    BoxGreedy,
    BoxBruteforce,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::ItBound,
        SchemeId::BsLimit,
        SchemeId::BsFinite,
        SchemeId::Ls,
        SchemeId::Lsblend,
        SchemeId::BoxGreedy,
        SchemeId::BoxBruteforce,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::ItBound => "it_bound",
            SchemeId::BsLimit => "bs_limit",
            SchemeId::BsFinite => "bs_finite",
            SchemeId::Ls => "ls",
            SchemeId::Lsblend => "lsblend",
            SchemeId::BoxGreedy => "box_greedy",
            SchemeId::BoxBruteforce => "box_bruteforce",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = String;

    /// Accepts the canonical ids and the shorter command-line spellings
    /// (`it-bound`, `bs`, `box`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = match s.replace('-', "_").as_str() {
            "it_bound" | "it" => SchemeId::ItBound,
            "bs" | "bs_limit" => SchemeId::BsLimit,
            "bs_finite" => SchemeId::BsFinite,
            "ls" => SchemeId::Ls,
            "lsblend" => SchemeId::Lsblend,
            "box" | "box_greedy" => SchemeId::BoxGreedy,
            "box_bruteforce" => SchemeId::BoxBruteforce,
            other => return Err(format!("unknown scheme '{other}'")),
        };
        Ok(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Allocation {
    Layers(LayerAllocation),
    Grid(BoxGrid),
}

/// An exponent together with whatever produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeExponent {
    pub scheme: SchemeId,
    pub b: f64,
    pub exponent: f64,
    pub allocation: Option<Allocation>,
    /// Scheme-specific metadata (chosen band, arg-max `k`, flat-region flag, ...).
    pub params: Map<String, Value>,
}

impl SchemeExponent {
    pub(crate) fn new(scheme: SchemeId, b: f64, exponent: f64) -> Self {
        Self {
            scheme,
            b,
            exponent,
            allocation: None,
            params: Map::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub(crate) fn with_allocation(mut self, allocation: Allocation) -> Self {
        self.allocation = Some(allocation);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_spellings_parse() {
        assert_eq!("it-bound".parse::<SchemeId>().unwrap(), SchemeId::ItBound);
        assert_eq!("bs".parse::<SchemeId>().unwrap(), SchemeId::BsLimit);
        assert_eq!("box".parse::<SchemeId>().unwrap(), SchemeId::BoxGreedy);
        for id in SchemeId::ALL {
            assert_eq!(id.as_str().parse::<SchemeId>().unwrap(), id);
        }
        assert!("hda".parse::<SchemeId>().is_err());
    }
}
