use ainf_core::{PrecisionBudget, RingPresentation, TeichRing};
use anyhow::{anyhow, bail, Context, Result};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub rings: BTreeMap<String, RingSpec>,
    #[serde(default)]
    pub checks: Vec<Map<String, Value>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    /// Largest linearization a check may build.
    #[serde(default = "default_dim")]
    pub dim_limit: usize,
    /// Upper bound on per-check sample counts; `None` keeps the requested count.
    #[serde(default)]
    pub max_samples: Option<usize>,
}

fn default_dim() -> usize {
    8192
}

impl Default for Caps {
    fn default() -> Self {
        Caps { dim_limit: default_dim(), max_samples: None }
    }
}

impl Caps {
    /// `key=value[,key=value]` overrides from the command line.
    pub fn apply_overrides(&mut self, s: &str) -> Result<()> {
        for kv in s.split(',').filter(|t| !t.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("cap {kv:?} is not key=value"))?;
            match k.trim() {
                "dim_limit" => self.dim_limit = v.trim().parse().context("dim_limit")?,
                "max_samples" => self.max_samples = Some(v.trim().parse().context("max_samples")?),
                other => bail!("unknown cap {other:?}"),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub p: u32,
    #[serde(default = "default_vars")]
    pub vars: Vec<String>,
    /// Variables that are inverted (Laurent directions).
    #[serde(default)]
    pub inverted: Vec<String>,
    #[serde(default)]
    pub relations: Vec<String>,
    pub n: u32,
    pub d: Value,
    pub depth: u32,
    #[serde(default)]
    pub l: Option<Value>,
}

fn default_vars() -> Vec<String> {
    vec!["x".into()]
}

pub fn rational(v: &Value) -> Result<Rational64> {
    match v {
        Value::Number(n) => n.as_i64().map(Rational64::from_integer).ok_or_else(|| anyhow!("{n} is not an integer")),
        Value::String(s) => {
            let s = s.trim();
            match s.split_once('/') {
                Some((a, b)) => Ok(Rational64::new(a.trim().parse()?, b.trim().parse()?)),
                None => Ok(Rational64::from_integer(s.parse()?)),
            }
        }
        _ => bail!("expected a rational, got {v}"),
    }
}

impl RingSpec {
    pub fn d(&self) -> Result<Rational64> {
        rational(&self.d)
    }

    pub fn presentation(&self) -> Result<Arc<RingPresentation>> {
        let l = match &self.l {
            Some(v) => rational(v)?,
            None => Rational64::from_integer(0),
        };
        let budget = PrecisionBudget::new(self.n, self.d()?, self.depth, 1, l)?;
        let vars: Vec<(&str, bool)> = self.vars.iter().map(|v| (v.as_str(), self.inverted.contains(v))).collect();
        let rels: Vec<&str> = self.relations.iter().map(String::as_str).collect();
        Ok(RingPresentation::new(self.p, &vars, &rels, budget)?)
    }

    pub fn teich(&self) -> Result<Arc<TeichRing>> {
        if !self.inverted.is_empty() || !self.relations.is_empty() {
            bail!("this check needs a free ring");
        }
        let names: Vec<&str> = self.vars.iter().map(String::as_str).collect();
        Ok(TeichRing::new(self.p, self.n, &names, self.d()?, self.depth))
    }
}

/// Parameters of one check, with the ring reference resolved.
#[derive(Debug, Clone)]
pub struct Params {
    pub map: Map<String, Value>,
    pub ring: Option<RingSpec>,
}

impl Params {
    pub fn resolve(map: &Map<String, Value>, rings: &BTreeMap<String, RingSpec>) -> Result<Self> {
        let ring = match map.get("ring") {
            None => None,
            Some(Value::String(name)) => {
                Some(rings.get(name).cloned().ok_or_else(|| anyhow!("ring {name:?} is not defined"))?)
            }
            Some(v @ Value::Object(_)) => Some(serde_json::from_value(v.clone()).context("inline ring")?),
            Some(v) => bail!("ring must be a name or an object, got {v}"),
        };
        Ok(Params { map: map.clone(), ring })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| anyhow!("{key} must be a nonnegative integer")),
        }
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32> {
        Ok(u32::try_from(self.u64_or(key, default as u64)?)?)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| anyhow!("{key} must be a string")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| anyhow!("{key} must be a boolean")),
        }
    }

    pub fn opt_str(&self, key: &str) -> Result<Option<&str>> {
        match self.map.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| anyhow!("{key} must be a string")),
        }
    }
}
