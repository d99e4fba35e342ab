//! File-based run configuration. A single TOML or JSON document whose keys
//! mirror the command-line flags; flags given on the command line win.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use relaxlab_core::criteria::Tolerances;
use relaxlab_core::harness::Norm;
use relaxlab_core::solver::{Scheme, WInit};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// `check`, `limit`, `sweep` or `validate-theorem4`; required by `run`.
    pub command: Option<String>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    // check
    pub samples: Option<usize>,
    pub eps: Option<Vec<f64>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,

    // limit
    pub tolerance: Option<f64>,
    pub spacings: Option<Vec<f64>>,
    pub tau_scale: Option<f64>,

    // sweep
    pub cells: Option<usize>,
    pub t_end: Option<f64>,
    pub norm: Option<Norm>,
    pub scheme: Option<Scheme>,
    pub cfl: Option<f64>,
    pub winit: Option<WInit>,
    pub timing: Option<bool>,

    // validate-theorem4
    pub trials: Option<usize>,
    pub dims: Option<Vec<[usize; 3]>>,
    pub mutate: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}

/// Applies `name = value` overrides to the default tolerances.
pub fn tolerances(overrides: &BTreeMap<String, f64>) -> Result<Tolerances, String> {
    let mut value = serde_json::to_value(Tolerances::default()).map_err(|e| e.to_string())?;
    let map = value.as_object_mut().expect("tolerances serialize to an object");
    for (k, v) in overrides {
        let key = k.replace('-', "_");
        if !map.contains_key(&key) {
            let known: Vec<_> = map.keys().cloned().collect();
            return Err(format!("unknown tolerance `{k}` (known: {})", known.join(", ")));
        }
        if !(*v > 0.0 && v.is_finite()) {
            return Err(format!("tolerance `{k}` must be positive, got {v}"));
        }
        map.insert(key, serde_json::json!(v));
    }
    serde_json::from_value(value).map_err(|e| e.to_string())
}

/// Parses `name=value`.
pub fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("bad value in `{s}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// Parses `m,s,d`.
pub fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad dims `{s}`: {e}"))?;
    <[usize; 3]>::try_from(parts).map_err(|_| format!("dims must be `m,s,d`, got `{s}`"))
}
