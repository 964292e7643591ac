//! Plain-text `key = value` configuration.
//!
//! Keys are dotted paths into [`Config`], e.g. `adapt.mcts.iterations = 300`
//! or `sim.stride = 0.12`. Blank lines and `#` comments are ignored. Values
//! are numbers, booleans or bare words; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::adapt::AdaptParams;
use crate::bench::BenchParams;
use crate::error::{Error, Result};
use crate::evolve::TrainParams;
use crate::hexasim::SimConfig;
use crate::planner::MazeGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub sim: SimConfig,
    pub train: TrainParams,
    pub adapt: AdaptParams,
    pub maze: MazeGeometry,
    pub bench: BenchParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            sim: SimConfig::default(),
            train: TrainParams::default(),
            adapt: AdaptParams::default(),
            maze: MazeGeometry::default(),
            bench: BenchParams::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut c = Config::default();
        let mut tree = c.tree()?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            set_in(&mut tree, k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        c = from_tree(tree)?;
        c.validate()?;
        Ok(c)
    }

    /// Overrides one key, as from the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut tree = self.tree()?;
        set_in(&mut tree, key, value).map_err(Error::Config)?;
        let c = from_tree(tree)?;
        c.validate()?;
        *self = c;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.train.validate()?;
        self.adapt.validate()?;
        self.bench.validate()
    }

    /// Every key with its current value, one `key = value` per line.
    pub fn dump(&self) -> Result<String> {
        let mut out = String::new();
        flatten(&self.tree()?, "", &mut out);
        Ok(out)
    }

    fn tree(&self) -> Result<Value> {
        Value::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn from_tree(tree: Value) -> Result<Config> {
    tree.try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn set_in(tree: &mut Value, key: &str, raw: &str) -> std::result::Result<(), String> {
    let mut node = tree;
    for part in key.split('.') {
        node = node
            .as_table_mut()
            .and_then(|t| t.get_mut(part))
            .ok_or_else(|| format!("unknown key {key:?}"))?;
    }
    let v = parse_value(raw);
    *node = match (&*node, v) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Table(_), _) => return Err(format!("{key:?} is a section, not a value")),
        (old, v) if std::mem::discriminant(old) != std::mem::discriminant(&v) => {
            return Err(format!("bad value {raw:?} for {key:?}"));
        }
        (_, v) => v,
    };
    Ok(())
}

fn flatten(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(v, &key, out);
            }
        }
        Value::String(s) => out.push_str(&format!("{prefix} = {s}\n")),
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_dump() {
        let c = Config::default();
        let text = c.dump().unwrap();
        assert!(text.contains("adapt.mcts.iterations = 500"));
        assert!(text.contains("train.rho = 0.15"));
        assert_eq!(Config::parse(&text).unwrap(), c);
    }

    #[test]
    fn overrides_apply() {
        let c = Config::parse(
            "# tuned\nseed = 7\nadapt.beta = 1\nadapt.mcts.rollout = random\nsim.stride = 0.12 # shorter\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.adapt.beta, 1.0);
        assert_eq!(c.adapt.mcts.rollout, crate::planner::Rollout::Random);
        assert_eq!(c.sim.stride, 0.12);
        let mut d = c.clone();
        d.set("train.middle.budget", "1234").unwrap();
        assert_eq!(d.train.middle.budget, 1234);
    }

    #[test]
    fn bad_lines_are_reported() {
        let e = Config::parse("seed = 1\nadapt.nope = 3\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
        assert!(Config::parse("seed 1\n").is_err());
        assert!(Config::parse("adapt.beta = fast\n").is_err());
        assert!(Config::parse("adapt = 1\n").is_err());
        assert!(Config::parse("adapt.beta = -1\n").is_err());
    }
}
