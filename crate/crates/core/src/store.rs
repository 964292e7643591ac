//! A directory of trained repertoires: the hierarchy's three layers, the flat
//! baselines and the damage-prior repertoires.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::archive::{GridArchive, Repertoire};
use crate::error::{Error, Result};
use crate::evolve::{train_flat, train_hierarchy, FlatVariant, TrainParams};
use crate::hexasim::{DamageSpec, HexaSim};
use crate::hierarchy::{FrozenBottom, FrozenMiddle, HbrStack, LowerLayers};
use crate::persist::{load_repertoire, save_repertoire, StoredArchive};

/// A group of repertoires trained together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Layer {
    /// Bottom, middle and top layers.
    Hierarchy,
    Flat2d,
    Flat8d,
    /// One flat 2-D repertoire per damage prior.
    Priors,
}

impl Layer {
    pub const ALL: [Layer; 4] = [
        Layer::Hierarchy,
        Layer::Flat2d,
        Layer::Flat8d,
        Layer::Priors,
    ];

    /// Parses a comma-separated list; `all` selects everything.
    pub fn parse_list(s: &str) -> Result<Vec<Layer>> {
        if s.trim() == "all" {
            return Ok(Layer::ALL.to_vec());
        }
        let mut v = s
            .split(',')
            .map(|t| t.trim().parse())
            .collect::<Result<Vec<Layer>>>()?;
        v.sort();
        v.dedup();
        Ok(v)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Hierarchy => "hbr",
            Layer::Flat2d => "flat2d",
            Layer::Flat8d => "flat8d",
            Layer::Priors => "priors",
        })
    }
}

impl FromStr for Layer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hbr" | "hierarchy" => Layer::Hierarchy,
            "flat2d" => Layer::Flat2d,
            "flat8d" => Layer::Flat8d,
            "priors" => Layer::Priors,
            _ => {
                return Err(Error::Usage(format!(
                    "unknown layer {s:?} (hbr, flat2d, flat8d, priors, all)"
                )))
            }
        })
    }
}

/// Damage priors of the multi-repertoire baseline: intact plus each single leg.
pub fn prior_damages() -> Vec<DamageSpec> {
    let mut v = vec![DamageSpec::NONE];
    v.extend((1..=6).map(|l| DamageSpec::legs(&[l]).expect("leg in range")));
    v
}

#[derive(Debug, Clone, Default)]
pub struct RepertoireSet {
    /// The model every repertoire was trained on.
    pub sim: HexaSim,
    pub stack: Option<HbrStack>,
    pub flat2d: Option<GridArchive>,
    pub flat8d: Option<GridArchive>,
    pub priors: Vec<(DamageSpec, GridArchive)>,
}

const FILES: [&str; 3] = ["bottom.hbr", "middle.hbr", "top.hbr"];

fn prior_file(d: DamageSpec) -> String {
    format!("prior-{d}.hbr")
}

impl RepertoireSet {
    pub fn train(params: &TrainParams, sim: &HexaSim, layers: &[Layer]) -> Result<RepertoireSet> {
        let mut set = RepertoireSet {
            sim: sim.clone(),
            ..RepertoireSet::default()
        };
        for layer in layers {
            match layer {
                Layer::Hierarchy => set.stack = Some(train_hierarchy(params, sim)?.0),
                Layer::Flat2d => {
                    set.flat2d =
                        Some(train_flat(FlatVariant::Bd2, params, sim, DamageSpec::NONE)?.0);
                }
                Layer::Flat8d => {
                    set.flat8d =
                        Some(train_flat(FlatVariant::Bd8, params, sim, DamageSpec::NONE)?.0);
                }
                Layer::Priors => {
                    for d in prior_damages() {
                        set.priors
                            .push((d, train_flat(FlatVariant::Bd2, params, sim, d)?.0));
                    }
                }
            }
            log::info!("trained {layer}");
        }
        Ok(set)
    }

    pub fn layers(&self) -> Vec<Layer> {
        let mut v = Vec::new();
        if self.stack.is_some() {
            v.push(Layer::Hierarchy);
        }
        if self.flat2d.is_some() {
            v.push(Layer::Flat2d);
        }
        if self.flat8d.is_some() {
            v.push(Layer::Flat8d);
        }
        if !self.priors.is_empty() {
            v.push(Layer::Priors);
        }
        v
    }

    /// Writes every present repertoire into `dir`; returns the files written.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let fp = self.sim.config().fingerprint();
        let mut out = Vec::new();
        let mut put = |name: &str, a: StoredArchive| -> Result<()> {
            let p = dir.join(name);
            save_repertoire(&p, &a, &fp)?;
            out.push(p);
            Ok(())
        };
        if let Some(s) = &self.stack {
            put(
                FILES[0],
                StoredArchive::Dist(s.lower().bottom().archive().clone()),
            )?;
            put(
                FILES[1],
                StoredArchive::Dist(s.lower().middle().archive().clone()),
            )?;
            put(FILES[2], StoredArchive::Grid(s.top().clone()))?;
        }
        if let Some(a) = &self.flat2d {
            put("flat2d.hbr", StoredArchive::Grid(a.clone()))?;
        }
        if let Some(a) = &self.flat8d {
            put("flat8d.hbr", StoredArchive::Grid(a.clone()))?;
        }
        for (d, a) in &self.priors {
            put(&prior_file(*d), StoredArchive::Grid(a.clone()))?;
        }
        Ok(out)
    }

    /// Loads the requested layers from `dir`; any missing file is an error.
    pub fn load(dir: &Path, sim: &HexaSim, rho: f64, layers: &[Layer]) -> Result<RepertoireSet> {
        let fp = sim.config().fingerprint();
        let grid = |name: &str| -> Result<GridArchive> {
            let p = dir.join(name);
            load_repertoire(&p, &fp)?.into_grid(&p)
        };
        let mut set = RepertoireSet {
            sim: sim.clone(),
            ..RepertoireSet::default()
        };
        for layer in layers {
            match layer {
                Layer::Hierarchy => {
                    let p = dir.join(FILES[0]);
                    let bottom = FrozenBottom::new(load_repertoire(&p, &fp)?.into_dist(&p)?);
                    let p = dir.join(FILES[1]);
                    let middle =
                        FrozenMiddle::new(load_repertoire(&p, &fp)?.into_dist(&p)?, &bottom, sim);
                    let top = grid(FILES[2])?;
                    let lower = LowerLayers::new(sim.clone(), bottom, middle, rho);
                    set.stack = Some(HbrStack::new(lower, top));
                }
                Layer::Flat2d => set.flat2d = Some(grid("flat2d.hbr")?),
                Layer::Flat8d => set.flat8d = Some(grid("flat8d.hbr")?),
                Layer::Priors => {
                    for d in prior_damages() {
                        set.priors.push((d, grid(&prior_file(d))?));
                    }
                }
            }
        }
        Ok(set)
    }

    /// One line per repertoire: name and elite count.
    pub fn sizes(&self) -> Vec<(String, usize)> {
        let mut v = Vec::new();
        if let Some(s) = &self.stack {
            v.push(("bottom".into(), s.lower().bottom().archive().len()));
            v.push(("middle".into(), s.lower().middle().archive().len()));
            v.push(("top".into(), s.top().len()));
        }
        if let Some(a) = &self.flat2d {
            v.push(("flat2d".into(), a.len()));
        }
        if let Some(a) = &self.flat8d {
            v.push(("flat8d".into(), a.len()));
        }
        for (d, a) in &self.priors {
            v.push((format!("prior-{d}"), a.len()));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_lists() {
        assert_eq!(Layer::parse_list("all").unwrap(), Layer::ALL.to_vec());
        assert_eq!(
            Layer::parse_list("flat2d,hbr,flat2d").unwrap(),
            vec![Layer::Hierarchy, Layer::Flat2d]
        );
        assert!(Layer::parse_list("hbr,bogus").is_err());
        assert_eq!(prior_damages().len(), 7);
    }

    #[test]
    fn save_load_round_trip() {
        let sim = HexaSim::default();
        let mut p = TrainParams::default().with_seed(3);
        p.bottom.budget = 2000;
        p.middle.budget = 3000;
        p.top.budget = 1000;
        p.flat.budget = 1000;
        let set = RepertoireSet::train(&p, &sim, &[Layer::Hierarchy, Layer::Flat2d]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = set.save(dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let back = RepertoireSet::load(dir.path(), &sim, p.rho, &set.layers()).unwrap();
        assert_eq!(back.sizes(), set.sizes());
        assert_eq!(
            back.stack.as_ref().unwrap().skills(),
            set.stack.as_ref().unwrap().skills()
        );
        let dir2 = tempfile::tempdir().unwrap();
        back.save(dir2.path()).unwrap();
        for f in &files {
            let name = f.file_name().unwrap();
            assert_eq!(
                std::fs::read(f).unwrap(),
                std::fs::read(dir2.path().join(name)).unwrap()
            );
        }
        let e = RepertoireSet::load(dir.path(), &sim, p.rho, &[Layer::Flat8d]).unwrap_err();
        assert!(e.to_string().contains("flat8d.hbr"), "{e}");
    }
}
