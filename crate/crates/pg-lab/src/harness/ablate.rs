//! Ablation sweeps over the search hyperparameters.
//!
//! One axis, a list of values, a list of seeds: the cross product runs as
//! independent cells with directory layout
//! `<output>/<axis>=<value>/seed=<seed>/`. Cells are isolated; one failing
//! cell is reported without aborting the rest.

use super::config::{ConfigMap, RunConfig};
use super::runner::{run, RunSummary};
use crate::error::{Error, Result};
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    PopulationSize,
    Annealing,
    SingleScaleMin,
    SingleScaleMax,
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population_size" => Ok(AblationAxis::PopulationSize),
            "annealing" => Ok(AblationAxis::Annealing),
            "single_scale_min" => Ok(AblationAxis::SingleScaleMin),
            "single_scale_max" => Ok(AblationAxis::SingleScaleMax),
            other => Err(Error::Config(format!(
                "unknown ablation axis '{other}' (population_size, annealing, \
                 single_scale_min, single_scale_max)"
            ))),
        }
    }
}

impl AblationAxis {
    pub fn name(&self) -> &'static str {
        match self {
            AblationAxis::PopulationSize => "population_size",
            AblationAxis::Annealing => "annealing",
            AblationAxis::SingleScaleMin => "single_scale_min",
            AblationAxis::SingleScaleMax => "single_scale_max",
        }
    }

    /// Apply one axis value to a cell's config map. The search is always
    /// enabled inside an ablation.
    fn apply(&self, map: &mut ConfigMap, value: u64) -> Result<()> {
        map.set("search.enabled", "true");
        match self {
            AblationAxis::PopulationSize => {
                map.set("search.population_size", &value.to_string());
            }
            AblationAxis::Annealing => {
                map.set("search.annealing_end_step", &value.to_string());
            }
            AblationAxis::SingleScaleMin => {
                if value != 1 {
                    return Err(Error::Config(
                        "single_scale_min takes the single value 1 (enabled)".into(),
                    ));
                }
                map.set("search.scale_mode", "small-only");
            }
            AblationAxis::SingleScaleMax => {
                if value != 1 {
                    return Err(Error::Config(
                        "single_scale_max takes the single value 1 (enabled)".into(),
                    ));
                }
                map.set("search.scale_mode", "large-only");
            }
        }
        Ok(())
    }
}

/// One finished (or failed) ablation cell.
#[derive(Debug)]
pub struct AblationCell {
    pub axis_value: u64,
    pub seed: u64,
    pub result: Result<RunSummary>,
}

/// Run the full cross product of `values` x `seeds`, up to `workers` cells
/// in parallel (each cell is internally single-threaded and writes only its
/// own directory).
pub fn ablation_matrix(
    base: &ConfigMap,
    axis: AblationAxis,
    values: &[u64],
    seeds: &[u64],
    output_dir: &Path,
    workers: usize,
) -> Result<Vec<AblationCell>> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablation needs values and seeds".into()));
    }
    let mut cells: Vec<(u64, u64, RunConfig)> = Vec::new();
    for &value in values {
        for &seed in seeds {
            let mut map = base.clone();
            axis.apply(&mut map, value)?;
            map.set("seed", &seed.to_string());
            let dir = output_dir
                .join(format!("{}={value}", axis.name()))
                .join(format!("seed={seed}"));
            map.set("output_dir", &dir.display().to_string());
            let config = RunConfig::from_map(&map)?;
            cells.push((value, seed, config));
        }
    }

    let queue = Mutex::new(cells.into_iter());
    let results = Mutex::new(Vec::new());
    let workers = workers.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").next();
                match next {
                    Some((value, seed, config)) => {
                        let result = run(&config);
                        results.lock().expect("results lock").push(AblationCell {
                            axis_value: value,
                            seed,
                            result,
                        });
                    }
                    None => break,
                }
            });
        }
    });

    let mut cells = results.into_inner().expect("results lock");
    cells.sort_by_key(|c| (c.axis_value, c.seed));
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing_round_trips() {
        for name in ["population_size", "annealing", "single_scale_min", "single_scale_max"] {
            let axis: AblationAxis = name.parse().unwrap();
            assert_eq!(axis.name(), name);
        }
        assert!("volume".parse::<AblationAxis>().is_err());
    }

    #[test]
    fn single_scale_axes_set_the_mode() {
        let mut map = ConfigMap::default();
        AblationAxis::SingleScaleMin.apply(&mut map, 1).unwrap();
        let config = RunConfig::from_map(&map).unwrap();
        assert_eq!(
            config.search.unwrap().scale_mode,
            crate::search::ScaleMode::SmallOnly
        );
    }

    #[test]
    fn population_axis_sets_the_size() {
        let mut map = ConfigMap::default();
        AblationAxis::PopulationSize.apply(&mut map, 4).unwrap();
        let config = RunConfig::from_map(&map).unwrap();
        assert_eq!(config.search.unwrap().population_size, 4);
    }
}
