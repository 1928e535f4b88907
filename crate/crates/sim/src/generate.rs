//! Seeded materialisation of a scenario file.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use scn_cache_core::{
    CpTypeVector, FileCatalog, Matrix, NetworkTopology, Scenario, StorageGrid, TypeGrid, UserRecord,
};

use crate::config::ScenarioConfig;
use crate::error::{Result, SimError};

/// A config together with the scenario it determines.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub scenario: Scenario,
    pub types: CpTypeVector,
}

impl LoadedScenario {
    pub fn type_grid(&self) -> &TypeGrid {
        &self.types.grid
    }

    pub fn true_types(&self) -> &[f64] {
        &self.types.true_types
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let config = ScenarioConfig::parse(&text, &path.display().to_string())?;
    build_scenario(&config)
}

/// Builds every derived structure from the config. Identical configs give
/// identical scenarios.
pub fn build_scenario(config: &ScenarioConfig) -> Result<LoadedScenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ch = &config.channel;
    let s = config.sbs_count;
    let m = config.mbs_count;
    let counts = config.user_counts();
    let draw = |mean: f64, rng: &mut ChaCha8Rng| {
        if ch.rayleigh {
            let e: f64 = rng.sample(Exp1);
            mean * e
        } else {
            mean
        }
    };

    // One block of users per CP. Symmetric scenarios repeat CP 0's block.
    let block_count = if config.symmetric { 1 } else { config.cp_count };
    let mut serving = Vec::new();
    for &n in &counts[..block_count] {
        for _ in 0..n {
            serving.push(rng.random_range(0..s));
        }
    }
    if let Some(explicit) = &ch.serving_sbs {
        serving.clone_from(explicit);
    }
    let mut columns = Vec::with_capacity(serving.len());
    for &home in &serving {
        let col: Vec<f64> = (0..s)
            .map(|i| {
                draw(
                    if i == home {
                        ch.access_gain
                    } else {
                        ch.cross_gain
                    },
                    &mut rng,
                )
            })
            .collect();
        columns.push(col);
    }
    let parent: Vec<usize> = (0..s).map(|i| i % m).collect();
    let mut mbs_gain = Matrix::filled(m, s, 0.0);
    let mut mbs_cross = Matrix::filled(m, s, 0.0);
    for (i, &home) in parent.iter().enumerate() {
        for l in 0..m {
            if l == home {
                mbs_gain.set(l, i, draw(ch.backhaul_gain, &mut rng));
            } else {
                mbs_cross.set(l, i, draw(ch.cross_mbs_gain, &mut rng));
            }
        }
    }
    if let Some(rows) = &ch.mbs_sbs_gain {
        mbs_gain = Matrix::from_rows(rows.clone())?;
    }
    if let Some(rows) = &ch.mbs_cross_gain {
        mbs_cross = Matrix::from_rows(rows.clone())?;
    }

    let mut users = Vec::new();
    let mut user_columns = Vec::new();
    for k in 0..config.cp_count {
        let offset = if config.symmetric {
            0
        } else {
            counts[..k].iter().sum()
        };
        for j in offset..offset + counts[k] {
            users.push(UserRecord {
                user_id: users.len(),
                serving_sbs: serving[j],
                subscriptions: BTreeSet::from([k]),
            });
            user_columns.push(&columns[j]);
        }
    }
    let n = users.len();
    let mut gain = Matrix::filled(s, n, 0.0);
    for (j, col) in user_columns.iter().enumerate() {
        for (i, &g) in col.iter().enumerate() {
            gain.set(i, j, g);
        }
    }
    if let Some(rows) = &ch.sbs_user_gain {
        gain = Matrix::from_rows(rows.clone())?;
    }

    let topology = NetworkTopology {
        mbs_count: m,
        sbs_count: s,
        sbs_parent: parent,
        users,
        channel_gain_sbs: gain,
        channel_gain_mbs_sbs: mbs_gain,
        channel_gain_cross_mbs: mbs_cross,
        bandwidth_sbs: Matrix::filled(s, n, config.bandwidth_hz),
        bandwidth_mbs: Matrix::filled(
            m,
            s,
            ch.backhaul_bandwidth_hz.unwrap_or(config.bandwidth_hz),
        ),
        noise_power: config.noise_power_w,
        sbs_power_budget: config.sbs_power_w,
        mbs_power: Matrix::filled(m, s, ch.mbs_power_w),
        sbs_storage_capacity: config.storage_capacity_bits,
    };
    let catalogs = (0..config.cp_count)
        .map(|k| FileCatalog::zipf(k, config.file_count, config.zipf_alpha, config.file_size))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let grid = StorageGrid::new(config.grid_step(), config.storage_capacity_bits)?;
    let scenario = Scenario::new(topology, catalogs, grid, config.currency_scale)?;
    let types = CpTypeVector::truthful(
        config.true_types(),
        TypeGrid::new(config.type_grid.clone())?,
    )?;
    Ok(LoadedScenario {
        config: config.clone(),
        scenario,
        types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            cp_count: 2,
            type_grid: vec![0.0, 5.0],
            true_types: Some(vec![5.0, 0.0]),
            file_count: 4,
            sbs_count: 3,
            user_counts: Some(vec![3, 2]),
            storage_capacity_bits: 6e6,
            file_size: 1e6,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn same_config_same_scenario() {
        let a = build_scenario(&small()).unwrap();
        let b = build_scenario(&small()).unwrap();
        assert_eq!(a.scenario, b.scenario);
    }

    #[test]
    fn seed_changes_gains_not_shape() {
        let a = build_scenario(&small()).unwrap();
        let b = build_scenario(&ScenarioConfig {
            seed: 99,
            ..small()
        })
        .unwrap();
        assert_ne!(
            a.scenario.topology.channel_gain_sbs,
            b.scenario.topology.channel_gain_sbs
        );
        assert_eq!(
            a.scenario.topology.users.len(),
            b.scenario.topology.users.len()
        );
        assert_eq!(a.scenario.topology.sbs_count, b.scenario.topology.sbs_count);
        assert_eq!(a.scenario.catalogs, b.scenario.catalogs);
    }

    #[test]
    fn default_scenario_shape() {
        let d = build_scenario(&ScenarioConfig::default()).unwrap();
        let t = &d.scenario.topology;
        assert_eq!(d.scenario.cp_count(), 5);
        assert_eq!((t.sbs_count, t.mbs_count, t.users.len()), (10, 1, 100));
        assert_eq!(d.scenario.capacity(), 1e9);
        assert_eq!(d.scenario.grid.len(), 21);
        assert_eq!(d.scenario.catalogs[0].len(), 100);
        assert_eq!(d.true_types(), &[20.0, 40.0, 60.0, 80.0, 100.0]);
    }

    #[test]
    fn symmetric_option_yields_symmetric_scenario() {
        let cfg = ScenarioConfig {
            symmetric: true,
            user_counts: Some(vec![3, 3]),
            ..small()
        };
        let d = build_scenario(&cfg).unwrap();
        assert!(d.scenario.check_symmetric().is_ok());
        assert!(build_scenario(&small())
            .unwrap()
            .scenario
            .check_symmetric()
            .is_err());
    }

    #[test]
    fn overrides_replace_draws() {
        let mut cfg = small();
        cfg.user_counts = Some(vec![1, 1]);
        cfg.channel.serving_sbs = Some(vec![2, 0]);
        cfg.channel.sbs_user_gain = Some(vec![vec![0.1, 1.0], vec![0.2, 0.2], vec![1.0, 0.1]]);
        let d = build_scenario(&cfg).unwrap();
        let t = &d.scenario.topology;
        assert_eq!(t.users[0].serving_sbs, 2);
        assert_eq!(t.channel_gain_sbs.get(2, 0), 1.0);
    }
}
