#![allow(dead_code)]

use scn_cache_sim::{build_scenario, LoadedScenario, ScenarioConfig};

pub const TYPE_GRID: [f64; 3] = [0.0, 50.0, 100.0];
pub const FILE_SIZE: f64 = 5e6;
pub const SBS: usize = 3;
const ALPHAS: [f64; 3] = [0.2, 0.8, 2.0];

/// Small scenario with 2 or 3 CPs, the 3-type grid and 6 storage levels.
pub fn small_config(seed: u64) -> ScenarioConfig {
    let cp_count = 2 + (seed % 2) as usize;
    let true_types = (0..cp_count)
        .map(|k| TYPE_GRID[((seed as usize) * 7 + k * 5 + 1) % TYPE_GRID.len()])
        .collect();
    let step = SBS as f64 * FILE_SIZE;
    ScenarioConfig {
        seed,
        cp_count,
        type_grid: TYPE_GRID.to_vec(),
        true_types: Some(true_types),
        file_count: 10,
        zipf_alpha: ALPHAS[(seed % 3) as usize],
        file_size: FILE_SIZE,
        sbs_count: SBS,
        user_counts: Some(vec![6; cp_count]),
        storage_capacity_bits: 5.0 * step,
        grid_step: Some(step),
        ..ScenarioConfig::default()
    }
}

pub fn corpus() -> Vec<LoadedScenario> {
    (1..=20)
        .map(|seed| build_scenario(&small_config(seed)).unwrap())
        .collect()
}

/// Two CPs, two files, no inter-cell interference and room for every request.
pub fn decoupled_config(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig {
        cp_count: 2,
        true_types: Some(vec![TYPE_GRID[1 + (seed % 2) as usize], TYPE_GRID[2]]),
        file_count: 2,
        user_counts: Some(vec![6; 2]),
        storage_capacity_bits: 5.0 * SBS as f64 * FILE_SIZE,
        ..small_config(seed)
    };
    cfg.channel.cross_gain = 0.0;
    cfg.channel.cross_mbs_gain = 0.0;
    cfg
}

/// Three interchangeable CPs with pairwise distinct types.
pub fn symmetric_config(seed: u64) -> ScenarioConfig {
    let r = (seed % 3) as usize;
    let types = (0..3).map(|k| TYPE_GRID[(k + r) % 3]).collect();
    ScenarioConfig {
        cp_count: 3,
        true_types: Some(types),
        user_counts: Some(vec![6; 3]),
        symmetric: true,
        ..small_config(seed)
    }
}
