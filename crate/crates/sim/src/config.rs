//! Scenario files.
//!
//! A scenario is a TOML document with flat top-level keys and an optional
//! `[channel]` table. Only `storage_capacity_bits` is required.

use serde::Deserialize;

use crate::error::SimError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::cp_count")]
    pub cp_count: usize,
    #[serde(default = "defaults::type_grid")]
    pub type_grid: Vec<f64>,
    /// Defaults to the type grid when it has one entry per CP.
    #[serde(default)]
    pub true_types: Option<Vec<f64>>,
    #[serde(default = "defaults::file_count")]
    pub file_count: usize,
    #[serde(default = "defaults::zipf_alpha")]
    pub zipf_alpha: f64,
    #[serde(default = "defaults::file_size")]
    pub file_size: f64,
    #[serde(default = "defaults::sbs_count")]
    pub sbs_count: usize,
    #[serde(default = "defaults::mbs_count")]
    pub mbs_count: usize,
    /// Subscribers per CP; defaults to 20 each.
    #[serde(default)]
    pub user_counts: Option<Vec<usize>>,
    pub storage_capacity_bits: f64,
    #[serde(default = "defaults::sbs_power_w")]
    pub sbs_power_w: f64,
    #[serde(default = "defaults::bandwidth_hz")]
    pub bandwidth_hz: f64,
    #[serde(default = "defaults::noise_power_w")]
    pub noise_power_w: f64,
    /// Storage grid step in bits; defaults to capacity / 20.
    #[serde(default)]
    pub grid_step: Option<f64>,
    /// Per-CP price caps for misreport sweeps.
    #[serde(default)]
    pub price_caps: Option<Vec<f64>>,
    /// Cap as a multiple of the truthful price, used when `price_caps` is absent.
    #[serde(default = "defaults::price_cap_factor")]
    pub price_cap_factor: f64,
    /// Currency units per bit/s.
    #[serde(default = "defaults::currency_scale")]
    pub currency_scale: f64,
    /// Give every CP a copy of CP 0's subscribers.
    #[serde(default)]
    pub symmetric: bool,
    /// Round budget for the matching solver.
    #[serde(default)]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub channel: ChannelConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Mean |h|^2 of SBS to served-user links.
    #[serde(default = "defaults::access_gain")]
    pub access_gain: f64,
    /// Mean |h|^2 of SBS to non-served-user links.
    #[serde(default = "defaults::cross_gain")]
    pub cross_gain: f64,
    /// Mean |h|^2 of MBS to attached-SBS links.
    #[serde(default = "defaults::backhaul_gain")]
    pub backhaul_gain: f64,
    /// Mean |h|^2 of MBS to non-attached-SBS links.
    #[serde(default = "defaults::cross_gain")]
    pub cross_mbs_gain: f64,
    #[serde(default = "defaults::sbs_power_w")]
    pub mbs_power_w: f64,
    /// Defaults to `bandwidth_hz`.
    #[serde(default)]
    pub backhaul_bandwidth_hz: Option<f64>,
    /// Draw gains as mean x Exp(1); otherwise use the means directly.
    #[serde(default = "defaults::rayleigh")]
    pub rayleigh: bool,
    /// Explicit serving SBS per user.
    #[serde(default)]
    pub serving_sbs: Option<Vec<usize>>,
    /// Explicit SBS x user gains.
    #[serde(default)]
    pub sbs_user_gain: Option<Vec<Vec<f64>>>,
    /// Explicit MBS x SBS gains of attached links.
    #[serde(default)]
    pub mbs_sbs_gain: Option<Vec<Vec<f64>>>,
    /// Explicit MBS x SBS gains of non-attached links.
    #[serde(default)]
    pub mbs_cross_gain: Option<Vec<Vec<f64>>>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            access_gain: defaults::access_gain(),
            cross_gain: defaults::cross_gain(),
            backhaul_gain: defaults::backhaul_gain(),
            cross_mbs_gain: defaults::cross_gain(),
            mbs_power_w: defaults::sbs_power_w(),
            backhaul_bandwidth_hz: None,
            rayleigh: defaults::rayleigh(),
            serving_sbs: None,
            sbs_user_gain: None,
            mbs_sbs_gain: None,
            mbs_cross_gain: None,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: defaults::seed(),
            cp_count: defaults::cp_count(),
            type_grid: defaults::type_grid(),
            true_types: None,
            file_count: defaults::file_count(),
            zipf_alpha: defaults::zipf_alpha(),
            file_size: defaults::file_size(),
            sbs_count: defaults::sbs_count(),
            mbs_count: defaults::mbs_count(),
            user_counts: None,
            storage_capacity_bits: 1e9,
            sbs_power_w: defaults::sbs_power_w(),
            bandwidth_hz: defaults::bandwidth_hz(),
            noise_power_w: defaults::noise_power_w(),
            grid_step: None,
            price_caps: None,
            price_cap_factor: defaults::price_cap_factor(),
            currency_scale: defaults::currency_scale(),
            symmetric: false,
            max_rounds: None,
            channel: ChannelConfig::default(),
        }
    }
}

mod defaults {
    pub fn seed() -> u64 {
        1
    }
    pub fn cp_count() -> usize {
        5
    }
    pub fn type_grid() -> Vec<f64> {
        vec![20.0, 40.0, 60.0, 80.0, 100.0]
    }
    pub fn file_count() -> usize {
        100
    }
    pub fn zipf_alpha() -> f64 {
        0.2
    }
    pub fn file_size() -> f64 {
        5e6
    }
    pub fn sbs_count() -> usize {
        10
    }
    pub fn mbs_count() -> usize {
        1
    }
    pub fn sbs_power_w() -> f64 {
        1.0
    }
    pub fn bandwidth_hz() -> f64 {
        1e8
    }
    pub fn noise_power_w() -> f64 {
        1e-10
    }
    pub fn price_cap_factor() -> f64 {
        1.0
    }
    pub fn currency_scale() -> f64 {
        1e-6
    }
    pub fn access_gain() -> f64 {
        1e-8
    }
    pub fn cross_gain() -> f64 {
        1e-11
    }
    pub fn backhaul_gain() -> f64 {
        1e-10
    }
    pub fn rayleigh() -> bool {
        true
    }
}

pub const DEFAULT_USERS_PER_CP: usize = 20;

impl ScenarioConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, SimError> {
        let config: Self = toml::from_str(text).map_err(|source| SimError::Parse {
            origin: origin.to_string(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn true_types(&self) -> Vec<f64> {
        match &self.true_types {
            Some(t) => t.clone(),
            None if self.type_grid.len() == self.cp_count => self.type_grid.clone(),
            None => vec![*self.type_grid.last().unwrap_or(&0.0); self.cp_count],
        }
    }

    pub fn user_counts(&self) -> Vec<usize> {
        self.user_counts
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_USERS_PER_CP; self.cp_count])
    }

    pub fn total_users(&self) -> usize {
        self.user_counts().iter().sum()
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step.unwrap_or(self.storage_capacity_bits / 20.0)
    }

    /// Lists every violated invariant.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let positive = |x: f64| x > 0.0 && x.is_finite();
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();

        need(
            (1..=64).contains(&self.cp_count),
            format!("cp_count = {} must be in 1..=64", self.cp_count),
        );
        need(
            !self.type_grid.is_empty(),
            "type_grid must not be empty".into(),
        );
        need(
            self.type_grid.iter().all(|&t| nonneg(t)),
            "type_grid entries must be >= 0".into(),
        );
        need(
            self.type_grid.windows(2).all(|w| w[0] < w[1]),
            "type_grid must be strictly ascending".into(),
        );
        if let Some(t) = &self.true_types {
            need(
                t.len() == self.cp_count,
                format!(
                    "true_types has {} entries, expected cp_count = {}",
                    t.len(),
                    self.cp_count
                ),
            );
            for &x in t {
                need(
                    self.type_grid.contains(&x),
                    format!("true type {x} is not in type_grid"),
                );
            }
        }
        need(self.file_count >= 1, "file_count must be >= 1".into());
        need(
            nonneg(self.zipf_alpha),
            format!("zipf_alpha = {} must be >= 0", self.zipf_alpha),
        );
        need(
            positive(self.file_size),
            format!("file_size = {} must be > 0", self.file_size),
        );
        need(self.sbs_count >= 1, "sbs_count must be >= 1".into());
        need(self.mbs_count >= 1, "mbs_count must be >= 1".into());
        if let Some(u) = &self.user_counts {
            need(
                u.len() == self.cp_count,
                format!(
                    "user_counts has {} entries, expected cp_count = {}",
                    u.len(),
                    self.cp_count
                ),
            );
            need(
                u.iter().all(|&n| n >= 1),
                "user_counts entries must be >= 1".into(),
            );
            need(
                !self.symmetric || u.windows(2).all(|w| w[0] == w[1]),
                "symmetric scenarios need equal user_counts".into(),
            );
        }
        need(
            positive(self.storage_capacity_bits),
            format!(
                "storage_capacity_bits = {} must be > 0",
                self.storage_capacity_bits
            ),
        );
        need(
            positive(self.sbs_power_w),
            format!("sbs_power_w = {} must be > 0", self.sbs_power_w),
        );
        need(
            positive(self.bandwidth_hz),
            format!("bandwidth_hz = {} must be > 0", self.bandwidth_hz),
        );
        need(
            positive(self.noise_power_w),
            format!("noise_power_w = {} must be > 0", self.noise_power_w),
        );
        if let Some(step) = self.grid_step {
            need(positive(step), format!("grid_step = {step} must be > 0"));
            need(
                step <= self.storage_capacity_bits,
                format!("grid_step = {step} exceeds storage_capacity_bits"),
            );
        }
        if let Some(caps) = &self.price_caps {
            need(
                caps.len() == self.cp_count,
                format!(
                    "price_caps has {} entries, expected cp_count = {}",
                    caps.len(),
                    self.cp_count
                ),
            );
        }
        need(
            nonneg(self.price_cap_factor),
            "price_cap_factor must be >= 0".into(),
        );
        need(
            positive(self.currency_scale),
            "currency_scale must be > 0".into(),
        );
        need(self.max_rounds != Some(0), "max_rounds must be >= 1".into());

        let ch = &self.channel;
        for (name, v) in [
            ("channel.access_gain", ch.access_gain),
            ("channel.cross_gain", ch.cross_gain),
            ("channel.backhaul_gain", ch.backhaul_gain),
            ("channel.cross_mbs_gain", ch.cross_mbs_gain),
            ("channel.mbs_power_w", ch.mbs_power_w),
        ] {
            need(nonneg(v), format!("{name} = {v} must be >= 0"));
        }
        if let Some(w) = ch.backhaul_bandwidth_hz {
            need(
                positive(w),
                format!("channel.backhaul_bandwidth_hz = {w} must be > 0"),
            );
        }
        let users = self.total_users();
        if let Some(s) = &ch.serving_sbs {
            need(
                s.len() == users,
                format!(
                    "channel.serving_sbs has {} entries, expected {users} users",
                    s.len()
                ),
            );
            need(
                s.iter().all(|&i| i < self.sbs_count),
                "channel.serving_sbs entries must be < sbs_count".into(),
            );
            need(
                !self.symmetric,
                "channel.serving_sbs cannot be combined with symmetric".into(),
            );
        }
        let mut matrix = |name: &str, m: &Option<Vec<Vec<f64>>>, rows: usize, cols: usize| {
            if let Some(m) = m {
                need(
                    m.len() == rows && m.iter().all(|r| r.len() == cols),
                    format!("channel.{name} must be {rows} x {cols}"),
                );
                need(
                    m.iter().flatten().all(|&v| nonneg(v)),
                    format!("channel.{name} entries must be >= 0"),
                );
            }
        };
        matrix("sbs_user_gain", &ch.sbs_user_gain, self.sbs_count, users);
        matrix(
            "mbs_sbs_gain",
            &ch.mbs_sbs_gain,
            self.mbs_count,
            self.sbs_count,
        );
        matrix(
            "mbs_cross_gain",
            &ch.mbs_cross_gain,
            self.mbs_count,
            self.sbs_count,
        );

        if errs.is_empty() {
            Ok(())
        } else {
            Err(SimError::Invalid(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_defaults() {
        let c = ScenarioConfig::parse("storage_capacity_bits = 1e9\n", "inline").unwrap();
        assert_eq!(c.cp_count, 5);
        assert_eq!(c.file_count, 100);
        assert_eq!(c.zipf_alpha, 0.2);
        assert_eq!(c.sbs_count, 10);
        assert_eq!(c.true_types(), c.type_grid);
        assert_eq!(c.user_counts(), vec![20; 5]);
        assert_eq!(c.grid_step(), 5e7);
        assert_eq!(c, ScenarioConfig::default());
    }

    #[test]
    fn missing_capacity_names_the_field() {
        let err = ScenarioConfig::parse("seed = 3\n", "inline").unwrap_err();
        assert!(err.to_string().contains("storage_capacity_bits"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ScenarioConfig::parse("storage_capacity_bits = 1e9\nseed = \"x\"\n", "inline")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("seed"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::parse("storage_capacity_bits = 1\nfoo = 1\n", "inline").is_err());
    }

    #[test]
    fn invariant_violations_listed_together() {
        let text = "storage_capacity_bits = -1\ncp_count = 2\nfile_size = 0\ntype_grid = [3, 1]\n";
        match ScenarioConfig::parse(text, "inline").unwrap_err() {
            SimError::Invalid(list) => {
                assert!(list.len() >= 3, "{list:?}");
                assert!(list.iter().any(|m| m.contains("storage_capacity_bits")));
                assert!(list.iter().any(|m| m.contains("file_size")));
                assert!(list.iter().any(|m| m.contains("ascending")));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn channel_table_parses() {
        let text = "storage_capacity_bits = 10\ncp_count = 1\ntype_grid = [2]\nsbs_count = 2\nuser_counts = [1]\n\
                    [channel]\nrayleigh = false\nserving_sbs = [1]\nsbs_user_gain = [[0.1], [1.0]]\n";
        let c = ScenarioConfig::parse(text, "inline").unwrap();
        assert!(!c.channel.rayleigh);
        assert_eq!(c.channel.sbs_user_gain, Some(vec![vec![0.1], vec![1.0]]));
        let bad = text.replace("[[0.1], [1.0]]", "[[0.1]]");
        assert!(ScenarioConfig::parse(&bad, "inline").is_err());
    }
}
