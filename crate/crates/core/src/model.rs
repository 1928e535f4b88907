//! Snapshot rate model of the two-tier network.
//!
//! SBS -> user links follow `w log2(1 + p|h|^2 / (noise + I))` where `I` is
//! the power other SBSs radiate toward the user. MBS -> SBS backhaul links use
//! the same form with MBS-tier interference only. All channel gains are linear
//! power gains of one deterministic snapshot.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::catalog::{cp_demand, CachePlacement, FileCatalog};
use crate::error::{Error, Result};

/// Dense row-major matrix of nonnegative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        let n = rows.len();
        Ok(Self {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, col))
    }

    fn check_shape(&self, name: &str, rows: usize, cols: usize) -> Result<()> {
        if self.rows != rows || self.cols != cols {
            return Err(Error::Invalid(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    fn check_nonnegative(&self, name: &str) -> Result<()> {
        match self.data.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            Some(v) => Err(Error::Invalid(format!(
                "{name} has entry {v}, must be >= 0"
            ))),
            None => Ok(()),
        }
    }
}

/// A user, its serving SBS and the CPs it requests content from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: usize,
    pub serving_sbs: usize,
    pub subscriptions: BTreeSet<usize>,
}

impl UserRecord {
    pub fn subscribes_to(&self, cp: usize) -> bool {
        self.subscriptions.contains(&cp)
    }
}

/// MBSs, SBSs, users and every link parameter of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub mbs_count: usize,
    pub sbs_count: usize,
    /// MBS feeding each SBS over backhaul.
    pub sbs_parent: Vec<usize>,
    pub users: Vec<UserRecord>,
    /// |h_ij|^2, SBS x user.
    pub channel_gain_sbs: Matrix,
    /// |h_mi|^2, MBS x SBS (serving backhaul link).
    pub channel_gain_mbs_sbs: Matrix,
    /// |h_li|^2, MBS x SBS (backhaul interference from non-parent MBSs).
    pub channel_gain_cross_mbs: Matrix,
    /// w_ij in Hz, SBS x user.
    pub bandwidth_sbs: Matrix,
    /// w_mi in Hz, MBS x SBS.
    pub bandwidth_mbs: Matrix,
    /// Noise power in W.
    pub noise_power: f64,
    /// Transmit power budget of each SBS in W.
    pub sbs_power_budget: f64,
    /// p_mi in W, MBS x SBS.
    pub mbs_power: Matrix,
    /// Network-wide SBS storage in bits.
    pub sbs_storage_capacity: f64,
}

impl NetworkTopology {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mbs_count == 0 || self.sbs_count == 0 {
            return Err(Error::Invalid(
                "topology needs at least one MBS and one SBS".into(),
            ));
        }
        if self.sbs_parent.len() != self.sbs_count {
            return Err(Error::DimensionMismatch {
                expected: self.sbs_count,
                found: self.sbs_parent.len(),
            });
        }
        if let Some(&m) = self.sbs_parent.iter().find(|&&m| m >= self.mbs_count) {
            return Err(Error::OutOfRange {
                what: "MBS",
                index: m,
                len: self.mbs_count,
            });
        }
        for u in &self.users {
            if u.serving_sbs >= self.sbs_count {
                return Err(Error::OutOfRange {
                    what: "SBS",
                    index: u.serving_sbs,
                    len: self.sbs_count,
                });
            }
        }
        let (s, m, n) = (self.sbs_count, self.mbs_count, self.users.len());
        self.channel_gain_sbs
            .check_shape("channel_gain_sbs", s, n)?;
        self.bandwidth_sbs.check_shape("bandwidth_sbs", s, n)?;
        self.channel_gain_mbs_sbs
            .check_shape("channel_gain_mbs_sbs", m, s)?;
        self.channel_gain_cross_mbs
            .check_shape("channel_gain_cross_mbs", m, s)?;
        self.bandwidth_mbs.check_shape("bandwidth_mbs", m, s)?;
        self.mbs_power.check_shape("mbs_power", m, s)?;
        self.channel_gain_sbs
            .check_nonnegative("channel_gain_sbs")?;
        self.channel_gain_mbs_sbs
            .check_nonnegative("channel_gain_mbs_sbs")?;
        self.channel_gain_cross_mbs
            .check_nonnegative("channel_gain_cross_mbs")?;
        self.bandwidth_sbs.check_nonnegative("bandwidth_sbs")?;
        self.bandwidth_mbs.check_nonnegative("bandwidth_mbs")?;
        self.mbs_power.check_nonnegative("mbs_power")?;
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Invalid(format!(
                "noise power {} must be > 0",
                self.noise_power
            )));
        }
        if !(self.sbs_power_budget >= 0.0 && self.sbs_power_budget.is_finite()) {
            return Err(Error::Invalid(format!(
                "SBS power budget {} must be >= 0",
                self.sbs_power_budget
            )));
        }
        if !(self.sbs_storage_capacity >= 0.0 && self.sbs_storage_capacity.is_finite()) {
            return Err(Error::Invalid(format!(
                "storage capacity {} must be >= 0",
                self.sbs_storage_capacity
            )));
        }
        Ok(())
    }

    fn check_user(&self, user: usize) -> Result<&UserRecord> {
        self.users.get(user).ok_or(Error::OutOfRange {
            what: "user",
            index: user,
            len: self.users.len(),
        })
    }

    /// Users with at least one subscription, per SBS. These share the SBS power budget.
    pub fn active_users_per_sbs(&self) -> Vec<usize> {
        let mut active = vec![0usize; self.sbs_count];
        for u in self.users.iter().filter(|u| !u.subscriptions.is_empty()) {
            active[u.serving_sbs] += 1;
        }
        active
    }

    /// Subscribers of `cp` attached to each SBS.
    pub fn subscribers_per_sbs(&self, cp: usize) -> Vec<usize> {
        let mut subs = vec![0usize; self.sbs_count];
        for u in self.users.iter().filter(|u| u.subscribes_to(cp)) {
            subs[u.serving_sbs] += 1;
        }
        subs
    }
}

/// Transmit powers in W, SBS x user.
///
/// For the serving SBS the entry is the power dedicated to the user; for every
/// other SBS it is the power that SBS radiates while serving cached traffic,
/// which is what the user sees as interference.
pub type PowerMap = Matrix;

/// Shannon rate in bit/s.
#[inline]
pub fn shannon_rate(bandwidth: f64, received_power: f64, noise_plus_interference: f64) -> f64 {
    bandwidth * libm::log2(1.0 + received_power / noise_plus_interference)
}

/// Access-link rate alpha_ij from SBS `sbs` to `user`.
pub fn sbs_user_rate(
    topology: &NetworkTopology,
    sbs: usize,
    user: usize,
    powers: &PowerMap,
    interference: f64,
) -> Result<f64> {
    let record = topology.check_user(user)?;
    if record.serving_sbs != sbs {
        return Err(Error::NotAssociated { user, sbs });
    }
    if interference.is_nan() || interference < 0.0 {
        return Err(Error::NegativeInterference(interference));
    }
    let p = powers.get(sbs, user);
    if p.is_nan() || p < 0.0 {
        return Err(Error::Invalid(format!(
            "power {p} W toward user {user} is negative"
        )));
    }
    Ok(shannon_rate(
        topology.bandwidth_sbs.get(sbs, user),
        p * topology.channel_gain_sbs.get(sbs, user),
        topology.noise_power + interference,
    ))
}

/// MBS-tier interference at `sbs` from every MBS other than `mbs`.
pub fn backhaul_interference(topology: &NetworkTopology, mbs: usize, sbs: usize) -> f64 {
    (0..topology.mbs_count)
        .filter(|&l| l != mbs)
        .map(|l| topology.mbs_power.get(l, sbs) * topology.channel_gain_cross_mbs.get(l, sbs))
        .sum()
}

/// Backhaul rate alpha'_mi from `mbs` to its attached `sbs`.
pub fn backhaul_rate(topology: &NetworkTopology, mbs: usize, sbs: usize) -> Result<f64> {
    if sbs >= topology.sbs_count {
        return Err(Error::OutOfRange {
            what: "SBS",
            index: sbs,
            len: topology.sbs_count,
        });
    }
    if topology.sbs_parent[sbs] != mbs {
        return Err(Error::NotAttached { mbs, sbs });
    }
    Ok(shannon_rate(
        topology.bandwidth_mbs.get(mbs, sbs),
        topology.mbs_power.get(mbs, sbs) * topology.channel_gain_mbs_sbs.get(mbs, sbs),
        topology.noise_power + backhaul_interference(topology, mbs, sbs),
    ))
}

/// SBS-tier interference at `user`: sum over non-serving SBSs of p_kj |h_kj|^2.
pub fn interference_at_user(
    topology: &NetworkTopology,
    user: usize,
    powers: &PowerMap,
) -> Result<f64> {
    let serving = topology.check_user(user)?.serving_sbs;
    if powers.rows() != topology.sbs_count || powers.cols() != topology.users.len() {
        return Err(Error::Invalid(
            "power map shape does not match topology".into(),
        ));
    }
    let mut total = 0.0;
    for k in (0..topology.sbs_count).filter(|&k| k != serving) {
        total += powers.get(k, user) * topology.channel_gain_sbs.get(k, user);
    }
    Ok(total)
}

/// Per-request rate: cached files are served at the access rate, others are
/// bottlenecked by the backhaul.
#[inline]
pub fn effective_rate(cached: bool, access_rate: f64, backhaul_rate: f64) -> f64 {
    if cached {
        access_rate
    } else {
        access_rate.min(backhaul_rate)
    }
}

/// Rate seen by `user` when requesting `file` of the catalog's CP.
pub fn effective_user_rate(
    topology: &NetworkTopology,
    catalog: &FileCatalog,
    placement: &CachePlacement,
    user: usize,
    file: usize,
    powers: &PowerMap,
    interference: f64,
) -> Result<f64> {
    if !catalog.contains(file) {
        return Err(Error::FileNotInCatalog {
            cp: catalog.cp(),
            file,
        });
    }
    let sbs = topology.check_user(user)?.serving_sbs;
    let access = sbs_user_rate(topology, sbs, user, powers, interference)?;
    let backhaul = backhaul_rate(topology, topology.sbs_parent[sbs], sbs)?;
    Ok(effective_rate(
        placement.is_cached(sbs, file),
        access,
        backhaul,
    ))
}

/// Total request-weighted rate of the CP's users.
///
/// Each SBS's request count for a file is shared equally by the CP's
/// subscribers at that SBS, so the contribution of SBS i is
/// `sum_f n_if * mean_{j in U_ki} r_ij(f)`.
pub fn cp_total_rate(
    topology: &NetworkTopology,
    catalog: &FileCatalog,
    placement: &CachePlacement,
    powers: &PowerMap,
    theta: f64,
) -> Result<f64> {
    let cp = catalog.cp();
    let demand = cp_demand(catalog, theta, &topology.users, topology.sbs_count)?;
    let subscribers = topology.subscribers_per_sbs(cp);
    let mut total = 0.0;
    for (j, u) in topology.users.iter().enumerate() {
        if !u.subscribes_to(cp) {
            continue;
        }
        let sbs = u.serving_sbs;
        let share = 1.0 / subscribers[sbs] as f64;
        let interference = interference_at_user(topology, j, powers)?;
        for f in 0..catalog.len() {
            let n = demand.count(sbs, f);
            if n == 0 {
                continue;
            }
            let r = effective_user_rate(topology, catalog, placement, j, f, powers, interference)?;
            total += n as f64 * share * r;
        }
    }
    Ok(total)
}

/// Fraction of an SBS's power budget radiated while serving cached content.
///
/// The load of SBS l is the popularity mass cached there, weighted by each
/// CP's subscriber count at l and normalised by all subscriptions at l. It
/// depends on placements and catalogs only, never on CP types.
pub fn cache_load(
    topology: &NetworkTopology,
    catalogs: &[FileCatalog],
    placements: &[CachePlacement],
) -> Result<Vec<f64>> {
    if catalogs.len() != placements.len() {
        return Err(Error::DimensionMismatch {
            expected: catalogs.len(),
            found: placements.len(),
        });
    }
    let s = topology.sbs_count;
    let mut weighted = vec![0.0; s];
    let mut subscriptions = vec![0.0; s];
    for (catalog, placement) in catalogs.iter().zip(placements) {
        let subs = topology.subscribers_per_sbs(catalog.cp());
        for l in 0..s {
            let mass: f64 = (0..catalog.len())
                .filter(|&f| placement.is_cached(l, f))
                .map(|f| catalog.popularity()[f])
                .sum();
            weighted[l] += subs[l] as f64 * mass;
            subscriptions[l] += subs[l] as f64;
        }
    }
    Ok(weighted
        .into_iter()
        .zip(subscriptions)
        .map(|(w, d)| if d > 0.0 { (w / d).min(1.0) } else { 0.0 })
        .collect())
}

/// Power map for the given cache loads.
///
/// Serving power is the SBS budget split equally across its active users.
/// Toward every other user an SBS radiates `budget x load`.
pub fn power_map(topology: &NetworkTopology, load: &[f64]) -> PowerMap {
    let active = topology.active_users_per_sbs();
    let mut powers = Matrix::filled(topology.sbs_count, topology.users.len(), 0.0);
    for (j, u) in topology.users.iter().enumerate() {
        for i in 0..topology.sbs_count {
            let p = if i == u.serving_sbs {
                if u.subscriptions.is_empty() {
                    0.0
                } else {
                    topology.sbs_power_budget / active[i] as f64
                }
            } else {
                topology.sbs_power_budget * load[i]
            };
            powers.set(i, j, p);
        }
    }
    powers
}
