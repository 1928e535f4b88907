//! Scenarios and social welfare.
//!
//! [`social_welfare`] evaluates an allocation through the per-user, per-file
//! rate model. [`WelfareModel`] evaluates the same quantity from precomputed
//! prefix sums and is what the solvers call in their inner loops.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::allocation::StorageGrid;
use crate::catalog::{cp_demand, placement_from_allocation, Demand, FileCatalog};
use crate::error::{Error, Result};
use crate::mechanism::storage_cost;
use crate::model::{
    backhaul_rate, cache_load, cp_total_rate, power_map, shannon_rate, NetworkTopology,
};

/// Relative tolerance for capacity feasibility checks on real-valued allocations.
pub const CAPACITY_TOL: f64 = 1e-9;

/// Largest number of CPs a scenario may hold.
pub const MAX_CPS: usize = 64;

/// A subset of CPs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CpSet(u64);

impl CpSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn all(cp_count: usize) -> Self {
        debug_assert!(cp_count <= MAX_CPS);
        if cp_count >= 64 {
            Self(u64::MAX)
        } else {
            Self((1u64 << cp_count) - 1)
        }
    }

    pub fn contains(self, cp: usize) -> bool {
        cp < 64 && self.0 & (1 << cp) != 0
    }

    pub fn with(self, cp: usize) -> Self {
        Self(self.0 | (1 << cp))
    }

    pub fn without(self, cp: usize) -> Self {
        Self(self.0 & !(1 << cp))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&k| self.contains(k))
    }
}

/// A fully materialised network: topology, per-CP catalogs and the storage grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub catalogs: Vec<FileCatalog>,
    pub grid: StorageGrid,
    /// Currency units per bit/s of rate.
    pub currency_scale: f64,
}

impl Scenario {
    pub fn new(
        topology: NetworkTopology,
        catalogs: Vec<FileCatalog>,
        grid: StorageGrid,
        currency_scale: f64,
    ) -> Result<Self> {
        let scenario = Self {
            topology,
            catalogs,
            grid,
            currency_scale,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let c = self.catalogs.len();
        if c == 0 || c > MAX_CPS {
            return Err(Error::Invalid(format!(
                "CP count {c} must be in 1..={MAX_CPS}"
            )));
        }
        for (k, cat) in self.catalogs.iter().enumerate() {
            if cat.cp() != k {
                return Err(Error::Invalid(format!(
                    "catalog at position {k} belongs to CP {}",
                    cat.cp()
                )));
            }
        }
        for u in &self.topology.users {
            if let Some(&cp) = u.subscriptions.iter().find(|&&cp| cp >= c) {
                return Err(Error::OutOfRange {
                    what: "CP",
                    index: cp,
                    len: c,
                });
            }
        }
        let top = self.grid.levels().last().copied().unwrap_or(0.0);
        if top > self.capacity() * (1.0 + CAPACITY_TOL) {
            return Err(Error::Invalid(format!(
                "grid level {top} exceeds storage capacity {}",
                self.capacity()
            )));
        }
        if !(self.currency_scale > 0.0 && self.currency_scale.is_finite()) {
            return Err(Error::Invalid(format!(
                "currency scale {} must be > 0",
                self.currency_scale
            )));
        }
        Ok(())
    }

    pub fn cp_count(&self) -> usize {
        self.catalogs.len()
    }

    pub fn capacity(&self) -> f64 {
        self.topology.sbs_storage_capacity
    }

    pub fn all_cps(&self) -> CpSet {
        CpSet::all(self.cp_count())
    }

    pub fn check_feasible(&self, rho: &[f64]) -> Result<()> {
        if rho.len() != self.cp_count() {
            return Err(Error::DimensionMismatch {
                expected: self.cp_count(),
                found: rho.len(),
            });
        }
        if let Some(r) = rho.iter().find(|r| r.is_nan() || **r < 0.0) {
            return Err(Error::Invalid(format!(
                "storage allocation {r} must be >= 0"
            )));
        }
        let total: f64 = rho.iter().sum();
        let cap = self.capacity();
        if total > cap + CAPACITY_TOL * cap.max(1.0) {
            return Err(Error::InfeasibleAllocation {
                total_bits: total,
                capacity_bits: cap,
            });
        }
        Ok(())
    }

    /// Checks that every pair of CPs is interchangeable: identical catalogs and
    /// a one-to-one pairing of their subscribers with identical serving SBS,
    /// gains and bandwidths. Types are not compared.
    pub fn check_symmetric(&self) -> Result<()> {
        let signatures: Vec<Vec<UserSignature>> = (0..self.cp_count())
            .map(|k| self.user_signatures(k))
            .collect();
        for k in 1..self.cp_count() {
            let (a, b) = (&self.catalogs[0], &self.catalogs[k]);
            if a.sizes() != b.sizes() || a.popularity() != b.popularity() {
                return Err(Error::NotSymmetric(format!(
                    "catalogs of CP 0 and CP {k} differ"
                )));
            }
            if signatures[0] != signatures[k] {
                return Err(Error::NotSymmetric(format!(
                    "subscribers of CP 0 and CP {k} differ in placement or channels"
                )));
            }
        }
        Ok(())
    }

    fn user_signatures(&self, cp: usize) -> Vec<UserSignature> {
        let t = &self.topology;
        let mut sigs: Vec<UserSignature> = t
            .users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.subscribes_to(cp))
            .map(|(j, u)| {
                let mut bits = Vec::with_capacity(2 * t.sbs_count + 1);
                bits.push(u.subscriptions.len() as u64);
                bits.extend(t.channel_gain_sbs.column(j).map(f64::to_bits));
                bits.extend(t.bandwidth_sbs.column(j).map(f64::to_bits));
                (u.serving_sbs, bits)
            })
            .collect();
        sigs.sort();
        sigs
    }
}

type UserSignature = (usize, Vec<u64>);

/// Welfare of `participants` under allocation `rho` (bits per CP) and declared
/// types, evaluated link by link and file by file.
///
/// Only participants cache content, so only they generate interference.
pub fn social_welfare(
    scenario: &Scenario,
    rho: &[f64],
    declared_types: &[f64],
    participants: CpSet,
) -> Result<f64> {
    scenario.check_feasible(rho)?;
    if declared_types.len() != scenario.cp_count() {
        return Err(Error::DimensionMismatch {
            expected: scenario.cp_count(),
            found: declared_types.len(),
        });
    }
    let topo = &scenario.topology;
    let placements: Vec<_> = scenario
        .catalogs
        .iter()
        .enumerate()
        .map(|(k, cat)| {
            let bits = if participants.contains(k) {
                rho[k]
            } else {
                0.0
            };
            placement_from_allocation(cat, bits, topo.sbs_count)
        })
        .collect();
    let load = cache_load(topo, &scenario.catalogs, &placements)?;
    let powers = power_map(topo, &load);
    let mut welfare = 0.0;
    for k in participants.iter() {
        let rate = cp_total_rate(
            topo,
            &scenario.catalogs[k],
            &placements[k],
            &powers,
            declared_types[k],
        )?;
        welfare += rate * scenario.currency_scale - storage_cost(declared_types[k])?;
    }
    Ok(welfare)
}

/// Per-CP rates and welfare terms of one evaluated allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Participants, as evaluated.
    pub participants: CpSet,
    /// Rate in currency units; 0 for non-participants.
    pub rates: Vec<f64>,
    /// Rate minus storage cost; 0 for non-participants.
    pub terms: Vec<f64>,
    /// Sum of the participants' terms in index order.
    pub welfare: f64,
}

impl Evaluation {
    /// Welfare of every participant except `cp`, summed in index order.
    pub fn welfare_of_others(&self, cp: usize) -> f64 {
        let mut total = 0.0;
        for k in self.participants.iter().filter(|&k| k != cp) {
            total += self.terms[k];
        }
        total
    }
}

/// Precomputed welfare evaluator for one scenario and one type profile.
#[derive(Debug, Clone)]
pub struct WelfareModel<'a> {
    scenario: &'a Scenario,
    types: Vec<f64>,
    costs: Vec<f64>,
    demand: Vec<Demand>,
    /// Received signal power on each user's serving link.
    signal: Vec<f64>,
    /// Backhaul rate of each user's serving SBS.
    user_backhaul: Vec<f64>,
    /// Subscribers of each CP at each SBS, [cp][sbs].
    subscribers: Vec<Vec<Vec<usize>>>,
    /// Subscriptions summed over CPs at each SBS.
    load_den: Vec<f64>,
    /// Popularity mass of the first m files in caching order, [cp][m].
    mass_prefix: Vec<Vec<f64>>,
    /// Requests for the first m files in caching order, [cp][sbs][m].
    request_prefix: Vec<Vec<Vec<f64>>>,
    /// Cached prefix length for each grid level, [cp][level].
    level_prefix: Vec<Vec<usize>>,
}

impl<'a> WelfareModel<'a> {
    pub fn new(scenario: &'a Scenario, types: &[f64]) -> Result<Self> {
        let c = scenario.cp_count();
        if types.len() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                found: types.len(),
            });
        }
        let topo = &scenario.topology;
        let s = topo.sbs_count;
        let costs = types
            .iter()
            .map(|&t| storage_cost(t))
            .collect::<Result<Vec<_>>>()?;
        let demand = scenario
            .catalogs
            .iter()
            .zip(types)
            .map(|(cat, &t)| cp_demand(cat, t, &topo.users, s))
            .collect::<Result<Vec<_>>>()?;

        let active = topo.active_users_per_sbs();
        let mut signal = Vec::with_capacity(topo.users.len());
        let mut user_backhaul = Vec::with_capacity(topo.users.len());
        let sbs_backhaul = (0..s)
            .map(|i| backhaul_rate(topo, topo.sbs_parent[i], i))
            .collect::<Result<Vec<_>>>()?;
        for (j, u) in topo.users.iter().enumerate() {
            let i = u.serving_sbs;
            let p = if u.subscriptions.is_empty() {
                0.0
            } else {
                topo.sbs_power_budget / active[i] as f64
            };
            signal.push(p * topo.channel_gain_sbs.get(i, j));
            user_backhaul.push(sbs_backhaul[i]);
        }

        let mut subscribers = vec![vec![Vec::new(); s]; c];
        for (j, u) in topo.users.iter().enumerate() {
            for &k in &u.subscriptions {
                subscribers[k][u.serving_sbs].push(j);
            }
        }
        let mut load_den = vec![0.0; s];
        for subs in &subscribers {
            for (l, users) in subs.iter().enumerate() {
                load_den[l] += users.len() as f64;
            }
        }

        let mut mass_prefix = Vec::with_capacity(c);
        let mut request_prefix = Vec::with_capacity(c);
        let mut level_prefix = Vec::with_capacity(c);
        for (k, cat) in scenario.catalogs.iter().enumerate() {
            let order = cat.caching_order();
            let mut mass = Vec::with_capacity(order.len() + 1);
            mass.push(0.0);
            let mut acc = 0.0;
            for &f in order {
                acc += cat.popularity()[f];
                mass.push(acc);
            }
            mass_prefix.push(mass);
            request_prefix.push(
                (0..s)
                    .map(|i| {
                        let mut acc = 0u64;
                        let mut v = Vec::with_capacity(order.len() + 1);
                        v.push(0.0);
                        for &f in order {
                            acc += demand[k].count(i, f);
                            v.push(acc as f64);
                        }
                        v
                    })
                    .collect(),
            );
            level_prefix.push(
                scenario
                    .grid
                    .levels()
                    .iter()
                    .map(|&bits| prefix_for_bits(cat, bits, s))
                    .collect(),
            );
        }

        Ok(Self {
            scenario,
            types: types.to_vec(),
            costs,
            demand,
            signal,
            user_backhaul,
            subscribers,
            load_den,
            mass_prefix,
            request_prefix,
            level_prefix,
        })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn types(&self) -> &[f64] {
        &self.types
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cp_count(&self) -> usize {
        self.types.len()
    }

    pub fn grid(&self) -> &StorageGrid {
        &self.scenario.grid
    }

    /// Cached prefix length of `cp` at grid level index `level`.
    pub fn prefix_at_level(&self, cp: usize, level: usize) -> usize {
        self.level_prefix[cp][level]
    }

    pub fn evaluate_levels(&self, levels: &[usize], participants: CpSet) -> Evaluation {
        let prefixes: Vec<usize> = levels
            .iter()
            .enumerate()
            .map(|(k, &l)| self.level_prefix[k][l])
            .collect();
        self.evaluate_prefixes(&prefixes, participants)
    }

    pub fn evaluate_bits(&self, rho: &[f64], participants: CpSet) -> Result<Evaluation> {
        self.scenario.check_feasible(rho)?;
        let s = self.scenario.topology.sbs_count;
        let prefixes: Vec<usize> = self
            .scenario
            .catalogs
            .iter()
            .zip(rho)
            .map(|(cat, &bits)| prefix_for_bits(cat, bits, s))
            .collect();
        Ok(self.evaluate_prefixes(&prefixes, participants))
    }

    /// Evaluates an allocation given as cached prefix lengths (files per SBS, in
    /// caching order). Non-participants cache nothing.
    pub fn evaluate_prefixes(&self, prefixes: &[usize], participants: CpSet) -> Evaluation {
        let topo = &self.scenario.topology;
        let s = topo.sbs_count;
        let c = self.cp_count();
        let budget = topo.sbs_power_budget;

        let mut weighted = vec![0.0; s];
        for k in participants.iter() {
            let mass = self.mass_prefix[k][prefixes[k]];
            for (l, w) in weighted.iter_mut().enumerate() {
                *w += self.subscribers[k][l].len() as f64 * mass;
            }
        }
        let radiated: Vec<f64> = weighted
            .iter()
            .zip(&self.load_den)
            .map(|(&w, &d)| budget * if d > 0.0 { (w / d).min(1.0) } else { 0.0 })
            .collect();

        let mut access = vec![0.0; topo.users.len()];
        for (j, u) in topo.users.iter().enumerate() {
            if u.subscriptions.is_empty() {
                continue;
            }
            let mut interference = 0.0;
            for (l, &p) in radiated.iter().enumerate() {
                if l != u.serving_sbs {
                    interference += p * topo.channel_gain_sbs.get(l, j);
                }
            }
            access[j] = shannon_rate(
                topo.bandwidth_sbs.get(u.serving_sbs, j),
                self.signal[j],
                topo.noise_power + interference,
            );
        }

        let mut rates = vec![0.0; c];
        let mut terms = vec![0.0; c];
        let mut welfare = 0.0;
        for k in participants.iter() {
            let m = prefixes[k];
            let mut rate = 0.0;
            for i in 0..s {
                let users = &self.subscribers[k][i];
                if users.is_empty() {
                    continue;
                }
                let requests = &self.request_prefix[k][i];
                let cached = requests[m];
                let uncached = requests[requests.len() - 1] - cached;
                let mut sum_access = 0.0;
                let mut sum_bottleneck = 0.0;
                for &j in users {
                    sum_access += access[j];
                    sum_bottleneck += access[j].min(self.user_backhaul[j]);
                }
                rate += (cached * sum_access + uncached * sum_bottleneck) / users.len() as f64;
            }
            rates[k] = rate * self.scenario.currency_scale;
            terms[k] = rates[k] - self.costs[k];
            welfare += terms[k];
        }
        Evaluation {
            participants,
            rates,
            terms,
            welfare,
        }
    }

    /// Bits of `cp`'s requests that are not cached and so cross the backhaul.
    pub fn backhaul_bits(&self, cp: usize, prefix: usize) -> f64 {
        let cat = &self.scenario.catalogs[cp];
        let demand = &self.demand[cp];
        let mut total = 0.0;
        for i in 0..demand.sbs_count() {
            for &f in &cat.caching_order()[prefix..] {
                total += demand.count(i, f) as f64 * cat.sizes()[f];
            }
        }
        total
    }
}

/// Files per SBS, in caching order, that an allocation of `bits` caches.
pub fn prefix_for_bits(catalog: &FileCatalog, bits: f64, sbs_count: usize) -> usize {
    if sbs_count == 0 || bits.is_nan() || bits <= 0.0 {
        return 0;
    }
    catalog.cached_prefix_len(bits / sbs_count as f64)
}

/// Human-readable summary of a profile, used in reports.
pub fn describe_profile(types: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, t) in types.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!("{t}"));
    }
    out.push(']');
    out
}
