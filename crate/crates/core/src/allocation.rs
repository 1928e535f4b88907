//! Storage allocation solvers over a discrete grid.
//!
//! Allocations are vectors of grid level indices. Level `l` holds `l` grid
//! steps, so an allocation is feasible when its indices sum to at most
//! [`StorageGrid::max_units`].

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::welfare::{CpSet, WelfareModel};

/// Largest number of allocations brute force will enumerate.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Largest proposal set for which the MNO enumerates acceptance subsets.
pub const EXACT_ACCEPTANCE_LIMIT: usize = 20;

/// Admissible storage amounts `{0, step, 2 step, ...}` up to the capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct StorageGrid {
    step: f64,
    levels: Vec<f64>,
}

impl StorageGrid {
    pub fn new(step: f64, capacity: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Invalid(format!("grid step {step} must be > 0")));
        }
        if !(capacity >= 0.0 && capacity.is_finite()) {
            return Err(Error::Invalid(format!("capacity {capacity} must be >= 0")));
        }
        let units = libm::floor(capacity / step * (1.0 + 1e-12)) as usize;
        let levels = (0..=units)
            .map(|l| (l as f64 * step).min(capacity))
            .collect();
        Ok(Self { step, levels })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Grid steps that fit into the capacity.
    pub fn max_units(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn bits(&self, levels: &[usize]) -> Vec<f64> {
        levels.iter().map(|&l| self.levels[l]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Matching,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    /// Storage in bits per CP.
    pub rho: Vec<f64>,
    /// Grid level index per CP.
    pub levels: Vec<usize>,
    pub welfare: f64,
    pub rounds: usize,
    pub method: Method,
    pub converged: bool,
}

impl AllocationOutcome {
    fn new(
        model: &WelfareModel<'_>,
        levels: Vec<usize>,
        welfare: f64,
        rounds: usize,
        method: Method,
    ) -> Self {
        Self {
            rho: model.grid().bits(&levels),
            levels,
            welfare,
            rounds,
            method,
            converged: true,
        }
    }
}

/// Default matching round budget: levels x CPs + CPs^2.
pub fn default_max_rounds(levels: usize, cp_count: usize) -> usize {
    levels * cp_count + cp_count * cp_count
}

/// Grid level maximizing `cp`'s own welfare term with every other CP held at
/// `others`. Capacity is not applied. Ties go to the smaller level.
pub fn standalone_request(
    model: &WelfareModel<'_>,
    cp: usize,
    others: &[usize],
    participants: CpSet,
) -> Result<usize> {
    if others.len() != model.cp_count() {
        return Err(Error::DimensionMismatch {
            expected: model.cp_count(),
            found: others.len(),
        });
    }
    let participants = participants.with(cp);
    let mut levels = others.to_vec();
    let mut best = (0, f64::NEG_INFINITY);
    for l in 0..model.grid().len() {
        levels[cp] = l;
        let term = model.evaluate_levels(&levels, participants).terms[cp];
        if term > best.1 {
            best = (l, term);
        }
    }
    Ok(best.0)
}

/// Exhaustive search over all feasible grid allocations of `participants`.
///
/// Non-participants hold level 0. Ties go to the lexicographically smallest
/// allocation vector.
pub fn brute_force_allocation(
    model: &WelfareModel<'_>,
    participants: CpSet,
) -> Result<AllocationOutcome> {
    let c = model.cp_count();
    let grid = model.grid();
    let members: Vec<usize> = participants.iter().filter(|&k| k < c).collect();
    let combinations = libm::pow(grid.len() as f64, members.len() as f64);
    if combinations > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            combinations,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let max_units = grid.max_units();
    let mut levels = vec![0usize; c];
    let mut best_levels = levels.clone();
    let mut best = model.evaluate_levels(&levels, participants).welfare;
    let mut evaluations = 1usize;
    let mut used = 0usize;
    // Odometer over members with the last member varying fastest, which visits
    // allocations in lexicographic order.
    loop {
        let mut pos = members.len();
        let advanced = loop {
            if pos == 0 {
                break false;
            }
            pos -= 1;
            let k = members[pos];
            if used < max_units {
                levels[k] += 1;
                used += 1;
                break true;
            }
            used -= levels[k];
            levels[k] = 0;
        };
        if !advanced {
            break;
        }
        let w = model.evaluate_levels(&levels, participants).welfare;
        evaluations += 1;
        if w > best {
            best = w;
            best_levels.copy_from_slice(&levels);
        }
    }
    Ok(AllocationOutcome::new(
        model,
        best_levels,
        best,
        evaluations,
        Method::BruteForce,
    ))
}

/// Swap-based deferred acceptance.
///
/// Each round, every CP without a held proposal proposes its standalone
/// request lowered by one grid step per earlier rejection. The MNO keeps the
/// welfare-maximizing feasible subset of all current proposals and rejects the
/// rest. Once no CP is rejected, single-step moves (grow, shrink, transfer one
/// step between two CPs, exchange two CPs' levels) are applied while any of
/// them strictly raises welfare. Both proposal rounds and applied moves count
/// toward `max_rounds`.
pub fn swap_deferred_acceptance(
    model: &WelfareModel<'_>,
    participants: CpSet,
    max_rounds: usize,
) -> Result<AllocationOutcome> {
    if max_rounds == 0 {
        return Err(Error::Invalid("max_rounds must be >= 1".into()));
    }
    let c = model.cp_count();
    let members: Vec<usize> = participants.iter().filter(|&k| k < c).collect();
    let max_units = model.grid().max_units();
    let mut levels = vec![0usize; c];
    let mut held = vec![false; c];
    let mut proposal = vec![0usize; c];
    let mut rejections = vec![0usize; c];
    let mut rounds = 0usize;

    let give_up = |levels: Vec<usize>, rounds: usize| {
        let welfare = model.evaluate_levels(&levels, participants).welfare;
        let mut last = AllocationOutcome::new(model, levels, welfare, rounds, Method::Matching);
        last.converged = false;
        Err(Error::NotConverged(Box::new(last)))
    };

    loop {
        if rounds == max_rounds {
            return give_up(levels, rounds);
        }
        rounds += 1;
        for &k in members.iter().filter(|&&k| !held[k]) {
            let request = standalone_request(model, k, &levels, participants)?;
            proposal[k] = request.saturating_sub(rejections[k]);
        }
        let accepted = accept_proposals(model, &members, &proposal, participants, max_units);
        let mut rejected_any = false;
        for (&k, &ok) in members.iter().zip(&accepted) {
            held[k] = ok;
            if ok {
                levels[k] = proposal[k];
            } else {
                levels[k] = 0;
                rejections[k] += 1;
                rejected_any = true;
            }
        }
        if !rejected_any {
            break;
        }
    }

    let mut welfare = model.evaluate_levels(&levels, participants).welfare;
    while let Some((next, w)) =
        best_move(model, &members, &levels, participants, max_units, welfare)
    {
        if rounds == max_rounds {
            return give_up(levels, rounds);
        }
        rounds += 1;
        levels = next;
        welfare = w;
    }
    Ok(AllocationOutcome::new(
        model,
        levels,
        welfare,
        rounds,
        Method::Matching,
    ))
}

/// Chooses which proposals the MNO keeps. Zero proposals are always kept.
fn accept_proposals(
    model: &WelfareModel<'_>,
    members: &[usize],
    proposal: &[usize],
    participants: CpSet,
    max_units: usize,
) -> Vec<bool> {
    let c = model.cp_count();
    let nonzero: Vec<usize> = (0..members.len())
        .filter(|&i| proposal[members[i]] > 0)
        .collect();
    let mut accepted = vec![true; members.len()];
    let total: usize = nonzero.iter().map(|&i| proposal[members[i]]).sum();
    if total <= max_units {
        return accepted;
    }
    if nonzero.len() <= EXACT_ACCEPTANCE_LIMIT {
        let n = nonzero.len();
        let mut best: Option<(u32, f64)> = None;
        for mask in (0..(1u32 << n)).rev() {
            let mut levels = vec![0usize; c];
            let mut units = 0;
            for (b, &i) in nonzero.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    levels[members[i]] = proposal[members[i]];
                    units += proposal[members[i]];
                }
            }
            if units > max_units {
                continue;
            }
            let w = model.evaluate_levels(&levels, participants).welfare;
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((mask, w));
            }
        }
        let mask = best.map_or(0, |(m, _)| m);
        for (b, &i) in nonzero.iter().enumerate() {
            accepted[i] = mask & (1 << b) != 0;
        }
    } else {
        let base = model.evaluate_levels(&vec![0; c], participants).welfare;
        let mut ranked: Vec<(usize, f64)> = nonzero
            .iter()
            .map(|&i| {
                let k = members[i];
                let mut levels = vec![0usize; c];
                levels[k] = proposal[k];
                let gain = model.evaluate_levels(&levels, participants).welfare - base;
                (i, gain / proposal[k] as f64)
            })
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut used = 0;
        for &i in &nonzero {
            accepted[i] = false;
        }
        for (i, _) in ranked {
            let units = proposal[members[i]];
            if used + units <= max_units {
                accepted[i] = true;
                used += units;
            }
        }
    }
    accepted
}

/// Best strictly improving single-step move, if any.
fn best_move(
    model: &WelfareModel<'_>,
    members: &[usize],
    levels: &[usize],
    participants: CpSet,
    max_units: usize,
    welfare: f64,
) -> Option<(Vec<usize>, f64)> {
    let top = model.grid().len() - 1;
    let used: usize = levels.iter().sum();
    let threshold = welfare + 1e-12 * welfare.abs().max(1.0);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut consider = |candidate: Vec<usize>| {
        let w = model.evaluate_levels(&candidate, participants).welfare;
        if w > threshold && best.as_ref().is_none_or(|(_, bw)| w > *bw) {
            best = Some((candidate, w));
        }
    };
    for &a in members {
        if levels[a] < top && used < max_units {
            let mut next = levels.to_vec();
            next[a] += 1;
            consider(next);
        }
        if levels[a] > 0 {
            let mut next = levels.to_vec();
            next[a] -= 1;
            consider(next);
        }
        for &b in members.iter().filter(|&&b| b != a) {
            if levels[a] > 0 && levels[b] < top {
                let mut next = levels.to_vec();
                next[a] -= 1;
                next[b] += 1;
                consider(next);
            }
            if a < b && levels[a] != levels[b] {
                let mut next = levels.to_vec();
                next.swap(a, b);
                consider(next);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welfare::fixtures::grid_scenario;
    use crate::welfare::social_welfare;

    #[test]
    fn grid_levels() {
        let g = StorageGrid::new(2.0, 7.0).unwrap();
        assert_eq!(g.levels(), &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(g.max_units(), 3);
        let g = StorageGrid::new(1e9 / 20.0, 1e9).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(*g.levels().last().unwrap(), 1e9);
        assert_eq!(StorageGrid::new(5.0, 0.0).unwrap().levels(), &[0.0]);
        assert!(StorageGrid::new(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_type_requests_nothing() {
        let sc = grid_scenario(2, 2, 2, 5, 0.8, 4, 0.05);
        let model = WelfareModel::new(&sc, &[0.0, 4.0]).unwrap();
        assert_eq!(
            standalone_request(&model, 0, &[0, 1], sc.all_cps()).unwrap(),
            0
        );
    }

    #[test]
    fn two_point_grid_scan() {
        let sc = grid_scenario(1, 2, 2, 3, 0.8, 2, 0.0);
        assert_eq!(sc.grid.len(), 2);
        let model = WelfareModel::new(&sc, &[6.0]).unwrap();
        let w0 = model.evaluate_levels(&[0], sc.all_cps()).welfare;
        let w1 = model.evaluate_levels(&[1], sc.all_cps()).welfare;
        let expected = usize::from(w1 > w0);
        assert_eq!(
            standalone_request(&model, 0, &[0], sc.all_cps()).unwrap(),
            expected
        );
    }

    #[test]
    fn single_cp_brute_force_is_max_of_levels() {
        let sc = grid_scenario(1, 2, 2, 4, 0.8, 3, 0.05);
        let model = WelfareModel::new(&sc, &[5.0]).unwrap();
        let out = brute_force_allocation(&model, sc.all_cps()).unwrap();
        let best = (0..3)
            .map(|l| model.evaluate_levels(&[l], sc.all_cps()).welfare)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(out.welfare, best);
        assert_eq!(out.rounds, 3);
        assert_eq!(out.method, Method::BruteForce);
    }

    #[test]
    fn all_zero_types_allocate_nothing() {
        let sc = grid_scenario(3, 2, 2, 4, 0.8, 4, 0.05);
        let model = WelfareModel::new(&sc, &[0.0; 3]).unwrap();
        let out = brute_force_allocation(&model, sc.all_cps()).unwrap();
        assert_eq!(out.levels, vec![0, 0, 0]);
        assert_eq!(out.welfare, 0.0);
        let out = swap_deferred_acceptance(&model, sc.all_cps(), 100).unwrap();
        assert_eq!(out.levels, vec![0, 0, 0]);
    }

    #[test]
    fn two_cp_five_level_regression() {
        // Regression fixture recorded from the enumeration itself.
        let sc = grid_scenario(2, 2, 2, 6, 0.9, 5, 0.05);
        let model = WelfareModel::new(&sc, &[2.0, 9.0]).unwrap();
        let out = brute_force_allocation(&model, sc.all_cps()).unwrap();
        assert_eq!(out.levels, vec![0, 3]);
        assert_eq!(out.rounds, 15);
        let slow = social_welfare(&sc, &out.rho, &[2.0, 9.0], sc.all_cps()).unwrap();
        assert!((out.welfare - slow).abs() <= 1e-9 * slow.abs());
    }

    #[test]
    fn brute_force_guard() {
        let sc = grid_scenario(3, 1, 1, 2, 0.8, 2, 0.0);
        let mut big = sc.clone();
        big.grid = StorageGrid::new(1e-3, big.capacity()).unwrap();
        let model = WelfareModel::new(&big, &[1.0; 3]).unwrap();
        assert!(matches!(
            brute_force_allocation(&model, big.all_cps()),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn zero_capacity_allocates_nothing_in_one_round() {
        let mut sc = grid_scenario(3, 2, 2, 4, 0.8, 3, 0.05);
        sc.topology.sbs_storage_capacity = 0.0;
        sc.grid = StorageGrid::new(2.0, 0.0).unwrap();
        let model = WelfareModel::new(&sc, &[3.0, 5.0, 1.0]).unwrap();
        let out = swap_deferred_acceptance(&model, sc.all_cps(), 10).unwrap();
        assert_eq!(out.levels, vec![0, 0, 0]);
        assert_eq!(out.rounds, 1);
    }

    #[test]
    fn non_binding_decoupled_gives_standalone_requests() {
        let sc = grid_scenario(3, 2, 2, 8, 0.9, 7, 0.0);
        let types = [1.0, 3.0, 6.0];
        let model = WelfareModel::new(&sc, &types).unwrap();
        let standalone: Vec<usize> = (0..3)
            .map(|k| standalone_request(&model, k, &[0, 0, 0], sc.all_cps()).unwrap())
            .collect();
        let out = swap_deferred_acceptance(&model, sc.all_cps(), 100).unwrap();
        if standalone.iter().sum::<usize>() <= sc.grid.max_units() {
            assert_eq!(out.levels, standalone);
        }
        let exact = brute_force_allocation(&model, sc.all_cps()).unwrap();
        assert_eq!(out.welfare, exact.welfare);
    }

    #[test]
    fn matching_tracks_brute_force_when_capacity_binds() {
        let sc = grid_scenario(3, 2, 3, 6, 0.7, 4, 0.05);
        let model = WelfareModel::new(&sc, &[4.0, 8.0, 12.0]).unwrap();
        let exact = brute_force_allocation(&model, sc.all_cps()).unwrap();
        let matched = swap_deferred_acceptance(&model, sc.all_cps(), 100).unwrap();
        assert!(matched.levels.iter().sum::<usize>() <= sc.grid.max_units());
        assert!(matched.welfare <= exact.welfare);
        assert!(matched.welfare >= 0.95 * exact.welfare);
    }

    #[test]
    fn non_convergence_reports_last_iterate() {
        let sc = grid_scenario(3, 2, 3, 6, 0.7, 4, 0.05);
        let model = WelfareModel::new(&sc, &[4.0, 8.0, 12.0]).unwrap();
        match swap_deferred_acceptance(&model, sc.all_cps(), 1) {
            Ok(out) => assert_eq!(out.rounds, 1),
            Err(Error::NotConverged(last)) => {
                assert!(!last.converged);
                assert_eq!(last.rounds, 1);
            }
            Err(e) => panic!("{e}"),
        }
    }
}
